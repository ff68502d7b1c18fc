//! Prompt text resources and their assembly.
//!
//! Templates live under `resources/prompts` with `{NAME}` placeholders.
//! Assembly is a pure function of its inputs, which is what lets a recorded
//! transcript be replayed byte for byte.

use serde::{Deserialize, Serialize};

use crate::cop::CopKind;

const CANDIDATES: &str = include_str!("../resources/prompts/candidates.txt");
const REDUCTION: &str = include_str!("../resources/prompts/reduction.txt");
const CODE_TEMPLATE: &str = include_str!("../resources/prompts/code_template.txt");
const REFINE: &str = include_str!("../resources/prompts/refine.txt");
const INIT: &str = include_str!("../resources/prompts/init.txt");
const CROSSOVER_E2: &str = include_str!("../resources/prompts/crossover_e2.txt");
const MUTATION_M1: &str = include_str!("../resources/prompts/mutation_m1.txt");
const REDUCTION_SKELETON: &str = include_str!("../resources/prompts/reduction_template.py");

/// Skeleton the code-template prompt asks the model to complete.
pub const HEURISTIC_TEMPLATE: &str = include_str!("../resources/prompts/heuristic_template.py");

pub const INSTANCE_MAP: &str = "convert_input_A_to_B";
pub const SOLUTION_MAP: &str = "convert_solution_B_to_A";
pub const SOLVE_ENTRY: &str = "solve_B";

/// Replaces each `{NAME}` in one left-to-right pass, so substituted text is
/// never rescanned. Unknown braces are copied through untouched.
pub fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + values.iter().map(|v| v.1.len()).sum::<usize>());
    let mut rest = template;
    'scan: while let Some(pos) = rest.find('{') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos + 1..];
        for (name, value) in values {
            if tail.starts_with(name) && tail[name.len()..].starts_with('}') {
                out.push_str(value);
                rest = &tail[name.len() + 1..];
                continue 'scan;
            }
        }
        out.push('{');
        rest = tail;
    }
    out.push_str(rest);
    out
}

/// A few sentences describing a problem without naming it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProblemDescription(String);

impl ProblemDescription {
    pub fn new(text: impl Into<String>) -> Option<Self> {
        let text = text.into();
        let trimmed = text.trim();
        (!trimmed.is_empty()).then(|| Self(trimmed.to_string()))
    }

    /// The stock description of a root problem.
    pub fn root(kind: CopKind) -> Self {
        Self(root_description(kind).to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

fn root_description(kind: CopKind) -> &'static str {
    match kind {
        CopKind::Tsp => "Given a set of N nodes with their 2D coordinates, the problem involves finding the shortest route that visits each node exactly once and returns to the starting node.",
        CopKind::Cvrp => "Given a set of N customers and a fleet of vehicles with limited capacity, the problem involves finding a corresponding set of optimal routes to deliver goods to all customers.",
        CopKind::Bpp => "Given a set of N items with different sizes and some bins each with fixed capacity, the problem involves placing each item inside one of the bins in a way that minimizes the number of bins used without exceeding the bin capacity.",
        CopKind::Obpp => "Given an item with certain size and a set of M bins each with finite capacity, the problem involves finding a priority score for each bin. The bin with the highest priority score will be selected for inserting the item.",
        CopKind::Kp => "Given a set of N items with weights and values, the problem involves selecting a subset of items that maximizes the total value without exceeding the knapsack's weight capacity.",
        CopKind::Mkp => "Given a set of N items with values and M-dimensional weights, the problem involves selecting a subset of items to maximize the total value without exceeding the multi-dimensional maximum weight constraints.",
    }
}

/// The problem-specific blanks of the reduction skeleton.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionTemplate {
    pub cop_kind: CopKind,
    /// Parameter list of the instance map, one per problem input.
    pub params: String,
    pub args_doc: String,
    pub return_doc: String,
    pub placeholder: String,
}

impl ReductionTemplate {
    pub fn for_kind(kind: CopKind) -> Self {
        let (params, args, ret, placeholder): (&str, &str, &str, &str) = match kind {
            CopKind::Tsp => (
                "coord_matrix, distance_matrix",
                "coord_matrix (np.ndarray): A Nx2 matrix storing the 2D coordinates of the nodes.\n\
                 distance_matrix (np.ndarray): A NxN matrix where the entry at i-th row and j-th column (or vice versa) stores the Euclidean distance between nodes i and j.",
                "route: A Numpy 1D array of length N storing the unique node IDs to visit in order.",
                "route = ...\n\nreturn route",
            ),
            CopKind::Cvrp => (
                "coord_matrix, distance_matrix, demands, capacity",
                "coord_matrix (np.ndarray): A (N+1)-by-2 matrix storing the Euclidean coordinates of the depot (first row) and the customers. \n\
                 distance_matrix (np.ndarray): A (N+1)-by-(N+1) distance matrix.\n\
                 demands (np.ndarray): An array of length N+1 storing the customer demands, where the first entry is 0 (placeholder for the depot).\n\
                 capacity (int): The capacity of each vehicle for satisfying the customer demands.",
                "routes (List[List[int]]): A list of routes; each route is represented as a list of unique customer indices (1 to N) to visit in order, subject to the capacity constraint.",
                "routes = []\n...\n\nreturn routes",
            ),
            CopKind::Bpp => (
                "items, bins",
                "items (np.ndarray): Array of length N storing the item sizes to be considered in exact order.\n\
                 bins (np.ndarray): Array of capacities for each bin.",
                "packed_bins (np.ndarray): Array of remaining capacities for each bin after packing all items.",
                "packed_bins = ...\n...\n\nreturn packed_bins",
            ),
            CopKind::Obpp => (
                "item_size, bin_caps",
                "item_size (float): Size of the item to be added to one of the bins.\n\
                 bin_caps (np.ndarray): Array of length M storing capacities of each bin.",
                "scores (np.ndarray): Array of priority scores for the bins.",
                "scores = ...\n...\n\nreturn scores",
            ),
            CopKind::Kp => (
                "weights, values, capacity",
                "weights (np.ndarray): A 1D float array of length N storing the item weights.\n\
                 values (np.ndarray): A 1D float array of length N storing the associated item values.\n\
                 capacity (float): The weight capacity of the knapsack.",
                "items: A list storing the indices of selected items subject to the capacity constraint.",
                "items = []\n...\n\nreturn items",
            ),
            CopKind::Mkp => (
                "values, weights, constraints",
                "values (np.ndarray): A 1D float array of length N storing the item values.\n\
                 weights (np.ndarray): A (M x N) float matrix storing the multi-dimensional weights, where each row is associated with a constraint.\n\
                 constraints (np.ndarray): A 1D float array of length M storing weight constraints.",
                "items: A list storing the indices of selected items subject to the weight constraints.",
                "items = []\n...\n\nreturn items",
            ),
        };
        Self {
            cop_kind: kind,
            params: params.to_string(),
            args_doc: args.to_string(),
            return_doc: ret.to_string(),
            placeholder: placeholder.to_string(),
        }
    }

    /// The full reduction skeleton with this problem's blanks filled in.
    pub fn render(&self) -> String {
        REDUCTION_SKELETON
            .replace("[PARAMS]", &self.params)
            .replace("[ARGS]", &indent(&self.args_doc))
            .replace("[RETURN]", &indent(&self.return_doc))
            .replace("[PLACEHOLDER]", &indent(&self.placeholder))
    }
}

fn indent(text: &str) -> String {
    text.lines()
        .map(|l| if l.is_empty() { String::new() } else { format!("    {l}") })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn candidates_prompt(problem_a: &ProblemDescription, m_init: usize) -> String {
    fill(
        CANDIDATES,
        &[("PROBLEM_A", problem_a.as_str()), ("M_INIT", &m_init.to_string())],
    )
}

pub fn reduction_prompt(
    problem_a: &ProblemDescription,
    problem_b: &ProblemDescription,
    template: &ReductionTemplate,
) -> String {
    fill(
        REDUCTION,
        &[
            ("PROBLEM_A", problem_a.as_str()),
            ("PROBLEM_B", problem_b.as_str()),
            ("REDUCTION_TEMPLATE", &template.render()),
        ],
    )
}

pub fn code_template_prompt(reduction_code: &str) -> String {
    fill(
        CODE_TEMPLATE,
        &[
            ("REDUCTION_FUNCTIONS", reduction_code),
            ("HEURISTIC_TEMPLATE", HEURISTIC_TEMPLATE),
        ],
    )
}

pub fn refine_prompt(
    problem_a: &ProblemDescription,
    problem_b: &ProblemDescription,
    reduction_code: &str,
) -> String {
    fill(
        REFINE,
        &[
            ("PROBLEM_A", problem_a.as_str()),
            ("PROBLEM_B", problem_b.as_str()),
            ("REDUCTION_FUNCTIONS", reduction_code),
        ],
    )
}

pub fn init_prompt(problem_b: &ProblemDescription, code_template: &str) -> String {
    fill(
        INIT,
        &[
            ("PROBLEM_B", problem_b.as_str()),
            ("HEURISTIC_TEMPLATE", code_template),
        ],
    )
}

/// Parent algorithm as shown to the model: description and code.
#[derive(Debug, Clone, Copy)]
pub struct ParentView<'a> {
    pub description: &'a str,
    pub code: &'a str,
}

pub fn crossover_prompt(
    problem_b: &ProblemDescription,
    code_template: &str,
    first: ParentView<'_>,
    second: ParentView<'_>,
) -> String {
    fill(
        CROSSOVER_E2,
        &[
            ("PROBLEM_B", problem_b.as_str()),
            ("ALGORITHM_1", first.description),
            ("CODE_1", first.code),
            ("ALGORITHM_2", second.description),
            ("CODE_2", second.code),
            ("HEURISTIC_TEMPLATE", code_template),
        ],
    )
}

pub fn mutation_prompt(
    problem_b: &ProblemDescription,
    code_template: &str,
    parent: ParentView<'_>,
) -> String {
    fill(
        MUTATION_M1,
        &[
            ("PROBLEM_B", problem_b.as_str()),
            ("ALGORITHM", parent.description),
            ("CODE", parent.code),
            ("HEURISTIC_TEMPLATE", code_template),
        ],
    )
}

/// Appends what went wrong with the previous answer so the model can
/// correct it on the next attempt.
pub fn with_feedback(prompt: &str, failure: &str) -> String {
    format!("{prompt}\n\nYour previous answer could not be used: {failure}. Please try again and follow the required format.")
}
