//! A deterministic stand-in model that answers every prompt of the pipeline
//! with programs the fixture sandbox can execute.
//!
//! Answers vary with a call counter, so a run must issue its requests in a
//! fixed order (which the engine does for non-live clients). Some answers
//! are deliberately unusable to exercise the retry and failure paths.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::cop::CopKind;
use crate::llm::{ChatParams, LlmClient, MockReply, MockResponder};
use crate::prompts::{ReductionTemplate, SOLVE_ENTRY};
use crate::sandbox::FixtureSandbox;

fn program(name: &str, arg: Option<&str>, params: &str, entry: &str) -> String {
    format!(
        "import numpy as np\n\ndef {entry}({params}):\n    {}\n    raise NotImplementedError",
        FixtureSandbox::marker(name, arg)
    )
}

fn reduction_code(kind: CopKind, name: &str) -> String {
    let params = ReductionTemplate::for_kind(kind).params;
    format!(
        "import numpy as np\n\ndef convert_input_A_to_B({params}):\n    {}\n    return ({params})\n\n\ndef convert_solution_B_to_A(solution_B):\n    return solution_B",
        FixtureSandbox::marker(name, None)
    )
}

/// Which map-back a candidate reduction uses: some are lossy so that
/// scores differ and refinement has something to fix.
fn reduction_for(kind: CopKind, index: usize) -> &'static str {
    match (kind, index % 2) {
        (CopKind::Tsp, 1) => "swap_pair",
        (CopKind::Kp, 1) => "drop_last",
        _ => "identity",
    }
}

fn heuristic_program(kind: CopKind, k: usize) -> (String, String) {
    let frac = format!("{:.2}", 0.5 + 0.05 * (k % 11) as f64);
    let (name, arg, what): (&str, Option<String>, String) = match kind {
        CopKind::Tsp if k % 5 == 4 => ("index_order", None, "Visit nodes in index order".into()),
        CopKind::Tsp => {
            let start = (k * 7) % 50;
            ("nearest_neighbor", Some(start.to_string()), format!("Greedy nearest unvisited node from node {start}"))
        }
        CopKind::Cvrp => ("cvrp_nearest", Some(frac.clone()), format!("Nearest feasible customer, closing routes at {frac} of capacity")),
        CopKind::Bpp if k % 2 == 0 => ("best_fit", None, "Place each item into the tightest bin".into()),
        CopKind::Bpp => ("first_fit", None, "Place each item into the first bin that fits".into()),
        CopKind::Obpp if k % 6 == 5 => ("first_fit", None, "Prefer the earliest opened bin".into()),
        CopKind::Obpp => {
            let w = format!("{:.1}", 0.1 * (k % 11) as f64);
            ("best_fit", Some(w.clone()), format!("Blend leftover space and bin age with weight {w}"))
        }
        CopKind::Kp | CopKind::Mkp if k % 4 == 3 => ("value_greedy", Some(frac.clone()), format!("Take the most valuable items up to {frac} of capacity")),
        CopKind::Kp | CopKind::Mkp => ("ratio_greedy", Some(frac.clone()), format!("Take items by value density up to {frac} of capacity")),
    };
    let params = "input_B";
    (what, program(name, arg.as_deref(), params, SOLVE_ENTRY))
}

/// Heuristic answer number `k`: every 13th is a program that raises and
/// every 17th omits the description braces.
fn heuristic_answer(kind: CopKind, k: usize) -> String {
    if k % 13 == 12 {
        return format!("{{Divide by the item count}}\n```python\n{}\n```", program("raise", None, "input_B", SOLVE_ENTRY));
    }
    let (description, code) = heuristic_program(kind, k);
    if k % 17 == 16 {
        return format!("{description}\n```python\n{code}\n```");
    }
    format!("{{{description}}}\n```python\n{code}\n```")
}

/// Index n from a reduction prompt mentioning "Problem B: Problem Bn ...".
fn candidate_index(prompt: &str) -> usize {
    prompt
        .split("Problem B: Problem B")
        .nth(1)
        .map(|rest| rest.chars().take_while(char::is_ascii_digit).collect::<String>())
        .and_then(|d| d.parse::<usize>().ok())
        .map_or(0, |n| n.saturating_sub(1))
}

fn requested_count(prompt: &str) -> usize {
    prompt
        .split("devise ")
        .nth(1)
        .and_then(|rest| rest.split_whitespace().next())
        .and_then(|n| n.parse().ok())
        .unwrap_or(1)
}

/// Responder for one problem kind.
pub fn scripted_responder(kind: CopKind) -> MockResponder {
    let counter = AtomicUsize::new(0);
    let heuristics = MockReply::func(move |_| heuristic_answer(kind, counter.fetch_add(1, Ordering::Relaxed)));
    let operator_counter = AtomicUsize::new(1000);
    let offspring = MockReply::func(move |_| heuristic_answer(kind, operator_counter.fetch_add(1, Ordering::Relaxed)));
    MockResponder::new()
        .on("I have 2 existing algorithms", offspring)
        .on("I have one algorithm with its code", MockReply::func({
            let c = AtomicUsize::new(5000);
            move |_| heuristic_answer(kind, c.fetch_add(1, Ordering::Relaxed))
        }))
        .on("I need help design a novel", heuristics)
        .on("Please help me modify the following code", MockReply::fixed(format!(
            "```python\n{}\n```",
            reduction_code(kind, "identity")
        )))
        .on("fill in the blanks", MockReply::fixed(format!(
            "```python\nfrom typing import Tuple\n\ndef {SOLVE_ENTRY}(input_B: Tuple) -> list:\n    '''\n    Args:\n    input_B: the reduced instance.\n\n    Returns:\n    The reduced solution.\n    '''\n\n    return solution_B\n```"
        )))
        .on("Implement 2 Python functions", MockReply::func(move |prompt| {
            format!("```python\n{}\n```", reduction_code(kind, reduction_for(kind, candidate_index(prompt))))
        }))
        .on("Please help me devise", MockReply::func(|prompt| {
            (1..=requested_count(prompt))
                .map(|i| format!("{{{{Problem B{i} involves choosing among weighted items under variant rule {i}.}}}}"))
                .collect::<Vec<_>>()
                .join("\n")
        }))
}

/// Mock client with the scripted responder and default chat settings.
pub fn scripted_client(kind: CopKind, params: ChatParams) -> LlmClient {
    LlmClient::mock(params, scripted_responder(kind))
}
