//! Native stand-ins for guest programs.
//!
//! A program is recognized by a `# fixture: NAME [ARG]` comment anywhere in
//! its code. Reduction fixtures keep the instance unchanged and only differ
//! in how they map solutions back; heuristic fixtures solve the instance
//! directly. This lets the whole engine run without a Python runner.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::codec::encode_solution;
use super::{
    BatchOutcome, ErrorClass, ExecRequest, ExecResponse, GuestError, InstanceOutcome, Sandbox,
    SandboxError,
};
use crate::cop::baseline::{nearest_neighbor, pack};
use crate::cop::objective::route_cost;
use crate::cop::online::{best_fit_scores, first_fit_scores};
use crate::cop::{fits, simulate_online_packing, Baseline, Instance};

pub const FIXTURE_MARKER: &str = "# fixture:";

#[derive(Debug, Clone, PartialEq)]
struct Program {
    name: String,
    arg: Option<String>,
}

impl Program {
    fn parse(code: &str) -> Option<Self> {
        let line = code.lines().find_map(|l| {
            let at = l.find(FIXTURE_MARKER)?;
            Some(&l[at + FIXTURE_MARKER.len()..])
        })?;
        let mut words = line.split_whitespace();
        Some(Program {
            name: words.next()?.to_string(),
            arg: words.next().map(str::to_string),
        })
    }

    fn num(&self, default: f64) -> f64 {
        self.arg.as_deref().and_then(|a| a.parse().ok()).unwrap_or(default)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Reduction {
    Identity,
    /// Loses the last element of the mapped-back solution.
    DropLast,
    /// Swaps the second and third visited nodes of a tour.
    SwapPair,
}

impl Reduction {
    fn from_program(p: &Program) -> Option<Self> {
        Some(match p.name.as_str() {
            "identity" => Reduction::Identity,
            "drop_last" => Reduction::DropLast,
            "swap_pair" => Reduction::SwapPair,
            _ => return None,
        })
    }

    fn map_back(self, solution: Value) -> Value {
        let Value::Array(mut items) = solution else {
            return solution;
        };
        match self {
            Reduction::Identity => {}
            Reduction::DropLast => {
                items.pop();
            }
            Reduction::SwapPair => {
                if items.len() >= 3 {
                    items.swap(1, 2);
                }
            }
        }
        Value::Array(items)
    }
}

/// Executes fixture programs in-process on a helper thread, honouring the
/// batch budget.
#[derive(Debug, Default)]
pub struct FixtureSandbox {
    executions: AtomicUsize,
}

impl FixtureSandbox {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of batches executed so far.
    pub fn executions(&self) -> usize {
        self.executions.load(Ordering::Relaxed)
    }

    /// Fixture comment for a program, as generated code would carry it.
    pub fn marker(name: &str, arg: Option<&str>) -> String {
        match arg {
            Some(a) => format!("{FIXTURE_MARKER} {name} {a}"),
            None => format!("{FIXTURE_MARKER} {name}"),
        }
    }
}

impl Sandbox for FixtureSandbox {
    fn execute(&self, request: &ExecRequest) -> Result<ExecResponse, SandboxError> {
        self.executions.fetch_add(1, Ordering::Relaxed);
        let reduction = match Program::parse(&request.reduction_code)
            .as_ref()
            .and_then(Reduction::from_program)
        {
            Some(r) => r,
            None => return Ok(ExecResponse::crashed(&request.id, "reduction code failed to load")),
        };
        let Some(program) = Program::parse(&request.heuristic_code) else {
            return Ok(ExecResponse::crashed(&request.id, "heuristic code failed to load"));
        };
        if !KNOWN.contains(&program.name.as_str()) {
            return Ok(ExecResponse::crashed(
                &request.id,
                format!("NameError: unknown program {}", program.name),
            ));
        }

        let cancel = Arc::new(AtomicBool::new(false));
        let (tx, rx) = mpsc::channel();
        let instances: Vec<Instance> = request.instances.iter().map(|g| g.instance.clone()).collect();
        let flag = Arc::clone(&cancel);
        let start = Instant::now();
        thread::spawn(move || {
            let outcomes: Vec<InstanceOutcome> = instances
                .iter()
                .enumerate()
                .map(|(k, inst)| match run(&program, k, inst, &flag) {
                    Ok(v) => InstanceOutcome::Solution(reduction.map_back(v)),
                    Err(e) => InstanceOutcome::Error(e),
                })
                .collect();
            let _ = tx.send(outcomes);
        });
        let budget = Duration::from_secs_f64(request.timeout_seconds);
        match rx.recv_timeout(budget) {
            Ok(outcomes) => Ok(ExecResponse {
                id: request.id.clone(),
                outcomes,
                batch: BatchOutcome::Completed,
                wall_time_seconds: start.elapsed().as_secs_f64(),
                message: None,
            }),
            Err(_) => {
                cancel.store(true, Ordering::Relaxed);
                Ok(ExecResponse::timeout(&request.id, start.elapsed().as_secs_f64()))
            }
        }
    }
}

const KNOWN: &[&str] = &[
    "nearest_neighbor",
    "index_order",
    "cvrp_nearest",
    "best_fit",
    "first_fit",
    "ratio_greedy",
    "value_greedy",
    "invalid",
    "raise",
    "raise_on",
    "sleep",
    "nan",
    "bad_shape",
];

fn exception(message: impl Into<String>) -> GuestError {
    GuestError {
        class: ErrorClass::Exception,
        message: message.into(),
        traceback: String::new(),
    }
}

fn unsupported(p: &Program, inst: &Instance) -> GuestError {
    exception(format!("TypeError: {} cannot handle {} input", p.name, inst.kind()))
}

fn run(p: &Program, k: usize, inst: &Instance, cancel: &AtomicBool) -> Result<Value, GuestError> {
    match p.name.as_str() {
        "nearest_neighbor" => match inst {
            Instance::Tsp(t) if !t.coords.is_empty() => {
                let start = p.num(0.0) as usize % t.coords.len();
                Ok(json!(nearest_neighbor(&t.distances, start)))
            }
            _ => Err(unsupported(p, inst)),
        },
        "index_order" => match inst {
            Instance::Tsp(t) => Ok(json!((0..t.coords.len()).collect::<Vec<_>>())),
            _ => Err(unsupported(p, inst)),
        },
        "cvrp_nearest" => match inst {
            Instance::Cvrp(c) => Ok(json!(cvrp_nearest(c, p.num(1.0)))),
            _ => Err(unsupported(p, inst)),
        },
        "best_fit" | "first_fit" => {
            let rule = if p.name == "best_fit" { Baseline::BestFit } else { Baseline::FirstFit };
            match inst {
                Instance::Bpp(b) => {
                    // template shape: remaining capacity of each of N bins
                    let order: Vec<usize> = (0..b.item_sizes.len()).collect();
                    let assignment = pack(&b.item_sizes, &order, b.bin_capacity, rule);
                    let mut residual = vec![b.bin_capacity; b.item_sizes.len()];
                    for (j, &bin) in assignment.iter().enumerate() {
                        residual[bin] -= b.item_sizes[j];
                    }
                    Ok(json!(residual))
                }
                Instance::Obpp(o) => {
                    // a weight on the best-fit term; 1 is pure best fit
                    let w = p.num(1.0);
                    let mut scorer = |item: f64, rem: &[f64]| -> Vec<f64> {
                        let oldest = first_fit_scores(item, rem);
                        if rule == Baseline::FirstFit {
                            return oldest;
                        }
                        best_fit_scores(item, rem)
                            .iter()
                            .zip(oldest)
                            .map(|(t, o)| w * t + (1.0 - w) * o)
                            .collect()
                    };
                    let sol = simulate_online_packing(o, &mut scorer)
                        .map_err(|e| exception(e.to_string()))?;
                    Ok(encode_solution(&sol))
                }
                _ => Err(unsupported(p, inst)),
            }
        }
        "ratio_greedy" | "value_greedy" => {
            // fill only up to this fraction of each capacity
            let frac = p.num(1.0);
            let by_ratio = p.name == "ratio_greedy";
            match inst {
                Instance::Kp(kp) => {
                    let key = |j: usize| if by_ratio { kp.values[j] / kp.weights[j] } else { kp.values[j] };
                    let mut order: Vec<usize> = (0..kp.values.len()).collect();
                    order.sort_by(|&a, &b| key(b).total_cmp(&key(a)));
                    let mut load = 0.0;
                    let mut chosen = Vec::new();
                    for j in order {
                        if fits(load + kp.weights[j], frac * kp.capacity) {
                            load += kp.weights[j];
                            chosen.push(j);
                        }
                    }
                    Ok(json!(chosen))
                }
                Instance::Mkp(m) => {
                    let key = |j: usize| {
                        let w: f64 = m.weights.iter().map(|row| row[j]).sum();
                        if by_ratio { m.values[j] / w } else { m.values[j] }
                    };
                    let mut order: Vec<usize> = (0..m.values.len()).collect();
                    order.sort_by(|&a, &b| key(b).total_cmp(&key(a)));
                    let mut loads = vec![0.0; m.knapsacks()];
                    let mut sacks = vec![Vec::new(); m.knapsacks()];
                    for j in order {
                        if let Some(k) = (0..loads.len())
                            .find(|&k| fits(loads[k] + m.weights[k][j], frac * m.constraints[k]))
                        {
                            loads[k] += m.weights[k][j];
                            sacks[k].push(j);
                        }
                    }
                    Ok(json!(sacks))
                }
                _ => Err(unsupported(p, inst)),
            }
        }
        "invalid" => Ok(json!([])),
        "raise" => Err(exception("ZeroDivisionError: division by zero")),
        "raise_on" => {
            if k == p.num(0.0) as usize {
                Err(exception("ZeroDivisionError: division by zero"))
            } else {
                // a trivially valid answer where one exists
                match inst {
                    Instance::Tsp(t) => Ok(json!((0..t.coords.len()).collect::<Vec<_>>())),
                    _ => Ok(json!([])),
                }
            }
        }
        "sleep" => {
            let until = Instant::now() + Duration::from_secs_f64(p.num(1.0));
            while Instant::now() < until {
                if cancel.load(Ordering::Relaxed) {
                    return Err(exception("cancelled"));
                }
                thread::sleep(Duration::from_millis(5));
            }
            Ok(json!([]))
        }
        "nan" => Err(GuestError {
            class: ErrorClass::NonFinite,
            message: "priority scores contain NaN".into(),
            traceback: String::new(),
        }),
        "bad_shape" => Err(GuestError {
            class: ErrorClass::BadShape,
            message: "solve_B returned a string".into(),
            traceback: String::new(),
        }),
        other => Err(exception(format!("NameError: {other}"))),
    }
}

/// Nearest feasible customer first; a new route starts when nothing fits
/// within `frac` of the capacity (or at all).
fn cvrp_nearest(c: &crate::cop::CvrpInstance, frac: f64) -> Vec<Vec<usize>> {
    let n = c.demands.len() - 1;
    let mut left: Vec<usize> = (1..=n).collect();
    let mut routes = Vec::new();
    while !left.is_empty() {
        let mut route: Vec<usize> = Vec::new();
        let mut load = 0.0;
        let mut at = 0;
        loop {
            let limit = if route.is_empty() { c.capacity } else { frac * c.capacity };
            let next = left
                .iter()
                .copied()
                .filter(|&j| fits(load + c.demands[j], limit))
                .min_by(|&a, &b| c.distances[at][a].total_cmp(&c.distances[at][b]));
            let Some(j) = next else { break };
            route.push(j);
            load += c.demands[j];
            at = j;
            left.retain(|&x| x != j);
        }
        debug_assert!(route_cost(&c.distances, &route).is_finite());
        routes.push(route);
    }
    routes
}

/// Wraps a fixture program as generated code would look.
#[cfg(test)]
pub(crate) fn program_text(entry: &str, params: &str, name: &str, arg: Option<&str>) -> String {
    format!(
        "import numpy as np\n\ndef {entry}({params}):\n    {}\n    raise NotImplementedError",
        FixtureSandbox::marker(name, arg)
    )
}
