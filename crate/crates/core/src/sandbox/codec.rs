//! Conversion between instances/solutions and the plain JSON data the guest
//! functions consume and produce.

use serde_json::{json, Value};

use crate::cop::{CopKind, Instance, Solution};

/// Positional arguments of the instance map, in the order its signature
/// declares them for each problem.
pub fn guest_args(instance: &Instance) -> Vec<Value> {
    match instance {
        Instance::Tsp(t) => vec![json!(t.coords), json!(t.distances)],
        Instance::Cvrp(c) => vec![
            json!(c.coords),
            json!(c.distances),
            json!(c.demands),
            json!(c.capacity),
        ],
        // one bin per item is always enough
        Instance::Bpp(b) => vec![
            json!(b.item_sizes),
            json!(vec![b.bin_capacity; b.item_sizes.len()]),
        ],
        // the guest calls the instance map once per arriving item with the
        // feasible bins' remaining capacities; nothing is passed up front
        Instance::Obpp(_) => Vec::new(),
        Instance::Kp(k) => vec![json!(k.weights), json!(k.values), json!(k.capacity)],
        Instance::Mkp(m) => vec![json!(m.values), json!(m.weights), json!(m.constraints)],
    }
}

fn index(v: &Value) -> Result<usize, String> {
    if let Some(u) = v.as_u64() {
        return Ok(u as usize);
    }
    match v.as_f64() {
        Some(f) if f >= 0.0 && f.fract() == 0.0 && f < 1e15 => Ok(f as usize),
        _ => Err(format!("expected a nonnegative integer index, got {v}")),
    }
}

fn index_list(v: &Value) -> Result<Vec<usize>, String> {
    v.as_array()
        .ok_or_else(|| format!("expected a list of indices, got {}", short(v)))?
        .iter()
        .map(index)
        .collect()
}

fn nested_index_lists(v: &Value) -> Result<Vec<Vec<usize>>, String> {
    v.as_array()
        .ok_or_else(|| format!("expected a list of lists, got {}", short(v)))?
        .iter()
        .map(index_list)
        .collect()
}

fn short(v: &Value) -> String {
    let s = v.to_string();
    if s.len() > 80 {
        format!("{}...", &s[..80])
    } else {
        s
    }
}

/// Reads a guest solution for a problem of `kind`. Shape errors are
/// reported as text; feasibility is left to validation.
pub fn decode_solution(kind: CopKind, payload: &Value) -> Result<Solution, String> {
    Ok(match kind {
        CopKind::Tsp => Solution::Tsp(index_list(payload)?),
        CopKind::Cvrp => Solution::Cvrp(nested_index_lists(payload)?),
        CopKind::Bpp => {
            let items = payload
                .as_array()
                .ok_or_else(|| format!("expected a list, got {}", short(payload)))?;
            if items.iter().all(Value::is_array) && !items.is_empty() {
                Solution::Bpp(nested_index_lists(payload)?)
            } else {
                let residual = items
                    .iter()
                    .map(|x| x.as_f64().ok_or_else(|| format!("expected a number, got {x}")))
                    .collect::<Result<Vec<f64>, _>>()?;
                Solution::BppResidual(residual)
            }
        }
        CopKind::Obpp => Solution::Obpp(index_list(payload)?),
        CopKind::Kp => Solution::Kp(index_list(payload)?),
        CopKind::Mkp => match payload.as_array() {
            Some(items) if items.iter().all(Value::is_array) && !items.is_empty() => {
                Solution::Mkp(nested_index_lists(payload)?)
            }
            // a flat selection is read as the first-fit knapsack assignment;
            // that is done by the caller, which knows the instance
            _ => return Err(String::from("flat selection needs the instance")),
        },
    })
}

/// Like `decode_solution` but able to place a flat item selection into
/// knapsacks for the multi-knapsack problem.
pub fn decode_for_instance(instance: &Instance, payload: &Value) -> Result<Solution, String> {
    if let (Instance::Mkp(m), Some(items)) = (instance, payload.as_array()) {
        if !items.iter().all(Value::is_array) || items.is_empty() {
            let selected = index_list(payload)?;
            let mut loads = vec![0.0; m.knapsacks()];
            let mut sacks = vec![Vec::new(); m.knapsacks()];
            for j in selected {
                if j >= m.values.len() {
                    // keep it so validation reports the bad index
                    if let Some(first) = sacks.first_mut() {
                        first.push(j);
                    }
                    continue;
                }
                let k = (0..loads.len())
                    .find(|&k| crate::cop::fits(loads[k] + m.weights[k][j], m.constraints[k]))
                    .unwrap_or(0);
                loads[k] += m.weights[k][j];
                sacks[k].push(j);
            }
            return Ok(Solution::Mkp(sacks));
        }
    }
    decode_solution(instance.kind(), payload)
}

/// Plain JSON form of a solution, as a guest would return it.
pub fn encode_solution(solution: &Solution) -> Value {
    match solution {
        Solution::Tsp(t) => json!(t),
        Solution::Cvrp(r) => json!(r),
        Solution::Bpp(b) => json!(b),
        Solution::BppResidual(r) => json!(r),
        Solution::Obpp(a) => json!(a),
        Solution::Kp(s) => json!(s),
        Solution::Mkp(s) => json!(s),
    }
}
