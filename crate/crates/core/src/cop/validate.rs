use serde::{Deserialize, Serialize};

use super::{fits, CopError, Instance, Solution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationCode {
    /// Solution has the wrong number of entries (tour length, knapsack count, stream length).
    WrongLength,
    IndexOutOfRange,
    Duplicate,
    Missing,
    CapacityExceeded,
    EmptyRoute,
    /// Bin ids must be introduced in order of opening.
    BinOrder,
    /// Residual capacities do not account for the packed volume.
    VolumeMismatch,
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub detail: String,
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        Self {
            valid: violations.is_empty(),
            violations,
        }
    }

    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    pub fn first(&self) -> Option<&Violation> {
        self.violations.first()
    }

    /// One-line summary of the first violation, for logs and retry feedback.
    pub fn summary(&self) -> String {
        match self.violations.first() {
            None => "valid".to_string(),
            Some(v) if self.violations.len() == 1 => v.detail.clone(),
            Some(v) => format!("{} (+{} more)", v.detail, self.violations.len() - 1),
        }
    }
}

#[derive(Default)]
struct Collector(Vec<Violation>);

impl Collector {
    fn push(&mut self, code: ViolationCode, indices: Vec<usize>, detail: String) {
        self.0.push(Violation {
            code,
            detail,
            indices,
        });
    }

    /// Flags out-of-range and repeated entries, then every index in `0..n`
    /// (shifted by `offset`) that never appeared when `require_all` is set.
    fn coverage<'a>(
        &mut self,
        entries: impl IntoIterator<Item = &'a usize>,
        n: usize,
        offset: usize,
        require_all: bool,
        noun: &str,
    ) {
        let mut seen = vec![false; n];
        for &idx in entries {
            if idx < offset || idx >= n + offset {
                self.push(
                    ViolationCode::IndexOutOfRange,
                    vec![idx],
                    format!("{noun} {idx} is out of range"),
                );
                continue;
            }
            let slot = &mut seen[idx - offset];
            if *slot {
                self.push(
                    ViolationCode::Duplicate,
                    vec![idx],
                    format!("{noun} {idx} appears more than once"),
                );
            }
            *slot = true;
        }
        if require_all {
            for (i, s) in seen.iter().enumerate() {
                if !s {
                    let idx = i + offset;
                    self.push(
                        ViolationCode::Missing,
                        vec![idx],
                        format!("{noun} {idx} is never visited"),
                    );
                }
            }
        }
    }
}

/// Lists every violated feasibility rule; an empty list certifies the
/// solution.
pub fn validate(instance: &Instance, solution: &Solution) -> Result<ValidationReport, CopError> {
    if instance.kind() != solution.kind() {
        return Err(CopError::KindMismatch {
            instance: instance.kind(),
            solution: solution.kind(),
        });
    }
    let mut c = Collector::default();
    match (instance, solution) {
        (Instance::Tsp(inst), Solution::Tsp(tour)) => {
            let n = inst.len();
            if tour.len() != n {
                c.push(
                    ViolationCode::WrongLength,
                    vec![],
                    format!("tour has {} entries, expected {n}", tour.len()),
                );
            }
            c.coverage(tour, n, 0, true, "node");
        }
        (Instance::Cvrp(inst), Solution::Cvrp(routes)) => {
            let n = inst.customers();
            for (r, route) in routes.iter().enumerate() {
                if route.is_empty() {
                    c.push(
                        ViolationCode::EmptyRoute,
                        vec![r],
                        format!("route {r} is empty"),
                    );
                    continue;
                }
                let load: f64 = route
                    .iter()
                    .filter_map(|&i| inst.demands.get(i))
                    .sum();
                if !fits(load, inst.capacity) {
                    c.push(
                        ViolationCode::CapacityExceeded,
                        vec![r],
                        format!("route {r} demand {load} exceeds capacity {}", inst.capacity),
                    );
                }
            }
            c.coverage(routes.iter().flatten(), n, 1, true, "customer");
        }
        (Instance::Bpp(inst), Solution::Bpp(bins)) => {
            let n = inst.item_sizes.len();
            for (b, bin) in bins.iter().enumerate() {
                let load: f64 = bin.iter().filter_map(|&i| inst.item_sizes.get(i)).sum();
                if !fits(load, inst.bin_capacity) {
                    c.push(
                        ViolationCode::CapacityExceeded,
                        vec![b],
                        format!("bin {b} load {load} exceeds capacity {}", inst.bin_capacity),
                    );
                }
            }
            c.coverage(bins.iter().flatten(), n, 0, true, "item");
        }
        (Instance::Bpp(inst), Solution::BppResidual(remaining)) => {
            let cap = inst.bin_capacity;
            let mut used = 0.0;
            for (b, &r) in remaining.iter().enumerate() {
                if !r.is_finite() {
                    c.push(
                        ViolationCode::NonFinite,
                        vec![b],
                        format!("bin {b} residual is not finite"),
                    );
                    continue;
                }
                if !fits(0.0, r) || !fits(r, cap) {
                    c.push(
                        ViolationCode::CapacityExceeded,
                        vec![b],
                        format!("bin {b} residual {r} outside [0, {cap}]"),
                    );
                }
                used += cap - r;
            }
            let total: f64 = inst.item_sizes.iter().sum();
            if (used - total).abs() > 1e-6 * total.max(1.0) {
                c.push(
                    ViolationCode::VolumeMismatch,
                    vec![],
                    format!("bins hold volume {used}, items total {total}"),
                );
            }
        }
        (Instance::Obpp(inst), Solution::Obpp(assignment)) => {
            let n = inst.item_stream.len();
            if assignment.len() != n {
                c.push(
                    ViolationCode::WrongLength,
                    vec![],
                    format!("{} assignments for {n} items", assignment.len()),
                );
            }
            let mut loads: Vec<f64> = Vec::new();
            for (item, (&bin, &size)) in assignment.iter().zip(&inst.item_stream).enumerate() {
                if bin > loads.len() {
                    c.push(
                        ViolationCode::BinOrder,
                        vec![item, bin],
                        format!("item {item} goes to bin {bin} before bin {} was opened", loads.len()),
                    );
                    continue;
                }
                if bin == loads.len() {
                    loads.push(0.0);
                }
                loads[bin] += size;
                if !fits(loads[bin], inst.bin_capacity) {
                    c.push(
                        ViolationCode::CapacityExceeded,
                        vec![item, bin],
                        format!("bin {bin} lacks capacity for item {item}"),
                    );
                }
            }
        }
        (Instance::Kp(inst), Solution::Kp(items)) => {
            let n = inst.weights.len();
            c.coverage(items, n, 0, false, "item");
            let load: f64 = items.iter().filter_map(|&i| inst.weights.get(i)).sum();
            if !fits(load, inst.capacity) {
                c.push(
                    ViolationCode::CapacityExceeded,
                    vec![],
                    format!(
                        "total weight {load} exceeds capacity {} by {}",
                        inst.capacity,
                        load - inst.capacity
                    ),
                );
            }
        }
        (Instance::Mkp(inst), Solution::Mkp(sacks)) => {
            let n = inst.values.len();
            let m = inst.knapsacks();
            if sacks.len() != m {
                c.push(
                    ViolationCode::WrongLength,
                    vec![],
                    format!("{} item sets for {m} knapsacks", sacks.len()),
                );
            }
            for (k, (items, (row, &limit))) in sacks
                .iter()
                .zip(inst.weights.iter().zip(&inst.constraints))
                .enumerate()
            {
                let load: f64 = items.iter().filter_map(|&i| row.get(i)).sum();
                if !fits(load, limit) {
                    c.push(
                        ViolationCode::CapacityExceeded,
                        vec![k],
                        format!("knapsack {k} weight {load} exceeds {limit}"),
                    );
                }
            }
            c.coverage(sacks.iter().flatten(), n, 0, false, "item");
        }
        _ => unreachable!("kinds checked above"),
    }
    Ok(ValidationReport::from_violations(c.0))
}
