use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{fits, CopError, CopKind, Instance, Solution};

/// Classical constructive heuristics used for calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    /// Greedy tour from node 0, always moving to the closest unvisited node.
    NearestNeighbor,
    /// Tightest feasible bin. Offline packing processes items largest first.
    BestFit,
    /// Oldest feasible bin. Offline packing processes items largest first.
    FirstFit,
    /// Items by value/weight, descending, taken whenever they fit.
    RatioGreedy,
}

impl Baseline {
    pub const ALL: [Baseline; 4] = [
        Baseline::NearestNeighbor,
        Baseline::BestFit,
        Baseline::FirstFit,
        Baseline::RatioGreedy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::NearestNeighbor => "nearest_neighbor",
            Baseline::BestFit => "best_fit",
            Baseline::FirstFit => "first_fit",
            Baseline::RatioGreedy => "ratio_greedy",
        }
    }

    pub fn supports(self, kind: CopKind) -> bool {
        matches!(
            (self, kind),
            (Baseline::NearestNeighbor, CopKind::Tsp)
                | (Baseline::BestFit | Baseline::FirstFit, CopKind::Bpp | CopKind::Obpp)
                | (Baseline::RatioGreedy, CopKind::Kp | CopKind::Mkp)
        )
    }

    pub fn for_kind(kind: CopKind) -> impl Iterator<Item = Baseline> {
        Baseline::ALL.into_iter().filter(move |b| b.supports(kind))
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Baseline {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Baseline::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| format!("unknown baseline `{s}`"))
    }
}

pub fn baseline_solve(baseline: Baseline, instance: &Instance) -> Result<Solution, CopError> {
    if !baseline.supports(instance.kind()) {
        return Err(CopError::IncompatibleBaseline {
            baseline,
            kind: instance.kind(),
        });
    }
    Ok(match instance {
        Instance::Tsp(t) => Solution::Tsp(nearest_neighbor(&t.distances, 0)),
        Instance::Bpp(b) => {
            let mut order: Vec<usize> = (0..b.item_sizes.len()).collect();
            order.sort_by(|&i, &j| b.item_sizes[j].total_cmp(&b.item_sizes[i]));
            let assignment = pack(&b.item_sizes, &order, b.bin_capacity, baseline);
            let bins = assignment.iter().max().map_or(0, |m| m + 1);
            let mut packed = vec![Vec::new(); bins];
            for (&item, &bin) in order.iter().zip(&assignment) {
                packed[bin].push(item);
            }
            Solution::Bpp(packed)
        }
        Instance::Obpp(o) => {
            let order: Vec<usize> = (0..o.item_stream.len()).collect();
            Solution::Obpp(pack(&o.item_stream, &order, o.bin_capacity, baseline))
        }
        Instance::Kp(k) => {
            let order = ratio_order(&k.values, |j| k.weights[j]);
            let mut load = 0.0;
            let mut items = Vec::new();
            for j in order {
                if fits(load + k.weights[j], k.capacity) {
                    load += k.weights[j];
                    items.push(j);
                }
            }
            items.sort_unstable();
            Solution::Kp(items)
        }
        Instance::Mkp(m) => {
            let order = ratio_order(&m.values, |j| m.weights.iter().map(|row| row[j]).sum());
            let mut loads = vec![0.0; m.knapsacks()];
            let mut sacks = vec![Vec::new(); m.knapsacks()];
            for j in order {
                if let Some(k) =
                    (0..loads.len()).find(|&k| fits(loads[k] + m.weights[k][j], m.constraints[k]))
                {
                    loads[k] += m.weights[k][j];
                    sacks[k].push(j);
                }
            }
            Solution::Mkp(sacks)
        }
        Instance::Cvrp(_) => unreachable!("no baseline supports CVRP"),
    })
}

pub(crate) fn nearest_neighbor(d: &[Vec<f64>], start: usize) -> Vec<usize> {
    let n = d.len();
    if n == 0 {
        return Vec::new();
    }
    let mut visited = vec![false; n];
    let mut tour = Vec::with_capacity(n);
    let mut current = start;
    visited[start] = true;
    tour.push(start);
    for _ in 1..n {
        let mut next = usize::MAX;
        for j in 0..n {
            if !visited[j] && (next == usize::MAX || d[current][j] < d[current][next]) {
                next = j;
            }
        }
        visited[next] = true;
        tour.push(next);
        current = next;
    }
    tour
}

/// Bin id for each item of `order`, bins numbered in order of opening.
pub(crate) fn pack(sizes: &[f64], order: &[usize], capacity: f64, rule: Baseline) -> Vec<usize> {
    let mut remaining: Vec<f64> = Vec::new();
    let mut assignment = Vec::with_capacity(order.len());
    for &item in order {
        let size = sizes[item];
        let mut chosen: Option<usize> = None;
        for (b, &r) in remaining.iter().enumerate() {
            if !fits(size, r) {
                continue;
            }
            match rule {
                Baseline::FirstFit => {
                    chosen = Some(b);
                    break;
                }
                _ => {
                    if chosen.map_or(true, |c| r < remaining[c]) {
                        chosen = Some(b);
                    }
                }
            }
        }
        let bin = chosen.unwrap_or_else(|| {
            remaining.push(capacity);
            remaining.len() - 1
        });
        remaining[bin] -= size;
        assignment.push(bin);
    }
    assignment
}

fn ratio_order(values: &[f64], weight: impl Fn(usize) -> f64) -> Vec<usize> {
    let ratios: Vec<f64> = (0..values.len()).map(|j| values[j] / weight(j)).collect();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| ratios[b].total_cmp(&ratios[a]));
    order
}
