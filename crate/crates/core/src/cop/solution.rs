use serde::{Deserialize, Serialize};

use super::CopKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Solution {
    /// Permutation of all node indices.
    Tsp(Vec<usize>),
    /// Sub-routes of customer indices in `1..=n`; the depot is implicit at
    /// both ends of every route.
    Cvrp(Vec<Vec<usize>>),
    /// Item indices per bin.
    Bpp(Vec<Vec<usize>>),
    /// Remaining capacity of every offered bin after packing. This is the
    /// shape the bin-packing reduction template asks generated code to
    /// return; it certifies capacity and volume but not item identities.
    BppResidual(Vec<f64>),
    /// Bin chosen for each arriving item, bins numbered in order of opening.
    Obpp(Vec<usize>),
    /// Selected item indices.
    Kp(Vec<usize>),
    /// One item set per knapsack.
    Mkp(Vec<Vec<usize>>),
}

impl Solution {
    pub fn kind(&self) -> CopKind {
        match self {
            Solution::Tsp(_) => CopKind::Tsp,
            Solution::Cvrp(_) => CopKind::Cvrp,
            Solution::Bpp(_) | Solution::BppResidual(_) => CopKind::Bpp,
            Solution::Obpp(_) => CopKind::Obpp,
            Solution::Kp(_) => CopKind::Kp,
            Solution::Mkp(_) => CopKind::Mkp,
        }
    }
}
