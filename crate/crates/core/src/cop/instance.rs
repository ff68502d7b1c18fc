use serde::{Deserialize, Serialize};

use super::{CopError, CopKind};

/// Euclidean distances between every pair of points.
pub fn euclidean_matrix(coords: &[[f64; 2]]) -> Vec<Vec<f64>> {
    coords
        .iter()
        .map(|a| {
            coords
                .iter()
                .map(|b| (a[0] - b[0]).hypot(a[1] - b[1]))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TspInstance {
    pub coords: Vec<[f64; 2]>,
    pub distances: Vec<Vec<f64>>,
}

impl TspInstance {
    pub fn from_coords(coords: Vec<[f64; 2]>) -> Self {
        let distances = euclidean_matrix(&coords);
        Self { coords, distances }
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }
}

/// Node 0 is the depot; customers are `1..=n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvrpInstance {
    pub coords: Vec<[f64; 2]>,
    pub distances: Vec<Vec<f64>>,
    pub demands: Vec<f64>,
    pub capacity: f64,
}

impl CvrpInstance {
    pub fn from_coords(coords: Vec<[f64; 2]>, demands: Vec<f64>, capacity: f64) -> Self {
        let distances = euclidean_matrix(&coords);
        Self {
            coords,
            distances,
            demands,
            capacity,
        }
    }

    /// Number of customers (the depot is not counted).
    pub fn customers(&self) -> usize {
        self.demands.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BppInstance {
    pub item_sizes: Vec<f64>,
    pub bin_capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObppInstance {
    pub item_stream: Vec<f64>,
    pub bin_capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpInstance {
    pub weights: Vec<f64>,
    pub values: Vec<f64>,
    pub capacity: f64,
}

/// `weights[i][j]` is the weight item `j` contributes to knapsack `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MkpInstance {
    pub values: Vec<f64>,
    pub weights: Vec<Vec<f64>>,
    pub constraints: Vec<f64>,
}

impl MkpInstance {
    pub fn knapsacks(&self) -> usize {
        self.constraints.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "lowercase")]
pub enum Instance {
    Tsp(TspInstance),
    Cvrp(CvrpInstance),
    Bpp(BppInstance),
    Obpp(ObppInstance),
    Kp(KpInstance),
    Mkp(MkpInstance),
}

impl Instance {
    pub fn kind(&self) -> CopKind {
        match self {
            Instance::Tsp(_) => CopKind::Tsp,
            Instance::Cvrp(_) => CopKind::Cvrp,
            Instance::Bpp(_) => CopKind::Bpp,
            Instance::Obpp(_) => CopKind::Obpp,
            Instance::Kp(_) => CopKind::Kp,
            Instance::Mkp(_) => CopKind::Mkp,
        }
    }

    /// Problem size: nodes, customers or items.
    pub fn size(&self) -> usize {
        match self {
            Instance::Tsp(t) => t.len(),
            Instance::Cvrp(c) => c.customers(),
            Instance::Bpp(b) => b.item_sizes.len(),
            Instance::Obpp(o) => o.item_stream.len(),
            Instance::Kp(k) => k.weights.len(),
            Instance::Mkp(m) => m.values.len(),
        }
    }

    /// Checks the structural invariants every instance must satisfy.
    pub fn check(&self) -> Result<(), CopError> {
        let bad = |msg: String| Err(CopError::MalformedInstance(msg));
        match self {
            Instance::Tsp(t) => {
                if t.coords.len() != t.distances.len() {
                    return bad(format!(
                        "{} coordinates but {} distance rows",
                        t.coords.len(),
                        t.distances.len()
                    ));
                }
                check_matrix(&t.distances)
            }
            Instance::Cvrp(c) => {
                let n = c.distances.len();
                if c.coords.len() != n || c.demands.len() != n {
                    return bad("coords, distances and demands disagree in length".into());
                }
                if n == 0 {
                    return bad("missing depot".into());
                }
                check_matrix(&c.distances)?;
                if !(c.capacity.is_finite() && c.capacity > 0.0) {
                    return bad(format!("capacity {} must be positive", c.capacity));
                }
                if c.demands[0] != 0.0 {
                    return bad("depot demand must be 0".into());
                }
                if let Some(d) = c
                    .demands
                    .iter()
                    .find(|d| !(d.is_finite() && **d >= 0.0 && **d <= c.capacity))
                {
                    return bad(format!("demand {d} outside [0, {}]", c.capacity));
                }
                Ok(())
            }
            Instance::Bpp(BppInstance {
                item_sizes,
                bin_capacity,
            })
            | Instance::Obpp(ObppInstance {
                item_stream: item_sizes,
                bin_capacity,
            }) => {
                if !(bin_capacity.is_finite() && *bin_capacity > 0.0) {
                    return bad(format!("bin capacity {bin_capacity} must be positive"));
                }
                if let Some(s) = item_sizes
                    .iter()
                    .find(|s| !(s.is_finite() && **s > 0.0 && **s <= *bin_capacity))
                {
                    return bad(format!("item size {s} outside (0, {bin_capacity}]"));
                }
                Ok(())
            }
            Instance::Kp(k) => {
                if k.weights.len() != k.values.len() {
                    return bad("weights and values disagree in length".into());
                }
                if !(k.capacity.is_finite() && k.capacity > 0.0) {
                    return bad(format!("capacity {} must be positive", k.capacity));
                }
                if k.weights.iter().chain(&k.values).any(|x| !(x.is_finite() && *x > 0.0)) {
                    return bad("weights and values must be positive".into());
                }
                Ok(())
            }
            Instance::Mkp(m) => {
                if m.weights.len() != m.constraints.len() {
                    return bad("weight rows and constraints disagree in length".into());
                }
                if m.weights.iter().any(|row| row.len() != m.values.len()) {
                    return bad("weight row length differs from item count".into());
                }
                if m.constraints.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
                    return bad("constraints must be positive".into());
                }
                if m
                    .weights
                    .iter()
                    .flatten()
                    .chain(&m.values)
                    .any(|x| !(x.is_finite() && *x >= 0.0))
                {
                    return bad("weights and values must be non-negative".into());
                }
                Ok(())
            }
        }
    }
}

fn check_matrix(d: &[Vec<f64>]) -> Result<(), CopError> {
    let n = d.len();
    for (i, row) in d.iter().enumerate() {
        if row.len() != n {
            return Err(CopError::MalformedInstance(format!(
                "distance row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        if row[i] != 0.0 {
            return Err(CopError::MalformedInstance(format!(
                "distance[{i}][{i}] is not zero"
            )));
        }
        for (j, &x) in row.iter().enumerate() {
            if !(x.is_finite() && x >= 0.0) || x != d[j][i] {
                return Err(CopError::MalformedInstance(format!(
                    "distance[{i}][{j}] is negative, non-finite or asymmetric"
                )));
            }
        }
    }
    Ok(())
}
