use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Weibull};
use serde::{Deserialize, Serialize};

use super::{
    BppInstance, CopError, CopKind, CvrpInstance, Dataset, DatasetMetadata, Instance, KpInstance,
    MkpInstance, ObppInstance, TspInstance,
};

/// Item-size law for bin packing streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum SizeDistribution {
    /// Integers drawn uniformly from `[min, max]`.
    UniformInt { min: u32, max: u32 },
    /// `scale * Weibull(shape)`, rounded and clipped to `[1, capacity]`.
    Weibull { shape: f64, scale: f64 },
}

impl Default for SizeDistribution {
    fn default() -> Self {
        SizeDistribution::UniformInt { min: 20, max: 100 }
    }
}

fn default_max_demand() -> u32 {
    9
}

/// Generator settings, one variant per problem kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GeneratorParams {
    /// Nodes uniform on the unit square.
    Tsp { n: usize },
    /// Depot and customers uniform on the unit square, integer demands in
    /// `[1, max_demand]`.
    Cvrp {
        n: usize,
        capacity: f64,
        #[serde(default = "default_max_demand")]
        max_demand: u32,
    },
    Bpp {
        n: usize,
        capacity: f64,
        #[serde(default)]
        sizes: SizeDistribution,
    },
    Obpp {
        n: usize,
        capacity: f64,
        #[serde(default)]
        sizes: SizeDistribution,
    },
    /// Weights and values uniform on (0, 1).
    Kp { n: usize, capacity: f64 },
    /// Values and weights uniform on (0, 1); each knapsack limit uniform
    /// between its heaviest item and its total weight.
    Mkp { n: usize, m: usize },
}

impl GeneratorParams {
    pub fn kind(&self) -> CopKind {
        match self {
            GeneratorParams::Tsp { .. } => CopKind::Tsp,
            GeneratorParams::Cvrp { .. } => CopKind::Cvrp,
            GeneratorParams::Bpp { .. } => CopKind::Bpp,
            GeneratorParams::Obpp { .. } => CopKind::Obpp,
            GeneratorParams::Kp { .. } => CopKind::Kp,
            GeneratorParams::Mkp { .. } => CopKind::Mkp,
        }
    }

    fn check(&self) -> Result<(), CopError> {
        let bad = |m: String| Err(CopError::InvalidParams(m));
        let n = match self {
            GeneratorParams::Tsp { n }
            | GeneratorParams::Cvrp { n, .. }
            | GeneratorParams::Bpp { n, .. }
            | GeneratorParams::Obpp { n, .. }
            | GeneratorParams::Kp { n, .. }
            | GeneratorParams::Mkp { n, .. } => *n,
        };
        if n == 0 {
            return bad("problem size must be positive".into());
        }
        match self {
            GeneratorParams::Cvrp {
                capacity,
                max_demand,
                ..
            } => {
                if *max_demand == 0 || f64::from(*max_demand) > *capacity {
                    return bad(format!(
                        "demands up to {max_demand} cannot fit capacity {capacity}"
                    ));
                }
            }
            GeneratorParams::Bpp {
                capacity, sizes, ..
            }
            | GeneratorParams::Obpp {
                capacity, sizes, ..
            } => {
                if !(capacity.is_finite() && *capacity >= 1.0) {
                    return bad(format!("bin capacity {capacity} must be at least 1"));
                }
                match sizes {
                    SizeDistribution::UniformInt { min, max } => {
                        if *min == 0 || min > max || f64::from(*max) > *capacity {
                            return bad(format!(
                                "item sizes [{min}, {max}] incompatible with capacity {capacity}"
                            ));
                        }
                    }
                    SizeDistribution::Weibull { shape, scale } => {
                        if !(*shape > 0.0 && *scale > 0.0) {
                            return bad("Weibull shape and scale must be positive".into());
                        }
                    }
                }
            }
            GeneratorParams::Kp { capacity, .. } => {
                if !(capacity.is_finite() && *capacity > 0.0) {
                    return bad(format!("capacity {capacity} must be positive"));
                }
            }
            GeneratorParams::Mkp { m, .. } => {
                if *m == 0 {
                    return bad("need at least one knapsack".into());
                }
            }
            GeneratorParams::Tsp { .. } => {}
        }
        Ok(())
    }
}

/// Draws `count` instances from a single seeded stream. The output depends
/// only on `(params, seed, count)`.
pub fn generate_instances(
    params: &GeneratorParams,
    seed: u64,
    count: usize,
) -> Result<Dataset, CopError> {
    if count == 0 {
        return Err(CopError::InvalidParams("count must be positive".into()));
    }
    params.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instances = (0..count)
        .map(|_| generate_one(params, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset {
        kind: params.kind(),
        instances,
        metadata: DatasetMetadata {
            seed: Some(seed),
            params: Some(params.clone()),
            source: None,
            names: Vec::new(),
        },
    })
}

fn unit_points(n: usize, rng: &mut impl Rng) -> Vec<[f64; 2]> {
    (0..n).map(|_| [rng.gen::<f64>(), rng.gen::<f64>()]).collect()
}

/// Uniform on the open interval (0, 1).
fn open_unit(rng: &mut impl Rng) -> f64 {
    loop {
        let x: f64 = rng.gen();
        if x > 0.0 {
            return x;
        }
    }
}

fn item_sizes(
    n: usize,
    capacity: f64,
    law: &SizeDistribution,
    rng: &mut impl Rng,
) -> Result<Vec<f64>, CopError> {
    Ok(match law {
        SizeDistribution::UniformInt { min, max } => (0..n)
            .map(|_| f64::from(rng.gen_range(*min..=*max)))
            .collect(),
        SizeDistribution::Weibull { shape, scale } => {
            let w = Weibull::new(1.0, *shape)
                .map_err(|e| CopError::InvalidParams(e.to_string()))?;
            (0..n)
                .map(|_| (scale * w.sample(rng)).round().clamp(1.0, capacity.floor()))
                .collect()
        }
    })
}

fn generate_one(params: &GeneratorParams, rng: &mut ChaCha8Rng) -> Result<Instance, CopError> {
    let inst = match params {
        GeneratorParams::Tsp { n } => Instance::Tsp(TspInstance::from_coords(unit_points(*n, rng))),
        GeneratorParams::Cvrp {
            n,
            capacity,
            max_demand,
        } => {
            let coords = unit_points(n + 1, rng);
            let demands = std::iter::once(0.0)
                .chain((0..*n).map(|_| f64::from(rng.gen_range(1..=*max_demand))))
                .collect();
            Instance::Cvrp(CvrpInstance::from_coords(coords, demands, *capacity))
        }
        GeneratorParams::Bpp { n, capacity, sizes } => Instance::Bpp(BppInstance {
            item_sizes: item_sizes(*n, *capacity, sizes, rng)?,
            bin_capacity: *capacity,
        }),
        GeneratorParams::Obpp { n, capacity, sizes } => Instance::Obpp(ObppInstance {
            item_stream: item_sizes(*n, *capacity, sizes, rng)?,
            bin_capacity: *capacity,
        }),
        GeneratorParams::Kp { n, capacity } => {
            let weights = (0..*n).map(|_| open_unit(rng)).collect();
            let values = (0..*n).map(|_| open_unit(rng)).collect();
            Instance::Kp(KpInstance {
                weights,
                values,
                capacity: *capacity,
            })
        }
        GeneratorParams::Mkp { n, m } => {
            let values = (0..*n).map(|_| open_unit(rng)).collect();
            let weights: Vec<Vec<f64>> = (0..*m)
                .map(|_| (0..*n).map(|_| open_unit(rng)).collect())
                .collect();
            let constraints = weights
                .iter()
                .map(|row| {
                    let hi: f64 = row.iter().sum();
                    let lo = row.iter().copied().fold(0.0, f64::max);
                    if hi > lo {
                        rng.gen_range(lo..hi)
                    } else {
                        hi
                    }
                })
                .collect();
            Instance::Mkp(MkpInstance {
                values,
                weights,
                constraints,
            })
        }
    };
    inst.check()?;
    Ok(inst)
}
