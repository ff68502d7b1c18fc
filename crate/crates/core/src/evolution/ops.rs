use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Heuristic;
use crate::cop::Sense;
use crate::reduction::LrScore;

/// Fitness values closer than this count as identical.
pub const DUPLICATE_TOLERANCE: f64 = 1e-6;

/// Offspring slots per active reduction for one operator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationPlan {
    pub lr_ids: Vec<usize>,
    pub counts: Vec<usize>,
}

impl RationPlan {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Selection probabilities: proportional to 1/|s| when minimizing and to s
/// when maximizing. Failed or unset scores get no mass; if nothing has mass
/// the distribution is uniform.
pub fn ration_probabilities(scores: &[LrScore], sense: Sense) -> Vec<f64> {
    let weights: Vec<f64> = scores
        .iter()
        .map(|s| match (s.value(), sense) {
            (Some(v), Sense::Minimize) => 1.0 / v.abs(),
            (Some(v), Sense::Maximize) => v.max(0.0),
            (None, _) => 0.0,
        })
        .collect();
    // a zero-cost score dominates everything else
    let weights: Vec<f64> = if weights.iter().any(|w| w.is_infinite()) {
        weights.iter().map(|w| if w.is_infinite() { 1.0 } else { 0.0 }).collect()
    } else {
        weights
    };
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return vec![1.0 / scores.len() as f64; scores.len()];
    }
    weights.iter().map(|w| w / total).collect()
}

/// N independent categorical draws over the active reductions.
pub fn allocate_ration(
    lr_ids: &[usize],
    scores: &[LrScore],
    n: usize,
    sense: Sense,
    rng: &mut impl Rng,
) -> RationPlan {
    assert_eq!(lr_ids.len(), scores.len());
    let mut counts = vec![0; lr_ids.len()];
    if !lr_ids.is_empty() {
        let probs = ration_probabilities(scores, sense);
        let dist = WeightedIndex::new(&probs).expect("probabilities have positive mass");
        for _ in 0..n {
            counts[dist.sample(rng)] += 1;
        }
    }
    RationPlan {
        lr_ids: lr_ids.to_vec(),
        counts,
    }
}

/// Population positions ordered best first; ties keep population order.
pub fn rank_order(population: &[Heuristic]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..population.len()).collect();
    let q = |i: usize| population[i].fitness.unwrap_or(f64::NEG_INFINITY);
    order.sort_by(|&a, &b| q(b).total_cmp(&q(a)));
    order
}

/// Rank-based parent draw: the heuristic at rank r (1-based, best first)
/// has weight 1/(r + |P|). Draws are without replacement while possible;
/// any excess is drawn with replacement. Returns population positions.
pub fn select_parents(population: &[Heuristic], count: usize, rng: &mut impl Rng) -> Vec<usize> {
    assert!(!population.is_empty(), "parent selection needs a population");
    let order = rank_order(population);
    let size = population.len() as f64;
    let weight = |rank0: usize| 1.0 / (rank0 as f64 + 1.0 + size);
    let mut remaining: Vec<usize> = (0..order.len()).collect();
    let mut chosen = Vec::with_capacity(count);
    while chosen.len() < count && !remaining.is_empty() {
        let w: Vec<f64> = remaining.iter().map(|&r| weight(r)).collect();
        let pick = WeightedIndex::new(&w).unwrap().sample(rng);
        chosen.push(order[remaining.remove(pick)]);
    }
    if chosen.len() < count {
        let w: Vec<f64> = (0..order.len()).map(weight).collect();
        let dist = WeightedIndex::new(&w).unwrap();
        while chosen.len() < count {
            chosen.push(order[dist.sample(rng)]);
        }
    }
    chosen
}

#[derive(Debug, Clone, Copy)]
pub struct ManageSettings<'a> {
    pub capacity: usize,
    pub generation: usize,
    /// Below this generation the early-stage exception applies.
    pub threshold: usize,
    pub l: usize,
    pub active_lrs: &'a [usize],
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= DUPLICATE_TOLERANCE
}

/// Keeps the fittest heuristics.
///
/// Failed heuristics are dropped and equal-fitness duplicates within one
/// reduction are collapsed onto the earliest. Survivors are the N best,
/// except that in early generations (generation < threshold) duplicates
/// across reductions are never discarded: ties across reductions with a
/// survivor are kept beyond N, and each active reduction retains at least
/// `l` heuristics when it has them. Later on duplicates are collapsed
/// across reductions too.
pub fn manage_population(candidates: Vec<Heuristic>, s: ManageSettings<'_>) -> Vec<Heuristic> {
    let early = s.generation < s.threshold;
    let mut pool: Vec<Heuristic> = candidates.into_iter().filter(|h| h.is_ok() && h.fitness.is_some()).collect();
    pool.sort_by_key(|h| h.id);
    let mut unique: Vec<Heuristic> = Vec::with_capacity(pool.len());
    for h in pool {
        let q = h.fitness.unwrap();
        let dup = unique
            .iter()
            .any(|k| (!early || k.lr_id == h.lr_id) && same(k.fitness.unwrap(), q));
        if !dup {
            unique.push(h);
        }
    }
    unique.sort_by(|a, b| b.fitness.unwrap().total_cmp(&a.fitness.unwrap()).then(a.id.cmp(&b.id)));
    if unique.len() <= s.capacity {
        return unique;
    }
    let rest = unique.split_off(s.capacity);
    let mut kept = unique;
    if early {
        let mut leftover = Vec::new();
        for h in rest {
            let q = h.fitness.unwrap();
            if kept.iter().any(|k| k.lr_id != h.lr_id && same(k.fitness.unwrap(), q)) {
                kept.push(h);
            } else {
                leftover.push(h);
            }
        }
        for &lr in s.active_lrs {
            let mut have = kept.iter().filter(|h| h.lr_id == lr).count();
            let mut i = 0;
            while have < s.l && i < leftover.len() {
                if leftover[i].lr_id == lr {
                    kept.push(leftover.remove(i));
                    have += 1;
                } else {
                    i += 1;
                }
            }
        }
        kept.sort_by(|a, b| b.fitness.unwrap().total_cmp(&a.fitness.unwrap()).then(a.id.cmp(&b.id)));
    }
    kept
}

/// Sorted (reduction, fitness) pairs identifying a population's content.
pub fn population_fingerprint(population: &[Heuristic]) -> Vec<(usize, f64)> {
    let mut fp: Vec<(usize, f64)> = population
        .iter()
        .filter_map(|h| h.fitness.map(|q| (h.lr_id, q)))
        .collect();
    fp.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    fp
}
