use super::{fits, CopError, ObppInstance, Solution};

/// Priority function for online bin packing: given the arriving item and the
/// remaining capacities of every open bin, returns one score per bin.
pub trait PackingScorer {
    fn score(&mut self, item_size: f64, remaining: &[f64]) -> Vec<f64>;
}

impl<F> PackingScorer for F
where
    F: FnMut(f64, &[f64]) -> Vec<f64>,
{
    fn score(&mut self, item_size: f64, remaining: &[f64]) -> Vec<f64> {
        self(item_size, remaining)
    }
}

/// Packs the stream in arrival order. Each item goes to the feasible open
/// bin with the highest score (lowest id on ties); a new bin is opened when
/// no open bin fits.
pub fn simulate_online_packing(
    instance: &ObppInstance,
    scorer: &mut impl PackingScorer,
) -> Result<Solution, CopError> {
    let cap = instance.bin_capacity;
    let mut remaining: Vec<f64> = Vec::new();
    let mut assignment = Vec::with_capacity(instance.item_stream.len());
    for (item, &size) in instance.item_stream.iter().enumerate() {
        let feasible: Vec<usize> = (0..remaining.len())
            .filter(|&b| fits(size, remaining[b]))
            .collect();
        let chosen = if feasible.is_empty() {
            None
        } else {
            let scores = scorer.score(size, &remaining);
            if scores.len() != remaining.len() {
                return Err(CopError::Scorer(format!(
                    "item {item}: {} scores for {} open bins",
                    scores.len(),
                    remaining.len()
                )));
            }
            if let Some(b) = scores.iter().position(|s| !s.is_finite()) {
                return Err(CopError::Scorer(format!(
                    "item {item}: score for bin {b} is not finite"
                )));
            }
            let mut best = feasible[0];
            for &b in &feasible[1..] {
                if scores[b] > scores[best] {
                    best = b;
                }
            }
            Some(best)
        };
        let bin = chosen.unwrap_or_else(|| {
            remaining.push(cap);
            remaining.len() - 1
        });
        remaining[bin] -= size;
        assignment.push(bin);
    }
    Ok(Solution::Obpp(assignment))
}

/// Best fit: prefer the bin left fullest by the placement.
pub(crate) fn best_fit_scores(item: f64, remaining: &[f64]) -> Vec<f64> {
    remaining.iter().map(|r| -(r - item)).collect()
}

/// First fit: prefer the oldest bin.
pub(crate) fn first_fit_scores(_item: f64, remaining: &[f64]) -> Vec<f64> {
    (0..remaining.len()).map(|b| -(b as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(items: &[f64], cap: f64) -> ObppInstance {
        ObppInstance {
            item_stream: items.to_vec(),
            bin_capacity: cap,
        }
    }

    #[test]
    fn second_item_opens_new_bin_when_full() {
        let mut any = |_: f64, r: &[f64]| vec![0.0; r.len()];
        let sol = simulate_online_packing(&stream(&[6.0, 6.0], 10.0), &mut any).unwrap();
        assert_eq!(sol, Solution::Obpp(vec![0, 1]));
    }

    #[test]
    fn best_fit_shares_a_bin() {
        let mut bf = best_fit_scores;
        let sol = simulate_online_packing(&stream(&[4.0, 4.0], 10.0), &mut bf).unwrap();
        assert_eq!(sol, Solution::Obpp(vec![0, 0]));
    }

    #[test]
    fn ties_go_to_lowest_bin() {
        let mut flat = |_: f64, r: &[f64]| vec![1.0; r.len()];
        let sol =
            simulate_online_packing(&stream(&[6.0, 6.0, 3.0], 10.0), &mut flat).unwrap();
        assert_eq!(sol, Solution::Obpp(vec![0, 1, 0]));
    }

    #[test]
    fn infeasible_bins_are_never_chosen() {
        // scorer prefers the full bin; it must be skipped
        let mut perverse = |_: f64, r: &[f64]| r.iter().map(|x| -x).collect::<Vec<_>>();
        let sol = simulate_online_packing(&stream(&[9.0, 5.0, 5.0], 10.0), &mut perverse)
            .unwrap();
        assert_eq!(sol, Solution::Obpp(vec![0, 1, 1]));
    }

    #[test]
    fn wrong_length_scores_fail() {
        let mut short = |_: f64, _: &[f64]| vec![1.0];
        let err = simulate_online_packing(&stream(&[1.0, 1.0, 1.0], 10.0), &mut short);
        // first call sees one open bin, second call too; force two bins
        assert!(err.is_ok());
        let mut short = |_: f64, _: &[f64]| vec![1.0];
        let err = simulate_online_packing(&stream(&[6.0, 6.0, 1.0], 10.0), &mut short);
        assert!(matches!(err, Err(CopError::Scorer(_))));
    }

    #[test]
    fn non_finite_scores_fail() {
        let mut nan = |_: f64, r: &[f64]| vec![f64::NAN; r.len()];
        let err = simulate_online_packing(&stream(&[1.0, 1.0], 10.0), &mut nan);
        assert!(matches!(err, Err(CopError::Scorer(_))));
    }
}
