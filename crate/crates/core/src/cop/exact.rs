//! Exhaustive search for tiny instances. Used as a test oracle.

use super::objective::route_cost;
use super::{fits, objective, CopError, Instance, Solution};

/// Largest node/customer count accepted for TSP and CVRP.
pub const BRUTE_FORCE_LIMIT_ROUTING: usize = 9;
/// Largest item count accepted for the packing and knapsack problems.
pub const BRUTE_FORCE_LIMIT_SUBSET: usize = 15;

/// Provably optimal solution and its objective. Among equally good
/// solutions the first one in enumeration order wins, so the result is
/// deterministic.
pub fn brute_force_optimum(instance: &Instance) -> Result<(Solution, f64), CopError> {
    let limit = match instance {
        Instance::Tsp(_) | Instance::Cvrp(_) => BRUTE_FORCE_LIMIT_ROUTING,
        _ => BRUTE_FORCE_LIMIT_SUBSET,
    };
    if instance.size() > limit {
        return Err(CopError::TooLarge {
            size: instance.size(),
            limit,
        });
    }
    let solution = match instance {
        Instance::Tsp(t) => Solution::Tsp(best_tour(&t.distances)),
        Instance::Cvrp(c) => Solution::Cvrp(best_routes(&c.distances, &c.demands, c.capacity)),
        Instance::Bpp(b) => Solution::Bpp(best_packing(&b.item_sizes, b.bin_capacity)),
        Instance::Obpp(o) => {
            let bins = best_packing(&o.item_stream, o.bin_capacity);
            Solution::Obpp(online_form(&bins, o.item_stream.len()))
        }
        Instance::Kp(k) => Solution::Kp(best_subset(&k.weights, &k.values, k.capacity)),
        Instance::Mkp(m) => Solution::Mkp(best_assignment(&m.values, &m.weights, &m.constraints)),
    };
    let value = objective(instance, &solution)?;
    Ok((solution, value))
}

/// Rearranges `xs` into the next lexicographic permutation; false when `xs`
/// was the last one.
fn next_permutation(xs: &mut [usize]) -> bool {
    if xs.len() < 2 {
        return false;
    }
    let Some(i) = (0..xs.len() - 1).rev().find(|&i| xs[i] < xs[i + 1]) else {
        return false;
    };
    let j = (i + 1..xs.len()).rev().find(|&j| xs[j] > xs[i]).unwrap();
    xs.swap(i, j);
    xs[i + 1..].reverse();
    true
}

fn best_tour(d: &[Vec<f64>]) -> Vec<usize> {
    let n = d.len();
    if n <= 1 {
        return (0..n).collect();
    }
    let mut rest: Vec<usize> = (1..n).collect();
    let mut best = f64::INFINITY;
    let mut best_rest = rest.clone();
    loop {
        let len = d[0][rest[0]]
            + rest.windows(2).map(|w| d[w[0]][w[1]]).sum::<f64>()
            + d[rest[rest.len() - 1]][0];
        if len < best {
            best = len;
            best_rest.clone_from(&rest);
        }
        if !next_permutation(&mut rest) {
            break;
        }
    }
    std::iter::once(0).chain(best_rest).collect()
}

/// Every CVRP solution is a customer permutation cut into consecutive
/// routes, so enumerating permutations and splitting each one optimally
/// covers the whole solution space.
fn best_routes(d: &[Vec<f64>], demands: &[f64], capacity: f64) -> Vec<Vec<usize>> {
    let n = demands.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let mut perm: Vec<usize> = (1..=n).collect();
    let mut best = f64::INFINITY;
    let mut best_routes = Vec::new();
    loop {
        if let Some((cost, routes)) = split(d, demands, capacity, &perm) {
            if cost < best {
                best = cost;
                best_routes = routes;
            }
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    best_routes
}

fn split(
    d: &[Vec<f64>],
    demands: &[f64],
    capacity: f64,
    perm: &[usize],
) -> Option<(f64, Vec<Vec<usize>>)> {
    let n = perm.len();
    let mut cost = vec![f64::INFINITY; n + 1];
    let mut cut = vec![0usize; n + 1];
    cost[0] = 0.0;
    for end in 1..=n {
        let mut load = 0.0;
        for start in (0..end).rev() {
            load += demands[perm[start]];
            if !fits(load, capacity) {
                break;
            }
            let c = cost[start] + route_cost(d, &perm[start..end]);
            if c < cost[end] {
                cost[end] = c;
                cut[end] = start;
            }
        }
    }
    if !cost[n].is_finite() {
        return None;
    }
    let mut routes = Vec::new();
    let mut end = n;
    while end > 0 {
        routes.push(perm[cut[end]..end].to_vec());
        end = cut[end];
    }
    routes.reverse();
    Some((cost[n], routes))
}

fn best_subset(weights: &[f64], values: &[f64], capacity: f64) -> Vec<usize> {
    let n = weights.len();
    let mut best = -1.0;
    let mut best_mask = 0u32;
    for mask in 0u32..(1 << n) {
        let (w, v) = (0..n)
            .filter(|j| mask >> j & 1 == 1)
            .fold((0.0, 0.0), |(w, v), j| (w + weights[j], v + values[j]));
        if fits(w, capacity) && v > best {
            best = v;
            best_mask = mask;
        }
    }
    (0..n).filter(|j| best_mask >> j & 1 == 1).collect()
}

/// Subset DP: for each set of packed items, the fewest bins and, among
/// those, the emptiest last bin.
fn best_packing(sizes: &[f64], capacity: f64) -> Vec<Vec<usize>> {
    let n = sizes.len();
    if n == 0 {
        return Vec::new();
    }
    let full = (1usize << n) - 1;
    // (bins opened, load of the open bin)
    let mut state = vec![(usize::MAX, f64::INFINITY); full + 1];
    let mut last = vec![usize::MAX; full + 1];
    state[0] = (1, 0.0);
    for mask in 1..=full {
        for j in 0..n {
            if mask >> j & 1 == 0 {
                continue;
            }
            let (bins, load) = state[mask ^ (1 << j)];
            let candidate = if fits(load + sizes[j], capacity) {
                (bins, load + sizes[j])
            } else {
                (bins + 1, sizes[j])
            };
            let cur = state[mask];
            if candidate.0 < cur.0 || (candidate.0 == cur.0 && candidate.1 < cur.1) {
                state[mask] = candidate;
                last[mask] = j;
            }
        }
    }
    // walk back, starting a new bin whenever the bin count drops
    let mut order = Vec::with_capacity(n);
    let mut mask = full;
    while mask != 0 {
        let j = last[mask];
        order.push((j, state[mask].0));
        mask ^= 1 << j;
    }
    order.reverse();
    let mut bins: Vec<Vec<usize>> = vec![Vec::new(); state[full].0];
    for (j, bin) in order {
        bins[bin - 1].push(j);
    }
    bins
}

fn online_form(bins: &[Vec<usize>], n: usize) -> Vec<usize> {
    let mut owner = vec![0usize; n];
    for (b, bin) in bins.iter().enumerate() {
        for &j in bin {
            owner[j] = b;
        }
    }
    // renumber bins by first appearance in the stream
    let mut relabel = vec![usize::MAX; bins.len()];
    let mut next = 0;
    owner
        .into_iter()
        .map(|b| {
            if relabel[b] == usize::MAX {
                relabel[b] = next;
                next += 1;
            }
            relabel[b]
        })
        .collect()
}

fn best_assignment(values: &[f64], weights: &[Vec<f64>], limits: &[f64]) -> Vec<Vec<usize>> {
    struct Search<'a> {
        values: &'a [f64],
        weights: &'a [Vec<f64>],
        limits: &'a [f64],
        suffix: Vec<f64>,
        loads: Vec<f64>,
        current: Vec<Option<usize>>,
        value: f64,
        best_value: f64,
        best: Vec<Option<usize>>,
    }

    impl Search<'_> {
        fn go(&mut self, j: usize) {
            if j == self.values.len() {
                if self.value > self.best_value {
                    self.best_value = self.value;
                    self.best.clone_from(&self.current);
                }
                return;
            }
            if self.value + self.suffix[j] <= self.best_value {
                return;
            }
            for k in 0..self.limits.len() {
                let w = self.weights[k][j];
                if fits(self.loads[k] + w, self.limits[k]) {
                    self.loads[k] += w;
                    self.value += self.values[j];
                    self.current[j] = Some(k);
                    self.go(j + 1);
                    self.current[j] = None;
                    self.value -= self.values[j];
                    self.loads[k] -= w;
                }
            }
            self.go(j + 1);
        }
    }

    let n = values.len();
    let mut suffix = vec![0.0; n + 1];
    for j in (0..n).rev() {
        suffix[j] = suffix[j + 1] + values[j];
    }
    let mut s = Search {
        values,
        weights,
        limits,
        suffix,
        loads: vec![0.0; limits.len()],
        current: vec![None; n],
        value: 0.0,
        best_value: -1.0,
        best: vec![None; n],
    };
    s.go(0);
    let mut sacks = vec![Vec::new(); limits.len()];
    for (j, k) in s.best.iter().enumerate() {
        if let Some(k) = k {
            sacks[*k].push(j);
        }
    }
    sacks
}
