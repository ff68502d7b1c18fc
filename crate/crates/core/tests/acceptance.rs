//! Acceptance criteria, one report line each.
//!
//! Runs as a plain binary so every criterion is reported even when an
//! earlier one fails. Failures are printed but only turn into a nonzero exit
//! status with `REDSEARCH_ACCEPTANCE_STRICT=1`, so the rest of the test
//! suite still runs under a plain `cargo test`.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, ensure, Context, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use redsearch::config::RunConfigFile;
use redsearch::cop::{
    baseline_solve, bin_lower_bound, brute_force_optimum, generate_instances, mean_objective,
    objective, optimality_gap, parse_tsplib, validate, Baseline, BppInstance, CopKind,
    CvrpInstance, Dataset, GeneratorParams, Instance, KpInstance, MkpInstance, ObppInstance, Sense,
    Solution, TspInstance,
};
use redsearch::evolution::{
    allocate_ration, manage_population, run_evolution, Engine, EvalStatus, Evaluation,
    EvolutionConfig, Heuristic, ManageSettings, Operator, Origin, RunResult,
};
use redsearch::llm::{Backend, ChatParams, LlmClient, MockReply, MockResponder, Transcript};
use redsearch::prompts::ProblemDescription;
use redsearch::reduction::{compute_lr_score, refine_reduction, LanguageReduction, LrScore, RefineSettings};
use redsearch::sandbox::FixtureSandbox;
use redsearch::scripted::scripted_client;

const TOL: f64 = 1e-9;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

enum Verdict {
    Pass(String),
    Fail(String),
    NotRun(String),
}

struct Criterion {
    name: &'static str,
    budget: Duration,
    /// Soft criteria are reported but never gate.
    soft: bool,
}

fn run(c: Criterion, f: impl FnOnce() -> Result<Verdict>) -> bool {
    let start = Instant::now();
    let verdict = f().unwrap_or_else(|e| Verdict::Fail(format!("{e:#}")));
    let elapsed = start.elapsed();
    let verdict = match verdict {
        Verdict::Pass(d) if elapsed > c.budget => {
            Verdict::Fail(format!("{d}; took {elapsed:.1?}, budget {:?}", c.budget))
        }
        v => v,
    };
    let (tag, detail, failed) = match verdict {
        Verdict::Pass(d) => ("PASS", d, false),
        Verdict::Fail(d) => ("FAIL", d, !c.soft),
        Verdict::NotRun(d) => ("NOT RUN", d, false),
    };
    let soft = if c.soft { " (soft)" } else { "" };
    println!("{tag:<7} {}{soft} [{:.2?}]: {detail}", c.name, elapsed);
    failed
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters are not meaningful here
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let mut failures = 0;
    let mut tally = |failed: bool| failures += failed as usize;
    println!("acceptance criteria");
    tally(run(Criterion { name: "oracle equivalence", budget: Duration::from_secs(120), soft: false }, oracle_equivalence));
    tally(run(Criterion { name: "baseline calibration", budget: Duration::from_secs(60), soft: false }, baseline_calibration));
    tally(run(Criterion { name: "online packing dataset-exact gap", budget: Duration::from_secs(600), soft: false }, obpp_dataset_exact));
    tally(run(Criterion { name: "TSPLIB eil51 nearest-neighbour gap", budget: Duration::from_secs(5), soft: false }, tsplib_gap));
    tally(run(Criterion { name: "mechanism invariants", budget: Duration::from_secs(180), soft: false }, mechanism_invariants));
    tally(run(Criterion { name: "replay determinism", budget: Duration::from_secs(60), soft: false }, determinism));
    tally(run(Criterion { name: "live smoke run", budget: Duration::from_secs(7200), soft: true }, live_smoke));
    println!("acceptance: {failures} gated criteria failed");
    let strict = std::env::var("REDSEARCH_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && failures > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

// ---------------------------------------------------------------------------
// Independent oracles. These share nothing with the library beyond the
// instance and solution types.

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn within(load: f64, cap: f64) -> bool {
    load <= cap + 1e-9 * cap.abs().max(1.0)
}

/// Held-Karp over node subsets; returns the shortest closed tour length
/// through `nodes` starting and ending at `start`.
fn held_karp(c: &[[f64; 2]], start: usize, nodes: &[usize]) -> f64 {
    let k = nodes.len();
    if k == 0 {
        return 0.0;
    }
    let full = 1usize << k;
    let mut best = vec![vec![f64::INFINITY; k]; full];
    for (i, &v) in nodes.iter().enumerate() {
        best[1 << i][i] = dist(c[start], c[v]);
    }
    for mask in 1..full {
        for last in 0..k {
            let cur = best[mask][last];
            if mask >> last & 1 == 0 || !cur.is_finite() {
                continue;
            }
            for next in 0..k {
                if mask >> next & 1 == 1 {
                    continue;
                }
                let m = mask | 1 << next;
                let cand = cur + dist(c[nodes[last]], c[nodes[next]]);
                if cand < best[m][next] {
                    best[m][next] = cand;
                }
            }
        }
    }
    (0..k)
        .map(|last| best[full - 1][last] + dist(c[nodes[last]], c[start]))
        .fold(f64::INFINITY, f64::min)
}

fn tsp_oracle(t: &TspInstance) -> f64 {
    let rest: Vec<usize> = (1..t.coords.len()).collect();
    -held_karp(&t.coords, 0, &rest)
}

/// Set partitioning over customer subsets, each route priced by Held-Karp.
fn cvrp_oracle(v: &CvrpInstance) -> f64 {
    let n = v.demands.len() - 1;
    let full = 1usize << n;
    let mut route = vec![f64::INFINITY; full];
    for (mask, r) in route.iter_mut().enumerate().skip(1) {
        let members: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).collect();
        let load: f64 = members.iter().map(|&i| v.demands[i]).sum();
        if within(load, v.capacity) {
            *r = held_karp(&v.coords, 0, &members);
        }
    }
    let mut best = vec![f64::INFINITY; full];
    best[0] = 0.0;
    for mask in 1..full {
        let low = mask & mask.wrapping_neg();
        let mut sub = mask;
        while sub > 0 {
            if sub & low != 0 && route[sub].is_finite() {
                best[mask] = best[mask].min(route[sub] + best[mask ^ sub]);
            }
            sub = (sub - 1) & mask;
        }
    }
    -best[full - 1]
}

/// Branch and bound over bin assignments, largest items first.
fn bins_oracle(sizes: &[f64], cap: f64) -> f64 {
    fn go(items: &[f64], loads: &mut Vec<f64>, cap: f64, best: &mut usize) {
        if loads.len() >= *best {
            return;
        }
        let Some((&s, rest)) = items.split_first() else {
            *best = loads.len();
            return;
        };
        for b in 0..loads.len() {
            if within(loads[b] + s, cap) {
                loads[b] += s;
                go(rest, loads, cap, best);
                loads[b] -= s;
            }
        }
        loads.push(s);
        go(rest, loads, cap, best);
        loads.pop();
    }
    let mut items = sizes.to_vec();
    items.sort_by(|a, b| b.total_cmp(a));
    let mut best = items.len().max(1) + 1;
    go(&items, &mut Vec::new(), cap, &mut best);
    -(best.min(items.len()) as f64)
}

fn kp_oracle(k: &KpInstance) -> f64 {
    fn go(k: &KpInstance, i: usize, load: f64, value: f64) -> f64 {
        if i == k.weights.len() {
            return value;
        }
        let skip = go(k, i + 1, load, value);
        if within(load + k.weights[i], k.capacity) {
            skip.max(go(k, i + 1, load + k.weights[i], value + k.values[i]))
        } else {
            skip
        }
    }
    go(k, 0, 0.0, 0.0)
}

/// Every item goes to one knapsack or none.
fn mkp_oracle(m: &MkpInstance) -> f64 {
    fn go(m: &MkpInstance, i: usize, loads: &mut [f64], value: f64) -> f64 {
        if i == m.values.len() {
            return value;
        }
        let mut best = go(m, i + 1, loads, value);
        for s in 0..loads.len() {
            if within(loads[s] + m.weights[s][i], m.constraints[s]) {
                loads[s] += m.weights[s][i];
                best = best.max(go(m, i + 1, loads, value + m.values[i]));
                loads[s] -= m.weights[s][i];
            }
        }
        best
    }
    go(m, 0, &mut vec![0.0; m.constraints.len()], 0.0)
}

fn distinct_cover(items: &[usize], n: usize, exact: bool) -> bool {
    let set: BTreeSet<usize> = items.iter().copied().collect();
    set.len() == items.len() && items.iter().all(|&i| i < n) && (!exact || set.len() == n)
}

/// Feasibility and objective of a candidate, computed from scratch.
fn oracle_objective(inst: &Instance, sol: &Solution) -> Option<f64> {
    match (inst, sol) {
        (Instance::Tsp(t), Solution::Tsp(tour)) => {
            let n = t.coords.len();
            if tour.len() != n || !distinct_cover(tour, n, true) {
                return None;
            }
            Some(-(0..n).map(|i| dist(t.coords[tour[i]], t.coords[tour[(i + 1) % n]])).sum::<f64>())
        }
        (Instance::Cvrp(v), Solution::Cvrp(routes)) => {
            let n = v.demands.len() - 1;
            let flat: Vec<usize> = routes.iter().flatten().map(|&i| i.wrapping_sub(1)).collect();
            if routes.iter().any(Vec::is_empty) || !distinct_cover(&flat, n, true) {
                return None;
            }
            let mut total = 0.0;
            for r in routes {
                if !within(r.iter().map(|&i| v.demands[i]).sum(), v.capacity) {
                    return None;
                }
                let mut prev = 0;
                for &i in r {
                    total += dist(v.coords[prev], v.coords[i]);
                    prev = i;
                }
                total += dist(v.coords[prev], v.coords[0]);
            }
            Some(-total)
        }
        (Instance::Bpp(b), Solution::Bpp(bins)) => {
            let flat: Vec<usize> = bins.iter().flatten().copied().collect();
            if !distinct_cover(&flat, b.item_sizes.len(), true) {
                return None;
            }
            if bins.iter().any(|bin| !within(bin.iter().map(|&i| b.item_sizes[i]).sum(), b.bin_capacity)) {
                return None;
            }
            Some(-(bins.iter().filter(|bin| !bin.is_empty()).count() as f64))
        }
        (Instance::Obpp(o), Solution::Obpp(assign)) => {
            if assign.len() != o.item_stream.len() {
                return None;
            }
            let mut loads: Vec<f64> = Vec::new();
            for (&b, &s) in assign.iter().zip(&o.item_stream) {
                if b > loads.len() {
                    return None;
                }
                if b == loads.len() {
                    loads.push(0.0);
                }
                loads[b] += s;
                if !within(loads[b], o.bin_capacity) {
                    return None;
                }
            }
            Some(-(loads.len() as f64))
        }
        (Instance::Kp(k), Solution::Kp(items)) => {
            if !distinct_cover(items, k.weights.len(), false) || !within(items.iter().map(|&i| k.weights[i]).sum(), k.capacity) {
                return None;
            }
            Some(items.iter().map(|&i| k.values[i]).sum())
        }
        (Instance::Mkp(m), Solution::Mkp(sacks)) => {
            let flat: Vec<usize> = sacks.iter().flatten().copied().collect();
            if sacks.len() != m.constraints.len() || !distinct_cover(&flat, m.values.len(), false) {
                return None;
            }
            for (s, items) in sacks.iter().enumerate() {
                if !within(items.iter().map(|&i| m.weights[s][i]).sum(), m.constraints[s]) {
                    return None;
                }
            }
            Some(flat.iter().map(|&i| m.values[i]).sum())
        }
        _ => None,
    }
}

fn oracle_optimum(inst: &Instance) -> f64 {
    match inst {
        Instance::Tsp(t) => tsp_oracle(t),
        Instance::Cvrp(v) => cvrp_oracle(v),
        Instance::Bpp(b) => bins_oracle(&b.item_sizes, b.bin_capacity),
        Instance::Obpp(o) => bins_oracle(&o.item_stream, o.bin_capacity),
        Instance::Kp(k) => kp_oracle(k),
        Instance::Mkp(m) => mkp_oracle(m),
    }
}

fn random_coords(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 2]> {
    (0..n).map(|_| [rng.gen(), rng.gen()]).collect()
}

fn tiny_instance(kind: CopKind, rng: &mut ChaCha8Rng) -> Instance {
    match kind {
        CopKind::Tsp => {
            let n = rng.gen_range(2..=8);
            Instance::Tsp(TspInstance::from_coords(random_coords(rng, n)))
        }
        CopKind::Cvrp => {
            let n = rng.gen_range(1..=8);
            let mut demands = vec![0.0];
            demands.extend((0..n).map(|_| rng.gen_range(1..=9) as f64));
            let capacity = rng.gen_range(9..=30) as f64;
            Instance::Cvrp(CvrpInstance::from_coords(random_coords(rng, n + 1), demands, capacity))
        }
        CopKind::Bpp | CopKind::Obpp => {
            let n = rng.gen_range(1..=12);
            let sizes: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=60) as f64).collect();
            if kind == CopKind::Bpp {
                Instance::Bpp(BppInstance { item_sizes: sizes, bin_capacity: 100.0 })
            } else {
                Instance::Obpp(ObppInstance { item_stream: sizes, bin_capacity: 100.0 })
            }
        }
        CopKind::Kp => {
            let n = rng.gen_range(1..=12);
            Instance::Kp(KpInstance {
                weights: (0..n).map(|_| rng.gen_range(0.01..1.0)).collect(),
                values: (0..n).map(|_| rng.gen_range(0.01..1.0)).collect(),
                capacity: rng.gen_range(0.5..3.0),
            })
        }
        CopKind::Mkp => {
            let n = rng.gen_range(1..=12);
            let m = rng.gen_range(1..=2);
            let weights: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(0.01..1.0)).collect()).collect();
            let constraints = weights
                .iter()
                .map(|row| {
                    let max = row.iter().copied().fold(0.0, f64::max);
                    let total: f64 = row.iter().sum();
                    max + rng.gen::<f64>() * (total - max)
                })
                .collect();
            Instance::Mkp(MkpInstance { values: (0..n).map(|_| rng.gen_range(0.01..1.0)).collect(), weights, constraints })
        }
    }
}

/// Random candidates, many of them infeasible.
fn random_candidates(inst: &Instance, rng: &mut ChaCha8Rng, count: usize) -> Vec<Solution> {
    (0..count)
        .map(|_| match inst {
            Instance::Tsp(t) => {
                let mut p: Vec<usize> = (0..t.coords.len()).collect();
                p.shuffle(rng);
                if rng.gen_bool(0.2) {
                    p.pop();
                }
                Solution::Tsp(p)
            }
            Instance::Cvrp(v) => {
                let mut p: Vec<usize> = (1..v.demands.len()).collect();
                p.shuffle(rng);
                let mut routes: Vec<Vec<usize>> = vec![Vec::new()];
                for c in p {
                    if !routes.last().unwrap().is_empty() && rng.gen_bool(0.4) {
                        routes.push(Vec::new());
                    }
                    routes.last_mut().unwrap().push(c);
                }
                Solution::Cvrp(routes.into_iter().filter(|r| !r.is_empty()).collect())
            }
            Instance::Bpp(b) => {
                let n = b.item_sizes.len();
                let k = rng.gen_range(1..=n);
                let mut bins = vec![Vec::new(); k];
                for i in 0..n {
                    bins[rng.gen_range(0..k)].push(i);
                }
                Solution::Bpp(bins)
            }
            Instance::Obpp(o) => {
                let mut opened = 0;
                let assign = o
                    .item_stream
                    .iter()
                    .map(|_| {
                        let b = rng.gen_range(0..=opened);
                        opened = opened.max(b + 1);
                        b
                    })
                    .collect();
                Solution::Obpp(assign)
            }
            Instance::Kp(k) => Solution::Kp((0..k.weights.len()).filter(|_| rng.gen_bool(0.4)).collect()),
            Instance::Mkp(m) => {
                let mut sacks = vec![Vec::new(); m.constraints.len()];
                for i in 0..m.values.len() {
                    let s = rng.gen_range(0..=sacks.len());
                    if s < sacks.len() {
                        sacks[s].push(i);
                    }
                }
                Solution::Mkp(sacks)
            }
        })
        .collect()
}

fn oracle_equivalence() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let kinds = [CopKind::Tsp, CopKind::Cvrp, CopKind::Bpp, CopKind::Obpp, CopKind::Kp, CopKind::Mkp];
    let mut checked = 0;
    let mut valid = 0;
    for kind in kinds {
        for trial in 0..200 {
            let inst = tiny_instance(kind, &mut rng);
            let opt = oracle_optimum(&inst);
            let (best, q) = brute_force_optimum(&inst)?;
            ensure!((q - opt).abs() <= TOL, "{kind} #{trial}: exhaustive search {q} vs oracle {opt}");
            let mut cands = random_candidates(&inst, &mut rng, 30);
            cands.push(best);
            for b in Baseline::for_kind(kind) {
                cands.push(baseline_solve(b, &inst)?);
            }
            for sol in &cands {
                checked += 1;
                let report = validate(&inst, sol)?;
                let expected = oracle_objective(&inst, sol);
                ensure!(report.valid == expected.is_some(), "{kind} #{trial}: validity disagrees on {sol:?}: {}", report.summary());
                if let Some(e) = expected {
                    valid += 1;
                    let got = objective(&inst, sol)?;
                    ensure!((got - e).abs() <= TOL, "{kind} #{trial}: objective {got} vs oracle {e}");
                    ensure!(got <= opt + TOL, "{kind} #{trial}: {got} beats the optimum {opt}");
                }
            }
        }
    }
    Ok(Verdict::Pass(format!(
        "1200 instances, {checked} candidates ({valid} valid) agree with independent oracles to 1e-9"
    )))
}

// ---------------------------------------------------------------------------

/// Mean magnitude and its standard error over 64 seeded instances.
fn baseline_mean(params: GeneratorParams, seed: u64, baseline: Baseline) -> Result<(f64, f64)> {
    let ds = generate_instances(&params, seed, 64)?;
    let mut values = Vec::new();
    for inst in &ds.instances {
        values.push(objective(inst, &baseline_solve(baseline, inst)?)?.abs());
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

fn baseline_calibration() -> Result<Verdict> {
    let checks = [
        ("TSP n=50 nearest neighbour", baseline_mean(GeneratorParams::Tsp { n: 50 }, 1, Baseline::NearestNeighbor)?, 6.959, 0.05),
        ("TSP n=100 nearest neighbour", baseline_mean(GeneratorParams::Tsp { n: 100 }, 2, Baseline::NearestNeighbor)?, 9.706, 0.05),
        ("KP n=50 W=12.5 ratio greedy", baseline_mean(GeneratorParams::Kp { n: 50, capacity: 12.5 }, 3, Baseline::RatioGreedy)?, 19.985, 0.02),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, (got, se), target, tol) in checks {
        let inside = (got - target).abs() <= tol * target;
        ok &= inside;
        parts.push(format!(
            "{name} {got:.3} ± {se:.3} s.e. (target {target} ±{}%{})",
            tol * 100.0,
            if inside { "" } else { ", OUTSIDE" }
        ));
    }
    let detail = parts.join("; ");
    Ok(if ok { Verdict::Pass(detail) } else { Verdict::Fail(detail) })
}

fn obpp_dataset_exact() -> Result<Verdict> {
    let Ok(path) = std::env::var("REDSEARCH_OBPP_DATASET") else {
        return Ok(Verdict::NotRun(
            "needs the published n=1k, W=100 evaluation set; set REDSEARCH_OBPP_DATASET to a converted dataset file".into(),
        ));
    };
    let ds = Dataset::read(&path)?;
    ensure!(ds.kind == CopKind::Obpp, "{path} holds {} instances", ds.kind);
    let mut gaps = Vec::new();
    for inst in &ds.instances {
        let Instance::Obpp(o) = inst else { unreachable!() };
        let bins = -objective(inst, &baseline_solve(Baseline::BestFit, inst)?)?;
        gaps.push(optimality_gap(bins, bin_lower_bound(&o.item_stream, o.bin_capacity), Sense::Minimize)?);
    }
    let gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let detail = format!("best fit mean gap {gap:.3}% over {} instances (target 4.77 ± 0.10)", gaps.len());
    Ok(if (gap - 4.77).abs() <= 0.10 { Verdict::Pass(detail) } else { Verdict::Fail(detail) })
}

fn tsplib_gap() -> Result<Verdict> {
    let text = fs::read_to_string(fixtures().join("eil51.tsp"))?;
    let inst = parse_tsplib(&text)?;
    ensure!(inst.size() == 51, "eil51 parsed with {} nodes", inst.size());
    let length = -objective(&inst, &baseline_solve(Baseline::NearestNeighbor, &inst)?)?;
    let gap = optimality_gap(length, 426.0, Sense::Minimize)?;
    let detail = format!("tour {length} from node 0 with TSPLIB-rounded distances, gap {gap:.2}% (band [20, 45]%)");
    Ok(if (20.0..=45.0).contains(&gap) { Verdict::Pass(detail) } else { Verdict::Fail(detail) })
}

// ---------------------------------------------------------------------------

fn params() -> ChatParams {
    ChatParams { model: "scripted".into(), temperature: 1.0 }
}

fn ok_heuristic(id: usize, lr_id: usize, fitness: Option<f64>) -> Heuristic {
    let mut h = Heuristic::new(id, lr_id, String::new(), String::new(), Origin { generation: 0, operator: Operator::Init });
    h.apply(Evaluation {
        fitness,
        status: if fitness.is_some() { EvalStatus::Ok } else { EvalStatus::InvalidSolution },
        detail: None,
        objectives: Vec::new(),
    });
    h
}

/// Survivors by the management rules, computed independently.
fn management_oracle(pop: &[Heuristic], capacity: usize, generation: usize, threshold: usize, l: usize, active: &[usize]) -> BTreeSet<usize> {
    let early = generation < threshold;
    let tie = |a: f64, b: f64| (a - b).abs() <= 1e-6;
    let mut by_id: Vec<&Heuristic> = pop.iter().filter(|h| h.is_ok()).collect();
    by_id.sort_by_key(|h| h.id);
    let mut unique: Vec<&Heuristic> = Vec::new();
    for h in by_id {
        let clash = unique.iter().any(|u| (u.lr_id == h.lr_id || !early) && tie(u.fitness.unwrap(), h.fitness.unwrap()));
        if !clash {
            unique.push(h);
        }
    }
    unique.sort_by(|a, b| b.fitness.unwrap().total_cmp(&a.fitness.unwrap()).then(a.id.cmp(&b.id)));
    let top: Vec<&Heuristic> = unique.iter().take(capacity).copied().collect();
    let mut kept: BTreeSet<usize> = top.iter().map(|h| h.id).collect();
    if early {
        let rest = &unique[top.len()..];
        for h in rest {
            if top.iter().any(|t| t.lr_id != h.lr_id && tie(t.fitness.unwrap(), h.fitness.unwrap())) {
                kept.insert(h.id);
            }
        }
        for &lr in active {
            let have = unique.iter().filter(|h| h.lr_id == lr && kept.contains(&h.id)).count();
            let extra: Vec<usize> = rest
                .iter()
                .filter(|h| h.lr_id == lr && !kept.contains(&h.id))
                .take(l.saturating_sub(have))
                .map(|h| h.id)
                .collect();
            kept.extend(extra);
        }
    }
    kept
}

/// A model that always answers with the same heuristic and reduction, so
/// no score ever moves.
fn flat_responder() -> MockResponder {
    let reduction = format!(
        "```python\ndef convert_input_A_to_B(weights, values, capacity):\n    {}\n    return (weights, values, capacity)\n\ndef convert_solution_B_to_A(solution_B):\n    return solution_B\n```",
        FixtureSandbox::marker("identity", None)
    );
    MockResponder::new()
        .on("Please help me modify the following code", MockReply::fixed(reduction.clone()))
        .on("fill in the blanks", MockReply::fixed("```python\ndef solve_B(input_B):\n    return solution_B\n```"))
        .on("Implement 2 Python functions", MockReply::fixed(reduction))
        .on("Please help me devise", MockReply::fixed("{{Problem B1 picks weighted items.}}\n{{Problem B2 picks weighted items.}}"))
        .otherwise(MockReply::fixed(format!(
            "{{Take dense items}}\n```python\ndef solve_B(input_B):\n    {}\n    raise NotImplementedError\n```",
            FixtureSandbox::marker("ratio_greedy", Some("1.0"))
        )))
}

fn kp_config(n: usize, generations: usize) -> EvolutionConfig {
    let mut cfg = EvolutionConfig::for_kind(CopKind::Kp);
    cfg.population_size = n;
    cfg.active_reductions = 2;
    cfg.candidate_reductions = 3;
    cfg.generations = generations;
    cfg.stagnation_threshold = 3;
    cfg.timeout_seconds = 10.0;
    cfg.workers = 2;
    cfg
}

fn mechanism_invariants() -> Result<Verdict> {
    let mut notes = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(77);

    // ration conservation over a long scripted run
    let data = generate_instances(&GeneratorParams::Kp { n: 10, capacity: 2.0 }, 3, 2)?;
    let sandbox = FixtureSandbox::new();
    let long = run_evolution(kp_config(4, 1000), &scripted_client(CopKind::Kp, params()), &sandbox, &data)?;
    let mut committed = 0;
    for g in &long.generations[1..] {
        ensure!(g.rations.len() == 2, "generation {}: {} rations", g.generation, g.rations.len());
        for r in &g.rations {
            ensure!(r.plan.total() == 4, "generation {}: ration sums to {}", g.generation, r.plan.total());
        }
        ensure!(g.offspring_attempted == 8, "generation {}: {} offspring", g.generation, g.offspring_attempted);
        for e in &g.refinements {
            if let redsearch::reduction::RefinementOutcome::Committed { old, new } = e.outcome {
                committed += 1;
                ensure!(new.as_f64() >= old.as_f64(), "generation {}: commit made reduction {} worse", g.generation, e.lr_id);
            }
        }
    }
    notes.push(format!("ration sums to N in all 1000 generations ({committed} refinements committed, none worse)"));

    // selection frequencies against p_j proportional to 1/|s_j|
    let raw = [-5.0, -10.0, -2.5, -20.0, -7.0];
    let scores: Vec<LrScore> = raw.iter().map(|&s| LrScore::Value(s)).collect();
    let draws = 100_000;
    let plan = allocate_ration(&[0, 1, 2, 3, 4], &scores, draws, Sense::Minimize, &mut rng);
    let weights: Vec<f64> = raw.iter().map(|s: &f64| 1.0 / s.abs()).collect();
    let total: f64 = weights.iter().sum();
    let chi2: f64 = plan
        .counts
        .iter()
        .zip(&weights)
        .map(|(&o, w)| {
            let e = draws as f64 * w / total;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let p = 1.0 - ChiSquared::new((raw.len() - 1) as f64)?.cdf(chi2);
    ensure!(p > 0.01, "chi-square {chi2:.2}, p = {p:.4}");
    notes.push(format!("selection chi-square p = {p:.3}"));

    // reduction score against a sort oracle
    for _ in 0..10_000 {
        let len = rng.gen_range(0..12);
        let pop: Vec<Heuristic> = (0..len)
            .map(|i| ok_heuristic(i, rng.gen_range(0..2), rng.gen_bool(0.8).then(|| rng.gen_range(-50.0..50.0))))
            .collect();
        let l = rng.gen_range(1..6);
        let mut f: Vec<f64> = pop.iter().filter(|h| h.lr_id == 0).filter_map(|h| h.fitness).collect();
        f.sort_by(|a, b| b.total_cmp(a));
        let expected = if pop.iter().all(|h| h.lr_id != 0) {
            LrScore::Unset
        } else if f.is_empty() {
            LrScore::Failed
        } else {
            let top = &f[..l.min(f.len())];
            LrScore::Value(top.iter().sum::<f64>() / top.len() as f64)
        };
        let got = compute_lr_score(0, &pop, l);
        let same = match (got, expected) {
            (LrScore::Value(a), LrScore::Value(b)) => (a - b).abs() <= 1e-12,
            (a, b) => a == b,
        };
        ensure!(same, "score {got:?}, oracle {expected:?}");
    }
    notes.push("reduction score matches the sort oracle on 10^4 multisets".into());

    // management against an independent oracle
    let active = [0, 1, 2];
    let mut early_ties = 0;
    for _ in 0..10_000 {
        let len = rng.gen_range(0..30);
        let pop: Vec<Heuristic> = (0..len)
            .map(|i| ok_heuristic(i, rng.gen_range(0..3), rng.gen_bool(0.85).then(|| -(rng.gen_range(0..10) as f64))))
            .collect();
        let (capacity, generation, l) = (rng.gen_range(1..8), rng.gen_range(0..6), rng.gen_range(1..3));
        let kept = manage_population(pop.clone(), ManageSettings { capacity, generation, threshold: 3, l, active_lrs: &active });
        ensure!(kept.iter().all(Heuristic::is_ok), "a failed heuristic survived");
        let ids: BTreeSet<usize> = kept.iter().map(|h| h.id).collect();
        let want = management_oracle(&pop, capacity, generation, 3, l, &active);
        ensure!(ids == want, "generation {generation}, N={capacity}: kept {ids:?}, oracle {want:?}");
        if generation >= 3 {
            ensure!(kept.len() <= capacity, "late population exceeds N");
        } else if kept.iter().enumerate().any(|(i, a)| kept[i + 1..].iter().any(|b| a.lr_id != b.lr_id && a.fitness == b.fitness)) {
            early_ties += 1;
        }
    }
    notes.push(format!("management matches the oracle on 10^4 populations ({early_ties} with cross-reduction ties kept early)"));

    // stagnation triggers one refinement per episode at T = 3
    let flat = run_evolution(kp_config(4, 8), &LlmClient::mock(params(), flat_responder()), &sandbox, &data)?;
    let events: Vec<(usize, usize)> = flat
        .generations
        .iter()
        .flat_map(|g| g.refinements.iter().map(move |e| (g.generation, e.lr_id)))
        .collect();
    ensure!(events == vec![(3, 0), (3, 1)], "refinement attempts at {events:?}");
    let at3 = &flat.generations[3].lr_scores;
    ensure!(at3.iter().all(|e| e.stagnation_counter == 3), "counters at the attempt: {at3:?}");
    notes.push("one refinement attempt per reduction, at counter 3".into());

    // commit or rollback never lowers the score
    let root = ProblemDescription::root(CopKind::Kp);
    let mut attempts = 0;
    for from in ["identity", "drop_last", "swap_pair"] {
        for to in ["identity", "drop_last", "swap_pair", "missing"] {
            let code = |name: &str| {
                format!(
                    "def convert_input_A_to_B(weights, values, capacity):\n    {}\n    return (weights, values, capacity)\n\ndef convert_solution_B_to_A(solution_B):\n    return solution_B",
                    FixtureSandbox::marker(name, None)
                )
            };
            let mut lr = LanguageReduction::new(0, ProblemDescription::new("Problem B picks items.").unwrap(), code(from), String::new());
            let mut pop: Vec<Heuristic> = (0..4)
                .map(|i| {
                    let h_code = format!("def solve_B(input_B):\n    {}\n", FixtureSandbox::marker("ratio_greedy", Some(&format!("0.{}", 5 + i))));
                    let mut h = Heuristic::new(i, 0, String::new(), h_code, Origin { generation: 0, operator: Operator::Init });
                    h.apply(redsearch::evolution::evaluate_code("h", &h.code, &lr.reduction_code, &data, &sandbox, 10.0)?);
                    Ok(h)
                })
                .collect::<Result<_>>()?;
            lr.score = compute_lr_score(0, &pop, 2);
            lr.stagnation_counter = 3;
            let before = lr.score;
            let llm = LlmClient::mock(
                params(),
                MockResponder::new()
                    .on("Please help me modify", MockReply::fixed(format!("```python\n{}\n```", code(to))))
                    .on("fill in the blanks", MockReply::fixed("```python\ndef solve_B(input_B):\n    return solution_B\n```")),
            );
            let settings = RefineSettings { l: 2, threshold: 3, retries: 1, timeout_seconds: 10.0, workers: 2, generation: 3 };
            refine_reduction(&mut lr, &root, &llm, &mut pop, &data, &sandbox, settings)?;
            let after = compute_lr_score(0, &pop, 2);
            ensure!(after.as_f64() >= before.as_f64(), "{from} -> {to}: {before:?} became {after:?}");
            ensure!(lr.score == after, "{from} -> {to}: stored score {:?} vs members {after:?}", lr.score);
            attempts += 1;
        }
    }
    notes.push(format!("{attempts} constructed refinements never lowered the score"));
    Ok(Verdict::Pass(notes.join("; ")))
}

// ---------------------------------------------------------------------------

fn replay_fixture(dir: &Path) -> Result<RunResult> {
    let cfg = RunConfigFile::load(&dir.join("run.toml"))?;
    let dataset = Dataset::read(&cfg.dataset)?;
    let transcript = Transcript::load(cfg.transcript.as_ref().context("fixture config names a transcript")?)?;
    let llm = LlmClient::replay(cfg.llm.params(), transcript, cfg.llm.replay_mode)?;
    let sandbox = cfg.sandbox.build();
    let engine = Engine::new(cfg.evolution_for(dataset.kind)?, &llm, sandbox.as_ref(), &dataset)?;
    Ok(engine.run()?)
}

fn determinism() -> Result<Verdict> {
    let dir = fixtures().join("kp_toy");
    let recorded = fs::read_to_string(dir.join("result.json"))?;
    let a = replay_fixture(&dir)?.to_json()?;
    let b = replay_fixture(&dir)?.to_json()?;
    ensure!(a == b, "two replays differ");
    ensure!(a == recorded, "replay differs from the recorded result");
    let r: RunResult = serde_json::from_str(&a)?;
    ensure!(
        r.config.population_size == 6 && r.config.active_reductions == 2 && r.config.generations == 3,
        "fixture settings changed"
    );
    Ok(Verdict::Pass(format!(
        "KP toy run (8 instances, G=3, N=6, M=2) replayed twice, byte-identical to the recording (best {:.6})",
        r.best.fitness
    )))
}

fn live_smoke() -> Result<Verdict> {
    let Ok(path) = std::env::var("REDSEARCH_LIVE_CONFIG") else {
        return Ok(Verdict::NotRun(
            "needs a live endpoint and a Python runner; set REDSEARCH_LIVE_CONFIG to a run configuration".into(),
        ));
    };
    let mut cfg = RunConfigFile::load(Path::new(&path))?;
    if cfg.llm.backend != Backend::Live {
        bail!("{path} does not use the live backend");
    }
    let dataset = Dataset::read(&cfg.dataset)?;
    ensure!(dataset.kind == CopKind::Tsp, "the smoke run is defined on TSP");
    let sols: Vec<Solution> = dataset
        .instances
        .iter()
        .map(|i| baseline_solve(Baseline::NearestNeighbor, i))
        .collect::<Result<_, _>>()?;
    let greedy = mean_objective(dataset.instances.iter().zip(&sols))?;
    let mut wins = 0;
    let mut lines = Vec::new();
    for seed in 0..3 {
        cfg.evolution.seed = Some(seed);
        let llm = LlmClient::live(&cfg.llm)?;
        let sandbox = cfg.sandbox.build();
        let r = run_evolution(cfg.evolution_for(CopKind::Tsp)?, &llm, sandbox.as_ref(), &dataset)
            .map_err(|e| anyhow!("seed {seed}: {e}"))?;
        wins += (r.best.fitness > greedy) as usize;
        lines.push(format!("seed {seed}: {:.4}", -r.best.fitness));
    }
    let detail = format!("{}; nearest neighbour {:.4}; {wins}/3 beat it", lines.join(", "), -greedy);
    Ok(if wins >= 2 { Verdict::Pass(detail) } else { Verdict::Fail(detail) })
}
