//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). Criteria listed in
//! `EXPECTED_FAIL` are known to be unattainable on the given fixtures; they are
//! still evaluated in full and reported as FAIL, and the process exits nonzero
//! if any criterion's outcome differs from its expectation.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use driftbwk::environment::{make_fixture, Environment};
use driftbwk::harness::{
    fit_scaling, run_episode, sweep_env, Aggregate, RunConfig, ScalingModel, SweepResult,
};
use driftbwk::lp_core::oracle::enumerate_vertex_optimum;
use driftbwk::lp_core::{compute_constants, solve_relaxation, LpInstance};
use driftbwk::policies::confidence::{ucb_lp_values, ConfidenceTable};
use driftbwk::policies::etcb::identify_from_table;
use driftbwk::policies::{
    build_policy, cb_solve_gamma, CbConfig, IdentificationRule, PolicyConfig, PolicyId,
};
use driftbwk::reduction::{check_lp_equivalence, lift, run_reduction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria whose failure is expected on these fixtures.
const EXPECTED_FAIL: &[u32] = &[2, 4];

/// Regret column in `Aggregate::mean`.
const REGRET: usize = 2;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn fixture(name: &str) -> Environment {
    make_fixture(name).expect("fixture builds")
}

fn sweep_cell(
    env: &Environment,
    policy: PolicyConfig,
    horizon: u64,
    seeds: std::ops::Range<u64>,
) -> SweepResult {
    let cfg = RunConfig {
        instance: env.name().unwrap_or("instance").to_string(),
        policy,
        horizons: vec![horizon],
        seeds: seeds.collect(),
        master_seed: 0,
        out: None,
        jobs: None,
        trajectory_stride: None,
    };
    let res = sweep_env(env, &cfg).expect("valid sweep config");
    assert!(
        res.failures.is_empty(),
        "sweep failures: {:?}",
        res.failures
    );
    res
}

fn mean_se(agg: &Aggregate, col: usize) -> (f64, f64) {
    (
        agg.mean[col].expect("column present"),
        agg.stderr[col].unwrap_or(0.0),
    )
}

fn c1_lp_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let inst = common::grid_instance(&mut rng);
        let fast = solve_relaxation(&inst).expect("feasible").value;
        let slow = enumerate_vertex_optimum(&inst).expect("small").value;
        worst = worst.max((fast - slow).abs());
    }
    Verdict::new(
        worst <= 1e-9,
        format!("200 instances, max |simplex - oracle| = {worst:.3e}"),
    )
}

/// Every sign pattern over `J*` combined with every flagged subset of the
/// non-binding resources.
fn patterns(cfg: &CbConfig) -> Vec<(Vec<f64>, Vec<usize>)> {
    let nb = cfg.binding.len();
    let nn = cfg.nonbinding.len();
    let mut out = Vec::new();
    for s_mask in 0..(1u32 << nb) {
        let mut s: Vec<f64> = (0..nb)
            .map(|i| if s_mask >> i & 1 == 1 { 1.0 } else { -1.0 })
            .collect();
        s.push(0.0);
        for f_mask in 0..(1u32 << nn) {
            let flagged = (0..nn)
                .filter(|i| f_mask >> i & 1 == 1)
                .map(|i| cfg.nonbinding[i])
                .collect();
            out.push((s.clone(), flagged));
        }
    }
    out
}

fn c2_gamma_feasibility() -> Verdict {
    let mut pass = true;
    let mut notes = Vec::new();
    for name in ["FIX-B", "FIX-C", "FIX-D"] {
        let inst = fixture(name).lp_instance();
        let sol = solve_relaxation(&inst).expect("feasible");
        let cfg = CbConfig::new(&inst, &sol, 30.0, None).expect("square basis");
        let gamma_star = compute_constants(&inst, &sol, Some(30.0)).map(|k| k.gamma_star);
        let mut worst = f64::INFINITY;
        let mut empty = 0;
        let all = patterns(&cfg);
        for (s, flagged) in &all {
            match cb_solve_gamma(&cfg, s, flagged) {
                Ok(g) => worst = worst.min(g.gamma),
                Err(_) => empty += 1,
            }
        }
        let (ok, target) = match &gamma_star {
            Ok(g) => (empty == 0 && worst >= g - 1e-9, format!("{g:.4}")),
            Err(e) => (false, format!("undefined ({e})")),
        };
        pass &= ok;
        notes.push(format!(
            "{name}: {} patterns, min gamma_t = {worst:.4}, empty = {empty}, gamma* = {target}",
            all.len()
        ));
    }
    Verdict::new(pass, notes.join("; "))
}

fn c3_constant_regret() -> Verdict {
    const C: f64 = 30.0;
    const SEEDS: u64 = 200;
    const HORIZONS: [u64; 3] = [6250, 12500, 25000];
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, id) in [
        ("FIX-A", PolicyId::Cb1),
        ("FIX-B", PolicyId::Cb1),
        ("FIX-C", PolicyId::Cb1),
        ("FIX-D", PolicyId::Cb),
    ] {
        let env = fixture(name);
        let mut policy = PolicyConfig::new(id);
        policy.c = Some(C);
        // Disjoint seed blocks keep the horizons independent.
        let stats: Vec<(f64, f64)> = HORIZONS
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let base = i as u64 * SEEDS;
                let res = sweep_cell(&env, policy.clone(), t, base..base + SEEDS);
                mean_se(res.aggregate_for(t).expect("rows"), REGRET)
            })
            .collect();
        let mut ok = true;
        for w in stats.windows(2) {
            let diff = w[1].0 - w[0].0;
            let se = (w[0].1.powi(2) + w[1].1.powi(2)).sqrt();
            ok &= diff.abs() <= 2.0 * se;
        }
        pass &= ok;
        let means: Vec<String> = stats
            .iter()
            .map(|(m, s)| format!("{m:.1}+-{s:.1}"))
            .collect();
        notes.push(format!(
            "{name} {} [{}] {}",
            id.as_str(),
            means.join(", "),
            if ok { "ok" } else { "drift" }
        ));
    }
    Verdict::new(pass, format!("c = {C}; {}", notes.join("; ")))
}

fn c4_log_regret() -> Verdict {
    const HORIZONS: [u64; 4] = [18750, 37500, 75000, 150000];
    const PHASE1: usize = 5;
    let env = fixture("FIX-E");
    let mut policy = PolicyConfig::new(PolicyId::EtcbEmpirical);
    policy.gamma_star = Some(0.5);
    let cfg = RunConfig {
        instance: "FIX-E".into(),
        policy,
        horizons: HORIZONS.to_vec(),
        seeds: (0..100).collect(),
        master_seed: 0,
        out: None,
        jobs: None,
        trajectory_stride: None,
    };
    let res = sweep_env(&env, &cfg).expect("valid sweep config");
    if !res.failures.is_empty() {
        return Verdict::new(false, format!("{} failed cells", res.failures.len()));
    }
    let aggs: Vec<&Aggregate> = HORIZONS
        .iter()
        .map(|&t| res.aggregate_for(t).expect("rows"))
        .collect();
    let points: Vec<(f64, f64)> = aggs
        .iter()
        .map(|a| (a.horizon as f64, mean_se(a, REGRET).0))
        .collect();
    let ssr = |m| fit_scaling(&points, m).expect("four points").residual_ss;
    let (log, constant, sqrt) = (
        ssr(ScalingModel::LogT),
        ssr(ScalingModel::Constant),
        ssr(ScalingModel::SqrtT),
    );
    let fits_ok = log < constant && log < sqrt;

    // The horizons double, so ln T is evenly spaced: growth at most affine in
    // ln T means the second differences are not significantly positive.
    // Per-arm sample targets are rounded up, which moves each point by less
    // than k and a second difference by less than 2k.
    let rounding = 2.0 * env.num_arms() as f64;
    let p1: Vec<(f64, f64)> = aggs.iter().map(|a| mean_se(a, PHASE1)).collect();
    let mut affine_ok = true;
    for w in p1.windows(3) {
        let second = w[2].0 - 2.0 * w[1].0 + w[0].0;
        let se = (w[0].1.powi(2) + 4.0 * w[1].1.powi(2) + w[2].1.powi(2)).sqrt();
        affine_ok &= second <= 2.0 * se + rounding;
    }
    let regrets: Vec<String> = points.iter().map(|p| format!("{:.1}", p.1)).collect();
    let phases: Vec<String> = p1.iter().map(|p| format!("{:.0}", p.0)).collect();
    Verdict::new(
        fits_ok && affine_ok,
        format!(
            "gamma* = 0.5, c = {:?}; regret [{}]; SSR log {log:.1}, const {constant:.1}, sqrt {sqrt:.1}; phase-1 [{}] {}",
            res.resolved.first().and_then(|r| r.c),
            regrets.join(", "),
            phases.join(", "),
            if affine_ok { "affine" } else { "superaffine" }
        ),
    )
}

fn c5_zero_drift() -> Verdict {
    const HORIZONS: [u64; 4] = [1000, 4000, 16000, 64000];
    let env = fixture("FIX-Z");
    let cfg = RunConfig {
        instance: "FIX-Z".into(),
        policy: PolicyConfig::new(PolicyId::LpSampler),
        horizons: HORIZONS.to_vec(),
        seeds: (0..200).collect(),
        master_seed: 0,
        out: None,
        jobs: None,
        trajectory_stride: None,
    };
    let res = sweep_env(&env, &cfg).expect("valid sweep config");
    if !res.failures.is_empty() {
        return Verdict::new(false, format!("{} failed cells", res.failures.len()));
    }
    let points: Vec<(f64, f64)> = HORIZONS
        .iter()
        .map(|&t| {
            (
                t as f64,
                mean_se(res.aggregate_for(t).expect("rows"), REGRET).0,
            )
        })
        .collect();
    let fit = fit_scaling(&points, ScalingModel::PowerLaw).expect("positive regrets");
    let (lo, hi) = fit.ci;
    let regrets: Vec<String> = points.iter().map(|p| format!("{:.1}", p.1)).collect();
    Verdict::new(
        lo >= 0.4 && hi <= 0.6,
        format!(
            "regret [{}]; exponent {:.3}, 95% CI [{lo:.3}, {hi:.3}]",
            regrets.join(", "),
            fit.coefficient
        ),
    )
}

fn c6_reduction() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let bwk = common::random_bwk(&mut rng, 2000);
        let (a, b) = check_lp_equivalence(&bwk).expect("valid instance");
        worst = worst.max((a - b).abs());
    }
    let mut paired = 0;
    let mut mismatches = 0;
    for i in 0..20u64 {
        let bwk = common::random_bwk(&mut rng, 2000);
        let lifted = lift(&bwk).expect("valid instance");
        let opt = solve_relaxation(&lifted.lp_instance())
            .expect("feasible")
            .value;
        for id in [PolicyId::LpSampler, PolicyId::EtcbEmpirical, PolicyId::Etcb] {
            let mut policy = PolicyConfig::new(id);
            policy.gamma_star = Some(0.5);
            let built = build_policy(&policy, &lifted).expect("buildable with override");
            let mut direct = built.policy.clone();
            let mut reduced = built.policy.clone();
            let ep = run_episode(&lifted, direct.as_mut(), opt, 3, i, None).expect("legal run");
            let (summary, _) = run_reduction(&bwk, reduced.as_mut(), 3, i).expect("legal run");
            paired += 1;
            if summary.total_reward != ep.summary.total_reward {
                mismatches += 1;
            }
        }
    }
    Verdict::new(
        worst <= 1e-9 && mismatches == 0,
        format!("100 instances, max LP difference {worst:.3e}; {paired} paired runs, {mismatches} reward mismatches"),
    )
}

fn identities(notes: &mut Vec<String>) -> bool {
    let mut worst = 0.0f64;
    let mut checked = 0;
    for name in ["FIX-B", "FIX-C", "FIX-D"] {
        let inst = fixture(name).lp_instance();
        let sol = solve_relaxation(&inst).expect("feasible");
        let cfg = CbConfig::new(&inst, &sol, 30.0, None).expect("square basis");
        for (s, flagged) in patterns(&cfg) {
            let Ok(g) = cb_solve_gamma(&cfg, &s, &flagged) else {
                continue;
            };
            let p: Vec<f64> = cfg.support.iter().map(|&x| g.probabilities[x]).collect();
            let dp = cfg.basis.mul_vec(&p);
            for ((lhs, b), si) in dp.iter().zip(&cfg.rhs).zip(&s) {
                worst = worst.max((lhs - (b + g.gamma * si)).abs());
            }
            checked += 1;
        }
    }
    notes.push(format!(
        "Dp = b + gamma s over {checked} solves, max err {worst:.1e}"
    ));
    worst <= 1e-9
}

fn legality(notes: &mut Vec<String>) -> bool {
    let mut runs = 0;
    let mut bad = Vec::new();
    for name in ["FIX-A", "FIX-B", "FIX-C", "FIX-D", "FIX-E", "FIX-Z"] {
        let env = fixture(name)
            .with_horizon(5000)
            .expect("horizon covers budget");
        let opt = solve_relaxation(&env.lp_instance())
            .expect("feasible")
            .value;
        for id in PolicyId::ALL {
            let mut policy = PolicyConfig::new(id);
            policy.c = Some(30.0);
            policy.gamma_star = Some(0.5);
            let Ok(built) = build_policy(&policy, &env) else {
                continue;
            };
            for seed in 0..5 {
                let mut p = built.policy.clone();
                let out = catch_unwind(AssertUnwindSafe(|| {
                    run_episode(&env, p.as_mut(), opt, 7, seed, None)
                }));
                runs += 1;
                match out {
                    Ok(Ok(ep)) if ep.summary.leftover_budgets.iter().all(|&b| b >= 0.0) => {}
                    Ok(Ok(_)) => bad.push(format!("{name}/{}: negative leftover", id.as_str())),
                    Ok(Err(e)) => bad.push(format!("{name}/{}: {e}", id.as_str())),
                    Err(_) => bad.push(format!("{name}/{}: panic", id.as_str())),
                }
            }
        }
    }
    notes.push(format!(
        "{runs} episodes legal and nonnegative: {}",
        bad.is_empty()
    ));
    if !bad.is_empty() {
        notes.push(bad.join(", "));
    }
    bad.is_empty()
}

fn zero_radius(notes: &mut Vec<String>) -> bool {
    let mut ok = true;
    for name in ["FIX-B", "FIX-C", "FIX-D"] {
        let inst = fixture(name).lp_instance();
        let sol = solve_relaxation(&inst).expect("feasible");
        let table = ConfidenceTable::exact(&inst);
        let found =
            identify_from_table(&table, IdentificationRule::ConfidenceBounds).expect("LPs solve");
        let same = found == Some((sol.support.clone(), sol.binding.clone()));
        if !same {
            notes.push(format!(
                "{name}: identified {found:?}, LP has ({:?}, {:?})",
                sol.support, sol.binding
            ));
        }
        ok &= same;
    }
    notes.push(format!("zero-radius identification matches: {ok}"));
    ok
}

fn perturbed_table<R: Rng>(inst: &LpInstance, rad: f64, rng: &mut R) -> ConfidenceTable {
    let means = (0..inst.num_arms())
        .map(|x| {
            let mut row = vec![inst.rewards[x] + rng.random_range(-rad..=rad)];
            row.extend(
                inst.drifts
                    .iter()
                    .map(|d| d[x] + rng.random_range(-rad..=rad)),
            );
            row
        })
        .collect();
    ConfidenceTable::from_parts(
        inst.horizon,
        inst.initial_budget,
        means,
        vec![rad; inst.num_arms()],
    )
}

/// `UCB(OPT) - LCB(OPT) ≤ (8m / σ_min) · rad` on tables whose intervals hold.
fn width_bound(notes: &mut Vec<String>) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let names = ["FIX-B", "FIX-C", "FIX-D", "FIX-E"];
    let mut worst_ratio = 0.0f64;
    for i in 0..100 {
        let inst = fixture(names[i % names.len()]).lp_instance();
        let sol = solve_relaxation(&inst).expect("feasible");
        let sigma = driftbwk::linalg::smallest_singular_value(&sol.basis());
        let rad = rng.random_range(1e-4..0.05);
        let table = perturbed_table(&inst, rad, &mut rng);
        let b = ucb_lp_values(&table).expect("LPs solve");
        let bound = 8.0 * inst.num_resources() as f64 / sigma * rad;
        worst_ratio = worst_ratio.max((b.ucb_opt - b.lcb_opt) / bound);
    }
    notes.push(format!(
        "UCB-LCB width / bound over 100 tables <= {worst_ratio:.3}"
    ));
    worst_ratio <= 1.0
}

fn c7_invariants() -> Verdict {
    let mut notes = Vec::new();
    let a = legality(&mut notes);
    let b = identities(&mut notes);
    let c = zero_radius(&mut notes);
    let d = width_bound(&mut notes);
    Verdict::new(a && b && c && d, notes.join("; "))
}

type Criterion = (u32, &'static str, Duration, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        (
            1,
            "LP oracle equivalence",
            Duration::from_secs(10),
            c1_lp_oracle,
        ),
        (
            2,
            "gamma* feasibility",
            Duration::from_secs(1),
            c2_gamma_feasibility,
        ),
        (
            3,
            "constant regret of CB",
            Duration::from_secs(600),
            c3_constant_regret,
        ),
        (
            4,
            "logarithmic regret of ETCB-empirical",
            Duration::from_secs(1800),
            c4_log_regret,
        ),
        (
            5,
            "zero-drift sqrt(T) law",
            Duration::from_secs(600),
            c5_zero_drift,
        ),
        (
            6,
            "reduction correctness",
            Duration::from_secs(60),
            c6_reduction,
        ),
        (
            7,
            "structural invariants",
            Duration::from_secs(60),
            c7_invariants,
        ),
    ];
    let mut unexpected = Vec::new();
    for (id, name, budget, run) in criteria {
        let start = Instant::now();
        let verdict = catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict::new(false, format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let pass = verdict.pass && in_time;
        let expected = !EXPECTED_FAIL.contains(&id);
        println!(
            "ACCEPTANCE {id} {}: {name} ({:.1}s{}){} | {}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            if in_time { "" } else { ", over time budget" },
            if pass == expected {
                ""
            } else {
                " [UNEXPECTED]"
            },
            verdict.detail
        );
        if pass != expected {
            unexpected.push(id);
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: outcomes match expectations (expected failures: {EXPECTED_FAIL:?})");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected outcomes for criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}
