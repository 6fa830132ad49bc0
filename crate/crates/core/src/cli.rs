//! The `driftbwk` command line.
//!
//! Exit codes: 0 on success, 1 on invalid input or a violated instance
//! assumption, 2 when some sweep cells failed.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::environment::schema::{load_instance, resolve_source};
use crate::environment::{make_fixture, Environment};
use crate::harness::csv_out::render_csv;
use crate::harness::{
    sweep_env, write_csv, Aggregate, CsvTable, EpisodeSummary, RunConfig, SweepResult,
};
use crate::lp_core::{
    compute_constants, compute_gap, solve_minus_arm, solve_minus_resource, solve_relaxation,
    LpSolution, SeparationConstants,
};
use crate::policies::{build_policy, cb1_classify, PolicyConfig, PolicyId};
use crate::reduction::{check_lp_equivalence, lift, run_reduction, BwkInstance};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "driftbwk",
    version,
    about = "Bandits with knapsacks under resource drift"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the LP relaxation and print p*, X*, J*, the gap and constants.
    SolveLp(SolveArgs),
    /// Print the separation constants.
    Constants(SolveArgs),
    /// Run episodes and write one CSV row per episode.
    Run(RunArgs),
    /// Run a horizon × seed sweep and write episode and aggregate rows.
    Sweep(SweepArgs),
    /// Run a drift policy on a BwK instance through the reduction.
    Reduce(ReduceArgs),
    /// Print instance diagnostics.
    Report(SolveArgs),
}

/// Where the instance comes from. A bare source resolves fixture ids before
/// file paths; a path after `--` is always read as a file.
#[derive(Debug, Args, Default)]
pub struct InstanceArgs {
    /// Fixture id (FIX-A … FIX-E, FIX-Z) or instance JSON path.
    pub source: Option<String>,
    #[arg(long)]
    pub fixture: Option<String>,
    /// Instance JSON path (fixture ids are also accepted).
    #[arg(long)]
    pub instance: Option<String>,
    #[arg(last = true)]
    pub file: Option<PathBuf>,
}

impl InstanceArgs {
    fn given(&self) -> usize {
        [
            self.source.is_some(),
            self.fixture.is_some(),
            self.instance.is_some(),
            self.file.is_some(),
        ]
        .iter()
        .filter(|&&b| b)
        .count()
    }

    pub fn resolve(&self) -> Result<Environment, String> {
        if self.given() != 1 {
            return Err("give exactly one instance source".into());
        }
        let env = if let Some(f) = &self.fixture {
            make_fixture(f)
        } else if let Some(s) = self.source.as_ref().or(self.instance.as_ref()) {
            resolve_source(s)
        } else {
            load_instance(self.file.as_ref().expect("counted above"))
        };
        env.map_err(|e| e.to_string())
    }

    fn label(&self) -> String {
        self.fixture
            .clone()
            .or_else(|| self.source.clone())
            .or_else(|| self.instance.clone())
            .or_else(|| self.file.as_ref().map(|p| p.display().to_string()))
            .unwrap_or_default()
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Threshold coefficient reported with the constants.
    #[arg(long)]
    pub c: Option<f64>,
    /// Machine-readable output.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct PolicyArgs {
    #[arg(long, value_enum)]
    pub policy: Option<PolicyId>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long = "gamma-star")]
    pub gamma_star: Option<f64>,
    /// Samples per arm (× ln T) before empirical identification starts.
    #[arg(long = "explore-coef")]
    pub explore_coef: Option<f64>,
    /// Seeds, e.g. `0..9` (inclusive) or `1,4,7`.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long = "master-seed")]
    pub master_seed: Option<u64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print aggregates as JSON.
    #[arg(long)]
    pub json: bool,
}

impl PolicyArgs {
    fn policy_config(&self, fallback: Option<&PolicyConfig>) -> Result<PolicyConfig, String> {
        let mut cfg = match (self.policy, fallback) {
            (Some(id), _) => PolicyConfig::new(id),
            (None, Some(f)) => f.clone(),
            (None, None) => return Err("--policy is required".into()),
        };
        if self.c.is_some() {
            cfg.c = self.c;
        }
        if self.gamma_star.is_some() {
            cfg.gamma_star = self.gamma_star;
        }
        if self.explore_coef.is_some() {
            cfg.explore_coef = self.explore_coef;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub policy: PolicyArgs,
    /// Comma-separated horizons; defaults to the instance's own.
    #[arg(long)]
    pub horizons: Option<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// RunConfig JSON; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    /// BwK instance JSON.
    #[arg(long)]
    pub instance: PathBuf,
    #[command(flatten)]
    pub policy: PolicyArgs,
}

/// Parses `0..9`, `0..=9`, `3` and comma-separated mixtures; ranges are
/// inclusive.
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>, String> {
    let mut seeds = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let b = b.strip_prefix('=').unwrap_or(b);
            let lo: u64 = a
                .trim()
                .parse()
                .map_err(|_| format!("bad seed range {part:?}"))?;
            let hi: u64 = b
                .trim()
                .parse()
                .map_err(|_| format!("bad seed range {part:?}"))?;
            if hi < lo {
                return Err(format!("empty seed range {part:?}"));
            }
            seeds.extend(lo..=hi);
        } else {
            seeds.push(part.parse().map_err(|_| format!("bad seed {part:?}"))?);
        }
    }
    if seeds.is_empty() {
        return Err("seed list is empty".into());
    }
    Ok(seeds)
}

pub fn parse_horizons(spec: &str) -> Result<Vec<u64>, String> {
    spec.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<u64>().map_err(|_| format!("bad horizon {p:?}")))
        .collect()
}

/// Runs the CLI on `args` (including the program name).
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::SolveLp(a) => solve_lp(a, out),
        Command::Constants(a) => constants(a, out),
        Command::Report(a) => report(a, out),
        Command::Run(a) => run_cmd(a, None, false, out, err),
        Command::Sweep(a) => sweep_cmd(a, out, err),
        Command::Reduce(a) => reduce(a, out, err),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_INVALID
        }
    }
}

type CmdResult = Result<i32, String>;

fn io(e: std::io::Error) -> String {
    e.to_string()
}

#[derive(Serialize)]
struct SolveReport<'a> {
    instance: String,
    solution: &'a LpSolution,
    #[serde(with = "crate::serde_inf")]
    gap: f64,
    constants: Option<SeparationConstants>,
    error: Option<String>,
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

fn write_constants(out: &mut dyn Write, c: &SeparationConstants) -> std::io::Result<()> {
    writeln!(out, "delta_drift: {}", c.delta_drift)?;
    writeln!(out, "sigma_min: {}", c.sigma_min)?;
    writeln!(out, "delta_support: {}", c.delta_support)?;
    writeln!(out, "delta_slack: {}", c.delta_slack)?;
    writeln!(out, "gamma_star: {}", c.gamma_star)?;
    writeln!(out, "gap: {}", c.gap)?;
    writeln!(out, "c: {}", c.c)
}

fn solve_lp(a: &SolveArgs, out: &mut dyn Write) -> CmdResult {
    let env = a.instance.resolve()?;
    let inst = env.lp_instance();
    let sol = solve_relaxation(&inst).map_err(|e| e.to_string())?;
    let gap = compute_gap(&inst, &sol).map_err(|e| e.to_string())?;
    let constants = compute_constants(&inst, &sol, a.c);
    let error = constants.as_ref().err().map(|e| e.to_string());
    if a.json {
        let report = SolveReport {
            instance: a.instance.label(),
            solution: &sol,
            gap,
            constants: constants.as_ref().ok().copied(),
            error: error.clone(),
        };
        serde_json::to_writer_pretty(&mut *out, &report).map_err(|e| e.to_string())?;
        writeln!(out).map_err(io)?;
    } else {
        writeln!(
            out,
            "instance: {} (k={}, m={}, T={}, B={})",
            a.instance.label(),
            inst.num_arms(),
            inst.num_resources(),
            inst.horizon,
            inst.initial_budget
        )
        .map_err(io)?;
        writeln!(out, "OPT_LP: {}", sol.value).map_err(io)?;
        writeln!(out, "p*: {}", fmt_vec(&sol.probabilities)).map_err(io)?;
        writeln!(out, "X*: {:?}", sol.support).map_err(io)?;
        writeln!(out, "J*: {:?}", sol.binding).map_err(io)?;
        writeln!(out, "degenerate: {}", sol.degenerate).map_err(io)?;
        writeln!(out, "Delta: {gap}").map_err(io)?;
        if let Ok(c) = &constants {
            write_constants(out, c).map_err(io)?;
        }
    }
    match error {
        Some(e) => Err(e),
        None => Ok(EXIT_OK),
    }
}

fn constants(a: &SolveArgs, out: &mut dyn Write) -> CmdResult {
    let env = a.instance.resolve()?;
    let inst = env.lp_instance();
    let sol = solve_relaxation(&inst).map_err(|e| e.to_string())?;
    let c = compute_constants(&inst, &sol, a.c).map_err(|e| e.to_string())?;
    if a.json {
        serde_json::to_writer_pretty(&mut *out, &c).map_err(|e| e.to_string())?;
        writeln!(out).map_err(io)?;
    } else {
        write_constants(out, &c).map_err(io)?;
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct InstanceReport {
    instance: String,
    horizon: u64,
    initial_budget: f64,
    mean_rewards: Vec<f64>,
    mean_drifts: Vec<Vec<f64>>,
    solution: LpSolution,
    opt_minus_arm: Vec<Option<f64>>,
    opt_minus_resource: Vec<Option<f64>>,
    one_resource_case: Option<String>,
    constants: Option<SeparationConstants>,
    assumption_error: Option<String>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn report(a: &SolveArgs, out: &mut dyn Write) -> CmdResult {
    let env = a.instance.resolve()?;
    let inst = env.lp_instance();
    let sol = solve_relaxation(&inst).map_err(|e| e.to_string())?;
    let minus_arm = (0..inst.num_arms())
        .map(|x| solve_minus_arm(&inst, x).map(finite))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let minus_resource = (0..inst.num_resources())
        .map(|j| solve_minus_resource(&inst, j).map(finite))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let case = (inst.num_resources() == 1).then(|| {
        cb1_classify(&sol, &inst, 1.0)
            .map(|c| format!("{:?}", c.case))
            .unwrap_or_else(|e| e.to_string())
    });
    let constants = compute_constants(&inst, &sol, a.c);
    let r = InstanceReport {
        instance: a.instance.label(),
        horizon: inst.horizon,
        initial_budget: inst.initial_budget,
        mean_rewards: inst.rewards.clone(),
        mean_drifts: inst.drifts.clone(),
        solution: sol,
        opt_minus_arm: minus_arm,
        opt_minus_resource: minus_resource,
        one_resource_case: case,
        constants: constants.as_ref().ok().copied(),
        assumption_error: constants.err().map(|e| e.to_string()),
    };
    if a.json {
        serde_json::to_writer_pretty(&mut *out, &r).map_err(|e| e.to_string())?;
        writeln!(out).map_err(io)?;
        return Ok(EXIT_OK);
    }
    let w = |out: &mut dyn Write| -> std::io::Result<()> {
        writeln!(
            out,
            "instance: {} (T={}, B={})",
            r.instance, r.horizon, r.initial_budget
        )?;
        for x in 0..r.mean_rewards.len() {
            let drifts: Vec<f64> = r.mean_drifts.iter().map(|row| row[x]).collect();
            writeln!(
                out,
                "arm {x}: reward {:.6}, drifts {}",
                r.mean_rewards[x],
                fmt_vec(&drifts)
            )?;
        }
        writeln!(out, "OPT_LP: {}", r.solution.value)?;
        writeln!(out, "p*: {}", fmt_vec(&r.solution.probabilities))?;
        writeln!(
            out,
            "X*: {:?}  J*: {:?}",
            r.solution.support, r.solution.binding
        )?;
        writeln!(out, "OPT_-x: {:?}", r.opt_minus_arm)?;
        writeln!(out, "OPT_-j: {:?}", r.opt_minus_resource)?;
        if let Some(c) = &r.one_resource_case {
            writeln!(out, "one-resource case: {c}")?;
        }
        match (&r.constants, &r.assumption_error) {
            (Some(c), _) => write_constants(out, c),
            (None, Some(e)) => writeln!(out, "constants: {e}"),
            (None, None) => Ok(()),
        }
    };
    w(out).map_err(io)?;
    Ok(EXIT_OK)
}

fn summary_line(a: &Aggregate, resolved_c: Option<f64>) -> String {
    let get = |v: &[Option<f64>], i: usize| v.get(i).copied().flatten().unwrap_or(f64::NAN);
    format!(
        "{} {} T={} episodes={} regret_mean={:.4} regret_stderr={:.4} null_pulls_mean={:.2} c={}",
        a.config_id,
        a.policy,
        a.horizon,
        a.episodes,
        get(&a.mean, 2),
        get(&a.stderr, 2),
        get(&a.mean, 3),
        resolved_c.map_or("-".to_string(), |c| format!("{c}"))
    )
}

fn emit(
    result: &SweepResult,
    with_aggregates: bool,
    out_path: Option<&PathBuf>,
    json: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    let aggregates: &[Aggregate] = if with_aggregates {
        &result.aggregates
    } else {
        &[]
    };
    let table = CsvTable {
        rows: &result.rows,
        aggregates,
    };
    let summary: &mut dyn Write = match out_path {
        Some(path) => {
            write_csv(&table, path).map_err(|e| e.to_string())?;
            out
        }
        None => {
            out.write_all(render_csv(&table).as_bytes()).map_err(io)?;
            err
        }
    };
    if json {
        serde_json::to_writer_pretty(&mut *summary, &result.aggregates)
            .map_err(|e| e.to_string())?;
        writeln!(summary).map_err(io)?;
    } else {
        for a in &result.aggregates {
            let c = result
                .resolved
                .iter()
                .find(|r| r.horizon == a.horizon)
                .and_then(|r| r.c);
            writeln!(summary, "{}", summary_line(a, c)).map_err(io)?;
        }
    }
    for f in &result.failures {
        let seed = f.seed.map_or("-".to_string(), |s| s.to_string());
        writeln!(err, "failed: T={} seed={} {}", f.horizon, seed, f.error).map_err(io)?;
    }
    Ok(if result.failures.is_empty() {
        EXIT_OK
    } else {
        EXIT_PARTIAL
    })
}

fn run_cmd(
    a: &RunArgs,
    base: Option<RunConfig>,
    with_aggregates: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    let base_policy = base.as_ref().map(|b| &b.policy);
    let policy = a.policy.policy_config(base_policy)?;
    let (env, instance) = if a.instance.given() > 0 {
        (a.instance.resolve()?, a.instance.label())
    } else if let Some(b) = &base {
        (
            resolve_source(&b.instance).map_err(|e| e.to_string())?,
            b.instance.clone(),
        )
    } else {
        return Err("an instance is required".into());
    };
    let seeds = match (&a.policy.seeds, &base) {
        (Some(s), _) => parse_seeds(s)?,
        (None, Some(b)) => b.seeds.clone(),
        (None, None) => vec![0],
    };
    let horizons = match (&a.horizons, &base) {
        (Some(h), _) => parse_horizons(h)?,
        (None, Some(b)) => b.horizons.clone(),
        (None, None) => Vec::new(),
    };
    let cfg = RunConfig {
        instance,
        policy,
        horizons,
        seeds,
        master_seed: a
            .policy
            .master_seed
            .or(base.as_ref().map(|b| b.master_seed))
            .unwrap_or(0),
        out: a
            .policy
            .out
            .clone()
            .or(base.as_ref().and_then(|b| b.out.clone())),
        jobs: a.policy.jobs.or(base.as_ref().and_then(|b| b.jobs)),
        trajectory_stride: None,
    };
    let result = sweep_env(&env, &cfg).map_err(|e| e.to_string())?;
    if result.rows.is_empty() && !result.failures.is_empty() {
        for f in &result.failures {
            writeln!(err, "failed: T={} {}", f.horizon, f.error).map_err(io)?;
        }
        return Ok(EXIT_INVALID);
    }
    emit(
        &result,
        with_aggregates,
        cfg.out.as_ref(),
        a.policy.json,
        out,
        err,
    )
}

fn sweep_cmd(a: &SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let base = match &a.config {
        Some(path) => Some(RunConfig::load(path).map_err(|e| e.to_string())?),
        None => None,
    };
    run_cmd(&a.run, base, true, out, err)
}

fn reduce(a: &ReduceArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let bwk = BwkInstance::load(&a.instance).map_err(|e| e.to_string())?;
    let (v_bwk, v_lifted) = check_lp_equivalence(&bwk).map_err(|e| e.to_string())?;
    let lifted = lift(&bwk).map_err(|e| e.to_string())?;
    let label = a
        .instance
        .file_stem()
        .map_or("bwk".to_string(), |s| s.to_string_lossy().into_owned());
    let lifted = lifted.named(label);
    let policy_cfg = a.policy.policy_config(None)?;
    let built = build_policy(&policy_cfg, &lifted).map_err(|e| e.to_string())?;
    let seeds = match &a.policy.seeds {
        Some(s) => parse_seeds(s)?,
        None => vec![0],
    };
    let master = a.policy.master_seed.unwrap_or(0);
    let mut rows: Vec<EpisodeSummary> = Vec::new();
    let mut failures = Vec::new();
    for &seed in &seeds {
        let mut policy = built.policy.clone();
        match run_reduction(&bwk, policy.as_mut(), master, seed) {
            Ok((mut summary, _)) => {
                summary.config_id = lifted.name().unwrap_or("bwk").to_string();
                rows.push(summary);
            }
            Err(e) => failures.push(crate::harness::CellFailure {
                horizon: bwk.horizon,
                seed: Some(seed),
                error: e.to_string(),
            }),
        }
    }
    let aggregates = crate::harness::aggregate(&rows).into_iter().collect();
    let result = SweepResult {
        rows,
        aggregates,
        failures,
        resolved: vec![crate::harness::ResolvedParams {
            horizon: bwk.horizon,
            c: built.c,
            gamma_star: built.gamma_star,
        }],
        trajectories: Vec::new(),
    };
    let line = format!(
        "LP equivalence: bwk={v_bwk} lifted={v_lifted} diff={:e}",
        (v_bwk - v_lifted).abs()
    );
    if a.policy.out.is_some() {
        writeln!(out, "{line}").map_err(io)?;
    } else {
        writeln!(err, "{line}").map_err(io)?;
    }
    emit(
        &result,
        false,
        a.policy.out.as_ref(),
        a.policy.json,
        out,
        err,
    )
}
