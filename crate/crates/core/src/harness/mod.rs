//! Episodes, seeded sweeps and their summaries.

pub mod csv_out;
pub mod fit;

use std::collections::HashSet;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use csv_out::{format_float, write_csv, CsvTable};
pub use fit::{fit_scaling, FitError, ScalingFit, ScalingModel};

use crate::environment::{
    schema::resolve_source, EnvError, Environment, Observation, StepRecord, NULL_ARM,
};
use crate::lp_core::{solve_relaxation, LpError};
use crate::policies::{build_policy, Policy, PolicyConfig, PolicyError};
use crate::rng::episode_streams;

pub const MAX_HORIZON: u64 = 10_000_000;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// A sweep description, also readable from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Fixture id or instance file path.
    pub instance: String,
    pub policy: PolicyConfig,
    /// Defaults to the instance's own horizon when empty.
    #[serde(default)]
    pub horizons: Vec<u64>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub jobs: Option<usize>,
    /// Record every `stride`-th step when set.
    #[serde(default)]
    pub trajectory_stride: Option<u64>,
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| HarnessError::Json {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::InvalidConfig(m));
        if self.seeds.is_empty() {
            return bad("seed list is empty".into());
        }
        let distinct: HashSet<u64> = self.seeds.iter().copied().collect();
        if distinct.len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if let Some(&t) = self.horizons.iter().find(|&&t| t == 0 || t > MAX_HORIZON) {
            return bad(format!("horizon {t} outside 1..={MAX_HORIZON}"));
        }
        if self.jobs == Some(0) {
            return bad("jobs must be positive".into());
        }
        if self.trajectory_stride == Some(0) {
            return bad("trajectory stride must be positive".into());
        }
        Ok(())
    }
}

/// Outcome of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub config_id: String,
    pub policy: String,
    pub horizon: u64,
    pub seed: u64,
    pub total_reward: f64,
    pub opt_lp: f64,
    /// `T · opt_lp − total_reward`.
    pub regret: f64,
    pub null_pulls: u64,
    pub leftover_budgets: Vec<f64>,
    pub phase1_end: Option<u64>,
    pub phase2_end: Option<u64>,
    pub phase3_infeasible: u64,
    pub empty_feasible: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutput {
    pub summary: EpisodeSummary,
    pub trajectory: Vec<StepRecord>,
}

/// Runs `policy` on `env` for the full horizon.
///
/// The environment and the policy draw from separate streams keyed by
/// `(master_seed, seed)`.
pub fn run_episode(
    env: &Environment,
    policy: &mut dyn Policy,
    opt_lp: f64,
    master_seed: u64,
    seed: u64,
    stride: Option<u64>,
) -> Result<EpisodeOutput, HarnessError> {
    let (mut env_rng, mut policy_rng) = episode_streams(master_seed, seed);
    let horizon = env.horizon();
    let mut state = env.initial_state();
    let mut total_reward = 0.0;
    let mut null_pulls = 0u64;
    let mut trajectory = Vec::new();
    while state.t < horizon {
        let arm = policy.select(&state, &mut policy_rng);
        let atom = env.step_in_place(&mut state, arm, &mut env_rng)?;
        total_reward += atom.reward;
        if arm == NULL_ARM {
            null_pulls += 1;
        }
        let obs = Observation {
            round: state.t,
            arm,
            reward: atom.reward,
            drifts: &atom.drifts,
        };
        policy.observe(&obs);
        if let Some(s) = stride {
            if state.t.is_multiple_of(s) {
                trajectory.push(StepRecord {
                    round: state.t,
                    arm,
                    reward: atom.reward,
                    drifts: atom.drifts.clone(),
                    budgets_after: state.budgets.clone(),
                });
            }
        }
    }
    let diag = policy.diagnostics();
    let summary = EpisodeSummary {
        config_id: env.name().unwrap_or("instance").to_string(),
        policy: policy.name().to_string(),
        horizon,
        seed,
        total_reward,
        opt_lp,
        regret: horizon as f64 * opt_lp - total_reward,
        null_pulls,
        leftover_budgets: state.budgets,
        phase1_end: diag.phase1_end,
        phase2_end: diag.phase2_end,
        phase3_infeasible: diag.phase3_infeasible,
        empty_feasible: diag.empty_feasible,
    };
    Ok(EpisodeOutput {
        summary,
        trajectory,
    })
}

/// Column-wise mean and standard error over the episodes of one `(policy, T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub config_id: String,
    pub policy: String,
    pub horizon: u64,
    pub episodes: usize,
    /// Values in [`EpisodeSummary::numeric_columns`] order; `None` when no
    /// episode had the value (or fewer than two for a standard error).
    pub mean: Vec<Option<f64>>,
    pub stderr: Vec<Option<f64>>,
}

impl EpisodeSummary {
    /// Numeric CSV columns from `total_reward` on.
    pub fn numeric_columns(&self) -> Vec<Option<f64>> {
        let mut v = vec![
            Some(self.total_reward),
            Some(self.opt_lp),
            Some(self.regret),
            Some(self.null_pulls as f64),
        ];
        v.extend(self.leftover_budgets.iter().map(|&b| Some(b)));
        v.push(self.phase1_end.map(|x| x as f64));
        v.push(self.phase2_end.map(|x| x as f64));
        v.push(Some(self.phase3_infeasible as f64));
        v
    }
}

pub fn mean_and_stderr(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

pub fn aggregate(rows: &[EpisodeSummary]) -> Option<Aggregate> {
    let first = rows.first()?;
    let cols: Vec<Vec<Option<f64>>> = rows.iter().map(EpisodeSummary::numeric_columns).collect();
    let width = cols[0].len();
    let (mut mean, mut stderr) = (Vec::with_capacity(width), Vec::with_capacity(width));
    for i in 0..width {
        let present: Vec<f64> = cols.iter().filter_map(|c| c[i]).collect();
        if present.is_empty() {
            mean.push(None);
            stderr.push(None);
        } else {
            let (m, s) = mean_and_stderr(&present);
            mean.push(Some(m));
            stderr.push(s);
        }
    }
    Some(Aggregate {
        config_id: first.config_id.clone(),
        policy: first.policy.clone(),
        horizon: first.horizon,
        episodes: rows.len(),
        mean,
        stderr,
    })
}

/// Hyperparameters a policy resolved to at one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParams {
    pub horizon: u64,
    pub c: Option<f64>,
    pub gamma_star: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub horizon: u64,
    pub seed: Option<u64>,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepResult {
    /// Sorted by `(T, seed)`.
    pub rows: Vec<EpisodeSummary>,
    pub aggregates: Vec<Aggregate>,
    pub failures: Vec<CellFailure>,
    pub resolved: Vec<ResolvedParams>,
    pub trajectories: Vec<(u64, u64, Vec<StepRecord>)>,
}

impl SweepResult {
    pub fn aggregate_for(&self, horizon: u64) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.horizon == horizon)
    }
}

/// Runs every `(T, seed)` cell of `cfg`.
pub fn sweep(cfg: &RunConfig) -> Result<SweepResult, HarnessError> {
    cfg.validate()?;
    let env = resolve_source(&cfg.instance)?;
    sweep_env(&env, cfg)
}

/// [`sweep`] on an already constructed environment (`cfg.instance` is only
/// used for labelling).
pub fn sweep_env(env: &Environment, cfg: &RunConfig) -> Result<SweepResult, HarnessError> {
    cfg.validate()?;
    let horizons = if cfg.horizons.is_empty() {
        vec![env.horizon()]
    } else {
        cfg.horizons.clone()
    };
    let mut result = SweepResult::default();
    let mut prepared = Vec::new();
    for &t in &horizons {
        let prepared_cell = env
            .with_horizon(t)
            .map_err(HarnessError::from)
            .and_then(|e| {
                let opt = solve_relaxation(&e.lp_instance())?.value;
                let built = build_policy(&cfg.policy, &e)?;
                Ok((e, opt, built))
            });
        match prepared_cell {
            Ok((e, opt, built)) => {
                result.resolved.push(ResolvedParams {
                    horizon: t,
                    c: built.c,
                    gamma_star: built.gamma_star,
                });
                prepared.push((e, opt, built));
            }
            Err(e) => result.failures.push(CellFailure {
                horizon: t,
                seed: None,
                error: e.to_string(),
            }),
        }
    }
    let cells: Vec<(usize, u64)> = (0..prepared.len())
        .flat_map(|i| cfg.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let run_cell = |&(i, seed): &(usize, u64)| {
        let (e, opt, built) = &prepared[i];
        let mut policy = built.policy.clone();
        run_episode(
            e,
            policy.as_mut(),
            *opt,
            cfg.master_seed,
            seed,
            cfg.trajectory_stride,
        )
        .map_err(|err| CellFailure {
            horizon: e.horizon(),
            seed: Some(seed),
            error: err.to_string(),
        })
    };
    let outputs: Vec<Result<EpisodeOutput, CellFailure>> = match cfg.jobs {
        Some(1) => cells.iter().map(run_cell).collect(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| HarnessError::InvalidConfig(e.to_string()))?
            .install(|| cells.par_iter().map(run_cell).collect()),
        None => cells.par_iter().map(run_cell).collect(),
    };
    for out in outputs {
        match out {
            Ok(o) => {
                if cfg.trajectory_stride.is_some() {
                    result
                        .trajectories
                        .push((o.summary.horizon, o.summary.seed, o.trajectory));
                }
                result.rows.push(o.summary);
            }
            Err(f) => result.failures.push(f),
        }
    }
    result.rows.sort_by_key(|r| (r.horizon, r.seed));
    result.trajectories.sort_by_key(|t| (t.0, t.1));
    result.failures.sort_by_key(|f| (f.horizon, f.seed));
    let mut t_values: Vec<u64> = result.rows.iter().map(|r| r.horizon).collect();
    t_values.dedup();
    for t in t_values {
        let rows: Vec<EpisodeSummary> = result
            .rows
            .iter()
            .filter(|r| r.horizon == t)
            .cloned()
            .collect();
        result.aggregates.extend(aggregate(&rows));
    }
    Ok(result)
}
