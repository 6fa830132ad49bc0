//! Running drift policies on classical bandits with knapsacks.
//!
//! A BwK instance with consumptions `c ∈ [0, 1]^m` is lifted to a drift
//! instance by adding a null arm with deterministic drift `δ` and giving each
//! real arm the drift `δ − c`. The simulated budget starts at `B − Tδ`. A
//! null recommendation idles the simulated clock only; any other
//! recommendation pulls the real arm.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::{
    Atom, BudgetState, EnvError, Environment, Marginal, Observation, OutcomeDistribution, NULL_ARM,
};
use crate::harness::EpisodeSummary;
use crate::lp_core::{solve_relaxation, LpError};
use crate::policies::Policy;
use crate::rng::episode_streams;
use crate::simplex::{LinearProgram, Relation, SimplexError};

#[derive(Debug, Error)]
pub enum ReductionError {
    #[error("margin violated: {0}")]
    MarginViolated(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Lp(#[from] LpError),
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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BwkArm {
    pub reward: Marginal,
    pub consumptions: Vec<Marginal>,
}

/// A BwK instance; coordinates of one arm are independent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BwkInstance {
    #[serde(rename = "T")]
    pub horizon: u64,
    #[serde(rename = "B")]
    pub budget: f64,
    pub delta_drift: f64,
    pub arms: Vec<BwkArm>,
}

impl BwkInstance {
    pub fn load(path: &Path) -> Result<Self, ReductionError> {
        let text = std::fs::read_to_string(path).map_err(|source| ReductionError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ReductionError::Json {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn num_resources(&self) -> usize {
        self.arms.first().map_or(0, |a| a.consumptions.len())
    }

    pub fn budget_rate(&self) -> f64 {
        self.budget / self.horizon as f64
    }

    pub fn expected_rewards(&self) -> Vec<f64> {
        self.arms.iter().map(|a| a.reward.mean()).collect()
    }

    /// `consumption[j][x]`.
    pub fn expected_consumptions(&self) -> Vec<Vec<f64>> {
        (0..self.num_resources())
            .map(|j| self.arms.iter().map(|a| a.consumptions[j].mean()).collect())
            .collect()
    }

    /// Checks `B/T ≥ δ` and `|E[c] − B/T| ≥ δ` for every arm and resource.
    pub fn validate(&self) -> Result<(), ReductionError> {
        let bad = |m: String| Err(ReductionError::MarginViolated(m));
        if self.arms.is_empty() || self.num_resources() == 0 {
            return bad("need at least one arm and one resource".into());
        }
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        if !(self.delta_drift > 0.0 && self.delta_drift <= 1.0) {
            return bad(format!("delta_drift {} outside (0, 1]", self.delta_drift));
        }
        let rate = self.budget_rate();
        if rate < self.delta_drift || self.budget > self.horizon as f64 {
            return bad(format!(
                "need δ ≤ B/T ≤ 1, got B/T = {rate}, δ = {}",
                self.delta_drift
            ));
        }
        for (x, arm) in self.arms.iter().enumerate() {
            if arm.consumptions.len() != self.num_resources() {
                return bad(format!("arm {x} has a different number of resources"));
            }
            for (j, c) in arm.consumptions.iter().enumerate() {
                if c.support.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return bad(format!(
                        "consumption of arm {x} on resource {j} outside [0, 1]"
                    ));
                }
                if (c.mean() - rate).abs() < self.delta_drift {
                    return bad(format!(
                        "arm {x}, resource {j}: mean consumption {} within δ of B/T",
                        c.mean()
                    ));
                }
            }
        }
        Ok(())
    }
}

/// The drift environment seen by the wrapped policy. Arm `x + 1` is BwK
/// arm `x`.
pub fn lift(bwk: &BwkInstance) -> Result<Environment, ReductionError> {
    bwk.validate()?;
    let m = bwk.num_resources();
    let delta = bwk.delta_drift;
    let mut arms = vec![OutcomeDistribution::deterministic(0.0, vec![delta; m])?];
    for arm in &bwk.arms {
        let drifts: Vec<Marginal> = arm
            .consumptions
            .iter()
            .map(|c| Marginal {
                support: c.support.iter().map(|v| delta - v).collect(),
                probs: c.probs.clone(),
            })
            .collect();
        arms.push(OutcomeDistribution::independent(&arm.reward, &drifts)?);
    }
    let initial = bwk.budget - bwk.horizon as f64 * delta;
    Ok(Environment::new(bwk.horizon, initial.max(0.0), arms)?)
}

/// Both clocks and both budget vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionState {
    /// Real BwK pulls so far.
    pub t_a: u64,
    /// Simulated rounds so far.
    pub t_s: u64,
    pub actual_budgets: Vec<f64>,
    pub simulated_budgets: Vec<f64>,
}

impl ReductionState {
    /// Largest violation of `B_s = B_a − Tδ + t_s δ`.
    pub fn relation_error(&self, horizon: u64, delta: f64) -> f64 {
        let shift = -(horizon as f64) * delta + self.t_s as f64 * delta;
        self.actual_budgets
            .iter()
            .zip(&self.simulated_budgets)
            .map(|(a, s)| (a + shift - s).abs())
            .fold(0.0, f64::max)
    }
}

/// Runs `policy` through the reduction for `T` simulated rounds.
///
/// The streams match those of an ordinary episode on the lifted environment
/// with the same seeds; a null recommendation still consumes its uniform.
pub fn run_reduction(
    bwk: &BwkInstance,
    policy: &mut dyn Policy,
    master_seed: u64,
    seed: u64,
) -> Result<(EpisodeSummary, ReductionState), ReductionError> {
    let lifted = lift(bwk)?;
    let horizon = bwk.horizon;
    let delta = bwk.delta_drift;
    let (mut env_rng, mut policy_rng) = episode_streams(master_seed, seed);
    let mut sim = lifted.initial_state();
    let mut state = ReductionState {
        t_a: 0,
        t_s: 0,
        actual_budgets: vec![bwk.budget; bwk.num_resources()],
        simulated_budgets: sim.budgets.clone(),
    };
    let mut total_reward = 0.0;
    let mut null_pulls = 0;
    let tol = 1e-9 * (horizon as f64).max(1.0);
    while sim.t < horizon {
        let arm = policy.select(&sim, &mut policy_rng);
        if !lifted.is_allowed(&sim, arm) {
            return Err(EnvError::IllegalArm {
                arm,
                round: sim.t + 1,
                budgets: sim.budgets.clone(),
            }
            .into());
        }
        let atom: &Atom = lifted.step_in_place(&mut sim, arm, &mut env_rng)?;
        if arm == NULL_ARM {
            null_pulls += 1;
        } else {
            state.t_a += 1;
            total_reward += atom.reward;
            for (b, d) in state.actual_budgets.iter_mut().zip(&atom.drifts) {
                *b -= delta - d;
            }
        }
        state.t_s = sim.t;
        state.simulated_budgets.clone_from(&sim.budgets);
        assert!(
            state.relation_error(horizon, delta) <= tol,
            "budget relation broken at t_s = {}",
            state.t_s
        );
        assert!(
            state.actual_budgets.iter().all(|&b| b >= -tol),
            "BwK budget exhausted"
        );
        policy.observe(&Observation {
            round: sim.t,
            arm,
            reward: atom.reward,
            drifts: &atom.drifts,
        });
    }
    let opt = bwk_lp_value(bwk)?;
    let diag = policy.diagnostics();
    let summary = EpisodeSummary {
        config_id: lifted.name().unwrap_or("bwk").to_string(),
        policy: policy.name().to_string(),
        horizon,
        seed,
        total_reward,
        opt_lp: opt,
        regret: horizon as f64 * opt - total_reward,
        null_pulls,
        leftover_budgets: state.actual_budgets.clone(),
        phase1_end: diag.phase1_end,
        phase2_end: diag.phase2_end,
        phase3_infeasible: diag.phase3_infeasible,
        empty_feasible: diag.empty_feasible,
    };
    Ok((summary, state))
}

/// `max Σ rₓpₓ` s.t. `Σ cⱼₓpₓ ≤ B/T`, `Σ pₓ ≤ 1`, `p ≥ 0`.
pub fn bwk_lp_value(bwk: &BwkInstance) -> Result<f64, LpError> {
    let k = bwk.arms.len();
    let mut lp = LinearProgram::new(bwk.expected_rewards());
    for row in bwk.expected_consumptions() {
        lp.add(row, Relation::Le, bwk.budget_rate());
    }
    lp.add(vec![1.0; k], Relation::Le, 1.0);
    match lp.solve() {
        Ok(opt) => Ok(opt.value),
        Err(SimplexError::Infeasible) => Err(LpError::InfeasibleInstance),
        Err(e) => Err(LpError::Solver(e)),
    }
}

/// `(BwK LP value, lifted relaxation value)`.
pub fn check_lp_equivalence(bwk: &BwkInstance) -> Result<(f64, f64), ReductionError> {
    let lifted = lift(bwk)?;
    let value_bwk = bwk_lp_value(bwk)?;
    let value_lifted = solve_relaxation(&lifted.lp_instance())?.value;
    Ok((value_bwk, value_lifted))
}

/// The simulated state as the wrapped policy sees it.
pub fn simulated_view(state: &ReductionState) -> BudgetState {
    BudgetState {
        t: state.t_s,
        budgets: state.simulated_budgets.clone(),
    }
}
