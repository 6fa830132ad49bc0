//! Decision rules.
//!
//! A [`Policy`] picks an arm from the current budgets and may learn from the
//! observed outcome. Every policy returns the null arm whenever some budget
//! is below 1.

mod baseline;
pub mod confidence;
pub mod control_budget;
pub mod etcb;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use baseline::{baseline_lp_sampler, LpSampler, NullOnly};
pub use control_budget::{
    cb1_classify, cb1_select, cb_build_signs, cb_select, cb_solve_gamma, CbConfig, CbOneCase,
    CbOneConfig, CbOnePolicy, CbPolicy, GammaSolution,
};
pub use etcb::{EtcbConfig, EtcbPolicy, IdentificationRule, Phase};

use crate::environment::{BudgetState, Environment, Observation};
use crate::lp_core::{compute_constants, solve_relaxation, LpError};
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("LP support {0:?} matches none of the one-resource cases")]
    UnclassifiableSupport(Vec<usize>),
    #[error("cb1 needs exactly one resource, instance has {0}")]
    NeedsSingleResource(usize),
    #[error("restricted basis matrix is not square and invertible")]
    SingularBasis,
    #[error("no feasible drift margin, not even zero")]
    EmptyFeasible,
    #[error("invalid hyperparameter: {0}")]
    InvalidParameter(String),
}

/// Counters a policy exposes for episode summaries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyDiagnostics {
    pub phase1_end: Option<u64>,
    pub phase2_end: Option<u64>,
    pub phase3_infeasible: u64,
    /// ControlBudget rounds where no margin was feasible and `p*` was used.
    pub empty_feasible: u64,
}

pub trait Policy: Send + Sync {
    fn name(&self) -> &'static str;

    /// Chooses the arm for round `state.t + 1`.
    fn select(&mut self, state: &BudgetState, rng: &mut SimRng) -> usize;

    fn observe(&mut self, _obs: &Observation<'_>) {}

    fn diagnostics(&self) -> PolicyDiagnostics {
        PolicyDiagnostics::default()
    }

    fn clone_box(&self) -> Box<dyn Policy>;
}

impl Clone for Box<dyn Policy> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

/// `τ = c · ln(max(T − round, 1))` for the round after `t` plays.
pub fn threshold(c: f64, horizon: u64, t: u64) -> f64 {
    let remaining = horizon as f64 - (t + 1) as f64;
    (c * remaining.max(1.0).ln()).max(0.0)
}

/// Draws an index from `p` with one uniform.
pub fn sample_categorical(p: &[f64], rng: &mut SimRng) -> usize {
    let u: f64 = rng.random();
    let total: f64 = p.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in p.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if target < acc {
            return i;
        }
    }
    last
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyId {
    Cb1,
    Cb,
    Etcb,
    EtcbEmpirical,
    LpSampler,
    NullOnly,
}

impl PolicyId {
    pub const ALL: [PolicyId; 6] = [
        PolicyId::Cb1,
        PolicyId::Cb,
        PolicyId::Etcb,
        PolicyId::EtcbEmpirical,
        PolicyId::LpSampler,
        PolicyId::NullOnly,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyId::Cb1 => "cb1",
            PolicyId::Cb => "cb",
            PolicyId::Etcb => "etcb",
            PolicyId::EtcbEmpirical => "etcb-empirical",
            PolicyId::LpSampler => "lp-sampler",
            PolicyId::NullOnly => "null-only",
        }
    }
}

impl fmt::Display for PolicyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyId::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown policy {s:?}"))
    }
}

/// Policy choice plus hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub id: PolicyId,
    /// Threshold coefficient; defaults to `min(6/γ*², T/(10 ln T))`.
    #[serde(default)]
    pub c: Option<f64>,
    /// Overrides the instance's `γ*` where a policy needs it.
    #[serde(default)]
    pub gamma_star: Option<f64>,
    /// Sample multiplier before the empirical identification tests start.
    #[serde(default)]
    pub explore_coef: Option<f64>,
}

impl PolicyConfig {
    pub fn new(id: PolicyId) -> Self {
        Self {
            id,
            c: None,
            gamma_star: None,
            explore_coef: None,
        }
    }
}

/// A ready-to-clone policy and the hyperparameters it resolved to.
#[derive(Clone)]
pub struct BuiltPolicy {
    pub policy: Box<dyn Policy>,
    pub c: Option<f64>,
    pub gamma_star: Option<f64>,
}

impl fmt::Debug for BuiltPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BuiltPolicy")
            .field("policy", &self.policy.name())
            .field("c", &self.c)
            .field("gamma_star", &self.gamma_star)
            .finish()
    }
}

/// `min(6/γ*², T/(10 ln T))`.
pub fn practical_threshold_coefficient(gamma_star: f64, horizon: u64) -> f64 {
    let theory = 6.0 / (gamma_star * gamma_star);
    let t = horizon.max(3) as f64;
    theory.min(t / (10.0 * t.ln()))
}

/// Builds a policy for `env` (at its own horizon).
pub fn build_policy(cfg: &PolicyConfig, env: &Environment) -> Result<BuiltPolicy, PolicyError> {
    for (name, v) in [
        ("c", cfg.c),
        ("gamma_star", cfg.gamma_star),
        ("explore_coef", cfg.explore_coef),
    ] {
        if let Some(v) = v {
            if !(v.is_finite() && v > 0.0) {
                return Err(PolicyError::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
    }
    let inst = env.lp_instance();
    let horizon = inst.horizon;
    let sol = solve_relaxation(&inst)?;
    let gamma_star = || -> Result<f64, PolicyError> {
        match cfg.gamma_star {
            Some(g) => Ok(g),
            None => Ok(compute_constants(&inst, &sol, None)?.gamma_star),
        }
    };
    let resolve_c = |g: Option<f64>| -> Result<f64, PolicyError> {
        match (cfg.c, g) {
            (Some(c), _) => Ok(c),
            (None, Some(g)) => Ok(practical_threshold_coefficient(g, horizon)),
            (None, None) => Ok(practical_threshold_coefficient(gamma_star()?, horizon)),
        }
    };
    let built = match cfg.id {
        PolicyId::Cb1 => {
            let c = resolve_c(None)?;
            let one = cb1_classify(&sol, &inst, c)?;
            BuiltPolicy {
                policy: Box::new(CbOnePolicy::new(one)),
                c: Some(c),
                gamma_star: cfg.gamma_star,
            }
        }
        PolicyId::Cb => {
            let c = resolve_c(None)?;
            let cb = CbConfig::new(&inst, &sol, c, cfg.gamma_star)?;
            BuiltPolicy {
                policy: Box::new(CbPolicy::new(cb)),
                c: Some(c),
                gamma_star: cfg.gamma_star,
            }
        }
        PolicyId::Etcb | PolicyId::EtcbEmpirical => {
            let g = gamma_star()?;
            let c = resolve_c(Some(g))?;
            let rule = if cfg.id == PolicyId::Etcb {
                IdentificationRule::ConfidenceBounds
            } else {
                IdentificationRule::EmpiricalMeans
            };
            let etcb = EtcbConfig {
                horizon,
                initial_budget: inst.initial_budget,
                num_arms: inst.num_arms(),
                num_resources: inst.num_resources(),
                gamma_star: g,
                c,
                rule,
                explore_coef: cfg.explore_coef.unwrap_or(etcb::DEFAULT_EXPLORE_COEF),
            };
            BuiltPolicy {
                policy: Box::new(EtcbPolicy::new(etcb)),
                c: Some(c),
                gamma_star: Some(g),
            }
        }
        PolicyId::LpSampler => BuiltPolicy {
            policy: Box::new(LpSampler::new(&sol)),
            c: None,
            gamma_star: None,
        },
        PolicyId::NullOnly => BuiltPolicy {
            policy: Box::new(NullOnly),
            c: None,
            gamma_star: None,
        },
    };
    Ok(built)
}
