//! Stochastic drift environment.
//!
//! Each arm owns a finite joint distribution over `(reward, drift₁..drift_m)`.
//! Budgets start at `B` for every resource, move by the realised drift each
//! round, and whenever any budget is below 1 only the null arm (index 0) may
//! be pulled. Because the null arm's drifts are nonnegative almost surely the
//! budgets can never go negative.

mod fixtures;
pub mod schema;

pub use fixtures::{make_fixture, FIXTURE_IDS};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp_core::LpInstance;

pub const NULL_ARM: usize = 0;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid outcome distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),
    #[error("arm {arm} is not allowed in round {round} (budgets {budgets:?})")]
    IllegalArm {
        arm: usize,
        round: u64,
        budgets: Vec<f64>,
    },
    #[error("horizon of {0} rounds already exhausted")]
    HorizonExhausted(u64),
    #[error("unknown fixture {0:?}")]
    UnknownFixture(String),
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

/// A discrete marginal: `support[i]` with probability `probs[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub support: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Marginal {
    pub fn point(v: f64) -> Self {
        Self {
            support: vec![v],
            probs: vec![1.0],
        }
    }

    /// Bernoulli convention: a nonnegative mean is supported on `{0, 1}`, a
    /// negative one on `{0, −1}`.
    pub fn bernoulli(mean: f64) -> Self {
        let a = mean.abs();
        let top = if mean < 0.0 { -1.0 } else { 1.0 };
        Self {
            support: vec![0.0, top],
            probs: vec![1.0 - a, a],
        }
    }

    pub fn mean(&self) -> f64 {
        self.support
            .iter()
            .zip(&self.probs)
            .map(|(s, p)| s * p)
            .sum()
    }

    fn check(&self, lo: f64, hi: f64, what: &str) -> Result<(), EnvError> {
        let bad = |m: String| Err(EnvError::InvalidDistribution(m));
        if self.support.is_empty() || self.support.len() != self.probs.len() {
            return bad(format!(
                "{what}: support and probs must be nonempty and of equal length"
            ));
        }
        if self.probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad(format!("{what}: probabilities must lie in [0, 1]"));
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return bad(format!("{what}: probabilities sum to {total}"));
        }
        if let Some(v) = self.support.iter().find(|v| !(lo..=hi).contains(*v)) {
            return bad(format!("{what}: value {v} outside [{lo}, {hi}]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub prob: f64,
    pub reward: f64,
    pub drifts: Vec<f64>,
}

/// Finite joint distribution of one arm's outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    atoms: Vec<Atom>,
    cumulative: Vec<f64>,
    mean_reward: f64,
    mean_drifts: Vec<f64>,
}

impl OutcomeDistribution {
    pub fn new(atoms: Vec<Atom>) -> Result<Self, EnvError> {
        let bad = |m: String| Err(EnvError::InvalidDistribution(m));
        let Some(first) = atoms.first() else {
            return bad("no atoms".into());
        };
        let m = first.drifts.len();
        let mut total = 0.0;
        for a in &atoms {
            if a.drifts.len() != m {
                return bad("atoms disagree on the number of resources".into());
            }
            if !(0.0..=1.0).contains(&a.prob) {
                return bad(format!("atom probability {} outside [0, 1]", a.prob));
            }
            if !(0.0..=1.0).contains(&a.reward) {
                return bad(format!("reward {} outside [0, 1]", a.reward));
            }
            if let Some(d) = a.drifts.iter().find(|d| !(-1.0..=1.0).contains(*d)) {
                return bad(format!("drift {d} outside [-1, 1]"));
            }
            total += a.prob;
        }
        if (total - 1.0).abs() > 1e-12 {
            return bad(format!("atom probabilities sum to {total}"));
        }
        let mut cumulative = Vec::with_capacity(atoms.len());
        let mut acc = 0.0;
        for a in &atoms {
            acc += a.prob;
            cumulative.push(acc);
        }
        *cumulative.last_mut().expect("nonempty") = f64::INFINITY;
        let mean_reward = atoms.iter().map(|a| a.prob * a.reward).sum();
        let mean_drifts = (0..m)
            .map(|j| atoms.iter().map(|a| a.prob * a.drifts[j]).sum())
            .collect();
        Ok(Self {
            atoms,
            cumulative,
            mean_reward,
            mean_drifts,
        })
    }

    /// Product distribution of independent coordinates; zero-probability
    /// atoms are dropped.
    pub fn independent(reward: &Marginal, drifts: &[Marginal]) -> Result<Self, EnvError> {
        reward.check(0.0, 1.0, "reward")?;
        for (j, d) in drifts.iter().enumerate() {
            d.check(-1.0, 1.0, &format!("drift {j}"))?;
        }
        let mut atoms: Vec<Atom> = reward
            .support
            .iter()
            .zip(&reward.probs)
            .map(|(&r, &p)| Atom {
                prob: p,
                reward: r,
                drifts: Vec::new(),
            })
            .collect();
        for d in drifts {
            atoms = atoms
                .into_iter()
                .flat_map(|a| {
                    d.support.iter().zip(&d.probs).map(move |(&v, &p)| {
                        let mut drifts = a.drifts.clone();
                        drifts.push(v);
                        Atom {
                            prob: a.prob * p,
                            reward: a.reward,
                            drifts,
                        }
                    })
                })
                .collect();
        }
        atoms.retain(|a| a.prob > 0.0);
        Self::new(atoms)
    }

    /// Independent Bernoulli coordinates with the given means.
    pub fn bernoulli(reward_mean: f64, drift_means: &[f64]) -> Result<Self, EnvError> {
        let drifts: Vec<Marginal> = drift_means
            .iter()
            .map(|&d| Marginal::bernoulli(d))
            .collect();
        Self::independent(&Marginal::bernoulli(reward_mean), &drifts)
    }

    pub fn deterministic(reward: f64, drifts: Vec<f64>) -> Result<Self, EnvError> {
        Self::new(vec![Atom {
            prob: 1.0,
            reward,
            drifts,
        }])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn num_resources(&self) -> usize {
        self.mean_drifts.len()
    }

    pub fn mean_reward(&self) -> f64 {
        self.mean_reward
    }

    pub fn mean_drifts(&self) -> &[f64] {
        &self.mean_drifts
    }

    /// Atom selected by a uniform draw `u ∈ [0, 1)`.
    pub fn atom_for(&self, u: f64) -> &Atom {
        let i = self.cumulative.partition_point(|&c| c <= u);
        &self.atoms[i.min(self.atoms.len() - 1)]
    }

    /// Draws one outcome, consuming exactly one uniform from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &Atom {
        let u: f64 = rng.random();
        self.atom_for(u)
    }
}

/// Budgets before round `t + 1`; `t` rounds have been played.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetState {
    pub t: u64,
    pub budgets: Vec<f64>,
}

impl BudgetState {
    pub fn new(initial_budget: f64, num_resources: usize) -> Self {
        Self {
            t: 0,
            budgets: vec![initial_budget; num_resources],
        }
    }

    /// Whether some budget is below 1, which forces the null arm.
    pub fn null_forced(&self) -> bool {
        self.budgets.iter().any(|&b| b < 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based round number.
    pub round: u64,
    pub arm: usize,
    pub reward: f64,
    pub drifts: Vec<f64>,
    pub budgets_after: Vec<f64>,
}

/// A borrowed view of one realised outcome.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub round: u64,
    pub arm: usize,
    pub reward: f64,
    pub drifts: &'a [f64],
}

impl StepRecord {
    pub fn observation(&self) -> Observation<'_> {
        Observation {
            round: self.round,
            arm: self.arm,
            reward: self.reward,
            drifts: &self.drifts,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    name: Option<String>,
    horizon: u64,
    initial_budget: f64,
    arms: Vec<OutcomeDistribution>,
}

impl Environment {
    pub fn new(
        horizon: u64,
        initial_budget: f64,
        arms: Vec<OutcomeDistribution>,
    ) -> Result<Self, EnvError> {
        let bad = |m: String| Err(EnvError::InvalidEnvironment(m));
        let Some(null) = arms.first() else {
            return bad("at least the null arm is required".into());
        };
        let m = null.num_resources();
        if m == 0 {
            return bad("at least one resource is required".into());
        }
        if let Some(x) = arms.iter().position(|a| a.num_resources() != m) {
            return bad(format!("arm {x} has a different number of resources"));
        }
        if horizon == 0 {
            return bad("horizon must be positive".into());
        }
        if !(initial_budget >= 0.0 && initial_budget <= horizon as f64) {
            return bad(format!("initial budget {initial_budget} outside [0, T]"));
        }
        if null.atoms().iter().any(|a| a.reward != 0.0) {
            return bad("null arm must have zero reward almost surely".into());
        }
        if null
            .atoms()
            .iter()
            .any(|a| a.drifts.iter().any(|&d| d < 0.0))
        {
            return bad("null arm drifts must be nonnegative almost surely".into());
        }
        if let Some(j) = null.mean_drifts().iter().position(|&d| d <= 0.0) {
            return bad(format!(
                "null arm must have positive expected drift on resource {j}"
            ));
        }
        Ok(Self {
            name: None,
            horizon,
            initial_budget,
            arms,
        })
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn initial_budget(&self) -> f64 {
        self.initial_budget
    }

    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn num_resources(&self) -> usize {
        self.arms[0].num_resources()
    }

    pub fn arm(&self, x: usize) -> &OutcomeDistribution {
        &self.arms[x]
    }

    pub fn arms(&self) -> &[OutcomeDistribution] {
        &self.arms
    }

    /// Same arms and budget over a different horizon.
    pub fn with_horizon(&self, horizon: u64) -> Result<Self, EnvError> {
        let mut env = Self::new(horizon, self.initial_budget, self.arms.clone())?;
        env.name = self.name.clone();
        Ok(env)
    }

    /// Expected-value view for the LP machinery.
    pub fn lp_instance(&self) -> LpInstance {
        let m = self.num_resources();
        let rewards = self.arms.iter().map(|a| a.mean_reward()).collect();
        let drifts = (0..m)
            .map(|j| self.arms.iter().map(|a| a.mean_drifts()[j]).collect())
            .collect();
        LpInstance::unchecked(self.horizon, self.initial_budget, rewards, drifts)
    }

    pub fn initial_state(&self) -> BudgetState {
        BudgetState::new(self.initial_budget, self.num_resources())
    }

    /// `{0}` if any budget is below 1, otherwise every arm.
    pub fn allowed_arms(&self, state: &BudgetState) -> Vec<usize> {
        if state.null_forced() {
            vec![NULL_ARM]
        } else {
            (0..self.num_arms()).collect()
        }
    }

    pub fn is_allowed(&self, state: &BudgetState, arm: usize) -> bool {
        arm < self.num_arms() && (arm == NULL_ARM || !state.null_forced())
    }

    /// Plays `arm` in place and returns the realised atom.
    pub fn step_in_place<R: Rng + ?Sized>(
        &self,
        state: &mut BudgetState,
        arm: usize,
        rng: &mut R,
    ) -> Result<&Atom, EnvError> {
        if state.t >= self.horizon {
            return Err(EnvError::HorizonExhausted(self.horizon));
        }
        if !self.is_allowed(state, arm) {
            return Err(EnvError::IllegalArm {
                arm,
                round: state.t + 1,
                budgets: state.budgets.clone(),
            });
        }
        let atom = self.arms[arm].sample(rng);
        for (b, d) in state.budgets.iter_mut().zip(&atom.drifts) {
            *b += d;
            assert!(*b >= 0.0, "budget went negative: {b}");
        }
        state.t += 1;
        Ok(atom)
    }

    /// Value-passing form of [`Environment::step_in_place`].
    pub fn step<R: Rng + ?Sized>(
        &self,
        state: &BudgetState,
        arm: usize,
        rng: &mut R,
    ) -> Result<(StepRecord, BudgetState), EnvError> {
        let mut next = state.clone();
        let atom = self.step_in_place(&mut next, arm, rng)?;
        let record = StepRecord {
            round: next.t,
            arm,
            reward: atom.reward,
            drifts: atom.drifts.clone(),
            budgets_after: next.budgets.clone(),
        };
        Ok((record, next))
    }
}
