//! The LP relaxation of the drift model and everything derived from it.
//!
//! `OPT_LP = max Σ pₓ μʳₓ  s.t.  Σ pₓ μᵈʲₓ ≥ −B/T ∀j,  Σ pₓ = 1,  p ≥ 0`.
//!
//! Besides the optimum itself this module extracts the support `X*`, the
//! binding set `J*` and the square basis system `D p = b`, the restricted
//! values `OPT₋ₓ` / `OPT₋ⱼ` used for identification, the gap `Δ`, and the
//! separation constants that drive the control policies (`δ_drift`, `σ_min`,
//! `δ_support`, `δ_slack`, `γ*`, `c`).

pub mod oracle;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{smallest_singular_value, Matrix};
use crate::simplex::{LinearProgram, Relation, SimplexError};

/// Absolute tolerance for feasibility and binding detection.
pub const BINDING_TOL: f64 = 1e-8;
/// `pₓ` above this puts `x` in the support.
pub const SUPPORT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("instance LP is infeasible")]
    InfeasibleInstance,
    #[error("LP solver failed: {0}")]
    Solver(SimplexError),
    #[error("assumption violated: {0}")]
    AssumptionViolated(&'static str),
    #[error("oracle limited to k <= {max_arms} and m <= {max_resources}")]
    OracleScaleExceeded {
        max_arms: usize,
        max_resources: usize,
    },
}

impl From<SimplexError> for LpError {
    fn from(e: SimplexError) -> Self {
        match e {
            SimplexError::Infeasible => LpError::InfeasibleInstance,
            other => LpError::Solver(other),
        }
    }
}

/// Expected-value description of a drift instance.
///
/// Arm 0 is the null arm. `drifts[j][x]` is the expected drift of resource
/// `j` when arm `x` is pulled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpInstance {
    pub horizon: u64,
    pub initial_budget: f64,
    pub rewards: Vec<f64>,
    pub drifts: Vec<Vec<f64>>,
}

impl LpInstance {
    /// Builds and validates an instance.
    pub fn new(
        horizon: u64,
        initial_budget: f64,
        rewards: Vec<f64>,
        drifts: Vec<Vec<f64>>,
    ) -> Result<Self, LpError> {
        let inst = Self::unchecked(horizon, initial_budget, rewards, drifts);
        inst.validate()?;
        Ok(inst)
    }

    /// Builds an instance without the null-arm and range checks. Used for
    /// optimistic / pessimistic LPs built from confidence bounds, which
    /// need not look like a valid environment.
    pub fn unchecked(
        horizon: u64,
        initial_budget: f64,
        rewards: Vec<f64>,
        drifts: Vec<Vec<f64>>,
    ) -> Self {
        Self {
            horizon,
            initial_budget,
            rewards,
            drifts,
        }
    }

    pub fn num_arms(&self) -> usize {
        self.rewards.len()
    }

    pub fn num_resources(&self) -> usize {
        self.drifts.len()
    }

    /// `B / T`, the per-round budget allowance on the right-hand side.
    pub fn budget_rate(&self) -> f64 {
        self.initial_budget / self.horizon as f64
    }

    pub fn with_horizon(&self, horizon: u64) -> Self {
        Self {
            horizon,
            ..self.clone()
        }
    }

    /// `Σₓ pₓ μᵈʲₓ`.
    pub fn drift_of(&self, j: usize, p: &[f64]) -> f64 {
        self.drifts[j].iter().zip(p).map(|(d, q)| d * q).sum()
    }

    pub fn reward_of(&self, p: &[f64]) -> f64 {
        self.rewards.iter().zip(p).map(|(r, q)| r * q).sum()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let k = self.num_arms();
        let m = self.num_resources();
        let bad = |msg: String| Err(LpError::InvalidInstance(msg));
        if k == 0 {
            return bad("at least one arm (the null arm) is required".into());
        }
        if m == 0 {
            return bad("at least one resource is required".into());
        }
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        if !(self.initial_budget >= 0.0 && self.initial_budget <= self.horizon as f64) {
            return bad(format!(
                "initial budget {} outside [0, T = {}]",
                self.initial_budget, self.horizon
            ));
        }
        for (x, r) in self.rewards.iter().enumerate() {
            if !(0.0..=1.0).contains(r) {
                return bad(format!("reward of arm {x} is {r}, outside [0, 1]"));
            }
        }
        for (j, row) in self.drifts.iter().enumerate() {
            if row.len() != k {
                return bad(format!(
                    "drift row {j} has {} entries, expected {k}",
                    row.len()
                ));
            }
            for (x, d) in row.iter().enumerate() {
                if !(-1.0..=1.0).contains(d) {
                    return bad(format!(
                        "drift of arm {x} on resource {j} is {d}, outside [-1, 1]"
                    ));
                }
            }
        }
        if self.rewards[0] != 0.0 {
            return bad("null arm (index 0) must have zero expected reward".into());
        }
        for (j, row) in self.drifts.iter().enumerate() {
            if row[0] <= 0.0 {
                return bad(format!(
                    "null arm must have positive expected drift on resource {j}"
                ));
            }
        }
        Ok(())
    }
}

/// Which member of the LP family to solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpVariant {
    /// The relaxation itself.
    Relaxation,
    /// Relaxation with `pₓ = 0` (`OPT₋ₓ`).
    MinusArm(usize),
    /// Relaxation with resource `j`'s slack subtracted from the objective
    /// (`OPT₋ⱼ`).
    MinusResource(usize),
}

impl LpVariant {
    /// Objective coefficients and constant term.
    pub fn objective(&self, inst: &LpInstance) -> (Vec<f64>, f64) {
        match *self {
            LpVariant::MinusResource(j) => {
                // r·p − (Σ pₓ μᵈʲₓ + B/T): zero penalty exactly when j binds.
                let c = inst
                    .rewards
                    .iter()
                    .zip(&inst.drifts[j])
                    .map(|(r, d)| r - d)
                    .collect();
                (c, -inst.budget_rate())
            }
            _ => (inst.rewards.clone(), 0.0),
        }
    }
}

fn build_program(inst: &LpInstance, variant: LpVariant) -> (LinearProgram, f64) {
    let k = inst.num_arms();
    let (objective, constant) = variant.objective(inst);
    let mut lp = LinearProgram::new(objective);
    let rhs = -inst.budget_rate();
    for row in &inst.drifts {
        lp.add(row.clone(), Relation::Ge, rhs);
    }
    lp.add(vec![1.0; k], Relation::Eq, 1.0);
    if let LpVariant::MinusArm(x) = variant {
        let mut e = vec![0.0; k];
        e[x] = 1.0;
        lp.add(e, Relation::Eq, 0.0);
    }
    (lp, constant)
}

/// Optimal value of an LP variant; infeasible programs map to `−∞`.
pub fn solve_variant(inst: &LpInstance, variant: LpVariant) -> Result<f64, LpError> {
    let (lp, constant) = build_program(inst, variant);
    match lp.solve() {
        Ok(opt) => Ok(opt.value + constant),
        Err(SimplexError::Infeasible) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(LpError::Solver(e)),
    }
}

/// Optimum of the relaxation with its support, binding set and basis system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub value: f64,
    pub probabilities: Vec<f64>,
    pub support: Vec<usize>,
    pub binding: Vec<usize>,
    /// Rows: binding resources (ascending) restricted to the support, then
    /// the all-ones row.
    pub basis_matrix: Vec<Vec<f64>>,
    /// `−B/T` per binding resource, then `1`.
    pub rhs: Vec<f64>,
    /// Alternative optimal bases or a degenerate vertex were detected.
    pub degenerate: bool,
}

impl LpSolution {
    pub fn basis(&self) -> Matrix {
        Matrix::from_rows(&self.basis_matrix)
    }

    /// Whether `|J*| = |X*| − 1`, i.e. `D` is square.
    pub fn basis_is_square(&self) -> bool {
        self.binding.len() + 1 == self.support.len()
    }

    pub fn restricted_probabilities(&self) -> Vec<f64> {
        self.support
            .iter()
            .map(|&x| self.probabilities[x])
            .collect()
    }

    /// Checks feasibility, support and binding consistency, and `D p* = b`
    /// against `inst`, within `tol`.
    pub fn check_consistency(&self, inst: &LpInstance, tol: f64) -> Result<(), String> {
        let k = inst.num_arms();
        if self.probabilities.len() != k {
            return Err(format!(
                "expected {k} probabilities, got {}",
                self.probabilities.len()
            ));
        }
        if self.probabilities.iter().any(|&p| p < -tol) {
            return Err("negative probability".into());
        }
        let total: f64 = self.probabilities.iter().sum();
        if (total - 1.0).abs() > tol {
            return Err(format!("probabilities sum to {total}"));
        }
        let rate = inst.budget_rate();
        for j in 0..inst.num_resources() {
            let d = inst.drift_of(j, &self.probabilities);
            if d < -rate - tol {
                return Err(format!("resource {j} constraint violated: {d} < {}", -rate));
            }
            let binds = (d + rate).abs() <= BINDING_TOL.max(tol);
            if binds != self.binding.contains(&j) {
                return Err(format!("binding set inconsistent at resource {j}"));
            }
        }
        for x in 0..k {
            if (self.probabilities[x] > SUPPORT_TOL) != self.support.contains(&x) {
                return Err(format!("support inconsistent at arm {x}"));
            }
        }
        let reward = inst.reward_of(&self.probabilities);
        if (reward - self.value).abs() > tol {
            return Err(format!("value {} but p*ᵀr = {reward}", self.value));
        }
        let d = self.basis();
        let lhs = d.mul_vec(&self.restricted_probabilities());
        for (i, (a, b)) in lhs.iter().zip(&self.rhs).enumerate() {
            if (a - b).abs() > tol {
                return Err(format!("row {i} of D p* = b off by {}", (a - b).abs()));
            }
        }
        Ok(())
    }
}

/// Builds `D` and `b` for a given support and binding set.
pub fn basis_system(
    inst: &LpInstance,
    support: &[usize],
    binding: &[usize],
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rows: Vec<Vec<f64>> = binding
        .iter()
        .map(|&j| support.iter().map(|&x| inst.drifts[j][x]).collect())
        .collect();
    rows.push(vec![1.0; support.len()]);
    let mut rhs: Vec<f64> = binding.iter().map(|_| -inst.budget_rate()).collect();
    rhs.push(1.0);
    (rows, rhs)
}

/// Solves the relaxation and extracts `p*`, `X*`, `J*`, `D` and `b`.
pub fn solve_relaxation(inst: &LpInstance) -> Result<LpSolution, LpError> {
    let (lp, _) = build_program(inst, LpVariant::Relaxation);
    let opt = lp.solve()?;
    let k = inst.num_arms();
    let mut p = opt.x;
    for v in p.iter_mut() {
        if *v <= SUPPORT_TOL {
            *v = 0.0;
        }
    }
    let support: Vec<usize> = (0..k).filter(|&x| p[x] > SUPPORT_TOL).collect();
    let rate = inst.budget_rate();
    let binding: Vec<usize> = (0..inst.num_resources())
        .filter(|&j| (inst.drift_of(j, &p) + rate).abs() <= BINDING_TOL)
        .collect();
    let (basis_matrix, rhs) = basis_system(inst, &support, &binding);
    let mut degenerate = opt.degenerate;
    // Polish p* on the support through the square basis system.
    if binding.len() + 1 == support.len() {
        let d = Matrix::from_rows(&basis_matrix);
        match d.solve(&rhs) {
            Some(sol) if sol.iter().all(|&v| v > 0.0) => {
                for (&x, v) in support.iter().zip(sol) {
                    p[x] = v;
                }
            }
            _ => degenerate = true,
        }
    } else {
        degenerate = true;
    }
    let value = inst.reward_of(&p);
    Ok(LpSolution {
        value,
        probabilities: p,
        support,
        binding,
        basis_matrix,
        rhs,
        degenerate,
    })
}

/// `OPT₋ₓ`: the relaxation with `pₓ` forced to zero; `−∞` if infeasible.
pub fn solve_minus_arm(inst: &LpInstance, x: usize) -> Result<f64, LpError> {
    assert!(x < inst.num_arms(), "arm index out of range");
    solve_variant(inst, LpVariant::MinusArm(x))
}

/// `OPT₋ⱼ`: the relaxation with resource `j`'s slack `Σ pₓ μᵈʲₓ + B/T`
/// subtracted from the objective.
pub fn solve_minus_resource(inst: &LpInstance, j: usize) -> Result<f64, LpError> {
    assert!(j < inst.num_resources(), "resource index out of range");
    solve_variant(inst, LpVariant::MinusResource(j))
}

/// The gap `Δ`; `+∞` when both minimands range over empty sets.
pub fn compute_gap(inst: &LpInstance, sol: &LpSolution) -> Result<f64, LpError> {
    let mut gap = f64::INFINITY;
    for &x in &sol.support {
        gap = gap.min(sol.value - solve_minus_arm(inst, x)?);
    }
    for j in (0..inst.num_resources()).filter(|j| !sol.binding.contains(j)) {
        gap = gap.min(sol.value - solve_minus_resource(inst, j)?);
    }
    Ok(gap)
}

/// Separation constants of an instance.
///
/// `delta_slack` and `gap` are `+∞` when their defining minimum is over an
/// empty set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationConstants {
    pub delta_drift: f64,
    pub sigma_min: f64,
    pub delta_support: f64,
    #[serde(with = "crate::serde_inf")]
    pub delta_slack: f64,
    pub gamma_star: f64,
    #[serde(with = "crate::serde_inf")]
    pub gap: f64,
    pub c: f64,
}

/// `γ* = σ_min · min{δ_support, δ_slack} / (4m)`.
pub fn gamma_star(sigma_min: f64, delta_support: f64, delta_slack: f64, m: usize) -> f64 {
    sigma_min * delta_support.min(delta_slack) / (4.0 * m as f64)
}

/// Theory default for the threshold coefficient, `6 / γ*²`.
pub fn default_threshold_coefficient(gamma_star: f64) -> f64 {
    6.0 / (gamma_star * gamma_star)
}

/// Computes every separation constant, failing on the first one that is
/// not strictly positive.
pub fn compute_constants(
    inst: &LpInstance,
    sol: &LpSolution,
    c_override: Option<f64>,
) -> Result<SeparationConstants, LpError> {
    let delta_drift = inst
        .drifts
        .iter()
        .flatten()
        .fold(f64::INFINITY, |m, d| m.min(d.abs()));
    if !(delta_drift > 0.0) {
        return Err(LpError::AssumptionViolated("δ_drift"));
    }
    if !sol.basis_is_square() {
        return Err(LpError::AssumptionViolated("basis-dimension"));
    }
    let sigma_min = smallest_singular_value(&sol.basis());
    if !(sigma_min > 1e-12) {
        return Err(LpError::AssumptionViolated("σ_min"));
    }
    let delta_support = sol
        .support
        .iter()
        .map(|&x| sol.probabilities[x])
        .fold(f64::INFINITY, f64::min);
    if !(delta_support > 0.0 && delta_support.is_finite()) {
        return Err(LpError::AssumptionViolated("δ_support"));
    }
    let delta_slack = (0..inst.num_resources())
        .filter(|j| !sol.binding.contains(j))
        .map(|j| inst.drift_of(j, &sol.probabilities))
        .fold(f64::INFINITY, f64::min);
    if !(delta_slack > 0.0) {
        return Err(LpError::AssumptionViolated("δ_slack"));
    }
    let gamma_star = gamma_star(sigma_min, delta_support, delta_slack, inst.num_resources());
    if !(gamma_star > 0.0) {
        return Err(LpError::AssumptionViolated("γ*"));
    }
    let gap = compute_gap(inst, sol)?;
    if !(gap > BINDING_TOL) {
        return Err(LpError::AssumptionViolated("Δ"));
    }
    let c = c_override.unwrap_or_else(|| default_threshold_coefficient(gamma_star));
    Ok(SeparationConstants {
        delta_drift,
        sigma_min,
        delta_support,
        delta_slack,
        gamma_star,
        gap,
        c,
    })
}
