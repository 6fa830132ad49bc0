//! ControlBudget: steer each binding budget toward a decaying threshold.

use serde::{Deserialize, Serialize};

use super::{sample_categorical, threshold, Policy, PolicyDiagnostics, PolicyError};
use crate::environment::{BudgetState, NULL_ARM};
use crate::linalg::Matrix;
use crate::lp_core::{LpInstance, LpSolution};
use crate::rng::SimRng;

/// Support shapes of a one-resource LP optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CbOneCase {
    PositiveOnly { positive: usize },
    NullPlusNegative { negative: usize },
    PositivePlusNegative { positive: usize, negative: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CbOneConfig {
    pub case: CbOneCase,
    pub c: f64,
    pub horizon: u64,
}

/// Classifies the support of a one-resource LP optimum.
pub fn cb1_classify(
    sol: &LpSolution,
    inst: &LpInstance,
    c: f64,
) -> Result<CbOneConfig, PolicyError> {
    if inst.num_resources() != 1 {
        return Err(PolicyError::NeedsSingleResource(inst.num_resources()));
    }
    let drift = |x: usize| inst.drifts[0][x];
    let unclassifiable = || PolicyError::UnclassifiableSupport(sol.support.clone());
    let case = match *sol.support.as_slice() {
        [x] if x != NULL_ARM && drift(x) > 0.0 => CbOneCase::PositiveOnly { positive: x },
        [a, b] => {
            let (pos, neg) = if drift(a) > 0.0 && drift(b) < 0.0 {
                (a, b)
            } else if drift(b) > 0.0 && drift(a) < 0.0 {
                (b, a)
            } else {
                return Err(unclassifiable());
            };
            if pos == NULL_ARM {
                CbOneCase::NullPlusNegative { negative: neg }
            } else {
                CbOneCase::PositivePlusNegative {
                    positive: pos,
                    negative: neg,
                }
            }
        }
        _ => return Err(unclassifiable()),
    };
    Ok(CbOneConfig {
        case,
        c,
        horizon: inst.horizon,
    })
}

pub fn cb1_select(cfg: &CbOneConfig, state: &BudgetState) -> usize {
    let budget = state.budgets[0];
    if budget < 1.0 {
        return NULL_ARM;
    }
    let tau = threshold(cfg.c, cfg.horizon, state.t);
    match cfg.case {
        CbOneCase::PositiveOnly { positive } => positive,
        CbOneCase::NullPlusNegative { negative } => {
            if budget < tau {
                NULL_ARM
            } else {
                negative
            }
        }
        CbOneCase::PositivePlusNegative { positive, negative } => {
            if budget < tau {
                positive
            } else {
                negative
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct CbOnePolicy {
    cfg: CbOneConfig,
}

impl CbOnePolicy {
    pub fn new(cfg: CbOneConfig) -> Self {
        Self { cfg }
    }

    pub fn config(&self) -> &CbOneConfig {
        &self.cfg
    }
}

impl Policy for CbOnePolicy {
    fn name(&self) -> &'static str {
        "cb1"
    }

    fn select(&mut self, state: &BudgetState, _rng: &mut SimRng) -> usize {
        cb1_select(&self.cfg, state)
    }

    fn clone_box(&self) -> Box<dyn Policy> {
        Box::new(self.clone())
    }
}

/// The restricted basis system of an LP optimum plus what CB needs around it.
#[derive(Debug, Clone)]
pub struct CbConfig {
    pub horizon: u64,
    pub num_arms: usize,
    /// `X*`, ascending.
    pub support: Vec<usize>,
    /// `J*`, ascending; row `i < |J*|` of `D` belongs to `binding[i]`.
    pub binding: Vec<usize>,
    pub nonbinding: Vec<usize>,
    pub basis: Matrix,
    pub basis_inverse: Matrix,
    pub rhs: Vec<f64>,
    /// `drifts[j][i]`: expected drift of resource `j` under `support[i]`.
    pub drifts: Vec<Vec<f64>>,
    pub c: f64,
    pub gamma_star: Option<f64>,
}

impl CbConfig {
    pub fn new(
        inst: &LpInstance,
        sol: &LpSolution,
        c: f64,
        gamma_star: Option<f64>,
    ) -> Result<Self, PolicyError> {
        if !sol.basis_is_square() {
            return Err(PolicyError::SingularBasis);
        }
        let basis = sol.basis();
        if basis.determinant().abs() <= 1e-10 {
            return Err(PolicyError::SingularBasis);
        }
        let basis_inverse = basis.inverse().ok_or(PolicyError::SingularBasis)?;
        let drifts = inst
            .drifts
            .iter()
            .map(|row| sol.support.iter().map(|&x| row[x]).collect())
            .collect();
        let nonbinding = (0..inst.num_resources())
            .filter(|j| !sol.binding.contains(j))
            .collect();
        Ok(Self {
            horizon: inst.horizon,
            num_arms: inst.num_arms(),
            support: sol.support.clone(),
            binding: sol.binding.clone(),
            nonbinding,
            basis,
            basis_inverse,
            rhs: sol.rhs.clone(),
            drifts,
            c,
            gamma_star,
        })
    }

    pub fn threshold(&self, state: &BudgetState) -> f64 {
        threshold(self.c, self.horizon, state.t)
    }

    /// Non-binding resources whose budget is below the threshold.
    pub fn below_threshold(&self, state: &BudgetState) -> Vec<usize> {
        let tau = self.threshold(state);
        self.nonbinding
            .iter()
            .copied()
            .filter(|&j| state.budgets[j] < tau)
            .collect()
    }

    fn restricted(&self, gamma: f64, signs: &[f64]) -> Vec<f64> {
        let shifted: Vec<f64> = self
            .rhs
            .iter()
            .zip(signs)
            .map(|(b, s)| b + gamma * s)
            .collect();
        self.basis_inverse.mul_vec(&shifted)
    }

    fn expand(&self, restricted: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.num_arms];
        for (&x, &v) in self.support.iter().zip(restricted) {
            p[x] = v;
        }
        p
    }
}

/// `+1` for rows whose binding budget is below the threshold, `−1` for the
/// others, `0` for the sum-to-one row.
pub fn cb_build_signs(cfg: &CbConfig, state: &BudgetState) -> Vec<f64> {
    let tau = cfg.threshold(state);
    let mut s: Vec<f64> = cfg
        .binding
        .iter()
        .map(|&j| if state.budgets[j] < tau { 1.0 } else { -1.0 })
        .collect();
    s.push(0.0);
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaSolution {
    pub gamma: f64,
    /// Probabilities over all arms, zero off the support.
    pub probabilities: Vec<f64>,
}

/// Largest `γ ∈ [0, 1]` with `D⁻¹(b + γs) ≥ 0` and `pᵀμᵈʲ ≥ γ/2` for every
/// flagged non-binding `j`. Each constraint reads `α + γβ ≥ 0`, so the
/// feasible set is an interval.
pub fn cb_solve_gamma(
    cfg: &CbConfig,
    signs: &[f64],
    below_threshold: &[usize],
) -> Result<GammaSolution, PolicyError> {
    const TOL: f64 = 1e-12;
    let base = cfg.restricted(0.0, signs);
    let dir = cfg.basis_inverse.mul_vec(signs);
    let mut affine: Vec<(f64, f64)> = base.iter().copied().zip(dir.iter().copied()).collect();
    for &j in below_threshold {
        let a = &cfg.drifts[j];
        let alpha: f64 = a.iter().zip(&base).map(|(x, y)| x * y).sum();
        let beta: f64 = a.iter().zip(&dir).map(|(x, y)| x * y).sum::<f64>() - 0.5;
        affine.push((alpha, beta));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for (alpha, beta) in affine {
        if beta > TOL {
            lo = lo.max(-alpha / beta);
        } else if beta < -TOL {
            hi = hi.min(-alpha / beta);
        } else if alpha < -TOL {
            return Err(PolicyError::EmptyFeasible);
        }
    }
    if lo > hi + TOL {
        return Err(PolicyError::EmptyFeasible);
    }
    let gamma = hi.max(lo);
    let restricted = cfg.restricted(gamma, signs);
    Ok(GammaSolution {
        gamma,
        probabilities: cfg.expand(&restricted),
    })
}

#[derive(Debug, Clone)]
pub struct CbPolicy {
    cfg: CbConfig,
    fallback: Vec<f64>,
    empty_feasible: u64,
}

impl CbPolicy {
    pub fn new(cfg: CbConfig) -> Self {
        let fallback = cfg.expand(&cfg.restricted(0.0, &vec![0.0; cfg.support.len()]));
        Self {
            cfg,
            fallback,
            empty_feasible: 0,
        }
    }

    pub fn config(&self) -> &CbConfig {
        &self.cfg
    }

    /// The sampling distribution for `state`, falling back to `p*` when no
    /// `γ` is feasible. Assumes no budget is below 1.
    pub fn distribution(&mut self, state: &BudgetState) -> Vec<f64> {
        let signs = cb_build_signs(&self.cfg, state);
        let below = self.cfg.below_threshold(state);
        match cb_solve_gamma(&self.cfg, &signs, &below) {
            Ok(sol) => sol.probabilities,
            Err(_) => {
                self.empty_feasible += 1;
                self.fallback.clone()
            }
        }
    }
}

/// Null if any budget is below 1, otherwise a draw from `p_t`.
pub fn cb_select(policy: &mut CbPolicy, state: &BudgetState, rng: &mut SimRng) -> usize {
    if state.null_forced() {
        return NULL_ARM;
    }
    let p = policy.distribution(state);
    sample_categorical(&p, rng)
}

impl Policy for CbPolicy {
    fn name(&self) -> &'static str {
        "cb"
    }

    fn select(&mut self, state: &BudgetState, rng: &mut SimRng) -> usize {
        cb_select(self, state, rng)
    }

    fn diagnostics(&self) -> PolicyDiagnostics {
        PolicyDiagnostics {
            empty_feasible: self.empty_feasible,
            ..PolicyDiagnostics::default()
        }
    }

    fn clone_box(&self) -> Box<dyn Policy> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp_core::solve_relaxation;

    fn fix_b() -> LpInstance {
        LpInstance::new(25_000, 400.0, vec![0.0, 0.8], vec![vec![0.4, -0.3]]).unwrap()
    }

    fn state(t: u64, budgets: Vec<f64>) -> BudgetState {
        BudgetState { t, budgets }
    }

    #[test]
    fn classify_fix_a_and_b() {
        let a = LpInstance::new(25_000, 0.0, vec![0.0, 0.8], vec![vec![0.1, 0.4]]).unwrap();
        let cfg = cb1_classify(&solve_relaxation(&a).unwrap(), &a, 1.0).unwrap();
        assert_eq!(cfg.case, CbOneCase::PositiveOnly { positive: 1 });
        let b = fix_b();
        let cfg = cb1_classify(&solve_relaxation(&b).unwrap(), &b, 1.0).unwrap();
        assert_eq!(cfg.case, CbOneCase::NullPlusNegative { negative: 1 });
    }

    #[test]
    fn classify_positive_plus_negative() {
        let inst = LpInstance::new(
            25_000,
            400.0,
            vec![0.0, 0.8, 0.1],
            vec![vec![0.1, -0.3, 0.3]],
        )
        .unwrap();
        let cfg = cb1_classify(&solve_relaxation(&inst).unwrap(), &inst, 1.0).unwrap();
        assert_eq!(
            cfg.case,
            CbOneCase::PositivePlusNegative {
                positive: 2,
                negative: 1
            }
        );
    }

    #[test]
    fn cb1_rule_branches() {
        let t = 25_000;
        let ppn = CbOneConfig {
            case: CbOneCase::PositivePlusNegative {
                positive: 2,
                negative: 1,
            },
            c: 1.0,
            horizon: t,
        };
        // τ = ln(T − t − 1) ≈ 9.2 at t ≈ T − 10⁴.
        let s = state(t - 10_000, vec![5.0]);
        assert!((threshold(1.0, t, s.t) - 9.21).abs() < 0.01);
        assert_eq!(cb1_select(&ppn, &s), 2);
        assert_eq!(cb1_select(&ppn, &state(0, vec![50.0])), 1);
        assert_eq!(cb1_select(&ppn, &state(0, vec![0.3])), 0);

        let npn = CbOneConfig {
            case: CbOneCase::NullPlusNegative { negative: 1 },
            c: 100.0,
            horizon: t,
        };
        assert_eq!(cb1_select(&npn, &state(t - 1, vec![2.0])), 1);
        assert_eq!(cb1_select(&npn, &state(t - 2, vec![2.0])), 1);
        assert_eq!(cb1_select(&npn, &state(0, vec![2.0])), 0);
        assert_eq!(cb1_select(&npn, &state(t - 1, vec![0.3])), 0);
    }

    #[test]
    fn gamma_zero_recovers_optimum() {
        let inst = fix_b();
        let sol = solve_relaxation(&inst).unwrap();
        let cfg = CbConfig::new(&inst, &sol, 1.0, None).unwrap();
        let p = cfg.expand(&cfg.restricted(0.0, &[1.0, 0.0]));
        for (a, b) in p.iter().zip(&sol.probabilities) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn one_dimensional_breakpoints() {
        // D = [[0.4, −0.3], [1, 1]], b = (−0.016, 1). Row one of D p equals
        // −0.016 + γs, so p is pure null at γ = 0.416 for s = +1 and pure
        // arm 1 at γ = 0.284 for s = −1.
        let inst = fix_b();
        let sol = solve_relaxation(&inst).unwrap();
        let cfg = CbConfig::new(&inst, &sol, 1.0, None).unwrap();
        let up = cb_solve_gamma(&cfg, &[1.0, 0.0], &[]).unwrap();
        assert!((up.gamma - 0.416).abs() < 1e-12);
        assert!((up.probabilities[0] - 1.0).abs() < 1e-12);
        let down = cb_solve_gamma(&cfg, &[-1.0, 0.0], &[]).unwrap();
        assert!((down.gamma - 0.284).abs() < 1e-12);
        assert!((down.probabilities[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn signs_follow_threshold() {
        let inst = fix_b();
        let sol = solve_relaxation(&inst).unwrap();
        let cfg = CbConfig::new(&inst, &sol, 10.0, None).unwrap();
        assert_eq!(cb_build_signs(&cfg, &state(0, vec![5.0])), vec![1.0, 0.0]);
        assert_eq!(
            cb_build_signs(&cfg, &state(0, vec![500.0])),
            vec![-1.0, 0.0]
        );
    }

    #[test]
    fn forced_null_when_budget_low() {
        let inst = fix_b();
        let sol = solve_relaxation(&inst).unwrap();
        let mut policy = CbPolicy::new(CbConfig::new(&inst, &sol, 1.0, None).unwrap());
        let mut rng = crate::rng::stream(0, 0, crate::rng::Stream::Policy);
        assert_eq!(cb_select(&mut policy, &state(0, vec![0.5]), &mut rng), 0);
    }
}
