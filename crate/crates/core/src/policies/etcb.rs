//! ExploreThenControlBudget.
//!
//! Phase 1 pulls arms round-robin until confidence-bound LPs certify which
//! arms are in the optimal support and which resources are slack. Phase 2
//! pulls the support round-robin until every radius is small. Phase 3 runs a
//! ControlBudget-like rule whose drift constraints use confidence bounds.

use serde::{Deserialize, Serialize};

use super::confidence::{empirical_lp_values, ucb_lp_values, ConfidenceTable, LpBounds};
use super::{sample_categorical, threshold, Policy, PolicyDiagnostics};
use crate::environment::{BudgetState, Observation, NULL_ARM};
use crate::lp_core::LpError;
use crate::rng::SimRng;
use crate::simplex::{LinearProgram, Relation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentificationRule {
    /// Compare `UCB(OPT₋ₓ)`, `UCB(OPT₋ⱼ)` against `LCB(OPT)`.
    ConfidenceBounds,
    /// Compare the same LP values computed on empirical means.
    EmpiricalMeans,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtcbConfig {
    pub horizon: u64,
    pub initial_budget: f64,
    pub num_arms: usize,
    pub num_resources: usize,
    pub gamma_star: f64,
    pub c: f64,
    pub rule: IdentificationRule,
    /// Empirical rule only: tests start once every arm has `explore_coef · ln T`
    /// samples.
    pub explore_coef: f64,
}

pub const DEFAULT_EXPLORE_COEF: f64 = 8.0;
/// Margin by which an empirical restricted value must undercut `OPT`.
const EMPIRICAL_MARGIN: f64 = 1e-9;

impl EtcbConfig {
    /// Per-arm sample count that ends phase 2: `32 ln T / γ*²`.
    pub fn phase2_target(&self) -> u64 {
        (32.0 * (self.horizon as f64).ln() / (self.gamma_star * self.gamma_star)).ceil() as u64
    }

    fn explore_target(&self) -> u64 {
        match self.rule {
            IdentificationRule::ConfidenceBounds => 1,
            IdentificationRule::EmpiricalMeans => (self.explore_coef * (self.horizon as f64).ln())
                .ceil()
                .max(1.0) as u64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Identify,
    Estimate,
    Control,
}

/// One pass of the phase-1 tests: arms first, then resources, each in
/// index order, stopping once `|X*| + |J′| = m + 1`. Returns whether that
/// count has been reached.
pub fn identification_step(
    bounds: &LpBounds,
    margin: f64,
    support: &mut Vec<usize>,
    slack: &mut Vec<usize>,
    num_resources: usize,
) -> bool {
    let target = num_resources + 1;
    let threshold = bounds.lcb_opt - margin;
    for (x, &v) in bounds.ucb_minus_arm.iter().enumerate() {
        if support.len() + slack.len() >= target {
            break;
        }
        if !support.contains(&x) && v < threshold {
            support.push(x);
        }
    }
    for (j, &v) in bounds.ucb_minus_resource.iter().enumerate() {
        if support.len() + slack.len() >= target {
            break;
        }
        if !slack.contains(&j) && v < threshold {
            slack.push(j);
        }
    }
    support.sort_unstable();
    slack.sort_unstable();
    support.len() + slack.len() >= target
}

/// `(X*, J*)` as found by phase 1.
pub type Identified = (Vec<usize>, Vec<usize>);

/// Runs the phase-1 tests once on `table`; returns `(X*, J*)` if they
/// complete.
pub fn identify_from_table(
    table: &ConfidenceTable,
    rule: IdentificationRule,
) -> Result<Option<Identified>, LpError> {
    let (bounds, margin) = match rule {
        IdentificationRule::ConfidenceBounds => (ucb_lp_values(table)?, 0.0),
        IdentificationRule::EmpiricalMeans => (empirical_lp_values(table)?, EMPIRICAL_MARGIN),
    };
    let m = table.num_resources();
    let (mut support, mut slack) = (Vec::new(), Vec::new());
    if identification_step(&bounds, margin, &mut support, &mut slack, m) {
        let binding = (0..m).filter(|j| !slack.contains(j)).collect();
        Ok(Some((support, binding)))
    } else {
        Ok(None)
    }
}

/// Smallest slack of the phase-3 constraints at `(p, γ)`, where `p` is
/// indexed like `support`. Nonnegative means feasible.
pub fn phase3_min_slack(
    table: &ConfidenceTable,
    support: &[usize],
    binding: &[usize],
    budgets: &[f64],
    tau: f64,
    p: &[f64],
    gamma: f64,
) -> f64 {
    let mut worst = f64::INFINITY;
    for j in 0..table.num_resources() {
        let lcb: f64 = support
            .iter()
            .zip(p)
            .map(|(&x, &px)| px * (table.mean(x)[j + 1] - table.radius(x)).clamp(-1.0, 1.0))
            .sum();
        let ucb: f64 = support
            .iter()
            .zip(p)
            .map(|(&x, &px)| px * (table.mean(x)[j + 1] + table.radius(x)).clamp(-1.0, 1.0))
            .sum();
        let below = budgets[j] < tau;
        if below {
            worst = worst.min(lcb - gamma / 8.0);
        } else if binding.contains(&j) {
            worst = worst.min(-gamma / 8.0 - ucb);
        }
    }
    worst
}

#[derive(Debug, Clone)]
pub struct EtcbPolicy {
    cfg: EtcbConfig,
    table: ConfidenceTable,
    phase: Phase,
    support: Vec<usize>,
    slack: Vec<usize>,
    binding: Vec<usize>,
    order: Vec<usize>,
    cursor: usize,
    phase1_end: Option<u64>,
    phase2_end: Option<u64>,
    phase3_infeasible: u64,
}

impl EtcbPolicy {
    pub fn new(cfg: EtcbConfig) -> Self {
        let table = ConfidenceTable::new(
            cfg.horizon,
            cfg.initial_budget,
            cfg.num_arms,
            cfg.num_resources,
        );
        // Non-null arms first, then the null arm, so every arm is sampled.
        let order = (1..cfg.num_arms).chain(std::iter::once(NULL_ARM)).collect();
        Self {
            cfg,
            table,
            phase: Phase::Identify,
            support: Vec::new(),
            slack: Vec::new(),
            binding: Vec::new(),
            order,
            cursor: 0,
            phase1_end: None,
            phase2_end: None,
            phase3_infeasible: 0,
        }
    }

    pub fn config(&self) -> &EtcbConfig {
        &self.cfg
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn table(&self) -> &ConfidenceTable {
        &self.table
    }

    /// Identified `X*` (complete once phase 1 ends).
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// `J*` (set when phase 1 ends).
    pub fn binding(&self) -> &[usize] {
        &self.binding
    }

    fn try_identify(&mut self, round: u64) {
        let target = self.cfg.explore_target();
        if (0..self.cfg.num_arms).any(|x| self.table.count(x) < target) {
            return;
        }
        let result = match self.cfg.rule {
            IdentificationRule::ConfidenceBounds => ucb_lp_values(&self.table).map(|b| (b, 0.0)),
            IdentificationRule::EmpiricalMeans => {
                empirical_lp_values(&self.table).map(|b| (b, EMPIRICAL_MARGIN))
            }
        };
        let Ok((bounds, margin)) = result else {
            return;
        };
        let m = self.cfg.num_resources;
        if identification_step(&bounds, margin, &mut self.support, &mut self.slack, m) {
            self.binding = (0..m).filter(|j| !self.slack.contains(j)).collect();
            self.phase = Phase::Estimate;
            self.phase1_end = Some(round);
            self.cursor = 0;
        }
    }

    fn estimate_arm(&mut self) -> Option<usize> {
        let target = self.cfg.phase2_target();
        let n = self.support.len();
        for step in 0..n {
            let i = (self.cursor + step) % n;
            let x = self.support[i];
            if self.table.count(x) < target {
                self.cursor = (i + 1) % n;
                return Some(x);
            }
        }
        None
    }

    /// Phase-3 distribution over all arms.
    fn control_distribution(&mut self, state: &BudgetState) -> Vec<f64> {
        let tau = threshold(self.cfg.c, self.cfg.horizon, state.t);
        let s = self.support.len();
        let mut objective = vec![0.0; s + 1];
        objective[s] = 1.0;
        let mut lp = LinearProgram::new(objective);
        let mut ones = vec![1.0; s + 1];
        ones[s] = 0.0;
        lp.add(ones, Relation::Eq, 1.0);
        let mut cap = vec![0.0; s + 1];
        cap[s] = 1.0;
        lp.add(cap, Relation::Le, 1.0);
        for j in 0..self.cfg.num_resources {
            let below = state.budgets[j] < tau;
            let binding = self.binding.contains(&j);
            if !below && !binding {
                continue;
            }
            let sign = if below { -1.0 } else { 1.0 };
            let mut row: Vec<f64> = self
                .support
                .iter()
                .map(|&x| {
                    (self.table.mean(x)[j + 1] + sign * self.table.radius(x)).clamp(-1.0, 1.0)
                })
                .collect();
            if below {
                row.push(-1.0 / 8.0);
                lp.add(row, Relation::Ge, 0.0);
            } else {
                row.push(1.0 / 8.0);
                lp.add(row, Relation::Le, 0.0);
            }
        }
        let restricted = match lp.solve() {
            Ok(opt) => {
                if opt.value <= 0.0 {
                    self.phase3_infeasible += 1;
                }
                opt.x[..s].to_vec()
            }
            Err(_) => {
                self.phase3_infeasible += 1;
                self.empirical_fallback()
            }
        };
        let mut p = vec![0.0; self.cfg.num_arms];
        for (&x, v) in self.support.iter().zip(restricted) {
            p[x] = v.max(0.0);
        }
        p
    }

    /// Empirical-mean LP restricted to `X*`, else uniform over `X*`.
    fn empirical_fallback(&self) -> Vec<f64> {
        let inst = self.table.empirical_instance();
        let rate = inst.budget_rate();
        let mut lp = LinearProgram::new(self.support.iter().map(|&x| inst.rewards[x]).collect());
        for row in &inst.drifts {
            lp.add(
                self.support.iter().map(|&x| row[x]).collect(),
                Relation::Ge,
                -rate,
            );
        }
        lp.add(vec![1.0; self.support.len()], Relation::Eq, 1.0);
        match lp.solve() {
            Ok(opt) => opt.x,
            Err(_) => vec![1.0 / self.support.len() as f64; self.support.len()],
        }
    }
}

impl Policy for EtcbPolicy {
    fn name(&self) -> &'static str {
        match self.cfg.rule {
            IdentificationRule::ConfidenceBounds => "etcb",
            IdentificationRule::EmpiricalMeans => "etcb-empirical",
        }
    }

    fn select(&mut self, state: &BudgetState, rng: &mut SimRng) -> usize {
        if self.phase == Phase::Estimate && self.estimate_arm_pending().is_none() {
            self.phase = Phase::Control;
            self.phase2_end = Some(state.t);
        }
        if state.null_forced() {
            return NULL_ARM;
        }
        match self.phase {
            Phase::Identify => {
                let x = self.order[self.cursor];
                self.cursor = (self.cursor + 1) % self.order.len();
                x
            }
            Phase::Estimate => self.estimate_arm().expect("pending arm checked above"),
            Phase::Control => {
                let p = self.control_distribution(state);
                sample_categorical(&p, rng)
            }
        }
    }

    fn observe(&mut self, obs: &Observation<'_>) {
        self.table.update(obs);
        if self.phase == Phase::Identify {
            self.try_identify(obs.round);
        }
    }

    fn diagnostics(&self) -> PolicyDiagnostics {
        PolicyDiagnostics {
            phase1_end: self.phase1_end,
            phase2_end: self.phase2_end,
            phase3_infeasible: self.phase3_infeasible,
            ..PolicyDiagnostics::default()
        }
    }

    fn clone_box(&self) -> Box<dyn Policy> {
        Box::new(self.clone())
    }
}

impl EtcbPolicy {
    fn estimate_arm_pending(&self) -> Option<usize> {
        let target = self.cfg.phase2_target();
        self.support
            .iter()
            .copied()
            .find(|&x| self.table.count(x) < target)
    }
}
