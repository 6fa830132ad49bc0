//! Per-arm empirical means with Hoeffding-style radii, and the LP values
//! obtained by plugging optimistic or pessimistic means into the relaxation.

use crate::environment::Observation;
use crate::lp_core::{solve_variant, LpError, LpInstance, LpVariant};
use crate::simplex::{LinearProgram, Relation, SimplexError};

/// Outcome vector layout: index 0 is the reward, `1 + j` the drift of `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceTable {
    horizon: u64,
    initial_budget: f64,
    counts: Vec<u64>,
    means: Vec<Vec<f64>>,
    radii: Vec<f64>,
}

pub fn radius(horizon: u64, n: u64) -> f64 {
    if n == 0 {
        f64::INFINITY
    } else {
        (8.0 * (horizon as f64).ln() / n as f64).sqrt()
    }
}

impl ConfidenceTable {
    pub fn new(horizon: u64, initial_budget: f64, num_arms: usize, num_resources: usize) -> Self {
        Self {
            horizon,
            initial_budget,
            counts: vec![0; num_arms],
            means: vec![vec![0.0; num_resources + 1]; num_arms],
            radii: vec![f64::INFINITY; num_arms],
        }
    }

    /// A table with explicit means and radii; counts are left at zero.
    pub fn from_parts(
        horizon: u64,
        initial_budget: f64,
        means: Vec<Vec<f64>>,
        radii: Vec<f64>,
    ) -> Self {
        assert_eq!(means.len(), radii.len());
        Self {
            horizon,
            initial_budget,
            counts: vec![0; means.len()],
            means,
            radii,
        }
    }

    /// Zero-radius table holding the true means of `inst`.
    pub fn exact(inst: &LpInstance) -> Self {
        let means = (0..inst.num_arms())
            .map(|x| {
                std::iter::once(inst.rewards[x])
                    .chain(inst.drifts.iter().map(|row| row[x]))
                    .collect()
            })
            .collect();
        Self::from_parts(
            inst.horizon,
            inst.initial_budget,
            means,
            vec![0.0; inst.num_arms()],
        )
    }

    pub fn num_arms(&self) -> usize {
        self.counts.len()
    }

    pub fn num_resources(&self) -> usize {
        self.means[0].len() - 1
    }

    pub fn count(&self, x: usize) -> u64 {
        self.counts[x]
    }

    pub fn mean(&self, x: usize) -> &[f64] {
        &self.means[x]
    }

    pub fn radius(&self, x: usize) -> f64 {
        self.radii[x]
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn update(&mut self, obs: &Observation<'_>) {
        let x = obs.arm;
        self.counts[x] += 1;
        let n = self.counts[x] as f64;
        let mean = &mut self.means[x];
        mean[0] += (obs.reward - mean[0]) / n;
        for (m, d) in mean[1..].iter_mut().zip(obs.drifts) {
            *m += (d - *m) / n;
        }
        self.radii[x] = radius(self.horizon, self.counts[x]);
    }

    /// Means shifted by `sign · rad` and clipped to the outcome box.
    fn shifted(&self, sign: f64) -> LpInstance {
        let k = self.num_arms();
        let m = self.num_resources();
        let clip = |v: f64, lo: f64| {
            if v.is_nan() {
                lo
            } else {
                v.clamp(lo, 1.0)
            }
        };
        let at = |x: usize, i: usize| self.means[x][i] + sign * self.radii[x];
        let rewards = (0..k).map(|x| clip(at(x, 0), 0.0)).collect();
        let drifts = (0..m)
            .map(|j| (0..k).map(|x| clip(at(x, j + 1), -1.0)).collect())
            .collect();
        LpInstance::unchecked(self.horizon, self.initial_budget, rewards, drifts)
    }

    pub fn ucb_instance(&self) -> LpInstance {
        self.shifted(1.0)
    }

    pub fn lcb_instance(&self) -> LpInstance {
        self.shifted(-1.0)
    }

    pub fn empirical_instance(&self) -> LpInstance {
        self.shifted(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpBounds {
    pub ucb_opt: f64,
    pub lcb_opt: f64,
    pub ucb_minus_arm: Vec<f64>,
    pub ucb_minus_resource: Vec<f64>,
}

/// Optimistic and pessimistic LP values of a table.
///
/// `UCB(OPT₋ⱼ)` uses the upper reward bound and the lower drift bound of `j`
/// in the objective, with upper drift bounds in the constraints, so it is an
/// upper bound whenever the intervals hold.
pub fn ucb_lp_values(table: &ConfidenceTable) -> Result<LpBounds, LpError> {
    let ucb = table.ucb_instance();
    let lcb = table.lcb_instance();
    let ucb_opt = solve_variant(&ucb, LpVariant::Relaxation)?;
    let lcb_opt = solve_variant(&lcb, LpVariant::Relaxation)?;
    let ucb_minus_arm = (0..table.num_arms())
        .map(|x| solve_variant(&ucb, LpVariant::MinusArm(x)))
        .collect::<Result<_, _>>()?;
    let ucb_minus_resource = (0..table.num_resources())
        .map(|j| optimistic_minus_resource(&ucb, &lcb, j))
        .collect::<Result<_, _>>()?;
    Ok(LpBounds {
        ucb_opt,
        lcb_opt,
        ucb_minus_arm,
        ucb_minus_resource,
    })
}

/// The same quantities on the empirical means alone.
pub fn empirical_lp_values(table: &ConfidenceTable) -> Result<LpBounds, LpError> {
    let inst = table.empirical_instance();
    let opt = solve_variant(&inst, LpVariant::Relaxation)?;
    let ucb_minus_arm = (0..table.num_arms())
        .map(|x| solve_variant(&inst, LpVariant::MinusArm(x)))
        .collect::<Result<_, _>>()?;
    let ucb_minus_resource = (0..table.num_resources())
        .map(|j| solve_variant(&inst, LpVariant::MinusResource(j)))
        .collect::<Result<_, _>>()?;
    Ok(LpBounds {
        ucb_opt: opt,
        lcb_opt: opt,
        ucb_minus_arm,
        ucb_minus_resource,
    })
}

fn optimistic_minus_resource(ucb: &LpInstance, lcb: &LpInstance, j: usize) -> Result<f64, LpError> {
    let k = ucb.num_arms();
    let rate = ucb.budget_rate();
    let objective = (0..k).map(|x| ucb.rewards[x] - lcb.drifts[j][x]).collect();
    let mut lp = LinearProgram::new(objective);
    for row in &ucb.drifts {
        lp.add(row.clone(), Relation::Ge, -rate);
    }
    lp.add(vec![1.0; k], Relation::Eq, 1.0);
    match lp.solve() {
        Ok(opt) => Ok(opt.value - rate),
        Err(SimplexError::Infeasible) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(LpError::Solver(e)),
    }
}
