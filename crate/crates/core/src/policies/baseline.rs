//! Reference policies.

use super::{sample_categorical, Policy};
use crate::environment::{BudgetState, NULL_ARM};
use crate::lp_core::LpSolution;
use crate::rng::SimRng;

/// Samples `p*` i.i.d., pulling the null arm when forced.
#[derive(Debug, Clone)]
pub struct LpSampler {
    probabilities: Vec<f64>,
}

impl LpSampler {
    pub fn new(sol: &LpSolution) -> Self {
        Self {
            probabilities: sol.probabilities.clone(),
        }
    }
}

pub fn baseline_lp_sampler(p: &[f64], state: &BudgetState, rng: &mut SimRng) -> usize {
    if state.null_forced() {
        NULL_ARM
    } else {
        sample_categorical(p, rng)
    }
}

impl Policy for LpSampler {
    fn name(&self) -> &'static str {
        "lp-sampler"
    }

    fn select(&mut self, state: &BudgetState, rng: &mut SimRng) -> usize {
        baseline_lp_sampler(&self.probabilities, state, rng)
    }

    fn clone_box(&self) -> Box<dyn Policy> {
        Box::new(self.clone())
    }
}

/// Always idles.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullOnly;

impl Policy for NullOnly {
    fn name(&self) -> &'static str {
        "null-only"
    }

    fn select(&mut self, _state: &BudgetState, _rng: &mut SimRng) -> usize {
        NULL_ARM
    }

    fn clone_box(&self) -> Box<dyn Policy> {
        Box::new(*self)
    }
}
