//! Named instances from the experiment section.
//!
//! Every coordinate is an independent Bernoulli variable: rewards and positive
//! drifts live on `{0, 1}`, negative drifts on `{0, −1}`. The zero-drift
//! instance is the exception, its arm-1 drift is `±1` with equal probability.

use super::{EnvError, Environment, Marginal, OutcomeDistribution};

pub const FIXTURE_IDS: [&str; 6] = ["FIX-A", "FIX-B", "FIX-C", "FIX-D", "FIX-E", "FIX-Z"];

/// `(reward mean, drift means)` per arm.
type ArmMeans = (f64, &'static [f64]);

fn bernoulli_env(horizon: u64, budget: f64, arms: &[ArmMeans]) -> Result<Environment, EnvError> {
    let dists = arms
        .iter()
        .map(|(r, d)| OutcomeDistribution::bernoulli(*r, d))
        .collect::<Result<Vec<_>, _>>()?;
    Environment::new(horizon, budget, dists)
}

pub fn make_fixture(name: &str) -> Result<Environment, EnvError> {
    let env = match name {
        "FIX-A" => bernoulli_env(25_000, 0.0, &[(0.0, &[0.1]), (0.8, &[0.4])])?,
        "FIX-B" => bernoulli_env(25_000, 400.0, &[(0.0, &[0.4]), (0.8, &[-0.3])])?,
        "FIX-C" => bernoulli_env(
            25_000,
            400.0,
            &[(0.0, &[0.4]), (0.8, &[-0.3]), (0.1, &[0.3])],
        )?,
        "FIX-D" => bernoulli_env(
            25_000,
            3.0,
            &[
                (0.0, &[0.1, 0.08]),
                (0.8, &[-0.2, -0.25]),
                (0.1, &[0.4, 0.5]),
            ],
        )?,
        "FIX-E" => bernoulli_env(
            150_000,
            10.0,
            &[(0.0, &[0.9]), (0.8, &[-0.6]), (0.1, &[0.7])],
        )?,
        "FIX-Z" => {
            let null = OutcomeDistribution::bernoulli(0.0, &[0.5])?;
            let walk = OutcomeDistribution::independent(
                &Marginal::point(1.0),
                &[Marginal {
                    support: vec![-1.0, 1.0],
                    probs: vec![0.5, 0.5],
                }],
            )?;
            Environment::new(64_000, 0.0, vec![null, walk])?
        }
        other => return Err(EnvError::UnknownFixture(other.to_string())),
    };
    Ok(env.named(name))
}
