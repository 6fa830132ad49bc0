//! Bandits with knapsacks where resources drift up as well as down.
//!
//! The crate is organised bottom-up:
//!
//! - [`lp_core`]: the LP relaxation, its restricted variants, the gap and the
//!   separation constants (with a brute-force vertex oracle for testing).
//! - [`environment`]: finite outcome distributions, budget dynamics with the
//!   null-arm forcing rule, and the named experiment fixtures.
//! - [`policies`]: ControlBudget for one and many resources,
//!   ExploreThenControlBudget, and simple baselines.
//! - [`reduction`]: running a drift policy on a classical BwK instance.
//! - [`harness`]: episodes, seeded sweeps, regret scaling fits and CSV output.
//! - [`cli`]: the `driftbwk` command-line front end.

// `!(x > 0.0)` deliberately rejects NaN; index loops mirror the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod environment;
pub mod harness;
pub mod linalg;
pub mod lp_core;
pub mod policies;
pub mod reduction;
pub mod rng;
pub mod simplex;

/// Serialises non-finite floats as `null` and reads `null` back as `+∞`.
pub(crate) mod serde_inf {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}
