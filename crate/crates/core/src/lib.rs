//! Optimal Skorokhod embeddings for random walks on a finite lattice.
//!
//! An embedding problem (start law, target law, cost) is solved as a
//! linear program over stopped and continuing mass on the augmented state
//! graph. Solutions come with a dual certificate, a stop-go
//! (monotonicity) check, barrier extraction in the cost's phase space, and
//! Monte Carlo verification.

pub mod barriers;
pub mod config;
pub mod costs;
pub mod error;
pub mod lattice;
pub mod measures;
pub mod montecarlo;
pub mod optsep;
pub mod stopping;

pub use config::Config;
pub use costs::{CostFunctional, ScalarFn};
pub use error::{Error, Result};
pub use lattice::{AugmentedState, Feature, Kernel, LatticeSpec, StateGraph};
pub use measures::DiscreteMeasure;
pub use optsep::{solve, EmbeddingProblem, Mode, OptimalSolution};
pub use stopping::RandomizedStoppingTime;

/// Rounds to 12 significant digits, the precision of every exported real.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}
