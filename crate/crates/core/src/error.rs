use lattice_simplex::LpError;
use thiserror::Error;

use crate::optsep::Infeasibility;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    Lattice(String),
    #[error("invalid measure: {0}")]
    Measure(String),
    #[error("state count exceeds the cap of {cap}")]
    StateCap { cap: usize },
    #[error("invalid path: {0}")]
    Path(String),
    #[error("cost `{cost}` needs the `{feature}` feature, which the lattice does not track")]
    MissingFeature { cost: String, feature: &'static str },
    #[error("invalid cost: {0}")]
    Cost(String),
    #[error("invalid stopping rule: {0}")]
    Stopping(String),
    #[error("state {0} is not reachable")]
    Unreachable(String),
    #[error("embedding problem is infeasible: {}", .0.hint)]
    Infeasible(Box<Infeasibility>),
    #[error("linear program is unbounded")]
    Unbounded,
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("{0}")]
    TooLarge(String),
    #[error("barrier kind violated at level {level}: {detail}")]
    BarrierKind { level: i64, detail: String },
    #[error("phase mismatch: {0}")]
    PhaseMismatch(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
