//! Sparse revised simplex for equality-form linear programs.
//!
//! Problems are `min c·x` subject to `A x = b`, `0 ≤ x ≤ u`. The solver is a
//! bounded two-phase revised simplex over an LU-factored basis with
//! product-form updates. Optimal solutions carry row duals and reduced costs;
//! infeasible ones carry a Farkas ray taken from the phase-one duals.
//!
//! [`dense::solve_dense`] is a slow tableau implementation kept as a
//! cross-check.

pub mod dense;
mod lu;
mod revised;
pub mod text;

pub use revised::{solve, solve_lexicographic, LexSolution};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("malformed LP: {0}")]
    Malformed(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("iteration limit of {0} reached")]
    IterationLimit(usize),
}

/// Solver tolerances. One record shared by every solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub feasibility: f64,
    pub optimality: f64,
    /// Reduced-cost width defining the optimal face for lexicographic solves.
    pub lex_face: f64,
    /// Smallest pivot magnitude accepted by the ratio test.
    pub pivot: f64,
    /// Relative threshold for LU partial pivoting.
    pub lu_threshold: f64,
    pub refactor_every: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub stall_limit: usize,
    pub max_iterations: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feasibility: 1e-9,
            optimality: 1e-9,
            lex_face: 1e-9,
            pivot: 1e-9,
            lu_threshold: 0.1,
            refactor_every: 64,
            stall_limit: 50,
            max_iterations: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

/// `min c·x` s.t. `A x = b`, `0 ≤ x ≤ upper`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StandardFormLp {
    pub rows: usize,
    pub cols: usize,
    /// `(row, col, value)` triplets.
    pub entries: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    /// Per-variable upper bounds; `None` means all unbounded above.
    pub upper: Option<Vec<f64>>,
    pub c: Vec<f64>,
}

/// Compressed sparse columns.
#[derive(Debug, Clone)]
pub(crate) struct Columns {
    pub cols: Vec<Vec<(usize, f64)>>,
}

impl StandardFormLp {
    pub fn new(rows: usize, cols: usize) -> Self {
        StandardFormLp { rows, cols, entries: Vec::new(), b: vec![0.0; rows], upper: None, c: vec![0.0; cols] }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        self.entries.push((row, col, value));
    }

    pub fn upper_bound(&self, j: usize) -> f64 {
        self.upper.as_ref().map_or(f64::INFINITY, |u| u[j])
    }

    pub fn validate(&self) -> Result<(), LpError> {
        if self.b.len() != self.rows {
            return Err(LpError::Malformed(format!("b has {} entries for {} rows", self.b.len(), self.rows)));
        }
        if self.c.len() != self.cols {
            return Err(LpError::Malformed(format!("c has {} entries for {} columns", self.c.len(), self.cols)));
        }
        if let Some(u) = &self.upper {
            if u.len() != self.cols {
                return Err(LpError::Malformed("upper bound length mismatch".into()));
            }
            if let Some(j) = u.iter().position(|&v| v.is_nan() || v < 0.0) {
                return Err(LpError::Malformed(format!("upper bound of column {j} is negative")));
            }
        }
        if let Some(i) = self.b.iter().position(|v| !v.is_finite()) {
            return Err(LpError::Malformed(format!("b[{i}] is not finite")));
        }
        if let Some(j) = self.c.iter().position(|v| !v.is_finite()) {
            return Err(LpError::Malformed(format!("c[{j}] is not finite")));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &(r, c, v) in &self.entries {
            if r >= self.rows || c >= self.cols {
                return Err(LpError::Malformed(format!("entry ({r},{c}) out of range")));
            }
            if !v.is_finite() {
                return Err(LpError::Malformed(format!("entry ({r},{c}) is not finite")));
            }
            if !seen.insert((r, c)) {
                return Err(LpError::Malformed(format!("duplicate entry ({r},{c})")));
            }
        }
        Ok(())
    }

    pub(crate) fn columns(&self) -> Columns {
        let mut cols = vec![Vec::new(); self.cols];
        for &(r, c, v) in &self.entries {
            if v != 0.0 {
                cols[c].push((r, v));
            }
        }
        for col in &mut cols {
            col.sort_by_key(|&(r, _)| r);
        }
        Columns { cols }
    }

    /// `A x`.
    pub fn activity(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        for &(r, c, v) in &self.entries {
            out[r] += v * x[c];
        }
        out
    }

    /// `yᵀ A`.
    pub fn transpose_activity(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for &(r, c, v) in &self.entries {
            out[c] += v * y[r];
        }
        out
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// Largest violation of `A x = b` and of the bounds.
    pub fn primal_residual(&self, x: &[f64]) -> f64 {
        let ax = self.activity(x);
        let rows = ax.iter().zip(&self.b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let bounds = x.iter().enumerate().map(|(j, &v)| (-v).max(v - self.upper_bound(j)).max(0.0)).fold(0.0, f64::max);
        rows.max(bounds)
    }

    /// Dual objective `bᵀy + Σ u_j min(0, d_j)` for row multipliers `y`.
    pub fn dual_objective(&self, y: &[f64]) -> f64 {
        let d = self.reduced_costs(y);
        let mut total: f64 = self.b.iter().zip(y).map(|(b, y)| b * y).sum();
        for (j, dj) in d.iter().enumerate() {
            let u = self.upper_bound(j);
            if *dj < 0.0 && u.is_finite() {
                total += u * dj;
            }
        }
        total
    }

    pub fn reduced_costs(&self, y: &[f64]) -> Vec<f64> {
        let aty = self.transpose_activity(y);
        self.c.iter().zip(aty).map(|(c, a)| c - a).collect()
    }

    /// Amount by which `y` proves infeasibility: `yᵀb − Σ_j u_j max(0, (yᵀA)_j)`.
    ///
    /// Positive means `y` is a valid Farkas ray, provided `(yᵀA)_j` is not
    /// positive on columns without an upper bound; such columns are reported
    /// through the second component as the largest offending value.
    pub fn farkas_margin(&self, y: &[f64]) -> (f64, f64) {
        let aty = self.transpose_activity(y);
        let mut margin: f64 = self.b.iter().zip(y).map(|(b, y)| b * y).sum();
        let mut worst = 0.0f64;
        for (j, a) in aty.iter().enumerate() {
            let u = self.upper_bound(j);
            if *a > 0.0 {
                if u.is_finite() {
                    margin -= u * a;
                } else {
                    worst = worst.max(*a);
                }
            }
        }
        (margin, worst)
    }
}

/// Result of a solve. `duals` are row multipliers in the caller's row
/// orientation, so `reduced_costs = c − Aᵀ duals`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: Status,
    pub primal: Vec<f64>,
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    /// Row vector `y` with `yᵀb > 0` and `yᵀA ≤ 0` on unbounded columns.
    pub farkas: Option<Vec<f64>>,
    /// Improving direction when unbounded.
    pub ray: Option<Vec<f64>>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}
