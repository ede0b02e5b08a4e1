//! Dense tableau simplex with Bland's rule.
//!
//! Slow and simple, meant for cross-checking the sparse solver on small
//! instances. Upper bounds become explicit rows with slack columns.

use crate::{LpError, StandardFormLp, Status};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseOutcome {
    pub status: Status,
    pub objective: f64,
    pub primal: Vec<f64>,
}

const EPS: f64 = 1e-11;

struct Tableau {
    rows: usize,
    width: usize,
    t: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * (self.width + 1) + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.width)
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let w = self.width + 1;
        let p = self.t[r * w + q];
        for j in 0..w {
            self.t[r * w + j] /= p;
        }
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.t[i * w + q];
            if f != 0.0 {
                for j in 0..w {
                    self.t[i * w + j] -= f * self.t[r * w + j];
                }
            }
        }
        self.basis[r] = q;
    }

    /// Minimizes `cost` over the columns `allowed`. Returns false if unbounded.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> bool {
        loop {
            let mut entering = None;
            for j in 0..allowed {
                if self.basis.contains(&j) {
                    continue;
                }
                let mut d = cost[j];
                for i in 0..self.rows {
                    d -= cost[self.basis[i]] * self.at(i, j);
                }
                if d < -EPS {
                    entering = Some(j);
                    break;
                }
            }
            let Some(q) = entering else { return true };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, q);
                if a > EPS {
                    let ratio = self.rhs(i) / a;
                    let better = match leave {
                        None => true,
                        Some((bi, br)) => ratio < br - EPS || (ratio <= br + EPS && self.basis[i] < self.basis[bi]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else { return false };
            self.pivot(r, q);
        }
    }
}

/// Solves `lp` with a dense two-phase tableau.
pub fn solve_dense(lp: &StandardFormLp) -> Result<DenseOutcome, LpError> {
    lp.validate()?;
    let n = lp.cols;
    let bounded: Vec<usize> = (0..n).filter(|&j| lp.upper_bound(j).is_finite()).collect();
    let rows = lp.rows + bounded.len();
    let structural = n + bounded.len();
    let width = structural + rows;
    let mut t = vec![0.0; rows * (width + 1)];
    let w = width + 1;
    for &(r, c, v) in &lp.entries {
        t[r * w + c] += v;
    }
    for i in 0..lp.rows {
        t[i * w + width] = lp.b[i];
    }
    for (k, &j) in bounded.iter().enumerate() {
        let r = lp.rows + k;
        t[r * w + j] = 1.0;
        t[r * w + n + k] = 1.0;
        t[r * w + width] = lp.upper_bound(j);
    }
    for i in 0..rows {
        if t[i * w + width] < 0.0 {
            for j in 0..w {
                t[i * w + j] = -t[i * w + j];
            }
        }
        t[i * w + structural + i] = 1.0;
    }
    let mut tab = Tableau { rows, width, t, basis: (structural..width).collect() };

    let mut phase1 = vec![0.0; width];
    for c in &mut phase1[structural..] {
        *c = 1.0;
    }
    tab.optimize(&phase1, width);
    let infeas: f64 = (0..rows).filter(|&i| tab.basis[i] >= structural).map(|i| tab.rhs(i)).sum();
    if infeas > 1e-9 {
        return Ok(DenseOutcome { status: Status::Infeasible, objective: f64::INFINITY, primal: vec![] });
    }
    for i in 0..rows {
        if tab.basis[i] >= structural {
            if let Some(q) = (0..structural).find(|&j| tab.at(i, j).abs() > 1e-9 && !tab.basis.contains(&j)) {
                tab.pivot(i, q);
            }
        }
    }
    let mut cost = vec![0.0; width];
    cost[..n].copy_from_slice(&lp.c);
    // Artificials stuck in the basis sit on redundant rows at value zero.
    if !tab.optimize(&cost, structural) {
        return Ok(DenseOutcome { status: Status::Unbounded, objective: f64::NEG_INFINITY, primal: vec![] });
    }
    let mut primal = vec![0.0; n];
    for i in 0..rows {
        if tab.basis[i] < n {
            primal[tab.basis[i]] = tab.rhs(i);
        }
    }
    Ok(DenseOutcome { status: Status::Optimal, objective: lp.objective(&primal), primal })
}
