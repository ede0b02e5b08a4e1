//! Left-looking sparse LU with threshold partial pivoting.
//!
//! Columns are eliminated sparsest first. Each column is reduced against
//! the already computed columns of `L` in increasing step order, visiting
//! only the steps reachable from its nonzeros.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

const UNSET: usize = usize::MAX;

#[derive(Debug, Clone)]
pub(crate) struct LuFactor {
    m: usize,
    piv_row: Vec<usize>,
    col_of_step: Vec<usize>,
    /// Strictly-below-pivot multipliers per step, keyed by original row.
    l_cols: Vec<Vec<(usize, f64)>>,
    /// Off-diagonal entries of `U` per step, keyed by earlier step.
    u_cols: Vec<Vec<(usize, f64)>>,
    u_diag: Vec<f64>,
}

/// The basis position whose column had no acceptable pivot.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Singular(pub usize);

impl LuFactor {
    pub fn factorize(m: usize, cols: &[&[(usize, f64)]], threshold: f64) -> Result<LuFactor, Singular> {
        assert_eq!(cols.len(), m);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&j| (cols[j].len(), j));

        let mut row_count = vec![0usize; m];
        for col in cols {
            for &(r, _) in col.iter() {
                row_count[r] += 1;
            }
        }

        let mut f = LuFactor {
            m,
            piv_row: Vec::with_capacity(m),
            col_of_step: Vec::with_capacity(m),
            l_cols: Vec::with_capacity(m),
            u_cols: Vec::with_capacity(m),
            u_diag: Vec::with_capacity(m),
        };
        let mut step_of_row = vec![UNSET; m];
        let mut x = vec![0.0; m];
        let mut nz = vec![false; m];
        let mut queued = vec![false; m];
        let mut pattern: Vec<usize> = Vec::new();
        let mut heap = BinaryHeap::new();

        for (k, &j) in order.iter().enumerate() {
            pattern.clear();
            for &(r, v) in cols[j] {
                x[r] += v;
                if !nz[r] {
                    nz[r] = true;
                    pattern.push(r);
                }
                let s = step_of_row[r];
                if s != UNSET && !queued[s] {
                    queued[s] = true;
                    heap.push(Reverse(s));
                }
            }
            while let Some(Reverse(t)) = heap.pop() {
                queued[t] = false;
                let xt = x[f.piv_row[t]];
                if xt == 0.0 {
                    continue;
                }
                for &(r, l) in &f.l_cols[t] {
                    if !nz[r] {
                        nz[r] = true;
                        pattern.push(r);
                    }
                    x[r] -= l * xt;
                    let s = step_of_row[r];
                    if s != UNSET && !queued[s] {
                        queued[s] = true;
                        heap.push(Reverse(s));
                    }
                }
            }

            let mut amax = 0.0f64;
            for &r in &pattern {
                if step_of_row[r] == UNSET {
                    amax = amax.max(x[r].abs());
                }
            }
            if amax <= 1e-13 {
                for &r in &pattern {
                    x[r] = 0.0;
                    nz[r] = false;
                }
                return Err(Singular(j));
            }
            let mut pivot = UNSET;
            for &r in &pattern {
                if step_of_row[r] == UNSET && x[r].abs() >= threshold * amax {
                    let better = pivot == UNSET || (row_count[r], r) < (row_count[pivot], pivot);
                    if better {
                        pivot = r;
                    }
                }
            }
            let pv = x[pivot];
            let mut ucol = Vec::new();
            let mut lcol = Vec::new();
            for &r in &pattern {
                let v = x[r];
                if r == pivot || v == 0.0 {
                    continue;
                }
                if step_of_row[r] != UNSET {
                    ucol.push((step_of_row[r], v));
                } else {
                    lcol.push((r, v / pv));
                }
            }
            ucol.sort_by_key(|&(s, _)| s);
            lcol.sort_by_key(|&(r, _)| r);
            for &r in &pattern {
                x[r] = 0.0;
                nz[r] = false;
            }
            step_of_row[pivot] = k;
            f.piv_row.push(pivot);
            f.col_of_step.push(j);
            f.l_cols.push(lcol);
            f.u_cols.push(ucol);
            f.u_diag.push(pv);
        }
        Ok(f)
    }

    /// Solves `B z = rhs` for a row-indexed `rhs`; returns position-indexed `z`.
    pub fn solve(&self, rhs: &mut [f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.m];
        for t in 0..self.m {
            let wt = rhs[self.piv_row[t]];
            if wt != 0.0 {
                for &(r, l) in &self.l_cols[t] {
                    rhs[r] -= l * wt;
                }
            }
            w[t] = wt;
        }
        let mut out = vec![0.0; self.m];
        for k in (0..self.m).rev() {
            let z = w[k] / self.u_diag[k];
            if z != 0.0 {
                for &(t, v) in &self.u_cols[k] {
                    w[t] -= v * z;
                }
            }
            out[self.col_of_step[k]] = z;
        }
        out
    }

    /// Solves `Bᵀ y = c` for a position-indexed `c`; returns row-indexed `y`.
    pub fn solve_transpose(&self, c: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.m];
        for k in 0..self.m {
            let mut s = c[self.col_of_step[k]];
            for &(t, u) in &self.u_cols[k] {
                s -= u * v[t];
            }
            v[k] = s / self.u_diag[k];
        }
        let mut y = vec![0.0; self.m];
        for t in (0..self.m).rev() {
            let mut s = v[t];
            for &(r, l) in &self.l_cols[t] {
                s -= l * y[r];
            }
            y[self.piv_row[t]] = s;
        }
        y
    }
}
