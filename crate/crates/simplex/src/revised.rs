//! Bounded two-phase revised simplex.

use crate::lu::LuFactor;
use crate::{LpError, LpSolution, StandardFormLp, Status, Tolerances};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
}

struct Eta {
    row: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

enum Outcome {
    Optimal,
    Unbounded(Vec<f64>),
}

/// Working state. Rows with negative right-hand side are negated so the
/// all-artificial starting basis is feasible; `sign` undoes that for duals.
struct Engine {
    m: usize,
    n: usize,
    cols: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    sign: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    head: Vec<usize>,
    lu: Option<LuFactor>,
    etas: Vec<Eta>,
    tol: Tolerances,
    iterations: usize,
}

impl Engine {
    fn new(lp: &StandardFormLp, tol: Tolerances) -> Result<Self, LpError> {
        lp.validate()?;
        let m = lp.rows;
        let n = lp.cols;
        let sign: Vec<f64> = lp.b.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
        let mut cols = lp.columns().cols;
        for col in &mut cols {
            for e in col.iter_mut() {
                e.1 *= sign[e.0];
            }
        }
        for i in 0..m {
            cols.push(vec![(i, 1.0)]);
        }
        let b: Vec<f64> = lp.b.iter().zip(&sign).map(|(b, s)| b * s).collect();
        let mut upper: Vec<f64> = (0..n).map(|j| lp.upper_bound(j)).collect();
        upper.extend(std::iter::repeat_n(f64::INFINITY, m));
        let mut x = vec![0.0; n + m];
        x[n..].copy_from_slice(&b);
        let mut state = vec![VarState::AtLower; n + m];
        for s in &mut state[n..] {
            *s = VarState::Basic;
        }
        Ok(Engine {
            m,
            n,
            cols,
            b,
            sign,
            lower: vec![0.0; n + m],
            upper,
            cost: vec![0.0; n + m],
            x,
            state,
            head: (n..n + m).collect(),
            lu: None,
            etas: Vec::new(),
            tol,
            iterations: 0,
        })
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        let refs: Vec<&[(usize, f64)]> = self.head.iter().map(|&v| self.cols[v].as_slice()).collect();
        let lu = LuFactor::factorize(self.m, &refs, self.tol.lu_threshold)
            .map_err(|s| LpError::Numerical(format!("basis singular at position {}", s.0)))?;
        self.lu = Some(lu);
        self.etas.clear();
        Ok(())
    }

    fn ftran(&self, mut rhs: Vec<f64>) -> Vec<f64> {
        let mut z = self.lu.as_ref().expect("factorized").solve(&mut rhs);
        for eta in &self.etas {
            let zr = z[eta.row] / eta.pivot;
            z[eta.row] = zr;
            if zr != 0.0 {
                for &(i, v) in &eta.entries {
                    z[i] -= v * zr;
                }
            }
        }
        z
    }

    fn btran(&self, mut c: Vec<f64>) -> Vec<f64> {
        for eta in self.etas.iter().rev() {
            let mut s = c[eta.row];
            for &(i, v) in &eta.entries {
                s -= v * c[i];
            }
            c[eta.row] = s / eta.pivot;
        }
        self.lu.as_ref().expect("factorized").solve_transpose(&c)
    }

    fn column_dense(&self, j: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.m];
        for &(r, a) in &self.cols[j] {
            v[r] = a;
        }
        v
    }

    fn recompute_basic(&mut self) {
        let mut rhs = self.b.clone();
        for j in 0..self.n + self.m {
            if self.state[j] != VarState::Basic && self.x[j] != 0.0 {
                for &(r, a) in &self.cols[j] {
                    rhs[r] -= a * self.x[j];
                }
            }
        }
        let xb = self.ftran(rhs);
        for (i, &v) in self.head.iter().enumerate() {
            self.x[v] = xb[i];
        }
    }

    fn duals(&self) -> Vec<f64> {
        let cb: Vec<f64> = self.head.iter().map(|&v| self.cost[v]).collect();
        self.btran(cb)
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        self.cost[j] - self.cols[j].iter().map(|&(r, a)| a * y[r]).sum::<f64>()
    }

    fn run(&mut self) -> Result<Outcome, LpError> {
        let mut degenerate = 0usize;
        let mut bland = false;
        let total = self.n + self.m;
        loop {
            if self.iterations >= self.tol.max_iterations {
                return Err(LpError::IterationLimit(self.tol.max_iterations));
            }
            if self.lu.is_none() || self.etas.len() >= self.tol.refactor_every {
                self.refactor()?;
                self.recompute_basic();
            }
            let y = self.duals();

            let mut entering: Option<(usize, f64)> = None;
            for j in 0..total {
                let st = self.state[j];
                if st == VarState::Basic || self.upper[j] <= self.lower[j] {
                    continue;
                }
                let d = self.reduced_cost(j, &y);
                let score = match st {
                    VarState::AtLower if d < -self.tol.optimality => -d,
                    VarState::AtUpper if d > self.tol.optimality => d,
                    _ => continue,
                };
                if bland {
                    entering = Some((j, score));
                    break;
                }
                if entering.is_none_or(|(_, s)| score > s) {
                    entering = Some((j, score));
                }
            }
            let Some((q, _)) = entering else {
                return Ok(Outcome::Optimal);
            };
            let dir = if self.state[q] == VarState::AtLower { 1.0 } else { -1.0 };
            let alpha = self.ftran(self.column_dense(q));

            let flip = self.upper[q] - self.lower[q];
            let leave = if bland { self.ratio_textbook(&alpha, dir) } else { self.ratio_harris(&alpha, dir) };
            let (theta, leaving) = match leave {
                Some((r, t)) if t < flip => (t, Some(r)),
                _ if flip.is_finite() => (flip, None),
                _ => {
                    let mut ray = vec![0.0; total];
                    ray[q] = dir;
                    for (i, &v) in self.head.iter().enumerate() {
                        ray[v] = -dir * alpha[i];
                    }
                    return Ok(Outcome::Unbounded(ray));
                }
            };

            if theta != 0.0 {
                for (i, &v) in self.head.iter().enumerate() {
                    if alpha[i] != 0.0 {
                        self.x[v] -= theta * dir * alpha[i];
                    }
                }
                self.x[q] += dir * theta;
            }
            match leaving {
                None => {
                    if dir > 0.0 {
                        self.state[q] = VarState::AtUpper;
                        self.x[q] = self.upper[q];
                    } else {
                        self.state[q] = VarState::AtLower;
                        self.x[q] = self.lower[q];
                    }
                }
                Some(r) => {
                    let v = self.head[r];
                    if dir * alpha[r] > 0.0 {
                        self.state[v] = VarState::AtLower;
                        self.x[v] = self.lower[v];
                    } else {
                        self.state[v] = VarState::AtUpper;
                        self.x[v] = self.upper[v];
                    }
                    self.head[r] = q;
                    self.state[q] = VarState::Basic;
                    let entries = alpha
                        .iter()
                        .enumerate()
                        .filter(|&(i, a)| i != r && a.abs() > 1e-14)
                        .map(|(i, &a)| (i, a))
                        .collect();
                    self.etas.push(Eta { row: r, pivot: alpha[r], entries });
                }
            }
            self.iterations += 1;

            if theta <= 1e-12 {
                degenerate += 1;
                if degenerate > self.tol.stall_limit {
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = false;
            }
        }
    }

    /// Two-pass ratio test: bound the step with relaxed bounds, then take
    /// the largest pivot among rows blocking within that step.
    fn ratio_harris(&self, alpha: &[f64], dir: f64) -> Option<(usize, f64)> {
        let delta = self.tol.feasibility;
        let piv = self.tol.pivot;
        let mut theta_max = f64::INFINITY;
        for (i, &v) in self.head.iter().enumerate() {
            let a = dir * alpha[i];
            if a > piv {
                theta_max = theta_max.min((self.x[v] - self.lower[v] + delta) / a);
            } else if a < -piv && self.upper[v].is_finite() {
                theta_max = theta_max.min((self.upper[v] - self.x[v] + delta) / -a);
            }
        }
        if !theta_max.is_finite() {
            return None;
        }
        let mut best: Option<(usize, f64, f64)> = None;
        for (i, &v) in self.head.iter().enumerate() {
            let a = dir * alpha[i];
            let exact = if a > piv {
                (self.x[v] - self.lower[v]) / a
            } else if a < -piv && self.upper[v].is_finite() {
                (self.upper[v] - self.x[v]) / -a
            } else {
                continue;
            };
            if exact <= theta_max {
                let better = match best {
                    None => true,
                    Some((bi, _, ba)) => a.abs() > ba || (a.abs() == ba && self.head[i] < self.head[bi]),
                };
                if better {
                    best = Some((i, exact.max(0.0), a.abs()));
                }
            }
        }
        best.map(|(i, t, _)| (i, t))
    }

    /// Minimum-ratio test with ties broken by smallest variable index.
    fn ratio_textbook(&self, alpha: &[f64], dir: f64) -> Option<(usize, f64)> {
        let piv = self.tol.pivot;
        let mut best: Option<(usize, f64)> = None;
        for (i, &v) in self.head.iter().enumerate() {
            let a = dir * alpha[i];
            let ratio = if a > piv {
                (self.x[v] - self.lower[v]) / a
            } else if a < -piv && self.upper[v].is_finite() {
                (self.upper[v] - self.x[v]) / -a
            } else {
                continue;
            }
            .max(0.0);
            let better = match best {
                None => true,
                Some((bi, bt)) => ratio < bt - 1e-12 || (ratio <= bt + 1e-12 && v < self.head[bi]),
            };
            if better {
                best = Some((i, ratio));
            }
        }
        best
    }

    /// Runs to optimality, refactoring and re-pricing until a fresh
    /// factorization confirms the basis.
    fn optimize(&mut self) -> Result<Outcome, LpError> {
        for _ in 0..8 {
            let before = self.iterations;
            let out = self.run()?;
            if let Outcome::Unbounded(_) = out {
                return Ok(out);
            }
            self.refactor()?;
            self.recompute_basic();
            if self.iterations == before {
                return Ok(Outcome::Optimal);
            }
        }
        Ok(Outcome::Optimal)
    }

    fn objective(&self) -> f64 {
        self.x.iter().zip(&self.cost).map(|(x, c)| x * c).sum()
    }

    fn phase_one(&mut self) -> Result<bool, LpError> {
        for j in 0..self.n {
            self.cost[j] = 0.0;
        }
        for j in self.n..self.n + self.m {
            self.cost[j] = 1.0;
        }
        self.optimize()?;
        let scale = 1.0 + self.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        Ok(self.objective() <= self.tol.feasibility * scale)
    }

    fn start_phase_two(&mut self, c: &[f64]) {
        for j in self.n..self.n + self.m {
            self.upper[j] = 0.0;
            self.cost[j] = 0.0;
            if self.state[j] != VarState::Basic {
                self.x[j] = 0.0;
                self.state[j] = VarState::AtLower;
            }
        }
        self.cost[..self.n].copy_from_slice(c);
    }

    fn farkas(&self) -> Vec<f64> {
        let y = self.duals();
        y.iter().zip(&self.sign).map(|(y, s)| y * s).collect()
    }

    fn extract(&self, lp: &StandardFormLp, c: &[f64], status: Status) -> Result<LpSolution, LpError> {
        let mut primal: Vec<f64> = self.x[..self.n].to_vec();
        let slack = 10.0 * self.tol.feasibility * (1.0 + primal.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        for (j, v) in primal.iter_mut().enumerate() {
            let u = lp.upper_bound(j);
            if *v < 0.0 {
                if *v < -slack {
                    return Err(LpError::Numerical(format!("variable {j} ended at {v}")));
                }
                *v = 0.0;
            } else if *v > u {
                if *v > u + slack {
                    return Err(LpError::Numerical(format!("variable {j} exceeds its bound")));
                }
                *v = u;
            }
        }
        let y = self.duals();
        let duals: Vec<f64> = y.iter().zip(&self.sign).map(|(y, s)| y * s).collect();
        let aty = lp.transpose_activity(&duals);
        let reduced_costs: Vec<f64> = c.iter().zip(aty).map(|(c, a)| c - a).collect();
        let objective = c.iter().zip(&primal).map(|(c, x)| c * x).sum();
        Ok(LpSolution {
            status,
            primal,
            duals,
            reduced_costs,
            objective,
            farkas: None,
            ray: None,
            iterations: self.iterations,
        })
    }

    fn failed(&self, status: Status) -> LpSolution {
        LpSolution {
            status,
            primal: self.x[..self.n].to_vec(),
            duals: vec![0.0; self.m],
            reduced_costs: vec![0.0; self.n],
            objective: if status == Status::Infeasible { f64::INFINITY } else { f64::NEG_INFINITY },
            farkas: None,
            ray: None,
            iterations: self.iterations,
        }
    }

    /// Phase one then phase two with objective `c`. `Err(sol)` carries a
    /// finished non-optimal solution.
    fn solve_primary(&mut self, lp: &StandardFormLp, c: &[f64]) -> Result<Result<LpSolution, LpSolution>, LpError> {
        if !self.phase_one()? {
            let mut sol = self.failed(Status::Infeasible);
            sol.farkas = Some(self.farkas());
            return Ok(Err(sol));
        }
        self.start_phase_two(c);
        match self.optimize()? {
            Outcome::Optimal => Ok(Ok(self.extract(lp, c, Status::Optimal)?)),
            Outcome::Unbounded(ray) => {
                let mut sol = self.failed(Status::Unbounded);
                sol.ray = Some(ray[..self.n].to_vec());
                Ok(Err(sol))
            }
        }
    }
}

/// Solves `lp` to optimality or reports infeasibility / unboundedness.
pub fn solve(lp: &StandardFormLp, tol: &Tolerances) -> Result<LpSolution, LpError> {
    let mut engine = Engine::new(lp, *tol)?;
    Ok(match engine.solve_primary(lp, &lp.c)? {
        Ok(sol) | Err(sol) => sol,
    })
}

/// Outcome of a two-objective solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LexSolution {
    /// Primary duals and reduced costs; `primal` and `objective` refer to
    /// the final point chosen by the secondary stage.
    pub primary: LpSolution,
    /// Secondary solve on the primary optimal face.
    pub secondary: LpSolution,
    /// Number of variables pinned to a bound to define the face.
    pub pinned: usize,
}

/// Minimizes `c2` over the optimal face of `lp`.
///
/// The face is cut out by pinning every nonbasic variable whose primary
/// reduced cost exceeds `tol.lex_face` at its current bound. Because
/// `c·x = yᵀb + dᵀx`, this is exactly the set of primary optimizers up to
/// the face width, and the primary duals stay complementary to the result.
pub fn solve_lexicographic(lp: &StandardFormLp, c2: &[f64], tol: &Tolerances) -> Result<LexSolution, LpError> {
    if c2.len() != lp.cols {
        return Err(LpError::Malformed("secondary objective length mismatch".into()));
    }
    if let Some(j) = c2.iter().position(|v| !v.is_finite()) {
        return Err(LpError::Malformed(format!("c2[{j}] is not finite")));
    }
    let mut engine = Engine::new(lp, *tol)?;
    let mut primary = match engine.solve_primary(lp, &lp.c)? {
        Ok(sol) => sol,
        Err(sol) => {
            return Ok(LexSolution { secondary: sol.clone(), primary: sol, pinned: 0 });
        }
    };
    let mut pinned = 0;
    for j in 0..engine.n {
        let d = primary.reduced_costs[j];
        match engine.state[j] {
            VarState::AtLower if d > tol.lex_face => {
                engine.upper[j] = engine.lower[j];
                pinned += 1;
            }
            VarState::AtUpper if d < -tol.lex_face => {
                engine.lower[j] = engine.upper[j];
                pinned += 1;
            }
            _ => {}
        }
    }
    engine.cost[..engine.n].copy_from_slice(c2);
    let secondary = match engine.optimize()? {
        Outcome::Optimal => {
            let mut face = lp.clone();
            let mut upper: Vec<f64> = (0..lp.cols).map(|j| lp.upper_bound(j)).collect();
            for j in 0..lp.cols {
                if engine.upper[j] == engine.lower[j] {
                    upper[j] = engine.upper[j];
                }
            }
            face.upper = Some(upper);
            engine.extract(&face, c2, Status::Optimal)?
        }
        Outcome::Unbounded(ray) => {
            let mut sol = engine.failed(Status::Unbounded);
            sol.ray = Some(ray[..engine.n].to_vec());
            sol
        }
    };
    if secondary.is_optimal() {
        primary.primal = secondary.primal.clone();
        primary.objective = lp.objective(&primary.primal);
        primary.iterations = secondary.iterations;
    }
    Ok(LexSolution { primary, secondary, pinned })
}
