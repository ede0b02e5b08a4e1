//! The optimal embedding problem as a linear program over stopped and
//! continuing mass, its dual certificate, and the checks built on it.
//!
//! Variables per state `s`: `σ(s)`, the mass stopped at `s`, and (for
//! non-terminal `s`) `c(s)`, the mass passing through `s` without
//! stopping. Rows: one conservation row per state,
//! `σ(s) + c(s) − Σ_parents q·c(parent) = root mass`, and one marginal row
//! per target level. In exact mode `σ` is omitted at levels outside the
//! target support.
//!
//! With `φ` the conservation multipliers and `ψ` the marginal ones, dual
//! feasibility reads `φ(s) + ψ(x) ≤ γ(s)` and `φ(s) ≤ Σ q·φ(child)`: `φ`
//! is a submartingale along the walk, with equality wherever mass flows.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use lattice_simplex::{solve_lexicographic, LpSolution, StandardFormLp, Status};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::Config;
use crate::costs::CostFunctional;
use crate::error::{Error, Result};
use crate::lattice::{enumerate_reachable, AugmentedState, Feature, Kernel, LatticeSpec, StateGraph, Tracked};
use crate::measures::{convex_order, DiscreteMeasure};
use crate::stopping::RandomizedStoppingTime;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Exact,
    /// Total-variation budget for the stopped law.
    Soft(f64),
}

#[derive(Debug, Clone)]
pub struct EmbeddingProblem {
    pub spec: LatticeSpec,
    pub start: DiscreteMeasure,
    pub target: DiscreteMeasure,
    pub cost: CostFunctional,
    pub mode: Mode,
    pub secondary: bool,
    pub config: Config,
}

impl EmbeddingProblem {
    pub fn new(spec: LatticeSpec, start: DiscreteMeasure, target: DiscreteMeasure, cost: CostFunctional) -> Self {
        EmbeddingProblem { spec, start, target, cost, mode: Mode::Exact, secondary: false, config: Config::default() }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_secondary(mut self, on: bool) -> Self {
        self.secondary = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.cost.check_features(&self.spec)?;
        if self.cost.steps() != self.spec.steps
            || self.cost.step_size() != self.spec.step_size
            || self.cost.time_step() != self.spec.time_step
        {
            return Err(Error::Cost("cost was built for a different lattice".into()));
        }
        if let Mode::Soft(eps) = self.mode {
            if !(0.0..=1.0).contains(&eps) {
                return Err(Error::Measure(format!("soft budget must lie in [0,1], got {eps}")));
            }
        }
        Ok(())
    }

    /// Whether the secondary objective will be optimized.
    pub fn uses_secondary(&self) -> bool {
        self.secondary && self.cost.has_secondary()
    }

    /// Reads the problem-file form:
    /// `{"lattice": {"steps", "step_size", "kernel", "tracked", "time_step"?},
    ///   "start", "target", "cost", "mode", "secondary"}`.
    pub fn from_json(text: &str) -> Result<EmbeddingProblem> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_value(&v)
    }

    pub fn from_value(v: &Value) -> Result<EmbeddingProblem> {
        let obj = v.as_object().ok_or_else(|| Error::Parse("problem must be an object".into()))?;
        let field = |k: &str| obj.get(k).ok_or_else(|| Error::Parse(format!("missing field `{k}`")));
        let spec = lattice_from_json(field("lattice")?)?;
        let start: DiscreteMeasure =
            serde_json::from_value(field("start")?.clone()).map_err(|e| Error::Parse(format!("start: {e}")))?;
        let target: DiscreteMeasure =
            serde_json::from_value(field("target")?.clone()).map_err(|e| Error::Parse(format!("target: {e}")))?;
        let cost = CostFunctional::from_json(field("cost")?, &spec)?;
        let mode = match obj.get("mode") {
            None => Mode::Exact,
            Some(Value::String(s)) if s == "exact" => Mode::Exact,
            Some(Value::Object(m)) if m.len() == 1 && m.contains_key("soft") => {
                Mode::Soft(m["soft"].as_f64().ok_or_else(|| Error::Parse("soft budget must be a number".into()))?)
            }
            Some(other) => return Err(Error::Parse(format!("unknown mode {other}"))),
        };
        let secondary = match obj.get("secondary") {
            None => false,
            Some(b) => b.as_bool().ok_or_else(|| Error::Parse("secondary must be a boolean".into()))?,
        };
        if let Some(k) =
            obj.keys().find(|k| !["lattice", "start", "target", "cost", "mode", "secondary"].contains(&k.as_str()))
        {
            return Err(Error::Parse(format!("unexpected field `{k}`")));
        }
        let p = EmbeddingProblem { mode, secondary, ..EmbeddingProblem::new(spec, start, target, cost) };
        p.validate()?;
        Ok(p)
    }
}

fn lattice_from_json(v: &Value) -> Result<LatticeSpec> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Raw {
        steps: usize,
        step_size: f64,
        #[serde(default = "symmetric")]
        kernel: Kernel,
        #[serde(default)]
        tracked: Vec<Feature>,
        time_step: Option<f64>,
        #[serde(default)]
        start_support: Vec<i64>,
    }
    fn symmetric() -> Kernel {
        Kernel::Symmetric
    }
    let raw: Raw = serde_json::from_value(v.clone()).map_err(|e| Error::Parse(format!("lattice: {e}")))?;
    let spec = LatticeSpec {
        steps: raw.steps,
        step_size: raw.step_size,
        time_step: raw.time_step.unwrap_or(raw.step_size * raw.step_size),
        kernel: raw.kernel,
        tracked: Tracked::from_features(&raw.tracked),
        start_support: raw.start_support,
    };
    spec.validate()?;
    Ok(spec)
}

/// A rooted flow network over augmented states: either the state graph or
/// the full path tree.
struct Flow<'a> {
    states: &'a [AugmentedState],
    children: &'a [Vec<(usize, f64)>],
    roots: &'a [(usize, f64)],
    terminal: Vec<bool>,
}

impl<'a> Flow<'a> {
    fn of_graph(g: &'a StateGraph) -> Self {
        Flow {
            states: &g.states,
            children: &g.children,
            roots: &g.roots,
            terminal: (0..g.len()).map(|i| g.is_terminal(i)).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SoftColumns {
    pub plus: BTreeMap<i64, usize>,
    pub minus: BTreeMap<i64, usize>,
    pub budget_row: usize,
    pub balance_row: usize,
}

/// The assembled program with the column and row of every variable.
#[derive(Debug, Clone)]
pub struct AssembledLp {
    pub lp: StandardFormLp,
    /// Secondary objective, when the problem asks for one.
    pub secondary: Option<Vec<f64>>,
    /// `σ` column per state; `None` where stopping is not allowed.
    pub stop_col: Vec<Option<usize>>,
    /// `c` column per non-terminal state.
    pub cont_col: Vec<Option<usize>>,
    /// Marginal row per level. Conservation rows are `0..states`.
    pub marginal_row: BTreeMap<i64, usize>,
    pub soft: Option<SoftColumns>,
}

fn assemble(flow: &Flow<'_>, problem: &EmbeddingProblem) -> AssembledLp {
    let n = flow.states.len();
    let support: BTreeSet<i64> = problem.target.support().into_iter().collect();
    let mut levels: BTreeSet<i64> = support.clone();
    let soft = matches!(problem.mode, Mode::Soft(_));
    if soft {
        levels.extend(flow.states.iter().map(|s| s.x));
    }
    let marginal_row: BTreeMap<i64, usize> = levels.iter().enumerate().map(|(r, &y)| (y, n + r)).collect();
    let mut rows = n + marginal_row.len();
    let mut entries = Vec::new();
    let mut c = Vec::new();
    let mut c2 = Vec::new();
    let mut col = 0usize;
    let mut stop_col = vec![None; n];
    let mut cont_col = vec![None; n];
    for (v, s) in flow.states.iter().enumerate() {
        if soft || support.contains(&s.x) {
            entries.push((v, col, 1.0));
            entries.push((marginal_row[&s.x], col, 1.0));
            c.push(problem.cost.gamma(s));
            c2.push(problem.cost.gamma2(s).unwrap_or(0.0));
            stop_col[v] = Some(col);
            col += 1;
        }
        if !flow.terminal[v] {
            entries.push((v, col, 1.0));
            for &(w, q) in &flow.children[v] {
                entries.push((w, col, -q));
            }
            c.push(0.0);
            c2.push(0.0);
            cont_col[v] = Some(col);
            col += 1;
        }
    }
    let mut b = vec![0.0; rows];
    for &(r, w) in flow.roots {
        b[r] += w;
    }
    for (&y, &r) in &marginal_row {
        b[r] = problem.target.weight(y);
    }
    let mut soft_cols = None;
    let mut upper = None;
    if let Mode::Soft(eps) = problem.mode {
        let budget_row = rows;
        let balance_row = rows + 1;
        rows += 2;
        b.push(eps);
        b.push(0.0);
        let (mut plus, mut minus) = (BTreeMap::new(), BTreeMap::new());
        for (&y, &r) in &marginal_row {
            // Σσ − s⁺ + s⁻ = μ(y): s⁺ is excess stopped mass, s⁻ a shortfall.
            for (sign, map) in [(-1.0, &mut plus), (1.0, &mut minus)] {
                entries.push((r, col, sign));
                entries.push((budget_row, col, 0.5));
                entries.push((balance_row, col, -sign));
                c.push(0.0);
                c2.push(0.0);
                map.insert(y, col);
                col += 1;
            }
        }
        entries.push((budget_row, col, 1.0));
        c.push(0.0);
        c2.push(0.0);
        col += 1;
        soft_cols = Some(SoftColumns { plus, minus, budget_row, balance_row });
        upper = None::<Vec<f64>>;
    }
    let lp = StandardFormLp { rows, cols: col, entries, b, upper, c };
    AssembledLp {
        lp,
        secondary: problem.uses_secondary().then_some(c2),
        stop_col,
        cont_col,
        marginal_row,
        soft: soft_cols,
    }
}

/// Builds the state graph and the program on it.
pub fn assemble_lp(problem: &EmbeddingProblem) -> Result<(Arc<StateGraph>, AssembledLp)> {
    problem.validate()?;
    let g = Arc::new(enumerate_reachable(&problem.spec, &problem.start, problem.config.state_cap)?);
    let a = assemble(&Flow::of_graph(&g), problem);
    Ok((g, a))
}

/// Multipliers of the soft-mode rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftDual {
    /// Budget row multiplier; nonpositive.
    pub beta: f64,
    /// Balance row multiplier.
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate {
    /// Per level of the graph and of the target support.
    pub psi: BTreeMap<i64, f64>,
    /// Per graph state.
    pub phi: Vec<f64>,
    pub soft: Option<SoftDual>,
}

impl DualCertificate {
    /// `γ(s) − φ(s) − ψ(x(s))` per state.
    pub fn slack(&self, graph: &StateGraph, cost: &CostFunctional) -> Vec<f64> {
        graph
            .states
            .iter()
            .zip(&self.phi)
            .map(|(s, f)| cost.gamma(s) - f - self.psi.get(&s.x).copied().unwrap_or(0.0))
            .collect()
    }

    /// `E_λ[φ(start)] + ∫ψ dμ + ε·β`.
    pub fn objective(&self, graph: &StateGraph, target: &DiscreteMeasure, mode: Mode) -> f64 {
        let start: f64 = graph.roots.iter().map(|&(r, w)| w * self.phi[r]).sum();
        let levels: f64 = target.atoms().iter().map(|&(y, w)| w * self.psi.get(&y).copied().unwrap_or(0.0)).sum();
        let budget = match (mode, self.soft) {
            (Mode::Soft(eps), Some(d)) => eps * d.beta,
            _ => 0.0,
        };
        start + levels + budget
    }
}

#[derive(Debug, Clone)]
pub struct OptimalSolution {
    pub xi: RandomizedStoppingTime,
    pub objective: f64,
    pub secondary_objective: Option<f64>,
    pub certificate: DualCertificate,
    pub gap: f64,
    /// Total-variation distance of the stopped law from the target.
    pub deviation: f64,
    pub iterations: usize,
}

/// Why an embedding problem has no solution.
#[derive(Debug, Clone)]
pub struct Infeasibility {
    /// Row multipliers `y` with `yᵀb > 0` and `yᵀA ≤ 0`.
    pub farkas: Vec<f64>,
    /// `yᵀb − Σ u_j max(0, (yᵀA)_j)` on the assembled program.
    pub margin: f64,
    /// Largest `(yᵀA)_j` on columns without an upper bound.
    pub worst_column: f64,
    /// Heuristic explanation.
    pub hint: String,
}

/// Probability that the free walk never visits a target level, including
/// at time 0, within the horizon.
fn avoidance_probability(g: &StateGraph, target: &DiscreteMeasure) -> f64 {
    let support: BTreeSet<i64> = target.support().into_iter().collect();
    let mut mass = vec![0.0; g.len()];
    for &(r, w) in &g.roots {
        mass[r] += w;
    }
    let mut avoided = 0.0;
    for i in 0..g.len() {
        if support.contains(&g.states[i].x) || mass[i] == 0.0 {
            continue;
        }
        if g.is_terminal(i) {
            avoided += mass[i];
        }
        for &(j, q) in &g.children[i] {
            mass[j] += mass[i] * q;
        }
    }
    avoided
}

fn infeasibility_hint(g: &StateGraph, problem: &EmbeddingProblem) -> String {
    let mut hints = Vec::new();
    let levels: BTreeSet<i64> = g.levels().into_iter().collect();
    let unreachable: Vec<i64> = problem.target.support().into_iter().filter(|y| !levels.contains(y)).collect();
    if !unreachable.is_empty() {
        hints.push(format!(
            "target levels {unreachable:?} are not reachable within {} steps (horizon or parity)",
            problem.spec.steps
        ));
    }
    if problem.spec.kernel.is_martingale() && !convex_order(&problem.start, &problem.target) {
        hints.push("start law is not below the target in convex order".to_string());
    }
    if matches!(problem.mode, Mode::Exact) {
        let p = avoidance_probability(g, &problem.target);
        if p > 0.0 {
            hints.push(format!(
                "the walk avoids every target level up to step {} with probability {p:.3e}, and that mass cannot stop",
                problem.spec.steps
            ));
        }
    }
    if hints.is_empty() {
        hints.push(format!("no embedding within {} steps; try a longer horizon or soft mode", problem.spec.steps));
    }
    hints.join("; ")
}

fn infeasible(lp: &StandardFormLp, sol: &LpSolution, hint: String) -> Error {
    let farkas = sol.farkas.clone().unwrap_or_default();
    let (margin, worst_column) = if farkas.len() == lp.rows { lp.farkas_margin(&farkas) } else { (0.0, f64::INFINITY) };
    Error::Infeasible(Box::new(Infeasibility { farkas, margin, worst_column, hint }))
}

/// Runs the program (lexicographically when asked) and maps the result
/// back; `Err` carries the status when it is not optimal.
fn run_lp(a: &AssembledLp, config: &Config) -> Result<std::result::Result<LpSolution, LpSolution>> {
    let sol = match &a.secondary {
        Some(c2) => solve_lexicographic(&a.lp, c2, &config.lp)?.primary,
        None => lattice_simplex::solve(&a.lp, &config.lp)?,
    };
    Ok(if sol.status == Status::Optimal { Ok(sol) } else { Err(sol) })
}

/// Stop probabilities from stopped and continuing masses.
fn stop_probabilities(g: &StateGraph, a: &AssembledLp, x: &[f64], problem: &EmbeddingProblem) -> Vec<f64> {
    let support: BTreeSet<i64> = problem.target.support().into_iter().collect();
    (0..g.len())
        .map(|v| {
            if g.is_terminal(v) {
                return 1.0;
            }
            let sigma = a.stop_col[v].map_or(0.0, |j| x[j].max(0.0));
            let cont = a.cont_col[v].map_or(0.0, |j| x[j].max(0.0));
            let arrival = sigma + cont;
            if arrival > problem.config.arrival {
                (sigma / arrival).clamp(0.0, 1.0)
            } else if support.contains(&g.states[v].x) {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

fn certificate_from_duals(g: &StateGraph, a: &AssembledLp, y: &[f64], cost: &CostFunctional) -> DualCertificate {
    let n = g.len();
    let kappa: f64 = g.roots.iter().map(|&(r, w)| w * y[r]).sum();
    let phi: Vec<f64> = y[..n].iter().map(|f| f - kappa).collect();
    let mut psi: BTreeMap<i64, f64> = a.marginal_row.iter().map(|(&lvl, &r)| (lvl, y[r] + kappa)).collect();
    // Levels without a marginal row get the largest ψ that keeps every
    // state there dual feasible; they carry no target mass.
    for (v, s) in g.states.iter().enumerate() {
        if a.marginal_row.contains_key(&s.x) {
            continue;
        }
        let room = cost.gamma(s) - phi[v];
        psi.entry(s.x).and_modify(|p| *p = p.min(room)).or_insert(room);
    }
    let soft = a.soft.as_ref().map(|sc| SoftDual { beta: y[sc.budget_row], rho: y[sc.balance_row] + kappa });
    DualCertificate { psi, phi, soft }
}

/// Solves the embedding problem on the augmented state graph.
pub fn solve(problem: &EmbeddingProblem) -> Result<OptimalSolution> {
    let (g, a) = assemble_lp(problem)?;
    let sol = match run_lp(&a, &problem.config)? {
        Ok(sol) => sol,
        Err(sol) if sol.status == Status::Infeasible => {
            return Err(infeasible(&a.lp, &sol, infeasibility_hint(&g, problem)));
        }
        Err(_) => return Err(Error::Unbounded),
    };
    let p = stop_probabilities(&g, &a, &sol.primal, problem);
    let xi = RandomizedStoppingTime::from_stop_probabilities(g.clone(), p)?;
    let certificate = certificate_from_duals(&g, &a, &sol.duals, &problem.cost);
    let objective = xi.expected_cost(&problem.cost)?;
    let secondary_objective = if problem.uses_secondary() { xi.expected_secondary_cost(&problem.cost)? } else { None };
    let gap = (objective - certificate.objective(&g, &problem.target, problem.mode)).abs();
    let deviation = xi.pushforward_law().total_variation(&problem.target);
    Ok(OptimalSolution { xi, objective, secondary_objective, certificate, gap, deviation, iterations: sol.iterations })
}

/// Phase-one answer to whether any stopping rule embeds the target.
#[derive(Debug, Clone)]
pub enum Feasibility {
    Feasible,
    Infeasible(Box<Infeasibility>),
}

pub fn feasibility_check(problem: &EmbeddingProblem) -> Result<Feasibility> {
    let (g, mut a) = assemble_lp(problem)?;
    a.lp.c.iter_mut().for_each(|c| *c = 0.0);
    a.secondary = None;
    match run_lp(&a, &problem.config)? {
        Ok(_) => Ok(Feasibility::Feasible),
        Err(sol) if sol.status == Status::Infeasible => {
            match infeasible(&a.lp, &sol, infeasibility_hint(&g, problem)) {
                Error::Infeasible(inf) => Ok(Feasibility::Infeasible(inf)),
                _ => unreachable!(),
            }
        }
        Err(_) => Err(Error::Unbounded),
    }
}

/// One named pass/fail line of a certificate check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Size of the worst violation (0 when there is none).
    pub worst: f64,
    /// State or level where the worst violation occurs.
    pub at: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub checks: Vec<NamedCheck>,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&NamedCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

struct Worst {
    value: f64,
    at: Option<String>,
}

impl Worst {
    fn new() -> Self {
        Worst { value: 0.0, at: None }
    }

    fn see(&mut self, v: f64, at: impl FnOnce() -> String) {
        if v > self.value {
            self.value = v;
            self.at = Some(at());
        }
    }

    fn check(self, name: &'static str, tol: f64) -> NamedCheck {
        NamedCheck { name, passed: self.value <= tol, worst: self.value, at: self.at }
    }
}

/// Re-verifies the certificate against the stopping rule from scratch:
/// normalization, the submartingale inequality (tight where mass
/// continues), `φ + ψ ≤ γ` (tight where mass stops), the marginal
/// constraint, the soft-mode dual constraints, and the duality gap.
pub fn certificate_check(sol: &OptimalSolution, problem: &EmbeddingProblem) -> Result<CertificateReport> {
    let xi = &sol.xi;
    let g = xi.graph();
    let cert = &sol.certificate;
    let cfg = &problem.config;
    let tol = cfg.certificate;
    if cert.phi.len() != g.len() {
        return Err(Error::Stopping("certificate does not match the state graph".into()));
    }
    let mut checks = Vec::new();

    let norm: f64 = g.roots.iter().map(|&(r, w)| w * cert.phi[r]).sum();
    checks.push(NamedCheck { name: "normalization", passed: norm.abs() <= tol, worst: norm.abs(), at: None });

    let going = xi.continuing();
    let (mut sub, mut mart) = (Worst::new(), Worst::new());
    for v in 0..g.len() {
        if g.is_terminal(v) {
            continue;
        }
        let mean: f64 = g.children[v].iter().map(|&(w, q)| q * cert.phi[w]).sum();
        let excess = cert.phi[v] - mean;
        sub.see(excess, || g.states[v].key());
        if going[v] > cfg.support {
            mart.see(excess.abs(), || g.states[v].key());
        }
    }
    checks.push(sub.check("submartingale", tol));
    checks.push(mart.check("martingale_on_flow", tol));

    let slack = cert.slack(g, &problem.cost);
    let (mut feas, mut comp) = (Worst::new(), Worst::new());
    for v in 0..g.len() {
        feas.see(-slack[v], || g.states[v].key());
        if xi.stopped()[v] > cfg.support {
            comp.see(slack[v], || g.states[v].key());
        }
    }
    checks.push(feas.check("dual_feasibility", tol));
    checks.push(comp.check("complementary_slackness", tol));

    let law = xi.pushforward_law();
    match problem.mode {
        Mode::Exact => {
            let mut m = Worst::new();
            for y in law.support().into_iter().chain(problem.target.support()) {
                m.see((law.weight(y) - problem.target.weight(y)).abs(), || format!("level {y}"));
            }
            checks.push(m.check("marginal", cfg.marginal));
        }
        Mode::Soft(eps) => {
            let tv = law.total_variation(&problem.target);
            checks.push(NamedCheck {
                name: "marginal",
                passed: tv <= eps + cfg.marginal,
                worst: (tv - eps).max(0.0),
                at: None,
            });
            let mut s = Worst::new();
            match cert.soft {
                Some(d) => {
                    s.see(d.beta, || "budget".into());
                    for (&y, &p) in &cert.psi {
                        s.see((p - d.rho).abs() + 0.5 * d.beta, || format!("level {y}"));
                    }
                }
                None => s.see(f64::INFINITY, || "missing soft multipliers".into()),
            }
            checks.push(s.check("soft_budget", tol));
        }
    }

    let primal = xi.expected_cost(&problem.cost)?;
    let dual = cert.objective(g, &problem.target, problem.mode);
    let gap = (primal - dual).abs();
    checks.push(NamedCheck {
        name: "duality_gap",
        passed: gap <= cfg.gap * (1.0 + primal.abs()),
        worst: gap,
        at: None,
    });
    Ok(CertificateReport { checks, primal, dual, gap })
}

/// Result of the path-tree oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub objective: f64,
    pub secondary_objective: Option<f64>,
    /// Number of path prefixes in the tree.
    pub nodes: usize,
}

/// Largest horizon the path-tree oracle accepts.
pub const ORACLE_MAX_STEPS: usize = 12;

/// Optimizes over every stopping rule, path-dependent ones included, by
/// running the same program on the tree of path prefixes.
pub fn solve_pathtree_oracle(problem: &EmbeddingProblem) -> Result<OracleSolution> {
    problem.validate()?;
    let spec = &problem.spec;
    if spec.steps > ORACLE_MAX_STEPS {
        return Err(Error::TooLarge(format!(
            "path-tree oracle needs at most {ORACLE_MAX_STEPS} steps, got {}",
            spec.steps
        )));
    }
    let branches = spec.kernel.branches();
    let mut states = Vec::new();
    let mut children: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut roots = Vec::new();
    let mut terminal = Vec::new();
    for &(x, w) in problem.start.atoms() {
        roots.push((states.len(), w));
        states.push(spec.start_state(x));
        children.push(Vec::new());
        terminal.push(spec.steps == 0);
        let mut frontier = vec![states.len() - 1];
        for k in 0..spec.steps {
            let mut next = Vec::new();
            for &v in &frontier {
                for &(dx, q) in &branches {
                    let id = states.len();
                    states.push(states[v].step(dx));
                    children.push(Vec::new());
                    terminal.push(k + 1 == spec.steps);
                    children[v].push((id, q));
                    next.push(id);
                }
            }
            frontier = next;
        }
    }
    let flow = Flow { states: &states, children: &children, roots: &roots, terminal };
    let a = assemble(&flow, problem);
    let sol = match run_lp(&a, &problem.config)? {
        Ok(sol) => sol,
        Err(sol) if sol.status == Status::Infeasible => {
            return Err(infeasible(&a.lp, &sol, "no path-dependent rule embeds the target".into()));
        }
        Err(_) => return Err(Error::Unbounded),
    };
    let stopped = |v: usize| a.stop_col[v].map_or(0.0, |j| sol.primal[j].max(0.0));
    let objective = (0..states.len()).map(|v| stopped(v) * problem.cost.gamma(&states[v])).sum();
    let secondary_objective = problem
        .uses_secondary()
        .then(|| (0..states.len()).map(|v| stopped(v) * problem.cost.gamma2(&states[v]).unwrap_or(0.0)).sum());
    Ok(OracleSolution { objective, secondary_objective, nodes: states.len() })
}

/// A stop-go pair found in the support of a solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub going: String,
    pub stopped: String,
    /// Gain of the swap under the solution's own continuation.
    pub gain: f64,
    pub secondary_gain: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub violations: Vec<Violation>,
    /// Stop-go pairs that cannot be swapped because continuing the stopped
    /// path as long as the going one would pass the horizon.
    pub horizon_blocked: usize,
    /// Pairs examined: `|Γ^<| · |Γ|` restricted to equal levels.
    pub pairs_examined: usize,
}

impl MonotonicityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Longest remaining run of each state under `xi`: 0 where no mass
/// continues, else one more than the longest among its children.
fn remaining_depth(xi: &RandomizedStoppingTime, tol: f64) -> Vec<u32> {
    let g = xi.graph();
    let going = xi.continuing();
    let mut d = vec![0u32; g.len()];
    for v in (0..g.len()).rev() {
        if going[v] > tol {
            d[v] = 1 + g.children[v].iter().map(|&(w, _)| d[w]).max().unwrap_or(0);
        }
    }
    d
}

/// Searches `Γ^< × Γ` for stop-go pairs. For costs with a secondary
/// objective, the pair predicate is the tie-broken one, so it is only
/// meaningful for solutions of the lexicographic problem.
pub fn verify_monotonicity(xi: &RandomizedStoppingTime, cost: &CostFunctional) -> MonotonicityReport {
    let tol = 1e-9;
    let g = xi.graph();
    let going = xi.continuing();
    let depth = remaining_depth(xi, tol);
    let mut by_level: BTreeMap<i64, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for v in 0..g.len() {
        let e = by_level.entry(g.states[v].x).or_default();
        if going[v] > tol {
            e.0.push(v);
        }
        if xi.stopped()[v] > tol {
            e.1.push(v);
        }
    }
    let mut violations = Vec::new();
    let mut blocked = 0;
    let mut examined = 0;
    for (gs, ss) in by_level.values() {
        for &a in gs {
            for &b in ss {
                examined += 1;
                if !cost.sg_pair(&g.states[a], &g.states[b]) {
                    continue;
                }
                if g.states[b].k as usize + depth[a] as usize > g.spec.steps {
                    blocked += 1;
                    continue;
                }
                let (gain, secondary_gain) = relative_swap_gain(xi, cost, &g.states[a], &g.states[b]);
                violations.push(Violation {
                    going: g.states[a].key(),
                    stopped: g.states[b].key(),
                    gain,
                    secondary_gain,
                });
            }
        }
    }
    MonotonicityReport { violations, horizon_blocked: blocked, pairs_examined: examined }
}

/// Expected gain from stopping `going` at once and running its future
/// continuation from `stopped` instead:
/// `E[γ(going⊕h)] + γ(stopped) − γ(going) − E[γ(stopped⊕h)]`, where `h`
/// is drawn from `xi` conditioned on `going`, forced to take at least one
/// step. Positive means the swap lowers the objective.
pub fn relative_swap_gain(
    xi: &RandomizedStoppingTime,
    cost: &CostFunctional,
    going: &AugmentedState,
    stopped: &AugmentedState,
) -> (f64, Option<f64>) {
    let g = xi.graph();
    let branches = g.spec.kernel.branches();
    let mut layer: HashMap<(AugmentedState, AugmentedState), f64> = HashMap::from([((*going, *stopped), 1.0)]);
    let (mut ef, mut eg, mut ef2, mut eg2) = (0.0, 0.0, 0.0, 0.0);
    while !layer.is_empty() {
        let mut next: HashMap<(AugmentedState, AugmentedState), f64> = HashMap::new();
        for ((f, h), w) in layer {
            for &(dx, q) in &branches {
                let (f1, h1) = (f.step(dx), h.step(dx));
                let p = g.index_of(&f1).map_or(1.0, |i| xi.stop_prob()[i]);
                let stop = w * q * p;
                if stop > 0.0 {
                    ef += stop * cost.gamma(&f1);
                    eg += stop * cost.gamma(&h1);
                    ef2 += stop * cost.gamma2(&f1).unwrap_or(0.0);
                    eg2 += stop * cost.gamma2(&h1).unwrap_or(0.0);
                }
                if p < 1.0 {
                    *next.entry((f1, h1)).or_insert(0.0) += w * q * (1.0 - p);
                }
            }
        }
        layer = next;
    }
    let gain = ef + cost.gamma(stopped) - cost.gamma(going) - eg;
    let secondary = cost
        .has_secondary()
        .then(|| ef2 + cost.gamma2(stopped).unwrap_or(0.0) - cost.gamma2(going).unwrap_or(0.0) - eg2);
    (gain, secondary)
}

/// Joint law of (start level, stopped level).
pub fn induced_coupling(xi: &RandomizedStoppingTime) -> BTreeMap<(i64, i64), f64> {
    let g = xi.graph();
    let p = xi.stop_prob();
    let mut out = BTreeMap::new();
    for &(r, w) in &g.roots {
        let mut a = vec![0.0; g.len()];
        a[r] = w;
        for v in r..g.len() {
            if a[v] == 0.0 {
                continue;
            }
            let stop = a[v] * p[v];
            if stop > 0.0 {
                *out.entry((g.states[r].x, g.states[v].x)).or_insert(0.0) += stop;
            }
            let go = a[v] - stop;
            if go > 0.0 {
                for &(c, q) in &g.children[v] {
                    a[c] += go * q;
                }
            }
        }
    }
    out
}

/// Solution-file form: objective, gap, stop probabilities and certificate
/// keyed by state, coupling, and optionally a monotonicity report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionJson {
    pub objective: f64,
    pub secondary_objective: Option<f64>,
    pub gap: f64,
    pub deviation: f64,
    pub expected_time: f64,
    pub stop_prob: BTreeMap<String, f64>,
    pub certificate: CertificateJson,
    pub coupling: Vec<(i64, i64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monotonicity: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateJson {
    pub psi: Vec<(i64, f64)>,
    pub phi: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub soft: Option<SoftDual>,
}

impl OptimalSolution {
    pub fn to_json(&self) -> SolutionJson {
        let g = self.xi.graph();
        SolutionJson {
            objective: self.objective,
            secondary_objective: self.secondary_objective,
            gap: self.gap,
            deviation: self.deviation,
            expected_time: self.xi.expected_time(),
            stop_prob: g.states.iter().zip(self.xi.stop_prob()).map(|(s, p)| (s.key(), *p)).collect(),
            certificate: CertificateJson {
                psi: self.certificate.psi.iter().map(|(&y, &v)| (y, v)).collect(),
                phi: g.states.iter().zip(&self.certificate.phi).map(|(s, f)| (s.key(), *f)).collect(),
                soft: self.certificate.soft,
            },
            coupling: induced_coupling(&self.xi).into_iter().map(|((a, b), w)| (a, b, w)).collect(),
            monotonicity: None,
            oracle: None,
        }
    }

    /// Rebuilds a solution from its file form. Objective, gap and
    /// deviation are recomputed rather than trusted.
    pub fn from_json(json: &SolutionJson, problem: &EmbeddingProblem) -> Result<OptimalSolution> {
        problem.validate()?;
        let g = Arc::new(enumerate_reachable(&problem.spec, &problem.start, problem.config.state_cap)?);
        let lookup = |map: &BTreeMap<String, f64>, what: &str| -> Result<Vec<f64>> {
            let mut by_state = HashMap::new();
            for (key, v) in map {
                let s = AugmentedState::parse_key(key, &g.spec.tracked)?;
                if g.index_of(&s).is_none() {
                    return Err(Error::Unreachable(key.clone()));
                }
                by_state.insert(s, *v);
            }
            g.states
                .iter()
                .map(|s| by_state.get(s).copied().ok_or_else(|| Error::Parse(format!("no {what} for state {s}"))))
                .collect()
        };
        let p = lookup(&json.stop_prob, "stop probability")?;
        let phi = lookup(&json.certificate.phi, "φ")?;
        let xi = RandomizedStoppingTime::from_stop_probabilities(g.clone(), p)?;
        let certificate =
            DualCertificate { psi: json.certificate.psi.iter().copied().collect(), phi, soft: json.certificate.soft };
        let objective = xi.expected_cost(&problem.cost)?;
        let secondary_objective =
            if problem.uses_secondary() { xi.expected_secondary_cost(&problem.cost)? } else { None };
        let gap = (objective - certificate.objective(&g, &problem.target, problem.mode)).abs();
        let deviation = xi.pushforward_law().total_variation(&problem.target);
        Ok(OptimalSolution { xi, objective, secondary_objective, certificate, gap, deviation, iterations: 0 })
    }
}
