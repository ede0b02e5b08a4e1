//! Stopping regions in phase space: extraction from an optimizer's
//! support, the hitting rule a region generates, and export.
//!
//! A region is stored per level and per piece (cave regions have two) as
//! the boundary of the stopped set along the phase coordinate: the
//! minimal stopped points for upward-closed regions, the maximal ones for
//! downward-closed regions. Each boundary point carries the fraction of
//! arriving mass that stops there; points strictly beyond it always stop.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use serde_json::{json, Value};

use crate::costs::{BarrierKind, Closure, CostFunctional, Phase, PieceRule};
use crate::error::{Error, Result};
use crate::lattice::{enumerate_reachable, AugmentedState, Feature, LatticeSpec, StateGraph, Tracked};
use crate::measures::DiscreteMeasure;
use crate::optsep::{verify_monotonicity, EmbeddingProblem, OptimalSolution};
use crate::stopping::RandomizedStoppingTime;

const SUPPORT_TOL: f64 = 1e-9;
/// Spread of stop probabilities among states sharing a phase point above
/// which the point keeps a per-state schedule.
const SHARED_POINT_TOL: f64 = 1e-6;

/// Coordinates of `s` in `phase`, excluding the level.
pub fn phase_point(phase: Phase, s: &AugmentedState) -> Option<Vec<i64>> {
    Some(match phase {
        Phase::TimeSpace => vec![s.k as i64],
        Phase::MaxSpace => vec![s.m?],
        Phase::AbsMaxSpace => vec![s.abs_max()?],
        Phase::LocalTimeSpace => vec![s.l? as i64],
        Phase::MaxMin | Phase::MinMaxSpace => vec![s.m?, -s.i?],
    })
}

fn phase_features(phase: Phase) -> Tracked {
    let f: &[Feature] = match phase {
        Phase::TimeSpace => &[],
        Phase::MaxSpace => &[Feature::Max],
        Phase::AbsMaxSpace | Phase::MaxMin | Phase::MinMaxSpace => &[Feature::Max, Feature::Min],
        Phase::LocalTimeSpace => &[Feature::ZeroVisits],
    };
    Tracked::from_features(f)
}

/// Componentwise `a ≤ b`.
fn dominated(a: &[i64], b: &[i64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint {
    pub point: Vec<i64>,
    /// Share of the mass reaching the point that stops there.
    pub fraction: f64,
    /// Per-state stop probabilities, kept when the rule randomizes
    /// differently at different visits of the point. Without time in the
    /// phase coordinates the cost cannot tell those visits apart, and the
    /// horizon can make a single fraction unable to embed the target.
    /// Empty when one fraction describes every visit.
    pub schedule: BTreeMap<AugmentedState, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelThreshold {
    pub level: i64,
    /// Index into the barrier's pieces.
    pub piece: usize,
    pub boundary: Vec<BoundaryPoint>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Position {
    Outside,
    Boundary(usize),
    Inside,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseBarrier {
    pub phase: Phase,
    pub kind: BarrierKind,
    pub pieces: Vec<PieceRule>,
    /// Sorted by level, then piece.
    pub thresholds: Vec<LevelThreshold>,
    pub steps: usize,
    pub step_size: f64,
    pub time_step: f64,
}

impl PhaseBarrier {
    /// A region with no stopped points.
    pub fn empty(cost: &CostFunctional) -> PhaseBarrier {
        PhaseBarrier {
            phase: cost.phase(),
            kind: cost.barrier_kind(),
            pieces: cost.phase_rule(),
            thresholds: Vec::new(),
            steps: cost.steps(),
            step_size: cost.step_size(),
            time_step: cost.time_step(),
        }
    }

    fn piece_of(&self, k: u32) -> Option<usize> {
        self.pieces.iter().position(|p| p.k_min <= k && k <= p.k_max)
    }

    pub fn threshold(&self, level: i64, piece: usize) -> Option<&LevelThreshold> {
        self.thresholds.iter().find(|t| t.level == level && t.piece == piece)
    }

    fn position(&self, s: &AugmentedState) -> Position {
        let Some(piece) = self.piece_of(s.k) else { return Position::Outside };
        let Some(t) = self.threshold(s.x, piece) else { return Position::Outside };
        let Some(c) = phase_point(self.phase, s) else { return Position::Outside };
        classify(&c, &t.boundary, self.pieces[piece].closure)
    }

    /// Stop probability the region assigns to a non-terminal state.
    pub fn stop_probability(&self, s: &AugmentedState) -> f64 {
        match self.position(s) {
            Position::Outside => 0.0,
            Position::Inside => 1.0,
            Position::Boundary(i) => {
                let piece = self.piece_of(s.k).expect("boundary implies a piece");
                let b = &self.threshold(s.x, piece).expect("boundary implies a threshold").boundary[i];
                b.schedule.get(s).copied().unwrap_or(b.fraction)
            }
        }
    }

    /// Rows of `phase,level,threshold,physical,fraction` (plus `region`
    /// when the region has several pieces), levels ascending.
    pub fn to_csv(&self) -> String {
        let multi = self.pieces.len() > 1;
        let mut out = String::from("phase,level,threshold,physical,fraction");
        if multi {
            out.push_str(",region");
        }
        out.push('\n');
        let unit = match self.phase {
            Phase::TimeSpace => self.time_step,
            _ => self.step_size,
        };
        for t in &self.thresholds {
            for b in &t.boundary {
                let idx: Vec<String> = b.point.iter().map(|v| v.to_string()).collect();
                let phys: Vec<String> = b.point.iter().map(|&v| fmt_real(v as f64 * unit)).collect();
                let _ = write!(
                    out,
                    "{},{},{},{},{}",
                    self.phase.coordinate(),
                    t.level,
                    idx.join(":"),
                    phys.join(":"),
                    fmt_real(b.fraction)
                );
                if multi {
                    let _ = write!(out, ",{}", self.pieces[t.piece].name);
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .thresholds
            .iter()
            .flat_map(|t| {
                t.boundary.iter().map(move |b| {
                    let mut row = json!({
                        "level": t.level,
                        "region": self.pieces[t.piece].name,
                        "threshold": b.point,
                        "fraction": crate::round_sig(b.fraction),
                    });
                    if !b.schedule.is_empty() {
                        let sched: serde_json::Map<String, Value> =
                            b.schedule.iter().map(|(s, &p)| (s.key(), json!(crate::round_sig(p)))).collect();
                        row["schedule"] = Value::Object(sched);
                    }
                    row
                })
            })
            .collect();
        json!({
            "phase": self.phase.label(),
            "kind": self.kind.label(),
            "steps": self.steps,
            "thresholds": rows,
        })
    }

    /// Mirror image in time, `k ↦ N − k`, with every closure flipped. Only
    /// single-piece time-space regions have one.
    pub fn time_reversed(&self) -> Result<PhaseBarrier> {
        if self.phase != Phase::TimeSpace || self.pieces.len() != 1 {
            return Err(Error::PhaseMismatch("time reversal needs a single-piece (t,x) region".into()));
        }
        let n = self.steps as i64;
        let mut out = self.clone();
        out.pieces[0].closure = match self.pieces[0].closure {
            Closure::Up => Closure::Down,
            Closure::Down => Closure::Up,
        };
        out.kind = match self.kind {
            BarrierKind::Barrier => BarrierKind::Inverse,
            BarrierKind::Inverse => BarrierKind::Barrier,
            k => k,
        };
        for t in &mut out.thresholds {
            for b in &mut t.boundary {
                b.point[0] = n - b.point[0];
            }
        }
        Ok(out)
    }

    /// Times `0..=N` at which the region stops some mass at `level`.
    pub fn stopping_times_at(&self, level: i64) -> Vec<u32> {
        (0..=self.steps as u32)
            .filter(|&k| {
                let s = AugmentedState { k, x: level, m: None, i: None, l: None };
                self.phase == Phase::TimeSpace && self.position(&s) != Position::Outside
            })
            .collect()
    }
}

/// Formats a real with 12 significant digits, shortest form.
pub(crate) fn fmt_real(x: f64) -> String {
    let r = crate::round_sig(x);
    if r == r.trunc() && r.abs() < 1e15 {
        format!("{r:.1}")
    } else {
        format!("{r}")
    }
}

fn classify(c: &[i64], boundary: &[BoundaryPoint], closure: Closure) -> Position {
    if let Some(i) = boundary.iter().position(|b| b.point == c) {
        return Position::Boundary(i);
    }
    let beyond = boundary.iter().any(|b| match closure {
        Closure::Up => dominated(&b.point, c),
        Closure::Down => dominated(c, &b.point),
    });
    if beyond {
        Position::Inside
    } else {
        Position::Outside
    }
}

fn kind_error(level: i64, detail: String) -> Error {
    Error::BarrierKind { level, detail }
}

/// Projects the support of `sol` to the cost's phase space and checks that
/// it has the shape the cost predicts.
pub fn extract_barrier(sol: &OptimalSolution, problem: &EmbeddingProblem) -> Result<PhaseBarrier> {
    extract_from_rule(&sol.xi, &problem.cost)
}

/// As [`extract_barrier`], for any stopping rule.
pub fn extract_from_rule(xi: &RandomizedStoppingTime, cost: &CostFunctional) -> Result<PhaseBarrier> {
    let g = xi.graph();
    cost.check_features(&g.spec)?;
    let mut barrier = PhaseBarrier::empty(cost);
    let stopped = xi.stopped();
    let going = xi.continuing();

    let report = verify_monotonicity(xi, cost);
    if let Some(v) = report.violations.first() {
        let level = AugmentedState::parse_key(&v.going, &g.spec.tracked)?.x;
        return Err(kind_error(level, format!("stop-go pair: {} continues while {} stops", v.going, v.stopped)));
    }
    if barrier.phase == Phase::MaxMin {
        for (v, s) in g.states.iter().enumerate() {
            if stopped[v] > SUPPORT_TOL && !g.is_terminal(v) && s.i < Some(s.x) && Some(s.x) < s.m {
                return Err(kind_error(s.x, format!("{s} stops strictly between its running extremes")));
            }
        }
    }

    // Group non-terminal states by (level, piece).
    let mut groups: BTreeMap<(i64, usize), Vec<usize>> = BTreeMap::new();
    for (v, s) in g.states.iter().enumerate() {
        if g.is_terminal(v) {
            continue;
        }
        if let Some(piece) = barrier.piece_of(s.k) {
            groups.entry((s.x, piece)).or_default().push(v);
        }
    }
    for ((level, piece), members) in groups {
        let closure = barrier.pieces[piece].closure;
        let point = |v: usize| phase_point(barrier.phase, &g.states[v]).expect("features checked");
        let stopped_points: Vec<Vec<i64>> =
            members.iter().filter(|&&v| stopped[v] > SUPPORT_TOL).map(|&v| point(v)).collect();
        let mut extremes: Vec<Vec<i64>> = stopped_points
            .iter()
            .filter(|c| {
                !stopped_points.iter().any(|d| {
                    d != *c
                        && match closure {
                            Closure::Up => dominated(d, c),
                            Closure::Down => dominated(c, d),
                        }
                })
            })
            .cloned()
            .collect();
        extremes.sort();
        extremes.dedup();
        if extremes.is_empty() {
            continue;
        }
        let mut boundary: Vec<BoundaryPoint> = extremes
            .into_iter()
            .map(|point| BoundaryPoint { point, fraction: 0.0, schedule: BTreeMap::new() })
            .collect();
        let mut mass = vec![(0.0, 0.0); boundary.len()];
        let mut visits: Vec<BTreeMap<AugmentedState, f64>> = vec![BTreeMap::new(); boundary.len()];
        for &v in &members {
            let arrival = xi.arrival()[v];
            if arrival <= SUPPORT_TOL {
                continue;
            }
            match classify(&point(v), &boundary, closure) {
                Position::Inside if going[v] > SUPPORT_TOL => {
                    return Err(kind_error(
                        level,
                        format!("{} lets mass {:.3e} continue inside the stopping region", g.states[v], going[v]),
                    ));
                }
                Position::Boundary(i) => {
                    mass[i].0 += stopped[v];
                    mass[i].1 += arrival;
                    visits[i].insert(g.states[v], xi.stop_prob()[v]);
                }
                _ => {}
            }
        }
        for ((b, &(s, a)), visits) in boundary.iter_mut().zip(&mass).zip(visits) {
            b.fraction = if a > 0.0 { (s / a).clamp(0.0, 1.0) } else { 1.0 };
            let (lo, hi) = visits.values().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &p| (l.min(p), h.max(p)));
            if hi - lo > SHARED_POINT_TOL {
                b.schedule = visits;
            }
        }
        barrier.thresholds.push(LevelThreshold { level, piece, boundary });
    }
    check_threshold_shape(&barrier)?;
    Ok(barrier)
}

fn rule_probabilities(b: &PhaseBarrier, g: &StateGraph) -> Vec<f64> {
    g.states.iter().enumerate().map(|(v, s)| if g.is_terminal(v) { 1.0 } else { b.stop_probability(s) }).collect()
}

/// Single-coordinate threshold per level of one piece.
fn scalar_thresholds(b: &PhaseBarrier) -> Vec<(i64, i64)> {
    b.thresholds.iter().filter(|t| t.boundary.len() == 1).map(|t| (t.level, t.boundary[0].point[0])).collect()
}

fn check_monotone(pairs: &[(i64, i64)], increasing: bool, what: &str) -> Result<()> {
    for w in pairs.windows(2) {
        let ok = if increasing { w[0].1 <= w[1].1 } else { w[0].1 >= w[1].1 };
        if !ok {
            return Err(kind_error(
                w[1].0,
                format!("{what}: threshold {} after {} at level {}", w[1].1, w[0].1, w[0].0),
            ));
        }
    }
    Ok(())
}

/// Cross-level monotonicity of thresholds where the phase predicts it.
fn check_threshold_shape(b: &PhaseBarrier) -> Result<()> {
    match b.phase {
        Phase::MaxSpace => {
            // Stop once x ≤ ψ(max) with ψ increasing: the smallest stopping
            // max grows with the level.
            check_monotone(&scalar_thresholds(b), true, "stopping max must not decrease in the level")
        }
        Phase::LocalTimeSpace => {
            let all = scalar_thresholds(b);
            let closure = b.pieces[0].closure;
            let pos: Vec<(i64, i64)> = all.iter().copied().filter(|p| p.0 > 0).collect();
            let mut neg: Vec<(i64, i64)> = all.iter().copied().filter(|p| p.0 < 0).collect();
            neg.reverse();
            // Closed downward: stop while few visits, more of them the
            // farther out. Closed upward: the reverse.
            let increasing = closure == Closure::Down;
            check_monotone(&pos, increasing, "visit threshold against |x|")?;
            check_monotone(&neg, increasing, "visit threshold against |x|")
        }
        Phase::MaxMin => {
            // Below zero the walk stops at a new minimum while the max is
            // small enough; that bound grows with |x|. Above zero, mirrored.
            let mut pos = Vec::new();
            let mut neg = Vec::new();
            for t in &b.thresholds {
                for p in &t.boundary {
                    if t.level < 0 && p.point[1] == -t.level {
                        neg.push((t.level, p.point[0]));
                    } else if t.level > 0 && p.point[0] == t.level {
                        pos.push((t.level, p.point[1]));
                    }
                }
            }
            neg.reverse();
            check_monotone(&pos, true, "stopping min against the level")?;
            check_monotone(&neg, true, "stopping max against |x|")
        }
        _ => Ok(()),
    }
}

/// Hitting rule of the region: stop inside, stop with the recorded
/// fraction on the boundary, always stop at the horizon.
pub fn hitting_rst(b: &PhaseBarrier, spec: &LatticeSpec, lambda: &DiscreteMeasure) -> Result<RandomizedStoppingTime> {
    let need = phase_features(b.phase);
    if let Some(f) = spec.tracked.missing(&need) {
        return Err(Error::MissingFeature { cost: format!("{} region", b.phase.label()), feature: f.name() });
    }
    if spec.steps != b.steps {
        return Err(Error::PhaseMismatch(format!("region built for {} steps, lattice has {}", b.steps, spec.steps)));
    }
    let g = Arc::new(enumerate_reachable(spec, lambda, usize::MAX)?);
    let p = rule_probabilities(b, &g);
    RandomizedStoppingTime::from_stop_probabilities(g, p)
}

/// Whether two regions of the same shape stop the same mass at every state.
pub fn loynes_compare(
    b1: &PhaseBarrier,
    b2: &PhaseBarrier,
    spec: &LatticeSpec,
    lambda: &DiscreteMeasure,
) -> Result<bool> {
    if b1.phase != b2.phase || b1.kind != b2.kind {
        return Err(Error::PhaseMismatch(format!(
            "{} {} vs {} {}",
            b1.phase.label(),
            b1.kind.label(),
            b2.phase.label(),
            b2.kind.label()
        )));
    }
    let a = hitting_rst(b1, spec, lambda)?;
    let c = hitting_rst(b2, spec, lambda)?;
    Ok(a.joint_law_distance(&c) <= 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::{cave_cost, root_cost, rost_cost, ScalarFn};
    use crate::optsep::solve;

    fn m(atoms: &[(i64, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::new(atoms.to_vec()).unwrap()
    }

    fn root(n: usize, target: &[(i64, f64)]) -> (EmbeddingProblem, OptimalSolution) {
        let spec = LatticeSpec::symmetric(n, 1.0);
        let p = EmbeddingProblem::new(
            spec.clone(),
            DiscreteMeasure::dirac(0),
            m(target),
            root_cost(&spec, ScalarFn::Square).unwrap(),
        );
        let s = solve(&p).unwrap();
        (p, s)
    }

    fn time_barrier(n: usize, closure: Closure, rows: &[(i64, i64, f64)]) -> PhaseBarrier {
        let spec = LatticeSpec::symmetric(n, 1.0);
        let cost = match closure {
            Closure::Up => root_cost(&spec, ScalarFn::Square).unwrap(),
            Closure::Down => rost_cost(&spec, ScalarFn::Sqrt).unwrap(),
        };
        let mut b = PhaseBarrier::empty(&cost);
        b.thresholds = rows
            .iter()
            .map(|&(level, k, fraction)| LevelThreshold {
                level,
                piece: 0,
                boundary: vec![BoundaryPoint { point: vec![k], fraction, schedule: BTreeMap::new() }],
            })
            .collect();
        b
    }

    #[test]
    fn root_thresholds() {
        let (p, s) = root(4, &[(-2, 0.25), (0, 0.5), (2, 0.25)]);
        let b = extract_barrier(&s, &p).unwrap();
        let rows: Vec<(i64, i64)> = scalar_thresholds(&b);
        assert_eq!(rows, [(-2, 2), (0, 2), (2, 2)]);

        let (p, s) = root(3, &[(-1, 0.5), (1, 0.5)]);
        let b = extract_barrier(&s, &p).unwrap();
        assert_eq!(scalar_thresholds(&b), [(-1, 1), (1, 1)]);
        assert_eq!(b.to_csv(), "phase,level,threshold,physical,fraction\nt,-1,1,1.0,1.0\nt,1,1,1.0,1.0\n");
    }

    #[test]
    fn hitting_rules() {
        let spec = LatticeSpec::symmetric(3, 1.0);
        let b = time_barrier(3, Closure::Up, &[(-1, 1, 1.0), (1, 1, 1.0)]);
        let xi = hitting_rst(&b, &spec, &DiscreteMeasure::dirac(0)).unwrap();
        assert_eq!(xi.pushforward_law().atoms(), &[(-1, 0.5), (1, 0.5)]);
        assert_eq!(xi.expected_time(), 1.0);

        let empty = time_barrier(3, Closure::Up, &[]);
        let xi = hitting_rst(&empty, &spec, &DiscreteMeasure::dirac(0)).unwrap();
        assert_eq!(xi.pushforward_law().atoms(), &[(-3, 0.125), (-1, 0.375), (1, 0.375), (3, 0.125)]);
        assert_eq!(empty.to_csv(), "phase,level,threshold,physical,fraction\n");

        let inverse = time_barrier(3, Closure::Down, &[(0, 0, 0.5)]);
        let xi = hitting_rst(&inverse, &spec, &DiscreteMeasure::dirac(0)).unwrap();
        assert_eq!(xi.stopped()[0], 0.5);

        let spec = spec.with_tracked(&[Feature::Max]);
        let mut ay = empty.clone();
        ay.phase = Phase::MaxSpace;
        assert!(hitting_rst(&ay, &LatticeSpec::symmetric(3, 1.0), &DiscreteMeasure::dirac(0)).is_err());
        assert!(hitting_rst(&ay, &spec, &DiscreteMeasure::dirac(0)).is_ok());
    }

    #[test]
    fn round_trip_reproduces_the_solution() {
        let (p, s) = root(6, &[(-3, 0.2), (-1, 0.2), (0, 0.2), (1, 0.2), (3, 0.2)]);
        let b = extract_barrier(&s, &p).unwrap();
        let back = hitting_rst(&b, &p.spec, &p.start).unwrap();
        assert!(back.joint_law_distance(&s.xi) <= 1e-9);
    }

    #[test]
    fn loynes_examples() {
        let spec = LatticeSpec::symmetric(4, 1.0);
        let lambda = DiscreteMeasure::dirac(0);
        let a = time_barrier(4, Closure::Up, &[(-2, 2, 1.0), (0, 2, 1.0), (2, 2, 1.0)]);
        assert!(loynes_compare(&a, &a, &spec, &lambda).unwrap());
        let bigger = time_barrier(4, Closure::Up, &[(-1, 1, 1.0), (1, 1, 1.0)]);
        assert!(!loynes_compare(&a, &bigger, &spec, &lambda).unwrap());
        let inverse = time_barrier(4, Closure::Down, &[]);
        assert!(loynes_compare(&a, &inverse, &spec, &lambda).is_err());
    }

    #[test]
    fn kind_violation_is_reported() {
        // Stop at (1,1) but let (3,1) continue: not a barrier.
        let spec = LatticeSpec::symmetric(5, 1.0);
        let g = Arc::new(enumerate_reachable(&spec, &DiscreteMeasure::dirac(0), 1000).unwrap());
        let p = g
            .states
            .iter()
            .map(|s| match (s.k, s.x) {
                (1, 1) => 0.5,
                (1, -1) => 1.0,
                (k, _) if k >= 4 => 1.0,
                _ => 0.0,
            })
            .collect();
        let xi = RandomizedStoppingTime::from_stop_probabilities(g, p).unwrap();
        let cost = root_cost(&spec, ScalarFn::Square).unwrap();
        match extract_from_rule(&xi, &cost) {
            Err(Error::BarrierKind { level, .. }) => assert_eq!(level.abs(), 1),
            other => panic!("expected a kind error, got {other:?}"),
        }
    }

    #[test]
    fn reversal_turns_barriers_into_inverse_barriers() {
        let (p, s) = root(6, &[(-3, 0.2), (-1, 0.2), (0, 0.2), (1, 0.2), (3, 0.2)]);
        let b = extract_barrier(&s, &p).unwrap();
        let r = b.time_reversed().unwrap();
        assert_eq!(r.kind, BarrierKind::Inverse);
        for level in -6..=6 {
            let times = r.stopping_times_at(level);
            // Left-complete: every earlier time stops too.
            assert!(times.iter().enumerate().all(|(i, &k)| k as usize == i), "level {level}: {times:?}");
            let fwd = b.stopping_times_at(level);
            assert_eq!(times.len(), fwd.len());
        }
        assert_eq!(r.time_reversed().unwrap(), b);
    }

    #[test]
    fn cave_export_has_regions() {
        let spec = LatticeSpec::symmetric(8, 1.0);
        let cost = cave_cost(&spec, 3, None).unwrap();
        let p = EmbeddingProblem::new(spec, DiscreteMeasure::dirac(0), m(&[(-2, 0.25), (0, 0.5), (2, 0.25)]), cost);
        let s = solve(&p).unwrap();
        let b = extract_barrier(&s, &p).unwrap();
        let csv = b.to_csv();
        assert!(csv.starts_with("phase,level,threshold,physical,fraction,region\n"));
        assert!(csv.lines().skip(1).all(|l| l.ends_with(",pre-t0") || l.ends_with(",post-t0")), "{csv}");
        let back = hitting_rst(&b, &p.spec, &p.start).unwrap();
        assert!(back.joint_law_distance(&s.xi) <= 1e-9);
    }

    #[test]
    fn repeated_visits_keep_their_schedule() {
        use crate::costs::azema_yor_cost;
        let spec = LatticeSpec::symmetric(17, 1.0).with_tracked(&[Feature::Max]);
        let target = m(&[(-3, 0.15), (-1, 0.2), (0, 0.3), (1, 0.2), (3, 0.15)]);
        let p = EmbeddingProblem::new(spec.clone(), DiscreteMeasure::dirac(0), target, azema_yor_cost(&spec).unwrap())
            .with_secondary(true);
        let s = solve(&p).unwrap();
        let b = extract_barrier(&s, &p).unwrap();
        assert!(b.thresholds.iter().flat_map(|t| &t.boundary).any(|p| !p.schedule.is_empty()));
        assert!(b.to_json()["thresholds"].as_array().unwrap().iter().any(|r| r.get("schedule").is_some()));
        let back = hitting_rst(&b, &p.spec, &p.start).unwrap();
        assert!(back.joint_law_distance(&s.xi) <= 1e-9);
    }
}
