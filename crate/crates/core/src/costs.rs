//! The cost catalog: each entry knows its stopping cost, optional
//! tie-breaking secondary cost, phase space, expected region shape and
//! the closed-form stop-go predicate.

use std::fmt;
use std::sync::Arc;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::lattice::{AugmentedState, Feature, LatticeSpec, Tracked};

/// A real function of one lattice coordinate.
///
/// Named shapes other than `Saturating` are evaluated at the physical
/// value `index · unit`; `Saturating` and `Table` use the raw index.
#[derive(Clone)]
pub enum ScalarFn {
    Square,
    Cube,
    Sqrt,
    /// `exp(−t)`.
    ExpDecay,
    /// `1 − 2^(−u−1)`: bounded and strictly increasing.
    Saturating,
    /// `(t/t₀)(2 − t/t₀)` on `[0, t₀]`, then `exp(−(t − t₀))`.
    PiecewiseCave {
        t0: f64,
    },
    /// Coefficients of `c₀ + c₁t + c₂t² + …`.
    Poly(Vec<f64>),
    /// Values at indices `0, 1, 2, …`; held constant past either end.
    Table(Vec<f64>),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarFn::Square => write!(f, "t^2"),
            ScalarFn::Cube => write!(f, "t^3"),
            ScalarFn::Sqrt => write!(f, "sqrt"),
            ScalarFn::ExpDecay => write!(f, "exp-decay"),
            ScalarFn::Saturating => write!(f, "saturating"),
            ScalarFn::PiecewiseCave { t0 } => write!(f, "piecewise-cave({t0})"),
            ScalarFn::Poly(c) => write!(f, "poly{c:?}"),
            ScalarFn::Table(v) => write!(f, "table{v:?}"),
            ScalarFn::Custom(_) => write!(f, "custom"),
        }
    }
}

impl ScalarFn {
    pub fn eval(&self, idx: i64, unit: f64) -> f64 {
        let t = idx as f64 * unit;
        match self {
            ScalarFn::Square => t * t,
            ScalarFn::Cube => t * t * t,
            ScalarFn::Sqrt => t.max(0.0).sqrt(),
            ScalarFn::ExpDecay => (-t).exp(),
            ScalarFn::Saturating => 1.0 - 2f64.powi(-(idx as i32) - 1),
            ScalarFn::PiecewiseCave { t0 } => {
                if t <= *t0 {
                    let r = t / t0;
                    r * (2.0 - r)
                } else {
                    (-(t - t0)).exp()
                }
            }
            ScalarFn::Poly(c) => c.iter().rev().fold(0.0, |acc, a| acc * t + a),
            ScalarFn::Table(v) => {
                let i = idx.clamp(0, v.len() as i64 - 1) as usize;
                v[i]
            }
            ScalarFn::Custom(f) => f(t),
        }
    }

    /// Parses the expression grammar used in problem files: `t^2`, `t^3`,
    /// `sqrt`, `exp-decay`, `saturating`, `piecewise-cave(t0)`, a JSON
    /// array of tabulated values, or `{"poly": [c0, c1, ...]}`.
    pub fn from_json(v: &Value) -> Result<ScalarFn> {
        match v {
            Value::String(s) => Self::parse(s),
            Value::Array(items) => {
                let vals = items
                    .iter()
                    .map(|x| x.as_f64().ok_or_else(|| Error::Cost(format!("table entry {x} is not a number"))))
                    .collect::<Result<Vec<f64>>>()?;
                if vals.is_empty() {
                    return Err(Error::Cost("empty table".into()));
                }
                Ok(ScalarFn::Table(vals))
            }
            Value::Object(o) if o.len() == 1 && o.contains_key("poly") => {
                let c = o["poly"]
                    .as_array()
                    .ok_or_else(|| Error::Cost("poly needs an array of coefficients".into()))?
                    .iter()
                    .map(|x| x.as_f64().ok_or_else(|| Error::Cost("poly coefficient is not a number".into())))
                    .collect::<Result<Vec<f64>>>()?;
                Ok(ScalarFn::Poly(c))
            }
            other => Err(Error::Cost(format!("cannot read function from {other}"))),
        }
    }

    pub fn parse(s: &str) -> Result<ScalarFn> {
        let s = s.trim();
        Ok(match s {
            "t^2" => ScalarFn::Square,
            "t^3" => ScalarFn::Cube,
            "sqrt" => ScalarFn::Sqrt,
            "exp-decay" => ScalarFn::ExpDecay,
            "saturating" => ScalarFn::Saturating,
            _ => {
                let inner = s
                    .strip_prefix("piecewise-cave(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| Error::Cost(format!("unknown function `{s}`")))?;
                let t0: f64 = inner.trim().parse().map_err(|_| Error::Cost(format!("bad t0 in `{s}`")))?;
                if !(t0 > 0.0) {
                    return Err(Error::Cost("piecewise-cave needs t0 > 0".into()));
                }
                ScalarFn::PiecewiseCave { t0 }
            }
        })
    }
}

/// A real function of `(max, −min)` indices.
#[derive(Clone)]
pub enum PairFn {
    /// `saturating(a) + saturating(b)`.
    SaturatingSum,
    Custom(Arc<dyn Fn(i64, i64) -> f64 + Send + Sync>),
}

impl fmt::Debug for PairFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairFn::SaturatingSum => write!(f, "saturating-sum"),
            PairFn::Custom(_) => write!(f, "custom"),
        }
    }
}

impl PairFn {
    pub fn eval(&self, a: i64, b: i64) -> f64 {
        match self {
            PairFn::SaturatingSum => ScalarFn::Saturating.eval(a, 1.0) + ScalarFn::Saturating.eval(b, 1.0),
            PairFn::Custom(f) => f(a, b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    TimeSpace,
    MaxSpace,
    AbsMaxSpace,
    LocalTimeSpace,
    MaxMin,
    MinMaxSpace,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::TimeSpace => "(t,x)",
            Phase::MaxSpace => "(max,x)",
            Phase::AbsMaxSpace => "(absmax,x)",
            Phase::LocalTimeSpace => "(L,x)",
            Phase::MaxMin => "(max,min)",
            Phase::MinMaxSpace => "(min,max,x)",
        }
    }

    /// Name of the coordinate column in exports.
    pub fn coordinate(self) -> &'static str {
        match self {
            Phase::TimeSpace => "t",
            Phase::MaxSpace => "max",
            Phase::AbsMaxSpace => "absmax",
            Phase::LocalTimeSpace => "L",
            Phase::MaxMin | Phase::MinMaxSpace => "max:-min",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarrierKind {
    Barrier,
    Inverse,
    Cave { t0: u32 },
    ThresholdIncreasing,
    ThresholdDecreasing,
    TwoSided,
}

impl BarrierKind {
    pub fn label(&self) -> String {
        match self {
            BarrierKind::Barrier => "barrier".into(),
            BarrierKind::Inverse => "inverse".into(),
            BarrierKind::Cave { t0 } => format!("cave({t0})"),
            BarrierKind::ThresholdIncreasing => "threshold-increasing".into(),
            BarrierKind::ThresholdDecreasing => "threshold-decreasing".into(),
            BarrierKind::TwoSided => "two-sided".into(),
        }
    }
}

/// Which way the stopping region is closed along the phase coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Closure {
    /// Everything at or above a stopped point stops.
    Up,
    /// Everything at or below a stopped point stops.
    Down,
}

/// A part of the phase space with its own closure rule, selected by a
/// time window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PieceRule {
    pub name: &'static str,
    pub k_min: u32,
    pub k_max: u32,
    pub closure: Closure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValloisDirection {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone)]
pub enum CostKind {
    Root {
        h: ScalarFn,
    },
    Rost {
        h: ScalarFn,
    },
    Cave {
        t0: u32,
        phi: ScalarFn,
    },
    AzemaYor,
    Jacka {
        phi: ScalarFn,
    },
    Perkins {
        phi: PairFn,
        phi2: PairFn,
    },
    Range {
        phi: PairFn,
        phi2: PairFn,
    },
    /// `concave_gamma` records whether `±h` (as minimized) is concave in
    /// the visit count, which fixes the stop-go direction.
    Vallois {
        h: ScalarFn,
        direction: ValloisDirection,
        concave_gamma: bool,
    },
}

#[derive(Debug, Clone)]
pub struct CostFunctional {
    pub kind: CostKind,
    step_size: f64,
    time_step: f64,
    steps: usize,
}

const SHAPE_TOL: f64 = 1e-12;

fn second_differences(f: impl Fn(i64) -> f64, lo: i64, hi: i64) -> Vec<(i64, f64)> {
    ((lo + 1)..hi).map(|k| (k, f(k - 1) - 2.0 * f(k) + f(k + 1))).collect()
}

fn require_convex(name: &str, f: impl Fn(i64) -> f64, lo: i64, hi: i64) -> Result<()> {
    if let Some((k, d)) = second_differences(&f, lo, hi).into_iter().find(|&(_, d)| d < -SHAPE_TOL) {
        return Err(Error::Cost(format!("{name} is not convex at index {k} (second difference {d})")));
    }
    Ok(())
}

fn require_concave(name: &str, f: impl Fn(i64) -> f64, lo: i64, hi: i64) -> Result<()> {
    if let Some((k, d)) = second_differences(&f, lo, hi).into_iter().find(|&(_, d)| d > SHAPE_TOL) {
        return Err(Error::Cost(format!("{name} is not concave at index {k} (second difference {d})")));
    }
    Ok(())
}

fn require_increasing(name: &str, f: impl Fn(i64) -> f64, lo: i64, hi: i64) -> Result<()> {
    for k in lo..hi {
        if f(k + 1) <= f(k) {
            return Err(Error::Cost(format!("{name} is not strictly increasing at index {k}")));
        }
    }
    Ok(())
}

fn require_features(spec: &LatticeSpec, name: &str, features: &[Feature]) -> Result<()> {
    for f in features {
        if !spec.tracked.contains(*f) {
            return Err(Error::MissingFeature { cost: name.into(), feature: f.name() });
        }
    }
    Ok(())
}

impl CostFunctional {
    fn bind(spec: &LatticeSpec, kind: CostKind) -> Result<Self> {
        spec.validate()?;
        let c = CostFunctional { kind, step_size: spec.step_size, time_step: spec.time_step, steps: spec.steps };
        c.check_features(spec)?;
        Ok(c)
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            CostKind::Root { .. } => "root",
            CostKind::Rost { .. } => "rost",
            CostKind::Cave { .. } => "cave",
            CostKind::AzemaYor => "azema_yor",
            CostKind::Jacka { .. } => "jacka",
            CostKind::Perkins { .. } => "perkins",
            CostKind::Range { .. } => "range",
            CostKind::Vallois { .. } => "vallois",
        }
    }

    pub fn required(&self) -> Tracked {
        let f: &[Feature] = match self.kind {
            CostKind::Root { .. } | CostKind::Rost { .. } | CostKind::Cave { .. } => &[],
            CostKind::AzemaYor => &[Feature::Max],
            CostKind::Jacka { .. } | CostKind::Perkins { .. } | CostKind::Range { .. } => &[Feature::Max, Feature::Min],
            CostKind::Vallois { .. } => &[Feature::ZeroVisits],
        };
        Tracked::from_features(f)
    }

    pub fn check_features(&self, spec: &LatticeSpec) -> Result<()> {
        require_features(spec, self.name(), &self.required().features())
    }

    pub fn phase(&self) -> Phase {
        match self.kind {
            CostKind::Root { .. } | CostKind::Rost { .. } | CostKind::Cave { .. } => Phase::TimeSpace,
            CostKind::AzemaYor => Phase::MaxSpace,
            CostKind::Jacka { .. } => Phase::AbsMaxSpace,
            CostKind::Vallois { .. } => Phase::LocalTimeSpace,
            CostKind::Perkins { .. } => Phase::MaxMin,
            CostKind::Range { .. } => Phase::MinMaxSpace,
        }
    }

    pub fn barrier_kind(&self) -> BarrierKind {
        match self.kind {
            CostKind::Root { .. } => BarrierKind::Barrier,
            CostKind::Rost { .. } => BarrierKind::Inverse,
            CostKind::Cave { t0, .. } => BarrierKind::Cave { t0 },
            CostKind::AzemaYor => BarrierKind::ThresholdIncreasing,
            CostKind::Jacka { .. } | CostKind::Perkins { .. } | CostKind::Range { .. } => BarrierKind::TwoSided,
            CostKind::Vallois { concave_gamma: true, .. } => BarrierKind::ThresholdIncreasing,
            CostKind::Vallois { concave_gamma: false, .. } => BarrierKind::ThresholdDecreasing,
        }
    }

    pub fn has_secondary(&self) -> bool {
        !matches!(self.kind, CostKind::Root { .. } | CostKind::Rost { .. } | CostKind::Cave { .. })
    }

    fn x2(&self, s: &AugmentedState) -> f64 {
        let x = s.x as f64 * self.step_size;
        x * x
    }

    /// Cost of stopping at `s`; the embedding problem minimizes its mean.
    /// Panics if `s` lacks a required feature (checked on construction).
    pub fn gamma(&self, s: &AugmentedState) -> f64 {
        match &self.kind {
            CostKind::Root { h } | CostKind::Rost { h } => h.eval(s.k as i64, self.time_step),
            CostKind::Cave { phi, .. } => phi.eval(s.k as i64, self.time_step),
            CostKind::AzemaYor => -(s.m.expect("max tracked") as f64) * self.step_size,
            CostKind::Jacka { phi } => -phi.eval(s.abs_max().expect("max and min tracked"), self.step_size),
            CostKind::Perkins { phi, .. } => phi.eval(s.m.expect("max tracked"), -s.i.expect("min tracked")),
            CostKind::Range { phi, .. } => -phi.eval(s.m.expect("max tracked"), -s.i.expect("min tracked")),
            CostKind::Vallois { h, direction, .. } => {
                let v = h.eval(s.l.expect("zero visits tracked") as i64, self.step_size);
                match direction {
                    ValloisDirection::Minimize => v,
                    ValloisDirection::Maximize => -v,
                }
            }
        }
    }

    /// Secondary cost minimized over the primary optimizers.
    pub fn gamma2(&self, s: &AugmentedState) -> Option<f64> {
        let sat = |i: i64| ScalarFn::Saturating.eval(i, 1.0);
        Some(match &self.kind {
            CostKind::Root { .. } | CostKind::Rost { .. } | CostKind::Cave { .. } => return None,
            CostKind::AzemaYor => sat(s.m?) * self.x2(s),
            CostKind::Jacka { .. } => sat(s.abs_max()?) * self.x2(s),
            CostKind::Perkins { phi2, .. } => -self.x2(s) * phi2.eval(s.m?, -s.i?),
            CostKind::Range { phi2, .. } => self.x2(s) * phi2.eval(s.m?, -s.i?),
            CostKind::Vallois { concave_gamma: true, .. } => (-(s.l? as f64)).exp() * self.x2(s),
            CostKind::Vallois { concave_gamma: false, .. } => sat(s.l? as i64) * self.x2(s),
        })
    }

    /// Closed-form stop-go predicate for `going` continuing while `stopped`
    /// has stopped at the same level. Uses the secondary predicate where
    /// the entry has a secondary cost.
    pub fn sg_pair(&self, going: &AugmentedState, stopped: &AugmentedState) -> bool {
        if going.x != stopped.x {
            return false;
        }
        let (s, t) = (going.k, stopped.k);
        match &self.kind {
            CostKind::Root { .. } => s > t,
            CostKind::Rost { .. } => s < t,
            CostKind::Cave { t0, .. } => (s < t && t <= *t0) || (*t0 <= t && t < s),
            CostKind::AzemaYor => going.m > stopped.m,
            CostKind::Jacka { .. } => going.abs_max() > stopped.abs_max(),
            CostKind::Perkins { .. } => {
                let (a, b) = (pair(going), pair(stopped));
                a.0 <= b.0 && a.1 <= b.1 && a != b
            }
            CostKind::Range { .. } => {
                let (a, b) = (pair(going), pair(stopped));
                a.0 >= b.0 && a.1 >= b.1 && a != b
            }
            CostKind::Vallois { concave_gamma: true, .. } => going.l < stopped.l,
            CostKind::Vallois { concave_gamma: false, .. } => going.l > stopped.l,
        }
    }

    /// Coordinates of `s` in the cost's phase space, excluding the level.
    pub fn phase_coordinate(&self, s: &AugmentedState) -> Vec<i64> {
        match self.kind {
            CostKind::Root { .. } | CostKind::Rost { .. } | CostKind::Cave { .. } => vec![s.k as i64],
            CostKind::AzemaYor => vec![s.m.expect("max tracked")],
            CostKind::Jacka { .. } => vec![s.abs_max().expect("max and min tracked")],
            CostKind::Perkins { .. } | CostKind::Range { .. } => {
                let (a, b) = pair(s);
                vec![a, b]
            }
            CostKind::Vallois { .. } => vec![s.l.expect("zero visits tracked") as i64],
        }
    }

    /// Closure rules making the stopping region consistent with `sg_pair`.
    pub fn phase_rule(&self) -> Vec<PieceRule> {
        let all = |closure| vec![PieceRule { name: "all", k_min: 0, k_max: u32::MAX, closure }];
        match self.kind {
            CostKind::Root { .. } => all(Closure::Up),
            CostKind::Rost { .. } => all(Closure::Down),
            CostKind::Cave { t0, .. } => vec![
                PieceRule { name: "pre-t0", k_min: 0, k_max: t0, closure: Closure::Down },
                PieceRule { name: "post-t0", k_min: t0 + 1, k_max: u32::MAX, closure: Closure::Up },
            ],
            CostKind::AzemaYor | CostKind::Jacka { .. } | CostKind::Range { .. } => all(Closure::Up),
            CostKind::Perkins { .. } => all(Closure::Down),
            CostKind::Vallois { concave_gamma, .. } => all(if concave_gamma { Closure::Down } else { Closure::Up }),
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    pub fn time_step(&self) -> f64 {
        self.time_step
    }

    /// Builds a catalog entry from its problem-file form, e.g.
    /// `{"name": "root", "h": "t^2"}`.
    pub fn from_json(v: &Value, spec: &LatticeSpec) -> Result<CostFunctional> {
        let obj = v.as_object().ok_or_else(|| Error::Cost("cost must be an object".into()))?;
        let name = obj.get("name").and_then(Value::as_str).ok_or_else(|| Error::Cost("cost needs a name".into()))?;
        let func = |key: &str, default: ScalarFn| -> Result<ScalarFn> {
            obj.get(key).map_or(Ok(default), ScalarFn::from_json)
        };
        let allowed: &[&str] = match name {
            "root" | "rost" => &["name", "h"],
            "cave" => &["name", "t0", "phi"],
            "azema_yor" | "perkins" | "range" => &["name"],
            "jacka" => &["name", "phi"],
            "vallois" => &["name", "h", "direction"],
            other => return Err(Error::Cost(format!("unknown cost `{other}`"))),
        };
        if let Some(k) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::Cost(format!("unexpected field `{k}` for cost `{name}`")));
        }
        match name {
            "root" => root_cost(spec, func("h", ScalarFn::Square)?),
            "rost" => rost_cost(spec, func("h", ScalarFn::Sqrt)?),
            "cave" => {
                let t0 = obj
                    .get("t0")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| Error::Cost("cave needs an integer time index t0".into()))?;
                let phi = obj.get("phi").map(ScalarFn::from_json).transpose()?;
                cave_cost(spec, t0 as u32, phi)
            }
            "azema_yor" => azema_yor_cost(spec),
            "jacka" => jacka_cost(spec, func("phi", ScalarFn::Saturating)?),
            "perkins" => perkins_cost(spec, PairFn::SaturatingSum, PairFn::SaturatingSum),
            "range" => range_cost(spec, PairFn::SaturatingSum, PairFn::SaturatingSum),
            "vallois" => {
                let direction = match obj.get("direction").and_then(Value::as_str).unwrap_or("minimize") {
                    "minimize" => ValloisDirection::Minimize,
                    "maximize" => ValloisDirection::Maximize,
                    d => return Err(Error::Cost(format!("unknown direction `{d}`"))),
                };
                vallois_cost(spec, func("h", ScalarFn::Sqrt)?, direction)
            }
            _ => unreachable!(),
        }
    }
}

fn pair(s: &AugmentedState) -> (i64, i64) {
    (s.m.expect("max tracked"), -s.i.expect("min tracked"))
}

/// Minimize `E[h(τ)]` for convex `h`.
pub fn root_cost(spec: &LatticeSpec, h: ScalarFn) -> Result<CostFunctional> {
    require_convex("h", |k| h.eval(k, spec.time_step), 0, spec.steps as i64)?;
    CostFunctional::bind(spec, CostKind::Root { h })
}

/// Minimize `E[h(τ)]` for concave `h`.
pub fn rost_cost(spec: &LatticeSpec, h: ScalarFn) -> Result<CostFunctional> {
    require_concave("h", |k| h.eval(k, spec.time_step), 0, spec.steps as i64)?;
    CostFunctional::bind(spec, CostKind::Rost { h })
}

/// Minimize `E[φ(τ)]` where `φ` rises concavely to 1 at `t₀` (a time
/// index) and decays convexly afterwards. `None` selects the piecewise
/// default.
pub fn cave_cost(spec: &LatticeSpec, t0: u32, phi: Option<ScalarFn>) -> Result<CostFunctional> {
    if t0 == 0 {
        return Err(Error::Cost("cave needs t0 ≥ 1".into()));
    }
    let phi = phi.unwrap_or(ScalarFn::PiecewiseCave { t0: t0 as f64 * spec.time_step });
    let f = |k: i64| phi.eval(k, spec.time_step);
    let t0i = t0 as i64;
    let n = spec.steps as i64;
    if f(0).abs() > SHAPE_TOL || (f(t0i) - 1.0).abs() > SHAPE_TOL {
        return Err(Error::Cost("cave φ must satisfy φ(0) = 0 and φ(t0) = 1".into()));
    }
    require_concave("φ before t0", f, 0, t0i)?;
    require_convex("φ after t0", f, t0i, n.max(t0i))?;
    require_increasing("φ before t0", f, 0, t0i)?;
    if let Some(k) = (t0i..n).find(|&k| f(k + 1) >= f(k)) {
        return Err(Error::Cost(format!("cave φ must decrease after t0 (index {k})")));
    }
    CostFunctional::bind(spec, CostKind::Cave { t0, phi })
}

/// Maximize `E[max]`, ties broken by minimizing `E[φ(max) x²]`.
pub fn azema_yor_cost(spec: &LatticeSpec) -> Result<CostFunctional> {
    CostFunctional::bind(spec, CostKind::AzemaYor)
}

/// Maximize `E[φ(max |x|)]` for strictly increasing `φ` of the index.
pub fn jacka_cost(spec: &LatticeSpec, phi: ScalarFn) -> Result<CostFunctional> {
    require_increasing("φ", |a| phi.eval(a, spec.step_size), 0, spec.steps as i64 + 1)?;
    CostFunctional::bind(spec, CostKind::Jacka { phi })
}

/// Minimize `E[φ(max, −min)]`.
pub fn perkins_cost(spec: &LatticeSpec, phi: PairFn, phi2: PairFn) -> Result<CostFunctional> {
    CostFunctional::bind(spec, CostKind::Perkins { phi, phi2 })
}

/// Maximize `E[φ(max, −min)]`.
pub fn range_cost(spec: &LatticeSpec, phi: PairFn, phi2: PairFn) -> Result<CostFunctional> {
    CostFunctional::bind(spec, CostKind::Range { phi, phi2 })
}

/// Minimize or maximize `E[h(L)]` for `L` the visit count to zero; `h`
/// must be strictly convex or strictly concave on the count grid.
pub fn vallois_cost(spec: &LatticeSpec, h: ScalarFn, direction: ValloisDirection) -> Result<CostFunctional> {
    let sign = match direction {
        ValloisDirection::Minimize => 1.0,
        ValloisDirection::Maximize => -1.0,
    };
    let g = |l: i64| sign * h.eval(l, spec.step_size);
    let diffs = second_differences(g, 0, spec.steps as i64);
    let concave = diffs.iter().all(|&(_, d)| d < -SHAPE_TOL);
    let convex = diffs.iter().all(|&(_, d)| d > SHAPE_TOL);
    let concave_gamma = match (concave, convex) {
        (true, false) => true,
        (false, true) => false,
        _ if diffs.is_empty() => true,
        _ => return Err(Error::Cost("vallois h must be strictly convex or strictly concave".into())),
    };
    CostFunctional::bind(spec, CostKind::Vallois { h, direction, concave_gamma })
}

/// Change in `γ` (and `γ̃`) from swapping stop and go along one
/// deterministic continuation: `γ(going⊕h) + γ(stopped) − γ(going) − γ(stopped⊕h)`.
/// Positive means stopping `going` and continuing `stopped` is cheaper.
pub fn deterministic_swap_gain(
    cost: &CostFunctional,
    going: &AugmentedState,
    stopped: &AugmentedState,
    steps: &[i64],
) -> (f64, Option<f64>) {
    let (mut f, mut g) = (*going, *stopped);
    for &d in steps {
        f = f.step(d);
        g = g.step(d);
    }
    let primary = cost.gamma(&f) + cost.gamma(stopped) - cost.gamma(going) - cost.gamma(&g);
    let secondary = match (cost.gamma2(&f), cost.gamma2(stopped), cost.gamma2(going), cost.gamma2(&g)) {
        (Some(a), Some(b), Some(c), Some(d)) => Some(a + b - c - d),
        _ => None,
    };
    (primary, secondary)
}

/// All ±1 continuations of length `1..=depth`.
pub fn continuations(depth: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut layer: Vec<Vec<i64>> = vec![Vec::new()];
    for _ in 0..depth {
        layer = layer
            .into_iter()
            .flat_map(|p| {
                [1, -1].into_iter().map(move |d| {
                    let mut q = p.clone();
                    q.push(d);
                    q
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

/// Whether the swap inequality holds strictly for every deterministic
/// continuation of length `1..=depth`.
pub fn direct_stop_go(cost: &CostFunctional, going: &AugmentedState, stopped: &AugmentedState, depth: usize) -> bool {
    going.x == stopped.x
        && continuations(depth).iter().all(|h| deterministic_swap_gain(cost, going, stopped, h).0 > 0.0)
}
