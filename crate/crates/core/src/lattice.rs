//! Random-walk lattices and their augmented state graphs.
//!
//! A state is a time index, a level index and whichever path features the
//! cost needs: running max, running min, and the number of visits to level
//! zero strictly before the current time. Everything is an integer index;
//! physical values are `index · Δx` and `k · Δt`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// Up or down with probability ½ each.
    Symmetric,
    /// Deterministic +1 step.
    Drift,
    Custom {
        p_up: f64,
    },
}

impl Kernel {
    /// `(step, probability)` branches with positive probability, up first.
    pub fn branches(&self) -> Vec<(i64, f64)> {
        let raw = match *self {
            Kernel::Symmetric => vec![(1, 0.5), (-1, 0.5)],
            Kernel::Drift => vec![(1, 1.0)],
            Kernel::Custom { p_up } => vec![(1, p_up), (-1, 1.0 - p_up)],
        };
        raw.into_iter().filter(|&(_, p)| p > 0.0).collect()
    }

    pub fn is_martingale(&self) -> bool {
        match *self {
            Kernel::Symmetric => true,
            Kernel::Drift => false,
            Kernel::Custom { p_up } => p_up == 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Max,
    Min,
    ZeroVisits,
}

impl Feature {
    pub fn name(self) -> &'static str {
        match self {
            Feature::Max => "max",
            Feature::Min => "min",
            Feature::ZeroVisits => "zero_visits",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Tracked {
    pub max: bool,
    pub min: bool,
    pub zero_visits: bool,
}

impl Tracked {
    pub const NONE: Tracked = Tracked { max: false, min: false, zero_visits: false };

    pub fn from_features(features: &[Feature]) -> Self {
        let mut t = Tracked::NONE;
        for f in features {
            t.insert(*f);
        }
        t
    }

    pub fn insert(&mut self, f: Feature) {
        match f {
            Feature::Max => self.max = true,
            Feature::Min => self.min = true,
            Feature::ZeroVisits => self.zero_visits = true,
        }
    }

    pub fn contains(&self, f: Feature) -> bool {
        match f {
            Feature::Max => self.max,
            Feature::Min => self.min,
            Feature::ZeroVisits => self.zero_visits,
        }
    }

    pub fn features(&self) -> Vec<Feature> {
        [Feature::Max, Feature::Min, Feature::ZeroVisits].into_iter().filter(|f| self.contains(*f)).collect()
    }

    /// First feature of `needed` that is not tracked.
    pub fn missing(&self, needed: &Tracked) -> Option<Feature> {
        needed.features().into_iter().find(|f| !self.contains(*f))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    pub steps: usize,
    pub step_size: f64,
    pub time_step: f64,
    pub kernel: Kernel,
    pub tracked: Tracked,
    /// Allowed starting levels. Empty means any level.
    pub start_support: Vec<i64>,
}

impl LatticeSpec {
    /// Symmetric walk with Brownian scaling `Δt = Δx²`.
    pub fn symmetric(steps: usize, step_size: f64) -> Self {
        LatticeSpec {
            steps,
            step_size,
            time_step: step_size * step_size,
            kernel: Kernel::Symmetric,
            tracked: Tracked::NONE,
            start_support: Vec::new(),
        }
    }

    pub fn drift(steps: usize, step_size: f64, time_step: f64) -> Self {
        LatticeSpec { kernel: Kernel::Drift, time_step, ..Self::symmetric(steps, step_size) }
    }

    pub fn with_tracked(mut self, features: &[Feature]) -> Self {
        self.tracked = Tracked::from_features(features);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::Lattice(format!("step size must be positive, got {}", self.step_size)));
        }
        if !(self.time_step > 0.0 && self.time_step.is_finite()) {
            return Err(Error::Lattice(format!("time step must be positive, got {}", self.time_step)));
        }
        match self.kernel {
            Kernel::Symmetric => {
                let want = self.step_size * self.step_size;
                if (self.time_step - want).abs() > 1e-12 * want.max(1.0) {
                    return Err(Error::Lattice(format!(
                        "symmetric kernel needs Δt = Δx² = {want}, got {}",
                        self.time_step
                    )));
                }
            }
            Kernel::Custom { p_up } if !(0.0..=1.0).contains(&p_up) => {
                return Err(Error::Lattice(format!("p_up must lie in [0,1], got {p_up}")));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn time(&self, k: u32) -> f64 {
        k as f64 * self.time_step
    }

    pub fn value(&self, x: i64) -> f64 {
        x as f64 * self.step_size
    }

    pub fn start_state(&self, x: i64) -> AugmentedState {
        AugmentedState {
            k: 0,
            x,
            m: self.tracked.max.then_some(x),
            i: self.tracked.min.then_some(x),
            l: self.tracked.zero_visits.then_some(0),
        }
    }
}

/// `(k, x, m?, i?, l?)`. Ordering is lexicographic in that field order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AugmentedState {
    pub k: u32,
    pub x: i64,
    pub m: Option<i64>,
    pub i: Option<i64>,
    pub l: Option<u32>,
}

impl AugmentedState {
    /// The state after one step to level `x + dx`, ignoring the horizon.
    pub fn step(&self, dx: i64) -> AugmentedState {
        let x = self.x + dx;
        AugmentedState {
            k: self.k + 1,
            x,
            m: self.m.map(|m| m.max(x)),
            i: self.i.map(|i| i.min(x)),
            l: self.l.map(|l| l + u32::from(self.x == 0)),
        }
    }

    /// `max(m, −i)`, the running maximum of `|x|`.
    pub fn abs_max(&self) -> Option<i64> {
        Some(self.m?.max(-self.i?))
    }

    /// Key of the form `k:x[:m][:i][:l]`.
    pub fn key(&self) -> String {
        self.to_string()
    }

    pub fn parse_key(key: &str, tracked: &Tracked) -> Result<AugmentedState> {
        let bad = || Error::Parse(format!("bad state key `{key}`"));
        let parts: Vec<&str> = key.split(':').collect();
        let want = 2 + tracked.features().len();
        if parts.len() != want {
            return Err(bad());
        }
        let k: u32 = parts[0].parse().map_err(|_| bad())?;
        let x: i64 = parts[1].parse().map_err(|_| bad())?;
        let mut rest = parts[2..].iter();
        let mut next = || rest.next().ok_or_else(bad);
        let m = if tracked.max { Some(next()?.parse().map_err(|_| bad())?) } else { None };
        let i = if tracked.min { Some(next()?.parse().map_err(|_| bad())?) } else { None };
        let l = if tracked.zero_visits { Some(next()?.parse().map_err(|_| bad())?) } else { None };
        Ok(AugmentedState { k, x, m, i, l })
    }
}

impl fmt::Display for AugmentedState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.k, self.x)?;
        for v in [self.m, self.i].into_iter().flatten() {
            write!(f, ":{v}")?;
        }
        if let Some(l) = self.l {
            write!(f, ":{l}")?;
        }
        Ok(())
    }
}

/// Kernel branches out of `s`; empty at the horizon.
pub fn child_states(spec: &LatticeSpec, s: &AugmentedState) -> Vec<(AugmentedState, f64)> {
    if s.k as usize >= spec.steps {
        return Vec::new();
    }
    spec.kernel.branches().into_iter().map(|(dx, p)| (s.step(dx), p)).collect()
}

/// Augmented state at the end of a path given by its level indices.
pub fn path_prefix_state(spec: &LatticeSpec, prefix: &[i64]) -> Result<AugmentedState> {
    let (&first, rest) = prefix.split_first().ok_or_else(|| Error::Path("empty prefix".into()))?;
    if rest.len() > spec.steps {
        return Err(Error::Path(format!("prefix has {} steps, horizon is {}", rest.len(), spec.steps)));
    }
    let branches = spec.kernel.branches();
    let mut s = spec.start_state(first);
    for &x in rest {
        let dx = x - s.x;
        if !branches.iter().any(|&(d, _)| d == dx) {
            return Err(Error::Path(format!("step {} → {} at time {} is not allowed", s.x, x, s.k)));
        }
        s = s.step(dx);
    }
    Ok(s)
}

/// Reachable augmented states in topological order (sorted by `k`, then
/// by the remaining fields).
#[derive(Debug, Clone)]
pub struct StateGraph {
    pub spec: LatticeSpec,
    pub states: Vec<AugmentedState>,
    pub children: Vec<Vec<(usize, f64)>>,
    pub parents: Vec<Vec<(usize, f64)>>,
    /// Initial mass per root state.
    pub roots: Vec<(usize, f64)>,
    index: HashMap<AugmentedState, usize>,
}

impl StateGraph {
    /// Graph of everything reachable from the weighted `roots`.
    pub fn from_roots(spec: &LatticeSpec, roots: &[(AugmentedState, f64)], cap: usize) -> Result<Self> {
        spec.validate()?;
        let branches = spec.kernel.branches();
        let mut by_k: BTreeMap<u32, BTreeSet<AugmentedState>> = BTreeMap::new();
        for (s, _) in roots {
            if s.k as usize > spec.steps {
                return Err(Error::Lattice(format!("root {s} lies beyond the horizon")));
            }
            by_k.entry(s.k).or_default().insert(*s);
        }
        let mut states = Vec::new();
        let mut k = match by_k.keys().next() {
            Some(&k) => k,
            None => return Err(Error::Lattice("no root states".into())),
        };
        loop {
            let level = by_k.remove(&k).unwrap_or_default();
            if level.is_empty() && by_k.is_empty() {
                break;
            }
            if (k as usize) < spec.steps {
                let next = by_k.entry(k + 1).or_default();
                for s in &level {
                    for &(dx, _) in &branches {
                        next.insert(s.step(dx));
                    }
                }
            }
            states.extend(level);
            if states.len() > cap {
                return Err(Error::StateCap { cap });
            }
            k += 1;
        }
        let index: HashMap<AugmentedState, usize> = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let mut children = vec![Vec::new(); states.len()];
        let mut parents = vec![Vec::new(); states.len()];
        for (i, s) in states.iter().enumerate() {
            for (c, p) in child_states(spec, s) {
                let j = index[&c];
                children[i].push((j, p));
                parents[j].push((i, p));
            }
        }
        let mut root_mass: BTreeMap<usize, f64> = BTreeMap::new();
        for (s, w) in roots {
            *root_mass.entry(index[s]).or_default() += w;
        }
        Ok(StateGraph { spec: spec.clone(), states, children, parents, roots: root_mass.into_iter().collect(), index })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, s: &AugmentedState) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn is_terminal(&self, idx: usize) -> bool {
        self.states[idx].k as usize >= self.spec.steps
    }

    /// Arrival mass under free evolution (never stopping).
    pub fn free_arrival(&self) -> Vec<f64> {
        let mut a = vec![0.0; self.len()];
        for &(r, w) in &self.roots {
            a[r] += w;
        }
        for i in 0..self.len() {
            let ai = a[i];
            for &(j, p) in &self.children[i] {
                a[j] += ai * p;
            }
        }
        a
    }

    /// Levels present in the graph, ascending.
    pub fn levels(&self) -> Vec<i64> {
        let set: BTreeSet<i64> = self.states.iter().map(|s| s.x).collect();
        set.into_iter().collect()
    }
}

/// Every state reachable from `λ` under free evolution.
pub fn enumerate_reachable(spec: &LatticeSpec, lambda: &DiscreteMeasure, cap: usize) -> Result<StateGraph> {
    if !spec.start_support.is_empty() {
        if let Some(&(x, _)) = lambda.atoms().iter().find(|(x, _)| !spec.start_support.contains(x)) {
            return Err(Error::Measure(format!("start level {x} is outside the start support")));
        }
    }
    let roots: Vec<(AugmentedState, f64)> = lambda.atoms().iter().map(|&(x, w)| (spec.start_state(x), w)).collect();
    StateGraph::from_roots(spec, &roots, cap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn delta0() -> DiscreteMeasure {
        DiscreteMeasure::dirac(0)
    }

    #[test]
    fn binomial_tree_states() {
        let g = enumerate_reachable(&LatticeSpec::symmetric(2, 1.0), &delta0(), 1000).unwrap();
        let keys: Vec<String> = g.states.iter().map(|s| s.key()).collect();
        assert_eq!(keys, ["0:0", "1:-1", "1:1", "2:-2", "2:0", "2:2"]);
    }

    #[test]
    fn drift_is_a_chain() {
        let g = enumerate_reachable(&LatticeSpec::drift(2, 1.0, 1.0), &delta0(), 100).unwrap();
        let keys: Vec<String> = g.states.iter().map(|s| s.key()).collect();
        assert_eq!(keys, ["0:0", "1:1", "2:2"]);
        assert_eq!(g.children[0], vec![(1, 1.0)]);
    }

    #[test]
    fn max_splits_histories() {
        let spec = LatticeSpec::symmetric(2, 1.0).with_tracked(&[Feature::Max]);
        let g = enumerate_reachable(&spec, &delta0(), 100).unwrap();
        let at_origin: Vec<String> = g.states.iter().filter(|s| s.k == 2 && s.x == 0).map(|s| s.key()).collect();
        assert_eq!(at_origin, ["2:0:0", "2:0:1"]);
    }

    #[test]
    fn child_examples() {
        let spec = LatticeSpec::symmetric(3, 1.0);
        let s = AugmentedState { k: 1, x: 1, m: None, i: None, l: None };
        let c: Vec<(String, f64)> = child_states(&spec, &s).into_iter().map(|(s, p)| (s.key(), p)).collect();
        assert_eq!(c, [("2:2".to_string(), 0.5), ("2:0".to_string(), 0.5)]);

        let spec = spec.with_tracked(&[Feature::Max]);
        let s = AugmentedState { m: Some(1), ..s };
        let c: Vec<String> = child_states(&spec, &s).into_iter().map(|(s, _)| s.key()).collect();
        assert_eq!(c, ["2:2:2", "2:0:1"]);

        let end = AugmentedState { k: 3, x: 1, m: Some(1), i: None, l: None };
        assert!(child_states(&spec, &end).is_empty());
    }

    #[test]
    fn prefix_examples() {
        let spec = LatticeSpec::symmetric(4, 1.0).with_tracked(&[Feature::Max]);
        assert_eq!(path_prefix_state(&spec, &[0, 1, 0]).unwrap().key(), "2:0:1");
        assert_eq!(path_prefix_state(&spec, &[0]).unwrap().key(), "0:0:0");
        let spec = LatticeSpec::symmetric(4, 1.0).with_tracked(&[Feature::ZeroVisits]);
        assert_eq!(path_prefix_state(&spec, &[0, -1, 0, 1]).unwrap().key(), "3:1:2");
        assert!(path_prefix_state(&spec, &[0, 2]).is_err());
        assert!(path_prefix_state(&spec, &[0, 1, 0, 1, 0, 1]).is_err());
    }

    #[test]
    fn keys_round_trip() {
        let tracked = Tracked { max: true, min: true, zero_visits: true };
        let s = AugmentedState { k: 7, x: -2, m: Some(3), i: Some(-4), l: Some(2) };
        assert_eq!(s.key(), "7:-2:3:-4:2");
        assert_eq!(AugmentedState::parse_key(&s.key(), &tracked).unwrap(), s);
        assert!(AugmentedState::parse_key("7:-2:3", &tracked).is_err());
    }

    #[test]
    fn brownian_scaling_enforced() {
        let mut spec = LatticeSpec::symmetric(2, 0.5);
        assert!(spec.validate().is_ok());
        spec.time_step = 0.5;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn state_cap_is_an_error() {
        let spec = LatticeSpec::symmetric(30, 1.0).with_tracked(&[Feature::Max, Feature::Min]);
        assert!(matches!(enumerate_reachable(&spec, &delta0(), 1000), Err(Error::StateCap { .. })));
    }

    #[test]
    fn transition_probabilities_sum_to_one() {
        let spec = LatticeSpec::symmetric(6, 1.0).with_tracked(&[Feature::Max, Feature::Min, Feature::ZeroVisits]);
        let g = enumerate_reachable(&spec, &delta0(), 100_000).unwrap();
        for i in 0..g.len() {
            let total: f64 = g.children[i].iter().map(|c| c.1).sum();
            if g.is_terminal(i) {
                assert!(g.children[i].is_empty());
            } else {
                assert!((total - 1.0).abs() <= 1e-12);
            }
        }
    }
}
