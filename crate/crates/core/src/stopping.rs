//! Randomized stopping times given by a stop probability per state.
//!
//! `p(s)` is the probability of stopping on arrival at `s` given the walk
//! has not stopped yet. Arrival masses follow from one forward pass.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::costs::CostFunctional;
use crate::error::{Error, Result};
use crate::lattice::{AugmentedState, StateGraph};
use crate::measures::DiscreteMeasure;

#[derive(Debug, Clone)]
pub struct RandomizedStoppingTime {
    graph: Arc<StateGraph>,
    stop_prob: Vec<f64>,
    arrival: Vec<f64>,
    stopped: Vec<f64>,
}

impl RandomizedStoppingTime {
    /// `p` is indexed like `graph.states`; terminal entries must be 1.
    pub fn from_stop_probabilities(graph: Arc<StateGraph>, p: Vec<f64>) -> Result<Self> {
        if p.len() != graph.len() {
            return Err(Error::Stopping(format!("{} stop probabilities for {} states", p.len(), graph.len())));
        }
        for (i, &v) in p.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Stopping(format!("p = {v} at state {}", graph.states[i])));
            }
            if graph.is_terminal(i) && v != 1.0 {
                return Err(Error::Stopping(format!("terminal state {} must stop", graph.states[i])));
            }
        }
        let mut arrival = vec![0.0; graph.len()];
        for &(r, w) in &graph.roots {
            arrival[r] += w;
        }
        let mut stopped = vec![0.0; graph.len()];
        for i in 0..graph.len() {
            stopped[i] = arrival[i] * p[i];
            let go = arrival[i] * (1.0 - p[i]);
            if go != 0.0 {
                for &(j, q) in &graph.children[i] {
                    arrival[j] += go * q;
                }
            }
        }
        Ok(RandomizedStoppingTime { graph, stop_prob: p, arrival, stopped })
    }

    /// Builds `p` from a per-state map; states missing from the map are an error.
    pub fn from_map(graph: Arc<StateGraph>, map: &BTreeMap<AugmentedState, f64>) -> Result<Self> {
        if let Some(s) = map.keys().find(|s| graph.index_of(s).is_none()) {
            return Err(Error::Unreachable(s.key()));
        }
        let p = graph
            .states
            .iter()
            .map(|s| map.get(s).copied().ok_or_else(|| Error::Stopping(format!("no stop probability for {s}"))))
            .collect::<Result<Vec<f64>>>()?;
        Self::from_stop_probabilities(graph, p)
    }

    /// Stops every path at time `k` (or at the horizon if it comes first).
    pub fn stop_at_time(graph: Arc<StateGraph>, k: u32) -> Result<Self> {
        let p = graph
            .states
            .iter()
            .enumerate()
            .map(|(i, s)| if s.k >= k || graph.is_terminal(i) { 1.0 } else { 0.0 })
            .collect();
        Self::from_stop_probabilities(graph, p)
    }

    pub fn graph(&self) -> &Arc<StateGraph> {
        &self.graph
    }

    pub fn stop_prob(&self) -> &[f64] {
        &self.stop_prob
    }

    pub fn arrival(&self) -> &[f64] {
        &self.arrival
    }

    pub fn stopped(&self) -> &[f64] {
        &self.stopped
    }

    /// Mass that arrives at each state and does not stop there.
    pub fn continuing(&self) -> Vec<f64> {
        self.arrival.iter().zip(&self.stopped).map(|(a, s)| a - s).collect()
    }

    fn root_time(&self) -> u32 {
        self.graph.roots.first().map_or(0, |&(r, _)| self.graph.states[r].k)
    }

    /// Law of the stopped level.
    pub fn pushforward_law(&self) -> DiscreteMeasure {
        let mut masses: BTreeMap<i64, f64> = BTreeMap::new();
        for (s, &w) in self.graph.states.iter().zip(&self.stopped) {
            if w > 0.0 {
                *masses.entry(s.x).or_default() += w;
            }
        }
        DiscreteMeasure::from_masses(masses, 0.0)
    }

    /// Law of the stopping time measured from the roots, as `(steps, mass)`.
    pub fn time_law(&self) -> BTreeMap<u32, f64> {
        let k0 = self.root_time();
        let mut out = BTreeMap::new();
        for (s, &w) in self.graph.states.iter().zip(&self.stopped) {
            if w > 0.0 {
                *out.entry(s.k - k0).or_default() += w;
            }
        }
        out
    }

    /// `E[τ]` in physical time, measured from the roots.
    pub fn expected_time(&self) -> f64 {
        let k0 = self.root_time();
        self.graph.states.iter().zip(&self.stopped).map(|(s, w)| w * self.graph.spec.time(s.k - k0)).sum()
    }

    pub fn expected_cost(&self, cost: &CostFunctional) -> Result<f64> {
        cost.check_features(&self.graph.spec)?;
        Ok(self
            .graph
            .states
            .iter()
            .zip(&self.stopped)
            .filter(|(_, w)| **w != 0.0)
            .map(|(s, w)| w * cost.gamma(s))
            .sum())
    }

    pub fn expected_secondary_cost(&self, cost: &CostFunctional) -> Result<Option<f64>> {
        cost.check_features(&self.graph.spec)?;
        if !cost.has_secondary() {
            return Ok(None);
        }
        Ok(Some(
            self.graph
                .states
                .iter()
                .zip(&self.stopped)
                .filter(|(_, w)| **w != 0.0)
                .map(|(s, w)| w * cost.gamma2(s).unwrap_or(0.0))
                .sum(),
        ))
    }

    /// Survival `H(s)`: probability of not having stopped before arriving
    /// at `s`, given the history class `s` represents. Computed as a
    /// forward product weighted by free-evolution mass; zero where the
    /// free walk never arrives.
    pub fn survival(&self) -> Vec<f64> {
        let g = &self.graph;
        let free = g.free_arrival();
        // Numerator: free-mass-weighted survival, accumulated forward.
        let mut weighted = vec![0.0; g.len()];
        for &(r, w) in &g.roots {
            weighted[r] += w;
        }
        let mut h = vec![0.0; g.len()];
        for i in 0..g.len() {
            h[i] = if free[i] > 0.0 { weighted[i] / free[i] } else { 0.0 };
            let carry = free[i] * h[i] * (1.0 - self.stop_prob[i]);
            for &(j, q) in &g.children[i] {
                weighted[j] += carry * q;
            }
        }
        h
    }

    /// Future of `ξ` after arriving at `s`, renormalized to unit mass. If
    /// `ξ` has stopped all mass before `s`, the result stops at once.
    pub fn conditional(&self, s: &AugmentedState) -> Result<RandomizedStoppingTime> {
        let idx = self.graph.index_of(s).ok_or_else(|| Error::Unreachable(s.key()))?;
        let cap = usize::MAX;
        let sub = Arc::new(StateGraph::from_roots(&self.graph.spec, &[(*s, 1.0)], cap)?);
        let alive = self.arrival[idx] > 0.0;
        let p = sub
            .states
            .iter()
            .enumerate()
            .map(|(i, t)| {
                if i == 0 && !alive {
                    1.0
                } else {
                    self.stop_prob[self.graph.index_of(t).expect("descendant of a graph state")]
                }
            })
            .collect();
        RandomizedStoppingTime::from_stop_probabilities(sub, p)
    }

    /// Law of the level at `τ ∧ k`.
    pub fn stopped_law_at(&self, k: u32) -> DiscreteMeasure {
        let mut masses: BTreeMap<i64, f64> = BTreeMap::new();
        for (i, s) in self.graph.states.iter().enumerate() {
            let w = match s.k.cmp(&k) {
                std::cmp::Ordering::Less => self.stopped[i],
                std::cmp::Ordering::Equal => self.arrival[i],
                std::cmp::Ordering::Greater => 0.0,
            };
            if w > 0.0 {
                *masses.entry(s.x).or_default() += w;
            }
        }
        DiscreteMeasure::from_masses(masses, 0.0)
    }

    /// Stopped mass per state, keyed by state.
    pub fn stopped_joint_law(&self) -> BTreeMap<AugmentedState, f64> {
        self.graph.states.iter().zip(&self.stopped).filter(|(_, w)| **w > 0.0).map(|(s, w)| (*s, *w)).collect()
    }

    /// Largest per-state difference of stopped mass; states absent from
    /// one rule count as zero there.
    pub fn joint_law_distance(&self, other: &RandomizedStoppingTime) -> f64 {
        let a = self.stopped_joint_law();
        let b = other.stopped_joint_law();
        a.keys()
            .chain(b.keys())
            .map(|s| (a.get(s).unwrap_or(&0.0) - b.get(s).unwrap_or(&0.0)).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> StopProbJson {
        StopProbJson { stop_prob: self.graph.states.iter().zip(&self.stop_prob).map(|(s, p)| (s.key(), *p)).collect() }
    }

    pub fn from_json(graph: Arc<StateGraph>, json: &StopProbJson) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (key, p) in &json.stop_prob {
            let s = AugmentedState::parse_key(key, &graph.spec.tracked)?;
            if map.insert(s, *p).is_some() {
                return Err(Error::Parse(format!("state {key} listed twice")));
            }
        }
        Self::from_map(graph, &map)
    }
}

/// `{"stop_prob": [[key, p], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopProbJson {
    pub stop_prob: Vec<(String, f64)>,
}
