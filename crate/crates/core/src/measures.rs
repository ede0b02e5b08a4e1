//! Finitely supported probability measures on lattice levels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Atoms sorted by level index, all with positive weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure", into = "RawMeasure")]
pub struct DiscreteMeasure {
    atoms: Vec<(i64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct RawMeasure {
    atoms: Vec<(i64, f64)>,
}

impl TryFrom<RawMeasure> for DiscreteMeasure {
    type Error = Error;
    fn try_from(raw: RawMeasure) -> Result<Self> {
        DiscreteMeasure::new(raw.atoms)
    }
}

impl From<DiscreteMeasure> for RawMeasure {
    fn from(m: DiscreteMeasure) -> Self {
        RawMeasure { atoms: m.atoms }
    }
}

impl DiscreteMeasure {
    /// Validates weights (nonnegative, summing to 1 within 1e-12) and
    /// distinct indices. Zero-weight atoms are dropped.
    pub fn new(atoms: Vec<(i64, f64)>) -> Result<Self> {
        let mut total = 0.0;
        for &(x, w) in &atoms {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Measure(format!("weight {w} at level {x} is not a probability")));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Measure(format!("weights sum to {total}, not 1")));
        }
        let mut atoms: Vec<(i64, f64)> = atoms.into_iter().filter(|a| a.1 > 0.0).collect();
        atoms.sort_by_key(|a| a.0);
        if atoms.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Measure("repeated level index".into()));
        }
        Ok(DiscreteMeasure { atoms })
    }

    /// Builds a measure from masses that sum to 1 up to rounding; the sum
    /// is not renormalized, only checked loosely.
    pub(crate) fn from_masses(masses: BTreeMap<i64, f64>, drop_below: f64) -> Self {
        DiscreteMeasure { atoms: masses.into_iter().filter(|&(_, w)| w > drop_below).collect() }
    }

    pub fn dirac(x: i64) -> Self {
        DiscreteMeasure { atoms: vec![(x, 1.0)] }
    }

    /// Uniform on the given distinct levels.
    pub fn uniform(levels: &[i64]) -> Result<Self> {
        let w = 1.0 / levels.len() as f64;
        let mut atoms: Vec<(i64, f64)> = levels.iter().map(|&x| (x, w)).collect();
        // Fix rounding so the sum is exactly representable as close to 1.
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if let Some(last) = atoms.last_mut() {
            last.1 += 1.0 - total;
        }
        Self::new(atoms)
    }

    pub fn atoms(&self) -> &[(i64, f64)] {
        &self.atoms
    }

    pub fn support(&self) -> Vec<i64> {
        self.atoms.iter().map(|a| a.0).collect()
    }

    pub fn weight(&self, x: i64) -> f64 {
        self.atoms.binary_search_by_key(&x, |a| a.0).map_or(0.0, |i| self.atoms[i].1)
    }

    /// `Σ (x·Δx)^p w`.
    pub fn moment(&self, p: u32, step_size: f64) -> f64 {
        self.atoms.iter().map(|&(x, w)| (x as f64 * step_size).powi(p as i32) * w).sum()
    }

    pub fn mean(&self, step_size: f64) -> f64 {
        self.moment(1, step_size)
    }

    pub fn variance(&self, step_size: f64) -> f64 {
        let m = self.mean(step_size);
        self.moment(2, step_size) - m * m
    }

    /// `−Σ |x − y| μ(dy)` in physical units, with `x` a physical value.
    pub fn potential(&self, x: f64, step_size: f64) -> f64 {
        -self.atoms.iter().map(|&(y, w)| (x - y as f64 * step_size).abs() * w).sum::<f64>()
    }

    /// `F(x) = μ((−∞, x])` for a level index.
    pub fn cdf(&self, x: i64) -> f64 {
        self.atoms.iter().take_while(|a| a.0 <= x).map(|a| a.1).sum()
    }

    /// Largest gap between the two distribution functions.
    pub fn kolmogorov_distance(&self, other: &DiscreteMeasure) -> f64 {
        let mut levels: Vec<i64> = self.support();
        levels.extend(other.support());
        levels.sort_unstable();
        levels.dedup();
        levels.into_iter().map(|x| (self.cdf(x) - other.cdf(x)).abs()).fold(0.0, f64::max)
    }

    /// Largest per-atom difference.
    pub fn max_atom_difference(&self, other: &DiscreteMeasure) -> f64 {
        let mut levels: Vec<i64> = self.support();
        levels.extend(other.support());
        levels.into_iter().map(|x| (self.weight(x) - other.weight(x)).abs()).fold(0.0, f64::max)
    }

    pub fn total_variation(&self, other: &DiscreteMeasure) -> f64 {
        let mut levels: Vec<i64> = self.support();
        levels.extend(other.support());
        levels.sort_unstable();
        levels.dedup();
        0.5 * levels.into_iter().map(|x| (self.weight(x) - other.weight(x)).abs()).sum::<f64>()
    }
}

/// Whether `λ ≼ μ` in convex order, on index units: equal means (within
/// 1e-10) and `U_λ ≥ U_μ` at every atom of either measure.
pub fn convex_order(lambda: &DiscreteMeasure, mu: &DiscreteMeasure) -> bool {
    if (lambda.mean(1.0) - mu.mean(1.0)).abs() > 1e-10 {
        return false;
    }
    lambda
        .support()
        .into_iter()
        .chain(mu.support())
        .all(|x| lambda.potential(x as f64, 1.0) >= mu.potential(x as f64, 1.0) - 1e-12)
}

/// Quantile (monotone) coupling of two measures: fills the joint law by
/// walking both distribution functions in increasing order.
pub fn quantile_coupling(lambda: &DiscreteMeasure, mu: &DiscreteMeasure) -> BTreeMap<(i64, i64), f64> {
    let mut out = BTreeMap::new();
    let a = lambda.atoms();
    let b = mu.atoms();
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a.first().map_or(0.0, |x| x.1), b.first().map_or(0.0, |x| x.1));
    while i < a.len() && j < b.len() {
        let m = ra.min(rb);
        if m > 0.0 {
            *out.entry((a[i].0, b[j].0)).or_insert(0.0) += m;
        }
        ra -= m;
        rb -= m;
        // Advance whichever side is exhausted; ties advance both.
        if ra <= 1e-15 {
            i += 1;
            ra = a.get(i).map_or(0.0, |x| x.1);
        }
        if rb <= 1e-15 {
            j += 1;
            rb = b.get(j).map_or(0.0, |x| x.1);
        }
    }
    out
}
