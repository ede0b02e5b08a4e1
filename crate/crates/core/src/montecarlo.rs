//! Seeded simulation of stopping rules.
//!
//! Sample `j` of a run with seed `s` draws from its own ChaCha8 stream
//! (`seed_from_u64(s)`, stream `j`), so the aggregate over any split of
//! `0..n` across workers is the same integer count vector.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::costs::CostFunctional;
use crate::error::Result;
use crate::lattice::AugmentedState;
use crate::measures::DiscreteMeasure;
use crate::stopping::RandomizedStoppingTime;

/// Mean with a 95% normal confidence half-width `1.96·s/√n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleReport {
    pub n: u64,
    pub seed: u64,
    pub empirical: DiscreteMeasure,
    pub kolmogorov: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub expected_time: Estimate,
}

/// Kolmogorov distance tolerance from the DKW inequality at confidence
/// 99.9%, floored at 0.01.
pub fn dkw_tolerance(n: u64) -> f64 {
    ((2.0f64 / 0.001).ln() / (2.0 * n as f64)).sqrt().max(0.01)
}

/// Index of the state where sample `index` stops.
fn sample_one(xi: &RandomizedStoppingTime, seed: u64, index: u64) -> usize {
    let g = xi.graph();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let pick = |rng: &mut ChaCha8Rng, options: &[(usize, f64)]| -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for &(v, w) in options {
            acc += w;
            if u < acc {
                return v;
            }
        }
        options.last().expect("at least one option").0
    };
    let mut v = if g.roots.len() == 1 { g.roots[0].0 } else { pick(&mut rng, &g.roots) };
    loop {
        let p = xi.stop_prob()[v];
        if g.is_terminal(v) || p >= 1.0 || (p > 0.0 && rng.gen::<f64>() < p) {
            return v;
        }
        v = pick(&mut rng, &g.children[v]);
    }
}

/// Stopped state and elapsed steps of each of `n` samples.
pub fn sample_paths(xi: &RandomizedStoppingTime, n: u64, seed: u64) -> Vec<(AugmentedState, u32)> {
    let g = xi.graph();
    (0..n)
        .map(|j| {
            let v = sample_one(xi, seed, j);
            let s = g.states[v];
            let k0 = g.states[g.roots[0].0].k;
            (s, s.k - k0)
        })
        .collect()
}

/// Per-state stop counts of samples `0..n`, split into `workers`
/// contiguous ranges run on separate threads.
pub fn stop_counts(xi: &RandomizedStoppingTime, n: u64, seed: u64, workers: usize) -> Vec<u64> {
    let len = xi.graph().len();
    let workers = workers.max(1) as u64;
    let chunk = n.div_ceil(workers);
    let parts: Vec<Vec<u64>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let (lo, hi) = ((w * chunk).min(n), ((w + 1) * chunk).min(n));
                scope.spawn(move || {
                    let mut counts = vec![0u64; len];
                    for j in lo..hi {
                        counts[sample_one(xi, seed, j)] += 1;
                    }
                    counts
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sampling worker panicked")).collect()
    });
    let mut total = vec![0u64; len];
    for part in parts {
        for (t, c) in total.iter_mut().zip(part) {
            *t += c;
        }
    }
    total
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get()).min(8)
}

fn estimate(counts: &[u64], n: u64, value: impl Fn(usize) -> f64) -> Estimate {
    let (mut sum, mut sq) = (0.0, 0.0);
    for (v, &c) in counts.iter().enumerate() {
        if c > 0 {
            let x = value(v);
            sum += c as f64 * x;
            sq += c as f64 * x * x;
        }
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = if n > 1 { ((sq - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
    Estimate { mean, half_width: 1.96 * (var / nf).sqrt() }
}

/// Compares the empirical stopped law of `n` samples with `mu`. `tol`
/// defaults to [`dkw_tolerance`].
pub fn verify_embedding(
    xi: &RandomizedStoppingTime,
    mu: &DiscreteMeasure,
    n: u64,
    seed: u64,
    tol: Option<f64>,
) -> SampleReport {
    verify_embedding_on(xi, mu, n, seed, tol, default_workers())
}

pub fn verify_embedding_on(
    xi: &RandomizedStoppingTime,
    mu: &DiscreteMeasure,
    n: u64,
    seed: u64,
    tol: Option<f64>,
    workers: usize,
) -> SampleReport {
    let n = n.max(1);
    let g = xi.graph();
    let counts = stop_counts(xi, n, seed, workers);
    let mut levels: BTreeMap<i64, u64> = BTreeMap::new();
    for (v, &c) in counts.iter().enumerate() {
        if c > 0 {
            *levels.entry(g.states[v].x).or_default() += c;
        }
    }
    let empirical =
        DiscreteMeasure::from_masses(levels.into_iter().map(|(x, c)| (x, c as f64 / n as f64)).collect(), 0.0);
    let kolmogorov = empirical.kolmogorov_distance(mu);
    let tolerance = tol.unwrap_or_else(|| dkw_tolerance(n));
    let k0 = g.states[g.roots[0].0].k;
    let expected_time = estimate(&counts, n, |v| g.spec.time(g.states[v].k - k0));
    SampleReport { n, seed, empirical, kolmogorov, tolerance, passed: kolmogorov <= tolerance, expected_time }
}

/// Monte Carlo mean of the stopping cost.
pub fn estimate_cost(xi: &RandomizedStoppingTime, cost: &CostFunctional, n: u64, seed: u64) -> Result<Estimate> {
    estimate_cost_on(xi, cost, n, seed, default_workers())
}

pub fn estimate_cost_on(
    xi: &RandomizedStoppingTime,
    cost: &CostFunctional,
    n: u64,
    seed: u64,
    workers: usize,
) -> Result<Estimate> {
    let g = xi.graph();
    cost.check_features(&g.spec)?;
    let n = n.max(1);
    let counts = stop_counts(xi, n, seed, workers);
    Ok(estimate(&counts, n, |v| cost.gamma(&g.states[v])))
}
