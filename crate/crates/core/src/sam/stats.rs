//! Single-pass basis activation statistics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::spline::BSplineSpec;

/// Fixed-point scale for the running sums. Accumulating integers keeps the
/// result independent of sample order and shard boundaries.
const FIX_SCALE: f64 = (1u128 << 96) as f64;
const SHARD: usize = 4096;

#[inline]
fn to_fix(v: f64) -> i128 {
    (v * FIX_SCALE) as i128
}

#[inline]
fn from_fix(v: i128) -> f64 {
    v as f64 / FIX_SCALE
}

/// Mergeable `(cnt, s1, s2)` accumulator for one input channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisAccumulator {
    samples: u64,
    cnt: Vec<u64>,
    s1: Vec<i128>,
    s2: Vec<i128>,
}

impl BasisAccumulator {
    pub fn new(num_basis: usize) -> Self {
        Self { samples: 0, cnt: vec![0; num_basis], s1: vec![0; num_basis], s2: vec![0; num_basis] }
    }

    /// Out-of-domain inputs are clamped, as in the layer.
    pub fn push(&mut self, spec: &BSplineSpec<f64>, x: f64, theta: f64) {
        self.samples += 1;
        let act = spec.active(spec.clamp(x)).expect("clamped input is in domain");
        for (k, &b) in act.values.iter().enumerate() {
            if b > theta {
                let i = act.first + k;
                self.cnt[i] += 1;
                self.s1[i] += to_fix(b);
                self.s2[i] += to_fix(b * b);
            }
        }
    }

    pub fn merge(&mut self, other: &Self) {
        assert_eq!(self.cnt.len(), other.cnt.len(), "merging accumulators of different width");
        self.samples += other.samples;
        for i in 0..self.cnt.len() {
            self.cnt[i] += other.cnt[i];
            self.s1[i] += other.s1[i];
            self.s2[i] += other.s2[i];
        }
    }

    pub fn finish(&self) -> BasisStats {
        let n = self.samples.max(1) as f64;
        let mut out = BasisStats {
            samples: self.samples,
            p: Vec::with_capacity(self.cnt.len()),
            mu: Vec::with_capacity(self.cnt.len()),
            var: Vec::with_capacity(self.cnt.len()),
            cnt: self.cnt.clone(),
        };
        for i in 0..self.cnt.len() {
            let c = self.cnt[i].max(1) as f64;
            let mu = from_fix(self.s1[i]) / c;
            let var = from_fix(self.s2[i]) / c - mu * mu;
            out.p.push(self.cnt[i] as f64 / n);
            out.mu.push(mu);
            out.var.push(var.max(0.0));
        }
        out
    }
}

/// Per-basis activation probability, active-sample mean and variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisStats {
    pub samples: u64,
    pub p: Vec<f64>,
    pub mu: Vec<f64>,
    pub var: Vec<f64>,
    pub cnt: Vec<u64>,
}

impl BasisStats {
    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn sigma(&self, i: usize) -> f64 {
        self.var[i].sqrt()
    }
}

/// Statistics of one channel's values. `theta` is the activation threshold
/// (0 = exact support).
pub fn profile_stats(values: &[f64], spec: &BSplineSpec<f64>, theta: f64) -> BasisStats {
    values
        .par_chunks(SHARD)
        .map(|chunk| {
            let mut acc = BasisAccumulator::new(spec.num_basis());
            for &x in chunk {
                acc.push(spec, x, theta);
            }
            acc
        })
        .reduce(
            || BasisAccumulator::new(spec.num_basis()),
            |mut a, b| {
                a.merge(&b);
                a
            },
        )
        .finish()
}

/// One [`BasisStats`] per input channel of row-major samples `rows[s][j]`.
pub fn profile_channels(rows: &[&[f64]], spec: &BSplineSpec<f64>, theta: f64) -> Vec<BasisStats> {
    let in_dim = rows.first().map_or(0, |r| r.len());
    (0..in_dim)
        .map(|j| {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            profile_stats(&col, spec, theta)
        })
        .collect()
}
