//! The one-dimensional discrete Gaussian `D_{Z,α,c}`.
//!
//! Every sampler in the crate reduces to repeated draws from this
//! distribution with a different `(α, c)` per call, so sampling builds a
//! small inverse-CDF table over a truncated support each time. All weights
//! are evaluated in the log domain with the maximum subtracted, which keeps
//! small `α` from underflowing.

use rand::Rng;

use crate::error::{Error, Result};

/// Default bound on the probability mass dropped by truncation.
pub const DEFAULT_TAIL_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gaussian1D {
    pub alpha: f64,
    pub center: f64,
}

impl Gaussian1D {
    pub fn new(alpha: f64, center: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
        }
        if !center.is_finite() {
            return Err(Error::invalid(format!("center must be finite, got {center}")));
        }
        Ok(Self { alpha, center })
    }

    /// `ln ρ_{α,c}(k) = -(k - c)² / 2α²`.
    #[inline]
    pub fn log_weight(&self, k: i64) -> f64 {
        let d = k as f64 - self.center;
        -d * d / (2.0 * self.alpha * self.alpha)
    }
}

/// A finite integer interval together with a certified bound on the
/// normalized mass outside it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegerSupport {
    pub lo: i64,
    pub hi: i64,
    pub omitted_mass_bound: f64,
}

impl IntegerSupport {
    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }

    pub fn contains(&self, k: i64) -> bool {
        self.lo <= k && k <= self.hi
    }
}

/// Truncation interval `[⌊c - w⌋, ⌈c + w⌉]` with `w = α·√(2 ln(4/ε)) + 1`.
pub fn support_bounds(p: Gaussian1D, tail_eps: f64) -> IntegerSupport {
    assert!(tail_eps > 0.0 && tail_eps < 1.0, "tail_eps must lie in (0, 1)");
    let w = p.alpha * (2.0 * (4.0 / tail_eps).ln()).sqrt() + 1.0;
    let lo = (p.center - w).floor() as i64;
    let hi = (p.center + w).ceil() as i64;

    // Σ_{j≥0} exp(-(d+j)²/2α²) ≤ exp(-d²/2α²) / (1 - exp(-d/α²)), d > 0.
    let a2 = p.alpha * p.alpha;
    let tail = |d: f64| (-d * d / (2.0 * a2)).exp() / -(-d / a2).exp_m1();
    let tails = tail((hi + 1) as f64 - p.center) + tail(p.center - (lo - 1) as f64);
    // Σ_Z ρ ≥ ∫ρ - max ρ = α√(2π) - 1, and the nearest integer alone is in the support.
    let nearest = (p.center - p.center.round()).abs();
    let floor = (-nearest * nearest / (2.0 * a2))
        .exp()
        .max(p.alpha * (2.0 * std::f64::consts::PI).sqrt() - 1.0 - tails);
    IntegerSupport {
        lo,
        hi,
        omitted_mass_bound: tails / floor,
    }
}

/// Inverse-CDF table over an ordered list of integers.
#[derive(Clone, Debug)]
pub(crate) struct InverseCdf {
    values: Vec<i64>,
    cdf: Vec<f64>,
}

impl InverseCdf {
    fn new(values: Vec<i64>, log_weights: &[f64]) -> Self {
        let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = log_weights
            .iter()
            .map(|lw| {
                acc += (lw - max).exp();
                acc
            })
            .collect();
        for c in &mut cdf {
            *c /= acc;
        }
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        Self { values, cdf }
    }

    /// Smallest value whose cumulative probability reaches `u`.
    fn invert(&self, u: f64) -> i64 {
        let idx = self.cdf.partition_point(|&c| c < u);
        self.values[idx.min(self.values.len() - 1)]
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        self.invert(rng.gen::<f64>())
    }
}

fn log_sum_exp(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + it.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `ln Σ_{j=lo}^{hi} ρ_{α,c}(j)`. Weights are generated outward from the
/// integer nearest `c` with the ratio recurrence
/// `ρ(k±1)/ρ(k) = exp(-(1 ± 2(k - c)) / 2α²)`, so only a few exponentials
/// are evaluated; the result is relative to `ρ(k0)`, which is never below
/// the other weights.
fn log_normalizer(p: Gaussian1D, lo: i64, hi: i64) -> f64 {
    let k0 = (p.center.round() as i64).clamp(lo, hi);
    let inv = 1.0 / (2.0 * p.alpha * p.alpha);
    let q = (-2.0 * inv).exp();
    let d0 = k0 as f64 - p.center;
    let mut sum = 1.0;
    for dir in [1.0, -1.0] {
        let mut w = 1.0;
        let mut ratio = (-(1.0 + 2.0 * dir * d0) * inv).exp();
        let steps = if dir > 0.0 { hi - k0 } else { k0 - lo };
        for _ in 0..steps {
            w *= ratio;
            if w == 0.0 {
                break;
            }
            sum += w;
            ratio *= q;
        }
    }
    p.log_weight(k0) + sum.ln()
}

/// `ρ_{α,c}(k) / Σ_{j ∈ support} ρ_{α,c}(j)`, zero outside the truncated support.
pub fn pmf(p: Gaussian1D, k: i64) -> f64 {
    pmf_with_tail(p, k, DEFAULT_TAIL_EPS)
}

pub fn pmf_with_tail(p: Gaussian1D, k: i64, tail_eps: f64) -> f64 {
    let s = support_bounds(p, tail_eps);
    if !s.contains(k) {
        return 0.0;
    }
    (p.log_weight(k) - log_normalizer(p, s.lo, s.hi)).exp()
}

fn support_table(p: Gaussian1D) -> InverseCdf {
    let s = support_bounds(p, DEFAULT_TAIL_EPS);
    let values: Vec<i64> = (s.lo..=s.hi).collect();
    let lw: Vec<f64> = values.iter().map(|&k| p.log_weight(k)).collect();
    InverseCdf::new(values, &lw)
}

/// Exact inversion sampling over the truncated support.
pub fn sample<R: Rng + ?Sized>(p: Gaussian1D, rng: &mut R) -> i64 {
    support_table(p).sample(rng)
}

fn normalized_set(allowed: &[i64]) -> Result<Vec<i64>> {
    if allowed.is_empty() {
        return Err(Error::invalid("allowed set is empty"));
    }
    let mut v = allowed.to_vec();
    v.sort_unstable();
    v.dedup();
    Ok(v)
}

/// Samples `k ∈ allowed` with probability proportional to `ρ_{α,c}(k)`.
pub fn sample_restricted<R: Rng + ?Sized>(p: Gaussian1D, allowed: &[i64], rng: &mut R) -> Result<i64> {
    let values = normalized_set(allowed)?;
    Ok(restricted_table(p, values).sample(rng))
}

fn restricted_table(p: Gaussian1D, values: Vec<i64>) -> InverseCdf {
    let lw: Vec<f64> = values.iter().map(|&k| p.log_weight(k)).collect();
    InverseCdf::new(values, &lw)
}

/// Probability of `k` under the restriction of `D_{Z,α,c}` to `allowed`.
pub fn pmf_restricted(p: Gaussian1D, allowed: &[i64], k: i64) -> Result<f64> {
    let values = normalized_set(allowed)?;
    if values.binary_search(&k).is_err() {
        return Ok(0.0);
    }
    let lz = log_sum_exp(values.iter().map(|&j| p.log_weight(j)));
    Ok((p.log_weight(k) - lz).exp())
}

/// Coordinate alphabet of a sampler: all of `Z`, or a finite set such as the
/// integer labels of a constellation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum Alphabet {
    #[default]
    Integers,
    Finite(Vec<i64>),
}

impl Alphabet {
    /// A finite alphabet; values are sorted and deduplicated.
    pub fn finite(values: &[i64]) -> Result<Self> {
        Ok(Alphabet::Finite(normalized_set(values)?))
    }

    pub fn contains(&self, k: i64) -> bool {
        match self {
            Alphabet::Integers => true,
            Alphabet::Finite(v) => v.binary_search(&k).is_ok(),
        }
    }

    pub fn values(&self) -> Option<&[i64]> {
        match self {
            Alphabet::Integers => None,
            Alphabet::Finite(v) => Some(v),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, p: Gaussian1D, rng: &mut R) -> i64 {
        match self {
            Alphabet::Integers => sample(p, rng),
            Alphabet::Finite(v) => restricted_table(p, v.clone()).sample(rng),
        }
    }

    pub fn pmf(&self, p: Gaussian1D, k: i64) -> f64 {
        match self {
            Alphabet::Integers => pmf(p, k),
            Alphabet::Finite(v) => pmf_restricted(p, v, k).expect("finite alphabets are non-empty"),
        }
    }

    /// Values with non-zero probability under `p`, with their probabilities.
    pub fn table(&self, p: Gaussian1D) -> Vec<(i64, f64)> {
        let values: Vec<i64> = match self {
            Alphabet::Integers => {
                let s = support_bounds(p, DEFAULT_TAIL_EPS);
                (s.lo..=s.hi).collect()
            }
            Alphabet::Finite(v) => v.clone(),
        };
        let lz = log_sum_exp(values.iter().map(|&k| p.log_weight(k)));
        values
            .into_iter()
            .map(|k| (k, (p.log_weight(k) - lz).exp()))
            .collect()
    }
}
