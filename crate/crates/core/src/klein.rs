//! Klein's randomized nearest-plane sampler.
//!
//! With `B = QR` and `c' = Qᵀc`, coordinates are drawn backwards:
//! `x_i ~ D_{Z, σ/|r_ii|, x̃_i}` with `x̃_i = (c'_i - Σ_{j>i} r_ij x_j) / r_ii`.
//! The same recursion restricted to the leading `m` coordinates is the block
//! update of the Gibbs-Klein chain, so it lives in [`NearestPlane`] and is
//! shared with [`crate::mcmc`].

use rand::Rng;

use crate::dgauss1d::{Alphabet, Gaussian1D};
use crate::error::{Error, Result};
use crate::linalg::{LatticeBasis, Matrix};
use crate::target::GaussianParams;

/// Backward nearest-plane recursion over a factorized basis.
#[derive(Clone, Copy, Debug)]
pub struct NearestPlane<'a> {
    pub r: &'a Matrix,
    pub projected_center: &'a [f64],
    pub sigma: f64,
    pub alphabet: &'a Alphabet,
}

impl<'a> NearestPlane<'a> {
    /// Distribution of coordinate `i` given `z[i+1..]`.
    pub fn conditional(&self, z: &[i64], i: usize) -> Gaussian1D {
        let n = z.len();
        let mut s = self.projected_center[i];
        for j in i + 1..n {
            s -= self.r[(i, j)] * z[j] as f64;
        }
        let rii = self.r[(i, i)];
        Gaussian1D {
            alpha: self.sigma / rii.abs(),
            center: s / rii,
        }
    }

    /// Resamples `z[..m]` from `z[m-1]` down to `z[0]`; `z[m..]` is kept.
    pub fn sample_block<R: Rng + ?Sized>(&self, z: &mut [i64], m: usize, rng: &mut R) {
        for i in (0..m).rev() {
            let p = self.conditional(z, i);
            z[i] = self.alphabet.sample(p, rng);
        }
    }

    /// Probability that [`NearestPlane::sample_block`] writes `z[..m]`
    /// given `z[m..]`.
    pub fn block_pmf(&self, z: &[i64], m: usize) -> f64 {
        let mut prob = 1.0;
        for i in (0..m).rev() {
            prob *= self.alphabet.pmf(self.conditional(z, i), z[i]);
            if prob == 0.0 {
                break;
            }
        }
        prob
    }

    /// Every block outcome with probability above `min_prob`, by walking the
    /// sampling tree. `z[m..]` is taken from `z`.
    pub fn block_outcomes(&self, z: &[i64], m: usize, min_prob: f64) -> Vec<(Vec<i64>, f64)> {
        let mut out = Vec::new();
        let mut work = z.to_vec();
        self.walk(&mut work, m, 1.0, min_prob, &mut out);
        out
    }

    fn walk(&self, z: &mut Vec<i64>, i: usize, prob: f64, min_prob: f64, out: &mut Vec<(Vec<i64>, f64)>) {
        if i == 0 {
            out.push((z.clone(), prob));
            return;
        }
        let p = self.conditional(z, i - 1);
        for (k, pk) in self.alphabet.table(p) {
            let next = prob * pk;
            if next > min_prob {
                z[i - 1] = k;
                self.walk(z, i - 1, next, min_prob, out);
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct KleinSampler {
    basis: LatticeBasis,
    params: GaussianParams,
    projected_center: Vec<f64>,
}

impl KleinSampler {
    pub fn new(basis: LatticeBasis, params: GaussianParams) -> Result<Self> {
        params.check_dim(&basis)?;
        let projected_center = basis.project(&params.center);
        Ok(Self {
            basis,
            params,
            projected_center,
        })
    }

    pub fn basis(&self) -> &LatticeBasis {
        &self.basis
    }

    pub fn params(&self) -> &GaussianParams {
        &self.params
    }

    fn plane(&self) -> NearestPlane<'_> {
        NearestPlane {
            r: self.basis.r(),
            projected_center: &self.projected_center,
            sigma: self.params.sigma,
            alphabet: &self.params.alphabet,
        }
    }

    /// One draw of the coefficient vector `x`; the lattice point is `B·x`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<i64> {
        let n = self.basis.dim();
        let mut x = vec![0; n];
        self.plane().sample_block(&mut x, n, rng);
        x
    }

    /// Exact probability that [`KleinSampler::sample`] returns `x`.
    pub fn pmf(&self, x: &[i64]) -> f64 {
        assert_eq!(x.len(), self.basis.dim());
        self.plane().block_pmf(x, x.len())
    }
}

/// Klein's choice `σ = min_i ‖b̂_i‖ / √(ln n)`.
pub fn klein_sigma_default(basis: &LatticeBasis) -> Result<f64> {
    let n = basis.dim();
    if n < 2 {
        return Err(Error::invalid("klein_sigma_default needs n >= 2"));
    }
    let min = basis.gram_schmidt_norms().into_iter().fold(f64::INFINITY, f64::min);
    Ok(min / (n as f64).ln().sqrt())
}

/// `omega_factor · √(ln n) · max_i ‖b̂_i‖`, a concrete instance of the
/// large-σ condition under which Klein's output is close to the target.
pub fn smoothing_threshold(basis: &LatticeBasis, omega_factor: f64) -> Result<f64> {
    let n = basis.dim();
    if n < 2 {
        return Err(Error::invalid("smoothing_threshold needs n >= 2"));
    }
    if !(omega_factor > 0.0) {
        return Err(Error::invalid("omega_factor must be positive"));
    }
    let max = basis.gram_schmidt_norms().into_iter().fold(0.0, f64::max);
    Ok(omega_factor * (n as f64).ln().sqrt() * max)
}
