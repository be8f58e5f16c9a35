//! The target distribution `D_{Λ,σ,c}`.

use crate::dgauss1d::Alphabet;
use crate::error::{Error, Result};
use crate::linalg::{norm_sq, LatticeBasis};

/// Width σ and center `c` of a lattice Gaussian, plus the coordinate
/// alphabet (`Z` unless restricted, e.g. to a constellation).
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianParams {
    pub sigma: f64,
    pub center: Vec<f64>,
    pub alphabet: Alphabet,
}

impl GaussianParams {
    pub fn new(sigma: f64, center: Vec<f64>) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("center has non-finite entries"));
        }
        Ok(Self {
            sigma,
            center,
            alphabet: Alphabet::Integers,
        })
    }

    /// Centered at the origin.
    pub fn centered(sigma: f64, n: usize) -> Result<Self> {
        Self::new(sigma, vec![0.0; n])
    }

    pub fn with_alphabet(mut self, alphabet: Alphabet) -> Self {
        self.alphabet = alphabet;
        self
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn check_dim(&self, basis: &LatticeBasis) -> Result<()> {
        if self.dim() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                actual: self.dim(),
            });
        }
        Ok(())
    }

    /// `‖Bx - c‖²`.
    pub fn distance_sq(&self, basis: &LatticeBasis, x: &[i64]) -> f64 {
        let mut p = basis.point(x);
        for (pi, ci) in p.iter_mut().zip(&self.center) {
            *pi -= ci;
        }
        norm_sq(&p)
    }

    /// Unnormalized log density `-‖Bx - c‖² / 2σ²`.
    pub fn log_weight(&self, basis: &LatticeBasis, x: &[i64]) -> f64 {
        -self.distance_sq(basis, x) / (2.0 * self.sigma * self.sigma)
    }

    pub fn admits(&self, x: &[i64]) -> bool {
        x.iter().all(|&k| self.alphabet.contains(k))
    }
}
