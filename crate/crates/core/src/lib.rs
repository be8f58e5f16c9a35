//! Sampling from discrete Gaussian distributions over lattices.
//!
//! The crate provides three samplers for `D_{Λ,σ,c}`, the distribution on
//! integer coefficient vectors `x` proportional to `exp(-‖Bx - c‖² / 2σ²)`:
//!
//! * [`klein::KleinSampler`]: randomized nearest-plane sampling, exact only
//!   when σ is large compared to the Gram-Schmidt norms of the basis;
//! * random-scan Gibbs sampling ([`mcmc::gibbs_step`]), which converges to
//!   the target for every σ;
//! * blocked Gibbs-Klein sampling ([`mcmc::gibbs_klein_step`]), which
//!   resamples a block of `m` coordinates of a randomly permuted basis with
//!   the nearest-plane procedure.
//!
//! [`oracle`] enumerates the target exactly on small lattices and provides
//! total-variation and detailed-balance diagnostics. [`mimo`] uses the
//! samplers as lattice decoders for an uncoded MIMO link.

pub mod cli;
pub mod dgauss1d;
pub mod error;
pub mod klein;
pub mod linalg;
pub mod mcmc;
pub mod mimo;
pub mod oracle;
pub mod rng;
pub mod target;

pub use error::{Error, Result};
pub use linalg::{LatticeBasis, Matrix, Permutation};
pub use target::GaussianParams;
