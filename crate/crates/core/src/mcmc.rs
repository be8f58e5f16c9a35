//! Markov chains targeting `D_{Λ,σ,c}`.
//!
//! Two kernels are provided. Random-scan Gibbs picks a coordinate uniformly
//! and redraws it from its exact one-dimensional conditional. Gibbs-Klein
//! draws a fresh uniform column permutation `E`, factorizes `B·E`, and
//! redraws the first `m` permuted coordinates with the nearest-plane
//! recursion while holding the other `n - m` fixed.
//!
//! Neither kernel tries to detect stationarity; callers pick the number of
//! steps and the burn-in, and use [`crate::oracle`] for diagnostics.

use rand::Rng;
use rayon::prelude::*;

use crate::dgauss1d::Gaussian1D;
use crate::error::{Error, Result};
use crate::klein::NearestPlane;
use crate::linalg::{norm_sq, permute_basis, random_permutation, LatticeBasis, Permutation};
use crate::rng::stream_rng;
use crate::target::GaussianParams;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ChainState {
    pub x: Vec<i64>,
    pub t: u64,
}

impl ChainState {
    pub fn new(x: Vec<i64>) -> Self {
        Self { x, t: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanOrder {
    Random,
    /// Systematic scan. Not implemented; only the random scan is analyzed.
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kernel {
    Gibbs { scan: ScanOrder },
    GibbsKlein { block_size: usize },
}

impl Kernel {
    pub fn gibbs() -> Self {
        Kernel::Gibbs {
            scan: ScanOrder::Random,
        }
    }

    pub fn gibbs_klein(block_size: usize) -> Self {
        Kernel::GibbsKlein { block_size }
    }
}

/// How to choose `x⁰` when the caller does not supply one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InitStrategy {
    #[default]
    Zero,
    /// `round(B⁻¹c)`, snapped into the alphabet.
    Round,
}

pub fn initial_state(basis: &LatticeBasis, target: &GaussianParams, init: InitStrategy) -> Vec<i64> {
    let snap = |k: i64| match target.alphabet.values() {
        None => k,
        Some(v) => *v.iter().min_by_key(|&&a| (a - k).abs()).expect("non-empty"),
    };
    match init {
        InitStrategy::Zero => vec![snap(0); basis.dim()],
        InitStrategy::Round => basis
            .solve(&target.center)
            .into_iter()
            .map(|v| snap(v.round() as i64))
            .collect(),
    }
}

/// `P(x_i | x_{-i})`, the one-dimensional Gaussian `D_{Z, σ/‖b_i‖, μ}` with
/// `μ = ⟨b_i, c - Σ_{j≠i} b_j x_j⟩ / ‖b_i‖²`.
pub fn gibbs_conditional(basis: &LatticeBasis, target: &GaussianParams, x: &[i64], i: usize) -> Gaussian1D {
    let bi = basis.column(i);
    let mut resid: Vec<f64> = target
        .center
        .iter()
        .zip(basis.point(x))
        .map(|(c, p)| c - p)
        .collect();
    let xi = x[i] as f64;
    for (r, b) in resid.iter_mut().zip(bi) {
        *r += b * xi;
    }
    let nb = norm_sq(bi);
    let center = bi.iter().zip(&resid).map(|(b, r)| b * r).sum::<f64>() / nb;
    Gaussian1D {
        alpha: target.sigma / nb.sqrt(),
        center,
    }
}

fn check_state(basis: &LatticeBasis, target: &GaussianParams, x: &[i64]) -> Result<()> {
    target.check_dim(basis)?;
    if x.len() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            actual: x.len(),
        });
    }
    Ok(())
}

/// One random-scan Gibbs update.
pub fn gibbs_step<R: Rng + ?Sized>(
    basis: &LatticeBasis,
    target: &GaussianParams,
    state: &ChainState,
    rng: &mut R,
) -> ChainState {
    let i = rng.gen_range(0..basis.dim());
    let p = gibbs_conditional(basis, target, &state.x, i);
    let mut x = state.x.clone();
    x[i] = target.alphabet.sample(p, rng);
    ChainState { x, t: state.t + 1 }
}

/// One-step transition probability of the random-scan Gibbs chain, including
/// the self-loop mass when `from == to`.
pub fn gibbs_kernel_prob(basis: &LatticeBasis, target: &GaussianParams, from: &[i64], to: &[i64]) -> f64 {
    let n = from.len();
    let diff: Vec<usize> = (0..n).filter(|&k| from[k] != to[k]).collect();
    let inv_n = 1.0 / n as f64;
    match diff.as_slice() {
        [] => (0..n)
            .map(|k| target.alphabet.pmf(gibbs_conditional(basis, target, from, k), from[k]))
            .sum::<f64>()
            * inv_n,
        [k] => inv_n * target.alphabet.pmf(gibbs_conditional(basis, target, from, *k), to[*k]),
        _ => 0.0,
    }
}

/// All one-step Gibbs successors of `from` with their probabilities.
/// Self-loop mass appears once per coordinate, so the list may repeat `from`.
pub fn gibbs_transitions(basis: &LatticeBasis, target: &GaussianParams, from: &[i64]) -> Vec<(Vec<i64>, f64)> {
    let n = from.len();
    let inv_n = 1.0 / n as f64;
    let mut out = Vec::new();
    for i in 0..n {
        let p = gibbs_conditional(basis, target, from, i);
        for (k, pk) in target.alphabet.table(p) {
            if pk > 0.0 {
                let mut x = from.to_vec();
                x[i] = k;
                out.push((x, inv_n * pk));
            }
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct GibbsKleinConfig {
    pub basis: LatticeBasis,
    pub target: GaussianParams,
    pub block_size: usize,
}

impl GibbsKleinConfig {
    pub fn new(basis: LatticeBasis, target: GaussianParams, block_size: usize) -> Result<Self> {
        target.check_dim(&basis)?;
        if block_size == 0 || block_size > basis.dim() {
            return Err(Error::invalid(format!(
                "block size must lie in [1, {}], got {block_size}",
                basis.dim()
            )));
        }
        Ok(Self {
            basis,
            target,
            block_size,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }
}

/// `B·E` factorized, with `Qᵀc` for that factorization.
#[derive(Clone, Debug)]
pub struct PermutedFrame {
    pub perm: Permutation,
    pub basis: LatticeBasis,
    pub projected_center: Vec<f64>,
}

impl PermutedFrame {
    pub fn new(basis: &LatticeBasis, target: &GaussianParams, perm: Permutation) -> Result<Self> {
        let permuted = permute_basis(basis, &perm)?;
        let projected_center = permuted.project(&target.center);
        Ok(Self {
            perm,
            basis: permuted,
            projected_center,
        })
    }

    pub fn plane<'a>(&'a self, target: &'a GaussianParams) -> NearestPlane<'a> {
        NearestPlane {
            r: self.basis.r(),
            projected_center: &self.projected_center,
            sigma: target.sigma,
            alphabet: &target.alphabet,
        }
    }
}

/// One Gibbs-Klein update. The permuted basis is re-factorized every step.
pub fn gibbs_klein_step<R: Rng + ?Sized>(
    cfg: &GibbsKleinConfig,
    state: &ChainState,
    rng: &mut R,
) -> Result<ChainState> {
    let perm = random_permutation(cfg.dim(), rng);
    let frame = PermutedFrame::new(&cfg.basis, &cfg.target, perm)?;
    let mut z = frame.perm.to_permuted(&state.x);
    frame.plane(&cfg.target).sample_block(&mut z, cfg.block_size, rng);
    Ok(ChainState {
        x: frame.perm.from_permuted(&z),
        t: state.t + 1,
    })
}

/// Probability that the block update under permutation `perm` writes
/// `z_block` into the first `m` permuted coordinates, given the remaining
/// permuted coordinates `z_rest`.
pub fn gibbs_klein_block_pmf(
    cfg: &GibbsKleinConfig,
    perm: &Permutation,
    z_block: &[i64],
    z_rest: &[i64],
) -> Result<f64> {
    let m = cfg.block_size;
    if z_block.len() != m || z_rest.len() != cfg.dim() - m {
        return Err(Error::DimensionMismatch {
            expected: cfg.dim(),
            actual: z_block.len() + z_rest.len(),
        });
    }
    let frame = PermutedFrame::new(&cfg.basis, &cfg.target, perm.clone())?;
    let z: Vec<i64> = z_block.iter().chain(z_rest).copied().collect();
    Ok(frame.plane(&cfg.target).block_pmf(&z, m))
}

/// Largest dimension for which the Gibbs-Klein kernel is tabulated over all
/// `n!` permutations.
pub const MAX_KERNEL_DIM: usize = 6;

/// The Gibbs-Klein transition kernel, averaged over every permutation.
#[derive(Clone, Debug)]
pub struct GibbsKleinKernel {
    cfg: GibbsKleinConfig,
    frames: Vec<PermutedFrame>,
}

impl GibbsKleinKernel {
    pub fn new(cfg: GibbsKleinConfig) -> Result<Self> {
        if cfg.dim() > MAX_KERNEL_DIM {
            return Err(Error::DimensionTooLarge {
                dim: cfg.dim(),
                limit: MAX_KERNEL_DIM,
            });
        }
        let frames = Permutation::all(cfg.dim())
            .map(|p| PermutedFrame::new(&cfg.basis, &cfg.target, p))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { cfg, frames })
    }

    pub fn config(&self) -> &GibbsKleinConfig {
        &self.cfg
    }

    pub fn frames(&self) -> &[PermutedFrame] {
        &self.frames
    }

    /// `P(from → to)`.
    pub fn prob(&self, from: &[i64], to: &[i64]) -> f64 {
        let m = self.cfg.block_size;
        let total: f64 = self
            .frames
            .iter()
            .map(|f| {
                let zf = f.perm.to_permuted(from);
                let zt = f.perm.to_permuted(to);
                if zf[m..] != zt[m..] {
                    0.0
                } else {
                    f.plane(&self.cfg.target).block_pmf(&zt, m)
                }
            })
            .sum();
        total / self.frames.len() as f64
    }

    /// Successors of `from` with probability above `min_prob` under some
    /// permutation. Entries may repeat across permutations.
    pub fn transitions(&self, from: &[i64], min_prob: f64) -> Vec<(Vec<i64>, f64)> {
        let m = self.cfg.block_size;
        let w = 1.0 / self.frames.len() as f64;
        let mut out = Vec::new();
        for f in &self.frames {
            let z = f.perm.to_permuted(from);
            for (zt, p) in f.plane(&self.cfg.target).block_outcomes(&z, m, min_prob) {
                out.push((f.perm.from_permuted(&zt), w * p));
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainTrace {
    /// `x⁰` followed by one state per step.
    pub states: Vec<ChainState>,
    pub burn_in: usize,
    pub rng_seed: Option<u64>,
}

impl ChainTrace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &ChainState {
        self.states.last().expect("trace holds x0")
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }
}

/// A kernel bound to a basis and target, ready to step.
#[derive(Clone, Debug)]
pub enum Chain {
    Gibbs { basis: LatticeBasis, target: GaussianParams },
    GibbsKlein(GibbsKleinConfig),
}

impl Chain {
    pub fn new(kernel: Kernel, basis: &LatticeBasis, target: &GaussianParams) -> Result<Self> {
        target.check_dim(basis)?;
        match kernel {
            Kernel::Gibbs { scan: ScanOrder::Fixed } => Err(Error::Unimplemented("fixed-scan Gibbs sampling")),
            Kernel::Gibbs { scan: ScanOrder::Random } => Ok(Chain::Gibbs {
                basis: basis.clone(),
                target: target.clone(),
            }),
            Kernel::GibbsKlein { block_size } => Ok(Chain::GibbsKlein(GibbsKleinConfig::new(
                basis.clone(),
                target.clone(),
                block_size,
            )?)),
        }
    }

    pub fn basis(&self) -> &LatticeBasis {
        match self {
            Chain::Gibbs { basis, .. } => basis,
            Chain::GibbsKlein(cfg) => &cfg.basis,
        }
    }

    pub fn target(&self) -> &GaussianParams {
        match self {
            Chain::Gibbs { target, .. } => target,
            Chain::GibbsKlein(cfg) => &cfg.target,
        }
    }

    pub fn step<R: Rng + ?Sized>(&self, state: &ChainState, rng: &mut R) -> Result<ChainState> {
        match self {
            Chain::Gibbs { basis, target } => Ok(gibbs_step(basis, target, state, rng)),
            Chain::GibbsKlein(cfg) => gibbs_klein_step(cfg, state, rng),
        }
    }

    /// Applies the kernel `steps` times, recording every state.
    pub fn run<R: Rng + ?Sized>(&self, x0: Vec<i64>, steps: usize, rng: &mut R) -> Result<ChainTrace> {
        check_state(self.basis(), self.target(), &x0)?;
        let mut states = Vec::with_capacity(steps + 1);
        states.push(ChainState::new(x0));
        for _ in 0..steps {
            let next = self.step(states.last().expect("non-empty"), rng)?;
            states.push(next);
        }
        Ok(ChainTrace {
            states,
            burn_in: 0,
            rng_seed: None,
        })
    }
}

pub fn run_chain<R: Rng + ?Sized>(
    kernel: Kernel,
    basis: &LatticeBasis,
    target: &GaussianParams,
    x0: Vec<i64>,
    steps: usize,
    rng: &mut R,
) -> Result<ChainTrace> {
    Chain::new(kernel, basis, target)?.run(x0, steps, rng)
}

/// Runs `chains` independent chains in parallel; chain `k` uses random
/// stream `k` of `seed`.
pub fn run_chains(
    kernel: Kernel,
    basis: &LatticeBasis,
    target: &GaussianParams,
    x0: &[i64],
    steps: usize,
    chains: usize,
    seed: u64,
) -> Result<Vec<ChainTrace>> {
    let chain = Chain::new(kernel, basis, target)?;
    (0..chains)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            let mut trace = chain.run(x0.to_vec(), steps, &mut rng)?;
            trace.rng_seed = Some(seed);
            Ok(trace)
        })
        .collect()
}
