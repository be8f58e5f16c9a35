//! Uncoded MIMO detection as a closest-vector problem.
//!
//! A complex `n × n` channel `H` becomes the real `2n × 2n` matrix
//! `[[Re H, -Im H], [Im H, Re H]]`. 16-QAM real and imaginary parts
//! `s ∈ {-3, -1, 1, 3}` map to integer labels `k = (s + 3) / 2 ∈ {0, 1, 2, 3}`,
//! so `H_r·s - y_r = B·k - c` with `B = 2·H_r` and `c = y_r + 3·H_r·1`.
//! Samplers run on that lattice with every one-dimensional draw restricted
//! to the four labels, and the decoder keeps the best point visited.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::dgauss1d::Alphabet;
use crate::error::{Error, Result};
use crate::klein::{klein_sigma_default, KleinSampler};
use crate::linalg::{LatticeBasis, Matrix};
use crate::mcmc::{Chain, ChainState, Kernel};
use crate::rng::{stream_rng, substream};
use crate::target::GaussianParams;

/// 16-QAM with levels `{-3, -1, 1, 3}` per dimension and Gray labels.
pub mod qam16 {
    use num_complex::Complex64;

    pub const LEVELS: [f64; 4] = [-3.0, -1.0, 1.0, 3.0];
    /// Gray code of each level index.
    pub const GRAY: [u8; 4] = [0b00, 0b01, 0b11, 0b10];
    pub const BITS_PER_SYMBOL: usize = 4;
    pub const SIZE: usize = 16;
    /// Mean of `|s|²` over the constellation.
    pub const AVERAGE_ENERGY: f64 = 10.0;

    /// Symbol index `4·i + q` from in-phase and quadrature level indices.
    pub fn index(i: usize, q: usize) -> usize {
        4 * i + q
    }

    pub fn levels_of(symbol: usize) -> (usize, usize) {
        (symbol / 4, symbol % 4)
    }

    pub fn point(symbol: usize) -> Complex64 {
        let (i, q) = levels_of(symbol);
        Complex64::new(LEVELS[i], LEVELS[q])
    }

    pub fn bits(symbol: usize) -> u8 {
        let (i, q) = levels_of(symbol);
        (GRAY[i] << 2) | GRAY[q]
    }

    pub fn from_bits(bits: u8) -> usize {
        let inv = |g: u8| GRAY.iter().position(|&x| x == g).expect("2-bit gray label");
        index(inv(bits >> 2), inv(bits & 0b11))
    }

    /// Nearest level index to a real value.
    pub fn slice(v: f64) -> usize {
        ((v + 3.0) / 2.0).round().clamp(0.0, 3.0) as usize
    }

    /// Integer lattice label of a level, `k = (s + 3) / 2`.
    pub fn label(level: f64) -> i64 {
        ((level + 3.0) / 2.0).round() as i64
    }

    pub fn level(label: i64) -> f64 {
        2.0 * label as f64 - 3.0
    }
}

/// Row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self {
            rows: r,
            cols: c,
            data: rows.concat(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        Self { rows: n, cols: n, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }
}

/// `[[Re H, -Im H], [Im H, Re H]]`.
pub fn complex_to_real_lattice(h: &ComplexMatrix) -> Matrix {
    let (r, c) = (h.rows(), h.cols());
    let mut m = Matrix::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let v = h.get(i, j);
            m[(i, j)] = v.re;
            m[(i, c + j)] = -v.im;
            m[(r + i, j)] = v.im;
            m[(r + i, c + j)] = v.re;
        }
    }
    m
}

/// `[Re v; Im v]`.
pub fn complex_to_real_vector(v: &[Complex64]) -> Vec<f64> {
    v.iter().map(|z| z.re).chain(v.iter().map(|z| z.im)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplerStrategy {
    Klein,
    Gibbs,
    GibbsKlein(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DecoderKind {
    Zf,
    Ml,
    Klein,
    Gibbs,
    GibbsKlein,
}

impl DecoderKind {
    pub fn label(self) -> &'static str {
        match self {
            DecoderKind::Zf => "zf",
            DecoderKind::Ml => "ml",
            DecoderKind::Klein => "klein",
            DecoderKind::Gibbs => "gibbs",
            DecoderKind::GibbsKlein => "gibbs-klein",
        }
    }
}

impl std::str::FromStr for DecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zf" => Ok(DecoderKind::Zf),
            "ml" => Ok(DecoderKind::Ml),
            "klein" => Ok(DecoderKind::Klein),
            "gibbs" => Ok(DecoderKind::Gibbs),
            "gibbs-klein" => Ok(DecoderKind::GibbsKlein),
            _ => Err(Error::invalid(format!("unknown decoder {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MimoConfig {
    pub n_tx: usize,
    pub n_rx: usize,
    pub ebn0_db: f64,
    pub trials: usize,
    pub iteration_budgets: Vec<usize>,
    pub block_sizes: Vec<usize>,
    pub decoders: Vec<DecoderKind>,
    pub seed: u64,
}

impl Default for MimoConfig {
    fn default() -> Self {
        Self {
            n_tx: 4,
            n_rx: 4,
            ebn0_db: 15.0,
            trials: 1000,
            iteration_budgets: vec![1, 5, 20],
            block_sizes: vec![1, 2, 4, 8],
            decoders: vec![
                DecoderKind::Zf,
                DecoderKind::Ml,
                DecoderKind::Klein,
                DecoderKind::Gibbs,
                DecoderKind::GibbsKlein,
            ],
            seed: 1,
        }
    }
}

impl MimoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_tx == 0 || self.n_tx != self.n_rx {
            return Err(Error::invalid(format!(
                "need n_tx = n_rx >= 1, got {}x{}",
                self.n_tx, self.n_rx
            )));
        }
        if !self.ebn0_db.is_finite() {
            return Err(Error::invalid("E_b/N_0 must be finite"));
        }
        if self.iteration_budgets.iter().any(|&b| b == 0) {
            return Err(Error::invalid("iteration budgets must be positive"));
        }
        if self.decoders.is_empty() {
            return Err(Error::invalid("no decoders selected"));
        }
        let uses_budgets = self
            .decoders
            .iter()
            .any(|d| matches!(d, DecoderKind::Klein | DecoderKind::Gibbs | DecoderKind::GibbsKlein));
        if uses_budgets && self.iteration_budgets.is_empty() {
            return Err(Error::invalid("sampler decoders need at least one iteration budget"));
        }
        if self.decoders.contains(&DecoderKind::GibbsKlein) {
            if self.block_sizes.is_empty() {
                return Err(Error::invalid("gibbs-klein needs at least one block size"));
            }
            let n = 2 * self.n_tx;
            if let Some(&m) = self.block_sizes.iter().find(|&&m| m == 0 || m > n) {
                return Err(Error::invalid(format!("block size {m} outside [1, {n}]")));
            }
        }
        Ok(())
    }

    /// Noise variance `N_0` per complex dimension: `E_s = 10`, 4 bits per
    /// symbol, `N_0 = (E_s / 4)·10^{-E_b/N_0 / 10}`.
    pub fn noise_variance(&self) -> f64 {
        let eb = qam16::AVERAGE_ENERGY / qam16::BITS_PER_SYMBOL as f64;
        eb * 10f64.powf(-self.ebn0_db / 10.0)
    }

    pub fn bits_per_trial(&self) -> usize {
        self.n_tx * qam16::BITS_PER_SYMBOL
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MimoInstance {
    pub h: ComplexMatrix,
    /// Transmitted symbol indices.
    pub symbols: Vec<usize>,
    pub y: Vec<Complex64>,
}

fn complex_normal<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Rayleigh channel with unit-variance entries, uniform symbols, and
/// circular Gaussian noise of variance `noise_variance` per receive antenna.
pub fn generate_instance_with_noise<R: Rng + ?Sized>(n_tx: usize, n_rx: usize, noise_variance: f64, rng: &mut R) -> MimoInstance {
    let rows: Vec<Vec<Complex64>> = (0..n_rx)
        .map(|_| (0..n_tx).map(|_| complex_normal(1.0, rng)).collect())
        .collect();
    let h = ComplexMatrix::from_rows(&rows);
    let symbols: Vec<usize> = (0..n_tx).map(|_| rng.gen_range(0..qam16::SIZE)).collect();
    let x: Vec<Complex64> = symbols.iter().map(|&s| qam16::point(s)).collect();
    let mut y = h.mul_vec(&x);
    if noise_variance > 0.0 {
        for yi in &mut y {
            *yi += complex_normal(noise_variance, rng);
        }
    }
    MimoInstance { h, symbols, y }
}

pub fn generate_instance<R: Rng + ?Sized>(cfg: &MimoConfig, rng: &mut R) -> MimoInstance {
    generate_instance_with_noise(cfg.n_tx, cfg.n_rx, cfg.noise_variance(), rng)
}

/// The real integer-label lattice of one received vector.
#[derive(Clone, Debug)]
pub struct LabelLattice {
    pub basis: LatticeBasis,
    pub center: Vec<f64>,
    n_tx: usize,
}

impl LabelLattice {
    pub fn new(h: &ComplexMatrix, y: &[Complex64]) -> Result<Self> {
        if h.rows() != h.cols() {
            return Err(Error::invalid("channel matrix must be square"));
        }
        let hr = complex_to_real_lattice(h);
        let yr = complex_to_real_vector(y);
        let offset = hr.mul_vec(&vec![3.0; hr.cols()]);
        let center = yr.iter().zip(&offset).map(|(a, b)| a + b).collect();
        Ok(Self {
            basis: LatticeBasis::new(hr.scaled(2.0))?,
            center,
            n_tx: h.cols(),
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn labels(&self, symbols: &[usize]) -> Vec<i64> {
        let (re, im): (Vec<i64>, Vec<i64>) = symbols
            .iter()
            .map(|&s| {
                let (i, q) = qam16::levels_of(s);
                (i as i64, q as i64)
            })
            .unzip();
        re.into_iter().chain(im).collect()
    }

    pub fn symbols(&self, labels: &[i64]) -> Vec<usize> {
        (0..self.n_tx)
            .map(|j| qam16::index(labels[j] as usize, labels[self.n_tx + j] as usize))
            .collect()
    }

    /// `‖B·k - c‖² = ‖H·s - y‖²`.
    pub fn cost(&self, labels: &[i64]) -> f64 {
        self.basis
            .point(labels)
            .iter()
            .zip(&self.center)
            .map(|(p, c)| (p - c) * (p - c))
            .sum()
    }
}

pub fn label_alphabet() -> Alphabet {
    Alphabet::Finite(vec![0, 1, 2, 3])
}

/// Invert-and-slice detection.
pub fn zf_decode(h: &ComplexMatrix, y: &[Complex64]) -> Result<Vec<usize>> {
    if h.rows() != h.cols() {
        return Err(Error::invalid("channel matrix must be square"));
    }
    let n = h.cols();
    let hr = LatticeBasis::new(complex_to_real_lattice(h))?;
    let s = hr.solve(&complex_to_real_vector(y));
    Ok((0..n).map(|j| qam16::index(qam16::slice(s[j]), qam16::slice(s[n + j]))).collect())
}

/// Exhaustive `argmin ‖Hx - y‖` over the constellation; ties go to the
/// lexicographically smallest symbol-index vector.
pub fn ml_decode(h: &ComplexMatrix, y: &[Complex64]) -> Vec<usize> {
    let n = h.cols();
    let cols: Vec<Vec<Vec<Complex64>>> = (0..n)
        .map(|j| {
            (0..qam16::SIZE)
                .map(|s| (0..h.rows()).map(|i| h.get(i, j) * qam16::point(s)).collect())
                .collect()
        })
        .collect();
    let mut residuals: Vec<Vec<Complex64>> = vec![y.to_vec(); n + 1];
    let mut current = vec![0usize; n];
    let mut best = (f64::INFINITY, vec![0usize; n]);
    ml_walk(&cols, &mut residuals, &mut current, 0, &mut best);
    best.1
}

fn ml_walk(
    cols: &[Vec<Vec<Complex64>>],
    residuals: &mut [Vec<Complex64>],
    current: &mut [usize],
    depth: usize,
    best: &mut (f64, Vec<usize>),
) {
    let n = cols.len();
    if depth == n {
        let cost: f64 = residuals[n].iter().map(|r| r.norm_sqr()).sum();
        if cost < best.0 {
            best.0 = cost;
            best.1.copy_from_slice(current);
        }
        return;
    }
    for s in 0..qam16::SIZE {
        let (head, tail) = residuals.split_at_mut(depth + 1);
        for ((out, r), c) in tail[0].iter_mut().zip(&head[depth]).zip(&cols[depth][s]) {
            *out = r - c;
        }
        current[depth] = s;
        ml_walk(cols, residuals, current, depth + 1, best);
    }
}

/// Best-visited decoder output after each budget in `budgets` (ascending),
/// from a single sampler run.
///
/// One iteration draws `2n` components: one Klein pass, `2n` Gibbs steps, or
/// `⌈2n/m⌉` Gibbs-Klein block steps. Every decoder starts from the ZF
/// estimate, which counts as visited; Markov chains also use it as `x⁰`.
pub fn sampler_decode_path<R: Rng + ?Sized>(
    h: &ComplexMatrix,
    y: &[Complex64],
    strategy: SamplerStrategy,
    budgets: &[usize],
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    if budgets.is_empty() || budgets[0] == 0 || budgets.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("budgets must be positive and ascending"));
    }
    let lattice = LabelLattice::new(h, y)?;
    let n = lattice.dim();
    let sigma = klein_sigma_default(&lattice.basis)?;
    let target = GaussianParams::new(sigma, lattice.center.clone())?.with_alphabet(label_alphabet());
    let max_budget = *budgets.last().expect("non-empty");
    let x0 = lattice.labels(&zf_decode(h, y)?);
    let mut best = (lattice.cost(&x0), x0.clone());
    let mut out = Vec::with_capacity(budgets.len());
    let mut next_budget = 0;
    let mut record = |iteration: usize, best: &(f64, Vec<i64>), out: &mut Vec<Vec<usize>>| {
        while next_budget < budgets.len() && budgets[next_budget] == iteration {
            out.push(lattice.symbols(&best.1));
            next_budget += 1;
        }
    };
    let consider = |best: &mut (f64, Vec<i64>), x: &[i64]| {
        let c = lattice.cost(x);
        if c < best.0 {
            *best = (c, x.to_vec());
        }
    };

    match strategy {
        SamplerStrategy::Klein => {
            let sampler = KleinSampler::new(lattice.basis.clone(), target)?;
            for it in 1..=max_budget {
                let x = sampler.sample(rng);
                consider(&mut best, &x);
                record(it, &best, &mut out);
            }
        }
        SamplerStrategy::Gibbs | SamplerStrategy::GibbsKlein(_) => {
            let (kernel, steps) = match strategy {
                SamplerStrategy::GibbsKlein(m) => (Kernel::gibbs_klein(m), n.div_ceil(m)),
                _ => (Kernel::gibbs(), n),
            };
            let chain = Chain::new(kernel, &lattice.basis, &target)?;
            let mut state = ChainState::new(x0);
            for it in 1..=max_budget {
                for _ in 0..steps {
                    state = chain.step(&state, rng)?;
                    consider(&mut best, &state.x);
                }
                record(it, &best, &mut out);
            }
        }
    }
    Ok(out)
}

pub fn sampler_decode<R: Rng + ?Sized>(
    h: &ComplexMatrix,
    y: &[Complex64],
    strategy: SamplerStrategy,
    iterations: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    Ok(sampler_decode_path(h, y, strategy, &[iterations], rng)?.remove(0))
}

pub fn bit_errors(sent: &[usize], decoded: &[usize]) -> u32 {
    sent.iter()
        .zip(decoded)
        .map(|(&a, &b)| (qam16::bits(a) ^ qam16::bits(b)).count_ones())
        .sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct BerRow {
    pub decoder: &'static str,
    pub block_size: usize,
    pub iterations: usize,
    pub trials: usize,
    pub bit_errors: u64,
    pub bits: u64,
    pub ber: f64,
    /// Bit errors of each trial, for paired comparisons.
    pub trial_errors: Vec<u32>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BerTable {
    pub rows: Vec<BerRow>,
    pub bits_per_trial: usize,
}

pub const CSV_HEADER: &str = "decoder,block_size,iterations,trials,bit_errors,bits,ber";

impl BerTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.decoder, r.block_size, r.iterations, r.trials, r.bit_errors, r.bits, r.ber
            ));
        }
        s
    }

    pub fn find(&self, decoder: DecoderKind, block_size: usize, iterations: usize) -> Option<&BerRow> {
        self.rows
            .iter()
            .find(|r| r.decoder == decoder.label() && r.block_size == block_size && r.iterations == iterations)
    }

    /// Half-width of the 95% interval on `BER(a) - BER(b)` from the paired
    /// per-trial differences.
    pub fn paired_margin(&self, a: &BerRow, b: &BerRow) -> f64 {
        let n = a.trial_errors.len();
        assert_eq!(n, b.trial_errors.len(), "rows are not paired");
        if n < 2 {
            return 0.0;
        }
        let d: Vec<f64> = a
            .trial_errors
            .iter()
            .zip(&b.trial_errors)
            .map(|(&x, &y)| (x as f64 - y as f64) / self.bits_per_trial as f64)
            .collect();
        let mean = d.iter().sum::<f64>() / n as f64;
        let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        1.96 * (var / n as f64).sqrt()
    }
}

#[derive(Clone, Copy, Debug)]
struct RowSpec {
    decoder: DecoderKind,
    block_size: usize,
    iterations: usize,
}

fn row_specs(cfg: &MimoConfig) -> Vec<RowSpec> {
    let mut specs = Vec::new();
    for &d in &cfg.decoders {
        match d {
            DecoderKind::Zf | DecoderKind::Ml => specs.push(RowSpec {
                decoder: d,
                block_size: 0,
                iterations: 0,
            }),
            DecoderKind::Klein | DecoderKind::Gibbs => {
                let block_size = usize::from(d == DecoderKind::Gibbs);
                for &it in &cfg.iteration_budgets {
                    specs.push(RowSpec {
                        decoder: d,
                        block_size,
                        iterations: it,
                    });
                }
            }
            DecoderKind::GibbsKlein => {
                for &m in &cfg.block_sizes {
                    for &it in &cfg.iteration_budgets {
                        specs.push(RowSpec {
                            decoder: d,
                            block_size: m,
                            iterations: it,
                        });
                    }
                }
            }
        }
    }
    specs
}

/// Bit errors of every row spec for trial `trial`. All decoders see the same
/// channel, symbols, and noise.
fn run_trial(cfg: &MimoConfig, specs: &[RowSpec], trial: u64) -> Result<Vec<u32>> {
    let inst = generate_instance(cfg, &mut stream_rng(cfg.seed, substream(trial, 0)));
    let mut budgets = cfg.iteration_budgets.clone();
    budgets.sort_unstable();
    budgets.dedup();
    let mut errors = vec![0u32; specs.len()];
    // One sampler run per (decoder, block size); budgets are read off its path.
    let mut runs: Vec<(DecoderKind, usize, Vec<Vec<usize>>)> = Vec::new();
    for (idx, spec) in specs.iter().enumerate() {
        let decoded = match spec.decoder {
            DecoderKind::Zf => zf_decode(&inst.h, &inst.y)?,
            DecoderKind::Ml => ml_decode(&inst.h, &inst.y),
            d => {
                let pos = match runs.iter().position(|r| r.0 == d && r.1 == spec.block_size) {
                    Some(p) => p,
                    None => {
                        let strategy = match d {
                            DecoderKind::Klein => SamplerStrategy::Klein,
                            DecoderKind::Gibbs => SamplerStrategy::Gibbs,
                            _ => SamplerStrategy::GibbsKlein(spec.block_size),
                        };
                        let sub = 1 + runs.len() as u64;
                        let mut rng = stream_rng(cfg.seed, substream(trial, sub));
                        let path = sampler_decode_path(&inst.h, &inst.y, strategy, &budgets, &mut rng)?;
                        runs.push((d, spec.block_size, path));
                        runs.len() - 1
                    }
                };
                let b = budgets.binary_search(&spec.iterations).expect("budget listed");
                runs[pos].2[b].clone()
            }
        };
        errors[idx] = bit_errors(&inst.symbols, &decoded);
    }
    Ok(errors)
}

/// Paired bit-error-rate comparison of the configured decoders.
pub fn ber_experiment(cfg: &MimoConfig) -> Result<BerTable> {
    cfg.validate()?;
    let specs = row_specs(cfg);
    let bits_per_trial = cfg.bits_per_trial();
    if cfg.trials == 0 {
        return Ok(BerTable {
            rows: Vec::new(),
            bits_per_trial,
        });
    }
    let per_trial: Vec<Vec<u32>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| run_trial(cfg, &specs, t))
        .collect::<Result<_>>()?;
    let bits = (cfg.trials * bits_per_trial) as u64;
    let rows = specs
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            let trial_errors: Vec<u32> = per_trial.iter().map(|e| e[k]).collect();
            let bit_errors: u64 = trial_errors.iter().map(|&e| e as u64).sum();
            BerRow {
                decoder: spec.decoder.label(),
                block_size: spec.block_size,
                iterations: spec.iterations,
                trials: cfg.trials,
                bit_errors,
                bits,
                ber: bit_errors as f64 / bits as f64,
                trial_errors,
            }
        })
        .collect();
    Ok(BerTable { rows, bits_per_trial })
}
