//! Command-line front end. Every command renders its full CSV in memory and
//! writes it only after all validation has passed, so a failing invocation
//! never leaves a partial output file behind.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::klein::KleinSampler;
use crate::linalg::LatticeBasis;
use crate::mcmc::{
    gibbs_kernel_prob, gibbs_transitions, initial_state, run_chains, GibbsKleinConfig, GibbsKleinKernel, InitStrategy,
    Kernel, ScanOrder,
};
use crate::mimo::{ber_experiment, DecoderKind, MimoConfig};
use crate::oracle::{
    detailed_balance_residual, enumerate_support, propagate, stationarity_residual, tv_distance,
    DiscreteDistribution, MAX_ORACLE_DIM,
};
use crate::rng::stream_rng;
use crate::target::GaussianParams;

pub const SEED_ENV: &str = "LATTICE_GIBBS_SEED";

#[derive(Parser, Debug)]
#[command(name = "lattice-gibbs", version, about = "Lattice Gaussian sampling and MIMO decoding experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Draw samples and write `chain,t,x_1,...,x_n`.
    Sample(SampleArgs),
    /// Track TV distance to the exact target and report detailed balance.
    Diagnose(DiagnoseArgs),
    /// Bit error rates of MIMO decoders.
    Mimo(MimoArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Klein,
    Gibbs,
    GibbsKlein,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Scan {
    Random,
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Init {
    Zero,
    Round,
}

#[derive(Args, Debug, Clone)]
pub struct TargetArgs {
    /// Basis file: `n`, then n rows; row i holds coordinate i of every column.
    #[arg(long)]
    pub basis: PathBuf,
    #[arg(long)]
    pub sigma: f64,
    /// Comma-separated center; zeros when omitted.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub center: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = Algo::Klein)]
    pub algo: Algo,
    #[arg(long, default_value_t = 1)]
    pub block_size: usize,
    #[arg(long, value_enum, default_value_t = Scan::Random)]
    pub scan: Scan,
    #[arg(long, value_enum, default_value_t = Init::Zero)]
    pub init: Init,
    #[arg(long, default_value_t = crate::dgauss1d::DEFAULT_TAIL_EPS)]
    pub tail_eps: f64,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    /// Write CSV here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SampleArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    /// Samples per chain (Klein) or steps per chain (MCMC).
    #[arg(long, default_value_t = 1000)]
    pub iters: usize,
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    /// MCMC states with `t < burn-in` are not written.
    #[arg(long, default_value_t = 0)]
    pub burn_in: usize,
}

#[derive(Args, Debug, Clone)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long, default_value_t = 1000)]
    pub iters: usize,
    #[arg(long, default_value_t = 1000)]
    pub chains: usize,
    /// Empirical mode pools states with `burn-in < t' ≤ t`.
    #[arg(long, default_value_t = 0)]
    pub burn_in: usize,
    /// Comma-separated checkpoints; 1, 2, 5, 10, 20, ... up to `iters` by default.
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Option<Vec<usize>>,
    /// Evolve the exact law of `x_t` instead of sampling.
    #[arg(long)]
    pub exact: bool,
}

#[derive(Args, Debug, Clone)]
pub struct MimoArgs {
    #[arg(long, default_value_t = 4)]
    pub ntx: usize,
    /// Receive antennas; defaults to `ntx`.
    #[arg(long)]
    pub nrx: Option<usize>,
    #[arg(long, default_value_t = 15.0, allow_negative_numbers = true)]
    pub ebn0_db: f64,
    #[arg(long, value_delimiter = ',', default_value = "zf,ml,klein,gibbs,gibbs-klein")]
    pub decoders: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    pub block_sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,5,20")]
    pub iters: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = stdout.write_all(text.as_bytes());
            } else {
                let _ = stderr.write_all(text.as_bytes());
            }
            return code;
        }
    };
    let result = match &cli.command {
        Command::Sample(a) => cmd_sample(a).map(|csv| (csv, a.target.output.clone())),
        Command::Diagnose(a) => cmd_diagnose(a, stderr).map(|csv| (csv, a.target.output.clone())),
        Command::Mimo(a) => cmd_mimo(a).map(|csv| (csv, a.output.clone())),
    };
    match result.and_then(|(csv, out)| emit(&csv, out.as_deref(), stdout)) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            1
        }
    }
}

fn emit(csv: &str, path: Option<&Path>, stdout: &mut dyn Write) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, csv).with_context(|| format!("writing {}", p.display())),
        None => stdout.write_all(csv.as_bytes()).context("writing standard output"),
    }
}

struct Setup {
    basis: LatticeBasis,
    target: GaussianParams,
}

fn setup(a: &TargetArgs) -> anyhow::Result<Setup> {
    let text = std::fs::read_to_string(&a.basis).with_context(|| format!("reading basis file {}", a.basis.display()))?;
    let basis = LatticeBasis::from_text(&text).with_context(|| format!("parsing basis file {}", a.basis.display()))?;
    let n = basis.dim();
    let center = a.center.clone().unwrap_or_else(|| vec![0.0; n]);
    let target = GaussianParams::new(a.sigma, center)?;
    target.check_dim(&basis)?;
    if !(a.tail_eps > 0.0 && a.tail_eps < 1.0) {
        bail!("--tail-eps must lie in (0, 1)");
    }
    if a.algo == Algo::GibbsKlein && (a.block_size == 0 || a.block_size > n) {
        bail!("--block-size must lie in [1, {n}]");
    }
    if a.algo == Algo::Gibbs && a.scan == Scan::Fixed {
        bail!("fixed-scan Gibbs sampling is not implemented; use --scan random");
    }
    Ok(Setup { basis, target })
}

fn kernel(a: &TargetArgs) -> Kernel {
    match a.algo {
        Algo::GibbsKlein => Kernel::gibbs_klein(a.block_size),
        _ => Kernel::Gibbs {
            scan: match a.scan {
                Scan::Random => ScanOrder::Random,
                Scan::Fixed => ScanOrder::Fixed,
            },
        },
    }
}

fn init_state(s: &Setup, init: Init) -> Vec<i64> {
    let strategy = match init {
        Init::Zero => InitStrategy::Zero,
        Init::Round => InitStrategy::Round,
    };
    initial_state(&s.basis, &s.target, strategy)
}

fn push_row(out: &mut String, chain: usize, t: usize, x: &[i64]) {
    write!(out, "{chain},{t}").expect("string write");
    for v in x {
        write!(out, ",{v}").expect("string write");
    }
    out.push('\n');
}

fn header(n: usize) -> String {
    let mut h = String::from("chain,t");
    for i in 1..=n {
        write!(h, ",x_{i}").expect("string write");
    }
    h.push('\n');
    h
}

/// Klein draws `t = 1..=iters` of every chain; chain `k` uses stream `k`.
fn klein_draws(s: &Setup, iters: usize, chains: usize, seed: u64) -> anyhow::Result<Vec<Vec<Vec<i64>>>> {
    let sampler = KleinSampler::new(s.basis.clone(), s.target.clone())?;
    Ok((0..chains)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            (0..iters).map(|_| sampler.sample(&mut rng)).collect()
        })
        .collect())
}

pub fn cmd_sample(a: &SampleArgs) -> anyhow::Result<String> {
    let s = setup(&a.target)?;
    if a.chains == 0 {
        bail!("--chains must be positive");
    }
    let mut out = header(s.basis.dim());
    match a.target.algo {
        Algo::Klein => {
            for (k, draws) in klein_draws(&s, a.iters, a.chains, a.target.seed)?.iter().enumerate() {
                for (t, x) in draws.iter().enumerate() {
                    push_row(&mut out, k, t + 1, x);
                }
            }
        }
        Algo::Gibbs | Algo::GibbsKlein => {
            if a.burn_in > a.iters {
                bail!("--burn-in exceeds --iters");
            }
            let x0 = init_state(&s, a.target.init);
            let traces = run_chains(kernel(&a.target), &s.basis, &s.target, &x0, a.iters, a.chains, a.target.seed)?;
            for (k, tr) in traces.iter().enumerate() {
                for (t, st) in tr.states.iter().enumerate().skip(a.burn_in) {
                    push_row(&mut out, k, t, &st.x);
                }
            }
        }
    }
    Ok(out)
}

fn default_checkpoints(iters: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut scale = 1usize;
    'outer: loop {
        for f in [1, 2, 5] {
            let t = f * scale;
            if t > iters {
                break 'outer;
            }
            out.push(t);
        }
        scale *= 10;
    }
    if out.last() != Some(&iters) {
        out.push(iters);
    }
    out
}

/// TV between a law known on part of the lattice and the enumerated target.
/// Mass of `law` missing from its table counts as disjoint from the target.
fn tv_to_target(law: &DiscreteDistribution, target: &DiscreteDistribution) -> f64 {
    let missing = (1.0 - law.total_mass()).max(0.0);
    (tv_distance(law, target) + 0.5 * missing).min(1.0)
}

/// Probability below which exact-mode laws are pruned.
const EXACT_PRUNE: f64 = 1e-15;
/// States used for the detailed-balance report, by decreasing target mass.
const BALANCE_STATES: usize = 400;
/// Largest support propagated for the stationarity check.
const STATIONARITY_STATES: usize = 2000;
/// Target mass below which states are left out of the stationarity check.
const STATIONARITY_PRUNE: f64 = 1e-10;

pub fn cmd_diagnose(a: &DiagnoseArgs, report: &mut dyn Write) -> anyhow::Result<String> {
    let s = setup(&a.target)?;
    let n = s.basis.dim();
    if n > MAX_ORACLE_DIM {
        bail!(crate::Error::DimensionTooLarge {
            dim: n,
            limit: MAX_ORACLE_DIM
        });
    }
    if a.iters == 0 {
        bail!("--iters must be positive");
    }
    let checkpoints = a.checkpoints.clone().unwrap_or_else(|| default_checkpoints(a.iters));
    if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        bail!("--checkpoints must be strictly increasing");
    }
    if checkpoints[0] == 0 || *checkpoints.last().expect("non-empty") > a.iters {
        bail!("--checkpoints must lie in [1, --iters]");
    }
    if !a.exact {
        if a.chains == 0 {
            bail!("--chains must be positive");
        }
        if a.target.algo != Algo::Klein && checkpoints[0] <= a.burn_in {
            bail!("--checkpoints must exceed --burn-in");
        }
    }
    let exact = enumerate_support(&s.basis, &s.target, a.target.tail_eps)?;

    let tvs = if a.exact {
        exact_tv_path(a, &s, &exact, &checkpoints)?
    } else {
        empirical_tv_path(a, &s, &exact, &checkpoints)?
    };
    let mut out = String::from("t,tv_distance\n");
    for (t, tv) in checkpoints.iter().zip(&tvs) {
        writeln!(out, "{t},{tv}").expect("string write");
    }

    balance_report(a, &s, &exact, report)?;
    Ok(out)
}

fn exact_tv_path(a: &DiagnoseArgs, s: &Setup, exact: &DiscreteDistribution, checkpoints: &[usize]) -> anyhow::Result<Vec<f64>> {
    match a.target.algo {
        Algo::Klein => {
            // Klein draws are i.i.d., so the law of x_t is the same for all t.
            let sampler = KleinSampler::new(s.basis.clone(), s.target.clone())?;
            let entries: BTreeMap<Vec<i64>, f64> = exact.support().map(|x| (x.clone(), sampler.pmf(x))).collect();
            let law = DiscreteDistribution::new(entries, 0.0)?;
            Ok(vec![tv_to_target(&law, exact); checkpoints.len()])
        }
        Algo::Gibbs | Algo::GibbsKlein => {
            let gk = match a.target.algo {
                Algo::GibbsKlein => Some(GibbsKleinKernel::new(GibbsKleinConfig::new(
                    s.basis.clone(),
                    s.target.clone(),
                    a.target.block_size,
                )?)?),
                _ => None,
            };
            let step = |x: &[i64]| match &gk {
                Some(k) => k.transitions(x, EXACT_PRUNE),
                None => gibbs_transitions(&s.basis, &s.target, x),
            };
            let mut law = DiscreteDistribution::point_mass(init_state(s, a.target.init));
            let mut out = Vec::with_capacity(checkpoints.len());
            let mut next = checkpoints.iter().peekable();
            for t in 1..=*checkpoints.last().expect("non-empty") {
                law = propagate(&law, step)?.pruned(EXACT_PRUNE);
                if next.peek() == Some(&&t) {
                    out.push(tv_to_target(&law, exact));
                    next.next();
                }
            }
            Ok(out)
        }
    }
}

fn empirical_tv_path(a: &DiagnoseArgs, s: &Setup, exact: &DiscreteDistribution, checkpoints: &[usize]) -> anyhow::Result<Vec<f64>> {
    let last = *checkpoints.last().expect("non-empty");
    // paths[k][t - 1] is x_t of chain k.
    let (paths, first): (Vec<Vec<Vec<i64>>>, usize) = match a.target.algo {
        Algo::Klein => (klein_draws(s, last, a.chains, a.target.seed)?, 1),
        Algo::Gibbs | Algo::GibbsKlein => {
            let x0 = init_state(s, a.target.init);
            let traces = run_chains(kernel(&a.target), &s.basis, &s.target, &x0, last, a.chains, a.target.seed)?;
            let paths = traces
                .into_iter()
                .map(|tr| tr.states.into_iter().skip(1).map(|st| st.x).collect())
                .collect();
            (paths, a.burn_in + 1)
        }
    };
    let mut counts: BTreeMap<&[i64], u64> = BTreeMap::new();
    let mut total = 0u64;
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut t = first;
    for &cp in checkpoints {
        while t <= cp {
            for p in &paths {
                *counts.entry(p[t - 1].as_slice()).or_default() += 1;
                total += 1;
            }
            t += 1;
        }
        let entries = counts.iter().map(|(x, &c)| (x.to_vec(), c as f64 / total as f64)).collect();
        out.push(tv_to_target(&DiscreteDistribution::new(entries, 0.0)?, exact));
    }
    Ok(out)
}

fn balance_report(a: &DiagnoseArgs, s: &Setup, exact: &DiscreteDistribution, report: &mut dyn Write) -> anyhow::Result<()> {
    let mut states: Vec<(&Vec<i64>, f64)> = exact.iter().collect();
    states.sort_by(|x, y| y.1.total_cmp(&x.1).then_with(|| x.0.cmp(y.0)));
    states.truncate(BALANCE_STATES);
    let states: Vec<Vec<i64>> = states.into_iter().map(|(x, _)| x.clone()).collect();
    let sub: BTreeMap<Vec<i64>, f64> = states.iter().map(|x| (x.clone(), exact.prob(x))).collect();
    let sub = DiscreteDistribution::new(sub, 0.0)?;

    let (pairs, balance, stationarity) = match a.target.algo {
        Algo::Klein => {
            writeln!(report, "balance: klein draws are independent; no reversibility check")?;
            return Ok(());
        }
        Algo::Gibbs => {
            let pairs = reachable_pairs(&sub, |x| gibbs_transitions(&s.basis, &s.target, x));
            let b = detailed_balance_residual(|x, y| gibbs_kernel_prob(&s.basis, &s.target, x, y), exact, &pairs);
            let st = stationarity_on(exact, |x| gibbs_transitions(&s.basis, &s.target, x))?;
            (pairs.len(), b, st)
        }
        Algo::GibbsKlein => {
            let k = GibbsKleinKernel::new(GibbsKleinConfig::new(s.basis.clone(), s.target.clone(), a.target.block_size)?)?;
            let pairs = reachable_pairs(&sub, |x| k.transitions(x, EXACT_PRUNE));
            let b = detailed_balance_residual(|x, y| k.prob(x, y), exact, &pairs);
            let st = stationarity_on(exact, |x| k.transitions(x, EXACT_PRUNE))?;
            (pairs.len(), b, st)
        }
    };
    writeln!(
        report,
        "balance: pairs={pairs} checked={} one_sided={} max_abs={:e} max_rel={:e}",
        balance.pairs_checked, balance.one_sided_pairs, balance.max_abs_residual, balance.max_rel_residual
    )?;
    match stationarity {
        Ok((states, r)) => writeln!(report, "stationarity: states={states} max_abs={r:e}")?,
        Err(states) => writeln!(report, "stationarity: skipped ({states} states)")?,
    }
    Ok(())
}

/// Stationarity residual over the target pruned at `STATIONARITY_PRUNE`, or
/// `Err(size)` when that support is too large to propagate.
fn stationarity_on<F>(exact: &DiscreteDistribution, transitions: F) -> anyhow::Result<Result<(usize, f64), usize>>
where
    F: Fn(&[i64]) -> Vec<(Vec<i64>, f64)>,
{
    let pruned = exact.pruned(STATIONARITY_PRUNE);
    if pruned.len() > STATIONARITY_STATES {
        return Ok(Err(pruned.len()));
    }
    Ok(Ok((pruned.len(), stationarity_residual(&pruned, transitions)?)))
}

/// Ordered pairs `(x, y)` of distinct states of `states` with `y` reachable
/// from `x` in one step.
fn reachable_pairs<F>(states: &DiscreteDistribution, transitions: F) -> Vec<(Vec<i64>, Vec<i64>)>
where
    F: Fn(&[i64]) -> Vec<(Vec<i64>, f64)>,
{
    let mut out = Vec::new();
    for x in states.support() {
        for (y, _) in transitions(x) {
            if &y != x && states.prob(&y) > 0.0 {
                out.push((x.clone(), y));
            }
        }
    }
    out
}

pub fn cmd_mimo(a: &MimoArgs) -> anyhow::Result<String> {
    let decoders = a
        .decoders
        .iter()
        .map(|d| d.parse::<DecoderKind>())
        .collect::<crate::Result<Vec<_>>>()?;
    let cfg = MimoConfig {
        n_tx: a.ntx,
        n_rx: a.nrx.unwrap_or(a.ntx),
        ebn0_db: a.ebn0_db,
        trials: a.trials,
        iteration_budgets: a.iters.clone(),
        block_sizes: a.block_sizes.clone(),
        decoders,
        seed: a.seed,
    };
    Ok(ber_experiment(&cfg)?.to_csv())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_defaults() {
        assert_eq!(default_checkpoints(1), vec![1]);
        assert_eq!(default_checkpoints(7), vec![1, 2, 5, 7]);
        assert_eq!(default_checkpoints(100), vec![1, 2, 5, 10, 20, 50, 100]);
    }

    #[test]
    fn header_and_rows() {
        assert_eq!(header(3), "chain,t,x_1,x_2,x_3\n");
        let mut s = String::new();
        push_row(&mut s, 2, 5, &[-1, 0, 7]);
        assert_eq!(s, "2,5,-1,0,7\n");
    }

    #[test]
    fn parse_errors_exit_nonzero() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        assert_ne!(run(["lattice-gibbs", "sample"], &mut out, &mut err), 0);
        assert!(out.is_empty());
        assert!(!err.is_empty());
        err.clear();
        assert_ne!(run(["lattice-gibbs", "mimo", "--decoders", "mmse"], &mut out, &mut err), 0);
        assert!(out.is_empty());
    }

    #[test]
    fn mimo_zero_trials_is_header_only() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(["lattice-gibbs", "mimo", "--trials", "0", "--seed", "3"], &mut out, &mut err);
        assert_eq!(code, 0, "{}", String::from_utf8_lossy(&err));
        assert_eq!(String::from_utf8(out).unwrap(), format!("{}\n", crate::mimo::CSV_HEADER));
    }
}
