//! Exact ground truth on small lattices.
//!
//! [`enumerate_support`] tabulates `D_{Λ,σ,c}` over an integer box that
//! carries a certificate on the mass left outside. The box is
//! `|x_i - (B⁻¹c)_i| ≤ r_i`; by a Chernoff argument on `⟨v_i, Bx - c⟩`, with
//! `v_i` the i-th row of `B⁻¹`, the unnormalized mass outside it is at most
//! `Σ_i 2·Θ·exp(-r_i² / 2σ²‖v_i‖²)`, where `Θ = Π_i (1 + √(2π)·σ/|r_ii|)`
//! bounds `ρ_σ(Λ - c')` for every shift `c'`.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{norm_sq, LatticeBasis, Matrix, Permutation};
use crate::mcmc::{ChainTrace, PermutedFrame};
use crate::target::GaussianParams;
use crate::dgauss1d::Alphabet;

pub const MAX_ORACLE_DIM: usize = 6;
pub const MAX_BOX_POINTS: u128 = 4_000_000;
pub const MAX_BLOCK_DIM: usize = 4;

/// A finite distribution over integer vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteDistribution {
    entries: BTreeMap<Vec<i64>, f64>,
    omitted_mass_bound: f64,
}

impl DiscreteDistribution {
    pub fn new(entries: BTreeMap<Vec<i64>, f64>, omitted_mass_bound: f64) -> Result<Self> {
        if entries.values().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid("probabilities must be finite and non-negative"));
        }
        if !(0.0..=1.0).contains(&omitted_mass_bound) {
            return Err(Error::invalid("omitted mass bound must lie in [0, 1]"));
        }
        Ok(Self {
            entries,
            omitted_mass_bound,
        })
    }

    /// Normalizes log-weights with max-subtraction.
    pub fn from_log_weights(items: Vec<(Vec<i64>, f64)>, omitted_mass_bound: f64) -> Result<Self> {
        let max = items.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::invalid("distribution has no mass"));
        }
        let total: f64 = items.iter().map(|e| (e.1 - max).exp()).sum();
        let mut entries = BTreeMap::new();
        for (x, lw) in items {
            let p = (lw - max).exp() / total;
            if p > 0.0 {
                *entries.entry(x).or_insert(0.0) += p;
            }
        }
        Self::new(entries, omitted_mass_bound)
    }

    pub fn point_mass(x: Vec<i64>) -> Self {
        Self {
            entries: BTreeMap::from([(x, 1.0)]),
            omitted_mass_bound: 0.0,
        }
    }

    /// Frequency table of the given points.
    pub fn from_samples<'a, I>(samples: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [i64]>,
    {
        let mut counts: HashMap<&'a [i64], u64> = HashMap::new();
        let mut total = 0u64;
        for s in samples {
            *counts.entry(s).or_default() += 1;
            total += 1;
        }
        if total == 0 {
            return Err(Error::invalid("no samples"));
        }
        let entries = counts
            .into_iter()
            .map(|(k, c)| (k.to_vec(), c as f64 / total as f64))
            .collect();
        Self::new(entries, 0.0)
    }

    pub fn prob(&self, x: &[i64]) -> f64 {
        self.entries.get(x).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<i64>, f64)> {
        self.entries.iter().map(|(k, &v)| (k, v))
    }

    pub fn support(&self) -> impl Iterator<Item = &Vec<i64>> {
        self.entries.keys()
    }

    pub fn omitted_mass_bound(&self) -> f64 {
        self.omitted_mass_bound
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.values().sum()
    }

    /// Most probable point; ties go to the lexicographically smallest.
    pub fn mode(&self) -> Option<&Vec<i64>> {
        self.entries
            .iter()
            .fold(None, |best: Option<(&Vec<i64>, f64)>, (k, &p)| match best {
                Some((_, bp)) if bp >= p => best,
                _ => Some((k, p)),
            })
            .map(|(k, _)| k)
    }

    /// Keeps only points with probability at least `min_prob`, without
    /// renormalizing.
    pub fn pruned(&self, min_prob: f64) -> Self {
        let kept: BTreeMap<Vec<i64>, f64> = self
            .entries
            .iter()
            .filter(|(_, &p)| p >= min_prob)
            .map(|(k, &p)| (k.clone(), p))
            .collect();
        let dropped = (self.total_mass() - kept.values().sum::<f64>()).max(0.0);
        Self {
            entries: kept,
            omitted_mass_bound: (self.omitted_mass_bound + dropped).min(1.0),
        }
    }

    /// Evaluates `f` on this distribution's support.
    pub fn reweighted<F: Fn(&[i64]) -> f64>(&self, f: F) -> Result<Self> {
        let entries = self.entries.keys().map(|k| (k.clone(), f(k))).collect();
        Self::new(entries, 0.0)
    }

    pub fn sampler(&self) -> DistributionSampler {
        let mut acc = 0.0;
        let mut points = Vec::with_capacity(self.len());
        let mut cdf = Vec::with_capacity(self.len());
        for (k, &p) in &self.entries {
            acc += p;
            points.push(k.clone());
            cdf.push(acc);
        }
        for c in &mut cdf {
            *c /= acc;
        }
        DistributionSampler { points, cdf }
    }
}

/// Inverse-CDF draws from a [`DiscreteDistribution`].
#[derive(Clone, Debug)]
pub struct DistributionSampler {
    points: Vec<Vec<i64>>,
    cdf: Vec<f64>,
}

impl DistributionSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &[i64] {
        let u: f64 = rng.gen();
        let i = self.cdf.partition_point(|&c| c < u).min(self.points.len() - 1);
        &self.points[i]
    }
}

/// Integer box with a bound on the unnormalized Gaussian mass outside it.
#[derive(Clone, Debug)]
struct EnumerationBox {
    lo: Vec<i64>,
    hi: Vec<i64>,
    /// `ln` of the bound on `Σ_{x ∉ box} ρ_σ(Bx - c)`.
    log_outside: f64,
}

fn enumeration_box(basis: &LatticeBasis, sigma: f64, center: &[f64], log_target: f64) -> EnumerationBox {
    let n = basis.dim();
    let inv = basis.inverse();
    let log_theta: f64 = basis
        .gram_schmidt_norms()
        .iter()
        .map(|r| (1.0 + (2.0 * std::f64::consts::PI).sqrt() * sigma / r).ln())
        .sum();
    let mid = basis.solve(center);
    // Each of the 2n one-sided tails gets exp(log_target) / 2n.
    let log_budget = log_target - (2.0 * n as f64).ln() - log_theta;
    let scale = (-2.0 * log_budget).max(0.0).sqrt();
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    let mut log_outside = f64::NEG_INFINITY;
    for i in 0..n {
        let v_norm = norm_sq(&inv.row(i)).sqrt();
        let radius = sigma * v_norm * scale;
        let mut l = (mid[i] - radius).ceil() as i64;
        let mut h = (mid[i] + radius).floor() as i64;
        if l > h {
            l = mid[i].round() as i64;
            h = l;
        }
        // Distances to the first excluded integer on each side.
        for d in [mid[i] - (l - 1) as f64, (h + 1) as f64 - mid[i]] {
            log_outside = log_add(log_outside, log_theta - d * d / (2.0 * sigma * sigma * v_norm * v_norm));
        }
        lo.push(l);
        hi.push(h);
    }
    EnumerationBox { lo, hi, log_outside }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn axis_values(lo: i64, hi: i64, alphabet: &Alphabet) -> Vec<i64> {
    match alphabet.values() {
        None => (lo..=hi).collect(),
        Some(v) => v.iter().copied().filter(|k| (lo..=hi).contains(k)).collect(),
    }
}

/// Cartesian product of the per-axis value lists, in lexicographic order.
fn for_each_point<F: FnMut(&[i64])>(axes: &[Vec<i64>], mut f: F) {
    if axes.iter().any(Vec::is_empty) {
        return;
    }
    let n = axes.len();
    let mut idx = vec![0usize; n];
    let mut x: Vec<i64> = axes.iter().map(|a| a[0]).collect();
    loop {
        f(&x);
        let mut k = n;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                x[k] = axes[k][idx[k]];
                break;
            }
            idx[k] = 0;
            x[k] = axes[k][0];
        }
    }
}

fn box_size(axes: &[Vec<i64>]) -> u128 {
    axes.iter().map(|a| a.len() as u128).product()
}

/// Enumerates points of the box around `center` for `basis` and returns
/// `(point, log weight)` pairs plus the normalized omitted-mass bound.
/// Grows the box until the bound is below `tail_eps`.
fn enumerate_gaussian<F>(
    basis: &LatticeBasis,
    sigma: f64,
    center: &[f64],
    alphabet: &Alphabet,
    tail_eps: f64,
    log_weight: F,
) -> Result<(Vec<(Vec<i64>, f64)>, f64)>
where
    F: Fn(&[i64]) -> f64,
{
    let own_weight = |x: &[i64]| {
        let mut p = basis.point(x);
        for (pi, ci) in p.iter_mut().zip(center) {
            *pi -= ci;
        }
        -norm_sq(&p) / (2.0 * sigma * sigma)
    };
    let rounded: Vec<i64> = basis.solve(center).iter().map(|v| v.round() as i64).collect();
    let mut log_mass_guess = own_weight(&rounded);
    for _ in 0..8 {
        let b = enumeration_box(basis, sigma, center, tail_eps.ln() + log_mass_guess);
        let axes: Vec<Vec<i64>> = (0..basis.dim())
            .map(|i| axis_values(b.lo[i], b.hi[i], alphabet))
            .collect();
        let points = box_size(&axes);
        if points > MAX_BOX_POINTS {
            return Err(Error::BoxTooLarge {
                points,
                limit: MAX_BOX_POINTS,
            });
        }
        let mut log_inside = f64::NEG_INFINITY;
        let mut items = Vec::with_capacity(points as usize);
        for_each_point(&axes, |x| {
            log_inside = log_add(log_inside, own_weight(x));
            items.push((x.to_vec(), log_weight(x)));
        });
        if log_inside == f64::NEG_INFINITY {
            log_mass_guess -= 50.0;
            continue;
        }
        // omitted / (inside + omitted) ≤ outside / inside
        let omitted = (b.log_outside - log_inside).exp().min(1.0);
        if omitted <= tail_eps {
            return Ok((items, omitted));
        }
        log_mass_guess = log_inside - (omitted / tail_eps).ln() - 1.0;
    }
    Err(Error::invalid("enumeration box did not converge"))
}

/// `D_{Λ,σ,c}` tabulated over a certified box (restricted to the target's
/// alphabet when it is finite).
pub fn enumerate_support(basis: &LatticeBasis, target: &GaussianParams, tail_eps: f64) -> Result<DiscreteDistribution> {
    target.check_dim(basis)?;
    if basis.dim() > MAX_ORACLE_DIM {
        return Err(Error::DimensionTooLarge {
            dim: basis.dim(),
            limit: MAX_ORACLE_DIM,
        });
    }
    if !(tail_eps > 0.0 && tail_eps < 1.0) {
        return Err(Error::invalid("tail_eps must lie in (0, 1)"));
    }
    let (items, omitted) = enumerate_gaussian(basis, target.sigma, &target.center, &target.alphabet, tail_eps, |x| {
        target.log_weight(basis, x)
    })?;
    DiscreteDistribution::from_log_weights(items, omitted)
}

/// `½ Σ |p - q|` over the union of supports.
pub fn tv_distance(p: &DiscreteDistribution, q: &DiscreteDistribution) -> f64 {
    let mut sum = 0.0;
    for (k, pk) in p.iter() {
        sum += (pk - q.prob(k)).abs();
    }
    for (k, qk) in q.iter() {
        if !p.entries.contains_key(k) {
            sum += qk;
        }
    }
    0.5 * sum
}

/// Frequencies of `trace.states[burn_in..]`.
pub fn empirical_distribution(trace: &ChainTrace, burn_in: usize) -> Result<DiscreteDistribution> {
    pooled_empirical(std::slice::from_ref(trace), burn_in)
}

/// Frequencies of the post-burn-in states of several traces, pooled.
pub fn pooled_empirical(traces: &[ChainTrace], burn_in: usize) -> Result<DiscreteDistribution> {
    if traces.iter().any(|t| burn_in >= t.len()) {
        return Err(Error::invalid(format!("burn-in {burn_in} leaves no states")));
    }
    DiscreteDistribution::from_samples(traces.iter().flat_map(|t| t.states[burn_in..].iter().map(|s| s.x.as_slice())))
}

/// Distribution of the state at step `t` across independent traces.
pub fn cross_section(traces: &[ChainTrace], t: usize) -> Result<DiscreteDistribution> {
    DiscreteDistribution::from_samples(
        traces
            .iter()
            .map(|tr| tr.states.get(t).map(|s| s.x.as_slice()).ok_or(Error::invalid("trace too short")))
            .collect::<Result<Vec<_>>>()?,
    )
}

/// One step of a kernel applied to a distribution, given the transitions out
/// of each state.
pub fn propagate<F>(mu: &DiscreteDistribution, transitions: F) -> Result<DiscreteDistribution>
where
    F: Fn(&[i64]) -> Vec<(Vec<i64>, f64)>,
{
    let mut next: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    for (s, p) in mu.iter() {
        for (t, q) in transitions(s) {
            *next.entry(t).or_insert(0.0) += p * q;
        }
    }
    DiscreteDistribution::new(next, mu.omitted_mass_bound)
}

/// `max_{s'} |Σ_s D(s) P(s, s') - D(s')|` over the support of `target`.
pub fn stationarity_residual<F>(target: &DiscreteDistribution, transitions: F) -> Result<f64>
where
    F: Fn(&[i64]) -> Vec<(Vec<i64>, f64)>,
{
    let next = propagate(target, transitions)?;
    Ok(target
        .iter()
        .map(|(s, d)| (next.prob(s) - d).abs())
        .fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BalanceReport {
    pub max_abs_residual: f64,
    pub max_rel_residual: f64,
    pub pairs_checked: usize,
    /// Pairs where exactly one side is zero because a one-dimensional
    /// conditional was truncated; they enter only the absolute residual.
    pub one_sided_pairs: usize,
}

/// `max |D(s)P(s;s') - D(s')P(s';s)|`, absolute and relative to the larger
/// side, over `pairs`. Pairs where both sides vanish are skipped; pairs where
/// exactly one side vanishes are counted separately and excluded from the
/// relative residual.
pub fn detailed_balance_residual<F>(kernel_prob: F, target: &DiscreteDistribution, pairs: &[(Vec<i64>, Vec<i64>)]) -> BalanceReport
where
    F: Fn(&[i64], &[i64]) -> f64,
{
    let mut report = BalanceReport::default();
    for (a, b) in pairs {
        let fwd = target.prob(a) * kernel_prob(a, b);
        let bwd = target.prob(b) * kernel_prob(b, a);
        let big = fwd.abs().max(bwd.abs());
        if big == 0.0 {
            continue;
        }
        let diff = (fwd - bwd).abs();
        report.max_abs_residual = report.max_abs_residual.max(diff);
        if fwd == 0.0 || bwd == 0.0 {
            report.one_sided_pairs += 1;
            continue;
        }
        report.max_rel_residual = report.max_rel_residual.max(diff / big);
        report.pairs_checked += 1;
    }
    report
}

/// Ordered pairs of distinct support points differing in between 1 and
/// `max_diff` coordinates.
pub fn neighbor_pairs(target: &DiscreteDistribution, max_diff: usize) -> Vec<(Vec<i64>, Vec<i64>)> {
    let pts: Vec<&Vec<i64>> = target.support().collect();
    let mut out = Vec::new();
    for a in &pts {
        for b in &pts {
            let d = a.iter().zip(b.iter()).filter(|(x, y)| x != y).count();
            if d >= 1 && d <= max_diff {
                out.push(((*a).clone(), (*b).clone()));
            }
        }
    }
    out
}

/// The target renormalized over the first `m` coordinates of `z = E⁻¹x`
/// with `z[m..] = z_rest` held fixed.
pub fn block_conditional_exact(
    basis: &LatticeBasis,
    target: &GaussianParams,
    perm: &Permutation,
    m: usize,
    z_rest: &[i64],
    tail_eps: f64,
) -> Result<DiscreteDistribution> {
    target.check_dim(basis)?;
    let n = basis.dim();
    if m == 0 || m > n || m > MAX_BLOCK_DIM {
        return Err(Error::invalid(format!("block size {m} outside [1, min(n, {MAX_BLOCK_DIM})]")));
    }
    if z_rest.len() != n - m {
        return Err(Error::DimensionMismatch {
            expected: n - m,
            actual: z_rest.len(),
        });
    }
    let frame = PermutedFrame::new(basis, target, perm.clone())?;
    let r = frame.basis.r();
    let mut lead = Matrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            lead[(i, j)] = r[(i, j)];
        }
    }
    let lead = LatticeBasis::new(lead)?;
    let shifted: Vec<f64> = (0..m)
        .map(|i| frame.projected_center[i] - (m..n).map(|j| r[(i, j)] * z_rest[j - m] as f64).sum::<f64>())
        .collect();
    // Box and certificate from the block lattice; weights from the full
    // distance ‖B̃z - c‖ in the original coordinates.
    let (items, omitted) = enumerate_gaussian(&lead, target.sigma, &shifted, &target.alphabet, tail_eps, |zb| {
        let z: Vec<i64> = zb.iter().chain(z_rest).copied().collect();
        let mut p = frame.basis.point(&z);
        for (pi, ci) in p.iter_mut().zip(&target.center) {
            *pi -= ci;
        }
        -norm_sq(&p) / (2.0 * target.sigma * target.sigma)
    })?;
    DiscreteDistribution::from_log_weights(items, omitted)
}

/// `Σ_k exp(-(r·k + ξ)² / 2σ²)`.
fn theta_sum(r: f64, xi: f64, sigma: f64) -> f64 {
    let mid = -xi / r;
    let half = 40.0 * sigma / r + 2.0;
    let lo = (mid - half).floor() as i64;
    let hi = (mid + half).ceil() as i64;
    (lo..=hi)
        .map(|k| {
            let d = r * k as f64 + xi;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .sum()
}

/// Observed range of `Π_i ρ_σ(r_i Z + ξ_i) / Π_i ρ_σ(r_i Z)` over the
/// supplied shift vectors.
pub fn smoothing_ratio_window(r_norms: &[f64], sigma: f64, xi_samples: &[Vec<f64>]) -> Result<(f64, f64)> {
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma must be positive"));
    }
    if r_norms.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::invalid("norms must be positive"));
    }
    if xi_samples.is_empty() {
        return Err(Error::invalid("no shifts supplied"));
    }
    let centered: f64 = r_norms.iter().map(|&r| theta_sum(r, 0.0, sigma)).product();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for xi in xi_samples {
        if xi.len() != r_norms.len() {
            return Err(Error::DimensionMismatch {
                expected: r_norms.len(),
                actual: xi.len(),
            });
        }
        let shifted: f64 = r_norms.iter().zip(xi).map(|(&r, &x)| theta_sum(r, x, sigma)).product();
        let ratio = shifted / centered;
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgauss1d::{pmf, Gaussian1D, DEFAULT_TAIL_EPS};
    use crate::mcmc::{gibbs_conditional, ChainState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn dist(pairs: &[(&[i64], f64)]) -> DiscreteDistribution {
        DiscreteDistribution::new(pairs.iter().map(|(k, p)| (k.to_vec(), *p)).collect(), 0.0).unwrap()
    }

    #[test]
    fn one_dimensional_enumeration_matches_dgauss() {
        let b = LatticeBasis::identity(1);
        let t = GaussianParams::centered(1.0, 1).unwrap();
        let d = enumerate_support(&b, &t, DEFAULT_TAIL_EPS).unwrap();
        let g = Gaussian1D::new(1.0, 0.0).unwrap();
        for (x, p) in d.iter() {
            let q = pmf(g, x[0]);
            if q > 0.0 {
                assert!((p - q).abs() < 1e-13, "{x:?}: {p} vs {q}");
            }
        }
        assert!(d.omitted_mass_bound() <= DEFAULT_TAIL_EPS);
    }

    #[test]
    fn identity_enumeration_is_a_product() {
        let c = [0.3, -1.4];
        let t = GaussianParams::new(0.7, c.to_vec()).unwrap();
        let d = enumerate_support(&LatticeBasis::identity(2), &t, 1e-13).unwrap();
        for (x, p) in d.iter() {
            let q = pmf(Gaussian1D::new(0.7, c[0]).unwrap(), x[0]) * pmf(Gaussian1D::new(0.7, c[1]).unwrap(), x[1]);
            assert!((p - q).abs() < 1e-12);
        }
        assert!((d.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mode_is_closest_vector() {
        let b = LatticeBasis::from_columns(&[vec![1.0, 0.0], vec![0.5, 1.0]]).unwrap();
        let t = GaussianParams::new(1.0, vec![0.3, 0.7]).unwrap();
        let d = enumerate_support(&b, &t, DEFAULT_TAIL_EPS).unwrap();
        let mut best = (f64::INFINITY, vec![]);
        for a in -10..=10 {
            for c in -10..=10 {
                let dist = t.distance_sq(&b, &[a, c]);
                if dist < best.0 {
                    best = (dist, vec![a, c]);
                }
            }
        }
        assert_eq!(d.mode(), Some(&best.1));
    }

    #[test]
    fn enumeration_guards() {
        let t = GaussianParams::centered(1.0, 7).unwrap();
        assert!(matches!(
            enumerate_support(&LatticeBasis::identity(7), &t, 1e-6),
            Err(Error::DimensionTooLarge { .. })
        ));
        let t = GaussianParams::centered(500.0, 3).unwrap();
        assert!(matches!(
            enumerate_support(&LatticeBasis::identity(3), &t, 1e-6),
            Err(Error::BoxTooLarge { .. })
        ));
        let t = GaussianParams::centered(1.0, 2).unwrap();
        assert!(enumerate_support(&LatticeBasis::identity(2), &t, 0.0).is_err());
    }

    #[test]
    fn tv_examples() {
        let p = dist(&[(&[0], 0.5), (&[1], 0.5)]);
        let q = dist(&[(&[0], 1.0)]);
        assert_eq!(tv_distance(&p, &p), 0.0);
        assert_eq!(tv_distance(&p, &q), 0.5);
        assert_eq!(tv_distance(&q, &p), 0.5);
        let a = DiscreteDistribution::point_mass(vec![1, 2]);
        let b = DiscreteDistribution::point_mass(vec![2, 1]);
        assert_eq!(tv_distance(&a, &b), 1.0);
    }

    fn trace(xs: &[[i64; 1]]) -> ChainTrace {
        ChainTrace {
            states: xs
                .iter()
                .enumerate()
                .map(|(t, x)| ChainState { x: x.to_vec(), t: t as u64 })
                .collect(),
            burn_in: 0,
            rng_seed: None,
        }
    }

    #[test]
    fn empirical_distributions() {
        let c = trace(&[[3], [3], [3]]);
        assert_eq!(empirical_distribution(&c, 1).unwrap(), DiscreteDistribution::point_mass(vec![3]));
        assert!(empirical_distribution(&c, 3).is_err());

        let a = trace(&[[0], [1], [1], [1]]);
        let b = trace(&[[0], [2]]);
        let pooled = pooled_empirical(&[a, b], 1).unwrap();
        assert!((pooled.prob(&[1]) - 0.75).abs() < 1e-15);
        assert!((pooled.prob(&[2]) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn exact_target_draws_match() {
        let b = LatticeBasis::from_columns(&[vec![1.0, 0.0], vec![0.5, 1.0]]).unwrap();
        let t = GaussianParams::new(0.8, vec![0.1, 0.2]).unwrap();
        let d = enumerate_support(&b, &t, DEFAULT_TAIL_EPS).unwrap();
        let s = d.sampler();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let draws: Vec<Vec<i64>> = (0..100_000).map(|_| s.sample(&mut rng).to_vec()).collect();
        let e = DiscreteDistribution::from_samples(draws.iter().map(Vec::as_slice)).unwrap();
        assert!(tv_distance(&e, &d) <= 0.01);
    }

    #[test]
    fn independent_sampler_is_balanced() {
        let b = LatticeBasis::from_columns(&[vec![1.0, 0.0], vec![0.5, 1.0]]).unwrap();
        let t = GaussianParams::new(1.0, vec![0.0, 0.0]).unwrap();
        let d = enumerate_support(&b, &t, 1e-10).unwrap().pruned(1e-9);
        let pairs = neighbor_pairs(&d, 2);
        let report = detailed_balance_residual(|_, to| d.prob(to), &d, &pairs);
        assert!(report.pairs_checked > 0);
        assert!(report.max_rel_residual <= 1e-12);
    }

    #[test]
    fn oracle_self_consistency() {
        let b = LatticeBasis::from_columns(&[vec![1.2, 0.1, 0.0], vec![0.4, 0.9, 0.3], vec![-0.2, 0.5, 1.1]]).unwrap();
        let t = GaussianParams::new(0.9, vec![0.3, -0.2, 0.5]).unwrap();
        let eps = 1e-8;
        let a = enumerate_support(&b, &t, eps).unwrap();
        let c = enumerate_support(&b, &t, eps / 10.0).unwrap();
        for (x, p) in a.iter() {
            assert!((p - c.prob(x)).abs() <= eps);
        }
    }

    #[test]
    fn block_conditional_single_coordinate_is_gibbs_conditional() {
        let b = LatticeBasis::from_columns(&[vec![1.2, 0.1, 0.0], vec![0.4, 0.9, 0.3], vec![-0.2, 0.5, 1.1]]).unwrap();
        let t = GaussianParams::new(0.9, vec![0.3, -0.2, 0.5]).unwrap();
        let perm = Permutation::from_vec(vec![2, 0, 1]).unwrap();
        let z_rest = [1, -2];
        let d = block_conditional_exact(&b, &t, &perm, 1, &z_rest, DEFAULT_TAIL_EPS).unwrap();
        let x = perm.from_permuted(&[0, 1, -2]);
        let g = gibbs_conditional(&b, &t, &x, 2);
        for (z, p) in d.iter() {
            assert!((p - pmf(g, z[0])).abs() < 1e-12);
        }
    }

    #[test]
    fn block_conditional_on_identity_factorizes() {
        let c = vec![0.4, -0.7, 1.2];
        let t = GaussianParams::new(0.6, c.clone()).unwrap();
        let perm = Permutation::from_vec(vec![1, 2, 0]).unwrap();
        let d = block_conditional_exact(&LatticeBasis::identity(3), &t, &perm, 2, &[5], DEFAULT_TAIL_EPS).unwrap();
        for (z, p) in d.iter() {
            let q = pmf(Gaussian1D::new(0.6, c[1]).unwrap(), z[0]) * pmf(Gaussian1D::new(0.6, c[2]).unwrap(), z[1]);
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn smoothing_window_basics() {
        let (lo, hi) = smoothing_ratio_window(&[1.0, 0.7], 0.4, &[vec![0.0, 0.0]]).unwrap();
        assert_eq!((lo, hi), (1.0, 1.0));
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let xis: Vec<Vec<f64>> = (0..100).map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]).collect();
        let (_, hi) = smoothing_ratio_window(&[1.0, 0.7], 0.4, &xis).unwrap();
        assert!(hi <= 1.0 + 1e-12);
        let (lo, _) = smoothing_ratio_window(&[1.0, 0.7], 3.0, &xis).unwrap();
        assert!(lo >= 0.999);
        assert!(smoothing_ratio_window(&[1.0], 0.0, &xis).is_err());
        assert!(smoothing_ratio_window(&[1.0], 1.0, &xis).is_err());
    }
}
