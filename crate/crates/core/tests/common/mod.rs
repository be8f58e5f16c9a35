#![allow(dead_code)]

use std::path::PathBuf;
use std::process::{Command, Output};

use lattice_gibbs::klein::KleinSampler;
use lattice_gibbs::linalg::{LatticeBasis, Matrix};
use lattice_gibbs::oracle::DiscreteDistribution;
use rand::Rng;

/// Random well-conditioned basis: identity plus a uniform perturbation.
pub fn random_basis<R: Rng>(n: usize, rng: &mut R) -> LatticeBasis {
    random_basis_with_spread(n, 0.6, rng)
}

/// Identity plus entries uniform in `(-spread, spread)`.
pub fn random_basis_with_spread<R: Rng>(n: usize, spread: f64, rng: &mut R) -> LatticeBasis {
    loop {
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                (0..n)
                    .map(|i| f64::from(u8::from(i == j)) + rng.gen_range(-spread..spread))
                    .collect()
            })
            .collect();
        if let Ok(b) = LatticeBasis::new(Matrix::from_columns(&cols)) {
            if b.covolume() > 0.3 {
                return b;
            }
        }
    }
}

pub fn random_center<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()
}

pub fn min_gs(b: &LatticeBasis) -> f64 {
    b.gram_schmidt_norms().into_iter().fold(f64::INFINITY, f64::min)
}

pub fn max_gs(b: &LatticeBasis) -> f64 {
    b.gram_schmidt_norms().into_iter().fold(0.0, f64::max)
}

/// TV between a law given pointwise by `q` and the tabulated `p`; mass of
/// `q` outside the support of `p` counts fully.
pub fn tv_against<F: Fn(&[i64]) -> f64>(p: &DiscreteDistribution, q: F) -> f64 {
    let mut diff = 0.0;
    let mut q_mass = 0.0;
    for (x, px) in p.iter() {
        let qx = q(x);
        q_mass += qx;
        diff += (px - qx).abs();
    }
    0.5 * (diff + (1.0 - q_mass).max(0.0))
}

pub fn klein_tv(sampler: &KleinSampler, exact: &DiscreteDistribution) -> f64 {
    tv_against(exact, |x| sampler.pmf(x))
}

pub fn report(criterion: u32, ok: bool, detail: &str) {
    println!("criterion {criterion}: {} {detail}", if ok { "PASS" } else { "FAIL" });
}

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lattice-gibbs"))
}

pub fn run_bin(args: &[&str]) -> Output {
    bin().env_remove("LATTICE_GIBBS_SEED").args(args).output().expect("binary runs")
}

pub fn scratch_dir(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

pub fn write_basis(dir: &PathBuf, name: &str, b: &LatticeBasis) -> String {
    let path = dir.join(name);
    std::fs::write(&path, b.to_text()).unwrap();
    path.to_string_lossy().into_owned()
}
