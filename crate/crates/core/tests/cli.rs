mod common;

use std::collections::BTreeMap;

use common::*;
use lattice_gibbs::linalg::{LatticeBasis, Matrix};

fn stdout(out: &std::process::Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn id2() -> (std::path::PathBuf, String) {
    let dir = scratch_dir("cli");
    let path = write_basis(&dir, "id2.txt", &LatticeBasis::identity(2));
    (dir, path)
}

#[test]
fn sample_klein_rows_and_determinism() {
    let (_, basis) = id2();
    let args = ["sample", "--basis", &basis, "--algo", "klein", "--sigma", "1.0", "--iters", "100", "--seed", "7"];
    let a = stdout(&run_bin(&args));
    let b = stdout(&run_bin(&args));
    assert_eq!(a, b);
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "chain,t,x_1,x_2");
    assert_eq!(lines.len(), 101);
    assert!(lines[1].starts_with("0,1,"));
    assert!(lines[100].starts_with("0,100,"));
    assert!(a.ends_with('\n') && !a.contains('\r'));

    let other = stdout(&run_bin(&["sample", "--basis", &basis, "--algo", "klein", "--sigma", "1.0", "--iters", "100", "--seed", "8"]));
    assert_ne!(a, other);
}

#[test]
fn seed_flag_overrides_environment() {
    let (_, basis) = id2();
    let args = ["sample", "--basis", &basis, "--algo", "gibbs", "--sigma", "1.0", "--iters", "30"];
    let by_env = bin().env("LATTICE_GIBBS_SEED", "5").args(args).output().unwrap();
    let by_flag = run_bin(&[&args[..], &["--seed", "5"]].concat());
    let both = bin().env("LATTICE_GIBBS_SEED", "9").args(args).args(["--seed", "5"]).output().unwrap();
    assert_eq!(stdout(&by_env), stdout(&by_flag));
    assert_eq!(stdout(&both), stdout(&by_flag));
}

#[test]
fn output_file_matches_stdout() {
    let (dir, basis) = id2();
    let path = dir.join("out.csv");
    let _ = std::fs::remove_file(&path);
    let args = ["sample", "--basis", &basis, "--algo", "gibbs-klein", "--block-size", "2", "--sigma", "0.8", "--iters", "40", "--chains", "2", "--seed", "3"];
    let printed = stdout(&run_bin(&args));
    let out = run_bin(&[&args[..], &["--output", path.to_str().unwrap()]].concat());
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), printed);
}

#[test]
fn missing_basis_file_fails_with_a_diagnostic() {
    let out = run_bin(&["sample", "--basis", "/nonexistent/basis.txt", "--sigma", "1.0"]);
    assert!(!out.status.success());
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("basis"));
}

#[test]
fn validation_failures_leave_no_output_file() {
    let (dir, basis) = id2();
    let bad: Vec<Vec<&str>> = vec![
        vec!["sample", "--basis", &basis, "--algo", "gibbs-klein", "--block-size", "3", "--sigma", "1.0"],
        vec!["sample", "--basis", &basis, "--sigma", "-1.0"],
        vec!["sample", "--basis", &basis, "--sigma", "1.0", "--center", "1,2,3"],
        vec!["sample", "--basis", &basis, "--algo", "gibbs", "--scan", "fixed", "--sigma", "1.0"],
        vec!["sample", "--basis", &basis, "--algo", "bogus", "--sigma", "1.0"],
        vec!["diagnose", "--basis", &basis, "--sigma", "1.0", "--checkpoints", "5,3", "--iters", "10"],
        vec!["mimo", "--ntx", "4", "--nrx", "3"],
        vec!["mimo", "--decoders", "zf,mmse"],
        vec!["mimo", "--iters", "0"],
        vec!["mimo", "--block-sizes", "9"],
    ];
    for (k, args) in bad.iter().enumerate() {
        let path = dir.join(format!("bad{k}.csv"));
        let _ = std::fs::remove_file(&path);
        let out = run_bin(&[&args[..], &["--output", path.to_str().unwrap()]].concat());
        assert!(!out.status.success(), "{args:?} succeeded");
        assert!(!out.stderr.is_empty(), "{args:?}");
        assert!(!path.exists(), "{args:?} left {path:?}");
    }
}

#[test]
fn fixed_scan_is_reported_as_unimplemented() {
    let (_, basis) = id2();
    let out = run_bin(&["sample", "--basis", &basis, "--algo", "gibbs", "--scan", "fixed", "--sigma", "1.0"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("not implemented"));
}

fn final_states(csv: &str) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, f64> = BTreeMap::new();
    let mut total = 0.0;
    for line in csv.lines().skip(1) {
        let fields: Vec<&str> = line.splitn(3, ',').collect();
        *counts.entry(fields[2].to_string()).or_default() += 1.0;
        total += 1.0;
    }
    counts.values_mut().for_each(|v| *v /= total);
    counts
}

#[test]
fn gibbs_klein_with_unit_blocks_is_indistinguishable_from_gibbs() {
    let (_, basis) = id2();
    // One state per chain (t = 20), so the 10^5 draws are independent.
    let common = ["--basis", basis.as_str(), "--sigma", "0.5", "--center", "0.3,-0.2", "--iters", "20", "--burn-in", "20", "--chains", "100000"];
    let gibbs = stdout(&run_bin(&[&["sample", "--algo", "gibbs", "--seed", "1"][..], &common[..]].concat()));
    let gk = stdout(&run_bin(&[&["sample", "--algo", "gibbs-klein", "--block-size", "1", "--seed", "2"][..], &common[..]].concat()));
    assert_eq!(gibbs.lines().count(), 100_001);
    let (p, q) = (final_states(&gibbs), final_states(&gk));
    let keys: std::collections::BTreeSet<&String> = p.keys().chain(q.keys()).collect();
    let tv: f64 = 0.5 * keys.iter().map(|k| (p.get(*k).unwrap_or(&0.0) - q.get(*k).unwrap_or(&0.0)).abs()).sum::<f64>();
    assert!(tv <= 0.01, "two-sample tv = {tv}");
}

fn tv_column(csv: &str) -> Vec<(usize, f64)> {
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,tv_distance"));
    lines
        .map(|l| {
            let (t, v) = l.split_once(',').unwrap();
            (t.parse().unwrap(), v.parse().unwrap())
        })
        .collect()
}

#[test]
fn diagnose_klein_at_huge_sigma() {
    let (_, basis) = id2();
    let out = run_bin(&["diagnose", "--basis", &basis, "--algo", "klein", "--sigma", "50", "--iters", "10", "--exact"]);
    let rows = tv_column(&stdout(&out));
    assert_eq!(rows[0].0, 1);
    assert!(rows[0].1 <= 0.02, "{rows:?}");
}

#[test]
fn diagnose_checkpoints_and_convergence() {
    let dir = scratch_dir("cli");
    let basis = write_basis(&dir, "skew.txt", &LatticeBasis::from_columns(&[vec![1.0, 0.0], vec![0.5, 1.0]]).unwrap());
    for algo in [&["--algo", "gibbs"][..], &["--algo", "gibbs-klein", "--block-size", "2"][..]] {
        let args = [
            &["diagnose", "--basis", basis.as_str(), "--sigma", "0.8", "--center", "3.2,-4.1", "--iters", "1000", "--chains", "200", "--seed", "4"][..],
            algo,
        ]
        .concat();
        let out = run_bin(&args);
        let rows = tv_column(&stdout(&out));
        assert!(rows.windows(2).all(|w| w[0].0 < w[1].0), "{rows:?}");
        assert_eq!(rows.last().unwrap().0, 1000);
        assert!(rows.last().unwrap().1 <= rows[0].1, "{rows:?}");
        let report = String::from_utf8_lossy(&out.stderr);
        assert!(report.contains("balance:") && report.contains("stationarity:"), "{report}");

        let exact_args = [
            &["diagnose", "--basis", basis.as_str(), "--sigma", "0.8", "--center", "3.2,-4.1", "--iters", "200", "--exact"][..],
            algo,
        ]
        .concat();
        let exact = run_bin(&exact_args);
        let rows = tv_column(&stdout(&exact));
        assert!(rows.last().unwrap().1 < 1e-3, "{rows:?}");
        assert!(rows.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12), "{rows:?}");
    }
}

#[test]
fn diagnose_rejects_large_dimensions() {
    let dir = scratch_dir("cli");
    let basis = write_basis(&dir, "id7.txt", &LatticeBasis::new(Matrix::identity(7)).unwrap());
    let out = run_bin(&["diagnose", "--basis", &basis, "--sigma", "1.0", "--iters", "5"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension"));
}

#[test]
fn mimo_zf_and_ml_rows() {
    let args = ["mimo", "--ntx", "4", "--ebn0-db", "15", "--decoders", "zf,ml", "--trials", "1000", "--seed", "1"];
    let csv = stdout(&run_bin(&args));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "decoder,block_size,iterations,trials,bit_errors,bits,ber");
    assert_eq!(lines.len(), 3);
    let ber = |l: &str| l.rsplit(',').next().unwrap().parse::<f64>().unwrap();
    assert!(lines[1].starts_with("zf,0,0,1000,") && lines[2].starts_with("ml,0,0,1000,"));
    assert!(ber(lines[2]) <= ber(lines[1]));
    assert_eq!(csv, stdout(&run_bin(&args)));
}

#[test]
fn mimo_zero_trials_is_header_only() {
    let csv = stdout(&run_bin(&["mimo", "--trials", "0", "--seed", "1"]));
    assert_eq!(csv, "decoder,block_size,iterations,trials,bit_errors,bits,ber\n");
}
