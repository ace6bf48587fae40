use std::fs;
use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_pra-bcrb");

fn small_config(dir: &Path, rel_tol: f64, extra_verify: &str) -> std::path::PathBuf {
    let text = format!(
        r#"{{
  "scene": {{"n_tx": 4, "n_rx": 4, "n_samples": 10, "power_dbm": 30, "received_snr_db": 5, "xpd_inv": 0.2}},
  "prior": {{"components": [{{"weight": 0.6, "mean": 1.2, "variance": 0.01}}, {{"weight": 0.4, "mean": 0.3, "variance": 0.01}}], "alpha_var": 1e-12}},
  "ao": {{"rel_tol": {rel_tol:e}, "n_restarts": 3, "rng_seed": 11}},
  "snr_sweep_db": [0, 10],
  "benchmarks": {{"random_phase_draws": 8}},
  "beampattern": {{"n_points": 91}},
  "output_dir": "{}",
  "verify": {{"n_mc": 20000, "covariance_scenes": 2, "covariance_draws": 100, "identity_scenes": 5, "random_matrices": 10{extra_verify}}}
}}"#,
        dir.join("out").display()
    );
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(BIN).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn optimize_is_deterministic_and_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 1e-9, "");
    let cfg = cfg.to_str().unwrap();
    let a_dir = dir.path().join("a");
    let b_dir = dir.path().join("b");
    assert_eq!(run(&["optimize", "--config", cfg, "--out", a_dir.to_str().unwrap()]).0, 0);
    assert_eq!(run(&["optimize", "--config", cfg, "--out", b_dir.to_str().unwrap()]).0, 0);
    for f in ["trace.csv", "design.csv"] {
        assert_eq!(fs::read(a_dir.join(f)).unwrap(), fs::read(b_dir.join(f)).unwrap(), "{f}");
    }

    let mut rdr = csv::Reader::from_path(a_dir.join("trace.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["outer_iter", "stage", "objective", "bcrb"]);
    let objs: Vec<f64> = rdr.records().map(|r| r.unwrap()[2].parse().unwrap()).collect();
    assert!(objs.windows(2).all(|w| w[1] >= w[0] - 1e-12 * w[0].abs()));

    // a different seed changes the restart streams
    let c_dir = dir.path().join("c");
    assert_eq!(run(&["optimize", "--config", cfg, "--seed", "99", "--out", c_dir.to_str().unwrap()]).0, 0);
    assert_ne!(fs::read(a_dir.join("trace.csv")).unwrap(), fs::read(c_dir.join("trace.csv")).unwrap());
}

#[test]
fn looser_tolerance_stops_no_later() {
    let dir = tempfile::tempdir().unwrap();
    let iters = |tol: f64, sub: &str| {
        let d = dir.path().join(sub);
        fs::create_dir_all(&d).unwrap();
        let cfg = small_config(&d, tol, "");
        assert_eq!(run(&["optimize", "--config", cfg.to_str().unwrap(), "--restarts", "1"]).0, 0);
        let mut rdr = csv::Reader::from_path(d.join("out/trace.csv")).unwrap();
        rdr.records().map(|r| r.unwrap()[0].parse::<usize>().unwrap()).max().unwrap()
    };
    assert!(iters(1e-3, "loose") <= iters(1e-9, "tight"));
}

#[test]
fn beampattern_from_saved_design() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 1e-9, "");
    let cfg = cfg.to_str().unwrap();
    assert_eq!(run(&["optimize", "--config", cfg]).0, 0);
    let design = dir.path().join("out/design.csv");
    let (code, _, err) = run(&["beampattern", "--config", cfg, "--design", design.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let mut rdr = csv::Reader::from_path(dir.path().join("out/beampattern.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["theta", "pattern", "prior_pdf"]);
    let rows: Vec<Vec<f64>> = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 91);
    assert!(rows.iter().all(|r| r[1] >= 0.0 && r[2] >= 0.0));
}

#[test]
fn sweep_and_compare_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 1e-9, "");
    let cfg = cfg.to_str().unwrap();
    assert_eq!(run(&["sweep-snr", "--config", cfg]).0, 0);
    assert_eq!(run(&["compare", "--config", cfg]).0, 0);

    let mut rdr = csv::Reader::from_path(dir.path().join("out/bcrb_vs_snr.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["snr_db", "scheme", "objective", "bcrb"]);
    let rows: Vec<(f64, String, f64)> = rdr
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].parse().unwrap(), r[1].to_string(), r[3].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 14);
    for scheme in ["proposed_pra", "no_pra", "spra", "cpa", "lpa", "paa", "random_phase"] {
        let col: Vec<f64> = rows.iter().filter(|r| r.1 == scheme).map(|r| r.2).collect();
        assert_eq!(col.len(), 2);
        assert!(col[1] < col[0], "{scheme}");
    }

    let text = fs::read_to_string(dir.path().join("out/compare.csv")).unwrap();
    assert!(text.starts_with("scheme,objective,objective_stderr,bcrb,bcrb_stderr\n"));
    assert_eq!(text.lines().count(), 8);
}

#[test]
fn verify_passes_and_detects_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 1e-9, "");
    let (code, out, _) = run(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0, "{out}");
    let report = fs::read_to_string(dir.path().join("out/verify_report.csv")).unwrap();
    assert!(report.starts_with("check,measured,expected,tolerance,passed\n"));
    assert!(report.contains("cross_moment_theta_alpha_re"));

    let bad = tempfile::tempdir().unwrap();
    let cfg = small_config(bad.path(), 1e-9, ", \"corrupt_a1_scale\": 1.3");
    let (code, out, _) = run(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 1, "{out}");
    assert!(out.contains("FAIL fisher_mc_vs_analytic"));
}

#[test]
fn bad_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 1e-9, "");
    let text = fs::read_to_string(&cfg).unwrap().replace("\"n_tx\": 4", "\"n_tx\": 0");
    let broken = dir.path().join("broken.json");
    fs::write(&broken, text).unwrap();
    let (code, _, err) = run(&["optimize", "--config", broken.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("scene.n_tx"), "{err}");

    let (code, _, _) = run(&["optimize"]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&["optimise", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2);
    let (code, _, err) = run(&["beampattern", "--config", cfg.to_str().unwrap(), "--design", "/nonexistent/design.csv"]);
    assert_eq!(code, 2, "{err}");
}
