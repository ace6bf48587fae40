//! Experiment configuration and the CSV-producing subcommands behind the
//! `pra-bcrb` binary.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bcrb::{bcrb_from_objective, bfim, objective, tx_vectors};
use crate::benchmarks::{compare_schemes, BenchmarkOptions, SchemeId, SchemeResult};
use crate::model::{precompute, steering, Design, MixtureComponent, PrecomputedScene, PriorModel, SceneConfig, Side};
use crate::numerics::{make_quadrature, CMatrix};
use crate::optimizer::{
    objective_by_receive_rows, objective_by_transmit_column, optimal_covariance, run_ao,
    update_receive_phase, update_transmit_phase, AoSettings, OptResult,
};
use crate::oracles::{
    grid_phase_oracle, mc_fisher_theta, pointwise_fisher_theta, random_design, random_feasible_covariance_with,
    random_psd2, random_scene,
};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_BAD_INPUT: i32 = 2;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Scene block of the config file. Power levels are in dBm; exactly one of
/// `noise_power_dbm` and `received_snr_db` sets the noise level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSection {
    pub n_tx: usize,
    pub n_rx: usize,
    #[serde(default = "default_spacing")]
    pub spacing_ratio: f64,
    pub n_samples: usize,
    pub power_dbm: f64,
    #[serde(default)]
    pub noise_power_dbm: Option<f64>,
    #[serde(default)]
    pub received_snr_db: Option<f64>,
    pub xpd_inv: f64,
}

fn default_spacing() -> f64 {
    0.5
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    /// `aᴴ(θ) R_X a(θ) / P`.
    #[default]
    Transmit,
    /// Transmit pattern times the mean transmit polarization gain `‖Ψ f_n‖²`.
    PolarizationWeighted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeampatternSection {
    pub theta_min: f64,
    pub theta_max: f64,
    pub n_points: usize,
    pub kind: PatternKind,
}

impl Default for BeampatternSection {
    fn default() -> Self {
        BeampatternSection {
            theta_min: 0.0,
            theta_max: std::f64::consts::PI,
            n_points: 1801,
            kind: PatternKind::Transmit,
        }
    }
}

/// Small-instance settings for `verify`. Array size, sample count, SNR and
/// prior replace those of the main scene; spacing, power and `χ` carry over.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub n_tx: usize,
    pub n_rx: usize,
    pub n_samples: usize,
    pub received_snr_db: f64,
    pub prior: PriorModel,
    pub n_mc: usize,
    pub fd_step: f64,
    pub fisher_rel_tol: f64,
    pub cross_sigmas: f64,
    pub pointwise_intervals: usize,
    pub grid_points: usize,
    pub random_matrices: usize,
    pub covariance_scenes: usize,
    pub covariance_draws: usize,
    pub identity_scenes: usize,
    /// Test hook: scales `Ã₁` before the analytic Fisher value is computed.
    pub corrupt_a1_scale: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            n_tx: 2,
            n_rx: 2,
            n_samples: 2,
            received_snr_db: 0.0,
            prior: PriorModel {
                components: vec![MixtureComponent {
                    weight: 1.0,
                    mean: 1.2,
                    variance: 1e-4,
                }],
                alpha_var: 1e-12,
            },
            n_mc: 200_000,
            fd_step: 1e-5,
            fisher_rel_tol: 0.05,
            cross_sigmas: 3.0,
            pointwise_intervals: 2000,
            grid_points: 4096,
            random_matrices: 100,
            covariance_scenes: 20,
            covariance_draws: 1000,
            identity_scenes: 50,
            corrupt_a1_scale: 1.0,
        }
    }
}

fn default_nodes() -> usize {
    64
}

fn default_schemes() -> Vec<SchemeId> {
    SchemeId::ALL.to_vec()
}

fn default_sweep() -> Vec<f64> {
    vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0]
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scene: SceneSection,
    pub prior: PriorModel,
    #[serde(default = "default_nodes")]
    pub quadrature_nodes: usize,
    #[serde(default)]
    pub ao: AoSettings,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<SchemeId>,
    #[serde(default = "default_sweep")]
    pub snr_sweep_db: Vec<f64>,
    #[serde(default)]
    pub beampattern: BeampatternSection,
    #[serde(default)]
    pub benchmarks: BenchmarkOptions,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub verify: VerifySection,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        match (self.scene.noise_power_dbm, self.scene.received_snr_db) {
            (Some(_), Some(_)) => {
                return Err(Error::invalid(
                    "scene.noise_power_dbm",
                    "give either noise_power_dbm or received_snr_db, not both",
                ))
            }
            (None, None) => {
                return Err(Error::invalid(
                    "scene.received_snr_db",
                    "one of noise_power_dbm or received_snr_db is required",
                ))
            }
            (_, Some(s)) if !s.is_finite() => return Err(Error::invalid("scene.received_snr_db", "must be finite")),
            (Some(n), _) if !n.is_finite() => return Err(Error::invalid("scene.noise_power_dbm", "must be finite")),
            _ => {}
        }
        if !self.scene.power_dbm.is_finite() {
            return Err(Error::invalid("scene.power_dbm", "must be finite"));
        }
        self.prior.validate()?;
        self.scene_config()?.validate()?;
        if self.quadrature_nodes < 2 {
            return Err(Error::invalid("quadrature_nodes", "must be at least 2"));
        }
        self.ao.validate()?;
        if self.schemes.is_empty() {
            return Err(Error::invalid("schemes", "at least one scheme required"));
        }
        if self.snr_sweep_db.is_empty() || self.snr_sweep_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("snr_sweep_db", "must be a non-empty list of finite values"));
        }
        let bp = &self.beampattern;
        if !(bp.theta_min.is_finite() && bp.theta_max.is_finite() && bp.theta_max > bp.theta_min) {
            return Err(Error::invalid("beampattern.theta_max", "must exceed theta_min"));
        }
        if bp.n_points < 2 {
            return Err(Error::invalid("beampattern.n_points", "must be at least 2"));
        }
        if self.benchmarks.random_phase_draws == 0 {
            return Err(Error::invalid("benchmarks.random_phase_draws", "must be at least 1"));
        }
        self.validate_verify()
    }

    fn validate_verify(&self) -> Result<()> {
        let v = &self.verify;
        v.prior.validate().map_err(|e| match e {
            Error::InvalidInput { field, reason } => Error::invalid(format!("verify.{field}"), reason),
            other => other,
        })?;
        let counts = [
            ("verify.n_tx", v.n_tx),
            ("verify.n_rx", v.n_rx),
            ("verify.n_samples", v.n_samples),
            ("verify.n_mc", v.n_mc),
            ("verify.pointwise_intervals", v.pointwise_intervals.saturating_sub(1)),
            ("verify.grid_points", v.grid_points.saturating_sub(1)),
            ("verify.random_matrices", v.random_matrices),
            ("verify.covariance_scenes", v.covariance_scenes),
            ("verify.covariance_draws", v.covariance_draws),
            ("verify.identity_scenes", v.identity_scenes),
        ];
        for (field, n) in counts {
            if n == 0 {
                return Err(Error::invalid(field, "too small"));
            }
        }
        let positive = [
            ("verify.fd_step", v.fd_step),
            ("verify.fisher_rel_tol", v.fisher_rel_tol),
            ("verify.cross_sigmas", v.cross_sigmas),
            ("verify.corrupt_a1_scale", v.corrupt_a1_scale),
        ];
        for (field, x) in positive {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::invalid(field, "must be finite and positive"));
            }
        }
        if !v.received_snr_db.is_finite() {
            return Err(Error::invalid("verify.received_snr_db", "must be finite"));
        }
        Ok(())
    }

    /// Scene in SI units; the noise power follows from the SNR when that is
    /// how the level was given.
    pub fn scene_config(&self) -> Result<SceneConfig> {
        let s = &self.scene;
        let mut cfg = SceneConfig {
            n_tx: s.n_tx,
            n_rx: s.n_rx,
            spacing_ratio: s.spacing_ratio,
            n_samples: s.n_samples,
            power_w: dbm_to_watts(s.power_dbm),
            noise_power_w: s.noise_power_dbm.map(dbm_to_watts).unwrap_or(1.0),
            xpd_inv: s.xpd_inv,
        };
        if let Some(snr) = s.received_snr_db {
            cfg = cfg.with_received_snr(self.prior.gamma(), db_to_linear(snr));
        }
        Ok(cfg)
    }

    pub fn verify_scene_config(&self) -> Result<SceneConfig> {
        let v = &self.verify;
        let base = self.scene_config()?;
        let cfg = SceneConfig {
            n_tx: v.n_tx,
            n_rx: v.n_rx,
            n_samples: v.n_samples,
            ..base
        };
        Ok(cfg.with_received_snr(v.prior.gamma(), db_to_linear(v.received_snr_db)))
    }
}

/// Loaded config with its prior-averaged scene.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub scene_config: SceneConfig,
    pub scene: PrecomputedScene,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let scene_config = config.scene_config()?;
        let rule = make_quadrature(&config.prior, config.quadrature_nodes)?;
        let scene = precompute(&scene_config, &config.prior, &rule)?;
        Ok(Experiment {
            config,
            scene_config,
            scene,
        })
    }

    pub fn output_dir(&self) -> Result<&Path> {
        let dir = self.config.output_dir.as_path();
        fs::create_dir_all(dir)?;
        Ok(dir)
    }
}

/// What a subcommand wrote and whether its checks held.
#[derive(Clone, Debug, Default)]
pub struct CommandReport {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
    pub checks_failed: bool,
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn design_rows(design: &Design) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for (i, x) in design.xi.iter().enumerate() {
        rows.push(vec!["xi".into(), i.to_string(), "0".into(), num(*x), num(0.0)]);
    }
    for (i, p) in design.phi.iter().enumerate() {
        rows.push(vec!["phi".into(), i.to_string(), "0".into(), num(*p), num(0.0)]);
    }
    for r in 0..design.r_x.nrows() {
        for c in 0..design.r_x.ncols() {
            let z = design.r_x[(r, c)];
            rows.push(vec!["r_x".into(), r.to_string(), c.to_string(), num(z.re), num(z.im)]);
        }
    }
    rows
}

/// Reads a `design.csv` written by `optimize`.
pub fn read_design(path: &Path, config: &SceneConfig) -> Result<Design> {
    let mut rdr = csv::Reader::from_path(path)?;
    let n = config.n_tx;
    let mut xi = vec![f64::NAN; n];
    let mut phi = vec![f64::NAN; config.n_rx];
    let mut r = CMatrix::from_element(n, n, Complex64::new(f64::NAN, 0.0));
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 5 {
            return Err(Error::invalid("design", format!("expected 5 columns, got {}", rec.len())));
        }
        let parse_idx = |s: &str| s.parse::<usize>().map_err(|_| Error::invalid("design", format!("bad index `{s}`")));
        let parse_num = |s: &str| s.parse::<f64>().map_err(|_| Error::invalid("design", format!("bad number `{s}`")));
        let (row, col) = (parse_idx(&rec[1])?, parse_idx(&rec[2])?);
        let (re, im) = (parse_num(&rec[3])?, parse_num(&rec[4])?);
        let slot = match &rec[0] {
            "xi" => xi.get_mut(row),
            "phi" => phi.get_mut(row),
            "r_x" if col < n => r.get_mut((row, col)).map(|z| {
                *z = Complex64::new(re, im);
                &mut z.re
            }),
            other => return Err(Error::invalid("design", format!("unknown kind `{other}`"))),
        };
        match slot {
            Some(v) => *v = re,
            None => return Err(Error::mismatch(format!("index within {n}x{n} design"), format!("({row}, {col})"))),
        }
    }
    if xi.iter().chain(&phi).any(|v| v.is_nan()) || r.iter().any(|z| z.re.is_nan()) {
        return Err(Error::invalid("design", "missing entries"));
    }
    let design = Design::new(xi, phi, r);
    design.validate(config)?;
    Ok(design)
}

pub fn cmd_optimize(exp: &Experiment) -> Result<(CommandReport, OptResult)> {
    let res = run_ao(&exp.scene, &exp.scene_config, &exp.config.ao)?;
    let dir = exp.output_dir()?;

    let trace: Vec<Vec<String>> = res
        .trace
        .iter()
        .map(|t| {
            vec![
                t.outer_iter.to_string(),
                t.stage.to_string(),
                num(t.objective),
                num(bcrb_from_objective(&exp.scene, &exp.scene_config, t.objective)),
            ]
        })
        .collect();
    let trace_path = dir.join("trace.csv");
    write_csv(&trace_path, &["outer_iter", "stage", "objective", "bcrb"], &trace)?;

    let design_path = dir.join("design.csv");
    write_csv(&design_path, &["kind", "row", "col", "real", "imag"], &design_rows(&res.design))?;

    let obj = res.objective();
    let report = CommandReport {
        files: vec![trace_path, design_path],
        summary: vec![
            format!(
                "objective {obj:.6e}, bcrb {:.6e}, {} outer iterations ({:?}), best restart {}",
                bcrb_from_objective(&exp.scene, &exp.scene_config, obj),
                res.outer_iters,
                res.termination,
                res.best_restart
            ),
            format!("prior-only bound {:.6e}", 1.0 / exp.scene.prior_fi),
        ],
        checks_failed: false,
    };
    Ok((report, res))
}

/// `(θ, pattern, prior pdf)` over the configured grid.
pub fn beampattern(exp: &Experiment, design: &Design) -> Vec<(f64, f64, f64)> {
    let bp = &exp.config.beampattern;
    let cfg = &exp.scene_config;
    let weight = match bp.kind {
        PatternKind::Transmit => 1.0,
        PatternKind::PolarizationWeighted => {
            let f = tx_vectors(&design.xi);
            f.iter().map(|v| (exp.scene.psi * v).norm_squared()).sum::<f64>() / f.len() as f64
        }
    };
    (0..bp.n_points)
        .map(|k| {
            let t = bp.theta_min + (bp.theta_max - bp.theta_min) * k as f64 / (bp.n_points - 1) as f64;
            let a = steering(cfg, t, Side::Tx);
            let p = a.dotc(&(&design.r_x * &a)).re / cfg.power_w;
            (t, weight * p.max(0.0), exp.config.prior.pdf(t))
        })
        .collect()
}

pub fn cmd_beampattern(exp: &Experiment, design: Option<&Path>) -> Result<CommandReport> {
    let design = match design {
        Some(p) => read_design(p, &exp.scene_config)?,
        None => run_ao(&exp.scene, &exp.scene_config, &exp.config.ao)?.design,
    };
    let pattern = beampattern(exp, &design);
    let path = exp.output_dir()?.join("beampattern.csv");
    let rows: Vec<Vec<String>> = pattern.iter().map(|&(t, p, q)| vec![num(t), num(p), num(q)]).collect();
    write_csv(&path, &["theta", "pattern", "prior_pdf"], &rows)?;
    let (t_max, p_max, _) = pattern.iter().copied().fold((0.0, f64::MIN, 0.0), |b, x| if x.1 > b.1 { x } else { b });
    Ok(CommandReport {
        files: vec![path],
        summary: vec![format!("pattern peak {p_max:.4} at theta {t_max:.4}")],
        checks_failed: false,
    })
}

/// One row of `bcrb_vs_snr.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub scheme: SchemeId,
    pub objective: f64,
    pub bcrb: f64,
}

/// Solves every scheme once and scores it at each SNR. The designs do not
/// depend on the noise power, which only scales the Fisher term.
pub fn snr_sweep(exp: &Experiment) -> Result<Vec<SweepRow>> {
    let c = &exp.config;
    let solved = compare_schemes(&c.schemes, &exp.scene, &exp.scene_config, &c.ao, &c.benchmarks)?;
    let mut rows = Vec::new();
    for &snr in &c.snr_sweep_db {
        let cfg = exp.scene_config.with_received_snr(exp.scene.gamma, db_to_linear(snr));
        for r in &solved {
            let s = r.rescored(&exp.scene, &cfg);
            rows.push(SweepRow {
                snr_db: snr,
                scheme: s.scheme,
                objective: s.objective,
                bcrb: s.bcrb,
            });
        }
    }
    rows.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db).then_with(|| a.scheme.as_str().cmp(b.scheme.as_str())));
    Ok(rows)
}

pub fn cmd_sweep_snr(exp: &Experiment) -> Result<CommandReport> {
    let rows = snr_sweep(exp)?;
    let path = exp.output_dir()?.join("bcrb_vs_snr.csv");
    let out: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![num(r.snr_db), r.scheme.to_string(), num(r.objective), num(r.bcrb)])
        .collect();
    write_csv(&path, &["snr_db", "scheme", "objective", "bcrb"], &out)?;
    Ok(CommandReport {
        files: vec![path],
        summary: vec![format!("{} rows over {} SNR points", rows.len(), exp.config.snr_sweep_db.len())],
        checks_failed: false,
    })
}

pub fn cmd_compare(exp: &Experiment) -> Result<(CommandReport, Vec<SchemeResult>)> {
    let c = &exp.config;
    let results = compare_schemes(&c.schemes, &exp.scene, &exp.scene_config, &c.ao, &c.benchmarks)?;
    let path = exp.output_dir()?.join("compare.csv");
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            vec![
                r.scheme.to_string(),
                num(r.objective),
                num(r.objective_stderr),
                num(r.bcrb),
                num(r.bcrb_stderr),
            ]
        })
        .collect();
    write_csv(&path, &["scheme", "objective", "objective_stderr", "bcrb", "bcrb_stderr"], &rows)?;
    let summary = results
        .iter()
        .map(|r| format!("{:<13} objective {:.6e}  bcrb {:.6e}", r.scheme.as_str(), r.objective, r.bcrb))
        .collect();
    Ok((
        CommandReport {
            files: vec![path],
            summary,
            checks_failed: false,
        },
        results,
    ))
}

/// One row of `verify_report.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn relative(name: &str, measured: f64, expected: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            expected,
            tolerance,
            passed: (measured - expected).abs() <= tolerance * expected.abs(),
        }
    }

    fn at_most(name: &str, measured: f64, expected: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            expected,
            tolerance,
            passed: measured <= expected + tolerance,
        }
    }

    fn at_least(name: &str, measured: f64, expected: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            expected,
            tolerance,
            passed: measured >= expected - tolerance,
        }
    }
}

fn phase_grid_ratio(v: &VerifySection, seed: u64, transmit: bool) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..v.random_matrices {
        let k = random_psd2(&mut rng);
        let value = |p: f64| {
            let u = if transmit { crate::model::pfv_tx(p) } else { crate::model::pfv_rx(p) };
            u.dotc(&(k * u)).re
        };
        let (_, best) = grid_phase_oracle(value, v.grid_points)?;
        let p = if transmit { update_transmit_phase(&k) } else { update_receive_phase(&k) };
        worst = worst.min(value(p) / best);
    }
    Ok(worst)
}

/// Largest `objective(random R_X) / objective(optimal R_X)` over random
/// scenes of the main array size.
fn covariance_ratio(v: &VerifySection, config: &SceneConfig, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..v.covariance_scenes {
        let scene = random_scene(&mut rng, config.n_rx, config.n_tx, config.xpd_inv)?;
        let design = random_design(&mut rng, config)?;
        let opt = optimal_covariance(&scene, config, &design)?;
        let best = objective(&scene, &Design { r_x: opt.r_x, ..design.clone() });
        for _ in 0..v.covariance_draws {
            let r = random_feasible_covariance_with(&mut rng, config.n_tx, config.power_w)?;
            worst = worst.max(objective(&scene, &Design { r_x: r, ..design.clone() }) / best);
        }
    }
    Ok(worst)
}

/// Largest relative disagreement between the trace form and the row-wise
/// and column-wise decompositions of the objective.
pub fn identity_discrepancy(scenes: usize, config: &SceneConfig, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..scenes {
        let scene = random_scene(&mut rng, config.n_rx, config.n_tx, config.xpd_inv)?;
        let design = random_design(&mut rng, config)?;
        let direct = objective(&scene, &design);
        worst = worst.max((objective_by_receive_rows(&scene, &design) - direct).abs() / direct);
        for n in 0..config.n_tx {
            worst = worst.max((objective_by_transmit_column(&scene, &design, n) - direct).abs() / direct);
        }
    }
    Ok(worst)
}

pub fn run_checks(exp: &Experiment) -> Result<Vec<Check>> {
    let c = &exp.config;
    let v = &c.verify;
    let seed = c.ao.rng_seed;
    let mut checks = Vec::new();

    // small instance: Monte Carlo Fisher information against both references
    let small = c.verify_scene_config()?;
    let rule = make_quadrature(&v.prior, c.quadrature_nodes)?;
    let scene = precompute(&small, &v.prior, &rule)?;
    let design = run_ao(&scene, &small, &c.ao)?.design;
    let mut analytic_scene = scene.clone();
    analytic_scene.a1 *= Complex64::from(v.corrupt_a1_scale);
    let analytic = bfim(&analytic_scene, &small, &design).j_theta_theta;
    let pointwise = pointwise_fisher_theta(&small, &v.prior, &design, v.pointwise_intervals)?;
    let mc = mc_fisher_theta(&small, &v.prior, &design, v.n_mc, v.fd_step, seed)?;
    checks.push(Check::relative("fisher_mc_vs_analytic", mc.estimate, analytic, v.fisher_rel_tol));
    checks.push(Check::relative("fisher_mc_vs_pointwise", mc.estimate, pointwise, v.fisher_rel_tol));
    checks.push(Check::at_most("cross_moment_theta_alpha_re", mc.cross_real.abs(), 0.0, v.cross_sigmas * mc.cross_real_std_error));
    checks.push(Check::at_most("cross_moment_theta_alpha_im", mc.cross_imag.abs(), 0.0, v.cross_sigmas * mc.cross_imag_std_error));

    // the estimator also tracks the pointwise expectation under the scene prior
    let wide = precompute(&small, &c.prior, &make_quadrature(&c.prior, c.quadrature_nodes)?)?;
    let wide_design = run_ao(&wide, &small, &c.ao)?.design;
    let wide_mc = mc_fisher_theta(&small, &c.prior, &wide_design, v.n_mc, v.fd_step, seed.wrapping_add(1))?;
    let wide_pointwise = pointwise_fisher_theta(&small, &c.prior, &wide_design, v.pointwise_intervals)?;
    checks.push(Check::relative("fisher_mc_vs_pointwise_scene_prior", wide_mc.estimate, wide_pointwise, v.fisher_rel_tol));

    let silent = mc_fisher_theta(&small, &v.prior, &Design::zero(&small), v.n_mc.min(10_000), v.fd_step, seed)?;
    checks.push(Check::at_most("fisher_mc_zero_covariance", silent.estimate.abs(), 0.0, 3.0 * silent.std_error));

    let prior_only = crate::bcrb::bcrb_theta(&scene, &small, &Design::zero(&small));
    checks.push(Check::relative("bcrb_zero_covariance_vs_prior_only", prior_only, 1.0 / scene.prior_fi, 1e-15));

    checks.push(Check::at_least("receive_phase_vs_grid", phase_grid_ratio(v, seed, false)?, 1.0, 1e-9));
    checks.push(Check::at_least("transmit_phase_vs_grid", phase_grid_ratio(v, seed.wrapping_add(1), true)?, 1.0, 1e-9));
    checks.push(Check::at_most("covariance_vs_random_feasible", covariance_ratio(v, &exp.scene_config, seed)?, 1.0, 1e-12));
    checks.push(Check::at_most(
        "objective_identity",
        identity_discrepancy(v.identity_scenes, &exp.scene_config, seed)?,
        0.0,
        1e-10,
    ));

    let fine = precompute(&exp.scene_config, &c.prior, &make_quadrature(&c.prior, 4 * c.quadrature_nodes)?)?;
    let rel = |a: &CMatrix, b: &CMatrix| (a - b).norm() / b.norm();
    let quad = rel(&exp.scene.a1, &fine.a1)
        .max(rel(&exp.scene.a2, &fine.a2))
        .max((exp.scene.prior_fi - fine.prior_fi).abs() / fine.prior_fi);
    checks.push(Check::at_most("quadrature_refinement", quad, 0.0, 1e-8));

    Ok(checks)
}

pub fn cmd_verify(exp: &Experiment) -> Result<(CommandReport, Vec<Check>)> {
    let checks = run_checks(exp)?;
    let path = exp.output_dir()?.join("verify_report.csv");
    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|k| vec![k.name.clone(), num(k.measured), num(k.expected), num(k.tolerance), k.passed.to_string()])
        .collect();
    write_csv(&path, &["check", "measured", "expected", "tolerance", "passed"], &rows)?;
    let summary = checks
        .iter()
        .map(|k| {
            format!(
                "{} {:<36} measured {:.6e} expected {:.6e} tolerance {:.3e}",
                if k.passed { "PASS" } else { "FAIL" },
                k.name,
                k.measured,
                k.expected,
                k.tolerance
            )
        })
        .collect();
    let failed = checks.iter().any(|k| !k.passed);
    Ok((
        CommandReport {
            files: vec![path],
            summary,
            checks_failed: failed,
        },
        checks,
    ))
}

#[derive(Debug, Parser)]
#[command(name = "pra-bcrb", version, about = "BCRB-driven transceiver design for polarization-reconfigurable MIMO radar")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON experiment config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `ao.rng_seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `output_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides `ao.n_restarts`.
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the alternating optimization; writes trace.csv and design.csv.
    Optimize,
    /// Radiated power pattern of an optimized or given design.
    Beampattern {
        /// design.csv from a previous `optimize` run.
        #[arg(long)]
        design: Option<PathBuf>,
    },
    /// BCRB of every scheme over the SNR sweep.
    SweepSnr,
    /// All schemes at the configured noise level.
    Compare,
    /// Oracle cross-checks on a small instance.
    Verify,
}

fn load(cli: &Cli) -> Result<Experiment> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::invalid("--config", "a config file is required"))?;
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(s) = cli.seed {
        cfg.ao.rng_seed = s;
    }
    if let Some(r) = cli.restarts {
        cfg.ao.n_restarts = r;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    Experiment::new(cfg)
}

pub fn execute(cli: &Cli) -> Result<CommandReport> {
    let exp = load(cli)?;
    match &cli.command {
        Command::Optimize => cmd_optimize(&exp).map(|r| r.0),
        Command::Beampattern { design } => cmd_beampattern(&exp, design.as_deref()),
        Command::SweepSnr => cmd_sweep_snr(&exp),
        Command::Compare => cmd_compare(&exp).map(|r| r.0),
        Command::Verify => cmd_verify(&exp).map(|r| r.0),
    }
}

fn is_input_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidInput { .. } | Error::DimensionMismatch { .. } | Error::Config(_) | Error::Io(_) | Error::Csv(_)
    )
}

/// Parses arguments, runs the subcommand and returns the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_BAD_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(report) => {
            for line in &report.summary {
                println!("{line}");
            }
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            if report.checks_failed {
                eprintln!("error: one or more checks failed");
                EXIT_CHECK_FAILED
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            if is_input_error(&e) {
                EXIT_BAD_INPUT
            } else {
                EXIT_CHECK_FAILED
            }
        }
    }
}
