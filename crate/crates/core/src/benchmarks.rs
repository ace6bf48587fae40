//! Reference transceiver designs evaluated on the same precomputed scene as
//! the proposed phase-shifter PRA design.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bcrb::{bcrb_from_objective, polarized_matrix, tx_vectors, rx_vectors};
use crate::model::{pfv_rx, pfv_tx, wrap_phase, PrecomputedScene, SceneConfig};
use crate::numerics::{quadratic_trace, CMatrix, Mat2, Vec2};
use crate::optimizer::{
    optimal_covariance_for, random_phases, receive_matrix, relative_change, restart_rng, run_ao, transmit_form,
    AoSettings, Stage, Tracker,
};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeId {
    ProposedPra,
    NoPra,
    Spra,
    Cpa,
    Lpa,
    Paa,
    RandomPhase,
}

impl SchemeId {
    pub const ALL: [SchemeId; 7] = [
        SchemeId::ProposedPra,
        SchemeId::NoPra,
        SchemeId::Spra,
        SchemeId::Cpa,
        SchemeId::Lpa,
        SchemeId::Paa,
        SchemeId::RandomPhase,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeId::ProposedPra => "proposed_pra",
            SchemeId::NoPra => "no_pra",
            SchemeId::Spra => "spra",
            SchemeId::Cpa => "cpa",
            SchemeId::Lpa => "lpa",
            SchemeId::Paa => "paa",
            SchemeId::RandomPhase => "random_phase",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL
            .iter()
            .copied()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::invalid("schemes", format!("unknown scheme `{s}`")))
    }
}

/// Polarization gain applied to the scalar channel of the no-PRA baseline.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoPraGain {
    /// Plain `Ã₁`, no depolarization loss.
    #[default]
    Unit,
    /// `Ã₁/√(1+χ)`.
    Depolarized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkOptions {
    pub random_phase_draws: usize,
    pub no_pra_gain: NoPraGain,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        BenchmarkOptions {
            random_phase_draws: 100,
            no_pra_gain: NoPraGain::Unit,
        }
    }
}

/// Objective and BCRB of one scheme. Schemes with random draws keep the
/// per-draw objectives so the BCRB can be re-scored at another noise power.
#[derive(Clone, Debug, PartialEq)]
pub struct SchemeResult {
    pub scheme: SchemeId,
    pub objective: f64,
    pub objective_stderr: f64,
    pub bcrb: f64,
    pub bcrb_stderr: f64,
    pub samples: Vec<f64>,
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl SchemeResult {
    pub fn from_objectives(scheme: SchemeId, scene: &PrecomputedScene, config: &SceneConfig, samples: Vec<f64>) -> Self {
        let (objective, objective_stderr) = mean_and_stderr(&samples);
        let bcrbs: Vec<f64> = samples.iter().map(|&o| bcrb_from_objective(scene, config, o)).collect();
        let (bcrb, bcrb_stderr) = mean_and_stderr(&bcrbs);
        SchemeResult {
            scheme,
            objective,
            objective_stderr,
            bcrb,
            bcrb_stderr,
            samples,
        }
    }

    /// Same design(s), BCRB re-evaluated under `config` (e.g. another noise power).
    pub fn rescored(&self, scene: &PrecomputedScene, config: &SceneConfig) -> Self {
        SchemeResult::from_objectives(self.scheme, scene, config, self.samples.clone())
    }
}

/// Benchmark 1: conventional MIMO radar, scalar channel `Ã₁`.
pub fn solve_no_pra(scene: &PrecomputedScene, config: &SceneConfig, gain: NoPraGain) -> Result<SchemeResult> {
    let scale = match gain {
        NoPraGain::Unit => 1.0,
        NoPraGain::Depolarized => 1.0 / (1.0 + config.xpd_inv).sqrt(),
    };
    let q = &scene.a1 * Complex64::from(scale);
    let sol = optimal_covariance_for(&q, config.power_w)?;
    let obj = quadratic_trace(&q, &sol.r_x);
    Ok(SchemeResult::from_objectives(SchemeId::NoPra, scene, config, vec![obj]))
}

/// Left-handed circular polarization at both ends.
pub fn cpa_vectors() -> (Vec2, Vec2) {
    let h = FRAC_1_SQRT_2;
    (
        Vec2::new(Complex64::new(h, 0.0), Complex64::new(0.0, h)),
        Vec2::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)),
    )
}

/// Vertical polarization at both ends.
pub fn lpa_vectors() -> (Vec2, Vec2) {
    let v = Vec2::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    (v, v)
}

/// Every antenna uses the same fixed polarization; only `R_X` is optimized.
pub fn solve_fixed_polarization(
    scene: &PrecomputedScene,
    config: &SceneConfig,
    scheme: SchemeId,
    f_fixed: Vec2,
    e_fixed: Vec2,
) -> Result<SchemeResult> {
    let tx = vec![f_fixed; scene.n_tx()];
    let rx = vec![e_fixed; scene.n_rx()];
    let q = polarized_matrix(&scene.a1, &scene.psi, &tx, &rx);
    let sol = optimal_covariance_for(&q, config.power_w)?;
    let obj = quadratic_trace(&q, &sol.r_x);
    Ok(SchemeResult::from_objectives(scheme, scene, config, vec![obj]))
}

/// Outcome of an alternating run over per-antenna polarization vectors.
#[derive(Clone, Debug)]
pub struct PolarizedRun {
    pub tx: Vec<Vec2>,
    pub rx: Vec<Vec2>,
    pub r_x: CMatrix,
    pub objective: f64,
    pub outer_iters: usize,
    pub monotone_trace: Vec<f64>,
}

/// Alternating optimization where each per-antenna update picks a new
/// polarization vector from the 2×2 receive matrix `K_m` or the transmit
/// quadratic-plus-linear form.
fn alternate<RxU, TxU>(
    scene: &PrecomputedScene,
    config: &SceneConfig,
    settings: &AoSettings,
    mut tx: Vec<Vec2>,
    mut rx: Vec<Vec2>,
    rx_update: RxU,
    tx_update: TxU,
) -> Result<PolarizedRun>
where
    RxU: Fn(&Mat2) -> Vec2,
    TxU: Fn(&crate::optimizer::TransmitForm) -> Vec2,
{
    let n = scene.n_tx();
    let eval = |tx: &[Vec2], rx: &[Vec2], r: &CMatrix| quadratic_trace(&polarized_matrix(&scene.a1, &scene.psi, tx, rx), r);

    let mut r_x = CMatrix::identity(n, n) * Complex64::from(config.power_w / n as f64);
    let mut tracker = Tracker::new(eval(&tx, &rx, &r_x));
    let mut outer_iters = settings.max_outer_iter;

    for it in 1..=settings.max_outer_iter {
        let start = tracker.current;

        let sol = optimal_covariance_for(&polarized_matrix(&scene.a1, &scene.psi, &tx, &rx), config.power_w)?;
        if tracker.offer(it, Stage::Covariance, eval(&tx, &rx, &sol.r_x)) {
            r_x = sol.r_x;
        }

        for m in 0..rx.len() {
            let k = receive_matrix(&scene.a1, &scene.psi, &tx, &r_x, m);
            let mut cand = rx.clone();
            cand[m] = rx_update(&k);
            if tracker.offer(it, Stage::ReceivePhase(m), eval(&tx, &cand, &r_x)) {
                rx = cand;
            }
        }

        for j in 0..n {
            let form = transmit_form(&scene.a1, &scene.psi, &tx, &rx, &r_x, j);
            let mut cand = tx.clone();
            cand[j] = tx_update(&form);
            if tracker.offer(it, Stage::TransmitPhase(j), eval(&cand, &rx, &r_x)) {
                tx = cand;
            }
        }

        if relative_change(tracker.current, start) < settings.rel_tol {
            outer_iters = it;
            break;
        }
    }

    Ok(PolarizedRun {
        tx,
        rx,
        r_x,
        objective: tracker.current,
        outer_iters,
        monotone_trace: tracker.trace.iter().map(|t| t.objective).collect(),
    })
}

fn best_of(runs: Vec<PolarizedRun>) -> PolarizedRun {
    runs.into_iter()
        .reduce(|best, r| if r.objective > best.objective { r } else { best })
        .expect("at least one restart")
}

const SPRA_STATES: [f64; 2] = [FRAC_PI_2, 3.0 * FRAC_PI_2];

/// Benchmark 2 run: every antenna switches between the two circular
/// polarizations, i.e. phase `π/2` or `3π/2`. Besides the random restarts
/// one run starts from the all-`π/2` state, so the result never falls below
/// the fixed circular design.
pub fn spra_run(scene: &PrecomputedScene, config: &SceneConfig, settings: &AoSettings) -> Result<PolarizedRun> {
    settings.validate()?;
    // one extra start with every antenna on the first state (the CPA design)
    let runs = (0..=settings.n_restarts)
        .into_par_iter()
        .map(|k| {
            let (tx, rx) = if k == settings.n_restarts {
                (vec![pfv_tx(SPRA_STATES[0]); scene.n_tx()], vec![pfv_rx(SPRA_STATES[0]); scene.n_rx()])
            } else {
                let mut rng = restart_rng(settings.rng_seed, k);
                let tx = random_phases(&mut rng, scene.n_tx())
                    .into_iter()
                    .map(|p| pfv_tx(SPRA_STATES[(p >= PI) as usize]))
                    .collect();
                let rx = random_phases(&mut rng, scene.n_rx())
                    .into_iter()
                    .map(|p| pfv_rx(SPRA_STATES[(p >= PI) as usize]))
                    .collect();
                (tx, rx)
            };
            alternate(
                scene,
                config,
                settings,
                tx,
                rx,
                |k| {
                    let (a, b) = (pfv_rx(SPRA_STATES[0]), pfv_rx(SPRA_STATES[1]));
                    if b.dotc(&(k * b)).re > a.dotc(&(k * a)).re {
                        b
                    } else {
                        a
                    }
                },
                |form| {
                    let (a, b) = (pfv_tx(SPRA_STATES[0]), pfv_tx(SPRA_STATES[1]));
                    if form.value(&b) > form.value(&a) {
                        b
                    } else {
                        a
                    }
                },
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(best_of(runs))
}

pub fn solve_spra(scene: &PrecomputedScene, config: &SceneConfig, settings: &AoSettings) -> Result<SchemeResult> {
    let run = spra_run(scene, config, settings)?;
    Ok(SchemeResult::from_objectives(SchemeId::Spra, scene, config, vec![run.objective]))
}

/// Real unit polarization vector `[cos ζ, sin ζ]ᵀ`.
pub fn paa_vector(angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    Vec2::new(Complex64::new(c, 0.0), Complex64::new(s, 0.0))
}

/// Angle in `[0, π)` of the dominant eigenvector of `Re(K)`, maximizing
/// `uᵀ Re(K) u` over real unit vectors.
pub fn paa_receive_angle(k: &Mat2) -> f64 {
    let (a, b, c) = (k[(0, 0)].re, 0.5 * (k[(0, 1)].re + k[(1, 0)].re), k[(1, 1)].re);
    let angle = 0.5 * (2.0 * b).atan2(a - c);
    let angle = if angle < 0.0 { angle + PI } else { angle };
    if angle >= PI {
        0.0
    } else {
        angle
    }
}

/// Maximizes `uᵀSu + 2cᵀu` over real unit vectors `u = [cos ζ, sin ζ]ᵀ`
/// (`S` symmetric) and returns `ζ` in `[0, 2π)`.
///
/// Stationary points satisfy `(μI − S)u = c`; the global maximum is the one
/// with `μ ≥ λ_max(S)`, found by bisection on the secular equation
/// `‖(μI − S)⁻¹c‖ = 1`.
pub fn maximize_on_circle(s: [[f64; 2]; 2], c: [f64; 2]) -> f64 {
    let (a, b, d) = (s[0][0], 0.5 * (s[0][1] + s[1][0]), s[1][1]);
    let mid = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let (l1, l2) = (mid + rad, mid - rad);
    let t1 = 0.5 * (2.0 * b).atan2(a - d);
    let v1 = [t1.cos(), t1.sin()];
    let v2 = [-t1.sin(), t1.cos()];
    let c1 = c[0] * v1[0] + c[1] * v1[1];
    let c2 = c[0] * v2[0] + c[1] * v2[1];
    let cnorm = (c1 * c1 + c2 * c2).sqrt();
    let scale = l1.abs().max(l2.abs()).max(cnorm).max(f64::MIN_POSITIVE);

    let (u1, u2) = if cnorm <= 1e-15 * scale {
        (1.0, 0.0)
    } else if c1.abs() <= 1e-13 * cnorm && l1 - l2 > 0.0 && (c2 / (l1 - l2)).abs() < 1.0 {
        // hard case: μ = λ_max, free component along v1
        let y2 = c2 / (l1 - l2);
        ((1.0 - y2 * y2).sqrt(), y2)
    } else {
        let g = |mu: f64| (c1 / (mu - l1)).powi(2) + (c2 / (mu - l2)).powi(2) - 1.0;
        let mut lo = l1;
        let mut hi = l1 + cnorm;
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if m <= lo || m >= hi {
                break;
            }
            if g(m) > 0.0 {
                lo = m;
            } else {
                hi = m;
            }
        }
        let mu = hi;
        let y1 = if mu > l1 { c1 / (mu - l1) } else { c1.signum() };
        let y2 = if mu > l2 { c2 / (mu - l2) } else { 0.0 };
        let nrm = (y1 * y1 + y2 * y2).sqrt();
        (y1 / nrm, y2 / nrm)
    };
    let u = [u1 * v1[0] + u2 * v2[0], u1 * v1[1] + u2 * v2[1]];
    wrap_phase(u[1].atan2(u[0]))
}

fn paa_transmit_angle(form: &crate::optimizer::TransmitForm) -> f64 {
    let q = &form.quad;
    let s = [[q[(0, 0)].re, q[(0, 1)].re], [q[(1, 0)].re, q[(1, 1)].re]];
    maximize_on_circle(s, [form.lin[0].re, form.lin[1].re])
}

/// Benchmark 5 run: polarization-agile antennas with real unit vectors at
/// both ends.
pub fn paa_run(scene: &PrecomputedScene, config: &SceneConfig, settings: &AoSettings) -> Result<PolarizedRun> {
    settings.validate()?;
    let runs = (0..settings.n_restarts)
        .into_par_iter()
        .map(|k| {
            let mut rng = restart_rng(settings.rng_seed, k);
            let tx = random_phases(&mut rng, scene.n_tx()).into_iter().map(paa_vector).collect();
            let rx = random_phases(&mut rng, scene.n_rx()).into_iter().map(paa_vector).collect();
            alternate(
                scene,
                config,
                settings,
                tx,
                rx,
                |k| paa_vector(paa_receive_angle(k)),
                |form| paa_vector(paa_transmit_angle(form)),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(best_of(runs))
}

pub fn solve_paa(scene: &PrecomputedScene, config: &SceneConfig, settings: &AoSettings) -> Result<SchemeResult> {
    let run = paa_run(scene, config, settings)?;
    Ok(SchemeResult::from_objectives(SchemeId::Paa, scene, config, vec![run.objective]))
}

/// Benchmark 6: uniformly random phases, covariance optimized per draw. Draw
/// `d` uses the same random stream as restart `d` of the alternating
/// optimizer.
pub fn solve_random_phase(scene: &PrecomputedScene, config: &SceneConfig, n_draws: usize, seed: u64) -> Result<SchemeResult> {
    if n_draws == 0 {
        return Err(Error::invalid("random_phase_draws", "must be at least 1"));
    }
    let samples = (0..n_draws)
        .into_par_iter()
        .map(|d| {
            let mut rng = restart_rng(seed, d);
            let xi = random_phases(&mut rng, scene.n_tx());
            let phi = random_phases(&mut rng, scene.n_rx());
            let q = polarized_matrix(&scene.a1, &scene.psi, &tx_vectors(&xi), &rx_vectors(&phi));
            let sol = optimal_covariance_for(&q, config.power_w)?;
            Ok(quadratic_trace(&q, &sol.r_x))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SchemeResult::from_objectives(SchemeId::RandomPhase, scene, config, samples))
}

pub fn solve_proposed(scene: &PrecomputedScene, config: &SceneConfig, settings: &AoSettings) -> Result<SchemeResult> {
    let res = run_ao(scene, config, settings)?;
    Ok(SchemeResult::from_objectives(SchemeId::ProposedPra, scene, config, vec![res.objective()]))
}

pub fn solve_scheme(
    scheme: SchemeId,
    scene: &PrecomputedScene,
    config: &SceneConfig,
    settings: &AoSettings,
    options: &BenchmarkOptions,
) -> Result<SchemeResult> {
    match scheme {
        SchemeId::ProposedPra => solve_proposed(scene, config, settings),
        SchemeId::NoPra => solve_no_pra(scene, config, options.no_pra_gain),
        SchemeId::Spra => solve_spra(scene, config, settings),
        SchemeId::Cpa => {
            let (f, e) = cpa_vectors();
            solve_fixed_polarization(scene, config, SchemeId::Cpa, f, e)
        }
        SchemeId::Lpa => {
            let (f, e) = lpa_vectors();
            solve_fixed_polarization(scene, config, SchemeId::Lpa, f, e)
        }
        SchemeId::Paa => solve_paa(scene, config, settings),
        SchemeId::RandomPhase => solve_random_phase(scene, config, options.random_phase_draws, settings.rng_seed),
    }
}

/// Solves every listed scheme on one shared scene; output order follows
/// [`SchemeId`] ordering with duplicates removed.
pub fn compare_schemes(
    schemes: &[SchemeId],
    scene: &PrecomputedScene,
    config: &SceneConfig,
    settings: &AoSettings,
    options: &BenchmarkOptions,
) -> Result<Vec<SchemeResult>> {
    let mut ids = schemes.to_vec();
    ids.sort();
    ids.dedup();
    ids.par_iter()
        .map(|&id| solve_scheme(id, scene, config, settings, options))
        .collect()
}
