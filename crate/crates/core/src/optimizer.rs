//! Alternating optimization of the transmit covariance `R_X`, the receive
//! phases `φ_m` and the transmit phases `ξ_n`.
//!
//! Each block has a closed-form maximizer with the other blocks held fixed:
//!
//! * `R_X = P·q̃q̃ᴴ`, with `q̃` the dominant eigenvector of `QᴴQ`;
//! * `φ_m = ∠[K_m]₂₁`, where row `m` of `Q` contributes `e(φ_m)ᴴ K_m e(φ_m)`;
//! * `ξ_n = ∠[V_n]₂₁`, where the objective equals `f(ξ_n)ᴴ V_n f(ξ_n)` plus
//!   terms free of `ξ_n`.
//!
//! Column `n` of `Q` enters the objective both quadratically and through its
//! cross terms with the other columns (weighted by `[R_X]_{in}`), so the
//! objective seen by `ξ_n` is `fᴴAf + 2Re(fᴴb) + const`. Since the first entry
//! of `f(ξ)` is the constant `1/√2`, the linear part folds into a Hermitian
//! quadratic form, `V_n = A + b wᵀ + w bᴴ` with `w = [√2, 0]ᵀ`.

use std::f64::consts::{SQRT_2, TAU};
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bcrb::{objective, polarized_matrix, q_matrix, tx_vectors};
use crate::model::{wrap_phase, Design, PrecomputedScene, SceneConfig};
use crate::numerics::{quadratic_trace, top_hermitian_eigenpair, CMatrix, Mat2, Vec2, DEFAULT_EIG_MAX_ITER, DEFAULT_EIG_TOL};
use crate::{Error, Result};

/// Off-diagonal magnitude below which a phase update keeps the tie-break 0.
pub const PHASE_TIE_EPS: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AoSettings {
    pub rel_tol: f64,
    pub max_outer_iter: usize,
    pub n_restarts: usize,
    pub rng_seed: u64,
}

impl Default for AoSettings {
    fn default() -> Self {
        AoSettings {
            rel_tol: 1e-9,
            max_outer_iter: 200,
            n_restarts: 8,
            rng_seed: 2025,
        }
    }
}

impl AoSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol.is_finite() && self.rel_tol > 0.0) {
            return Err(Error::invalid("ao.rel_tol", "must be positive"));
        }
        if self.max_outer_iter == 0 {
            return Err(Error::invalid("ao.max_outer_iter", "must be at least 1"));
        }
        if self.n_restarts == 0 {
            return Err(Error::invalid("ao.n_restarts", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Init,
    Covariance,
    /// Zero-based receive antenna index.
    ReceivePhase(usize),
    /// Zero-based transmit antenna index.
    TransmitPhase(usize),
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Init => write!(f, "init"),
            Stage::Covariance => write!(f, "covariance"),
            Stage::ReceivePhase(m) => write!(f, "rx_phase_{}", m + 1),
            Stage::TransmitPhase(n) => write!(f, "tx_phase_{}", n + 1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceEntry {
    pub outer_iter: usize,
    pub stage: Stage,
    pub objective: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIters,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::Converged => write!(f, "converged"),
            Termination::MaxIters => write!(f, "max_iters"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct OptResult {
    pub design: Design,
    /// Objective after every sub-update of the winning restart.
    pub trace: Vec<TraceEntry>,
    pub outer_iters: usize,
    pub termination: Termination,
    /// Set when `Q = 0` forced the isotropic covariance fallback.
    pub degenerate: bool,
    pub best_restart: usize,
    /// Final objective of every restart, by restart index.
    pub restart_objectives: Vec<f64>,
}

impl OptResult {
    pub fn objective(&self) -> f64 {
        self.trace.last().map(|t| t.objective).unwrap_or(0.0)
    }
}

#[derive(Clone, Debug)]
pub struct CovarianceSolution {
    pub r_x: CMatrix,
    /// `λ_max(QᴴQ)`.
    pub top_eigenvalue: f64,
    pub degenerate: bool,
}

/// `R_X = P·q̃q̃ᴴ` for a given effective matrix `Q`; falls back to `(P/N)·I`
/// when `Q` vanishes.
pub fn optimal_covariance_for(q: &CMatrix, power: f64) -> Result<CovarianceSolution> {
    let n = q.ncols();
    let gram = q.adjoint() * q;
    if gram.norm() == 0.0 {
        return Ok(CovarianceSolution {
            r_x: CMatrix::identity(n, n) * Complex64::from(power / n as f64),
            top_eigenvalue: 0.0,
            degenerate: true,
        });
    }
    let top = top_hermitian_eigenpair(&gram, DEFAULT_EIG_TOL, DEFAULT_EIG_MAX_ITER)?;
    if top.value <= 0.0 {
        return Ok(CovarianceSolution {
            r_x: CMatrix::identity(n, n) * Complex64::from(power / n as f64),
            top_eigenvalue: 0.0,
            degenerate: true,
        });
    }
    let mut r = &top.vector * top.vector.adjoint();
    let tr = r.trace().re;
    r *= Complex64::from(power / tr);
    Ok(CovarianceSolution {
        r_x: r,
        top_eigenvalue: top.value,
        degenerate: false,
    })
}

pub fn optimal_covariance(scene: &PrecomputedScene, config: &SceneConfig, design: &Design) -> Result<CovarianceSolution> {
    optimal_covariance_for(&q_matrix(scene, design), config.power_w)
}

/// `K_m = Ψ G_m R_X G_mᴴ Ψᴴ` with `G_m = [A_m1 f_1, …, A_mN f_N]` (2×N), for
/// arbitrary transmit polarization vectors.
pub fn receive_matrix(a1: &CMatrix, psi: &Mat2, tx: &[Vec2], r_x: &CMatrix, m: usize) -> Mat2 {
    let n = tx.len();
    let g = nalgebra::Matrix2xX::<Complex64>::from_fn(n, |p, i| tx[i][p] * a1[(m, i)]);
    let grg = &g * r_x * g.adjoint();
    let grg = Mat2::new(grg[(0, 0)], grg[(0, 1)], grg[(1, 0)], grg[(1, 1)]);
    psi * grg * psi.adjoint()
}

pub fn k_matrix(scene: &PrecomputedScene, design: &Design, m: usize) -> Mat2 {
    receive_matrix(&scene.a1, &scene.psi, &tx_vectors(&design.xi), &design.r_x, m)
}

/// Dependence of the objective on transmit vector `f_n`:
/// `fᴴ quad f + 2Re(fᴴ lin) + const`.
#[derive(Clone, Copy, Debug)]
pub struct TransmitForm {
    pub quad: Mat2,
    pub lin: Vec2,
}

impl TransmitForm {
    pub fn value(&self, f: &Vec2) -> f64 {
        f.dotc(&(self.quad * f)).re + 2.0 * f.dotc(&self.lin).re
    }

    /// Hermitian matrix `V` with `fᴴVf = value(f)` for every `f` whose first
    /// entry is `1/√2`.
    pub fn homogenized(&self) -> Mat2 {
        let w = Vec2::new(Complex64::new(SQRT_2, 0.0), Complex64::new(0.0, 0.0));
        self.quad + self.lin * w.transpose() + w * self.lin.adjoint()
    }
}

pub fn transmit_form(a1: &CMatrix, psi: &Mat2, tx: &[Vec2], rx: &[Vec2], r_x: &CMatrix, n: usize) -> TransmitForm {
    let m_count = rx.len();
    // c_m = Ψᴴ e_m conj(A_mn), so that q_mn = c_mᴴ f_n
    let c = nalgebra::Matrix2xX::<Complex64>::from_fn(m_count, |p, m| (psi.adjoint() * rx[m])[p] * a1[(m, n)].conj());
    let q = polarized_matrix(a1, psi, tx, rx);
    let r_nn = r_x[(n, n)];
    // s = Σ_{i≠n} q_i R_in
    let s = &q * r_x.column(n) - q.column(n) * r_nn;
    let cc = &c * c.adjoint();
    let quad = Mat2::new(cc[(0, 0)], cc[(0, 1)], cc[(1, 0)], cc[(1, 1)]) * r_nn;
    let cs = &c * s;
    TransmitForm {
        quad,
        lin: Vec2::new(cs[0], cs[1]),
    }
}

/// `V_n` for the phase-shifter PRA transmit vector.
pub fn v_matrix(scene: &PrecomputedScene, design: &Design, n: usize) -> Mat2 {
    transmit_form(
        &scene.a1,
        &scene.psi,
        &tx_vectors(&design.xi),
        &crate::bcrb::rx_vectors(&design.phi),
        &design.r_x,
        n,
    )
    .homogenized()
}

fn phase_of_off_diagonal(m: &Mat2) -> f64 {
    let off = m[(1, 0)];
    if off.norm() < PHASE_TIE_EPS {
        0.0
    } else {
        wrap_phase(off.arg())
    }
}

/// Maximizer of `e(φ)ᴴ K e(φ)`: `∠[K]₂₁`.
pub fn update_receive_phase(k: &Mat2) -> f64 {
    phase_of_off_diagonal(k)
}

/// Maximizer of `f(ξ)ᴴ V f(ξ)`: `∠[V]₂₁`.
pub fn update_transmit_phase(v: &Mat2) -> f64 {
    phase_of_off_diagonal(v)
}

/// Per-restart generator: a ChaCha8 stream selected by the restart index.
pub fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

pub fn random_phases<R: Rng>(rng: &mut R, count: usize) -> Vec<f64> {
    (0..count).map(|_| rng.random_range(0.0..TAU)).collect()
}

/// Random initial design for restart `restart`: uniform phases and the
/// isotropic covariance `(P/N)·I`.
pub fn initial_design(config: &SceneConfig, seed: u64, restart: usize) -> Design {
    let mut rng = restart_rng(seed, restart);
    let xi = random_phases(&mut rng, config.n_tx);
    let phi = random_phases(&mut rng, config.n_rx);
    Design::isotropic(config, xi, phi)
}

/// Monotone bookkeeping shared by the alternating schemes: a candidate is
/// kept only when its freshly evaluated objective does not fall below the
/// current one, so floating-point noise cannot make the trace decrease.
pub(crate) struct Tracker {
    pub trace: Vec<TraceEntry>,
    pub current: f64,
}

impl Tracker {
    pub fn new(initial: f64) -> Self {
        Tracker {
            trace: vec![TraceEntry {
                outer_iter: 0,
                stage: Stage::Init,
                objective: initial,
            }],
            current: initial,
        }
    }

    /// Returns whether the candidate was accepted.
    pub fn offer(&mut self, outer_iter: usize, stage: Stage, candidate: f64) -> bool {
        let accept = candidate >= self.current;
        if accept {
            self.current = candidate;
        }
        self.trace.push(TraceEntry {
            outer_iter,
            stage,
            objective: self.current,
        });
        accept
    }
}

pub(crate) fn relative_change(new: f64, old: f64) -> f64 {
    let scale = new.abs().max(old.abs());
    if scale == 0.0 {
        0.0
    } else {
        (new - old).abs() / scale
    }
}

/// One alternating-optimization run from a given starting design.
pub fn run_ao_from(scene: &PrecomputedScene, config: &SceneConfig, settings: &AoSettings, init: Design) -> Result<OptResult> {
    settings.validate()?;
    init.validate(config)?;

    let mut design = init;
    let mut tracker = Tracker::new(objective(scene, &design));
    let mut degenerate = false;
    let mut termination = Termination::MaxIters;
    let mut outer_iters = settings.max_outer_iter;

    for it in 1..=settings.max_outer_iter {
        let start = tracker.current;

        let sol = optimal_covariance(scene, config, &design)?;
        degenerate |= sol.degenerate;
        let candidate = Design { r_x: sol.r_x, ..design.clone() };
        let value = objective(scene, &candidate);
        if tracker.offer(it, Stage::Covariance, value) {
            design = candidate;
        }

        for m in 0..config.n_rx {
            let k = k_matrix(scene, &design, m);
            let mut candidate = design.clone();
            candidate.phi[m] = update_receive_phase(&k);
            let value = objective(scene, &candidate);
            if tracker.offer(it, Stage::ReceivePhase(m), value) {
                design = candidate;
            }
        }

        for n in 0..config.n_tx {
            let v = v_matrix(scene, &design, n);
            let mut candidate = design.clone();
            candidate.xi[n] = update_transmit_phase(&v);
            let value = objective(scene, &candidate);
            if tracker.offer(it, Stage::TransmitPhase(n), value) {
                design = candidate;
            }
        }

        if relative_change(tracker.current, start) < settings.rel_tol {
            termination = Termination::Converged;
            outer_iters = it;
            break;
        }
    }

    let final_objective = tracker.current;
    Ok(OptResult {
        design,
        trace: tracker.trace,
        outer_iters,
        termination,
        degenerate,
        best_restart: 0,
        restart_objectives: vec![final_objective],
    })
}

/// Alternating optimization with `settings.n_restarts` independent random
/// initializations; returns the best run.
pub fn run_ao(scene: &PrecomputedScene, config: &SceneConfig, settings: &AoSettings) -> Result<OptResult> {
    settings.validate()?;
    config.validate()?;
    let runs: Vec<OptResult> = (0..settings.n_restarts)
        .into_par_iter()
        .map(|k| run_ao_from(scene, config, settings, initial_design(config, settings.rng_seed, k)))
        .collect::<Result<_>>()?;
    Ok(pick_best(runs))
}

pub(crate) fn pick_best(runs: Vec<OptResult>) -> OptResult {
    let restart_objectives: Vec<f64> = runs.iter().map(|r| r.objective()).collect();
    let degenerate = runs.iter().any(|r| r.degenerate);
    // ties go to the lowest restart index
    let best = restart_objectives
        .iter()
        .enumerate()
        .fold(0, |b, (i, &v)| if v > restart_objectives[b] { i } else { b });
    let mut out = runs.into_iter().nth(best).expect("at least one restart");
    out.best_restart = best;
    out.restart_objectives = restart_objectives;
    out.degenerate = degenerate;
    out
}

/// Objective after every sub-update must not decrease; used by tests and the
/// CLI to flag regressions.
pub fn trace_is_monotone(trace: &[TraceEntry], slack: f64) -> bool {
    trace.windows(2).all(|w| w[1].objective >= w[0].objective - slack)
}

/// `Σ_m e(φ_m)ᴴ K_m e(φ_m)`, the receive-side decomposition of the objective.
pub fn objective_by_receive_rows(scene: &PrecomputedScene, design: &Design) -> f64 {
    (0..design.phi.len())
        .map(|m| {
            let e = crate::model::pfv_rx(design.phi[m]);
            e.dotc(&(k_matrix(scene, design, m) * e)).re
        })
        .sum()
}

/// `f(ξ_n)ᴴ V_n f(ξ_n)` plus the objective of `Q` with column `n` removed;
/// equals the full objective for every `n`.
pub fn objective_by_transmit_column(scene: &PrecomputedScene, design: &Design, n: usize) -> f64 {
    let f = crate::model::pfv_tx(design.xi[n]);
    let own = f.dotc(&(v_matrix(scene, design, n) * f)).re;
    let mut q = q_matrix(scene, design);
    q.column_mut(n).fill(Complex64::new(0.0, 0.0));
    own + quadratic_trace(&q, &design.r_x)
}
