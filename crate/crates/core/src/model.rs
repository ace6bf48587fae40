//! Physical and statistical model: ULA steering vectors, per-antenna
//! polarforming vectors, the depolarization matrix, the Gaussian-mixture angle
//! prior, and the prior-averaged matrices every later stage consumes.

use std::f64::consts::{PI, TAU};

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::numerics::{integrate_matrix, CMatrix, CVector, Mat2, QuadratureRule, Vec2};
use crate::{Error, Result};

/// Array geometry, waveform budget and channel parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    /// Number of transmit antennas `N`.
    pub n_tx: usize,
    /// Number of receive antennas `M`.
    pub n_rx: usize,
    /// Element spacing over wavelength, `d/λ`.
    pub spacing_ratio: f64,
    /// Probing samples `L`.
    pub n_samples: usize,
    /// Transmit power budget `P` in watts.
    pub power_w: f64,
    /// Noise power `σ_s²` in watts.
    pub noise_power_w: f64,
    /// Inverse cross-polarization discrimination `χ`.
    pub xpd_inv: f64,
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_tx == 0 {
            return Err(Error::invalid("scene.n_tx", "must be at least 1"));
        }
        if self.n_rx == 0 {
            return Err(Error::invalid("scene.n_rx", "must be at least 1"));
        }
        if !(self.spacing_ratio.is_finite() && self.spacing_ratio > 0.0) {
            return Err(Error::invalid("scene.spacing_ratio", "must be finite and positive"));
        }
        if self.n_samples == 0 {
            return Err(Error::invalid("scene.n_samples", "must be at least 1"));
        }
        if !(self.power_w.is_finite() && self.power_w > 0.0) {
            return Err(Error::invalid("scene.power", "must be finite and positive"));
        }
        if !(self.noise_power_w.is_finite() && self.noise_power_w > 0.0) {
            return Err(Error::invalid("scene.noise_power", "must be finite and positive"));
        }
        if !(self.xpd_inv.is_finite() && self.xpd_inv >= 0.0) {
            return Err(Error::invalid("scene.xpd_inv", "must be finite and non-negative"));
        }
        Ok(())
    }

    /// Received SNR `P·L·γ/σ_s²` (linear).
    pub fn received_snr(&self, gamma: f64) -> f64 {
        self.power_w * self.n_samples as f64 * gamma / self.noise_power_w
    }

    /// Copy of this config with the noise power set to hit `snr_linear`.
    pub fn with_received_snr(&self, gamma: f64, snr_linear: f64) -> SceneConfig {
        SceneConfig {
            noise_power_w: self.power_w * self.n_samples as f64 * gamma / snr_linear,
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    /// Mean angle in radians.
    pub mean: f64,
    pub variance: f64,
}

/// Gaussian-mixture prior on the target angle together with the
/// zero-mean complex Gaussian model of the reflection coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorModel {
    pub components: Vec<MixtureComponent>,
    /// Per-quadrature variance `σ_α²`; `α ~ CN(0, 2σ_α²)`.
    pub alpha_var: f64,
}

impl PriorModel {
    pub fn new(components: Vec<MixtureComponent>, alpha_var: f64) -> Result<Self> {
        let prior = PriorModel { components, alpha_var };
        prior.validate()?;
        Ok(prior)
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::invalid("prior.components", "at least one component required"));
        }
        for (k, c) in self.components.iter().enumerate() {
            if !(c.weight.is_finite() && c.weight > 0.0) {
                return Err(Error::invalid(format!("prior.components[{k}].weight"), "must be positive"));
            }
            if !c.mean.is_finite() {
                return Err(Error::invalid(format!("prior.components[{k}].mean"), "must be finite"));
            }
            if !(c.variance.is_finite() && c.variance > 0.0) {
                return Err(Error::invalid(
                    format!("prior.components[{k}].variance"),
                    "must be positive",
                ));
            }
        }
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(
                "prior.components",
                format!("weights must sum to 1, got {total}"),
            ));
        }
        if !(self.alpha_var.is_finite() && self.alpha_var > 0.0) {
            return Err(Error::invalid("prior.alpha_var", "must be positive"));
        }
        Ok(())
    }

    /// `γ = E[α_R²] + E[α_I²]`.
    pub fn gamma(&self) -> f64 {
        2.0 * self.alpha_var
    }

    pub fn pdf(&self, theta: f64) -> f64 {
        gmm_pdf(self, theta)
    }

    pub fn score(&self, theta: f64) -> f64 {
        gmm_score(self, theta)
    }
}

/// Mixture density `p_Θ(θ)`.
pub fn gmm_pdf(prior: &PriorModel, theta: f64) -> f64 {
    prior
        .components
        .iter()
        .map(|c| {
            let d = theta - c.mean;
            c.weight * (-0.5 * d * d / c.variance).exp() / (TAU * c.variance).sqrt()
        })
        .sum()
}

/// `∂ ln p_Θ(θ)/∂θ`, evaluated with log-domain responsibilities. Returns 0
/// where the density underflows.
pub fn gmm_score(prior: &PriorModel, theta: f64) -> f64 {
    if gmm_pdf(prior, theta) == 0.0 {
        return 0.0;
    }
    let logs: Vec<f64> = prior
        .components
        .iter()
        .map(|c| {
            let d = theta - c.mean;
            c.weight.ln() - 0.5 * (TAU * c.variance).ln() - 0.5 * d * d / c.variance
        })
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (num, den) = prior
        .components
        .iter()
        .zip(&logs)
        .fold((0.0, 0.0), |(num, den), (c, &l)| {
            let r = (l - top).exp();
            (num + r * (c.mean - theta) / c.variance, den + r)
        });
    num / den
}

/// Optimization variables: transmit phases `ξ`, receive phases `φ`, and the
/// transmit sample covariance `R_X`.
#[derive(Clone, Debug, PartialEq)]
pub struct Design {
    pub xi: Vec<f64>,
    pub phi: Vec<f64>,
    pub r_x: CMatrix,
}

impl Design {
    /// Wraps every phase into `[0, 2π)`.
    pub fn new(xi: Vec<f64>, phi: Vec<f64>, r_x: CMatrix) -> Self {
        Design {
            xi: xi.into_iter().map(wrap_phase).collect(),
            phi: phi.into_iter().map(wrap_phase).collect(),
            r_x,
        }
    }

    /// Zero phases and zero covariance.
    pub fn zero(config: &SceneConfig) -> Self {
        Design {
            xi: vec![0.0; config.n_tx],
            phi: vec![0.0; config.n_rx],
            r_x: CMatrix::zeros(config.n_tx, config.n_tx),
        }
    }

    /// Phases given, covariance spread isotropically: `R_X = (P/N)·I`.
    pub fn isotropic(config: &SceneConfig, xi: Vec<f64>, phi: Vec<f64>) -> Self {
        let n = config.n_tx;
        let r = CMatrix::identity(n, n) * Complex64::from(config.power_w / n as f64);
        Design::new(xi, phi, r)
    }

    pub fn validate(&self, config: &SceneConfig) -> Result<()> {
        if self.xi.len() != config.n_tx {
            return Err(Error::mismatch(format!("{} transmit phases", config.n_tx), self.xi.len()));
        }
        if self.phi.len() != config.n_rx {
            return Err(Error::mismatch(format!("{} receive phases", config.n_rx), self.phi.len()));
        }
        if self.r_x.shape() != (config.n_tx, config.n_tx) {
            return Err(Error::mismatch(
                format!("{0}×{0} covariance", config.n_tx),
                format!("{:?}", self.r_x.shape()),
            ));
        }
        let herm_gap = (&self.r_x - self.r_x.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm_gap > 1e-10 * config.power_w.max(1.0) {
            return Err(Error::invalid("design.r_x", "not Hermitian"));
        }
        let trace = self.r_x.trace().re;
        if trace > config.power_w + 1e-9 {
            return Err(Error::invalid(
                "design.r_x",
                format!("trace {trace} exceeds power budget {}", config.power_w),
            ));
        }
        let herm = (&self.r_x + self.r_x.adjoint()) * Complex64::from(0.5);
        let min_eig = herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        if min_eig < -1e-9 * trace.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::invalid("design.r_x", format!("not PSD (min eigenvalue {min_eig})")));
        }
        Ok(())
    }
}

/// Maps a phase into `[0, 2π)`.
pub fn wrap_phase(p: f64) -> f64 {
    let w = p.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Tx,
    Rx,
}

impl Side {
    fn size(self, config: &SceneConfig) -> usize {
        match self {
            Side::Tx => config.n_tx,
            Side::Rx => config.n_rx,
        }
    }
}

/// Per-element phase coefficient `π·(d/λ)·(K − 2k + 1)` for 1-based `k`.
fn element_factor(spacing_ratio: f64, size: usize, k0: usize) -> f64 {
    let k = (k0 + 1) as f64;
    PI * spacing_ratio * (size as f64 - 2.0 * k + 1.0)
}

/// `a(θ)` (transmit) or `b(θ)` (receive):
/// entry `k` is `exp(−j·π·(d/λ)·(K − 2k + 1)·sin θ)`.
pub fn steering(config: &SceneConfig, theta: f64, side: Side) -> CVector {
    let size = side.size(config);
    let s = theta.sin();
    CVector::from_fn(size, |k, _| {
        Complex64::from_polar(1.0, -element_factor(config.spacing_ratio, size, k) * s)
    })
}

/// `∂a/∂θ` or `∂b/∂θ`.
pub fn steering_derivative(config: &SceneConfig, theta: f64, side: Side) -> CVector {
    let size = side.size(config);
    let (s, c) = theta.sin_cos();
    CVector::from_fn(size, |k, _| {
        let g = element_factor(config.spacing_ratio, size, k);
        Complex64::new(0.0, -g * c) * Complex64::from_polar(1.0, -g * s)
    })
}

/// Transmit polarforming vector `f(ξ) = [1, e^{jξ}]ᵀ/√2`.
pub fn pfv_tx(xi: f64) -> Vec2 {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    Vec2::new(Complex64::new(h, 0.0), Complex64::from_polar(h, wrap_phase(xi)))
}

/// Receive polarforming vector `e(φ) = [1, e^{jφ}]ᵀ`.
pub fn pfv_rx(phi: f64) -> Vec2 {
    Vec2::new(Complex64::new(1.0, 0.0), Complex64::from_polar(1.0, wrap_phase(phi)))
}

fn block_diagonal(vectors: &[Vec2]) -> CMatrix {
    let k = vectors.len();
    let mut out = CMatrix::zeros(2 * k, k);
    for (i, v) in vectors.iter().enumerate() {
        out[(2 * i, i)] = v[0];
        out[(2 * i + 1, i)] = v[1];
    }
    out
}

/// `F(ξ) = blkdiag(f(ξ_1), …, f(ξ_N))`, shape `2N×N`.
pub fn pfm_tx(xi: &[f64]) -> CMatrix {
    block_diagonal(&xi.iter().map(|&x| pfv_tx(x)).collect::<Vec<_>>())
}

/// `E(φ) = blkdiag(e(φ_1), …, e(φ_M))`, shape `2M×M`.
pub fn pfm_rx(phi: &[f64]) -> CMatrix {
    block_diagonal(&phi.iter().map(|&p| pfv_rx(p)).collect::<Vec<_>>())
}

/// Length-checked variant of [`pfm_tx`].
pub fn pfm_tx_checked(config: &SceneConfig, xi: &[f64]) -> Result<CMatrix> {
    if xi.len() != config.n_tx {
        return Err(Error::mismatch(config.n_tx, xi.len()));
    }
    Ok(pfm_tx(xi))
}

/// Length-checked variant of [`pfm_rx`].
pub fn pfm_rx_checked(config: &SceneConfig, phi: &[f64]) -> Result<CMatrix> {
    if phi.len() != config.n_rx {
        return Err(Error::mismatch(config.n_rx, phi.len()));
    }
    Ok(pfm_rx(phi))
}

/// Depolarization matrix `Ψ = [[1, √χ], [√χ, 1]]/√(1+χ)`.
pub fn depolarization(xpd_inv: f64) -> Result<Mat2> {
    if !(xpd_inv.is_finite() && xpd_inv >= 0.0) {
        return Err(Error::invalid("xpd_inv", format!("must be non-negative, got {xpd_inv}")));
    }
    let s = 1.0 / (1.0 + xpd_inv).sqrt();
    let off = xpd_inv.sqrt() * s;
    Ok(Matrix2::new(s, off, off, s).map(Complex64::from))
}

/// Quantities integrated over the angle prior once per scene.
#[derive(Clone, Debug)]
pub struct PrecomputedScene {
    /// `Ã₁ = ∫ (ḃaᴴ + bȧᴴ) p_Θ dθ`, `M×N`.
    pub a1: CMatrix,
    /// `Ã₂ = ∫ b aᴴ p_Θ dθ`, `M×N`.
    pub a2: CMatrix,
    pub psi: Mat2,
    pub gamma: f64,
    /// `E_θ[(∂ ln p_Θ/∂θ)²]`.
    pub prior_fi: f64,
    /// `1/σ_α²`, the prior information of each reflection-coefficient quadrature.
    pub alpha_prior_fi: f64,
}

impl PrecomputedScene {
    pub fn n_tx(&self) -> usize {
        self.a1.ncols()
    }

    pub fn n_rx(&self) -> usize {
        self.a1.nrows()
    }
}

pub fn precompute(config: &SceneConfig, prior: &PriorModel, rule: &QuadratureRule) -> Result<PrecomputedScene> {
    config.validate()?;
    prior.validate()?;

    let a1 = integrate_matrix(rule, |t| {
        let a = steering(config, t, Side::Tx);
        let b = steering(config, t, Side::Rx);
        let da = steering_derivative(config, t, Side::Tx);
        let db = steering_derivative(config, t, Side::Rx);
        (&db * a.adjoint() + &b * da.adjoint()) * Complex64::from(prior.pdf(t))
    })?;
    let a2 = integrate_matrix(rule, |t| {
        let a = steering(config, t, Side::Tx);
        let b = steering(config, t, Side::Rx);
        (&b * a.adjoint()) * Complex64::from(prior.pdf(t))
    })?;
    let prior_fi = rule.integrate(|t| {
        let s = prior.score(t);
        s * s * prior.pdf(t)
    });
    if !prior_fi.is_finite() || a1.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("precompute"));
    }

    Ok(PrecomputedScene {
        a1,
        a2,
        psi: depolarization(config.xpd_inv)?,
        gamma: prior.gamma(),
        prior_fi,
        alpha_prior_fi: 1.0 / prior.alpha_var,
    })
}
