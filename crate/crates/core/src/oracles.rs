//! Brute-force and statistical cross-checks. Nothing here is used by the
//! optimizer; the signal model is transcribed again from scratch so that a
//! bug in the fast path cannot hide behind the same code.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::model::{depolarization, Design, PrecomputedScene, PriorModel, SceneConfig};
use crate::numerics::{CMatrix, CVector, Mat2};
use crate::{Error, Result};

const MC_CHUNK: usize = 4096;

/// Exhaustive maximum of `evaluate` over `{2πk/n_grid}`; ties keep the
/// smallest phase.
pub fn grid_phase_oracle(evaluate: impl Fn(f64) -> f64, n_grid: usize) -> Result<(f64, f64)> {
    if n_grid < 2 {
        return Err(Error::invalid("n_grid", "must be at least 2"));
    }
    let mut best = (0.0, f64::NEG_INFINITY);
    for k in 0..n_grid {
        let p = TAU * k as f64 / n_grid as f64;
        let v = evaluate(p);
        if v > best.1 {
            best = (p, v);
        }
    }
    Ok(best)
}

fn complex_gaussian<R: Rng>(rng: &mut R, var: f64) -> Complex64 {
    let s = (0.5 * var).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// Random Hermitian PSD matrix with trace exactly `power`.
pub fn random_feasible_covariance(n: usize, power: f64, seed: u64) -> Result<CMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_feasible_covariance_with(&mut rng, n, power)
}

pub fn random_feasible_covariance_with<R: Rng>(rng: &mut R, n: usize, power: f64) -> Result<CMatrix> {
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    if !(power.is_finite() && power > 0.0) {
        return Err(Error::invalid("power", "must be positive"));
    }
    // random rank so that low-rank corners of the feasible set get visited
    let rank = rng.random_range(1..=n);
    let g = CMatrix::from_fn(n, rank, |_, _| complex_gaussian(rng, 1.0));
    let r = &g * g.adjoint();
    let tr = r.trace().re;
    let mut r = r * Complex64::from(power / tr);
    for i in 0..n {
        r[(i, i)].im = 0.0;
    }
    Ok(r)
}

/// `G Gᴴ` for a random complex `G`, a Hermitian PSD 2×2 test matrix.
pub fn random_psd2<R: Rng>(rng: &mut R) -> Mat2 {
    let g = Mat2::from_fn(|_, _| complex_gaussian(rng, 1.0));
    g * g.adjoint()
}

/// Scene with random `Ã₁`, `Ã₂`, used where only the algebra matters.
pub fn random_scene<R: Rng>(rng: &mut R, n_rx: usize, n_tx: usize, xpd_inv: f64) -> Result<PrecomputedScene> {
    let a1 = CMatrix::from_fn(n_rx, n_tx, |_, _| complex_gaussian(rng, 1.0));
    let a2 = CMatrix::from_fn(n_rx, n_tx, |_, _| complex_gaussian(rng, 1.0));
    Ok(PrecomputedScene {
        a1,
        a2,
        psi: depolarization(xpd_inv)?,
        gamma: 2e-12,
        prior_fi: 100.0,
        alpha_prior_fi: 1e12,
    })
}

/// Uniform random phases and a random feasible covariance.
pub fn random_design<R: Rng>(rng: &mut R, config: &SceneConfig) -> Result<Design> {
    let xi = (0..config.n_tx).map(|_| rng.random_range(0.0..TAU)).collect();
    let phi = (0..config.n_rx).map(|_| rng.random_range(0.0..TAU)).collect();
    let r = random_feasible_covariance_with(rng, config.n_tx, config.power_w)?;
    Ok(Design::new(xi, phi, r))
}

/// Largest eigenvalue and eigenvector of a Hermitian matrix by dense
/// decomposition.
pub fn dense_top_eigen(h: &CMatrix) -> (f64, CVector) {
    let eig = h.clone().symmetric_eigen();
    let (i, &v) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty matrix");
    (v, eig.eigenvectors.column(i).into_owned())
}

// Independent transcription of the signal model. Index conventions: antennas
// are 1-based in the phase progression `N − 2n + 1`.

fn ula(count: usize, spacing: f64, theta: f64) -> CVector {
    CVector::from_fn(count, |i, _| {
        let k = count as f64 - 2.0 * (i as f64 + 1.0) + 1.0;
        Complex64::from_polar(1.0, -PI * spacing * k * theta.sin())
    })
}

fn ula_dtheta(count: usize, spacing: f64, theta: f64) -> CVector {
    CVector::from_fn(count, |i, _| {
        let k = count as f64 - 2.0 * (i as f64 + 1.0) + 1.0;
        let c = -PI * spacing * k;
        Complex64::new(0.0, c * theta.cos()) * Complex64::from_polar(1.0, c * theta.sin())
    })
}

fn psi_matrix(chi: f64) -> DMatrix<Complex64> {
    let s = 1.0 / (1.0 + chi).sqrt();
    DMatrix::from_row_slice(2, 2, &[s, chi.sqrt() * s, chi.sqrt() * s, s]).map(Complex64::from)
}

/// `2N×N` transmit and `2M×M` receive block-diagonal polarization matrices.
fn polarization_matrices(design: &Design) -> (CMatrix, CMatrix) {
    let n = design.xi.len();
    let m = design.phi.len();
    let mut f = CMatrix::zeros(2 * n, n);
    for (i, &x) in design.xi.iter().enumerate() {
        f[(2 * i, i)] = Complex64::from(1.0 / 2f64.sqrt());
        f[(2 * i + 1, i)] = Complex64::from_polar(1.0 / 2f64.sqrt(), x);
    }
    let mut e = CMatrix::zeros(2 * m, m);
    for (i, &p) in design.phi.iter().enumerate() {
        e[(2 * i, i)] = Complex64::from(1.0);
        e[(2 * i + 1, i)] = Complex64::from_polar(1.0, p);
    }
    (f, e)
}

/// `Eᴴ (H ⊗ Ψ) F` with the 2×2 block `(m, n)` equal to `H_mn Ψ`.
fn polarized_channel(h: &CMatrix, psi: &DMatrix<Complex64>, f: &CMatrix, e: &CMatrix) -> CMatrix {
    let (m, n) = h.shape();
    let mut big = CMatrix::zeros(2 * m, 2 * n);
    for r in 0..m {
        for c in 0..n {
            big.view_mut((2 * r, 2 * c), (2, 2)).copy_from(&(psi * h[(r, c)]));
        }
    }
    e.adjoint() * big * f
}

/// Per-angle channel derivative `∂/∂θ Eᴴ(b aᴴ ⊗ Ψ)F` with unit reflection.
fn channel_dtheta(config: &SceneConfig, psi: &DMatrix<Complex64>, f: &CMatrix, e: &CMatrix, theta: f64) -> CMatrix {
    let a = ula(config.n_tx, config.spacing_ratio, theta);
    let b = ula(config.n_rx, config.spacing_ratio, theta);
    let da = ula_dtheta(config.n_tx, config.spacing_ratio, theta);
    let db = ula_dtheta(config.n_rx, config.spacing_ratio, theta);
    let h = &db * a.adjoint() + &b * da.adjoint();
    polarized_channel(&h, psi, f, e)
}

fn channel(config: &SceneConfig, psi: &DMatrix<Complex64>, f: &CMatrix, e: &CMatrix, theta: f64, alpha: Complex64) -> CMatrix {
    let a = ula(config.n_tx, config.spacing_ratio, theta);
    let b = ula(config.n_rx, config.spacing_ratio, theta);
    polarized_channel(&(&b * a.adjoint() * alpha), psi, f, e)
}

/// Waveform `X` (`N×L`) with `XXᴴ/L = R_X`, built from the dominant
/// eigenpairs; requires `rank(R_X) ≤ L`.
pub fn waveform_factor(r_x: &CMatrix, n_samples: usize) -> Result<CMatrix> {
    let n = r_x.nrows();
    let eig = r_x.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let rank = eig.eigenvalues.iter().filter(|&&v| v > tol).count();
    if rank > n_samples {
        return Err(Error::invalid(
            "n_samples",
            format!("covariance rank {rank} exceeds the {n_samples} available samples"),
        ));
    }
    let l = n_samples as f64;
    let mut x = CMatrix::zeros(n, n_samples);
    for (slot, &i) in order.iter().take(rank).enumerate() {
        let col = eig.eigenvectors.column(i) * Complex64::from((eig.eigenvalues[i] * l).sqrt());
        x.set_column(slot, &col);
    }
    if rank == 1 {
        // spread a rank-one waveform evenly over all samples
        let c = x.column(0).into_owned() / Complex64::from(l.sqrt());
        for s in 0..n_samples {
            x.set_column(s, &c);
        }
    }
    Ok(x)
}

/// Monte Carlo estimate of the observation Fisher information on the angle
/// and of the angle/reflection cross moments.
#[derive(Clone, Debug, PartialEq)]
pub struct McFisher {
    pub samples: usize,
    pub estimate: f64,
    pub std_error: f64,
    pub cross_real: f64,
    pub cross_real_std_error: f64,
    pub cross_imag: f64,
    pub cross_imag_std_error: f64,
}

#[derive(Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if self.n == 0.0 {
            return o;
        }
        if o.n == 0.0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * o.n / n,
            m2: self.m2 + o.m2 + d * d * self.n * o.n / n,
        }
    }

    fn std_error(&self) -> f64 {
        if self.n < 2.0 {
            0.0
        } else {
            (self.m2 / (self.n - 1.0) / self.n).sqrt()
        }
    }
}

fn sample_prior<R: Rng>(rng: &mut R, prior: &PriorModel) -> f64 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut comp = prior.components.last().expect("validated prior");
    for c in &prior.components {
        acc += c.weight;
        if u < acc {
            comp = c;
            break;
        }
    }
    let z: f64 = StandardNormal.sample(rng);
    comp.mean + comp.variance.sqrt() * z
}

fn log_likelihood(y: &CMatrix, g: &CMatrix, x: &CMatrix, noise: f64) -> f64 {
    let (m, l) = y.shape();
    -(y - g * x).norm_squared() / noise - (m * l) as f64 * (PI * noise).ln()
}

/// Draws `ζ = (θ, α)` from the prior and `Y = G(ζ)X + noise`, differentiates
/// the log-likelihood by central differences and averages the squared angle
/// score (and its products with the reflection-coefficient scores).
pub fn mc_fisher_theta(
    config: &SceneConfig,
    prior: &PriorModel,
    design: &Design,
    n_mc: usize,
    fd_step: f64,
    seed: u64,
) -> Result<McFisher> {
    config.validate()?;
    prior.validate()?;
    design.validate(config)?;
    if n_mc == 0 {
        return Err(Error::invalid("n_mc", "must be at least 1"));
    }
    if !(fd_step.is_finite() && fd_step > 0.0) {
        return Err(Error::invalid("fd_step", "must be positive"));
    }

    let x = waveform_factor(&design.r_x, config.n_samples)?;
    let (f, e) = polarization_matrices(design);
    let psi = psi_matrix(config.xpd_inv);
    let noise = config.noise_power_w;
    let sigma_alpha = prior.alpha_var.sqrt();
    let h_alpha = fd_step * sigma_alpha;
    let n_chunks = n_mc.div_ceil(MC_CHUNK);

    let chunks = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = MC_CHUNK.min(n_mc - c * MC_CHUNK);
            let mut mom = [Moments::default(); 3];
            for _ in 0..count {
                let theta = sample_prior(&mut rng, prior);
                let a_re: f64 = StandardNormal.sample(&mut rng);
                let a_im: f64 = StandardNormal.sample(&mut rng);
                let alpha = Complex64::new(sigma_alpha * a_re, sigma_alpha * a_im);
                let g = channel(config, &psi, &f, &e, theta, alpha);
                let y = CMatrix::from_fn(config.n_rx, config.n_samples, |_, _| complex_gaussian(&mut rng, noise)) + &g * &x;

                let ll = |t: f64, a: Complex64| log_likelihood(&y, &channel(config, &psi, &f, &e, t, a), &x, noise);
                let s_theta = (ll(theta + fd_step, alpha) - ll(theta - fd_step, alpha)) / (2.0 * fd_step);
                let dr = Complex64::new(h_alpha, 0.0);
                let di = Complex64::new(0.0, h_alpha);
                let s_re = (ll(theta, alpha + dr) - ll(theta, alpha - dr)) / (2.0 * h_alpha);
                let s_im = (ll(theta, alpha + di) - ll(theta, alpha - di)) / (2.0 * h_alpha);
                if !(s_theta.is_finite() && s_re.is_finite() && s_im.is_finite()) {
                    return Err(Error::NonFinite("log-likelihood"));
                }
                mom[0].push(s_theta * s_theta);
                mom[1].push(s_theta * s_re);
                mom[2].push(s_theta * s_im);
            }
            Ok(mom)
        })
        .collect::<Result<Vec<_>>>()?;

    let total = chunks.into_iter().fold([Moments::default(); 3], |acc, m| {
        [acc[0].merge(m[0]), acc[1].merge(m[1]), acc[2].merge(m[2])]
    });
    Ok(McFisher {
        samples: n_mc,
        estimate: total[0].mean,
        std_error: total[0].std_error(),
        cross_real: total[1].mean,
        cross_real_std_error: total[1].std_error(),
        cross_imag: total[2].mean,
        cross_imag_std_error: total[2].std_error(),
    })
}

/// `E_θ[(2Lγ/σ²) tr(Ġ(θ) R_X Ġ(θ)ᴴ)]` with the expectation taken outside the
/// quadratic form, integrated per mixture component by composite Simpson over
/// `±8σ` with `intervals` subintervals. This is what the Monte Carlo
/// estimator converges to.
pub fn pointwise_fisher_theta(config: &SceneConfig, prior: &PriorModel, design: &Design, intervals: usize) -> Result<f64> {
    config.validate()?;
    prior.validate()?;
    if intervals < 2 {
        return Err(Error::invalid("intervals", "must be at least 2"));
    }
    let n = intervals + intervals % 2;
    let (f, e) = polarization_matrices(design);
    let psi = psi_matrix(config.xpd_inv);
    let integrand = |t: f64| {
        let g = channel_dtheta(config, &psi, &f, &e, t);
        (&g * &design.r_x * g.adjoint()).trace().re
    };
    let mut total = 0.0;
    for c in &prior.components {
        let sd = c.variance.sqrt();
        let (lo, hi) = (c.mean - 8.0 * sd, c.mean + 8.0 * sd);
        let h = (hi - lo) / n as f64;
        let mut acc = 0.0;
        for k in 0..=n {
            let t = lo + k as f64 * h;
            let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            let z = (t - c.mean) / sd;
            let pdf = (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt());
            acc += w * pdf * integrand(t);
        }
        total += c.weight * acc * h / 3.0;
    }
    let gamma = 2.0 * prior.alpha_var;
    Ok(2.0 * config.n_samples as f64 * gamma / config.noise_power_w * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bcrb::{bfim, objective};
    use crate::model::{precompute, MixtureComponent};
    use crate::numerics::make_quadrature;
    use crate::optimizer::{optimal_covariance, update_receive_phase};
    use approx::assert_relative_eq;

    fn small_config() -> SceneConfig {
        SceneConfig {
            n_tx: 2,
            n_rx: 2,
            spacing_ratio: 0.5,
            n_samples: 2,
            power_w: 1.0,
            noise_power_w: 4e-12,
            xpd_inv: 0.2,
        }
    }

    fn narrow_prior() -> PriorModel {
        PriorModel::new(
            vec![MixtureComponent {
                weight: 1.0,
                mean: 1.2,
                variance: 1e-4,
            }],
            1e-12,
        )
        .unwrap()
    }

    #[test]
    fn grid_oracle_cosine() {
        let (p, v) = grid_phase_oracle(f64::cos, 360).unwrap();
        assert_eq!(p, 0.0);
        assert_eq!(v, 1.0);
        assert!(grid_phase_oracle(f64::cos, 1).is_err());
    }

    #[test]
    fn grid_oracle_closed_form_example() {
        let k = Mat2::new(
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 1.0),
            Complex64::new(1.0, -1.0),
            Complex64::new(1.0, 0.0),
        );
        let val = |p: f64| {
            let e = crate::model::pfv_rx(p);
            e.dotc(&(k * e)).re
        };
        // 2 + 2Re((1+j)e^{jφ}) peaks at φ = −π/4
        let (p, _) = grid_phase_oracle(val, 4096).unwrap();
        assert!((p - 7.0 * PI / 4.0).abs() <= TAU / 4096.0);
        assert_relative_eq!(update_receive_phase(&k), 7.0 * PI / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn grid_oracle_agrees_with_receive_update() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let k = random_psd2(&mut rng);
            let val = |p: f64| {
                let e = crate::model::pfv_rx(p);
                e.dotc(&(k * e)).re
            };
            let (_, best) = grid_phase_oracle(val, 4096).unwrap();
            assert!(val(update_receive_phase(&k)) >= best * (1.0 - 1e-9));
        }
    }

    #[test]
    fn random_covariance_is_feasible() {
        for seed in 0..50 {
            let r = random_feasible_covariance(6, 3.5, seed).unwrap();
            assert_relative_eq!(r.trace().re, 3.5, max_relative = 1e-12);
            assert!((&r - r.adjoint()).norm() < 1e-12);
            let min = r.symmetric_eigenvalues().min();
            assert!(min >= -1e-10);
        }
        assert_eq!(random_feasible_covariance(3, 1.0, 4).unwrap(), random_feasible_covariance(3, 1.0, 4).unwrap());
        assert!(random_feasible_covariance(0, 1.0, 0).is_err());
        assert!(random_feasible_covariance(2, 0.0, 0).is_err());
    }

    #[test]
    fn random_covariances_never_beat_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let config = SceneConfig { n_tx: 5, n_rx: 4, ..small_config() };
        let scene = random_scene(&mut rng, 4, 5, 0.2).unwrap();
        let design = random_design(&mut rng, &config).unwrap();
        let opt = optimal_covariance(&scene, &config, &design).unwrap();
        let best = objective(&scene, &Design { r_x: opt.r_x, ..design.clone() });
        for _ in 0..1000 {
            let r = random_feasible_covariance_with(&mut rng, 5, config.power_w).unwrap();
            assert!(objective(&scene, &Design { r_x: r, ..design.clone() }) <= best * (1.0 + 1e-12));
        }
    }

    #[test]
    fn waveform_factor_reproduces_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let r = random_feasible_covariance_with(&mut rng, 3, 2.0).unwrap();
        let rank = r.rank(1e-9);
        let x = waveform_factor(&r, 4).unwrap();
        assert!((&x * x.adjoint() / Complex64::from(4.0) - &r).norm() < 1e-12);
        if rank > 1 {
            assert!(waveform_factor(&r, 1).is_err());
        }
        let q = CVector::from_vec(vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)]);
        let r1 = &q * q.adjoint() * Complex64::from(3.0);
        let x = waveform_factor(&r1, 2).unwrap();
        assert!((&x * x.adjoint() / Complex64::from(2.0) - &r1).norm() < 1e-12);
        assert!((x.column(0) - x.column(1)).norm() < 1e-15);
    }

    #[test]
    fn transcribed_channel_matches_fast_path() {
        let config = small_config();
        let prior = narrow_prior();
        let rule = make_quadrature(&prior, 64).unwrap();
        let scene = precompute(&config, &prior, &rule).unwrap();
        let design = Design::isotropic(&config, vec![0.3, 2.0], vec![1.0, 5.0]);
        let (f, e) = polarization_matrices(&design);
        let psi = psi_matrix(config.xpd_inv);
        let avg = rule
            .iter()
            .fold(CMatrix::zeros(2, 2), |acc, (t, w)| acc + channel_dtheta(&config, &psi, &f, &e, t) * Complex64::from(w * prior.pdf(t)));
        let q = crate::bcrb::q_matrix(&scene, &design);
        assert!((avg - &q).norm() < 1e-10 * q.norm());
    }

    #[test]
    fn mc_without_signal_is_zero() {
        let config = small_config();
        let design = Design::zero(&config);
        let mc = mc_fisher_theta(&config, &narrow_prior(), &design, 1000, 1e-5, 1).unwrap();
        assert!(mc.estimate.abs() <= 3.0 * mc.std_error);
    }

    #[test]
    fn mc_is_deterministic() {
        let config = small_config();
        let design = Design::isotropic(&config, vec![0.0, 1.0], vec![2.0, 3.0]);
        let a = mc_fisher_theta(&config, &narrow_prior(), &design, 5000, 1e-5, 3).unwrap();
        let b = mc_fisher_theta(&config, &narrow_prior(), &design, 5000, 1e-5, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mc_matches_pointwise_and_analytic_for_narrow_prior() {
        let config = small_config();
        let prior = narrow_prior();
        let scene = precompute(&config, &prior, &make_quadrature(&prior, 64).unwrap()).unwrap();
        let design = Design::isotropic(&config, vec![0.0, 1.0], vec![2.0, 3.0]);
        let mc = mc_fisher_theta(&config, &prior, &design, 40_000, 1e-5, 7).unwrap();
        let exact = pointwise_fisher_theta(&config, &prior, &design, 400).unwrap();
        let analytic = bfim(&scene, &config, &design).j_theta_theta;
        assert!((mc.estimate - exact).abs() <= 4.0 * mc.std_error, "{mc:?} vs {exact}");
        assert_relative_eq!(exact, analytic, max_relative = 1e-2);
        assert!(mc.cross_real.abs() <= 4.0 * mc.cross_real_std_error);
        assert!(mc.cross_imag.abs() <= 4.0 * mc.cross_imag_std_error);
    }

    #[test]
    fn pointwise_exceeds_averaged_form() {
        // E‖Ġx‖² ≥ ‖E Ġ x‖², so the averaged-matrix value is a lower bound
        let config = small_config();
        let prior = PriorModel::new(
            vec![
                MixtureComponent { weight: 0.5, mean: 0.4, variance: 1e-2 },
                MixtureComponent { weight: 0.5, mean: 2.2, variance: 1e-2 },
            ],
            1e-12,
        )
        .unwrap();
        let scene = precompute(&config, &prior, &make_quadrature(&prior, 64).unwrap()).unwrap();
        let design = Design::isotropic(&config, vec![0.0, 1.0], vec![2.0, 3.0]);
        let exact = pointwise_fisher_theta(&config, &prior, &design, 400).unwrap();
        let analytic = bfim(&scene, &config, &design).j_theta_theta;
        assert!(exact >= analytic);
    }

    #[test]
    fn dense_eigen_matches_power_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let g = CMatrix::from_fn(6, 6, |_, _| complex_gaussian(&mut rng, 1.0));
        let h = &g * g.adjoint();
        let (lam, v) = dense_top_eigen(&h);
        let p = crate::numerics::top_hermitian_eigenpair(&h, 1e-12, 100_000).unwrap();
        assert_relative_eq!(lam, p.value, max_relative = 1e-9);
        assert_relative_eq!(v.dotc(&p.vector).norm(), 1.0, max_relative = 1e-6);
    }
}
