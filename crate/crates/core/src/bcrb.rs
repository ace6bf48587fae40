//! Bayesian Fisher information and the BCRB for the target angle.
//!
//! The effective matrices `Q = Eᴴ(φ)(Ψ⊗Ã₁)F(ξ)` and `O = Eᴴ(φ)(Ψ⊗Ã₂)F(ξ)`
//! are formed entrywise as `q_mn = e_mᴴ Ψ f_n [Ã₁]_mn`. The block `(m, n)` of
//! the polarized channel is `Ψ·[Ã₁]_mn`, which in standard Kronecker order is
//! `kron(Ã₁, Ψ)`; the `_kron` variants build that product explicitly and exist
//! as an independent second route.

use num_complex::Complex64;

use crate::model::{pfm_rx, pfm_tx, pfv_rx, pfv_tx, Design, PrecomputedScene, SceneConfig};
use crate::numerics::{kron, mat2_to_dynamic, quadratic_trace, CMatrix, Mat2, Vec2};

/// Diagonal blocks of the 3×3 Bayesian Fisher information for
/// `ζ = (θ, α_R, α_I)`. The θ–α cross block vanishes under the zero-mean
/// reflection-coefficient prior.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bfim {
    pub j_theta_theta: f64,
    /// Scalar multiplying `I₂` in the α–α block.
    pub j_alpha_alpha: f64,
    /// Prior information diagonal `(θ, α_R, α_I)`.
    pub prior_diag: [f64; 3],
}

impl Bfim {
    /// Full `J = J_O + J_P` as a row-major 3×3 array.
    pub fn total(&self) -> [[f64; 3]; 3] {
        [
            [self.j_theta_theta + self.prior_diag[0], 0.0, 0.0],
            [0.0, self.j_alpha_alpha + self.prior_diag[1], 0.0],
            [0.0, 0.0, self.j_alpha_alpha + self.prior_diag[2]],
        ]
    }

    /// `[J⁻¹]₁₁`; block-diagonality makes this a scalar inverse.
    pub fn bcrb_theta(&self) -> f64 {
        1.0 / (self.j_theta_theta + self.prior_diag[0])
    }
}

pub fn tx_vectors(xi: &[f64]) -> Vec<Vec2> {
    xi.iter().map(|&x| pfv_tx(x)).collect()
}

pub fn rx_vectors(phi: &[f64]) -> Vec<Vec2> {
    phi.iter().map(|&p| pfv_rx(p)).collect()
}

/// Scalar polarization gain `eᴴ Ψ f`.
pub fn polarization_gain(e: &Vec2, psi: &Mat2, f: &Vec2) -> Complex64 {
    e.dotc(&(psi * f))
}

/// `[e_mᴴ Ψ f_n · A_mn]` for arbitrary per-antenna polarization vectors.
pub fn polarized_matrix(a: &CMatrix, psi: &Mat2, tx: &[Vec2], rx: &[Vec2]) -> CMatrix {
    debug_assert_eq!(a.nrows(), rx.len());
    debug_assert_eq!(a.ncols(), tx.len());
    let psi_f: Vec<Vec2> = tx.iter().map(|f| psi * f).collect();
    CMatrix::from_fn(a.nrows(), a.ncols(), |m, n| rx[m].dotc(&psi_f[n]) * a[(m, n)])
}

/// `Eᴴ kron(A, Ψ) F` with explicit polarforming matrices.
pub fn polarized_matrix_kron(a: &CMatrix, psi: &Mat2, f_mat: &CMatrix, e_mat: &CMatrix) -> CMatrix {
    e_mat.adjoint() * kron(a, &mat2_to_dynamic(psi)) * f_mat
}

pub fn q_matrix(scene: &PrecomputedScene, design: &Design) -> CMatrix {
    polarized_matrix(&scene.a1, &scene.psi, &tx_vectors(&design.xi), &rx_vectors(&design.phi))
}

pub fn q_matrix_kron(scene: &PrecomputedScene, design: &Design) -> CMatrix {
    polarized_matrix_kron(&scene.a1, &scene.psi, &pfm_tx(&design.xi), &pfm_rx(&design.phi))
}

pub fn o_matrix(scene: &PrecomputedScene, design: &Design) -> CMatrix {
    polarized_matrix(&scene.a2, &scene.psi, &tx_vectors(&design.xi), &rx_vectors(&design.phi))
}

pub fn o_matrix_kron(scene: &PrecomputedScene, design: &Design) -> CMatrix {
    polarized_matrix_kron(&scene.a2, &scene.psi, &pfm_tx(&design.xi), &pfm_rx(&design.phi))
}

/// Design objective `tr(Q R_X Qᴴ)`.
pub fn objective(scene: &PrecomputedScene, design: &Design) -> f64 {
    quadratic_trace(&q_matrix(scene, design), &design.r_x)
}

/// Scale factor `2Lγ/σ_s²` mapping the objective to `J_O^θθ`.
pub fn fisher_scale(scene: &PrecomputedScene, config: &SceneConfig) -> f64 {
    2.0 * config.n_samples as f64 * scene.gamma / config.noise_power_w
}

/// BCRB from an objective value: `1/(2Lγ/σ_s² · objective + prior_fi)`.
pub fn bcrb_from_objective(scene: &PrecomputedScene, config: &SceneConfig, objective: f64) -> f64 {
    1.0 / (fisher_scale(scene, config) * objective + scene.prior_fi)
}

pub fn bfim(scene: &PrecomputedScene, config: &SceneConfig, design: &Design) -> Bfim {
    let l = config.n_samples as f64;
    Bfim {
        j_theta_theta: fisher_scale(scene, config) * objective(scene, design),
        j_alpha_alpha: 2.0 * l / config.noise_power_w * quadratic_trace(&o_matrix(scene, design), &design.r_x),
        prior_diag: [scene.prior_fi, scene.alpha_prior_fi, scene.alpha_prior_fi],
    }
}

/// BCRB on the MSE of any estimator of θ.
pub fn bcrb_theta(scene: &PrecomputedScene, config: &SceneConfig, design: &Design) -> f64 {
    bfim(scene, config, design).bcrb_theta()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{depolarization, MixtureComponent, PriorModel};
    use crate::numerics::make_quadrature;
    use crate::model::precompute;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, TAU};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_scene(rng: &mut ChaCha8Rng, m: usize, n: usize, chi: f64) -> PrecomputedScene {
        let mut gen = || CMatrix::from_fn(m, n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let a1 = gen();
        let a2 = gen();
        PrecomputedScene {
            a1,
            a2,
            psi: depolarization(chi).unwrap(),
            gamma: 2e-12,
            prior_fi: 50.0,
            alpha_prior_fi: 1e12,
        }
    }

    fn random_design(rng: &mut ChaCha8Rng, m: usize, n: usize, power: f64) -> Design {
        let g = CMatrix::from_fn(n, n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let r = &g * g.adjoint();
        let tr = r.trace().re;
        Design::new(
            (0..n).map(|_| rng.random_range(0.0..TAU)).collect(),
            (0..m).map(|_| rng.random_range(0.0..TAU)).collect(),
            r * Complex64::from(power / tr),
        )
    }

    fn config(n: usize, m: usize) -> SceneConfig {
        SceneConfig {
            n_tx: n,
            n_rx: m,
            spacing_ratio: 0.5,
            n_samples: 4,
            power_w: 1.0,
            noise_power_w: 1e-11,
            xpd_inv: 0.2,
        }
    }

    #[test]
    fn single_antenna_zero_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let scene = random_scene(&mut rng, 1, 1, 0.0);
        let d = Design::new(vec![0.0], vec![0.0], CMatrix::identity(1, 1));
        let q = q_matrix(&scene, &d);
        assert!((q[(0, 0)] - scene.a1[(0, 0)] * 2f64.sqrt()).norm() < 1e-15);
    }

    #[test]
    fn no_depolarization_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let scene = random_scene(&mut rng, 3, 4, 0.0);
        let d = random_design(&mut rng, 3, 4, 1.0);
        let q = q_matrix(&scene, &d);
        let o = o_matrix(&scene, &d);
        for m in 0..3 {
            for n in 0..4 {
                let g = c(FRAC_1_SQRT_2, 0.0) * (c(1.0, 0.0) + Complex64::from_polar(1.0, d.xi[n] - d.phi[m]));
                assert!((q[(m, n)] - scene.a1[(m, n)] * g).norm() < 1e-14);
                assert!((o[(m, n)] - scene.a2[(m, n)] * g).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn entrywise_and_kronecker_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let chi = rng.random_range(0.0..2.0);
            let scene = random_scene(&mut rng, 12, 12, chi);
            let d = random_design(&mut rng, 12, 12, 1.0);
            let dq = q_matrix(&scene, &d) - q_matrix_kron(&scene, &d);
            let dq_o = o_matrix(&scene, &d) - o_matrix_kron(&scene, &d);
            assert!(dq.iter().all(|z| z.norm() < 1e-12));
            assert!(dq_o.iter().all(|z| z.norm() < 1e-12));
        }
    }

    #[test]
    fn objective_zero_covariance_and_linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let scene = random_scene(&mut rng, 5, 6, 0.2);
        let d = random_design(&mut rng, 5, 6, 1.0);
        let zero = Design { r_x: CMatrix::zeros(6, 6), ..d.clone() };
        assert_eq!(objective(&scene, &zero), 0.0);
        let scaled = Design { r_x: &d.r_x * Complex64::from(3.5), ..d.clone() };
        assert_relative_eq!(objective(&scene, &scaled), 3.5 * objective(&scene, &d), max_relative = 1e-12);
        assert!(objective(&scene, &d) >= 0.0);
    }

    #[test]
    fn global_phase_shift_invariance_without_depolarization() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let scene = random_scene(&mut rng, 4, 4, 0.0);
        let d = random_design(&mut rng, 4, 4, 1.0);
        let shift = 1.234;
        let moved = Design::new(
            d.xi.iter().map(|x| x + shift).collect(),
            d.phi.iter().map(|p| p + shift).collect(),
            d.r_x.clone(),
        );
        assert_relative_eq!(objective(&scene, &d), objective(&scene, &moved), max_relative = 1e-12);
    }

    #[test]
    fn qrq_is_hermitian_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let scene = random_scene(&mut rng, 6, 5, 0.5);
        let d = random_design(&mut rng, 6, 5, 2.0);
        let q = q_matrix(&scene, &d);
        let s = &q * &d.r_x * q.adjoint();
        assert!((&s - s.adjoint()).norm() < 1e-10);
        let eig = s.symmetric_eigenvalues();
        assert!(eig.iter().all(|&l| l > -1e-10));
    }

    #[test]
    fn bfim_zero_design_gives_prior_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let scene = random_scene(&mut rng, 3, 3, 0.2);
        let cfg = config(3, 3);
        let b = bfim(&scene, &cfg, &Design::zero(&cfg));
        assert_eq!(b.j_theta_theta, 0.0);
        assert_eq!(b.j_alpha_alpha, 0.0);
        assert_eq!(bcrb_theta(&scene, &cfg, &Design::zero(&cfg)), 1.0 / scene.prior_fi);
        assert_eq!(b.prior_diag, [50.0, 1e12, 1e12]);
        let t = b.total();
        assert_eq!(t[0][1], 0.0);
        assert_eq!(t[1][2], 0.0);
    }

    #[test]
    fn bfim_linear_in_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let scene = random_scene(&mut rng, 3, 3, 0.2);
        let cfg = config(3, 3);
        let d = random_design(&mut rng, 3, 3, 1.0);
        let doubled = SceneConfig { n_samples: 8, ..cfg.clone() };
        let j1 = bfim(&scene, &cfg, &d).j_theta_theta;
        let j2 = bfim(&scene, &doubled, &d).j_theta_theta;
        assert_relative_eq!(j2, 2.0 * j1, max_relative = 1e-14);
    }

    #[test]
    fn bcrb_bounded_and_monotone_in_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let scene = random_scene(&mut rng, 4, 4, 0.2);
        let cfg = config(4, 4);
        let d = random_design(&mut rng, 4, 4, 1.0);
        let mut last = 1.0 / scene.prior_fi;
        for p in [0.1, 0.5, 1.0, 4.0, 20.0] {
            let scaled = Design { r_x: &d.r_x * Complex64::from(p), ..d.clone() };
            let b = bcrb_theta(&scene, &cfg, &scaled);
            assert!(b > 0.0 && b < last);
            last = b;
        }
    }

    #[test]
    fn near_point_prior_o_matrix() {
        let cfg = config(3, 2);
        let prior = PriorModel::new(vec![MixtureComponent { weight: 1.0, mean: 0.4, variance: 1e-10 }], 1e-12).unwrap();
        let rule = make_quadrature(&prior, 64).unwrap();
        let scene = precompute(&cfg, &prior, &rule).unwrap();
        let d = Design::new(vec![0.3, 1.0, 2.0], vec![4.0, 5.0], CMatrix::identity(3, 3));
        let h = crate::model::steering(&cfg, 0.4, crate::model::Side::Rx)
            * crate::model::steering(&cfg, 0.4, crate::model::Side::Tx).adjoint();
        let expected = polarized_matrix_kron(&h, &scene.psi, &pfm_tx(&d.xi), &pfm_rx(&d.phi));
        assert!((o_matrix(&scene, &d) - expected).iter().all(|z| z.norm() < 1e-4));
    }
}
