use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use pra_bcrb::model::{precompute, MixtureComponent, PriorModel, SceneConfig};
use pra_bcrb::numerics::make_quadrature;

fn reference_prior() -> PriorModel {
    let modes = [(0.2, 0.3), (0.6, 1.2), (0.1, 2.5), (0.1, 2.9)];
    PriorModel::new(
        modes
            .iter()
            .map(|&(weight, mean)| MixtureComponent { weight, mean, variance: 0.01 })
            .collect(),
        1e-12,
    )
    .unwrap()
}

fn scene_config() -> SceneConfig {
    SceneConfig {
        n_tx: 12,
        n_rx: 12,
        spacing_ratio: 0.5,
        n_samples: 25,
        power_w: 1.0,
        noise_power_w: 1e-11,
        xpd_inv: 0.2,
    }
}

fn sample_angle(prior: &PriorModel, rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut pick = &prior.components[prior.components.len() - 1];
    for c in &prior.components {
        acc += c.weight;
        if u < acc {
            pick = c;
            break;
        }
    }
    Normal::new(pick.mean, pick.variance.sqrt()).unwrap().sample(rng)
}

#[test]
fn prior_information_matches_sampling() {
    let prior = reference_prior();
    let scene = precompute(&scene_config(), &prior, &make_quadrature(&prior, 64).unwrap()).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let n = 1_000_000;
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..n {
        let s = prior.score(sample_angle(&prior, &mut rng));
        sum += s * s;
        sum2 += s.powi(4);
    }
    let mean = sum / n as f64;
    let se = ((sum2 / n as f64 - mean * mean) / n as f64).sqrt();
    assert!((mean - scene.prior_fi).abs() <= 4.0 * se, "sampled {mean} ± {se}, quadrature {}", scene.prior_fi);
}

#[test]
fn averaged_steering_matches_sampling() {
    let prior = reference_prior();
    let scene = precompute(&scene_config(), &prior, &make_quadrature(&prior, 64).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 200_000;
    let mut acc = Complex64::new(0.0, 0.0);
    for _ in 0..n {
        // b_1 conj(a_12) spans 22 half-wavelength steps
        let phase = -std::f64::consts::PI * 0.5 * 22.0 * sample_angle(&prior, &mut rng).sin();
        acc += Complex64::from_polar(1.0, phase);
    }
    let est = acc / n as f64;
    assert!((scene.a2[(0, 11)] - est).norm() < 5e-3, "{} vs {est}", scene.a2[(0, 11)]);
}

#[test]
fn wider_prior_carries_less_information() {
    let cfg = scene_config();
    let mut last = f64::INFINITY;
    for var in [1e-3, 1e-2, 1e-1, 1.0] {
        let p = PriorModel::new(vec![MixtureComponent { weight: 1.0, mean: 1.0, variance: var }], 1e-12).unwrap();
        let s = precompute(&cfg, &p, &make_quadrature(&p, 64).unwrap()).unwrap();
        assert!((s.prior_fi - 1.0 / var).abs() <= 1e-6 / var);
        assert!(s.prior_fi < last);
        last = s.prior_fi;
    }
}
