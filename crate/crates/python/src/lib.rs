//! Python bindings: build a prior-averaged scene, score designs, run the
//! alternating optimization and the benchmark comparison.

use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use bcrb_core::benchmarks::{compare_schemes, BenchmarkOptions, NoPraGain, SchemeId};
use bcrb_core::cli::{dbm_to_watts as dbm_to_w, Experiment, ExperimentConfig};
use bcrb_core::model::{precompute, MixtureComponent};
use bcrb_core::numerics::make_quadrature;
use bcrb_core::{AoSettings, CMatrix, Design, PrecomputedScene, PriorModel, SceneConfig};

fn py_err(e: bcrb_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_rows(m: &CMatrix) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect()).collect()
}

fn from_rows(rows: Vec<Vec<Complex64>>) -> PyResult<CMatrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("r_x must be a square list of lists"));
    }
    Ok(CMatrix::from_fn(n, n, |r, c| rows[r][c]))
}

/// Array, channel and prior with the prior-averaged matrices precomputed.
#[pyclass(name = "Scene", module = "pra_bcrb")]
struct PyScene {
    config: SceneConfig,
    prior: PriorModel,
    scene: PrecomputedScene,
}

#[pymethods]
impl PyScene {
    /// `prior` is a list of `(weight, mean, variance)` tuples.
    #[new]
    #[pyo3(signature = (n_tx, n_rx, n_samples, power_w, noise_power_w, xpd_inv, prior, alpha_var, spacing_ratio=0.5, quadrature_nodes=64))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        n_tx: usize,
        n_rx: usize,
        n_samples: usize,
        power_w: f64,
        noise_power_w: f64,
        xpd_inv: f64,
        prior: Vec<(f64, f64, f64)>,
        alpha_var: f64,
        spacing_ratio: f64,
        quadrature_nodes: usize,
    ) -> PyResult<Self> {
        let config = SceneConfig {
            n_tx,
            n_rx,
            spacing_ratio,
            n_samples,
            power_w,
            noise_power_w,
            xpd_inv,
        };
        let components = prior
            .into_iter()
            .map(|(weight, mean, variance)| MixtureComponent { weight, mean, variance })
            .collect();
        let prior = PriorModel::new(components, alpha_var).map_err(py_err)?;
        let rule = make_quadrature(&prior, quadrature_nodes).map_err(py_err)?;
        let scene = precompute(&config, &prior, &rule).map_err(py_err)?;
        Ok(PyScene { config, prior, scene })
    }

    /// Scene described by a JSON experiment config file.
    #[staticmethod]
    fn from_config(path: PathBuf) -> PyResult<Self> {
        let cfg = ExperimentConfig::from_path(&path).map_err(py_err)?;
        let exp = Experiment::new(cfg).map_err(py_err)?;
        Ok(PyScene {
            config: exp.scene_config,
            prior: exp.config.prior,
            scene: exp.scene,
        })
    }

    #[getter]
    fn n_tx(&self) -> usize {
        self.config.n_tx
    }

    #[getter]
    fn n_rx(&self) -> usize {
        self.config.n_rx
    }

    #[getter]
    fn power_w(&self) -> f64 {
        self.config.power_w
    }

    #[getter]
    fn noise_power_w(&self) -> f64 {
        self.config.noise_power_w
    }

    #[getter]
    fn prior_fi(&self) -> f64 {
        self.scene.prior_fi
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.scene.gamma
    }

    fn a1(&self) -> Vec<Vec<Complex64>> {
        to_rows(&self.scene.a1)
    }

    fn a2(&self) -> Vec<Vec<Complex64>> {
        to_rows(&self.scene.a2)
    }

    fn prior_pdf(&self, theta: f64) -> f64 {
        self.prior.pdf(theta)
    }

    /// Same scene with the noise power set for the given received SNR.
    fn with_received_snr(&self, snr_db: f64) -> Self {
        let config = self.config.with_received_snr(self.scene.gamma, 10f64.powf(snr_db / 10.0));
        PyScene {
            config,
            prior: self.prior.clone(),
            scene: self.scene.clone(),
        }
    }

    fn objective(&self, xi: Vec<f64>, phi: Vec<f64>, r_x: Vec<Vec<Complex64>>) -> PyResult<f64> {
        let d = self.design(xi, phi, r_x)?;
        Ok(bcrb_core::objective(&self.scene, &d))
    }

    fn bcrb(&self, xi: Vec<f64>, phi: Vec<f64>, r_x: Vec<Vec<Complex64>>) -> PyResult<f64> {
        let d = self.design(xi, phi, r_x)?;
        Ok(bcrb_core::bcrb_theta(&self.scene, &self.config, &d))
    }

    /// Alternating optimization; returns a dict with the design, objective,
    /// BCRB and the per-sub-update trace.
    #[pyo3(signature = (n_restarts=8, seed=2025, rel_tol=1e-9, max_outer_iter=200))]
    fn optimize<'py>(
        &self,
        py: Python<'py>,
        n_restarts: usize,
        seed: u64,
        rel_tol: f64,
        max_outer_iter: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let settings = AoSettings {
            rel_tol,
            max_outer_iter,
            n_restarts,
            rng_seed: seed,
        };
        let res = py
            .detach(|| bcrb_core::run_ao(&self.scene, &self.config, &settings))
            .map_err(py_err)?;
        let out = PyDict::new(py);
        out.set_item("xi", res.design.xi.clone())?;
        out.set_item("phi", res.design.phi.clone())?;
        out.set_item("r_x", to_rows(&res.design.r_x))?;
        out.set_item("objective", res.objective())?;
        out.set_item("bcrb", bcrb_core::bcrb_theta(&self.scene, &self.config, &res.design))?;
        out.set_item("outer_iters", res.outer_iters)?;
        out.set_item("converged", res.termination == bcrb_core::optimizer::Termination::Converged)?;
        let trace: Vec<(usize, String, f64)> = res
            .trace
            .iter()
            .map(|t| (t.outer_iter, t.stage.to_string(), t.objective))
            .collect();
        out.set_item("trace", trace)?;
        Ok(out)
    }

    /// Objective and BCRB of each scheme on this scene, as a list of dicts.
    #[pyo3(signature = (schemes=None, n_restarts=8, seed=2025, random_phase_draws=100, depolarized_no_pra=false))]
    fn compare<'py>(
        &self,
        py: Python<'py>,
        schemes: Option<Vec<String>>,
        n_restarts: usize,
        seed: u64,
        random_phase_draws: usize,
        depolarized_no_pra: bool,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let ids = match schemes {
            Some(names) => names
                .iter()
                .map(|s| s.parse::<SchemeId>())
                .collect::<bcrb_core::Result<Vec<_>>>()
                .map_err(py_err)?,
            None => SchemeId::ALL.to_vec(),
        };
        let settings = AoSettings {
            n_restarts,
            rng_seed: seed,
            ..Default::default()
        };
        let options = BenchmarkOptions {
            random_phase_draws,
            no_pra_gain: if depolarized_no_pra { NoPraGain::Depolarized } else { NoPraGain::Unit },
        };
        let results = py
            .detach(|| compare_schemes(&ids, &self.scene, &self.config, &settings, &options))
            .map_err(py_err)?;
        results
            .iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("scheme", r.scheme.as_str())?;
                d.set_item("objective", r.objective)?;
                d.set_item("objective_stderr", r.objective_stderr)?;
                d.set_item("bcrb", r.bcrb)?;
                d.set_item("bcrb_stderr", r.bcrb_stderr)?;
                Ok(d)
            })
            .collect()
    }
}

impl PyScene {
    fn design(&self, xi: Vec<f64>, phi: Vec<f64>, r_x: Vec<Vec<Complex64>>) -> PyResult<Design> {
        let d = Design::new(xi, phi, from_rows(r_x)?);
        d.validate(&self.config).map_err(py_err)?;
        Ok(d)
    }
}

#[pyfunction]
fn dbm_to_watts(dbm: f64) -> f64 {
    dbm_to_w(dbm)
}

#[pymodule]
fn pra_bcrb(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScene>()?;
    m.add_function(wrap_pyfunction!(dbm_to_watts, m)?)?;
    m.add("SCHEMES", SchemeId::ALL.iter().map(|s| s.as_str()).collect::<Vec<_>>())?;
    Ok(())
}
