//! Small numerical kernels shared by the rest of the crate: composite
//! Gauss-Legendre quadrature over the support of the angle prior, the
//! dominant eigenpair of a Hermitian PSD matrix, and the Kronecker product.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use num_complex::Complex64;

use crate::model::PriorModel;
use crate::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;
/// 2×2 complex matrix (polarization domain).
pub type Mat2 = Matrix2<Complex64>;
/// Complex 2-vector (per-antenna polarforming vector).
pub type Vec2 = Vector2<Complex64>;

/// Half-width of the integration window around each mixture mean, in
/// standard deviations.
pub const SIGMA_SPAN: f64 = 8.0;

pub const DEFAULT_NODES_PER_SEGMENT: usize = 64;
pub const DEFAULT_EIG_TOL: f64 = 1e-10;
pub const DEFAULT_EIG_MAX_ITER: usize = 10_000;

/// Composite quadrature rule on a union of disjoint intervals.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Disjoint, sorted intervals covered by the rule.
    pub domain: Vec<(f64, f64)>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn domain_length(&self) -> f64 {
        self.domain.iter().map(|(a, b)| b - a).sum()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Builds a composite Gauss-Legendre rule covering `[μ_k − 8σ_k, μ_k + 8σ_k]`
/// for every mixture component, with overlapping windows merged.
///
/// Each merged segment is split into equal panels no wider than twice the
/// smallest component standard deviation; every panel carries
/// `nodes_per_segment` Gauss-Legendre nodes.
pub fn make_quadrature(prior: &PriorModel, nodes_per_segment: usize) -> Result<QuadratureRule> {
    if nodes_per_segment < 2 {
        return Err(Error::invalid(
            "nodes_per_segment",
            format!("must be at least 2, got {nodes_per_segment}"),
        ));
    }
    if prior.components.is_empty() {
        return Err(Error::invalid("prior.components", "at least one component required"));
    }

    let mut windows: Vec<(f64, f64)> = prior
        .components
        .iter()
        .map(|c| {
            let s = c.variance.sqrt();
            (c.mean - SIGMA_SPAN * s, c.mean + SIGMA_SPAN * s)
        })
        .collect();
    windows.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut domain: Vec<(f64, f64)> = Vec::with_capacity(windows.len());
    for (a, b) in windows {
        match domain.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => domain.push((a, b)),
        }
    }

    let sigma_min = prior
        .components
        .iter()
        .map(|c| c.variance.sqrt())
        .fold(f64::INFINITY, f64::min);
    let panel_width = 2.0 * sigma_min;

    // nodes_per_segment >= 2 checked above
    let gl = GaussLegendre::new(NonZeroUsize::new(nodes_per_segment).unwrap());
    let reference = gl.as_node_weight_pairs();

    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for &(a, b) in &domain {
        let panels = ((b - a) / panel_width).ceil().max(1.0) as usize;
        let h = (b - a) / panels as f64;
        for p in 0..panels {
            let lo = a + p as f64 * h;
            let half = 0.5 * h;
            let mid = lo + half;
            for &(x, w) in reference {
                nodes.push(mid + half * x);
                weights.push(half * w);
            }
        }
    }

    Ok(QuadratureRule { nodes, weights, domain })
}

/// Weighted sum `Σ_i w_i f(θ_i)` of a matrix-valued integrand.
pub fn integrate_matrix<F>(rule: &QuadratureRule, mut f: F) -> Result<CMatrix>
where
    F: FnMut(f64) -> CMatrix,
{
    let mut acc: Option<CMatrix> = None;
    for (x, w) in rule.iter() {
        let v = f(x);
        match acc.as_mut() {
            None => acc = Some(v * Complex64::from(w)),
            Some(s) => {
                if s.shape() != v.shape() {
                    return Err(Error::mismatch(
                        format!("{:?}", s.shape()),
                        format!("{:?} at θ = {x}", v.shape()),
                    ));
                }
                s.zip_apply(&v, |a, b| *a += b * w);
            }
        }
    }
    acc.ok_or_else(|| Error::invalid("rule", "quadrature rule has no nodes"))
}

/// Dominant eigenpair of a Hermitian PSD matrix.
#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: CVector,
}

/// Power iteration for the largest eigenvalue of a Hermitian PSD matrix.
///
/// The iteration starts from a fixed vector (all ones plus a small fixed
/// complex ripple, so it is never exactly orthogonal to a symmetric
/// eigenvector). Whenever 64 consecutive steps fail to meet the tolerance the
/// iterated operator is squared, which raises the eigenvalue ratio to the
/// next power of two; the residual is always measured against `h` itself.
/// The returned vector is unit-norm with its largest entry real positive.
pub fn top_hermitian_eigenpair(h: &CMatrix, tol: f64, max_iter: usize) -> Result<Eigenpair> {
    let n = h.nrows();
    if n == 0 || h.ncols() != n {
        return Err(Error::mismatch("square matrix", format!("{}×{}", h.nrows(), h.ncols())));
    }
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("top_hermitian_eigenpair input"));
    }

    let norm = h.norm();
    if norm <= tol {
        let v = CVector::from_element(n, Complex64::new(1.0 / (n as f64).sqrt(), 0.0));
        return Ok(Eigenpair { value: 0.0, vector: v });
    }

    let mut op = h / Complex64::from(norm);
    let mut v = start_vector(n);
    let mut residual = f64::INFINITY;
    let mut since_squaring = 0;
    let mut squarings = 0;
    let mut perturbations = 0;

    for _ in 0..max_iter {
        let w = &op * &v;
        let wn = w.norm();
        if wn <= f64::MIN_POSITIVE * 1e3 || !wn.is_finite() {
            // Stagnated in (numerical) null space: nudge deterministically.
            perturbations += 1;
            v = perturb(&v, perturbations);
            continue;
        }
        v = w / Complex64::from(wn);

        let hv = h * &v;
        let lambda = v.dotc(&hv).re;
        residual = (&hv - &v * Complex64::from(lambda)).norm();
        if residual <= tol * lambda.max(0.0) {
            return Ok(Eigenpair {
                value: lambda,
                vector: canonical_phase(v),
            });
        }

        since_squaring += 1;
        if since_squaring >= 64 && squarings < 48 {
            op = &op * &op;
            let s = op.norm();
            if s > 0.0 && s.is_finite() {
                op /= Complex64::from(s);
            }
            squarings += 1;
            since_squaring = 0;
        }
    }

    Err(Error::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

fn start_vector(n: usize) -> CVector {
    let v = CVector::from_fn(n, |k, _| {
        let t = 0.618_033_988_749_895 * (k as f64 + 1.0);
        Complex64::new(1.0, 0.0) + Complex64::from_polar(1e-2, std::f64::consts::TAU * t)
    });
    let nv = v.norm();
    v / Complex64::from(nv)
}

fn perturb(v: &CVector, round: usize) -> CVector {
    let n = v.len();
    let p = CVector::from_fn(n, |k, _| {
        let t = 0.754_877_666_246_693 * ((k + 1) * (round + 1)) as f64;
        Complex64::from_polar(1.0, std::f64::consts::TAU * t.fract())
    });
    let w = v + p * Complex64::from(1e-3 * round as f64);
    let nw = w.norm();
    w / Complex64::from(nw)
}

fn canonical_phase(mut v: CVector) -> CVector {
    let pivot = v
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(Complex64::new(1.0, 0.0));
    if pivot.norm() > 0.0 {
        let rot = pivot.conj() / pivot.norm();
        v *= rot;
    }
    v
}

/// Standard Kronecker product: block `(i, j)` of the result is `a[(i, j)]·b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Embeds a 2×2 matrix into the dynamic matrix type.
pub fn mat2_to_dynamic(m: &Mat2) -> CMatrix {
    CMatrix::from_fn(2, 2, |i, j| m[(i, j)])
}

/// `Re tr(A R A^H)` without forming the product explicitly.
pub fn quadratic_trace(a: &CMatrix, r: &CMatrix) -> f64 {
    let ar = a * r;
    ar.iter().zip(a.iter()).map(|(x, y)| (x * y.conj()).re).sum()
}
