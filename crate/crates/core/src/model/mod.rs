//! Coefficients `(U, H)` of the divergence-form operator and everything
//! derived from them pointwise: the non-reversible drift `b`, the curvature
//! matrix and its numerical-range supremum, and the operators `L`, `A` and
//! the full generator applied to test functions.

mod problems;
mod testfn;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;

pub use problems::{Dw1d, Ou1d, Rot2d, TestProblem, VarH2d};
pub use testfn::{battery, lookup, symmetry_pairs, Bump, Constant, Coordinate, CoordinateBump, Shifted, Square, TestFunction};

/// Relative step used when `grad b` has to be obtained by central differences.
pub const GRAD_B_FD_STEP: f64 = 1e-5;

/// Known closed form of the stationary law, when there is one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StationaryLaw {
    /// `U(x) = |x|^2 / 2`, so `mu` is the standard Gaussian on `R^d`.
    StandardGaussian,
    Unknown,
}

/// Evaluation routines for the potential `U` and the antisymmetric field `H`.
///
/// Matrices are written row-major into `out`. `grad_antisym` writes
/// `out[(k * d + i) * d + j] = d/dx_k H_ij`.
pub trait Coefficients: Send + Sync {
    fn dim(&self) -> usize;
    fn potential(&self, x: &[f64]) -> f64;
    fn grad_potential(&self, x: &[f64], out: &mut [f64]);
    fn hess_potential(&self, x: &[f64], out: &mut [f64]);
    fn antisym(&self, x: &[f64], out: &mut [f64]);
    fn grad_antisym(&self, x: &[f64], out: &mut [f64]);

    /// `b_j = sum_i (d_i H_ij - d_i U H_ij)`. Built-in problems override this
    /// with a closed form.
    fn drift_b(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let mut grad_u = vec![0.0; d];
        let mut h = vec![0.0; d * d];
        let mut grad_h = vec![0.0; d * d * d];
        self.grad_potential(x, &mut grad_u);
        self.antisym(x, &mut h);
        self.grad_antisym(x, &mut grad_h);
        for j in 0..d {
            out[j] = (0..d)
                .map(|i| grad_h[(i * d + i) * d + j] - grad_u[i] * h[i * d + j])
                .sum();
        }
    }

    /// Analytic Jacobian of `b`, `out[j * d + i] = d/dx_i b_j`. Return `false`
    /// when not available; the model then falls back to central differences.
    fn grad_drift_b(&self, _x: &[f64], _out: &mut [f64]) -> bool {
        false
    }

    fn normalizer(&self) -> Option<f64> {
        None
    }

    fn stationary_law(&self) -> StationaryLaw {
        StationaryLaw::Unknown
    }
}

/// Curvature matrix `-1/2 hess U + 1/2 grad b` at a point, together with the
/// supremum of its numerical range.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureEval {
    pub matrix: DMatrix<f64>,
    pub sup: f64,
}

/// Reusable buffers for the per-step derivative evaluations.
#[derive(Debug, Clone)]
pub struct EvalScratch {
    mat: Vec<f64>,
    vec_a: Vec<f64>,
    vec_b: Vec<f64>,
    point: Vec<f64>,
}

impl EvalScratch {
    pub fn new(dim: usize) -> Self {
        Self {
            mat: vec![0.0; dim * dim],
            vec_a: vec![0.0; dim],
            vec_b: vec![0.0; dim],
            point: vec![0.0; dim],
        }
    }
}

/// Shared handle to a set of coefficients. Cheap to clone and safe to use
/// from many threads.
#[derive(Clone)]
pub struct CoefficientModel {
    name: String,
    inner: Arc<dyn Coefficients>,
}

impl fmt::Debug for CoefficientModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientModel")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .finish()
    }
}

fn check(what: &'static str, x: &[f64], values: &[f64]) -> Result<()> {
    if linalg::all_finite(values) {
        Ok(())
    } else {
        Err(Error::NonFinite { what, x: x.to_vec() })
    }
}

impl CoefficientModel {
    pub fn new(name: impl Into<String>, coefficients: Arc<dyn Coefficients>) -> Self {
        Self { name: name.into(), inner: coefficients }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn coefficients(&self) -> &dyn Coefficients {
        self.inner.as_ref()
    }

    pub fn normalizer(&self) -> Option<f64> {
        self.inner.normalizer()
    }

    pub fn stationary_law(&self) -> StationaryLaw {
        self.inner.stationary_law()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "point has dimension {}, model has dimension {}",
                x.len(),
                self.dim()
            )));
        }
        if !linalg::all_finite(x) {
            return Err(Error::NonFinite { what: "point", x: x.to_vec() });
        }
        Ok(())
    }

    pub fn potential(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let u = self.inner.potential(x);
        check("potential", x, &[u])?;
        Ok(u)
    }

    pub fn grad_potential(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut out = vec![0.0; self.dim()];
        self.inner.grad_potential(x, &mut out);
        check("grad U", x, &out)?;
        Ok(out)
    }

    pub fn antisym(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(x)?;
        let d = self.dim();
        let mut out = vec![0.0; d * d];
        self.inner.antisym(x, &mut out);
        check("H", x, &out)?;
        Ok(linalg::to_matrix(d, &out))
    }

    pub fn drift_b(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut out = vec![0.0; self.dim()];
        self.inner.drift_b(x, &mut out);
        check("drift b", x, &out)?;
        Ok(out)
    }

    /// `-1/2 grad U + 1/2 b`, the drift of the diffusion.
    pub fn total_drift(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut out = vec![0.0; self.dim()];
        let mut scratch = EvalScratch::new(self.dim());
        self.total_drift_into(x, &mut out, &mut scratch)?;
        Ok(out)
    }

    pub(crate) fn total_drift_into(&self, x: &[f64], out: &mut [f64], scratch: &mut EvalScratch) -> Result<()> {
        let grad_u = &mut scratch.vec_a;
        self.inner.grad_potential(x, grad_u);
        self.inner.drift_b(x, out);
        for (o, g) in out.iter_mut().zip(grad_u.iter()) {
            *o = 0.5 * (*o - g);
        }
        check("total drift", x, out)
    }

    /// Writes `out[j * d + i] = d/dx_i b_j`, analytically when the
    /// coefficients provide it and by central differences otherwise.
    pub(crate) fn grad_b_into(&self, x: &[f64], out: &mut [f64], scratch: &mut EvalScratch) -> Result<()> {
        let d = self.dim();
        if !self.inner.grad_drift_b(x, out) {
            let step = GRAD_B_FD_STEP * (1.0 + linalg::norm(x));
            scratch.point.copy_from_slice(x);
            for i in 0..d {
                scratch.point[i] = x[i] + step;
                self.inner.drift_b(&scratch.point, &mut scratch.vec_a);
                scratch.point[i] = x[i] - step;
                self.inner.drift_b(&scratch.point, &mut scratch.vec_b);
                scratch.point[i] = x[i];
                for j in 0..d {
                    out[j * d + i] = (scratch.vec_a[j] - scratch.vec_b[j]) / (2.0 * step);
                }
            }
        }
        check("grad b", x, out)
    }

    /// Jacobian of the total drift, `-1/2 hess U + 1/2 grad b`, with row `i`
    /// holding the derivatives of drift component `i`.
    pub(crate) fn drift_jacobian_into(&self, x: &[f64], out: &mut [f64], scratch: &mut EvalScratch) -> Result<()> {
        let mut grad_b = std::mem::take(&mut scratch.mat);
        let res = self.grad_b_into(x, &mut grad_b, scratch);
        if res.is_ok() {
            self.inner.hess_potential(x, out);
            for (o, gb) in out.iter_mut().zip(&grad_b) {
                *o = 0.5 * (gb - *o);
            }
        }
        scratch.mat = grad_b;
        res?;
        check("curvature", x, out)
    }

    pub fn grad_b(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(x)?;
        let d = self.dim();
        let mut out = vec![0.0; d * d];
        self.grad_b_into(x, &mut out, &mut EvalScratch::new(d))?;
        Ok(linalg::to_matrix(d, &out))
    }

    pub fn curvature(&self, x: &[f64]) -> Result<CurvatureEval> {
        self.check_dim(x)?;
        let d = self.dim();
        let mut out = vec![0.0; d * d];
        self.drift_jacobian_into(x, &mut out, &mut EvalScratch::new(d))?;
        let full = linalg::to_matrix(d, &out);
        let sym = (&full + full.transpose()) * 0.5;
        let sup = sym.symmetric_eigenvalues().max();
        Ok(CurvatureEval { matrix: full, sup })
    }

    /// The numerical-range supremum only, without allocating the matrix.
    pub fn curvature_sup(&self, x: &[f64], scratch: &mut EvalScratch) -> Result<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d * d];
        self.drift_jacobian_into(x, &mut out, scratch)?;
        Ok(linalg::sym_part_max_eigenvalue(d, &out))
    }

    /// `1/2 Lap f - 1/2 grad U . grad f`.
    pub fn apply_l(&self, f: &dyn TestFunction, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let d = self.dim();
        let mut grad_f = vec![0.0; d];
        let mut hess_f = vec![0.0; d * d];
        f.gradient(x, &mut grad_f);
        f.hessian(x, &mut hess_f);
        let grad_u = self.grad_potential(x)?;
        let lap: f64 = (0..d).map(|i| hess_f[i * d + i]).sum();
        let v = 0.5 * lap - 0.5 * linalg::dot(&grad_u, &grad_f);
        check("L f", x, &[v])?;
        Ok(v)
    }

    /// `1/2 b . grad f`.
    pub fn apply_a(&self, f: &dyn TestFunction, x: &[f64]) -> Result<f64> {
        let b = self.drift_b(x)?;
        let mut grad_f = vec![0.0; self.dim()];
        f.gradient(x, &mut grad_f);
        let v = 0.5 * linalg::dot(&b, &grad_f);
        check("A f", x, &[v])?;
        Ok(v)
    }

    /// The full generator, `L f + A f`.
    pub fn apply_generator(&self, f: &dyn TestFunction, x: &[f64]) -> Result<f64> {
        Ok(self.apply_l(f, x)? + self.apply_a(f, x)?)
    }
}

/// Evaluates `1/2 e^U div[e^{-U} (I + H) grad f]` by central differences of
/// the flux, using only `U`, `H` and `grad f`. Independent of the `b`
/// decomposition, so it cross-checks [`CoefficientModel::apply_generator`].
pub fn divergence_form_fd(model: &CoefficientModel, f: &dyn TestFunction, x: &[f64], step: f64) -> Result<f64> {
    let d = model.dim();
    let coeffs = model.coefficients();
    let flux = |y: &[f64], i: usize| -> f64 {
        let mut h = vec![0.0; d * d];
        let mut g = vec![0.0; d];
        coeffs.antisym(y, &mut h);
        f.gradient(y, &mut g);
        let weight = (-coeffs.potential(y)).exp();
        let s: f64 = (0..d)
            .map(|j| {
                let delta = if i == j { 1.0 } else { 0.0 };
                (delta + h[i * d + j]) * g[j]
            })
            .sum();
        weight * s
    };
    let mut div = 0.0;
    let mut y = x.to_vec();
    for i in 0..d {
        y[i] = x[i] + step;
        let plus = flux(&y, i);
        y[i] = x[i] - step;
        let minus = flux(&y, i);
        y[i] = x[i];
        div += (plus - minus) / (2.0 * step);
    }
    let v = 0.5 * coeffs.potential(x).exp() * div;
    check("divergence form", x, &[v])?;
    Ok(v)
}

#[cfg(test)]
mod tests;
