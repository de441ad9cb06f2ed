//! Adaptive Simpson quadrature, used to cross-check ensemble averages of
//! one-dimensional problems against deterministic integrals.

use crate::error::{Error, Result};
use crate::model::CoefficientModel;

/// `int_a^b f` to absolute tolerance `tol` by recursive Simpson bisection.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, b - a), tol, 50)
}

/// `int g dmu` for a one-dimensional model, `mu ~ exp(-U)`, integrating over
/// `[-half_width, half_width]` split into unit cells.
pub fn stationary_expectation_1d(model: &CoefficientModel, g: &dyn Fn(f64) -> f64, half_width: f64) -> Result<f64> {
    if model.dim() != 1 {
        return Err(Error::Unsupported(format!("quadrature needs a 1-d model, got d = {}", model.dim())));
    }
    let c = model.coefficients();
    let density = |x: f64| (-c.potential(&[x])).exp();
    let cells = (2.0 * half_width).ceil() as usize;
    let width = 2.0 * half_width / cells as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..cells {
        let a = -half_width + k as f64 * width;
        num += adaptive_simpson(&|x| g(x) * density(x), a, a + width, 1e-12);
        den += adaptive_simpson(&density, a, a + width, 1e-12);
    }
    Ok(num / den)
}
