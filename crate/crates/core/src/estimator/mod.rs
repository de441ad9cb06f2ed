//! Monte-Carlo estimators of `grad P_t f(x)`: the pathwise (Fréchet) route
//! `E[grad f(X(t))^T xi(t)]` and the integration-by-parts (Malliavin) route
//! `E[f(X(t0)) int_0^{t0} g dw]`, which never differentiates `f`.
//!
//! Every estimator works on a path range (`PathSettings::first_path`,
//! `paths`) and keeps raw moments, so shards computed separately merge
//! exactly into the full-range result.

use std::fmt;

use serde::Serialize;

use crate::control::{build_control, ControlPath, HorizonPolicy};
use crate::error::{Error, Result};
use crate::model::{CoefficientModel, TestFunction};
use crate::rng::derive_seed;
use crate::sde::{simulate_path, steps_for, PathSettings, StationaryEnsemble, Trajectory, WienerGrid};
use crate::stats::{Estimate, Moments};
use crate::variational::{drift_jacobian_path, fundamental_matrix, FundamentalMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Frechet,
    Malliavin,
    /// `-E[P_{t-t0} Lf(X(t0)) int g dw]`, the generator form used for decay.
    Generator,
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Route::Frechet => "frechet",
            Route::Malliavin => "malliavin",
            Route::Generator => "generator",
        })
    }
}

/// Componentwise Monte-Carlo estimate of a gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub route: Route,
    /// Time at which the gradient is taken (`t` or `t0`).
    pub t: f64,
    pub x: Vec<f64>,
    pub components: Vec<Moments>,
}

impl GradientEstimate {
    fn from_samples(route: Route, t: f64, x: &[f64], samples: &[Vec<f64>]) -> Self {
        let mut components = vec![Moments::new(); x.len()];
        for s in samples {
            for (m, v) in components.iter_mut().zip(s) {
                m.push(*v);
            }
        }
        Self { route, t, x: x.to_vec(), components }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn count(&self) -> u64 {
        self.components.first().map_or(0, Moments::count)
    }

    pub fn component(&self, j: usize) -> Estimate {
        self.components[j].estimate()
    }

    pub fn values(&self) -> Vec<f64> {
        self.components.iter().map(Moments::mean).collect()
    }

    pub fn std_errors(&self) -> Vec<f64> {
        self.components.iter().map(Moments::std_error).collect()
    }

    /// Combines with an estimate over a disjoint path range.
    pub fn merge(&mut self, other: &GradientEstimate) -> Result<()> {
        if self.route != other.route || self.t != other.t || self.x != other.x {
            return Err(Error::InvalidArgument("merging estimates of different quantities".into()));
        }
        for (a, b) in self.components.iter_mut().zip(&other.components) {
            a.merge(b);
        }
        Ok(())
    }
}

/// `(int_0^{t0} g dw)_j = sum_i sum_{t_k < t0} g_ij(t_k) dw_i(t_k)`, with the
/// integrand frozen at the left end of each increment.
pub fn ito_integral(control: &ControlPath, noise: &WienerGrid) -> Result<Vec<f64>> {
    let d = control.dim();
    if noise.dim() != d || (noise.dt() - control.dt()).abs() > 1e-12 * control.dt() || noise.count() < control.steps() {
        return Err(Error::GridMismatch(format!(
            "noise grid (d={}, dt={}, n={}) does not cover control grid (d={d}, dt={}, n={})",
            noise.dim(),
            noise.dt(),
            noise.count(),
            control.dt(),
            control.steps()
        )));
    }
    let mut out = vec![0.0; d];
    for k in 0..control.steps() {
        let g = control.node(k);
        let dw = noise.increment(k);
        for (i, dwi) in dw.iter().enumerate() {
            for (j, o) in out.iter_mut().enumerate() {
                *o += g[i * d + j] * dwi;
            }
        }
    }
    Ok(out)
}

fn complete_path(model: &CoefficientModel, x: &[f64], horizon: f64, settings: &PathSettings, p: u64) -> Result<Trajectory> {
    let steps = steps_for(horizon, settings.dt)?;
    let noise = settings.noise(model.dim(), steps, p);
    let traj = simulate_path(model, x, horizon, settings.dt, &noise, settings.r_guard)?;
    if traj.exited() {
        return Err(Error::Integration { step: traj.steps(), message: format!("path {p} left the guard ball") });
    }
    Ok(traj)
}

fn check_point(model: &CoefficientModel, x: &[f64]) -> Result<()> {
    if x.len() != model.dim() {
        return Err(Error::InvalidArgument(format!("point has {} coordinates, model needs {}", x.len(), model.dim())));
    }
    Ok(())
}

/// Sample of the Fréchet route: `sum_i d_i f(X(t)) xi_ij(t)` for every `j`.
fn frechet_sample(f: &dyn TestFunction, traj: &Trajectory, c: &FundamentalMatrix, grad: &mut [f64]) -> Vec<f64> {
    let d = traj.dim();
    f.gradient(traj.last(), grad);
    let xi = c.nodes.get(c.steps());
    (0..d).map(|j| (0..d).map(|i| grad[i] * xi[i * d + j]).sum()).collect()
}

/// One path up to `t0` with its fundamental matrix, control and stochastic
/// integral of the control.
struct MalliavinPath {
    traj: Trajectory,
    c: FundamentalMatrix,
    integral: Vec<f64>,
}

fn malliavin_path(
    model: &CoefficientModel,
    x: &[f64],
    policy: &HorizonPolicy,
    settings: &PathSettings,
    p: u64,
    negate_control: bool,
) -> Result<MalliavinPath> {
    let traj = complete_path(model, x, policy.t0, settings, p)?;
    let c = fundamental_matrix(&drift_jacobian_path(model, &traj)?)?;
    let mut control = build_control(&c, policy)?;
    if negate_control {
        control = control.negated();
    }
    let integral = ito_integral(&control, traj.noise())?;
    Ok(MalliavinPath { traj, c, integral })
}

/// `d_j P_t f(x) = E[grad f(X(t;x)) . xi_{.j}(t)]`.
pub fn grad_frechet(
    model: &CoefficientModel,
    f: &dyn TestFunction,
    x: &[f64],
    t: f64,
    settings: &PathSettings,
) -> Result<GradientEstimate> {
    check_point(model, x)?;
    let samples = settings.map_paths(|p| {
        let traj = complete_path(model, x, t, settings, p)?;
        let c = fundamental_matrix(&drift_jacobian_path(model, &traj)?)?;
        Ok(frechet_sample(f, &traj, &c, &mut vec![0.0; model.dim()]))
    })?;
    Ok(GradientEstimate::from_samples(Route::Frechet, t, x, &samples))
}

/// `d_j P_{t0} f(x) = E[f(X(t0;x)) (int_0^{t0} g dw)_j]`.
pub fn grad_malliavin(
    model: &CoefficientModel,
    f: &dyn TestFunction,
    x: &[f64],
    policy: &HorizonPolicy,
    settings: &PathSettings,
) -> Result<GradientEstimate> {
    check_point(model, x)?;
    let samples = settings.map_paths(|p| {
        let path = malliavin_path(model, x, policy, settings, p, false)?;
        let fx = f.value(path.traj.last());
        Ok(path.integral.iter().map(|v| fx * v).collect::<Vec<_>>())
    })?;
    Ok(GradientEstimate::from_samples(Route::Malliavin, policy.t0, x, &samples))
}

/// Both routes on common random numbers for one test function.
#[derive(Debug, Clone, PartialEq)]
pub struct IbpReport {
    pub f_id: String,
    pub x: Vec<f64>,
    pub t0: f64,
    pub frechet: GradientEstimate,
    pub malliavin: GradientEstimate,
    /// Mean and standard error of the paired differences, per component.
    pub residual: Vec<Estimate>,
}

impl IbpReport {
    /// `|residual_j| <= 3 SE_j` for every component (with a round-off floor).
    /// Every residual component within 3 SE of zero.
    pub fn passes(&self) -> bool {
        self.passes_at(3.0)
    }

    /// Every residual component within `z` SE of zero.
    pub fn passes_at(&self, z: f64) -> bool {
        self.residual.iter().all(|r| r.within(0.0, z, 1e-12))
    }

    /// Largest `|residual_j| / SE_j`.
    pub fn worst_z(&self) -> f64 {
        self.residual
            .iter()
            .map(|r| if r.se > 0.0 { r.value.abs() / r.se } else if r.value.abs() > 1e-12 { f64::INFINITY } else { 0.0 })
            .fold(0.0, f64::max)
    }
}

/// Runs the Fréchet and Malliavin routes on the same paths for every
/// function in `functions`. `negate_control` flips the sign of the control
/// (a deliberately wrong estimator, used as a negative check).
pub fn ibp_identity_check(
    model: &CoefficientModel,
    functions: &[&dyn TestFunction],
    x: &[f64],
    policy: &HorizonPolicy,
    settings: &PathSettings,
    negate_control: bool,
) -> Result<Vec<IbpReport>> {
    check_point(model, x)?;
    let d = model.dim();
    let per_path = settings.map_paths(|p| {
        let path = malliavin_path(model, x, policy, settings, p, negate_control)?;
        let mut grad = vec![0.0; d];
        Ok(functions
            .iter()
            .map(|f| {
                let fr = frechet_sample(*f, &path.traj, &path.c, &mut grad);
                let fx = f.value(path.traj.last());
                let ml: Vec<f64> = path.integral.iter().map(|v| fx * v).collect();
                (fr, ml)
            })
            .collect::<Vec<_>>())
    })?;
    let mut reports = Vec::with_capacity(functions.len());
    for (n, f) in functions.iter().enumerate() {
        let fr: Vec<Vec<f64>> = per_path.iter().map(|s| s[n].0.clone()).collect();
        let ml: Vec<Vec<f64>> = per_path.iter().map(|s| s[n].1.clone()).collect();
        let residual = (0..d)
            .map(|j| Moments::from_slice(&fr.iter().zip(&ml).map(|(a, b)| a[j] - b[j]).collect::<Vec<_>>()).estimate())
            .collect();
        reports.push(IbpReport {
            f_id: f.id(),
            x: x.to_vec(),
            t0: policy.t0,
            frechet: GradientEstimate::from_samples(Route::Frechet, policy.t0, x, &fr),
            malliavin: GradientEstimate::from_samples(Route::Malliavin, policy.t0, x, &ml),
            residual,
        });
    }
    Ok(reports)
}

/// `v_j(t) = -E[P_{t-t0} Lf(X(t0;x)) (int g dw)_j]` for `t >= t0`, the inner
/// semigroup value estimated from `inner_paths` paths per outer path (exact
/// evaluation of `Lf` when `t = t0`). Standard errors come from the spread of
/// the outer samples, which already contains the inner noise.
pub fn grad_generator_variant(
    model: &CoefficientModel,
    f: &dyn TestFunction,
    x: &[f64],
    policy: &HorizonPolicy,
    t: f64,
    inner_paths: usize,
    settings: &PathSettings,
) -> Result<GradientEstimate> {
    check_point(model, x)?;
    if t < policy.t0 - 1e-12 {
        return Err(Error::InvalidArgument(format!("t = {t} precedes t0 = {}", policy.t0)));
    }
    if inner_paths == 0 {
        return Err(Error::InvalidArgument("inner_paths must be positive".into()));
    }
    let lag = (t - policy.t0).max(0.0);
    let inner_steps = if lag > 0.0 { steps_for(lag, settings.dt)? } else { 0 };
    let samples = settings.map_paths(|p| {
        let path = malliavin_path(model, x, policy, settings, p, false)?;
        let y = path.traj.last();
        let inner = if inner_steps == 0 {
            model.apply_generator(f, y)?
        } else {
            let inner_seed = derive_seed(settings.seed, p + 1);
            let mut acc = 0.0;
            for m in 0..inner_paths as u64 {
                let noise = WienerGrid::sample(model.dim(), inner_steps, settings.dt, inner_seed, m);
                let traj = simulate_path(model, y, lag, settings.dt, &noise, settings.r_guard)?;
                if traj.exited() {
                    return Err(Error::Integration { step: traj.steps(), message: "inner path left the guard ball".into() });
                }
                acc += model.apply_generator(f, traj.last())?;
            }
            acc / inner_paths as f64
        };
        Ok(path.integral.iter().map(|v| -inner * v).collect::<Vec<_>>())
    })?;
    Ok(GradientEstimate::from_samples(Route::Generator, t, x, &samples))
}

/// Hölder step of the moment chain on a stationary sample: with `G(eta)` the
/// per-start average of `f(X(t0)) int g dw`, checks
/// `||G||_p <= ||f(X(t0))||_q (E|int g dw|^r)^{1/r}` on the empirical measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderChainReport {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub gradient_norm_p: f64,
    pub f_norm_q: f64,
    pub integral_moment_r: f64,
    pub bound: f64,
}

impl HolderChainReport {
    pub fn holds(&self) -> bool {
        self.gradient_norm_p <= self.bound * (1.0 + 1e-12) + 1e-300
    }
}

#[allow(clippy::too_many_arguments)]
pub fn holder_chain_check(
    model: &CoefficientModel,
    f: &dyn TestFunction,
    ensemble: &StationaryEnsemble,
    policy: &HorizonPolicy,
    p: f64,
    q: f64,
    paths_per_point: usize,
    settings: &PathSettings,
) -> Result<HolderChainReport> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if !(p >= 1.0 && q > p) {
        return Err(Error::InvalidArgument(format!("need 1 <= p < q, got p = {p}, q = {q}")));
    }
    if paths_per_point == 0 {
        return Err(Error::InvalidArgument("paths_per_point must be positive".into()));
    }
    let r = 1.0 / (1.0 / p - 1.0 / q);
    let all = settings.with_paths(ensemble.len() * paths_per_point);
    let samples = all.map_paths(|path_index| {
        let start = ensemble.point((path_index - all.first_path) as usize / paths_per_point);
        let path = malliavin_path(model, start, policy, &all, path_index, false)?;
        Ok((f.value(path.traj.last()), path.integral))
    })?;
    let d = model.dim();
    let count = samples.len() as f64;
    let mut f_q = 0.0;
    let mut int_r = 0.0;
    for (fx, integral) in &samples {
        f_q += fx.abs().powf(q);
        int_r += crate::linalg::norm(integral).powf(r);
    }
    let mut grad_p = 0.0;
    for chunk in samples.chunks(paths_per_point) {
        let mut g = vec![0.0; d];
        for (fx, integral) in chunk {
            for (gj, v) in g.iter_mut().zip(integral) {
                *gj += fx * v / chunk.len() as f64;
            }
        }
        grad_p += crate::linalg::norm(&g).powf(p);
    }
    let gradient_norm_p = (grad_p / ensemble.len() as f64).powf(1.0 / p);
    let f_norm_q = (f_q / count).powf(1.0 / q);
    let integral_moment_r = (int_r / count).powf(1.0 / r);
    Ok(HolderChainReport { p, q, r, gradient_norm_p, f_norm_q, integral_moment_r, bound: f_norm_q * integral_moment_r })
}
