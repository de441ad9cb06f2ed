//! Pathwise Euler-Maruyama integration of the diffusion, exit times,
//! stationary sampling and Monte-Carlo semigroup values.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{CoefficientModel, EvalScratch, StationaryLaw};
use crate::rng::{derive_seed, fill_normals, path_rng};
use crate::stats::{Estimate, Moments};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_R_GUARD: f64 = 1e6;

/// Number of steps of size `dt` covering `horizon` exactly.
pub fn steps_for(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be nonnegative, got {horizon}")));
    }
    let n = (horizon / dt).round();
    if (n * dt - horizon).abs() > 1e-9 * horizon.max(dt) {
        return Err(Error::InvalidArgument(format!("horizon {horizon} is not a multiple of dt = {dt}")));
    }
    Ok(n as usize)
}

/// Brownian increments on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerGrid {
    dim: usize,
    dt: f64,
    increments: Vec<f64>,
    seed: u64,
    path_index: u64,
}

impl WienerGrid {
    /// Draws `count` increments with law `N(0, dt I)` from the stream of
    /// `path_index` under `seed`.
    pub fn sample(dim: usize, count: usize, dt: f64, seed: u64, path_index: u64) -> Self {
        let mut increments = vec![0.0; dim * count];
        fill_normals(&mut path_rng(seed, path_index), &mut increments, dt.sqrt());
        Self { dim, dt, increments, seed, path_index }
    }

    pub fn zeros(dim: usize, count: usize, dt: f64) -> Self {
        Self { dim, dt, increments: vec![0.0; dim * count], seed: 0, path_index: 0 }
    }

    pub fn from_increments(dim: usize, dt: f64, increments: Vec<f64>) -> Result<Self> {
        if dim == 0 || !increments.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument("increment buffer is not a whole number of vectors".into()));
        }
        Ok(Self { dim, dt, increments, seed: 0, path_index: 0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn count(&self) -> usize {
        self.increments.len() / self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    pub fn increment(&self, k: usize) -> &[f64] {
        &self.increments[k * self.dim..(k + 1) * self.dim]
    }

    /// `w(t_k)` as the running sum of the first `k` increments.
    pub fn value_at(&self, k: usize) -> Vec<f64> {
        let mut w = vec![0.0; self.dim];
        for m in 0..k {
            for (wi, dwi) in w.iter_mut().zip(self.increment(m)) {
                *wi += dwi;
            }
        }
        w
    }
}

/// A discretized path `X(t_k; x0)` with the noise that drove it.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: usize,
    dt: f64,
    states: Vec<f64>,
    noise: WienerGrid,
    exited: bool,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of stored states, including the start.
    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.len() - 1
    }

    pub fn start(&self) -> &[f64] {
        self.state(0)
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn last(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn noise(&self) -> &WienerGrid {
        &self.noise
    }

    /// True when integration stopped because the guard radius was exceeded.
    pub fn exited(&self) -> bool {
        self.exited
    }
}

/// Runs `X_{k+1} = X_k + drift(X_k) dt + dw_k` up to `horizon`.
///
/// Integration stops early, with the exit flag set, at the first state whose
/// norm exceeds `r_guard`.
pub fn simulate_path(
    model: &CoefficientModel,
    x0: &[f64],
    horizon: f64,
    dt: f64,
    noise: &WienerGrid,
    r_guard: f64,
) -> Result<Trajectory> {
    let d = model.dim();
    if x0.len() != d || noise.dim() != d {
        return Err(Error::InvalidArgument(format!(
            "dimension mismatch: model {d}, start {}, noise {}",
            x0.len(),
            noise.dim()
        )));
    }
    let n = steps_for(horizon, dt)?;
    if noise.count() < n {
        return Err(Error::GridMismatch(format!("need {n} increments, noise has {}", noise.count())));
    }
    if (noise.dt() - dt).abs() > 1e-12 * dt {
        return Err(Error::GridMismatch(format!("noise step {} differs from dt {dt}", noise.dt())));
    }
    if !linalg::all_finite(x0) {
        return Err(Error::Integration { step: 0, message: "non-finite start".into() });
    }
    let mut states = Vec::with_capacity((n + 1) * d);
    states.extend_from_slice(x0);
    let mut x = x0.to_vec();
    let mut drift = vec![0.0; d];
    let mut scratch = EvalScratch::new(d);
    let mut exited = linalg::norm(&x) > r_guard;
    if !exited {
        for k in 0..n {
            model
                .total_drift_into(&x, &mut drift, &mut scratch)
                .map_err(|e| Error::Integration { step: k, message: e.to_string() })?;
            for ((xi, bi), dwi) in x.iter_mut().zip(&drift).zip(noise.increment(k)) {
                *xi += bi * dt + dwi;
            }
            if !linalg::all_finite(&x) {
                return Err(Error::Integration { step: k + 1, message: "state became non-finite".into() });
            }
            states.extend_from_slice(&x);
            if linalg::norm(&x) > r_guard {
                exited = true;
                break;
            }
        }
    }
    Ok(Trajectory { dim: d, dt, states, noise: noise.clone(), exited })
}

/// First grid time with `|X_k| >= radius`.
pub fn exit_time(traj: &Trajectory, radius: f64) -> Option<f64> {
    (0..traj.len()).find(|&k| linalg::norm(traj.state(k)) >= radius).map(|k| traj.time(k))
}

/// Path-level Monte-Carlo settings shared by all estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSettings {
    pub paths: usize,
    /// Index of the first path; shards use disjoint index ranges.
    pub first_path: u64,
    pub dt: f64,
    pub seed: u64,
    pub r_guard: f64,
}

impl Default for PathSettings {
    fn default() -> Self {
        Self { paths: 10_000, first_path: 0, dt: DEFAULT_DT, seed: 0, r_guard: DEFAULT_R_GUARD }
    }
}

impl PathSettings {
    pub fn new(paths: usize, dt: f64, seed: u64) -> Self {
        Self { paths, dt, seed, ..Self::default() }
    }

    pub fn with_paths(&self, paths: usize) -> Self {
        Self { paths, ..self.clone() }
    }

    pub fn with_dt(&self, dt: f64) -> Self {
        Self { dt, ..self.clone() }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn noise(&self, dim: usize, steps: usize, path: u64) -> WienerGrid {
        WienerGrid::sample(dim, steps, self.dt, self.seed, path)
    }

    /// Evaluates `f` on every path index in parallel; results come back in
    /// path order whatever the thread count.
    pub fn map_paths<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64) -> Result<T> + Sync + Send,
    {
        let first = self.first_path;
        (0..self.paths as u64).into_par_iter().map(|i| f(first + i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StationaryMethod {
    /// Direct draws from the closed-form stationary law.
    Exact,
    /// Metropolis-adjusted Langevin on the reversible part of the dynamics.
    Langevin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LangevinOptions {
    /// Burn-in per chain, in time units.
    pub burn_in: f64,
    /// Spacing between retained samples, in time units.
    pub thin: f64,
    /// Proposal time step.
    pub step: f64,
    pub chains: usize,
}

impl Default for LangevinOptions {
    fn default() -> Self {
        Self { burn_in: 1000.0, thin: 1.0, step: 0.05, chains: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Exact,
    BurnIn,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SamplerDiagnostics {
    pub acceptance_rate: Option<f64>,
    pub burn_in: Option<f64>,
    pub warning: Option<String>,
}

/// Points approximately distributed according to `mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryEnsemble {
    dim: usize,
    points: Vec<f64>,
    pub provenance: Provenance,
    pub diagnostics: SamplerDiagnostics,
}

impl StationaryEnsemble {
    pub fn from_points(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 || !points.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument("point buffer is not a whole number of vectors".into()));
        }
        Ok(Self { dim, points, provenance: Provenance::Exact, diagnostics: SamplerDiagnostics::default() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.dim..(k + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    /// The first `n` points (all of them if `n` exceeds the size).
    pub fn truncated(&self, n: usize) -> StationaryEnsemble {
        let n = n.min(self.len());
        StationaryEnsemble {
            dim: self.dim,
            points: self.points[..n * self.dim].to_vec(),
            provenance: self.provenance,
            diagnostics: self.diagnostics.clone(),
        }
    }

    /// Applies `f` to every point, preserving order.
    pub fn map<T: Send>(&self, f: impl Fn(&[f64]) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
        self.points.par_chunks_exact(self.dim).map(f).collect()
    }
}

const STATIONARY_SALT: u64 = 0x5354_4154;

/// Draws `count` points from `mu`.
///
/// The Langevin route drops the antisymmetric drift: `mu` is also invariant
/// for the reversible part, and only that part admits a Metropolis
/// correction with a closed-form target.
pub fn sample_stationary(
    model: &CoefficientModel,
    count: usize,
    method: StationaryMethod,
    options: &LangevinOptions,
    seed: u64,
) -> Result<StationaryEnsemble> {
    let d = model.dim();
    let seed = derive_seed(seed, STATIONARY_SALT);
    match method {
        StationaryMethod::Exact => {
            if model.stationary_law() != StationaryLaw::StandardGaussian {
                return Err(Error::NoExactSampler);
            }
            let mut points = vec![0.0; count * d];
            fill_normals(&mut path_rng(seed, 0), &mut points, 1.0);
            Ok(StationaryEnsemble {
                dim: d,
                points,
                provenance: Provenance::Exact,
                diagnostics: SamplerDiagnostics::default(),
            })
        }
        StationaryMethod::Langevin => {
            let chains = options.chains.max(1);
            let h = options.step;
            if !(h > 0.0) || options.thin < h || options.burn_in < 0.0 {
                return Err(Error::InvalidArgument("Langevin step, thinning and burn-in must be positive".into()));
            }
            let burn_steps = (options.burn_in / h).round() as usize;
            let thin_steps = ((options.thin / h).round() as usize).max(1);
            let per_chain = count.div_ceil(chains);
            let results: Vec<(Vec<f64>, u64, u64)> = (0..chains as u64)
                .into_par_iter()
                .map(|c| run_mala(model, per_chain, burn_steps, thin_steps, h, seed, c))
                .collect::<Result<_>>()?;
            let mut points = vec![0.0; count * d];
            for (i, chunk) in points.chunks_exact_mut(d).enumerate() {
                let (chain, sample) = (i % chains, i / chains);
                chunk.copy_from_slice(&results[chain].0[sample * d..(sample + 1) * d]);
            }
            let accepted: u64 = results.iter().map(|r| r.1).sum();
            let proposed: u64 = results.iter().map(|r| r.2).sum();
            let rate = accepted as f64 / proposed.max(1) as f64;
            let warning = (rate < 0.1).then(|| format!("low Metropolis acceptance rate {rate:.3}"));
            Ok(StationaryEnsemble {
                dim: d,
                points,
                provenance: Provenance::BurnIn,
                diagnostics: SamplerDiagnostics { acceptance_rate: Some(rate), burn_in: Some(options.burn_in), warning },
            })
        }
    }
}

fn run_mala(
    model: &CoefficientModel,
    samples: usize,
    burn_steps: usize,
    thin_steps: usize,
    h: f64,
    seed: u64,
    chain: u64,
) -> Result<(Vec<f64>, u64, u64)> {
    let d = model.dim();
    let coeffs = model.coefficients();
    let mut rng = path_rng(seed, chain);
    let mut x = vec![0.0; d];
    let mut grad_x = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut grad_y = vec![0.0; d];
    let mut z = vec![0.0; d];
    coeffs.grad_potential(&x, &mut grad_x);
    let mut u_x = coeffs.potential(&x);
    let mut out = Vec::with_capacity(samples * d);
    let (mut accepted, mut proposed) = (0u64, 0u64);
    let total = burn_steps + samples * thin_steps;
    // log q(to | from) up to a constant, proposal mean from - h/2 grad U(from)
    let log_q = |to: &[f64], from: &[f64], grad_from: &[f64]| -> f64 {
        to.iter()
            .zip(from)
            .zip(grad_from)
            .map(|((t, f), g)| {
                let r = t - f + 0.5 * h * g;
                r * r
            })
            .sum::<f64>()
            / (-2.0 * h)
    };
    for step in 1..=total {
        fill_normals(&mut rng, &mut z, h.sqrt());
        for i in 0..d {
            y[i] = x[i] - 0.5 * h * grad_x[i] + z[i];
        }
        coeffs.grad_potential(&y, &mut grad_y);
        let u_y = coeffs.potential(&y);
        let log_alpha = (u_x - u_y) + log_q(&x, &y, &grad_y) - log_q(&y, &x, &grad_x);
        proposed += 1;
        let u: f64 = rng.random();
        if log_alpha.is_finite() && u.ln() < log_alpha {
            std::mem::swap(&mut x, &mut y);
            std::mem::swap(&mut grad_x, &mut grad_y);
            u_x = u_y;
            accepted += 1;
        }
        if step > burn_steps && (step - burn_steps).is_multiple_of(thin_steps) {
            out.extend_from_slice(&x);
        }
    }
    if !linalg::all_finite(&out) {
        return Err(Error::Integration { step: total, message: "Langevin chain diverged".into() });
    }
    Ok((out, accepted, proposed))
}

/// Monte-Carlo value of `P_t f(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemigroupEstimate {
    pub estimate: Estimate,
    pub moments: Moments,
    pub paths: usize,
    /// Fraction of paths stopped by the guard; these are left out of the mean.
    pub exited_fraction: f64,
}

pub fn semigroup_estimate<F>(
    model: &CoefficientModel,
    f: F,
    x: &[f64],
    t: f64,
    settings: &PathSettings,
) -> Result<SemigroupEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    let d = model.dim();
    let n = steps_for(t, settings.dt)?;
    let values = settings.map_paths(|p| {
        let noise = settings.noise(d, n, p);
        let traj = simulate_path(model, x, t, settings.dt, &noise, settings.r_guard)?;
        Ok((!traj.exited()).then(|| f(traj.last())))
    })?;
    let mut moments = Moments::new();
    let mut exited = 0usize;
    for v in values {
        match v {
            Some(v) => moments.push(v),
            None => exited += 1,
        }
    }
    Ok(SemigroupEstimate {
        estimate: moments.estimate(),
        moments,
        paths: settings.paths,
        exited_fraction: exited as f64 / settings.paths.max(1) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Coordinate, Square, TestFunction, TestProblem};
    use approx::assert_abs_diff_eq;

    #[test]
    fn deterministic_ou_decay() {
        let model = TestProblem::Ou1d.model();
        let dt = 1e-4;
        let noise = WienerGrid::zeros(1, 10_000, dt);
        let traj = simulate_path(&model, &[1.0], 1.0, dt, &noise, DEFAULT_R_GUARD).unwrap();
        assert_eq!(traj.len(), 10_001);
        assert_abs_diff_eq!(traj.last()[0], (-0.5f64).exp(), epsilon = 1e-3);
        assert_eq!(traj.start(), &[1.0]);
    }

    #[test]
    fn critical_point_is_fixed() {
        let model = TestProblem::Dw1d.model();
        let noise = WienerGrid::zeros(1, 100, 0.01);
        let traj = simulate_path(&model, &[1.0], 1.0, 0.01, &noise, DEFAULT_R_GUARD).unwrap();
        assert!((0..traj.len()).all(|k| traj.state(k) == [1.0]));
    }

    #[test]
    fn exit_time_examples() {
        let model = TestProblem::Ou1d.model();
        let zero = WienerGrid::zeros(1, 1000, 1e-3);
        let still = simulate_path(&model, &[0.0], 1.0, 1e-3, &zero, DEFAULT_R_GUARD).unwrap();
        assert_eq!(exit_time(&still, 1.0), None);
        let start_outside = simulate_path(&model, &[2.0], 1.0, 1e-3, &zero, DEFAULT_R_GUARD).unwrap();
        assert_eq!(exit_time(&start_outside, 1.5), Some(0.0));
        // leaving the ball [-R, R] from outside is not an exit; use the first
        // time the decaying path is inside instead: 2 e^{-t/2} = 1.5
        let inside = (0..start_outside.len()).find(|&k| start_outside.state(k)[0] <= 1.5).unwrap();
        assert_abs_diff_eq!(start_outside.time(inside), 2.0 * (4.0f64 / 3.0).ln(), epsilon = 2e-3);
    }

    #[test]
    fn guard_and_non_finite_paths() {
        let model = TestProblem::Dw1d.model();
        let noise = WienerGrid::sample(1, 10, 10.0, 1, 0);
        let traj = simulate_path(&model, &[1.5], 100.0, 10.0, &noise, DEFAULT_R_GUARD).unwrap();
        assert!(traj.exited());
        assert!(traj.len() < 11);
        let err = simulate_path(&model, &[1.5], 100.0, 10.0, &noise, f64::INFINITY).unwrap_err();
        assert!(matches!(err, Error::Integration { .. }), "{err}");
    }

    #[test]
    fn bad_grids_are_rejected() {
        let model = TestProblem::Ou1d.model();
        let noise = WienerGrid::zeros(1, 5, 0.1);
        assert!(matches!(simulate_path(&model, &[0.0], 1.0, 0.1, &noise, 1e6), Err(Error::GridMismatch(_))));
        assert!(simulate_path(&model, &[0.0], 0.5, -0.1, &noise, 1e6).is_err());
        assert!(steps_for(1.05, 0.1).is_err());
        assert_eq!(steps_for(1.0, 1e-3).unwrap(), 1000);
    }

    #[test]
    fn identical_seeds_give_identical_paths() {
        let model = TestProblem::Rot2d { h: 1.0 }.model();
        let a = simulate_path(&model, &[0.1, 0.2], 1.0, 1e-2, &WienerGrid::sample(2, 100, 1e-2, 9, 17), 1e6).unwrap();
        let b = simulate_path(&model, &[0.1, 0.2], 1.0, 1e-2, &WienerGrid::sample(2, 100, 1e-2, 9, 17), 1e6).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn constant_semigroup_has_zero_variance() {
        let model = TestProblem::Dw1d.model();
        let est = semigroup_estimate(&model, |_| 3.0, &[0.2], 0.5, &PathSettings::new(500, 1e-2, 1)).unwrap();
        assert_eq!(est.estimate.value, 3.0);
        assert_eq!(est.estimate.se, 0.0);
        assert_eq!(est.exited_fraction, 0.0);
    }

    #[test]
    fn ou_semigroup_matches_closed_forms() {
        let model = TestProblem::Ou1d.model();
        let settings = PathSettings::new(100_000, 1e-3, 11);
        let mean = semigroup_estimate(&model, |x| Coordinate(0).value(x), &[1.0], 1.0, &settings).unwrap();
        assert!(mean.estimate.within((-0.5f64).exp(), 3.0, 0.0), "{:?}", mean.estimate);
        let var = semigroup_estimate(&model, |x| Square(0).value(x), &[0.0], 1.0, &settings.with_seed(12)).unwrap();
        assert!(var.estimate.within(1.0 - (-1.0f64).exp(), 3.0, 0.0), "{:?}", var.estimate);
    }

    #[test]
    fn exact_sampler_requires_gaussian_law() {
        let dw = TestProblem::Dw1d.model();
        let err = sample_stationary(&dw, 10, StationaryMethod::Exact, &LangevinOptions::default(), 1).unwrap_err();
        assert!(matches!(err, Error::NoExactSampler));
    }
}
