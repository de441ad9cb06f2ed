//! The adapted control `g(t; t0) = C(t, 0) / t0` on `[0, t0)`, zero after,
//! which makes the Malliavin and Fréchet derivatives of the flow coincide
//! from `t0` on. Also the pathwise Gronwall bound on its columns and the
//! trace-moment estimate that certifies its integrability.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, MatrixGrid};
use crate::model::{CoefficientModel, EvalScratch};
use crate::sde::{simulate_path, steps_for, PathSettings, StationaryEnsemble, Trajectory};
use crate::stats::{Estimate, Moments};
use crate::variational::{drift_jacobian_path, fundamental_matrix, FundamentalMatrix};

/// Control horizon `t0` together with the parameters bounding it:
/// `0 < t0 <= t* = gamma0 / r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HorizonPolicy {
    pub t0: f64,
    pub gamma0: f64,
    pub r: f64,
}

impl HorizonPolicy {
    pub fn new(t0: f64, gamma0: f64, r: f64) -> Result<Self> {
        if !(gamma0 > 0.0 && gamma0.is_finite()) {
            return Err(Error::InvalidArgument(format!("gamma0 must be positive, got {gamma0}")));
        }
        if !(r >= 1.0 && r.is_finite()) {
            return Err(Error::InvalidArgument(format!("r must be at least 1, got {r}")));
        }
        if !(t0 > 0.0 && t0.is_finite()) {
            return Err(Error::InvalidArgument(format!("t0 must be positive, got {t0}")));
        }
        let t_star = gamma0 / r;
        if t0 > t_star * (1.0 + 1e-12) {
            return Err(Error::PolicyViolation { t0, t_star });
        }
        Ok(Self { t0, gamma0, r })
    }

    pub fn t_star(&self) -> f64 {
        self.gamma0 / self.r
    }
}

/// Matrix-valued control on the simulation grid. Nodes `0..=steps` are
/// stored, node `steps` being the left limit at `t0`; the control is zero
/// from `t0` on.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPath {
    dt: f64,
    t0: f64,
    nodes: MatrixGrid,
    midpoints: MatrixGrid,
}

impl ControlPath {
    pub fn dim(&self) -> usize {
        self.nodes.dim()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// Number of grid steps on which the control is active.
    pub fn steps(&self) -> usize {
        self.midpoints.len()
    }

    pub fn node(&self, k: usize) -> &[f64] {
        self.nodes.get(k)
    }

    pub fn midpoint(&self, k: usize) -> &[f64] {
        self.midpoints.get(k)
    }

    /// `g(t_k)`, right-continuous: zero for `t_k >= t0`.
    pub fn value(&self, k: usize) -> Vec<f64> {
        if k < self.steps() {
            self.node(k).to_vec()
        } else {
            vec![0.0; self.dim() * self.dim()]
        }
    }

    pub fn negated(&self) -> ControlPath {
        self.scaled(-1.0)
    }

    pub fn scaled(&self, factor: f64) -> ControlPath {
        let scale = |g: &MatrixGrid| {
            let mut out = g.clone();
            for k in 0..out.len() {
                out.get_mut(k).iter_mut().for_each(|v| *v *= factor);
            }
            out
        };
        ControlPath { dt: self.dt, t0: self.t0, nodes: scale(&self.nodes), midpoints: scale(&self.midpoints) }
    }

    /// A control equal to `matrix` on `[0, t0)`.
    pub fn constant(dim: usize, dt: f64, t0: f64, matrix: &[f64]) -> Result<ControlPath> {
        if matrix.len() != dim * dim {
            return Err(Error::InvalidArgument("control matrix has the wrong size".into()));
        }
        let steps = steps_for(t0, dt)?;
        let mut nodes = MatrixGrid::zeros(dim, steps + 1);
        let mut midpoints = MatrixGrid::zeros(dim, steps);
        for k in 0..=steps {
            nodes.get_mut(k).copy_from_slice(matrix);
            if k < steps {
                midpoints.get_mut(k).copy_from_slice(matrix);
            }
        }
        Ok(ControlPath { dt, t0, nodes, midpoints })
    }
}

/// `g(t) = C(t, 0) / t0` for `t < t0`, zero afterwards.
pub fn build_control(c: &FundamentalMatrix, policy: &HorizonPolicy) -> Result<ControlPath> {
    let steps = c.index_of(policy.t0)?;
    if steps == 0 {
        return Err(Error::InvalidArgument("t0 must span at least one step".into()));
    }
    let d = c.dim();
    let scale = 1.0 / policy.t0;
    let mut nodes = MatrixGrid::zeros(d, steps + 1);
    let mut midpoints = MatrixGrid::zeros(d, steps);
    for k in 0..=steps {
        for (o, v) in nodes.get_mut(k).iter_mut().zip(c.nodes.get(k)) {
            *o = scale * v;
        }
        if k < steps {
            for (o, v) in midpoints.get_mut(k).iter_mut().zip(c.midpoints.get(k)) {
                *o = scale * v;
            }
        }
    }
    Ok(ControlPath { dt: c.dt, t0: policy.t0, nodes, midpoints })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GronwallColumn {
    /// `max_t (|g_i(t)|^2 / bound(t) - 1)`; positive means a violation.
    pub max_excess: f64,
    /// `max_t (1 - |g_i(t)|^2 / bound(t))`; zero when the bound is attained.
    pub max_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GronwallReport {
    pub columns: Vec<GronwallColumn>,
    pub max_excess: f64,
    pub max_slack: f64,
}

impl GronwallReport {
    pub fn holds(&self, tolerance: f64) -> bool {
        self.max_excess <= tolerance
    }
}

/// Checks `|g_i(t)|^2 <= t0^{-2} exp(2 int_0^t u(X(s)) ds)` for every column
/// and every grid time up to `t0`, with the trapezoid rule for the integral.
/// Ratios are relative to the bound.
pub fn gronwall_check(control: &ControlPath, traj: &Trajectory, model: &CoefficientModel) -> Result<GronwallReport> {
    let d = control.dim();
    let steps = control.steps();
    if traj.steps() < steps {
        return Err(Error::GridMismatch(format!("trajectory has {} steps, control needs {steps}", traj.steps())));
    }
    let mut scratch = EvalScratch::new(d);
    let mut columns = vec![GronwallColumn { max_excess: f64::NEG_INFINITY, max_slack: f64::NEG_INFINITY }; d];
    let mut integral = 0.0;
    let mut u_prev = model.curvature_sup(traj.state(0), &mut scratch)?;
    let t0_sq = control.t0() * control.t0();
    for k in 0..=steps {
        if k > 0 {
            let u = model.curvature_sup(traj.state(k), &mut scratch)?;
            integral += 0.5 * control.dt() * (u_prev + u);
            u_prev = u;
        }
        let bound = (2.0 * integral).exp() / t0_sq;
        let g = control.node(k);
        for (i, col) in columns.iter_mut().enumerate() {
            let norm_sq: f64 = (0..d).map(|row| g[row * d + i] * g[row * d + i]).sum();
            let ratio = norm_sq / bound;
            col.max_excess = col.max_excess.max(ratio - 1.0);
            col.max_slack = col.max_slack.max(1.0 - ratio);
        }
    }
    let max_excess = columns.iter().map(|c| c.max_excess).fold(f64::NEG_INFINITY, f64::max);
    let max_slack = columns.iter().map(|c| c.max_slack).fold(f64::NEG_INFINITY, f64::max);
    Ok(GronwallReport { columns, max_excess, max_slack })
}

/// `(e^x - 1) / x`, continuous at zero.
pub fn e_function(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 + x / 2.0 + x * x / 6.0 + x * x * x / 24.0
    } else {
        x.exp_m1() / x
    }
}

/// Relative allowance in the trace moment comparison for the trapezoid time
/// quadrature of the left side (the bound is attained for constant curvature).
pub const TRACE_ROUNDING: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceMomentReport {
    pub t0: f64,
    pub r: f64,
    /// `{ t0^{-1} int_0^{t0} E[tr(g^T g)^{r/2}] ds }^{1/r}` under stationary starts.
    pub lhs: Estimate,
    /// `sqrt(d) / t0 { int E(r t0 u(x)) mu(dx) }^{1/r}`.
    pub rhs: Estimate,
    pub margin: f64,
    pub combined_se: f64,
    pub passes: bool,
}

/// Monte-Carlo comparison of both sides of the trace moment estimate. Each
/// ensemble point starts `paths_per_point` paths; standard errors treat the
/// per-point averages as the independent units.
pub fn trace_moment_check(
    model: &CoefficientModel,
    ensemble: &StationaryEnsemble,
    policy: &HorizonPolicy,
    paths_per_point: usize,
    settings: &PathSettings,
) -> Result<TraceMomentReport> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if paths_per_point == 0 {
        return Err(Error::InvalidArgument("paths_per_point must be positive".into()));
    }
    let d = model.dim();
    let t0 = policy.t0;
    let r = policy.r;
    let steps = steps_for(t0, settings.dt)?;
    let all = settings.with_paths(ensemble.len() * paths_per_point);
    let per_path = all.map_paths(|p| {
        let start = ensemble.point((p - all.first_path) as usize / paths_per_point);
        let noise = all.noise(d, steps, p);
        let traj = simulate_path(model, start, t0, all.dt, &noise, all.r_guard)?;
        if traj.exited() {
            return Err(Error::Integration { step: traj.steps(), message: "path hit the guard radius".into() });
        }
        let c = fundamental_matrix(&drift_jacobian_path(model, &traj)?)?;
        let moment = |k: usize| (linalg::frobenius_sq(c.nodes.get(k)) / (t0 * t0)).powf(r / 2.0);
        let mut acc = 0.5 * (moment(0) + moment(steps));
        for k in 1..steps {
            acc += moment(k);
        }
        Ok(acc * all.dt / t0)
    })?;
    let mut lhs_moments = Moments::new();
    for chunk in per_path.chunks(paths_per_point) {
        lhs_moments.push(chunk.iter().sum::<f64>() / chunk.len() as f64);
    }
    let mut scratch = EvalScratch::new(d);
    let mut rhs_moments = Moments::new();
    for x in ensemble.iter() {
        let u = model.curvature_sup(x, &mut scratch)?;
        rhs_moments.push(e_function(r * t0 * u));
    }
    let lhs = lhs_moments.estimate().powf(1.0 / r);
    let inner = rhs_moments.estimate().powf(1.0 / r);
    let factor = (d as f64).sqrt() / t0;
    let rhs = Estimate { value: factor * inner.value, se: factor * inner.se };
    let combined_se = (lhs.se * lhs.se + rhs.se * rhs.se).sqrt();
    let margin = rhs.value - lhs.value;
    let slack = 3.0 * combined_se + TRACE_ROUNDING * rhs.value.abs();
    Ok(TraceMomentReport { t0, r, lhs, rhs, margin, combined_se, passes: margin >= -slack })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TestProblem;
    use crate::sde::{WienerGrid, DEFAULT_R_GUARD};
    use approx::assert_abs_diff_eq;

    fn ou_control(t0: f64, dt: f64) -> (ControlPath, Trajectory) {
        let model = TestProblem::Ou1d.model();
        let n = steps_for(2.0 * t0, dt).unwrap();
        let traj = simulate_path(&model, &[0.4], 2.0 * t0, dt, &WienerGrid::sample(1, n, dt, 3, 0), DEFAULT_R_GUARD).unwrap();
        let c = fundamental_matrix(&drift_jacobian_path(&model, &traj).unwrap()).unwrap();
        let policy = HorizonPolicy::new(t0, 2.0 * t0, 2.0).unwrap();
        (build_control(&c, &policy).unwrap(), traj)
    }

    #[test]
    fn ou_control_is_scaled_exponential() {
        let (g, _) = ou_control(1.0, 1e-3);
        assert_eq!(g.steps(), 1000);
        for k in (0..1000).step_by(97) {
            let t = k as f64 * 1e-3;
            assert_abs_diff_eq!(g.value(k)[0], (-t / 2.0).exp(), epsilon = 1e-9);
        }
        assert_eq!(g.value(1000), vec![0.0]);
        assert_eq!(g.value(1500), vec![0.0]);
    }

    #[test]
    fn policy_enforces_t_star() {
        assert!(HorizonPolicy::new(1.0, 2.0, 2.0).is_ok());
        assert!(matches!(HorizonPolicy::new(1.5, 2.0, 2.0), Err(Error::PolicyViolation { .. })));
        assert!(HorizonPolicy::new(0.0, 2.0, 2.0).is_err());
    }

    #[test]
    fn off_grid_horizon_is_rejected() {
        let model = TestProblem::Ou1d.model();
        let traj = simulate_path(&model, &[0.0], 1.0, 0.1, &WienerGrid::zeros(1, 10, 0.1), 1e6).unwrap();
        let c = fundamental_matrix(&drift_jacobian_path(&model, &traj).unwrap()).unwrap();
        let policy = HorizonPolicy::new(0.55, 2.0, 2.0).unwrap();
        assert!(matches!(build_control(&c, &policy), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn ou_gronwall_is_saturated() {
        let (g, traj) = ou_control(1.0, 1e-3);
        let report = gronwall_check(&g, &traj, &TestProblem::Ou1d.model()).unwrap();
        assert!(report.max_excess.abs() < 1e-6, "{report:?}");
        assert!(report.max_slack.abs() < 1e-6, "{report:?}");
    }

    #[test]
    fn e_function_values() {
        assert_eq!(e_function(0.0), 1.0);
        assert_abs_diff_eq!(e_function(1.0), std::f64::consts::E - 1.0, epsilon = 1e-15);
        let v = e_function(-10.0);
        assert_abs_diff_eq!(v, (1.0 - (-10.0f64).exp()) / 10.0, epsilon = 1e-15);
        assert!(v <= 0.1 && v > 0.0);
        assert!((e_function(1e-8) - 1.0).abs() < 1e-7);
        assert!((e_function(-1e-8) - 1.0).abs() < 1e-7);
        // both sides of the series cutover agree
        for x in [0.99e-4, 1.01e-4, -0.99e-4, -1.01e-4] {
            assert_abs_diff_eq!(e_function(x), 1.0 + x / 2.0 + x * x / 6.0, epsilon = 1e-12);
        }
        let grid: Vec<f64> = (-100..=100).map(|k| e_function(k as f64 / 10.0)).collect();
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn e_function_respects_bounds() {
        for k in -200..=200 {
            let x = k as f64 / 20.0;
            let v = e_function(x);
            assert!(v > 0.0);
            if x >= 0.0 {
                assert!(v <= x.exp() + 1e-15);
            } else {
                assert!(v <= 1.0f64.min(1.0 / x.abs()) + 1e-15);
            }
        }
    }
}
