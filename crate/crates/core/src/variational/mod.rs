//! Linearized flow along a trajectory: the fundamental matrix `C(t, 0)`, the
//! Fréchet derivative `xi`, the Malliavin derivative `zeta` for a control,
//! and their difference `Theta`.
//!
//! All matrix ODEs are integrated with classical RK4. The coefficient matrix
//! is known only at grid times, so half-step stages use its linear
//! interpolation. Forcing terms are given at nodes and half steps.

use nalgebra::DMatrix;

use crate::control::ControlPath;
use crate::error::{Error, Result};
use crate::linalg::{self, MatrixGrid};
use crate::model::{CoefficientModel, EvalScratch};
use crate::sde::Trajectory;

/// `A_k`, the Jacobian of the total drift at each state of a trajectory.
/// Row `i`, column `i'` holds `d/dx_{i'}` of drift component `i`, which is
/// the curvature matrix evaluated along the path.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftJacobianPath {
    pub dt: f64,
    pub grid: MatrixGrid,
}

impl DriftJacobianPath {
    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Number of time steps covered.
    pub fn steps(&self) -> usize {
        self.grid.len().saturating_sub(1)
    }
}

pub fn drift_jacobian_path(model: &CoefficientModel, traj: &Trajectory) -> Result<DriftJacobianPath> {
    let d = model.dim();
    let mut grid = MatrixGrid::zeros(d, traj.len());
    let mut scratch = EvalScratch::new(d);
    for k in 0..traj.len() {
        model
            .drift_jacobian_into(traj.state(k), grid.get_mut(k), &mut scratch)
            .map_err(|e| Error::Integration { step: k, message: e.to_string() })?;
    }
    Ok(DriftJacobianPath { dt: traj.dt(), grid })
}

/// `C(t_k, 0)` at the nodes, plus Hermite half-step values used wherever a
/// quantity built from `C` is needed at RK4 midpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalMatrix {
    pub dt: f64,
    pub nodes: MatrixGrid,
    pub midpoints: MatrixGrid,
}

impl FundamentalMatrix {
    pub fn dim(&self) -> usize {
        self.nodes.dim()
    }

    pub fn steps(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    /// Grid index of `t`, which must lie on the grid.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let k = (t / self.dt).round();
        if k < 0.0 || (k * self.dt - t).abs() > 1e-9 * self.dt.max(t.abs()) || k as usize > self.steps() {
            return Err(Error::GridMismatch(format!("time {t} is not a grid point of [0, {}]", self.steps() as f64 * self.dt)));
        }
        Ok(k as usize)
    }

    /// `C(u, s) = C(u, 0) C(s, 0)^{-1}`.
    pub fn transition(&self, u: f64, s: f64) -> Result<DMatrix<f64>> {
        let (ku, ks) = (self.index_of(u)?, self.index_of(s)?);
        let inv = self.nodes.matrix(ks).try_inverse().ok_or(Error::Singular { time: s })?;
        Ok(self.nodes.matrix(ku) * inv)
    }
}

/// Per-step coefficient and forcing values at `t_k`, `t_k + dt/2`, `t_{k+1}`.
struct Stage<'a> {
    a: [&'a [f64]; 2],
    forcing: Option<[&'a [f64]; 3]>,
}

/// Integrates `Y' = A(t) Y + F(t)` over the whole grid, starting from `y0`.
/// `forcing(k)` returns the forcing at the three stage times of step `k`,
/// or `None` where it vanishes. Returns node values and Hermite midpoints.
fn integrate_linear<'f>(
    jac: &DriftJacobianPath,
    y0: &[f64],
    steps: usize,
    forcing: impl Fn(usize) -> Option<[&'f [f64]; 3]>,
) -> Result<(MatrixGrid, MatrixGrid)> {
    let d = jac.dim();
    let s = d * d;
    let h = jac.dt;
    let mut nodes = MatrixGrid::zeros(d, steps + 1);
    let mut mids = MatrixGrid::zeros(d, steps);
    nodes.get_mut(0).copy_from_slice(y0);
    let mut a_mid = vec![0.0; s];
    let mut k1 = vec![0.0; s];
    let mut k2 = vec![0.0; s];
    let mut k3 = vec![0.0; s];
    let mut k4 = vec![0.0; s];
    let mut tmp = vec![0.0; s];
    let mut end_slope = vec![0.0; s];
    let mut y = vec![0.0; s];
    let mut next = vec![0.0; s];
    for k in 0..steps {
        let stage = Stage { a: [jac.grid.get(k), jac.grid.get(k + 1)], forcing: forcing(k) };
        for ((m, a0), a1) in a_mid.iter_mut().zip(stage.a[0]).zip(stage.a[1]) {
            *m = 0.5 * (a0 + a1);
        }
        y.copy_from_slice(nodes.get(k));
        let add_forcing = |out: &mut [f64], which: usize| {
            if let Some(f) = stage.forcing {
                for (o, v) in out.iter_mut().zip(f[which]) {
                    *o += v;
                }
            }
        };
        linalg::matmul(d, stage.a[0], &y, &mut k1);
        add_forcing(&mut k1, 0);
        for i in 0..s {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        linalg::matmul(d, &a_mid, &tmp, &mut k2);
        add_forcing(&mut k2, 1);
        for i in 0..s {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        linalg::matmul(d, &a_mid, &tmp, &mut k3);
        add_forcing(&mut k3, 1);
        for i in 0..s {
            tmp[i] = y[i] + h * k3[i];
        }
        linalg::matmul(d, stage.a[1], &tmp, &mut k4);
        add_forcing(&mut k4, 2);
        for i in 0..s {
            next[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if !linalg::all_finite(&next) {
            return Err(Error::Integration { step: k + 1, message: "linearized flow became non-finite".into() });
        }
        nodes.get_mut(k + 1).copy_from_slice(&next);
        linalg::matmul(d, stage.a[1], &next, &mut end_slope);
        add_forcing(&mut end_slope, 2);
        let mid = mids.get_mut(k);
        for i in 0..s {
            mid[i] = 0.5 * (y[i] + next[i]) + h / 8.0 * (k1[i] - end_slope[i]);
        }
    }
    Ok((nodes, mids))
}

fn identity(d: usize) -> Vec<f64> {
    let mut id = vec![0.0; d * d];
    linalg::set_identity(d, &mut id);
    id
}

/// Solves `C' = A(t) C`, `C(0) = I` along the whole grid.
pub fn fundamental_matrix(jac: &DriftJacobianPath) -> Result<FundamentalMatrix> {
    if jac.grid.is_empty() {
        return Err(Error::InvalidArgument("empty drift Jacobian path".into()));
    }
    let (nodes, midpoints) = integrate_linear(jac, &identity(jac.dim()), jac.steps(), |_| None)?;
    Ok(FundamentalMatrix { dt: jac.dt, nodes, midpoints })
}

/// `C(u,t) C(t,s)` assembled from the stored `C(., 0)`; equals `C(u, s)` by
/// the cocycle property.
pub fn cocycle_compose(c: &FundamentalMatrix, u: f64, t: f64, s: f64) -> Result<DMatrix<f64>> {
    Ok(c.transition(u, t)? * c.transition(t, s)?)
}

/// Fréchet derivative of the flow, `xi' = A xi`, `xi(0) = I`.
pub fn frechet_flow(jac: &DriftJacobianPath) -> Result<MatrixGrid> {
    Ok(fundamental_matrix(jac)?.nodes)
}

fn check_control(jac: &DriftJacobianPath, control: &ControlPath) -> Result<()> {
    if control.dim() != jac.dim() {
        return Err(Error::GridMismatch(format!("control dimension {} vs path dimension {}", control.dim(), jac.dim())));
    }
    if (control.dt() - jac.dt).abs() > 1e-12 * jac.dt {
        return Err(Error::GridMismatch(format!("control step {} vs path step {}", control.dt(), jac.dt)));
    }
    Ok(())
}

fn control_forcing(control: &ControlPath, k: usize) -> Option<[&[f64]; 3]> {
    (k < control.steps()).then(|| [control.node(k), control.midpoint(k), control.node(k + 1)])
}

/// Malliavin derivative in the control directions, `zeta' = A zeta + g`,
/// `zeta(0) = 0`.
pub fn malliavin_flow(jac: &DriftJacobianPath, control: &ControlPath) -> Result<MatrixGrid> {
    check_control(jac, control)?;
    let zero = vec![0.0; jac.dim() * jac.dim()];
    Ok(integrate_linear(jac, &zero, jac.steps(), |k| control_forcing(control, k))?.0)
}

/// `Theta` by two routes: the ODE `Theta' = A Theta - g`, `Theta(0) = I`,
/// and the Duhamel formula `C(t,0) - int_0^t C(t,s) g(s) ds` (Simpson rule
/// per step on nodes and midpoints).
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaFlow {
    pub ode: MatrixGrid,
    pub duhamel: MatrixGrid,
}

impl ThetaFlow {
    /// Largest entrywise gap between the two routes.
    pub fn route_mismatch(&self) -> f64 {
        self.ode.max_abs_diff(&self.duhamel, 0..self.ode.len())
    }
}

pub fn theta_flow(jac: &DriftJacobianPath, control: &ControlPath) -> Result<ThetaFlow> {
    check_control(jac, control)?;
    let d = jac.dim();
    let s = d * d;
    let negated = control.negated();
    let (ode, _) = integrate_linear(jac, &identity(d), jac.steps(), |k| control_forcing(&negated, k))?;

    let c = fundamental_matrix(jac)?;
    let mut duhamel = MatrixGrid::zeros(d, jac.steps() + 1);
    let mut integral = vec![0.0; s];
    let mut term = vec![0.0; s];
    let mut out = vec![0.0; s];
    let inv = |m: &[f64], t: f64| -> Result<Vec<f64>> {
        linalg::to_matrix(d, m)
            .try_inverse()
            .map(|m| linalg::from_matrix(&m))
            .ok_or(Error::Singular { time: t })
    };
    for k in 0..=jac.steps() {
        // Theta(t_k) = C_k (I - int_0^{t_k} C(s)^{-1} g(s) ds)
        let mut acc = identity(d);
        for (a, i) in acc.iter_mut().zip(&integral) {
            *a -= i;
        }
        linalg::matmul(d, c.nodes.get(k), &acc, &mut out);
        duhamel.get_mut(k).copy_from_slice(&out);
        if k == jac.steps() {
            break;
        }
        if let Some([g0, gm, g1]) = control_forcing(control, k) {
            let t = k as f64 * jac.dt;
            let weights = [(c.nodes.get(k), g0, 1.0), (c.midpoints.get(k), gm, 4.0), (c.nodes.get(k + 1), g1, 1.0)];
            for (cm, g, w) in weights {
                linalg::matmul(d, &inv(cm, t)?, g, &mut term);
                for (i, v) in integral.iter_mut().zip(&term) {
                    *i += jac.dt / 6.0 * w * v;
                }
            }
        }
    }
    Ok(ThetaFlow { ode, duhamel })
}

/// `xi`, `zeta` and `Theta` on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowDerivatives {
    pub xi: MatrixGrid,
    pub zeta: MatrixGrid,
    pub theta: MatrixGrid,
}

pub fn flow_derivatives(jac: &DriftJacobianPath, control: &ControlPath) -> Result<FlowDerivatives> {
    Ok(FlowDerivatives {
        xi: frechet_flow(jac)?,
        zeta: malliavin_flow(jac, control)?,
        theta: theta_flow(jac, control)?.ode,
    })
}
