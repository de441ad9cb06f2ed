//! Built-in coefficient sets with closed-form derivatives.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use super::{CoefficientModel, Coefficients, StationaryLaw};
use crate::error::Error;

/// One-dimensional Ornstein-Uhlenbeck: `U(x) = x^2 / 2`, `H = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Ou1d;

impl Coefficients for Ou1d {
    fn dim(&self) -> usize {
        1
    }
    fn potential(&self, x: &[f64]) -> f64 {
        0.5 * x[0] * x[0]
    }
    fn grad_potential(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[0];
    }
    fn hess_potential(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
    }
    fn antisym(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn grad_antisym(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn drift_b(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn grad_drift_b(&self, _x: &[f64], out: &mut [f64]) -> bool {
        out[0] = 0.0;
        true
    }
    fn normalizer(&self) -> Option<f64> {
        Some((2.0 * PI).sqrt())
    }
    fn stationary_law(&self) -> StationaryLaw {
        StationaryLaw::StandardGaussian
    }
}

/// Gaussian potential in the plane with a constant rotation `H_12 = h`.
#[derive(Debug, Clone, Copy)]
pub struct Rot2d {
    pub h: f64,
}

impl Coefficients for Rot2d {
    fn dim(&self) -> usize {
        2
    }
    fn potential(&self, x: &[f64]) -> f64 {
        0.5 * (x[0] * x[0] + x[1] * x[1])
    }
    fn grad_potential(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }
    fn hess_potential(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
    }
    fn antisym(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&[0.0, self.h, -self.h, 0.0]);
    }
    fn grad_antisym(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn drift_b(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.h * x[1];
        out[1] = -self.h * x[0];
    }
    fn grad_drift_b(&self, _x: &[f64], out: &mut [f64]) -> bool {
        out.copy_from_slice(&[0.0, self.h, -self.h, 0.0]);
        true
    }
    fn normalizer(&self) -> Option<f64> {
        Some(2.0 * PI)
    }
    fn stationary_law(&self) -> StationaryLaw {
        StationaryLaw::StandardGaussian
    }
}

/// Gaussian potential in the plane with a state-dependent `H_12(x) = x_1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct VarH2d;

impl Coefficients for VarH2d {
    fn dim(&self) -> usize {
        2
    }
    fn potential(&self, x: &[f64]) -> f64 {
        0.5 * (x[0] * x[0] + x[1] * x[1])
    }
    fn grad_potential(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }
    fn hess_potential(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
    }
    fn antisym(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&[0.0, x[0], -x[0], 0.0]);
    }
    fn grad_antisym(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        // d/dx_1 H_12 = 1, d/dx_1 H_21 = -1
        out[1] = 1.0;
        out[2] = -1.0;
    }
    fn drift_b(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[0] * x[1];
        out[1] = 1.0 - x[0] * x[0];
    }
    fn grad_drift_b(&self, x: &[f64], out: &mut [f64]) -> bool {
        out.copy_from_slice(&[x[1], x[0], -2.0 * x[0], 0.0]);
        true
    }
    fn normalizer(&self) -> Option<f64> {
        Some(2.0 * PI)
    }
    fn stationary_law(&self) -> StationaryLaw {
        StationaryLaw::StandardGaussian
    }
}

/// Symmetric double well `U(x) = (x^2 - 1)^2`, `H = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Dw1d;

impl Coefficients for Dw1d {
    fn dim(&self) -> usize {
        1
    }
    fn potential(&self, x: &[f64]) -> f64 {
        let s = x[0] * x[0] - 1.0;
        s * s
    }
    fn grad_potential(&self, x: &[f64], out: &mut [f64]) {
        out[0] = 4.0 * x[0] * (x[0] * x[0] - 1.0);
    }
    fn hess_potential(&self, x: &[f64], out: &mut [f64]) {
        out[0] = 12.0 * x[0] * x[0] - 4.0;
    }
    fn antisym(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn grad_antisym(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn drift_b(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn grad_drift_b(&self, _x: &[f64], out: &mut [f64]) -> bool {
        out[0] = 0.0;
        true
    }
}

/// Tag plus parameters of a built-in problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestProblem {
    Ou1d,
    Rot2d { h: f64 },
    VarH2d,
    Dw1d,
}

impl TestProblem {
    pub fn tag(&self) -> &'static str {
        match self {
            TestProblem::Ou1d => "OU1D",
            TestProblem::Rot2d { .. } => "ROT2D",
            TestProblem::VarH2d => "VARH2D",
            TestProblem::Dw1d => "DW1D",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TestProblem::Ou1d | TestProblem::Dw1d => 1,
            TestProblem::Rot2d { .. } | TestProblem::VarH2d => 2,
        }
    }

    pub fn model(&self) -> CoefficientModel {
        let coefficients: Arc<dyn Coefficients> = match *self {
            TestProblem::Ou1d => Arc::new(Ou1d),
            TestProblem::Rot2d { h } => Arc::new(Rot2d { h }),
            TestProblem::VarH2d => Arc::new(VarH2d),
            TestProblem::Dw1d => Arc::new(Dw1d),
        };
        CoefficientModel::new(self.to_string(), coefficients)
    }

    /// Sets the rotation strength; ignored for problems without one.
    pub fn with_rotation(self, h: f64) -> Self {
        match self {
            TestProblem::Rot2d { .. } => TestProblem::Rot2d { h },
            other => other,
        }
    }
}

impl fmt::Display for TestProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestProblem::Rot2d { h } => write!(f, "ROT2D(h={h})"),
            other => f.write_str(other.tag()),
        }
    }
}

impl FromStr for TestProblem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "OU1D" => Ok(TestProblem::Ou1d),
            "ROT2D" => Ok(TestProblem::Rot2d { h: 1.0 }),
            "VARH2D" => Ok(TestProblem::VarH2d),
            "DW1D" => Ok(TestProblem::Dw1d),
            other => Err(Error::Config(format!("unknown problem tag `{other}`"))),
        }
    }
}
