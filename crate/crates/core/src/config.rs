//! Experiment configuration: a TOML file with `[problem]`, `[simulation]`,
//! `[inequality]` and `[output]` sections. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::control::HorizonPolicy;
use crate::error::{Error, Result};
use crate::model::TestProblem;
use crate::norms::holder_exponent;
use crate::sde::{PathSettings, DEFAULT_DT, DEFAULT_R_GUARD};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub tag: String,
    /// Rotation strength, ROT2D only.
    #[serde(default)]
    pub h: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub dt: f64,
    pub horizon: f64,
    pub paths: usize,
    pub ensemble: usize,
    pub seed: u64,
    pub r_guard: f64,
    /// Evaluation / starting point; the origin when absent.
    pub x0: Option<Vec<f64>>,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self { dt: DEFAULT_DT, horizon: 1.0, paths: 10_000, ensemble: 10_000, seed: 1, r_guard: DEFAULT_R_GUARD, x0: None }
    }
}

/// `t0` as a number or the keyword `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
enum RawT0 {
    Value(f64),
    Keyword(Auto),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Auto {
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum T0Choice {
    Auto,
    Value(f64),
}

impl<'de> Deserialize<'de> for T0Choice {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        Ok(match RawT0::deserialize(deserializer)? {
            RawT0::Value(v) => T0Choice::Value(v),
            RawT0::Keyword(Auto::Auto) => T0Choice::Auto,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InequalitySection {
    pub p: f64,
    pub q: f64,
    pub gamma0: f64,
    pub t0: T0Choice,
}

impl Default for InequalitySection {
    fn default() -> Self {
        Self { p: 2.0, q: 4.0, gamma0: 4.0, t0: T0Choice::Value(1.0) }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("dfmc-out") }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub inequality: InequalitySection,
    #[serde(default)]
    pub output: OutputSection,
}

impl ExperimentConfig {
    /// A configuration with every default for the given problem.
    pub fn for_problem(problem: TestProblem) -> Self {
        let h = match problem {
            TestProblem::Rot2d { h } => Some(h),
            _ => None,
        };
        Self {
            problem: ProblemSection { tag: problem.tag().to_string(), h },
            simulation: SimulationSection::default(),
            inequality: InequalitySection::default(),
            output: OutputSection::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn problem(&self) -> Result<TestProblem> {
        let base: TestProblem = self.problem.tag.parse()?;
        match (base, self.problem.h) {
            (TestProblem::Rot2d { .. }, Some(h)) => Ok(base.with_rotation(h)),
            (_, None) => Ok(base),
            (_, Some(_)) => Err(Error::Config(format!("`h` applies to ROT2D only, not {}", self.problem.tag))),
        }
    }

    /// `r` from `1/p = 1/q + 1/r`.
    pub fn r(&self) -> Result<f64> {
        holder_exponent(self.inequality.p, self.inequality.q).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn t_star(&self) -> Result<f64> {
        Ok(self.inequality.gamma0 / self.r()?)
    }

    /// Starting point, checked against the problem dimension.
    pub fn x0(&self) -> Result<Vec<f64>> {
        let d = self.problem()?.dim();
        match &self.simulation.x0 {
            None => Ok(vec![0.0; d]),
            Some(x) if x.len() == d && x.iter().all(|v| v.is_finite()) => Ok(x.clone()),
            Some(x) => Err(Error::Config(format!("x0 has {} coordinates, the problem has {d}", x.len()))),
        }
    }

    pub fn path_settings(&self) -> PathSettings {
        PathSettings {
            paths: self.simulation.paths,
            first_path: 0,
            dt: self.simulation.dt,
            seed: self.simulation.seed,
            r_guard: self.simulation.r_guard,
        }
    }

    /// Horizon policy for an explicit `t0`, or for the value an automatic
    /// choice produced.
    pub fn policy(&self, t0: f64) -> Result<HorizonPolicy> {
        HorizonPolicy::new(t0, self.inequality.gamma0, self.r()?)
    }

    /// Rounds `t0` down onto the simulation grid (at least one step).
    pub fn snap_to_grid(&self, t0: f64) -> f64 {
        let dt = self.simulation.dt;
        ((t0 / dt + 1e-9).floor().max(1.0)) * dt
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        self.problem()?;
        let s = &self.simulation;
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            return cfg(format!("dt must be positive, got {}", s.dt));
        }
        if !(s.horizon > 0.0 && s.horizon.is_finite()) {
            return cfg(format!("horizon must be positive, got {}", s.horizon));
        }
        if s.paths == 0 || s.ensemble == 0 {
            return cfg("paths and ensemble must be positive".into());
        }
        if !(s.r_guard > 0.0) {
            return cfg(format!("r_guard must be positive, got {}", s.r_guard));
        }
        self.x0()?;
        let i = &self.inequality;
        if !(i.p >= 1.0 && i.q > i.p) {
            return cfg(format!("need 1 <= p < q, got p = {}, q = {}", i.p, i.q));
        }
        self.r()?;
        if !(i.gamma0 > 0.0 && i.gamma0.is_finite()) {
            return cfg(format!("gamma0 must be positive, got {}", i.gamma0));
        }
        if let T0Choice::Value(t0) = i.t0 {
            self.policy(t0).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Checks that an explicit `t0` lies on the simulation grid.
    pub fn check_t0_on_grid(&self, t0: f64) -> Result<()> {
        let k = t0 / self.simulation.dt;
        if k < 1.0 - 1e-9 || (k - k.round()).abs() > 1e-9 * k.max(1.0) {
            return Err(Error::Config(format!("t0 = {t0} is not a positive multiple of dt = {}", self.simulation.dt)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
[problem]
tag = "ROT2D"
h = 0.5

[simulation]
dt = 0.001
horizon = 2.0
paths = 100
ensemble = 200
seed = 7
r_guard = 1000.0
x0 = [0.2, -0.1]

[inequality]
p = 2.0
q = 4.0
gamma0 = 4.0
t0 = "auto"

[output]
dir = "out"
"#;

    #[test]
    fn parses_a_full_file() {
        let c = ExperimentConfig::parse(FULL).unwrap();
        assert_eq!(c.problem().unwrap(), TestProblem::Rot2d { h: 0.5 });
        assert_eq!(c.inequality.t0, T0Choice::Auto);
        assert_eq!(c.r().unwrap(), 4.0);
        assert_eq!(c.t_star().unwrap(), 1.0);
        assert_eq!(c.x0().unwrap(), vec![0.2, -0.1]);
        assert_eq!(c.output.dir, PathBuf::from("out"));
    }

    #[test]
    fn defaults_fill_missing_sections() {
        let c = ExperimentConfig::parse("[problem]\ntag = \"OU1D\"\n").unwrap();
        assert_eq!(c.simulation, SimulationSection::default());
        assert_eq!(c.inequality.t0, T0Choice::Value(1.0));
        assert_eq!(c, ExperimentConfig::for_problem(TestProblem::Ou1d));
    }

    #[test]
    fn rejects_bad_configurations() {
        let bad = [
            "[problem]\ntag = \"OU1D\"\nunknown = 1\n",
            "[problem]\ntag = \"XX\"\n",
            "[problem]\ntag = \"OU1D\"\nh = 1.0\n",
            "[problem]\ntag = \"OU1D\"\n[inequality]\np = 4.0\nq = 2.0\n",
            "[problem]\ntag = \"OU1D\"\n[inequality]\np = 1.0\nq = 4.0\n",
            "[problem]\ntag = \"OU1D\"\n[inequality]\ngamma0 = 1.0\nt0 = 1.0\n",
            "[problem]\ntag = \"OU1D\"\n[inequality]\nt0 = \"soon\"\n",
            "[problem]\ntag = \"OU1D\"\n[simulation]\ndt = 0.0\n",
            "[problem]\ntag = \"OU1D\"\n[simulation]\nx0 = [1.0, 2.0]\n",
            "[problem]\ntag = \"OU1D\"\n[simulation]\nthreads = 2\n",
        ];
        for text in bad {
            let err = ExperimentConfig::parse(text).unwrap_err();
            assert!(err.is_config(), "{text}: {err}");
        }
    }

    #[test]
    fn t0_must_sit_on_the_grid() {
        let c = ExperimentConfig::parse("[problem]\ntag = \"OU1D\"\n[simulation]\ndt = 0.3\n").unwrap();
        assert!(c.check_t0_on_grid(1.0).unwrap_err().is_config());
        assert!(c.check_t0_on_grid(0.9).is_ok());
    }

    #[test]
    fn snapping_rounds_down_to_the_grid() {
        let c = ExperimentConfig::for_problem(TestProblem::Ou1d);
        assert!((c.snap_to_grid(0.015625) - 0.015).abs() < 1e-15);
        assert!((c.snap_to_grid(0.0001) - 0.001).abs() < 1e-15);
        assert_eq!(c.snap_to_grid(2.0), 2.0);
    }
}
