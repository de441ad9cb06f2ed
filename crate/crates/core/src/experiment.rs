//! End-to-end runs driven by an [`ExperimentConfig`]: trajectory dumps, the
//! two-route gradient estimate at a point, and the full verification suite
//! with its consolidated report.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use crate::config::{ExperimentConfig, T0Choice};
use crate::control::{build_control, gronwall_check, trace_moment_check};
use crate::error::{Error, Result};
use crate::estimator::{holder_chain_check, ibp_identity_check, IbpReport};
use crate::linalg;
use crate::model::{battery, lookup, symmetry_pairs, CoefficientModel, Shifted, Square, TestFunction, TestProblem};
use crate::norms::{
    balanced_t0, check_gradient_inequality, check_hessian_inequality, decay_check, moment_bound_check, norm_profile,
    operator_symmetry_check, stationarity_check, InequalityReport, MomentTestConfig,
};
use crate::report::{
    csv_string, fmt_num, gradient_rows, inequality_rows, join_point, markdown_table, trajectory_csv, write_atomic, CheckOutcome,
};
use crate::rng::derive_seed;
use crate::sde::{
    sample_stationary, simulate_path, steps_for, LangevinOptions, PathSettings, StationaryEnsemble, StationaryMethod,
};
use crate::variational::{drift_jacobian_path, fundamental_matrix, theta_flow};

/// Gronwall check: number of stationary starts.
pub const GRONWALL_PATHS: usize = 1000;
/// Control check (`Theta` on `[t0, 2 t0]`, Duhamel vs ODE): number of paths.
pub const THETA_PATHS: usize = 10;
pub const THETA_TOLERANCE: f64 = 1e-5;
/// Residual threshold, in standard errors, for the identity check over the
/// whole battery: with 12 d components a per-component 3 SE rule would flag
/// a correct estimator several percent of the time.
pub const IBP_FAMILY_Z: f64 = 4.0;
pub const GRONWALL_TOLERANCE: f64 = 1e-4;
pub const TRACE_STARTS: usize = 1000;
pub const TRACE_PATHS_PER_START: usize = 5;
pub const HOLDER_STARTS: usize = 1000;
pub const STATIONARITY_STARTS: usize = 2000;
pub const STATIONARITY_TIMES: [f64; 3] = [0.0, 1.0, 5.0];
pub const DECAY_STARTS: usize = 200;
pub const DECAY_BATCH: usize = 20;
pub const DECAY_TIMES: [f64; 5] = [0.0, 1.0, 2.0, 4.0, 8.0];
pub const MOMENT_STARTS: usize = 2000;
pub const MOMENT_RHO: f64 = 0.4;
pub const MOMENT_RADII: [f64; 3] = [3.0, 5.0, 8.0];
pub const MOMENT_HORIZON: f64 = 5.0;

/// Duhamel-vs-ODE tolerance: tight when the drift Jacobian is constant.
pub fn theta_route_tolerance(problem: TestProblem) -> f64 {
    match problem {
        TestProblem::Ou1d | TestProblem::Rot2d { .. } => 1e-6,
        TestProblem::VarH2d | TestProblem::Dw1d => 1e-4,
    }
}

pub fn stationary_ensemble(model: &CoefficientModel, count: usize, seed: u64) -> Result<StationaryEnsemble> {
    let method = if model.normalizer().is_some() { StationaryMethod::Exact } else { StationaryMethod::Langevin };
    sample_stationary(model, count, method, &LangevinOptions::default(), seed)
}

/// `t0` from the configuration. `"auto"` scans `t* 2^{-i}` for the minimizer
/// of the summed balanced right side over the battery and rounds it down onto
/// the simulation grid.
pub fn resolve_t0(cfg: &ExperimentConfig, model: &CoefficientModel, ensemble: &StationaryEnsemble) -> Result<f64> {
    match cfg.inequality.t0 {
        T0Choice::Value(t0) => {
            cfg.check_t0_on_grid(t0)?;
            Ok(t0)
        }
        T0Choice::Auto => {
            let norms = battery(model.dim())
                .iter()
                .map(|f| {
                    let n = norm_profile(model, f.as_ref(), ensemble, cfg.inequality.p, cfg.inequality.q)?;
                    Ok((n.lf_q.value, n.f_q.value))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(cfg.snap_to_grid(balanced_t0(&norms, cfg.t_star()?)))
        }
    }
}

fn out_path(cfg: &ExperimentConfig, name: &str) -> PathBuf {
    cfg.output.dir.join(name)
}

fn run_meta(cfg: &ExperimentConfig, problem: TestProblem) -> Vec<(&'static str, String)> {
    vec![
        ("problem", problem.to_string()),
        ("seed", cfg.simulation.seed.to_string()),
        ("dt", cfg.simulation.dt.to_string()),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOutcome {
    pub files: Vec<PathBuf>,
    pub paths: usize,
    /// Paths stopped at the guard radius, with the step where that happened.
    pub guard_exits: Vec<(u64, usize)>,
}

#[derive(serde::Serialize)]
struct PathSummaryRow {
    path: u64,
    steps: usize,
    exited_guard: bool,
    max_norm: f64,
    final_state: String,
}

/// Simulates `paths` trajectories from `x0` over `horizon`, one CSV per path
/// under `trajectories/`, plus `simulate_summary.csv`.
pub fn run_simulate(cfg: &ExperimentConfig) -> Result<SimulateOutcome> {
    let problem = cfg.problem()?;
    let model = problem.model();
    let x0 = cfg.x0()?;
    let settings = cfg.path_settings();
    let steps = steps_for(cfg.simulation.horizon, settings.dt).map_err(|e| Error::Config(e.to_string()))?;
    let trajs = settings.map_paths(|p| simulate_path(&model, &x0, cfg.simulation.horizon, settings.dt, &settings.noise(model.dim(), steps, p), settings.r_guard))?;
    let mut files = Vec::with_capacity(trajs.len() + 1);
    let mut summary = Vec::with_capacity(trajs.len());
    let mut guard_exits = Vec::new();
    for (p, traj) in trajs.iter().enumerate() {
        let p = p as u64;
        let path = out_path(cfg, &format!("trajectories/path_{p:06}.csv"));
        write_atomic(&path, &trajectory_csv(problem.tag(), settings.seed, p, traj)?)?;
        files.push(path);
        if traj.exited() {
            guard_exits.push((p, traj.steps()));
        }
        summary.push(PathSummaryRow {
            path: p,
            steps: traj.steps(),
            exited_guard: traj.exited(),
            max_norm: (0..traj.len()).map(|k| linalg::norm(traj.state(k))).fold(0.0, f64::max),
            final_state: join_point(traj.last()),
        });
    }
    let path = out_path(cfg, "simulate_summary.csv");
    write_atomic(&path, &csv_string("simulate-summary", &run_meta(cfg, problem), &summary)?)?;
    files.push(path);
    Ok(SimulateOutcome { files, paths: trajs.len(), guard_exits })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientOutcome {
    pub report: IbpReport,
    pub t0: f64,
    pub files: Vec<PathBuf>,
}

/// Both gradient routes for one function at one point on common random
/// numbers, written to `gradient.csv`.
pub fn run_gradient(cfg: &ExperimentConfig, f_id: &str, x: Option<Vec<f64>>) -> Result<GradientOutcome> {
    let problem = cfg.problem()?;
    let model = problem.model();
    let f = lookup(model.dim(), f_id).ok_or_else(|| Error::Config(format!("unknown test function `{f_id}`")))?;
    let x = match x {
        Some(x) if x.len() == model.dim() => x,
        Some(x) => return Err(Error::Config(format!("point has {} coordinates, the problem has {}", x.len(), model.dim()))),
        None => cfg.x0()?,
    };
    let t0 = match cfg.inequality.t0 {
        T0Choice::Value(_) => resolve_t0(cfg, &model, &StationaryEnsemble::from_points(model.dim(), Vec::new())?)?,
        T0Choice::Auto => {
            let ensemble = stationary_ensemble(&model, cfg.simulation.ensemble, cfg.simulation.seed)?;
            resolve_t0(cfg, &model, &ensemble)?
        }
    };
    let policy = cfg.policy(t0).map_err(|e| Error::Config(e.to_string()))?;
    let report = ibp_identity_check(&model, &[f.as_ref()], &x, &policy, &cfg.path_settings(), false)?.remove(0);
    let path = out_path(cfg, "gradient.csv");
    let mut meta = run_meta(cfg, problem);
    meta.push(("t0", t0.to_string()));
    write_atomic(&path, &csv_string("gradient", &meta, &gradient_rows(problem.tag(), cfg.simulation.seed, std::slice::from_ref(&report)))?)?;
    Ok(GradientOutcome { report, t0, files: vec![path] })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VerifyOptions {
    /// Replace the control by its negative (a deliberately wrong estimator).
    pub negate_control: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOutcome {
    pub t0: f64,
    pub checks: Vec<CheckOutcome>,
    pub markdown: String,
    pub files: Vec<PathBuf>,
}

impl VerifyOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }
}

fn salted(settings: &PathSettings, salt: u64, paths: usize) -> PathSettings {
    settings.with_seed(derive_seed(settings.seed, salt)).with_paths(paths)
}

/// Runs every check of the harness and writes `verify_report.md`,
/// `checks.csv`, `gradient.csv` and `inequality.csv`.
pub fn run_verify(cfg: &ExperimentConfig, opts: VerifyOptions) -> Result<VerifyOutcome> {
    let problem = cfg.problem()?;
    let model = problem.model();
    let d = model.dim();
    let x0 = cfg.x0()?;
    let settings = cfg.path_settings();
    let seed = cfg.simulation.seed;
    let ensemble = stationary_ensemble(&model, cfg.simulation.ensemble, seed)?;
    let t0 = resolve_t0(cfg, &model, &ensemble)?;
    let policy = cfg.policy(t0).map_err(|e| Error::Config(e.to_string()))?;
    let fns = battery(d);
    let fn_refs: Vec<&dyn TestFunction> = fns.iter().map(|f| f.as_ref()).collect();
    let mut checks = Vec::new();
    let mut md = String::new();

    let _ = writeln!(md, "# Verification report: {problem}\n");
    let header_rows = vec![
        vec!["problem".into(), problem.to_string()],
        vec!["seed".into(), seed.to_string()],
        vec!["dt".into(), cfg.simulation.dt.to_string()],
        vec!["paths".into(), cfg.simulation.paths.to_string()],
        vec!["ensemble".into(), format!("{} ({:?})", ensemble.len(), ensemble.provenance)],
        vec!["x0".into(), join_point(&x0)],
        vec!["p, q, r".into(), format!("{}, {}, {}", cfg.inequality.p, cfg.inequality.q, fmt_num(policy.r))],
        vec!["gamma0".into(), cfg.inequality.gamma0.to_string()],
        vec!["t*".into(), fmt_num(policy.t_star())],
        vec!["t0".into(), format!("{}{}", fmt_num(t0), if cfg.inequality.t0 == T0Choice::Auto { " (auto)" } else { "" })],
        vec!["control".into(), if opts.negate_control { "NEGATED (debug)".into() } else { "C(t,0)/t0".into() }],
    ];
    md.push_str(&markdown_table(&["parameter", "value"], &header_rows));
    if let Some(w) = &ensemble.diagnostics.warning {
        let _ = writeln!(md, "\nSampler warning: {w}");
    }

    // integration by parts on common random numbers
    let ibp = ibp_identity_check(&model, &fn_refs, &x0, &policy, &salted(&settings, 1, settings.paths), opts.negate_control)?;
    let ibp_failures: Vec<&str> = ibp.iter().filter(|r| !r.passes_at(IBP_FAMILY_Z)).map(|r| r.f_id.as_str()).collect();
    let worst_z = ibp.iter().map(IbpReport::worst_z).fold(0.0, f64::max);
    checks.push(CheckOutcome {
        name: "ibp_identity".into(),
        passed: ibp_failures.is_empty(),
        detail: format!(
            "{} functions at x0, worst |residual|/SE = {} (limit {}), failures: {}",
            ibp.len(),
            fmt_num(worst_z),
            IBP_FAMILY_Z,
            ibp_failures.len()
        ),
    });
    let _ = writeln!(md, "\n## Gradient routes (Fréchet vs Malliavin, common random numbers)\n");
    let rows: Vec<Vec<String>> = ibp
        .iter()
        .flat_map(|r| {
            (0..d).map(move |j| {
                let (fr, ml, res) = (r.frechet.component(j), r.malliavin.component(j), r.residual[j]);
                vec![
                    r.f_id.clone(),
                    (j + 1).to_string(),
                    format!("{} ± {}", fmt_num(fr.value), fmt_num(fr.se)),
                    format!("{} ± {}", fmt_num(ml.value), fmt_num(ml.se)),
                    format!("{} ± {}", fmt_num(res.value), fmt_num(res.se)),
                    if res.within(0.0, IBP_FAMILY_Z, 1e-12) { "pass".into() } else { "FAIL".into() },
                ]
            })
        })
        .collect();
    md.push_str(&markdown_table(&["f", "j", "Fréchet", "Malliavin", "residual", "verdict"], &rows));

    // control: Theta after t0 and Duhamel vs ODE
    let theta_settings = salted(&settings, 2, THETA_PATHS.min(ensemble.len()));
    let two_t0_steps = steps_for(2.0 * t0, settings.dt)?;
    let k0 = steps_for(t0, settings.dt)?;
    let theta_stats = theta_settings.map_paths(|p| {
        let start = ensemble.point(p as usize);
        let traj = simulate_path(&model, start, 2.0 * t0, settings.dt, &theta_settings.noise(d, two_t0_steps, p), settings.r_guard)?;
        let jac = drift_jacobian_path(&model, &traj)?;
        let control = build_control(&fundamental_matrix(&jac)?, &policy)?;
        let theta = theta_flow(&jac, &control)?;
        let after = (k0..=two_t0_steps).flat_map(|k| theta.ode.get(k).to_vec()).fold(0.0f64, |m, v| m.max(v.abs()));
        Ok((after, theta.route_mismatch()))
    })?;
    let theta_after = theta_stats.iter().map(|s| s.0).fold(0.0, f64::max);
    let mismatch = theta_stats.iter().map(|s| s.1).fold(0.0, f64::max);
    let route_tol = theta_route_tolerance(problem);
    checks.push(CheckOutcome {
        name: "control_theta".into(),
        passed: theta_after < THETA_TOLERANCE && mismatch < route_tol,
        detail: format!(
            "max |Theta| on [t0, 2t0] = {} (< {}), Duhamel vs ODE = {} (< {})",
            fmt_num(theta_after),
            fmt_num(THETA_TOLERANCE),
            fmt_num(mismatch),
            fmt_num(route_tol)
        ),
    });

    // Gronwall bound on the control columns
    let gr_settings = salted(&settings, 3, GRONWALL_PATHS.min(ensemble.len()));
    let gr = gr_settings.map_paths(|p| {
        let traj = simulate_path(&model, ensemble.point(p as usize), t0, settings.dt, &gr_settings.noise(d, k0, p), settings.r_guard)?;
        let control = build_control(&fundamental_matrix(&drift_jacobian_path(&model, &traj)?)?, &policy)?;
        let r = gronwall_check(&control, &traj, &model)?;
        Ok((r.max_excess, r.max_slack))
    })?;
    let excess = gr.iter().map(|g| g.0).fold(f64::NEG_INFINITY, f64::max);
    let violations = gr.iter().filter(|g| g.0 > GRONWALL_TOLERANCE).count();
    checks.push(CheckOutcome {
        name: "gronwall".into(),
        passed: violations == 0,
        detail: format!("{} paths, {violations} violations above {}, max relative excess = {}", gr.len(), fmt_num(GRONWALL_TOLERANCE), fmt_num(excess)),
    });

    // trace moment estimate
    let trace_ensemble = ensemble.truncated(TRACE_STARTS);
    let trace = trace_moment_check(&model, &trace_ensemble, &policy, TRACE_PATHS_PER_START, &salted(&settings, 4, 0))?;
    checks.push(CheckOutcome {
        name: "trace_moment".into(),
        passed: trace.passes,
        detail: format!(
            "LHS = {} ± {}, RHS = {} ± {}, margin = {} (r = {}, t0 = {})",
            fmt_num(trace.lhs.value),
            fmt_num(trace.lhs.se),
            fmt_num(trace.rhs.value),
            fmt_num(trace.rhs.se),
            fmt_num(trace.margin),
            fmt_num(trace.r),
            fmt_num(t0)
        ),
    });

    // Hölder step of the moment chain
    let holder = holder_chain_check(&model, fns[0].as_ref(), &ensemble.truncated(HOLDER_STARTS), &policy, cfg.inequality.p, cfg.inequality.q, 1, &salted(&settings, 5, 0))?;
    checks.push(CheckOutcome {
        name: "holder_chain".into(),
        passed: holder.holds(),
        detail: format!(
            "||grad||_p = {} <= ||f||_q (E|int g dw|^r)^(1/r) = {} x {}",
            fmt_num(holder.gradient_norm_p),
            fmt_num(holder.f_norm_q),
            fmt_num(holder.integral_moment_r)
        ),
    });

    // a priori inequalities
    let grad = check_gradient_inequality(&model, &fn_refs, &ensemble, cfg.inequality.p, cfg.inequality.q, &policy)?;
    let e_gamma = grad.e_gamma.clone().ok_or_else(|| Error::InvalidArgument("missing integrability factor".into()))?;
    let max_ratio = grad.rows.iter().map(|r| r.ratio.value).fold(0.0, f64::max);
    checks.push(CheckOutcome {
        name: "gradient_inequality".into(),
        passed: grad.passes,
        detail: format!(
            "max ratio = {} vs C_eff = {} (C(d,r) = {}, E(gamma0) = {}, C = {}), failures: {}",
            fmt_num(max_ratio),
            fmt_num(grad.effective_constant),
            fmt_num(grad.bdg_constant.unwrap_or(f64::NAN)),
            fmt_num(e_gamma.estimate.value),
            fmt_num(grad.constant),
            grad.failures().len()
        ),
    });
    let hess = check_hessian_inequality(&model, &fn_refs, &ensemble, cfg.inequality.p, cfg.inequality.q, &[2.0, policy.r])?;
    checks.push(CheckOutcome {
        name: "hessian_inequality".into(),
        passed: hess.passes,
        detail: format!(
            "fitted constant = {} (first tenth of ensemble: {}), l2* = {}",
            fmt_num(hess.constant),
            fmt_num(hess.subsample_constant.unwrap_or(f64::NAN)),
            hess.l2_star.iter().map(|(r, e)| format!("{}@r={}", fmt_num(e.value), r)).collect::<Vec<_>>().join(", ")
        ),
    });
    let _ = writeln!(md, "\n## A priori inequality, gradient (p = {}, q = {})\n", cfg.inequality.p, cfg.inequality.q);
    let _ = writeln!(
        md,
        "C(d,r) = 2 sqrt(d r) = {}; E(gamma0) = {} ± {}; C = {}; comparison constant C max(t0^1/2, t0^-1/2) = {}\n",
        fmt_num(grad.bdg_constant.unwrap_or(f64::NAN)),
        fmt_num(e_gamma.estimate.value),
        fmt_num(e_gamma.estimate.se),
        fmt_num(grad.constant),
        fmt_num(grad.effective_constant)
    );
    if let Some(w) = &e_gamma.warning {
        let _ = writeln!(md, "Integrability warning: {w}\n");
    }
    md.push_str(&inequality_table(&grad));
    let _ = writeln!(md, "\n## A priori inequality, second derivatives (fitted constant)\n");
    md.push_str(&inequality_table(&hess));

    // operator structure
    let pairs = symmetry_pairs(d);
    let pair_refs: Vec<(&dyn TestFunction, &dyn TestFunction)> = pairs.iter().map(|(f, g)| (f.as_ref(), g.as_ref())).collect();
    let sym = operator_symmetry_check(&model, &pair_refs, &ensemble)?;
    checks.push(CheckOutcome {
        name: "operator_symmetry".into(),
        passed: sym.iter().all(|r| r.passes),
        detail: format!("{} pairs, failures: {}", sym.len(), sym.iter().filter(|r| !r.passes).count()),
    });

    // stationarity, decay, moments
    let stat = stationarity_check(&model, &Square(0), &ensemble.truncated(STATIONARITY_STARTS), &STATIONARITY_TIMES, &salted(&settings, 6, 0))?;
    checks.push(CheckOutcome {
        name: "stationarity".into(),
        passed: stat.passes,
        detail: stat
            .points
            .iter()
            .map(|p| format!("t={}: {} ± {}", p.t, fmt_num(p.mean.value), fmt_num(p.mean.se)))
            .collect::<Vec<_>>()
            .join("; "),
    });
    let mean_bump = ensemble.iter().map(|x| fns[0].value(x)).sum::<f64>() / ensemble.len() as f64;
    let centered = Shifted { inner: Arc::clone(&fns[0]), offset: mean_bump };
    let decay = decay_check(&model, &centered, &ensemble.truncated(DECAY_STARTS), &DECAY_TIMES, DECAY_BATCH, &salted(&settings, 7, 0))?;
    checks.push(CheckOutcome {
        name: "decay".into(),
        passed: decay.passes,
        detail: decay
            .points
            .iter()
            .map(|p| format!("t={}: {} ± {}", p.t, fmt_num(p.norm.value), fmt_num(p.norm.se)))
            .collect::<Vec<_>>()
            .join("; "),
    });
    let moment_cfg = MomentTestConfig::new(MOMENT_RHO, MOMENT_RADII.to_vec(), MOMENT_HORIZON)?;
    let moments = moment_bound_check(&model, &moment_cfg, &ensemble.truncated(MOMENT_STARTS), &salted(&settings, 8, 0))?;
    checks.push(CheckOutcome {
        name: "moment_bound".into(),
        passed: moments.passes,
        detail: format!(
            "B(T) = {}; {}",
            fmt_num(moments.bound),
            moments
                .rows
                .iter()
                .map(|r| format!("R={}: E = {}, P[exit] = {} (envelope {})", r.radius, fmt_num(r.stopped_moment.value), fmt_num(r.exit_probability.value), fmt_num(r.envelope)))
                .collect::<Vec<_>>()
                .join("; ")
        ),
    });

    let _ = writeln!(md, "\n## Checks\n");
    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| vec![c.name.clone(), if c.passed { "pass".into() } else { "FAIL".into() }, c.detail.clone()])
        .collect();
    md.push_str(&markdown_table(&["check", "verdict", "detail"], &rows));
    let failures: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    let _ = writeln!(md, "\nOverall: {}", if failures.is_empty() { "PASS".to_string() } else { format!("FAIL ({})", failures.join(", ")) });

    let mut meta = run_meta(cfg, problem);
    meta.push(("t0", t0.to_string()));
    let mut ineq_rows = inequality_rows(&grad);
    ineq_rows.extend(inequality_rows(&hess));
    let outputs = [
        ("verify_report.md", md.clone()),
        ("checks.csv", csv_string("checks", &meta, &checks)?),
        ("gradient.csv", csv_string("gradient", &meta, &gradient_rows(problem.tag(), seed, &ibp))?),
        ("inequality.csv", csv_string("inequality", &meta, &ineq_rows)?),
    ];
    let mut files = Vec::new();
    for (name, contents) in outputs {
        let path = out_path(cfg, name);
        write_atomic(&path, &contents)?;
        files.push(path);
    }
    Ok(VerifyOutcome { t0, checks, markdown: md, files })
}

fn inequality_table(report: &InequalityReport) -> String {
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.f_id.clone(),
                format!("{} ± {}", fmt_num(r.lhs.value), fmt_num(r.lhs.se)),
                fmt_num(r.lf_q.value),
                fmt_num(r.f_q.value),
                format!("{} ± {}", fmt_num(r.ratio.value), fmt_num(r.ratio.se)),
                r.balanced_t0.map_or("-".into(), fmt_num),
                if r.passes { "pass".into() } else { "FAIL".into() },
            ]
        })
        .collect();
    markdown_table(&["f", "lhs", "||Lf||_q", "||f||_q", "ratio", "best t0", "verdict"], &rows)
}
