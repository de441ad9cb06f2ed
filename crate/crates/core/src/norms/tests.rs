use std::sync::Arc;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use super::*;
use crate::model::{battery, symmetry_pairs, Bump, Constant, Coordinate, Shifted, Square, TestProblem};
use crate::quadrature::stationary_expectation_1d;
use crate::sde::{sample_stationary, LangevinOptions, StationaryMethod};

fn ensemble(problem: TestProblem, n: usize, seed: u64) -> StationaryEnsemble {
    let model = problem.model();
    let method = if problem.model().normalizer().is_some() { StationaryMethod::Exact } else { StationaryMethod::Langevin };
    sample_stationary(&model, n, method, &LangevinOptions::default(), seed).unwrap()
}

fn refs(fns: &[Arc<dyn TestFunction>]) -> Vec<&dyn TestFunction> {
    fns.iter().map(|f| f.as_ref()).collect()
}

#[test]
fn lp_norm_examples() {
    assert_eq!(lp_norm(&[1.0; 100], 3.0).unwrap(), Estimate::exact(1.0));
    let ens = ensemble(TestProblem::Ou1d, 100_000, 1);
    let xs: Vec<f64> = ens.iter().map(|x| x[0]).collect();
    let two = lp_norm(&xs, 2.0).unwrap();
    assert!((two.value - 1.0).abs() < 0.02, "{two:?}");
    let four = lp_norm(&xs, 4.0).unwrap();
    assert!((four.value - 3.0f64.powf(0.25)).abs() < 0.03, "{four:?}");
    assert!(matches!(lp_norm(&[], 2.0), Err(Error::EmptyEnsemble)));
}

proptest! {
    #[test]
    fn lp_norms_increase_with_exponent(values in proptest::collection::vec(-50.0f64..50.0, 1..100), p in 1.0f64..4.0, dq in 0.0f64..4.0) {
        let lp = lp_norm(&values, p).unwrap().value;
        let lq = lp_norm(&values, p + dq).unwrap().value;
        prop_assert!(lp <= lq * (1.0 + 1e-12) + 1e-300);
    }
}

#[test]
fn exponents_and_constants() {
    assert_abs_diff_eq!(holder_exponent(2.0, 4.0).unwrap(), 4.0, epsilon = 1e-12);
    assert_abs_diff_eq!(holder_exponent(1.0, 2.0).unwrap(), 2.0, epsilon = 1e-12);
    assert_abs_diff_eq!(holder_exponent(1.5, 3.0).unwrap(), 3.0, epsilon = 1e-12);
    assert!(matches!(holder_exponent(1.0, 4.0), Err(Error::Unsupported(_))));
    assert!(matches!(holder_exponent(2.0, 2.0), Err(Error::InvalidArgument(_))));
    assert!(matches!(holder_exponent(0.5, 2.0), Err(Error::InvalidArgument(_))));
    assert_eq!(constant_c(1, 2.0, 1.0).unwrap(), bdg_constant(1, 2.0).unwrap());
    assert_abs_diff_eq!(bdg_constant(2, 4.0).unwrap(), 2.0 * 8.0f64.sqrt(), epsilon = 1e-12);
    let ratio = constant_c(2, 3.0, 2.6).unwrap() / constant_c(2, 3.0, 1.3).unwrap();
    assert_abs_diff_eq!(ratio, 2.0f64.powf(1.0 / 3.0), epsilon = 1e-12);
    assert!(matches!(bdg_constant(1, 1.5), Err(Error::Unsupported(_))));
}

#[test]
fn balanced_grid_and_minimizer() {
    let grid = balanced_grid(4.0);
    assert_eq!(grid.len(), 8);
    assert_eq!(grid[0], 4.0);
    assert_eq!(grid[7], 4.0 / 128.0);
    assert_eq!(balanced_t0(&[(1.0, 1.0)], 4.0), 1.0);
    assert_eq!(balanced_t0(&[(0.0, 1.0)], 4.0), 4.0);
    assert_eq!(balanced_t0(&[(1.0, 0.0)], 4.0), 4.0 / 128.0);
}

#[test]
fn exp_integrability_values() {
    for problem in [TestProblem::Ou1d, TestProblem::Rot2d { h: 1.0 }] {
        let e = exp_integrability(&problem.model(), &ensemble(problem, 1000, 2), 3.0).unwrap();
        assert_eq!(e.estimate, Estimate::exact(1.0));
        assert!(e.warning.is_none());
    }
    let model = TestProblem::Dw1d.model();
    let e = exp_integrability(&model, &ensemble(TestProblem::Dw1d, 50_000, 3), 0.1).unwrap();
    let quad = stationary_expectation_1d(&model, &|x| (0.1 * (2.0 - 6.0 * x * x).max(0.0)).exp(), 6.0).unwrap();
    assert!(e.estimate.within(quad, 3.0, 0.0), "{:?} vs {quad}", e.estimate);
}

#[test]
fn heavy_tail_is_flagged() {
    let model = TestProblem::Dw1d.model();
    let mut points = vec![1.0; 1999];
    points.push(0.0);
    let ens = StationaryEnsemble::from_points(1, points).unwrap();
    let e = exp_integrability(&model, &ens, 50.0).unwrap();
    assert!(e.warning.is_some());
}

#[test]
fn norm_profile_is_consistent() {
    let ens = ensemble(TestProblem::VarH2d, 5000, 4);
    let model = TestProblem::VarH2d.model();
    for f in battery(2) {
        let n = norm_profile(&model, f.as_ref(), &ens, 2.0, 4.0).unwrap();
        assert!(n.sobolev_1.value >= n.f_p.value);
        assert!(n.sobolev_2.value >= n.sobolev_1.value);
        assert!(n.f_q.value >= n.f_p.value);
        for e in [n.f_p, n.f_q, n.lf_q, n.grad_p, n.hess_p] {
            assert!(e.value >= 0.0 && e.se >= 0.0);
        }
    }
}

#[test]
fn gradient_inequality_holds_on_batteries() {
    let model = TestProblem::Ou1d.model();
    let ens = ensemble(TestProblem::Ou1d, 20_000, 5);
    let zero = check_gradient_inequality(&model, &[&Constant(0.0)], &ens, 2.0, 4.0, &HorizonPolicy::new(1.0, 4.0, 4.0).unwrap()).unwrap();
    assert!(zero.passes);
    assert_eq!(zero.rows[0].ratio.value, 0.0);
    let fns = battery(1);
    let report = check_gradient_inequality(&model, &refs(&fns), &ens, 2.0, 4.0, &HorizonPolicy::new(1.0, 4.0, 4.0).unwrap()).unwrap();
    assert!(report.passes, "{:?}", report.failures());
    assert_eq!(report.constant, report.effective_constant);
    assert_eq!(report.rows.len(), 12);
    assert!(report.rows.iter().all(|r| r.balanced_t0.is_some()));
    assert!(check_gradient_inequality(&model, &refs(&fns), &ens, 4.0, 2.0, &HorizonPolicy::new(1.0, 4.0, 4.0).unwrap()).is_err());
    assert!(check_gradient_inequality(&model, &refs(&fns), &ens, 2.0, 4.0, &HorizonPolicy::new(1.0, 4.0, 2.0).unwrap()).is_err());

    let dw = TestProblem::Dw1d.model();
    let dw_ens = ensemble(TestProblem::Dw1d, 20_000, 6);
    let report = check_gradient_inequality(&dw, &refs(&fns), &dw_ens, 1.5, 3.0, &HorizonPolicy::new(0.5, 1.5, 3.0).unwrap()).unwrap();
    assert!(report.passes, "{:?}", report.failures());
    assert!(report.effective_constant > report.constant);
}

#[test]
fn hessian_constant_is_stable() {
    for problem in [TestProblem::Ou1d, TestProblem::Dw1d] {
        let model = problem.model();
        let ens = ensemble(problem, 100_000, 7);
        let fns = battery(1);
        let report = check_hessian_inequality(&model, &refs(&fns), &ens, 2.0, 4.0, &[2.0, 4.0]).unwrap();
        assert!(report.passes, "{problem}: {} vs {:?}", report.constant, report.subsample_constant);
        assert_eq!(report.l2_star.len(), 2);
        let zero = check_hessian_inequality(&model, &[&Constant(0.0)], &ens, 2.0, 4.0, &[]).unwrap();
        assert!(zero.passes);
    }
}

#[test]
fn l2_star_for_ou() {
    let model = TestProblem::Ou1d.model();
    let ens = ensemble(TestProblem::Ou1d, 100_000, 8);
    // ||U||_{W^{2,2}}^2 = E[x^4]/4 + E[x^2] + 1 for U = x^2 / 2; H = 0
    let e = l2_star(&model, &ens, 2.0).unwrap();
    assert!(e.within(2.75f64.sqrt(), 3.0, 0.0), "{e:?}");
}

#[test]
fn operator_structure_on_pairs() {
    for problem in [TestProblem::Ou1d, TestProblem::Rot2d { h: 1.0 }, TestProblem::VarH2d] {
        let model = problem.model();
        let ens = ensemble(problem, 20_000, 9);
        let pairs = symmetry_pairs(model.dim());
        let refs: Vec<(&dyn TestFunction, &dyn TestFunction)> = pairs.iter().map(|(f, g)| (f.as_ref(), g.as_ref())).collect();
        let rows = operator_symmetry_check(&model, &refs, &ens).unwrap();
        assert_eq!(rows.len(), 6);
        for row in rows {
            assert!(row.passes, "{problem}: {row:?}");
        }
    }
}

#[test]
fn decay_of_ou_semigroup() {
    let model = TestProblem::Ou1d.model();
    let ens = ensemble(TestProblem::Ou1d, 400, 10);
    let settings = PathSettings::new(0, 1e-2, 11);
    let times = [0.0, 1.0, 2.0, 4.0, 8.0];
    let zero = decay_check(&model, &Constant(0.0), &ens, &times, 5, &settings).unwrap();
    assert!(zero.points.iter().all(|p| p.norm.value == 0.0));
    assert!(zero.passes);
    let report = decay_check(&model, &Coordinate(0), &ens, &times, 20, &settings).unwrap();
    // the empirical L2 norm of the starts scales every later value
    let start_norm = report.points[0].norm.value;
    for p in &report.points {
        let target = start_norm * (-p.t / 2.0).exp();
        assert!(p.norm.within(target, 3.0, 0.02), "t={}: {:?} vs {target}", p.t, p.norm);
    }
    assert!(report.passes, "{report:?}");
    assert!(decay_check(&model, &Coordinate(0), &ens, &[1.0, 0.5], 5, &settings).is_err());
}

#[test]
fn decay_of_centered_bump_on_double_well() {
    let model = TestProblem::Dw1d.model();
    let ens = ensemble(TestProblem::Dw1d, 300, 12);
    let bump = Bump::new(vec![0.0], 1.5);
    let mean = ensemble(TestProblem::Dw1d, 20_000, 13).iter().map(|x| bump.value(x)).sum::<f64>() / 20_000.0;
    let centered = Shifted { inner: Arc::new(bump), offset: mean };
    let report = decay_check(&model, &centered, &ens, &[0.0, 1.0, 2.0, 4.0, 8.0], 20, &PathSettings::new(0, 1e-2, 14)).unwrap();
    assert!(report.monotone, "{report:?}");
}

#[test]
fn stationarity_of_ou_and_double_well() {
    for problem in [TestProblem::Ou1d, TestProblem::Dw1d] {
        let model = problem.model();
        let ens = ensemble(problem, 5000, 15);
        let report = stationarity_check(&model, &Square(0), &ens, &[0.0, 1.0, 5.0], &PathSettings::new(0, 1e-2, 16)).unwrap();
        assert_eq!(report.points[0].drift_from_start, Estimate::exact(0.0));
        assert!(report.passes, "{problem}: {report:?}");
    }
}

#[test]
fn moment_bound_examples() {
    let model = TestProblem::Ou1d.model();
    let ens = ensemble(TestProblem::Ou1d, 2000, 17);
    let settings = PathSettings::new(0, 1e-2, 18);
    let at_zero = moment_bound_check(&model, &MomentTestConfig::new(0.4, vec![3.0, 5.0, 8.0], 0.0).unwrap(), &ens, &settings).unwrap();
    assert!(at_zero.passes);
    assert_eq!(at_zero.bound, at_zero.stationary_moment.value);
    let report = moment_bound_check(&model, &MomentTestConfig::new(0.4, vec![3.0, 5.0, 8.0], 5.0).unwrap(), &ens, &settings).unwrap();
    assert!(report.passes && report.exits_monotone, "{report:?}");
    assert!(report.rows[0].exit_probability.value > 0.0);
    assert!(MomentTestConfig::new(1.2, vec![3.0], 1.0).is_err());
    assert!(MomentTestConfig::new(0.4, vec![5.0, 3.0], 1.0).is_err());

    let dw = TestProblem::Dw1d.model();
    let report = moment_bound_check(&dw, &MomentTestConfig::new(0.4, vec![3.0, 5.0, 8.0], 5.0).unwrap(), &ensemble(TestProblem::Dw1d, 2000, 19), &settings).unwrap();
    assert!(report.passes, "{report:?}");
    assert!(report.bound > report.rows[0].stopped_moment.value);
}

#[test]
fn trace_bound_for_ou_matches_closed_form() {
    // u = -1/2: (1/t0) ((1 - e^{-r t0 / 2}) / (r t0 / 2))^{1/r} at r = 2, t0 = 1
    let model = TestProblem::Ou1d.model();
    let e = trace_moment_bound(&model, &ensemble(TestProblem::Ou1d, 100, 20), 1.0, 2.0).unwrap();
    assert_abs_diff_eq!(e.value, (1.0 - (-1.0f64).exp()).sqrt(), epsilon = 1e-12);
}
