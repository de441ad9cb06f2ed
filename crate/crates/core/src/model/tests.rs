use std::sync::Arc;

use approx::assert_abs_diff_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

/// Forwards only the mandatory routines, so `drift_b` and `grad b` take the
/// generic paths (formula from `H`, finite differences).
struct Generic<T>(T);

impl<T: Coefficients> Coefficients for Generic<T> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn potential(&self, x: &[f64]) -> f64 {
        self.0.potential(x)
    }
    fn grad_potential(&self, x: &[f64], out: &mut [f64]) {
        self.0.grad_potential(x, out)
    }
    fn hess_potential(&self, x: &[f64], out: &mut [f64]) {
        self.0.hess_potential(x, out)
    }
    fn antisym(&self, x: &[f64], out: &mut [f64]) {
        self.0.antisym(x, out)
    }
    fn grad_antisym(&self, x: &[f64], out: &mut [f64]) {
        self.0.grad_antisym(x, out)
    }
}

fn generic<T: Coefficients + 'static>(c: T) -> CoefficientModel {
    CoefficientModel::new("generic", Arc::new(Generic(c)))
}

fn random_points(dim: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect()).collect()
}

const ALL: [TestProblem; 4] = [TestProblem::Ou1d, TestProblem::Rot2d { h: 1.0 }, TestProblem::VarH2d, TestProblem::Dw1d];

#[test]
fn drift_b_examples() {
    assert_eq!(TestProblem::Ou1d.model().drift_b(&[0.7]).unwrap(), vec![0.0]);
    assert_eq!(TestProblem::Rot2d { h: 1.0 }.model().drift_b(&[1.0, 2.0]).unwrap(), vec![2.0, -1.0]);
    // b = (x1 x2, 1 - x1^2) by hand differentiation of H_12 = x1.
    let b = generic(VarH2d).drift_b(&[1.0, 1.0]).unwrap();
    assert_abs_diff_eq!(b[0], 1.0, epsilon = 1e-15);
    assert_abs_diff_eq!(b[1], 0.0, epsilon = 1e-15);
    let rot = generic(Rot2d { h: 1.0 }).drift_b(&[1.0, 2.0]).unwrap();
    assert_eq!(rot, vec![2.0, -1.0]);
}

#[test]
fn closed_form_drift_matches_generic_formula() {
    for problem in ALL {
        let fast = problem.model();
        let slow = match problem {
            TestProblem::Ou1d => generic(Ou1d),
            TestProblem::Rot2d { h } => generic(Rot2d { h }),
            TestProblem::VarH2d => generic(VarH2d),
            TestProblem::Dw1d => generic(Dw1d),
        };
        for x in random_points(problem.dim(), 100, 1) {
            let a = fast.drift_b(&x).unwrap();
            let b = slow.drift_b(&x).unwrap();
            for (u, v) in a.iter().zip(&b) {
                assert_abs_diff_eq!(u, v, epsilon = 1e-12);
            }
            // finite-difference grad b against the closed form
            let ga = fast.grad_b(&x).unwrap();
            let gb = slow.grad_b(&x).unwrap();
            assert!((ga - gb).abs().max() < 1e-7, "{problem} at {x:?}");
        }
    }
}

#[test]
fn curvature_examples() {
    let ou = TestProblem::Ou1d.model().curvature(&[0.3]).unwrap();
    assert_eq!(ou.matrix[(0, 0)], -0.5);
    assert_eq!(ou.sup, -0.5);
    for h in [0.0, 1.0, 10.0] {
        let rot = TestProblem::Rot2d { h }.model().curvature(&[0.4, -1.1]).unwrap();
        assert_abs_diff_eq!(rot.sup, -0.5, epsilon = 1e-14);
    }
    let dw = TestProblem::Dw1d.model().curvature(&[0.0]).unwrap();
    assert_eq!(dw.sup, 2.0);
    let dw = TestProblem::Dw1d.model().curvature(&[0.5]).unwrap();
    assert_abs_diff_eq!(dw.sup, 2.0 - 6.0 * 0.25, epsilon = 1e-14);
}

#[test]
fn sup_dominates_random_directions() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for problem in [TestProblem::Rot2d { h: 3.0 }, TestProblem::VarH2d] {
        let model = problem.model();
        for x in random_points(2, 20, 2) {
            let c = model.curvature(&x).unwrap();
            let mut best = f64::NEG_INFINITY;
            for _ in 0..1000 {
                let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let l = nalgebra::DVector::from_vec(vec![theta.cos(), theta.sin()]);
                best = best.max((&c.matrix * &l).dot(&l));
            }
            assert!(best <= c.sup + 1e-6);
            assert!(c.sup - best < 1e-3);
        }
    }
}

#[test]
fn structural_symmetries() {
    for problem in ALL {
        let model = problem.model();
        let d = problem.dim();
        let coeffs = model.coefficients();
        for x in random_points(d, 50, 3) {
            let h = model.antisym(&x).unwrap();
            assert_eq!(h.clone(), -h.transpose());
            let mut hess = vec![0.0; d * d];
            coeffs.hess_potential(&x, &mut hess);
            let hess = crate::linalg::to_matrix(d, &hess);
            assert_eq!(hess.clone(), hess.transpose());

            let mut grad_h = vec![0.0; d * d * d];
            coeffs.grad_antisym(&x, &mut grad_h);
            let eps = 1e-5;
            for k in 0..d {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += eps;
                xm[k] -= eps;
                let fd = (model.antisym(&xp).unwrap() - model.antisym(&xm).unwrap()) / (2.0 * eps);
                for i in 0..d {
                    for j in 0..d {
                        assert_abs_diff_eq!(fd[(i, j)], grad_h[(k * d + i) * d + j], epsilon = 1e-8);
                    }
                }
            }
        }
    }
}

#[test]
fn operator_examples() {
    let ou = TestProblem::Ou1d.model();
    assert_eq!(ou.apply_l(&Coordinate(0), &[1.0]).unwrap(), -0.5);
    assert_eq!(ou.apply_l(&Square(0), &[1.0]).unwrap(), 0.0);
    assert_eq!(ou.apply_a(&Square(0), &[0.3]).unwrap(), 0.0);
    assert_eq!(ou.apply_generator(&Square(0), &[0.0]).unwrap(), 1.0);
    let dw = TestProblem::Dw1d.model();
    assert_abs_diff_eq!(dw.apply_l(&Coordinate(0), &[0.5]).unwrap(), 0.75, epsilon = 1e-15);

    let rot = TestProblem::Rot2d { h: 1.0 }.model();
    assert_eq!(rot.apply_a(&Coordinate(0), &[1.0, 2.0]).unwrap(), 1.0);
    assert_eq!(rot.apply_generator(&Coordinate(0), &[1.0, 2.0]).unwrap(), 0.5);
    let varh = TestProblem::VarH2d.model();
    assert_abs_diff_eq!(varh.apply_a(&Coordinate(1), &[1.0, 1.0]).unwrap(), 0.0, epsilon = 1e-15);

    assert_eq!(ou.total_drift(&[1.0]).unwrap(), vec![-0.5]);
    assert_eq!(rot.total_drift(&[1.0, 2.0]).unwrap(), vec![0.5, -1.5]);
    assert_eq!(dw.total_drift(&[1.0]).unwrap(), vec![0.0]);
}

#[test]
fn generator_is_sum_and_matches_divergence_form() {
    for problem in ALL {
        let model = problem.model();
        let d = problem.dim();
        let fs = battery(d);
        for (n, x) in random_points(d, 100, 4).into_iter().enumerate() {
            let f = fs[n % fs.len()].as_ref();
            let full = model.apply_generator(f, &x).unwrap();
            let parts = model.apply_l(f, &x).unwrap() + model.apply_a(f, &x).unwrap();
            assert_eq!(full, parts);
            let fd = divergence_form_fd(&model, f, &x, 1e-4).unwrap();
            assert!((full - fd).abs() < 1e-5 * (1.0 + full.abs()), "{problem} {} at {x:?}: {full} vs {fd}", f.id());
        }
    }
}

#[test]
fn divergence_form_error_is_second_order() {
    let model = TestProblem::Dw1d.model();
    let f = Bump::new(vec![0.2], 1.5);
    let x = [0.4];
    let exact = model.apply_generator(&f, &x).unwrap();
    let e1 = (divergence_form_fd(&model, &f, &x, 1e-2).unwrap() - exact).abs();
    let e2 = (divergence_form_fd(&model, &f, &x, 5e-3).unwrap() - exact).abs();
    let ratio = e1 / e2;
    assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn test_function_derivatives_match_finite_differences() {
    for d in [1, 2, 3] {
        for f in battery(d) {
            for x in random_points(d, 30, 5) {
                let eps = 1e-5;
                let mut g = vec![0.0; d];
                let mut hess = vec![0.0; d * d];
                f.gradient(&x, &mut g);
                f.hessian(&x, &mut hess);
                for i in 0..d {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += eps;
                    xm[i] -= eps;
                    let fd = (f.value(&xp) - f.value(&xm)) / (2.0 * eps);
                    assert_abs_diff_eq!(fd, g[i], epsilon = 1e-6);
                    let mut gp = vec![0.0; d];
                    let mut gm = vec![0.0; d];
                    f.gradient(&xp, &mut gp);
                    f.gradient(&xm, &mut gm);
                    for j in 0..d {
                        assert_abs_diff_eq!((gp[j] - gm[j]) / (2.0 * eps), hess[j * d + i], epsilon = 1e-5);
                    }
                }
            }
        }
    }
}

#[test]
fn battery_has_twelve_members() {
    assert_eq!(battery(1).len(), 12);
    assert_eq!(battery(2).len(), 12);
    assert_eq!(symmetry_pairs(2).len(), 6);
}

#[test]
fn non_finite_evaluation_is_reported() {
    let model = TestProblem::Ou1d.model();
    match model.drift_b(&[f64::NAN]) {
        Err(Error::NonFinite { x, .. }) => assert!(x[0].is_nan()),
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(model.total_drift(&[1.0, 2.0]), Err(Error::InvalidArgument(_))));
}

#[test]
fn parse_tags() {
    assert_eq!("ou1d".parse::<TestProblem>().unwrap(), TestProblem::Ou1d);
    assert_eq!("ROT2D".parse::<TestProblem>().unwrap().with_rotation(2.0), TestProblem::Rot2d { h: 2.0 });
    assert!("nope".parse::<TestProblem>().is_err());
}
