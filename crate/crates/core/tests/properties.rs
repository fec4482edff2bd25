use freeholo::approx::{certify_error, order_for_tolerance};
use freeholo::expr::{eval_expr, from_free_poly, parse, print, to_free_poly};
use freeholo::ncpoint::{conjugate, in_gdelta, nc_derivative, point_direct_sum};
use freeholo::realize::{neumann_order, Realization};
use freeholo::sample::Sampler;
use freeholo::{CMatrix, Complex64, FreePoly, GradedPoint, NcFunction, PolyMatrix};
use proptest::prelude::*;

fn origin(d: usize, n: usize) -> GradedPoint {
    GradedPoint::scalar_at_level(&vec![Complex64::new(0.0, 0.0); d], n).unwrap()
}

fn rel(a: &CMatrix, b: &CMatrix) -> f64 {
    a.max_abs_diff(b) / a.op_norm().max(b.op_norm()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn direct_sum_norm_is_max(seed in any::<u64>(), n in 1usize..4, m in 1usize..4) {
        let mut s = Sampler::new(seed);
        let (a, b) = (s.gaussian(n, n), s.gaussian(m, m + 1));
        let sum = a.direct_sum(&b);
        prop_assert!((sum.op_norm() - a.op_norm().max(b.op_norm())).abs() < 1e-10 * sum.op_norm().max(1.0));
    }

    #[test]
    fn inverse_of_inverse(seed in any::<u64>(), n in 1usize..5) {
        let mut s = Sampler::new(seed);
        let a = s.invertible(n, 50.0);
        let back = a.inv().unwrap().matrix.inv().unwrap().matrix;
        prop_assert!(rel(&a, &back) < 1e-10);
    }

    #[test]
    fn kron_norm_is_multiplicative(seed in any::<u64>(), n in 1usize..4, m in 1usize..4) {
        let mut s = Sampler::new(seed);
        let (a, b) = (s.gaussian(n, m), s.gaussian(m, n));
        let k = a.kron(&b);
        prop_assert!((k.op_norm() - a.op_norm() * b.op_norm()).abs() < 1e-10 * k.op_norm().max(1.0));
    }

    #[test]
    fn evaluation_is_a_ring_homomorphism(seed in any::<u64>(), d in 1usize..4, n in 1usize..4) {
        let mut s = Sampler::new(seed);
        let (p, q) = (s.poly(d, 3, 5), s.poly(d, 3, 5));
        let x = s.point(d, n, 1.0);
        let (px, qx) = (p.eval(&x).unwrap(), q.eval(&x).unwrap());
        prop_assert!(rel(&p.mul(&q).eval(&x).unwrap(), &(&px * &qx)) < 1e-12);
        prop_assert!(rel(&p.add(&q).eval(&x).unwrap(), &(&px + &qx)) < 1e-12);
    }

    #[test]
    fn polynomials_respect_direct_sums_and_similarities(seed in any::<u64>(), d in 1usize..4, n in 1usize..4) {
        let mut s = Sampler::new(seed);
        let p = s.poly(d, 4, 6);
        let (x, y) = (s.point(d, n, 1.0), s.point(d, 2, 1.0));
        let lhs = p.eval(&point_direct_sum(&x, &y).unwrap()).unwrap();
        prop_assert!(rel(&lhs, &p.eval(&x).unwrap().direct_sum(&p.eval(&y).unwrap())) < 1e-12);

        let sim = s.invertible(n, 10.0);
        let sx = conjugate(&x, &sim).unwrap();
        let expected = &(&sim.inv().unwrap().matrix * &p.eval(&x).unwrap()) * &sim;
        prop_assert!(rel(&p.eval(&sx).unwrap(), &expected) < 1e-9);
    }

    #[test]
    fn membership_is_unitarily_invariant(seed in any::<u64>(), n in 1usize..4) {
        let mut s = Sampler::new(seed);
        let delta = PolyMatrix::row_ball(2);
        let x = s.point(2, n, 1.0);
        let u = s.haar_unitary(n);
        let (a, b) = (delta.norm_at(&x).unwrap(), delta.norm_at(&conjugate(&x, &u).unwrap()).unwrap());
        prop_assert!((a - b).abs() < 1e-12 * a.max(1.0));
    }

    #[test]
    fn membership_in_a_direct_sum_of_deltas(seed in any::<u64>(), n in 1usize..4) {
        let mut s = Sampler::new(seed);
        let (d1, d2) = (PolyMatrix::row_ball(2), PolyMatrix::polydisk(2));
        let both = d1.direct_sum(&d2).unwrap();
        let x = s.point(2, n, 1.2);
        let inside = |d: &PolyMatrix| in_gdelta(d, &x, 1e-9).unwrap().is_inside();
        prop_assert_eq!(inside(&both), inside(&d1) && inside(&d2));
    }

    #[test]
    fn sampled_points_are_inside(seed in any::<u64>(), n in 1usize..4) {
        let mut s = Sampler::new(seed);
        let delta = PolyMatrix::row_ball(3);
        let x = s.point_inside(&delta, &origin(3, n), 1e-3).unwrap();
        prop_assert!(in_gdelta(&delta, &x, 1e-9).unwrap().is_inside());
    }

    #[test]
    fn derivative_is_linear_in_the_direction(seed in any::<u64>(), n in 1usize..3) {
        let mut s = Sampler::new(seed);
        let p = s.poly(2, 4, 6);
        let m = s.point(2, n, 1.0);
        let (e, f) = (s.point(2, n, 1.0), s.point(2, n, 1.0));
        let k = Complex64::new(0.7, -1.3);
        let combo = e.zip_with(&f, |a, b| &a.scale(k) + b).unwrap();
        let lhs = nc_derivative(&p, &m, &combo).unwrap();
        let rhs = &nc_derivative(&p, &m, &e).unwrap().scale(k) + &nc_derivative(&p, &m, &f).unwrap();
        prop_assert!(rel(&lhs, &rhs) < 1e-10);
    }

    #[test]
    fn realizations_respect_direct_sums(seed in any::<u64>(), mult in 1usize..4) {
        let mut s = Sampler::new(seed);
        let delta = PolyMatrix::row_ball(2);
        let j1 = s.isometry(1 + 2 * mult, 1 + mult).unwrap();
        let r = Realization::new(delta.clone(), 1, 1, mult, j1).unwrap();
        let x = s.point_inside(&delta, &origin(2, 1), 1e-3).unwrap();
        let y = s.point_inside(&delta, &origin(2, 2), 1e-3).unwrap();
        let lhs = r.eval(&point_direct_sum(&x, &y).unwrap()).unwrap();
        prop_assert!(rel(&lhs, &r.eval(&x).unwrap().direct_sum(&r.eval(&y).unwrap())) < 1e-10);
    }

    #[test]
    fn printed_polynomials_parse_back(seed in any::<u64>(), d in 1usize..4, n in 1usize..3) {
        let mut s = Sampler::new(seed);
        let p = s.poly(d, 3, 5);
        let text = print(&from_free_poly(&p));
        let ast = parse(&text, d).unwrap();
        let x = s.point(d, n, 1.0);
        prop_assert!(rel(&eval_expr(&ast, &x).unwrap(), &p.eval(&x).unwrap()) < 1e-12);
        let q = to_free_poly(&ast, d).unwrap();
        let diff = q.sub(&p);
        prop_assert!(diff.terms().all(|(_, c)| c.norm() < 1e-12));
    }

    #[test]
    fn neumann_order_is_minimal(r in 0.01f64..0.95, exp in 2i32..12) {
        let tol = 10f64.powi(-exp);
        let (k, bound) = neumann_order(r, tol).unwrap();
        prop_assert!(bound <= tol);
        if k > 0 {
            let tail = |k: usize| r.powi(k as i32 + 2) / (1.0 - r);
            prop_assert!(tail(k - 1) > tol);
        }
    }

    #[test]
    fn certified_error_order_is_minimal(t in 1.05f64..10.0, exp in 2i32..10) {
        let tol = 10f64.powi(-exp);
        let k = order_for_tolerance(t, tol).unwrap();
        prop_assert!(certify_error(k, t) <= tol);
        if k > 0 {
            prop_assert!(certify_error(k - 1, t) > tol);
        }
        prop_assert!(certify_error(k + 1, t) < certify_error(k, t));
    }
}

#[test]
fn scalar_polynomial_constant_term_survives_round_trip() {
    let p = FreePoly::constant(2, Complex64::new(0.0, 2.5)).add(&FreePoly::var(2, 2));
    let ast = parse(&print(&from_free_poly(&p)), 2).unwrap();
    assert_eq!(to_free_poly(&ast, 2).unwrap(), p);
}
