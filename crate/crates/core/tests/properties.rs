use fracvar::euler_lagrange::residual_corrected;
use fracvar::lagrangian::builtin;
use fracvar::operators::{caputo_derivative, frac_integral, rl_derivative};
use fracvar::solver::{solve_direct, Boundary, ProblemConfig, SolveOptions};
use fracvar::weak::{pairing, TestFunction};
use fracvar::{FractionalOrder, GridFunction, GridShape, Lagrangian, Side};
use proptest::prelude::*;

fn shape(n: usize) -> GridShape {
    GridShape::new(0.0, 1.0, n).unwrap()
}

fn poly(shape: GridShape, c: &[f64]) -> GridFunction {
    GridFunction::from_fn(shape, |t| c.iter().rev().fold(0.0, |acc, ci| acc * t + ci)).unwrap()
}

fn side() -> impl Strategy<Value = Side> {
    prop_oneof![Just(Side::Left), Just(Side::Right)]
}

fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, 1..5)
}

fn close(x: &[f64], y: &[f64], tol: f64) -> bool {
    let scale = x.iter().chain(y).fold(1.0f64, |m, v| m.max(v.abs()));
    x.iter().zip(y).all(|(a, b)| (a - b).abs() <= tol * scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn derivatives_are_linear(
        cu in coeffs(), cv in coeffs(), c1 in -2.0..2.0f64, c2 in -2.0..2.0f64,
        alpha in 0.05..0.95f64, side in side(),
    ) {
        let s = shape(128);
        let (u, v) = (poly(s, &cu), poly(s, &cv));
        let order = FractionalOrder::new(alpha).unwrap();
        let mix = u.combine(c1, &v, c2).unwrap();
        for op in [rl_derivative, caputo_derivative, frac_integral] {
            let lhs = op(&mix, order, side).unwrap();
            let rhs = op(&u, order, side).unwrap().combine(c1, &op(&v, order, side).unwrap(), c2).unwrap();
            prop_assert!(close(lhs.values(), rhs.values(), 1e-11));
        }
    }

    #[test]
    fn zero_order_derivative_is_identity(c in coeffs(), side in side()) {
        let u = poly(shape(64), &c);
        let zero = FractionalOrder::new(0.0).unwrap();
        prop_assert!(close(rl_derivative(&u, zero, side).unwrap().values(), u.values(), 1e-12));
        prop_assert!(close(caputo_derivative(&u, zero, side).unwrap().values(), u.values(), 1e-12));
    }

    #[test]
    fn pairing_is_bilinear(cu in coeffs(), cv in coeffs(), c1 in -2.0..2.0f64, c2 in -2.0..2.0f64, deg in 0u32..6) {
        let s = shape(200);
        let (u, v) = (poly(s, &cu), poly(s, &cv));
        let phi = TestFunction::monomial(deg);
        let lhs = pairing(&u.combine(c1, &v, c2).unwrap(), &phi);
        let rhs = c1 * pairing(&u, &phi) + c2 * pairing(&v, &phi);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn residual_scales_with_lagrangian(c in -4.0..4.0f64, cu in coeffs(), alpha in 0.1..0.9f64) {
        let order = FractionalOrder::new(alpha).unwrap();
        let l = builtin("quadratic", order).unwrap().lagrangian;
        let u = poly(shape(128), &cu);
        let base = residual_corrected(&l, &u, order).unwrap();
        let scaled = residual_corrected(&l.scaled(c), &u, order).unwrap();
        let expected = base.residual.scale(c);
        prop_assert!(close(scaled.residual.values(), expected.values(), 1e-12));
    }

    #[test]
    fn zero_lagrangian_has_zero_residual(cu in coeffs(), alpha in 0.0..0.95f64) {
        let order = FractionalOrder::new(alpha).unwrap();
        let report = residual_corrected(&Lagrangian::zero(), &poly(shape(64), &cu), order).unwrap();
        prop_assert!(report.residual.values().iter().all(|&v| v == 0.0));
        prop_assert_eq!(report.interior_sup, 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn solver_never_increases_the_objective(
        id in prop::sample::select(vec!["rl-eigen", "caputo-eigen", "quadratic"]),
        alpha in 0.1..0.9f64, left in -2.0..2.0f64, right in prop::option::of(-2.0..2.0f64),
    ) {
        let cfg = ProblemConfig {
            lagrangian: id.into(),
            alpha,
            window: None,
            kind: None,
            boundary: Boundary { left, right },
            n: 32,
            optimizer: SolveOptions { max_iter: 200, ..SolveOptions::default() },
        };
        let spec = cfg.to_spec().unwrap();
        let res = solve_direct(&spec, &spec.default_initial().unwrap(), &cfg.optimizer).unwrap();
        prop_assert!(res.objective <= res.trace[0] + 1e-12 * (1.0 + res.trace[0].abs()));
        prop_assert!(res.trace.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(res.u.first(), left);
        if let Some(r) = right {
            prop_assert_eq!(res.u.last(), r);
        }
    }
}
