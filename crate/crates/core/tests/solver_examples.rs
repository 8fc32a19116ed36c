use fracvar::solver::{discretize_functional, solve_direct, verify_extremal, Boundary, ProblemConfig, ProblemSpec, SolveOptions, SolveResult};
use fracvar::{DerivativeKind, GridFunction, MemoryWindow};

fn gamma(x: f64) -> f64 {
    let mut shift = 1.0;
    let mut z = x;
    while z < 12.0 {
        shift *= z;
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let series = inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)));
    ((z - 0.5) * z.ln() - z + 0.5 * (2.0 * std::f64::consts::PI).ln() + series).exp() / shift
}

fn mittag_leffler(alpha: f64, z: f64) -> f64 {
    (0..60).map(|k| z.powi(k) / gamma(alpha * k as f64 + 1.0)).sum()
}

fn config(id: &str, alpha: f64, n: usize, right: Option<f64>) -> ProblemConfig {
    ProblemConfig {
        lagrangian: id.into(),
        alpha,
        window: None,
        kind: None,
        boundary: Boundary { left: 1.0, right },
        n,
        optimizer: SolveOptions::default(),
    }
}

fn solve(cfg: &ProblemConfig) -> (ProblemSpec, SolveResult) {
    let spec = cfg.to_spec().unwrap();
    let res = solve_direct(&spec, &spec.default_initial().unwrap(), &cfg.optimizer).unwrap();
    (spec, res)
}

#[test]
fn mittag_leffler_endpoint_improves_under_refinement() {
    let exact = mittag_leffler(0.5, 1.0);
    let errors: Vec<f64> = [128, 512]
        .iter()
        .map(|&n| {
            let (_, res) = solve(&config("caputo-eigen", 0.5, n, None));
            assert!(res.converged, "n = {n}");
            (res.u.last() - exact).abs()
        })
        .collect();
    assert!(errors[1] < errors[0], "{errors:?}");
}

#[test]
fn mittag_leffler_profile_and_residual() {
    let (spec, res) = solve(&config("caputo-eigen", 0.5, 256, None));
    let worst = (0..=256)
        .map(|k| {
            let t = res.u.t(k);
            let exact = mittag_leffler(0.5, t.sqrt());
            (res.u.values()[k] - exact).abs() / exact
        })
        .fold(0.0f64, f64::max);
    assert!(worst < 2e-2, "{worst}");
    let report = verify_extremal(&spec, &res).unwrap();
    assert!(report.interior_sup <= 1e-4, "{}", report.interior_sup);

    // The exact solution sampled on the grid is nearly optimal.
    let sampled = GridFunction::from_fn(res.u.shape(), |t| mittag_leffler(0.5, t.sqrt())).unwrap();
    let j = discretize_functional(&spec, &sampled).unwrap();
    assert!(j < 1e-3, "{j}");
    assert!(res.objective <= j);
}

#[test]
fn near_integer_order_approaches_the_exponential() {
    let (_, res) = solve(&config("caputo-eigen", 0.999, 128, None));
    let worst = (0..=128)
        .map(|k| (res.u.values()[k] - res.u.t(k).exp()).abs() / res.u.t(k).exp())
        .fold(0.0f64, f64::max);
    assert!(worst < 0.05, "{worst}");
}

#[test]
fn first_example_stays_at_the_constant() {
    // The weight of d_u blows up at t = 1, so the deviation from u ≡ 1 is
    // largest there; it is second order in h.
    let deviation_at = |n: usize, t: f64| {
        let (spec, res) = solve(&config("example1", 0.5, n, None));
        assert!(res.converged);
        assert!(verify_extremal(&spec, &res).unwrap().interior_sup < 1e-2);
        let mid = (0..=n).filter(|&k| (0.05..=0.8).contains(&res.u.t(k))).map(|k| (res.u.values()[k] - 1.0).abs());
        assert!(mid.fold(0.0f64, f64::max) < 1e-4);
        (res.u.values()[(t * n as f64).round() as usize] - 1.0).abs()
    };
    let (coarse, fine) = (deviation_at(256, 0.95), deviation_at(512, 0.95));
    assert!(coarse < 3e-3, "{coarse}");
    assert!(fine < 0.5 * coarse, "{fine} vs {coarse}");
}

#[test]
fn memory_window_solve() {
    let cfg = config("caputo-eigen", 0.5, 150, None);
    let mut spec = cfg.to_spec().unwrap();
    spec.window = MemoryWindow::new(-0.5, 0.0, 1.0, 1.0).unwrap();
    spec.validate().unwrap();
    assert_eq!(spec.kind, DerivativeKind::Caputo);
    let res = solve_direct(&spec, &spec.default_initial().unwrap(), &cfg.optimizer).unwrap();
    assert!(res.converged);
    assert!(res.objective < 1e-8, "{}", res.objective);
    assert!(res.el_check.interior_sup < 1e-4, "{}", res.el_check.interior_sup);
}

#[test]
fn result_files_round_trip() {
    let (_, res) = solve(&config("quadratic", 0.5, 32, Some(0.0)));
    let dir = std::env::temp_dir().join(format!("fracvar-solve-{}", std::process::id()));
    res.save(&dir).unwrap();
    let back = SolveResult::from_json(&std::fs::read_to_string(dir.join("result.json")).unwrap()).unwrap();
    assert_eq!(back, res);
    assert_eq!(GridFunction::load_csv(dir.join("solution.csv")).unwrap(), res.u);
    std::fs::remove_dir_all(dir).unwrap();
}
