//! Direct method: the action integral is discretized on the grid and
//! minimized over the free grid values with L-BFGS.
//!
//! The grid spans `[a, B]`: the left derivative at `t <= B` never looks past
//! `B`, so the values on `(B, b]` do not enter the functional. Values on the
//! memory segment `(a, A)` are free variables. The fractional derivative is a
//! dense weight matrix `W` (`p = W u`), and the gradient of
//! `J(u) = Σ ω_k L(t_k, u_k, p_k)` is `ω∘∂L/∂u + Wᵀ(ω∘∂L/∂p)`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FracError, Result};
use crate::euler_lagrange::{lagrangian_derivative, residual_generalized_with, ElOptions, ResidualReport};
use crate::grid::{EndpointMask, FractionalOrder, GridFunction, GridShape, MemoryWindow};
use crate::lagrangian::{builtin, Lagrangian};
use crate::lbfgs::{minimize, LbfgsOptions, StopReason};
use crate::operators::{derivative_matrix, DenseMatrix, DerivativeKind};

/// Pinned boundary values: `u(a)` always, `u(B)` optionally.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub left: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub lagrangian: Lagrangian,
    pub window: MemoryWindow,
    pub order: FractionalOrder,
    pub kind: DerivativeKind,
    pub boundary: Boundary,
    /// Number of intervals on `[a, B]`.
    pub grid_n: usize,
}

impl ProblemSpec {
    pub fn shape(&self) -> Result<GridShape> {
        GridShape::new(self.window.memory_start, self.window.action_end, self.grid_n)
    }

    pub fn validate(&self) -> Result<()> {
        self.window.validate()?;
        if !self.boundary.left.is_finite() || self.boundary.right.is_some_and(|r| !r.is_finite()) {
            return Err(FracError::Boundary("boundary values must be finite".into()));
        }
        let w = &self.window;
        if self.kind == DerivativeKind::RieszCaputo && (w.has_memory() || w.action_end < w.end) {
            return Err(FracError::InvalidWindow("the Riesz-Caputo derivative needs a = A and B = b".into()));
        }
        let shape = self.shape()?;
        let ia = match shape.node_index(w.action_start) {
            Some(k) if k == 0 || k >= 2 => k,
            _ => {
                return Err(FracError::InvalidWindow(format!(
                    "A = {} must be a grid node, with a = A or at least 2 intervals before it",
                    w.action_start
                )))
            }
        };
        if shape.n - ia < 2 {
            return Err(FracError::InvalidWindow("the action interval needs at least 2 grid intervals".into()));
        }
        Ok(())
    }

    /// Linear interpolation of the boundary data, or the constant `u(a)` when
    /// the right end is free.
    pub fn default_initial(&self) -> Result<GridFunction> {
        let shape = self.shape()?;
        let left = self.boundary.left;
        let right = self.boundary.right.unwrap_or(left);
        let mut values: Vec<f64> =
            shape.nodes().iter().map(|&t| left + (right - left) * (t - shape.a) / (shape.b - shape.a)).collect();
        values[shape.n] = right;
        GridFunction::new(shape, values)
    }

    fn check_candidate(&self, u: &GridFunction) -> Result<()> {
        let shape = self.shape()?;
        if !u.shape().same_as(&shape) {
            return Err(FracError::GridMismatch(format!(
                "candidate grid [{}, {}] with n = {} differs from the problem grid [{}, {}] with n = {}",
                u.a(),
                u.b(),
                u.n(),
                shape.a,
                shape.b,
                shape.n
            )));
        }
        let pin_ok = |have: f64, want: f64| (have - want).abs() <= 1e-12 * (1.0 + want.abs());
        if !pin_ok(u.first(), self.boundary.left) {
            return Err(FracError::Boundary(format!("u(a) = {} but the problem pins {}", u.first(), self.boundary.left)));
        }
        if let Some(r) = self.boundary.right {
            if !pin_ok(u.last(), r) {
                return Err(FracError::Boundary(format!("u(B) = {} but the problem pins {r}", u.last())));
            }
        }
        Ok(())
    }

    /// Trapezoid weights over `[A, B]` (zero on the memory segment) and the
    /// abscissae at which `L` is evaluated. At an end of the action interval
    /// where `L` is not finite, e.g. through a weight like `(1-t)^(-α)`, the
    /// end node's term is evaluated half a step inside the interval.
    pub fn quadrature(&self) -> Result<Quadrature> {
        let shape = self.shape()?;
        let ia = shape.node_index(self.window.action_start).unwrap_or(0);
        let h = shape.step();
        let mut weights = vec![0.0; shape.len()];
        for (k, wk) in weights.iter_mut().enumerate().skip(ia) {
            *wk = if k == ia || k == shape.n { 0.5 * h } else { h };
        }
        let mut nodes = shape.nodes();
        let singular = |t: f64| {
            [(1.0, 1.0), (0.5, -0.5), (-1.0, 2.0)]
                .iter()
                .any(|&(u, p)| !self.lagrangian.value(t, u, p).is_finite())
        };
        if singular(nodes[ia]) {
            nodes[ia] += 0.5 * h;
        }
        if singular(shape.b) {
            nodes[shape.n] -= 0.5 * h;
        }
        Ok(Quadrature { weights, nodes })
    }
}

/// Weights `ω_k` and evaluation abscissae of the discretized action integral.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadrature {
    pub weights: Vec<f64>,
    pub nodes: Vec<f64>,
}

fn evaluate(l: &Lagrangian, q: &Quadrature, u: &[f64], p: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (k, &w) in q.weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let t = q.nodes[k];
        let v = l.value(t, u[k], p[k]);
        if !v.is_finite() {
            return Err(FracError::NonFinite(format!("L({t}, {}, {}) = {v}", u[k], p[k])));
        }
        total += w * v;
    }
    Ok(total)
}

/// Composite trapezoid value of the action integral at `u`, with `p` the
/// problem's fractional derivative of `u` computed from `a`.
pub fn discretize_functional(spec: &ProblemSpec, u: &GridFunction) -> Result<f64> {
    spec.validate()?;
    spec.check_candidate(u)?;
    let p = lagrangian_derivative(u, spec.order, spec.kind)?;
    evaluate(&spec.lagrangian, &spec.quadrature()?, u.values(), p.values())
}

/// The discretized functional with its precomputed derivative matrix, giving
/// the objective and its full gradient (pinned entries included).
pub struct Discretization {
    spec: ProblemSpec,
    shape: GridShape,
    quadrature: Quadrature,
    matrix: DenseMatrix,
}

impl Discretization {
    pub fn new(spec: &ProblemSpec) -> Result<Self> {
        spec.validate()?;
        let shape = spec.shape()?;
        Ok(Self {
            spec: spec.clone(),
            shape,
            quadrature: spec.quadrature()?,
            matrix: derivative_matrix(shape, spec.order, spec.kind)?,
        })
    }

    pub fn objective(&self, u: &[f64]) -> Result<f64> {
        evaluate(&self.spec.lagrangian, &self.quadrature, u, &self.matrix.mul_vec(u))
    }

    pub fn objective_gradient(&self, u: &[f64]) -> Result<(f64, Vec<f64>)> {
        let p = self.matrix.mul_vec(u);
        let l = &self.spec.lagrangian;
        let q = &self.quadrature;
        let value = evaluate(l, q, u, &p)?;
        let mut grad = vec![0.0; u.len()];
        let mut wdp = vec![0.0; u.len()];
        for (k, &w) in q.weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let t = q.nodes[k];
            grad[k] = w * l.d_u(t, u[k], p[k]);
            wdp[k] = w * l.d_p(t, u[k], p[k]);
        }
        for (g, a) in grad.iter_mut().zip(self.matrix.tr_mul_vec(&wdp)) {
            *g += a;
        }
        if let Some(k) = grad.iter().position(|g| !g.is_finite()) {
            return Err(FracError::NonFinite(format!("gradient entry at t = {} is {}", self.shape.t(k), grad[k])));
        }
        Ok((value, grad))
    }

    /// Indices of the grid values the optimizer moves.
    pub fn free_indices(&self) -> std::ops::Range<usize> {
        let end = if self.spec.boundary.right.is_some() { self.shape.n } else { self.shape.n + 1 };
        1..end
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    /// Gradient sup-norm tolerance; `None` means `1e-8 (1 + |J(initial)|)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gtol: Option<f64>,
    pub max_iter: usize,
    pub memory: usize,
    pub mask: EndpointMask,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { gtol: None, max_iter: 2000, memory: 10, mask: EndpointMask::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stop: StopReason,
    pub grad_sup: f64,
    pub gtol: f64,
    /// Objective after each accepted iteration, starting at the initial guess.
    pub trace: Vec<f64>,
    pub el_check: ResidualReport,
    pub u: GridFunction,
}

impl SolveResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Writes `result.json` and `solution.csv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("result.json"), self.to_json())?;
        self.u.save_csv(dir.join("solution.csv"))
    }
}

/// Minimizes the discretized functional from `initial`, which must lie on
/// the problem grid and satisfy the boundary pins.
pub fn solve_direct(spec: &ProblemSpec, initial: &GridFunction, options: &SolveOptions) -> Result<SolveResult> {
    spec.check_candidate(initial)?;
    let disc = Discretization::new(spec)?;
    let free = disc.free_indices();
    let mut full = initial.values().to_vec();
    let obj0 = disc.objective(&full)?;
    let gtol = options.gtol.unwrap_or(1e-8 * (1.0 + obj0.abs()));
    let opts = LbfgsOptions { memory: options.memory, gtol, max_iter: options.max_iter, ..LbfgsOptions::default() };
    let x0 = full[free.clone()].to_vec();
    let mut work = full.clone();
    let outcome = minimize(
        |x: &[f64]| {
            work[free.clone()].copy_from_slice(x);
            let (v, g) = disc.objective_gradient(&work)?;
            Ok((v, g[free.clone()].to_vec()))
        },
        x0,
        &opts,
    )?;
    full[free].copy_from_slice(&outcome.x);
    let u = GridFunction::new(initial.shape(), full)?;
    if !outcome.converged() {
        log::warn!(
            "solver stopped ({:?}) after {} iterations with gradient sup {:.3e} > {gtol:.3e}",
            outcome.stop,
            outcome.iterations,
            outcome.grad_sup
        );
    }
    let el_check = verify_extremal_with(spec, &u, options.mask)?;
    Ok(SolveResult {
        objective: discretize_functional(spec, &u)?,
        iterations: outcome.iterations,
        converged: outcome.converged(),
        stop: outcome.stop,
        grad_sup: outcome.grad_sup,
        gtol,
        trace: outcome.trace,
        el_check,
        u,
    })
}

/// Euler-Lagrange residual on the action interval for a computed extremal,
/// with `p` of the problem's derivative kind.
pub fn verify_extremal(spec: &ProblemSpec, result: &SolveResult) -> Result<ResidualReport> {
    verify_extremal_with(spec, &result.u, EndpointMask::default())
}

fn verify_extremal_with(spec: &ProblemSpec, u: &GridFunction, mask: EndpointMask) -> Result<ResidualReport> {
    let w = spec.window;
    let window = MemoryWindow::new(w.memory_start, w.action_start, w.action_end, w.action_end)?;
    let opts = ElOptions { mask, kind: spec.kind };
    let (action, _) = residual_generalized_with(&spec.lagrangian, u, spec.order, &window, &opts)?;
    Ok(action)
}

/// A problem as read from JSON: a registry Lagrangian and plain numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub lagrangian: String,
    pub alpha: f64,
    /// Defaults to the classical window on `[0, 1]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<MemoryWindow>,
    /// Defaults to the kind the registry entry is written in.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<DerivativeKind>,
    pub boundary: Boundary,
    pub n: usize,
    #[serde(default)]
    pub optimizer: SolveOptions,
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| FracError::Parse(format!("problem config: {e}")))
    }

    pub fn to_spec(&self) -> Result<ProblemSpec> {
        let order = FractionalOrder::new(self.alpha)?;
        let entry = builtin(&self.lagrangian, order)?;
        let spec = ProblemSpec {
            lagrangian: entry.lagrangian,
            window: match self.window {
                Some(w) => w,
                None => MemoryWindow::classical(0.0, 1.0)?,
            },
            order,
            kind: self.kind.unwrap_or(entry.kind),
            boundary: self.boundary,
            grid_n: self.n,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn spec_for(id: &str, alpha: f64, n: usize, boundary: Boundary) -> ProblemSpec {
        ProblemConfig { lagrangian: id.into(), alpha, window: None, kind: None, boundary, n, optimizer: SolveOptions::default() }
            .to_spec()
            .unwrap()
    }

    #[test]
    fn constant_lagrangian_integrates_to_length() {
        let one = Lagrangian::new("one", Arc::new(|_, _, _| 1.0), Arc::new(|_, _, _| 0.0), Arc::new(|_, _, _| 0.0), (0.0, 1.0))
            .unwrap();
        let spec = ProblemSpec {
            lagrangian: one,
            window: MemoryWindow::new(-0.5, 0.0, 0.75, 1.0).unwrap(),
            order: FractionalOrder::new(0.3).unwrap(),
            kind: DerivativeKind::Caputo,
            boundary: Boundary { left: 0.0, right: None },
            grid_n: 100,
        };
        let u = GridFunction::zeros(spec.shape().unwrap());
        assert!((discretize_functional(&spec, &u).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn square_of_identity() {
        let sq = Lagrangian::new(
            "u2",
            Arc::new(|_, u: f64, _| u * u),
            Arc::new(|_, u: f64, _| 2.0 * u),
            Arc::new(|_, _, _| 0.0),
            (0.0, 1.0),
        )
        .unwrap();
        let n = 200;
        let spec = ProblemSpec {
            lagrangian: sq,
            window: MemoryWindow::classical(0.0, 1.0).unwrap(),
            order: FractionalOrder::new(0.5).unwrap(),
            kind: DerivativeKind::RiemannLiouville,
            boundary: Boundary { left: 0.0, right: Some(1.0) },
            grid_n: n,
        };
        let u = spec.default_initial().unwrap();
        let h = 1.0 / n as f64;
        // trapezoid error of ∫ t² is h²/6
        assert!((discretize_functional(&spec, &u).unwrap() - (1.0 / 3.0 + h * h / 6.0)).abs() < 1e-14);
    }

    #[test]
    fn pins_are_enforced() {
        let spec = spec_for("quadratic", 0.5, 16, Boundary { left: 1.0, right: Some(2.0) });
        let u = GridFunction::constant(spec.shape().unwrap(), 1.0).unwrap();
        assert!(matches!(discretize_functional(&spec, &u), Err(FracError::Boundary(_))));
        let other = GridFunction::constant(GridShape::new(0.0, 1.0, 8).unwrap(), 1.0).unwrap();
        assert!(matches!(solve_direct(&spec, &other, &SolveOptions::default()), Err(FracError::GridMismatch(_))));
    }

    #[test]
    fn matrix_objective_matches_operator_objective() {
        for id in ["caputo-eigen", "rl-eigen", "riesz-eigen"] {
            let spec = spec_for(id, 0.5, 24, Boundary { left: 1.0, right: None });
            let disc = Discretization::new(&spec).unwrap();
            let u = GridFunction::from_fn(spec.shape().unwrap(), |t| 1.0 + t.sin()).unwrap();
            let (v, _) = disc.objective_gradient(u.values()).unwrap();
            assert!((v - discretize_functional(&spec, &u).unwrap()).abs() < 1e-13, "{id}");
        }
    }

    #[test]
    fn solves_quadratic_with_descent() {
        let spec = spec_for("quadratic", 0.5, 64, Boundary { left: 1.0, right: Some(0.0) });
        let init = spec.default_initial().unwrap();
        let res = solve_direct(&spec, &init, &SolveOptions::default()).unwrap();
        assert!(res.converged);
        assert!(res.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(res.objective <= discretize_functional(&spec, &init).unwrap());
        assert_eq!(res.u.first(), 1.0);
        assert_eq!(res.u.last(), 0.0);
    }

    #[test]
    fn zero_lagrangian_is_already_optimal() {
        let spec = ProblemSpec {
            lagrangian: Lagrangian::zero(),
            window: MemoryWindow::classical(0.0, 1.0).unwrap(),
            order: FractionalOrder::new(0.5).unwrap(),
            kind: DerivativeKind::RiemannLiouville,
            boundary: Boundary { left: 2.0, right: None },
            grid_n: 32,
        };
        let res = solve_direct(&spec, &spec.default_initial().unwrap(), &SolveOptions::default()).unwrap();
        assert_eq!(res.iterations, 0);
        assert!(res.el_check.residual.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn riesz_needs_classical_window() {
        let mut cfg = ProblemConfig {
            lagrangian: "riesz-eigen".into(),
            alpha: 0.5,
            window: Some(MemoryWindow::new(0.0, 0.0, 0.5, 1.0).unwrap()),
            kind: None,
            boundary: Boundary { left: 1.0, right: None },
            n: 32,
            optimizer: SolveOptions::default(),
        };
        assert!(matches!(cfg.to_spec(), Err(FracError::InvalidWindow(_))));
        cfg.window = None;
        assert!(cfg.to_spec().is_ok());
    }

    #[test]
    fn config_json() {
        let text = r#"{"lagrangian": "caputo-eigen", "alpha": 0.5, "boundary": {"left": 1.0}, "n": 64,
                       "optimizer": {"max_iter": 10}}"#;
        let cfg = ProblemConfig::from_json(text).unwrap();
        assert_eq!(cfg.optimizer.max_iter, 10);
        assert_eq!(cfg.optimizer.memory, 10);
        assert_eq!(cfg.to_spec().unwrap().kind, DerivativeKind::Caputo);
        assert!(ProblemConfig::from_json(r#"{"lagrangian": "x"}"#).is_err());
    }

    #[test]
    fn result_round_trip() {
        let spec = spec_for("quadratic", 0.5, 16, Boundary { left: 1.0, right: None });
        let res = solve_direct(&spec, &spec.default_initial().unwrap(), &SolveOptions::default()).unwrap();
        let text = res.to_json();
        let back = SolveResult::from_json(&text).unwrap();
        assert_eq!(back, res);
        assert_eq!(back.to_json(), text);
    }
}
