//! Integer-order expansion of the left Riemann-Liouville derivative of an
//! analytic function,
//!
//! ```text
//! aD_t^α f(t) = Σ_{i>=0} binom(α, i) (t-a)^(i-α) / Γ(i+1-α) · f^(i)(t),
//! ```
//!
//! and the formally adjoint partial sums
//!
//! ```text
//! S_N(t) = Σ_{i=0}^{N} (-d/dt)^i [ F(t) binom(α, i) (t-a)^(i-α) / Γ(i+1-α) ],
//! ```
//!
//! which converge weakly to the right Riemann-Liouville derivative of `F`
//! when `F` and all its derivatives vanish at the right endpoint.
//!
//! Derivatives of the smooth models are exact (polynomials) or spectral
//! (Chebyshev series); nothing here differentiates sampled data.

use serde::{Deserialize, Serialize};

use crate::chebyshev::{gauss_points, ChebyshevSeries};
use crate::error::{FracError, Result};
use crate::gamma::gamma;
use crate::grid::{FractionalOrder, GridFunction, GridShape};

/// Largest expansion index accepted by default.
pub const MAX_EXPANSION_ORDER: usize = 30;

/// Tolerance on `|F^(i)(b)| / sup |F^(i)|` when checking that `F^(i)(b) = 0`.
pub const VANISHING_TOLERANCE: f64 = 1e-9;

/// Generalized binomial coefficient `binom(α, i)`, by the product recurrence.
pub fn frac_binomial(order: FractionalOrder, i: usize) -> f64 {
    let alpha = order.alpha();
    let mut b = 1.0;
    for k in 1..=i {
        b *= (alpha - (k - 1) as f64) / k as f64;
    }
    b
}

/// Polynomial in `t` with ascending coefficients; serializes as a bare JSON array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(FracError::NonFinite("polynomial coefficient".into()));
        }
        let mut p = Self { coeffs };
        if p.coeffs.is_empty() {
            p.coeffs.push(0.0);
        }
        Ok(p)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self { coeffs: vec![0.0] };
        }
        Self { coeffs: self.coeffs.iter().enumerate().skip(1).map(|(k, &c)| k as f64 * c).collect() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelKind {
    Polynomial(Polynomial),
    Chebyshev(ChebyshevSeries),
}

impl ModelKind {
    fn eval(&self, t: f64) -> f64 {
        match self {
            ModelKind::Polynomial(p) => p.eval(t),
            ModelKind::Chebyshev(s) => s.eval(t),
        }
    }

    fn derivative(&self) -> Self {
        match self {
            ModelKind::Polynomial(p) => ModelKind::Polynomial(p.derivative()),
            ModelKind::Chebyshev(s) => ModelKind::Chebyshev(s.derivative()),
        }
    }
}

/// An analytic function with exactly available derivatives, declared
/// analytic on the open window `(c, d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothFunctionModel {
    kind: ModelKind,
    window: (f64, f64),
    budget: usize,
}

impl SmoothFunctionModel {
    pub fn polynomial(coeffs: Vec<f64>, window: (f64, f64)) -> Result<Self> {
        check_window_order(window)?;
        Ok(Self { kind: ModelKind::Polynomial(Polynomial::new(coeffs)?), window, budget: MAX_EXPANSION_ORDER })
    }

    /// Model from samples at the Chebyshev-Gauss points of the window
    /// (`chebyshev::gauss_points(c, d, m)`). Derivatives are available up to
    /// the interpolant's degree.
    pub fn chebyshev_samples(samples: &[f64], window: (f64, f64)) -> Result<Self> {
        check_window_order(window)?;
        let series = ChebyshevSeries::from_samples(window.0, window.1, samples)?;
        let budget = series.degree().min(MAX_EXPANSION_ORDER);
        Ok(Self { kind: ModelKind::Chebyshev(series), window, budget })
    }

    /// Samples `f` at `m` Chebyshev-Gauss points of the window.
    pub fn chebyshev_from_fn(f: impl Fn(f64) -> f64, m: usize, window: (f64, f64)) -> Result<Self> {
        let samples: Vec<f64> = gauss_points(window.0, window.1, m).into_iter().map(f).collect();
        Self::chebyshev_samples(&samples, window)
    }

    /// Adaptive spectral fit of `f` on `[lo, hi]`; the caller vouches that `f`
    /// is analytic on `window`. Used for composite maps that only exist on the
    /// sampling interval.
    pub fn spectral_fit(f: impl Fn(f64) -> f64, lo: f64, hi: f64, window: (f64, f64)) -> Result<Self> {
        check_window_order(window)?;
        let series = ChebyshevSeries::adaptive(lo, hi, f)?;
        Ok(Self { kind: ModelKind::Chebyshev(series), window, budget: MAX_EXPANSION_ORDER })
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    /// Largest derivative order the model will supply.
    pub fn derivative_budget(&self) -> usize {
        self.budget
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.kind.eval(t)
    }

    pub fn sample(&self, shape: GridShape) -> Result<GridFunction> {
        GridFunction::from_fn(shape, |t| self.eval(t))
    }

    /// The derivatives `f, f', ..., f^(order)` as models.
    pub fn derivative_models(&self, order: usize) -> Result<Vec<ModelKind>> {
        self.check_budget(order)?;
        let mut out = Vec::with_capacity(order + 1);
        out.push(self.kind.clone());
        for i in 1..=order {
            let next = out[i - 1].derivative();
            out.push(next);
        }
        Ok(out)
    }

    /// `f^(i)(t)` for a single point.
    pub fn derivative_at(&self, i: usize, t: f64) -> Result<f64> {
        Ok(self.derivative_models(i)?[i].eval(t))
    }

    fn check_budget(&self, order: usize) -> Result<()> {
        if order > self.budget {
            return Err(FracError::DerivativeBudget { requested: order, available: self.budget });
        }
        Ok(())
    }

    /// The window must strictly contain `[a - (b-a), b + (b-a)]`, i.e. the
    /// closed ball of radius `b - a` around every point of `[a, b]`.
    pub fn check_window(&self, a: f64, b: f64) -> Result<()> {
        let (lo, hi) = (a - (b - a), b + (b - a));
        let (c, d) = self.window;
        if c < lo && d > hi {
            Ok(())
        } else {
            Err(FracError::WindowContainment { c, d, lo, hi })
        }
    }

    /// `max_{i <= order} |f^(i)(b)| / sup_[lo, b] |f^(i)|`: how far the model
    /// is from vanishing to the given order at `b`. Each derivative is
    /// measured against its own size, since differentiating a spectral fit
    /// amplifies rounding with the order.
    pub fn vanishing_defect(&self, lo: f64, b: f64, order: usize) -> Result<f64> {
        Ok(relative_defect(&self.derivative_models(order)?, lo, b))
    }
}

fn relative_defect(models: &[ModelKind], lo: f64, b: f64) -> f64 {
    const SAMPLES: usize = 256;
    models.iter().fold(0.0f64, |m, d| {
        let sup = (0..=SAMPLES)
            .map(|k| d.eval(lo + (b - lo) * k as f64 / SAMPLES as f64).abs())
            .fold(0.0f64, f64::max);
        if sup == 0.0 {
            m
        } else {
            m.max(d.eval(b).abs() / sup)
        }
    })
}

fn check_window_order(window: (f64, f64)) -> Result<()> {
    if window.0.is_finite() && window.1.is_finite() && window.0 < window.1 {
        Ok(())
    } else {
        Err(FracError::InvalidWindow(format!("model window ({}, {}) is empty", window.0, window.1)))
    }
}

/// Coefficients `binom(α, i) / Γ(i+1-α)`, `i = 0..=N`, of the expansion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionTermTable {
    pub max_index: usize,
    pub order: FractionalOrder,
    pub coefficients: Vec<f64>,
}

impl ExpansionTermTable {
    pub fn new(order: FractionalOrder, max_index: usize) -> Result<Self> {
        if max_index > MAX_EXPANSION_ORDER {
            return Err(FracError::DerivativeBudget { requested: max_index, available: MAX_EXPANSION_ORDER });
        }
        let alpha = order.alpha();
        let coefficients = (0..=max_index)
            .map(|i| frac_binomial(order, i) / gamma(i as f64 + 1.0 - alpha))
            .collect();
        Ok(Self { max_index, order, coefficients })
    }

    /// Collapsed coefficients of the adjoint sum after the Leibniz rule:
    /// `S_N(t) = Σ_j K_j F^(j)(t) (t-a)^(j-α)` with
    /// `K_j = Σ_{i=j}^{N} (-1)^i binom(α, i) C(i, j) / Γ(j+1-α)`.
    pub fn adjoint_coefficients(&self) -> Vec<f64> {
        let alpha = self.order.alpha();
        let n = self.max_index;
        let binoms: Vec<f64> = (0..=n).map(|i| frac_binomial(self.order, i)).collect();
        (0..=n)
            .map(|j| {
                let mut choose = 1.0; // C(j, j)
                let mut sum = 0.0;
                for (i, &b) in binoms.iter().enumerate().skip(j) {
                    if i > j {
                        choose *= i as f64 / (i - j) as f64;
                    }
                    let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                    sum += sign * b * choose;
                }
                sum / gamma(j as f64 + 1.0 - alpha)
            })
            .collect()
    }
}

fn check_grid(shape: GridShape, a: f64) -> Result<()> {
    if shape.a < a - 1e-12 * (1.0 + a.abs()) {
        return Err(FracError::GridMismatch(format!(
            "grid starts at {} before the expansion point a = {a}",
            shape.a
        )));
    }
    Ok(())
}

/// `Σ_j coeffs[j] g_j(t) (t-a)^(j-α)`.
fn power_series_at(t: f64, a: f64, alpha: f64, coeffs: &[f64], models: &[ModelKind]) -> f64 {
    let x = t - a;
    let mut pow = x.powf(-alpha);
    let mut acc = 0.0;
    for (c, m) in coeffs.iter().zip(models) {
        if *c != 0.0 {
            acc += c * pow * m.eval(t);
        }
        pow *= x;
    }
    acc
}

/// The power series on the grid; the node at `t = a`, where `(t-a)^(-α)` is
/// unbounded, takes its neighbour's value.
fn power_series_on_grid(shape: GridShape, a: f64, alpha: f64, coeffs: &[f64], models: &[ModelKind]) -> Result<GridFunction> {
    let mut values: Vec<f64> = (0..=shape.n)
        .map(|k| power_series_at(shape.t(k), a, alpha, coeffs, models))
        .collect();
    if alpha > 0.0 && (shape.a - a).abs() <= 1e-12 * (1.0 + a.abs()) {
        values[0] = values[1];
    }
    GridFunction::new(shape, values)
}

/// Pointwise partial sum of the left expansion, for evaluation off a grid.
#[derive(Clone, Debug)]
pub struct LeftExpansion {
    a: f64,
    alpha: f64,
    coeffs: Vec<f64>,
    models: Vec<ModelKind>,
}

impl LeftExpansion {
    pub fn new(f: &SmoothFunctionModel, order: FractionalOrder, a: f64, n_terms: usize) -> Result<Self> {
        let table = ExpansionTermTable::new(order, n_terms)?;
        let models = f.derivative_models(n_terms)?;
        Ok(Self { a, alpha: order.alpha(), coeffs: table.coefficients, models })
    }

    /// Value at `t > a` (unbounded at `t = a` when α > 0).
    pub fn eval(&self, t: f64) -> f64 {
        power_series_at(t, self.a, self.alpha, &self.coeffs, &self.models)
    }
}

/// Partial sum `i = 0..=N` of the expansion of `aD_t^α f` on the grid.
pub fn left_expansion_sum(
    f: &SmoothFunctionModel,
    order: FractionalOrder,
    a: f64,
    n_terms: usize,
    shape: GridShape,
) -> Result<GridFunction> {
    check_grid(shape, a)?;
    f.check_window(a, shape.b)?;
    let table = ExpansionTermTable::new(order, n_terms)?;
    let models = f.derivative_models(n_terms)?;
    power_series_on_grid(shape, a, order.alpha(), &table.coefficients, &models)
}

/// The partial sum `S_N` on the grid. Warns when `F` does not vanish to
/// order `N` at the grid's right end, the hypothesis under which `S_N`
/// pairs weakly with the right Riemann-Liouville derivative.
pub fn right_weak_sum(
    big_f: &SmoothFunctionModel,
    order: FractionalOrder,
    a: f64,
    n_terms: usize,
    shape: GridShape,
) -> Result<GridFunction> {
    check_grid(shape, a)?;
    big_f.check_window(a, shape.b)?;
    let table = ExpansionTermTable::new(order, n_terms)?;
    let models = big_f.derivative_models(n_terms)?;
    let defect = relative_defect(&models, a, shape.b);
    if defect > VANISHING_TOLERANCE {
        log::warn!(
            "F does not vanish to order {n_terms} at b = {}: relative defect {defect:.3e}",
            shape.b
        );
    }
    power_series_on_grid(shape, a, order.alpha(), &table.adjoint_coefficients(), &models)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const WIN: (f64, f64) = (-1.5, 2.5);

    fn ord(a: f64) -> FractionalOrder {
        FractionalOrder::new(a).unwrap()
    }

    fn grid(n: usize) -> GridShape {
        GridShape::new(0.0, 1.0, n).unwrap()
    }

    /// The Gamma-quotient form `(-1)^(i-1) α Γ(i-α) / (Γ(1-α) Γ(i+1))`.
    fn binomial_gamma_form(alpha: f64, i: usize) -> f64 {
        let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
        sign * alpha * gamma(i as f64 - alpha) / (gamma(1.0 - alpha) * gamma(i as f64 + 1.0))
    }

    #[test]
    fn binomial_examples() {
        assert_eq!(frac_binomial(ord(0.3), 0), 1.0);
        assert_eq!(frac_binomial(ord(0.3), 1), 0.3);
        assert!((frac_binomial(ord(0.5), 2) + 0.125).abs() < 1e-15);
        assert!((binomial_gamma_form(0.5, 2) + 0.125).abs() < 1e-14);
    }

    #[test]
    fn recurrence_matches_gamma_quotient() {
        for &alpha in &[0.1, 0.25, 0.5, 0.75, 0.9] {
            for i in 1..=30 {
                let rec = frac_binomial(ord(alpha), i);
                let gam = binomial_gamma_form(alpha, i);
                assert!(((rec - gam) / gam).abs() < 1e-12, "alpha {alpha} i {i}: {rec} vs {gam}");
            }
        }
    }

    #[test]
    fn binomial_sign_pattern() {
        for &alpha in &[0.2, 0.5, 0.8] {
            assert!(frac_binomial(ord(alpha), 1) > 0.0);
            for i in 2..=30 {
                let sign = if i % 2 == 0 { -1.0 } else { 1.0 };
                assert!(sign * frac_binomial(ord(alpha), i) > 0.0, "alpha {alpha} i {i}");
            }
        }
    }

    #[test]
    fn term_table_head() {
        let t = ExpansionTermTable::new(ord(0.5), 6).unwrap();
        assert_eq!(t.coefficients.len(), 7);
        assert!((t.coefficients[0] - 1.0 / PI.sqrt()).abs() < 1e-14);
        assert!(ExpansionTermTable::new(ord(0.5), 31).is_err());
    }

    #[test]
    fn linear_function_two_terms() {
        let f = SmoothFunctionModel::polynomial(vec![0.0, 1.0], WIN).unwrap();
        let s = left_expansion_sum(&f, ord(0.5), 0.0, 1, grid(64)).unwrap();
        for k in 1..=64 {
            let t = s.t(k);
            assert!((s.values()[k] - 2.0 * (t / PI).sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_single_term() {
        let f = SmoothFunctionModel::polynomial(vec![1.0], WIN).unwrap();
        let s = left_expansion_sum(&f, ord(0.3), 0.0, 0, grid(16)).unwrap();
        for k in 1..=16 {
            let t = s.t(k);
            assert!((s.values()[k] - t.powf(-0.3) / gamma(0.7)).abs() < 1e-13);
        }
        assert_eq!(s.values()[0], s.values()[1]);
    }

    #[test]
    fn quadratic_three_terms() {
        let f = SmoothFunctionModel::polynomial(vec![0.0, 0.0, 1.0], WIN).unwrap();
        let s = left_expansion_sum(&f, ord(0.5), 0.0, 2, grid(32)).unwrap();
        let c = gamma(3.0) / gamma(2.5);
        assert!((c - 1.504_505_556_127_35).abs() < 1e-12);
        for k in 1..=32 {
            let t = s.t(k);
            assert!((s.values()[k] - c * t.powf(1.5)).abs() < 1e-13);
        }
    }

    #[test]
    fn window_must_contain_ball() {
        let f = SmoothFunctionModel::polynomial(vec![1.0], (-0.5, 2.5)).unwrap();
        assert!(matches!(
            left_expansion_sum(&f, ord(0.5), 0.0, 2, grid(8)),
            Err(FracError::WindowContainment { .. })
        ));
        let f = SmoothFunctionModel::polynomial(vec![1.0], (-1.0, 2.0)).unwrap();
        assert!(f.check_window(0.0, 1.0).is_err(), "containment is strict");
    }

    #[test]
    fn derivative_budget_enforced() {
        let samples: Vec<f64> = gauss_points(WIN.0, WIN.1, 6).iter().map(|t| t.exp()).collect();
        let f = SmoothFunctionModel::chebyshev_samples(&samples, WIN).unwrap();
        assert_eq!(f.derivative_budget(), 5);
        assert!(matches!(
            left_expansion_sum(&f, ord(0.5), 0.0, 6, grid(8)),
            Err(FracError::DerivativeBudget { requested: 6, available: 5 })
        ));
    }

    #[test]
    fn adjoint_sum_of_zero_and_leading_term() {
        let zero = SmoothFunctionModel::polynomial(vec![0.0], WIN).unwrap();
        for n in [0, 3, 8] {
            assert_eq!(right_weak_sum(&zero, ord(0.5), 0.0, n, grid(16)).unwrap().max_abs(), 0.0);
        }
        // (1 - t)^4
        let f = SmoothFunctionModel::polynomial(vec![1.0, -4.0, 6.0, -4.0, 1.0], WIN).unwrap();
        let s0 = right_weak_sum(&f, ord(0.5), 0.0, 0, grid(64)).unwrap();
        for k in 1..=64 {
            let t = s0.t(k);
            let expected = (1.0 - t).powi(4) * t.powf(-0.5) / PI.sqrt();
            assert!((s0.values()[k] - expected).abs() < 1e-13);
        }
    }

    /// Brute-force the Leibniz expansion term by term and compare with the
    /// collapsed coefficients.
    #[test]
    fn adjoint_coefficients_match_leibniz_rule() {
        let alpha = 0.37;
        let n = 7;
        let table = ExpansionTermTable::new(ord(alpha), n).unwrap();
        let k = table.adjoint_coefficients();
        let fact = |m: usize| (1..=m).fold(1.0, |p, x| p * x as f64);
        for j in 0..=n {
            let mut brute = 0.0;
            for i in j..=n {
                let choose = fact(i) / (fact(j) * fact(i - j));
                let mut falling = 1.0;
                for r in 0..(i - j) {
                    falling *= i as f64 - alpha - r as f64;
                }
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                brute += sign * table.coefficients[i] * choose * falling;
            }
            assert!((brute - k[j]).abs() < 1e-12 * (1.0 + brute.abs()), "j = {j}");
        }
    }

    #[test]
    fn polynomial_json_is_bare_array() {
        let p = Polynomial::new(vec![1.0, -2.0, 0.5]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "[1.0,-2.0,0.5]");
        let back: Polynomial = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.degree(), 2);
    }
}
