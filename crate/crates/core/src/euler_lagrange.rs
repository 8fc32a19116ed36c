//! Grid residuals of the Euler-Lagrange equations of fractional variational
//! problems, for a candidate extremal `u`.
//!
//! Every formulation samples `p`, the left fractional derivative of `u` of the
//! Lagrangian's kind, evaluates the partials of `L` along `(t, u, p)` and
//! applies the adjoint (right-sided) operator to `∂L/∂p`. Entries that are
//! non-finite inside the masked end bands take the nearest finite value and
//! tag that end as singular; a non-finite interior entry is an error.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{FracError, Result};
use crate::expansion::{right_weak_sum, LeftExpansion, SmoothFunctionModel, VANISHING_TOLERANCE};
use crate::grid::{EndSingularity, EndpointMask, FractionalOrder, GridFunction, GridShape, MemoryWindow, Side};
use crate::lagrangian::Lagrangian;
use crate::operators::{
    caputo_derivative, derivative, rl_caputo_gap, rl_derivative, right_integral_values, DerivativeKind,
};

/// Which Euler-Lagrange equation a residual belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Formulation {
    /// `∂L/∂u + tD_b^α ∂L/∂p` with the right Riemann-Liouville derivative.
    Rl,
    /// Right Caputo derivative plus the explicit boundary term at `b`.
    Corrected,
    /// The corrected equation on the action interval `(A, B)`.
    Action,
    /// `tD_B^α ∂L/∂p - tD_A^α ∂L/∂p` on the memory segment `(a, A)`.
    Memory,
    /// The equation of the Lagrangian truncated after `N` expansion terms.
    Approx(usize),
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formulation::Rl => f.write_str("rl"),
            Formulation::Corrected => f.write_str("corrected"),
            Formulation::Action => f.write_str("action"),
            Formulation::Memory => f.write_str("memory"),
            Formulation::Approx(n) => write!(f, "approx-{n}"),
        }
    }
}

impl FromStr for Formulation {
    type Err = FracError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rl" => Ok(Self::Rl),
            "corrected" => Ok(Self::Corrected),
            "action" => Ok(Self::Action),
            "memory" => Ok(Self::Memory),
            _ => s
                .strip_prefix("approx-")
                .and_then(|n| n.parse().ok())
                .map(Self::Approx)
                .ok_or_else(|| FracError::Parse(format!("unknown formulation '{s}'"))),
        }
    }
}

impl TryFrom<String> for Formulation {
    type Error = FracError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Formulation> for String {
    fn from(f: Formulation) -> String {
        f.to_string()
    }
}

/// A residual on a grid, with its sup over the unmasked interior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub formulation: Formulation,
    pub interior_sup: f64,
    pub masked_fraction: f64,
    pub mask: EndpointMask,
    pub singular: EndSingularity,
    pub residual: GridFunction,
}

impl ResidualReport {
    fn build(
        formulation: Formulation,
        shape: GridShape,
        mut values: Vec<f64>,
        mask: EndpointMask,
        mut singular: EndSingularity,
        exponent: f64,
    ) -> Result<Self> {
        let (left, right) = patch_bands(&mut values, mask.band(shape.n), shape, "residual")?;
        if left {
            singular.left.get_or_insert(exponent);
        }
        if right {
            singular.right.get_or_insert(exponent);
        }
        let residual = GridFunction::new(shape, values)?;
        Ok(Self {
            formulation,
            interior_sup: mask.interior_sup(residual.values()),
            masked_fraction: mask.masked_fraction(shape.n),
            mask,
            singular,
            residual,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Settings shared by the residual evaluators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElOptions {
    pub mask: EndpointMask,
    /// Kind of the fractional derivative inside the Lagrangian.
    pub kind: DerivativeKind,
}

impl Default for ElOptions {
    fn default() -> Self {
        Self { mask: EndpointMask::default(), kind: DerivativeKind::RiemannLiouville }
    }
}

impl ElOptions {
    pub fn with_kind(kind: DerivativeKind) -> Self {
        Self { kind, ..Self::default() }
    }
}

/// Replaces non-finite entries within `band` nodes of either end by the
/// nearest finite value toward the interior. Returns which ends were patched.
fn patch_bands(values: &mut [f64], band: usize, shape: GridShape, what: &str) -> Result<(bool, bool)> {
    let n = values.len() - 1;
    if let Some(k) = (band..=n - band).find(|&k| !values[k].is_finite()) {
        return Err(FracError::NonFinite(format!("{what} at interior node t = {} is {}", shape.t(k), values[k])));
    }
    let mut left = false;
    for k in (0..band).rev() {
        if !values[k].is_finite() {
            values[k] = values[k + 1];
            left = true;
        }
    }
    let mut right = false;
    for k in n - band + 1..=n {
        if !values[k].is_finite() {
            values[k] = values[k - 1];
            right = true;
        }
    }
    Ok((left, right))
}

/// The fractional derivative `p` of `u` that the Lagrangian sees.
pub fn lagrangian_derivative(u: &GridFunction, order: FractionalOrder, kind: DerivativeKind) -> Result<GridFunction> {
    derivative(u, order, kind, Side::Left)
}

/// `∂L/∂u` (raw, possibly non-finite at singular ends) and `∂L/∂p` along `(t, u, p)`.
fn partials(l: &Lagrangian, u: &GridFunction, p: &GridFunction, mask: EndpointMask) -> Result<(Vec<f64>, GridFunction)> {
    let shape = u.shape();
    let mut du = Vec::with_capacity(shape.len());
    let mut dp = Vec::with_capacity(shape.len());
    for (k, (&uk, &pk)) in u.values().iter().zip(p.values()).enumerate() {
        let t = shape.t(k);
        du.push(l.d_u(t, uk, pk));
        dp.push(l.d_p(t, uk, pk));
    }
    patch_bands(&mut dp, mask.band(shape.n), shape, "dL/dp")?;
    Ok((du, GridFunction::new(shape, dp)?))
}

fn is_nonzero(x: f64, scale: f64) -> bool {
    x.abs() > 1e-12 * scale.max(1e-300)
}

/// The adjoint term applied to `g = ∂L/∂p`, in Riemann-Liouville or corrected form.
///
/// At order 0 the Caputo derivative is the identity, so the corrected form
/// carries no boundary term there and both forms reduce to `g`.
fn adjoint_term(g: &GridFunction, order: FractionalOrder, kind: DerivativeKind, corrected: bool) -> Result<(Vec<f64>, EndSingularity)> {
    let alpha = order.alpha();
    let scale = g.max_abs();
    let one_side = |side: Side| -> Result<GridFunction> {
        if !corrected {
            return rl_derivative(g, order, side);
        }
        let c = caputo_derivative(g, order, side)?;
        if order.is_zero() {
            return Ok(c);
        }
        c.combine(1.0, &rl_caputo_gap(g, order, side)?, 1.0)
    };
    let right = one_side(Side::Right)?;
    let mut singular = EndSingularity::NONE;
    if alpha > 0.0 && is_nonzero(g.last(), scale) {
        singular.right = Some(alpha);
    }
    match kind {
        DerivativeKind::RiemannLiouville | DerivativeKind::Caputo => Ok((right.into_values(), singular)),
        DerivativeKind::RieszCaputo => {
            if alpha > 0.0 && is_nonzero(g.first(), scale) {
                singular.left = Some(alpha);
            }
            let left = one_side(Side::Left)?;
            Ok((right.combine(0.5, &left, -0.5)?.into_values(), singular))
        }
    }
}

fn assemble(
    formulation: Formulation,
    l: &Lagrangian,
    u: &GridFunction,
    order: FractionalOrder,
    opts: &ElOptions,
    corrected: bool,
) -> Result<ResidualReport> {
    let p = lagrangian_derivative(u, order, opts.kind)?;
    let (du, dp) = partials(l, u, &p, opts.mask)?;
    let (adj, singular) = adjoint_term(&dp, order, opts.kind, corrected)?;
    let values = du.iter().zip(&adj).map(|(a, b)| a + b).collect();
    ResidualReport::build(formulation, u.shape(), values, opts.mask, singular, order.alpha())
}

/// `∂L/∂u + tD_b^α(∂L/∂p)` with the right Riemann-Liouville derivative.
pub fn residual_rl(l: &Lagrangian, u: &GridFunction, order: FractionalOrder) -> Result<ResidualReport> {
    residual_rl_with(l, u, order, &ElOptions::default())
}

pub fn residual_rl_with(l: &Lagrangian, u: &GridFunction, order: FractionalOrder, opts: &ElOptions) -> Result<ResidualReport> {
    assemble(Formulation::Rl, l, u, order, opts, false)
}

/// `∂L/∂u + ᶜtD_b^α(∂L/∂p) + ∂L/∂p|_b (b-t)^(-α) / Γ(1-α)`.
pub fn residual_corrected(l: &Lagrangian, u: &GridFunction, order: FractionalOrder) -> Result<ResidualReport> {
    residual_corrected_with(l, u, order, &ElOptions::default())
}

pub fn residual_corrected_with(l: &Lagrangian, u: &GridFunction, order: FractionalOrder, opts: &ElOptions) -> Result<ResidualReport> {
    assemble(Formulation::Corrected, l, u, order, opts, true)
}

fn window_nodes(shape: GridShape, w: &MemoryWindow) -> Result<(usize, usize)> {
    w.validate()?;
    if (shape.a - w.memory_start).abs() > 1e-12 * (1.0 + w.memory_start.abs()) {
        return Err(FracError::GridMismatch(format!(
            "grid starts at {} but the memory window starts at {}",
            shape.a, w.memory_start
        )));
    }
    let node = |t: f64, name: &str| {
        shape.node_index(t).ok_or_else(|| {
            FracError::GridMismatch(format!("{name} = {t} is not a node of the grid on [{}, {}] with n = {}", shape.a, shape.b, shape.n))
        })
    };
    let ia = node(w.action_start, "A")?;
    let ib = node(w.action_end, "B")?;
    if ib - ia < 2 {
        return Err(FracError::InvalidWindow("the action interval needs at least 2 grid intervals".into()));
    }
    if ia == 1 {
        return Err(FracError::InvalidWindow("the memory segment needs at least 2 grid intervals".into()));
    }
    Ok((ia, ib))
}

/// Residuals of the problem with memory: the corrected equation on `(A, B)`
/// and, when `a < A`, the equation `tD_B^α g - tD_A^α g = 0` on `(a, A)`,
/// where `g = ∂L/∂p`. The grid of `u` starts at `a` and has `A`, `B` as nodes;
/// `p` is always taken from `a`.
pub fn residual_generalized(
    l: &Lagrangian,
    u: &GridFunction,
    order: FractionalOrder,
    w: &MemoryWindow,
) -> Result<(ResidualReport, Option<ResidualReport>)> {
    residual_generalized_with(l, u, order, w, &ElOptions::default())
}

pub fn residual_generalized_with(
    l: &Lagrangian,
    u: &GridFunction,
    order: FractionalOrder,
    w: &MemoryWindow,
    opts: &ElOptions,
) -> Result<(ResidualReport, Option<ResidualReport>)> {
    if opts.kind == DerivativeKind::RieszCaputo && (w.has_memory() || w.action_end < w.end) {
        return Err(FracError::InvalidWindow("the Riesz-Caputo derivative needs a = A and B = b".into()));
    }
    let shape = u.shape();
    let (ia, ib) = window_nodes(shape, w)?;
    let alpha = order.alpha();
    let p = lagrangian_derivative(u, order, opts.kind)?;
    let (du, dp) = partials(l, u, &p, opts.mask)?;

    let action_shape = shape.sub(ia, ib)?;
    let g_action = dp.slice(ia, ib)?;
    let (adj, singular) = adjoint_term(&g_action, order, opts.kind, true)?;
    let values = du[ia..=ib].iter().zip(&adj).map(|(a, b)| a + b).collect();
    let action = ResidualReport::build(Formulation::Action, action_shape, values, opts.mask, singular, alpha)?;

    if ia == 0 {
        return Ok((action, None));
    }
    let to_b = rl_derivative(&dp.slice(0, ib)?, order, Side::Right)?;
    let to_a = rl_derivative(&dp.slice(0, ia)?, order, Side::Right)?;
    let values = (0..=ia).map(|k| to_b.values()[k] - to_a.values()[k]).collect();
    let mut singular = EndSingularity::NONE;
    if alpha > 0.0 && is_nonzero(dp.values()[ia], dp.max_abs()) {
        singular.right = Some(alpha);
    }
    let memory = ResidualReport::build(Formulation::Memory, shape.sub(0, ia)?, values, opts.mask, singular, alpha)?;
    Ok((action, Some(memory)))
}

/// The map `t -> (1/Γ(1-α)) ∫_A^B g(θ) (θ-t)^(-α) dθ` on `[a, A]`, computed as
/// `tI_B^(1-α) g - tI_A^(1-α) g` with `g = ∂L/∂p`. The memory-segment
/// equation is its derivative, so a solution makes it constant.
pub fn memory_constancy(l: &Lagrangian, u: &GridFunction, order: FractionalOrder, w: &MemoryWindow) -> Result<GridFunction> {
    memory_constancy_with(l, u, order, w, &ElOptions::default())
}

pub fn memory_constancy_with(
    l: &Lagrangian,
    u: &GridFunction,
    order: FractionalOrder,
    w: &MemoryWindow,
    opts: &ElOptions,
) -> Result<GridFunction> {
    if !w.has_memory() {
        return Err(FracError::InvalidWindow("memory constancy needs a < A".into()));
    }
    let shape = u.shape();
    let (ia, ib) = window_nodes(shape, w)?;
    let p = lagrangian_derivative(u, order, opts.kind)?;
    let (_, dp) = partials(l, u, &p, opts.mask)?;
    let (h, beta) = (shape.step(), 1.0 - order.alpha());
    let to_b = right_integral_values(&dp.values()[..=ib], h, beta);
    let to_a = right_integral_values(&dp.values()[..=ia], h, beta);
    GridFunction::new(shape.sub(0, ia)?, (0..=ia).map(|k| to_b[k] - to_a[k]).collect())
}

/// Total variation of a sampled map, the defect of a constancy condition.
pub fn total_variation(f: &GridFunction) -> f64 {
    f.values().windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// `|∂L/∂p|` at the right end, the quantity the natural boundary condition
/// of a free right end asks to vanish.
pub fn transversality_defect(l: &Lagrangian, u: &GridFunction, order: FractionalOrder, kind: DerivativeKind) -> Result<f64> {
    let p = lagrangian_derivative(u, order, kind)?;
    let t = u.b();
    Ok(l.d_p(t, u.last(), p.last()).abs())
}

/// Diagnostic flag only: the corrected equation already accounts for a
/// nonzero `∂L/∂p` at `b`.
pub fn transversality_holds(l: &Lagrangian, u: &GridFunction, order: FractionalOrder, kind: DerivativeKind, tol: f64) -> Result<bool> {
    Ok(transversality_defect(l, u, order, kind)? <= tol)
}

/// Residual of the Euler-Lagrange equation of the Lagrangian truncated after
/// `N` expansion terms, for a smooth candidate `u`:
/// `∂L/∂u + Σ_{i<=N} (-d/dt)^i (∂L/∂p · binom(α,i) (t-a)^(i-α) / Γ(i+1-α))`,
/// with `p` the truncated expansion itself. The composite `t -> ∂L/∂p` is
/// refitted spectrally on `[a, b]` and differentiated from the fit.
pub fn residual_approx_n(
    l: &Lagrangian,
    u: &SmoothFunctionModel,
    order: FractionalOrder,
    n_terms: usize,
    shape: GridShape,
) -> Result<ResidualReport> {
    residual_approx_n_with(l, u, order, n_terms, shape, EndpointMask::default())
}

pub fn residual_approx_n_with(
    l: &Lagrangian,
    u: &SmoothFunctionModel,
    order: FractionalOrder,
    n_terms: usize,
    shape: GridShape,
    mask: EndpointMask,
) -> Result<ResidualReport> {
    let composite = approx_composite(l, u, order, n_terms, shape)?;
    let a = shape.a;
    let expansion = LeftExpansion::new(u, order, a, n_terms)?;
    let adj = right_weak_sum(&composite, order, a, n_terms, shape)?;
    let values = (0..=shape.n)
        .map(|k| {
            let t = shape.t(k);
            // p_N is unbounded at t = a; the patched band covers that node.
            l.d_u(t, u.eval(t), expansion.eval(t)) + adj.values()[k]
        })
        .collect();
    let alpha = order.alpha();
    let singular = EndSingularity { left: (alpha > 0.0).then_some(alpha), right: None };
    ResidualReport::build(Formulation::Approx(n_terms), shape, values, mask, singular, alpha)
}

/// The composite `t -> ∂L/∂p(t, u(t), p_N(t))` as a spectral model on `[a, b]`.
pub fn approx_composite(
    l: &Lagrangian,
    u: &SmoothFunctionModel,
    order: FractionalOrder,
    n_terms: usize,
    shape: GridShape,
) -> Result<SmoothFunctionModel> {
    let (a, b) = (shape.a, shape.b);
    u.check_window(a, b)?;
    let expansion = LeftExpansion::new(u, order, a, n_terms)?;
    let f = |t: f64| l.d_p(t, u.eval(t), expansion.eval(t));
    SmoothFunctionModel::spectral_fit(f, a, b, u.window())
}

/// Whether the composite `∂L/∂p` and its first `n_terms` derivatives vanish
/// at `b` to [`VANISHING_TOLERANCE`], each relative to its own size. This is
/// weaker than asking the partials of `L` to vanish in all three arguments.
pub fn composite_vanishes(composite: &SmoothFunctionModel, shape: GridShape, n_terms: usize) -> Result<bool> {
    Ok(composite.vanishing_defect(shape.a, shape.b, n_terms)? <= VANISHING_TOLERANCE)
}
