//! Riemann-Liouville, Caputo and Riesz-Caputo operators on uniform grids.
//!
//! Fractional integrals use product integration: the density is replaced by
//! its piecewise-linear interpolant and the weakly singular kernel is
//! integrated exactly on every subinterval. The Riemann-Liouville derivative
//! differentiates that integral with second-order finite differences
//! (centered inside, one-sided at the ends). The Caputo derivative is the L1
//! construction, i.e. the kernel integrated exactly against the derivative of
//! the same piecewise-linear interpolant.
//!
//! Right-sided operators are obtained from the left-sided ones by the
//! reflection `t -> a + b - t`.
//!
//! Endpoint conventions (values a caller is expected to mask):
//! - left RL derivative at `t = a`: one-sided stencil of the integral, finite
//!   even where the exact value is unbounded;
//! - left Caputo derivative at `t = a`: linear extrapolation from `t_1, t_2`
//!   (the kernel integral over an empty interval carries no information);
//! - the RL-Caputo gap at its singular endpoint: the value at the adjacent node.
//!
//! Mirror-image conventions hold for the right-sided operators at `t = b`.

use serde::{Deserialize, Serialize};

use crate::error::{FracError, Result};
use crate::gamma::gamma;
use crate::grid::{FractionalOrder, GridFunction, GridShape, Side};

/// The fractional derivative a Lagrangian is written in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeKind {
    RiemannLiouville,
    Caputo,
    RieszCaputo,
}

impl std::str::FromStr for DerivativeKind {
    type Err = FracError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "riemann-liouville" | "rl" => Ok(Self::RiemannLiouville),
            "caputo" => Ok(Self::Caputo),
            "riesz-caputo" | "riesz" => Ok(Self::RieszCaputo),
            other => Err(FracError::Parse(format!("unknown derivative kind '{other}'"))),
        }
    }
}

/// Left product-trapezoid fractional integral of order `beta > 0` of the
/// samples `u` with step `h`.
pub(crate) fn left_integral_values(u: &[f64], h: f64, beta: f64) -> Vec<f64> {
    let n = u.len() - 1;
    let scale = h.powf(beta) / gamma(beta + 2.0);
    // pw[m] = m^(beta + 1)
    let pw: Vec<f64> = (0..=n).map(|m| (m as f64).powf(beta + 1.0)).collect();
    let omega: Vec<f64> = (0..n)
        .map(|m| if m == 0 { 0.0 } else { pw[m + 1] - 2.0 * pw[m] + pw[m - 1] })
        .collect();
    let mut out = vec![0.0; n + 1];
    for k in 1..=n {
        let kf = k as f64;
        let start = pw[k - 1] - (kf - 1.0 - beta) * (pw[k] / kf);
        let mut acc = start * u[0] + u[k];
        for m in 1..k {
            acc += omega[m] * u[k - m];
        }
        out[k] = scale * acc;
    }
    out
}

/// Second-order finite-difference derivative: centered inside, one-sided at the ends.
pub(crate) fn stencil_derivative(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len() - 1;
    let inv = 1.0 / (2.0 * h);
    let mut d = vec![0.0; n + 1];
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) * inv;
    for k in 1..n {
        d[k] = (v[k + 1] - v[k - 1]) * inv;
    }
    d[n] = (v[n - 2] - 4.0 * v[n - 1] + 3.0 * v[n]) * inv;
    d
}

fn left_rl_values(u: &[f64], h: f64, alpha: f64) -> Vec<f64> {
    stencil_derivative(&left_integral_values(u, h, 1.0 - alpha), h)
}

/// L1 left Caputo derivative.
fn left_caputo_values(u: &[f64], h: f64, alpha: f64) -> Vec<f64> {
    let n = u.len() - 1;
    let scale = h.powf(-alpha) / gamma(2.0 - alpha);
    let q: Vec<f64> = (0..=n).map(|m| (m as f64).powf(1.0 - alpha)).collect();
    let b: Vec<f64> = (0..n).map(|m| q[m + 1] - q[m]).collect();
    let du: Vec<f64> = u.windows(2).map(|w| w[1] - w[0]).collect();
    let mut out = vec![0.0; n + 1];
    for k in 1..=n {
        let mut acc = 0.0;
        for j in 0..k {
            acc += b[k - 1 - j] * du[j];
        }
        out[k] = scale * acc;
    }
    out[0] = 2.0 * out[1] - out[2];
    out
}

fn reflect(values: &[f64], op: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
    let mut rev = values.to_vec();
    rev.reverse();
    let mut out = op(&rev);
    out.reverse();
    out
}

/// Right product-trapezoid fractional integral of order `beta > 0`.
pub(crate) fn right_integral_values(u: &[f64], h: f64, beta: f64) -> Vec<f64> {
    reflect(u, |v| left_integral_values(v, h, beta))
}

fn sided(values: &[f64], side: Side, op: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
    match side {
        Side::Left => op(values),
        Side::Right => reflect(values, op),
    }
}

/// Left (`aI_t^α`) or right (`tI_b^α`) Riemann-Liouville fractional integral.
pub fn frac_integral(u: &GridFunction, order: FractionalOrder, side: Side) -> Result<GridFunction> {
    if order.is_zero() {
        return Err(FracError::ZeroOrderIntegral);
    }
    let (h, beta) = (u.step(), order.alpha());
    let values = sided(u.values(), side, |v| left_integral_values(v, h, beta));
    Ok(GridFunction::from_parts(u.shape(), values))
}

/// Left or right Riemann-Liouville fractional derivative. Order 0 returns `u`.
pub fn rl_derivative(u: &GridFunction, order: FractionalOrder, side: Side) -> Result<GridFunction> {
    if order.is_zero() {
        return Ok(u.clone());
    }
    let (h, alpha) = (u.step(), order.alpha());
    let values = sided(u.values(), side, |v| left_rl_values(v, h, alpha));
    Ok(GridFunction::from_parts(u.shape(), values))
}

/// Left or right Caputo fractional derivative. Order 0 returns `u`.
pub fn caputo_derivative(u: &GridFunction, order: FractionalOrder, side: Side) -> Result<GridFunction> {
    if order.is_zero() {
        return Ok(u.clone());
    }
    let (h, alpha) = (u.step(), order.alpha());
    let values = sided(u.values(), side, |v| left_caputo_values(v, h, alpha));
    Ok(GridFunction::from_parts(u.shape(), values))
}

/// Riesz-Caputo derivative `(left Caputo - right Caputo) / 2`. Order 0 returns `u`.
pub fn riesz_caputo_derivative(u: &GridFunction, order: FractionalOrder) -> Result<GridFunction> {
    if order.is_zero() {
        return Ok(u.clone());
    }
    let left = caputo_derivative(u, order, Side::Left)?;
    let right = caputo_derivative(u, order, Side::Right)?;
    left.combine(0.5, &right, -0.5)
}

/// Derivative of the requested kind; the right-sided part of the Riesz-Caputo
/// derivative is built in, so `Side` only applies to the other kinds.
pub fn derivative(u: &GridFunction, order: FractionalOrder, kind: DerivativeKind, side: Side) -> Result<GridFunction> {
    match kind {
        DerivativeKind::RiemannLiouville => rl_derivative(u, order, side),
        DerivativeKind::Caputo => caputo_derivative(u, order, side),
        DerivativeKind::RieszCaputo => riesz_caputo_derivative(u, order),
    }
}

/// The boundary term by which the RL derivative exceeds the Caputo one:
/// `u(a) / (Γ(1-α) (t-a)^α)` on the left, `u(b) / (Γ(1-α) (b-t)^α)` on the right.
/// The singular endpoint takes the value of its neighbour.
pub fn rl_caputo_gap(u: &GridFunction, order: FractionalOrder, side: Side) -> Result<GridFunction> {
    if order.is_zero() {
        return Err(FracError::InvalidOrder(0.0));
    }
    let shape = u.shape();
    let alpha = order.alpha();
    let g = gamma(1.0 - alpha);
    let n = shape.n;
    let mut values = vec![0.0; n + 1];
    match side {
        Side::Left => {
            let ua = u.first();
            for (k, v) in values.iter_mut().enumerate().skip(1) {
                *v = ua / (g * (shape.t(k) - shape.a).powf(alpha));
            }
            values[0] = values[1];
        }
        Side::Right => {
            let ub = u.last();
            for (k, v) in values.iter_mut().enumerate().take(n) {
                *v = ub / (g * (shape.b - shape.t(k)).powf(alpha));
            }
            values[n] = values[n - 1];
        }
    }
    Ok(GridFunction::from_parts(shape, values))
}

/// Dense row-major matrix used for precomputed operator weights.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `self^T y`, the adjoint action.
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * yi;
            }
        }
        out
    }
}

/// Weight matrix `W` of the left-anchored derivative of the given kind on
/// `shape`, so that `derivative(u) = W u`. Built column by column from the
/// operators themselves, which keeps the two representations identical.
pub fn derivative_matrix(shape: GridShape, order: FractionalOrder, kind: DerivativeKind) -> Result<DenseMatrix> {
    let len = shape.len();
    let mut m = DenseMatrix::zeros(len, len);
    let mut unit = vec![0.0; len];
    for j in 0..len {
        unit[j] = 1.0;
        let e = GridFunction::from_parts(shape, unit.clone());
        let col = derivative(&e, order, kind, Side::Left)?;
        for (i, v) in col.values().iter().enumerate() {
            m.set(i, j, *v);
        }
        unit[j] = 0.0;
    }
    Ok(m)
}
