//! Lagrangians `L(t, u, p)` with analytic partials, where `p` stands for the
//! fractional derivative of `u`, and the built-in registry.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FracError, Result};
use crate::gamma::gamma;
use crate::grid::FractionalOrder;
use crate::operators::DerivativeKind;

/// A pointwise map `(t, u, p) -> real`. Must be reentrant: no hidden mutable state.
pub type PointFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

const SELF_CHECK_SAMPLES: usize = 64;
const SELF_CHECK_TOLERANCE: f64 = 1e-5;

/// `L` together with `∂L/∂u` and `∂L/∂p`.
#[derive(Clone)]
pub struct Lagrangian {
    name: String,
    value: PointFn,
    d_u: PointFn,
    d_p: PointFn,
    /// Free-form note on how often `t -> ∂L/∂p` may be differentiated.
    pub smoothness_note: String,
}

impl fmt::Debug for Lagrangian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Lagrangian").field("name", &self.name).finish_non_exhaustive()
    }
}

impl Lagrangian {
    /// Builds a Lagrangian and checks its partials against central differences
    /// of `value` at seeded random points with `t` in `t_range` and
    /// `u, p` in `[-2, 2]`.
    pub fn new(
        name: impl Into<String>,
        value: PointFn,
        d_u: PointFn,
        d_p: PointFn,
        t_range: (f64, f64),
    ) -> Result<Self> {
        let l = Self { name: name.into(), value, d_u, d_p, smoothness_note: String::from("analytic") };
        l.self_check(t_range)?;
        Ok(l)
    }

    pub fn zero() -> Self {
        let z: PointFn = Arc::new(|_, _, _| 0.0);
        Self { name: "zero".into(), value: z.clone(), d_u: z.clone(), d_p: z, smoothness_note: "analytic".into() }
    }

    pub fn with_smoothness_note(mut self, note: impl Into<String>) -> Self {
        self.smoothness_note = note.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn value(&self, t: f64, u: f64, p: f64) -> f64 {
        (self.value)(t, u, p)
    }

    #[inline]
    pub fn d_u(&self, t: f64, u: f64, p: f64) -> f64 {
        (self.d_u)(t, u, p)
    }

    #[inline]
    pub fn d_p(&self, t: f64, u: f64, p: f64) -> f64 {
        (self.d_p)(t, u, p)
    }

    /// `c * L`.
    pub fn scaled(&self, c: f64) -> Self {
        let (v, du, dp) = (self.value.clone(), self.d_u.clone(), self.d_p.clone());
        Self {
            name: format!("{c}*{}", self.name),
            value: Arc::new(move |t, u, p| c * v(t, u, p)),
            d_u: Arc::new(move |t, u, p| c * du(t, u, p)),
            d_p: Arc::new(move |t, u, p| c * dp(t, u, p)),
            smoothness_note: self.smoothness_note.clone(),
        }
    }

    pub fn self_check(&self, t_range: (f64, f64)) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..SELF_CHECK_SAMPLES {
            let t = rng.gen_range(t_range.0..=t_range.1);
            let u = rng.gen_range(-2.0..=2.0);
            let p = rng.gen_range(-2.0..=2.0);
            let l = self.value(t, u, p);
            let checks = [
                ("d_u", self.d_u(t, u, p), u, central(|x| self.value(t, x, p), u)),
                ("d_p", self.d_p(t, u, p), p, central(|x| self.value(t, u, x), p)),
            ];
            for (which, analytic, _, numeric) in checks {
                let scale = analytic.abs().max(1e-3 * (1.0 + l.abs()));
                if !analytic.is_finite() || (analytic - numeric).abs() > SELF_CHECK_TOLERANCE * scale {
                    return Err(FracError::LagrangianCheck {
                        name: self.name.clone(),
                        detail: format!("{which} at (t, u, p) = ({t}, {u}, {p}): analytic {analytic}, finite difference {numeric}"),
                    });
                }
            }
        }
        Ok(())
    }
}

fn central(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-5 * x.abs().max(1.0);
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Ids of the built-in Lagrangians.
pub const REGISTRY_IDS: [&str; 6] = ["example1", "example1-smoothed", "rl-eigen", "caputo-eigen", "riesz-eigen", "quadratic"];

/// A registry Lagrangian, the derivative kind it is written in, and the
/// interval it is posed on.
#[derive(Clone, Debug)]
pub struct BuiltinLagrangian {
    pub id: &'static str,
    pub lagrangian: Lagrangian,
    pub kind: DerivativeKind,
}

/// Looks up a built-in Lagrangian for the given order. All entries are posed on `[0, 1]`.
///
/// - `example1`: `u² / (2Γ(1-α)(1-t)^α) - p`; its extremal with `u(0) = 1` is `u ≡ 1`.
/// - `example1-smoothed`: as `example1` with `p` weighted by `(1-t)^4`, so
///   `∂L/∂p` and its first three derivatives vanish at `t = 1`.
/// - `rl-eigen`, `caputo-eigen`, `riesz-eigen`: `(p - u)²` in the named derivative.
/// - `quadratic`: `(u² + p²) / 2`, Riemann-Liouville.
pub fn builtin(id: &str, order: FractionalOrder) -> Result<BuiltinLagrangian> {
    let alpha = order.alpha();
    let g = gamma(1.0 - alpha);
    let range = (0.05, 0.95);
    let (id, lagrangian, kind): (&'static str, Lagrangian, DerivativeKind) = match id {
        "example1" => {
            let l = Lagrangian::new(
                "example1",
                Arc::new(move |t: f64, u: f64, p: f64| u * u / (2.0 * g * (1.0 - t).powf(alpha)) - p),
                Arc::new(move |t: f64, u: f64, _p| u / (g * (1.0 - t).powf(alpha))),
                Arc::new(|_, _, _| -1.0),
                range,
            )?
            .with_smoothness_note("d_p constant; d_u singular at t = 1");
            ("example1", l, DerivativeKind::RiemannLiouville)
        }
        "example1-smoothed" => {
            let l = Lagrangian::new(
                "example1-smoothed",
                Arc::new(move |t: f64, u: f64, p: f64| u * u / (2.0 * g * (1.0 - t).powf(alpha)) - (1.0 - t).powi(4) * p),
                Arc::new(move |t: f64, u: f64, _p| u / (g * (1.0 - t).powf(alpha))),
                Arc::new(|t: f64, _, _| -(1.0 - t).powi(4)),
                range,
            )?
            .with_smoothness_note("d_p = -(1-t)^4: derivatives of order <= 3 vanish at t = 1, the fourth does not");
            ("example1-smoothed", l, DerivativeKind::RiemannLiouville)
        }
        "rl-eigen" | "caputo-eigen" | "riesz-eigen" => {
            let (name, kind) = match id {
                "rl-eigen" => ("rl-eigen", DerivativeKind::RiemannLiouville),
                "caputo-eigen" => ("caputo-eigen", DerivativeKind::Caputo),
                _ => ("riesz-eigen", DerivativeKind::RieszCaputo),
            };
            let l = Lagrangian::new(
                name,
                Arc::new(|_, u: f64, p: f64| (p - u) * (p - u)),
                Arc::new(|_, u: f64, p: f64| -2.0 * (p - u)),
                Arc::new(|_, u: f64, p: f64| 2.0 * (p - u)),
                range,
            )?;
            (name, l, kind)
        }
        "quadratic" => {
            let l = Lagrangian::new(
                "quadratic",
                Arc::new(|_, u: f64, p: f64| 0.5 * (u * u + p * p)),
                Arc::new(|_, u: f64, _| u),
                Arc::new(|_, _, p: f64| p),
                range,
            )?;
            ("quadratic", l, DerivativeKind::RiemannLiouville)
        }
        other => return Err(FracError::UnknownLagrangian(other.to_string())),
    };
    Ok(BuiltinLagrangian { id, lagrangian, kind })
}
