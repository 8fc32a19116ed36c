//! Weak-sense comparisons: pairings `⟨f, φ⟩ = ∫ f φ` against analytic test
//! functions, and convergence studies of the truncated expansions.

use std::fmt;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FracError, Result};
use crate::euler_lagrange::{
    approx_composite, composite_vanishes, residual_approx_n, residual_corrected, ResidualReport,
};
use crate::expansion::{right_weak_sum, SmoothFunctionModel, VANISHING_TOLERANCE};
use crate::grid::{format_float, EndSingularity, FractionalOrder, GridFunction, GridShape, Side};
use crate::lagrangian::Lagrangian;
use crate::operators::rl_derivative;

/// Grid size used by the convergence studies unless told otherwise.
pub const DEFAULT_STUDY_N: usize = 2048;

/// A real-analytic test function with closed-form derivatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum TestFunction {
    /// `t^k`.
    Monomial { degree: u32 },
    /// `exp(k t)`.
    Exp { rate: f64 },
    /// `Σ_j c_j ((t - center) / scale)^j`.
    ShiftedPoly { center: f64, scale: f64, coeffs: Vec<f64> },
}

impl TestFunction {
    pub fn monomial(degree: u32) -> Self {
        Self::Monomial { degree }
    }

    pub fn exp(rate: f64) -> Self {
        Self::Exp { rate }
    }

    /// The Legendre polynomial of the given degree, shifted to `[lo, hi]`.
    pub fn legendre(degree: usize, lo: f64, hi: f64) -> Self {
        // monomial coefficients of P_j by (j+1) P_{j+1} = (2j+1) x P_j - j P_{j-1}
        let mut prev = vec![1.0];
        let mut cur = vec![0.0, 1.0];
        if degree == 0 {
            cur = prev.clone();
        }
        for j in 1..degree {
            let jf = j as f64;
            let mut next = vec![0.0; j + 2];
            for (i, c) in cur.iter().enumerate() {
                next[i + 1] += (2.0 * jf + 1.0) * c / (jf + 1.0);
            }
            for (i, c) in prev.iter().enumerate() {
                next[i] -= jf * c / (jf + 1.0);
            }
            prev = std::mem::replace(&mut cur, next);
        }
        Self::ShiftedPoly { center: 0.5 * (lo + hi), scale: 0.5 * (hi - lo), coeffs: cur }
    }

    /// Monomials of degree 0 to 12 and `exp(±t)`.
    pub fn witness_family() -> Vec<Self> {
        let mut v: Vec<Self> = (0..=12).map(Self::monomial).collect();
        v.push(Self::exp(1.0));
        v.push(Self::exp(-1.0));
        v
    }

    pub fn id(&self) -> String {
        self.to_string()
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.derivative(0, t)
    }

    /// `φ^(m)(t)`.
    pub fn derivative(&self, m: u32, t: f64) -> f64 {
        match self {
            Self::Monomial { degree } => {
                if m > *degree {
                    return 0.0;
                }
                let falling: f64 = (0..m).map(|i| (degree - i) as f64).product();
                falling * t.powi((degree - m) as i32)
            }
            Self::Exp { rate } => rate.powi(m as i32) * (rate * t).exp(),
            Self::ShiftedPoly { center, scale, coeffs } => {
                let x = (t - center) / scale;
                let mut acc = 0.0;
                for (j, c) in coeffs.iter().enumerate().skip(m as usize).rev() {
                    let falling: f64 = (0..m as usize).map(|i| (j - i) as f64).product();
                    acc = acc * x + c * falling;
                }
                // Horner above skips the lowest m powers; the loop variable
                // runs over j >= m, so `acc` is in powers of x^(j - m).
                acc / scale.powi(m as i32)
            }
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Monomial { degree: 0 } => f.write_str("1"),
            Self::Monomial { degree: 1 } => f.write_str("t"),
            Self::Monomial { degree } => write!(f, "t^{degree}"),
            Self::Exp { rate } => write!(f, "exp({rate}t)"),
            Self::ShiftedPoly { center, scale, coeffs } => {
                write!(f, "poly[{center};{scale};")?;
                for (i, c) in coeffs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str("]")
            }
        }
    }
}

/// Trapezoid quadrature of `f φ` over the grid.
pub fn pairing(f: &GridFunction, phi: &TestFunction) -> f64 {
    let h = f.step();
    let n = f.n();
    let vals = f.values();
    let mut acc = 0.5 * (vals[0] * phi.eval(f.t(0)) + vals[n] * phi.eval(f.t(n)));
    for (k, v) in vals.iter().enumerate().take(n).skip(1) {
        acc += v * phi.eval(f.t(k));
    }
    h * acc
}

/// `∫_0^1 (1-s) (j+s)^(-β) ds` and `∫_0^1 s (j+s)^(-β) ds`: the hat-function
/// moments of the kernel on the panel `[j, j+1]` in units of the step.
fn kernel_hat_weights(j: usize, beta: f64) -> (f64, f64) {
    let (c0, c1) = (1.0 - beta, 2.0 - beta);
    if j == 0 {
        return (1.0 / c0 - 1.0 / c1, 1.0 / c1);
    }
    let jf = j as f64;
    let l = (1.0 / jf).ln_1p();
    // (j+1)^c - j^c without cancellation
    let i0 = jf.powf(c0) * (c0 * l).exp_m1() / c0;
    let i1 = jf.powf(c1) * (c1 * l).exp_m1() / c1;
    ((jf + 1.0) * i0 - i1, i1 - jf * i0)
}

/// `∫ g(t) (t - t_0)^(-β) dt` over nodes `0..=m` of a grid with step `h`,
/// with `g` replaced by its piecewise-linear interpolant.
fn product_integral_left(g: &[f64], h: f64, beta: f64) -> f64 {
    let scale = h.powf(1.0 - beta);
    let mut acc = 0.0;
    for j in 0..g.len() - 1 {
        let (wl, wr) = kernel_hat_weights(j, beta);
        acc += wl * g[j] + wr * g[j + 1];
    }
    scale * acc
}

/// Pairing of a function with known endpoint singularities. On each tagged
/// half of the grid `f φ = g (t-a)^(-β)` (or `(b-t)^(-β)`), the smooth factor
/// `g` is interpolated linearly and the kernel is integrated exactly. At the
/// singular node itself `g` is extrapolated from its two neighbours, so the
/// value stored there is never used.
pub fn pairing_tagged(f: &GridFunction, phi: &TestFunction, singular: EndSingularity) -> f64 {
    let left = singular.left.filter(|&b| b > 0.0);
    let right = singular.right.filter(|&b| b > 0.0);
    if left.is_none() && right.is_none() {
        return pairing(f, phi);
    }
    let shape = f.shape();
    let (n, h) = (shape.n, shape.step());
    let prod: Vec<f64> = (0..=n).map(|k| f.values()[k] * phi.eval(shape.t(k))).collect();
    let split = match (left, right) {
        (Some(_), Some(_)) => n / 2,
        (Some(_), None) => n,
        _ => 0,
    };
    let weighted = |range: &[f64], dist: &dyn Fn(usize) -> f64, beta: f64| -> f64 {
        let mut g: Vec<f64> = range.iter().enumerate().map(|(j, v)| v * dist(j).powf(beta)).collect();
        g[0] = if g.len() > 2 { 2.0 * g[1] - g[2] } else { g[1] };
        product_integral_left(&g, h, beta)
    };
    let trapezoid = |vals: &[f64]| -> f64 {
        if vals.len() < 2 {
            return 0.0;
        }
        let last = vals.len() - 1;
        h * (0.5 * (vals[0] + vals[last]) + vals[1..last].iter().sum::<f64>())
    };
    let mut total = 0.0;
    let lower = &prod[..=split];
    total += match left {
        Some(beta) => weighted(lower, &|j| j as f64 * h, beta),
        None => trapezoid(lower),
    };
    let mut upper: Vec<f64> = prod[split..].to_vec();
    upper.reverse();
    total += match right {
        Some(beta) if upper.len() > 1 => weighted(&upper, &|j| j as f64 * h, beta),
        _ => trapezoid(&upper),
    };
    total
}

/// Pairing of a residual report, using its singularity tags.
pub fn pair_report(report: &ResidualReport, phi: &TestFunction) -> f64 {
    pairing_tagged(&report.residual, phi, report.singular)
}

/// `∫ |f|` with the same singular-end handling as [`pairing_tagged`].
pub fn l1_norm_tagged(f: &GridFunction, singular: EndSingularity) -> f64 {
    let abs = GridFunction::new(f.shape(), f.values().iter().map(|v| v.abs()).collect()).expect("finite input");
    pairing_tagged(&abs, &TestFunction::monomial(0), singular)
}

/// The polynomial of degree `<= degree` with the same pairings as `f`
/// against all polynomials of that degree (the L² projection), on the grid.
pub fn moment_projection(f: &GridFunction, degree: usize) -> GridFunction {
    let (a, b) = (f.a(), f.b());
    let mut values = vec![0.0; f.n() + 1];
    for j in 0..=degree {
        let p = TestFunction::legendre(j, a, b);
        let c = (2 * j + 1) as f64 / (b - a) * pairing(f, &p);
        for (k, v) in values.iter_mut().enumerate() {
            *v += c * p.eval(f.t(k));
        }
    }
    GridFunction::new(f.shape(), values).expect("finite projection")
}

/// One cell of a convergence study. `phi_id` is `max` for the row holding
/// the largest weak error over the test functions at that `N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    #[serde(rename = "N")]
    pub n_terms: usize,
    pub phi_id: String,
    pub weak_error: f64,
    pub strong_l1_error: Option<f64>,
    /// Whether the vanishing-at-`b` hypothesis held for this `N`.
    pub conforming: bool,
}

pub const MAX_ROW_ID: &str = "max";

const CSV_HEADER: [&str; 5] = ["N", "phi_id", "weak_error", "strong_l1_error", "conforming"];

pub fn write_records<W: Write>(records: &[ConvergenceRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.n_terms.to_string(),
            r.phi_id.clone(),
            format_float(r.weak_error),
            r.strong_l1_error.map(format_float).unwrap_or_default(),
            r.conforming.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn records_to_csv(records: &[ConvergenceRecord]) -> String {
    let mut buf = Vec::new();
    write_records(records, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("utf-8 output")
}

pub fn read_records<R: Read>(reader: R) -> Result<Vec<ConvergenceRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(FracError::Parse(format!("expected header '{}', got '{}'", CSV_HEADER.join(","), header.join(","))));
    }
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| FracError::Parse(format!("row {}: bad {what}", line + 2));
        let strong = &rec[3];
        out.push(ConvergenceRecord {
            n_terms: rec[0].parse().map_err(|_| bad("N"))?,
            phi_id: rec[1].to_string(),
            weak_error: rec[2].parse().map_err(|_| bad("weak_error"))?,
            strong_l1_error: if strong.is_empty() { None } else { Some(strong.parse().map_err(|_| bad("strong_l1_error"))?) },
            conforming: rec[4].parse().map_err(|_| bad("conforming"))?,
        });
    }
    Ok(out)
}

/// The per-`φ` records for one `N`, followed by their `max` row.
fn records_for(n_terms: usize, phis: &[TestFunction], errors: &[f64], strong: Option<f64>, conforming: bool) -> Vec<ConvergenceRecord> {
    let mut rows: Vec<ConvergenceRecord> = phis
        .iter()
        .zip(errors)
        .map(|(phi, &e)| ConvergenceRecord { n_terms, phi_id: phi.id(), weak_error: e, strong_l1_error: strong, conforming })
        .collect();
    rows.push(ConvergenceRecord {
        n_terms,
        phi_id: MAX_ROW_ID.into(),
        weak_error: errors.iter().fold(0.0, |m: f64, e| m.max(*e)),
        strong_l1_error: strong,
        conforming,
    });
    rows
}

/// The `max` rows of a study, in order of `N`.
pub fn max_rows(records: &[ConvergenceRecord]) -> Vec<&ConvergenceRecord> {
    records.iter().filter(|r| r.phi_id == MAX_ROW_ID).collect()
}

/// Compares the truncated sum `S_N F` with the right Riemann-Liouville
/// derivative `tD_b^α F`, weakly against each `φ` and in L¹.
pub fn proposition_check(
    big_f: &SmoothFunctionModel,
    order: FractionalOrder,
    phis: &[TestFunction],
    n_list: &[usize],
    shape: GridShape,
) -> Result<Vec<ConvergenceRecord>> {
    let alpha = order.alpha();
    let sampled = big_f.sample(shape)?;
    let exact = rl_derivative(&sampled, order, Side::Right)?;
    let scale = sampled.max_abs().max(1e-300);
    let exact_sing = EndSingularity {
        left: None,
        right: (alpha > 0.0 && sampled.last().abs() > 1e-12 * scale).then_some(alpha),
    };
    let exact_pairs: Vec<f64> = phis.iter().map(|phi| pairing_tagged(&exact, phi, exact_sing)).collect();
    let per_n: Vec<Result<Vec<ConvergenceRecord>>> = n_list
        .par_iter()
        .map(|&n_terms| {
            let sum = right_weak_sum(big_f, order, shape.a, n_terms, shape)?;
            let sum_sing = EndSingularity { left: (alpha > 0.0).then_some(alpha), right: None };
            let errors: Vec<f64> = phis
                .iter()
                .zip(&exact_pairs)
                .map(|(phi, e)| (pairing_tagged(&sum, phi, sum_sing) - e).abs())
                .collect();
            let diff = sum.combine(1.0, &exact, -1.0)?;
            let strong = l1_norm_tagged(&diff, sum_sing.union(exact_sing));
            let conforming = big_f.vanishing_defect(shape.a, shape.b, n_terms)? <= VANISHING_TOLERANCE;
            Ok(records_for(n_terms, phis, &errors, Some(strong), conforming))
        })
        .collect();
    flatten(per_n)
}

/// Compares the residual of the truncated Euler-Lagrange equation with the
/// corrected equation's residual `P` along the same candidate `u`. A record
/// is non-conforming when the composite `∂L/∂p` does not vanish to order `N`
/// at `b`; the run proceeds regardless.
pub fn theorem_check(
    l: &Lagrangian,
    u: &SmoothFunctionModel,
    order: FractionalOrder,
    phis: &[TestFunction],
    n_list: &[usize],
    shape: GridShape,
) -> Result<Vec<ConvergenceRecord>> {
    let p_side = residual_corrected(l, &u.sample(shape)?, order)?;
    let p_pairs: Vec<f64> = phis.iter().map(|phi| pair_report(&p_side, phi)).collect();
    let per_n: Vec<Result<Vec<ConvergenceRecord>>> = n_list
        .par_iter()
        .map(|&n_terms| {
            let approx = residual_approx_n(l, u, order, n_terms, shape)?;
            let composite = approx_composite(l, u, order, n_terms, shape)?;
            let conforming = composite_vanishes(&composite, shape, n_terms)?;
            if !conforming {
                log::warn!("theorem check, N = {n_terms}: dL/dp along the candidate does not vanish to order N at b");
            }
            let errors: Vec<f64> = phis
                .iter()
                .zip(&p_pairs)
                .map(|(phi, p)| (pair_report(&approx, phi) - p).abs())
                .collect();
            let diff = approx.residual.combine(1.0, &p_side.residual, -1.0)?;
            let strong = l1_norm_tagged(&diff, approx.singular.union(p_side.singular));
            Ok(records_for(n_terms, phis, &errors, Some(strong), conforming))
        })
        .collect();
    flatten(per_n)
}

fn flatten(per_n: Vec<Result<Vec<ConvergenceRecord>>>) -> Result<Vec<ConvergenceRecord>> {
    let mut out = Vec::new();
    for rows in per_n {
        out.extend(rows?);
    }
    Ok(out)
}
