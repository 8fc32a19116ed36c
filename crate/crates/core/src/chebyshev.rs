//! Chebyshev series on an interval, built from samples at Chebyshev-Gauss
//! points and differentiated through the coefficient recurrence.

use std::f64::consts::PI;

use crate::error::{FracError, Result};

/// Relative size below which trailing coefficients are dropped.
const CHOP_TOLERANCE: f64 = 1e-14;
const MAX_POINTS: usize = 1024;

#[derive(Clone, Debug, PartialEq)]
pub struct ChebyshevSeries {
    lo: f64,
    hi: f64,
    /// `f(x) = Σ c_k T_k(s)`, `s` the affine image of `x` in `[-1, 1]`.
    coeffs: Vec<f64>,
}

/// The `m` Chebyshev-Gauss points of `[lo, hi]`, in decreasing order.
pub fn gauss_points(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    (0..m)
        .map(|j| {
            let s = (PI * (j as f64 + 0.5) / m as f64).cos();
            0.5 * (lo + hi) + 0.5 * (hi - lo) * s
        })
        .collect()
}

impl ChebyshevSeries {
    /// Interpolates samples taken at `gauss_points(lo, hi, samples.len())`.
    pub fn from_samples(lo: f64, hi: f64, samples: &[f64]) -> Result<Self> {
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(FracError::InvalidGrid(format!("bad chebyshev interval [{lo}, {hi}]")));
        }
        if samples.is_empty() {
            return Err(FracError::InvalidGrid("no chebyshev samples".into()));
        }
        if let Some(j) = samples.iter().position(|v| !v.is_finite()) {
            return Err(FracError::NonFinite(format!("chebyshev sample {j} is {}", samples[j])));
        }
        let m = samples.len();
        let coeffs = (0..m)
            .map(|k| {
                let sum: f64 = samples
                    .iter()
                    .enumerate()
                    .map(|(j, f)| f * (PI * k as f64 * (j as f64 + 0.5) / m as f64).cos())
                    .sum();
                if k == 0 {
                    sum / m as f64
                } else {
                    2.0 * sum / m as f64
                }
            })
            .collect();
        Ok(Self { lo, hi, coeffs })
    }

    /// Samples `f` on successively finer Chebyshev-Gauss sets until the
    /// coefficient tail drops below the chop tolerance, then truncates.
    pub fn adaptive(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let mut m = 17;
        loop {
            let samples: Vec<f64> = gauss_points(lo, hi, m).into_iter().map(&f).collect();
            let mut series = Self::from_samples(lo, hi, &samples)?;
            let scale = series.coeffs.iter().fold(0.0f64, |s, c| s.max(c.abs()));
            let tail = series.coeffs[m - 3..].iter().fold(0.0f64, |s, c| s.max(c.abs()));
            if tail <= CHOP_TOLERANCE * scale.max(f64::MIN_POSITIVE) || 2 * m > MAX_POINTS {
                if tail > CHOP_TOLERANCE * scale {
                    log::warn!("chebyshev fit on [{lo}, {hi}] unresolved at {m} points (tail {tail:.3e})");
                }
                series.chop(scale);
                return Ok(series);
            }
            m = 2 * m - 1;
        }
    }

    fn chop(&mut self, scale: f64) {
        let cutoff = CHOP_TOLERANCE * scale;
        while self.coeffs.len() > 1 && self.coeffs.last().is_some_and(|c| c.abs() <= cutoff) {
            self.coeffs.pop();
        }
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Clenshaw evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        let s = (2.0 * x - self.lo - self.hi) / (self.hi - self.lo);
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * s * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        s * b1 - b2 + self.coeffs[0]
    }

    pub fn derivative(&self) -> Self {
        let n = self.degree();
        if n == 0 {
            return Self { lo: self.lo, hi: self.hi, coeffs: vec![0.0] };
        }
        let mut d = vec![0.0; n + 1];
        for k in (1..=n).rev() {
            let next = if k + 1 <= n { d[k + 1] } else { 0.0 };
            d[k - 1] = next + 2.0 * k as f64 * self.coeffs[k];
        }
        d[0] *= 0.5;
        d.truncate(n);
        let scale = 2.0 / (self.hi - self.lo);
        Self { lo: self.lo, hi: self.hi, coeffs: d.into_iter().map(|c| c * scale).collect() }
    }
}
