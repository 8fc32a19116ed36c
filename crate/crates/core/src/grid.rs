//! Sampled functions on uniform grids, fractional orders and memory windows.

use std::io::{Read, Write};
use std::ops::RangeInclusive;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FracError, Result};

/// Relative tolerance used when checking that CSV abscissae are uniformly spaced.
pub const SPACING_TOLERANCE: f64 = 1e-9;

/// Formats a float with 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Order α of a fractional operator, restricted to `0 <= α < 1`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FractionalOrder(f64);

impl FractionalOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && (0.0..1.0).contains(&alpha) {
            Ok(Self(alpha))
        } else {
            Err(FracError::InvalidOrder(alpha))
        }
    }

    #[inline]
    pub fn alpha(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0.0
    }

    /// The complementary order 1 - α used by derivative constructions.
    #[inline]
    pub fn complement(self) -> f64 {
        1.0 - self.0
    }
}

impl TryFrom<f64> for FractionalOrder {
    type Error = FracError;
    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<FractionalOrder> for f64 {
    fn from(value: FractionalOrder) -> f64 {
        value.0
    }
}

/// Which end of the interval the operator's memory is anchored to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl std::str::FromStr for Side {
    type Err = FracError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            other => Err(FracError::Parse(format!("side must be 'left' or 'right', got '{other}'"))),
        }
    }
}

/// A uniform grid `a = t_0 < t_1 < ... < t_n = b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridShape {
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

impl GridShape {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(FracError::InvalidGrid(format!("endpoints must be finite, got [{a}, {b}]")));
        }
        if b <= a {
            return Err(FracError::InvalidGrid(format!("need b > a, got [{a}, {b}]")));
        }
        if n < 2 {
            return Err(FracError::InvalidGrid(format!("need at least 2 intervals, got {n}")));
        }
        Ok(Self { a, b, n })
    }

    #[inline]
    pub fn step(&self) -> f64 {
        (self.b - self.a) / self.n as f64
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n + 1
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn t(&self, k: usize) -> f64 {
        if k == self.n {
            self.b
        } else {
            self.a + k as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|k| self.t(k)).collect()
    }

    /// Index of the grid node at `t`, if `t` coincides with one up to rounding.
    pub fn node_index(&self, t: f64) -> Option<usize> {
        let x = (t - self.a) / self.step();
        let k = x.round();
        if k < 0.0 || k > self.n as f64 {
            return None;
        }
        if (x - k).abs() <= 1e-8 {
            Some(k as usize)
        } else {
            None
        }
    }

    /// The sub-grid spanning nodes `k0..=k1`.
    pub fn sub(&self, k0: usize, k1: usize) -> Result<Self> {
        if k1 > self.n || k1 < k0 + 2 {
            return Err(FracError::InvalidGrid(format!(
                "sub-grid {k0}..={k1} of a grid with {} intervals needs at least 2 intervals",
                self.n
            )));
        }
        Ok(Self { a: self.t(k0), b: self.t(k1), n: k1 - k0 })
    }

    pub fn same_as(&self, other: &GridShape) -> bool {
        self.n == other.n
            && (self.a - other.a).abs() <= 1e-12 * (1.0 + self.a.abs())
            && (self.b - other.b).abs() <= 1e-12 * (1.0 + self.b.abs())
    }
}

/// A real function sampled at the nodes of a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    shape: GridShape,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(shape: GridShape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(FracError::InvalidGrid(format!(
                "expected {} samples, got {}",
                shape.len(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(FracError::NonFinite(format!("sample {k} at t = {} is {}", shape.t(k), values[k])));
        }
        Ok(Self { shape, values })
    }

    /// Builds a grid function from already-validated operator output.
    pub(crate) fn from_parts(shape: GridShape, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), shape.len());
        Self { shape, values }
    }

    pub fn from_fn(shape: GridShape, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(shape, shape.nodes().into_iter().map(f).collect())
    }

    pub fn zeros(shape: GridShape) -> Self {
        Self { shape, values: vec![0.0; shape.len()] }
    }

    pub fn constant(shape: GridShape, c: f64) -> Result<Self> {
        Self::new(shape, vec![c; shape.len()])
    }

    #[inline]
    pub fn shape(&self) -> GridShape {
        self.shape
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn a(&self) -> f64 {
        self.shape.a
    }

    #[inline]
    pub fn b(&self) -> f64 {
        self.shape.b
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.shape.n
    }

    #[inline]
    pub fn step(&self) -> f64 {
        self.shape.step()
    }

    #[inline]
    pub fn t(&self, k: usize) -> f64 {
        self.shape.t(k)
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.shape.n]
    }

    /// Samples in reverse order, i.e. the function `s -> u(a + b - s)`.
    pub fn reversed(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        Self { shape: self.shape, values }
    }

    /// Restriction to nodes `k0..=k1`.
    pub fn slice(&self, k0: usize, k1: usize) -> Result<Self> {
        let shape = self.shape.sub(k0, k1)?;
        Ok(Self { shape, values: self.values[k0..=k1].to_vec() })
    }

    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = self.values.iter().enumerate().map(|(k, &v)| f(self.t(k), v)).collect();
        Self::new(self.shape, values)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { shape: self.shape, values: self.values.iter().map(|v| c * v).collect() }
    }

    /// `c1 * self + c2 * other`.
    pub fn combine(&self, c1: f64, other: &GridFunction, c2: f64) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| c1 * x + c2 * y).collect();
        Ok(Self { shape: self.shape, values })
    }

    pub fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.shape.same_as(&other.shape) {
            Ok(())
        } else {
            Err(FracError::GridMismatch(format!("{:?} vs {:?}", self.shape, other.shape)))
        }
    }

    /// Composite trapezoid rule for the integral over the whole grid.
    pub fn trapezoid(&self) -> f64 {
        let n = self.shape.n;
        let inner: f64 = self.values[1..n].iter().sum();
        self.step() * (inner + 0.5 * (self.values[0] + self.values[n]))
    }

    /// Trapezoid rule for `∫ self * other`.
    pub fn inner(&self, other: &GridFunction) -> Result<f64> {
        self.check_same_grid(other)?;
        let product: Vec<f64> = self.values.iter().zip(&other.values).map(|(x, y)| x * y).collect();
        Ok(Self::from_parts(self.shape, product).trapezoid())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "u"])?;
        for (k, v) in self.values.iter().enumerate() {
            w.write_record([format_float(self.t(k)), format_float(*v)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is ascii")
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Reads the `t,u` CSV format, validating the header and uniform spacing.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = r.headers()?.clone();
        if header.len() != 2 || &header[0] != "t" || &header[1] != "u" {
            return Err(FracError::Parse(format!("expected header 't,u', got '{}'", header.iter().collect::<Vec<_>>().join(","))));
        }
        let mut ts = Vec::new();
        let mut us = Vec::new();
        for (line, record) in r.records().enumerate() {
            let record = record?;
            if record.len() != 2 {
                return Err(FracError::Parse(format!("row {}: expected 2 fields", line + 2)));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| FracError::Parse(format!("row {}: '{s}': {e}", line + 2)))
            };
            ts.push(parse(&record[0])?);
            us.push(parse(&record[1])?);
        }
        if ts.len() < 3 {
            return Err(FracError::Parse(format!("need at least 3 rows, got {}", ts.len())));
        }
        let n = ts.len() - 1;
        let shape = GridShape::new(ts[0], ts[n], n)?;
        let span = shape.b - shape.a;
        for (k, &t) in ts.iter().enumerate() {
            let expected = shape.a + k as f64 * span / n as f64;
            if (t - expected).abs() > SPACING_TOLERANCE * span {
                return Err(FracError::InvalidGrid(format!(
                    "non-uniform spacing at row {}: t = {t}, expected {expected}",
                    k + 2
                )));
            }
        }
        Self::new(shape, us)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

/// Embeds a grid function in JSON (or any serde format) as its CSV text.
impl Serialize for GridFunction {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_csv_string())
    }
}

impl<'de> Deserialize<'de> for GridFunction {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Self::read_csv(text.as_bytes()).map_err(serde::de::Error::custom)
    }
}

/// Exponents of known endpoint singularities: `left: Some(β)` means the
/// function behaves like `(t-a)^(-β)` near `a`, and likewise `(b-t)^(-β)`
/// on the right.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EndSingularity {
    pub left: Option<f64>,
    pub right: Option<f64>,
}

impl EndSingularity {
    pub const NONE: Self = Self { left: None, right: None };

    pub fn union(self, other: Self) -> Self {
        let pick = |x: Option<f64>, y: Option<f64>| match (x, y) {
            (Some(p), Some(q)) => Some(p.max(q)),
            (p, q) => p.or(q),
        };
        Self { left: pick(self.left, other.left), right: pick(self.right, other.right) }
    }
}

/// Symmetric masking of the bands nearest both grid endpoints, where the
/// fractional kernels may be singular.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndpointMask {
    pub fraction: f64,
}

impl Default for EndpointMask {
    fn default() -> Self {
        Self { fraction: 0.05 }
    }
}

impl EndpointMask {
    pub fn new(fraction: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&fraction) {
            return Err(FracError::InvalidGrid(format!("mask fraction {fraction} outside [0, 0.5)")));
        }
        Ok(Self { fraction })
    }

    /// Number of masked nodes at each end; always at least the endpoint itself.
    pub fn band(&self, n: usize) -> usize {
        ((self.fraction * n as f64).ceil() as usize).max(1).min(n / 2)
    }

    pub fn interior(&self, n: usize) -> RangeInclusive<usize> {
        let m = self.band(n);
        m..=n - m
    }

    pub fn masked_fraction(&self, n: usize) -> f64 {
        (2 * self.band(n)) as f64 / (n + 1) as f64
    }

    pub fn interior_sup(&self, values: &[f64]) -> f64 {
        let n = values.len() - 1;
        values[self.interior(n)].iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// The abscissae `a <= A < B <= b`: memory start, action interval and domain end.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryWindow {
    #[serde(rename = "a")]
    pub memory_start: f64,
    #[serde(rename = "A")]
    pub action_start: f64,
    #[serde(rename = "B")]
    pub action_end: f64,
    #[serde(rename = "b")]
    pub end: f64,
}

impl MemoryWindow {
    pub fn new(memory_start: f64, action_start: f64, action_end: f64, end: f64) -> Result<Self> {
        let w = Self { memory_start, action_start, action_end, end };
        w.validate()?;
        Ok(w)
    }

    /// The classical window `a = A`, `B = b`.
    pub fn classical(a: f64, b: f64) -> Result<Self> {
        Self::new(a, a, b, b)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.memory_start, self.action_start, self.action_end, self.end]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite
            || !(self.memory_start <= self.action_start
                && self.action_start < self.action_end
                && self.action_end <= self.end)
        {
            return Err(FracError::InvalidWindow(format!(
                "need a <= A < B <= b, got a = {}, A = {}, B = {}, b = {}",
                self.memory_start, self.action_start, self.action_end, self.end
            )));
        }
        Ok(())
    }

    pub fn has_memory(&self) -> bool {
        self.memory_start < self.action_start
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_bounds() {
        assert!(FractionalOrder::new(0.0).is_ok());
        assert!(FractionalOrder::new(0.999).is_ok());
        assert!(FractionalOrder::new(1.0).is_err());
        assert!(FractionalOrder::new(-0.1).is_err());
        assert!(FractionalOrder::new(f64::NAN).is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(GridShape::new(1.0, 1.0, 10).is_err());
        assert!(GridShape::new(0.0, 1.0, 1).is_err());
        let g = GridShape::new(0.0, 1.0, 4).unwrap();
        assert_eq!(g.nodes(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.node_index(0.75), Some(3));
        assert_eq!(g.node_index(0.7), None);
        assert!(GridFunction::new(g, vec![0.0, 1.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(GridFunction::new(g, vec![0.0; 4]).is_err());
    }

    #[test]
    fn csv_round_trip_is_byte_identical() {
        let g = GridShape::new(-0.3, 1.7, 7).unwrap();
        let f = GridFunction::from_fn(g, |t| (3.0 * t).sin() / 7.0).unwrap();
        let first = f.to_csv_string();
        let back = GridFunction::read_csv(first.as_bytes()).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.to_csv_string(), first);
    }

    #[test]
    fn csv_rejects_nonuniform_and_bad_header() {
        let bad = "t,u\n0,1\n0.5,1\n0.9,1\n";
        assert!(matches!(GridFunction::read_csv(bad.as_bytes()), Err(FracError::InvalidGrid(_))));
        let header = "x,y\n0,1\n0.5,1\n1,1\n";
        assert!(matches!(GridFunction::read_csv(header.as_bytes()), Err(FracError::Parse(_))));
    }

    #[test]
    fn mask_band() {
        let m = EndpointMask::default();
        assert_eq!(m.band(2048), 103);
        assert_eq!(m.band(10), 1);
        assert_eq!(m.interior(2048), 103..=1945);
    }

    #[test]
    fn window_ordering() {
        assert!(MemoryWindow::new(0.0, 0.0, 1.0, 1.0).is_ok());
        assert!(MemoryWindow::new(-0.5, 0.0, 1.0, 1.0).unwrap().has_memory());
        assert!(MemoryWindow::new(0.1, 0.0, 1.0, 1.0).is_err());
        assert!(MemoryWindow::new(0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn trapezoid_on_linear_is_exact() {
        let g = GridShape::new(0.0, 2.0, 8).unwrap();
        let f = GridFunction::from_fn(g, |t| 3.0 * t + 1.0).unwrap();
        assert!((f.trapezoid() - 8.0).abs() < 1e-14);
    }
}
