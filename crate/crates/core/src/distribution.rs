//! Valuation distributions on [0,1].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{NetPriceError, Result};

const INVERSE_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValuationDistribution {
    Uniform,
    /// `F(v) = v^k`.
    Power { k: f64 },
    Table(TableDistribution),
}

impl ValuationDistribution {
    pub fn power(k: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(NetPriceError::InvalidDistribution(format!(
                "power exponent must be positive, got {k}"
            )));
        }
        Ok(ValuationDistribution::Power { k })
    }

    /// Parses `uniform`, `power:k` or `table:<file>`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if spec == "uniform" {
            return Ok(ValuationDistribution::Uniform);
        }
        if let Some(k) = spec.strip_prefix("power:") {
            let k: f64 = k.trim().parse().map_err(|_| {
                NetPriceError::InvalidDistribution(format!("bad power exponent `{k}`"))
            })?;
            return Self::power(k);
        }
        if let Some(path) = spec.strip_prefix("table:") {
            return Ok(ValuationDistribution::Table(TableDistribution::from_csv_path(
                path,
            )?));
        }
        Err(NetPriceError::InvalidDistribution(format!(
            "unknown distribution `{spec}` (expected uniform, power:k or table:<file>)"
        )))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match self {
            ValuationDistribution::Uniform => x,
            ValuationDistribution::Power { k } => x.powf(*k),
            ValuationDistribution::Table(t) => t.eval(x).0,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match self {
            ValuationDistribution::Uniform => 1.0,
            ValuationDistribution::Power { k } => k * x.powf(k - 1.0),
            ValuationDistribution::Table(t) => t.eval(x).1,
        }
    }

    pub fn pdf_derivative(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match self {
            ValuationDistribution::Uniform => 0.0,
            ValuationDistribution::Power { k } => {
                if *k == 1.0 {
                    0.0
                } else {
                    k * (k - 1.0) * x.powf(k - 2.0)
                }
            }
            ValuationDistribution::Table(t) => t.eval(x).2,
        }
    }

    pub fn inverse_cdf(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            ValuationDistribution::Uniform => u,
            ValuationDistribution::Power { k } => u.powf(1.0 / k),
            ValuationDistribution::Table(t) => t.inverse(u),
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, ValuationDistribution::Uniform)
            || matches!(self, ValuationDistribution::Power { k } if *k == 1.0)
    }
}

/// CDF given on a grid, interpolated with a piecewise cubic Hermite spline.
/// Knot slopes are the supplied densities when given, otherwise monotone
/// Fritsch–Carlson estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableDistribution {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl TableDistribution {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let bad = |msg: String| Err(NetPriceError::InvalidDistribution(msg));
        if x.len() != y.len() || x.len() < 2 {
            return bad("table needs at least two (v, F) rows".into());
        }
        if x[0] != 0.0 || *x.last().unwrap() != 1.0 {
            return bad("table grid must start at 0 and end at 1".into());
        }
        if y[0].abs() > 1e-12 || (y.last().unwrap() - 1.0).abs() > 1e-12 {
            return bad("table CDF must satisfy F(0) = 0 and F(1) = 1".into());
        }
        for w in x.windows(2) {
            if !(w[1] > w[0]) {
                return bad("table grid must be strictly increasing".into());
            }
        }
        for w in y.windows(2) {
            if w[1] < w[0] {
                return bad("table CDF must be non-decreasing".into());
            }
        }
        let d = pchip_slopes(&x, &y);
        Ok(TableDistribution { x, y, d })
    }

    /// Table with the density known at every knot; cubic CDFs are reproduced exactly.
    pub fn with_density(x: Vec<f64>, y: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        let mut t = Self::new(x, y)?;
        if f.len() != t.x.len() {
            return Err(NetPriceError::InvalidDistribution(
                "density column length differs from the grid".into(),
            ));
        }
        if f.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(NetPriceError::InvalidDistribution(
                "densities must be finite and nonnegative".into(),
            ));
        }
        t.d = f;
        Ok(t)
    }

    /// Reads a CSV `v,F[,f]` (a header row is optional). With the third
    /// column every row must carry a density.
    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path.as_ref())?;
        let (mut x, mut y, mut f) = (Vec::new(), Vec::new(), Vec::new());
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(NetPriceError::InvalidDistribution(format!(
                    "row {} has fewer than two columns",
                    i + 1
                )));
            }
            match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
                (Ok(a), Ok(b)) => {
                    x.push(a);
                    y.push(b);
                    if let Some(c) = rec.get(2).filter(|c| !c.is_empty()) {
                        f.push(c.parse::<f64>().map_err(|_| {
                            NetPriceError::InvalidDistribution(format!(
                                "row {} density is not numeric",
                                i + 1
                            ))
                        })?);
                    }
                }
                _ if i == 0 => continue,
                _ => {
                    return Err(NetPriceError::InvalidDistribution(format!(
                        "row {} is not numeric",
                        i + 1
                    )))
                }
            }
        }
        if f.is_empty() {
            Self::new(x, y)
        } else {
            Self::with_density(x, y, f)
        }
    }

    /// Returns (F, f, f') at `x`.
    fn eval(&self, x: f64) -> (f64, f64, f64) {
        let k = match self.x.partition_point(|&xi| xi <= x) {
            0 => 0,
            i => (i - 1).min(self.x.len() - 2),
        };
        let h = self.x[k + 1] - self.x[k];
        let s = (x - self.x[k]) / h;
        let (y0, y1, d0, d1) = (self.y[k], self.y[k + 1], self.d[k], self.d[k + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        let f = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * h * d0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * h * d1;
        let df = ((6.0 * s2 - 6.0 * s) * y0
            + (3.0 * s2 - 4.0 * s + 1.0) * h * d0
            + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * h * d1)
            / h;
        let ddf = ((12.0 * s - 6.0) * y0
            + (6.0 * s - 4.0) * h * d0
            + (-12.0 * s + 6.0) * y1
            + (6.0 * s - 2.0) * h * d1)
            / (h * h);
        (f.clamp(0.0, 1.0), df.max(0.0), ddf)
    }

    fn inverse(&self, u: f64) -> f64 {
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        while hi - lo > INVERSE_TOL {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid).0 < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    if n == 2 {
        return vec![delta[0], delta[0]];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let v = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if v.signum() != d0.signum() || d0 == 0.0 {
            0.0
        } else if d0.signum() != d1.signum() && v.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            v
        }
    };
    d[0] = end(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}
