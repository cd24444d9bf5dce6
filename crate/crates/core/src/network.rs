//! Externality structures and the measures derived from them.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::distribution::ValuationDistribution;
use crate::error::{NetPriceError, Result};
use crate::linalg::{self, ones};

const ALPHA_SUM_TOL: f64 = 1e-12;
const CHECK_TOL: f64 = 1e-10;
const HAZARD_TOL: f64 = 1e-8;

/// Block model: `m` groups with mass fractions `alpha` and group-level
/// externality weights `E`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockNetwork {
    alpha: DVector<f64>,
    e: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    alpha: Vec<f64>,
    #[serde(rename = "E")]
    e: Vec<Vec<f64>>,
}

impl BlockNetwork {
    pub fn new(alpha: Vec<f64>, e: DMatrix<f64>) -> Result<Self> {
        let m = alpha.len();
        if m == 0 {
            return Err(NetPriceError::param("alpha", "need at least one group"));
        }
        if e.nrows() != m || e.ncols() != m {
            return Err(NetPriceError::ShapeMismatch {
                expected: format!("{m}x{m} externality matrix"),
                got: format!("{}x{}", e.nrows(), e.ncols()),
            });
        }
        if let Some(a) = alpha.iter().find(|a| !(a.is_finite() && **a > 0.0 && **a <= 1.0)) {
            return Err(NetPriceError::param("alpha", format!("entry {a} not in (0,1]")));
        }
        let total: f64 = alpha.iter().sum();
        if (total - 1.0).abs() > ALPHA_SUM_TOL {
            return Err(NetPriceError::param("alpha", format!("sums to {total}, not 1")));
        }
        if let Some(x) = e.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(NetPriceError::param(
                "E",
                format!("entry {x} is not a finite nonnegative weight"),
            ));
        }
        Ok(BlockNetwork {
            alpha: DVector::from_vec(alpha),
            e,
        })
    }

    pub fn from_rows(alpha: Vec<f64>, rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        if rows.iter().any(|r| r.len() != m) {
            return Err(NetPriceError::ShapeMismatch {
                expected: "square E".into(),
                got: format!("{m} rows of lengths {:?}", rows.iter().map(Vec::len).collect::<Vec<_>>()),
            });
        }
        let e = DMatrix::from_fn(m, m, |i, j| rows[i][j]);
        Self::new(alpha, e)
    }

    /// Single group with scalar externality `g`.
    pub fn uniform(g: f64) -> Result<Self> {
        Self::new(vec![1.0], DMatrix::from_element(1, 1, g))
    }

    /// Equal group sizes.
    pub fn equal_groups(e: DMatrix<f64>) -> Result<Self> {
        let m = e.nrows();
        Self::new(vec![1.0 / m as f64; m], e)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: NetworkFile = serde_json::from_str(s)
            .map_err(|e| NetPriceError::param("network", format!("bad JSON: {e}")))?;
        Self::from_rows(raw.alpha, &raw.e)
    }

    pub fn to_json(&self) -> String {
        let raw = NetworkFile {
            alpha: self.alpha.iter().copied().collect(),
            e: self.e.row_iter().map(|r| r.iter().copied().collect()).collect(),
        };
        serde_json::to_string(&raw).expect("network serializes")
    }

    pub fn m(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn e(&self) -> &DMatrix<f64> {
        &self.e
    }

    /// `A = diag(alpha)`.
    pub fn a_diag(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.alpha)
    }

    /// `E A`.
    pub fn ea(&self) -> DMatrix<f64> {
        let mut ea = self.e.clone();
        for (j, a) in self.alpha.iter().enumerate() {
            ea.column_mut(j).scale_mut(*a);
        }
        ea
    }

    /// `E⁻¹ 1`, the solve behind every block formula.
    pub fn e_inv_ones(&self) -> Result<DVector<f64>> {
        linalg::solve(&self.e, &ones(self.m()), "E x = 1")
    }

    /// `1ᵀE⁻¹1`.
    pub fn s_sum(&self) -> Result<f64> {
        Ok(self.e_inv_ones()?.sum())
    }
}

impl Serialize for BlockNetwork {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        NetworkFile {
            alpha: self.alpha.iter().copied().collect(),
            e: self.e.row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BlockNetwork {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = NetworkFile::deserialize(d)?;
        BlockNetwork::from_rows(raw.alpha, &raw.e).map_err(serde::de::Error::custom)
    }
}

/// Scalar externality `g ∈ [0,1]` shared by every pair of buyers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformNetwork {
    g: f64,
}

impl UniformNetwork {
    pub fn new(g: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&g) {
            return Err(NetPriceError::param("g", format!("{g} not in [0,1]")));
        }
        Ok(UniformNetwork { g })
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn to_block(&self) -> BlockNetwork {
        BlockNetwork::uniform(self.g).expect("g in [0,1] is a valid block network")
    }
}

/// Per-pair weights `g_ij` for a finite set of buyers.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseNetwork {
    g: DMatrix<f64>,
}

impl PairwiseNetwork {
    pub fn new(g: DMatrix<f64>) -> Result<Self> {
        let n = g.nrows();
        if n == 0 || g.ncols() != n {
            return Err(NetPriceError::ShapeMismatch {
                expected: "nonempty square weight matrix".into(),
                got: format!("{}x{}", g.nrows(), g.ncols()),
            });
        }
        for i in 0..n {
            if g[(i, i)] != 0.0 {
                return Err(NetPriceError::param("G", format!("diagonal entry {i} is nonzero")));
            }
        }
        if g.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(NetPriceError::param("G", "weights must be finite and nonnegative"));
        }
        Ok(PairwiseNetwork { g })
    }

    pub fn n(&self) -> usize {
        self.g.nrows()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.g[(i, j)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkMeasures {
    pub network_effect: f64,
    pub s_sum: f64,
    pub e_inv_ones: Vec<f64>,
    pub asymmetry: f64,
}

pub fn compute_measures(net: &BlockNetwork) -> Result<NetworkMeasures> {
    let x = net.e_inv_ones()?;
    let s_sum = x.sum();
    let mut off = net.e().clone();
    off.fill_diagonal(0.0);
    Ok(NetworkMeasures {
        network_effect: 1.0 / s_sum,
        s_sum,
        e_inv_ones: x.iter().copied().collect(),
        asymmetry: asymmetry(&off),
    })
}

/// `Σ_k d_k^out d_k^in`, which equals the sum of all entries of `C²`.
pub fn asymmetry(c: &DMatrix<f64>) -> f64 {
    let rows = c.column_sum();
    let cols = c.row_sum();
    (0..c.nrows()).map(|k| rows[k] * cols[k]).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assumption2Report {
    pub invertible: bool,
    pub s_sum_at_least_one: bool,
    pub e_inv_ones_nonnegative: bool,
    pub s_sum: Option<f64>,
    pub e_inv_ones: Option<Vec<f64>>,
    /// Index of the most negative entry of `E⁻¹1` when that check fails.
    pub negative_entry: Option<usize>,
    pub solve_error: Option<String>,
}

impl Assumption2Report {
    pub fn passed(&self) -> bool {
        self.invertible && self.s_sum_at_least_one && self.e_inv_ones_nonnegative
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.invertible {
            out.push(format!(
                "E is not invertible ({})",
                self.solve_error.as_deref().unwrap_or("singular")
            ));
            return out;
        }
        if !self.s_sum_at_least_one {
            out.push(format!("1'E^-1 1 = {} is below 1", self.s_sum.unwrap_or(f64::NAN)));
        }
        if !self.e_inv_ones_nonnegative {
            let i = self.negative_entry.unwrap_or(0);
            let v = self.e_inv_ones.as_ref().map_or(f64::NAN, |x| x[i]);
            out.push(format!("E^-1 1 has negative entry {v} at group {i}"));
        }
        out
    }

    pub fn into_result(self) -> Result<()> {
        if self.passed() {
            Ok(())
        } else {
            Err(NetPriceError::AssumptionViolated(self.failures().join("; ")))
        }
    }
}

pub fn check_assumption2(net: &BlockNetwork) -> Assumption2Report {
    match net.e_inv_ones() {
        Err(e) => Assumption2Report {
            invertible: false,
            s_sum_at_least_one: false,
            e_inv_ones_nonnegative: false,
            s_sum: None,
            e_inv_ones: None,
            negative_entry: None,
            solve_error: Some(e.to_string()),
        },
        Ok(x) => {
            let s = x.sum();
            let (imin, vmin) = x
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
            let nonneg = vmin >= -CHECK_TOL;
            Assumption2Report {
                invertible: true,
                s_sum_at_least_one: s >= 1.0 - CHECK_TOL,
                e_inv_ones_nonnegative: nonneg,
                s_sum: Some(s),
                e_inv_ones: Some(x.iter().copied().collect()),
                negative_entry: (!nonneg).then_some(imin),
                solve_error: None,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assumption3Report {
    pub invertible: bool,
    pub e_inv_ones_nonnegative: bool,
    pub s_sum: Option<f64>,
    pub grid_points: usize,
    /// `1ᵀE⁻¹1 ≥ f(x)` on the grid.
    pub density_bounded: bool,
    pub density_violation: Option<f64>,
    /// `f'/f` non-increasing.
    pub hazard_monotone: bool,
    pub hazard_violation: Option<f64>,
    /// `x f(x)` non-decreasing.
    pub xf_nondecreasing: bool,
    pub xf_violation: Option<f64>,
}

impl Assumption3Report {
    pub fn passed(&self) -> bool {
        self.invertible
            && self.e_inv_ones_nonnegative
            && self.density_bounded
            && self.hazard_monotone
            && self.xf_nondecreasing
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.invertible {
            out.push("E is not invertible".to_string());
        }
        if !self.e_inv_ones_nonnegative {
            out.push("E^-1 1 has a negative entry".to_string());
        }
        if let (false, Some(x)) = (self.density_bounded, self.density_violation) {
            out.push(format!("f({x}) exceeds 1'E^-1 1 = {}", self.s_sum.unwrap_or(f64::NAN)));
        }
        if let (false, Some(x)) = (self.hazard_monotone, self.hazard_violation) {
            out.push(format!("f'/f increases at x = {x}"));
        }
        if let (false, Some(x)) = (self.xf_nondecreasing, self.xf_violation) {
            out.push(format!("x f(x) decreases at x = {x}"));
        }
        out
    }

    pub fn into_result(self) -> Result<()> {
        if self.passed() {
            Ok(())
        } else {
            Err(NetPriceError::AssumptionViolated(self.failures().join("; ")))
        }
    }
}

/// Grid check of the regularity conditions on the valuation density.
///
/// Zero density is only tolerated at the endpoints 0 and 1, where the
/// ratio `f'/f` is skipped.
pub fn check_assumption3(
    net: &BlockNetwork,
    dist: &ValuationDistribution,
    grid_points: usize,
) -> Result<Assumption3Report> {
    if grid_points < 2 {
        return Err(NetPriceError::param("grid_points", "need at least 2 points"));
    }
    let xs: Vec<f64> = (0..grid_points)
        .map(|i| i as f64 / (grid_points - 1) as f64)
        .collect();
    let fs: Vec<f64> = xs.iter().map(|&x| dist.pdf(x)).collect();
    for (i, (&x, &f)) in xs.iter().zip(&fs).enumerate() {
        let endpoint = i == 0 || i == grid_points - 1;
        if f.is_nan() || (!endpoint && f <= 0.0) || f < 0.0 {
            return Err(NetPriceError::InvalidDistribution(format!(
                "density {f} is not positive at x = {x}"
            )));
        }
    }
    let a2 = check_assumption2(net);
    let (density_bounded, density_violation) = match a2.s_sum {
        Some(s) => match xs.iter().zip(&fs).find(|(_, &f)| f > s + CHECK_TOL) {
            Some((&x, _)) => (false, Some(x)),
            None => (true, None),
        },
        None => (false, None),
    };
    let hazard: Vec<Option<f64>> = xs
        .iter()
        .zip(&fs)
        .map(|(&x, &f)| (f > 0.0).then(|| dist.pdf_derivative(x) / f))
        .collect();
    let mut hazard_violation = None;
    let mut prev: Option<f64> = None;
    for (i, h) in hazard.iter().enumerate() {
        if let Some(h) = *h {
            if !h.is_finite() {
                continue;
            }
            if let Some(p) = prev {
                if h > p + HAZARD_TOL {
                    hazard_violation = Some(xs[i]);
                    break;
                }
            }
            prev = Some(h);
        }
    }
    let xf_violation = (1..grid_points)
        .find(|&i| xs[i] * fs[i] < xs[i - 1] * fs[i - 1] - HAZARD_TOL)
        .map(|i| xs[i]);
    Ok(Assumption3Report {
        invertible: a2.invertible,
        e_inv_ones_nonnegative: a2.e_inv_ones_nonnegative,
        s_sum: a2.s_sum,
        grid_points,
        density_bounded,
        density_violation,
        hazard_monotone: hazard_violation.is_none(),
        hazard_violation,
        xf_nondecreasing: xf_violation.is_none(),
        xf_violation,
    })
}

/// Bonacich centrality `(I − βE)⁻¹1`.
pub fn bonacich(net: &BlockNetwork, beta: f64) -> Result<DVector<f64>> {
    bonacich_matrix(net.e(), beta)
}

pub fn bonacich_matrix(e: &DMatrix<f64>, beta: f64) -> Result<DVector<f64>> {
    let m = e.nrows();
    let a = DMatrix::identity(m, m) - e * beta;
    linalg::solve(&a, &ones(m), "I - beta E")
}

/// Second-order expansion in `delta` of the block revenue for `E = I + δC`.
pub fn taylor_revenue(c: &DMatrix<f64>, t: usize, delta: f64) -> f64 {
    let m = c.nrows() as f64;
    let tf = t as f64;
    let sum_c = c.sum();
    let sum_c2 = asymmetry(c);
    let d = 2.0 * m * tf - tf + 1.0;
    let lead = tf * m / (4.0 * tf * m - 2.0 * (tf - 1.0));
    let first = delta * tf * (tf - 1.0) * sum_c / (2.0 * d * d);
    let second = delta * delta * tf * (tf - 1.0) * (2.0 * tf * sum_c * sum_c - d * sum_c2)
        / (2.0 * d * d * d);
    lead + first + second
}

/// First-order expansion in `delta` of the discriminating revenue.
pub fn taylor_revenue_discrimination(c: &DMatrix<f64>, alpha: &[f64], delta: f64) -> f64 {
    let q: Vec<f64> = alpha.iter().map(|a| a / (4.0 - a)).collect();
    let base: f64 = q.iter().sum();
    let mut cross = 0.0;
    for i in 0..q.len() {
        for j in 0..q.len() {
            cross += c[(i, j)] * q[i] * q[j];
        }
    }
    base + delta * cross
}
