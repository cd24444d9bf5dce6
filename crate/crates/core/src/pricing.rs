//! Closed-form optimal policies.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::distribution::ValuationDistribution;
use crate::equilibrium::{thresholds_for_prices, ThresholdSchedule};
use crate::error::{NetPriceError, Result};
use crate::linalg::{self, ones, Lu};
use crate::network::{check_assumption2, check_assumption3, BlockNetwork};
use crate::optimizer::objective::{discrimination_value, nonuniform_value};
use crate::output::{fmt_g12, CsvTable};
pub use crate::path::PricePath;

const ROOT_TOL: f64 = 1e-10;
const ROOT_MAX_ITER: usize = 200;
const ROOT_SCAN: usize = 1001;
const PSD_TOL: f64 = -1e-10;
const SYM_TOL: f64 = 1e-10;
const MONOTONE_TOL: f64 = 1e-10;
pub const DEFAULT_GRID: usize = 1001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyReport {
    pub policy: String,
    pub path: PricePath,
    pub normalized_revenue: f64,
    pub thresholds: Option<ThresholdSchedule>,
    pub welfare: Option<f64>,
    /// `adoption[r][i]`: cumulative normalized purchases of group `i` after
    /// chronological round `r`.
    pub adoption: Option<Vec<Vec<f64>>>,
    pub warnings: Vec<String>,
}

impl PolicyReport {
    fn new(policy: &str, path: PricePath, normalized_revenue: f64) -> Self {
        PolicyReport {
            policy: policy.to_string(),
            path,
            normalized_revenue,
            thresholds: None,
            welfare: None,
            adoption: None,
            warnings: Vec::new(),
        }
    }

    pub fn rounds(&self) -> usize {
        self.path.rounds()
    }

    /// One row per round: round, t_remaining, prices, cumulative adoption.
    pub fn to_csv_table(&self) -> CsvTable {
        let t_max = self.path.rounds();
        let width = self.path.groups().unwrap_or(1);
        let adopt_cols = self.adoption.as_ref().map_or(0, |a| a[0].len());
        let mut header = vec!["round".to_string(), "t_remaining".to_string()];
        if self.path.groups().is_some() {
            header.extend((1..=width).map(|i| format!("price_g{i}")));
        } else {
            header.push("price".into());
        }
        header.extend((1..=adopt_cols).map(|i| format!("adoption_g{i}")));
        let mut table = CsvTable::new(header);
        for r in 0..t_max {
            let mut row = vec![(r + 1).to_string(), (t_max - r).to_string()];
            row.extend((0..width).map(|i| fmt_g12(self.path.price(r, i))));
            if let Some(a) = &self.adoption {
                row.extend(a[r].iter().map(|x| fmt_g12(*x)));
            }
            table.push(row);
        }
        table
    }
}

fn check_rounds(t: usize) -> Result<()> {
    if t == 0 {
        return Err(NetPriceError::param("rounds", "need T >= 1"));
    }
    Ok(())
}

fn check_unit_g(g: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&g) {
        return Err(NetPriceError::param("g", format!("{g} not in [0,1]")));
    }
    Ok(())
}

/// Prices of the linear policy for effective externality `g = 1/S`,
/// in the scalar form `(T−t) g/(2T−g(T−1)) + (T−g(T−1))/(2T−g(T−1))`.
fn linear_prices(g: f64, t_max: usize) -> PricePath {
    let tf = t_max as f64;
    let den = 2.0 * tf - g * (tf - 1.0);
    PricePath::from_remaining(t_max, |t| {
        (tf - t as f64) * g / den + (tf - g * (tf - 1.0)) / den
    })
}

fn linear_revenue(g: f64, t_max: usize) -> f64 {
    let tf = t_max as f64;
    tf / (4.0 * tf - 2.0 * g * (tf - 1.0))
}

fn linear_welfare(g: f64, t_max: usize) -> f64 {
    let tf = t_max as f64;
    let den = 2.0 * tf - g * (tf - 1.0);
    tf * (1.5 * tf - 0.5 * g * (tf - 1.0)) / (den * den)
}

/// Single group with scalar externality `g ∈ [0,1]`.
pub fn uniform_policy(g: f64, t_max: usize) -> Result<PolicyReport> {
    check_unit_g(g)?;
    check_rounds(t_max)?;
    let tf = t_max as f64;
    let den = 2.0 * tf - g * (tf - 1.0);
    let path = linear_prices(g, t_max);
    let mut levels: Vec<Vec<f64>> = (2..=t_max)
        .map(|t| vec![1.0 - (tf + 1.0 - t as f64) / den])
        .collect();
    levels.insert(0, vec![(tf - g * (tf - 1.0)) / den]);
    let sched = ThresholdSchedule::new(levels)?;
    let net = BlockNetwork::uniform(g)?;
    let mut report = PolicyReport::new("uniform", path, linear_revenue(g, t_max));
    report.adoption = Some(sched.adoption(&net, &ValuationDistribution::Uniform));
    report.thresholds = Some(sched);
    report.welfare = Some(linear_welfare(g, t_max));
    Ok(report)
}

/// Smallest `T` reaching fraction `q` of the infinite-horizon revenue.
pub fn rounds_to_fraction(g: f64, q: f64) -> Result<usize> {
    if !(g > 0.0 && g <= 1.0) {
        return Err(NetPriceError::param("g", format!("{g} not in (0,1]")));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(NetPriceError::param("q", format!("{q} not in (0,1)")));
    }
    let x = q / (1.0 - q) * g / (2.0 - g);
    // Guard against a product that should be an integer landing just above it.
    let snapped = if (x - x.round()).abs() < 1e-9 { x.round() } else { x };
    Ok((snapped.ceil() as usize).max(1))
}

/// Block-model prices written as `(T−t)/den + (TS−(T−1))/den`, `den = 2TS − (T−1)`.
pub fn block_prices(s: f64, t_max: usize) -> PricePath {
    let tf = t_max as f64;
    let den = 2.0 * tf * s - (tf - 1.0);
    PricePath::from_remaining(t_max, |t| (tf - t as f64) / den + (tf * s - (tf - 1.0)) / den)
}

/// The same prices in the form `(t−1)(TS−1)/den − (t−2) TS/den`.
pub fn block_prices_alt(s: f64, t_max: usize) -> PricePath {
    let tf = t_max as f64;
    let den = 2.0 * tf * s - (tf - 1.0);
    PricePath::from_remaining(t_max, |t| {
        let t = t as f64;
        (t - 1.0) * (tf * s - 1.0) / den - (t - 2.0) * tf * s / den
    })
}

/// Closed-form cutoffs: `1 − v_t = (T+1−t)/den · (EA)⁻¹1` for `t ≥ 2` and
/// `v_1 = (TS − (T−1))/den · 1`.
pub fn block_thresholds(net: &BlockNetwork, t_max: usize) -> Result<ThresholdSchedule> {
    let x = net.e_inv_ones()?;
    let s = x.sum();
    let tf = t_max as f64;
    let den = 2.0 * tf * s - (tf - 1.0);
    let m = net.m();
    let mut levels = vec![vec![(tf * s - (tf - 1.0)) / den; m]];
    for t in 2..=t_max {
        let c = (tf + 1.0 - t as f64) / den;
        levels.push((0..m).map(|i| 1.0 - c * x[i] / net.alpha()[i]).collect());
    }
    ThresholdSchedule::new(levels)
}

pub fn block_policy(net: &BlockNetwork, t_max: usize) -> Result<PolicyReport> {
    check_rounds(t_max)?;
    check_assumption2(net).into_result()?;
    let s = net.s_sum()?;
    let tf = t_max as f64;
    let revenue = s * tf / (4.0 * tf * s - 2.0 * (tf - 1.0));
    let sched = block_thresholds(net, t_max)?;
    let mut report = PolicyReport::new("block", block_prices(s, t_max), revenue);
    report.adoption = Some(sched.adoption(net, &ValuationDistribution::Uniform));
    report.thresholds = Some(sched);
    report.welfare = Some(welfare_from_s(s, t_max));
    Ok(report)
}

fn welfare_from_s(s: f64, t_max: usize) -> f64 {
    let tf = t_max as f64;
    let ts = tf * s;
    let den = 2.0 * ts - (tf - 1.0);
    ts / (den * den) * (1.5 * ts - 0.5 * (tf - 1.0))
}

/// Limiting welfare (buyer utility plus revenue) under the optimal block policy.
pub fn welfare(net: &BlockNetwork, t_max: usize) -> Result<f64> {
    check_rounds(t_max)?;
    check_assumption2(net).into_result()?;
    Ok(welfare_from_s(net.s_sum()?, t_max))
}

/// Root of `p − (1 − F(p))(1/f(p) − (T−1)/(TS))` on [0,1].
fn fixed_point_gap(dist: &ValuationDistribution, c: f64, p: f64) -> f64 {
    let tail = 1.0 - dist.cdf(p);
    let f = dist.pdf(p);
    if tail <= 0.0 {
        return p;
    }
    if f <= 0.0 {
        return f64::NEG_INFINITY;
    }
    p - tail * (1.0 / f - c)
}

fn bisect(h: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut h_lo = h(lo);
    for _ in 0..ROOT_MAX_ITER {
        if hi - lo <= ROOT_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let h_mid = h(mid);
        if h_mid == 0.0 {
            return mid;
        }
        if (h_mid < 0.0) == (h_lo < 0.0) {
            lo = mid;
            h_lo = h_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// All roots of the first-round price equation found on the scan grid.
pub fn nonuniform_first_price_roots(
    dist: &ValuationDistribution,
    s: f64,
    t_max: usize,
) -> Vec<f64> {
    let tf = t_max as f64;
    let c = (tf - 1.0) / (tf * s);
    let h = |p: f64| fixed_point_gap(dist, c, p);
    let xs: Vec<f64> = (0..ROOT_SCAN).map(|i| i as f64 / (ROOT_SCAN - 1) as f64).collect();
    let hs: Vec<f64> = xs.iter().map(|&x| h(x)).collect();
    let mut roots = Vec::new();
    for k in 0..ROOT_SCAN {
        if hs[k] == 0.0 {
            roots.push(xs[k]);
            continue;
        }
        if k + 1 < ROOT_SCAN && hs[k + 1] != 0.0 && (hs[k] < 0.0) != (hs[k + 1] < 0.0) {
            roots.push(bisect(h, xs[k], xs[k + 1]));
        }
    }
    roots
}

pub fn nonuniform_policy(
    net: &BlockNetwork,
    dist: &ValuationDistribution,
    t_max: usize,
) -> Result<PolicyReport> {
    check_rounds(t_max)?;
    check_assumption2(net).into_result()?;
    check_assumption3(net, dist, DEFAULT_GRID)?.into_result()?;
    let s = net.s_sum()?;
    let tf = t_max as f64;
    let roots = nonuniform_first_price_roots(dist, s, t_max);
    let path_for = |p_first: f64| {
        let tail = 1.0 - dist.cdf(p_first);
        PricePath::from_remaining(t_max, |t| (tf - t as f64) * tail / (tf * s) + p_first)
    };
    let mut warnings = Vec::new();
    let p_first = match roots.len() {
        0 => {
            return Err(NetPriceError::NoRoot(format!(
                "p - (1-F(p))(1/f(p) - (T-1)/(T S)) keeps one sign on [0,1] (S = {s}, T = {t_max})"
            )))
        }
        1 => roots[0],
        _ => {
            warnings.push(format!("MultipleRoots: first-round price candidates {roots:?}"));
            let mut best = roots[0];
            let mut best_val = f64::NEG_INFINITY;
            for &p in &roots {
                let v = nonuniform_value(s, dist, &path_for(p).flat());
                if v > best_val {
                    best_val = v;
                    best = p;
                }
            }
            best
        }
    };
    let path = path_for(p_first);
    let tail = 1.0 - dist.cdf(p_first);
    let revenue = tail * ((tf - 1.0) / (2.0 * tf) / s * tail + p_first);
    let sched = thresholds_for_prices(net, dist, &path)?;
    let mut report = PolicyReport::new("nonuniform", path, revenue);
    report.adoption = Some(sched.adoption(net, dist));
    report.thresholds = Some(sched);
    report.warnings = warnings;
    Ok(report)
}

/// Explicit `E⁻¹` for the quadratic forms of the discriminating objective.
fn e_inverse(net: &BlockNetwork) -> Result<DMatrix<f64>> {
    let m = net.m();
    Ok(Lu::new(net.e(), "E")?.solve_matrix(&DMatrix::identity(m, m)))
}

/// Group-specific prices: `p_T = 1 − (2I − ((T−1)/T) EA)⁻¹1` and
/// `p_t = p_T + ((T−t)/T) EA (1 − p_T)`.
///
/// Requires symmetric `E` and positive semidefinite `E⁻¹ − A`.
pub fn discrimination_policy(net: &BlockNetwork, t_max: usize) -> Result<PolicyReport> {
    check_rounds(t_max)?;
    check_assumption2(net).into_result()?;
    if !linalg::is_symmetric(net.e(), SYM_TOL) {
        return Err(NetPriceError::AssumptionViolated(
            "discriminating prices need a symmetric E".into(),
        ));
    }
    let m = net.m();
    let e_inv = e_inverse(net)?;
    let min_eig = linalg::min_sym_eigenvalue(&(&e_inv - net.a_diag()));
    if min_eig < PSD_TOL {
        return Err(NetPriceError::AssumptionViolated(format!(
            "E^-1 - A is not positive semidefinite (min eigenvalue {min_eig})"
        )));
    }
    let tf = t_max as f64;
    let ea = net.ea();
    let k = DMatrix::identity(m, m) * 2.0 - &ea * ((tf - 1.0) / tf);
    let p_first = ones(m) - linalg::solve(&k, &ones(m), "2I - (T-1)/T EA")?;
    let slope = &ea * (ones(m) - &p_first);
    let rows: Vec<Vec<f64>> = (1..=t_max)
        .map(|r| {
            let t = t_max + 1 - r;
            let p = &p_first + &slope * ((tf - t as f64) / tf);
            p.iter().copied().collect()
        })
        .collect();
    let path = PricePath::per_group(rows)?;
    let revenue = discrimination_value(&e_inv, net.alpha(), t_max, &path.flat());
    let sched = thresholds_for_prices(net, &ValuationDistribution::Uniform, &path)?;
    let mut report = PolicyReport::new("discrimination", path, revenue);
    report.adoption = Some(sched.adoption(net, &ValuationDistribution::Uniform));
    report.thresholds = Some(sched);
    Ok(report)
}

/// Two-round discriminating first prices `1 − ½ (I − EA/4)⁻¹1`.
pub fn two_round_discrimination_first_prices(net: &BlockNetwork) -> Result<DVector<f64>> {
    let m = net.m();
    let k = DMatrix::identity(m, m) - net.ea() * 0.25;
    Ok(ones(m) - linalg::solve(&k, &ones(m), "I - EA/4")? * 0.5)
}

/// Best single-round group prices:
/// `p = (AK + KᵀA)⁻¹ A K 1` with `K = (I − EA)⁻¹`.
pub fn static_policy(net: &BlockNetwork) -> Result<PolicyReport> {
    let m = net.m();
    let a = net.a_diag();
    let k = Lu::new(&(DMatrix::identity(m, m) - net.ea()), "I - EA")?
        .solve_matrix(&DMatrix::identity(m, m));
    let ak = &a * &k;
    let lhs = &ak + k.transpose() * &a;
    let rhs = &ak * ones(m);
    let p = linalg::solve(&lhs, &rhs, "AK + K'A")?;
    let revenue = p.dot(&rhs) - p.dot(&(&ak * &p));
    Ok(PolicyReport::new(
        "static",
        PricePath::per_group(vec![p.iter().copied().collect()])?,
        revenue,
    ))
}

pub fn no_commitment_bound() -> f64 {
    (3.0 + 13f64.sqrt()) / 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoCommitmentReport {
    pub g: f64,
    /// Equilibrium path: first-round price and the realized second-round price.
    pub path: PricePath,
    pub first_price: f64,
    /// Second-round price when no one bought in the first round.
    pub second_price_base: f64,
    /// Coefficient on the first-round adoption fraction.
    pub second_price_slope: f64,
    /// First-round adoption fraction on the equilibrium path.
    pub first_round_adoption: f64,
    /// Cutoffs with two and one rounds remaining.
    pub thresholds: [f64; 2],
    pub normalized_revenue: f64,
    pub commitment_revenue: f64,
    pub commitment_gap: f64,
}

impl NoCommitmentReport {
    /// Second-round price as a function of the first-round adoption fraction.
    pub fn second_price(&self, first_round_fraction: f64) -> f64 {
        self.second_price_base + self.second_price_slope * first_round_fraction
    }

    pub fn to_csv_table(&self) -> CsvTable {
        let mut t = CsvTable::new(["round", "t_remaining", "price", "threshold"]);
        for r in 0..2 {
            t.push(vec![
                (r + 1).to_string(),
                (2 - r).to_string(),
                fmt_g12(self.path.price(r, 0)),
                fmt_g12(self.thresholds[r]),
            ]);
        }
        t
    }
}

/// Two rounds, scalar externality, seller re-optimizes after round one.
pub fn no_commitment_two_period(g: f64) -> Result<NoCommitmentReport> {
    let bound = no_commitment_bound();
    if !(0.0..=bound).contains(&g) {
        return Err(NetPriceError::param("g", format!("{g} not in [0, {bound}]")));
    }
    let d = 1.0 + 4.0 * g - g * g;
    let p2 = (1.0 + 3.0 * g - 2.0 * g * g) / (2.0 * d);
    let v2 = (2.0 * p2 + g) / (1.0 + g);
    let base = (2.0 * p2 + g) / (2.0 * (1.0 + g));
    let slope = g / 2.0;
    let k = 1.0 - v2;
    let p1 = base + slope * k;
    let v1 = p1 - g * k;
    let revenue = (1.0 + 4.0 * g) / (4.0 * d);
    let commitment = 1.0 / (4.0 - g);
    Ok(NoCommitmentReport {
        g,
        path: PricePath::Scalar(vec![p2, p1]),
        first_price: p2,
        second_price_base: base,
        second_price_slope: slope,
        first_round_adoption: k,
        thresholds: [v2, v1],
        normalized_revenue: revenue,
        commitment_revenue: commitment,
        commitment_gap: commitment - revenue,
    })
}

/// `αᵀ(EA)^k 1` for `k = 0..count`.
pub fn walk_sums(net: &BlockNetwork, count: usize) -> Vec<f64> {
    let ea = net.ea();
    let mut w = ones(net.m());
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(net.alpha().dot(&w));
        w = &ea * w;
    }
    out
}

pub(crate) fn check_all_sales_condition(net: &BlockNetwork, t_max: usize) -> Result<Vec<f64>> {
    let s = walk_sums(net, t_max);
    if let Some(k) = (1..s.len()).find(|&k| s[k] > s[k - 1] + MONOTONE_TOL) {
        return Err(NetPriceError::ConditionViolated(format!(
            "alpha'(EA)^t 1 increases at t = {k}: {} > {}",
            s[k],
            s[k - 1]
        )));
    }
    Ok(s)
}

/// Externality from all purchases, past and future: constant price ½.
pub fn all_sales_policy(net: &BlockNetwork, t_max: usize) -> Result<PolicyReport> {
    check_rounds(t_max)?;
    check_all_sales_condition(net, t_max)?;
    let ea = net.ea();
    // Horner: w = 1 + EA(1 + EA(1 + ...)).
    let mut w = ones(net.m());
    for _ in 1..t_max {
        w = ones(net.m()) + &ea * w;
    }
    let revenue = 0.25 * net.alpha().dot(&w);
    Ok(PolicyReport::new(
        "all_sales",
        PricePath::Scalar(vec![0.5; t_max]),
        revenue,
    ))
}

/// Infinite-horizon all-sales revenue `¼ 1ᵀA(I − EA)⁻¹1`.
pub fn all_sales_limit(net: &BlockNetwork) -> Result<f64> {
    let ea = net.ea();
    let rho = linalg::spectral_radius(&ea);
    if rho >= 1.0 {
        return Err(NetPriceError::SpectralRadiusTooLarge(rho));
    }
    let m = net.m();
    let x = linalg::solve(&(DMatrix::identity(m, m) - ea), &ones(m), "I - EA")?;
    Ok(0.25 * net.alpha().dot(&x))
}
