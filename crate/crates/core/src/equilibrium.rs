//! Purchase thresholds induced by a committed price path.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use crate::distribution::{TableDistribution, ValuationDistribution};
use crate::error::{NetPriceError, Result};
use crate::linalg::Lu;
use crate::network::BlockNetwork;
use crate::output::{fmt_g12, CsvTable};
use crate::path::PricePath;

const FEAS_TOL: f64 = 1e-8;

/// Valuation cutoffs `v_t^{(i)}` for `t = 1..=T+1` rounds remaining.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSchedule {
    /// `levels[t - 1][i]`; the last row is all ones.
    levels: Vec<Vec<f64>>,
    /// Set when a value had to be projected onto [0,1].
    pub clamped: bool,
}

impl ThresholdSchedule {
    /// `levels[t - 1]` holds the cutoffs with `t` rounds remaining, `t = 1..=T`.
    pub fn new(mut levels: Vec<Vec<f64>>) -> Result<Self> {
        let m = levels.first().map_or(0, Vec::len);
        if m == 0 || levels.iter().any(|l| l.len() != m) {
            return Err(NetPriceError::ShapeMismatch {
                expected: "T rows of m thresholds".into(),
                got: format!("{:?}", levels.iter().map(Vec::len).collect::<Vec<_>>()),
            });
        }
        levels.push(vec![1.0; m]);
        Ok(ThresholdSchedule {
            levels,
            clamped: false,
        })
    }

    pub fn rounds(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn groups(&self) -> usize {
        self.levels[0].len()
    }

    /// Cutoff with `t` rounds remaining, `1 ≤ t ≤ T + 1`.
    pub fn v(&self, t: usize, group: usize) -> f64 {
        self.levels[t - 1][group]
    }

    pub fn level(&self, t: usize) -> &[f64] {
        &self.levels[t - 1]
    }

    /// Largest violation of `0 ≤ v_t ≤ v_{t+1} ≤ 1`.
    pub fn monotonicity_gap(&self) -> f64 {
        let mut gap: f64 = 0.0;
        for t in 1..=self.rounds() {
            for i in 0..self.groups() {
                gap = gap.max(-self.v(t, i)).max(self.v(t, i) - self.v(t + 1, i));
            }
        }
        gap
    }

    /// Cumulative normalized purchases per group after each chronological
    /// round: `α_i (1 − F(v_t^{(i)}))`.
    pub fn adoption(&self, net: &BlockNetwork, dist: &ValuationDistribution) -> Vec<Vec<f64>> {
        let t_max = self.rounds();
        (1..=t_max)
            .map(|r| {
                let t = t_max + 1 - r;
                (0..self.groups())
                    .map(|i| net.alpha()[i] * (1.0 - dist.cdf(self.v(t, i))))
                    .collect()
            })
            .collect()
    }

    pub fn to_csv_table(&self) -> CsvTable {
        let mut table = CsvTable::new(["t", "group", "v"]);
        for t in (1..=self.rounds() + 1).rev() {
            for i in 0..self.groups() {
                table.push(vec![t.to_string(), (i + 1).to_string(), fmt_g12(self.v(t, i))]);
            }
        }
        table
    }
}

fn path_level(path: &PricePath, t: usize, m: usize) -> DVector<f64> {
    DVector::from_fn(m, |i, _| path.at_remaining(t, i))
}

fn check_path(net: &BlockNetwork, path: &PricePath) -> Result<()> {
    if let Some(k) = path.groups() {
        if k != net.m() {
            return Err(NetPriceError::ShapeMismatch {
                expected: format!("{} group prices", net.m()),
                got: format!("{k}"),
            });
        }
    }
    if let Some((round, prev, next)) = path.first_decrease(0.0) {
        return Err(NetPriceError::NonMonotonePath { round, prev, next });
    }
    Ok(())
}

/// Thresholds from the indifference recursion, run backward from the first
/// round: `EA (F(v_{t+1}) − F(v_t)) = p_{t−1} − p_t` for `t = T..2` and
/// `v_1 = p_1 − EA (1 − F(v_2))`.
///
/// `v_1` is not forced below `v_2`; on heterogeneous networks an optimal path
/// can produce `v_1 > v_2`, which callers detect via `monotonicity_gap`.
/// Values outside [0,1] are projected and flagged in `clamped`.
pub fn thresholds_for_prices(
    net: &BlockNetwork,
    dist: &ValuationDistribution,
    path: &PricePath,
) -> Result<ThresholdSchedule> {
    check_path(net, path)?;
    let m = net.m();
    let t_max = path.rounds();
    let ea = net.ea();
    let mut lu: Option<Lu> = None;
    let mut clamped = false;
    let mut f_next = DVector::from_element(m, 1.0);
    let mut levels = vec![vec![0.0; m]; t_max];
    for t in (2..=t_max).rev() {
        let step = path_level(path, t - 1, m) - path_level(path, t, m);
        let mut f_t = f_next.clone();
        if step.amax() > 0.0 {
            if lu.is_none() {
                lu = Some(Lu::new(&ea, "EA")?);
            }
            f_t -= lu.as_ref().unwrap().solve(&step);
        }
        for i in 0..m {
            let x = f_t[i];
            if x < -FEAS_TOL || x > 1.0 + FEAS_TOL || x.is_nan() {
                return Err(NetPriceError::InfeasibleThresholds { t, group: i, value: x });
            }
            if !(0.0..=1.0).contains(&x) {
                clamped = true;
                f_t[i] = x.clamp(0.0, 1.0);
            }
            levels[t - 1][i] = dist.inverse_cdf(f_t[i]);
        }
        f_next = f_t;
    }
    let v1 = path_level(path, 1, m) - ea * (DVector::from_element(m, 1.0) - &f_next);
    for i in 0..m {
        let mut x = v1[i];
        if !(0.0..=1.0).contains(&x) {
            clamped = true;
            x = x.clamp(0.0, 1.0);
        }
        levels[0][i] = x;
    }
    let mut sched = ThresholdSchedule::new(levels)?;
    sched.clamped = clamped;
    Ok(sched)
}

/// Chronological round (1-based) in which a buyer with `valuation` buys, if any.
/// A valuation equal to a cutoff buys in that round.
pub fn buyer_purchase_round(valuation: f64, group: usize, sched: &ThresholdSchedule) -> Option<usize> {
    let t_max = sched.rounds();
    (1..=t_max).find(|&r| valuation >= sched.v(t_max + 1 - r, group))
}

/// Limiting normalized revenue `Σ_t p_t 1ᵀA (F(v_{t+1}) − F(v_t))`.
pub fn limit_revenue_of_path(
    net: &BlockNetwork,
    dist: &ValuationDistribution,
    path: &PricePath,
) -> Result<f64> {
    let sched = thresholds_for_prices(net, dist, path)?;
    Ok(revenue_for_schedule(net, dist, path, &sched))
}

pub fn revenue_for_schedule(
    net: &BlockNetwork,
    dist: &ValuationDistribution,
    path: &PricePath,
    sched: &ThresholdSchedule,
) -> f64 {
    let mut total = 0.0;
    for t in 1..=path.rounds() {
        for i in 0..net.m() {
            let mass = dist.cdf(sched.v(t + 1, i)) - dist.cdf(sched.v(t, i));
            total += path.at_remaining(t, i) * net.alpha()[i] * mass;
        }
    }
    total
}

/// `Σ_{t=T..2} EA (F(v_{t+1}) − F(v_t))`, which telescopes to `(p_1 − p_T) 1`.
pub fn telescoped_increment(
    net: &BlockNetwork,
    dist: &ValuationDistribution,
    sched: &ThresholdSchedule,
) -> DVector<f64> {
    let m = net.m();
    let t_max = sched.rounds();
    let f = |t: usize| DVector::from_fn(m, |i, _| dist.cdf(sched.v(t, i)));
    let diff = f(t_max + 1) - f(2.min(t_max + 1));
    net.ea() * diff
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    #[test]
    fn constant_path_nobody_waits() {
        let net = BlockNetwork::uniform(0.4).unwrap();
        let path = PricePath::Scalar(vec![0.3, 0.3, 0.3]);
        let s = thresholds_for_prices(&net, &ValuationDistribution::Uniform, &path).unwrap();
        assert_eq!(s.v(3, 0), 1.0);
        assert_eq!(s.v(2, 0), 1.0);
        assert_abs_diff_eq!(s.v(1, 0), 0.3);
        let rev = limit_revenue_of_path(&net, &ValuationDistribution::Uniform, &path).unwrap();
        assert_abs_diff_eq!(rev, 0.3 * 0.7, epsilon = 1e-15);
    }

    #[test]
    fn two_round_uniform_thresholds() {
        let g = 0.6;
        let (p2, p1) = (0.45, 0.6);
        let net = BlockNetwork::uniform(g).unwrap();
        let s = thresholds_for_prices(
            &net,
            &ValuationDistribution::Uniform,
            &PricePath::Scalar(vec![p2, p1]),
        )
        .unwrap();
        let v2 = 1.0 - (p1 - p2) / g;
        assert_abs_diff_eq!(s.v(2, 0), v2, epsilon = 1e-14);
        assert_abs_diff_eq!(s.v(1, 0), p1 - g * (1.0 - v2), epsilon = 1e-14);
        assert!(!s.clamped);
    }

    #[test]
    fn rejects_decreasing_and_infeasible() {
        let net = BlockNetwork::uniform(0.5).unwrap();
        let u = ValuationDistribution::Uniform;
        let err = thresholds_for_prices(&net, &u, &PricePath::Scalar(vec![0.6, 0.5])).unwrap_err();
        assert!(matches!(err, NetPriceError::NonMonotonePath { round: 2, .. }));
        let err = thresholds_for_prices(&net, &u, &PricePath::Scalar(vec![0.1, 0.9])).unwrap_err();
        assert!(matches!(err, NetPriceError::InfeasibleThresholds { .. }));
    }

    #[test]
    fn purchase_rounds() {
        let s = ThresholdSchedule::new(vec![vec![0.3], vec![0.6], vec![0.8]]).unwrap();
        assert_eq!(buyer_purchase_round(1.0, 0, &s), Some(1));
        assert_eq!(buyer_purchase_round(0.8, 0, &s), Some(1));
        assert_eq!(buyer_purchase_round(0.7, 0, &s), Some(2));
        assert_eq!(buyer_purchase_round(0.3, 0, &s), Some(3));
        assert_eq!(buyer_purchase_round(0.0, 0, &s), None);
    }

    #[test]
    fn per_group_recursion_and_telescoping() {
        let e = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.1, 0.9]);
        let net = BlockNetwork::new(vec![0.4, 0.6], e).unwrap();
        let path = PricePath::per_group(vec![
            vec![0.40, 0.42],
            vec![0.45, 0.46],
            vec![0.50, 0.52],
        ])
        .unwrap();
        let u = ValuationDistribution::Uniform;
        let s = thresholds_for_prices(&net, &u, &path).unwrap();
        let tel = telescoped_increment(&net, &u, &s);
        assert_abs_diff_eq!(tel[0], 0.10, epsilon = 1e-12);
        assert_abs_diff_eq!(tel[1], 0.10, epsilon = 1e-12);
        assert!(s.monotonicity_gap() <= 0.0);
    }

    #[test]
    fn schedule_csv() {
        let s = ThresholdSchedule::new(vec![vec![0.5]]).unwrap();
        assert_eq!(s.to_csv_table().to_csv_string(), "t,group,v\n2,1,1\n1,1,0.5\n");
    }
}
