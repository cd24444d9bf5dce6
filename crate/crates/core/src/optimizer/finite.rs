//! Exact oracles for markets with a handful of buyers.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::objective::{clamp01, two_buyer_nondecreasing, two_buyer_nonincreasing};
use crate::error::{NetPriceError, Result};
use crate::network::PairwiseNetwork;
use crate::path::PricePath;

pub const MIN_GRID: usize = 1001;
pub const MAX_ENUMERATED_BUYERS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchBest {
    /// Chronological prices `(p_2, p_1)`.
    pub path: [f64; 2],
    pub revenue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoBuyerReport {
    pub g: f64,
    pub grid: usize,
    pub non_decreasing: BranchBest,
    pub non_increasing: Option<BranchBest>,
    pub best: BranchBest,
    /// `non_decreasing` or `non_increasing_case{1..4}`.
    pub regime: String,
    /// `(1 + g)/2`.
    pub non_decreasing_closed_form: f64,
    pub non_increasing_case: u8,
    pub non_increasing_closed_form: f64,
}

/// Closed-form optimum of the non-increasing branch and which case applies.
pub fn two_buyer_nonincreasing_case(g: f64) -> (u8, f64) {
    if g >= 0.5 {
        (1, 25.0 / 32.0)
    } else if g >= (13f64.sqrt() - 1.0) / 6.0 {
        (2, (1.0 + g - g * g).powi(2) / 2.0)
    } else if g >= 2f64.sqrt() - 1.0 {
        (3, 2.0 * g * (1.0 + g - 2.0 * g * g - 2.0 * g.powi(3)))
    } else {
        (
            4,
            0.5 * (1.0 + g + 2.0 * g * g - 2.0 * g.powi(3) - 3.0 * g.powi(4) + g.powi(5)),
        )
    }
}

fn grid_best(grid: usize, value: impl Fn(f64, f64) -> Option<f64> + Sync) -> Option<BranchBest> {
    let step = 1.0 / (grid - 1) as f64;
    let rows: Vec<Option<(usize, usize, f64)>> = (0..grid)
        .into_par_iter()
        .map(|i| {
            let p2 = i as f64 * step;
            let mut best: Option<(usize, usize, f64)> = None;
            for j in 0..grid {
                if let Some(v) = value(p2, j as f64 * step) {
                    if best.is_none_or(|b| v > b.2) {
                        best = Some((i, j, v));
                    }
                }
            }
            best
        })
        .collect();
    let mut best: Option<(usize, usize, f64)> = None;
    for row in rows.into_iter().flatten() {
        if best.is_none_or(|b| row.2 > b.2) {
            best = Some(row);
        }
    }
    best.map(|(i, j, v)| BranchBest {
        path: [i as f64 * step, j as f64 * step],
        revenue: v,
    })
}

/// Brute-force search of the two-buyer, two-round all-sales game over both
/// price orderings. Grids coarser than 1001 points per axis are refined.
pub fn two_buyer_all_sales_oracle(g: f64, grid: usize) -> TwoBuyerReport {
    let grid = grid.max(MIN_GRID);
    let non_decreasing = grid_best(grid, |p2, p1| {
        (p2 <= p1).then(|| two_buyer_nondecreasing(g, p2, p1))
    })
    .expect("diagonal is always feasible");
    let non_increasing = grid_best(grid, |p2, p1| {
        (p2 >= p1 && g * g >= p2 - p1).then(|| two_buyer_nonincreasing(g, p2, p1))
    });
    let (case, case_value) = two_buyer_nonincreasing_case(g);
    let (best, regime) = match &non_increasing {
        Some(ni) if ni.revenue > non_decreasing.revenue => {
            (ni.clone(), format!("non_increasing_case{case}"))
        }
        _ => (non_decreasing.clone(), "non_decreasing".to_string()),
    };
    TwoBuyerReport {
        g,
        grid,
        non_decreasing,
        non_increasing,
        best,
        regime,
        non_decreasing_closed_form: (1.0 + g) / 2.0,
        non_increasing_case: case,
        non_increasing_closed_form: case_value,
    }
}

/// Three buyers on a path: the middle buyer weighs each neighbour by `b`,
/// the end buyers weigh the middle one by `a`.
pub fn example1_network(a: f64, b: f64) -> Result<PairwiseNetwork> {
    PairwiseNetwork::new(DMatrix::from_row_slice(
        3,
        3,
        &[0.0, a, 0.0, b, 0.0, b, 0.0, a, 0.0],
    ))
}

/// First-round cutoffs of the three-buyer example for the price gap
/// `d = p_1 − p_2`: the symmetric branch `(1 − d/2b, 1 − d/a, 1 − d/2b)` or the
/// asymmetric one `(1 − d/3b, 1 − d/a, 1 − 2d/3b)`.
pub fn example1_thresholds(a: f64, b: f64, p2: f64, p1: f64, symmetric: bool) -> Vec<f64> {
    let d = p1 - p2;
    if symmetric {
        vec![1.0 - d / (2.0 * b), 1.0 - d / a, 1.0 - d / (2.0 * b)]
    } else {
        vec![1.0 - d / (3.0 * b), 1.0 - d / a, 1.0 - 2.0 * d / (3.0 * b)]
    }
}

/// Exact expected revenue of a two-round market with uniform valuations,
/// given per-buyer first-round cutoffs. Sums over every first-round
/// purchase set `S`; a buyer outside `S` buys in the second round when
/// `v ≥ clamp(p_1 − Σ_{j∈S} g_ij)`.
pub fn example1_enumerate(
    net: &PairwiseNetwork,
    prices: &PricePath,
    first_round_thresholds: &[f64],
) -> Result<f64> {
    let n = net.n();
    if n > MAX_ENUMERATED_BUYERS {
        return Err(NetPriceError::TooLarge(format!(
            "{n} buyers (at most {MAX_ENUMERATED_BUYERS} are enumerated)"
        )));
    }
    if prices.rounds() != 2 || prices.groups().is_some() {
        return Err(NetPriceError::ShapeMismatch {
            expected: "two scalar prices".into(),
            got: format!("{} rounds", prices.rounds()),
        });
    }
    if first_round_thresholds.len() != n {
        return Err(NetPriceError::ShapeMismatch {
            expected: format!("{n} thresholds"),
            got: first_round_thresholds.len().to_string(),
        });
    }
    let v2: Vec<f64> = first_round_thresholds.iter().map(|v| clamp01(*v)).collect();
    let (p2, p1) = (prices.price(0, 0), prices.price(1, 0));
    let mut total = 0.0;
    for mask in 0u32..(1 << n) {
        let bought = |i: usize| mask & (1 << i) != 0;
        let mut prob = 1.0;
        for (i, v) in v2.iter().enumerate() {
            prob *= if bought(i) { 1.0 - v } else { *v };
        }
        if prob == 0.0 {
            continue;
        }
        let first = mask.count_ones() as f64;
        let mut second = 0.0;
        for i in (0..n).filter(|&i| !bought(i)) {
            let ext: f64 = (0..n).filter(|&j| bought(j)).map(|j| net.weight(i, j)).sum();
            let v1 = clamp01(p1 - ext);
            if v2[i] > 0.0 {
                second += clamp01((v2[i] - v1) / v2[i]);
            }
        }
        total += prob * (p2 * first + p1 * second);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn no_externality_two_buyers() {
        let r = two_buyer_all_sales_oracle(0.0, 1001);
        assert_abs_diff_eq!(r.best.revenue, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.non_decreasing.revenue, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.non_increasing.unwrap().revenue, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn case_one_value() {
        let r = two_buyer_all_sales_oracle(0.6, 1001);
        let ni = r.non_increasing.unwrap();
        assert_abs_diff_eq!(ni.revenue, 25.0 / 32.0, epsilon = 1e-3);
        assert_eq!(r.non_increasing_case, 1);
    }

    #[test]
    fn independent_buyers_enumeration() {
        let net = PairwiseNetwork::new(DMatrix::zeros(5, 5)).unwrap();
        let prices = PricePath::Scalar(vec![0.5, 0.5]);
        for v in [0.5, 0.8, 1.0] {
            let r = example1_enumerate(&net, &prices, &[v; 5]).unwrap();
            assert_abs_diff_eq!(r, 5.0 / 4.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn enumeration_limits() {
        let net = PairwiseNetwork::new(DMatrix::zeros(13, 13)).unwrap();
        let prices = PricePath::Scalar(vec![0.5, 0.5]);
        assert!(matches!(
            example1_enumerate(&net, &prices, &[1.0; 13]),
            Err(NetPriceError::TooLarge(_))
        ));
    }

    #[test]
    fn example_thresholds_satisfy_pair_sums() {
        let (a, b) = (0.8, 0.6);
        let v = example1_thresholds(a, b, 0.42, 0.6, false);
        let d = 0.18;
        assert_abs_diff_eq!(v[0] + v[2], 2.0 - d / b, epsilon = 1e-15);
        assert_abs_diff_eq!(v[2], 2.0 * v[0] - 1.0, epsilon = 1e-15);
    }
}
