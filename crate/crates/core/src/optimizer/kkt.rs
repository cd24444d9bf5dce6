//! Optimality conditions for the constant all-sales price path.

use serde::{Deserialize, Serialize};

use crate::error::{NetPriceError, Result};
use crate::linalg::ones;
use crate::network::BlockNetwork;
use crate::pricing::{check_all_sales_condition, walk_sums};

const STATIONARITY_TOL: f64 = 1e-8;
const MULTIPLIER_TOL: f64 = 1e-12;
const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub rounds: usize,
    /// `s_k = αᵀ(EA)^k 1`, `k = 0..T`.
    pub walk_sums: Vec<f64>,
    /// `μ_j` for the constraints `p_{j+1} ≤ p_j`, `j = 1..T−1`.
    pub multipliers: Vec<f64>,
    pub multipliers_nonnegative: bool,
    /// Max-norm of the Lagrangian gradient at `p = ½·1`.
    pub stationarity_residual: f64,
    pub stationary: bool,
    /// `2 Σ_k s_k`, the curvature along the constant direction per unit `y²`.
    pub curvature: f64,
    pub curvature_positive: bool,
}

impl KktReport {
    pub fn passed(&self) -> bool {
        self.multipliers_nonnegative && self.stationary && self.curvature_positive
    }
}

/// Negative all-sales revenue, `p` indexed by rounds remaining (`p[t-1] = p_t`):
/// `−Σ_t p_t αᵀ(v_{t+1} − v_t)` with `v_t = p_t 1 − EA(1 − v_{t+1})`, `v_{T+1} = 1`.
pub fn all_sales_objective(net: &BlockNetwork, p: &[f64]) -> f64 {
    let m = net.m();
    let ea = net.ea();
    let t_max = p.len();
    let mut v_next = ones(m);
    let mut total = 0.0;
    for t in (1..=t_max).rev() {
        let v = ones(m) * p[t - 1] - &ea * (ones(m) - &v_next);
        total += p[t - 1] * net.alpha().dot(&(&v_next - &v));
        v_next = v;
    }
    -total
}

fn multipliers(s: &[f64], t_max: usize) -> Vec<f64> {
    (1..t_max)
        .map(|j| 0.5 * (1..=t_max - j).map(|k| s[k - 1] - s[t_max - k]).sum::<f64>())
        .collect()
}

/// Checks the KKT system at the constant path `½·1`, with constraints
/// `p_{j+1} − p_j ≤ 0` (prices non-decreasing over time).
///
/// Fails with `ConditionViolated` when the walk sums increase or when any
/// clause does not hold.
pub fn kkt_check_all_sales(net: &BlockNetwork, t_max: usize) -> Result<KktReport> {
    if t_max == 0 {
        return Err(NetPriceError::param("rounds", "need T >= 1"));
    }
    check_all_sales_condition(net, t_max)?;
    let s = walk_sums(net, t_max + 1);
    let mu = multipliers(&s, t_max);
    let p = vec![0.5; t_max];
    let mut z = p.clone();
    let grad: Vec<f64> = (0..t_max)
        .map(|k| {
            z[k] = 0.5 + FD_STEP;
            let up = all_sales_objective(net, &z);
            z[k] = 0.5 - FD_STEP;
            let down = all_sales_objective(net, &z);
            z[k] = 0.5;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect();
    // ∂L/∂p_t = ∂f/∂p_t + μ_{t−1} − μ_t with μ_0 = μ_T = 0.
    let mu_at = |j: usize| if j == 0 || j >= t_max { 0.0 } else { mu[j - 1] };
    let residual = (1..=t_max)
        .map(|t| (grad[t - 1] + mu_at(t - 1) - mu_at(t)).abs())
        .fold(0.0, f64::max);
    let curvature = 2.0 * s[..t_max].iter().sum::<f64>();
    let report = KktReport {
        rounds: t_max,
        walk_sums: s,
        multipliers_nonnegative: mu.iter().all(|m| *m >= -MULTIPLIER_TOL),
        multipliers: mu,
        stationarity_residual: residual,
        stationary: residual <= STATIONARITY_TOL,
        curvature,
        curvature_positive: curvature > 0.0,
    };
    if !report.multipliers_nonnegative {
        return Err(NetPriceError::ConditionViolated(format!(
            "dual feasibility: multipliers {:?}",
            report.multipliers
        )));
    }
    if !report.stationary {
        return Err(NetPriceError::ConditionViolated(format!(
            "stationarity: residual {:.3e}",
            report.stationarity_residual
        )));
    }
    if !report.curvature_positive {
        return Err(NetPriceError::ConditionViolated(format!(
            "second-order: curvature {}",
            report.curvature
        )));
    }
    Ok(report)
}

/// Revenue of the all-sales game along a path given by rounds remaining.
pub fn all_sales_revenue(net: &BlockNetwork, p: &[f64]) -> f64 {
    -all_sales_objective(net, p)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::pricing::all_sales_policy;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    #[test]
    fn uniform_half_three_rounds() {
        let net = BlockNetwork::uniform(0.5).unwrap();
        let r = kkt_check_all_sales(&net, 3).unwrap();
        assert!(r.passed());
        assert_eq!(r.multipliers.len(), 2);
    }

    #[test]
    fn objective_at_half_matches_policy_revenue() {
        let e = DMatrix::from_row_slice(2, 2, &[0.4, 0.1, 0.2, 0.3]);
        let net = BlockNetwork::new(vec![0.5, 0.5], e).unwrap();
        for t in 1..6 {
            let closed = all_sales_policy(&net, t).unwrap().normalized_revenue;
            assert_abs_diff_eq!(all_sales_revenue(&net, &vec![0.5; t]), closed, epsilon = 1e-14);
        }
    }

    #[test]
    fn zero_network_multipliers() {
        // With E = 0 only s_0 = 1 survives; stationarity then forces μ_j = ½.
        let net = BlockNetwork::equal_groups(DMatrix::zeros(2, 2)).unwrap();
        let r = kkt_check_all_sales(&net, 4).unwrap();
        for m in &r.multipliers {
            assert_abs_diff_eq!(*m, 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn increasing_walk_sums_rejected() {
        let net = BlockNetwork::uniform(1.2).unwrap();
        assert!(matches!(
            kkt_check_all_sales(&net, 3),
            Err(NetPriceError::ConditionViolated(_))
        ));
    }
}
