//! Finite-market simulation of threshold play.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::ValuationDistribution;
use crate::equilibrium::{thresholds_for_prices, ThresholdSchedule};
use crate::error::{NetPriceError, Result};
use crate::network::BlockNetwork;
use crate::output::{fmt_g12, CsvTable};
use crate::path::PricePath;
use crate::pricing::{block_policy, nonuniform_policy};

#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    pub net: BlockNetwork,
    pub n: usize,
    pub group_sizes: Vec<usize>,
    pub group_of: Vec<usize>,
    pub valuations: Vec<f64>,
}

/// Floor of `α_i n`, with the remaining buyers going to the largest
/// fractional parts (lower index first on ties).
pub fn group_sizes(alpha: &[f64], n: usize) -> Vec<usize> {
    let raw: Vec<f64> = alpha.iter().map(|a| a * n as f64).collect();
    let mut sizes: Vec<usize> = raw.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..alpha.len()).collect();
    order.sort_by(|&i, &j| {
        let (fi, fj) = (raw[i] - raw[i].floor(), raw[j] - raw[j].floor());
        fj.partial_cmp(&fi).unwrap().then(i.cmp(&j))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        sizes[i] += 1;
    }
    sizes
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn sample_market(
    net: &BlockNetwork,
    dist: &ValuationDistribution,
    n: usize,
    seed: u64,
) -> Result<Market> {
    sample_market_stream(net, dist, n, seed, 0)
}

/// Same as [`sample_market`] on an independent stream of the seeded generator.
pub fn sample_market_stream(
    net: &BlockNetwork,
    dist: &ValuationDistribution,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<Market> {
    if n < net.m() {
        return Err(NetPriceError::param(
            "n",
            format!("{n} buyers cannot fill {} groups", net.m()),
        ));
    }
    let sizes = group_sizes(net.alpha().as_slice(), n);
    let group_of: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(i, &k)| std::iter::repeat_n(i, k))
        .collect();
    let mut rng = rng_for(seed, stream);
    let valuations = (0..n).map(|_| dist.inverse_cdf(rng.random::<f64>())).collect();
    Ok(Market {
        net: net.clone(),
        n,
        group_sizes: sizes,
        group_of,
        valuations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub n: usize,
    /// `per_round_counts[r][i]` purchases by group `i` in chronological round `r`
    /// (first replication for Monte Carlo runs).
    pub per_round_counts: Vec<Vec<u64>>,
    pub never_bought: u64,
    pub realized_revenue: f64,
    pub realized_welfare: f64,
    pub replications: usize,
    pub seed: u64,
    pub mean_revenue: f64,
    pub stderr_revenue: f64,
    pub mean_welfare: f64,
    pub stderr_welfare: f64,
    pub replication_revenues: Vec<f64>,
    pub replication_welfare: Vec<f64>,
}

impl SimulationReport {
    pub fn counts_csv_table(&self) -> CsvTable {
        let m = self.per_round_counts.first().map_or(0, Vec::len);
        let mut header = vec!["round".to_string()];
        header.extend((1..=m).map(|i| format!("count_g{i}")));
        let mut t = CsvTable::new(header);
        for (r, row) in self.per_round_counts.iter().enumerate() {
            let mut cells = vec![(r + 1).to_string()];
            cells.extend(row.iter().map(u64::to_string));
            t.push(cells);
        }
        t
    }
}

/// One market under threshold play. A buyer of group `i` still waiting with
/// `t` rounds left buys when `v ≥ v_t^{(i)}`; utility counts externality
/// `Σ_j E_ij k_j / n` from purchases in strictly earlier rounds.
pub fn run_market(market: &Market, path: &PricePath, sched: &ThresholdSchedule) -> Result<SimulationReport> {
    let m = market.net.m();
    let t_max = path.rounds();
    if sched.rounds() != t_max || sched.groups() != m || path.groups().is_some_and(|k| k != m) {
        return Err(NetPriceError::ShapeMismatch {
            expected: format!("{t_max} rounds and {m} groups"),
            got: format!(
                "schedule {}x{}, path groups {:?}",
                sched.rounds(),
                sched.groups(),
                path.groups()
            ),
        });
    }
    let n = market.n;
    let nf = n as f64;
    let e = market.net.e();
    let mut bought = vec![false; n];
    let mut cumulative = vec![0u64; m];
    let mut counts = vec![vec![0u64; m]; t_max];
    let mut revenue = 0.0;
    let mut welfare = 0.0;
    for r in 0..t_max {
        let t = t_max - r;
        let ext: Vec<f64> = (0..m)
            .map(|i| (0..m).map(|j| e[(i, j)] * cumulative[j] as f64 / nf).sum())
            .collect();
        for b in 0..n {
            if bought[b] {
                continue;
            }
            let i = market.group_of[b];
            let v = market.valuations[b];
            if v >= sched.v(t, i) {
                bought[b] = true;
                counts[r][i] += 1;
                revenue += path.price(r, i);
                welfare += v + ext[i];
            }
        }
        for i in 0..m {
            cumulative[i] += counts[r][i];
        }
    }
    let sold: u64 = cumulative.iter().sum();
    let realized_revenue = revenue / nf;
    let realized_welfare = welfare / nf;
    Ok(SimulationReport {
        n,
        per_round_counts: counts,
        never_bought: n as u64 - sold,
        realized_revenue,
        realized_welfare,
        replications: 1,
        seed: 0,
        mean_revenue: realized_revenue,
        stderr_revenue: 0.0,
        mean_welfare: realized_welfare,
        stderr_welfare: 0.0,
        replication_revenues: vec![realized_revenue],
        replication_welfare: vec![realized_welfare],
    })
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Independent replications; replication `k` draws from stream `k` of the
/// seeded generator and results are combined in replication order.
pub fn monte_carlo(
    net: &BlockNetwork,
    dist: &ValuationDistribution,
    path: &PricePath,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<SimulationReport> {
    if reps < 2 {
        return Err(NetPriceError::param("reps", "need at least 2 replications"));
    }
    let sched = thresholds_for_prices(net, dist, path)?;
    let runs: Vec<SimulationReport> = (0..reps)
        .into_par_iter()
        .map(|k| {
            let market = sample_market_stream(net, dist, n, seed, k as u64)?;
            run_market(&market, path, &sched)
        })
        .collect::<Result<_>>()?;
    let revenues: Vec<f64> = runs.iter().map(|r| r.realized_revenue).collect();
    let welfare: Vec<f64> = runs.iter().map(|r| r.realized_welfare).collect();
    let (mean_revenue, stderr_revenue) = mean_and_stderr(&revenues);
    let (mean_welfare, stderr_welfare) = mean_and_stderr(&welfare);
    let first = runs.into_iter().next().expect("reps >= 2");
    Ok(SimulationReport {
        replications: reps,
        seed,
        mean_revenue,
        stderr_revenue,
        mean_welfare,
        stderr_welfare,
        replication_revenues: revenues,
        replication_welfare: welfare,
        ..first
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
    pub closed_form: f64,
    pub abs_error: f64,
    /// Root-mean-square of the per-replication errors.
    pub rms_error: f64,
    pub welfare_mean: f64,
    pub welfare_stderr: f64,
    pub welfare_closed_form: Option<f64>,
    pub welfare_abs_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub replications: usize,
    pub seed: u64,
}

impl ConvergenceTable {
    /// Least-squares slope of `log(rms_error)` against `log(n)`.
    pub fn log_log_slope(&self) -> Option<f64> {
        log_log_slope(
            &self
                .rows
                .iter()
                .map(|r| (r.n as f64, r.rms_error))
                .collect::<Vec<_>>(),
        )
    }

    pub fn to_csv_table(&self) -> CsvTable {
        let mut t = CsvTable::new([
            "n",
            "mean",
            "stderr",
            "closed_form",
            "abs_error",
            "rms_error",
            "welfare_mean",
            "welfare_stderr",
            "welfare_closed_form",
            "welfare_abs_error",
        ]);
        let opt = |x: Option<f64>| x.map(fmt_g12).unwrap_or_default();
        for r in &self.rows {
            t.push(vec![
                r.n.to_string(),
                fmt_g12(r.mean),
                fmt_g12(r.stderr),
                fmt_g12(r.closed_form),
                fmt_g12(r.abs_error),
                fmt_g12(r.rms_error),
                fmt_g12(r.welfare_mean),
                fmt_g12(r.welfare_stderr),
                opt(r.welfare_closed_form),
                opt(r.welfare_abs_error),
            ]);
        }
        t
    }
}

pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Simulated revenue of the optimal committed path at each market size,
/// against its limiting value.
pub fn convergence_study(
    net: &BlockNetwork,
    dist: &ValuationDistribution,
    t_max: usize,
    n_list: &[usize],
    reps: usize,
    seed: u64,
) -> Result<ConvergenceTable> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(NetPriceError::param("n_list", "must be non-empty and ascending"));
    }
    let policy = if dist.is_uniform() {
        block_policy(net, t_max)?
    } else {
        nonuniform_policy(net, dist, t_max)?
    };
    let limit = policy.normalized_revenue;
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let rep = monte_carlo(net, dist, &policy.path, n, reps, seed)?;
        let rms = (rep
            .replication_revenues
            .iter()
            .map(|x| (x - limit).powi(2))
            .sum::<f64>()
            / reps as f64)
            .sqrt();
        rows.push(ConvergenceRow {
            n,
            mean: rep.mean_revenue,
            stderr: rep.stderr_revenue,
            closed_form: limit,
            abs_error: (rep.mean_revenue - limit).abs(),
            rms_error: rms,
            welfare_mean: rep.mean_welfare,
            welfare_stderr: rep.stderr_welfare,
            welfare_closed_form: policy.welfare,
            welfare_abs_error: policy.welfare.map(|w| (rep.mean_welfare - w).abs()),
        });
    }
    Ok(ConvergenceTable {
        rows,
        replications: reps,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pricing::uniform_policy;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    #[test]
    fn rounding_rule() {
        assert_eq!(group_sizes(&[0.3, 0.7], 10), vec![3, 7]);
        assert_eq!(group_sizes(&[1.0 / 3.0; 3], 10), vec![4, 3, 3]);
        assert_eq!(group_sizes(&[0.25, 0.25, 0.5], 3), vec![1, 1, 1]);
        assert_eq!(group_sizes(&[0.2, 0.2, 0.6], 4), vec![1, 1, 2]);
        assert_eq!(group_sizes(&[0.15, 0.85], 10).iter().sum::<usize>(), 10);
    }

    #[test]
    fn deterministic_sampling() {
        let net = BlockNetwork::uniform(0.5).unwrap();
        let a = sample_market(&net, &ValuationDistribution::Uniform, 100, 7).unwrap();
        let b = sample_market(&net, &ValuationDistribution::Uniform, 100, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_market(&net, &ValuationDistribution::Uniform, 100, 8).unwrap();
        assert_ne!(a.valuations, c.valuations);
        let two = BlockNetwork::equal_groups(DMatrix::identity(2, 2)).unwrap();
        assert!(sample_market(&two, &ValuationDistribution::Uniform, 1, 0).is_err());
    }

    #[test]
    fn single_buyer() {
        let net = BlockNetwork::uniform(0.0).unwrap();
        let market = Market {
            net,
            n: 1,
            group_sizes: vec![1],
            group_of: vec![0],
            valuations: vec![0.9],
        };
        let sched = ThresholdSchedule::new(vec![vec![0.5]]).unwrap();
        let r = run_market(&market, &PricePath::Scalar(vec![0.5]), &sched).unwrap();
        assert_eq!(r.per_round_counts, vec![vec![1]]);
        assert_abs_diff_eq!(r.realized_revenue, 0.5);
        assert_abs_diff_eq!(r.realized_welfare, 0.9);
    }

    #[test]
    fn nobody_buys_below_cutoffs() {
        let net = BlockNetwork::uniform(0.3).unwrap();
        let mut market = sample_market(&net, &ValuationDistribution::Uniform, 50, 1).unwrap();
        market.valuations.iter_mut().for_each(|v| *v *= 0.1);
        let sched = ThresholdSchedule::new(vec![vec![0.5], vec![0.8]]).unwrap();
        let r = run_market(&market, &PricePath::Scalar(vec![0.4, 0.5]), &sched).unwrap();
        assert_eq!(r.never_bought, 50);
        assert_eq!(r.realized_revenue, 0.0);
    }

    #[test]
    fn large_uniform_market_matches_limit() {
        let policy = uniform_policy(0.2, 3).unwrap();
        let net = BlockNetwork::uniform(0.2).unwrap();
        let market = sample_market(&net, &ValuationDistribution::Uniform, 100_000, 11).unwrap();
        let r = run_market(&market, &policy.path, policy.thresholds.as_ref().unwrap()).unwrap();
        assert!((r.realized_revenue - 3.0 / 11.2).abs() < 0.01);
    }

    #[test]
    fn shape_checks() {
        let net = BlockNetwork::uniform(0.3).unwrap();
        let market = sample_market(&net, &ValuationDistribution::Uniform, 10, 1).unwrap();
        let sched = ThresholdSchedule::new(vec![vec![0.5]]).unwrap();
        let err = run_market(&market, &PricePath::Scalar(vec![0.4, 0.5]), &sched).unwrap_err();
        assert!(matches!(err, NetPriceError::ShapeMismatch { .. }));
    }

    #[test]
    fn slope_fit() {
        let pts: Vec<(f64, f64)> = [1e3, 4e3, 1.6e4].iter().map(|&n: &f64| (n, 2.0 / n.sqrt())).collect();
        assert_abs_diff_eq!(log_log_slope(&pts).unwrap(), -0.5, epsilon = 1e-12);
    }
}
