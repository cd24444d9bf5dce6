//! Limiting revenue objectives as functions of the whole price path.

use nalgebra::{DMatrix, DVector};

use crate::distribution::ValuationDistribution;
use crate::error::{NetPriceError, Result};
use crate::linalg::Lu;
use crate::network::BlockNetwork;
use crate::path::PricePath;

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveSpec {
    Uniform { g: f64, rounds: usize },
    Block { net: BlockNetwork, rounds: usize },
    Nonuniform {
        net: BlockNetwork,
        dist: ValuationDistribution,
        rounds: usize,
    },
    Discrimination { net: BlockNetwork, rounds: usize },
    /// Two buyers, two rounds, externality from all purchases.
    AllSalesTwoBuyer { g: f64 },
}

impl ObjectiveSpec {
    pub fn rounds(&self) -> usize {
        match self {
            ObjectiveSpec::Uniform { rounds, .. }
            | ObjectiveSpec::Block { rounds, .. }
            | ObjectiveSpec::Nonuniform { rounds, .. }
            | ObjectiveSpec::Discrimination { rounds, .. } => *rounds,
            ObjectiveSpec::AllSalesTwoBuyer { .. } => 2,
        }
    }

    /// Number of price variables per round.
    pub fn width(&self) -> usize {
        match self {
            ObjectiveSpec::Discrimination { net, .. } => net.m(),
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ObjectiveSpec::Uniform { .. } => "uniform",
            ObjectiveSpec::Block { .. } => "block",
            ObjectiveSpec::Nonuniform { .. } => "nonuniform",
            ObjectiveSpec::Discrimination { .. } => "discrimination",
            ObjectiveSpec::AllSalesTwoBuyer { .. } => "all_sales_two_buyer",
        }
    }

    /// Effective scalar externality `1 / 1ᵀE⁻¹1` for the scalar objectives.
    pub fn g_eff(&self) -> Result<Option<f64>> {
        Ok(match self {
            ObjectiveSpec::Uniform { g, .. } | ObjectiveSpec::AllSalesTwoBuyer { g } => Some(*g),
            ObjectiveSpec::Block { net, .. } | ObjectiveSpec::Nonuniform { net, .. } => {
                Some(1.0 / net.s_sum()?)
            }
            ObjectiveSpec::Discrimination { .. } => None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds() == 0 {
            return Err(NetPriceError::param("rounds", "need T >= 1"));
        }
        match self {
            ObjectiveSpec::Uniform { g, .. } | ObjectiveSpec::AllSalesTwoBuyer { g } => {
                if !(0.0..=1.0).contains(g) {
                    return Err(NetPriceError::param("g", format!("{g} not in [0,1]")));
                }
            }
            ObjectiveSpec::Block { net, .. }
            | ObjectiveSpec::Nonuniform { net, .. }
            | ObjectiveSpec::Discrimination { net, .. } => {
                net.e_inv_ones()?;
            }
        }
        Ok(())
    }

    /// Compiles the spec into a fast evaluator over flat round-major prices.
    pub(crate) fn compile(&self) -> Result<Compiled> {
        self.validate()?;
        Ok(match self {
            ObjectiveSpec::Uniform { g, rounds } => Compiled::Uniform { g: *g, rounds: *rounds },
            ObjectiveSpec::Block { net, rounds } => Compiled::Block {
                s: net.s_sum()?,
                rounds: *rounds,
            },
            ObjectiveSpec::Nonuniform { net, dist, rounds } => Compiled::Nonuniform {
                s: net.s_sum()?,
                dist: dist.clone(),
                rounds: *rounds,
            },
            ObjectiveSpec::Discrimination { net, rounds } => {
                let m = net.m();
                let e_inv = Lu::new(net.e(), "E")?.solve_matrix(&DMatrix::identity(m, m));
                Compiled::Discrimination {
                    e_inv,
                    a: net.alpha().clone(),
                    rounds: *rounds,
                }
            }
            ObjectiveSpec::AllSalesTwoBuyer { g } => Compiled::TwoBuyer { g: *g },
        })
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Compiled {
    Uniform { g: f64, rounds: usize },
    Block { s: f64, rounds: usize },
    Nonuniform { s: f64, dist: ValuationDistribution, rounds: usize },
    Discrimination { e_inv: DMatrix<f64>, a: DVector<f64>, rounds: usize },
    TwoBuyer { g: f64 },
}

impl Compiled {
    pub fn dim(&self) -> usize {
        match self {
            Compiled::Uniform { rounds, .. }
            | Compiled::Block { rounds, .. }
            | Compiled::Nonuniform { rounds, .. } => *rounds,
            Compiled::Discrimination { a, rounds, .. } => a.len() * rounds,
            Compiled::TwoBuyer { .. } => 2,
        }
    }

    pub fn width(&self) -> usize {
        match self {
            Compiled::Discrimination { a, .. } => a.len(),
            _ => 1,
        }
    }

    /// `x` is chronological and round-major.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Compiled::Uniform { g, .. } => uniform_value(*g, x),
            Compiled::Block { s, .. } => block_value(*s, x),
            Compiled::Nonuniform { s, dist, .. } => nonuniform_value(*s, dist, x),
            Compiled::Discrimination { e_inv, a, rounds } => {
                discrimination_value(e_inv, a, *rounds, x)
            }
            Compiled::TwoBuyer { g } => two_buyer_value(*g, x[0], x[1]),
        }
    }

    /// Analytic gradient where the objective is quadratic, otherwise `None`.
    pub fn analytic_gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        match self {
            Compiled::Block { s, .. } => Some(block_gradient(*s, x)),
            Compiled::Uniform { g, .. } if *g > 0.0 => Some(
                block_gradient(1.0 / g, x).into_iter().map(|d| d * g).collect(),
            ),
            _ => None,
        }
    }
}

/// `Σ_{t=T..2} p_t (p_{t−1} − p_t)` with `x` chronological.
fn chain_sum(x: &[f64]) -> f64 {
    x.windows(2).map(|w| w[0] * (w[1] - w[0])).sum()
}

/// Uniform objective in the form
/// `−(1/2g)[Σ (p_{t−1} − p_t)² + (p_1 − p_T)²] + p_1 (1 − p_T)`,
/// which is finite at `g = 0` only on constant paths.
pub fn uniform_value(g: f64, x: &[f64]) -> f64 {
    let first = x[0];
    let last = *x.last().unwrap();
    let sq: f64 = x.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() + (last - first).powi(2);
    let base = last * (1.0 - first);
    if g == 0.0 {
        return if sq == 0.0 { base } else { f64::NEG_INFINITY };
    }
    base - sq / (2.0 * g)
}

/// `S Σ_{t=T..2} p_t (p_{t−1} − p_t) + p_1 (1 − S p_1 + p_T (S − 1))`.
pub fn block_value(s: f64, x: &[f64]) -> f64 {
    let first = x[0];
    let last = *x.last().unwrap();
    s * chain_sum(x) + last * (1.0 - s * last + first * (s - 1.0))
}

fn block_gradient(s: f64, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut grad = vec![0.0; n];
    for r in 0..n.saturating_sub(1) {
        // d/dx of s * x_r (x_{r+1} − x_r)
        grad[r] += s * (x[r + 1] - 2.0 * x[r]);
        grad[r + 1] += s * x[r];
    }
    let first = x[0];
    let last = x[n - 1];
    grad[n - 1] += 1.0 - 2.0 * s * last + first * (s - 1.0);
    grad[0] += last * (s - 1.0);
    grad
}

/// `S Σ_{t=T..2} p_t (p_{t−1} − p_t) + p_1 (1 − F(p_T) − S (p_1 − p_T))`.
pub fn nonuniform_value(s: f64, dist: &ValuationDistribution, x: &[f64]) -> f64 {
    let first = x[0];
    let last = *x.last().unwrap();
    s * chain_sum(x) + last * (1.0 - dist.cdf(first) - s * (last - first))
}

/// `Σ_{t=T..2} p_tᵀE⁻¹(p_{t−1} − p_t) + p_1ᵀA(1 − p_T) − p_1ᵀE⁻¹(p_1 − p_T)`.
pub fn discrimination_value(e_inv: &DMatrix<f64>, a: &DVector<f64>, rounds: usize, x: &[f64]) -> f64 {
    let m = a.len();
    let p = |r: usize| DVector::from_column_slice(&x[r * m..(r + 1) * m]);
    let mut total = 0.0;
    for r in 0..rounds - 1 {
        let (cur, next) = (p(r), p(r + 1));
        total += cur.dot(&(e_inv * (&next - &cur)));
    }
    let first = p(0);
    let last = p(rounds - 1);
    let a_part: f64 = (0..m).map(|i| last[i] * a[i] * (1.0 - first[i])).sum();
    total + a_part - last.dot(&(e_inv * (&last - &first)))
}

pub(crate) fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Expected revenue of the two-buyer all-sales game at first-round price
/// `p2` and second-round price `p1`, using the non-decreasing branch when
/// `p2 ≤ p1` and the non-increasing one otherwise.
pub fn two_buyer_value(g: f64, p2: f64, p1: f64) -> f64 {
    if p2 <= p1 {
        two_buyer_nondecreasing(g, p2, p1)
    } else {
        two_buyer_nonincreasing(g, p2, p1)
    }
}

pub(crate) fn two_buyer_nondecreasing(g: f64, p2: f64, p1: f64) -> f64 {
    if p2 <= 0.0 {
        return 0.0;
    }
    2.0 * (p2 * (1.0 - p2) + p1 * p2 * clamp01(1.0 - (p1 - g * (1.0 - p2)) / p2))
}

pub(crate) fn two_buyer_nonincreasing(g: f64, p2: f64, p1: f64) -> f64 {
    if p2 <= 0.0 {
        return 0.0;
    }
    2.0 * (1.0 - p2).powi(2) * p2
        + 2.0 * p2 * (1.0 - p2) * (clamp01(1.0 - (p1 - g) / p2) * p1 + p2)
        + p2 * p2 * 2.0 * p1 * (1.0 - p1 / p2)
}

/// Exact value of `spec` at `path`.
pub fn evaluate_objective(spec: &ObjectiveSpec, path: &PricePath) -> Result<f64> {
    let compiled = spec.compile()?;
    let shape_ok = match (spec, path) {
        (ObjectiveSpec::Discrimination { net, rounds }, PricePath::PerGroup(p)) => {
            p.len() == *rounds && p[0].len() == net.m()
        }
        (ObjectiveSpec::Discrimination { .. }, PricePath::Scalar(_)) => false,
        (_, PricePath::Scalar(p)) => p.len() == spec.rounds(),
        (_, PricePath::PerGroup(_)) => false,
    };
    if !shape_ok {
        return Err(NetPriceError::ShapeMismatch {
            expected: format!(
                "{} rounds x {} prices for the {} objective",
                spec.rounds(),
                spec.width(),
                spec.kind()
            ),
            got: format!("{} rounds x {}", path.rounds(), path.groups().unwrap_or(1)),
        });
    }
    Ok(compiled.eval(&path.flat()))
}
