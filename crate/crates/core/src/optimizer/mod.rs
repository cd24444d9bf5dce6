//! Numerical maximization of the revenue objectives, plus the second-order
//! and KKT diagnostics and the exact small-market oracles.

pub mod finite;
pub mod hessian;
pub mod kkt;
pub mod objective;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NetPriceError, Result};
use crate::path::PricePath;

pub use finite::{
    example1_enumerate, example1_network, example1_thresholds, two_buyer_all_sales_oracle,
    TwoBuyerReport,
};
pub use hessian::{hessian_check, HessianReport};
pub use kkt::{kkt_check_all_sales, KktReport};
pub use objective::{evaluate_objective, ObjectiveSpec};

use objective::Compiled;

const FD_STEP: f64 = 1e-6;
const HESS_STEP: f64 = 1e-5;
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Feasible {
    /// Every price in [0,1].
    Box,
    /// [0,1] and chronologically non-decreasing (per group).
    Monotone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximizeOptions {
    pub starts: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub feasible: Feasible,
}

impl Default for MaximizeOptions {
    fn default() -> Self {
        MaximizeOptions {
            starts: 16,
            seed: 0,
            max_iter: 100_000,
            grad_tol: 1e-7,
            feasible: Feasible::Box,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub argmax: PricePath,
    pub value: f64,
    pub iterations: usize,
    /// Norm of the projected gradient step at the argmax.
    pub gradient_norm: f64,
    pub converged: bool,
}

pub fn maximize(spec: &ObjectiveSpec) -> Result<OptResult> {
    maximize_with(spec, &MaximizeOptions::default())
}

struct Problem<'a> {
    compiled: &'a Compiled,
    /// Maps reduced variables to the full chronological price vector.
    lift: Box<dyn Fn(&[f64]) -> Vec<f64> + Sync + 'a>,
    dim: usize,
    width: usize,
    feasible: Feasible,
}

impl Problem<'_> {
    fn value(&self, y: &[f64]) -> f64 {
        self.compiled.eval(&(self.lift)(y))
    }

    fn gradient(&self, y: &[f64]) -> Vec<f64> {
        if self.dim == self.compiled.dim() {
            if let Some(g) = self.compiled.analytic_gradient(y) {
                return g;
            }
        }
        let mut z = y.to_vec();
        (0..self.dim)
            .map(|i| {
                let orig = z[i];
                z[i] = orig + FD_STEP;
                let up = self.value(&z);
                z[i] = orig - FD_STEP;
                let down = self.value(&z);
                z[i] = orig;
                (up - down) / (2.0 * FD_STEP)
            })
            .collect()
    }

    fn project(&self, y: &mut [f64]) {
        if self.feasible == Feasible::Monotone {
            let rounds = self.dim / self.width;
            for i in 0..self.width {
                let mut series: Vec<f64> = (0..rounds).map(|r| y[r * self.width + i]).collect();
                isotonic(&mut series);
                for r in 0..rounds {
                    y[r * self.width + i] = series[r];
                }
            }
        }
        for v in y.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
    }

    fn projected_step_norm(&self, y: &[f64], g: &[f64]) -> f64 {
        let mut z: Vec<f64> = y.iter().zip(g).map(|(a, b)| a + b).collect();
        self.project(&mut z);
        z.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    }
}

/// Pool-adjacent-violators: least-squares non-decreasing fit, in place.
pub fn isotonic(y: &mut [f64]) {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y.iter() {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (b, nb) = blocks[blocks.len() - 1];
            let (a, na) = blocks[blocks.len() - 2];
            if a <= b {
                break;
            }
            blocks.pop();
            let n = na + nb;
            *blocks.last_mut().unwrap() = ((a * na as f64 + b * nb as f64) / n as f64, n);
        }
    }
    let mut k = 0;
    for (v, n) in blocks {
        for _ in 0..n {
            y[k] = v;
            k += 1;
        }
    }
}

struct Run {
    x: Vec<f64>,
    value: f64,
    iterations: usize,
    pg_norm: f64,
}

fn ascend(p: &Problem, start: Vec<f64>, opts: &MaximizeOptions) -> Run {
    let mut x = start;
    p.project(&mut x);
    let mut fx = p.value(&x);
    let mut step = 1.0;
    let mut iterations = 0;
    let mut pg_norm = f64::INFINITY;
    let mut polish_at = 1e-4;
    while iterations < opts.max_iter {
        iterations += 1;
        let g = p.gradient(&x);
        pg_norm = p.projected_step_norm(&x, &g);
        if pg_norm <= opts.grad_tol {
            break;
        }
        if pg_norm <= polish_at {
            if let Some((xn, fn_)) = newton_step(p, &x, &g, fx) {
                x = xn;
                fx = fn_;
                continue;
            }
            polish_at *= 0.1;
        }
        let mut accepted = false;
        while step > 1e-18 {
            let mut xn: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + step * b).collect();
            p.project(&mut xn);
            let fn_ = p.value(&xn);
            let lin: f64 = g.iter().zip(xn.iter().zip(&x)).map(|(d, (a, b))| d * (a - b)).sum();
            if fn_ >= fx + 1e-4 * lin && fn_.is_finite() {
                x = xn;
                fx = fn_;
                step = (step * 2.0).min(1e6);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Run {
        x,
        value: fx,
        iterations,
        pg_norm,
    }
}

/// One Newton step on the coordinates not pinned at a bound.
fn newton_step(p: &Problem, x: &[f64], g: &[f64], fx: f64) -> Option<(Vec<f64>, f64)> {
    if p.feasible == Feasible::Monotone {
        let rounds = p.dim / p.width;
        let tight = (1..rounds).any(|r| {
            (0..p.width).any(|i| x[r * p.width + i] - x[(r - 1) * p.width + i] < 1e-9)
        });
        if tight {
            return None;
        }
    }
    let free: Vec<usize> = (0..p.dim)
        .filter(|&i| !((x[i] <= 0.0 && g[i] < 0.0) || (x[i] >= 1.0 && g[i] > 0.0)))
        .collect();
    if free.is_empty() {
        return None;
    }
    let k = free.len();
    let mut h = DMatrix::zeros(k, k);
    let mut z = x.to_vec();
    for (c, &j) in free.iter().enumerate() {
        let orig = z[j];
        z[j] = orig + HESS_STEP;
        let up = p.gradient(&z);
        z[j] = orig - HESS_STEP;
        let down = p.gradient(&z);
        z[j] = orig;
        for (r, &i) in free.iter().enumerate() {
            h[(r, c)] = (up[i] - down[i]) / (2.0 * HESS_STEP);
        }
    }
    let h = (&h + h.transpose()) * 0.5;
    let rhs = DVector::from_iterator(k, free.iter().map(|&i| -g[i]));
    // Only take the step when H is negative definite, i.e. −H = LLᵀ.
    let d = (-h).cholesky().map(|c| -c.solve(&rhs))?;
    let mut xn = x.to_vec();
    for (r, &i) in free.iter().enumerate() {
        xn[i] += d[r];
    }
    p.project(&mut xn);
    let fn_ = p.value(&xn);
    (fn_ >= fx - 1e-15 && fn_.is_finite()).then_some((xn, fn_))
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x != y {
            return x < y;
        }
    }
    false
}

pub fn maximize_with(spec: &ObjectiveSpec, opts: &MaximizeOptions) -> Result<OptResult> {
    let compiled = spec.compile()?;
    let rounds = spec.rounds();
    let degenerate = matches!(spec, ObjectiveSpec::Uniform { g, .. } if *g == 0.0);
    let problem = if degenerate {
        // With no externality only constant paths have finite value.
        Problem {
            compiled: &compiled,
            lift: Box::new(move |y: &[f64]| vec![y[0]; rounds]),
            dim: 1,
            width: 1,
            feasible: opts.feasible,
        }
    } else {
        Problem {
            compiled: &compiled,
            lift: Box::new(|y: &[f64]| y.to_vec()),
            dim: compiled.dim(),
            width: compiled.width(),
            feasible: opts.feasible,
        }
    };
    let starts = opts.starts.max(1);
    let runs: Vec<Run> = (0..starts)
        .into_par_iter()
        .map(|k| {
            let start = if k == 0 {
                vec![0.5; problem.dim]
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(k as u64);
                (0..problem.dim).map(|_| rng.random::<f64>()).collect()
            };
            ascend(&problem, start, opts)
        })
        .collect();
    let mut best = &runs[0];
    for run in &runs[1..] {
        if run.value > best.value + TIE_TOL
            || ((run.value - best.value).abs() <= TIE_TOL && lex_less(&run.x, &best.x))
        {
            best = run;
        }
    }
    if !(best.pg_norm <= opts.grad_tol) {
        return Err(NetPriceError::NonConvergence {
            iterations: best.iterations,
            best_value: best.value,
        });
    }
    let flat = (problem.lift)(&best.x);
    let argmax = match spec {
        ObjectiveSpec::Discrimination { net, .. } => {
            PricePath::per_group(flat.chunks(net.m()).map(<[f64]>::to_vec).collect())?
        }
        _ => PricePath::Scalar(flat),
    };
    Ok(OptResult {
        argmax,
        value: best.value,
        iterations: best.iterations,
        gradient_norm: best.pg_norm,
        converged: true,
    })
}

/// Exhaustive search over a regular grid with `points` values per round.
pub fn grid_search(spec: &ObjectiveSpec, points: usize) -> Result<(PricePath, f64)> {
    let compiled = spec.compile()?;
    let dim = compiled.dim();
    let total = points
        .checked_pow(dim as u32)
        .filter(|&n| n <= 50_000_000)
        .ok_or_else(|| NetPriceError::TooLarge(format!("{points}^{dim} grid points")))?;
    let step = 1.0 / (points - 1) as f64;
    let decode = |mut k: usize| {
        let mut x = vec![0.0; dim];
        for slot in x.iter_mut().rev() {
            *slot = (k % points) as f64 * step;
            k /= points;
        }
        x
    };
    let best = (0..total)
        .into_par_iter()
        .map(|k| (k, compiled.eval(&decode(k))))
        .reduce(
            || (usize::MAX, f64::NEG_INFINITY),
            |a, b| {
                if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                    b
                } else {
                    a
                }
            },
        );
    Ok((PricePath::Scalar(decode(best.0)), best.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::BlockNetwork;
    use crate::pricing::uniform_policy;
    use approx::assert_abs_diff_eq;

    #[test]
    fn isotonic_pools() {
        let mut y = [1.0, 3.0, 2.0, 4.0, 0.0];
        isotonic(&mut y);
        assert_eq!(y, [1.0, 2.25, 2.25, 2.25, 2.25]);
    }

    #[test]
    fn recovers_uniform_closed_form() {
        let r = maximize(&ObjectiveSpec::Uniform { g: 0.2, rounds: 3 }).unwrap();
        let c = uniform_policy(0.2, 3).unwrap();
        assert_abs_diff_eq!(r.value, c.normalized_revenue, epsilon = 1e-10);
        for (a, b) in r.argmax.flat().iter().zip(c.path.flat()) {
            assert_abs_diff_eq!(a, &b, epsilon = 1e-7);
        }
        assert!(r.gradient_norm <= 1e-7);
    }

    #[test]
    fn zero_externality_is_constant_half() {
        let r = maximize(&ObjectiveSpec::Uniform { g: 0.0, rounds: 4 }).unwrap();
        assert_abs_diff_eq!(r.value, 0.25, epsilon = 1e-12);
        assert!(r.argmax.flat().iter().all(|p| (p - 0.5).abs() < 1e-7));
    }

    #[test]
    fn monotone_mode_matches_interior_optimum() {
        let opts = MaximizeOptions {
            feasible: Feasible::Monotone,
            ..Default::default()
        };
        let r = maximize_with(&ObjectiveSpec::Uniform { g: 0.7, rounds: 4 }, &opts).unwrap();
        assert_abs_diff_eq!(r.value, uniform_policy(0.7, 4).unwrap().normalized_revenue, epsilon = 1e-10);
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = ObjectiveSpec::Block {
            net: BlockNetwork::uniform(0.6).unwrap(),
            rounds: 5,
        };
        let a = maximize(&spec).unwrap();
        let b = maximize(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn grid_search_two_rounds() {
        let (path, v) = grid_search(&ObjectiveSpec::Uniform { g: 1.0, rounds: 2 }, 301).unwrap();
        assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(path.price(0, 0), 1.0 / 3.0, epsilon = 1e-12);
    }
}
