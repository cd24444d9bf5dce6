//! Second-order checks of the revenue objectives.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::objective::{Compiled, ObjectiveSpec};
use crate::distribution::ValuationDistribution;
use crate::linalg;
use crate::pricing::nonuniform_policy;

const EIG_TOL: f64 = 1e-10;
const FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianReport {
    pub kind: String,
    pub dimension: usize,
    pub max_eigenvalue: f64,
    /// `max_eigenvalue ≤ 1e-10`.
    pub passed: bool,
    pub g_eff: Option<f64>,
    pub g_eff_in_unit_interval: Option<bool>,
    /// Chronological prices where a price-dependent Hessian was evaluated.
    pub evaluated_at: Option<Vec<f64>>,
    pub note: Option<String>,
}

/// Hessian of `g · h(p)` for the scalar objective, indexed by rounds
/// remaining: `−2` on the diagonal, `1` between neighbouring rounds and
/// `1 − g` added between the first and the last round.
pub fn uniform_hessian(g: f64, t_max: usize) -> DMatrix<f64> {
    nonuniform_hessian(g, &ValuationDistribution::Uniform, 0.5, 0.5, t_max)
}

/// Same with a general density, evaluated at first price `p_first` and last
/// price `p_last`: the corner becomes `1 − g f(p_T)` and the `(T,T)` entry
/// picks up `−g p_1 f'(p_T)`.
pub fn nonuniform_hessian(
    g: f64,
    dist: &ValuationDistribution,
    p_first: f64,
    p_last: f64,
    t_max: usize,
) -> DMatrix<f64> {
    let f = dist.pdf(p_first);
    let fp = dist.pdf_derivative(p_first);
    if t_max == 1 {
        let p = p_first;
        return DMatrix::from_element(1, 1, g * (-2.0 * f - p * fp));
    }
    // Index k = t − 1.
    let mut h = DMatrix::from_diagonal_element(t_max, t_max, -2.0);
    for k in 0..t_max - 1 {
        h[(k, k + 1)] += 1.0;
        h[(k + 1, k)] += 1.0;
    }
    let last = t_max - 1;
    h[(0, last)] += 1.0 - g * f;
    h[(last, 0)] += 1.0 - g * f;
    h[(last, last)] -= g * p_last * fp;
    h
}

/// Block Hessian of the discriminating objective with `M = E⁻¹`.
pub fn discrimination_hessian(e_inv: &DMatrix<f64>, alpha: &DVector<f64>, t_max: usize) -> DMatrix<f64> {
    let m = alpha.len();
    let a = DMatrix::from_diagonal(alpha);
    if t_max == 1 {
        return -a * 2.0;
    }
    let mt = e_inv.transpose();
    let n = m * t_max;
    let mut h = DMatrix::zeros(n, n);
    let mut add = |bi: usize, bj: usize, blk: &DMatrix<f64>| {
        let mut view = h.view_mut((bi * m, bj * m), (m, m));
        view += blk;
    };
    let diag = -(e_inv + &mt);
    for k in 0..t_max {
        add(k, k, &diag);
    }
    // Block k = t − 1; the term p_tᵀ M p_{t−1} couples t and t − 1.
    for k in 1..t_max {
        add(k, k - 1, e_inv);
        add(k - 1, k, &mt);
    }
    let last = t_max - 1;
    add(0, last, &(e_inv - &a));
    add(last, 0, &(&mt - &a));
    h
}

fn report(kind: &str, h: &DMatrix<f64>, g_eff: Option<f64>) -> HessianReport {
    let max_eigenvalue = linalg::max_sym_eigenvalue(h);
    HessianReport {
        kind: kind.to_string(),
        dimension: h.nrows(),
        max_eigenvalue,
        passed: max_eigenvalue <= EIG_TOL,
        g_eff,
        g_eff_in_unit_interval: g_eff.map(|g| (0.0..=1.0).contains(&g)),
        evaluated_at: None,
        note: None,
    }
}

fn failed(kind: &str, note: String) -> HessianReport {
    HessianReport {
        kind: kind.to_string(),
        dimension: 0,
        max_eigenvalue: f64::NAN,
        passed: false,
        g_eff: None,
        g_eff_in_unit_interval: None,
        evaluated_at: None,
        note: Some(note),
    }
}

fn finite_difference_hessian(c: &Compiled, x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let mut h = DMatrix::zeros(n, n);
    let mut z = x.to_vec();
    let f0 = c.eval(x);
    for i in 0..n {
        for j in i..n {
            let v = if i == j {
                z[i] = x[i] + FD_STEP;
                let up = c.eval(&z);
                z[i] = x[i] - FD_STEP;
                let down = c.eval(&z);
                (up - 2.0 * f0 + down) / (FD_STEP * FD_STEP)
            } else {
                let mut s = 0.0;
                for (di, dj, sign) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                    z[i] = x[i] + di * FD_STEP;
                    z[j] = x[j] + dj * FD_STEP;
                    s += sign * c.eval(&z);
                }
                s / (4.0 * FD_STEP * FD_STEP)
            };
            z[i] = x[i];
            z[j] = x[j];
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

/// Builds the Hessian of the objective and reports its largest eigenvalue.
/// Never fails; problems with the inputs are described in `note`.
pub fn hessian_check(spec: &ObjectiveSpec) -> HessianReport {
    let kind = spec.kind();
    let t = spec.rounds();
    match spec {
        ObjectiveSpec::Uniform { g, .. } => report(kind, &uniform_hessian(*g, t), Some(*g)),
        ObjectiveSpec::Block { net, .. } => match net.s_sum() {
            Ok(s) => report(kind, &uniform_hessian(1.0 / s, t), Some(1.0 / s)),
            Err(e) => failed(kind, e.to_string()),
        },
        ObjectiveSpec::Nonuniform { net, dist, .. } => {
            let s = match net.s_sum() {
                Ok(s) => s,
                Err(e) => return failed(kind, e.to_string()),
            };
            let (path, note) = match nonuniform_policy(net, dist, t) {
                Ok(r) => (r.path.flat(), None),
                Err(e) => (
                    vec![0.5; t],
                    Some(format!("closed-form policy unavailable ({e}); evaluated at p = 1/2")),
                ),
            };
            let h = nonuniform_hessian(1.0 / s, dist, path[0], path[t - 1], t);
            let mut r = report(kind, &h, Some(1.0 / s));
            r.evaluated_at = Some(path);
            r.note = note;
            r
        }
        ObjectiveSpec::Discrimination { net, .. } => {
            let m = net.m();
            match linalg::Lu::new(net.e(), "E") {
                Ok(lu) => {
                    let e_inv = lu.solve_matrix(&DMatrix::identity(m, m));
                    report(kind, &discrimination_hessian(&e_inv, net.alpha(), t), None)
                }
                Err(e) => failed(kind, e.to_string()),
            }
        }
        ObjectiveSpec::AllSalesTwoBuyer { g } => match spec.compile() {
            Ok(c) => {
                let x = [0.5, 0.5];
                let mut r = report(kind, &finite_difference_hessian(&c, &x), Some(*g));
                r.evaluated_at = Some(x.to_vec());
                r.note = Some("finite-difference Hessian at p = (1/2, 1/2)".into());
                r
            }
            Err(e) => failed(kind, e.to_string()),
        },
    }
}
