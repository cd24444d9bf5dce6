//! Small dense linear algebra on top of nalgebra.
//!
//! Solves go through an explicit partial-pivot LU so that singularity is
//! judged against a fixed relative pivot threshold.

use nalgebra::{DMatrix, DVector};

use crate::error::{NetPriceError, Result};

pub const PIVOT_REL_TOL: f64 = 1e-12;

/// LU factors with row permutation, `P A = L U` packed in one matrix.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: DMatrix<f64>,
    perm: Vec<usize>,
}

impl Lu {
    pub fn new(a: &DMatrix<f64>, context: &str) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(NetPriceError::ShapeMismatch {
                expected: "square matrix".into(),
                got: format!("{}x{}", a.nrows(), a.ncols()),
            });
        }
        let scale = a.amax();
        let threshold = PIVOT_REL_TOL * scale;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut piv = k;
            for i in k + 1..n {
                if lu[(i, k)].abs() > lu[(piv, k)].abs() {
                    piv = i;
                }
            }
            let pivot = lu[(piv, k)];
            if scale == 0.0 || pivot.abs() < threshold || !pivot.is_finite() {
                return Err(NetPriceError::SingularMatrix {
                    context: context.to_string(),
                    pivot: pivot.abs(),
                    threshold,
                });
            }
            if piv != k {
                lu.swap_rows(piv, k);
                perm.swap(piv, k);
            }
            for i in k + 1..n {
                let l = lu[(i, k)] / lu[(k, k)];
                lu[(i, k)] = l;
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= l * u;
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.lu.nrows();
        let mut x = DVector::from_fn(n, |i, _| b[self.perm[i]]);
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[(i, j)] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[(i, j)] * x[j];
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(b.nrows(), b.ncols());
        for c in 0..b.ncols() {
            let col = self.solve(&b.column(c).into_owned());
            out.set_column(c, &col);
        }
        out
    }
}

pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>, context: &str) -> Result<DVector<f64>> {
    Ok(Lu::new(a, context)?.solve(b))
}

pub fn ones(n: usize) -> DVector<f64> {
    DVector::from_element(n, 1.0)
}

/// Largest eigenvalue of the symmetric part `(M + Mᵀ)/2`.
pub fn max_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    min_max_sym(m).1
}

/// Smallest eigenvalue of the symmetric part `(M + Mᵀ)/2`.
pub fn min_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    min_max_sym(m).0
}

fn min_max_sym(m: &DMatrix<f64>) -> (f64, f64) {
    if m.nrows() == 0 {
        return (0.0, 0.0);
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    (m - m.transpose()).amax() <= tol
}
