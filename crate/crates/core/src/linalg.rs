//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;
pub type Chol = Cholesky<f64, Dyn>;

/// Replaces `m` by `(m + mᵀ)/2`.
pub fn symmetrize(m: &mut Matrix) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Lower Cholesky factor of a symmetric matrix. Failure of the factorization is
/// the positive-definiteness test; the error carries the smallest pivot seen.
pub fn cholesky(m: Matrix, name: &'static str) -> Result<Chol> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite {
            matrix: name,
            pivot: f64::NAN,
        });
    }
    match Cholesky::new(m.clone()) {
        Some(c) => Ok(c),
        None => Err(Error::NotPositiveDefinite {
            matrix: name,
            pivot: smallest_pivot(&m),
        }),
    }
}

fn smallest_pivot(m: &Matrix) -> f64 {
    let n = m.nrows();
    let mut l = Matrix::zeros(n, n);
    let mut min_pivot = f64::INFINITY;
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        min_pivot = min_pivot.min(d);
        if d <= 0.0 {
            break;
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    min_pivot
}

/// Inverse of an SPD matrix from its Cholesky factor, symmetrized.
pub fn spd_inverse(chol: &Chol) -> Matrix {
    let mut inv = chol.inverse();
    symmetrize(&mut inv);
    inv
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &Matrix) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_eigenvalue(m: &Matrix) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(0.0)
}

pub fn max_eigenvalue(m: &Matrix) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(0.0)
}

/// Principal square root of a symmetric positive semidefinite matrix.
/// Negative round-off eigenvalues are clamped at zero.
pub fn sym_sqrt(m: &Matrix) -> Matrix {
    let eig = SymmetricEigen::new(m.clone());
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * Matrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// Singular values, descending.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn largest_singular_value(m: &Matrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Numerical rank with cutoff `scale · s_max · ε`.
pub fn numerical_rank_with(m: &Matrix, scale: f64) -> usize {
    let sv = singular_values(m);
    let Some(&smax) = sv.first() else { return 0 };
    let cutoff = scale * smax * f64::EPSILON;
    sv.iter().filter(|&&s| s > cutoff).count()
}

/// Numerical rank with the usual `max(rows, cols) · s_max · ε` cutoff.
pub fn numerical_rank(m: &Matrix) -> usize {
    numerical_rank_with(m, m.nrows().max(m.ncols()) as f64)
}

pub fn frobenius_sq(m: &Matrix) -> f64 {
    m.iter().map(|v| v * v).sum()
}

/// Spectral norm of a symmetric matrix.
pub fn sym_spectral_norm(m: &Matrix) -> f64 {
    let ev = sym_eigenvalues(m);
    ev.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}
