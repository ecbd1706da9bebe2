//! Small dense helpers shared by the bounds and estimators.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::C64;

/// Largest accepted 2-norm condition number of a matrix that gets inverted,
/// and of the Gram matrix `A^H A` of a projected-out column space.
pub const CONDITION_LIMIT: f64 = 1e12;

/// 2-norm condition number from singular values; infinite when rank deficient.
pub fn condition_number(singular_values: &DVector<f64>) -> f64 {
    let max = singular_values.iter().cloned().fold(0.0, f64::max);
    let min = singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Orthonormal basis of the column space of `a` (thin QR), after checking
/// that `cond(a)^2 = cond(a^H a)` stays under [`CONDITION_LIMIT`].
pub fn orthonormal_basis(a: &DMatrix<C64>, what: &'static str) -> Result<DMatrix<C64>> {
    if a.ncols() == 0 {
        return Ok(DMatrix::zeros(a.nrows(), 0));
    }
    if a.ncols() > a.nrows() {
        return Err(Error::SingularModel {
            what,
            condition: f64::INFINITY,
        });
    }
    let sv = a.clone().svd(false, false).singular_values;
    let cond = condition_number(&sv);
    if !(cond * cond <= CONDITION_LIMIT) {
        return Err(Error::SingularModel {
            what,
            condition: cond * cond,
        });
    }
    Ok(a.clone().qr().q())
}

/// `x - Q (Q^H x)` applied twice, which keeps the result orthogonal to the
/// columns of `q` to working precision.
pub fn project_out(q: &DMatrix<C64>, x: &DMatrix<C64>) -> DMatrix<C64> {
    if q.ncols() == 0 {
        return x.clone();
    }
    let once = x - q * (q.adjoint() * x);
    &once - q * (q.adjoint() * &once)
}

/// Inverse of a real symmetric positive definite matrix through its
/// eigendecomposition. Fails when the condition number exceeds
/// [`CONDITION_LIMIT`] or an eigenvalue is not positive.
pub fn spd_inverse(m: &DMatrix<f64>, what: &'static str) -> Result<DMatrix<f64>> {
    let (inv, _) = spd_inverse_with_condition(m, what)?;
    Ok(inv)
}

/// Same as [`spd_inverse`], also returning the condition number.
pub fn spd_inverse_with_condition(
    m: &DMatrix<f64>,
    what: &'static str,
) -> Result<(DMatrix<f64>, f64)> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{what}: {}x{} is not square",
            m.nrows(),
            m.ncols()
        )));
    }
    if n == 0 {
        return Ok((DMatrix::zeros(0, 0), 1.0));
    }
    let sym = symmetrize(m);
    if sym.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularModel {
            what,
            condition: f64::INFINITY,
        });
    }
    let eig = sym.symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let cond = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(cond <= CONDITION_LIMIT) {
        return Err(Error::SingularModel {
            what,
            condition: cond,
        });
    }
    let v = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l));
    Ok((symmetrize(&(v * d * v.transpose())), cond))
}

/// `(m + m^T) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// `(m + m^H) / 2`.
pub fn hermitianize(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigenvalues and eigenvectors of a Hermitian matrix, sorted by descending
/// eigenvalue.
pub fn hermitian_eigen_descending(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let eig = hermitianize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Largest entry magnitude.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}
