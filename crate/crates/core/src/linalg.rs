//! Small dense kernels on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest eigenvalue of `XᵀX` by power iteration on `x`.
pub fn max_eig_gram(x: &DMatrix<f64>) -> f64 {
    let p = x.ncols();
    if p == 0 || x.nrows() == 0 {
        return 0.0;
    }
    // deterministic, non-degenerate start
    let mut v = DVector::from_fn(p, |i, _| 1.0 + 0.1 * ((i * 7919 % 97) as f64) / 97.0);
    v /= v.norm();
    let mut est = 0.0;
    for _ in 0..1000 {
        let w = x.tr_mul(&(x * &v));
        let nw = w.norm();
        if nw == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / nw;
        if (next - est).abs() <= 1e-12 * next.abs() {
            est = next;
            break;
        }
        est = next;
    }
    est
}

/// Symmetric eigendecomposition applied spectrally: returns `U f(Λ) Uᵀ`.
///
/// Eigenvalues below `floor_rel * λ_max` are rejected with [`Error::Singular`].
pub fn sym_spectral(
    a: &DMatrix<f64>,
    floor_rel: f64,
    what: &'static str,
    f: impl Fn(f64) -> f64,
) -> Result<DMatrix<f64>> {
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min <= floor_rel * max {
        return Err(Error::Singular(what));
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// `A^{-1/2}` for a symmetric positive-definite `A`.
pub fn sym_inv_sqrt(a: &DMatrix<f64>, floor_rel: f64, what: &'static str) -> Result<DMatrix<f64>> {
    sym_spectral(a, floor_rel, what, |l| 1.0 / l.sqrt())
}

/// Eigenvalues of a symmetric matrix, clipped at zero.
pub fn sym_eigenvalues_nonneg(a: &DMatrix<f64>) -> Vec<f64> {
    let sym = (a + a.transpose()) * 0.5;
    sym.symmetric_eigenvalues().iter().map(|&l| l.max(0.0)).collect()
}

/// Nuclear norm of `r` computed from the eigenvalues of `rᵀr`.
pub fn nuclear_norm(r: &DMatrix<f64>) -> f64 {
    if r.ncols() == 1 {
        return r.norm();
    }
    sym_eigenvalues_nonneg(&r.tr_mul(r)).iter().map(|l| l.sqrt()).sum()
}

/// Serde adapter writing matrices as row-major nested arrays.
pub mod row_major {
    use nalgebra::DMatrix;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Ok(DMatrix::from_row_slice(rows.len(), ncols, &flat))
    }
}
