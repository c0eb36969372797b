use nalgebra::DMatrix;

use super::rng::CounterRng;
use crate::error::{Error, Result};

/// `Σ_{ij} = ρ^{|i−j|}`.
pub fn toeplitz_covariance(p: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| rho.powi(i.abs_diff(j) as i32))
}

/// `n` i.i.d. rows from `N(0, Σ)` with Toeplitz `Σ`, via the Cholesky
/// factor. Draws are consumed row by row.
pub fn toeplitz_design(n: usize, p: usize, rho: f64, rng: &mut CounterRng) -> Result<DMatrix<f64>> {
    if !(rho > -1.0 && rho < 1.0) {
        return Err(Error::invalid(format!("rho must lie in (-1, 1), got {rho}")));
    }
    let chol = toeplitz_covariance(p, rho)
        .cholesky()
        .expect("Toeplitz covariance with |rho| < 1 is positive definite");
    let mut z = DMatrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            z[(i, j)] = rng.gaussian();
        }
    }
    Ok(z * chol.l().transpose())
}

/// `(4, 4 − 2/(s₀−1), …, 2, 0, …, 0)`.
pub fn make_beta0(p: usize, s0: usize) -> Result<Vec<f64>> {
    if s0 < 2 || s0 > p {
        return Err(Error::invalid(format!("need 2 <= s0 <= p, got s0 = {s0}, p = {p}")));
    }
    let step = 2.0 / (s0 - 1) as f64;
    Ok((0..p)
        .map(|k| if k < s0 { 4.0 - step * k as f64 } else { 0.0 })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta0_sequences() {
        assert_eq!(make_beta0(7, 5).unwrap(), vec![4.0, 3.5, 3.0, 2.5, 2.0, 0.0, 0.0]);
        assert_eq!(make_beta0(3, 2).unwrap(), vec![4.0, 2.0, 0.0]);
        assert!(make_beta0(3, 1).is_err() && make_beta0(3, 4).is_err());
    }

    #[test]
    fn covariance_entries() {
        let s = toeplitz_covariance(4, 0.9);
        assert!((s[(0, 2)] - 0.81).abs() < 1e-15);
        assert_eq!(s[(3, 3)], 1.0);
    }
}
