use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::desparsify_from_score;
use crate::error::{check_finite, check_len, Error, Result};
use crate::norms::{IndexSet, NormSpec};
use crate::precision::PrecisionFit;
use crate::solvers::{column_penalty, Dataset, PenalizedFit, Penalty};

/// Remainder of the normalised pivot against its bounds, for a known truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemainderReport {
    /// `‖rem‖∞` from the decomposition
    /// `M(b̂_J − β⁰_J)/σ₀ = Σ̂_J^{-1/2}Rᵀε/(√n σ₀) + rem`.
    pub actual: f64,
    /// Largest componentwise violation of that identity.
    pub identity_error: f64,
    /// `λ_J·max(1, c)·ν(β̂_{J^c} − β⁰_{J^c})/σ₀` with the nodewise dual
    /// certificate `c` and column norm `ν`.
    pub bound_thm1: f64,
    /// `2λ_J·C_S·max(1, c)·Υ_S(β̂ − β⁰)/σ₀`.
    pub bound_thm2: f64,
    /// `λ_J·max(1, c)·Υ_S(β̂ − β⁰)/σ₀`.
    pub bound_upsilon: f64,
    pub within_thm1: bool,
    pub within_thm2: bool,
}

/// Evaluates the remainder decomposition and its bounds. `s_ref` stands in
/// for the oracle active set and must be allowed for `norm`.
pub fn remainder_bound(
    data: &Dataset,
    fit: &PenalizedFit,
    prec: &PrecisionFit,
    norm: &NormSpec,
    truth: &[f64],
    sigma0: f64,
    s_ref: &IndexSet,
) -> Result<RemainderReport> {
    check_len(truth.len(), data.p(), "true coefficients")?;
    check_finite(truth, "true coefficients")?;
    if !(sigma0 > 0.0) {
        return Err(Error::invalid("sigma0 must be positive"));
    }
    let n = data.n() as f64;
    let x = data.x();
    let comp = prec.j.complement();
    let diff: Vec<f64> = truth.iter().zip(&fit.beta_hat).map(|(t, b)| t - b).collect();
    let diff_c = DVector::from_vec(comp.gather(&diff));

    let xj = x.select_columns(prec.j.indices());
    let xc = x.select_columns(comp.indices());
    let r = &xj - &xc * &prec.gamma;
    let scale = 1.0 / (n.sqrt() * sigma0);
    let rem = &prec.sigma_inv_sqrt * r.tr_mul(&(&xc * &diff_c)) * scale;
    let eps = data.y() - x * DVector::from_column_slice(truth);
    let gauss = &prec.sigma_inv_sqrt * r.tr_mul(&eps) * scale;

    let xt_resid = x.tr_mul(&fit.residual(data));
    let b_j = desparsify_from_score(prec, &fit.beta_hat, xt_resid.as_slice(), data.n())?;
    let centred = DVector::from_iterator(
        b_j.len(),
        b_j.iter().zip(prec.j.indices()).map(|(b, &k)| b - truth[k]),
    );
    let lhs = &prec.m * centred / sigma0;
    let identity_error = (lhs - &gauss - &rem).amax();
    let actual = rem.amax();

    let cert = prec.certificate.max(1.0);
    let nu = column_penalty(&prec.column_norm, &prec.j)?.value(diff_c.as_slice());
    let bound_thm1 = prec.lambda_j * cert * nu / sigma0;
    let neg: Vec<f64> = diff.iter().map(|d| -d).collect();
    let ups = norm.upsilon(s_ref, &neg)?;
    let c = norm.c_constant(s_ref)?;
    let bound_upsilon = prec.lambda_j * cert * ups / sigma0;
    let bound_thm2 = 2.0 * c * bound_upsilon;
    let within = |b: f64| actual <= b * (1.0 + 1e-9) + 1e-12;
    Ok(RemainderReport {
        actual,
        identity_error,
        bound_thm1,
        bound_thm2,
        bound_upsilon,
        within_thm1: within(bound_thm1),
        within_thm2: within(bound_thm2),
    })
}

/// `Υ_S*(Xᵀε)/n`.
pub fn lambda_m(data: &Dataset, eps: &[f64], norm: &NormSpec, s: &IndexSet) -> Result<f64> {
    check_len(eps.len(), data.n(), "noise vector")?;
    check_len(norm.dim(), data.p(), "norm dimension vs design columns")?;
    let xte = data.x().tr_mul(&DVector::from_column_slice(eps));
    Ok(norm.upsilon_dual(s, xte.as_slice())?.value / data.n() as f64)
}
