//! De-sparsified estimators, confidence regions and remainder diagnostics.

mod diagnostics;
mod quantile;

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::format::fmt_num;
use crate::linalg::row_major;
use crate::norms::IndexSet;
use crate::precision::PrecisionFit;
use crate::solvers::{Dataset, PenalizedFit};

pub use diagnostics::{lambda_m, remainder_bound, RemainderReport};
pub use quantile::{chi2_cdf, chi2_quantile, ks_test, normal_cdf, normal_quantile};

/// Coefficients below this magnitude count as zero when sizing the model.
pub const ACTIVE_THRESHOLD: f64 = 1e-10;

/// How the noise level is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    /// A supplied value of `σ₀`.
    Known(f64),
    /// `‖Y − Xβ̂‖²/(n − ŝ)`.
    PlugIn,
}

impl Default for SigmaMode {
    fn default() -> Self {
        SigmaMode::Known(1.0)
    }
}

/// Noise level estimate.
pub fn sigma_estimate(data: &Dataset, fit: &PenalizedFit, mode: SigmaMode) -> Result<f64> {
    match mode {
        SigmaMode::Known(s) if s > 0.0 && s.is_finite() => Ok(s),
        SigmaMode::Known(s) => Err(Error::invalid(format!("known sigma must be positive, got {s}"))),
        SigmaMode::PlugIn => {
            let s_hat = fit.support_size(ACTIVE_THRESHOLD);
            if s_hat >= data.n() {
                return Err(Error::Degenerate(format!(
                    "{s_hat} active coordinates leave no residual degrees of freedom (n = {})",
                    data.n()
                )));
            }
            let rss = fit.residual(data).norm_squared();
            if rss == 0.0 {
                return Err(Error::Degenerate("zero residual, noise level not identifiable".into()));
            }
            Ok((rss / (data.n() - s_hat) as f64).sqrt())
        }
    }
}

/// `b̂_J = β̂_J + T_J^{-1}Rᵀ(Y − Xβ̂)/n` with its normalisation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesparsifiedEstimate {
    pub j: IndexSet,
    pub b_j: Vec<f64>,
    #[serde(with = "row_major")]
    pub m: DMatrix<f64>,
    pub sigma_hat: f64,
    pub sigma_mode: SigmaMode,
}

pub fn desparsify(
    data: &Dataset,
    fit: &PenalizedFit,
    prec: &PrecisionFit,
    mode: SigmaMode,
) -> Result<DesparsifiedEstimate> {
    check_len(fit.beta_hat.len(), data.p(), "fitted coefficients")?;
    check_len(prec.j.dim(), data.p(), "precision fit dimension")?;
    let sigma_hat = sigma_estimate(data, fit, mode)?;
    let xte = data.x().tr_mul(&fit.residual(data));
    let b_j = desparsify_from_score(prec, &fit.beta_hat, xte.as_slice(), data.n())?;
    Ok(DesparsifiedEstimate {
        j: prec.j.clone(),
        b_j,
        m: prec.m.clone(),
        sigma_hat,
        sigma_mode: mode,
    })
}

/// `Rᵀv` from `Xᵀv`, using `R = X_J − X_{J^c}Γ`.
pub(crate) fn residual_score(prec: &PrecisionFit, xtv: &[f64]) -> DVector<f64> {
    let comp = prec.j.complement();
    let head = DVector::from_vec(prec.j.gather(xtv));
    let tail = DVector::from_vec(comp.gather(xtv));
    head - prec.gamma.tr_mul(&tail)
}

/// De-sparsified coordinates given `Xᵀ(Y − Xβ̂)`.
pub fn desparsify_from_score(prec: &PrecisionFit, beta_hat: &[f64], xt_resid: &[f64], n: usize) -> Result<Vec<f64>> {
    let score = residual_score(prec, xt_resid) / n as f64;
    let step = prec
        .t_j
        .clone()
        .lu()
        .solve(&score)
        .ok_or(Error::Singular("T_J"))?;
    Ok(prec
        .j
        .indices()
        .iter()
        .zip(step.iter())
        .map(|(&k, s)| beta_hat[k] + s)
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    PointwiseInterval,
    GroupEllipsoid,
}

impl RegionKind {
    pub fn name(self) -> &'static str {
        match self {
            RegionKind::PointwiseInterval => "pointwise_interval",
            RegionKind::GroupEllipsoid => "group_ellipsoid",
        }
    }
}

/// Interval `center ± halfwidth`, or ellipsoid
/// `{β_J : ‖M(center − β_J)‖² ≤ σ̂²·threshold}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRegion {
    pub kind: RegionKind,
    pub j: IndexSet,
    pub center: Vec<f64>,
    /// Coverage level `1 − α`.
    pub level: f64,
    pub halfwidth: Option<f64>,
    #[serde(with = "row_major")]
    pub shape: DMatrix<f64>,
    pub threshold: Option<f64>,
    pub sigma_hat: f64,
    /// Per-axis half-widths of the bounding box.
    pub box_halfwidths: Vec<f64>,
}

impl ConfidenceRegion {
    pub fn contains(&self, beta_j: &[f64]) -> bool {
        if beta_j.len() != self.center.len() {
            return false;
        }
        match self.kind {
            RegionKind::PointwiseInterval => {
                (beta_j[0] - self.center[0]).abs() <= self.halfwidth.unwrap_or(0.0)
            }
            RegionKind::GroupEllipsoid => {
                let d = DVector::from_iterator(
                    beta_j.len(),
                    self.center.iter().zip(beta_j).map(|(c, b)| c - b),
                );
                let stat = (&self.shape * d).norm_squared();
                stat <= self.sigma_hat * self.sigma_hat * self.threshold.unwrap_or(0.0)
            }
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// `b̂_j ± z_{1−α/2}·σ̂/|M|`.
pub fn pointwise_ci(est: &DesparsifiedEstimate, alpha: f64) -> Result<ConfidenceRegion> {
    check_alpha(alpha)?;
    if est.j.len() != 1 {
        return Err(Error::invalid("pointwise intervals need |J| = 1"));
    }
    let m = est.m[(0, 0)].abs();
    if m == 0.0 || !m.is_finite() {
        return Err(Error::Singular("M"));
    }
    let half = normal_quantile(1.0 - alpha / 2.0)? * est.sigma_hat / m;
    Ok(ConfidenceRegion {
        kind: RegionKind::PointwiseInterval,
        j: est.j.clone(),
        center: est.b_j.clone(),
        level: 1.0 - alpha,
        halfwidth: Some(half),
        shape: est.m.clone(),
        threshold: None,
        sigma_hat: est.sigma_hat,
        box_halfwidths: vec![half],
    })
}

/// The χ²-calibrated ellipsoid for `β⁰_J`.
pub fn group_region(est: &DesparsifiedEstimate, alpha: f64) -> Result<ConfidenceRegion> {
    check_alpha(alpha)?;
    let k = est.j.len();
    if k == 0 {
        return Err(Error::invalid("group regions need a nonempty J"));
    }
    let threshold = chi2_quantile(k, 1.0 - alpha)?;
    let gram_inv = est
        .m
        .tr_mul(&est.m)
        .try_inverse()
        .ok_or(Error::Singular("M"))?;
    let radius = est.sigma_hat * threshold.sqrt();
    let box_halfwidths = (0..k).map(|i| radius * gram_inv[(i, i)].max(0.0).sqrt()).collect();
    Ok(ConfidenceRegion {
        kind: RegionKind::GroupEllipsoid,
        j: est.j.clone(),
        center: est.b_j.clone(),
        level: 1.0 - alpha,
        halfwidth: None,
        shape: est.m.clone(),
        threshold: Some(threshold),
        sigma_hat: est.sigma_hat,
        box_halfwidths,
    })
}

/// Writes regions as CSV rows
/// `set_id,kind,level,coords,center,halfwidth_or_threshold,sigma_hat`;
/// vector fields are `;`-separated.
pub fn write_regions_csv<W: Write>(mut out: W, regions: &[(String, ConfidenceRegion)]) -> std::io::Result<()> {
    writeln!(out, "set_id,kind,level,coords,center,halfwidth_or_threshold,sigma_hat")?;
    for (id, r) in regions {
        let coords: Vec<String> = r.j.indices().iter().map(|i| i.to_string()).collect();
        let center: Vec<String> = r.center.iter().map(|&c| fmt_num(c)).collect();
        let size = r.halfwidth.or(r.threshold).unwrap_or(f64::NAN);
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            id,
            r.kind.name(),
            fmt_num(r.level),
            coords.join(";"),
            center.join(";"),
            fmt_num(size),
            fmt_num(r.sigma_hat)
        )?;
    }
    Ok(())
}
