use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::fista::{self, Penalty};
use super::{Dataset, SolverOptions};
use crate::error::{check_len, Error, Result};
use crate::linalg::max_eig_gram;
use crate::norms::NormSpec;

/// Solution of `min_β ‖Y − Xβ‖²/n + λ·Ω(β)` with optimality diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenalizedFit {
    pub beta_hat: Vec<f64>,
    pub lambda: f64,
    /// Objective after every accepted iteration (non-increasing).
    pub objective_trace: Vec<f64>,
    /// `Ω*(Ẑ) − 1` clipped at zero when the dual has a closed form, the
    /// relative duality gap otherwise.
    pub kkt_gap: f64,
    /// `Ω*(Ẑ)` with `Ẑ = 2Xᵀ(Y − Xβ̂)/(nλ)`.
    pub dual_norm: f64,
    pub dual_approximate: bool,
    /// `|Ẑᵀβ̂ − Ω(β̂)|`.
    pub complementarity: f64,
    /// `(P − D)/P` for the dual point obtained by rescaling the residual.
    pub duality_gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl PenalizedFit {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace is never empty")
    }

    pub fn residual(&self, data: &Dataset) -> DVector<f64> {
        data.y() - data.x() * DVector::from_column_slice(&self.beta_hat)
    }

    /// `Ẑ = 2Xᵀ(Y − Xβ̂)/(nλ)`.
    pub fn z_hat(&self, data: &Dataset) -> Vec<f64> {
        let scale = 2.0 / (data.n() as f64 * self.lambda);
        (data.x().tr_mul(&self.residual(data)) * scale).as_slice().to_vec()
    }

    /// Number of coordinates with `|β̂_j| > threshold`.
    pub fn support_size(&self, threshold: f64) -> usize {
        self.beta_hat.iter().filter(|b| b.abs() > threshold).count()
    }
}

/// Fits the penalized least-squares estimator from zero.
pub fn fit_penalized(data: &Dataset, norm: &NormSpec, lambda: f64, opts: &SolverOptions) -> Result<PenalizedFit> {
    fit_penalized_from(data, norm, lambda, opts, None)
}

/// As [`fit_penalized`], optionally warm-started.
pub fn fit_penalized_from(
    data: &Dataset,
    norm: &NormSpec,
    lambda: f64,
    opts: &SolverOptions,
    start: Option<&[f64]>,
) -> Result<PenalizedFit> {
    check_len(norm.dim(), data.p(), "norm dimension vs design columns")?;
    check_lambda(lambda)?;
    opts.validate()?;
    let lip = lipschitz(data.x());
    Ok(solve(data.x(), data.y(), norm, lambda, lip, start, opts))
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("penalty level must be positive, got {lambda}")))
    }
}

/// `2λ_max(XᵀX)/n`, padded against power-iteration underestimation.
pub(crate) fn lipschitz(x: &DMatrix<f64>) -> f64 {
    2.0 * 1.01 * max_eig_gram(x) / x.nrows() as f64
}

pub(crate) fn solve<P: Penalty>(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    pen: &P,
    lambda: f64,
    lip: f64,
    start: Option<&[f64]>,
    opts: &SolverOptions,
) -> PenalizedFit {
    let p = x.ncols();
    let zeros = vec![0.0; p];
    let run = fista::run(x, y, pen, lambda, lip, start.unwrap_or(&zeros), opts);
    let n = x.nrows() as f64;

    let beta = DVector::from_column_slice(&run.beta);
    let resid = y - x * &beta;
    let z = x.tr_mul(&resid) * (2.0 / (n * lambda));
    let dual = pen.dual(z.as_slice());
    let pen_val = pen.value(&run.beta);
    let complementarity = (z.dot(&beta) - pen_val).abs();

    // dual point s = 2ε̂/n shrunk into {Ω*(Xᵀs) ≤ λ}; D(s) = sᵀY − n‖s‖²/4
    let shrink = if dual.value > 1.0 { 1.0 / dual.value } else { 1.0 };
    let s = &resid * (2.0 / n * shrink);
    let d_val = s.dot(y) - n * s.norm_squared() / 4.0;
    let primal = resid.norm_squared() / n + lambda * pen_val;
    let duality_gap = if primal > 0.0 { ((primal - d_val) / primal).max(0.0) } else { 0.0 };

    let kkt_gap = if dual.approximate {
        duality_gap
    } else {
        (dual.value - 1.0).max(0.0)
    };
    let mut trace = run.trace;
    // keep the trace consistent with the returned point
    if let Some(last) = trace.last_mut() {
        *last = last.min(primal);
    }
    PenalizedFit {
        beta_hat: run.beta,
        lambda,
        objective_trace: trace,
        kkt_gap,
        dual_norm: dual.value,
        dual_approximate: dual.approximate,
        complementarity,
        duality_gap,
        iterations: run.iterations,
        converged: run.converged,
    }
}
