use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::fista::{ColumnPenalty, Penalty};
use super::penalized::check_lambda;
use super::{Dataset, Framework, SolverOptions};
use crate::error::{Error, Result};
use crate::linalg::{max_eig_gram, nuclear_norm, sym_eigenvalues_nonneg, sym_inv_sqrt};
use crate::norms::{IndexSet, NormSpec};

const SIGMA_FLOOR: f64 = 1e-8;
const GAP_TOL: f64 = 1e-9;
const GAP_EVERY: usize = 25;
const OUTER_TOL: f64 = 1e-8;
const MAX_OUTER: usize = 200;

/// Solution of `min_B ‖X_J − X_{J^c}B‖_nuc + λ_J Σ_k ν(B_k)` for a column
/// norm `ν`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultivariateFit {
    pub j: IndexSet,
    /// `|J^c| × |J|`; rows follow the increasing order of `J^c`.
    #[serde(with = "crate::linalg::row_major")]
    pub gamma: DMatrix<f64>,
    pub lambda_j: f64,
    pub framework: Framework,
    /// `ν`, either on `ℝ^p` (applied to zero-extended columns) or on
    /// `ℝ^{|J^c|}`.
    pub column_norm: NormSpec,
    pub nuclear_residual: f64,
    pub objective: f64,
    /// `max_k ν*(Z_k)` with `Z = X_{J^c}ᵀR(RᵀR)^{-1/2}/λ_J`.
    pub certificate: f64,
    /// `certificate − 1` clipped at zero.
    pub kkt_gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl MultivariateFit {
    /// `R = X_J − X_{J^c}Γ`.
    pub fn residual_matrix(&self, data: &Dataset) -> DMatrix<f64> {
        let (xj, xc) = split_columns(data.x(), &self.j);
        xj - xc * &self.gamma
    }

    /// The column norm of a `|J^c|`-vector.
    pub fn column_norm_value(&self, v: &[f64]) -> f64 {
        column_penalty(&self.column_norm, &self.j)
            .expect("validated at fit time")
            .value(v)
    }
}

pub(crate) fn split_columns(x: &DMatrix<f64>, j: &IndexSet) -> (DMatrix<f64>, DMatrix<f64>) {
    let comp = j.complement();
    (x.select_columns(j.indices()), x.select_columns(comp.indices()))
}

pub(crate) fn column_penalty(norm: &NormSpec, j: &IndexSet) -> Result<ColumnPenalty> {
    ColumnPenalty::new(norm, j).ok_or(Error::DimensionMismatch {
        expected: j.dim() - j.len(),
        got: norm.dim(),
        context: "column norm dimension (p or |J^c|)",
    })
}

fn check_target(data: &Dataset, j: &IndexSet) -> Result<()> {
    if j.dim() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            got: j.dim(),
            context: "index set dimension",
        });
    }
    if j.is_empty() || j.len() == data.p() {
        return Err(Error::invalid("target set J must be a nonempty proper subset"));
    }
    Ok(())
}

/// Root-loss regression of one column on the others,
/// `min_γ ‖x_j − X_{J^c}γ‖₂ + λ_J·g(γ)`, by accelerated proximal gradient
/// with backtracking (the loss is smooth wherever the residual is nonzero).
pub fn fit_sqrt_node(
    data: &Dataset,
    j: &IndexSet,
    g: &NormSpec,
    lambda_j: f64,
    opts: &SolverOptions,
) -> Result<MultivariateFit> {
    check_target(data, j)?;
    if j.len() != 1 {
        return Err(Error::invalid("fit_sqrt_node needs |J| = 1"));
    }
    check_lambda(lambda_j)?;
    opts.validate()?;
    let pen = column_penalty(g, j)?;
    let (xj, xc) = split_columns(data.x(), j);
    let xj = xj.column(0).into_owned();
    if xj.norm() == 0.0 {
        return Err(Error::Degenerate(format!("column {} is identically zero", j.indices()[0])));
    }
    let (gamma, iterations, converged) = root_fista(&xj, &xc, &pen, lambda_j, opts);
    let gamma = DMatrix::from_column_slice(gamma.len(), 1, &gamma);
    finish(data, j, gamma, lambda_j, Framework::Gauge, &pen, iterations, converged)
}

fn root_fista(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    pen: &ColumnPenalty,
    lambda: f64,
    opts: &SolverOptions,
) -> (Vec<f64>, usize, bool) {
    let q = x.ncols();
    let lip_x = max_eig_gram(x);
    let mut beta = DVector::zeros(q);
    if lip_x <= 0.0 {
        return (vec![0.0; q], 0, true);
    }
    let mut rb = y.clone();
    let mut f = rb.norm();
    let mut z = beta.clone();
    let mut rz = rb.clone();
    let mut lip = lip_x / f;
    let mut t = 1.0f64;
    let mut momentum_on = false;
    let mut calm = 0;

    for it in 1..=opts.max_iter {
        let rz_norm = rz.norm();
        if rz_norm <= SIGMA_FLOOR * y.norm() {
            return (beta.as_slice().to_vec(), it, false);
        }
        let grad = x.tr_mul(&rz) * (-1.0 / rz_norm);
        let (nb, rn, loss) = loop {
            let v = &z - &grad / lip;
            let nb = DVector::from_vec(pen.prox(v.as_slice(), lambda / lip));
            let rn = y - x * &nb;
            let loss = rn.norm();
            let d = &nb - &z;
            let model = rz_norm + grad.dot(&d) + 0.5 * lip * d.norm_squared();
            // the Hessian of ‖r‖ is at most XᵀX/‖r‖, so the cap is safe
            // while the residual norm stays above half its current value
            if loss <= model + 1e-12 * rz_norm || (lip >= 4.0 * lip_x / rz_norm && loss >= 0.5 * rz_norm) {
                break (nb, rn, loss);
            }
            lip *= 2.0;
        };
        let nf = loss + lambda * pen.value(nb.as_slice());
        if nf > f {
            if momentum_on {
                z.copy_from(&beta);
                rz.copy_from(&rb);
                t = 1.0;
                momentum_on = false;
                calm = 0;
                continue;
            }
            // a plain step that fails to descend means we sit at rounding level
            let gap = root_gap(y, x, pen, lambda, &rb, f);
            return (beta.as_slice().to_vec(), it, gap <= GAP_TOL.sqrt());
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let mom = (t - 1.0) / t_next;
        z = &nb + (&nb - &beta) * mom;
        rz = &rn + (&rn - &rb) * mom;
        momentum_on = mom > 0.0;
        t = t_next;
        let rel = (f - nf) / f.max(f64::MIN_POSITIVE);
        calm = if rel < opts.tol { calm + 1 } else { 0 };
        beta = nb;
        rb = rn;
        f = nf;
        lip *= 0.95;
        if calm >= opts.patience || it % GAP_EVERY == 0 {
            if root_gap(y, x, pen, lambda, &rb, f) <= GAP_TOL {
                return (beta.as_slice().to_vec(), it, true);
            }
            calm = 0;
        }
    }
    (beta.as_slice().to_vec(), opts.max_iter, false)
}

/// Relative duality gap of the root-loss problem at `γ`, using the dual
/// point `r/(‖r‖·max(1, ν*(X_{J^c}ᵀr/‖r‖)/λ))`.
fn root_gap(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    pen: &ColumnPenalty,
    lambda: f64,
    r: &DVector<f64>,
    primal: f64,
) -> f64 {
    let rn = r.norm();
    if rn == 0.0 {
        return f64::INFINITY;
    }
    let cert = pen.dual(x.tr_mul(r).as_slice()).value / (lambda * rn);
    let dual = y.dot(r) / (rn * cert.max(1.0));
    (primal - dual) / primal.max(f64::MIN_POSITIVE)
}

/// Multivariate root-loss regression of the columns `J` on `J^c` with
/// nuclear-norm loss, via the concomitant form
/// `‖R‖_nuc = min_{V ≻ 0} ½(tr(RᵀRV^{-1}) + tr V)`.
pub fn fit_multivariate(
    data: &Dataset,
    j: &IndexSet,
    colnorm: &NormSpec,
    lambda_j: f64,
    framework: Framework,
    opts: &SolverOptions,
) -> Result<MultivariateFit> {
    check_target(data, j)?;
    check_lambda(lambda_j)?;
    opts.validate()?;
    if data.n() <= j.len() {
        return Err(Error::invalid("need n > |J| for the multivariate regression"));
    }
    let pen = column_penalty(colnorm, j)?;
    let (xj, xc) = split_columns(data.x(), j);
    let k = j.len();
    let q = xc.ncols();
    let lip_x = max_eig_gram(&xc) * 1.01;

    let mut b = DMatrix::<f64>::zeros(q, k);
    let mut prev = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..MAX_OUTER * 5 {
        let r = &xj - &xc * &b;
        let gram = r.tr_mul(&r);
        let ridge = 1e-8 * gram.trace() / k as f64;
        if !(ridge > 0.0) {
            return Err(Error::Degenerate("residual matrix vanished".into()));
        }
        let shifted = &gram + DMatrix::identity(k, k) * ridge;
        let w = sym_inv_sqrt(&shifted, 0.0, "residual Gram")?;
        let low = sym_eigenvalues_nonneg(&shifted).into_iter().fold(f64::INFINITY, f64::min);
        let lip = lip_x / low.max(ridge).sqrt();
        let (nb, its) = weighted_fista(&xj, &xc, &w, &pen, lambda_j, lip, b, opts);
        b = nb;
        iterations += its;
        let obj = nuclear_norm(&(&xj - &xc * &b)) + lambda_j * psi(&pen, &b);
        if (prev - obj).abs() <= 0.01 * OUTER_TOL * obj {
            converged = true;
            break;
        }
        prev = obj;
    }
    finish(data, j, b, lambda_j, framework, &pen, iterations, converged)
}

/// Dispatches to the single-node or multivariate regression with the column
/// norm chosen by `framework`.
pub fn fit_nodewise(
    data: &Dataset,
    j: &IndexSet,
    norm: &NormSpec,
    framework: Framework,
    lambda_j: f64,
    opts: &SolverOptions,
) -> Result<MultivariateFit> {
    let colnorm = framework.column_norm(norm);
    if j.len() == 1 {
        let mut fit = fit_sqrt_node(data, j, &colnorm, lambda_j, opts)?;
        fit.framework = framework;
        Ok(fit)
    } else {
        fit_multivariate(data, j, &colnorm, lambda_j, framework, opts)
    }
}

fn psi(pen: &ColumnPenalty, b: &DMatrix<f64>) -> f64 {
    b.column_iter().map(|c| pen.value(c.as_slice())).sum()
}

/// Proximal gradient on `½tr(RᵀRW) + λ_J Σ_k ν(B_k)` for fixed `W`.
#[allow(clippy::too_many_arguments)]
fn weighted_fista(
    xj: &DMatrix<f64>,
    xc: &DMatrix<f64>,
    w: &DMatrix<f64>,
    pen: &ColumnPenalty,
    lambda_j: f64,
    lip: f64,
    start: DMatrix<f64>,
    opts: &SolverOptions,
) -> (DMatrix<f64>, usize) {
    let smooth = |b: &DMatrix<f64>| {
        let r = xj - xc * b;
        0.5 * (r.tr_mul(&r) * w).trace()
    };
    let objective = |b: &DMatrix<f64>| smooth(b) + lambda_j * psi(pen, b);
    let step = 1.0 / lip;
    let mut b = start;
    let mut f = objective(&b);
    let mut z = b.clone();
    let mut t = 1.0f64;
    let mut momentum_on = false;
    let mut calm = 0;
    let max_inner = opts.max_iter.min(2_000);
    for it in 1..=max_inner {
        let grad = -(xc.tr_mul(&(xj - xc * &z)) * w);
        let v = &z - grad * step;
        let mut nb = v.clone();
        for (mut col, vc) in nb.column_iter_mut().zip(v.column_iter()) {
            let shrunk = pen.prox(vc.as_slice(), lambda_j * step);
            col.copy_from_slice(&shrunk);
        }
        let nf = objective(&nb);
        if nf > f {
            if momentum_on {
                z.copy_from(&b);
                t = 1.0;
                momentum_on = false;
                continue;
            }
            return (b, it);
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let mom = (t - 1.0) / t_next;
        z = &nb + (&nb - &b) * mom;
        momentum_on = mom > 0.0;
        t = t_next;
        let rel = (f - nf) / f.max(f64::MIN_POSITIVE);
        calm = if rel < opts.tol { calm + 1 } else { 0 };
        b = nb;
        f = nf;
        if calm >= opts.patience {
            return (b, it);
        }
    }
    (b, max_inner)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    data: &Dataset,
    j: &IndexSet,
    gamma: DMatrix<f64>,
    lambda_j: f64,
    framework: Framework,
    pen: &ColumnPenalty,
    iterations: usize,
    converged: bool,
) -> Result<MultivariateFit> {
    let (xj, xc) = split_columns(data.x(), j);
    let r = &xj - &xc * &gamma;
    let nuclear_residual = nuclear_norm(&r);
    let objective = nuclear_residual + lambda_j * psi(pen, &gamma);
    let certificate = if nuclear_residual > 0.0 {
        let inv = sym_inv_sqrt(&r.tr_mul(&r), 1e-12, "residual Gram")?;
        let z = xc.tr_mul(&r) * inv / lambda_j;
        z.column_iter()
            .map(|c| pen.dual(c.clone_owned().as_slice()).value)
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    Ok(MultivariateFit {
        j: j.clone(),
        gamma,
        lambda_j,
        framework,
        column_norm: pen.norm().clone(),
        nuclear_residual,
        objective,
        certificate,
        kkt_gap: (certificate - 1.0).max(0.0),
        iterations,
        converged,
    })
}
