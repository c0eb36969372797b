//! Precision-matrix surrogates `T_J`, `Σ̂_J` and the normalisation `M`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{row_major, sym_inv_sqrt};
use crate::norms::{IndexSet, NormSpec};
use crate::solvers::{fit_nodewise, Dataset, Framework, MultivariateFit, SolverOptions};

const EIG_FLOOR: f64 = 1e-12;

/// Per-target-set surrogate built from a nodewise fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecisionFit {
    pub j: IndexSet,
    #[serde(with = "row_major")]
    pub gamma: DMatrix<f64>,
    /// `RᵀX_J/n`.
    #[serde(with = "row_major")]
    pub t_j: DMatrix<f64>,
    /// `RᵀR/n`.
    #[serde(with = "row_major")]
    pub sigma_j: DMatrix<f64>,
    #[serde(with = "row_major")]
    pub sigma_inv_sqrt: DMatrix<f64>,
    /// `√n Σ̂_J^{-1/2} T_J`.
    #[serde(with = "row_major")]
    pub m: DMatrix<f64>,
    pub framework: Framework,
    pub lambda_j: f64,
    pub column_norm: NormSpec,
    /// Dual certificate of the nodewise fit, `max_k ν*(Z_k)`.
    pub certificate: f64,
    pub converged: bool,
    /// `false` when the Ω framework is used on a set that is not allowed for
    /// Ω; the fit is still produced.
    pub allowed: bool,
}

/// Builds `T_J`, `Σ̂_J` and `M` from a fitted nodewise regression.
pub fn build_precision(data: &Dataset, mv: &MultivariateFit) -> Result<PrecisionFit> {
    if mv.j.dim() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            got: mv.j.dim(),
            context: "nodewise fit dimension",
        });
    }
    let n = data.n() as f64;
    let r = mv.residual_matrix(data);
    let xj = data.x().select_columns(mv.j.indices());
    let t_j = r.tr_mul(&xj) / n;
    let sigma_j = r.tr_mul(&r) / n;
    let sigma_inv_sqrt = sym_inv_sqrt(&sigma_j, EIG_FLOOR, "Sigma_J")?;
    let sv = t_j.singular_values();
    let (lo, hi) = sv.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    if !(hi > 0.0) || lo <= EIG_FLOOR * hi {
        return Err(Error::Singular("T_J"));
    }
    let m = &sigma_inv_sqrt * &t_j * n.sqrt();
    Ok(PrecisionFit {
        j: mv.j.clone(),
        gamma: mv.gamma.clone(),
        t_j,
        sigma_j,
        sigma_inv_sqrt,
        m,
        framework: mv.framework,
        lambda_j: mv.lambda_j,
        column_norm: mv.column_norm.clone(),
        certificate: mv.certificate,
        converged: mv.converged,
        allowed: true,
    })
}

/// Fits and builds the surrogate for every pointwise set `{j}`, in order.
pub fn nodewise_sweep(
    data: &Dataset,
    norm: &NormSpec,
    framework: Framework,
    lambda_j: f64,
    opts: &SolverOptions,
) -> Result<Vec<PrecisionFit>> {
    let p = data.p();
    (0..p)
        .into_par_iter()
        .map(|j| {
            let set = IndexSet::single(j, p)?;
            precision_for(data, norm, framework, lambda_j, &set, opts).map_err(|e| Error::AtCoordinate {
                index: j,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Fits the nodewise regression for `j` and builds its surrogate.
pub fn precision_for(
    data: &Dataset,
    norm: &NormSpec,
    framework: Framework,
    lambda_j: f64,
    j: &IndexSet,
    opts: &SolverOptions,
) -> Result<PrecisionFit> {
    let mv = fit_nodewise(data, j, norm, framework, lambda_j, opts)?;
    let mut fit = build_precision(data, &mv)?;
    fit.allowed = framework == Framework::Gauge || norm.is_allowed(j);
    Ok(fit)
}

/// Content-addressed store of nodewise sweeps.
#[derive(Debug, Default)]
pub struct PrecisionCache {
    entries: Mutex<HashMap<[u8; 32], Arc<Vec<PrecisionFit>>>>,
}

impl PrecisionCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Returns the cached sweep for these inputs, computing it on a miss.
    pub fn sweep(
        &self,
        data: &Dataset,
        norm: &NormSpec,
        framework: Framework,
        lambda_j: f64,
        opts: &SolverOptions,
    ) -> Result<Arc<Vec<PrecisionFit>>> {
        let key = cache_key(data, norm, framework, lambda_j, opts);
        if let Some(hit) = self.entries.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let fits = Arc::new(nodewise_sweep(data, norm, framework, lambda_j, opts)?);
        self.entries
            .lock()
            .expect("cache lock")
            .insert(key, Arc::clone(&fits));
        Ok(fits)
    }
}

fn cache_key(data: &Dataset, norm: &NormSpec, framework: Framework, lambda_j: f64, opts: &SolverOptions) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((data.n() as u64).to_le_bytes());
    h.update((data.p() as u64).to_le_bytes());
    for v in data.x().iter() {
        h.update(v.to_le_bytes());
    }
    h.update(serde_json::to_vec(norm).expect("norm serialises"));
    h.update(framework.name().as_bytes());
    h.update(lambda_j.to_le_bytes());
    h.update(serde_json::to_vec(opts).expect("options serialise"));
    h.finalize().into()
}
