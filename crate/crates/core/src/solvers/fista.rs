//! Accelerated proximal gradient for `‖y − Xβ‖²/n + λ·P(β)`.

use nalgebra::{DMatrix, DVector};

use super::SolverOptions;
use crate::norms::{DualValue, IndexSet, NormSpec};

/// What the proximal-gradient loop needs from a penalty.
pub(crate) trait Penalty {
    fn value(&self, b: &[f64]) -> f64;
    fn prox(&self, v: &[f64], t: f64) -> Vec<f64>;
    fn dual(&self, z: &[f64]) -> DualValue;
}

impl Penalty for NormSpec {
    fn value(&self, b: &[f64]) -> f64 {
        NormSpec::value(self, b)
    }

    fn prox(&self, v: &[f64], t: f64) -> Vec<f64> {
        self.prox_unchecked(v, t)
    }

    fn dual(&self, z: &[f64]) -> DualValue {
        self.dual_unchecked(z)
    }
}

/// A column norm acting on vectors indexed by `J^c`.
///
/// A norm on `ℝ^p` is applied to the zero-extension; since every supported
/// norm is absolute and monotone, its prox with zero entries on `J` keeps
/// them at zero and its dual is the dual of the zero-extension.
#[derive(Clone, Debug)]
pub(crate) enum ColumnPenalty {
    Direct(NormSpec),
    Embedded { norm: NormSpec, support: IndexSet },
}

impl ColumnPenalty {
    pub(crate) fn new(norm: &NormSpec, j: &IndexSet) -> Option<Self> {
        let comp = j.complement();
        if norm.dim() == j.dim() {
            Some(ColumnPenalty::Embedded {
                norm: norm.clone(),
                support: comp,
            })
        } else if norm.dim() == comp.len() {
            Some(ColumnPenalty::Direct(norm.clone()))
        } else {
            None
        }
    }

    pub(crate) fn norm(&self) -> &NormSpec {
        match self {
            ColumnPenalty::Direct(n) | ColumnPenalty::Embedded { norm: n, .. } => n,
        }
    }
}

impl Penalty for ColumnPenalty {
    fn value(&self, b: &[f64]) -> f64 {
        match self {
            ColumnPenalty::Direct(n) => n.value(b),
            ColumnPenalty::Embedded { norm, support } => norm.value(&support.scatter(b)),
        }
    }

    fn prox(&self, v: &[f64], t: f64) -> Vec<f64> {
        match self {
            ColumnPenalty::Direct(n) => n.prox_unchecked(v, t),
            ColumnPenalty::Embedded { norm, support } => {
                support.gather(&norm.prox_unchecked(&support.scatter(v), t))
            }
        }
    }

    fn dual(&self, z: &[f64]) -> DualValue {
        match self {
            ColumnPenalty::Direct(n) => n.dual_unchecked(z),
            ColumnPenalty::Embedded { norm, support } => norm.dual_unchecked(&support.scatter(z)),
        }
    }
}

/// Relative duality gap required on top of the objective-change test.
const GAP_TOL: f64 = 1e-12;

/// Duality gap of `β` with residual `r = y − Xβ` and objective `f`. The dual
/// point is `r` scaled into the feasible set `Ω*(2Xᵀθ/(nλ)) ≤ 1`.
fn duality_gap<P: Penalty>(x: &DMatrix<f64>, y: &DVector<f64>, pen: &P, lambda: f64, r: &DVector<f64>, f: f64) -> f64 {
    let n = x.nrows() as f64;
    let z = x.tr_mul(r) * (2.0 / (n * lambda));
    let scale = pen.dual(z.as_slice()).value.max(1.0);
    let theta = r / scale;
    let dual = (y.norm_squared() - (y - theta).norm_squared()) / n;
    f - dual
}

pub(crate) struct FistaRun {
    pub beta: Vec<f64>,
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// FISTA with function-value restart. `lip` must bound the Lipschitz
/// constant of the smooth part, `2λ_max(XᵀX)/n`.
pub(crate) fn run<P: Penalty>(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    pen: &P,
    lambda: f64,
    lip: f64,
    start: &[f64],
    opts: &SolverOptions,
) -> FistaRun {
    let n = x.nrows() as f64;
    let p = x.ncols();
    if lip <= 0.0 {
        // X = 0: the penalty alone decides, and β = 0 minimises it
        return FistaRun {
            beta: vec![0.0; p],
            trace: vec![y.norm_squared() / n],
            iterations: 0,
            converged: true,
        };
    }
    let step = 1.0 / lip;
    let mut beta = DVector::from_column_slice(start);
    let mut xb = x * &beta;
    let mut f = (y - &xb).norm_squared() / n + lambda * pen.value(beta.as_slice());
    let mut z = beta.clone();
    let mut xz = xb.clone();
    let mut t = 1.0f64;
    let mut momentum_on = false;
    let mut trace = vec![f];
    let mut calm = 0;
    // the gap is measured against f, floored by a fraction of f(0) so that
    // near-interpolating fits are not held to a tolerance below rounding
    let gap_scale = |f: f64| f.abs().max(1e-2 * y.norm_squared() / n).max(f64::MIN_POSITIVE);

    for it in 1..=opts.max_iter {
        let grad = x.tr_mul(&(y - &xz)) * (-2.0 / n);
        let v = &z - grad * step;
        let nb = DVector::from_vec(pen.prox(v.as_slice(), lambda * step));
        let nxb = x * &nb;
        let nf = (y - &nxb).norm_squared() / n + lambda * pen.value(nb.as_slice());

        if nf > f && opts.restart {
            if momentum_on {
                z.copy_from(&beta);
                xz.copy_from(&xb);
                t = 1.0;
                momentum_on = false;
                calm = 0;
                continue;
            }
            // a plain proximal step cannot increase the objective beyond rounding
            calm += 1;
            if calm >= opts.patience {
                let gap = duality_gap(x, y, pen, lambda, &(y - &xb), f);
                return FistaRun {
                    beta: beta.as_slice().to_vec(),
                    trace,
                    iterations: it,
                    converged: gap <= GAP_TOL.sqrt() * gap_scale(f),
                };
            }
            continue;
        }

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let mom = (t - 1.0) / t_next;
        z = &nb + (&nb - &beta) * mom;
        xz = &nxb + (&nxb - &xb) * mom;
        momentum_on = mom > 0.0;
        t = t_next;

        let rel = (f - nf).abs() / f.abs().max(f64::MIN_POSITIVE);
        calm = if rel < opts.tol { calm + 1 } else { 0 };
        beta = nb;
        xb = nxb;
        f = nf;
        trace.push(f);
        if calm >= opts.patience {
            let gap = duality_gap(x, y, pen, lambda, &(y - &xb), f);
            if gap > GAP_TOL * gap_scale(f) {
                calm = 0;
                continue;
            }
            return FistaRun {
                beta: beta.as_slice().to_vec(),
                trace,
                iterations: it,
                converged: true,
            };
        }
    }
    FistaRun {
        beta: beta.as_slice().to_vec(),
        trace,
        iterations: opts.max_iter,
        converged: false,
    }
}
