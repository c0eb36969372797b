//! Penalty norms: evaluation, proximal maps, duals, residual norms, gauges
//! and allowed sets.

mod cone;
mod index_set;
mod pav;
mod slope;
mod spec;

pub use index_set::IndexSet;
pub use spec::{NormKind, NormSpec};

use crate::error::{check_finite, check_len, Error, Result};

/// A dual-norm value; `approximate` is set when it comes from a numerical
/// search rather than a closed form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualValue {
    pub value: f64,
    pub approximate: bool,
}

impl DualValue {
    fn exact(value: f64) -> Self {
        DualValue { value, approximate: false }
    }

    fn max(self, other: DualValue) -> Self {
        DualValue {
            value: self.value.max(other.value),
            approximate: self.approximate || other.approximate,
        }
    }
}

impl NormSpec {
    /// `Ω(β)`.
    pub fn evaluate(&self, beta: &[f64]) -> Result<f64> {
        check_len(beta.len(), self.dim(), "norm argument")?;
        check_finite(beta, "norm argument")?;
        Ok(self.value(beta))
    }

    pub(crate) fn value(&self, beta: &[f64]) -> f64 {
        match self.kind() {
            NormKind::L1 => beta.iter().zip(self.weights()).map(|(b, w)| w * b.abs()).sum(),
            NormKind::Slope => slope::value(beta, self.weights()),
            NormKind::GroupLasso => self
                .groups()
                .iter()
                .zip(self.weights())
                .map(|(g, w)| w * group_l2(beta, g))
                .sum(),
            NormKind::Wedge => pav::wedge_from_squares(&beta.iter().map(|b| b * b).collect::<Vec<_>>()),
            NormKind::GroupWedge => {
                let sq: Vec<f64> = self
                    .groups()
                    .iter()
                    .map(|g| g.len() as f64 * g.iter().map(|&i| beta[i] * beta[i]).sum::<f64>())
                    .collect();
                pav::wedge_from_squares(&sq)
            }
            NormKind::Lorentz | NormKind::GeneralizedLorentz => {
                cone::variational_value(beta, &self.protected_mask())
            }
        }
    }

    /// `argmin_β ½‖β − v‖² + t·Ω(β)`.
    pub fn prox(&self, v: &[f64], t: f64) -> Result<Vec<f64>> {
        check_len(v.len(), self.dim(), "prox argument")?;
        check_finite(v, "prox argument")?;
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::invalid(format!("prox step must be positive, got {t}")));
        }
        Ok(self.prox_unchecked(v, t))
    }

    pub(crate) fn prox_unchecked(&self, v: &[f64], t: f64) -> Vec<f64> {
        match self.kind() {
            NormKind::L1 => v
                .iter()
                .zip(self.weights())
                .map(|(&x, &w)| soft(x, t * w))
                .collect(),
            NormKind::Slope => slope::prox(v, t, self.weights()),
            NormKind::GroupLasso => {
                let mut out = v.to_vec();
                for (g, &w) in self.groups().iter().zip(self.weights()) {
                    let norm = group_l2(v, g);
                    let shrink = if norm > 0.0 { (1.0 - t * w / norm).max(0.0) } else { 0.0 };
                    for &i in g {
                        out[i] *= shrink;
                    }
                }
                out
            }
            NormKind::Wedge => {
                let m2: Vec<f64> = v.iter().map(|x| x * x).collect();
                let a = pav::pav_shifted(&m2, &vec![t; v.len()]);
                v.iter().zip(&a).map(|(&x, &ai)| x * ai / (ai + t)).collect()
            }
            NormKind::GroupWedge => {
                let groups = self.groups();
                let m2: Vec<f64> = groups
                    .iter()
                    .map(|g| g.len() as f64 * g.iter().map(|&i| v[i] * v[i]).sum::<f64>())
                    .collect();
                let tau: Vec<f64> = groups.iter().map(|g| t * g.len() as f64).collect();
                let a = pav::pav_shifted(&m2, &tau);
                let mut out = v.to_vec();
                for ((g, &ag), &tg) in groups.iter().zip(&a).zip(&tau) {
                    let shrink = ag / (ag + tg);
                    for &i in g {
                        out[i] *= shrink;
                    }
                }
                out
            }
            NormKind::Lorentz | NormKind::GeneralizedLorentz => {
                cone::variational_prox(v, t, &self.protected_mask())
            }
        }
    }

    /// `Ω*(z) = sup_{Ω(β) ≤ 1} zᵀβ`.
    pub fn dual(&self, z: &[f64]) -> Result<DualValue> {
        check_len(z.len(), self.dim(), "dual argument")?;
        check_finite(z, "dual argument")?;
        Ok(self.dual_unchecked(z))
    }

    pub fn has_closed_form_dual(&self) -> bool {
        !self.kind().is_variational()
    }

    pub(crate) fn dual_unchecked(&self, z: &[f64]) -> DualValue {
        match self.kind() {
            NormKind::L1 => DualValue::exact(
                z.iter()
                    .zip(self.weights())
                    .fold(0.0f64, |m, (x, w)| m.max(x.abs() / w)),
            ),
            NormKind::Slope => DualValue::exact(slope::dual(z, self.weights())),
            NormKind::GroupLasso => DualValue::exact(
                self.groups()
                    .iter()
                    .zip(self.weights())
                    .fold(0.0f64, |m, (g, w)| m.max(group_l2(z, g) / w)),
            ),
            NormKind::Wedge => variational_dual(z, |w| {
                let mut x = w.to_vec();
                pav::project_decreasing_nonneg(&mut x);
                x.iter().all(|&v| v == 0.0)
            }),
            NormKind::GroupWedge => {
                let u: Vec<f64> = self
                    .groups()
                    .iter()
                    .map(|g| group_l2(z, g) / (g.len() as f64).sqrt())
                    .collect();
                variational_dual(&u, |w| {
                    let mut x = w.to_vec();
                    pav::project_decreasing_nonneg(&mut x);
                    x.iter().all(|&v| v == 0.0)
                })
            }
            NormKind::Lorentz | NormKind::GeneralizedLorentz => {
                let mask = self.protected_mask();
                variational_dual(z, |w| cone::projects_to_origin(w, &mask))
            }
        }
    }

    /// Whether `Ω` is weakly decomposable for `S` in the sense used here.
    pub fn is_allowed(&self, s: &IndexSet) -> bool {
        if s.dim() != self.dim() {
            return false;
        }
        match self.kind() {
            NormKind::L1 | NormKind::Slope => true,
            NormKind::GroupLasso => self.groups().iter().all(|g| group_state(s, g).is_some()),
            NormKind::GroupWedge => self.active_group_prefix(s).is_some(),
            NormKind::Wedge => s.indices().iter().enumerate().all(|(i, &j)| i == j),
            NormKind::Lorentz | NormKind::GeneralizedLorentz => {
                self.protected().iter().all(|&j| s.contains(j))
            }
        }
    }

    /// Number of leading groups making up `S`, if `S` is such a prefix.
    fn active_group_prefix(&self, s: &IndexSet) -> Option<usize> {
        let mut count = 0;
        let mut closed = false;
        for g in self.groups() {
            match group_state(s, g)? {
                true if closed => return None,
                true => count += 1,
                false => closed = true,
            }
        }
        Some(count)
    }

    fn require_allowed(&self, s: &IndexSet) -> Result<()> {
        check_len(s.dim(), self.dim(), "index set dimension")?;
        if self.is_allowed(s) {
            Ok(())
        } else {
            Err(Error::NotAllowed {
                set: s.indices().to_vec(),
                norm: self.kind().name(),
            })
        }
    }

    /// The companion norm `Ω^{S^c}` on the `|S^c|` complement coordinates
    /// (in increasing order), or `None` when `S` is everything.
    pub fn residual_spec(&self, s: &IndexSet) -> Result<Option<NormSpec>> {
        self.require_allowed(s)?;
        let comp = s.complement();
        let q = comp.len();
        if q == 0 {
            return Ok(None);
        }
        let spec = match self.kind() {
            NormKind::L1 => NormSpec::weighted_l1(comp.gather(self.weights()))?,
            NormKind::Slope => NormSpec::slope(self.weights()[s.len()..].to_vec())?,
            NormKind::GroupLasso => {
                let (groups, weights) = self.complement_groups(&comp);
                NormSpec::weighted_group_lasso(groups, weights, q)?
            }
            NormKind::Wedge => NormSpec::wedge(q)?,
            NormKind::GroupWedge => NormSpec::group_wedge(self.complement_groups(&comp).0, q)?,
            NormKind::Lorentz | NormKind::GeneralizedLorentz => NormSpec::l1(q)?,
        };
        Ok(Some(spec))
    }

    /// Groups lying entirely in `comp`, reindexed to positions within it.
    fn complement_groups(&self, comp: &IndexSet) -> (Vec<Vec<usize>>, Vec<f64>) {
        let mut pos = vec![usize::MAX; self.dim()];
        for (k, &j) in comp.indices().iter().enumerate() {
            pos[j] = k;
        }
        let mut groups = Vec::new();
        let mut weights = Vec::new();
        for (gi, g) in self.groups().iter().enumerate() {
            if pos[g[0]] != usize::MAX {
                groups.push(g.iter().map(|&i| pos[i]).collect());
                weights.push(self.weights().get(gi).copied().unwrap_or(1.0));
            }
        }
        (groups, weights)
    }

    /// `Ω^{S^c}(β_{S^c})` with `beta_sc` listed in increasing coordinate order.
    pub fn residual_norm(&self, s: &IndexSet, beta_sc: &[f64]) -> Result<f64> {
        let spec = self.residual_spec(s)?;
        check_len(beta_sc.len(), s.dim() - s.len(), "residual argument")?;
        match spec {
            Some(r) => r.evaluate(beta_sc),
            None => Ok(0.0),
        }
    }

    /// `Υ_S(β) = Ω(β_S) + Ω^{S^c}(β_{S^c})`.
    pub fn upsilon(&self, s: &IndexSet, beta: &[f64]) -> Result<f64> {
        check_len(beta.len(), self.dim(), "upsilon argument")?;
        check_finite(beta, "upsilon argument")?;
        let head = self.value(&s.restrict(beta));
        let tail = self.residual_norm(s, &s.complement().gather(beta))?;
        Ok(head + tail)
    }

    /// `Υ_S*(z) = max(Ω*(z_S), (Ω^{S^c})*(z_{S^c}))`.
    pub fn upsilon_dual(&self, s: &IndexSet, z: &[f64]) -> Result<DualValue> {
        check_len(z.len(), self.dim(), "upsilon dual argument")?;
        check_finite(z, "upsilon dual argument")?;
        let head = self.dual_unchecked(&s.restrict(z));
        Ok(match self.residual_spec(s)? {
            Some(r) => head.max(r.dual_unchecked(&s.complement().gather(z))),
            None => head,
        })
    }

    /// The gauge `g` lower-bounding every `Υ_S`.
    pub fn gauge(&self) -> NormSpec {
        let p = self.dim();
        let built = match self.kind() {
            NormKind::L1 | NormKind::GroupLasso => Ok(self.clone()),
            NormKind::Slope => NormSpec::weighted_l1(vec![self.weights()[p - 1]; p]),
            NormKind::Wedge | NormKind::Lorentz | NormKind::GeneralizedLorentz => NormSpec::l1(p),
            NormKind::GroupWedge => {
                let w = self.groups().iter().map(|g| (g.len() as f64).sqrt()).collect();
                NormSpec::weighted_group_lasso(self.groups().to_vec(), w, p)
            }
        };
        built.expect("gauge of a valid norm is valid")
    }

    /// Constant `C` with `Ω(β_{S^c}) ≤ C·Ω^{S^c}(β_{S^c})`.
    pub fn c_constant(&self, s: &IndexSet) -> Result<f64> {
        self.require_allowed(s)?;
        let w = self.weights();
        Ok(match self.kind() {
            NormKind::L1 | NormKind::GroupLasso => 1.0,
            NormKind::Slope => w[0] / w[w.len() - 1],
            NormKind::Wedge => ((s.len() + 1) as f64).sqrt(),
            NormKind::GroupWedge => {
                let active = self.active_group_prefix(s).unwrap_or(0);
                ((active + 1) as f64).sqrt()
            }
            NormKind::Lorentz => 1.5,
            NormKind::GeneralizedLorentz => (self.protected().len() as f64 + 2.0) / 2.0,
        })
    }
}

fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

fn group_l2(x: &[f64], g: &[usize]) -> f64 {
    g.iter().map(|&i| x[i] * x[i]).sum::<f64>().sqrt()
}

/// `Some(true)` if the group lies in `s`, `Some(false)` if disjoint from it.
fn group_state(s: &IndexSet, g: &[usize]) -> Option<bool> {
    let inside = g.iter().filter(|&&i| s.contains(i)).count();
    match inside {
        0 => Some(false),
        k if k == g.len() => Some(true),
        _ => None,
    }
}

/// Dual of a variational norm `min_{a∈K} ½Σ(β²/a + a)`: `Ω*(z) ≤ t` exactly
/// when `z²/t² − 1` projects onto the origin of `K`, so the smallest such
/// `t` is located by bisection on `[0, ‖z‖∞]`.
fn variational_dual<F>(z: &[f64], polar_test: F) -> DualValue
where
    F: Fn(&[f64]) -> bool,
{
    let hi0 = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if hi0 == 0.0 {
        return DualValue { value: 0.0, approximate: true };
    }
    let inside = |t: f64| {
        let w: Vec<f64> = z.iter().map(|v| (v / t).powi(2) - 1.0).collect();
        polar_test(&w)
    };
    let (mut lo, mut hi) = (0.0, hi0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if inside(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    DualValue { value: hi, approximate: true }
}
