use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Penalty family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    L1,
    Slope,
    GroupLasso,
    Wedge,
    GroupWedge,
    Lorentz,
    GeneralizedLorentz,
}

impl NormKind {
    pub const ALL: [NormKind; 7] = [
        NormKind::L1,
        NormKind::Slope,
        NormKind::GroupLasso,
        NormKind::Wedge,
        NormKind::GroupWedge,
        NormKind::Lorentz,
        NormKind::GeneralizedLorentz,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NormKind::L1 => "l1",
            NormKind::Slope => "slope",
            NormKind::GroupLasso => "group_lasso",
            NormKind::Wedge => "wedge",
            NormKind::GroupWedge => "group_wedge",
            NormKind::Lorentz => "lorentz",
            NormKind::GeneralizedLorentz => "generalized_lorentz",
        }
    }

    /// Norms defined through a cone-constrained variational problem.
    pub fn is_variational(self) -> bool {
        matches!(
            self,
            NormKind::Wedge | NormKind::GroupWedge | NormKind::Lorentz | NormKind::GeneralizedLorentz
        )
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        NormKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::invalid(format!("unknown norm kind `{s}`")))
    }
}

/// A validated description of a penalty norm on `ℝ^p`.
///
/// The meaning of `weights` depends on the kind: per-coordinate weights for
/// `L1` (all ones by default), the non-increasing sorted-ℓ1 sequence for
/// `Slope`, per-group weights for `GroupLasso` (all ones by default). Other
/// kinds carry no weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NormSpecRepr", into = "NormSpecRepr")]
pub struct NormSpec {
    kind: NormKind,
    p: usize,
    weights: Vec<f64>,
    groups: Vec<Vec<usize>>,
    protected: Vec<usize>,
}

impl NormSpec {
    pub fn l1(p: usize) -> Result<Self> {
        Self::build(NormKind::L1, p, None, None, None)
    }

    pub fn weighted_l1(weights: Vec<f64>) -> Result<Self> {
        Self::build(NormKind::L1, weights.len(), Some(weights), None, None)
    }

    pub fn slope(weights: Vec<f64>) -> Result<Self> {
        Self::build(NormKind::Slope, weights.len(), Some(weights), None, None)
    }

    pub fn group_lasso(groups: Vec<Vec<usize>>, p: usize) -> Result<Self> {
        Self::build(NormKind::GroupLasso, p, None, Some(groups), None)
    }

    pub fn weighted_group_lasso(groups: Vec<Vec<usize>>, weights: Vec<f64>, p: usize) -> Result<Self> {
        Self::build(NormKind::GroupLasso, p, Some(weights), Some(groups), None)
    }

    pub fn wedge(p: usize) -> Result<Self> {
        Self::build(NormKind::Wedge, p, None, None, None)
    }

    pub fn group_wedge(groups: Vec<Vec<usize>>, p: usize) -> Result<Self> {
        Self::build(NormKind::GroupWedge, p, None, Some(groups), None)
    }

    /// Lorentz norm; the cone apex coordinate is the last one, `p - 1`.
    pub fn lorentz(p: usize) -> Result<Self> {
        Self::build(NormKind::Lorentz, p, None, None, None)
    }

    pub fn generalized_lorentz(p: usize, protected: Vec<usize>) -> Result<Self> {
        Self::build(NormKind::GeneralizedLorentz, p, None, None, Some(protected))
    }

    /// Builds a norm of the given kind, filling absent fields with their
    /// per-kind defaults and validating everything else.
    pub fn build(
        kind: NormKind,
        p: usize,
        weights: Option<Vec<f64>>,
        groups: Option<Vec<Vec<usize>>>,
        protected: Option<Vec<usize>>,
    ) -> Result<Self> {
        if p == 0 {
            return Err(Error::invalid("norm dimension must be positive"));
        }
        let reject = |what: &str| Err(Error::invalid(format!("`{what}` is not used by the {kind} norm")));

        let groups = match (kind, groups) {
            (NormKind::GroupLasso | NormKind::GroupWedge, Some(g)) => {
                validate_partition(&g, p)?;
                g
            }
            (NormKind::GroupLasso | NormKind::GroupWedge, None) => {
                return Err(Error::invalid(format!("the {kind} norm needs `groups`")))
            }
            (_, Some(g)) if !g.is_empty() => return reject("groups"),
            _ => Vec::new(),
        };

        let weights = match (kind, weights) {
            (NormKind::L1, w) => {
                let w = w.unwrap_or_else(|| vec![1.0; p]);
                crate::error::check_len(w.len(), p, "l1 weights")?;
                validate_positive(&w, "l1 weights")?;
                w
            }
            (NormKind::Slope, Some(w)) => {
                crate::error::check_len(w.len(), p, "slope weights")?;
                validate_positive(&w, "slope weights")?;
                if w.windows(2).any(|pair| pair[1] > pair[0]) {
                    return Err(Error::invalid("slope weights must be non-increasing"));
                }
                if w[0] > 1.0 {
                    return Err(Error::invalid("slope weights must satisfy l_1 <= 1"));
                }
                w
            }
            (NormKind::Slope, None) => return Err(Error::invalid("the slope norm needs `weights`")),
            (NormKind::GroupLasso, w) => {
                let w = w.unwrap_or_else(|| vec![1.0; groups.len()]);
                crate::error::check_len(w.len(), groups.len(), "group weights")?;
                validate_positive(&w, "group weights")?;
                w
            }
            (_, Some(w)) if !w.is_empty() => return reject("weights"),
            _ => Vec::new(),
        };

        let protected = match (kind, protected) {
            (NormKind::Lorentz, None) => vec![p - 1],
            (NormKind::Lorentz, Some(pr)) => {
                if pr != [p - 1] {
                    return Err(Error::invalid(
                        "the lorentz norm protects exactly the last coordinate; use generalized_lorentz",
                    ));
                }
                pr
            }
            (NormKind::GeneralizedLorentz, Some(mut pr)) => {
                pr.sort_unstable();
                pr.dedup();
                if pr.is_empty() || pr[pr.len() - 1] >= p {
                    return Err(Error::invalid("`protected` must be a nonempty subset of 0..p"));
                }
                pr
            }
            (NormKind::GeneralizedLorentz, None) => {
                return Err(Error::invalid("the generalized_lorentz norm needs `protected`"))
            }
            (_, Some(pr)) if !pr.is_empty() => return reject("protected"),
            _ => Vec::new(),
        };

        Ok(NormSpec {
            kind,
            p,
            weights,
            groups,
            protected,
        })
    }

    pub fn kind(&self) -> NormKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn protected(&self) -> &[usize] {
        &self.protected
    }

    /// Membership mask of the protected coordinates (Lorentz kinds).
    pub(crate) fn protected_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.p];
        for &j in &self.protected {
            mask[j] = true;
        }
        mask
    }
}

fn validate_positive(w: &[f64], what: &'static str) -> Result<()> {
    crate::error::check_finite(w, what)?;
    if w.iter().any(|&x| x <= 0.0) {
        return Err(Error::invalid(format!("{what} must be strictly positive")));
    }
    Ok(())
}

fn validate_partition(groups: &[Vec<usize>], p: usize) -> Result<()> {
    let mut seen = vec![false; p];
    for g in groups {
        if g.is_empty() {
            return Err(Error::invalid("groups must be nonempty"));
        }
        for &i in g {
            if i >= p {
                return Err(Error::invalid(format!("group index {i} out of range for p = {p}")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::invalid(format!("index {i} appears in more than one group")));
            }
        }
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(Error::invalid(format!("groups do not cover index {missing}")));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct NormSpecRepr {
    kind: NormKind,
    p: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    groups: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    protected: Option<Vec<usize>>,
}

impl TryFrom<NormSpecRepr> for NormSpec {
    type Error = Error;

    fn try_from(r: NormSpecRepr) -> Result<Self> {
        NormSpec::build(r.kind, r.p, r.weights, r.groups, r.protected)
    }
}

impl From<NormSpec> for NormSpecRepr {
    fn from(n: NormSpec) -> Self {
        fn some<T>(v: Vec<T>) -> Option<Vec<T>> {
            if v.is_empty() {
                None
            } else {
                Some(v)
            }
        }
        NormSpecRepr {
            kind: n.kind,
            p: n.p,
            weights: some(n.weights),
            groups: some(n.groups),
            protected: some(n.protected),
        }
    }
}
