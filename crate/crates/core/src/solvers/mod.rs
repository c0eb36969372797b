//! Penalized least squares and the root-loss nodewise regressions.

mod fista;
mod nodewise;
mod penalized;

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_len, Error, Result};
use crate::norms::NormSpec;

pub use nodewise::{fit_multivariate, fit_nodewise, fit_sqrt_node, MultivariateFit};
pub use penalized::{fit_penalized, fit_penalized_from, PenalizedFit};

pub(crate) use fista::Penalty;
pub(crate) use nodewise::column_penalty;

/// Design matrix and response.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() < 2 {
            return Err(Error::invalid(format!("need at least 2 observations, got {}", x.nrows())));
        }
        if x.ncols() == 0 {
            return Err(Error::invalid("design has no columns"));
        }
        check_len(y.len(), x.nrows(), "response length")?;
        check_finite(x.as_slice(), "design matrix")?;
        check_finite(y.as_slice(), "response")?;
        Ok(Dataset { x, y })
    }

    /// Reads a CSV file with a header naming the response `y` and the
    /// predictors `x1..xp` (any column order).
    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Degenerate(format!("cannot open {}: {e}", path.display())))?;
        Self::from_csv_reader(file)
    }

    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::invalid(format!("bad CSV header: {e}")))?
            .clone();
        let mut y_col = None;
        let mut x_cols: Vec<(usize, usize)> = Vec::new();
        for (c, name) in headers.iter().enumerate() {
            if name == "y" {
                y_col = Some(c);
            } else if let Some(k) = name.strip_prefix('x').and_then(|s| s.parse::<usize>().ok()) {
                x_cols.push((k, c));
            } else {
                return Err(Error::invalid(format!("unexpected CSV column `{name}`")));
            }
        }
        let y_col = y_col.ok_or_else(|| Error::invalid("CSV has no `y` column"))?;
        x_cols.sort_unstable();
        if x_cols.iter().enumerate().any(|(i, &(k, _))| k != i + 1) {
            return Err(Error::invalid("predictor columns must be named x1..xp without gaps"));
        }
        let p = x_cols.len();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::invalid(format!("CSV row {}: {e}", line + 2)))?;
            let parse = |c: usize| -> Result<f64> {
                let field = rec.get(c).unwrap_or("");
                field
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("CSV row {}: cannot parse `{field}`", line + 2)))
            };
            ys.push(parse(y_col)?);
            for &(_, c) in &x_cols {
                xs.push(parse(c)?);
            }
        }
        let n = ys.len();
        Dataset::new(DMatrix::from_row_slice(n, p, &xs), DVector::from_vec(ys))
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Same design with a different response.
    pub fn with_response(&self, y: DVector<f64>) -> Result<Self> {
        check_len(y.len(), self.n(), "response length")?;
        check_finite(y.as_slice(), "response")?;
        Ok(Dataset { x: self.x.clone(), y })
    }
}

/// Iteration controls for the proximal-gradient solvers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Relative objective change regarded as stationary.
    pub tol: f64,
    /// Number of consecutive stationary iterations required to stop.
    pub patience: usize,
    /// Function-value momentum restart.
    pub restart: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iter: 50_000,
            tol: 1e-9,
            patience: 5,
            restart: true,
        }
    }
}

impl SolverOptions {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.max_iter == 0 || !(self.tol > 0.0) || self.patience == 0 {
            return Err(Error::invalid("solver options need max_iter, tol and patience > 0"));
        }
        Ok(())
    }
}

/// Which column norm the nodewise regressions use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Framework {
    /// The gauge `g` of the main penalty.
    Gauge,
    /// The main penalty itself.
    Omega,
}

impl Framework {
    pub fn name(self) -> &'static str {
        match self {
            Framework::Gauge => "gauge",
            Framework::Omega => "omega",
        }
    }

    pub fn column_norm(self, norm: &NormSpec) -> NormSpec {
        match self {
            Framework::Gauge => norm.gauge(),
            Framework::Omega => norm.clone(),
        }
    }
}

impl std::fmt::Display for Framework {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Framework {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gauge" => Ok(Framework::Gauge),
            "omega" => Ok(Framework::Omega),
            _ => Err(Error::invalid(format!("unknown framework `{s}`"))),
        }
    }
}
