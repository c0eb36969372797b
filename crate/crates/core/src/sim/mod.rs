//! Monte-Carlo coverage study on Toeplitz Gaussian designs.
//!
//! A scenario is prepared once (design, truth, noise draws and main fits)
//! and can then be evaluated for several nodewise frameworks and penalty
//! levels without refitting the main estimator.

mod design;
mod output;
mod rng;

use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{
    desparsify_from_score, lambda_m, normal_quantile, remainder_bound, sigma_estimate, SigmaMode,
};
use crate::norms::{IndexSet, NormKind, NormSpec};
use crate::precision::{PrecisionCache, PrecisionFit};
use crate::solvers::{fit_penalized, Dataset, Framework, PenalizedFit, SolverOptions};

pub use design::{make_beta0, toeplitz_covariance, toeplitz_design};
pub use output::{write_comparison_csv, write_outputs, write_sweep_csv, write_sweep_report};
pub use rng::CounterRng;

const DESIGN_STREAM: u64 = 0;
const NOISE_STREAM_BASE: u64 = 1;
const REP_DESIGN_STREAM_BASE: u64 = 1 << 32;

/// Penalty family and parameters; the dimension comes from the scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormChoice {
    pub kind: NormKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protected: Option<Vec<usize>>,
}

impl Default for NormChoice {
    fn default() -> Self {
        NormChoice {
            kind: NormKind::Wedge,
            weights: None,
            groups: None,
            protected: None,
        }
    }
}

impl NormChoice {
    pub fn build(&self, p: usize) -> Result<NormSpec> {
        NormSpec::build(
            self.kind,
            p,
            self.weights.clone(),
            self.groups.clone(),
            self.protected.clone(),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub s0: usize,
    /// Noise repetitions.
    pub r: usize,
    pub alpha: f64,
    pub lambda_main: f64,
    pub lambda_node: f64,
    /// Nodewise level for the Ω framework when comparing; defaults to
    /// `lambda_node`.
    pub lambda_node_omega: Option<f64>,
    pub norm: NormChoice,
    pub framework: Framework,
    pub sigma_mode: SigmaMode,
    /// Noise standard deviation used to generate data; 0 gives noiseless
    /// responses (remainder diagnostics are then skipped).
    pub sigma0: f64,
    pub fixed_design: bool,
    pub seed: u64,
    /// Multipliers applied to the nodewise levels by the sweep.
    pub lambda_grid: Vec<f64>,
    /// Whether `compare` locates the nodewise levels with the sweep.
    pub sweep: bool,
    pub diagnostics: bool,
    pub solver: SolverOptions,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n: 100,
            p: 150,
            rho: 0.9,
            s0: 5,
            r: 100,
            alpha: 0.05,
            lambda_main: 0.5,
            lambda_node: 15.5,
            lambda_node_omega: Some(15.0),
            norm: NormChoice::default(),
            framework: Framework::Gauge,
            sigma_mode: SigmaMode::Known(1.0),
            sigma0: 1.0,
            fixed_design: true,
            seed: 1,
            lambda_grid: vec![0.01, 0.015, 0.02, 0.03, 0.05, 0.075, 0.1, 0.2, 0.5, 1.0],
            sweep: false,
            diagnostics: true,
            solver: SolverOptions::default(),
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid(msg));
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if self.s0 < 2 || self.s0 > self.p {
            return bad(format!("need 2 <= s0 <= p, got s0 = {}, p = {}", self.s0, self.p));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad(format!("rho must lie in (0, 1), got {}", self.rho));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.r == 0 {
            return bad("r must be at least 1".into());
        }
        let levels = [Some(self.lambda_main), Some(self.lambda_node), self.lambda_node_omega];
        if levels.iter().flatten().any(|&l| !(l > 0.0 && l.is_finite())) {
            return bad("penalty levels must be positive".into());
        }
        if self.lambda_grid.is_empty() || self.lambda_grid.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return bad("lambda_grid must hold positive multipliers".into());
        }
        if !(self.sigma0 >= 0.0 && self.sigma0.is_finite()) {
            return bad(format!("sigma0 must be nonnegative, got {}", self.sigma0));
        }
        self.norm.build(self.p)?;
        Ok(())
    }

    fn node_level(&self, framework: Framework) -> f64 {
        match framework {
            Framework::Gauge => self.lambda_node,
            Framework::Omega => self.lambda_node_omega.unwrap_or(self.lambda_node),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordinateSummary {
    pub coordinate: usize,
    /// Repetitions contributing to this coordinate; `coverage` and
    /// `avg_length` are NaN when it is zero.
    pub reps: usize,
    pub coverage: f64,
    pub avg_length: f64,
}

/// One interval from one repetition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub rep: usize,
    pub coordinate: usize,
    pub estimate: f64,
    pub halfwidth: f64,
    pub sigma_hat: f64,
    pub covered: bool,
}

/// Remainder diagnostics of one repetition, maximised over coordinates.
/// The true support stands in for the oracle active set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepDiagnostics {
    pub rep: usize,
    pub lambda_m: f64,
    pub max_remainder: f64,
    pub max_bound_thm1: f64,
    pub max_bound_thm2: f64,
    pub violations_thm1: usize,
    pub max_identity_error: f64,
    pub main_kkt_gap: f64,
    pub main_iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    /// The evaluated configuration (framework and nodewise level filled in).
    pub config: SimulationConfig,
    pub coordinates: Vec<CoordinateSummary>,
    pub mean_coverage_active: f64,
    pub mean_length_active: f64,
    pub mean_coverage_inactive: f64,
    pub mean_length_inactive: f64,
    pub used_reps: usize,
    /// Repetitions excluded because the main fit did not converge or the
    /// noise level could not be estimated.
    pub failed_reps: Vec<usize>,
    /// (repetition, coordinate) cells dropped because the nodewise fit did
    /// not converge.
    pub excluded_cells: usize,
    /// Pointwise sets that are not allowed for Ω under the Ω framework.
    pub not_allowed: usize,
    pub raw: Vec<RawRecord>,
    pub diagnostics: Vec<RepDiagnostics>,
    pub wall_time_secs: f64,
}

impl SimulationResult {
    pub fn framework(&self) -> Framework {
        self.config.framework
    }

    pub fn lambda_node(&self) -> f64 {
        self.config.lambda_node
    }

    pub fn remainder_violations(&self) -> usize {
        self.diagnostics.iter().map(|d| d.violations_thm1).sum()
    }
}

struct Rep {
    index: usize,
    data: Arc<Dataset>,
    eps: Vec<f64>,
    fit: PenalizedFit,
    xt_resid: Vec<f64>,
    sigma_hat: f64,
}

/// Design, truth, noise draws and main fits shared by all evaluations.
pub struct Scenario {
    cfg: SimulationConfig,
    norm: NormSpec,
    beta0: Vec<f64>,
    support: IndexSet,
    reps: Vec<Rep>,
    failed: Vec<usize>,
    cache: PrecisionCache,
    prepare_secs: f64,
}

impl Scenario {
    pub fn prepare(cfg: &SimulationConfig) -> Result<Self> {
        let started = Instant::now();
        cfg.validate()?;
        let norm = cfg.norm.build(cfg.p)?;
        let beta0 = make_beta0(cfg.p, cfg.s0)?;
        let support = IndexSet::prefix(cfg.s0, cfg.p)?;
        let shared = if cfg.fixed_design {
            let mut rng = CounterRng::new(cfg.seed, DESIGN_STREAM);
            Some(toeplitz_design(cfg.n, cfg.p, cfg.rho, &mut rng)?)
        } else {
            None
        };
        let shared = shared.map(|x| Arc::new(Dataset::new(x, DVector::zeros(cfg.n)).expect("finite design")));

        let outcomes: Vec<Result<Option<Rep>>> = (0..cfg.r)
            .into_par_iter()
            .map(|k| {
                let x = match &shared {
                    Some(d) => d.x().clone(),
                    None => {
                        let mut rng = CounterRng::new(cfg.seed, REP_DESIGN_STREAM_BASE + k as u64);
                        toeplitz_design(cfg.n, cfg.p, cfg.rho, &mut rng)?
                    }
                };
                let mut rng = CounterRng::new(cfg.seed, NOISE_STREAM_BASE + k as u64);
                let eps: Vec<f64> = (0..cfg.n).map(|_| cfg.sigma0 * rng.gaussian()).collect();
                let y = &x * DVector::from_column_slice(&beta0) + DVector::from_column_slice(&eps);
                let data = Arc::new(Dataset::new(x, y)?);
                let fit = fit_penalized(&data, &norm, cfg.lambda_main, &cfg.solver)?;
                if !fit.converged {
                    return Ok(None);
                }
                let Ok(sigma_hat) = sigma_estimate(&data, &fit, cfg.sigma_mode) else {
                    return Ok(None);
                };
                let xt_resid = data.x().tr_mul(&fit.residual(&data)).as_slice().to_vec();
                Ok(Some(Rep {
                    index: k,
                    data,
                    eps,
                    fit,
                    xt_resid,
                    sigma_hat,
                }))
            })
            .collect();

        let mut reps = Vec::new();
        let mut failed = Vec::new();
        for (k, out) in outcomes.into_iter().enumerate() {
            match out.map_err(|e| Error::AtCoordinate {
                index: k,
                source: Box::new(e),
            })? {
                Some(rep) => reps.push(rep),
                None => failed.push(k),
            }
        }
        Ok(Scenario {
            cfg: cfg.clone(),
            norm,
            beta0,
            support,
            reps,
            failed,
            cache: PrecisionCache::new(),
            prepare_secs: started.elapsed().as_secs_f64(),
        })
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.cfg
    }

    pub fn beta0(&self) -> &[f64] {
        &self.beta0
    }

    pub fn failed_reps(&self) -> &[usize] {
        &self.failed
    }

    /// Main fits of the repetitions that succeeded, in repetition order.
    pub fn main_fits(&self) -> impl Iterator<Item = (usize, &PenalizedFit)> {
        self.reps.iter().map(|r| (r.index, &r.fit))
    }

    fn sweep_for(&self, data: &Dataset, framework: Framework, lambda_node: f64) -> Result<Arc<Vec<PrecisionFit>>> {
        self.cache
            .sweep(data, &self.norm, framework, lambda_node, &self.cfg.solver)
    }

    /// Coverage and length of the pointwise intervals for one nodewise
    /// framework and level.
    pub fn evaluate(&self, framework: Framework, lambda_node: f64) -> Result<SimulationResult> {
        let started = Instant::now();
        if self.reps.is_empty() {
            return Err(Error::Degenerate(format!(
                "all {} repetitions failed to produce a converged main fit",
                self.cfg.r
            )));
        }
        let cfg = &self.cfg;
        let p = cfg.p;
        let z = normal_quantile(1.0 - cfg.alpha / 2.0)?;
        let fixed = if cfg.fixed_design {
            Some(self.sweep_for(&self.reps[0].data, framework, lambda_node)?)
        } else {
            None
        };

        type RepOut = (Vec<RawRecord>, Option<RepDiagnostics>, usize, usize);
        let per_rep: Vec<Result<RepOut>> = self
            .reps
            .par_iter()
            .map(|rep| {
                let precs = match &fixed {
                    Some(s) => Arc::clone(s),
                    None => self.sweep_for(&rep.data, framework, lambda_node)?,
                };
                let mut raw = Vec::with_capacity(p);
                for prec in precs.iter().filter(|f| f.converged) {
                    let j = prec.j.indices()[0];
                    let b = desparsify_from_score(prec, &rep.fit.beta_hat, &rep.xt_resid, cfg.n)?[0];
                    let half = z * rep.sigma_hat / prec.m[(0, 0)].abs();
                    raw.push(RawRecord {
                        rep: rep.index,
                        coordinate: j,
                        estimate: b,
                        halfwidth: half,
                        sigma_hat: rep.sigma_hat,
                        covered: (b - self.beta0[j]).abs() <= half,
                    });
                }
                let unconverged = precs.iter().filter(|f| !f.converged).count();
                let not_allowed = precs.iter().filter(|f| !f.allowed).count();
                let diag = if cfg.diagnostics && cfg.sigma0 > 0.0 {
                    let ok: Vec<&PrecisionFit> = precs.iter().filter(|f| f.converged).collect();
                    Some(self.diagnose(rep, &ok)?)
                } else {
                    None
                };
                Ok((raw, diag, unconverged, not_allowed))
            })
            .collect();

        let mut raw = Vec::with_capacity(self.reps.len() * p);
        let mut diagnostics = Vec::new();
        let mut excluded_cells = 0;
        let mut not_allowed = 0;
        for out in per_rep {
            let (r, d, u, a) = out?;
            raw.extend(r);
            diagnostics.extend(d);
            excluded_cells += u;
            not_allowed = not_allowed.max(a);
        }

        let mut count = vec![0usize; p];
        let mut cover = vec![0.0; p];
        let mut length = vec![0.0; p];
        for rec in &raw {
            count[rec.coordinate] += 1;
            if rec.covered {
                cover[rec.coordinate] += 1.0;
            }
            length[rec.coordinate] += 2.0 * rec.halfwidth;
        }
        let coordinates: Vec<CoordinateSummary> = (0..p)
            .map(|j| {
                let c = if count[j] == 0 { f64::NAN } else { count[j] as f64 };
                CoordinateSummary {
                    coordinate: j,
                    reps: count[j],
                    coverage: cover[j] / c,
                    avg_length: length[j] / c,
                }
            })
            .collect();
        // coordinates with no contributing repetition are left out
        let mean = |range: std::ops::Range<usize>, f: fn(&CoordinateSummary) -> f64| {
            let vals: Vec<f64> = coordinates[range].iter().filter(|c| c.reps > 0).map(f).collect();
            if vals.is_empty() {
                f64::NAN
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            }
        };
        let mut config = cfg.clone();
        config.framework = framework;
        config.lambda_node = lambda_node;
        config.lambda_node_omega = None;
        Ok(SimulationResult {
            mean_coverage_active: mean(0..cfg.s0, |c| c.coverage),
            mean_length_active: mean(0..cfg.s0, |c| c.avg_length),
            mean_coverage_inactive: mean(cfg.s0..p, |c| c.coverage),
            mean_length_inactive: mean(cfg.s0..p, |c| c.avg_length),
            config,
            coordinates,
            used_reps: self.reps.len(),
            failed_reps: self.failed.clone(),
            excluded_cells,
            not_allowed,
            raw,
            diagnostics,
            wall_time_secs: self.prepare_secs + started.elapsed().as_secs_f64(),
        })
    }

    fn diagnose(&self, rep: &Rep, precs: &[&PrecisionFit]) -> Result<RepDiagnostics> {
        let mut d = RepDiagnostics {
            rep: rep.index,
            lambda_m: lambda_m(&rep.data, &rep.eps, &self.norm, &self.support)?,
            max_remainder: 0.0,
            max_bound_thm1: 0.0,
            max_bound_thm2: 0.0,
            violations_thm1: 0,
            max_identity_error: 0.0,
            main_kkt_gap: rep.fit.kkt_gap,
            main_iterations: rep.fit.iterations,
        };
        for prec in precs {
            let r = remainder_bound(
                &rep.data,
                &rep.fit,
                prec,
                &self.norm,
                &self.beta0,
                self.cfg.sigma0,
                &self.support,
            )?;
            d.max_remainder = d.max_remainder.max(r.actual);
            d.max_bound_thm1 = d.max_bound_thm1.max(r.bound_thm1);
            d.max_bound_thm2 = d.max_bound_thm2.max(r.bound_thm2);
            d.max_identity_error = d.max_identity_error.max(r.identity_error);
            if !r.within_thm1 {
                d.violations_thm1 += 1;
            }
        }
        Ok(d)
    }
}

/// Prepares and evaluates the configured framework and nodewise level.
pub fn run_scenario(cfg: &SimulationConfig) -> Result<SimulationResult> {
    let scenario = Scenario::prepare(cfg)?;
    scenario.evaluate(cfg.framework, cfg.node_level(cfg.framework))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub coordinate: usize,
    pub coverage_gauge: f64,
    pub length_gauge: f64,
    pub coverage_omega: f64,
    pub length_omega: f64,
    /// Ω over gauge.
    pub coverage_ratio: f64,
    pub length_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub gauge: SimulationResult,
    pub omega: SimulationResult,
    pub rows: Vec<ComparisonRow>,
    /// Ratio of the mean active-coordinate lengths, Ω over gauge.
    pub active_length_ratio: f64,
}

impl Comparison {
    fn new(gauge: SimulationResult, omega: SimulationResult) -> Self {
        let rows = gauge
            .coordinates
            .iter()
            .zip(&omega.coordinates)
            .map(|(g, o)| ComparisonRow {
                coordinate: g.coordinate,
                coverage_gauge: g.coverage,
                length_gauge: g.avg_length,
                coverage_omega: o.coverage,
                length_omega: o.avg_length,
                coverage_ratio: o.coverage / g.coverage,
                length_ratio: o.avg_length / g.avg_length,
            })
            .collect();
        let active_length_ratio = omega.mean_length_active / gauge.mean_length_active;
        Comparison {
            gauge,
            omega,
            rows,
            active_length_ratio,
        }
    }
}

/// Runs both frameworks on one shared scenario. The configurations must
/// agree on everything except `framework` and the nodewise levels.
pub fn compare_frameworks(cfg_gauge: &SimulationConfig, cfg_omega: &SimulationConfig) -> Result<Comparison> {
    let strip = |c: &SimulationConfig| {
        let mut c = c.clone();
        c.framework = Framework::Gauge;
        c.lambda_node = 1.0;
        c.lambda_node_omega = None;
        c
    };
    if strip(cfg_gauge) != strip(cfg_omega) {
        return Err(Error::invalid(
            "compared scenarios must differ only in framework and nodewise level",
        ));
    }
    let scenario = Scenario::prepare(cfg_gauge)?;
    let gauge = scenario.evaluate(Framework::Gauge, cfg_gauge.node_level(cfg_gauge.framework))?;
    let omega = scenario.evaluate(Framework::Omega, cfg_omega.node_level(cfg_omega.framework))?;
    Ok(Comparison::new(gauge, omega))
}

/// Summary of one sweep cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub framework: Framework,
    pub multiplier: f64,
    pub lambda_node: f64,
    pub mean_coverage_active: f64,
    pub mean_length_active: f64,
    pub mean_coverage_inactive: f64,
    pub mean_length_inactive: f64,
    pub excluded_cells: usize,
    pub remainder_violations: usize,
}

impl SweepCell {
    fn new(res: &SimulationResult, multiplier: f64) -> Self {
        SweepCell {
            framework: res.framework(),
            multiplier,
            lambda_node: res.lambda_node(),
            mean_coverage_active: res.mean_coverage_active,
            mean_length_active: res.mean_length_active,
            mean_coverage_inactive: res.mean_coverage_inactive,
            mean_length_inactive: res.mean_length_inactive,
            excluded_cells: res.excluded_cells,
            remainder_violations: res.remainder_violations(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub cells: Vec<SweepCell>,
    /// The located pair, evaluated in full.
    pub comparison: Comparison,
}

/// Largest share of excluded (repetition, coordinate) cells for a level to
/// be eligible.
const MAX_EXCLUDED_SHARE: f64 = 0.1;

/// Evaluates both frameworks over `lambda_grid` multipliers of their
/// nodewise levels and locates the pair of levels whose mean
/// active-coordinate coverages agree with each other and with `1 − α`:
/// the pair minimising `|c_g − c_Ω| + |(c_g + c_Ω)/2 − (1 − α)|`, larger
/// levels winning ties. Levels at which more than a tenth of the cells
/// were excluded are only used when no other level is available.
pub fn sweep_and_compare(cfg: &SimulationConfig) -> Result<SweepReport> {
    let scenario = Scenario::prepare(cfg)?;
    let target = 1.0 - cfg.alpha;
    let mut cells = Vec::new();
    let mut runs: Vec<Vec<SimulationResult>> = Vec::new();
    for framework in [Framework::Gauge, Framework::Omega] {
        let base = cfg.node_level(framework);
        let mut results = Vec::new();
        for &m in &cfg.lambda_grid {
            let res = scenario.evaluate(framework, base * m)?;
            cells.push(SweepCell::new(&res, m));
            results.push(res);
        }
        runs.push(eligible(results));
    }
    let mut best: Option<(f64, usize, usize)> = None;
    for (a, g) in runs[0].iter().enumerate() {
        for (b, o) in runs[1].iter().enumerate() {
            let (cg, co) = (g.mean_coverage_active, o.mean_coverage_active);
            let score = (cg - co).abs() + (0.5 * (cg + co) - target).abs();
            if score.is_nan() {
                continue;
            }
            if best.is_none_or(|(s, _, _)| score <= s) {
                best = Some((score, a, b));
            }
        }
    }
    let (_, a, b) = best.ok_or_else(|| Error::Degenerate("no sweep level produced coverage".into()))?;
    let omega = runs[1].swap_remove(b);
    let gauge = runs[0].swap_remove(a);
    Ok(SweepReport {
        cells,
        comparison: Comparison::new(gauge, omega),
    })
}

/// Keeps the levels (in increasing order) with few excluded cells, or all
/// of them if none qualifies.
fn eligible(mut results: Vec<SimulationResult>) -> Vec<SimulationResult> {
    results.sort_by(|x, y| x.lambda_node().total_cmp(&y.lambda_node()));
    let ok = |r: &SimulationResult| {
        let total = (r.used_reps * r.config.p) as f64;
        (r.excluded_cells as f64) <= MAX_EXCLUDED_SHARE * total
    };
    if results.iter().any(ok) {
        results.retain(ok);
    }
    results
}
