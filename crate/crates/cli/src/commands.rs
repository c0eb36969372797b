use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};
use structinfer::format::fmt_num;
use structinfer::inference::{desparsify as desparsify_set, group_region, pointwise_ci, write_regions_csv};
use structinfer::precision::precision_for;
use structinfer::sim::{
    compare_frameworks, run_scenario, sweep_and_compare, write_comparison_csv, write_outputs, write_sweep_report,
    NormChoice, SimulationConfig, SimulationResult,
};
use structinfer::solvers::{fit_penalized, Dataset, Framework, PenalizedFit, SolverOptions};
use structinfer::{DesparsifiedEstimate, IndexSet, NormKind, NormSpec, SigmaMode};

use crate::config::{io_error, load, CliError};
use crate::{DataArgs, NormArgs, NormOp, SimArgs};

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct FitConfig {
    norm: NormChoice,
    lambda: f64,
    #[serde(default)]
    solver: SolverOptions,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct InferConfig {
    norm: NormChoice,
    lambda: f64,
    lambda_node: f64,
    #[serde(default = "default_framework")]
    framework: Framework,
    #[serde(default = "default_sigma")]
    sigma_mode: SigmaMode,
    #[serde(default = "default_alpha")]
    alpha: f64,
    /// Coordinate sets; every single coordinate when absent.
    #[serde(default)]
    sets: Option<Vec<Vec<usize>>>,
    #[serde(default)]
    solver: SolverOptions,
}

fn default_framework() -> Framework {
    Framework::Gauge
}

fn default_sigma() -> SigmaMode {
    SigmaMode::PlugIn
}

fn default_alpha() -> f64 {
    0.05
}

fn read_data(path: &Path) -> Result<Dataset, CliError> {
    Dataset::from_csv_path(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::usage(format!("cannot create {}: {e}", dir.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), value).map_err(|e| CliError::data(e.to_string()))
}

fn main_fit(data: &Dataset, norm: &NormSpec, lambda: f64, opts: &SolverOptions) -> Result<PenalizedFit, CliError> {
    Ok(fit_penalized(data, norm, lambda, opts)?)
}

pub fn fit(a: &DataArgs) -> Result<(), CliError> {
    let cfg: FitConfig = load(&a.common.config, &a.common.overrides)?;
    let data = read_data(&a.data)?;
    let norm = cfg.norm.build(data.p())?;
    let fit = main_fit(&data, &norm, cfg.lambda, &cfg.solver)?;
    prepare_out(&a.common.out)?;
    write_json(&a.common.out.join("fit.json"), &fit)?;
    if !fit.converged {
        return Err(CliError::convergence(format!(
            "main fit stopped after {} iterations without converging",
            fit.iterations
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct EstimateRecord {
    #[serde(flatten)]
    estimate: DesparsifiedEstimate,
    nodewise_certificate: f64,
    nodewise_converged: bool,
    allowed: bool,
}

struct Inference {
    cfg: InferConfig,
    records: Vec<EstimateRecord>,
    main_converged: bool,
}

fn infer(a: &DataArgs) -> Result<Inference, CliError> {
    let cfg: InferConfig = load(&a.common.config, &a.common.overrides)?;
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(CliError::usage(format!("alpha must lie in (0, 1), got {}", cfg.alpha)));
    }
    let data = read_data(&a.data)?;
    let p = data.p();
    let norm = cfg.norm.build(p)?;
    let fit = main_fit(&data, &norm, cfg.lambda, &cfg.solver)?;
    let sets: Vec<IndexSet> = match &cfg.sets {
        Some(sets) => sets
            .iter()
            .map(|s| IndexSet::new(s.clone(), p))
            .collect::<Result<_, _>>()?,
        None => (0..p).map(|j| IndexSet::single(j, p)).collect::<Result<_, _>>()?,
    };
    let mut records = Vec::with_capacity(sets.len());
    for j in &sets {
        let prec = precision_for(&data, &norm, cfg.framework, cfg.lambda_node, j, &cfg.solver)?;
        let estimate = desparsify_set(&data, &fit, &prec, cfg.sigma_mode)?;
        records.push(EstimateRecord {
            estimate,
            nodewise_certificate: prec.certificate,
            nodewise_converged: prec.converged,
            allowed: prec.allowed,
        });
    }
    Ok(Inference {
        cfg,
        records,
        main_converged: fit.converged,
    })
}

fn convergence_status(inf: &Inference) -> Result<(), CliError> {
    if !inf.main_converged {
        return Err(CliError::convergence("main fit did not converge"));
    }
    let bad: Vec<String> = inf
        .records
        .iter()
        .filter(|r| !r.nodewise_converged)
        .map(|r| set_id(&r.estimate.j))
        .collect();
    if !bad.is_empty() {
        return Err(CliError::convergence(format!("nodewise fits did not converge for sets {}", bad.join(","))));
    }
    Ok(())
}

fn set_id(j: &IndexSet) -> String {
    let parts: Vec<String> = j.indices().iter().map(|i| i.to_string()).collect();
    parts.join("+")
}

pub fn desparsify(a: &DataArgs) -> Result<(), CliError> {
    let inf = infer(a)?;
    prepare_out(&a.common.out)?;
    write_json(&a.common.out.join("desparsified.json"), &inf.records)?;
    convergence_status(&inf)
}

pub fn ci(a: &DataArgs) -> Result<(), CliError> {
    let inf = infer(a)?;
    let mut regions = Vec::with_capacity(inf.records.len());
    for r in &inf.records {
        let region = if r.estimate.j.len() == 1 {
            pointwise_ci(&r.estimate, inf.cfg.alpha)?
        } else {
            group_region(&r.estimate, inf.cfg.alpha)?
        };
        regions.push((set_id(&r.estimate.j), region));
    }
    prepare_out(&a.common.out)?;
    let path = a.common.out.join("regions.csv");
    let file = File::create(&path).map_err(|e| io_error(&path, e))?;
    write_regions_csv(BufWriter::new(file), &regions).map_err(|e| io_error(&path, e))?;
    convergence_status(&inf)
}

fn sim_config(a: &SimArgs) -> Result<SimulationConfig, CliError> {
    let mut cfg: SimulationConfig = load(&a.common.config, &a.common.overrides)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sim_status(results: &[&SimulationResult]) -> Result<(), CliError> {
    let failed: usize = results.iter().map(|r| r.failed_reps.len()).max().unwrap_or(0);
    if failed > 0 {
        return Err(CliError::convergence(format!(
            "{failed} repetitions dropped because the main fit did not converge"
        )));
    }
    Ok(())
}

fn write_error(dir: &Path, e: std::io::Error) -> CliError {
    io_error(dir, e)
}

pub fn simulate(a: &SimArgs) -> Result<(), CliError> {
    let cfg = sim_config(a)?;
    let res = run_scenario(&cfg)?;
    prepare_out(&a.common.out)?;
    write_outputs(&a.common.out, &[&res]).map_err(|e| write_error(&a.common.out, e))?;
    sim_status(&[&res])
}

pub fn compare(a: &SimArgs) -> Result<(), CliError> {
    let cfg = sim_config(a)?;
    let out = &a.common.out;
    prepare_out(out)?;
    if cfg.sweep {
        let report = sweep_and_compare(&cfg)?;
        write_sweep_report(out, &report).map_err(|e| write_error(out, e))?;
        let c = &report.comparison;
        return sim_status(&[&c.gauge, &c.omega]);
    }
    let gauge = SimulationConfig {
        framework: Framework::Gauge,
        ..cfg.clone()
    };
    let omega = SimulationConfig {
        framework: Framework::Omega,
        lambda_node: cfg.lambda_node_omega.unwrap_or(cfg.lambda_node),
        lambda_node_omega: None,
        ..cfg
    };
    let gauge = SimulationConfig {
        lambda_node_omega: None,
        ..gauge
    };
    let cmp = compare_frameworks(&gauge, &omega)?;
    write_outputs(out, &[&cmp.gauge, &cmp.omega]).map_err(|e| write_error(out, e))?;
    let path = out.join("comparison.csv");
    let file = File::create(&path).map_err(|e| io_error(&path, e))?;
    write_comparison_csv(BufWriter::new(file), &cmp).map_err(|e| io_error(&path, e))?;
    sim_status(&[&cmp.gauge, &cmp.omega])
}

fn parse_list<T: std::str::FromStr>(what: &str, s: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse()
                .map_err(|_| CliError::usage(format!("--{what}: cannot parse {t:?}")))
        })
        .collect()
}

fn parse_kind(s: &str) -> Result<NormKind, CliError> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| CliError::usage(format!("unknown norm kind {s:?}")))
}

pub fn normtool(a: &NormArgs) -> Result<(), CliError> {
    let kind = parse_kind(&a.kind)?;
    let v: Vec<f64> = parse_list("beta", &a.beta)?;
    if v.is_empty() {
        return Err(CliError::usage("--beta must hold at least one value"));
    }
    let weights = a.weights.as_deref().map(|w| parse_list("weights", w)).transpose()?;
    let groups = a
        .groups
        .as_deref()
        .map(|g| g.split(';').map(|grp| parse_list("groups", grp)).collect::<Result<Vec<Vec<usize>>, _>>())
        .transpose()?;
    let protected = a.protected.as_deref().map(|p| parse_list("protected", p)).transpose()?;
    let norm = NormSpec::build(kind, v.len(), weights, groups, protected)?;
    match a.op {
        NormOp::Eval => println!("{}", fmt_num(norm.evaluate(&v)?)),
        NormOp::Prox => {
            let x = norm.prox(&v, a.t)?;
            let parts: Vec<String> = x.iter().map(|&c| fmt_num(c)).collect();
            println!("{}", parts.join(","));
        }
        NormOp::Dual => println!("{}", fmt_num(norm.dual(&v)?.value)),
        NormOp::Gauge => {
            let g = norm.gauge();
            println!("{}", serde_json::to_string(&g).map_err(|e| CliError::data(e.to_string()))?);
        }
    }
    Ok(())
}
