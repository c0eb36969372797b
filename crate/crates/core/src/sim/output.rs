use std::fs;
use std::io::Write;
use std::path::Path;

use crate::format::fmt_num;

use super::{Comparison, SimulationResult, SweepCell, SweepReport};

fn io_err(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

fn write_results<W: Write>(out: W, results: &[&SimulationResult]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "coordinate", "coverage", "avg_length", "framework", "norm", "lambda_main", "lambda_node", "s0", "seed",
    ])
    .map_err(io_err)?;
    for res in results {
        let c = &res.config;
        for row in &res.coordinates {
            w.write_record([
                row.coordinate.to_string(),
                fmt_num(row.coverage),
                fmt_num(row.avg_length),
                c.framework.name().to_string(),
                c.norm.kind.name().to_string(),
                fmt_num(c.lambda_main),
                fmt_num(c.lambda_node),
                c.s0.to_string(),
                c.seed.to_string(),
            ])
            .map_err(io_err)?;
        }
    }
    w.flush()
}

fn write_raw<W: Write>(out: W, results: &[&SimulationResult]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "framework", "lambda_node", "rep", "coordinate", "estimate", "halfwidth", "covered", "sigma_hat",
    ])
    .map_err(io_err)?;
    for res in results {
        for r in &res.raw {
            w.write_record([
                res.framework().name().to_string(),
                fmt_num(res.lambda_node()),
                r.rep.to_string(),
                r.coordinate.to_string(),
                fmt_num(r.estimate),
                fmt_num(r.halfwidth),
                r.covered.to_string(),
                fmt_num(r.sigma_hat),
            ])
            .map_err(io_err)?;
        }
    }
    w.flush()
}

fn write_diagnostics<W: Write>(out: W, results: &[&SimulationResult]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "framework",
        "lambda_node",
        "rep",
        "lambda_m",
        "max_remainder",
        "max_bound_thm1",
        "max_bound_thm2",
        "violations_thm1",
        "max_identity_error",
        "main_kkt_gap",
        "main_iterations",
        "reference_set",
    ])
    .map_err(io_err)?;
    for res in results {
        for d in &res.diagnostics {
            w.write_record([
                res.framework().name().to_string(),
                fmt_num(res.lambda_node()),
                d.rep.to_string(),
                fmt_num(d.lambda_m),
                fmt_num(d.max_remainder),
                fmt_num(d.max_bound_thm1),
                fmt_num(d.max_bound_thm2),
                d.violations_thm1.to_string(),
                fmt_num(d.max_identity_error),
                fmt_num(d.main_kkt_gap),
                d.main_iterations.to_string(),
                "true_support".to_string(),
            ])
            .map_err(io_err)?;
        }
    }
    w.flush()
}

/// Writes `results.csv`, `raw_log.csv` and `diagnostics.csv` into `dir`,
/// creating it if needed.
pub fn write_outputs(dir: &Path, results: &[&SimulationResult]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    write_results(fs::File::create(dir.join("results.csv"))?, results)?;
    write_raw(fs::File::create(dir.join("raw_log.csv"))?, results)?;
    write_diagnostics(fs::File::create(dir.join("diagnostics.csv"))?, results)
}

pub fn write_comparison_csv<W: Write>(out: W, cmp: &Comparison) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "coordinate",
        "coverage_gauge",
        "length_gauge",
        "coverage_omega",
        "length_omega",
        "coverage_ratio",
        "length_ratio",
    ])
    .map_err(io_err)?;
    for r in &cmp.rows {
        w.write_record([
            r.coordinate.to_string(),
            fmt_num(r.coverage_gauge),
            fmt_num(r.length_gauge),
            fmt_num(r.coverage_omega),
            fmt_num(r.length_omega),
            fmt_num(r.coverage_ratio),
            fmt_num(r.length_ratio),
        ])
        .map_err(io_err)?;
    }
    w.flush()
}

pub fn write_sweep_csv<W: Write>(out: W, cells: &[SweepCell]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "framework",
        "multiplier",
        "lambda_node",
        "mean_coverage_active",
        "mean_length_active",
        "mean_coverage_inactive",
        "mean_length_inactive",
        "excluded_cells",
        "remainder_violations",
    ])
    .map_err(io_err)?;
    for c in cells {
        w.write_record([
            c.framework.name().to_string(),
            fmt_num(c.multiplier),
            fmt_num(c.lambda_node),
            fmt_num(c.mean_coverage_active),
            fmt_num(c.mean_length_active),
            fmt_num(c.mean_coverage_inactive),
            fmt_num(c.mean_length_inactive),
            c.excluded_cells.to_string(),
            c.remainder_violations.to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush()
}

/// Writes the located pair through [`write_outputs`] together with
/// `comparison.csv` and `sweep.csv`.
pub fn write_sweep_report(dir: &Path, report: &SweepReport) -> std::io::Result<()> {
    let cmp = &report.comparison;
    write_outputs(dir, &[&cmp.gauge, &cmp.omega])?;
    write_comparison_csv(fs::File::create(dir.join("comparison.csv"))?, cmp)?;
    write_sweep_csv(fs::File::create(dir.join("sweep.csv"))?, &report.cells)
}
