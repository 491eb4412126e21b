//! Writers for experiment results.
//!
//! Record CSV columns, in order:
//! `algorithm,seed,n_users,n_selected,csi_error,subcarrier_fraction,capacity,zf_rate,zf_feasible,passes,flops,converged`.
//! Flop reports use `section,algorithm,n,value`.

use std::io::Write;

use serde::Serialize;

use super::config::{ExperimentConfig, OutputFormat};
use super::experiments::{FlopsReport, ResultRecord};
use crate::error::{Error, Result};

pub const RECORD_HEADER: [&str; 12] = [
    "algorithm",
    "seed",
    "n_users",
    "n_selected",
    "csi_error",
    "subcarrier_fraction",
    "capacity",
    "zf_rate",
    "zf_feasible",
    "passes",
    "flops",
    "converged",
];

pub const FLOPS_HEADER: [&str; 4] = ["section", "algorithm", "n", "value"];

/// Run description stored next to results.
#[derive(Clone, Debug, Serialize)]
pub struct Meta<'a> {
    pub command: &'a str,
    pub n_seeds: usize,
    pub seeds: &'a [u64],
    pub config: &'a ExperimentConfig,
}

impl<'a> Meta<'a> {
    pub fn new(command: &'a str, config: &'a ExperimentConfig) -> Self {
        Self {
            command,
            n_seeds: config.seeds.len(),
            seeds: &config.seeds,
            config,
        }
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv output failed: {other:?}")),
    }
}

fn json_error(e: serde_json::Error) -> Error {
    Error::Config(format!("json output failed: {e}"))
}

pub fn write_records<W: Write>(out: W, records: &[ResultRecord], format: OutputFormat, meta: &Meta<'_>) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            w.write_record(RECORD_HEADER).map_err(csv_error)?;
            for r in records {
                w.serialize(r).map_err(csv_error)?;
            }
            w.flush()?;
            Ok(())
        }
        OutputFormat::Json => write_json(out, meta, records),
    }
}

#[derive(Serialize)]
struct FlopsLine<'a> {
    section: &'a str,
    algorithm: &'a str,
    n: usize,
    value: f64,
}

fn flops_lines(report: &FlopsReport) -> Vec<FlopsLine<'_>> {
    let mut lines = Vec::new();
    for row in &report.comparison.rows {
        for (algorithm, value) in [
            ("rpn", row.rpn_flops),
            ("nn", row.nn_flops),
            ("greedy", row.greedy_flops),
        ] {
            lines.push(FlopsLine {
                section: "selected",
                algorithm,
                n: row.n_selected,
                value,
            });
        }
    }
    for s in &report.scaling {
        for p in &s.points {
            lines.push(FlopsLine {
                section: "scaling_total",
                algorithm: &s.algorithm,
                n: p.n_t,
                value: p.total_flops,
            });
            lines.push(FlopsLine {
                section: "scaling_per_node",
                algorithm: &s.algorithm,
                n: p.n_t,
                value: p.flops_per_node_evaluation,
            });
        }
        lines.push(FlopsLine {
            section: "slope_total",
            algorithm: &s.algorithm,
            n: 0,
            value: s.slope_total,
        });
        lines.push(FlopsLine {
            section: "slope_per_node",
            algorithm: &s.algorithm,
            n: 0,
            value: s.slope_per_node,
        });
    }
    lines
}

pub fn write_flops<W: Write>(out: W, report: &FlopsReport, format: OutputFormat, meta: &Meta<'_>) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            w.write_record(FLOPS_HEADER).map_err(csv_error)?;
            for line in flops_lines(report) {
                w.serialize(line).map_err(csv_error)?;
            }
            w.flush()?;
            Ok(())
        }
        OutputFormat::Json => write_json(out, meta, report),
    }
}

fn write_json<W: Write, T: Serialize + ?Sized>(mut out: W, meta: &Meta<'_>, results: &T) -> Result<()> {
    #[derive(Serialize)]
    struct Doc<'a, T: ?Sized> {
        meta: &'a Meta<'a>,
        results: &'a T,
    }
    serde_json::to_writer_pretty(&mut out, &Doc { meta, results }).map_err(json_error)?;
    writeln!(out)?;
    Ok(())
}

/// Metadata as a standalone JSON document, for CSV sidecars.
pub fn write_meta<W: Write>(mut out: W, meta: &Meta<'_>) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, meta).map_err(json_error)?;
    writeln!(out)?;
    Ok(())
}
