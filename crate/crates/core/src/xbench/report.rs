use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One experiment arm; serialized as one CSV row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentReport {
    pub experiment: String,
    pub method: String,
    pub seed: u64,
    /// Wall-clock seconds of the arm.
    pub seconds: f64,
    pub final_rel_error: Option<f64>,
    /// Name of the experiment-specific metric, e.g. `kl` or `accuracy`.
    pub metric_name: String,
    pub metric: Option<f64>,
    pub error_trace: Vec<f64>,
    pub clamped: usize,
    /// Normalization constants `C` of every solve.
    pub normalization: Vec<f64>,
    /// Free-form `key=value` echo of the configuration.
    pub config: String,
}

/// CSV columns, in order.
pub const REPORT_COLUMNS: [&str; 11] = [
    "experiment",
    "method",
    "seed",
    "seconds",
    "final_rel_error",
    "metric_name",
    "metric",
    "error_trace",
    "clamped",
    "normalization",
    "config",
];

#[derive(Serialize, Deserialize)]
struct Row {
    experiment: String,
    method: String,
    seed: u64,
    seconds: f64,
    final_rel_error: Option<f64>,
    metric_name: String,
    metric: Option<f64>,
    error_trace: String,
    clamped: usize,
    normalization: String,
    config: String,
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:e}"))
        .collect::<Vec<_>>()
        .join(";")
}

fn split(s: &str) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| Error::Format(format!("bad number {t:?}: {e}")))
        })
        .collect()
}

/// Writes reports as CSV with a header row; list columns are `;`-separated.
pub fn write_reports<W: Write>(w: W, reports: &[ExperimentReport]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in reports {
        wr.serialize(Row {
            experiment: r.experiment.clone(),
            method: r.method.clone(),
            seed: r.seed,
            seconds: r.seconds,
            final_rel_error: r.final_rel_error,
            metric_name: r.metric_name.clone(),
            metric: r.metric,
            error_trace: join(&r.error_trace),
            clamped: r.clamped,
            normalization: join(&r.normalization),
            config: r.config.clone(),
        })?;
    }
    if reports.is_empty() {
        wr.write_record(REPORT_COLUMNS)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_reports<R: Read>(r: R) -> Result<Vec<ExperimentReport>> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != REPORT_COLUMNS {
        return Err(Error::Format(format!(
            "unexpected report header {header:?}"
        )));
    }
    let mut out = Vec::new();
    for row in rd.deserialize::<Row>() {
        let row = row?;
        out.push(ExperimentReport {
            experiment: row.experiment,
            method: row.method,
            seed: row.seed,
            seconds: row.seconds,
            final_rel_error: row.final_rel_error,
            metric_name: row.metric_name,
            metric: row.metric,
            error_trace: split(&row.error_trace)?,
            clamped: row.clamped,
            normalization: split(&row.normalization)?,
            config: row.config,
        });
    }
    Ok(out)
}
