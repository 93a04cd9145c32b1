//! CSV, manifest and plot-data output of a sweep.

use super::{MetricRecord, Scheme, SweepResult};
use crate::error::Result;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const CSV_HEADER: &str = "scheme,snr_db,rho,beta,nmse,ber,frames,bit_errors,sensing_accuracy,wall_seconds";

pub fn write_csv<W: std::io::Write>(out: W, records: &[MetricRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(records: &[MetricRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, records)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<MetricRecord>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub sweep_seed: u64,
    pub git_describe: String,
    pub min_bit_errors: u64,
    /// Points that hit the frame cap before the bit-error target.
    pub capped: Vec<String>,
}

/// One curve of a plot: a scheme at fixed `rho` and `beta` over SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub scheme: Scheme,
    pub rho: f64,
    pub beta: f64,
    pub snr_db: Vec<f64>,
    pub nmse: Vec<f64>,
    pub ber: Vec<f64>,
}

pub fn plot_series(records: &[MetricRecord]) -> Vec<Series> {
    let mut out: Vec<Series> = Vec::new();
    for r in records {
        let pos = out.iter().position(|s| s.scheme == r.scheme && s.rho == r.rho && s.beta == r.beta);
        let s = match pos {
            Some(i) => &mut out[i],
            None => {
                out.push(Series { scheme: r.scheme, rho: r.rho, beta: r.beta, snr_db: vec![], nmse: vec![], ber: vec![] });
                out.last_mut().expect("just pushed")
            }
        };
        s.snr_db.push(r.snr_db);
        s.nmse.push(r.nmse);
        s.ber.push(r.ber);
    }
    out
}

/// `git describe --always --dirty`, or `"unknown"` outside a work tree.
pub fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

/// Writes `<name>.csv`, `<name>.manifest.json` and `<name>.plot.json` into `dir`.
pub fn emit(dir: &Path, name: &str, result: &SweepResult, config_hash: &str, seed: u64) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_csv(std::fs::File::create(dir.join(format!("{name}.csv")))?, &result.records)?;
    let manifest = Manifest {
        config_hash: config_hash.into(),
        seed,
        sweep_seed: result.sweep_seed,
        git_describe: git_describe(),
        min_bit_errors: result.min_bit_errors,
        capped: result.capped_records().map(|r| r.label()).collect(),
    };
    std::fs::write(dir.join(format!("{name}.manifest.json")), serde_json::to_string_pretty(&manifest)?)?;
    std::fs::write(dir.join(format!("{name}.plot.json")), serde_json::to_string_pretty(&plot_series(&result.records))?)?;
    Ok(())
}
