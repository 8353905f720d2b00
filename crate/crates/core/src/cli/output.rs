use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::experiments::{ExperimentKind, ExperimentReport};
use crate::model::InvocationRecord;

/// Version of every JSON document and CSV layout written by the CLI.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub replication: u32,
    pub seed: u64,
    pub reports: Vec<ExperimentReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub manifest_hash: String,
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub replications: Vec<ReplicationReport>,
}

/// One invocation of a perf-cost run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub manifest_hash: String,
    pub replication: u32,
    pub seed: u64,
    pub phase: String,
    pub request_id: u64,
    pub function_name: String,
    pub is_cold: bool,
    pub client_send_us: i64,
    pub exec_start_us: i64,
    pub exec_end_us: i64,
    pub client_receive_us: i64,
    pub benchmark_time_ms: f64,
    pub provider_time_ms: f64,
    pub client_time_ms: f64,
    pub memory_declared: u32,
    pub memory_used: f64,
    pub billed_duration_ms: f64,
    pub billed_memory: f64,
    pub payload_in: u64,
    pub payload_out: u64,
    pub outcome: String,
}

impl RecordRow {
    fn new(hash: &str, replication: u32, seed: u64, phase: &str, r: &InvocationRecord) -> Self {
        RecordRow {
            manifest_hash: hash.to_string(),
            replication,
            seed,
            phase: phase.to_string(),
            request_id: r.request_id,
            function_name: r.function_name.clone(),
            is_cold: r.is_cold,
            client_send_us: r.client_send.micros(),
            exec_start_us: r.exec_start.micros(),
            exec_end_us: r.exec_end.micros(),
            client_receive_us: r.client_receive.micros(),
            benchmark_time_ms: r.benchmark_time,
            provider_time_ms: r.provider_time,
            client_time_ms: r.client_time,
            memory_declared: r.memory_declared,
            memory_used: r.memory_used,
            billed_duration_ms: r.billed_duration,
            billed_memory: r.billed_memory,
            payload_in: r.payload_in,
            payload_out: r.payload_out,
            outcome: r.outcome.as_str().to_string(),
        }
    }
}

#[derive(Debug, Serialize)]
struct OverheadRow<'a> {
    manifest_hash: &'a str,
    replication: u32,
    seed: u64,
    request_id: u64,
    payload: u64,
    state: &'static str,
    latency_ms: f64,
}

#[derive(Debug, Serialize)]
struct CellRow<'a> {
    manifest_hash: &'a str,
    replication: u32,
    seed: u64,
    sleep: f64,
    memory: u32,
    code_size: u64,
    d_init: u32,
    delta_t: f64,
    d_warm: Option<u32>,
}

pub(crate) fn state_name(cold: bool) -> &'static str {
    if cold {
        "cold"
    } else {
        "warm"
    }
}

/// Serializes rows to an in-memory CSV document.
pub(crate) fn csv_bytes<T: Serialize>(rows: &[T], header: &[&str]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(!rows.is_empty())
        .from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(header).map_err(|e| CliError::InvalidInput(e.to_string()))?;
    }
    for row in rows {
        w.serialize(row).map_err(|e| CliError::InvalidInput(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::InvalidInput(e.to_string()))
}

/// The records.csv document of a run: one row per invocation, per overhead
/// measurement, or per eviction cell.
pub fn records_csv(report: &RunReport) -> Result<Vec<u8>, CliError> {
    let hash = report.manifest_hash.as_str();
    match report.experiment {
        ExperimentKind::PerfCost => {
            let mut rows = Vec::new();
            for rep in &report.replications {
                for r in &rep.reports {
                    if let ExperimentReport::PerfCost(p) = r {
                        for rec in &p.cold_records {
                            rows.push(RecordRow::new(hash, rep.replication, rep.seed, "cold", rec));
                        }
                        for rec in &p.warm_records {
                            rows.push(RecordRow::new(hash, rep.replication, rep.seed, "warm", rec));
                        }
                    }
                }
            }
            csv_bytes(&rows, &["manifest_hash"])
        }
        ExperimentKind::InvocOverhead => {
            let mut rows = Vec::new();
            for rep in &report.replications {
                for r in &rep.reports {
                    if let ExperimentReport::InvocOverhead(o) = r {
                        rows.extend(o.points.iter().map(|p| OverheadRow {
                            manifest_hash: hash,
                            replication: rep.replication,
                            seed: rep.seed,
                            request_id: p.request_id,
                            payload: p.payload,
                            state: state_name(p.cold),
                            latency_ms: p.latency_ms,
                        }));
                    }
                }
            }
            csv_bytes(&rows, &["manifest_hash"])
        }
        ExperimentKind::Eviction => {
            let mut rows = Vec::new();
            for rep in &report.replications {
                for r in &rep.reports {
                    if let ExperimentReport::Eviction(e) = r {
                        rows.extend(e.cells.iter().map(|c| CellRow {
                            manifest_hash: hash,
                            replication: rep.replication,
                            seed: rep.seed,
                            sleep: c.sleep,
                            memory: c.memory,
                            code_size: c.code_size,
                            d_init: c.d_init,
                            delta_t: c.delta_t,
                            d_warm: c.d_warm,
                        }));
                    }
                }
            }
            csv_bytes(&rows, &["manifest_hash"])
        }
    }
}

pub(crate) fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes =
        serde_json::to_vec_pretty(value).map_err(|e| CliError::InvalidInput(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes every file after all of them were produced in memory.
pub(crate) fn write_all(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::new();
    for (name, bytes) in files {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
