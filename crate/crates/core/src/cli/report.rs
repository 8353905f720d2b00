use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::output::{csv_bytes, state_name, write_all, RunReport, SCHEMA_VERSION};
use super::CliError;
use crate::experiments::{ExperimentReport, LevelSummary, PhaseSummary};
use crate::model::expected_warm_containers;
use crate::stats::LinearFit;

#[derive(Serialize)]
struct WhiskerRow<'a> {
    manifest_hash: &'a str,
    replication: u32,
    provider: &'a str,
    workload: &'a str,
    memory: u32,
    phase: &'static str,
    level: &'static str,
    n: usize,
    p2: f64,
    p25: f64,
    p50: f64,
    p75: f64,
    p98: f64,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
}

#[derive(Serialize)]
struct RatioRow<'a> {
    manifest_hash: &'a str,
    replication: u32,
    provider: &'a str,
    workload: &'a str,
    memory: u32,
    pairs: usize,
    p2: f64,
    p25: f64,
    p50: f64,
    p75: f64,
    p98: f64,
}

#[derive(Serialize)]
struct CostRow<'a> {
    manifest_hash: &'a str,
    replication: u32,
    provider: &'a str,
    workload: &'a str,
    memory: u32,
    cost_per_million_warm: f64,
    cost_per_million_cold: f64,
    time_efficiency: f64,
    memory_efficiency: f64,
    break_even_requests_per_hour: Option<u64>,
    vm_hourly_cost: f64,
}

#[derive(Serialize)]
struct SurvivorRow<'a> {
    manifest_hash: &'a str,
    replication: u32,
    sleep: f64,
    memory: u32,
    code_size: u64,
    d_init: u32,
    delta_t: f64,
    d_warm: Option<u32>,
    period: Option<f64>,
    model_predicted: Option<f64>,
}

#[derive(Serialize)]
struct EvictionFitRow<'a> {
    manifest_hash: &'a str,
    replication: u32,
    sleep: f64,
    period: Option<f64>,
    r_squared: Option<f64>,
    n: Option<usize>,
    error: Option<&'a str>,
}

#[derive(Serialize)]
struct OverheadRow<'a> {
    manifest_hash: &'a str,
    replication: u32,
    payload: u64,
    state: &'static str,
    latency_ms: f64,
}

#[derive(Serialize)]
struct OverheadFitRow<'a> {
    manifest_hash: &'a str,
    replication: u32,
    state: &'static str,
    slope_ms_per_byte: f64,
    intercept_ms: f64,
    r_squared: f64,
    adjusted_r_squared: f64,
    n: usize,
    clock_offset_us: f64,
    sync_exchanges: usize,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Distinct `manifest_hash` values of a CSV file, if it has the column.
fn csv_hashes(path: &Path) -> Result<Option<BTreeSet<String>>, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let headers = reader.headers().map_err(|e| CliError::io(path, e))?.clone();
    let Some(col) = headers.iter().position(|h| h == "manifest_hash") else {
        return Ok(None);
    };
    let mut hashes = BTreeSet::new();
    for row in reader.records() {
        let row = row.map_err(|e| CliError::InvalidInput(format!("{}: {e}", path.display())))?;
        if let Some(h) = row.get(col) {
            hashes.insert(h.to_string());
        }
    }
    Ok(Some(hashes))
}

fn load_run(input: &Path) -> Result<RunReport, CliError> {
    if !input.is_dir() {
        return Err(CliError::io(input, "not a directory"));
    }
    let manifest_path = input.join("manifest.json");
    let report_path = input.join("report.json");
    let manifest: serde_json::Value = serde_json::from_str(&read(&manifest_path)?)
        .map_err(|e| CliError::InvalidInput(format!("manifest.json: {e}")))?;
    let report: RunReport = serde_json::from_str(&read(&report_path)?)
        .map_err(|e| CliError::InvalidInput(format!("report.json: {e}")))?;
    if report.schema_version != SCHEMA_VERSION {
        return Err(CliError::InvalidInput(format!(
            "report schema version {} is not {SCHEMA_VERSION}",
            report.schema_version
        )));
    }
    let hash = report.manifest_hash.as_str();
    if manifest.get("manifest_hash").and_then(|v| v.as_str()) != Some(hash) {
        return Err(CliError::InvalidInput("manifest.json and report.json disagree on the manifest hash".into()));
    }
    let mut csvs: Vec<PathBuf> = fs::read_dir(input)
        .map_err(|e| CliError::io(input, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    csvs.sort();
    if !csvs.iter().any(|p| p.file_name().is_some_and(|n| n == "records.csv")) {
        return Err(CliError::io(input.join("records.csv"), "missing"));
    }
    for path in csvs {
        if let Some(hashes) = csv_hashes(&path)? {
            if let Some(other) = hashes.iter().find(|h| *h != hash) {
                return Err(CliError::InvalidInput(format!(
                    "{} mixes manifest {other} into a run of manifest {hash}",
                    path.display()
                )));
            }
        }
    }
    Ok(report)
}

fn whisker_rows<'a>(
    hash: &'a str,
    replication: u32,
    p: &'a crate::experiments::PerfCostReport,
    rows: &mut Vec<WhiskerRow<'a>>,
) {
    let phases: [(&'static str, &PhaseSummary); 2] = [("cold", &p.cold), ("warm", &p.warm)];
    for (phase, s) in phases {
        let levels: [(&'static str, &LevelSummary); 3] =
            [("benchmark", &s.benchmark), ("provider", &s.provider), ("client", &s.client)];
        for (level, l) in levels {
            rows.push(WhiskerRow {
                manifest_hash: hash,
                replication,
                provider: &p.provider,
                workload: &p.workload,
                memory: p.memory,
                phase,
                level,
                n: s.samples,
                p2: l.whiskers.p2,
                p25: l.whiskers.p25,
                p50: l.whiskers.p50,
                p75: l.whiskers.p75,
                p98: l.whiskers.p98,
                ci_low: l.ci.map(|c| c.low),
                ci_high: l.ci.map(|c| c.high),
            });
        }
    }
}

fn overhead_fit_row<'a>(
    hash: &'a str,
    replication: u32,
    state: &'static str,
    fit: &LinearFit,
    offset: f64,
    exchanges: usize,
) -> OverheadFitRow<'a> {
    OverheadFitRow {
        manifest_hash: hash,
        replication,
        state,
        slope_ms_per_byte: fit.slope,
        intercept_ms: fit.intercept,
        r_squared: fit.r_squared,
        adjusted_r_squared: fit.adjusted_r_squared,
        n: fit.n,
        clock_offset_us: offset,
        sync_exchanges: exchanges,
    }
}

/// Builds every figure table of the run in `input` and writes them to
/// `out`. Nothing is written unless every table could be built.
pub(crate) fn cmd_report(input: &Path, out: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    let run = load_run(input)?;
    let hash = run.manifest_hash.as_str();
    let mut whiskers = Vec::new();
    let mut ratios = Vec::new();
    let mut costs = Vec::new();
    let mut survivors = Vec::new();
    let mut eviction_fits = Vec::new();
    let mut overhead = Vec::new();
    let mut overhead_fits = Vec::new();
    for rep in &run.replications {
        let i = rep.replication;
        for report in &rep.reports {
            match report {
                ExperimentReport::PerfCost(p) => {
                    whisker_rows(hash, i, p, &mut whiskers);
                    let s = &p.client_ratio.summary;
                    ratios.push(RatioRow {
                        manifest_hash: hash,
                        replication: i,
                        provider: &p.provider,
                        workload: &p.workload,
                        memory: p.memory,
                        pairs: p.client_ratio.count,
                        p2: s.p2,
                        p25: s.p25,
                        p50: s.p50,
                        p75: s.p75,
                        p98: s.p98,
                    });
                    costs.push(CostRow {
                        manifest_hash: hash,
                        replication: i,
                        provider: &p.provider,
                        workload: &p.workload,
                        memory: p.memory,
                        cost_per_million_warm: p.cost.cost_per_million_warm,
                        cost_per_million_cold: p.cost.cost_per_million_cold,
                        time_efficiency: p.cost.efficiency.time_efficiency,
                        memory_efficiency: p.cost.efficiency.memory_efficiency,
                        break_even_requests_per_hour: p.cost.break_even_requests_per_hour,
                        vm_hourly_cost: p.cost.vm_hourly_cost,
                    });
                }
                ExperimentReport::Eviction(e) => {
                    for g in &e.fits {
                        eviction_fits.push(EvictionFitRow {
                            manifest_hash: hash,
                            replication: i,
                            sleep: g.sleep,
                            period: g.fit.map(|f| f.period),
                            r_squared: g.fit.map(|f| f.r_squared),
                            n: g.fit.map(|f| f.n),
                            error: g.error.as_deref(),
                        });
                    }
                    for c in &e.cells {
                        let period = e
                            .fits
                            .iter()
                            .find(|g| g.sleep == c.sleep)
                            .and_then(|g| g.fit)
                            .map(|f| f.period);
                        let model_predicted = period
                            .map(|p| expected_warm_containers(c.d_init as f64, c.delta_t, p))
                            .transpose()
                            .map_err(|e| CliError::InvalidInput(e.to_string()))?;
                        survivors.push(SurvivorRow {
                            manifest_hash: hash,
                            replication: i,
                            sleep: c.sleep,
                            memory: c.memory,
                            code_size: c.code_size,
                            d_init: c.d_init,
                            delta_t: c.delta_t,
                            d_warm: c.d_warm,
                            period,
                            model_predicted,
                        });
                    }
                }
                ExperimentReport::InvocOverhead(o) => {
                    overhead.extend(o.points.iter().map(|p| OverheadRow {
                        manifest_hash: hash,
                        replication: i,
                        payload: p.payload,
                        state: state_name(p.cold),
                        latency_ms: p.latency_ms,
                    }));
                    let sync = &o.clock_sync;
                    for (state, fit) in [("warm", &o.warm_fit), ("cold", &o.cold_fit)] {
                        overhead_fits.push(overhead_fit_row(hash, i, state, fit, sync.offset_us, sync.exchanges_used));
                    }
                }
            }
        }
    }

    let mut files = Vec::new();
    let header = ["manifest_hash"];
    if !whiskers.is_empty() {
        files.push(("whiskers.csv".to_string(), csv_bytes(&whiskers, &header)?));
        files.push(("cold_warm_ratios.csv".to_string(), csv_bytes(&ratios, &header)?));
        files.push(("cost.csv".to_string(), csv_bytes(&costs, &header)?));
    }
    if !eviction_fits.is_empty() {
        files.push(("eviction_survivors.csv".to_string(), csv_bytes(&survivors, &header)?));
        files.push(("eviction_fit.csv".to_string(), csv_bytes(&eviction_fits, &header)?));
    }
    if !overhead_fits.is_empty() {
        files.push(("invocation_overhead.csv".to_string(), csv_bytes(&overhead, &header)?));
        files.push(("invocation_overhead_fit.csv".to_string(), csv_bytes(&overhead_fits, &header)?));
    }
    if files.is_empty() {
        return Err(CliError::InvalidInput("report holds no experiment results".into()));
    }
    write_all(out.unwrap_or(input), &files)
}
