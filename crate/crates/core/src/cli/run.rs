use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::output::{json_bytes, records_csv, write_all, ReplicationReport, RunReport, SCHEMA_VERSION};
use super::{CliError, RunArgs};
use crate::config::{Config, ExperimentSection, SimulatorSection};
use crate::experiments::{
    run_eviction_experiment, run_invoc_overhead, run_perf_cost, ExperimentError, ExperimentKind,
    ExperimentReport, InvocOverheadConfig, PerfCostConfig,
};
use crate::model::{FunctionConfig, ProviderProfile, WorkloadProfile};
use crate::sim::{Simulator, TraceEvent};

/// Headroom over peak memory required for sizes picked by default.
const DEFAULT_MEMORY_HEADROOM: f64 = 1.1;

/// Everything that determines a run's results, plus where they go.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    pub profile: String,
    pub workload: String,
    pub seed: u64,
    pub replications: u32,
    pub trace: bool,
    pub provider: ProviderProfile,
    pub workload_profile: WorkloadProfile,
    pub simulator: SimulatorSection,
    pub settings: ExperimentSection,
    pub out: PathBuf,
    pub force: bool,
    pub parallel: bool,
}

impl RunManifest {
    pub fn resolve(args: &RunArgs, config: &Config) -> Result<Self, CliError> {
        Ok(RunManifest {
            schema_version: SCHEMA_VERSION,
            experiment: args.experiment,
            profile: args.profile.clone(),
            workload: args.workload.clone(),
            seed: args.seed.unwrap_or(config.simulator.seed),
            replications: args.replications.max(1),
            trace: args.trace || config.simulator.trace,
            provider: config.provider(&args.profile)?,
            workload_profile: config.workload(&args.workload)?,
            simulator: config.simulator.clone(),
            settings: config.experiment.clone(),
            out: args.out.clone(),
            force: args.force,
            parallel: args.parallel,
        })
    }

    fn replication_seed(&self, replication: u32) -> u64 {
        self.seed.wrapping_add(replication as u64)
    }
}

/// SHA-256 over the canonical JSON of every result-determining field;
/// the output location and the force and parallel flags are left out.
pub fn manifest_hash(m: &RunManifest) -> String {
    let canonical = json!({
        "schema_version": m.schema_version,
        "experiment": m.experiment,
        "profile": m.profile,
        "workload": m.workload,
        "seed": m.seed,
        "replications": m.replications,
        "trace": m.trace,
        "provider": m.provider,
        "workload_profile": m.workload_profile,
        "simulator": m.simulator,
        "settings": m.settings,
    });
    let digest = Sha256::digest(canonical.to_string().as_bytes());
    hex::encode(digest)
}

fn perf_cost_memories(m: &RunManifest) -> Vec<u32> {
    if !m.settings.perf_cost.memory.is_empty() {
        return m.settings.perf_cost.memory.clone();
    }
    let floor = m.workload_profile.peak_memory * DEFAULT_MEMORY_HEADROOM;
    m.provider
        .default_memory_sweep()
        .into_iter()
        .filter(|&mem| mem as f64 >= floor)
        .collect()
}

fn run_replication(
    m: &RunManifest,
    replication: u32,
) -> Result<(ReplicationReport, Vec<TraceEvent>), ExperimentError> {
    let seed = m.replication_seed(replication);
    let options = m.simulator.options(seed, m.trace);
    let mut sim = Simulator::new(m.provider.clone(), options)
        .map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
    let settings = &m.settings;
    let function = |name: String, memory: u32| {
        FunctionConfig::new(name, m.workload_profile.clone(), memory, m.provider.clone())
    };
    let reports = match m.experiment {
        ExperimentKind::PerfCost => {
            let s = &settings.perf_cost;
            let memories = perf_cost_memories(m);
            if memories.is_empty() {
                return Err(ExperimentError::InvalidConfig(format!(
                    "no memory size of {} fits workload {}",
                    m.provider.name, m.workload_profile.name
                )));
            }
            let mut out = Vec::new();
            for memory in memories {
                let cfg = PerfCostConfig {
                    function: function(format!("{}-{memory}", m.workload_profile.name), memory),
                    samples_target: s.samples_target,
                    batch_size: s.batch_size,
                    ci_level: s.ci_level,
                    ci_width_target: s.ci_width_target,
                    max_samples: s.max_samples,
                    burst: s.burst,
                    retry_budget: s.retry_budget,
                };
                out.push(ExperimentReport::PerfCost(run_perf_cost(&cfg, &mut sim)?));
            }
            out
        }
        ExperimentKind::InvocOverhead => {
            let s = &settings.invoc_overhead;
            let cfg = InvocOverheadConfig {
                function: function(format!("{}-overhead", m.workload_profile.name), s.memory),
                payload_sizes: s.payload_sizes.clone(),
                repetitions: s.repetitions,
                sync_window: s.sync_window,
            };
            vec![ExperimentReport::InvocOverhead(run_invoc_overhead(&cfg, &mut sim)?)]
        }
        ExperimentKind::Eviction => {
            vec![ExperimentReport::Eviction(run_eviction_experiment(&settings.eviction, &mut sim)?)]
        }
    };
    let trace = sim.take_trace();
    Ok((
        ReplicationReport {
            replication,
            seed,
            reports,
        },
        trace,
    ))
}

type Replicated = Vec<Result<(ReplicationReport, Vec<TraceEvent>), ExperimentError>>;

/// Runs every replication of a manifest; parallel workers each own an
/// independent simulator, so results do not depend on scheduling.
pub fn execute_run(m: &RunManifest) -> Result<(RunReport, Vec<(u32, TraceEvent)>), ExperimentError> {
    let results: Replicated = if m.parallel && m.replications > 1 {
        std::thread::scope(|scope| {
            let workers: Vec<_> = (0..m.replications)
                .map(|i| scope.spawn(move || run_replication(m, i)))
                .collect();
            workers
                .into_iter()
                .map(|w| w.join().expect("replication worker panicked"))
                .collect()
        })
    } else {
        (0..m.replications).map(|i| run_replication(m, i)).collect()
    };
    let mut replications = Vec::new();
    let mut trace = Vec::new();
    for r in results {
        let (rep, events) = r?;
        trace.extend(events.into_iter().map(|e| (rep.replication, e)));
        replications.push(rep);
    }
    Ok((
        RunReport {
            schema_version: SCHEMA_VERSION,
            manifest_hash: manifest_hash(m),
            experiment: m.experiment,
            seed: m.seed,
            replications,
        },
        trace,
    ))
}

fn check_output_dir(out: &Path, force: bool) -> Result<(), CliError> {
    match fs::read_dir(out) {
        Ok(mut entries) => {
            if entries.next().is_some() && !force {
                return Err(CliError::OutputExists(out.to_path_buf()));
            }
            Ok(())
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
        Err(e) => Err(CliError::io(out, e)),
    }
}

pub(crate) fn load_config(path: Option<&Path>) -> Result<Config, CliError> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            Ok(Config::from_toml(&text)?)
        }
        None => Ok(Config::default()),
    }
}

pub(crate) fn cmd_run(args: &RunArgs) -> Result<String, CliError> {
    let config = load_config(args.config.as_deref())?;
    let manifest = RunManifest::resolve(args, &config)?;
    check_output_dir(&args.out, args.force)?;
    let hash = manifest_hash(&manifest);
    let (report, trace) = execute_run(&manifest)?;

    let mut manifest_doc = serde_json::to_value(&manifest).map_err(|e| CliError::InvalidInput(e.to_string()))?;
    manifest_doc["manifest_hash"] = json!(hash);
    let mut files = vec![
        ("manifest.json".to_string(), json_bytes(&manifest_doc)?),
        ("report.json".to_string(), json_bytes(&report)?),
        ("records.csv".to_string(), records_csv(&report)?),
    ];
    if manifest.trace {
        let mut lines = Vec::new();
        for (replication, event) in &trace {
            let line = json!({ "manifest_hash": hash, "replication": replication, "trace": event });
            lines.extend_from_slice(line.to_string().as_bytes());
            lines.push(b'\n');
        }
        files.push(("trace.jsonl".to_string(), lines));
    }
    write_all(&args.out, &files)?;
    Ok(json!({
        "experiment": manifest.experiment,
        "manifest_hash": hash,
        "out": args.out,
        "replications": manifest.replications,
    })
    .to_string())
}
