use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::clock_sync::{estimate_clock_offset, ClockSyncResult};
use super::ExperimentError;
use crate::model::{FunctionConfig, InvocationRecord};
use crate::platform::{EchoLink, Platform, TriggerKind};
use crate::stats::{ols_fit, LinearFit};

/// 1 kB followed by `steps` evenly spaced sizes up to 5.9 MB.
pub fn default_payload_sizes(steps: u64) -> Vec<u64> {
    const LARGEST: u64 = 5_900_000;
    let mut sizes = vec![1_000];
    sizes.extend((1..=steps).map(|k| LARGEST * k / steps));
    sizes
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvocOverheadConfig {
    pub function: FunctionConfig,
    pub payload_sizes: Vec<u64>,
    pub repetitions: usize,
    pub sync_window: usize,
}

impl InvocOverheadConfig {
    pub fn new(function: FunctionConfig) -> Self {
        InvocOverheadConfig {
            function,
            payload_sizes: default_payload_sizes(20),
            repetitions: 5,
            sync_window: 10,
        }
    }
}

/// One measured invocation latency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverheadPoint {
    pub payload: u64,
    pub cold: bool,
    pub latency_ms: f64,
    pub request_id: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvocOverheadReport {
    pub provider: String,
    pub workload: String,
    pub memory: u32,
    pub clock_sync: ClockSyncResult,
    pub points: Vec<OverheadPoint>,
    pub warm_fit: LinearFit,
    pub cold_fit: LinearFit,
    pub failures: usize,
}

fn fit(points: &[OverheadPoint], cold: bool) -> Result<LinearFit, ExperimentError> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.cold == cold)
        .map(|p| (p.payload as f64, p.latency_ms))
        .unzip();
    let distinct: BTreeSet<u64> = xs.iter().map(|x| *x as u64).collect();
    if distinct.len() < 3 {
        return Err(ExperimentError::InsufficientDesign(format!(
            "{} distinct payload sizes among {} invocations",
            distinct.len(),
            if cold { "cold" } else { "warm" }
        )));
    }
    Ok(ols_fit(&xs, &ys)?)
}

/// Measures the delay between sending an invocation and the start of
/// execution, across payload sizes and for cold and warm starts.
pub fn run_invoc_overhead<P: Platform + EchoLink + ?Sized>(
    cfg: &InvocOverheadConfig,
    backend: &mut P,
) -> Result<InvocOverheadReport, ExperimentError> {
    let distinct: BTreeSet<u64> = cfg.payload_sizes.iter().copied().collect();
    if distinct.len() < 3 {
        return Err(ExperimentError::InsufficientDesign(format!(
            "need at least 3 distinct payload sizes, got {}",
            distinct.len()
        )));
    }
    if cfg.repetitions == 0 {
        return Err(ExperimentError::InvalidConfig("repetitions must be at least 1".into()));
    }
    let handle = backend.create_function(cfg.function.clone())?;
    let trigger = backend.create_trigger(&handle, TriggerKind::Http)?;
    if let Some(&size) = distinct.iter().find(|&&s| s > trigger.payload_size_limit) {
        return Err(ExperimentError::InvalidConfig(format!(
            "payload {size} exceeds the trigger limit of {}",
            trigger.payload_size_limit
        )));
    }

    let start = backend.client_now();
    let sync = estimate_clock_offset(backend, start, cfg.sync_window)?;
    let mut points = Vec::new();
    let mut failures = 0;
    let mut measure = |r: &InvocationRecord, points: &mut Vec<OverheadPoint>| {
        if !r.is_success() {
            failures += 1;
            return;
        }
        let start_on_client = r.exec_start.micros() as f64 - sync.offset_us;
        points.push(OverheadPoint {
            payload: r.payload_in,
            cold: r.is_cold,
            latency_ms: (start_on_client - r.client_send.micros() as f64) / 1000.0,
            request_id: r.request_id,
        });
    };
    for _ in 0..cfg.repetitions {
        for &size in &cfg.payload_sizes {
            backend.update_function(&handle, cfg.function.clone())?;
            let first = backend.invoke(&trigger, size, backend.client_now())?;
            backend.wait_until(first.client_receive)?;
            measure(&first, &mut points);
            let second = backend.invoke(&trigger, size, backend.client_now())?;
            backend.wait_until(second.client_receive)?;
            measure(&second, &mut points);
        }
    }
    Ok(InvocOverheadReport {
        provider: backend.profile().name.clone(),
        workload: cfg.function.workload.name.clone(),
        memory: cfg.function.memory,
        clock_sync: sync,
        warm_fit: fit(&points, false)?,
        cold_fit: fit(&points, true)?,
        points,
        failures,
    })
}
