//! Closed-form laws of the platform model.

use super::profile::{FunctionConfig, ProviderProfile, WorkloadProfile};
use super::ModelError;

/// Expected number of containers still warm `delta_t` seconds after
/// `d_init` were started: `d_init * 2^-floor(delta_t / period)`.
///
/// The result is a real-valued expectation and is not rounded.
pub fn expected_warm_containers(d_init: f64, delta_t: f64, period: f64) -> Result<f64, ModelError> {
    if !(period > 0.0) {
        return Err(ModelError::InvalidArgument(format!(
            "eviction period must be positive, got {period}"
        )));
    }
    if !(d_init >= 0.0) || !(delta_t >= 0.0) {
        return Err(ModelError::InvalidArgument(
            "d_init and delta_t must be non-negative".into(),
        ));
    }
    Ok(d_init * halving_factor(delta_t, period))
}

/// `2^-floor(delta_t / period)`, with `period > 0`.
pub(crate) fn halving_factor(delta_t: f64, period: f64) -> f64 {
    let periods = (delta_t / period).floor();
    (-periods).exp2()
}

/// Number of containers to start at once so that `n` runs of `runtime`
/// seconds complete within one eviction period: `ceil(n * runtime / period)`,
/// at least one.
pub fn optimal_batch_size(n: u64, runtime: f64, period: f64) -> Result<u64, ModelError> {
    if n == 0 {
        return Err(ModelError::InvalidArgument("n must be at least 1".into()));
    }
    if !(runtime > 0.0) || !(period > 0.0) {
        return Err(ModelError::InvalidArgument(
            "runtime and period must be positive".into(),
        ));
    }
    let q = n as f64 * runtime / period;
    // absorb representation error so that exact quotients are not bumped up
    let nearest = q.round();
    let batch = if (q - nearest).abs() <= 1e-9 * q.max(1.0) {
        nearest
    } else {
        q.ceil()
    };
    Ok((batch as u64).max(1))
}

/// Fraction of a vCPU granted at `memory` MiB: linear in memory, capped at
/// the profile's maximum share.
pub fn cpu_share(memory: f64, profile: &ProviderProfile) -> f64 {
    (memory / profile.cpu_full_share_memory).min(profile.max_cpu_share)
}

/// Milliseconds to move `bytes` at `bandwidth` bytes/second.
pub fn transfer_time(bytes: u64, bandwidth: f64) -> f64 {
    if bytes == 0 {
        0.0
    } else {
        bytes as f64 / bandwidth * 1000.0
    }
}

/// Time spent in the function body: CPU work scaled by the granted share,
/// plus CPU-independent waiting, plus storage traffic.
pub fn benchmark_latency(workload: &WorkloadProfile, config: &FunctionConfig) -> f64 {
    let provider = &config.provider;
    let share = cpu_share(config.memory as f64, provider);
    workload.compute_work / share
        + workload.wait_time
        + transfer_time(
            workload.io_bytes_read + workload.io_bytes_write,
            provider.network_bandwidth,
        )
}

/// Deterministic warm latency: dispatch, body, and payload transmission in
/// both directions.
pub fn predicted_warm_latency(workload: &WorkloadProfile, config: &FunctionConfig) -> f64 {
    let provider = &config.provider;
    provider.warm_dispatch_latency
        + benchmark_latency(workload, config)
        + transfer_time(
            workload.payload_in + workload.payload_out,
            provider.network_bandwidth,
        )
}

/// Deterministic cold-initialization latency before jitter.
///
/// Sandbox start scales with `1 + sensitivity * deviation`, where deviation
/// is the relative distance of the declared memory from the full-share
/// point, clamped to [-1, 1]. Runtime initialization work scales with the
/// CPU share like any other computation.
pub fn cold_init_latency(workload: &WorkloadProfile, config: &FunctionConfig) -> f64 {
    let provider = &config.provider;
    let memory = config.memory as f64;
    let deviation = (memory / provider.cpu_full_share_memory - 1.0).clamp(-1.0, 1.0);
    let sandbox = (provider.cold_base_latency
        + provider.cold_latency_per_code_mib * workload.code_size_mib())
        * (1.0 + provider.cold_cpu_sensitivity * deviation);
    sandbox + workload.cold_init_work / cpu_share(memory, provider)
}
