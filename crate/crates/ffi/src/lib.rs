//! C ABI over the faasim simulator and its analysis functions.
//!
//! Every function returns a [`FaasimStatus`]; results go through out
//! pointers. On failure the message is kept per thread and read with
//! [`faasim_last_error_message`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::collections::HashMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use faasim::cost::{self, CostError};
use faasim::model::{self, ClientInstant, InvocationRecord, ModelError, Outcome, ProviderProfile, WorkloadProfile};
use faasim::platform::{FunctionHandle, Platform, PlatformError, Trigger, TriggerKind};
use faasim::sim::{SimOptions, Simulator};
use faasim::stats::{self, SampleSet, StatsError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaasimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownPreset = 3,
    UnknownFunction = 4,
    AlreadyExists = 5,
    Rejected = 6,
    InsufficientSamples = 7,
    Unbounded = 8,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaasimOutcome {
    Success = 0,
    MemoryExceeded = 1,
    Unavailable = 2,
}

/// One invocation. Instants are microseconds on the client clock
/// (`client_*`) or the platform clock (`exec_*`); durations are ms.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FaasimRecord {
    pub request_id: u64,
    pub is_cold: bool,
    pub outcome: FaasimOutcome,
    pub client_send_us: i64,
    pub exec_start_us: i64,
    pub exec_end_us: i64,
    pub client_receive_us: i64,
    pub benchmark_time_ms: f64,
    pub provider_time_ms: f64,
    pub client_time_ms: f64,
    pub memory_used_mb: f64,
    pub billed_duration_ms: f64,
    pub billed_memory_mb: f64,
    pub cost_usd: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FaasimInterval {
    pub low: f64,
    pub high: f64,
    pub median: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FaasimLinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub adjusted_r_squared: f64,
}

/// Opaque simulator handle with its deployed functions.
pub struct FaasimSimulator {
    sim: Simulator,
    functions: HashMap<String, Deployed>,
}

struct Deployed {
    handle: FunctionHandle,
    trigger: Trigger,
    workload: WorkloadProfile,
}

struct Failure(FaasimStatus, String);

impl From<PlatformError> for Failure {
    fn from(e: PlatformError) -> Self {
        let status = match e {
            PlatformError::UnknownFunction(_) => FaasimStatus::UnknownFunction,
            PlatformError::AlreadyExists(_) => FaasimStatus::AlreadyExists,
            PlatformError::RejectedPayload { .. } | PlatformError::Unsupported(_) => FaasimStatus::Rejected,
            _ => FaasimStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure(FaasimStatus::InvalidArgument, e.to_string())
    }
}

impl From<StatsError> for Failure {
    fn from(e: StatsError) -> Self {
        let status = match e {
            StatsError::Empty | StatsError::InsufficientSamples { .. } => FaasimStatus::InsufficientSamples,
            _ => FaasimStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<CostError> for Failure {
    fn from(e: CostError) -> Self {
        let status = match e {
            CostError::Unbounded => FaasimStatus::Unbounded,
            _ => FaasimStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> FaasimStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_last_error("");
            FaasimStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("panic inside faasim");
            FaasimStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(FaasimStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `p` is null or a valid NUL-terminated string.
unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(FaasimStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// # Safety
/// `p` is null or points to `n` readable values.
unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

fn provider(name: &str) -> Result<ProviderProfile, Failure> {
    ProviderProfile::preset(name)
        .ok_or_else(|| Failure(FaasimStatus::UnknownPreset, format!("unknown provider profile `{name}`")))
}

fn to_ffi(r: &InvocationRecord, cost_usd: f64) -> FaasimRecord {
    FaasimRecord {
        request_id: r.request_id,
        is_cold: r.is_cold,
        outcome: match r.outcome {
            Outcome::Success => FaasimOutcome::Success,
            Outcome::MemoryExceeded => FaasimOutcome::MemoryExceeded,
            Outcome::Unavailable => FaasimOutcome::Unavailable,
        },
        client_send_us: r.client_send.micros(),
        exec_start_us: r.exec_start.micros(),
        exec_end_us: r.exec_end.micros(),
        client_receive_us: r.client_receive.micros(),
        benchmark_time_ms: r.benchmark_time,
        provider_time_ms: r.provider_time,
        client_time_ms: r.client_time,
        memory_used_mb: r.memory_used,
        billed_duration_ms: r.billed_duration,
        billed_memory_mb: r.billed_memory,
        cost_usd,
    }
}

/// Creates a simulator for a built-in provider profile.
///
/// # Safety
/// `provider_name` is a NUL-terminated string and `out` is writable. The
/// handle must be released with [`faasim_simulator_free`].
#[no_mangle]
pub unsafe extern "C" fn faasim_simulator_new(
    provider_name: *const c_char,
    seed: u64,
    client_offset_us: i64,
    out: *mut *mut FaasimSimulator,
) -> FaasimStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let profile = provider(text(provider_name, "provider_name")?)?;
        let options = SimOptions {
            client_offset_us,
            ..SimOptions::seeded(seed)
        };
        let sim = Simulator::new(profile, options)?;
        *out = Box::into_raw(Box::new(FaasimSimulator {
            sim,
            functions: HashMap::new(),
        }));
        Ok(())
    })
}

/// # Safety
/// `sim` is null or a handle from [`faasim_simulator_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn faasim_simulator_free(sim: *mut FaasimSimulator) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// # Safety
/// `sim` is null or a live handle.
unsafe fn handle<'a>(sim: *mut FaasimSimulator) -> Result<&'a mut FaasimSimulator, Failure> {
    sim.as_mut().ok_or_else(|| null("sim"))
}

fn workload_preset(name: &str) -> Result<WorkloadProfile, Failure> {
    WorkloadProfile::preset(name)
        .ok_or_else(|| Failure(FaasimStatus::UnknownPreset, format!("unknown workload `{name}`")))
}

fn deployed<'a>(s: &'a FaasimSimulator, name: &str) -> Result<&'a Deployed, Failure> {
    s.functions
        .get(name)
        .ok_or_else(|| PlatformError::UnknownFunction(name.to_string()).into())
}

/// Deploys a function running a built-in workload, reachable over HTTP.
///
/// # Safety
/// `sim` is a live handle; `name` and `workload` are NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn faasim_create_function(
    sim: *mut FaasimSimulator,
    name: *const c_char,
    workload: *const c_char,
    memory: u32,
) -> FaasimStatus {
    guard(|| {
        let s = handle(sim)?;
        let name = text(name, "name")?;
        let workload = workload_preset(text(workload, "workload")?)?;
        let config = s.sim.function_config(name, workload.clone(), memory);
        let handle = s.sim.create_function(config)?;
        let trigger = s.sim.create_trigger(&handle, TriggerKind::Http)?;
        s.functions.insert(
            name.to_string(),
            Deployed {
                handle,
                trigger,
                workload,
            },
        );
        Ok(())
    })
}

/// Redeploys a function with a new memory size; all its containers go.
///
/// # Safety
/// `sim` is a live handle; `name` is NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn faasim_update_function(
    sim: *mut FaasimSimulator,
    name: *const c_char,
    memory: u32,
) -> FaasimStatus {
    guard(|| {
        let s = handle(sim)?;
        let name = text(name, "name")?;
        let d = deployed(s, name)?;
        let config = s.sim.function_config(name, d.workload.clone(), memory);
        let handle = d.handle.clone();
        s.sim.update_function(&handle, config)?;
        Ok(())
    })
}

/// Invokes a function once at client time `at_client_us` and waits for the
/// response.
///
/// # Safety
/// `sim` is a live handle, `name` is NUL-terminated, `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn faasim_invoke(
    sim: *mut FaasimSimulator,
    name: *const c_char,
    payload: u64,
    at_client_us: i64,
    out: *mut FaasimRecord,
) -> FaasimStatus {
    guard(|| {
        let s = handle(sim)?;
        let name = text(name, "name")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let trigger = deployed(s, name)?.trigger.clone();
        let record = s.sim.invoke(&trigger, payload, ClientInstant(at_client_us))?;
        s.sim.wait_until(record.client_receive)?;
        let cost_usd = cost::invocation_cost(s.sim.profile(), &record).total;
        *out = to_ffi(&record, cost_usd);
        Ok(())
    })
}

/// # Safety
/// `sim` is a live handle and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn faasim_client_now(sim: *const FaasimSimulator, out: *mut i64) -> FaasimStatus {
    guard(|| {
        let s = sim.as_ref().ok_or_else(|| null("sim"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = s.sim.client_now().micros();
        Ok(())
    })
}

/// Lets simulated time pass until the client clock reads `client_us`.
///
/// # Safety
/// `sim` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn faasim_wait_until(sim: *mut FaasimSimulator, client_us: i64) -> FaasimStatus {
    guard(|| {
        handle(sim)?.sim.wait_until(ClientInstant(client_us))?;
        Ok(())
    })
}

/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn faasim_expected_warm_containers(
    d_init: f64,
    delta_t: f64,
    period: f64,
    out: *mut f64,
) -> FaasimStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = model::expected_warm_containers(d_init, delta_t, period)?;
        Ok(())
    })
}

/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn faasim_optimal_batch_size(
    n: u64,
    runtime: f64,
    period: f64,
    out: *mut u64,
) -> FaasimStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = model::optimal_batch_size(n, runtime, period)?;
        Ok(())
    })
}

/// # Safety
/// `provider_name` is NUL-terminated and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn faasim_billed_duration(
    provider_name: *const c_char,
    provider_time_ms: f64,
    out: *mut f64,
) -> FaasimStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if !(provider_time_ms >= 0.0 && provider_time_ms.is_finite()) {
            return Err(Failure(
                FaasimStatus::InvalidArgument,
                format!("provider time {provider_time_ms} must be finite and non-negative"),
            ));
        }
        let p = provider(text(provider_name, "provider_name")?)?;
        *out = cost::billed_duration(&p, provider_time_ms);
        Ok(())
    })
}

/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn faasim_break_even(
    faas_cost_per_million: f64,
    vm_hourly_cost: f64,
    out: *mut u64,
) -> FaasimStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = cost::break_even(faas_cost_per_million, vm_hourly_cost)?.requests_per_hour;
        Ok(())
    })
}

/// # Safety
/// `values` points to `n` readable doubles and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn faasim_median_ci(
    values: *const f64,
    n: usize,
    level: f64,
    out: *mut FaasimInterval,
) -> FaasimStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let set = SampleSet::new(slice(values, n, "values")?.to_vec(), "")?;
        let ci = stats::median_ci(&set, level)?;
        *out = FaasimInterval {
            low: ci.low,
            high: ci.high,
            median: ci.median,
        };
        Ok(())
    })
}

/// # Safety
/// `xs` and `ys` point to `n` readable doubles and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn faasim_ols_fit(
    xs: *const f64,
    ys: *const f64,
    n: usize,
    out: *mut FaasimLinearFit,
) -> FaasimStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let fit = stats::ols_fit(slice(xs, n, "xs")?, slice(ys, n, "ys")?)?;
        *out = FaasimLinearFit {
            slope: fit.slope,
            intercept: fit.intercept,
            r_squared: fit.r_squared,
            adjusted_r_squared: fit.adjusted_r_squared,
        };
        Ok(())
    })
}

/// Message of the last failed call on this thread, empty after a success.
/// The pointer stays valid until the next faasim call on the same thread.
#[no_mangle]
pub extern "C" fn faasim_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn faasim_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    #[test]
    fn error_message_roundtrip() {
        let mut out = 0u64;
        let status = unsafe { faasim_break_even(0.0, 0.0116, &mut out) };
        assert_eq!(status, FaasimStatus::Unbounded);
        let msg = unsafe { CStr::from_ptr(faasim_last_error_message()) };
        assert!(msg.to_str().unwrap().contains("unbounded"));
    }

    #[test]
    fn null_out_pointer() {
        let status = unsafe { faasim_optimal_batch_size(10, 1.0, 380.0, ptr::null_mut()) };
        assert_eq!(status, FaasimStatus::NullPointer);
    }
}
