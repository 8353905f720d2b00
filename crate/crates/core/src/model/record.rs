use serde::{Deserialize, Serialize};

use super::time::{ClientInstant, PlatformInstant};
use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Success,
    MemoryExceeded,
    Unavailable,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::MemoryExceeded => "memory-exceeded",
            Outcome::Unavailable => "unavailable",
        }
    }
}

/// One invocation as seen by the client and the provider.
///
/// `client_send`/`client_receive` are client-clock readings and
/// `exec_start`/`exec_end` platform-clock readings; `client_time` is derived
/// from the former pair only. Durations are milliseconds, memory MiB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvocationRecord {
    pub request_id: u64,
    pub function_name: String,
    pub is_cold: bool,
    pub client_send: ClientInstant,
    pub exec_start: PlatformInstant,
    pub exec_end: PlatformInstant,
    pub client_receive: ClientInstant,
    pub benchmark_time: f64,
    pub provider_time: f64,
    pub client_time: f64,
    pub memory_declared: u32,
    pub memory_used: f64,
    pub billed_duration: f64,
    pub billed_memory: f64,
    pub payload_in: u64,
    pub payload_out: u64,
    pub outcome: Outcome,
}

impl InvocationRecord {
    pub fn is_success(&self) -> bool {
        self.outcome == Outcome::Success
    }

    /// `benchmark_time <= provider_time <= client_time`.
    pub fn times_nested(&self) -> bool {
        self.benchmark_time <= self.provider_time && self.provider_time <= self.client_time
    }
}

/// Outcome of one eviction probe: how many of `d_init` containers were
/// still warm after `delta_t` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvictionObservation {
    pub d_init: u32,
    pub delta_t: f64,
    pub d_warm: u32,
}

impl EvictionObservation {
    pub fn new(d_init: u32, delta_t: f64, d_warm: u32) -> Result<Self, ModelError> {
        if d_warm > d_init {
            return Err(ModelError::InvalidArgument(format!(
                "d_warm {d_warm} exceeds d_init {d_init}"
            )));
        }
        if !(delta_t >= 0.0) {
            return Err(ModelError::InvalidArgument("delta_t must be non-negative".into()));
        }
        Ok(EvictionObservation { d_init, delta_t, d_warm })
    }
}
