//! Backend-neutral FaaS control interface.
//!
//! Experiments are written against [`Platform`] (and [`EchoLink`] for clock
//! synchronization) only, so the simulator can be swapped for a real cloud
//! backend without touching them.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    ClientInstant, FunctionConfig, InvocationRecord, ModelError, PlatformInstant, ProviderProfile,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlatformError {
    #[error("function {0} already exists")]
    AlreadyExists(String),
    #[error("invalid function configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown function {0}")]
    UnknownFunction(String),
    #[error("payload of {size} bytes exceeds the trigger limit of {limit} bytes")]
    RejectedPayload { size: u64, limit: u64 },
    #[error("trigger kind {0:?} is not supported")]
    Unsupported(TriggerKind),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("link failure: {0}")]
    LinkFailure(String),
}

impl From<ModelError> for PlatformError {
    fn from(e: ModelError) -> Self {
        PlatformError::InvalidConfig(e.to_string())
    }
}

/// Opaque reference to a deployed function.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FunctionHandle {
    pub(crate) name: String,
    pub(crate) id: u64,
}

impl FunctionHandle {
    pub fn name(&self) -> &str {
        &self.name
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TriggerKind {
    Http,
    Sdk,
    Queue,
    Timer,
    Storage,
}

/// Entry point that starts a function's lifetime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trigger {
    pub kind: TriggerKind,
    pub target: String,
    pub payload_size_limit: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Time,
    Mem,
    Cost,
}

/// Provider log query: one metric of one function over a platform-clock
/// interval. A range with `start >= end` selects nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct LogQuery {
    pub function_name: String,
    pub metric: Metric,
    pub time_range: Range<PlatformInstant>,
}

/// One provider-side measurement. `value` is billed milliseconds for
/// [`Metric::Time`], MiB for [`Metric::Mem`] and USD for [`Metric::Cost`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    pub request_id: u64,
    pub timestamp: PlatformInstant,
    pub value: f64,
}

/// One timestamped echo: client send, remote platform stamp, client receive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EchoExchange {
    pub client_send: ClientInstant,
    pub remote: PlatformInstant,
    pub client_receive: ClientInstant,
}

impl EchoExchange {
    pub fn round_trip_us(&self) -> i64 {
        self.client_receive - self.client_send
    }
}

/// The FaaS control surface.
///
/// Calls take `&mut self`; a backend shared between threads is wrapped in a
/// mutex, which serializes state updates. `invoke_batch` submits its
/// payloads concurrently at one client timestamp and returns once all of
/// them completed, in submission order.
pub trait Platform {
    fn profile(&self) -> &ProviderProfile;

    fn create_function(&mut self, config: FunctionConfig) -> Result<FunctionHandle, PlatformError>;

    /// Replaces the configuration and invalidates every execution
    /// environment of the function, so the next invocations start cold.
    fn update_function(
        &mut self,
        handle: &FunctionHandle,
        config: FunctionConfig,
    ) -> Result<(), PlatformError>;

    fn create_trigger(
        &mut self,
        handle: &FunctionHandle,
        kind: TriggerKind,
    ) -> Result<Trigger, PlatformError>;

    fn invoke_batch(
        &mut self,
        trigger: &Trigger,
        payloads: &[u64],
        at: ClientInstant,
    ) -> Result<Vec<InvocationRecord>, PlatformError>;

    fn invoke(
        &mut self,
        trigger: &Trigger,
        payload: u64,
        at: ClientInstant,
    ) -> Result<InvocationRecord, PlatformError> {
        let mut records = self.invoke_batch(trigger, &[payload], at)?;
        records
            .pop()
            .ok_or_else(|| PlatformError::InvalidArgument("backend returned no record".into()))
    }

    fn query_logs(&self, query: &LogQuery) -> Result<Vec<MetricSample>, PlatformError>;

    /// Current reading of the client clock.
    fn client_now(&self) -> ClientInstant;

    /// Lets time pass until the client clock reads `at`.
    fn wait_until(&mut self, at: ClientInstant) -> Result<(), PlatformError>;
}

/// A link that answers timestamped echo requests, used for clock
/// synchronization between the client and the platform.
pub trait EchoLink {
    fn echo(&mut self, at: ClientInstant) -> Result<EchoExchange, PlatformError>;
}
