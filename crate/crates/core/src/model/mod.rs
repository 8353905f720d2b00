//! Domain types, provider presets and the analytical platform laws.

mod laws;
mod profile;
mod record;
pub mod time;

pub use laws::{
    benchmark_latency, cold_init_latency, cpu_share, expected_warm_containers, optimal_batch_size,
    predicted_warm_latency, transfer_time,
};
pub(crate) use laws::halving_factor;
pub use profile::{
    BillingMemoryMode, FunctionConfig, LinkProfile, ProviderProfile, WorkloadProfile,
};
pub use record::{EvictionObservation, InvocationRecord, Outcome};
pub use time::{ClientInstant, PlatformInstant};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("invalid function configuration: {0}")]
    InvalidConfig(String),
}

impl ModelError {
    pub(crate) fn invalid_profile(msg: impl Into<String>) -> Self {
        ModelError::InvalidProfile(msg.into())
    }
}
