//! Experiment drivers written against the [`Platform`](crate::platform::Platform)
//! interface.

mod clock_sync;
mod eviction;
mod invoc_overhead;
mod perf_cost;

pub use clock_sync::{estimate_clock_offset, ClockSyncResult, MAX_SYNC_EXCHANGES};
pub use eviction::{
    fit_eviction_model, run_eviction_experiment, EvictionCell, EvictionConfig, EvictionFit,
    EvictionGroupFit, EvictionReport, PERIOD_SEARCH_MAX, PERIOD_SEARCH_MIN,
};
pub use invoc_overhead::{
    default_payload_sizes, run_invoc_overhead, InvocOverheadConfig, InvocOverheadReport,
    OverheadPoint,
};
pub use perf_cost::{
    cold_overhead_ratios, run_perf_cost, CostSummary, LevelSummary, OutcomeCounts, PerfCostConfig,
    PerfCostReport, PhaseSummary, RatioDistribution,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::CostError;
use crate::model::InvocationRecord;
use crate::platform::PlatformError;
use crate::stats::StatsError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Platform(#[from] PlatformError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error("experiment aborted: {reason}")]
    Aborted {
        reason: String,
        partial: Vec<InvocationRecord>,
    },
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("insufficient design: {0}")]
    InsufficientDesign(String),
    #[error("model is unidentifiable: {0}")]
    Unidentifiable(String),
    #[error("clock synchronization failed: {0}")]
    SyncFailed(String),
}

/// Which of the three experiments produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    PerfCost,
    InvocOverhead,
    Eviction,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 3] = [
        ExperimentKind::PerfCost,
        ExperimentKind::InvocOverhead,
        ExperimentKind::Eviction,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::PerfCost => "perf-cost",
            ExperimentKind::InvocOverhead => "invoc-overhead",
            ExperimentKind::Eviction => "eviction",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentReport {
    PerfCost(PerfCostReport),
    InvocOverhead(InvocOverheadReport),
    Eviction(EvictionReport),
}

impl ExperimentReport {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            ExperimentReport::PerfCost(_) => ExperimentKind::PerfCost,
            ExperimentReport::InvocOverhead(_) => ExperimentKind::InvocOverhead,
            ExperimentReport::Eviction(_) => ExperimentKind::Eviction,
        }
    }
}

/// Latest client receive time of a batch, or `None` for an empty batch.
pub(crate) fn batch_end(records: &[InvocationRecord]) -> Option<crate::model::ClientInstant> {
    records.iter().map(|r| r.client_receive).max()
}
