use serde::{Deserialize, Serialize};

use super::ModelError;

/// How a provider decides the memory figure it bills for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BillingMemoryMode {
    /// Bill the memory declared in the function configuration.
    DeclaredMemory,
    /// Bill the average memory actually used, rounded up to a quantum.
    AverageUsedRoundedUp,
}

/// Network path between the benchmarking client and the platform.
///
/// Each leg of a round trip costs `rtt_base * share` plus a jitter sample
/// drawn from an exponential with mean `jitter_mean` truncated at
/// `jitter_bound`. All values in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkProfile {
    pub rtt_base_us: i64,
    pub jitter_mean_us: f64,
    pub jitter_bound_us: i64,
    /// Fraction of `rtt_base_us` spent on the request leg.
    pub asymmetry: f64,
}

impl LinkProfile {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.rtt_base_us < 0 || self.jitter_bound_us < 0 || self.jitter_mean_us < 0.0 {
            return Err(ModelError::invalid_profile("link latencies must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.asymmetry) {
            return Err(ModelError::invalid_profile("link asymmetry must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Every provider-specific constant the simulator, the billing engine and
/// the experiments need.
///
/// Memory in MiB, latencies in milliseconds, prices in USD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderProfile {
    pub name: String,
    pub memory_min: u32,
    pub memory_max: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_choices: Option<Vec<u32>>,
    /// Seconds.
    pub time_limit: f64,
    pub billing_duration_granularity: f64,
    pub billing_memory_mode: BillingMemoryMode,
    pub billing_memory_granularity: u32,
    pub price_per_gb_second: f64,
    pub price_per_million_invocations: f64,
    pub egress_price_per_gib: f64,
    /// Bytes per metered API unit; zero means a flat per-request API fee.
    pub api_metering_increment: u64,
    pub api_price_per_million_units: f64,
    /// Memory at which one full vCPU is granted.
    pub cpu_full_share_memory: f64,
    pub max_cpu_share: f64,
    /// Seconds between two eviction sweeps.
    pub eviction_period: f64,
    /// Maximum number of in-flight invocations per function.
    pub concurrency_limit: u32,
    /// Invocations a single instance may serve at once; 1 means exclusive
    /// execution environments, larger values model shared function-app
    /// instances.
    pub instance_concurrency: u32,
    pub cold_base_latency: f64,
    pub cold_latency_per_code_mib: f64,
    /// Signed memory sensitivity of the cold start in [-1, 1]; negative
    /// means more memory shortens the cold start.
    pub cold_cpu_sensitivity: f64,
    /// Log-normal sigma applied multiplicatively to cold initialization.
    pub cold_start_jitter: f64,
    /// Half-normal sigma of a multiplicative slowdown on provider time.
    pub provider_time_jitter: f64,
    pub warm_dispatch_latency: f64,
    /// Bytes per second, shared by payload transfer and storage traffic.
    pub network_bandwidth: f64,
    pub failure_rate: f64,
    pub spurious_cold_rate: f64,
    /// Largest payload accepted by the HTTP and SDK triggers, in bytes.
    pub payload_size_limit: u64,
    /// Resolution of the provider's log query service in milliseconds;
    /// zero means exact timestamps.
    pub log_resolution: f64,
    pub link: LinkProfile,
}

impl ProviderProfile {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.memory_min > self.memory_max {
            return Err(ModelError::invalid_profile(format!(
                "{}: memory_min {} exceeds memory_max {}",
                self.name, self.memory_min, self.memory_max
            )));
        }
        if let Some(choices) = &self.memory_choices {
            if let Some(bad) = choices
                .iter()
                .find(|&&m| m < self.memory_min || m > self.memory_max)
            {
                return Err(ModelError::invalid_profile(format!(
                    "{}: memory choice {bad} outside [{}, {}]",
                    self.name, self.memory_min, self.memory_max
                )));
            }
        }
        let non_negative = [
            ("time_limit", self.time_limit),
            ("billing_duration_granularity", self.billing_duration_granularity),
            ("price_per_gb_second", self.price_per_gb_second),
            ("price_per_million_invocations", self.price_per_million_invocations),
            ("egress_price_per_gib", self.egress_price_per_gib),
            ("api_price_per_million_units", self.api_price_per_million_units),
            ("cold_base_latency", self.cold_base_latency),
            ("cold_latency_per_code_mib", self.cold_latency_per_code_mib),
            ("cold_start_jitter", self.cold_start_jitter),
            ("provider_time_jitter", self.provider_time_jitter),
            ("warm_dispatch_latency", self.warm_dispatch_latency),
            ("network_bandwidth", self.network_bandwidth),
            ("log_resolution", self.log_resolution),
        ];
        for (field, value) in non_negative {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(ModelError::invalid_profile(format!(
                    "{}: {field} must be a finite non-negative number",
                    self.name
                )));
            }
        }
        if !(self.eviction_period > 0.0) {
            return Err(ModelError::invalid_profile(format!(
                "{}: eviction_period must be positive",
                self.name
            )));
        }
        if !(self.cpu_full_share_memory > 0.0) || !(self.max_cpu_share > 0.0) {
            return Err(ModelError::invalid_profile(format!(
                "{}: cpu allocation parameters must be positive",
                self.name
            )));
        }
        if self.network_bandwidth == 0.0 {
            return Err(ModelError::invalid_profile(format!(
                "{}: network_bandwidth must be positive",
                self.name
            )));
        }
        if !(-1.0..=1.0).contains(&self.cold_cpu_sensitivity) {
            return Err(ModelError::invalid_profile(format!(
                "{}: cold_cpu_sensitivity must lie in [-1, 1]",
                self.name
            )));
        }
        for (field, p) in [
            ("failure_rate", self.failure_rate),
            ("spurious_cold_rate", self.spurious_cold_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ModelError::invalid_profile(format!(
                    "{}: {field} must be a probability",
                    self.name
                )));
            }
        }
        if self.instance_concurrency == 0 || self.concurrency_limit == 0 {
            return Err(ModelError::invalid_profile(format!(
                "{}: concurrency limits must be at least 1",
                self.name
            )));
        }
        if self.billing_memory_mode == BillingMemoryMode::AverageUsedRoundedUp
            && self.billing_memory_granularity == 0
        {
            return Err(ModelError::invalid_profile(format!(
                "{}: average-used billing needs a memory granularity",
                self.name
            )));
        }
        self.link.validate()
    }

    /// Whether `memory` is a configuration this provider accepts.
    pub fn accepts_memory(&self, memory: u32) -> bool {
        if memory < self.memory_min || memory > self.memory_max {
            return false;
        }
        match &self.memory_choices {
            Some(choices) => choices.contains(&memory),
            None => true,
        }
    }

    /// Memory sizes to sweep when none are given explicitly.
    pub fn default_memory_sweep(&self) -> Vec<u32> {
        match &self.memory_choices {
            Some(choices) => choices.clone(),
            None => [128, 256, 512, 1024, 1536, 2048, 3008]
                .into_iter()
                .filter(|&m| self.accepts_memory(m))
                .collect(),
        }
    }

    /// A copy with every stochastic term switched off.
    pub fn without_jitter(&self) -> ProviderProfile {
        let mut p = self.clone();
        p.cold_start_jitter = 0.0;
        p.provider_time_jitter = 0.0;
        p.failure_rate = 0.0;
        p.spurious_cold_rate = 0.0;
        p.link.jitter_mean_us = 0.0;
        p.link.jitter_bound_us = 0;
        p
    }

    /// AWS Lambda-like constants: static memory 128-3008 MB, one vCPU at
    /// 1792 MB, duration billed in 100 ms quanta against declared memory,
    /// HTTP API metered in 512 KiB units, 380 s eviction period.
    pub fn aws_like() -> ProviderProfile {
        ProviderProfile {
            name: "aws-like".into(),
            memory_min: 128,
            memory_max: 3008,
            memory_choices: None,
            time_limit: 900.0,
            billing_duration_granularity: 100.0,
            billing_memory_mode: BillingMemoryMode::DeclaredMemory,
            billing_memory_granularity: 64,
            price_per_gb_second: 0.000_016_666_7,
            price_per_million_invocations: 0.20,
            egress_price_per_gib: 0.0,
            api_metering_increment: 512 * 1024,
            api_price_per_million_units: 1.0,
            cpu_full_share_memory: 1792.0,
            max_cpu_share: 2.0,
            eviction_period: 380.0,
            concurrency_limit: 1000,
            instance_concurrency: 1,
            cold_base_latency: 110.0,
            cold_latency_per_code_mib: 1.0,
            cold_cpu_sensitivity: -0.3,
            cold_start_jitter: 0.02,
            provider_time_jitter: 0.0,
            warm_dispatch_latency: 3.0,
            network_bandwidth: 100.0e6,
            failure_rate: 0.0,
            spurious_cold_rate: 0.0,
            payload_size_limit: 6_000_000,
            log_resolution: 0.0,
            link: LinkProfile {
                rtt_base_us: 20_000,
                jitter_mean_us: 1_000.0,
                jitter_bound_us: 15_000,
                asymmetry: 0.5,
            },
        }
    }

    /// Azure Functions-like constants. CPU allocation is not published for
    /// this platform; `cpu_full_share_memory` = 1536 is an arbitrary choice.
    /// Average used memory is billed in 128 MB quanta, instances are shared
    /// by up to four concurrent invocations, and logs resolve to one second.
    pub fn azure_like() -> ProviderProfile {
        ProviderProfile {
            name: "azure-like".into(),
            memory_min: 128,
            memory_max: 1536,
            memory_choices: None,
            time_limit: 600.0,
            billing_duration_granularity: 100.0,
            billing_memory_mode: BillingMemoryMode::AverageUsedRoundedUp,
            billing_memory_granularity: 128,
            price_per_gb_second: 0.000_016,
            price_per_million_invocations: 0.20,
            egress_price_per_gib: 0.12,
            api_metering_increment: 0,
            api_price_per_million_units: 0.0,
            cpu_full_share_memory: 1536.0,
            max_cpu_share: 2.0,
            eviction_period: 1140.0,
            concurrency_limit: 200,
            instance_concurrency: 4,
            cold_base_latency: 250.0,
            cold_latency_per_code_mib: 0.5,
            cold_cpu_sensitivity: 0.0,
            cold_start_jitter: 0.3,
            provider_time_jitter: 0.25,
            warm_dispatch_latency: 8.0,
            network_bandwidth: 60.0e6,
            failure_rate: 0.002,
            spurious_cold_rate: 0.0,
            payload_size_limit: 6_000_000,
            log_resolution: 1000.0,
            link: LinkProfile {
                rtt_base_us: 20_000,
                jitter_mean_us: 2_000.0,
                jitter_bound_us: 20_000,
                asymmetry: 0.5,
            },
        }
    }

    /// Google Cloud Functions-like constants: discrete memory tiers, CPU
    /// proportional to memory with a full share at 2048 MB, egress at
    /// $0.12/GiB, cold starts that lengthen with memory and occur
    /// spuriously on warm-eligible calls.
    pub fn gcp_like() -> ProviderProfile {
        ProviderProfile {
            name: "gcp-like".into(),
            memory_min: 128,
            memory_max: 2048,
            memory_choices: Some(vec![128, 256, 512, 1024, 2048]),
            time_limit: 540.0,
            billing_duration_granularity: 100.0,
            billing_memory_mode: BillingMemoryMode::DeclaredMemory,
            billing_memory_granularity: 128,
            price_per_gb_second: 0.000_016_5,
            price_per_million_invocations: 0.40,
            egress_price_per_gib: 0.12,
            api_metering_increment: 0,
            api_price_per_million_units: 0.0,
            cpu_full_share_memory: 2048.0,
            max_cpu_share: 2.0,
            eviction_period: 380.0,
            concurrency_limit: 100,
            instance_concurrency: 1,
            cold_base_latency: 200.0,
            cold_latency_per_code_mib: 1.5,
            cold_cpu_sensitivity: 0.3,
            cold_start_jitter: 0.6,
            provider_time_jitter: 0.0,
            warm_dispatch_latency: 5.0,
            network_bandwidth: 50.0e6,
            failure_rate: 0.002,
            spurious_cold_rate: 0.15,
            payload_size_limit: 6_000_000,
            log_resolution: 0.0,
            link: LinkProfile {
                rtt_base_us: 30_000,
                jitter_mean_us: 2_000.0,
                jitter_bound_us: 20_000,
                asymmetry: 0.5,
            },
        }
    }

    /// Looks up a built-in preset by name.
    pub fn preset(name: &str) -> Option<ProviderProfile> {
        match name {
            "aws-like" => Some(Self::aws_like()),
            "azure-like" => Some(Self::azure_like()),
            "gcp-like" => Some(Self::gcp_like()),
            _ => None,
        }
    }

    pub const PRESET_NAMES: [&'static str; 3] = ["aws-like", "azure-like", "gcp-like"];
}

/// A synthetic benchmark: what one invocation of the function costs.
///
/// Work figures are milliseconds at one full vCPU; `wait_time` is wall time
/// that does not scale with CPU (a sleep or an external call).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadProfile {
    pub name: String,
    pub code_size: u64,
    pub cold_init_work: f64,
    pub compute_work: f64,
    #[serde(default)]
    pub wait_time: f64,
    pub io_bytes_read: u64,
    pub io_bytes_write: u64,
    pub payload_in: u64,
    pub payload_out: u64,
    /// MiB.
    pub peak_memory: f64,
}

const KB: u64 = 1000;
const MB: u64 = 1000 * 1000;

impl WorkloadProfile {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (field, v) in [
            ("cold_init_work", self.cold_init_work),
            ("compute_work", self.compute_work),
            ("wait_time", self.wait_time),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(ModelError::invalid_profile(format!(
                    "{}: {field} must be a finite non-negative number",
                    self.name
                )));
            }
        }
        if !(self.peak_memory > 0.0) {
            return Err(ModelError::invalid_profile(format!(
                "{}: peak_memory must be positive",
                self.name
            )));
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn new(
        name: &str,
        code_size: u64,
        cold_init_work: f64,
        compute_work: f64,
        io_bytes_read: u64,
        io_bytes_write: u64,
        payload_in: u64,
        payload_out: u64,
        peak_memory: f64,
    ) -> Self {
        WorkloadProfile {
            name: name.into(),
            code_size,
            cold_init_work,
            compute_work,
            wait_time: 0.0,
            io_bytes_read,
            io_bytes_write,
            payload_in,
            payload_out,
            peak_memory,
        }
    }

    /// A function that sleeps, used for eviction probing.
    pub fn sleeper(sleep_secs: f64, code_size: u64) -> Self {
        WorkloadProfile {
            name: format!("sleep-{sleep_secs}s"),
            code_size,
            cold_init_work: 20.0,
            compute_work: 0.5,
            wait_time: sleep_secs * 1000.0,
            io_bytes_read: 0,
            io_bytes_write: 0,
            payload_in: 100,
            payload_out: 100,
            peak_memory: 40.0,
        }
    }

    /// Built-in benchmark profiles.
    ///
    /// Warm work is chosen so that benchmark time at one full vCPU with
    /// storage at 100 MB/s matches the measured local warm median, and
    /// cold initialization covers the cold/warm difference.
    pub fn presets() -> Vec<WorkloadProfile> {
        vec![
            Self::new("dynamic-html-py", 30 * KB, 129.2, 1.19, 0, 0, 100, 20 * KB, 42.0),
            Self::new("dynamic-html-js", 25 * KB, 83.7, 0.28, 0, 0, 100, 20 * KB, 38.0),
            Self::new("uploader-py", 2 * MB, 110.3, 26.6, 5 * MB, 5 * MB, 200, 100, 60.0),
            Self::new("uploader-js", 3 * MB, 247.5, 35.3, 5 * MB, 5 * MB, 200, 100, 70.0),
            Self::new("thumbnailer-py", 8 * MB, 140.0, 54.7, MB, 30 * KB, 200, 3 * KB, 110.0),
            Self::new("thumbnailer-js", 12 * MB, 188.5, 114.2, MB, 30 * KB, 200, 3 * KB, 120.0),
            Self::new("video-processing-py", 60 * MB, 112.0, 1334.0, 10 * MB, 5 * MB, 200, 100, 300.0),
            Self::new("compression-py", 2 * MB, 136.5, 170.5, 20 * MB, 10 * MB, 200, 100, 240.0),
            Self::new("image-recognition-py", 120 * MB, 1143.2, 123.8, 100 * KB, 0, 200, 100, 480.0),
            Self::new("graph-pagerank-py", 15 * MB, 88.0, 106.0, 0, 0, 100, 10 * KB, 110.0),
            Self::new("graph-mst-py", 15 * MB, 87.0, 38.0, 0, 0, 100, 10 * KB, 100.0),
            Self::new("graph-bfs-py", 15 * MB, 86.5, 36.5, 0, 0, 100, 78 * KB, 100.0),
        ]
    }

    pub fn preset(name: &str) -> Option<WorkloadProfile> {
        Self::presets().into_iter().find(|w| w.name == name)
    }

    pub fn code_size_mib(&self) -> f64 {
        self.code_size as f64 / (1024.0 * 1024.0)
    }
}

/// A deployable function: workload, declared memory and target provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionConfig {
    pub function_name: String,
    pub workload: WorkloadProfile,
    pub memory: u32,
    pub provider: ProviderProfile,
}

impl FunctionConfig {
    pub fn new(
        function_name: impl Into<String>,
        workload: WorkloadProfile,
        memory: u32,
        provider: ProviderProfile,
    ) -> Self {
        FunctionConfig {
            function_name: function_name.into(),
            workload,
            memory,
            provider,
        }
    }

    /// Checks the configuration against the provider's limits. A workload
    /// whose peak memory exceeds the declaration is still valid; it fails
    /// at run time.
    pub fn validate(&self) -> Result<(), ModelError> {
        self.provider.validate()?;
        self.workload.validate()?;
        if self.function_name.is_empty() {
            return Err(ModelError::InvalidConfig("function name is empty".into()));
        }
        if !self.provider.accepts_memory(self.memory) {
            return Err(ModelError::InvalidConfig(format!(
                "memory {} MB is not offered by {}",
                self.memory, self.provider.name
            )));
        }
        Ok(())
    }
}
