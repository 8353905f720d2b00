use serde::{Deserialize, Serialize};

use super::{batch_end, ExperimentError};
use crate::cost::{self, UsageEfficiency};
use crate::model::{FunctionConfig, InvocationRecord, Outcome};
use crate::platform::{FunctionHandle, Platform, Trigger, TriggerKind};
use crate::stats::{median_ci, MedianInterval, SampleSet, StatsError, Whiskers};

/// Hourly price of the reference VM used for break-even figures.
pub const REFERENCE_VM_HOURLY: f64 = 0.0116;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfCostConfig {
    pub function: FunctionConfig,
    pub samples_target: usize,
    pub batch_size: usize,
    pub ci_level: f64,
    /// Target half-width of the client-time interval, relative to the median.
    pub ci_width_target: f64,
    pub max_samples: usize,
    /// Cold samples come from unlabelled concurrent bursts.
    pub burst: bool,
    /// Failed invocations tolerated before the run is aborted.
    pub retry_budget: usize,
}

impl PerfCostConfig {
    pub fn new(function: FunctionConfig) -> Self {
        PerfCostConfig {
            function,
            samples_target: 200,
            batch_size: 50,
            ci_level: 0.95,
            ci_width_target: 0.05,
            max_samples: 1000,
            burst: false,
            retry_budget: 100,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::InvalidConfig(m));
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if !(self.batch_size <= self.samples_target && self.samples_target <= self.max_samples) {
            return bad(format!(
                "need batch_size <= samples_target <= max_samples, got {} / {} / {}",
                self.batch_size, self.samples_target, self.max_samples
            ));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return bad(format!("ci level {} outside (0, 1)", self.ci_level));
        }
        if !(self.ci_width_target > 0.0) {
            return bad("ci width target must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub whiskers: Whiskers,
    pub ci: Option<MedianInterval>,
}

impl LevelSummary {
    fn of(values: Vec<f64>, level: f64) -> Result<Self, StatsError> {
        let set = SampleSet::new(values, "ms")?;
        let ci = match median_ci(&set, level) {
            Ok(ci) => Some(ci),
            Err(StatsError::InsufficientSamples { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(LevelSummary {
            whiskers: Whiskers::of(&set),
            ci,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub samples: usize,
    pub benchmark: LevelSummary,
    pub provider: LevelSummary,
    pub client: LevelSummary,
    /// Client-time interval reached the width target before `max_samples`.
    pub ci_target_met: bool,
    /// Records in the sample that really started cold.
    pub truly_cold: usize,
}

impl PhaseSummary {
    fn of(records: &[InvocationRecord], level: f64, ci_target_met: bool) -> Result<Self, StatsError> {
        let level_of = |f: fn(&InvocationRecord) -> f64| {
            LevelSummary::of(records.iter().map(f).collect(), level)
        };
        Ok(PhaseSummary {
            samples: records.len(),
            benchmark: level_of(|r| r.benchmark_time)?,
            provider: level_of(|r| r.provider_time)?,
            client: level_of(|r| r.client_time)?,
            ci_target_met,
            truly_cold: records.iter().filter(|r| r.is_cold).count(),
        })
    }
}

/// Every record issued by the driver, by outcome.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub success: usize,
    pub memory_exceeded: usize,
    pub unavailable: usize,
    /// Cold starts seen while sampling warm invocations.
    pub unexpected_cold: usize,
}

impl OutcomeCounts {
    fn add(&mut self, r: &InvocationRecord) {
        match r.outcome {
            Outcome::Success => self.success += 1,
            Outcome::MemoryExceeded => self.memory_exceeded += 1,
            Outcome::Unavailable => self.unavailable += 1,
        }
    }

    pub fn failures(&self) -> usize {
        self.memory_exceeded + self.unavailable
    }
}

/// All pairwise cold/warm ratios with their summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioDistribution {
    #[serde(skip)]
    pub ratios: Vec<f64>,
    pub count: usize,
    pub summary: Whiskers,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSummary {
    pub cost_per_million_warm: f64,
    pub cost_per_million_cold: f64,
    pub efficiency: UsageEfficiency,
    pub break_even_requests_per_hour: Option<u64>,
    pub vm_hourly_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfCostReport {
    pub provider: String,
    pub workload: String,
    pub memory: u32,
    pub burst: bool,
    pub cold: PhaseSummary,
    pub warm: PhaseSummary,
    pub client_ratio: RatioDistribution,
    pub outcomes: OutcomeCounts,
    pub cost: CostSummary,
    pub cold_records: Vec<InvocationRecord>,
    pub warm_records: Vec<InvocationRecord>,
}

/// All `|cold| * |warm|` ratios `cold_i / warm_j`, cold-major.
pub fn cold_overhead_ratios(cold: &[f64], warm: &[f64]) -> Result<RatioDistribution, ExperimentError> {
    if cold.is_empty() || warm.is_empty() {
        return Err(ExperimentError::InvalidData("cold and warm samples must be non-empty".into()));
    }
    if let Some(w) = warm.iter().find(|w| !(**w > 0.0)) {
        return Err(ExperimentError::InvalidData(format!("warm time {w} is not positive")));
    }
    let ratios: Vec<f64> = cold
        .iter()
        .flat_map(|c| warm.iter().map(move |w| c / w))
        .collect();
    let set = SampleSet::new(ratios.clone(), "ratio")?;
    Ok(RatioDistribution {
        count: ratios.len(),
        summary: Whiskers::of(&set),
        ratios,
    })
}

struct Driver<'a, P: Platform + ?Sized> {
    backend: &'a mut P,
    cfg: &'a PerfCostConfig,
    handle: FunctionHandle,
    trigger: Trigger,
    outcomes: OutcomeCounts,
    issued: Vec<InvocationRecord>,
}

impl<P: Platform + ?Sized> Driver<'_, P> {
    fn batch(&mut self) -> Result<Vec<InvocationRecord>, ExperimentError> {
        let payloads = vec![self.cfg.function.workload.payload_in; self.cfg.batch_size];
        let at = self.backend.client_now();
        let mut records = self.backend.invoke_batch(&self.trigger, &payloads, at)?;
        if let Some(end) = batch_end(&records) {
            self.backend.wait_until(end)?;
        }
        for r in &records {
            self.outcomes.add(r);
        }
        self.issued.extend(records.iter().cloned());
        if self.outcomes.failures() > self.cfg.retry_budget {
            return Err(ExperimentError::Aborted {
                reason: format!(
                    "{} failed invocations exceed the retry budget of {}",
                    self.outcomes.failures(),
                    self.cfg.retry_budget
                ),
                partial: std::mem::take(&mut self.issued),
            });
        }
        records.sort_by_key(|r| (r.client_receive, r.request_id));
        Ok(records)
    }

    fn redeploy(&mut self) -> Result<(), ExperimentError> {
        self.backend.update_function(&self.handle, self.cfg.function.clone())?;
        Ok(())
    }

    /// Grows a sample batch by batch until it holds at least
    /// `samples_target` values and the client-time interval is narrow
    /// enough, or `max_samples` is reached.
    fn collect(
        &mut self,
        mut next_batch: impl FnMut(&mut Self) -> Result<Vec<InvocationRecord>, ExperimentError>,
    ) -> Result<(Vec<InvocationRecord>, bool), ExperimentError> {
        let cfg = self.cfg;
        let max_batches = 10 * cfg.max_samples.div_ceil(cfg.batch_size) + 10;
        let mut batches = 0;
        let mut target = cfg.samples_target;
        let mut sample: Vec<InvocationRecord> = Vec::with_capacity(target);
        loop {
            while sample.len() < target {
                if batches >= max_batches {
                    return Err(ExperimentError::Aborted {
                        reason: format!("sample not filled after {batches} batches"),
                        partial: std::mem::take(&mut self.issued),
                    });
                }
                batches += 1;
                let need = target - sample.len();
                sample.extend(next_batch(self)?.into_iter().take(need));
            }
            let client = SampleSet::new(sample.iter().map(|r| r.client_time).collect(), "ms")?;
            let met = median_ci(&client, cfg.ci_level)?.relative_half_width() <= cfg.ci_width_target;
            if met || target >= cfg.max_samples {
                return Ok((sample, met));
            }
            target = (target + cfg.batch_size).min(cfg.max_samples);
        }
    }
}

/// Samples cold and warm invocations of one function and summarizes time,
/// cost and failures.
pub fn run_perf_cost<P: Platform + ?Sized>(
    cfg: &PerfCostConfig,
    backend: &mut P,
) -> Result<PerfCostReport, ExperimentError> {
    cfg.validate()?;
    let handle = backend.create_function(cfg.function.clone())?;
    let trigger = backend.create_trigger(&handle, TriggerKind::Http)?;
    let mut driver = Driver {
        backend,
        cfg,
        handle,
        trigger,
        outcomes: OutcomeCounts::default(),
        issued: Vec::new(),
    };

    let (cold, cold_met) = driver.collect(|d| {
        d.redeploy()?;
        let batch = d.batch()?;
        Ok(batch
            .into_iter()
            .filter(|r| r.is_success() && (d.cfg.burst || r.is_cold))
            .collect())
    })?;

    driver.redeploy()?;
    driver.batch()?;
    let (warm, warm_met) = driver.collect(|d| {
        let batch = d.batch()?;
        let ok: Vec<InvocationRecord> = batch.into_iter().filter(|r| r.is_success()).collect();
        d.outcomes.unexpected_cold += ok.iter().filter(|r| r.is_cold).count();
        Ok(ok.into_iter().filter(|r| !r.is_cold).collect())
    })?;

    let level = cfg.ci_level;
    let provider = driver.backend.profile().clone();
    let client_ratio = cold_overhead_ratios(
        &cold.iter().map(|r| r.client_time).collect::<Vec<_>>(),
        &warm.iter().map(|r| r.client_time).collect::<Vec<_>>(),
    )?;
    let warm_cost = cost::cost_per_million(&provider, &warm)?;
    let cost = CostSummary {
        cost_per_million_warm: warm_cost,
        cost_per_million_cold: cost::cost_per_million(&provider, &cold)?,
        efficiency: cost::usage_efficiency(&warm)?,
        break_even_requests_per_hour: cost::break_even(warm_cost, REFERENCE_VM_HOURLY)
            .ok()
            .map(|b| b.requests_per_hour),
        vm_hourly_cost: REFERENCE_VM_HOURLY,
    };
    Ok(PerfCostReport {
        provider: provider.name.clone(),
        workload: cfg.function.workload.name.clone(),
        memory: cfg.function.memory,
        burst: cfg.burst,
        cold: PhaseSummary::of(&cold, level, cold_met)?,
        warm: PhaseSummary::of(&warm, level, warm_met)?,
        client_ratio,
        outcomes: driver.outcomes,
        cost,
        cold_records: cold,
        warm_records: warm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_examples() {
        let r = cold_overhead_ratios(&[10.0], &[5.0]).unwrap();
        assert_eq!(r.ratios, vec![2.0]);
        let mut r = cold_overhead_ratios(&[2.0, 4.0], &[1.0, 2.0]).unwrap().ratios;
        r.sort_by(f64::total_cmp);
        assert_eq!(r, vec![1.0, 2.0, 2.0, 4.0]);
        let same = [3.0, 5.0, 7.0];
        assert_eq!(cold_overhead_ratios(&same, &same).unwrap().summary.p50, 1.0);
    }

    #[test]
    fn ratio_rejects_bad_input() {
        assert!(cold_overhead_ratios(&[], &[1.0]).is_err());
        assert!(cold_overhead_ratios(&[1.0], &[0.0]).is_err());
        assert!(cold_overhead_ratios(&[1.0], &[-2.0]).is_err());
    }

    #[test]
    fn config_bounds() {
        let f = FunctionConfig::new(
            "f",
            crate::model::WorkloadProfile::sleeper(0.1, 1000),
            256,
            crate::model::ProviderProfile::aws_like(),
        );
        let mut c = PerfCostConfig::new(f);
        c.validate().unwrap();
        c.batch_size = 300;
        assert!(c.validate().is_err());
        c.batch_size = 50;
        c.max_samples = 100;
        assert!(c.validate().is_err());
    }
}
