//! Billing engine and economics: per-invocation cost, resource efficiency,
//! and the pay-per-use versus rented-VM break-even point.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BillingMemoryMode, InvocationRecord, ProviderProfile};
use crate::stats;

const BYTES_PER_GIB: f64 = 1024.0 * 1024.0 * 1024.0;
const MIB_PER_GIB: f64 = 1024.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostError {
    #[error("empty sample of records")]
    EmptySample,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("pay-per-use cost is zero; break-even is unbounded")]
    Unbounded,
}

/// Billed duration in milliseconds: the smallest multiple of the provider's
/// quantum that covers `provider_time`, and at least one quantum.
pub fn billed_duration(provider: &ProviderProfile, provider_time: f64) -> f64 {
    round_up_to_quantum(provider_time, provider.billing_duration_granularity)
}

/// Billed memory in MiB under the provider's memory billing mode.
pub fn billed_memory(provider: &ProviderProfile, declared: f64, average_used: f64) -> f64 {
    match provider.billing_memory_mode {
        BillingMemoryMode::DeclaredMemory => declared,
        BillingMemoryMode::AverageUsedRoundedUp => {
            round_up_to_quantum(average_used, provider.billing_memory_granularity as f64)
        }
    }
}

fn round_up_to_quantum(value: f64, quantum: f64) -> f64 {
    if quantum <= 0.0 {
        return value.max(0.0);
    }
    let units = (value / quantum).ceil().max(1.0);
    units * quantum
}

/// Dollar amounts charged for one invocation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub compute_cost: f64,
    pub request_cost: f64,
    pub egress_cost: f64,
    pub api_cost: f64,
    pub total: f64,
    /// Total divided by the number of invocations covered.
    pub per_invocation: f64,
    /// Set for failed invocations, which are not billed.
    pub unbilled_failure: bool,
}

impl CostBreakdown {
    fn from_parts(compute: f64, request: f64, egress: f64, api: f64, invocations: f64) -> Self {
        let total = compute + request + egress + api;
        CostBreakdown {
            compute_cost: compute,
            request_cost: request,
            egress_cost: egress,
            api_cost: api,
            total,
            per_invocation: if invocations > 0.0 { total / invocations } else { 0.0 },
            unbilled_failure: false,
        }
    }

    /// Cost of `count` identical invocations.
    pub fn scaled(&self, count: f64) -> CostBreakdown {
        let mut c = CostBreakdown::from_parts(
            self.compute_cost * count,
            self.request_cost * count,
            self.egress_cost * count,
            self.api_cost * count,
            count,
        );
        c.unbilled_failure = self.unbilled_failure;
        c
    }
}

/// Charges for data returned by the function: egress per GiB plus metered
/// API units (or a flat API fee when the provider does not meter).
pub fn transfer_charges(provider: &ProviderProfile, payload_out: u64) -> (f64, f64) {
    let egress = payload_out as f64 / BYTES_PER_GIB * provider.egress_price_per_gib;
    let units = if provider.api_metering_increment > 0 {
        payload_out.div_ceil(provider.api_metering_increment).max(1)
    } else {
        1
    };
    let api = units as f64 * provider.api_price_per_million_units / 1e6;
    (egress, api)
}

/// Cost of a single invocation. Failed invocations cost nothing and are
/// flagged.
pub fn invocation_cost(provider: &ProviderProfile, record: &InvocationRecord) -> CostBreakdown {
    if !record.is_success() {
        return CostBreakdown {
            unbilled_failure: true,
            ..CostBreakdown::default()
        };
    }
    let compute = record.billed_memory / MIB_PER_GIB * record.billed_duration / 1000.0
        * provider.price_per_gb_second;
    let request = provider.price_per_million_invocations / 1e6;
    let (egress, api) = transfer_charges(provider, record.payload_out);
    CostBreakdown::from_parts(compute, request, egress, api, 1.0)
}

/// Median per-invocation cost scaled to one million invocations.
pub fn cost_per_million(
    provider: &ProviderProfile,
    records: &[InvocationRecord],
) -> Result<f64, CostError> {
    let costs: Vec<f64> = records
        .iter()
        .filter(|r| r.is_success())
        .map(|r| invocation_cost(provider, r).total)
        .collect();
    let m = stats::median(&costs).ok_or(CostError::EmptySample)?;
    Ok(m * 1e6)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UsageEfficiency {
    pub time_efficiency: f64,
    pub memory_efficiency: f64,
}

/// Median ratios of used to billed duration and memory over successful
/// records.
pub fn usage_efficiency(records: &[InvocationRecord]) -> Result<UsageEfficiency, CostError> {
    let ok: Vec<&InvocationRecord> = records
        .iter()
        .filter(|r| r.is_success() && r.billed_duration > 0.0 && r.billed_memory > 0.0)
        .collect();
    let time: Vec<f64> = ok.iter().map(|r| r.provider_time / r.billed_duration).collect();
    let mem: Vec<f64> = ok.iter().map(|r| r.memory_used / r.billed_memory).collect();
    Ok(UsageEfficiency {
        time_efficiency: stats::median(&time).ok_or(CostError::EmptySample)?,
        memory_efficiency: stats::median(&mem).ok_or(CostError::EmptySample)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakEvenResult {
    pub requests_per_hour: u64,
    pub faas_cost_per_request: f64,
    pub vm_hourly_cost: f64,
}

/// Hourly request rate at which pay-per-use spending equals renting a VM,
/// rounded to the nearest request.
pub fn break_even(faas_cost_per_million: f64, vm_hourly_cost: f64) -> Result<BreakEvenResult, CostError> {
    if !(vm_hourly_cost > 0.0) || !vm_hourly_cost.is_finite() {
        return Err(CostError::InvalidArgument(format!(
            "vm hourly cost must be positive, got {vm_hourly_cost}"
        )));
    }
    if faas_cost_per_million == 0.0 {
        return Err(CostError::Unbounded);
    }
    if !(faas_cost_per_million > 0.0) || !faas_cost_per_million.is_finite() {
        return Err(CostError::InvalidArgument(format!(
            "faas cost must be positive, got {faas_cost_per_million}"
        )));
    }
    let per_request = faas_cost_per_million / 1e6;
    Ok(BreakEvenResult {
        requests_per_hour: (vm_hourly_cost / per_request).round() as u64,
        faas_cost_per_request: per_request,
        vm_hourly_cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClientInstant, Outcome, PlatformInstant};
    use proptest::prelude::*;

    pub(crate) fn record(provider_time: f64, memory_used: f64, declared: u32, payload_out: u64) -> InvocationRecord {
        InvocationRecord {
            request_id: 0,
            function_name: "f".into(),
            is_cold: false,
            client_send: ClientInstant(0),
            exec_start: PlatformInstant(0),
            exec_end: PlatformInstant(0),
            client_receive: ClientInstant(0),
            benchmark_time: provider_time,
            provider_time,
            client_time: provider_time,
            memory_declared: declared,
            memory_used,
            billed_duration: 0.0,
            billed_memory: 0.0,
            payload_in: 0,
            payload_out,
            outcome: Outcome::Success,
        }
    }

    #[test]
    fn duration_rounding() {
        let aws = ProviderProfile::aws_like();
        assert_eq!(billed_duration(&aws, 1.19), 100.0);
        assert_eq!(billed_duration(&aws, 100.0), 100.0);
        assert_eq!(billed_duration(&aws, 100.1), 200.0);
        assert_eq!(billed_duration(&aws, 0.0), 100.0);
    }

    #[test]
    fn memory_billing_modes() {
        let aws = ProviderProfile::aws_like();
        let azure = ProviderProfile::azure_like();
        assert_eq!(billed_memory(&aws, 1024.0, 179.0), 1024.0);
        assert_eq!(billed_memory(&azure, 1536.0, 150.0), 256.0);
        assert_eq!(billed_memory(&azure, 1536.0, 128.0), 128.0);
        assert_eq!(billed_memory(&azure, 1536.0, 3.0), 128.0);
    }

    #[test]
    fn egress_and_api_charges() {
        let aws = ProviderProfile::aws_like();
        let gcp = ProviderProfile::gcp_like();
        let (e, a) = transfer_charges(&aws, 78_000);
        assert_eq!(e, 0.0);
        assert!(((e + a) * 1e6 - 1.0).abs() < 1e-9);
        let (e, a) = transfer_charges(&gcp, 78_000);
        assert_eq!(a, 0.0);
        // 78e9 B / 2^30 * 0.12
        assert!((e * 1e6 - 8.7172).abs() < 1e-3);
        let (e, _) = transfer_charges(&gcp, 0);
        assert_eq!(e, 0.0);
    }

    #[test]
    fn invocation_cost_parts() {
        let aws = ProviderProfile::aws_like();
        let mut r = record(50.0, 100.0, 1024, 0);
        r.billed_duration = billed_duration(&aws, r.provider_time);
        r.billed_memory = billed_memory(&aws, 1024.0, r.memory_used);
        let c = invocation_cost(&aws, &r);
        assert!((c.compute_cost - 0.1 * aws.price_per_gb_second).abs() < 1e-15);
        assert!((c.request_cost - 0.2e-6).abs() < 1e-20);
        assert_eq!(c.egress_cost, 0.0);
        assert!((c.total - (c.compute_cost + c.request_cost + c.egress_cost + c.api_cost)).abs() < 1e-18);

        r.outcome = Outcome::MemoryExceeded;
        let c = invocation_cost(&aws, &r);
        assert!(c.unbilled_failure);
        assert_eq!(c.total, 0.0);
    }

    #[test]
    fn cost_per_million_is_median_based() {
        let mut free = ProviderProfile::aws_like();
        free.price_per_million_invocations = 0.0;
        free.api_price_per_million_units = 0.0;
        free.price_per_gb_second = 2.5e-5;
        // 1 GiB for 100 ms at 2.5e-5 -> 2.5e-6 per invocation
        let mk = |ms: f64| {
            let mut r = record(ms, 10.0, 1024, 0);
            r.billed_duration = billed_duration(&free, ms);
            r.billed_memory = 1024.0;
            r
        };
        let uniform = vec![mk(40.0); 9];
        assert!((cost_per_million(&free, &uniform).unwrap() - 2.5).abs() < 1e-9);
        assert!((cost_per_million(&free, &uniform[..1]).unwrap() - 2.5).abs() < 1e-9);

        let mut mixed = uniform.clone();
        mixed.push(mk(10_000.0));
        let median = cost_per_million(&free, &mixed).unwrap();
        let mean = mixed.iter().map(|r| invocation_cost(&free, r).total).sum::<f64>()
            / mixed.len() as f64
            * 1e6;
        assert!((median - 2.5).abs() < 1e-9);
        assert!(mean > 2.0 * median);
        assert_eq!(cost_per_million(&free, &[]), Err(CostError::EmptySample));
    }

    #[test]
    fn efficiency_examples() {
        let mut r = record(50.0, 179.0, 1024, 0);
        r.billed_duration = 100.0;
        r.billed_memory = 1024.0;
        let e = usage_efficiency(&[r.clone()]).unwrap();
        assert_eq!(e.time_efficiency, 0.5);
        assert!((e.memory_efficiency - 0.1748).abs() < 1e-3);
        r.provider_time = 100.0;
        r.memory_used = 1024.0;
        let e = usage_efficiency(&[r]).unwrap();
        assert_eq!((e.time_efficiency, e.memory_efficiency), (1.0, 1.0));
    }

    #[test]
    fn break_even_examples() {
        assert_eq!(break_even(2.5, 0.0116).unwrap().requests_per_hour, 4640);
        assert_eq!(break_even(50.0, 0.0116).unwrap().requests_per_hour, 232);
        assert_eq!(break_even(32.1, 0.0116).unwrap().requests_per_hour, 361);
        assert_eq!(break_even(0.0, 0.0116), Err(CostError::Unbounded));
        assert!(break_even(1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn billed_duration_properties(t in 0.001f64..1e7, u in 0.001f64..1e7) {
            let aws = ProviderProfile::aws_like();
            let b = billed_duration(&aws, t);
            prop_assert!(b >= t);
            prop_assert!(b - t < aws.billing_duration_granularity);
            prop_assert_eq!((b / 100.0).fract(), 0.0);
            prop_assert_eq!(billed_duration(&aws, b), b);
            if t <= u {
                prop_assert!(b <= billed_duration(&aws, u));
            }
        }

        #[test]
        fn break_even_inverse_proportional(c in 0.01f64..100.0) {
            let a = break_even(c, 0.0116).unwrap().requests_per_hour as f64;
            let b = break_even(2.0 * c, 0.0116).unwrap().requests_per_hour as f64;
            prop_assert!((a / 2.0 - b).abs() <= 1.0);
        }

        #[test]
        fn cost_monotone_in_inputs(ms in 1.0f64..5000.0, extra in 0.0f64..5000.0, out in 0u64..10_000_000, more in 0u64..10_000_000) {
            let gcp = ProviderProfile::gcp_like();
            let mk = |ms: f64, out: u64| {
                let mut r = record(ms, 100.0, 512, out);
                r.billed_duration = billed_duration(&gcp, ms);
                r.billed_memory = 512.0;
                r
            };
            let a = invocation_cost(&gcp, &mk(ms, out));
            let b = invocation_cost(&gcp, &mk(ms + extra, out + more));
            prop_assert!(b.total >= a.total);
        }
    }
}
