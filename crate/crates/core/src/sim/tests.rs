use super::*;
use crate::model::WorkloadProfile;

fn quiet_profile() -> ProviderProfile {
    let mut p = ProviderProfile::aws_like().without_jitter();
    p.failure_rate = 0.0;
    p.spurious_cold_rate = 0.0;
    p
}

fn deploy(sim: &mut Simulator, name: &str, workload: WorkloadProfile) -> (FunctionHandle, Trigger) {
    let config = sim.function_config(name, workload, 1024);
    let handle = sim.create_function(config).unwrap();
    let trigger = sim.create_trigger(&handle, TriggerKind::Http).unwrap();
    (handle, trigger)
}

#[test]
fn first_call_cold_then_warm() {
    let mut sim = Simulator::new(quiet_profile(), SimOptions::seeded(1)).unwrap();
    let (_, trigger) = deploy(&mut sim, "f", WorkloadProfile::sleeper(0.1, 8_000));
    let a = sim.invoke(&trigger, 100, sim.client_now()).unwrap();
    assert!(a.is_cold);
    let b = sim.invoke(&trigger, 100, a.client_receive + 1_000).unwrap();
    assert!(!b.is_cold);
    assert!(a.times_nested() && b.times_nested());
    assert!(a.provider_time > b.provider_time);
}

#[test]
fn update_forces_cold() {
    let mut sim = Simulator::new(quiet_profile(), SimOptions::seeded(2)).unwrap();
    let w = WorkloadProfile::sleeper(0.1, 8_000);
    let (handle, trigger) = deploy(&mut sim, "f", w.clone());
    let a = sim.invoke(&trigger, 0, sim.client_now()).unwrap();
    sim.wait_until(a.client_receive).unwrap();
    let config = sim.function_config("f", w, 2048);
    sim.update_function(&handle, config).unwrap();
    assert_eq!(sim.container_count(&handle).unwrap(), 0);
    let b = sim.invoke(&trigger, 0, sim.client_now()).unwrap();
    assert!(b.is_cold);
}

#[test]
fn batch_spawns_one_container_per_request() {
    let mut sim = Simulator::new(quiet_profile(), SimOptions::seeded(3)).unwrap();
    let (handle, trigger) = deploy(&mut sim, "f", WorkloadProfile::sleeper(1.0, 8_000));
    let records = sim.invoke_batch(&trigger, &[0; 8], sim.client_now()).unwrap();
    assert!(records.iter().all(|r| r.is_cold));
    let latest = records.iter().map(|r| r.client_receive).max().unwrap();
    sim.wait_until(latest).unwrap();
    assert_eq!(sim.idle_count(&handle).unwrap(), 8);
    assert_eq!(sim.step_eviction(&handle).unwrap(), 4);
    assert_eq!(sim.idle_count(&handle).unwrap(), 4);
}

#[test]
fn periodic_eviction_halves_idle_pool() {
    let mut sim = Simulator::new(quiet_profile(), SimOptions::seeded(4)).unwrap();
    let (handle, trigger) = deploy(&mut sim, "f", WorkloadProfile::sleeper(1.0, 8_000));
    let records = sim.invoke_batch(&trigger, &[0; 16], sim.client_now()).unwrap();
    let latest = records.iter().map(|r| r.client_receive).max().unwrap();
    sim.wait_until(latest).unwrap();
    let period = (sim.profile().eviction_period * 1e6) as i64;
    sim.advance(PlatformInstant(period)).unwrap();
    assert_eq!(sim.container_count(&handle).unwrap(), 8);
    sim.advance(PlatformInstant(2 * period)).unwrap();
    assert_eq!(sim.container_count(&handle).unwrap(), 4);
}

#[test]
fn concurrency_limit_rejects_excess() {
    let mut profile = quiet_profile();
    profile.concurrency_limit = 3;
    let mut sim = Simulator::new(profile, SimOptions::seeded(5)).unwrap();
    let (_, trigger) = deploy(&mut sim, "f", WorkloadProfile::sleeper(1.0, 8_000));
    let records = sim.invoke_batch(&trigger, &[0; 5], sim.client_now()).unwrap();
    let unavailable = records.iter().filter(|r| r.outcome == Outcome::Unavailable).count();
    assert_eq!(unavailable, 2);
}

#[test]
fn oversized_payload_rejected() {
    let mut sim = Simulator::new(quiet_profile(), SimOptions::seeded(6)).unwrap();
    let (_, trigger) = deploy(&mut sim, "f", WorkloadProfile::sleeper(0.1, 8_000));
    let limit = trigger.payload_size_limit;
    assert!(matches!(
        sim.invoke(&trigger, limit + 1, sim.client_now()),
        Err(PlatformError::RejectedPayload { .. })
    ));
}

#[test]
fn unsupported_trigger_kinds() {
    let mut sim = Simulator::new(quiet_profile(), SimOptions::seeded(7)).unwrap();
    let (handle, _) = deploy(&mut sim, "f", WorkloadProfile::sleeper(0.1, 8_000));
    assert_eq!(
        sim.create_trigger(&handle, TriggerKind::Queue),
        Err(PlatformError::Unsupported(TriggerKind::Queue))
    );
}

#[test]
fn memory_overrun_fails_and_discards_container() {
    let mut sim = Simulator::new(quiet_profile(), SimOptions::seeded(8)).unwrap();
    let mut w = WorkloadProfile::sleeper(0.1, 8_000);
    w.peak_memory = 400.0;
    let config = sim.function_config("f", w, 128);
    let handle = sim.create_function(config).unwrap();
    let trigger = sim.create_trigger(&handle, TriggerKind::Http).unwrap();
    let r = sim.invoke(&trigger, 0, sim.client_now()).unwrap();
    assert_eq!(r.outcome, Outcome::MemoryExceeded);
    assert_eq!(r.billed_duration, 0.0);
    sim.wait_until(r.client_receive).unwrap();
    assert_eq!(sim.container_count(&handle).unwrap(), 0);
}

#[test]
fn same_seed_same_records() {
    let run = |seed| {
        let mut sim = Simulator::new(ProviderProfile::gcp_like(), SimOptions::seeded(seed)).unwrap();
        let config = sim.function_config("f", WorkloadProfile::preset("thumbnailer-py").unwrap(), 1024);
        let handle = sim.create_function(config).unwrap();
        let trigger = sim.create_trigger(&handle, TriggerKind::Http).unwrap();
        let mut out = Vec::new();
        for _ in 0..5 {
            let batch = sim.invoke_batch(&trigger, &[10; 4], sim.client_now()).unwrap();
            let latest = batch.iter().map(|r| r.client_receive).max().unwrap();
            sim.wait_until(latest).unwrap();
            out.extend(batch);
        }
        out
    };
    assert_eq!(run(11), run(11));
    assert_ne!(run(11), run(12));
}

#[test]
fn logs_are_coarsened_to_resolution() {
    let mut sim = Simulator::new(ProviderProfile::azure_like().without_jitter(), SimOptions::seeded(9)).unwrap();
    let config = sim.function_config("f", WorkloadProfile::sleeper(0.1, 8_000), 512);
    let handle = sim.create_function(config).unwrap();
    let trigger = sim.create_trigger(&handle, TriggerKind::Http).unwrap();
    let r = sim.invoke(&trigger, 0, sim.client_now()).unwrap();
    let logs = sim
        .query_logs(&LogQuery {
            function_name: "f".into(),
            metric: Metric::Time,
            time_range: PlatformInstant(0)..PlatformInstant(i64::MAX),
        })
        .unwrap();
    if r.is_success() {
        assert_eq!(logs.len(), 1);
    }
    assert!(logs.iter().all(|s| s.timestamp.micros() % 1_000_000 == 0));
}

#[test]
fn echo_link_failure() {
    let options = SimOptions {
        link_failure_after: Some(2),
        ..SimOptions::seeded(1)
    };
    let mut sim = Simulator::new(quiet_profile(), options).unwrap();
    assert!(sim.echo(sim.client_now()).is_ok());
    assert!(sim.echo(sim.client_now()).is_ok());
    assert!(matches!(sim.echo(sim.client_now()), Err(PlatformError::LinkFailure(_))));
}

#[test]
fn trace_records_lifecycle() {
    let options = SimOptions {
        trace: true,
        ..SimOptions::seeded(1)
    };
    let mut sim = Simulator::new(quiet_profile(), options).unwrap();
    let (_, trigger) = deploy(&mut sim, "f", WorkloadProfile::sleeper(0.1, 8_000));
    let r = sim.invoke(&trigger, 0, sim.client_now()).unwrap();
    sim.wait_until(r.client_receive).unwrap();
    let trace = sim.trace().unwrap();
    assert!(matches!(trace[0], TraceEvent::Deploy { .. }));
    assert!(trace.iter().any(|e| matches!(e, TraceEvent::Invoke { cold: true, .. })));
    assert!(trace.iter().any(|e| matches!(e, TraceEvent::Complete { .. })));
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn successful_records_nest_and_bill_whole_quanta(
            seed in any::<u64>(),
            preset in 0usize..3,
            batch in 1usize..12,
            gap_s in 0u32..900,
            offset in -5_000_000i64..5_000_000,
        ) {
            let profile = ProviderProfile::preset(ProviderProfile::PRESET_NAMES[preset]).unwrap();
            let options = SimOptions { client_offset_us: offset, ..SimOptions::seeded(seed) };
            let mut sim = Simulator::new(profile.clone(), options).unwrap();
            let (_, trigger) = deploy(&mut sim, "f", WorkloadProfile::preset("dynamic-html-py").unwrap());
            let mut at = sim.client_now();
            for _ in 0..3 {
                let records = sim.invoke_batch(&trigger, &vec![1_000; batch], at).unwrap();
                prop_assert_eq!(records.len(), batch);
                for r in records.iter().filter(|r| r.is_success()) {
                    prop_assert!(r.times_nested(), "{:?}", r);
                    prop_assert!(r.client_send <= r.client_receive);
                    prop_assert!(r.exec_start <= r.exec_end);
                    let quanta = r.billed_duration / profile.billing_duration_granularity;
                    prop_assert!(r.billed_duration >= r.provider_time);
                    prop_assert!((quanta - quanta.round()).abs() < 1e-9);
                }
                let latest = records.iter().map(|r| r.client_receive).max().unwrap();
                sim.wait_until(latest).unwrap();
                at = latest + gap_s as i64 * 1_000_000;
            }
        }
    }
}
