//! Deterministic discrete-event FaaS platform.
//!
//! The simulator owns a virtual platform clock, a pool of containers per
//! function, a periodic eviction process and the client's clock. Every
//! random draw comes from a single seeded ChaCha stream and events at equal
//! timestamps are ordered by kind and then by insertion sequence, so a
//! given seed and invocation schedule always yields the same records.

mod clock;
mod pool;

pub use clock::{SimClock, MAX_DRIFT_RATE};
pub use pool::{Container, ContainerId, ContainerState, Pool};

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::cost;
use crate::model::{
    benchmark_latency, cold_init_latency, time::ms_to_us_ceil, transfer_time, ClientInstant,
    FunctionConfig, InvocationRecord, ModelError, Outcome, PlatformInstant, ProviderProfile,
};
use crate::platform::{
    EchoExchange, EchoLink, FunctionHandle, LogQuery, Metric, MetricSample, Platform,
    PlatformError, Trigger, TriggerKind,
};

/// Relative standard deviation of sampled memory use around the peak.
const MEMORY_SPREAD: f64 = 0.04;
/// Sampled memory use never leaves `peak * (1 +- MEMORY_BOUND)`.
const MEMORY_BOUND: f64 = 0.10;

/// Knobs that are not part of the provider profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimOptions {
    pub seed: u64,
    pub client_offset_us: i64,
    pub drift_rate: f64,
    /// Record an event trace.
    pub trace: bool,
    /// Echo exchanges succeed this many times, then the link fails.
    pub link_failure_after: Option<u64>,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            seed: 0,
            client_offset_us: 0,
            drift_rate: 0.0,
            trace: false,
            link_failure_after: None,
        }
    }
}

impl SimOptions {
    pub fn seeded(seed: u64) -> Self {
        SimOptions {
            seed,
            ..SimOptions::default()
        }
    }
}

/// One line of the optional event trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum TraceEvent {
    Deploy {
        t: PlatformInstant,
        function: String,
        generation: u64,
    },
    Invoke {
        t: PlatformInstant,
        request_id: u64,
        function: String,
        container: Option<ContainerId>,
        cold: bool,
        outcome: Outcome,
    },
    Complete {
        t: PlatformInstant,
        function: String,
        container: ContainerId,
    },
    Evict {
        t: PlatformInstant,
        function: String,
        evicted: usize,
        remaining: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    /// An invocation finished and releases its slot.
    Completion {
        function: String,
        container: ContainerId,
        generation: u64,
        discard: bool,
    },
    /// Periodic eviction sweep of one function.
    Eviction { function: String, generation: u64 },
}

impl Event {
    // completions first, so a container freed at a sweep instant is eligible
    fn rank(&self) -> u8 {
        match self {
            Event::Completion { .. } => 0,
            Event::Eviction { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Scheduled {
    at: PlatformInstant,
    rank: u8,
    seq: u64,
    event: Event,
}

#[derive(Debug, Clone, Copy)]
struct LogEntry {
    request_id: u64,
    at: PlatformInstant,
    billed_duration: f64,
    memory_used: f64,
    cost: f64,
}

#[derive(Debug)]
struct FunctionState {
    id: u64,
    config: FunctionConfig,
    generation: u64,
    deployed_at: PlatformInstant,
    pool: Pool,
    in_flight: u32,
    log: Vec<LogEntry>,
}

/// A request waiting to be executed inside a batch.
struct Arrival {
    at: PlatformInstant,
    request_id: u64,
    index: usize,
    payload: u64,
    response_leg_us: i64,
}

#[derive(Debug)]
pub struct Simulator {
    profile: ProviderProfile,
    clock: SimClock,
    rng: ChaCha8Rng,
    now: PlatformInstant,
    functions: BTreeMap<String, FunctionState>,
    events: BinaryHeap<Reverse<Scheduled>>,
    next_function_id: u64,
    next_request_id: u64,
    next_container_id: ContainerId,
    next_seq: u64,
    injected_failures: u64,
    echoes: u64,
    link_failure_after: Option<u64>,
    trace: Option<Vec<TraceEvent>>,
    memory_noise: Normal<f64>,
}

impl Simulator {
    pub fn new(profile: ProviderProfile, options: SimOptions) -> Result<Self, ModelError> {
        profile.validate()?;
        let clock = SimClock::new(options.client_offset_us, options.drift_rate, profile.link)?;
        Ok(Simulator {
            profile,
            clock,
            rng: ChaCha8Rng::seed_from_u64(options.seed),
            now: PlatformInstant(0),
            functions: BTreeMap::new(),
            events: BinaryHeap::new(),
            next_function_id: 0,
            next_request_id: 0,
            next_container_id: 0,
            next_seq: 0,
            injected_failures: 0,
            echoes: 0,
            link_failure_after: options.link_failure_after,
            trace: options.trace.then(Vec::new),
            memory_noise: Normal::new(0.0, MEMORY_SPREAD).expect("finite sigma"),
        })
    }

    /// Builds a function configuration that targets this platform.
    pub fn function_config(
        &self,
        name: impl Into<String>,
        workload: crate::model::WorkloadProfile,
        memory: u32,
    ) -> FunctionConfig {
        FunctionConfig::new(name, workload, memory, self.profile.clone())
    }

    pub fn now(&self) -> PlatformInstant {
        self.now
    }

    pub fn clock(&self) -> &SimClock {
        &self.clock
    }

    /// Number of invocations turned into `Unavailable` by failure injection.
    pub fn injected_failures(&self) -> u64 {
        self.injected_failures
    }

    pub fn trace(&self) -> Option<&[TraceEvent]> {
        self.trace.as_deref()
    }

    pub fn take_trace(&mut self) -> Vec<TraceEvent> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    fn state(&self, handle: &FunctionHandle) -> Result<&FunctionState, PlatformError> {
        self.functions
            .get(&handle.name)
            .filter(|f| f.id == handle.id)
            .ok_or_else(|| PlatformError::UnknownFunction(handle.name.clone()))
    }

    fn state_mut(&mut self, handle: &FunctionHandle) -> Result<&mut FunctionState, PlatformError> {
        self.functions
            .get_mut(&handle.name)
            .filter(|f| f.id == handle.id)
            .ok_or_else(|| PlatformError::UnknownFunction(handle.name.clone()))
    }

    pub fn containers(&self, handle: &FunctionHandle) -> Result<Vec<Container>, PlatformError> {
        Ok(self.state(handle)?.pool.iter().cloned().collect())
    }

    pub fn idle_count(&self, handle: &FunctionHandle) -> Result<usize, PlatformError> {
        Ok(self.state(handle)?.pool.idle_count())
    }

    pub fn container_count(&self, handle: &FunctionHandle) -> Result<usize, PlatformError> {
        Ok(self.state(handle)?.pool.len())
    }

    fn push_event(&mut self, at: PlatformInstant, event: Event) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.events.push(Reverse(Scheduled {
            at,
            rank: event.rank(),
            seq,
            event,
        }));
    }

    fn record_trace(&mut self, event: TraceEvent) {
        if let Some(trace) = &mut self.trace {
            trace.push(event);
        }
    }

    fn eviction_period_us(&self) -> i64 {
        (self.profile.eviction_period * 1e6).round() as i64
    }

    fn deploy(&mut self, name: &str) {
        let now = self.now;
        let period = self.eviction_period_us();
        let f = self.functions.get_mut(name).expect("deployed function exists");
        f.generation += 1;
        f.pool.clear();
        f.deployed_at = now;
        let generation = f.generation;
        self.push_event(
            now + period,
            Event::Eviction {
                function: name.to_string(),
                generation,
            },
        );
        self.record_trace(TraceEvent::Deploy {
            t: now,
            function: name.to_string(),
            generation,
        });
    }

    /// Processes every scheduled event up to and including `to`, then moves
    /// the platform clock there.
    pub fn advance(&mut self, to: PlatformInstant) -> Result<(), PlatformError> {
        if to < self.now {
            return Err(PlatformError::InvalidArgument(format!(
                "cannot move platform time back from {} to {}",
                self.now, to
            )));
        }
        while let Some(Reverse(next)) = self.events.peek() {
            if next.at > to {
                break;
            }
            let Reverse(scheduled) = self.events.pop().expect("peeked");
            self.now = scheduled.at;
            self.handle_event(scheduled.event);
        }
        self.now = to;
        Ok(())
    }

    fn handle_event(&mut self, event: Event) {
        let now = self.now;
        match event {
            Event::Completion {
                function,
                container,
                generation,
                discard,
            } => {
                let Some(f) = self.functions.get_mut(&function) else {
                    return;
                };
                f.in_flight = f.in_flight.saturating_sub(1);
                if f.generation != generation {
                    return;
                }
                if discard {
                    f.pool.remove(container);
                } else if let Some(c) = f.pool.get_mut(container) {
                    c.active = c.active.saturating_sub(1);
                    if c.active == 0 {
                        c.state = ContainerState::Idle;
                        c.last_used_at = now;
                    }
                }
                self.record_trace(TraceEvent::Complete {
                    t: now,
                    function,
                    container,
                });
            }
            Event::Eviction {
                function,
                generation,
            } => {
                let current = self.functions.get(&function).map(|f| f.generation);
                if current != Some(generation) {
                    return;
                }
                self.evict_function(&function);
                let period = self.eviction_period_us();
                self.push_event(
                    now + period,
                    Event::Eviction {
                        function,
                        generation,
                    },
                );
            }
        }
    }

    fn evict_function(&mut self, name: &str) -> usize {
        let now = self.now;
        let Some(f) = self.functions.get_mut(name) else {
            return 0;
        };
        let evicted = f.pool.evict_half_idle().len();
        let remaining = f.pool.len();
        self.record_trace(TraceEvent::Evict {
            t: now,
            function: name.to_string(),
            evicted,
            remaining,
        });
        evicted
    }

    /// Runs one eviction sweep of `handle` immediately: `ceil(k/2)` of its
    /// `k` idle containers go, least recently used first; busy containers
    /// wait for the next sweep.
    pub fn step_eviction(&mut self, handle: &FunctionHandle) -> Result<usize, PlatformError> {
        self.state(handle)?;
        Ok(self.evict_function(&handle.name))
    }

    /// Picks the container for an invocation arriving now: the most
    /// recently used idle container, else (for shared instances) the most
    /// recently used one with a free slot, else a new cold container.
    /// Warm-eligible calls still start cold with the profile's spurious
    /// cold rate. `None` means the concurrency limit is exhausted.
    pub fn route_invocation(
        &mut self,
        handle: &FunctionHandle,
    ) -> Result<Option<(ContainerId, bool)>, PlatformError> {
        self.state(handle)?;
        Ok(self.route(&handle.name))
    }

    fn route(&mut self, name: &str) -> Option<(ContainerId, bool)> {
        let now = self.now;
        let limit = self.profile.concurrency_limit;
        let slots = self.profile.instance_concurrency;
        let spurious = self.profile.spurious_cold_rate;
        let f = self.functions.get_mut(name)?;
        if f.in_flight >= limit {
            return None;
        }
        let candidate = f.pool.mru_idle().or_else(|| {
            if slots > 1 {
                f.pool.mru_with_slot(slots)
            } else {
                None
            }
        });
        if let Some(id) = candidate {
            let forced_cold = spurious > 0.0 && self.rng.random::<f64>() < spurious;
            if !forced_cold {
                let c = f.pool.get_mut(id).expect("candidate in pool");
                c.active += 1;
                c.state = ContainerState::Busy;
                f.in_flight += 1;
                return Some((id, false));
            }
        }
        let id = self.next_container_id;
        self.next_container_id += 1;
        f.pool.insert(Container {
            id,
            function_name: name.to_string(),
            created_at: now,
            last_used_at: now,
            state: ContainerState::Busy,
            active: 1,
        });
        f.in_flight += 1;
        Some((id, true))
    }

    fn sample_memory(&mut self, peak: f64) -> f64 {
        let noise = self.memory_noise.sample(&mut self.rng);
        peak * (1.0 + noise.clamp(-MEMORY_BOUND, MEMORY_BOUND))
    }

    fn unavailable_record(
        &mut self,
        name: &str,
        memory: u32,
        arrival: &Arrival,
        client_send: ClientInstant,
        t: PlatformInstant,
    ) -> InvocationRecord {
        let t_recv = t + arrival.response_leg_us;
        let client_receive = self.clock.client_at(t_recv);
        self.record_trace(TraceEvent::Invoke {
            t,
            request_id: arrival.request_id,
            function: name.to_string(),
            container: None,
            cold: false,
            outcome: Outcome::Unavailable,
        });
        InvocationRecord {
            request_id: arrival.request_id,
            function_name: name.to_string(),
            is_cold: false,
            client_send,
            exec_start: t,
            exec_end: t,
            client_receive,
            benchmark_time: 0.0,
            provider_time: 0.0,
            client_time: (client_receive - client_send) as f64 / 1000.0,
            memory_declared: memory,
            memory_used: 0.0,
            billed_duration: 0.0,
            billed_memory: 0.0,
            payload_in: arrival.payload,
            payload_out: 0,
            outcome: Outcome::Unavailable,
        }
    }

    /// Executes one arrived request at the current platform time.
    fn execute(&mut self, name: &str, arrival: &Arrival, client_send: ClientInstant) -> InvocationRecord {
        let t = self.now;
        let (config, generation) = {
            let f = &self.functions[name];
            (f.config.clone(), f.generation)
        };
        let profile = &self.profile;
        if profile.failure_rate > 0.0 && self.rng.random::<f64>() < profile.failure_rate {
            self.injected_failures += 1;
            return self.unavailable_record(name, config.memory, arrival, client_send, t);
        }
        let Some((container, is_cold)) = self.route(name) else {
            return self.unavailable_record(name, config.memory, arrival, client_send, t);
        };

        let workload = &config.workload;
        let dispatch_us = ms_to_us_ceil(self.profile.warm_dispatch_latency);
        let bench_us = ms_to_us_ceil(benchmark_latency(workload, &config));
        let cold_us = if is_cold {
            let mut init = cold_init_latency(workload, &config);
            if self.profile.cold_start_jitter > 0.0 {
                let ln = LogNormal::new(0.0, self.profile.cold_start_jitter).expect("finite sigma");
                init *= ln.sample(&mut self.rng);
            }
            ms_to_us_ceil(init)
        } else {
            0
        };
        let mut provider_us = dispatch_us + cold_us + bench_us;
        if self.profile.provider_time_jitter > 0.0 {
            let n = Normal::new(0.0, self.profile.provider_time_jitter).expect("finite sigma");
            let slowdown = 1.0 + n.sample(&mut self.rng).abs();
            provider_us = (provider_us as f64 * slowdown).ceil() as i64;
        }
        let exec_start = t + dispatch_us + cold_us;
        let exec_end = exec_start + bench_us;
        let provider_end = t + provider_us;
        let response_us = arrival.response_leg_us
            + ms_to_us_ceil(transfer_time(workload.payload_out, self.profile.network_bandwidth));
        let client_receive = self.clock.client_at(provider_end + response_us);

        let memory_used = self.sample_memory(workload.peak_memory);
        let outcome = if memory_used > config.memory as f64 {
            Outcome::MemoryExceeded
        } else {
            Outcome::Success
        };
        let provider_time = provider_us as f64 / 1000.0;
        let (billed_duration, billed_memory) = if outcome == Outcome::Success {
            (
                cost::billed_duration(&self.profile, provider_time),
                cost::billed_memory(&self.profile, config.memory as f64, memory_used),
            )
        } else {
            (0.0, 0.0)
        };
        let record = InvocationRecord {
            request_id: arrival.request_id,
            function_name: name.to_string(),
            is_cold,
            client_send,
            exec_start,
            exec_end,
            client_receive,
            benchmark_time: bench_us as f64 / 1000.0,
            provider_time,
            client_time: (client_receive - client_send) as f64 / 1000.0,
            memory_declared: config.memory,
            memory_used,
            billed_duration,
            billed_memory,
            payload_in: arrival.payload,
            payload_out: workload.payload_out,
            outcome,
        };
        debug_assert!(!record.is_success() || record.times_nested());

        let entry = LogEntry {
            request_id: record.request_id,
            at: t,
            billed_duration,
            memory_used,
            cost: cost::invocation_cost(&self.profile, &record).total,
        };
        self.functions
            .get_mut(name)
            .expect("function exists")
            .log
            .push(entry);
        self.push_event(
            provider_end,
            Event::Completion {
                function: name.to_string(),
                container,
                generation,
                discard: outcome != Outcome::Success,
            },
        );
        self.record_trace(TraceEvent::Invoke {
            t,
            request_id: record.request_id,
            function: name.to_string(),
            container: Some(container),
            cold: is_cold,
            outcome,
        });
        record
    }

    fn check_config(&self, config: &FunctionConfig) -> Result<(), PlatformError> {
        config.validate()?;
        if config.provider != self.profile {
            return Err(PlatformError::InvalidConfig(format!(
                "function targets provider {} but this platform is {}",
                config.provider.name, self.profile.name
            )));
        }
        Ok(())
    }
}

impl Platform for Simulator {
    fn profile(&self) -> &ProviderProfile {
        &self.profile
    }

    fn create_function(&mut self, config: FunctionConfig) -> Result<FunctionHandle, PlatformError> {
        self.check_config(&config)?;
        let name = config.function_name.clone();
        if self.functions.contains_key(&name) {
            return Err(PlatformError::AlreadyExists(name));
        }
        let id = self.next_function_id;
        self.next_function_id += 1;
        self.functions.insert(
            name.clone(),
            FunctionState {
                id,
                config,
                generation: 0,
                deployed_at: self.now,
                pool: Pool::default(),
                in_flight: 0,
                log: Vec::new(),
            },
        );
        self.deploy(&name);
        Ok(FunctionHandle { name, id })
    }

    fn update_function(
        &mut self,
        handle: &FunctionHandle,
        config: FunctionConfig,
    ) -> Result<(), PlatformError> {
        self.state(handle)?;
        self.check_config(&config)?;
        if config.function_name != handle.name {
            return Err(PlatformError::InvalidConfig(format!(
                "cannot rename {} to {}",
                handle.name, config.function_name
            )));
        }
        self.state_mut(handle)?.config = config;
        self.deploy(&handle.name);
        Ok(())
    }

    fn create_trigger(
        &mut self,
        handle: &FunctionHandle,
        kind: TriggerKind,
    ) -> Result<Trigger, PlatformError> {
        self.state(handle)?;
        match kind {
            TriggerKind::Http | TriggerKind::Sdk => Ok(Trigger {
                kind,
                target: handle.name.clone(),
                payload_size_limit: self.profile.payload_size_limit,
            }),
            other => Err(PlatformError::Unsupported(other)),
        }
    }

    fn invoke_batch(
        &mut self,
        trigger: &Trigger,
        payloads: &[u64],
        at: ClientInstant,
    ) -> Result<Vec<InvocationRecord>, PlatformError> {
        if !matches!(trigger.kind, TriggerKind::Http | TriggerKind::Sdk) {
            return Err(PlatformError::Unsupported(trigger.kind));
        }
        if !self.functions.contains_key(&trigger.target) {
            return Err(PlatformError::UnknownFunction(trigger.target.clone()));
        }
        if let Some(&size) = payloads.iter().find(|&&p| p > trigger.payload_size_limit) {
            return Err(PlatformError::RejectedPayload {
                size,
                limit: trigger.payload_size_limit,
            });
        }
        let t_send = self.clock.platform_at(at);
        let bandwidth = self.profile.network_bandwidth;
        let mut arrivals: Vec<Arrival> = payloads
            .iter()
            .enumerate()
            .map(|(index, &payload)| {
                let request_id = self.next_request_id;
                self.next_request_id += 1;
                let (request_leg, response_leg_us) = self.clock.sample_legs(&mut self.rng);
                let transfer = ms_to_us_ceil(transfer_time(payload, bandwidth));
                Arrival {
                    at: t_send + request_leg + transfer,
                    request_id,
                    index,
                    payload,
                    response_leg_us,
                }
            })
            .collect();
        arrivals.sort_by_key(|a| (a.at, a.request_id));

        let mut out: Vec<Option<InvocationRecord>> = vec![None; payloads.len()];
        for arrival in &arrivals {
            // a request that arrives before already-processed platform time
            // is served at the current instant
            let t = arrival.at.max(self.now);
            self.advance(t)?;
            let record = self.execute(&trigger.target, arrival, at);
            out[arrival.index] = Some(record);
        }
        Ok(out.into_iter().map(|r| r.expect("every arrival executed")).collect())
    }

    fn query_logs(&self, query: &LogQuery) -> Result<Vec<MetricSample>, PlatformError> {
        let f = self
            .functions
            .get(&query.function_name)
            .ok_or_else(|| PlatformError::UnknownFunction(query.function_name.clone()))?;
        let resolution_us = (self.profile.log_resolution * 1000.0).round() as i64;
        let range = &query.time_range;
        Ok(f
            .log
            .iter()
            .filter(|e| range.start <= e.at && e.at < range.end)
            .map(|e| {
                let timestamp = if resolution_us > 0 {
                    PlatformInstant(e.at.micros().div_euclid(resolution_us) * resolution_us)
                } else {
                    e.at
                };
                let value = match query.metric {
                    Metric::Time => e.billed_duration,
                    Metric::Mem => e.memory_used,
                    Metric::Cost => e.cost,
                };
                MetricSample {
                    request_id: e.request_id,
                    timestamp,
                    value,
                }
            })
            .collect())
    }

    fn client_now(&self) -> ClientInstant {
        self.clock.client_at(self.now)
    }

    fn wait_until(&mut self, at: ClientInstant) -> Result<(), PlatformError> {
        let t = self.clock.platform_at(at);
        if t > self.now {
            self.advance(t)?;
        }
        Ok(())
    }
}

impl EchoLink for Simulator {
    fn echo(&mut self, at: ClientInstant) -> Result<EchoExchange, PlatformError> {
        if let Some(limit) = self.link_failure_after {
            if self.echoes >= limit {
                return Err(PlatformError::LinkFailure(format!(
                    "echo link dropped after {limit} exchanges"
                )));
            }
        }
        self.echoes += 1;
        let t_send = self.clock.platform_at(at);
        let (request, response) = self.clock.sample_legs(&mut self.rng);
        let remote = t_send + request;
        let t_recv = remote + response;
        if t_recv > self.now {
            self.advance(t_recv)?;
        }
        Ok(EchoExchange {
            client_send: at,
            remote,
            client_receive: self.clock.client_at(t_recv),
        })
    }
}

#[cfg(test)]
mod tests;
