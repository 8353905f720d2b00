use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{batch_end, ExperimentError};
use crate::model::{halving_factor, EvictionObservation, FunctionConfig, WorkloadProfile};
use crate::platform::{Platform, TriggerKind};

/// Bounds of the period grid search, in seconds.
pub const PERIOD_SEARCH_MIN: u32 = 10;
pub const PERIOD_SEARCH_MAX: u32 = 1600;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvictionConfig {
    pub d_init: Vec<u32>,
    /// Seconds.
    pub delta_t: Vec<f64>,
    /// Seconds each probe invocation sleeps.
    pub sleep_times: Vec<f64>,
    pub memory: Vec<u32>,
    /// Bytes.
    pub code_sizes: Vec<u64>,
}

impl Default for EvictionConfig {
    fn default() -> Self {
        let mut delta_t = vec![1.0];
        delta_t.extend((1..=80).map(|k| 20.0 * k as f64));
        EvictionConfig {
            d_init: (1..=20).collect(),
            delta_t,
            sleep_times: vec![1.0, 10.0],
            memory: vec![128, 1536],
            code_sizes: vec![8_000, 250_000_000],
        }
    }
}

impl EvictionConfig {
    pub fn cell_count(&self) -> usize {
        self.d_init.len()
            * self.delta_t.len()
            * self.sleep_times.len()
            * self.memory.len()
            * self.code_sizes.len()
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::InvalidConfig(m.into()));
        if self.cell_count() == 0 {
            return bad("every grid dimension needs at least one value");
        }
        if self.d_init.contains(&0) {
            return bad("d_init values must be at least 1");
        }
        if self.delta_t.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return bad("delta_t values must be finite and non-negative");
        }
        if self.sleep_times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return bad("sleep times must be finite and non-negative");
        }
        Ok(())
    }
}

/// One grid cell. `d_warm` is `None` when an invocation of the cell failed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvictionCell {
    pub sleep: f64,
    pub memory: u32,
    pub code_size: u64,
    pub d_init: u32,
    pub delta_t: f64,
    pub d_warm: Option<u32>,
}

impl EvictionCell {
    pub fn observation(&self) -> Option<EvictionObservation> {
        self.d_warm.map(|d_warm| EvictionObservation {
            d_init: self.d_init,
            delta_t: self.delta_t,
            d_warm,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvictionFit {
    /// Seconds.
    pub period: f64,
    pub r_squared: f64,
    pub n: usize,
}

/// Fit over the cells of one sleep time; `error` explains a missing fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvictionGroupFit {
    pub sleep: f64,
    pub fit: Option<EvictionFit>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvictionReport {
    pub provider: String,
    pub cells: Vec<EvictionCell>,
    pub missing: usize,
    pub fits: Vec<EvictionGroupFit>,
}

/// Probes every cell of the grid: `d_init` concurrent calls on a fresh
/// deployment, a pause of `delta_t` seconds after the last response, then
/// `d_init` more calls whose warm starts are counted.
pub fn run_eviction_experiment<P: Platform + ?Sized>(
    cfg: &EvictionConfig,
    backend: &mut P,
) -> Result<EvictionReport, ExperimentError> {
    cfg.validate()?;
    let provider = backend.profile().clone();
    let mut cells = Vec::with_capacity(cfg.cell_count());
    for &sleep in &cfg.sleep_times {
        for &memory in &cfg.memory {
            for &code_size in &cfg.code_sizes {
                let name = format!("evict-s{sleep}-m{memory}-c{code_size}");
                let workload = WorkloadProfile::sleeper(sleep, code_size);
                let config = FunctionConfig::new(name, workload, memory, provider.clone());
                let payload = config.workload.payload_in;
                let handle = backend.create_function(config.clone())?;
                let trigger = backend.create_trigger(&handle, TriggerKind::Http)?;
                for &d_init in &cfg.d_init {
                    let payloads = vec![payload; d_init as usize];
                    for &delta_t in &cfg.delta_t {
                        backend.update_function(&handle, config.clone())?;
                        let first = backend.invoke_batch(&trigger, &payloads, backend.client_now())?;
                        let end = batch_end(&first).expect("d_init >= 1");
                        let probe_at = end + (delta_t * 1e6).round() as i64;
                        backend.wait_until(probe_at)?;
                        let second = backend.invoke_batch(&trigger, &payloads, probe_at)?;
                        if let Some(end) = batch_end(&second) {
                            backend.wait_until(end)?;
                        }
                        let valid = first.iter().chain(&second).all(|r| r.is_success());
                        let d_warm = valid.then(|| second.iter().filter(|r| !r.is_cold).count() as u32);
                        cells.push(EvictionCell {
                            sleep,
                            memory,
                            code_size,
                            d_init,
                            delta_t,
                            d_warm,
                        });
                    }
                }
            }
        }
    }

    let mut fits = Vec::new();
    for &sleep in &cfg.sleep_times {
        let obs: Vec<EvictionObservation> = cells
            .iter()
            .filter(|c| c.sleep == sleep)
            .filter_map(EvictionCell::observation)
            .collect();
        fits.push(match fit_eviction_model(&obs) {
            Ok(fit) => EvictionGroupFit {
                sleep,
                fit: Some(fit),
                error: None,
            },
            Err(e) => EvictionGroupFit {
                sleep,
                fit: None,
                error: Some(e.to_string()),
            },
        });
    }
    Ok(EvictionReport {
        provider: provider.name,
        missing: cells.iter().filter(|c| c.d_warm.is_none()).count(),
        cells,
        fits,
    })
}

/// Per-`delta_t` sums that make the squared error of any period a
/// closed-form expression.
#[derive(Default, Clone, Copy)]
struct Moments {
    init_sq: f64,
    cross: f64,
    warm_sq: f64,
}

/// Least-squares estimate of the eviction period by grid search over whole
/// seconds in `[PERIOD_SEARCH_MIN, PERIOD_SEARCH_MAX]`. Periods with equal
/// error form a plateau; the median of the plateau is returned.
pub fn fit_eviction_model(obs: &[EvictionObservation]) -> Result<EvictionFit, ExperimentError> {
    let mut groups: BTreeMap<u64, Moments> = BTreeMap::new();
    for o in obs {
        if !(o.delta_t.is_finite() && o.delta_t >= 0.0) {
            return Err(ExperimentError::InvalidData(format!("delta_t {} is invalid", o.delta_t)));
        }
        let m = groups.entry(o.delta_t.to_bits()).or_default();
        let (i, w) = (o.d_init as f64, o.d_warm as f64);
        m.init_sq += i * i;
        m.cross += i * w;
        m.warm_sq += w * w;
    }
    if groups.len() < 3 {
        return Err(ExperimentError::InsufficientDesign(format!(
            "need 3 distinct delta_t values, got {}",
            groups.len()
        )));
    }
    if obs.iter().all(|o| o.d_warm == o.d_init) {
        return Err(ExperimentError::Unidentifiable(
            "no container was evicted in any cell".into(),
        ));
    }
    let n = obs.len() as f64;
    let mean = obs.iter().map(|o| o.d_warm as f64).sum::<f64>() / n;
    let ss_tot: f64 = obs.iter().map(|o| (o.d_warm as f64 - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(ExperimentError::Unidentifiable("every d_warm is equal".into()));
    }
    let groups: Vec<(f64, Moments)> = groups.into_iter().map(|(k, m)| (f64::from_bits(k), m)).collect();
    let sse = |period: f64| -> f64 {
        groups
            .iter()
            .map(|(dt, m)| {
                let f = halving_factor(*dt, period);
                m.warm_sq - 2.0 * f * m.cross + f * f * m.init_sq
            })
            .sum::<f64>()
            .max(0.0)
    };
    let errors: Vec<(u32, f64)> = (PERIOD_SEARCH_MIN..=PERIOD_SEARCH_MAX)
        .map(|p| (p, sse(p as f64)))
        .collect();
    let best = errors.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
    let scale: f64 = groups.iter().map(|(_, m)| m.init_sq).sum();
    let tolerance = 1e-12 * scale;
    let plateau: Vec<u32> = errors
        .iter()
        .filter(|(_, e)| *e <= best + tolerance)
        .map(|(p, _)| *p)
        .collect();
    let period = plateau[plateau.len() / 2] as f64;

    let (lo, hi) = groups.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (dt, _)| {
        (lo.min(*dt), hi.max(*dt))
    });
    if hi - lo < 2.0 * period {
        return Err(ExperimentError::Unidentifiable(format!(
            "delta_t span {} s covers less than two periods of {period} s",
            hi - lo
        )));
    }
    Ok(EvictionFit {
        period,
        r_squared: 1.0 - best / ss_tot,
        n: obs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::expected_warm_containers;

    fn synthetic(period: f64) -> Vec<EvictionObservation> {
        let cfg = EvictionConfig::default();
        let mut obs = Vec::new();
        for &d in &cfg.d_init {
            for &dt in &cfg.delta_t {
                let w = expected_warm_containers(d as f64, dt, period).unwrap();
                obs.push(EvictionObservation {
                    d_init: d * 16,
                    delta_t: dt,
                    d_warm: (w * 16.0) as u32,
                });
            }
        }
        obs
    }

    #[test]
    fn noise_free_data_fit_exactly() {
        let fit = fit_eviction_model(&synthetic(380.0)).unwrap();
        assert_eq!(fit.r_squared, 1.0);
        assert!((fit.period - 380.0).abs() <= 5.0, "period {}", fit.period);
    }

    #[test]
    fn degenerate_inputs() {
        let all_warm: Vec<_> = [1.0, 2.0, 3.0]
            .iter()
            .map(|&dt| EvictionObservation { d_init: 4, delta_t: dt, d_warm: 4 })
            .collect();
        assert!(matches!(
            fit_eviction_model(&all_warm),
            Err(ExperimentError::Unidentifiable(_))
        ));
        let two: Vec<_> = [1.0, 2.0]
            .iter()
            .map(|&dt| EvictionObservation { d_init: 4, delta_t: dt, d_warm: 1 })
            .collect();
        assert!(matches!(
            fit_eviction_model(&two),
            Err(ExperimentError::InsufficientDesign(_))
        ));
    }

    #[test]
    fn short_span_is_unidentifiable() {
        let obs: Vec<_> = [(1.0, 8), (100.0, 8), (450.0, 4), (500.0, 4)]
            .iter()
            .map(|&(dt, w)| EvictionObservation { d_init: 8, delta_t: dt, d_warm: w })
            .collect();
        assert!(matches!(
            fit_eviction_model(&obs),
            Err(ExperimentError::Unidentifiable(_))
        ));
    }

    #[test]
    fn default_grid_size() {
        assert_eq!(EvictionConfig::default().cell_count(), 20 * 81 * 8);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]

        #[test]
        fn recovers_period_of_noise_free_data(period in 150.0f64..700.0) {
            let fit = fit_eviction_model(&synthetic(period)).unwrap();
            proptest::prop_assert!(fit.r_squared > 0.999, "r2 {}", fit.r_squared);
            proptest::prop_assert!((fit.period - period).abs() <= 0.05 * period, "{} vs {period}", fit.period);
        }
    }
}
