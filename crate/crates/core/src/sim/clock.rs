use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{ClientInstant, LinkProfile, ModelError, PlatformInstant};

/// Largest client clock drift accepted, in microseconds per microsecond.
pub const MAX_DRIFT_RATE: f64 = 1e-3;

/// The client's view of time and the network path to the platform.
///
/// The platform clock is the simulator's master clock. The client clock
/// reads `client_at(t) = t + client_offset_us + floor(drift_rate * t)`,
/// which is monotone for the accepted non-negative drift rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimClock {
    pub client_offset_us: i64,
    pub drift_rate: f64,
    pub link: LinkProfile,
}

impl SimClock {
    pub fn new(client_offset_us: i64, drift_rate: f64, link: LinkProfile) -> Result<Self, ModelError> {
        if !(0.0..=MAX_DRIFT_RATE).contains(&drift_rate) {
            return Err(ModelError::InvalidArgument(format!(
                "drift rate {drift_rate} outside [0, {MAX_DRIFT_RATE}]"
            )));
        }
        link.validate()?;
        Ok(SimClock {
            client_offset_us,
            drift_rate,
            link,
        })
    }

    /// How far the platform clock is ahead of the client clock at platform
    /// time zero.
    pub fn platform_lead_us(&self) -> i64 {
        -self.client_offset_us
    }

    pub fn client_at(&self, t: PlatformInstant) -> ClientInstant {
        let drift = (self.drift_rate * t.micros() as f64).floor() as i64;
        ClientInstant(t.micros() + self.client_offset_us + drift)
    }

    /// Earliest platform instant whose client reading is at least `c`.
    pub fn platform_at(&self, c: ClientInstant) -> PlatformInstant {
        let guess = ((c.micros() - self.client_offset_us) as f64 / (1.0 + self.drift_rate)).floor() as i64;
        let mut t = PlatformInstant(guess);
        while self.client_at(t) < c {
            t = t + 1;
        }
        while self.client_at(t + -1) >= c {
            t = t + -1;
        }
        t
    }

    /// One jitter draw in whole microseconds: an exponential with the
    /// link's mean, truncated to `[0, jitter_bound_us]`.
    pub fn sample_jitter<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let mean = self.link.jitter_mean_us;
        let bound = self.link.jitter_bound_us;
        if mean <= 0.0 || bound <= 0 {
            return 0;
        }
        let u: f64 = rng.random();
        let mass = 1.0 - (-(bound as f64) / mean).exp();
        let x = -mean * (1.0 - u * mass).ln();
        (x.floor() as i64).clamp(0, bound)
    }

    /// Latency of the request and response legs, excluding payload
    /// transfer.
    pub fn sample_legs<R: Rng + ?Sized>(&self, rng: &mut R) -> (i64, i64) {
        let base = self.link.rtt_base_us;
        let request_base = (base as f64 * self.link.asymmetry).round() as i64;
        let response_base = base - request_base;
        let request = request_base + self.sample_jitter(rng);
        let response = response_base + self.sample_jitter(rng);
        (request, response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn link(jitter_mean_us: f64, jitter_bound_us: i64) -> LinkProfile {
        LinkProfile {
            rtt_base_us: 10_000,
            jitter_mean_us,
            jitter_bound_us,
            asymmetry: 0.5,
        }
    }

    #[test]
    fn rejects_negative_drift() {
        assert!(SimClock::new(0, -1e-6, link(0.0, 0)).is_err());
        assert!(SimClock::new(0, 0.5, link(0.0, 0)).is_err());
    }

    #[test]
    fn zero_jitter_legs_are_exact() {
        let clock = SimClock::new(0, 0.0, link(0.0, 0)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        assert_eq!(clock.sample_legs(&mut rng), (5_000, 5_000));
        let mut lopsided = link(0.0, 0);
        lopsided.asymmetry = 1.0;
        let clock = SimClock::new(0, 0.0, lopsided).unwrap();
        assert_eq!(clock.sample_legs(&mut rng), (10_000, 0));
    }

    #[test]
    fn jitter_respects_bound() {
        let clock = SimClock::new(0, 0.0, link(2_000.0, 3_000)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let draws: Vec<i64> = (0..20_000).map(|_| clock.sample_jitter(&mut rng)).collect();
        assert!(draws.iter().all(|&j| (0..=3_000).contains(&j)));
        let mean = draws.iter().sum::<i64>() as f64 / draws.len() as f64;
        // truncation pulls the mean below 2000
        assert!(mean > 800.0 && mean < 2_000.0, "mean {mean}");
    }

    proptest! {
        #[test]
        fn platform_at_inverts_client_at(offset in -10_000_000i64..10_000_000, drift in 0.0f64..1e-3, c in 0i64..10_000_000_000) {
            let clock = SimClock::new(offset, drift, link(0.0, 0)).unwrap();
            let t = clock.platform_at(ClientInstant(c));
            prop_assert!(clock.client_at(t) >= ClientInstant(c));
            prop_assert!(clock.client_at(t + -1) < ClientInstant(c));
        }

        #[test]
        fn client_clock_monotone(offset in -1_000_000i64..1_000_000, drift in 0.0f64..1e-3, a in 0i64..1_000_000_000, b in 0i64..1_000_000_000) {
            let clock = SimClock::new(offset, drift, link(0.0, 0)).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let ca = clock.client_at(PlatformInstant(lo));
            let cb = clock.client_at(PlatformInstant(hi));
            prop_assert!(cb - ca >= hi - lo);
        }
    }
}
