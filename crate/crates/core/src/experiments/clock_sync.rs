use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::model::ClientInstant;
use crate::platform::{EchoExchange, EchoLink};

/// Hard cap on exchanges; a link whose minimum keeps improving beyond this
/// is reported as a failed synchronization.
pub const MAX_SYNC_EXCHANGES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockSyncResult {
    /// Estimated platform clock minus client clock, in microseconds.
    pub offset_us: f64,
    pub exchanges_used: usize,
    pub min_rtt_us: i64,
    pub first_rtt_us: i64,
    /// `(first_rtt - min_rtt) / min_rtt`.
    pub relative_gap: f64,
    pub best: EchoExchange,
}

/// Exchanges echoes back to back, starting at `start`, until `sync_window`
/// consecutive exchanges bring no lower round-trip time, then takes the
/// midpoint of the fastest exchange: `remote - (send + receive) / 2`.
pub fn estimate_clock_offset<L: EchoLink + ?Sized>(
    link: &mut L,
    start: ClientInstant,
    sync_window: usize,
) -> Result<ClockSyncResult, ExperimentError> {
    if sync_window == 0 {
        return Err(ExperimentError::InvalidConfig("sync window must be at least 1".into()));
    }
    let mut at = start;
    let mut best: Option<EchoExchange> = None;
    let mut first_rtt = 0;
    let mut stale = 0;
    let mut used = 0;
    while stale < sync_window {
        if used >= MAX_SYNC_EXCHANGES {
            return Err(ExperimentError::SyncFailed(format!(
                "no stable minimum after {used} exchanges"
            )));
        }
        let exchange = link
            .echo(at)
            .map_err(|e| ExperimentError::SyncFailed(e.to_string()))?;
        used += 1;
        at = exchange.client_receive;
        let rtt = exchange.round_trip_us();
        match best {
            None => {
                first_rtt = rtt;
                best = Some(exchange);
            }
            Some(b) if rtt < b.round_trip_us() => {
                best = Some(exchange);
                stale = 0;
            }
            Some(_) => stale += 1,
        }
    }
    let best = best.expect("at least one exchange");
    let min_rtt = best.round_trip_us();
    let midpoint = (best.client_send.micros() as f64 + best.client_receive.micros() as f64) / 2.0;
    Ok(ClockSyncResult {
        offset_us: best.remote.micros() as f64 - midpoint,
        exchanges_used: used,
        min_rtt_us: min_rtt,
        first_rtt_us: first_rtt,
        relative_gap: if min_rtt > 0 {
            (first_rtt - min_rtt) as f64 / min_rtt as f64
        } else {
            0.0
        },
        best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PlatformInstant;
    use crate::platform::PlatformError;

    struct Scripted {
        legs: Vec<(i64, i64)>,
        lead: i64,
        calls: usize,
    }

    impl EchoLink for Scripted {
        fn echo(&mut self, at: ClientInstant) -> Result<EchoExchange, PlatformError> {
            let (up, down) = *self
                .legs
                .get(self.calls)
                .ok_or_else(|| PlatformError::LinkFailure("script exhausted".into()))?;
            self.calls += 1;
            Ok(EchoExchange {
                client_send: at,
                remote: PlatformInstant(at.micros() + up + self.lead),
                client_receive: at + (up + down),
            })
        }
    }

    #[test]
    fn stops_after_window_without_improvement() {
        let mut legs = vec![(9, 9), (5, 5), (7, 7)];
        legs.extend(std::iter::repeat_n((6, 6), 10));
        let mut link = Scripted { legs, lead: 500, calls: 0 };
        let r = estimate_clock_offset(&mut link, ClientInstant(0), 3).unwrap();
        assert_eq!(r.exchanges_used, 5);
        assert_eq!(r.min_rtt_us, 10);
        assert_eq!(r.first_rtt_us, 18);
        assert_eq!(r.offset_us, 500.0);
        assert!((r.relative_gap - 0.8).abs() < 1e-12);
    }

    #[test]
    fn asymmetric_minimum_biases_estimate() {
        let mut link = Scripted {
            legs: vec![(10_000, 0); 4],
            lead: 0,
            calls: 0,
        };
        let r = estimate_clock_offset(&mut link, ClientInstant(0), 2).unwrap();
        assert_eq!(r.offset_us, 5_000.0);
    }

    #[test]
    fn link_failure_is_sync_failure() {
        let mut link = Scripted {
            legs: vec![(1, 1); 2],
            lead: 0,
            calls: 0,
        };
        assert!(matches!(
            estimate_clock_offset(&mut link, ClientInstant(0), 5),
            Err(ExperimentError::SyncFailed(_))
        ));
    }
}
