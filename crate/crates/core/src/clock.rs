//! Time and identifier sources. Both are injectable so that end-to-end runs
//! can produce byte-stable exports.

use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Mutex;

use chrono::{DateTime, SecondsFormat, Utc};
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub trait Clock: Send + Sync {
    /// Milliseconds since the Unix epoch, UTC.
    fn now_ms(&self) -> i64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> i64 {
        Utc::now().timestamp_millis()
    }
}

/// A clock that starts at a fixed instant and advances by `step_ms` on every read.
#[derive(Debug)]
pub struct SteppingClock {
    next: AtomicI64,
    step_ms: i64,
}

impl SteppingClock {
    pub fn new(start_ms: i64, step_ms: i64) -> Self {
        Self { next: AtomicI64::new(start_ms), step_ms }
    }

    pub fn set(&self, ms: i64) {
        self.next.store(ms, Ordering::SeqCst);
    }
}

impl Clock for SteppingClock {
    fn now_ms(&self) -> i64 {
        self.next.fetch_add(self.step_ms, Ordering::SeqCst)
    }
}

/// RFC 3339 UTC with millisecond precision, e.g. `2026-01-01T00:00:00.000Z`.
pub fn format_timestamp(ms: i64) -> String {
    DateTime::<Utc>::from_timestamp_millis(ms)
        .unwrap_or_default()
        .to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn parse_timestamp(s: &str) -> Option<i64> {
    DateTime::parse_from_rfc3339(s).ok().map(|t| t.timestamp_millis())
}

/// Generates UUID-shaped opaque ids, either from the OS RNG or a seeded stream.
#[allow(clippy::large_enum_variant)]
pub enum IdSource {
    Random,
    Seeded(Mutex<ChaCha8Rng>),
}

impl IdSource {
    pub fn seeded(seed: u64) -> Self {
        IdSource::Seeded(Mutex::new(ChaCha8Rng::seed_from_u64(seed)))
    }

    pub fn next_id(&self) -> String {
        match self {
            IdSource::Random => uuid::Uuid::new_v4().to_string(),
            IdSource::Seeded(rng) => {
                let mut bytes = [0u8; 16];
                rng.lock().unwrap_or_else(|e| e.into_inner()).fill_bytes(&mut bytes);
                uuid::Builder::from_random_bytes(bytes).into_uuid().to_string()
            }
        }
    }
}

impl std::fmt::Debug for IdSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IdSource::Random => f.write_str("IdSource::Random"),
            IdSource::Seeded(_) => f.write_str("IdSource::Seeded"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamps_roundtrip_at_millisecond_precision() {
        let text = format_timestamp(1_767_225_600_123);
        assert_eq!(text, "2026-01-01T00:00:00.123Z");
        assert_eq!(parse_timestamp(&text), Some(1_767_225_600_123));
    }

    #[test]
    fn seeded_ids_repeat() {
        let a = IdSource::seeded(7);
        let b = IdSource::seeded(7);
        let first = a.next_id();
        assert_eq!(first, b.next_id());
        assert_ne!(first, a.next_id());
        assert_eq!(uuid::Uuid::parse_str(&first).unwrap().get_version_num(), 4);
    }

    #[test]
    fn stepping_clock_advances() {
        let clock = SteppingClock::new(1000, 5);
        assert_eq!(clock.now_ms(), 1000);
        assert_eq!(clock.now_ms(), 1005);
    }
}
