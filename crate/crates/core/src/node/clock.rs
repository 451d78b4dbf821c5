// Copyright 2026 The mrctl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Four-timestamp clock offset estimation.
//!
//! A probe records `t0` (client send), `t1` (server receive), `t2` (server
//! send) and `t3` (client receive). With symmetric path delay the offset of
//! the server clock relative to the client is recovered exactly; otherwise
//! the error is bounded by half the round-trip delay.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub fn now_ns() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos() as i64)
        .unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ClockError {
    #[error("sample violates causality (t0={t0}, t1={t1}, t2={t2}, t3={t3})")]
    NegativeDelay { t0: i64, t1: i64, t2: i64, t3: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockEstimate {
    /// Server clock minus client clock, in nanoseconds.
    pub offset_ns: f64,
    /// Round-trip network delay excluding server processing, in nanoseconds.
    pub round_trip_delay_ns: i64,
}

pub fn estimate_clock_offset(t0: i64, t1: i64, t2: i64, t3: i64) -> Result<ClockEstimate, ClockError> {
    let (a, b, c, d) = (t0 as i128, t1 as i128, t2 as i128, t3 as i128);
    let delay = (d - a) - (c - b);
    if d < a || c < b || delay < 0 {
        return Err(ClockError::NegativeDelay { t0, t1, t2, t3 });
    }
    let twice_offset = (b - a) + (c - d);
    Ok(ClockEstimate {
        offset_ns: twice_offset as f64 / 2.0,
        round_trip_delay_ns: delay as i64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const MS: i64 = 1_000_000;

    #[test]
    fn asymmetric_sample() {
        let e = estimate_clock_offset(0, 123 * MS, 124 * MS, 2 * MS).unwrap();
        assert_eq!(e.offset_ns, 122.5 * MS as f64);
        assert_eq!(e.round_trip_delay_ns, MS);
    }

    #[test]
    fn zero_everything() {
        let e = estimate_clock_offset(5, 5, 5, 5).unwrap();
        assert_eq!(e.offset_ns, 0.0);
        assert_eq!(e.round_trip_delay_ns, 0);
    }

    #[test]
    fn causality_violation() {
        assert!(estimate_clock_offset(10, 11, 12, 9).is_err());
        assert!(estimate_clock_offset(0, 12, 11, 20).is_err());
        // server held the request longer than the client waited
        assert!(estimate_clock_offset(0, 0, 50, 10).is_err());
    }

    /// Builds timestamps from a known offset and one-way delays.
    fn simulate(offset: i64, up: i64, hold: i64, down: i64, t0: i64) -> (i64, i64, i64, i64) {
        let t1 = t0 + up + offset;
        let t2 = t1 + hold;
        let t3 = t2 - offset + down;
        (t0, t1, t2, t3)
    }

    #[test]
    fn symmetric_delay_recovers_offset_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let offset = rng.gen_range(-10_000 * MS..10_000 * MS);
            let d = rng.gen_range(0..50 * MS);
            let (a, b, c, e) = simulate(offset, d, rng.gen_range(0..MS), d, rng.gen_range(0..1_000_000 * MS));
            let est = estimate_clock_offset(a, b, c, e).unwrap();
            assert_eq!(est.offset_ns, offset as f64);
            assert_eq!(est.round_trip_delay_ns, 2 * d);
        }
    }
}
