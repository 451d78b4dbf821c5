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

//! Four-timestamp clock offset estimation, first on made-up exchanges with
//! a known offset, then live against an in-process master.
//!
//!     cargo run --example clock_sync

use std::collections::HashMap;

use mrctl::master;
use mrctl::node::{estimate_clock_offset, InitOptions, NodeSession};

fn main() {
    let offset = 2_500_000_000i64;
    println!("true offset {:.3} s", offset as f64 / 1e9);
    for (up, down) in [(10_000_000, 10_000_000), (5_000_000, 40_000_000), (40_000_000, 5_000_000)] {
        let t0 = 1_700_000_000_000_000_000i64;
        let t1 = t0 + up + offset;
        let t2 = t1 + 1_000_000;
        let t3 = t2 - offset + down;
        let e = estimate_clock_offset(t0, t1, t2, t3).unwrap();
        println!(
            "  up {:2} ms down {:2} ms: estimate {:.4} s, delay {} ms, error {:.1} ms (bound {:.1} ms)",
            up / 1_000_000,
            down / 1_000_000,
            e.offset_ns / 1e9,
            e.round_trip_delay_ns / 1_000_000,
            (e.offset_ns - offset as f64).abs() / 1e6,
            e.round_trip_delay_ns as f64 / 2e6
        );
    }

    let m = master::start("127.0.0.1:0").unwrap();
    let opts = InitOptions {
        master_uri: Some(m.uri()),
        ..InitOptions::default()
    };
    let s = NodeSession::init("clock_probe", &HashMap::new(), opts).unwrap();
    for _ in 0..3 {
        let e = s.sync_probe().unwrap();
        println!("master: offset {:.0} ns, round trip {} us", e.offset_ns, e.round_trip_delay_ns / 1000);
    }
    m.shutdown();
}
