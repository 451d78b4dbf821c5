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

//! Tracks a simulated robot with Monte Carlo localization over 20 seeds in
//! the synthetic room, printing the final error of each run.
//!
//!     cargo run --release --example mcl_localization -- [--global] [--trace] [--seeds N]

use std::time::Instant;

use mrctl::fleetsim::scenarios::{mcl_trial, synthetic_room, TrialConfig};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cfg = TrialConfig {
        global: args.iter().any(|a| a == "--global"),
        ..TrialConfig::default()
    };
    let trace = args.iter().any(|a| a == "--trace");
    let seeds: u64 = args
        .iter()
        .position(|a| a == "--seeds")
        .and_then(|i| args.get(i + 1))
        .and_then(|v| v.parse().ok())
        .unwrap_or(20);

    let grid = synthetic_room();
    let t = Instant::now();
    let mut ok = 0;
    for seed in 0..seeds {
        let r = mcl_trial(&grid, seed, &cfg);
        let pass = r.position_error < 0.2 && r.heading_error < 0.1;
        ok += pass as usize;
        println!(
            "seed {seed:3}: position error {:.3} m, heading error {:.3} rad{}",
            r.position_error,
            r.heading_error,
            if pass { "" } else { "  (not converged)" }
        );
        if trace {
            let t: Vec<String> = r.trace.iter().map(|e| format!("{e:.2}")).collect();
            println!("          {}", t.join(" "));
        }
    }
    println!("{ok}/{seeds} converged in {:.1} s", t.elapsed().as_secs_f64());
}
