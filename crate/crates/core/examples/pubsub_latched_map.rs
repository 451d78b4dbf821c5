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

//! A map server latches `/map`; subscribers that join later still get the
//! last map immediately.
//!
//!     cargo run --example pubsub_latched_map

use std::collections::HashMap;
use std::path::Path;
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use mrctl::fleetsim::start_map_server;
use mrctl::master;
use mrctl::msg::OccupancyGridMsg;
use mrctl::node::{InitOptions, NodeSession};
use mrctl::worldmap::{load_map, OccupancyGrid};

fn node(uri: &str, name: &str) -> NodeSession {
    let opts = InitOptions {
        master_uri: Some(uri.to_string()),
        ..InitOptions::default()
    };
    NodeSession::init(name, &HashMap::new(), opts).unwrap()
}

fn main() {
    let m = master::start("127.0.0.1:0").unwrap();
    let yaml = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/packages/turtlebot3_gazebo/maps/house.yaml");
    let grid = load_map(&yaml).unwrap();
    let server = node(&m.uri(), "map_server");
    let _srv = start_map_server(&server, &grid, "map").unwrap();
    println!("published {} x {} map once", grid.width, grid.height);

    for (i, delay) in [100u64, 500, 1000].iter().enumerate() {
        thread::sleep(Duration::from_millis(*delay));
        let late = node(&m.uri(), &format!("late_{i}"));
        let (tx, rx) = mpsc::channel();
        let t = Instant::now();
        let _sub = late
            .subscribe_msg::<OccupancyGridMsg, _>("/map", move |msg| {
                let _ = tx.send(msg);
            })
            .unwrap();
        let msg = rx.recv_timeout(Duration::from_secs(5)).expect("latched map");
        let back = OccupancyGrid::from_msg(&msg).unwrap();
        println!(
            "subscriber {i} joined after {delay} ms: got {} x {} map in {:.1} ms, identical: {}",
            msg.width,
            msg.height,
            t.elapsed().as_secs_f64() * 1e3,
            back.cells == grid.cells
        );
    }
    m.shutdown();
}
