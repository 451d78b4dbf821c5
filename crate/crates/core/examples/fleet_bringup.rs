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

//! Runs a master, a map server and three simulated robots in one process,
//! sends each robot a goal and waits for the outcomes.
//!
//!     cargo run --release --example fleet_bringup

use std::collections::HashMap;
use std::path::Path;
use std::thread;
use std::time::{Duration, Instant};

use mrctl::fleetsim::{spawn_fleet, start_map_server, FleetConfig, FleetOptions, GoalState};
use mrctl::master;
use mrctl::msg::{GoalMsg, Pose2D};
use mrctl::node::{InitOptions, NodeSession};
use mrctl::worldmap::load_map;

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let world = load_map(&root.join("packages/turtlebot3_gazebo/maps/house.yaml")).unwrap();
    let cfg = FleetConfig::load(&root.join("fleet/three_robots.toml")).unwrap();

    let m = master::start("127.0.0.1:0").unwrap();
    let uri = m.uri();
    let opts = InitOptions {
        master_uri: Some(uri.clone()),
        ..InitOptions::default()
    };
    let server = NodeSession::init("map_server", &HashMap::new(), opts.clone()).unwrap();
    let _srv = start_map_server(&server, &world, "map").unwrap();

    let mut fopts = FleetOptions::new(uri.clone(), world);
    fopts.realtime = false;
    let mut fleet = spawn_fleet(&cfg, &fopts).unwrap();
    println!("robots: {}", fleet.names().join(" "));

    let commander = NodeSession::init("commander", &HashMap::new(), opts).unwrap();
    let goals = [("tb3_0", -4.0, 2.0), ("tb3_1", 4.0, 2.0), ("tb3_2", 2.0, 3.0)];
    let mut pubs = Vec::new();
    for (robot, x, y) in goals {
        let p = commander.advertise_msg::<GoalMsg>(&format!("/{robot}/move_base_simple/goal"), false).unwrap();
        p.wait_for_subscribers(1, Duration::from_secs(5));
        p.publish_msg(&GoalMsg {
            id: format!("{robot}_goal"),
            target: Pose2D { x, y, theta: 0.0 },
        })
        .unwrap();
        println!("sent {robot} to ({x}, {y})");
        pubs.push(p);
    }

    let t = Instant::now();
    while t.elapsed() < Duration::from_secs(60) {
        let snaps = fleet.snapshots();
        if snaps.iter().all(|s| s.goal.as_ref().is_some_and(|(_, g)| g.is_terminal())) {
            break;
        }
        thread::sleep(Duration::from_millis(100));
    }
    for s in fleet.snapshots() {
        let state = s.goal.as_ref().map(|g| g.1).unwrap_or(GoalState::Pending);
        println!(
            "{}: {state:?} after {} ticks, estimate ({:.2}, {:.2}), truth ({:.2}, {:.2})",
            s.name, s.tick, s.pose_est.x, s.pose_est.y, s.pose_true.x, s.pose_true.y
        );
    }
    fleet.shutdown();
    m.shutdown();
}
