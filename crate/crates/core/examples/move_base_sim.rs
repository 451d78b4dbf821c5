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

//! Drives one simulated robot to a goal in the house map without any
//! networking: plan, follow, localize, report the goal state.
//!
//!     cargo run --release --example move_base_sim -- [gx gy]

use std::path::Path;

use mrctl::fleetsim::{FleetConfig, GoalState, RobotConfig, RobotSim};
use mrctl::geom::Pose2;
use mrctl::msg::Twist;
use mrctl::worldmap::load_map;

fn main() {
    let yaml = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/packages/turtlebot3_gazebo/maps/house.yaml");
    let world = load_map(&yaml).unwrap();
    let v: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let (gx, gy) = if v.len() == 2 { (v[0], v[1]) } else { (-4.0, 2.0) };

    let robot = RobotConfig::new("tb3_0", -7.0, -1.0, 1.57);
    let cfg = FleetConfig {
        robots: vec![robot.clone()],
        ..FleetConfig::default()
    };
    let mut sim = RobotSim::new(&robot, world.clone(), &world, &cfg, 0);
    sim.set_goal("g1", Pose2::new(gx, gy, 0.0));

    let max_ticks = 60_000 / cfg.tick_ms;
    let mut state = GoalState::Pending;
    for _ in 0..max_ticks {
        let out = sim.step(Twist::default());
        if let Some((id, s)) = out.goal_update {
            println!("t={:6.2} s goal {id}: {s:?}", out.stamp as f64 / 1e9);
            state = s;
        }
        if state == GoalState::Succeeded || state == GoalState::Aborted {
            break;
        }
        if sim.tick % 250 == 0 {
            let p = sim.pose_est();
            println!("t={:6.2} s at ({:.2}, {:.2}, {:.2})", out.stamp as f64 / 1e9, p.x, p.y, p.theta);
        }
    }
    let est = sim.pose_est();
    let truth = sim.state.pose_true;
    println!(
        "final {state:?}: estimate ({:.2}, {:.2}), truth ({:.2}, {:.2}), localization error {:.3} m",
        est.x,
        est.y,
        truth.x,
        truth.y,
        est.distance(&truth)
    );
}
