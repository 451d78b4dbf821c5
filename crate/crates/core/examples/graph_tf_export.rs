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

//! Brings up a map server and three simulated robots, then prints the node
//! graph and the TF tree as DOT.
//!
//!     cargo run --example graph_tf_export > fleet.dot

use std::collections::HashMap;
use std::path::Path;
use std::thread;
use std::time::Duration;

use mrctl::diagnostics::{collect_tf, export_node_graph, export_tf_tree, graph_components};
use mrctl::fleetsim::{spawn_fleet, start_map_server, FleetConfig, FleetOptions};
use mrctl::master;
use mrctl::node::{InitOptions, NodeSession};
use mrctl::worldmap::load_map;

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let world = load_map(&root.join("packages/turtlebot3_gazebo/maps/house.yaml")).unwrap();
    let cfg = FleetConfig::load(&root.join("fleet/three_robots.toml")).unwrap();
    let m = master::start("127.0.0.1:0").unwrap();
    let opts = InitOptions {
        master_uri: Some(m.uri()),
        ..InitOptions::default()
    };
    let server = NodeSession::init("map_server", &HashMap::new(), opts.clone()).unwrap();
    let _srv = start_map_server(&server, &world, "map").unwrap();
    let mut fleet = spawn_fleet(&cfg, &FleetOptions::new(m.uri(), world)).unwrap();
    thread::sleep(Duration::from_millis(500));

    let probe = NodeSession::init("graph_probe", &HashMap::new(), opts).unwrap();
    let st = probe.master().system_state().unwrap();
    println!("// node graph");
    print!("{}", export_node_graph(&st));
    let groups = graph_components(&st, &["/map", "/map_metadata"]);
    eprintln!("{} connected groups once the shared map topics are left out", groups.len());

    let tf = collect_tf(&probe, Duration::from_millis(500)).unwrap();
    println!("// tf tree");
    print!("{}", export_tf_tree(&tf));
    fleet.shutdown();
    m.shutdown();
}
