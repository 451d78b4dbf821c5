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

//! Expands the three-robot bringup file and prints each node with its
//! namespace, command line and private parameters. Arguments given as
//! `name:=value` override the file's defaults.
//!
//!     cargo run --example launch_three_robots -- [first_tb3_x_pos:=-5.0 ...]

use std::collections::BTreeMap;
use std::path::Path;

use mrctl::launch::{plan_launch, LaunchContext, PackageIndex};

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/packages");
    let index = ["turtlebot3_gazebo", "map_server"]
        .iter()
        .fold(PackageIndex::new(), |i, p| i.with(*p, root.join(p)));
    let args: BTreeMap<String, String> = std::env::args()
        .skip(1)
        .filter_map(|a| a.split_once(":=").map(|(k, v)| (k.to_string(), v.to_string())))
        .collect();
    let entry = root.join("turtlebot3_gazebo/launch/multi_turtlebot3.launch");
    let plan = match plan_launch(&entry, &args, &LaunchContext::new(index)) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    };
    for n in &plan.nodes {
        println!("{} [{} {}] on {}", n.name, n.pkg, n.node_type, n.machine);
        println!("  ns   {}", n.ns);
        println!("  argv {}", n.command_args().join(" "));
        for (k, v) in &n.params {
            println!("  param {k} = {v}");
        }
    }
    let globals: Vec<_> = plan.param_values().into_iter().collect();
    if !globals.is_empty() {
        println!("parameters:");
        for (k, v) in globals {
            println!("  {k} = {v}");
        }
    }
}
