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

//! Expands a launch file that includes itself with a decremented `num`
//! argument until the condition fails.
//!
//!     cargo run --example launch_recursive -- [num]

use std::collections::BTreeMap;
use std::path::Path;

use mrctl::launch::{plan_launch, LaunchContext, PackageIndex};

fn main() {
    let num = std::env::args().nth(1).unwrap_or_else(|| "5".into());
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/packages");
    let ctx = LaunchContext::new(PackageIndex::new().with("pkg_name", root.join("pkg_name")));
    let entry = root.join("pkg_name/launch/arbitrary_launcher.launch");
    let args = BTreeMap::from([("num".to_string(), num.clone())]);
    match plan_launch(&entry, &args, &ctx) {
        Ok(plan) => {
            println!("num:={num} -> {} nodes", plan.nodes.len());
            for n in &plan.nodes {
                println!("  {} ({} {}) args {:?}", n.name, n.pkg, n.node_type, n.args);
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
}
