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

//! Resolves relative, global and private names for a node in a robot
//! namespace, then applies remap rules and TF prefixes.
//!
//!     cargo run --example name_resolution

use mrctl::namegraph::{apply_remaps, apply_tf_prefix, resolve_name, GraphName, NamespaceCtx, RemapRule};

fn main() {
    let node = GraphName::parse("/tb3_0/move_base").unwrap();
    let ctx = NamespaceCtx::for_node(node.clone());
    println!("node {node} in namespace {}", node.parent());
    for raw in ["cmd_vel", "/map", "~goal", "scan", "odom"] {
        println!("  {raw:10} -> {}", resolve_name(raw, &ctx).unwrap());
    }

    let rules = [RemapRule::parse_arg("scan:=base_scan").unwrap(), RemapRule::new("/map", "/shared/map")];
    println!("with remaps scan:=base_scan /map:=/shared/map");
    for raw in ["scan", "/map", "odom"] {
        let resolved = resolve_name(raw, &ctx).unwrap();
        println!("  {raw:10} -> {}", apply_remaps(&resolved, &rules, &ctx).unwrap());
    }

    for bad in ["9lives", "a//b", "tb3 0"] {
        println!("  {bad:10} -> error: {}", resolve_name(bad, &ctx).unwrap_err());
    }

    println!("tf frames for tb3_0:");
    for f in ["odom", "base_footprint", "base_scan"] {
        println!("  {f:15} -> {}", apply_tf_prefix(f, "tb3_0"));
    }
}
