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

//! Fetches the map through the `/static_map` service, and shows the error
//! when no provider is registered.
//!
//!     cargo run --example service_static_map

use std::collections::HashMap;
use std::path::Path;

use mrctl::fleetsim::{fetch_static_map, start_map_server};
use mrctl::master;
use mrctl::node::{InitOptions, NodeSession};
use mrctl::worldmap::{load_map, Cell};

fn node(uri: &str, name: &str) -> NodeSession {
    let opts = InitOptions {
        master_uri: Some(uri.to_string()),
        ..InitOptions::default()
    };
    NodeSession::init(name, &HashMap::new(), opts).unwrap()
}

fn main() {
    let m = master::start("127.0.0.1:0").unwrap();
    let client = node(&m.uri(), "planner");
    match fetch_static_map(&client) {
        Ok(_) => println!("unexpected map before any server"),
        Err(e) => println!("before the server starts: {e}"),
    }

    let yaml = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/maps/trichotomy.yaml");
    let grid = load_map(&yaml).unwrap();
    let server = node(&m.uri(), "map_server");
    let _srv = start_map_server(&server, &grid, "map").unwrap();
    println!("/static_map provided by {}", client.master().lookup_service("/static_map").unwrap());

    let got = fetch_static_map(&client).unwrap();
    println!(
        "fetched {} x {} at {} m/cell, origin {:?}: {} free, {} occupied, {} unknown",
        got.width,
        got.height,
        got.meta.resolution,
        got.meta.origin,
        got.count(Cell::Free),
        got.count(Cell::Occupied),
        got.count(Cell::Unknown)
    );
    println!("same cells as the file: {}", got.cells == grid.cells);
    m.shutdown();
}
