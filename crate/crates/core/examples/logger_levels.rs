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

//! Changes a running node's logger level through the master and shows
//! which lines get through before and after.
//!
//!     cargo run --example logger_levels

use std::collections::HashMap;
use std::thread;
use std::time::Duration;

use mrctl::diagnostics::set_logger_level;
use mrctl::master;
use mrctl::node::{InitOptions, NodeSession};

fn node(uri: &str, name: &str) -> NodeSession {
    let opts = InitOptions {
        master_uri: Some(uri.to_string()),
        ..InitOptions::default()
    };
    NodeSession::init(name, &HashMap::new(), opts).unwrap()
}

fn chatter(n: &NodeSession, round: &str) {
    n.debug("planner", &format!("{round}: expanding 1200 cells"));
    n.info("planner", &format!("{round}: path found"));
    n.warn("planner", &format!("{round}: goal close to an obstacle"));
}

fn main() {
    let m = master::start("127.0.0.1:0").unwrap();
    let worker = node(&m.uri(), "move_base");
    let tool = node(&m.uri(), "logger_tool");

    println!("planner level: {:?}", worker.logger_level("planner"));
    chatter(&worker, "round 1");

    set_logger_level(tool.master(), "/move_base", "planner", "debug").unwrap();
    thread::sleep(Duration::from_millis(100));
    println!("planner level: {:?}", worker.logger_level("planner"));
    chatter(&worker, "round 2");

    set_logger_level(tool.master(), "/move_base", "planner", "warn").unwrap();
    thread::sleep(Duration::from_millis(100));
    println!("planner level: {:?}", worker.logger_level("planner"));
    chatter(&worker, "round 3");

    for (node, level) in [("/nobody", "info"), ("/move_base", "verbose")] {
        if let Err(e) = set_logger_level(tool.master(), node, "planner", level) {
            println!("{node} {level}: {e}");
        }
    }
    m.shutdown();
}
