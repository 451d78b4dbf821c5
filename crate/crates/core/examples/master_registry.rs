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

//! Starts a master in-process, registers a few nodes and shows what the
//! registry holds, including cleanup when a node goes away.
//!
//!     cargo run --example master_registry

use std::collections::HashMap;
use std::thread;
use std::time::Duration;

use mrctl::master;
use mrctl::msg::{Odometry, StringMsg};
use mrctl::node::{InitOptions, NodeSession};

fn node(uri: &str, name: &str, ns: Option<&str>) -> NodeSession {
    let opts = InitOptions {
        master_uri: Some(uri.to_string()),
        namespace: ns.map(str::to_string),
        ..InitOptions::default()
    };
    NodeSession::init(name, &HashMap::new(), opts).unwrap()
}

fn dump(s: &NodeSession, title: &str) {
    let st = s.master().system_state().unwrap();
    println!("{title}");
    println!("  nodes: {}", st.nodes.iter().map(|n| n.as_str()).collect::<Vec<_>>().join(" "));
    for t in st.topics() {
        let names = |m: &std::collections::BTreeMap<_, Vec<mrctl::namegraph::GraphName>>| {
            m.get(t).map(|v| v.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")).unwrap_or_default()
        };
        println!(
            "  {t} [{}] pub {} sub {}",
            st.topic_types.get(t).map(String::as_str).unwrap_or("?"),
            names(&st.publishers),
            names(&st.subscribers)
        );
    }
}

fn main() {
    let m = master::start("127.0.0.1:0").unwrap();
    let uri = m.uri();
    println!("master at {uri}");

    let talker = node(&uri, "talker", None);
    let robot = node(&uri, "turtlebot3", Some("/tb3_0"));
    let _chatter = talker.advertise_msg::<StringMsg>("chatter", false).unwrap();
    let _odom = robot.advertise_msg::<Odometry>("odom", false).unwrap();
    let listener = node(&uri, "listener", None);
    let _sub = listener.subscribe_msg::<StringMsg, _>("/chatter", |_| {}).unwrap();
    dump(&listener, "after registration:");

    match listener.subscribe_msg::<Odometry, _>("/chatter", |_| {}) {
        Ok(_) => println!("unexpected: type mismatch accepted"),
        Err(e) => println!("subscribing to /chatter as Odometry: {e}"),
    }

    drop(_odom);
    robot.shutdown();
    drop(robot);
    thread::sleep(Duration::from_millis(200));
    dump(&listener, "after /tb3_0/turtlebot3 left:");
    m.shutdown();
}
