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

//! Records a burst of messages to a bag, prints its contents, then plays it
//! back at double speed.
//!
//!     cargo run --example bag_record_replay

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use mrctl::diagnostics::{play_bag, read_bag, PlayOptions, Recorder};
use mrctl::master;
use mrctl::msg::{StringMsg, ANY_TYPE};
use mrctl::node::{InitOptions, NodeSession};

fn node(uri: &str, name: &str) -> NodeSession {
    let opts = InitOptions {
        master_uri: Some(uri.to_string()),
        ..InitOptions::default()
    };
    NodeSession::init(name, &HashMap::new(), opts).unwrap()
}

fn main() {
    let m = master::start("127.0.0.1:0").unwrap();
    let uri = m.uri();
    let path = std::env::temp_dir().join(format!("bag_record_replay_{}.bag", std::process::id()));

    let talker = node(&uri, "talker");
    let p = talker.advertise_msg::<StringMsg>("/chatter", false).unwrap();
    let rec_node = node(&uri, "recorder");
    let recorder = Recorder::start(&rec_node, &["/chatter".into()], &path).unwrap();
    p.wait_for_subscribers(1, Duration::from_secs(5));
    for i in 0..10u64 {
        p.publish_msg(&StringMsg { data: format!("hello {i}") }).unwrap();
        thread::sleep(Duration::from_millis(20 * (i % 3 + 1)));
    }
    thread::sleep(Duration::from_millis(100));
    println!("recorded {} messages to {}", recorder.finish().unwrap(), path.display());

    let records = read_bag(&path).unwrap();
    let t0 = records[0].stamp;
    for r in &records {
        println!(
            "  +{:6.1} ms {} [{}] {}",
            (r.stamp - t0) as f64 / 1e6,
            r.topic,
            r.msg_type,
            r.payload_value().unwrap()
        );
    }
    drop(p);

    let listener = node(&uri, "listener");
    let arrivals = Arc::new(Mutex::new(Vec::new()));
    let a = arrivals.clone();
    let start = Instant::now();
    let _s = listener
        .subscribe("/chatter", ANY_TYPE, move |env| {
            a.lock().unwrap().push((start.elapsed(), env.payload["data"].as_str().unwrap_or("").to_string()))
        })
        .unwrap();
    let player = node(&uri, "player");
    let opts = PlayOptions { rate: 2.0, ..PlayOptions::default() };
    let n = play_bag(&player, &path, &opts).unwrap();
    thread::sleep(Duration::from_millis(100));
    let got = arrivals.lock().unwrap();
    println!("played {n} messages at rate 2.0, listener got {}", got.len());
    if let (Some(first), Some(last)) = (got.first(), got.last()) {
        let recorded = (records.last().unwrap().stamp - t0) as f64 / 1e6;
        println!(
            "  recorded span {recorded:.1} ms, replayed span {:.1} ms",
            (last.0 - first.0).as_secs_f64() * 1e3
        );
    }
    let _ = std::fs::remove_file(&path);
    m.shutdown();
}
