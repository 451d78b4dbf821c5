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

//! TF tree as DOT, and a one-shot collector over every `tf` topic.

use std::collections::BTreeSet;
use std::fmt::Write;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use crate::fleetsim::TfTree;
use crate::msg::TransformStamped;
use crate::node::{NodeError, NodeSession};

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// One `parent -> child` edge per child frame, sorted by child. A
/// `// roots:` comment lists the roots; a forest gets an extra warning line.
pub fn export_tf_tree(tf: &TfTree) -> String {
    let mut out = String::from("digraph G {\n");
    let frames = tf.frames();
    if frames.is_empty() {
        out.push_str("}\n");
        return out;
    }
    let roots = tf.roots();
    let _ = writeln!(out, "  // roots: {}", roots.join(" "));
    if roots.len() > 1 {
        let _ = writeln!(out, "  // warning: {} roots, the tree is not connected", roots.len());
    }
    for f in &frames {
        if let Some(p) = tf.parent(f) {
            let _ = writeln!(out, "  {} -> {};", quote(p), quote(f));
        }
    }
    out.push_str("}\n");
    out
}

/// Topics with base name `tf` in the current system state.
pub fn tf_topics(session: &NodeSession) -> Result<BTreeSet<String>, NodeError> {
    let st = session.master().system_state()?;
    Ok(st
        .topics()
        .into_iter()
        .filter(|t| t.base_name() == "tf")
        .map(|t| t.to_string())
        .collect())
}

/// Listens on every `tf` topic for `window` and merges what arrives.
/// Transforms that would close a cycle are ignored.
pub fn collect_tf(session: &NodeSession, window: Duration) -> Result<TfTree, NodeError> {
    let tree = Arc::new(Mutex::new(TfTree::new()));
    let mut subs = Vec::new();
    for topic in tf_topics(session)? {
        let t = tree.clone();
        subs.push(session.subscribe_msg::<TransformStamped, _>(&topic, move |m| {
            let _ = t.lock().unwrap().apply(&m);
        })?);
    }
    let deadline = Instant::now() + window;
    while Instant::now() < deadline {
        thread::sleep(Duration::from_millis(10));
    }
    for s in subs {
        s.unsubscribe();
    }
    let out = tree.lock().unwrap().clone();
    Ok(out)
}
