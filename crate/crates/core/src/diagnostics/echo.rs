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

//! Text rendering of messages and the echo loop.

use std::sync::mpsc::{self, RecvTimeoutError};
use std::time::{Duration, Instant};

use serde_json::Value;

use crate::msg::{SchemaRegistry, ANY_TYPE};
use crate::node::{NodeError, NodeSession};

pub const SEPARATOR: &str = "---";

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Array(items) => {
            let parts: Vec<String> = items.iter().map(scalar).collect();
            format!("[{}]", parts.join(", "))
        }
        other => other.to_string(),
    }
}

fn is_nested(v: &Value) -> bool {
    match v {
        Value::Object(_) => true,
        Value::Array(items) => items.iter().any(|i| i.is_object()),
        _ => false,
    }
}

/// Field order for `v`: schema order when the type is known, then any
/// remaining keys sorted.
fn ordered_fields<'a>(v: &'a serde_json::Map<String, Value>, ty: Option<&str>) -> Vec<(&'a str, &'a Value, Option<String>)> {
    let reg = SchemaRegistry::builtin();
    let mut out = Vec::new();
    if let Some(fields) = ty.and_then(|t| reg.fields(t)) {
        for (name, fty) in fields {
            if let Some((k, val)) = v.get_key_value(name.as_str()) {
                out.push((k.as_str(), val, Some(fty.clone())));
            }
        }
    }
    for (k, val) in v {
        if !out.iter().any(|(n, _, _)| *n == k.as_str()) {
            out.push((k.as_str(), val, None));
        }
    }
    out
}

fn render_into(out: &mut String, v: &Value, ty: Option<&str>, depth: usize) {
    let pad = "  ".repeat(depth);
    match v {
        Value::Object(map) => {
            for (k, val, fty) in ordered_fields(map, ty) {
                if is_nested(val) {
                    out.push_str(&format!("{pad}{k}:\n"));
                    render_into(out, val, fty.as_deref(), depth + 1);
                } else {
                    out.push_str(&format!("{pad}{k}: {}\n", scalar(val)));
                }
            }
        }
        Value::Array(items) => {
            let elem = ty.and_then(|t| t.strip_suffix("[]"));
            for item in items {
                if is_nested(item) {
                    out.push_str(&format!("{pad}-\n"));
                    render_into(out, item, elem, depth + 1);
                } else {
                    out.push_str(&format!("{pad}- {}\n", scalar(item)));
                }
            }
        }
        other => out.push_str(&format!("{pad}{}\n", scalar(other))),
    }
}

/// Renders `payload` as `key: value` lines, nested fields indented by two
/// spaces, followed by a `---` line.
pub fn render_message(msg_type: &str, payload: &Value) -> String {
    let mut out = String::new();
    render_into(&mut out, payload, Some(msg_type), 0);
    out.push_str(SEPARATOR);
    out.push('\n');
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EchoLimit {
    pub count: Option<usize>,
    pub duration: Option<Duration>,
}

/// Subscribes to `topic` with any type and hands each rendered message to
/// `out` until `limit` is met, returning the number echoed. With no limit
/// this runs until the session shuts down.
pub fn echo_topic<F>(session: &NodeSession, topic: &str, limit: EchoLimit, mut out: F) -> Result<usize, NodeError>
where
    F: FnMut(&str),
{
    let (tx, rx) = mpsc::channel();
    let sub = session.subscribe(topic, ANY_TYPE, move |env| {
        let _ = tx.send(render_message(&env.msg_type, &env.payload));
    })?;
    let deadline = limit.duration.map(|d| Instant::now() + d);
    let mut n = 0;
    while limit.count.is_none_or(|c| n < c) {
        let wait = match deadline {
            Some(d) => match d.checked_duration_since(Instant::now()) {
                Some(w) => w.min(Duration::from_millis(100)),
                None => break,
            },
            None => Duration::from_millis(100),
        };
        match rx.recv_timeout(wait) {
            Ok(text) => {
                out(&text);
                n += 1;
            }
            Err(RecvTimeoutError::Timeout) => {
                if !session.is_running() {
                    break;
                }
            }
            Err(RecvTimeoutError::Disconnected) => break,
        }
    }
    sub.unsubscribe();
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::msg::{Message, Odometry, Pose2D, Twist};
    use serde_json::json;

    #[test]
    fn odometry_nests_with_two_spaces() {
        let odom = Odometry {
            frame_id: "tb3_0/odom".into(),
            child_frame_id: "tb3_0/base_footprint".into(),
            pose: Pose2D {
                x: 1.5,
                y: -2.0,
                theta: 0.25,
            },
            twist: Twist {
                linear_x: 0.2,
                angular_z: 0.0,
            },
        };
        let text = render_message("Odometry", &odom.to_payload());
        assert_eq!(
            text,
            "frame_id: tb3_0/odom\nchild_frame_id: tb3_0/base_footprint\npose:\n  x: 1.5\n  y: -2.0\n  theta: 0.25\ntwist:\n  linear_x: 0.2\n  angular_z: 0.0\n---\n"
        );
    }

    #[test]
    fn arrays_and_unknown_types() {
        assert_eq!(render_message("Custom", &json!({"b": [1, 2], "a": "x"})), "a: x\nb: [1, 2]\n---\n");
        assert_eq!(
            render_message("Custom", &json!({"list": [{"k": 1}]})),
            "list:\n  -\n    k: 1\n---\n"
        );
        assert_eq!(render_message("String", &json!({"data": "hi"})), "data: hi\n---\n");
    }
}
