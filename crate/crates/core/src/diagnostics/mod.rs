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

//! Terminal tooling: node graph and TF tree as DOT, topic echo, bags and
//! logger levels.

pub mod bag;
pub mod echo;
pub mod graph;
pub mod tftree;

pub use bag::{
    decode_bag, encode_bag, play_bag, play_records, read_bag, record_bag, write_bag, BagError, BagRecord, BagWriter,
    PlayOptions, RecordLimit, Recorder, MAGIC,
};
pub use echo::{echo_topic, render_message, EchoLimit};
pub use graph::{export_node_graph, graph_components, graph_nodes};
pub use tftree::{collect_tf, export_tf_tree, tf_topics};

use crate::node::{ControlClient, NodeError};

/// Asks the master to forward a level change to `node`. The master
/// validates the level and the node name.
pub fn set_logger_level(master: &ControlClient, node: &str, logger: &str, level: &str) -> Result<(), NodeError> {
    master.set_logger_level(node, logger, level)
}
