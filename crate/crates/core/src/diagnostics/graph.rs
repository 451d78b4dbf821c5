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

//! Node graph as DOT, and its connected components.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use crate::master::SystemState;

const EMPTY: &str = "digraph G {\n}\n";

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn node_id(name: &str) -> String {
    quote(&format!("n:{name}"))
}

fn topic_id(name: &str) -> String {
    quote(&format!("t:{name}"))
}

/// Every node named anywhere in `state`, sorted.
pub fn graph_nodes(state: &SystemState) -> BTreeSet<String> {
    state
        .nodes
        .iter()
        .chain(state.publishers.values().flatten())
        .chain(state.subscribers.values().flatten())
        .map(|n| n.to_string())
        .collect()
}

/// Nodes as ellipses, topics as boxes, edges publisher → topic → subscriber.
/// Node and topic identifiers carry an `n:`/`t:` prefix so a node and a
/// topic may share a name; labels show the plain name.
pub fn export_node_graph(state: &SystemState) -> String {
    let nodes = graph_nodes(state);
    let topics = state.topics();
    if nodes.is_empty() && topics.is_empty() {
        return EMPTY.to_string();
    }
    let mut out = String::from("digraph G {\n");
    for n in &nodes {
        let _ = writeln!(out, "  {} [label={}, shape=ellipse];", node_id(n), quote(n));
    }
    for t in &topics {
        let _ = writeln!(out, "  {} [label={}, shape=box];", topic_id(t.as_str()), quote(t.as_str()));
    }
    let mut edges = BTreeSet::new();
    for (t, pubs) in &state.publishers {
        for p in pubs {
            edges.insert((0u8, t.to_string(), p.to_string()));
        }
    }
    for (t, subs) in &state.subscribers {
        for s in subs {
            edges.insert((1u8, t.to_string(), s.to_string()));
        }
    }
    for (dir, t, n) in edges {
        if dir == 0 {
            let _ = writeln!(out, "  {} -> {};", node_id(&n), topic_id(&t));
        } else {
            let _ = writeln!(out, "  {} -> {};", topic_id(&t), node_id(&n));
        }
    }
    out.push_str("}\n");
    out
}

/// Connected components of the undirected node/topic graph with the topics
/// in `exclude` removed. Each component lists its node names; components
/// are sorted by their first node. Topics with no remaining node are dropped.
pub fn graph_components(state: &SystemState, exclude: &[&str]) -> Vec<BTreeSet<String>> {
    let mut adj: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for n in graph_nodes(state) {
        adj.entry(format!("n:{n}")).or_default();
    }
    for (t, members) in state.publishers.iter().chain(state.subscribers.iter()) {
        if exclude.contains(&t.as_str()) {
            continue;
        }
        let tk = format!("t:{t}");
        for m in members {
            let nk = format!("n:{m}");
            adj.entry(nk.clone()).or_default().insert(tk.clone());
            adj.entry(tk.clone()).or_default().insert(nk);
        }
    }
    let mut seen = BTreeSet::new();
    let mut comps = Vec::new();
    for start in adj.keys() {
        if !start.starts_with("n:") || seen.contains(start) {
            continue;
        }
        let mut comp = BTreeSet::new();
        let mut stack = vec![start.clone()];
        seen.insert(start.clone());
        while let Some(k) = stack.pop() {
            if let Some(name) = k.strip_prefix("n:") {
                comp.insert(name.to_string());
            }
            for nb in &adj[&k] {
                if seen.insert(nb.clone()) {
                    stack.push(nb.clone());
                }
            }
        }
        comps.push(comp);
    }
    comps.sort();
    comps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::namegraph::GraphName;
    use proptest::prelude::*;

    fn g(s: &str) -> GraphName {
        GraphName::parse(s).unwrap()
    }

    fn state(pubs: &[(&str, &str)], subs: &[(&str, &str)]) -> SystemState {
        let mut s = SystemState::default();
        for (t, n) in pubs {
            s.publishers.entry(g(t)).or_default().push(g(n));
        }
        for (t, n) in subs {
            s.subscribers.entry(g(t)).or_default().push(g(n));
        }
        s
    }

    #[test]
    fn empty_master() {
        assert_eq!(export_node_graph(&SystemState::default()), "digraph G {\n}\n");
    }

    #[test]
    fn one_pub_one_sub() {
        let s = state(&[("/scan", "/lidar")], &[("/scan", "/slam")]);
        let expected = "digraph G {\n  \"n:/lidar\" [label=\"/lidar\", shape=ellipse];\n  \"n:/slam\" [label=\"/slam\", shape=ellipse];\n  \"t:/scan\" [label=\"/scan\", shape=box];\n  \"n:/lidar\" -> \"t:/scan\";\n  \"t:/scan\" -> \"n:/slam\";\n}\n";
        assert_eq!(export_node_graph(&s), expected);
    }

    #[test]
    fn fleet_components_off_shared_map() {
        let mut pubs = vec![("/map", "/map_server")];
        let mut subs = vec![];
        let names: Vec<(String, String, String)> = (0..3)
            .map(|i| (format!("/tb3_{i}/odom"), format!("/tb3_{i}/turtlebot3"), format!("/tb3_{i}/cmd_vel")))
            .collect();
        for (odom, node, cmd) in &names {
            pubs.push((odom.as_str(), node.as_str()));
            subs.push((cmd.as_str(), node.as_str()));
            subs.push(("/map", node.as_str()));
        }
        let s = state(&pubs, &subs);
        assert_eq!(graph_components(&s, &[]).len(), 1);
        let comps = graph_components(&s, &["/map"]);
        assert_eq!(comps.len(), 4);
        let robots: Vec<_> = comps.iter().filter(|c| c.iter().any(|n| n.contains("tb3_"))).collect();
        assert_eq!(robots.len(), 3);
    }

    proptest! {
        #[test]
        fn output_is_independent_of_insertion_order(
            edges in proptest::collection::vec((0usize..4, 0usize..4, any::<bool>()), 0..20),
        ) {
            let topic = |i: usize| format!("/t{i}");
            let node = |i: usize| format!("/n{i}");
            let build = |es: &[(usize, usize, bool)]| {
                let mut s = SystemState::default();
                for (t, n, is_pub) in es {
                    let map = if *is_pub { &mut s.publishers } else { &mut s.subscribers };
                    let v = map.entry(g(&topic(*t))).or_default();
                    if !v.contains(&g(&node(*n))) {
                        v.push(g(&node(*n)));
                    }
                }
                s
            };
            let mut rev = edges.clone();
            rev.reverse();
            prop_assert_eq!(export_node_graph(&build(&edges)), export_node_graph(&build(&rev)));
        }
    }
}
