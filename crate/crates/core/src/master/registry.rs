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

//! The registry state machine.
//!
//! [`Registry`] holds no sockets. Every mutating call returns the
//! notifications it produced as [`Outbound`] values addressed to connection
//! ids; the server delivers them after the call returns, before it answers
//! the request.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::msg::ANY_TYPE;
use crate::namegraph::GraphName;
use crate::protocol::{notify, ErrorCode, Notification, RemoteError};

pub type ConnId = u64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("topic {topic} has type {existing}, cannot register as {requested}")]
    TypeMismatch {
        topic: GraphName,
        existing: String,
        requested: String,
    },
    #[error("caller {0} has not announced itself on this connection")]
    UnknownCaller(String),
    #[error("{0} not found")]
    NotFound(String),
    #[error("bad request: {0}")]
    BadRequest(String),
}

impl From<RegistryError> for RemoteError {
    fn from(e: RegistryError) -> Self {
        let code = match &e {
            RegistryError::TypeMismatch { .. } => ErrorCode::TypeMismatch,
            RegistryError::UnknownCaller(_) => ErrorCode::UnknownCaller,
            RegistryError::NotFound(_) => ErrorCode::NotFound,
            RegistryError::BadRequest(_) => ErrorCode::BadRequest,
        };
        RemoteError::new(code, e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub name: GraphName,
    pub control_uri: String,
    pub data_uri: String,
    /// Registry-local monotonic counter value at registration.
    pub registered_at: u64,
    pub conn: ConnId,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TopicRecord {
    /// `None` while only wildcard subscribers exist.
    pub msg_type: Option<String>,
    /// Publisher name → advertised data endpoint.
    pub publishers: BTreeMap<GraphName, String>,
    pub subscribers: BTreeSet<GraphName>,
}

#[derive(Debug, Clone, PartialEq)]
struct ServiceRecord {
    provider: GraphName,
    data_uri: String,
}

/// A notification to deliver on a node's control connection.
#[derive(Debug, Clone, PartialEq)]
pub struct Outbound {
    pub conn: ConnId,
    pub note: Notification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HelloOutcome {
    Accepted,
    SupersededPrevious,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegistrationKind {
    Publisher,
    Subscriber,
    Service,
    Node,
}

/// Snapshot returned by `getSystemState`. All lists are sorted.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SystemState {
    pub publishers: BTreeMap<GraphName, Vec<GraphName>>,
    pub subscribers: BTreeMap<GraphName, Vec<GraphName>>,
    pub services: BTreeMap<GraphName, Vec<GraphName>>,
    #[serde(default)]
    pub topic_types: BTreeMap<GraphName, String>,
    #[serde(default)]
    pub nodes: Vec<GraphName>,
}

impl SystemState {
    /// Every topic with at least one publisher or subscriber.
    pub fn topics(&self) -> BTreeSet<&GraphName> {
        self.publishers.keys().chain(self.subscribers.keys()).collect()
    }
}

pub const LOG_LEVELS: [&str; 4] = ["debug", "info", "warn", "error"];

/// Validates `host:port` with a port in 1..=65535.
pub fn check_endpoint(uri: &str) -> Result<(), RegistryError> {
    let (host, port) = uri
        .rsplit_once(':')
        .ok_or_else(|| RegistryError::BadRequest(format!("{uri:?} is not host:port")))?;
    if host.is_empty() {
        return Err(RegistryError::BadRequest(format!("{uri:?} has an empty host")));
    }
    match port.parse::<u16>() {
        Ok(p) if p >= 1 => Ok(()),
        _ => Err(RegistryError::BadRequest(format!("{uri:?} has an invalid port"))),
    }
}

#[derive(Debug, Default)]
pub struct Registry {
    nodes: BTreeMap<GraphName, NodeRecord>,
    topics: BTreeMap<GraphName, TopicRecord>,
    services: BTreeMap<GraphName, ServiceRecord>,
    params: BTreeMap<GraphName, Value>,
    tick: u64,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node(&self, name: &GraphName) -> Option<&NodeRecord> {
        self.nodes.get(name)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeRecord> {
        self.nodes.values()
    }

    pub fn topic(&self, name: &GraphName) -> Option<&TopicRecord> {
        self.topics.get(name)
    }

    fn name_of_conn(&self, conn: ConnId) -> Option<GraphName> {
        self.nodes.values().find(|n| n.conn == conn).map(|n| n.name.clone())
    }

    fn caller(&self, conn: ConnId, caller: &GraphName) -> Result<&NodeRecord, RegistryError> {
        match self.nodes.get(caller) {
            Some(rec) if rec.conn == conn => Ok(rec),
            _ => Err(RegistryError::UnknownCaller(caller.to_string())),
        }
    }

    fn publisher_update(&self, topic: &GraphName, out: &mut Vec<Outbound>) {
        let Some(rec) = self.topics.get(topic) else { return };
        let mut uris: Vec<&String> = rec.publishers.values().collect();
        uris.sort();
        for sub in &rec.subscribers {
            if let Some(node) = self.nodes.get(sub) {
                out.push(Outbound {
                    conn: node.conn,
                    note: Notification {
                        notify: notify::PUBLISHER_UPDATE.to_string(),
                        params: json!({"topic": topic, "publishers": uris}),
                    },
                });
            }
        }
    }

    /// Removes a node and everything it registered.
    fn remove_node(&mut self, name: &GraphName, out: &mut Vec<Outbound>) -> Option<NodeRecord> {
        let rec = self.nodes.remove(name)?;
        let mut changed = Vec::new();
        for (topic, t) in self.topics.iter_mut() {
            if t.publishers.remove(name).is_some() {
                changed.push(topic.clone());
            }
            t.subscribers.remove(name);
        }
        self.services.retain(|_, s| &s.provider != name);
        self.prune_topics();
        for topic in changed {
            self.publisher_update(&topic, out);
        }
        Some(rec)
    }

    fn prune_topics(&mut self) {
        self.topics
            .retain(|_, t| !t.publishers.is_empty() || !t.subscribers.is_empty());
    }

    pub fn hello(
        &mut self,
        conn: ConnId,
        name: GraphName,
        control_uri: String,
        data_uri: String,
    ) -> Result<(HelloOutcome, Vec<Outbound>), RegistryError> {
        if name.is_root() {
            return Err(RegistryError::BadRequest("node name cannot be /".into()));
        }
        check_endpoint(&control_uri)?;
        check_endpoint(&data_uri)?;
        let mut out = Vec::new();
        if let Some(own) = self.name_of_conn(conn) {
            if own != name {
                self.remove_node(&own, &mut out);
            }
        }
        let outcome = match self.remove_node(&name, &mut out) {
            Some(old) => {
                if old.conn != conn {
                    out.push(Outbound {
                        conn: old.conn,
                        note: Notification {
                            notify: notify::SHUTDOWN.to_string(),
                            params: json!({
                                "reason": format!("superseded by a new instance of {name}"),
                                "name": name,
                            }),
                        },
                    });
                }
                HelloOutcome::SupersededPrevious
            }
            None => HelloOutcome::Accepted,
        };
        self.tick += 1;
        self.nodes.insert(
            name.clone(),
            NodeRecord {
                name,
                control_uri,
                data_uri,
                registered_at: self.tick,
                conn,
            },
        );
        Ok((outcome, out))
    }

    /// The connection for `conn` closed: drop whatever it owned.
    pub fn disconnect(&mut self, conn: ConnId) -> Vec<Outbound> {
        let mut out = Vec::new();
        if let Some(name) = self.name_of_conn(conn) {
            self.remove_node(&name, &mut out);
        }
        out
    }

    fn check_type(
        rec: &TopicRecord,
        topic: &GraphName,
        requested: &str,
    ) -> Result<(), RegistryError> {
        match &rec.msg_type {
            Some(existing) if requested != ANY_TYPE && existing != requested => {
                Err(RegistryError::TypeMismatch {
                    topic: topic.clone(),
                    existing: existing.clone(),
                    requested: requested.to_string(),
                })
            }
            _ => Ok(()),
        }
    }

    pub fn register_publisher(
        &mut self,
        conn: ConnId,
        caller: &GraphName,
        topic: GraphName,
        msg_type: &str,
        data_uri: &str,
    ) -> Result<(Vec<String>, Vec<Outbound>), RegistryError> {
        self.caller(conn, caller)?;
        if msg_type == ANY_TYPE || msg_type.is_empty() {
            return Err(RegistryError::BadRequest("publishers need a concrete type".into()));
        }
        check_endpoint(data_uri)?;
        let rec = self.topics.entry(topic.clone()).or_default();
        Self::check_type(rec, &topic, msg_type)?;
        rec.msg_type = Some(msg_type.to_string());
        rec.publishers.insert(caller.clone(), data_uri.to_string());
        let subs: Vec<String> = rec
            .subscribers
            .iter()
            .filter_map(|s| self.nodes.get(s).map(|n| n.data_uri.clone()))
            .collect();
        let mut out = Vec::new();
        self.publisher_update(&topic, &mut out);
        Ok((subs, out))
    }

    pub fn register_subscriber(
        &mut self,
        conn: ConnId,
        caller: &GraphName,
        topic: GraphName,
        msg_type: &str,
    ) -> Result<Vec<String>, RegistryError> {
        self.caller(conn, caller)?;
        if msg_type.is_empty() {
            return Err(RegistryError::BadRequest("empty message type".into()));
        }
        let rec = self.topics.entry(topic.clone()).or_default();
        if let Err(e) = Self::check_type(rec, &topic, msg_type) {
            self.prune_topics();
            return Err(e);
        }
        if rec.msg_type.is_none() && msg_type != ANY_TYPE {
            rec.msg_type = Some(msg_type.to_string());
        }
        rec.subscribers.insert(caller.clone());
        let mut uris: Vec<String> = rec.publishers.values().cloned().collect();
        uris.sort();
        Ok(uris)
    }

    pub fn unregister(
        &mut self,
        conn: ConnId,
        caller: &GraphName,
        kind: RegistrationKind,
        name: Option<&GraphName>,
    ) -> Result<Vec<Outbound>, RegistryError> {
        self.caller(conn, caller)?;
        let mut out = Vec::new();
        let need_name = || {
            name.cloned()
                .ok_or_else(|| RegistryError::BadRequest("missing name".into()))
        };
        match kind {
            RegistrationKind::Node => {
                self.remove_node(caller, &mut out);
            }
            RegistrationKind::Publisher => {
                let topic = need_name()?;
                let removed = self
                    .topics
                    .get_mut(&topic)
                    .and_then(|t| t.publishers.remove(caller))
                    .is_some();
                if removed {
                    self.publisher_update(&topic, &mut out);
                }
                self.prune_topics();
            }
            RegistrationKind::Subscriber => {
                let topic = need_name()?;
                if let Some(t) = self.topics.get_mut(&topic) {
                    t.subscribers.remove(caller);
                }
                self.prune_topics();
            }
            RegistrationKind::Service => {
                let service = need_name()?;
                if self.services.get(&service).is_some_and(|s| &s.provider == caller) {
                    self.services.remove(&service);
                }
            }
        }
        Ok(out)
    }

    pub fn register_service(
        &mut self,
        conn: ConnId,
        caller: &GraphName,
        service: GraphName,
        data_uri: &str,
    ) -> Result<Vec<Outbound>, RegistryError> {
        self.caller(conn, caller)?;
        check_endpoint(data_uri)?;
        let mut out = Vec::new();
        let previous = self.services.insert(
            service.clone(),
            ServiceRecord {
                provider: caller.clone(),
                data_uri: data_uri.to_string(),
            },
        );
        if let Some(prev) = previous {
            if &prev.provider != caller {
                if let Some(node) = self.nodes.get(&prev.provider) {
                    out.push(Outbound {
                        conn: node.conn,
                        note: Notification {
                            notify: notify::SERVICE_SUPERSEDED.to_string(),
                            params: json!({"service": service, "by": caller}),
                        },
                    });
                }
            }
        }
        Ok(out)
    }

    pub fn lookup_service(&self, service: &GraphName) -> Result<String, RegistryError> {
        self.services
            .get(service)
            .map(|s| s.data_uri.clone())
            .ok_or_else(|| RegistryError::NotFound(format!("service {service}")))
    }

    pub fn system_state(&self) -> SystemState {
        let mut st = SystemState::default();
        for (topic, rec) in &self.topics {
            if !rec.publishers.is_empty() {
                st.publishers
                    .insert(topic.clone(), rec.publishers.keys().cloned().collect());
            }
            if !rec.subscribers.is_empty() {
                st.subscribers
                    .insert(topic.clone(), rec.subscribers.iter().cloned().collect());
            }
            if let Some(t) = &rec.msg_type {
                st.topic_types.insert(topic.clone(), t.clone());
            }
        }
        for (svc, rec) in &self.services {
            st.services.insert(svc.clone(), vec![rec.provider.clone()]);
        }
        st.nodes = self.nodes.keys().cloned().collect();
        st
    }

    pub fn param_set(&mut self, key: GraphName, value: Value) -> Result<(), RegistryError> {
        if value.is_array() || value.is_object() {
            return Err(RegistryError::BadRequest(
                "parameter values must be scalars or strings".into(),
            ));
        }
        self.params.insert(key, value);
        Ok(())
    }

    pub fn param_get(&self, key: &GraphName) -> Result<&Value, RegistryError> {
        self.params
            .get(key)
            .ok_or_else(|| RegistryError::NotFound(format!("parameter {key}")))
    }

    pub fn param_has(&self, key: &GraphName) -> bool {
        self.params.contains_key(key)
    }

    pub fn param_delete(&mut self, key: &GraphName) -> Result<(), RegistryError> {
        self.params
            .remove(key)
            .map(|_| ())
            .ok_or_else(|| RegistryError::NotFound(format!("parameter {key}")))
    }

    pub fn set_logger_level(
        &self,
        node: &GraphName,
        logger: &str,
        level: &str,
    ) -> Result<Vec<Outbound>, RegistryError> {
        if !LOG_LEVELS.contains(&level) {
            return Err(RegistryError::BadRequest(format!("invalid log level {level:?}")));
        }
        let rec = self
            .nodes
            .get(node)
            .ok_or_else(|| RegistryError::NotFound(format!("node {node}")))?;
        Ok(vec![Outbound {
            conn: rec.conn,
            note: Notification {
                notify: notify::SET_LOGGER_LEVEL.to_string(),
                params: json!({"logger": logger, "level": level}),
            },
        }])
    }

    /// Every registration references a live node record.
    pub fn is_coherent(&self) -> bool {
        self.topics.values().all(|t| {
            t.publishers.keys().all(|p| self.nodes.contains_key(p))
                && t.subscribers.iter().all(|s| self.nodes.contains_key(s))
        }) && self.services.values().all(|s| self.nodes.contains_key(&s.provider))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gn(s: &str) -> GraphName {
        GraphName::parse(s).unwrap()
    }

    fn hello(reg: &mut Registry, conn: ConnId, name: &str, port: u16) -> (HelloOutcome, Vec<Outbound>) {
        reg.hello(
            conn,
            gn(name),
            format!("10.0.0.{conn}:7"),
            format!("10.0.0.{conn}:{port}"),
        )
        .unwrap()
    }

    #[test]
    fn first_publisher_sees_no_subscribers() {
        let mut reg = Registry::new();
        hello(&mut reg, 3, "/tb3_0/turtlebot3_core", 45001);
        let (subs, out) = reg
            .register_publisher(3, &gn("/tb3_0/turtlebot3_core"), gn("/tb3_0/odom"), "Odometry", "10.0.0.3:45001")
            .unwrap();
        assert!(subs.is_empty());
        assert!(out.is_empty());
    }

    #[test]
    fn second_publisher_listed_and_subscribers_notified() {
        let mut reg = Registry::new();
        hello(&mut reg, 1, "/a", 1001);
        hello(&mut reg, 2, "/b", 1002);
        hello(&mut reg, 3, "/s", 1003);
        assert!(reg.register_subscriber(3, &gn("/s"), gn("/t"), "Odometry").unwrap().is_empty());
        let (subs, out) = reg.register_publisher(1, &gn("/a"), gn("/t"), "Odometry", "10.0.0.1:1001").unwrap();
        assert_eq!(subs, vec!["10.0.0.3:1003".to_string()]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].conn, 3);
        let (_, out) = reg.register_publisher(2, &gn("/b"), gn("/t"), "Odometry", "10.0.0.2:1002").unwrap();
        assert_eq!(
            out[0].note.params["publishers"],
            json!(["10.0.0.1:1001", "10.0.0.2:1002"])
        );
        let st = reg.system_state();
        assert_eq!(st.publishers[&gn("/t")], vec![gn("/a"), gn("/b")]);
        let uris = reg.register_subscriber(3, &gn("/s"), gn("/t"), "Odometry").unwrap();
        assert_eq!(uris.len(), 2);
    }

    #[test]
    fn type_mismatch() {
        let mut reg = Registry::new();
        hello(&mut reg, 1, "/x", 1);
        reg.register_publisher(1, &gn("/x"), gn("/t"), "Odometry", "h:1").unwrap();
        let err = reg.register_publisher(1, &gn("/x"), gn("/t"), "LaserScan", "h:1").unwrap_err();
        assert!(matches!(err, RegistryError::TypeMismatch { .. }));
        let err = reg.register_subscriber(1, &gn("/x"), gn("/t"), "LaserScan").unwrap_err();
        assert!(matches!(err, RegistryError::TypeMismatch { .. }));
        // wildcard subscribers never conflict
        reg.register_subscriber(1, &gn("/x"), gn("/t"), ANY_TYPE).unwrap();
    }

    #[test]
    fn unknown_caller() {
        let mut reg = Registry::new();
        let err = reg.register_subscriber(9, &gn("/ghost"), gn("/t"), "String").unwrap_err();
        assert!(matches!(err, RegistryError::UnknownCaller(_)));
        hello(&mut reg, 1, "/real", 5);
        // right name, wrong connection
        let err = reg.register_subscriber(2, &gn("/real"), gn("/t"), "String").unwrap_err();
        assert!(matches!(err, RegistryError::UnknownCaller(_)));
    }

    #[test]
    fn duplicate_hello_evicts_previous() {
        let mut reg = Registry::new();
        hello(&mut reg, 1, "/map_server", 10);
        reg.register_service(1, &gn("/map_server"), gn("/static_map"), "h:10").unwrap();
        reg.register_publisher(1, &gn("/map_server"), gn("/map"), "OccupancyGridMsg", "h:10").unwrap();
        hello(&mut reg, 5, "/amcl", 50);
        reg.register_subscriber(5, &gn("/amcl"), gn("/map"), "OccupancyGridMsg").unwrap();

        let (outcome, out) = hello(&mut reg, 2, "/map_server", 20);
        assert_eq!(outcome, HelloOutcome::SupersededPrevious);
        let shutdown: Vec<_> = out.iter().filter(|o| o.note.notify == notify::SHUTDOWN).collect();
        assert_eq!(shutdown.len(), 1);
        assert_eq!(shutdown[0].conn, 1);
        // the map subscriber learns the old publisher is gone
        assert!(out
            .iter()
            .any(|o| o.conn == 5 && o.note.params["publishers"] == json!([])));
        let st = reg.system_state();
        assert_eq!(st.nodes.iter().filter(|n| n.as_str() == "/map_server").count(), 1);
        assert!(st.services.is_empty());
        assert!(reg.is_coherent());
        // old connection can no longer act for the name
        assert!(reg.register_service(1, &gn("/map_server"), gn("/static_map"), "h:10").is_err());
        // and its disconnect does not remove the new instance
        reg.disconnect(1);
        assert_eq!(reg.node(&gn("/map_server")).unwrap().conn, 2);
    }

    #[test]
    fn namespaced_duplicates_coexist() {
        let mut reg = Registry::new();
        assert_eq!(hello(&mut reg, 1, "/tb3_0/amcl", 1).0, HelloOutcome::Accepted);
        assert_eq!(hello(&mut reg, 2, "/tb3_1/amcl", 2).0, HelloOutcome::Accepted);
        assert_eq!(reg.system_state().nodes.len(), 2);
    }

    #[test]
    fn bad_endpoint_rejected() {
        let mut reg = Registry::new();
        assert!(reg.hello(1, gn("/a"), "h:0".into(), "h:1".into()).is_err());
        assert!(reg.hello(1, gn("/a"), "h:1".into(), "h:70000".into()).is_err());
        assert!(reg.hello(1, gn("/a"), "h".into(), "h:1".into()).is_err());
    }

    #[test]
    fn services() {
        let mut reg = Registry::new();
        hello(&mut reg, 1, "/map_server", 1);
        hello(&mut reg, 2, "/map_server2", 2);
        reg.register_service(1, &gn("/map_server"), gn("/static_map"), "10.0.0.1:1").unwrap();
        assert_eq!(reg.lookup_service(&gn("/static_map")).unwrap(), "10.0.0.1:1");
        assert!(matches!(reg.lookup_service(&gn("/nope")), Err(RegistryError::NotFound(_))));
        let out = reg.register_service(2, &gn("/map_server2"), gn("/static_map"), "10.0.0.2:2").unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].conn, 1);
        assert_eq!(reg.lookup_service(&gn("/static_map")).unwrap(), "10.0.0.2:2");
    }

    #[test]
    fn params() {
        let mut reg = Registry::new();
        let key = gn("/tb3_0/amcl/odom_frame_id");
        reg.param_set(key.clone(), json!("tb3_0/odom")).unwrap();
        assert_eq!(reg.param_get(&key).unwrap(), &json!("tb3_0/odom"));
        assert!(matches!(reg.param_get(&gn("/absent")), Err(RegistryError::NotFound(_))));
        reg.param_set(gn("/nullish"), Value::Null).unwrap();
        assert_eq!(reg.param_get(&gn("/nullish")).unwrap(), &Value::Null);
        reg.param_delete(&key).unwrap();
        assert!(!reg.param_has(&key));
        assert!(reg.param_set(gn("/list"), json!([1])).is_err());
    }

    #[test]
    fn logger_level_forwarding() {
        let mut reg = Registry::new();
        hello(&mut reg, 4, "/talker", 4);
        let out = reg.set_logger_level(&gn("/talker"), "mrctl", "debug").unwrap();
        assert_eq!(out[0].conn, 4);
        assert!(matches!(reg.set_logger_level(&gn("/nobody"), "x", "debug"), Err(RegistryError::NotFound(_))));
        assert!(matches!(reg.set_logger_level(&gn("/talker"), "x", "loud"), Err(RegistryError::BadRequest(_))));
    }

    #[test]
    fn empty_state() {
        let st = Registry::new().system_state();
        assert!(st.publishers.is_empty() && st.subscribers.is_empty() && st.services.is_empty());
    }

    #[derive(Debug, Clone)]
    enum Op {
        Hello(u8, u8),
        Pub(u8, u8),
        Sub(u8, u8),
        Svc(u8, u8),
        Unpub(u8, u8),
        Drop(u8),
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            (0..4u8, 0..3u8).prop_map(|(c, n)| Op::Hello(c, n)),
            (0..4u8, 0..3u8).prop_map(|(c, t)| Op::Pub(c, t)),
            (0..4u8, 0..3u8).prop_map(|(c, t)| Op::Sub(c, t)),
            (0..4u8, 0..2u8).prop_map(|(c, s)| Op::Svc(c, s)),
            (0..4u8, 0..3u8).prop_map(|(c, t)| Op::Unpub(c, t)),
            (0..4u8).prop_map(Op::Drop),
        ]
    }

    /// Reference model: connection → name, plus flat registration sets.
    #[derive(Default)]
    struct Model {
        owner: BTreeMap<u8, String>,
        pubs: BTreeSet<(String, String)>,
        subs: BTreeSet<(String, String)>,
        svcs: BTreeMap<String, String>,
    }

    impl Model {
        fn drop_name(&mut self, name: &str) {
            self.pubs.retain(|(_, n)| n != name);
            self.subs.retain(|(_, n)| n != name);
            self.svcs.retain(|_, n| n != name);
        }
    }

    proptest! {
        #[test]
        fn registry_replays_match_reference_model(ops in prop::collection::vec(op(), 0..40)) {
            let mut reg = Registry::new();
            let mut model = Model::default();
            for op in ops {
                match op {
                    Op::Hello(c, n) => {
                        let name = format!("/n{n}");
                        if let Some(prev) = model.owner.remove(&c) {
                            model.drop_name(&prev);
                        }
                        if let Some((&oc, _)) = model.owner.iter().find(|(_, v)| **v == name) {
                            model.owner.remove(&oc);
                        }
                        model.drop_name(&name);
                        model.owner.insert(c, name.clone());
                        reg.hello(c as u64, gn(&name), "h:1".into(), format!("h:{}", 100 + c as u16)).unwrap();
                    }
                    Op::Pub(c, t) | Op::Sub(c, t) | Op::Unpub(c, t) => {
                        let topic = format!("/t{t}");
                        let caller = model.owner.get(&c).cloned().unwrap_or_else(|| "/ghost".into());
                        let r = match op {
                            Op::Pub(..) => reg.register_publisher(c as u64, &gn(&caller), gn(&topic), "String", "h:9").map(|_| ()),
                            Op::Sub(..) => reg.register_subscriber(c as u64, &gn(&caller), gn(&topic), "String").map(|_| ()),
                            _ => reg.unregister(c as u64, &gn(&caller), RegistrationKind::Publisher, Some(&gn(&topic))).map(|_| ()),
                        };
                        prop_assert_eq!(r.is_ok(), model.owner.contains_key(&c));
                        if r.is_ok() {
                            match op {
                                Op::Pub(..) => { model.pubs.insert((topic, caller)); }
                                Op::Sub(..) => { model.subs.insert((topic, caller)); }
                                _ => { model.pubs.remove(&(topic, caller)); }
                            }
                        }
                    }
                    Op::Svc(c, s) => {
                        let svc = format!("/s{s}");
                        let caller = model.owner.get(&c).cloned().unwrap_or_else(|| "/ghost".into());
                        let r = reg.register_service(c as u64, &gn(&caller), gn(&svc), "h:5");
                        prop_assert_eq!(r.is_ok(), model.owner.contains_key(&c));
                        if r.is_ok() {
                            model.svcs.insert(svc, caller);
                        }
                    }
                    Op::Drop(c) => {
                        reg.disconnect(c as u64);
                        if let Some(name) = model.owner.remove(&c) {
                            model.drop_name(&name);
                        }
                    }
                }
                prop_assert!(reg.is_coherent());
                let st = reg.system_state();
                let pubs: BTreeSet<(String, String)> = st.publishers.iter()
                    .flat_map(|(t, ns)| ns.iter().map(move |n| (t.to_string(), n.to_string())))
                    .collect();
                let subs: BTreeSet<(String, String)> = st.subscribers.iter()
                    .flat_map(|(t, ns)| ns.iter().map(move |n| (t.to_string(), n.to_string())))
                    .collect();
                let svcs: BTreeMap<String, String> = st.services.iter()
                    .map(|(s, p)| (s.to_string(), p[0].to_string()))
                    .collect();
                prop_assert_eq!(&pubs, &model.pubs);
                prop_assert_eq!(&subs, &model.subs);
                prop_assert_eq!(&svcs, &model.svcs);
                let names: BTreeSet<String> = st.nodes.iter().map(|n| n.to_string()).collect();
                let model_names: BTreeSet<String> = model.owner.values().cloned().collect();
                prop_assert_eq!(names, model_names);
            }
        }
    }
}
