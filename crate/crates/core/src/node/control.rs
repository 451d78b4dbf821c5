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

//! Client side of the master control protocol.

use std::collections::HashMap;
use std::io::BufReader;
use std::net::{Shutdown, SocketAddr, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Sender};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use super::clock::{estimate_clock_offset, now_ns, ClockEstimate};
use super::hosts::HostTable;
use super::config::master_socket_addr;
use super::NodeError;
use crate::master::SystemState;
use crate::protocol::{self, method, Incoming, Notification, Request, Response};

type Pending = Arc<Mutex<HashMap<u64, Sender<Response>>>>;

/// A persistent request/response connection to the master.
///
/// Notifications are handed to the callback given at connect time, on the
/// reader thread, in arrival order.
pub struct ControlClient {
    writer: Mutex<TcpStream>,
    pending: Pending,
    next_id: AtomicU64,
    closed: Arc<AtomicBool>,
    timeout: Duration,
    local_addr: SocketAddr,
}

impl ControlClient {
    /// Connects to a master URI (`http://host:port` or `host:port`) for
    /// tools that only query.
    pub fn connect_uri(uri: &str, hosts: &HostTable, timeout: Duration) -> Result<Self, NodeError> {
        let addr = master_socket_addr(uri, hosts)?;
        Self::connect(&addr, timeout, |_| {}, || {})
    }

    pub fn connect(
        addr: &str,
        timeout: Duration,
        on_notify: impl Fn(Notification) + Send + 'static,
        on_close: impl FnOnce() + Send + 'static,
    ) -> Result<Self, NodeError> {
        let unreachable = |e: String| NodeError::MasterUnreachable(format!("{addr}: {e}"));
        let sock: SocketAddr = addr
            .to_socket_addrs()
            .map_err(|e| unreachable(e.to_string()))?
            .next()
            .ok_or_else(|| unreachable("no address".into()))?;
        let stream =
            TcpStream::connect_timeout(&sock, timeout).map_err(|e| unreachable(e.to_string()))?;
        let _ = stream.set_nodelay(true);
        let local_addr = stream.local_addr()?;
        let reader = stream.try_clone()?;
        let pending: Pending = Arc::new(Mutex::new(HashMap::new()));
        let closed = Arc::new(AtomicBool::new(false));
        let (p, c) = (pending.clone(), closed.clone());
        thread::Builder::new()
            .name("control-reader".into())
            .spawn(move || {
                let mut reader = BufReader::new(reader);
                while let Ok(Some(line)) = protocol::read_line(&mut reader) {
                    match serde_json::from_str::<Incoming>(&line) {
                        Ok(Incoming::Response(resp)) => {
                            if let Some(tx) = p.lock().unwrap().remove(&resp.id) {
                                let _ = tx.send(resp);
                            }
                        }
                        Ok(Incoming::Notification(n)) => on_notify(n),
                        Err(_) => {}
                    }
                }
                c.store(true, Ordering::SeqCst);
                p.lock().unwrap().clear();
                on_close();
            })?;
        Ok(ControlClient {
            writer: Mutex::new(stream),
            pending,
            next_id: AtomicU64::new(1),
            closed,
            timeout,
            local_addr,
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn is_closed(&self) -> bool {
        self.closed.load(Ordering::SeqCst)
    }

    pub fn call(&self, method: &str, params: Value) -> Result<Value, NodeError> {
        if self.is_closed() {
            return Err(NodeError::Closed);
        }
        let id = self.next_id.fetch_add(1, Ordering::SeqCst);
        let (tx, rx) = mpsc::channel();
        self.pending.lock().unwrap().insert(id, tx);
        let req = Request {
            id,
            method: method.to_string(),
            params,
        };
        {
            let mut w = self.writer.lock().unwrap();
            if let Err(e) = protocol::write_line(&mut *w, &req) {
                self.pending.lock().unwrap().remove(&id);
                return Err(e.into());
            }
        }
        match rx.recv_timeout(self.timeout) {
            Ok(resp) => resp.into_result().map_err(NodeError::from_remote),
            Err(mpsc::RecvTimeoutError::Timeout) => {
                self.pending.lock().unwrap().remove(&id);
                Err(NodeError::Timeout)
            }
            Err(mpsc::RecvTimeoutError::Disconnected) => Err(NodeError::Closed),
        }
    }

    pub fn call_as<T: DeserializeOwned>(&self, method: &str, params: Value) -> Result<T, NodeError> {
        let v = self.call(method, params)?;
        serde_json::from_value(v).map_err(|e| NodeError::Protocol(e.to_string()))
    }

    pub fn close(&self) {
        let _ = self.writer.lock().unwrap().shutdown(Shutdown::Both);
    }

    pub fn system_state(&self) -> Result<SystemState, NodeError> {
        self.call_as(method::GET_SYSTEM_STATE, json!({}))
    }

    pub fn set_param(&self, key: &str, value: Value) -> Result<(), NodeError> {
        self.call(method::SET_PARAM, json!({"key": key, "value": value}))
            .map(|_| ())
    }

    pub fn get_param(&self, key: &str) -> Result<Value, NodeError> {
        self.call(method::GET_PARAM, json!({"key": key}))
    }

    pub fn has_param(&self, key: &str) -> Result<bool, NodeError> {
        self.call_as(method::HAS_PARAM, json!({"key": key}))
    }

    pub fn delete_param(&self, key: &str) -> Result<(), NodeError> {
        self.call(method::DELETE_PARAM, json!({"key": key}))
            .map(|_| ())
    }

    pub fn lookup_service(&self, service: &str) -> Result<String, NodeError> {
        self.call_as(method::LOOKUP_SERVICE, json!({"service": service}))
    }

    pub fn set_logger_level(&self, node: &str, logger: &str, level: &str) -> Result<(), NodeError> {
        self.call(
            method::SET_LOGGER_LEVEL,
            json!({"node": node, "logger": logger, "level": level}),
        )
        .map(|_| ())
    }

    /// One four-timestamp exchange with the master clock.
    pub fn sync_probe(&self) -> Result<ClockEstimate, NodeError> {
        let t0 = now_ns();
        let v = self.call(method::TIME_SYNC, json!({}))?;
        let t3 = now_ns();
        let field = |k: &str| {
            v.get(k)
                .and_then(Value::as_i64)
                .ok_or_else(|| NodeError::Protocol(format!("timeSync reply missing {k}")))
        };
        Ok(estimate_clock_offset(t0, field("t1")?, field("t2")?, t3)?)
    }
}

impl Drop for ControlClient {
    fn drop(&mut self) {
        self.close();
    }
}
