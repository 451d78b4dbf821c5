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

use std::collections::HashMap;
use std::io::{self, BufReader, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};

use serde::Deserialize;
use serde_json::{json, Value};

use super::registry::{ConnId, Outbound, RegistrationKind, Registry, RegistryError};
use crate::node::clock::now_ns;
use crate::namegraph::GraphName;
use crate::protocol::{self, method, ErrorCode, RemoteError, Request, Response};

struct Conn {
    tx: Sender<String>,
    stream: TcpStream,
}

struct Shared {
    registry: Mutex<Registry>,
    conns: Mutex<HashMap<ConnId, Conn>>,
    next_conn: AtomicU64,
    stopping: AtomicBool,
}

/// A running master. Dropping the handle does not stop it; call
/// [`MasterHandle::shutdown`].
pub struct MasterHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    accept: Mutex<Option<JoinHandle<()>>>,
}

impl MasterHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// `host:port` suitable for `ROS_MASTER_URI`, with loopback substituted
    /// for an unspecified bind address.
    pub fn uri(&self) -> String {
        let host = if self.addr.ip().is_unspecified() {
            "127.0.0.1".to_string()
        } else {
            self.addr.ip().to_string()
        };
        format!("http://{host}:{}", self.addr.port())
    }

    pub fn with_registry<R>(&self, f: impl FnOnce(&Registry) -> R) -> R {
        f(&self.shared.registry.lock().unwrap())
    }

    /// Stops accepting and closes every control connection. Idempotent.
    pub fn shutdown(&self) {
        if self.shared.stopping.swap(true, Ordering::SeqCst) {
            return;
        }
        let _ = TcpStream::connect(self.wake_addr());
        for (_, c) in self.shared.conns.lock().unwrap().drain() {
            let _ = c.stream.shutdown(Shutdown::Both);
        }
        if let Some(h) = self.accept.lock().unwrap().take() {
            let _ = h.join();
        }
    }

    /// Blocks until the accept loop exits.
    pub fn join(&self) {
        let handle = self.accept.lock().unwrap().take();
        if let Some(h) = handle {
            let _ = h.join();
        }
    }

    fn wake_addr(&self) -> SocketAddr {
        let mut a = self.addr;
        if a.ip().is_unspecified() {
            a.set_ip([127, 0, 0, 1].into());
        }
        a
    }
}

impl Drop for MasterHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Binds and starts serving on a background thread.
pub fn start(bind: impl ToSocketAddrs) -> io::Result<MasterHandle> {
    let listener = TcpListener::bind(bind)?;
    let addr = listener.local_addr()?;
    let shared = Arc::new(Shared {
        registry: Mutex::new(Registry::new()),
        conns: Mutex::new(HashMap::new()),
        next_conn: AtomicU64::new(1),
        stopping: AtomicBool::new(false),
    });
    let accept_shared = shared.clone();
    let accept = thread::Builder::new()
        .name("master-accept".into())
        .spawn(move || accept_loop(listener, accept_shared))?;
    Ok(MasterHandle {
        addr,
        shared,
        accept: Mutex::new(Some(accept)),
    })
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>) {
    for stream in listener.incoming() {
        if shared.stopping.load(Ordering::SeqCst) {
            break;
        }
        let Ok(stream) = stream else { continue };
        let _ = stream.set_nodelay(true);
        let id = shared.next_conn.fetch_add(1, Ordering::SeqCst);
        let (tx, rx) = mpsc::channel::<String>();
        let (Ok(mut writer), Ok(reader), Ok(closer)) =
            (stream.try_clone(), stream.try_clone(), stream.try_clone())
        else {
            continue;
        };
        shared.conns.lock().unwrap().insert(id, Conn { tx: tx.clone(), stream: closer });
        thread::spawn(move || {
            for line in rx {
                if writer.write_all(line.as_bytes()).is_err() {
                    break;
                }
            }
            let _ = writer.shutdown(Shutdown::Both);
        });
        let conn_shared = shared.clone();
        thread::spawn(move || serve_conn(id, reader, tx, conn_shared));
    }
}

fn serve_conn(id: ConnId, stream: TcpStream, tx: Sender<String>, shared: Arc<Shared>) {
    let mut reader = BufReader::new(stream);
    while let Ok(Some(line)) = protocol::read_line(&mut reader) {
        let received = now_ns();
        let response = match serde_json::from_str::<Request>(&line) {
            Ok(req) => dispatch(id, req, received, &shared),
            Err(e) => Response::err(0, RemoteError::new(ErrorCode::BadRequest, e.to_string())),
        };
        let mut text = serde_json::to_string(&response).expect("responses serialize");
        text.push('\n');
        if tx.send(text).is_err() {
            break;
        }
    }
    let mut reg = shared.registry.lock().unwrap();
    let out = reg.disconnect(id);
    deliver(&shared, out);
    drop(reg);
    shared.conns.lock().unwrap().remove(&id);
}

/// Queues notifications. Called with the registry locked, so delivery order
/// per destination follows commit order.
fn deliver(shared: &Shared, out: Vec<Outbound>) {
    if out.is_empty() {
        return;
    }
    let conns = shared.conns.lock().unwrap();
    for o in out {
        if let Some(c) = conns.get(&o.conn) {
            let mut text = serde_json::to_string(&o.note).expect("notifications serialize");
            text.push('\n');
            let _ = c.tx.send(text);
        }
    }
}

fn bad(e: impl std::fmt::Display) -> RemoteError {
    RemoteError::new(ErrorCode::BadRequest, e.to_string())
}

fn params<T: for<'de> Deserialize<'de>>(v: Value) -> Result<T, RemoteError> {
    serde_json::from_value(v).map_err(bad)
}

fn name(text: &str) -> Result<GraphName, RemoteError> {
    GraphName::parse(text).map_err(|e| RemoteError::new(ErrorCode::MalformedName, e.to_string()))
}

#[derive(Deserialize)]
struct HelloParams {
    name: String,
    control_uri: String,
    data_uri: String,
}

#[derive(Deserialize)]
struct RegisterParams {
    caller_id: String,
    topic: String,
    msg_type: String,
    #[serde(default)]
    data_uri: Option<String>,
}

#[derive(Deserialize)]
struct UnregisterParams {
    caller_id: String,
    kind: RegistrationKind,
    #[serde(default)]
    name: Option<String>,
}

#[derive(Deserialize)]
struct ServiceParams {
    caller_id: String,
    service: String,
    data_uri: String,
}

#[derive(Deserialize)]
struct LookupParams {
    service: String,
}

#[derive(Deserialize)]
struct ParamParams {
    key: String,
    #[serde(default)]
    value: Value,
}

#[derive(Deserialize)]
struct LoggerParams {
    node: String,
    logger: String,
    level: String,
}

fn dispatch(conn: ConnId, req: Request, received: i64, shared: &Shared) -> Response {
    let id = req.id;
    match handle(conn, req, received, shared) {
        Ok(v) => Response::ok(id, v),
        Err(e) => Response::err(id, e),
    }
}

fn handle(conn: ConnId, req: Request, received: i64, shared: &Shared) -> Result<Value, RemoteError> {
    let mut reg = shared.registry.lock().unwrap();
    let commit = |reg_out: Result<(Value, Vec<Outbound>), RegistryError>| {
        let (v, out) = reg_out?;
        deliver(shared, out);
        Ok(v)
    };
    match req.method.as_str() {
        method::HELLO => {
            let p: HelloParams = params(req.params)?;
            let n = name(&p.name)?;
            commit(
                reg.hello(conn, n, p.control_uri, p.data_uri)
                    .map(|(o, out)| (json!(o), out)),
            )
        }
        method::REGISTER_PUBLISHER => {
            let p: RegisterParams = params(req.params)?;
            let caller = name(&p.caller_id)?;
            let topic = name(&p.topic)?;
            let uri = p.data_uri.ok_or_else(|| bad("missing data_uri"))?;
            commit(
                reg.register_publisher(conn, &caller, topic, &p.msg_type, &uri)
                    .map(|(subs, out)| (json!(subs), out)),
            )
        }
        method::REGISTER_SUBSCRIBER => {
            let p: RegisterParams = params(req.params)?;
            let caller = name(&p.caller_id)?;
            let topic = name(&p.topic)?;
            Ok(json!(reg.register_subscriber(conn, &caller, topic, &p.msg_type)?))
        }
        method::UNREGISTER => {
            let p: UnregisterParams = params(req.params)?;
            let caller = name(&p.caller_id)?;
            let target = p.name.as_deref().map(name).transpose()?;
            commit(
                reg.unregister(conn, &caller, p.kind, target.as_ref())
                    .map(|out| (Value::Null, out)),
            )
        }
        method::REGISTER_SERVICE => {
            let p: ServiceParams = params(req.params)?;
            let caller = name(&p.caller_id)?;
            let svc = name(&p.service)?;
            commit(
                reg.register_service(conn, &caller, svc, &p.data_uri)
                    .map(|out| (Value::Null, out)),
            )
        }
        method::LOOKUP_SERVICE => {
            let p: LookupParams = params(req.params)?;
            Ok(json!(reg.lookup_service(&name(&p.service)?)?))
        }
        method::GET_SYSTEM_STATE => Ok(serde_json::to_value(reg.system_state()).map_err(bad)?),
        method::SET_PARAM => {
            let p: ParamParams = params(req.params)?;
            reg.param_set(name(&p.key)?, p.value)?;
            Ok(Value::Null)
        }
        method::GET_PARAM => {
            let p: ParamParams = params(req.params)?;
            Ok(reg.param_get(&name(&p.key)?)?.clone())
        }
        method::HAS_PARAM => {
            let p: ParamParams = params(req.params)?;
            Ok(json!(reg.param_has(&name(&p.key)?)))
        }
        method::DELETE_PARAM => {
            let p: ParamParams = params(req.params)?;
            reg.param_delete(&name(&p.key)?)?;
            Ok(Value::Null)
        }
        method::SET_LOGGER_LEVEL => {
            let p: LoggerParams = params(req.params)?;
            let node = name(&p.node)?;
            commit(
                reg.set_logger_level(&node, &p.logger, &p.level)
                    .map(|out| (Value::Null, out)),
            )
        }
        method::TIME_SYNC => Ok(json!({"t1": received, "t2": now_ns()})),
        other => Err(RemoteError::new(
            ErrorCode::UnknownMethod,
            format!("unknown method {other:?}"),
        )),
    }
}
