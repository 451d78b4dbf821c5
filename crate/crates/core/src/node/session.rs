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

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Condvar, Mutex, Weak};
use std::thread;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::Deserialize;
use serde_json::{json, Value};

use super::clock::{now_ns, ClockEstimate};
use super::config::{master_socket_addr, InitOptions, NodeConfig};
use super::control::ControlClient;
use super::log::{stderr_sink, Level, LogFilter};
use super::NodeError;
use crate::master::RegistrationKind;
use crate::msg::{Message, MessageEnvelope, SchemaRegistry, ANY_TYPE};
use crate::namegraph::{apply_remaps, resolve_name, GraphName, NamespaceCtx, RemapRule};
use crate::protocol::{self, method, notify, DataHandshake, DataReply, Notification};

const BACKOFF_START: Duration = Duration::from_millis(100);
const BACKOFF_CAP: Duration = Duration::from_millis(3200);
const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(5);

/// Why a session stopped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SessionEnd {
    Shutdown,
    /// Another node registered under the same name.
    Evicted(String),
    MasterLost,
}

enum Event {
    Notify(Notification),
    ControlClosed,
}

type Callback = Box<dyn FnMut(&MessageEnvelope) + Send + 'static>;
type ServiceHandler = Arc<dyn Fn(Value) -> Result<Value, String> + Send + Sync + 'static>;

struct PubState {
    seq: u64,
    last: Option<Vec<u8>>,
    conns: Vec<TcpStream>,
    closed: bool,
}

struct PubShared {
    topic: GraphName,
    msg_type: String,
    latch: bool,
    state: Mutex<PubState>,
}

impl PubShared {
    fn close(&self) {
        let mut st = self.state.lock().unwrap();
        st.closed = true;
        for c in st.conns.drain(..) {
            let _ = c.shutdown(Shutdown::Both);
        }
    }
}

struct Link {
    active: AtomicBool,
    stream: Mutex<Option<TcpStream>>,
}

impl Link {
    fn stop(&self) {
        self.active.store(false, Ordering::SeqCst);
        if let Some(s) = self.stream.lock().unwrap().take() {
            let _ = s.shutdown(Shutdown::Both);
        }
    }
}

struct SubShared {
    topic: GraphName,
    msg_type: String,
    caller_id: String,
    tx: Mutex<Option<Sender<MessageEnvelope>>>,
    links: Mutex<BTreeMap<String, Arc<Link>>>,
    closed: AtomicBool,
}

impl SubShared {
    fn close(&self) {
        self.closed.store(true, Ordering::SeqCst);
        self.tx.lock().unwrap().take();
        for (_, l) in std::mem::take(&mut *self.links.lock().unwrap()) {
            l.stop();
        }
    }

    /// `replace` drops links to publishers absent from `uris`.
    fn update_links(self: &Arc<Self>, uris: &[String], replace: bool) {
        if self.closed.load(Ordering::SeqCst) {
            return;
        }
        let mut links = self.links.lock().unwrap();
        if replace {
            links.retain(|uri, link| {
                let keep = uris.contains(uri);
                if !keep {
                    link.stop();
                }
                keep
            });
        }
        for uri in uris {
            if links.contains_key(uri) {
                continue;
            }
            let link = Arc::new(Link {
                active: AtomicBool::new(true),
                stream: Mutex::new(None),
            });
            links.insert(uri.clone(), link.clone());
            let sub = self.clone();
            let uri = uri.clone();
            thread::spawn(move || run_link(sub, uri, link));
        }
    }
}

fn sleep_while_active(link: &Link, total: Duration) {
    let deadline = Instant::now() + total;
    while link.active.load(Ordering::SeqCst) && Instant::now() < deadline {
        thread::sleep(Duration::from_millis(10));
    }
}

fn backoff_with_jitter(base: Duration) -> Duration {
    let factor = rand::thread_rng().gen_range(0.75..1.25);
    base.mul_f64(factor)
}

fn dial(uri: &str, timeout: Duration) -> std::io::Result<TcpStream> {
    let addr: SocketAddr = uri
        .to_socket_addrs()?
        .next()
        .ok_or_else(|| std::io::Error::other("no address"))?;
    let s = TcpStream::connect_timeout(&addr, timeout)?;
    let _ = s.set_nodelay(true);
    Ok(s)
}

/// One data connection to one publisher, reconnecting while wanted.
fn run_link(sub: Arc<SubShared>, uri: String, link: Arc<Link>) {
    let mut backoff = BACKOFF_START;
    while link.active.load(Ordering::SeqCst) && !sub.closed.load(Ordering::SeqCst) {
        let stream = match dial(&uri, Duration::from_secs(1)) {
            Ok(s) => s,
            Err(_) => {
                sleep_while_active(&link, backoff_with_jitter(backoff));
                backoff = (backoff * 2).min(BACKOFF_CAP);
                continue;
            }
        };
        if let Ok(clone) = stream.try_clone() {
            *link.stream.lock().unwrap() = Some(clone);
        }
        if !link.active.load(Ordering::SeqCst) {
            let _ = stream.shutdown(Shutdown::Both);
            break;
        }
        let mut stream = stream;
        let hs = DataHandshake::Subscribe {
            topic: sub.topic.to_string(),
            msg_type: sub.msg_type.clone(),
            caller_id: sub.caller_id.clone(),
        };
        let _ = stream.set_read_timeout(Some(HANDSHAKE_TIMEOUT));
        let reply = protocol::write_json_frame(&mut stream, &hs)
            .and_then(|_| protocol::read_json_frame::<_, DataReply>(&mut stream));
        match reply {
            Ok(Some(DataReply::Ok { .. })) => {
                backoff = BACKOFF_START;
                let _ = stream.set_read_timeout(None);
                while let Ok(Some(env)) = protocol::read_json_frame::<_, MessageEnvelope>(&mut stream) {
                    let tx = sub.tx.lock().unwrap().clone();
                    match tx {
                        Some(tx) if tx.send(env).is_ok() => {}
                        _ => break,
                    }
                }
            }
            Ok(Some(DataReply::Error { .. })) => {
                // Permanent refusal (type mismatch or not publishing); a later
                // publisherUpdate listing this endpoint dials again.
                link.active.store(false, Ordering::SeqCst);
                let mut links = sub.links.lock().unwrap();
                if links.get(&uri).is_some_and(|l| Arc::ptr_eq(l, &link)) {
                    links.remove(&uri);
                }
                break;
            }
            _ => {}
        }
        let _ = stream.shutdown(Shutdown::Both);
        sleep_while_active(&link, backoff_with_jitter(backoff));
        backoff = (backoff * 2).min(BACKOFF_CAP);
    }
}

struct Inner {
    config: NodeConfig,
    ctx: NamespaceCtx,
    remaps: Vec<RemapRule>,
    data_uri: String,
    data_addr: SocketAddr,
    control: ControlClient,
    publishers: Mutex<HashMap<GraphName, Arc<PubShared>>>,
    subscriptions: Mutex<Vec<Arc<SubShared>>>,
    services: Mutex<HashMap<GraphName, ServiceHandler>>,
    end: Mutex<Option<SessionEnd>>,
    end_cv: Condvar,
    stopping: AtomicBool,
    log: LogFilter,
    timeout: Duration,
}

impl Inner {
    fn teardown(&self, why: SessionEnd, unregister: bool) {
        {
            let mut end = self.end.lock().unwrap();
            if end.is_some() {
                return;
            }
            *end = Some(why);
        }
        self.stopping.store(true, Ordering::SeqCst);
        if unregister {
            let _ = self.control.call(
                method::UNREGISTER,
                json!({"caller_id": self.config.node_name, "kind": RegistrationKind::Node}),
            );
        }
        self.control.close();
        let mut wake = self.data_addr;
        if wake.ip().is_unspecified() {
            wake.set_ip([127, 0, 0, 1].into());
        }
        let _ = TcpStream::connect_timeout(&wake, Duration::from_millis(200));
        for (_, p) in self.publishers.lock().unwrap().drain() {
            p.close();
        }
        for s in self.subscriptions.lock().unwrap().drain(..) {
            s.close();
        }
        self.services.lock().unwrap().clear();
        self.end_cv.notify_all();
    }

    fn handle_event(&self, ev: Event) {
        match ev {
            Event::ControlClosed => self.teardown(SessionEnd::MasterLost, false),
            Event::Notify(n) => match n.notify.as_str() {
                notify::PUBLISHER_UPDATE => {
                    #[derive(Deserialize)]
                    struct P {
                        topic: GraphName,
                        publishers: Vec<String>,
                    }
                    let Ok(p) = serde_json::from_value::<P>(n.params) else { return };
                    let subs: Vec<_> = self
                        .subscriptions
                        .lock()
                        .unwrap()
                        .iter()
                        .filter(|s| s.topic == p.topic)
                        .cloned()
                        .collect();
                    for s in subs {
                        s.update_links(&p.publishers, true);
                    }
                }
                notify::SHUTDOWN => {
                    let reason = n
                        .params
                        .get("reason")
                        .and_then(Value::as_str)
                        .unwrap_or("superseded")
                        .to_string();
                    self.log.emit("mrctl", Level::Warn, &format!("shutdown requested: {reason}"));
                    self.teardown(SessionEnd::Evicted(reason), false);
                }
                notify::SET_LOGGER_LEVEL => {
                    let logger = n.params.get("logger").and_then(Value::as_str);
                    let level = n
                        .params
                        .get("level")
                        .and_then(Value::as_str)
                        .and_then(|l| l.parse::<Level>().ok());
                    if let (Some(logger), Some(level)) = (logger, level) {
                        self.log.set_level(logger, level);
                    }
                }
                notify::SERVICE_SUPERSEDED => {
                    if let Some(svc) = n
                        .params
                        .get("service")
                        .and_then(Value::as_str)
                        .and_then(|s| GraphName::parse(s).ok())
                    {
                        self.services.lock().unwrap().remove(&svc);
                        self.log.emit("mrctl", Level::Warn, &format!("service {svc} taken over by another node"));
                    }
                }
                _ => {}
            },
        }
    }

    fn serve_data_conn(&self, mut stream: TcpStream) {
        let _ = stream.set_read_timeout(Some(HANDSHAKE_TIMEOUT));
        let Ok(Some(hs)) = protocol::read_json_frame::<_, DataHandshake>(&mut stream) else {
            return;
        };
        let _ = stream.set_read_timeout(None);
        let refuse = |mut s: &TcpStream, message: String| {
            let _ = protocol::write_json_frame(&mut s, &DataReply::Error { message });
            let _ = s.shutdown(Shutdown::Write);
        };
        match hs {
            DataHandshake::Subscribe { topic, msg_type, .. } => {
                let publisher = GraphName::parse(&topic)
                    .ok()
                    .and_then(|t| self.publishers.lock().unwrap().get(&t).cloned());
                let Some(p) = publisher else {
                    return refuse(&stream, format!("not publishing {topic}"));
                };
                if msg_type != ANY_TYPE && msg_type != p.msg_type {
                    return refuse(
                        &stream,
                        format!("topic {topic} carries {}, subscriber wants {msg_type}", p.msg_type),
                    );
                }
                let mut st = p.state.lock().unwrap();
                if st.closed {
                    return;
                }
                let ok = DataReply::Ok {
                    msg_type: p.msg_type.clone(),
                    latched: p.latch,
                };
                if protocol::write_json_frame(&mut stream, &ok).is_err() {
                    return;
                }
                if let Some(last) = &st.last {
                    if stream.write_all(last).is_err() {
                        return;
                    }
                }
                st.conns.push(stream);
            }
            DataHandshake::Call { service, request, .. } => {
                let handler = GraphName::parse(&service)
                    .ok()
                    .and_then(|s| self.services.lock().unwrap().get(&s).cloned());
                let Some(h) = handler else {
                    return refuse(&stream, format!("not providing {service}"));
                };
                let reply = match h(request) {
                    Ok(result) => DataReply::Response { result },
                    Err(message) => DataReply::Error { message },
                };
                let _ = protocol::write_json_frame(&mut stream, &reply);
                let _ = stream.shutdown(Shutdown::Write);
            }
        }
    }
}

impl Drop for Inner {
    fn drop(&mut self) {
        self.teardown(SessionEnd::Shutdown, true);
    }
}

/// A node's connection to the graph. Cheap to clone; the session shuts
/// down when the last clone drops or on [`NodeSession::shutdown`].
#[derive(Clone)]
pub struct NodeSession {
    inner: Arc<Inner>,
}

/// Handle to an advertised topic.
#[derive(Clone)]
pub struct Publisher {
    shared: Arc<PubShared>,
    session: Weak<Inner>,
}

/// Handle to a topic subscription. Clones share it; dropping a handle
/// does not unsubscribe, call [`Subscription::unsubscribe`] or end the
/// session.
#[derive(Clone)]
pub struct Subscription {
    shared: Arc<SubShared>,
    session: Weak<Inner>,
}

/// Handle to an advertised service.
pub struct ServiceServer {
    name: GraphName,
}

impl ServiceServer {
    pub fn name(&self) -> &GraphName {
        &self.name
    }
}

impl NodeSession {
    /// Starts a node using the process environment.
    pub fn init_from_env(default_name: &str, opts: InitOptions) -> Result<Self, NodeError> {
        let env: HashMap<String, String> = std::env::vars().collect();
        Self::init(default_name, &env, opts)
    }

    pub fn init(
        default_name: &str,
        env: &HashMap<String, String>,
        opts: InitOptions,
    ) -> Result<Self, NodeError> {
        let config = NodeConfig::from_env(default_name, env, &opts)?;
        let master_addr = master_socket_addr(&config.master_uri, &opts.hosts)?;
        let listener = TcpListener::bind("0.0.0.0:0")?;
        let data_addr = listener.local_addr()?;
        let data_uri = format!("{}:{}", config.hostname, data_addr.port());

        let (etx, erx) = mpsc::channel::<Event>();
        let close_tx = etx.clone();
        let control = ControlClient::connect(
            &master_addr,
            opts.timeout,
            move |n| {
                let _ = etx.send(Event::Notify(n));
            },
            move || {
                let _ = close_tx.send(Event::ControlClosed);
            },
        )?;
        let control_uri = control.local_addr().to_string();
        let sink = opts.log_sink.clone().unwrap_or_else(stderr_sink);
        let inner = Arc::new(Inner {
            ctx: config.ctx(),
            remaps: opts.remaps.clone(),
            log: LogFilter::new(config.node_name.clone(), sink),
            config,
            data_uri,
            data_addr,
            control,
            publishers: Mutex::new(HashMap::new()),
            subscriptions: Mutex::new(Vec::new()),
            services: Mutex::new(HashMap::new()),
            end: Mutex::new(None),
            end_cv: Condvar::new(),
            stopping: AtomicBool::new(false),
            timeout: opts.timeout,
        });

        let weak = Arc::downgrade(&inner);
        thread::Builder::new()
            .name("node-events".into())
            .spawn(move || event_loop(weak, erx))?;
        let weak = Arc::downgrade(&inner);
        thread::Builder::new()
            .name("node-data".into())
            .spawn(move || accept_loop(weak, listener))?;

        inner.control.call(
            method::HELLO,
            json!({
                "name": inner.config.node_name,
                "control_uri": control_uri,
                "data_uri": inner.data_uri,
            }),
        )?;
        Ok(NodeSession { inner })
    }

    pub fn name(&self) -> &GraphName {
        &self.inner.config.node_name
    }

    pub fn namespace(&self) -> &GraphName {
        &self.inner.config.namespace
    }

    pub fn config(&self) -> &NodeConfig {
        &self.inner.config
    }

    pub fn data_uri(&self) -> &str {
        &self.inner.data_uri
    }

    /// The master connection, for parameter access and queries.
    pub fn master(&self) -> &ControlClient {
        &self.inner.control
    }

    /// Resolves a raw topic/service name and applies this node's remaps.
    pub fn resolve(&self, raw: &str) -> Result<GraphName, NodeError> {
        let resolved = resolve_name(raw, &self.inner.ctx)?;
        Ok(apply_remaps(&resolved, &self.inner.remaps, &self.inner.ctx)?)
    }

    fn ensure_running(&self) -> Result<(), NodeError> {
        match &*self.inner.end.lock().unwrap() {
            None => Ok(()),
            Some(SessionEnd::Evicted(r)) => Err(NodeError::NameEvicted(r.clone())),
            Some(_) => Err(NodeError::Closed),
        }
    }

    pub fn advertise(&self, topic: &str, msg_type: &str, latch: bool) -> Result<Publisher, NodeError> {
        self.ensure_running()?;
        SchemaRegistry::builtin()
            .fields(msg_type)
            .ok_or_else(|| crate::msg::SchemaError::UnknownType(msg_type.to_string()))?;
        let topic = self.resolve(topic)?;
        let shared = {
            let mut pubs = self.inner.publishers.lock().unwrap();
            if let Some(existing) = pubs.get(&topic) {
                if existing.msg_type != msg_type {
                    return Err(NodeError::TypeMismatch(format!(
                        "{topic} already advertised as {}",
                        existing.msg_type
                    )));
                }
                existing.clone()
            } else {
                let p = Arc::new(PubShared {
                    topic: topic.clone(),
                    msg_type: msg_type.to_string(),
                    latch,
                    state: Mutex::new(PubState {
                        seq: 0,
                        last: None,
                        conns: Vec::new(),
                        closed: false,
                    }),
                });
                pubs.insert(topic.clone(), p.clone());
                p
            }
        };
        let res = self.inner.control.call(
            method::REGISTER_PUBLISHER,
            json!({
                "caller_id": self.name(),
                "topic": topic,
                "msg_type": msg_type,
                "data_uri": self.inner.data_uri,
            }),
        );
        if let Err(e) = res {
            self.inner.publishers.lock().unwrap().remove(&topic);
            return Err(e);
        }
        Ok(Publisher {
            shared,
            session: Arc::downgrade(&self.inner),
        })
    }

    pub fn advertise_msg<T: Message>(&self, topic: &str, latch: bool) -> Result<Publisher, NodeError> {
        self.advertise(topic, T::TYPE.as_str(), latch)
    }

    /// Subscribes with a callback run serially on a per-subscription thread.
    pub fn subscribe<F>(&self, topic: &str, msg_type: &str, callback: F) -> Result<Subscription, NodeError>
    where
        F: FnMut(&MessageEnvelope) + Send + 'static,
    {
        self.ensure_running()?;
        if msg_type != ANY_TYPE && SchemaRegistry::builtin().fields(msg_type).is_none() {
            return Err(crate::msg::SchemaError::UnknownType(msg_type.to_string()).into());
        }
        let topic = self.resolve(topic)?;
        let (tx, rx) = mpsc::channel::<MessageEnvelope>();
        let shared = Arc::new(SubShared {
            topic: topic.clone(),
            msg_type: msg_type.to_string(),
            caller_id: self.name().to_string(),
            tx: Mutex::new(Some(tx)),
            links: Mutex::new(BTreeMap::new()),
            closed: AtomicBool::new(false),
        });
        let cb: Callback = Box::new(callback);
        let dispatch = shared.clone();
        thread::Builder::new()
            .name("sub-dispatch".into())
            .spawn(move || dispatch_loop(dispatch, rx, cb))?;
        self.inner.subscriptions.lock().unwrap().push(shared.clone());
        let uris: Result<Vec<String>, _> = self.inner.control.call_as(
            method::REGISTER_SUBSCRIBER,
            json!({"caller_id": self.name(), "topic": topic, "msg_type": msg_type}),
        );
        match uris {
            Ok(uris) => shared.update_links(&uris, false),
            Err(e) => {
                self.inner
                    .subscriptions
                    .lock()
                    .unwrap()
                    .retain(|s| !Arc::ptr_eq(s, &shared));
                shared.close();
                return Err(e);
            }
        }
        Ok(Subscription {
            shared,
            session: Arc::downgrade(&self.inner),
        })
    }

    /// Typed subscription; payloads that fail to decode are dropped.
    pub fn subscribe_msg<T, F>(&self, topic: &str, mut callback: F) -> Result<Subscription, NodeError>
    where
        T: Message,
        F: FnMut(T) + Send + 'static,
    {
        self.subscribe(topic, T::TYPE.as_str(), move |env| {
            if let Ok(m) = env.decode::<T>() {
                callback(m)
            }
        })
    }

    pub fn advertise_service<F>(&self, service: &str, handler: F) -> Result<ServiceServer, NodeError>
    where
        F: Fn(Value) -> Result<Value, String> + Send + Sync + 'static,
    {
        self.ensure_running()?;
        let name = self.resolve(service)?;
        self.inner
            .services
            .lock()
            .unwrap()
            .insert(name.clone(), Arc::new(handler));
        let res = self.inner.control.call(
            method::REGISTER_SERVICE,
            json!({"caller_id": self.name(), "service": name, "data_uri": self.inner.data_uri}),
        );
        if let Err(e) = res {
            self.inner.services.lock().unwrap().remove(&name);
            return Err(e);
        }
        Ok(ServiceServer { name })
    }

    /// Looks the provider up, sends one request frame and reads one reply.
    pub fn call_service(&self, service: &str, request: Value) -> Result<Value, NodeError> {
        self.ensure_running()?;
        let name = self.resolve(service)?;
        let uri = self.inner.control.lookup_service(name.as_str())?;
        let unreachable = |e: std::io::Error| NodeError::ProviderUnreachable(format!("{name} at {uri}: {e}"));
        let mut stream = dial(&uri, self.inner.timeout).map_err(unreachable)?;
        let _ = stream.set_read_timeout(Some(self.inner.timeout.max(Duration::from_secs(10))));
        protocol::write_json_frame(
            &mut stream,
            &DataHandshake::Call {
                service: name.to_string(),
                caller_id: self.name().to_string(),
                request,
            },
        )
        .map_err(unreachable)?;
        match protocol::read_json_frame::<_, DataReply>(&mut stream) {
            Ok(Some(DataReply::Response { result })) => Ok(result),
            Ok(Some(DataReply::Error { message })) => Err(NodeError::RemoteError(message)),
            Ok(Some(DataReply::Ok { .. })) => Err(NodeError::Protocol("unexpected reply to call".into())),
            Ok(None) => Err(unreachable(std::io::ErrorKind::UnexpectedEof.into())),
            Err(e) => Err(unreachable(e)),
        }
    }

    /// Reads a parameter; relative and private keys resolve against this node.
    pub fn get_param(&self, key: &str) -> Result<Value, NodeError> {
        let key = resolve_name(key, &self.inner.ctx)?;
        self.inner.control.get_param(key.as_str())
    }

    pub fn sync_probe(&self) -> Result<ClockEstimate, NodeError> {
        self.inner.control.sync_probe()
    }

    pub fn log(&self, logger: &str, level: Level, message: &str) {
        self.inner.log.emit(logger, level, message);
    }

    pub fn debug(&self, logger: &str, message: &str) {
        self.log(logger, Level::Debug, message)
    }

    pub fn info(&self, logger: &str, message: &str) {
        self.log(logger, Level::Info, message)
    }

    pub fn warn(&self, logger: &str, message: &str) {
        self.log(logger, Level::Warn, message)
    }

    pub fn error(&self, logger: &str, message: &str) {
        self.log(logger, Level::Error, message)
    }

    pub fn logger_level(&self, logger: &str) -> Level {
        self.inner.log.level(logger)
    }

    pub fn is_running(&self) -> bool {
        self.inner.end.lock().unwrap().is_none()
    }

    pub fn end_reason(&self) -> Option<SessionEnd> {
        self.inner.end.lock().unwrap().clone()
    }

    /// Waits until the session ends; `None` on timeout.
    pub fn wait_for_end(&self, timeout: Option<Duration>) -> Option<SessionEnd> {
        let deadline = timeout.map(|t| Instant::now() + t);
        let mut end = self.inner.end.lock().unwrap();
        loop {
            if let Some(e) = &*end {
                return Some(e.clone());
            }
            match deadline {
                None => end = self.inner.end_cv.wait(end).unwrap(),
                Some(d) => {
                    let now = Instant::now();
                    if now >= d {
                        return None;
                    }
                    end = self.inner.end_cv.wait_timeout(end, d - now).unwrap().0;
                }
            }
        }
    }

    /// Unregisters everything and closes all connections. Idempotent.
    pub fn shutdown(&self) {
        self.inner.teardown(SessionEnd::Shutdown, true);
    }
}

impl Publisher {
    pub fn topic(&self) -> &GraphName {
        &self.shared.topic
    }

    pub fn msg_type(&self) -> &str {
        &self.shared.msg_type
    }

    pub fn num_subscribers(&self) -> usize {
        self.shared.state.lock().unwrap().conns.len()
    }

    /// Blocks until at least `n` subscribers are connected.
    pub fn wait_for_subscribers(&self, n: usize, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        while self.num_subscribers() < n {
            if Instant::now() >= deadline {
                return false;
            }
            thread::sleep(Duration::from_millis(5));
        }
        true
    }

    pub fn publish(&self, payload: Value) -> Result<(), NodeError> {
        self.publish_stamped(payload, now_ns())
    }

    pub fn publish_stamped(&self, payload: Value, stamp: i64) -> Result<(), NodeError> {
        SchemaRegistry::builtin().validate(&self.shared.msg_type, &payload)?;
        let mut st = self.shared.state.lock().unwrap();
        if st.closed {
            return Err(NodeError::Closed);
        }
        st.seq += 1;
        let env = MessageEnvelope {
            topic: self.shared.topic.clone(),
            msg_type: self.shared.msg_type.clone(),
            stamp,
            seq: st.seq,
            payload,
        };
        let body = serde_json::to_vec(&env).map_err(|e| NodeError::Protocol(e.to_string()))?;
        let frame = protocol::encode_frame(&body);
        st.conns.retain_mut(|c| c.write_all(&frame).is_ok());
        if self.shared.latch {
            st.last = Some(frame);
        }
        Ok(())
    }

    pub fn publish_msg<T: Message>(&self, msg: &T) -> Result<(), NodeError> {
        if T::TYPE.as_str() != self.shared.msg_type {
            return Err(NodeError::TypeMismatch(format!(
                "{} publisher given {}",
                self.shared.msg_type,
                T::TYPE
            )));
        }
        self.publish(msg.to_payload())
    }

    /// Unregisters this topic and drops its subscriber connections.
    pub fn unadvertise(&self) {
        if let Some(inner) = self.session.upgrade() {
            let removed = {
                let mut pubs = inner.publishers.lock().unwrap();
                match pubs.get(&self.shared.topic) {
                    Some(p) if Arc::ptr_eq(p, &self.shared) => pubs.remove(&self.shared.topic),
                    _ => None,
                }
            };
            if removed.is_some() {
                let _ = inner.control.call(
                    method::UNREGISTER,
                    json!({
                        "caller_id": inner.config.node_name,
                        "kind": RegistrationKind::Publisher,
                        "name": self.shared.topic,
                    }),
                );
            }
        }
        self.shared.close();
    }
}

impl Subscription {
    pub fn topic(&self) -> &GraphName {
        &self.shared.topic
    }

    /// Number of publishers currently linked (connected or retrying).
    pub fn num_links(&self) -> usize {
        self.shared.links.lock().unwrap().len()
    }

    pub fn unsubscribe(&self) {
        if let Some(inner) = self.session.upgrade() {
            inner
                .subscriptions
                .lock()
                .unwrap()
                .retain(|s| !Arc::ptr_eq(s, &self.shared));
            let others = inner
                .subscriptions
                .lock()
                .unwrap()
                .iter()
                .any(|s| s.topic == self.shared.topic);
            if !others {
                let _ = inner.control.call(
                    method::UNREGISTER,
                    json!({
                        "caller_id": inner.config.node_name,
                        "kind": RegistrationKind::Subscriber,
                        "name": self.shared.topic,
                    }),
                );
            }
        }
        self.shared.close();
    }
}

fn dispatch_loop(sub: Arc<SubShared>, rx: Receiver<MessageEnvelope>, mut cb: Callback) {
    for env in rx {
        if sub.closed.load(Ordering::SeqCst) {
            break;
        }
        cb(&env);
    }
}

fn event_loop(inner: Weak<Inner>, rx: Receiver<Event>) {
    for ev in rx {
        let Some(inner) = inner.upgrade() else { break };
        inner.handle_event(ev);
    }
}

fn accept_loop(inner: Weak<Inner>, listener: TcpListener) {
    for stream in listener.incoming() {
        let Some(strong) = inner.upgrade() else { break };
        if strong.stopping.load(Ordering::SeqCst) {
            break;
        }
        let Ok(stream) = stream else { continue };
        let _ = stream.set_nodelay(true);
        drop(strong);
        let weak = inner.clone();
        thread::spawn(move || {
            if let Some(inner) = weak.upgrade() {
                inner.serve_data_conn(stream);
            }
        });
    }
}
