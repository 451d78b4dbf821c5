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

//! Starting the processes of a [`LaunchPlan`] and supervising them.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::Serialize;
use serde_json::Value;

use super::expand::{LaunchPlan, MachineDef, ResolvedNode, LOCAL_MACHINE};
use super::parse::OutputMode;
use super::pkgindex::PackageIndex;
use super::{LaunchError, Result};
use crate::namegraph::GraphName;
use crate::node::config::{ENV_HOSTNAME, ENV_MASTER_URI, ENV_NAMESPACE};
use crate::node::{ControlClient, HostTable};

/// What every spawned process is told about the system.
#[derive(Debug, Clone)]
pub struct SpawnContext {
    pub master_uri: String,
    pub hostname: String,
}

pub trait Executor: Send + Sync {
    fn spawn(&self, node: &ResolvedNode, ctx: &SpawnContext) -> std::result::Result<Child, String>;
}

/// Machine name → executor. Nodes without a machine use [`LOCAL_MACHINE`].
pub type Executors = BTreeMap<String, Arc<dyn Executor>>;

/// Runs `<package root>/<type>` as a child process. The machine
/// env-loader does not apply locally and is ignored.
#[derive(Debug, Clone)]
pub struct LocalExecutor {
    packages: PackageIndex,
    env: BTreeMap<String, String>,
}

impl LocalExecutor {
    pub fn new(packages: PackageIndex) -> Self {
        LocalExecutor {
            packages,
            env: BTreeMap::new(),
        }
    }

    /// Extra environment for every child.
    pub fn with_env(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.env.insert(key.into(), value.into());
        self
    }

    pub fn program(&self, node: &ResolvedNode) -> std::result::Result<PathBuf, String> {
        let root = self.packages.find(&node.pkg).map_err(|e| e.to_string())?;
        let exe = root.join(&node.node_type);
        if exe.is_file() {
            Ok(exe)
        } else {
            Err(format!("no executable {}", exe.display()))
        }
    }

    pub fn command(&self, node: &ResolvedNode, ctx: &SpawnContext) -> std::result::Result<Command, String> {
        let mut cmd = Command::new(self.program(node)?);
        cmd.args(node.command_args())
            .envs(&self.env)
            .envs(&node.env)
            .env(ENV_MASTER_URI, &ctx.master_uri)
            .env(ENV_HOSTNAME, &ctx.hostname)
            .env(ENV_NAMESPACE, node.ns.as_str())
            .stdin(Stdio::null());
        if node.output == OutputMode::Log {
            cmd.stdout(Stdio::null()).stderr(Stdio::null());
        }
        Ok(cmd)
    }
}

impl Executor for LocalExecutor {
    fn spawn(&self, node: &ResolvedNode, ctx: &SpawnContext) -> std::result::Result<Child, String> {
        self.command(node, ctx)?.spawn().map_err(|e| e.to_string())
    }
}

fn shell_quote(s: &str) -> String {
    if !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || "/._-:=@,+".contains(c)) {
        s.to_string()
    } else {
        format!("'{}'", s.replace('\'', r"'\''"))
    }
}

/// The `ssh` argv for starting `node` on `machine`.
///
/// The remote command runs inside the machine's env-loader, which is given
/// the environment assignments and the program as its arguments.
pub fn ssh_command(machine: &MachineDef, node: &ResolvedNode, ctx: &SpawnContext, program: &str) -> Vec<String> {
    let dest = if machine.user.is_empty() {
        machine.address.clone()
    } else {
        format!("{}@{}", machine.user, machine.address)
    };
    let mut remote: Vec<String> = Vec::new();
    if !machine.env_loader.is_empty() {
        remote.push(shell_quote(&machine.env_loader));
    }
    remote.push("env".into());
    remote.push(shell_quote(&format!("{ENV_MASTER_URI}={}", ctx.master_uri)));
    remote.push(shell_quote(&format!("{ENV_HOSTNAME}={}", machine.address)));
    remote.push(shell_quote(&format!("{ENV_NAMESPACE}={}", node.ns)));
    remote.push(shell_quote(program));
    remote.extend(node.command_args().iter().map(|a| shell_quote(a)));
    vec![
        "ssh".into(),
        "-oHostkeyAlgorithms=ssh-rsa".into(),
        dest,
        remote.join(" "),
    ]
}

/// Starts nodes on a remote machine over ssh. Package roots are looked up
/// in the index describing the remote filesystem.
#[derive(Debug, Clone)]
pub struct SshExecutor {
    pub machine: MachineDef,
    pub remote_packages: PackageIndex,
}

impl SshExecutor {
    pub fn argv(&self, node: &ResolvedNode, ctx: &SpawnContext) -> std::result::Result<Vec<String>, String> {
        let root = self.remote_packages.find(&node.pkg).map_err(|e| e.to_string())?;
        let program = root.join(&node.node_type).display().to_string();
        Ok(ssh_command(&self.machine, node, ctx, &program))
    }
}

#[cfg(feature = "ssh")]
impl Executor for SshExecutor {
    fn spawn(&self, node: &ResolvedNode, ctx: &SpawnContext) -> std::result::Result<Child, String> {
        let argv = self.argv(node, ctx)?;
        let mut cmd = Command::new(&argv[0]);
        cmd.args(&argv[1..]).stdin(Stdio::null());
        if node.output == OutputMode::Log {
            cmd.stdout(Stdio::null()).stderr(Stdio::null());
        }
        cmd.spawn().map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone)]
pub struct SpawnOptions {
    pub master_uri: String,
    /// `ROS_HOSTNAME` for local children.
    pub hostname: String,
    pub hosts: HostTable,
    pub timeout: Duration,
    /// Supervisor polling period.
    pub poll: Duration,
}

impl SpawnOptions {
    pub fn new(master_uri: impl Into<String>) -> Self {
        SpawnOptions {
            master_uri: master_uri.into(),
            hostname: "127.0.0.1".into(),
            hosts: HostTable::default(),
            timeout: Duration::from_secs(3),
            poll: Duration::from_millis(50),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum NodeState {
    Running { pid: u32 },
    Exited { code: Option<i32> },
    Stopped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeStatus {
    pub name: GraphName,
    pub state: NodeState,
    pub respawn: bool,
    pub restarts: u32,
}

struct Proc {
    node: ResolvedNode,
    exec: Arc<dyn Executor>,
    child: Option<Child>,
    state: NodeState,
    restarts: u32,
}

struct Shared {
    procs: Mutex<Vec<Proc>>,
    stop: AtomicBool,
    ctx: SpawnContext,
}

/// The running processes of a plan.
///
/// A supervisor thread restarts exited `respawn="true"` nodes and records
/// the exit of the others. Dropping the handle shuts everything down.
pub struct FleetHandle {
    shared: Arc<Shared>,
    supervisor: Mutex<Option<JoinHandle<()>>>,
}

fn kill(child: &mut Child) {
    let _ = child.kill();
    let _ = child.wait();
}

fn supervise(shared: Arc<Shared>, poll: Duration) {
    while !shared.stop.load(Ordering::SeqCst) {
        {
            let mut procs = shared.procs.lock().unwrap();
            for p in procs.iter_mut() {
                let Some(child) = p.child.as_mut() else { continue };
                let Ok(Some(status)) = child.try_wait() else { continue };
                p.child = None;
                p.state = NodeState::Exited { code: status.code() };
                if p.node.respawn && !shared.stop.load(Ordering::SeqCst) {
                    if let Ok(c) = p.exec.spawn(&p.node, &shared.ctx) {
                        p.restarts += 1;
                        p.state = NodeState::Running { pid: c.id() };
                        p.child = Some(c);
                    }
                }
            }
        }
        thread::sleep(poll);
    }
}

impl FleetHandle {
    pub fn status(&self) -> Vec<NodeStatus> {
        self.shared
            .procs
            .lock()
            .unwrap()
            .iter()
            .map(|p| NodeStatus {
                name: p.node.name.clone(),
                state: p.state,
                respawn: p.node.respawn,
                restarts: p.restarts,
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.shared.procs.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all_running(&self) -> bool {
        self.status()
            .iter()
            .all(|s| matches!(s.state, NodeState::Running { .. }))
    }

    /// Nodes that exited and will not come back.
    pub fn exited(&self) -> Vec<NodeStatus> {
        self.status()
            .into_iter()
            .filter(|s| matches!(s.state, NodeState::Exited { .. }) && !s.respawn)
            .collect()
    }

    /// Blocks until every non-respawning node has exited, or the timeout.
    /// Returns whether that happened.
    pub fn wait(&self, timeout: Option<Duration>) -> bool {
        let start = Instant::now();
        loop {
            let done = self.status().iter().all(|s| {
                s.respawn || !matches!(s.state, NodeState::Running { .. })
            });
            if done {
                return true;
            }
            if timeout.is_some_and(|t| start.elapsed() >= t) {
                return false;
            }
            thread::sleep(Duration::from_millis(20));
        }
    }

    /// Stops supervision and kills every process, last started first.
    /// Safe to call more than once.
    pub fn shutdown(&self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        if let Some(h) = self.supervisor.lock().unwrap().take() {
            let _ = h.join();
        }
        let mut procs = self.shared.procs.lock().unwrap();
        for p in procs.iter_mut().rev() {
            if let Some(mut c) = p.child.take() {
                kill(&mut c);
                p.state = NodeState::Stopped;
            }
        }
    }
}

impl Drop for FleetHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Writes the plan's parameters to the master and starts its nodes.
///
/// Executors are checked and the master is contacted before anything is
/// started, so a missing executor or an unreachable master leaves no
/// processes behind.
pub fn spawn_plan(plan: &LaunchPlan, executors: &Executors, opts: &SpawnOptions) -> Result<FleetHandle> {
    let mut chosen = Vec::with_capacity(plan.nodes.len());
    for node in &plan.nodes {
        let exec = executors
            .get(&node.machine)
            .ok_or_else(|| LaunchError::ExecutorMissing(node.machine.clone()))?;
        chosen.push(exec.clone());
    }
    let master = ControlClient::connect_uri(&opts.master_uri, &opts.hosts, opts.timeout)
        .and_then(|c| c.system_state().map(|_| c))
        .map_err(|e| LaunchError::MasterUnreachable(e.to_string()))?;
    for p in &plan.params {
        let value = match &p.value {
            Value::Null => Value::String(String::new()),
            v => v.clone(),
        };
        master
            .set_param(p.key.as_str(), value)
            .map_err(|e| LaunchError::ParamWriteFailed {
                key: p.key.to_string(),
                cause: e.to_string(),
            })?;
    }
    drop(master);

    let ctx = SpawnContext {
        master_uri: opts.master_uri.clone(),
        hostname: opts.hostname.clone(),
    };
    let mut procs: Vec<Proc> = Vec::with_capacity(plan.nodes.len());
    for (node, exec) in plan.nodes.iter().zip(chosen) {
        match exec.spawn(node, &ctx) {
            Ok(child) => procs.push(Proc {
                node: node.clone(),
                exec,
                state: NodeState::Running { pid: child.id() },
                child: Some(child),
                restarts: 0,
            }),
            Err(cause) => {
                for p in procs.iter_mut().rev() {
                    if let Some(mut c) = p.child.take() {
                        kill(&mut c);
                    }
                }
                return Err(LaunchError::SpawnFailed {
                    node: node.name.to_string(),
                    cause,
                });
            }
        }
    }
    let shared = Arc::new(Shared {
        procs: Mutex::new(procs),
        stop: AtomicBool::new(false),
        ctx,
    });
    let s = shared.clone();
    let poll = opts.poll;
    let supervisor = thread::Builder::new()
        .name("launch-supervisor".into())
        .spawn(move || supervise(s, poll))
        .map_err(|e| LaunchError::SpawnFailed {
            node: "supervisor".into(),
            cause: e.to_string(),
        })?;
    Ok(FleetHandle {
        shared,
        supervisor: Mutex::new(Some(supervisor)),
    })
}

/// Executors for a plan whose nodes all run locally.
pub fn local_executors(packages: PackageIndex) -> Executors {
    let mut m: Executors = BTreeMap::new();
    m.insert(LOCAL_MACHINE.to_string(), Arc::new(LocalExecutor::new(packages)));
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::launch::parse::OutputMode;
    use crate::launch::Location;
    use crate::namegraph::RemapRule;

    fn node(name: &str, ns: &str) -> ResolvedNode {
        ResolvedNode {
            pkg: "turtlebot3_bringup".into(),
            node_type: "turtlebot3_core".into(),
            name: GraphName::parse(name).unwrap(),
            ns: GraphName::parse(ns).unwrap(),
            args: "--rate 10".into(),
            remaps: vec![RemapRule::new("/tb3_0/scan", "/tb3_0/base scan")],
            params: BTreeMap::new(),
            machine: "workstation".into(),
            env: BTreeMap::new(),
            output: OutputMode::Log,
            respawn: false,
            at: Location {
                file: "x".into(),
                line: 1,
                col: 1,
            },
        }
    }

    #[test]
    fn ssh_argv() {
        let m = MachineDef {
            name: "workstation".into(),
            address: "10.0.0.5".into(),
            env_loader: "/opt/ros/melodic/env.sh".into(),
            user: "ubuntu".into(),
            at: Location {
                file: "x".into(),
                line: 1,
                col: 1,
            },
        };
        let ctx = SpawnContext {
            master_uri: "http://10.0.0.1:11311".into(),
            hostname: "10.0.0.2".into(),
        };
        let argv = ssh_command(&m, &node("/tb3_0/core", "/tb3_0"), &ctx, "/ws/tb3/turtlebot3_core");
        assert_eq!(argv[0], "ssh");
        assert_eq!(argv[1], "-oHostkeyAlgorithms=ssh-rsa");
        assert_eq!(argv[2], "ubuntu@10.0.0.5");
        assert_eq!(
            argv[3],
            "/opt/ros/melodic/env.sh env ROS_MASTER_URI=http://10.0.0.1:11311 ROS_HOSTNAME=10.0.0.5 \
             ROS_NAMESPACE=/tb3_0 /ws/tb3/turtlebot3_core --rate 10 '/tb3_0/scan:=/tb3_0/base scan' \
             __name:=core __ns:=/tb3_0"
        );
    }

    #[test]
    fn quoting() {
        assert_eq!(shell_quote("plain/path_1.sh"), "plain/path_1.sh");
        assert_eq!(shell_quote("it's"), r"'it'\''s'");
        assert_eq!(shell_quote(""), "''");
    }

    #[test]
    fn missing_executor_is_checked_first() {
        let mut plan = LaunchPlan::default();
        plan.nodes.push(node("/a", "/"));
        let err = spawn_plan(&plan, &local_executors(PackageIndex::new()), &SpawnOptions::new("127.0.0.1:1"))
            .err()
            .unwrap();
        assert!(matches!(err, LaunchError::ExecutorMissing(m) if m == "workstation"));
    }
}
