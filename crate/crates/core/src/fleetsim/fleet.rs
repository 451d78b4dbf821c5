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

//! Simulated robots attached to the graph.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kinematics::{simulate_scan, step_diff_drive, Noise, RobotState, ScanSpec};
use super::map_server::{fetch_static_map, MAP_TOPIC};
use super::mcl::{Mcl, MclConfig};
use super::move_base::{move_base_step, Goal, GoalState, MoveBaseConfig};
use super::tf::{robot_frames, MAP_FRAME};
use super::FleetError;
use crate::geom::Pose2;
use crate::msg::{GoalMsg, LaserScan, OccupancyGridMsg, Odometry, StringMsg, TransformStamped, Twist};
use crate::namegraph::GraphName;
use crate::node::{InitOptions, NodeSession};
use crate::worldmap::{inflate, OccupancyGrid};

pub const DEFAULT_TICK_MS: u64 = 20;
/// Point footprint grown by the robot's half-width.
pub const DEFAULT_INFLATION: f64 = 0.105;
pub const ROBOT_NODE: &str = "turtlebot3";
/// A `cmd_vel` older than this is treated as a stop.
const CMD_TIMEOUT: Duration = Duration::from_millis(500);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotConfig {
    pub name: String,
    #[serde(default)]
    pub x: f64,
    #[serde(default)]
    pub y: f64,
    #[serde(default)]
    pub yaw: f64,
    #[serde(default)]
    pub noise: Noise,
}

impl RobotConfig {
    pub fn new(name: impl Into<String>, x: f64, y: f64, yaw: f64) -> Self {
        RobotConfig {
            name: name.into(),
            x,
            y,
            yaw,
            noise: Noise::default(),
        }
    }

    pub fn spawn_pose(&self) -> Pose2 {
        Pose2::new(self.x, self.y, self.yaw)
    }
}

fn default_seed() -> u64 {
    1
}
fn default_tick() -> u64 {
    DEFAULT_TICK_MS
}
fn default_scan_every() -> u64 {
    10
}
fn default_inflation() -> f64 {
    DEFAULT_INFLATION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_tick")]
    pub tick_ms: u64,
    /// Ticks between scans.
    #[serde(default = "default_scan_every")]
    pub scan_every: u64,
    #[serde(default = "default_inflation")]
    pub inflation_radius: f64,
    #[serde(default)]
    pub scan: ScanSpec,
    #[serde(default)]
    pub mcl: MclConfig,
    #[serde(default)]
    pub move_base: MoveBaseConfig,
    #[serde(default, rename = "robot")]
    pub robots: Vec<RobotConfig>,
}

impl Default for FleetConfig {
    fn default() -> Self {
        FleetConfig {
            seed: default_seed(),
            tick_ms: DEFAULT_TICK_MS,
            scan_every: default_scan_every(),
            inflation_radius: DEFAULT_INFLATION,
            scan: ScanSpec::default(),
            mcl: MclConfig::default(),
            move_base: MoveBaseConfig::default(),
            robots: Vec::new(),
        }
    }
}

impl FleetConfig {
    pub fn parse_toml(text: &str) -> Result<Self, FleetError> {
        let cfg: FleetConfig = toml::from_str(text).map_err(|e| FleetError::BadConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, FleetError> {
        let text = std::fs::read_to_string(path).map_err(|e| FleetError::BadConfig(format!("{}: {e}", path.display())))?;
        Self::parse_toml(&text)
    }

    /// Robot names must be valid single namespace segments and unique.
    pub fn validate(&self) -> Result<(), FleetError> {
        if self.tick_ms == 0 || self.scan_every == 0 {
            return Err(FleetError::BadConfig("tick_ms and scan_every must be positive".into()));
        }
        let mut seen = BTreeSet::new();
        for r in &self.robots {
            let ns = GraphName::parse(&format!("/{}", r.name)).map_err(|e| FleetError::BadConfig(e.to_string()))?;
            if !seen.insert(ns.clone()) {
                return Err(FleetError::DuplicateNodeName(ns.join(ROBOT_NODE).map_or(ns.to_string(), |n| n.to_string())));
            }
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.tick_ms as f64 / 1000.0
    }
}

/// Everything one tick produces for the outside world.
#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput {
    pub stamp: i64,
    pub odom: Odometry,
    pub tfs: Vec<TransformStamped>,
    pub scan: Option<LaserScan>,
    pub goal_update: Option<(String, GoalState)>,
}

/// One robot's simulation, a pure function of its inputs and seed.
#[derive(Debug, Clone)]
pub struct RobotSim {
    pub state: RobotState,
    pub noise: Noise,
    pub world: OccupancyGrid,
    pub nav: OccupancyGrid,
    pub mcl: Mcl,
    pub goal: Option<Goal>,
    pub tick: u64,
    pub map_to_odom: Pose2,
    cfg: FleetConfig,
    rng: ChaCha8Rng,
    odom_at_update: Pose2,
    localized_once: bool,
}

impl RobotSim {
    /// `index` picks an independent random stream under the fleet seed.
    pub fn new(robot: &RobotConfig, world: OccupancyGrid, nav_map: &OccupancyGrid, cfg: &FleetConfig, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(index);
        let spawn = robot.spawn_pose();
        let mcl = Mcl::around(nav_map, spawn, (0.05, 0.05, 0.02), cfg.mcl, &mut rng);
        RobotSim {
            state: RobotState::spawn(robot.name.clone(), spawn),
            noise: robot.noise,
            world,
            nav: inflate(nav_map, cfg.inflation_radius),
            mcl,
            goal: None,
            tick: 0,
            map_to_odom: spawn,
            cfg: cfg.clone(),
            rng,
            odom_at_update: Pose2::IDENTITY,
            localized_once: false,
        }
    }

    pub fn name(&self) -> &str {
        &self.state.name
    }

    pub fn set_nav_map(&mut self, grid: &OccupancyGrid) {
        self.nav = inflate(grid, self.cfg.inflation_radius);
        self.mcl.set_map(grid);
    }

    pub fn set_goal(&mut self, id: impl Into<String>, target: Pose2) {
        self.goal = Some(Goal::new(id, target));
    }

    /// Localized pose in the map frame.
    pub fn pose_est(&self) -> Pose2 {
        self.map_to_odom.compose(&self.state.pose_odom)
    }

    pub fn stamp(&self) -> i64 {
        (self.tick * self.cfg.tick_ms * 1_000_000) as i64
    }

    pub fn step(&mut self, cmd_vel: Twist) -> TickOutput {
        let mut goal_update = None;
        let cmd = match self.goal.take() {
            Some(goal) if !goal.state.is_terminal() => {
                let before = goal.state;
                let out = move_base_step(&goal, &self.pose_est(), &self.nav, &self.cfg.move_base);
                if out.goal.state != before {
                    goal_update = Some((out.goal.id.clone(), out.goal.state));
                }
                self.goal = Some(out.goal);
                out.cmd
            }
            other => {
                self.goal = other;
                cmd_vel
            }
        };
        let dt = self.cfg.dt();
        self.state = step_diff_drive(&self.state, &cmd, dt, &self.noise, &mut self.rng);
        self.tick += 1;

        let mut scan = None;
        if self.tick % self.cfg.scan_every == 0 {
            let prefix = self.state.name.clone();
            let s = simulate_scan(&self.world, &self.state.pose_true, &self.cfg.scan, &prefix, &mut self.rng);
            let delta = self.odom_at_update.between(&self.state.pose_odom);
            if !self.localized_once || delta.x.hypot(delta.y) > 0.02 || delta.theta.abs() > 0.05 {
                let est = self.mcl.update(&delta, &s, &mut self.rng);
                self.map_to_odom = est.compose(&self.state.pose_odom.inverse());
                self.odom_at_update = self.state.pose_odom;
                self.localized_once = true;
            }
            scan = Some(s);
        }

        let stamp = self.stamp();
        let (odom_f, base_f, scan_f) = robot_frames(&self.state.name);
        let tf = |parent: &str, child: &str, t: Pose2| TransformStamped {
            parent_frame: parent.to_string(),
            child_frame: child.to_string(),
            stamp,
            transform: t.into(),
        };
        let tfs = vec![
            tf(MAP_FRAME, &odom_f, self.map_to_odom),
            tf(&odom_f, &base_f, self.state.pose_odom),
            tf(&base_f, &scan_f, Pose2::IDENTITY),
        ];
        let odom = Odometry {
            frame_id: odom_f,
            child_frame_id: base_f,
            pose: self.state.pose_odom.into(),
            twist: cmd,
        };
        TickOutput {
            stamp,
            odom,
            tfs,
            scan,
            goal_update,
        }
    }
}

/// What a running robot last reported.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobotSnapshot {
    pub name: String,
    pub tick: u64,
    pub pose_true: Pose2,
    pub pose_odom: Pose2,
    pub pose_est: Pose2,
    pub goal: Option<(String, GoalState)>,
}

#[derive(Clone)]
pub struct FleetOptions {
    /// Base node options; each robot overrides the namespace.
    pub init: InitOptions,
    pub env: HashMap<String, String>,
    /// Ground truth the simulated sensors see.
    pub world: OccupancyGrid,
    /// Sleep to keep ticks on the wall clock.
    pub realtime: bool,
    /// How long to wait for `/static_map` before navigating on `world`.
    pub map_wait: Duration,
}

impl FleetOptions {
    pub fn new(master_uri: impl Into<String>, world: OccupancyGrid) -> Self {
        FleetOptions {
            init: InitOptions {
                master_uri: Some(master_uri.into()),
                ..InitOptions::default()
            },
            env: HashMap::new(),
            world,
            realtime: true,
            map_wait: Duration::from_secs(2),
        }
    }
}

struct RobotHandle {
    name: String,
    session: NodeSession,
    snapshot: Arc<Mutex<RobotSnapshot>>,
    thread: Option<JoinHandle<()>>,
}

/// Running robots. Stops them on drop.
pub struct Fleet {
    robots: Vec<RobotHandle>,
    stop: Arc<AtomicBool>,
}

impl Fleet {
    pub fn names(&self) -> Vec<String> {
        self.robots.iter().map(|r| r.name.clone()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.robots.is_empty()
    }

    pub fn snapshot(&self, name: &str) -> Option<RobotSnapshot> {
        self.robots
            .iter()
            .find(|r| r.name == name)
            .map(|r| r.snapshot.lock().unwrap().clone())
    }

    pub fn snapshots(&self) -> Vec<RobotSnapshot> {
        self.robots.iter().map(|r| r.snapshot.lock().unwrap().clone()).collect()
    }

    /// True while every robot's session is alive.
    pub fn all_running(&self) -> bool {
        self.robots.iter().all(|r| r.session.is_running())
    }

    /// Runs until `limit` passes or every robot has stopped.
    pub fn wait(&self, limit: Option<Duration>) {
        let start = Instant::now();
        while self.robots.iter().any(|r| r.session.is_running()) {
            if limit.is_some_and(|l| start.elapsed() >= l) {
                return;
            }
            thread::sleep(Duration::from_millis(50));
        }
    }

    pub fn shutdown(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        for r in &mut self.robots {
            if let Some(t) = r.thread.take() {
                let _ = t.join();
            }
            r.session.shutdown();
        }
    }
}

impl Drop for Fleet {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Starts one node per robot, `/{name}/turtlebot3`, publishing `odom`,
/// `scan` and `tf` and following `cmd_vel` and `move_base_simple/goal`.
pub fn spawn_fleet(cfg: &FleetConfig, opts: &FleetOptions) -> Result<Fleet, FleetError> {
    cfg.validate()?;
    let stop = Arc::new(AtomicBool::new(false));
    let mut fleet = Fleet {
        robots: Vec::new(),
        stop: stop.clone(),
    };
    for (i, robot) in cfg.robots.iter().enumerate() {
        let mut init = opts.init.clone();
        init.namespace = Some(format!("/{}", robot.name));
        let session = NodeSession::init(ROBOT_NODE, &opts.env, init)?;
        let handle = start_robot(robot, i as u64, cfg, opts, session.clone(), stop.clone())?;
        fleet.robots.push(RobotHandle {
            name: robot.name.clone(),
            session,
            snapshot: handle.0,
            thread: Some(handle.1),
        });
    }
    Ok(fleet)
}

type Started = (Arc<Mutex<RobotSnapshot>>, JoinHandle<()>);

fn start_robot(
    robot: &RobotConfig,
    index: u64,
    cfg: &FleetConfig,
    opts: &FleetOptions,
    session: NodeSession,
    stop: Arc<AtomicBool>,
) -> Result<Started, FleetError> {
    let deadline = Instant::now() + opts.map_wait;
    let nav = loop {
        match fetch_static_map(&session) {
            Ok(g) => break g,
            Err(_) if Instant::now() < deadline => thread::sleep(Duration::from_millis(100)),
            Err(_) => {
                session.warn("map", "no /static_map; navigating on the simulated world");
                break opts.world.clone();
            }
        }
    };
    let mut sim = RobotSim::new(robot, opts.world.clone(), &nav, cfg, index);

    let odom_pub = session.advertise_msg::<Odometry>("odom", false)?;
    let scan_pub = session.advertise_msg::<LaserScan>("scan", false)?;
    let tf_pub = session.advertise_msg::<TransformStamped>("tf", false)?;
    let status_pub = session.advertise_msg::<StringMsg>("move_base/status", true)?;

    let cmd = Arc::new(Mutex::new((Twist::default(), Instant::now() - CMD_TIMEOUT)));
    let cmd_in = cmd.clone();
    let cmd_sub = session.subscribe_msg::<Twist, _>("cmd_vel", move |t| {
        *cmd_in.lock().unwrap() = (t, Instant::now());
    })?;
    let (goal_tx, goal_rx) = mpsc::channel::<GoalMsg>();
    let goal_sub = session.subscribe_msg::<GoalMsg, _>("move_base_simple/goal", move |g| {
        let _ = goal_tx.send(g);
    })?;
    let (map_tx, map_rx) = mpsc::channel::<OccupancyGridMsg>();
    let map_sub = session.subscribe_msg::<OccupancyGridMsg, _>(MAP_TOPIC, move |m| {
        let _ = map_tx.send(m);
    })?;

    let snapshot = Arc::new(Mutex::new(RobotSnapshot {
        name: robot.name.clone(),
        tick: 0,
        pose_true: sim.state.pose_true,
        pose_odom: sim.state.pose_odom,
        pose_est: sim.pose_est(),
        goal: None,
    }));
    let snap = snapshot.clone();
    let tick = Duration::from_millis(cfg.tick_ms);
    let realtime = opts.realtime;
    let thread = thread::Builder::new().name(format!("robot-{}", robot.name)).spawn(move || {
        let _subs = (cmd_sub, goal_sub, map_sub);
        let mut next = Instant::now();
        while !stop.load(Ordering::SeqCst) && session.is_running() {
            while let Ok(g) = goal_rx.try_recv() {
                sim.set_goal(g.id, g.target.into());
            }
            if let Some(m) = map_rx.try_iter().last() {
                if let Ok(g) = OccupancyGrid::from_msg(&m) {
                    sim.set_nav_map(&g);
                }
            }
            let (c, at) = *cmd.lock().unwrap();
            let c = if at.elapsed() < CMD_TIMEOUT { c } else { Twist::default() };
            let out = sim.step(c);
            let _ = odom_pub.publish_stamped(serde_json::to_value(&out.odom).unwrap_or_default(), out.stamp);
            for t in &out.tfs {
                let _ = tf_pub.publish_stamped(serde_json::to_value(t).unwrap_or_default(), out.stamp);
            }
            if let Some(s) = &out.scan {
                let _ = scan_pub.publish_stamped(serde_json::to_value(s).unwrap_or_default(), out.stamp);
            }
            if let Some((id, st)) = &out.goal_update {
                let _ = status_pub.publish_msg(&StringMsg {
                    data: format!("{id} {st:?}"),
                });
            }
            {
                let mut s = snap.lock().unwrap();
                s.tick = sim.tick;
                s.pose_true = sim.state.pose_true;
                s.pose_odom = sim.state.pose_odom;
                s.pose_est = sim.pose_est();
                s.goal = sim.goal.as_ref().map(|g| (g.id.clone(), g.state));
            }
            if realtime {
                next += tick;
                let now = Instant::now();
                if next > now {
                    thread::sleep(next - now);
                } else {
                    next = now;
                }
            } else {
                thread::yield_now();
            }
        }
    })?;
    Ok((snapshot, thread))
}
