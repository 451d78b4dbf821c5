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
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};

use mrctl::diagnostics::{self, EchoLimit, PlayOptions, RecordLimit};
use mrctl::fleetsim::{self, FleetConfig, FleetOptions, RobotConfig};
use mrctl::launch::{self, DaemonConfig, Executors, LaunchContext, LaunchError, LocalExecutor, PackageIndex, SpawnOptions};
use mrctl::msg::{GoalMsg, Pose2D, StringMsg};
use mrctl::node::{ControlClient, HostTable, InitOptions, NodeSession, SessionEnd};
use mrctl::protocol::DEFAULT_MASTER_PORT;
use mrctl::worldmap::{self, Cell};

#[derive(Parser)]
#[command(name = "mrctl", version, about = "Single-master middleware for small robot fleets")]
struct Cli {
    /// Master to talk to; overrides ROS_MASTER_URI.
    #[arg(long, global = true)]
    master_uri: Option<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the master.
    Master {
        #[arg(long, default_value_t = DEFAULT_MASTER_PORT)]
        port: u16,
        #[arg(long, default_value = "0.0.0.0")]
        bind: String,
    },
    /// Expand a launch file and start its nodes.
    Launch(LaunchArgs),
    /// Write a launcher script and a systemd unit for one robot.
    GenDaemon(DaemonArgs),
    /// Inspect, convert, edit or serve occupancy maps.
    Map {
        #[command(subcommand)]
        cmd: MapCmd,
    },
    /// Simulate one robot, or a fleet from a config file.
    #[command(allow_negative_numbers = true)]
    Sim(SimArgs),
    /// Send a navigation goal to a robot.
    #[command(allow_negative_numbers = true)]
    Goal(GoalArgs),
    /// Print the node graph as DOT.
    Graph {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the TF tree as DOT.
    TfTree {
        #[arg(long)]
        out: Option<PathBuf>,
        /// How long to listen for transforms, in seconds.
        #[arg(long, default_value_t = 0.5)]
        window: f64,
    },
    /// Print messages arriving on a topic.
    Echo {
        topic: String,
        #[arg(short = 'n', long)]
        count: Option<usize>,
        /// Stop after this many seconds.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Record or replay message logs.
    Bag {
        #[command(subcommand)]
        cmd: BagCmd,
    },
    /// Change a node's logger level.
    Logger { node: String, logger: String, level: String },
}

#[derive(Args)]
struct LaunchArgs {
    file: PathBuf,
    /// `name:=value` argument overrides.
    args: Vec<String>,
    /// Print the plan as JSON instead of starting anything.
    #[arg(long)]
    dry_run: bool,
    /// Host table used to resolve machine and master names.
    #[arg(long)]
    hosts: Option<PathBuf>,
    /// Package index file, or a directory whose subdirectories are packages.
    /// Defaults to the directory holding the launch file's package.
    #[arg(long)]
    packages: Option<PathBuf>,
}

#[derive(Args)]
struct DaemonArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    user: String,
    #[arg(long)]
    robot_name: String,
    #[arg(long, default_value = "noetic")]
    distro: String,
    /// Defaults to /home/<user>/catkin_ws.
    #[arg(long)]
    workspace: Option<String>,
    #[arg(long, default_value = "http://localhost:11311")]
    master_uri: String,
    /// Defaults to <robot-name>.local.
    #[arg(long)]
    hostname: Option<String>,
    /// Defaults to the robot name.
    #[arg(long)]
    ns: Option<String>,
    /// Install path of the script. Defaults to /usr/sbin/<robot-name>-bringup.sh.
    #[arg(long)]
    script_path: Option<String>,
    #[arg(long)]
    launch_command: Option<String>,
}

#[derive(Subcommand)]
enum MapCmd {
    /// Size, placement and cell counts.
    Info { yaml: PathBuf },
    /// Re-save a map in canonical form under a new base name.
    Convert { yaml: PathBuf, out: PathBuf },
    /// Set cells and save under a new base name.
    Edit {
        yaml: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `CX,CY,STATE` with STATE one of free, occupied, unknown.
        #[arg(long = "set", value_parser = parse_edit, required = true)]
        set: Vec<(i64, i64, Cell)>,
    },
    /// Serve the map on /static_map, /map and /map_metadata.
    Serve {
        yaml: PathBuf,
        #[arg(long, default_value = fleetsim::MAP_FRAME)]
        frame: String,
    },
}

#[derive(Subcommand)]
enum BagCmd {
    /// Record topics, or everything published when none are given.
    Record {
        #[arg(short, long, default_value = "out.bag")]
        out: PathBuf,
        topics: Vec<String>,
        #[arg(short = 'n', long)]
        count: Option<usize>,
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Republish a recording. Rate 0 plays as fast as possible.
    Play {
        file: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        rate: f64,
        /// Seconds to wait for subscribers before playing.
        #[arg(long, default_value_t = 2.0)]
        wait: f64,
    },
    /// Record count, topics and time span.
    Info { file: PathBuf },
}

#[derive(Args)]
struct SimArgs {
    /// World the simulated sensors see.
    #[arg(long)]
    map: PathBuf,
    /// Fleet config (TOML). Without it one robot is simulated, named after
    /// the namespace.
    #[arg(long)]
    robots: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    #[arg(short = 'x', default_value_t = 0.0)]
    x: f64,
    #[arg(short = 'y', default_value_t = 0.0)]
    y: f64,
    #[arg(short = 'Y', default_value_t = 0.0)]
    yaw: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Stop after this many seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Tick as fast as possible instead of on the wall clock.
    #[arg(long)]
    fast: bool,
}

#[derive(Args)]
struct GoalArgs {
    #[arg(long)]
    robot: String,
    #[arg(long)]
    x: f64,
    #[arg(long)]
    y: f64,
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    #[arg(long)]
    id: Option<String>,
    /// Wait up to this many seconds for the goal to finish.
    #[arg(long)]
    wait: Option<f64>,
}

fn parse_edit(s: &str) -> Result<(i64, i64, Cell), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [cx, cy, state] = parts[..] else {
        return Err("expected CX,CY,STATE".into());
    };
    let cx = cx.parse().map_err(|e| format!("{cx}: {e}"))?;
    let cy = cy.parse().map_err(|e| format!("{cy}: {e}"))?;
    let state = match state {
        "free" => Cell::Free,
        "occupied" => Cell::Occupied,
        "unknown" => Cell::Unknown,
        other => return Err(format!("unknown state {other:?}")),
    };
    Ok((cx, cy, state))
}

type Res = Result<ExitCode, Box<dyn std::error::Error>>;

fn master_uri(cli: &Option<String>) -> String {
    cli.clone()
        .or_else(|| std::env::var("ROS_MASTER_URI").ok())
        .unwrap_or_else(|| format!("http://localhost:{DEFAULT_MASTER_PORT}"))
}

fn env_map() -> HashMap<String, String> {
    std::env::vars().collect()
}

/// A short-lived tool node with a name unique to this process.
fn tool_session(tool: &str, uri: &Option<String>, node_opts: &InitOptions) -> Result<NodeSession, Box<dyn std::error::Error>> {
    let mut opts = node_opts.clone();
    opts.master_uri = uri.clone().or(opts.master_uri);
    if opts.name.is_none() {
        opts.name = Some(format!("mrctl_{tool}_{}", std::process::id()));
    }
    Ok(NodeSession::init(tool, &env_map(), opts)?)
}

fn output(out: &Option<PathBuf>, text: &str) -> std::io::Result<()> {
    match out {
        Some(p) => fs::write(p, text),
        None => std::io::stdout().write_all(text.as_bytes()),
    }
}

fn secs(s: Option<f64>) -> Option<Duration> {
    s.map(|v| Duration::from_secs_f64(v.max(0.0)))
}

fn run_master(port: u16, bind: &str) -> Res {
    let handle = mrctl::master::start((bind, port))?;
    println!("master listening on {}", handle.uri());
    handle.join();
    Ok(ExitCode::SUCCESS)
}

/// Packages for `file`: an index file, a directory of packages, or by
/// default the siblings of the package that holds the launch file.
fn package_index(file: &Path, given: &Option<PathBuf>) -> Result<PackageIndex, Box<dyn std::error::Error>> {
    let dir_index = |dir: &Path| -> std::io::Result<PackageIndex> {
        let mut idx = PackageIndex::new();
        for entry in fs::read_dir(dir)? {
            let entry = entry?;
            if entry.file_type()?.is_dir() {
                idx.insert(entry.file_name().to_string_lossy().to_string(), entry.path());
            }
        }
        Ok(idx)
    };
    match given {
        Some(p) if p.is_dir() => Ok(dir_index(p)?),
        Some(p) => Ok(PackageIndex::load(p)?),
        None => {
            let abs = fs::canonicalize(file)?;
            match abs.parent().and_then(Path::parent).and_then(Path::parent) {
                Some(root) => Ok(dir_index(root)?),
                None => Ok(PackageIndex::new()),
            }
        }
    }
}

fn run_launch(a: &LaunchArgs, uri: &Option<String>) -> Res {
    let mut cli_args = BTreeMap::new();
    for kv in &a.args {
        let Some((k, v)) = kv.split_once(":=") else {
            eprintln!("mrctl: launch arguments look like name:=value, got {kv:?}");
            return Ok(ExitCode::from(2));
        };
        cli_args.insert(k.to_string(), v.to_string());
    }
    let packages = package_index(&a.file, &a.packages)?;
    let ctx = LaunchContext::from_process_env(packages.clone());
    let plan = launch::plan_launch(&a.file, &cli_args, &ctx)?;
    if a.dry_run {
        println!("{}", plan.to_json());
        return Ok(ExitCode::SUCCESS);
    }
    let mut opts = SpawnOptions::new(master_uri(uri));
    if let Some(h) = &a.hosts {
        opts.hosts = HostTable::load(h)?;
    }
    if let Ok(host) = std::env::var("ROS_HOSTNAME") {
        opts.hostname = host;
    }
    let mut local = LocalExecutor::new(packages.clone());
    if let Ok(me) = std::env::current_exe() {
        local = local.with_env("MRCTL_BIN", me.display().to_string());
    }
    let mut executors: Executors = BTreeMap::new();
    executors.insert(launch::LOCAL_MACHINE.to_string(), Arc::new(local));
    #[cfg(feature = "ssh")]
    for m in &plan.machines {
        executors.insert(
            m.name.clone(),
            Arc::new(launch::SshExecutor {
                machine: m.clone(),
                remote_packages: packages.clone(),
            }),
        );
    }
    let fleet = match launch::spawn_plan(&plan, &executors, &opts) {
        Ok(f) => f,
        Err(e @ LaunchError::MasterUnreachable(_)) => {
            eprintln!("mrctl: {e}");
            return Ok(ExitCode::from(3));
        }
        Err(e) => return Err(e.into()),
    };
    let fleet = Arc::new(fleet);
    let on_signal = fleet.clone();
    let _ = ctrlc::set_handler(move || {
        on_signal.shutdown();
        std::process::exit(130);
    });
    for s in fleet.status() {
        eprintln!("started {}", s.name);
    }
    fleet.wait(None);
    let failed = fleet.exited().iter().any(|s| !matches!(s.state, launch::NodeState::Exited { code: Some(0) }));
    Ok(if failed { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn run_gen_daemon(a: &DaemonArgs) -> Res {
    let robot = a.robot_name.clone();
    let cfg = DaemonConfig {
        distro: a.distro.clone(),
        workspace: a.workspace.clone().unwrap_or_else(|| format!("/home/{}/catkin_ws", a.user)),
        master_uri: a.master_uri.clone(),
        hostname: a.hostname.clone().unwrap_or_else(|| format!("{robot}.local")),
        ns: a.ns.clone().unwrap_or_else(|| robot.clone()),
        robot_name: robot.clone(),
        user: a.user.clone(),
        script_path: a.script_path.clone().unwrap_or_else(|| format!("/usr/sbin/{robot}-bringup.sh")),
        launch_command: a.launch_command.clone(),
    };
    let files = launch::generate_daemon_files(&cfg)?;
    fs::create_dir_all(&a.out_dir)?;
    let sh = a.out_dir.join(format!("{robot}-bringup.sh"));
    let unit = a.out_dir.join(format!("{robot}-bringup.service"));
    fs::write(&sh, &files.shell_text)?;
    fs::write(&unit, &files.service_text)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        fs::set_permissions(&sh, fs::Permissions::from_mode(0o755))?;
    }
    println!("{}\n{}", sh.display(), unit.display());
    Ok(ExitCode::SUCCESS)
}

fn run_map(cmd: &MapCmd, uri: &Option<String>, node_opts: &InitOptions) -> Res {
    match cmd {
        MapCmd::Info { yaml } => {
            let g = worldmap::load_map(yaml)?;
            let (x0, y0, x1, y1) = g.geom().bounds();
            println!("size:       {} x {} cells", g.width, g.height);
            println!("resolution: {} m", g.meta.resolution);
            println!("origin:     [{}, {}, {}]", g.meta.origin[0], g.meta.origin[1], g.meta.origin[2]);
            println!("extent:     x {x0:.3}..{x1:.3}, y {y0:.3}..{y1:.3}");
            println!("free:       {}", g.count(Cell::Free));
            println!("occupied:   {}", g.count(Cell::Occupied));
            println!("unknown:    {}", g.count(Cell::Unknown));
        }
        MapCmd::Convert { yaml, out } => {
            let g = worldmap::load_map(yaml)?;
            let (y, p) = worldmap::save_map(&g, out)?;
            println!("{}\n{}", y.display(), p.display());
        }
        MapCmd::Edit { yaml, out, set } => {
            let g = worldmap::load_map(yaml)?.edit_cells(set)?;
            let (y, p) = worldmap::save_map(&g, out)?;
            println!("{}\n{}", y.display(), p.display());
        }
        MapCmd::Serve { yaml, frame } => {
            let grid = worldmap::load_map(yaml)?;
            let mut opts = node_opts.clone();
            opts.master_uri = uri.clone().or(opts.master_uri);
            let session = NodeSession::init("map_server", &env_map(), opts)?;
            let _server = fleetsim::start_map_server(&session, &grid, frame)?;
            session.info("map_server", &format!("serving {} x {} map from {}", grid.width, grid.height, yaml.display()));
            return Ok(report_end(session.wait_for_end(None)));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn report_end(end: Option<SessionEnd>) -> ExitCode {
    match end {
        Some(SessionEnd::Evicted(by)) => {
            eprintln!("mrctl: shutting down, another node took this name ({by})");
            ExitCode::SUCCESS
        }
        Some(SessionEnd::MasterLost) => {
            eprintln!("mrctl: lost the master");
            ExitCode::FAILURE
        }
        _ => ExitCode::SUCCESS,
    }
}

fn run_sim(a: &SimArgs, uri: &Option<String>, node_opts: &InitOptions) -> Res {
    let world = worldmap::load_map(&a.map)?;
    let mut cfg = match &a.robots {
        Some(p) => FleetConfig::load(p)?,
        None => {
            let ns = node_opts
                .namespace
                .clone()
                .or_else(|| std::env::var("ROS_NAMESPACE").ok())
                .unwrap_or_default();
            let name = a
                .name
                .clone()
                .or_else(|| ns.trim_matches('/').rsplit('/').next().filter(|s| !s.is_empty()).map(str::to_string))
                .unwrap_or_else(|| "tb3_0".to_string());
            FleetConfig {
                robots: vec![RobotConfig::new(name, a.x, a.y, a.yaw)],
                ..FleetConfig::default()
            }
        }
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let mut init = node_opts.clone();
    init.master_uri = uri.clone().or(init.master_uri);
    let opts = FleetOptions {
        init,
        env: env_map(),
        world,
        realtime: !a.fast,
        map_wait: Duration::from_secs(2),
    };
    let mut fleet = fleetsim::spawn_fleet(&cfg, &opts)?;
    eprintln!("simulating {}", fleet.names().join(", "));
    fleet.wait(secs(a.duration));
    let evicted = !fleet.all_running();
    fleet.shutdown();
    if evicted {
        eprintln!("mrctl: a robot node stopped");
    }
    Ok(ExitCode::SUCCESS)
}

fn run_goal(a: &GoalArgs, uri: &Option<String>, node_opts: &InitOptions) -> Res {
    let session = tool_session("goal", uri, node_opts)?;
    let robot = a.robot.trim_matches('/');
    let id = a.id.clone().unwrap_or_else(|| format!("goal_{}", std::process::id()));
    let (tx, rx) = std::sync::mpsc::channel::<String>();
    let _status = session.subscribe_msg::<StringMsg, _>(&format!("/{robot}/move_base/status"), move |m| {
        let _ = tx.send(m.data);
    })?;
    let publisher = session.advertise_msg::<GoalMsg>(&format!("/{robot}/move_base_simple/goal"), false)?;
    if !publisher.wait_for_subscribers(1, Duration::from_secs(3)) {
        eprintln!("mrctl: no robot is listening on /{robot}/move_base_simple/goal");
        return Ok(ExitCode::FAILURE);
    }
    publisher.publish_msg(&GoalMsg {
        id: id.clone(),
        target: Pose2D {
            x: a.x,
            y: a.y,
            theta: a.theta,
        },
    })?;
    println!("sent {id} to {robot}: ({}, {}, {})", a.x, a.y, a.theta);
    let Some(wait) = secs(a.wait) else {
        thread::sleep(Duration::from_millis(200));
        return Ok(ExitCode::SUCCESS);
    };
    let deadline = Instant::now() + wait;
    while let Some(left) = deadline.checked_duration_since(Instant::now()) {
        match rx.recv_timeout(left) {
            Ok(s) if s == format!("{id} Succeeded") => {
                println!("{s}");
                return Ok(ExitCode::SUCCESS);
            }
            Ok(s) if s == format!("{id} Aborted") => {
                println!("{s}");
                return Ok(ExitCode::FAILURE);
            }
            Ok(_) => {}
            Err(_) => break,
        }
    }
    eprintln!("mrctl: {id} did not finish in time");
    Ok(ExitCode::FAILURE)
}

fn run_bag(cmd: &BagCmd, uri: &Option<String>, node_opts: &InitOptions) -> Res {
    match cmd {
        BagCmd::Record {
            out,
            topics,
            count,
            duration,
        } => {
            let session = tool_session("bag", uri, node_opts)?;
            let limit = RecordLimit {
                count: *count,
                duration: secs(*duration),
            };
            let n = diagnostics::record_bag(&session, topics, out, limit)?;
            eprintln!("recorded {n} messages to {}", out.display());
        }
        BagCmd::Play { file, rate, wait } => {
            let records = diagnostics::read_bag(file)?;
            if records.is_empty() {
                return Ok(ExitCode::SUCCESS);
            }
            let session = tool_session("bag", uri, node_opts)?;
            let opts = PlayOptions {
                rate: *rate,
                wait_for_subscribers: Duration::from_secs_f64(wait.max(0.0)),
            };
            let n = diagnostics::play_records(&session, &records, &opts)?;
            // Let the last frames drain before the session closes.
            thread::sleep(Duration::from_millis(100));
            eprintln!("played {n} messages");
        }
        BagCmd::Info { file } => {
            let records = diagnostics::read_bag(file)?;
            let mut per_topic: BTreeMap<(&str, &str), usize> = BTreeMap::new();
            for r in &records {
                *per_topic.entry((r.topic.as_str(), r.msg_type.as_str())).or_default() += 1;
            }
            let span = match (records.first(), records.last()) {
                (Some(a), Some(b)) => (b.stamp - a.stamp) as f64 / 1e9,
                _ => 0.0,
            };
            println!("messages: {}", records.len());
            println!("duration: {span:.3} s");
            for ((t, ty), n) in per_topic {
                println!("  {t} [{ty}] {n}");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli, node_opts: InitOptions) -> Res {
    let uri = &cli.master_uri;
    match &cli.cmd {
        Cmd::Master { port, bind } => run_master(*port, bind),
        Cmd::Launch(a) => run_launch(a, uri),
        Cmd::GenDaemon(a) => run_gen_daemon(a),
        Cmd::Map { cmd } => run_map(cmd, uri, &node_opts),
        Cmd::Sim(a) => run_sim(a, uri, &node_opts),
        Cmd::Goal(a) => run_goal(a, uri, &node_opts),
        Cmd::Graph { out } => {
            let client = ControlClient::connect_uri(&master_uri(uri), &HostTable::default(), Duration::from_secs(3))?;
            output(out, &diagnostics::export_node_graph(&client.system_state()?))?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::TfTree { out, window } => {
            let session = tool_session("tf_tree", uri, &node_opts)?;
            let tf = diagnostics::collect_tf(&session, Duration::from_secs_f64(window.max(0.0)))?;
            output(out, &diagnostics::export_tf_tree(&tf))?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Echo { topic, count, duration } => {
            let session = tool_session("echo", uri, &node_opts)?;
            let limit = EchoLimit {
                count: *count,
                duration: secs(*duration),
            };
            let stdout = std::io::stdout();
            diagnostics::echo_topic(&session, topic, limit, |text| {
                let mut lock = stdout.lock();
                let _ = lock.write_all(text.as_bytes());
                let _ = lock.flush();
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Bag { cmd } => run_bag(cmd, uri, &node_opts),
        Cmd::Logger { node, logger, level } => {
            let client = ControlClient::connect_uri(&master_uri(uri), &HostTable::default(), Duration::from_secs(3))?;
            diagnostics::set_logger_level(&client, node, logger, level)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args().collect();
    // Node-style `__name:=`, `__ns:=` and `from:=to` arguments are taken out
    // before parsing, except for `launch`, whose `name:=value` pairs are
    // launch arguments.
    let is_launch = raw.iter().skip(1).any(|a| a == "launch");
    let (node_opts, rest) = if is_launch {
        (InitOptions::default(), raw)
    } else {
        InitOptions::from_args(raw)
    };
    let cli = Cli::parse_from(rest);
    match run(cli, node_opts) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("mrctl: {e}");
            ExitCode::FAILURE
        }
    }
}
