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

//! Prints the bringup script and systemd unit for one robot.
//!
//!     cargo run --example daemon_files -- [robot_name] [master_uri]

use mrctl::launch::{generate_daemon_files, DaemonConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let robot = args.next().unwrap_or_else(|| "tb3_0".into());
    let master = args.next().unwrap_or_else(|| "http://192.168.1.10:11311".into());
    let cfg = DaemonConfig {
        distro: "noetic".into(),
        workspace: "/home/ubuntu/catkin_ws".into(),
        master_uri: master,
        hostname: format!("{robot}.local"),
        ns: robot.clone(),
        robot_name: robot.clone(),
        user: "ubuntu".into(),
        script_path: format!("/usr/sbin/{robot}-bringup.sh"),
        launch_command: None,
    };
    let files = generate_daemon_files(&cfg).unwrap();
    println!("# {}", cfg.script_path);
    print!("{}", files.shell_text);
    println!();
    println!("# /etc/systemd/system/{robot}-bringup.service");
    print!("{}", files.service_text);
}
