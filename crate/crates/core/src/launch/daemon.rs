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

//! Boot-time start-up files: a launcher shell script and a systemd unit.

use serde::{Deserialize, Serialize};

use super::{LaunchError, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DaemonConfig {
    pub distro: String,
    pub workspace: String,
    pub master_uri: String,
    pub hostname: String,
    pub ns: String,
    pub robot_name: String,
    pub user: String,
    /// Where the shell script will be installed; becomes `ExecStart`.
    pub script_path: String,
    /// Replaces the default bringup `roslaunch` line when set.
    #[serde(default)]
    pub launch_command: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DaemonFiles {
    pub shell_text: String,
    pub service_text: String,
}

pub fn generate_daemon_files(cfg: &DaemonConfig) -> Result<DaemonFiles> {
    let fields: [(&'static str, &str); 8] = [
        ("distro", &cfg.distro),
        ("workspace", &cfg.workspace),
        ("master_uri", &cfg.master_uri),
        ("hostname", &cfg.hostname),
        ("ns", &cfg.ns),
        ("robot_name", &cfg.robot_name),
        ("user", &cfg.user),
        ("script_path", &cfg.script_path),
    ];
    if let Some((name, _)) = fields.iter().find(|(_, v)| v.trim().is_empty()) {
        return Err(LaunchError::MissingField(name));
    }
    let launch = match &cfg.launch_command {
        Some(c) if !c.trim().is_empty() => c.clone(),
        _ => format!(
            "roslaunch turtlebot3_bringup turtlebot3_robot.launch multi_robot_name:={}",
            cfg.robot_name
        ),
    };
    let shell_text = format!(
        "#!/bin/bash\n\
         source /opt/ros/{distro}/setup.bash\n\
         source {ws}/devel/setup.bash\n\
         export ROS_MASTER_URI={uri}\n\
         export ROS_HOSTNAME={host}\n\
         export ROS_NAMESPACE={ns}\n\
         {launch}\n",
        distro = cfg.distro,
        ws = cfg.workspace.trim_end_matches('/'),
        uri = cfg.master_uri,
        host = cfg.hostname,
        ns = cfg.ns,
    );
    let service_text = format!(
        "[Unit]\n\
         After=network-online.service time-sync.target avahi-daemon.service\n\
         \n\
         [Service]\n\
         Type=simple\n\
         User={user}\n\
         ExecStart={exec}\n\
         Restart=on-failure\n\
         RestartSec=3s\n\
         \n\
         [Install]\n\
         WantedBy=multi-user.target\n",
        user = cfg.user,
        exec = cfg.script_path,
    );
    Ok(DaemonFiles {
        shell_text,
        service_text,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> DaemonConfig {
        DaemonConfig {
            distro: "noetic".into(),
            workspace: "/home/ubuntu/catkin_ws".into(),
            master_uri: "http://192.168.1.10:11311".into(),
            hostname: "192.168.1.21".into(),
            ns: "tb3_1".into(),
            robot_name: "tb3_1".into(),
            user: "ubuntu".into(),
            script_path: "/usr/sbin/tb3_1_bringup.sh".into(),
            launch_command: None,
        }
    }

    #[test]
    fn shell_lines() {
        let f = generate_daemon_files(&cfg()).unwrap();
        let lines: Vec<&str> = f.shell_text.lines().collect();
        assert_eq!(lines[0], "#!/bin/bash");
        assert!(lines.contains(&"export ROS_NAMESPACE=tb3_1"));
        assert!(lines.contains(&"source /home/ubuntu/catkin_ws/devel/setup.bash"));
        assert_eq!(
            *lines.last().unwrap(),
            "roslaunch turtlebot3_bringup turtlebot3_robot.launch multi_robot_name:=tb3_1"
        );
    }

    #[test]
    fn service_keys_in_order() {
        let f = generate_daemon_files(&cfg()).unwrap();
        let keys: Vec<&str> = f
            .service_text
            .lines()
            .filter_map(|l| l.split_once('=').map(|(k, _)| k))
            .collect();
        assert_eq!(
            keys,
            ["After", "Type", "User", "ExecStart", "Restart", "RestartSec", "WantedBy"]
        );
        assert!(f.service_text.contains("\nRestart=on-failure\nRestartSec=3s\n"));
    }

    #[test]
    fn missing_fields() {
        let mut c = cfg();
        c.user.clear();
        assert!(matches!(generate_daemon_files(&c), Err(LaunchError::MissingField("user"))));
        let mut c = cfg();
        c.distro = "  ".into();
        assert!(matches!(generate_daemon_files(&c), Err(LaunchError::MissingField("distro"))));
    }

    #[test]
    fn custom_launch_line() {
        let mut c = cfg();
        c.launch_command = Some("mrctl launch /etc/robot.launch robot:=tb3_1".into());
        let f = generate_daemon_files(&c).unwrap();
        assert!(f.shell_text.ends_with("mrctl launch /etc/robot.launch robot:=tb3_1\n"));
    }
}
