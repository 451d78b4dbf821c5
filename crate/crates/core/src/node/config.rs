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
use std::time::Duration;

use super::hosts::{resolve_host, HostTable};
use super::log::LogSink;
use super::NodeError;
use crate::namegraph::{resolve_name, GraphName, NamespaceCtx, RemapRule};
use crate::protocol::DEFAULT_MASTER_PORT;

pub const ENV_MASTER_URI: &str = "ROS_MASTER_URI";
pub const ENV_HOSTNAME: &str = "ROS_HOSTNAME";
pub const ENV_NAMESPACE: &str = "ROS_NAMESPACE";

/// Resolved identity and endpoints for one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeConfig {
    pub master_uri: String,
    pub hostname: String,
    pub namespace: GraphName,
    pub node_name: GraphName,
}

/// Splits `http://host:port`, `https://host:port` or `host:port`.
pub fn parse_master_uri(uri: &str) -> Result<(String, u16), NodeError> {
    let bad = || NodeError::InvalidConfig(format!("malformed master URI {uri:?}"));
    let rest = uri
        .strip_prefix("http://")
        .or_else(|| uri.strip_prefix("https://"))
        .unwrap_or(uri);
    let rest = rest.trim_end_matches('/');
    let (host, port) = match rest.rsplit_once(':') {
        Some((h, p)) => (h, p.parse::<u16>().map_err(|_| bad())?),
        None => (rest, DEFAULT_MASTER_PORT),
    };
    if host.is_empty() || port == 0 || host.contains('/') {
        return Err(bad());
    }
    Ok((host.to_string(), port))
}

/// Resolves the master's socket address through the host table.
pub fn master_socket_addr(uri: &str, hosts: &HostTable) -> Result<String, NodeError> {
    let (host, port) = parse_master_uri(uri)?;
    let ip = resolve_host(&host, hosts)?;
    Ok(if ip.contains(':') {
        format!("[{ip}]:{port}")
    } else {
        format!("{ip}:{port}")
    })
}

/// Overrides applied on top of the environment.
#[derive(Clone)]
pub struct InitOptions {
    pub name: Option<String>,
    pub namespace: Option<String>,
    pub remaps: Vec<RemapRule>,
    pub master_uri: Option<String>,
    pub hostname: Option<String>,
    pub hosts: HostTable,
    pub timeout: Duration,
    pub log_sink: Option<LogSink>,
}

impl Default for InitOptions {
    fn default() -> Self {
        InitOptions {
            name: None,
            namespace: None,
            remaps: Vec::new(),
            master_uri: None,
            hostname: None,
            hosts: HostTable::new(),
            timeout: Duration::from_secs(3),
            log_sink: None,
        }
    }
}

impl std::fmt::Debug for InitOptions {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InitOptions")
            .field("name", &self.name)
            .field("namespace", &self.namespace)
            .field("remaps", &self.remaps)
            .field("master_uri", &self.master_uri)
            .field("hostname", &self.hostname)
            .field("timeout", &self.timeout)
            .finish_non_exhaustive()
    }
}

impl InitOptions {
    /// Extracts `__name:=`, `__ns:=` and `from:=to` arguments, returning the
    /// options and the remaining arguments in order.
    pub fn from_args<I, S>(args: I) -> (Self, Vec<String>)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut opts = InitOptions::default();
        let mut rest = Vec::new();
        for arg in args {
            let arg = arg.into();
            if let Some(v) = arg.strip_prefix("__name:=") {
                opts.name = Some(v.to_string());
            } else if let Some(v) = arg.strip_prefix("__ns:=") {
                opts.namespace = Some(v.to_string());
            } else if let Some(rule) = RemapRule::parse_arg(&arg) {
                opts.remaps.push(rule);
            } else {
                rest.push(arg);
            }
        }
        (opts, rest)
    }
}

impl NodeConfig {
    pub fn from_env(
        default_name: &str,
        env: &HashMap<String, String>,
        opts: &InitOptions,
    ) -> Result<Self, NodeError> {
        let master_uri = opts
            .master_uri
            .clone()
            .or_else(|| env.get(ENV_MASTER_URI).cloned())
            .unwrap_or_else(|| format!("http://localhost:{DEFAULT_MASTER_PORT}"));
        parse_master_uri(&master_uri)?;
        let hostname = opts
            .hostname
            .clone()
            .or_else(|| env.get(ENV_HOSTNAME).cloned())
            .unwrap_or_else(|| "127.0.0.1".to_string());
        let ns_raw = opts
            .namespace
            .clone()
            .or_else(|| env.get(ENV_NAMESPACE).cloned())
            .unwrap_or_default();
        let namespace = if ns_raw.is_empty() || ns_raw == "/" {
            GraphName::root()
        } else {
            resolve_name(&ns_raw, &NamespaceCtx::root())?
        };
        let name_raw = opts.name.as_deref().unwrap_or(default_name);
        let node_name = resolve_name(name_raw, &NamespaceCtx::in_ns(namespace.clone()))?;
        let namespace = node_name.parent();
        Ok(NodeConfig {
            master_uri,
            hostname,
            namespace,
            node_name,
        })
    }

    pub fn ctx(&self) -> NamespaceCtx {
        NamespaceCtx::new(self.namespace.clone(), self.node_name.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, &str)]) -> HashMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn namespace_from_env() {
        let cfg = NodeConfig::from_env(
            "turtlebot3_core",
            &env(&[(ENV_NAMESPACE, "tb3_0")]),
            &InitOptions::default(),
        )
        .unwrap();
        assert_eq!(cfg.node_name.as_str(), "/tb3_0/turtlebot3_core");
        assert_eq!(cfg.namespace.as_str(), "/tb3_0");
    }

    #[test]
    fn root_default() {
        let cfg = NodeConfig::from_env("turtlebot3_core", &env(&[]), &InitOptions::default()).unwrap();
        assert_eq!(cfg.node_name.as_str(), "/turtlebot3_core");
        assert_eq!(cfg.master_uri, "http://localhost:11311");
    }

    #[test]
    fn env_addresses() {
        let cfg = NodeConfig::from_env(
            "n",
            &env(&[(ENV_HOSTNAME, "192.168.0.3"), (ENV_MASTER_URI, "http://192.168.0.2:11311")]),
            &InitOptions::default(),
        )
        .unwrap();
        assert_eq!(cfg.hostname, "192.168.0.3");
        assert_eq!(parse_master_uri(&cfg.master_uri).unwrap(), ("192.168.0.2".to_string(), 11311));
    }

    #[test]
    fn master_uri_forms() {
        assert_eq!(parse_master_uri("masterhost.local:11311").unwrap().0, "masterhost.local");
        assert_eq!(parse_master_uri("https://h:1/").unwrap(), ("h".to_string(), 1));
        assert_eq!(parse_master_uri("http://h").unwrap().1, 11311);
        assert!(parse_master_uri("http://:11311").is_err());
        assert!(parse_master_uri("http://h:notaport").is_err());
    }

    #[test]
    fn master_addr_through_table() {
        let mut t = HostTable::new();
        t.insert("masterhost.local", "192.168.0.2");
        assert_eq!(
            master_socket_addr("http://masterhost.local:11311", &t).unwrap(),
            "192.168.0.2:11311"
        );
    }

    #[test]
    fn special_args() {
        let (opts, rest) = InitOptions::from_args(["map.yaml", "__name:=ms", "map:=/map", "__ns:=tb3_1"]);
        assert_eq!(opts.name.as_deref(), Some("ms"));
        assert_eq!(opts.namespace.as_deref(), Some("tb3_1"));
        assert_eq!(opts.remaps, vec![RemapRule::new("map", "/map")]);
        assert_eq!(rest, vec!["map.yaml".to_string()]);
        let cfg = NodeConfig::from_env("map_server", &HashMap::new(), &opts).unwrap();
        assert_eq!(cfg.node_name.as_str(), "/tb3_1/ms");
    }
}
