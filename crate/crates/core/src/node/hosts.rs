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

//! Static host table standing in for mDNS `.local` resolution.

use std::collections::BTreeMap;
use std::net::{IpAddr, ToSocketAddrs};
use std::path::Path;

use super::NodeError;

/// `hostname → ip` pairs, loaded from a file of `hostname ip` lines.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HostTable {
    entries: BTreeMap<String, String>,
}

impl HostTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, host: impl Into<String>, ip: impl Into<String>) {
        self.entries.insert(host.into(), ip.into());
    }

    pub fn get(&self, host: &str) -> Option<&str> {
        self.entries.get(host).map(String::as_str)
    }

    pub fn parse(text: &str) -> Result<Self, NodeError> {
        let mut table = HostTable::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(host), Some(ip), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(NodeError::InvalidConfig(format!(
                    "hosts line {}: expected `hostname ip`",
                    lineno + 1
                )));
            };
            if ip.parse::<IpAddr>().is_err() {
                return Err(NodeError::InvalidConfig(format!(
                    "hosts line {}: {ip:?} is not an IP address",
                    lineno + 1
                )));
            }
            table.insert(host, ip);
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, NodeError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| NodeError::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Table hit first, then IP literals, then the system resolver.
pub fn resolve_host(name: &str, table: &HostTable) -> Result<String, NodeError> {
    if let Some(ip) = table.get(name) {
        return Ok(ip.to_string());
    }
    if let Ok(ip) = name.parse::<IpAddr>() {
        return Ok(ip.to_string());
    }
    let addrs: Vec<_> = (name, 0)
        .to_socket_addrs()
        .map_err(|_| NodeError::ResolveFailed(name.to_string()))?
        .collect();
    addrs
        .iter()
        .find(|a| a.is_ipv4())
        .or_else(|| addrs.first())
        .map(|a| a.ip().to_string())
        .ok_or_else(|| NodeError::ResolveFailed(name.to_string()))
}
