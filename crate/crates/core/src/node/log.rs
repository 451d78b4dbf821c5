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
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, RwLock};

use crate::namegraph::GraphName;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    Debug,
    Info,
    Warn,
    Error,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Debug => "debug",
            Level::Info => "info",
            Level::Warn => "warn",
            Level::Error => "error",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "debug" => Ok(Level::Debug),
            "info" => Ok(Level::Info),
            "warn" => Ok(Level::Warn),
            "error" => Ok(Level::Error),
            other => Err(format!("invalid log level {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogLine {
    pub node: GraphName,
    pub logger: String,
    pub level: Level,
    pub message: String,
}

impl fmt::Display for LogLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] [{}] {}: {}",
            self.level.as_str().to_uppercase(),
            self.node,
            self.logger,
            self.message
        )
    }
}

pub type LogSink = Arc<dyn Fn(&LogLine) + Send + Sync>;

pub fn stderr_sink() -> LogSink {
    Arc::new(|line: &LogLine| eprintln!("{line}"))
}

/// Per-logger thresholds; loggers without an entry use `info`.
pub(crate) struct LogFilter {
    node: GraphName,
    levels: RwLock<HashMap<String, Level>>,
    sink: LogSink,
}

impl LogFilter {
    pub(crate) fn new(node: GraphName, sink: LogSink) -> Self {
        LogFilter {
            node,
            levels: RwLock::new(HashMap::new()),
            sink,
        }
    }

    pub(crate) fn set_level(&self, logger: &str, level: Level) {
        self.levels.write().unwrap().insert(logger.to_string(), level);
    }

    pub(crate) fn level(&self, logger: &str) -> Level {
        self.levels
            .read()
            .unwrap()
            .get(logger)
            .copied()
            .unwrap_or(Level::Info)
    }

    pub(crate) fn emit(&self, logger: &str, level: Level, message: &str) {
        if level < self.level(logger) {
            return;
        }
        (self.sink)(&LogLine {
            node: self.node.clone(),
            logger: logger.to_string(),
            level,
            message: message.to_string(),
        });
    }
}
