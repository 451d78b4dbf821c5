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

//! Node runtime: configuration, master session, peer-to-peer topics and
//! services, host resolution and clock probing.

pub mod clock;
pub mod config;
pub mod control;
pub mod hosts;
pub mod log;
mod session;

use std::io;

use thiserror::Error;

use crate::msg::SchemaError;
use crate::namegraph::NameError;
use crate::protocol::{ErrorCode, RemoteError};

pub use clock::{estimate_clock_offset, now_ns, ClockError, ClockEstimate};
pub use config::{InitOptions, NodeConfig};
pub use control::ControlClient;
pub use hosts::{resolve_host, HostTable};
pub use log::{Level, LogLine, LogSink};
pub use session::{NodeSession, Publisher, ServiceServer, SessionEnd, Subscription};

#[derive(Debug, Error)]
pub enum NodeError {
    #[error("master unreachable: {0}")]
    MasterUnreachable(String),
    #[error("node was superseded by another instance: {0}")]
    NameEvicted(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("unknown caller: {0}")]
    UnknownCaller(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("service provider unreachable: {0}")]
    ProviderUnreachable(String),
    #[error("remote error: {0}")]
    RemoteError(String),
    #[error("master rejected request: {0}")]
    Rejected(RemoteError),
    #[error("cannot resolve host {0:?}")]
    ResolveFailed(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("timed out waiting for the master")]
    Timeout,
    #[error("session is closed")]
    Closed,
    #[error(transparent)]
    Name(#[from] NameError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Clock(#[from] ClockError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl NodeError {
    pub(crate) fn from_remote(e: RemoteError) -> Self {
        match e.code {
            ErrorCode::NotFound => NodeError::NotFound(e.message),
            ErrorCode::TypeMismatch => NodeError::TypeMismatch(e.message),
            ErrorCode::UnknownCaller => NodeError::UnknownCaller(e.message),
            _ => NodeError::Rejected(e),
        }
    }
}
