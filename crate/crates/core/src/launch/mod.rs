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

//! Launch files: parsing, substitution, expansion into a plan, process
//! spawning and boot-time daemon files.
//!
//! The pipeline is [`parse_launch`] → [`plan_launch`] → [`spawn_plan`].
//! Everything before spawning is pure and deterministic; the same file
//! tree, arguments and environment always serialize to the same plan.

mod daemon;
mod eval;
mod expand;
mod parse;
mod pkgindex;
mod spawn;
mod subst;

use std::fmt;
use std::io;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::namegraph::NameError;

pub use daemon::{generate_daemon_files, DaemonConfig, DaemonFiles};
pub use eval::{eval_expr, EvalError, EvalValue};
pub use expand::{
    expand_file, plan_launch, LaunchContext, LaunchPlan, MachineDef, ParamSource, ParamWrite,
    PlanItem, ResolvedNode, DEFAULT_INCLUDE_LIMIT, LOCAL_MACHINE,
};
pub use parse::{
    parse_launch, parse_launch_file, ArgDecl, Condition, GroupElem, IncludeArg, IncludeElem,
    Item, LaunchDoc, MachineElem, NodeElem, OutputMode, ParamElem, RemapElem,
};
pub use pkgindex::PackageIndex;
pub use spawn::{
    local_executors, spawn_plan, ssh_command, Executor, Executors, FleetHandle, LocalExecutor, NodeState,
    NodeStatus, SpawnContext, SpawnOptions, SshExecutor,
};
pub use subst::{parse_condition, substitute, Scope, SubstExpr, SubstPart};

/// Where an element came from, for error messages.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Location {
    pub file: String,
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.col)
    }
}

#[derive(Debug, Error)]
pub enum LaunchError {
    #[error("{file}:{line}:{col}: malformed XML: {message}")]
    Xml {
        file: String,
        line: u32,
        col: u32,
        message: String,
    },
    #[error("{at}: unknown element <{element}>")]
    UnknownElement { element: String, at: Location },
    #[error("{at}: <{element}> is not allowed inside <{parent}>")]
    Misplaced {
        element: String,
        parent: String,
        at: Location,
    },
    #[error("{at}: argument {name:?} declared twice (first at {first})")]
    DuplicateArgDecl {
        name: String,
        first: Location,
        at: Location,
    },
    #[error("{at}: <{element}> requires attribute {attr:?}")]
    MissingAttribute {
        element: String,
        attr: String,
        at: Location,
    },
    #[error("{at}: {message}")]
    BadAttribute { message: String, at: Location },
    #[error("argument {0:?} is not set")]
    UnboundArg(String),
    #[error("environment variable {0:?} is not set")]
    UnboundEnv(String),
    #[error("package {0:?} is not in the package index")]
    UnknownPackage(String),
    #[error("argument {name:?} is not declared in {file}")]
    UndeclaredArg { name: String, file: String },
    #[error("bad substitution {text:?}: {message}")]
    BadSubstitution { text: String, message: String },
    #[error("condition must be true, false, 1 or 0, got {0:?}")]
    BadCondition(String),
    #[error(transparent)]
    Eval(EvalError),
    #[error("{at}: include depth exceeds {limit}")]
    IncludeDepthExceeded { limit: usize, at: Location },
    #[error("launch file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("node {name} declared twice: {first} and {second}")]
    DuplicateNodeName {
        name: String,
        first: Location,
        second: Location,
    },
    #[error("{at}: machine {name:?} declared twice")]
    DuplicateMachine { name: String, at: Location },
    #[error("node {node} refers to undeclared machine {machine:?}")]
    UnknownMachine { node: String, machine: String },
    #[error("{at}: parameter {name:?} value {value:?} is not a valid {ty}")]
    BadParamValue {
        name: String,
        ty: String,
        value: String,
        at: Location,
    },
    #[error(transparent)]
    Name(#[from] NameError),
    #[error("no executor for machine {0:?}")]
    ExecutorMissing(String),
    #[error("failed to start {node}: {cause}")]
    SpawnFailed { node: String, cause: String },
    #[error("master unreachable: {0}")]
    MasterUnreachable(String),
    #[error("could not write parameter {key}: {cause}")]
    ParamWriteFailed { key: String, cause: String },
    #[error("daemon config field {0:?} is empty")]
    MissingField(&'static str),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl From<EvalError> for LaunchError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::UnboundArg(n) => LaunchError::UnboundArg(n),
            EvalError::UnboundEnv(n) => LaunchError::UnboundEnv(n),
            other => LaunchError::Eval(other),
        }
    }
}

pub type Result<T, E = LaunchError> = std::result::Result<T, E>;
