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

//! The single registry process: node, topic and service registration,
//! parameter storage and publisher-update notifications.

pub mod registry;
mod server;

pub use registry::{
    HelloOutcome, NodeRecord, Outbound, RegistrationKind, Registry, RegistryError, SystemState,
    TopicRecord,
};
pub use server::{start, MasterHandle};
