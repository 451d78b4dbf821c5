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

//! A miniature single-master middleware for small robot fleets.
//!
//! Nodes find each other through one master ([`master`]) and then exchange
//! messages directly ([`node`]). Names are namespaced per robot
//! ([`namegraph`]), processes are described by XML launch files
//! ([`launch`]), the shared world is an occupancy grid ([`worldmap`]) and
//! [`fleetsim`] drives simulated differential-drive robots that localize and
//! plan against it. [`diagnostics`] covers graph export, topic echo, bags and
//! logger levels.

pub mod diagnostics;
pub mod fleetsim;
pub mod geom;
pub mod launch;
pub mod master;
pub mod msg;
pub mod namegraph;
pub mod node;
pub mod protocol;
pub mod worldmap;
