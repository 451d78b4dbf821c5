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

//! The map server node: `/static_map`, latched `/map` and `/map_metadata`.

use serde_json::{json, Value};

use crate::msg::{OccupancyGridMsg, StringMsg};
use crate::node::{NodeError, NodeSession, Publisher, ServiceServer};
use crate::worldmap::{write_map_yaml, OccupancyGrid};

pub const MAP_TOPIC: &str = "/map";
pub const MAP_METADATA_TOPIC: &str = "/map_metadata";
pub const STATIC_MAP_SERVICE: &str = "/static_map";

/// Keeps the map advertised for as long as it lives.
pub struct MapServer {
    pub map: Publisher,
    pub metadata: Publisher,
    pub service: ServiceServer,
}

impl MapServer {
    /// Republishes a new grid on both latched topics. The service keeps
    /// answering with the grid it was started with.
    pub fn publish(&self, grid: &OccupancyGrid, frame_id: &str) -> Result<(), NodeError> {
        self.map.publish_msg(&grid.to_msg(frame_id))?;
        self.metadata.publish_msg(&StringMsg {
            data: write_map_yaml(&grid.meta),
        })
    }
}

pub fn start_map_server(session: &NodeSession, grid: &OccupancyGrid, frame_id: &str) -> Result<MapServer, NodeError> {
    let msg = grid.to_msg(frame_id);
    let reply: Value = json!({ "map": msg });
    let service = session.advertise_service(STATIC_MAP_SERVICE, move |_| Ok(reply.clone()))?;
    let map = session.advertise_msg::<OccupancyGridMsg>(MAP_TOPIC, true)?;
    let metadata = session.advertise_msg::<StringMsg>(MAP_METADATA_TOPIC, true)?;
    let server = MapServer { map, metadata, service };
    server.publish(grid, frame_id)?;
    Ok(server)
}

/// Fetches the map through `/static_map`.
pub fn fetch_static_map(session: &NodeSession) -> Result<OccupancyGrid, NodeError> {
    let reply = session.call_service(STATIC_MAP_SERVICE, Value::Null)?;
    let msg: OccupancyGridMsg = serde_json::from_value(reply["map"].clone())
        .map_err(|e| NodeError::Protocol(format!("bad /static_map reply: {e}")))?;
    OccupancyGrid::from_msg(&msg).map_err(|e| NodeError::Protocol(format!("bad /static_map grid: {e}")))
}
