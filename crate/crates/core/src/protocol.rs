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

//! Wire formats.
//!
//! Control plane (node ↔ master): newline-delimited UTF-8 JSON. Requests are
//! `{"id", "method", "params"}`, responses `{"id", "ok", "result"|"error"}`
//! and unsolicited notifications `{"notify", "params"}`.
//!
//! Data plane (node ↔ node): frames of a 4-byte big-endian length followed by
//! that many bytes of JSON. The first frame on a data connection is a
//! handshake ([`DataHandshake`]); the publisher answers with a
//! [`DataReply`] and then streams [`crate::msg::MessageEnvelope`] frames.

use std::io::{self, BufRead, Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const DEFAULT_MASTER_PORT: u16 = 11311;

/// Upper bound on a single data frame.
pub const MAX_FRAME_LEN: usize = 64 * 1024 * 1024;

pub mod method {
    pub const HELLO: &str = "hello";
    pub const REGISTER_PUBLISHER: &str = "registerPublisher";
    pub const REGISTER_SUBSCRIBER: &str = "registerSubscriber";
    pub const UNREGISTER: &str = "unregister";
    pub const REGISTER_SERVICE: &str = "registerService";
    pub const LOOKUP_SERVICE: &str = "lookupService";
    pub const GET_SYSTEM_STATE: &str = "getSystemState";
    pub const SET_PARAM: &str = "setParam";
    pub const GET_PARAM: &str = "getParam";
    pub const HAS_PARAM: &str = "hasParam";
    pub const DELETE_PARAM: &str = "deleteParam";
    pub const SET_LOGGER_LEVEL: &str = "setLoggerLevel";
    pub const TIME_SYNC: &str = "timeSync";
}

pub mod notify {
    pub const PUBLISHER_UPDATE: &str = "publisherUpdate";
    pub const SHUTDOWN: &str = "shutdown";
    pub const SET_LOGGER_LEVEL: &str = "setLoggerLevel";
    pub const SERVICE_SUPERSEDED: &str = "serviceSuperseded";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    pub method: String,
    #[serde(default)]
    pub params: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorCode {
    BadRequest,
    UnknownMethod,
    MalformedName,
    TypeMismatch,
    UnknownCaller,
    NotFound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteError {
    pub code: ErrorCode,
    pub message: String,
}

impl RemoteError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        RemoteError {
            code,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for RemoteError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}: {}", self.code, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: u64,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<RemoteError>,
}

impl Response {
    pub fn ok(id: u64, result: Value) -> Self {
        Response {
            id,
            ok: true,
            result: Some(result),
            error: None,
        }
    }

    pub fn err(id: u64, error: RemoteError) -> Self {
        Response {
            id,
            ok: false,
            result: None,
            error: Some(error),
        }
    }

    /// Successful results come back as `Ok`; a `null` result is `Value::Null`.
    pub fn into_result(self) -> Result<Value, RemoteError> {
        if self.ok {
            Ok(self.result.unwrap_or(Value::Null))
        } else {
            Err(self
                .error
                .unwrap_or_else(|| RemoteError::new(ErrorCode::BadRequest, "error without detail")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Notification {
    pub notify: String,
    #[serde(default)]
    pub params: Value,
}

/// Anything a client can receive on its control connection.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Incoming {
    Notification(Notification),
    Response(Response),
}

/// Writes one JSON value followed by `\n`.
pub fn write_line<W: Write, T: Serialize>(w: &mut W, value: &T) -> io::Result<()> {
    let mut buf = serde_json::to_vec(value).map_err(io::Error::other)?;
    buf.push(b'\n');
    w.write_all(&buf)?;
    w.flush()
}

/// Reads one line; `Ok(None)` on end of stream.
pub fn read_line<R: BufRead>(r: &mut R) -> io::Result<Option<String>> {
    let mut line = String::new();
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Ok(None);
        }
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if !trimmed.trim().is_empty() {
            return Ok(Some(trimmed.to_string()));
        }
    }
}

pub fn encode_frame(payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(payload.len() + 4);
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(payload);
    out
}

pub fn write_frame<W: Write>(w: &mut W, payload: &[u8]) -> io::Result<()> {
    w.write_all(&encode_frame(payload))?;
    w.flush()
}

pub fn write_json_frame<W: Write, T: Serialize>(w: &mut W, value: &T) -> io::Result<()> {
    let body = serde_json::to_vec(value).map_err(io::Error::other)?;
    write_frame(w, &body)
}

/// Reads one frame; `Ok(None)` if the stream ends cleanly before a header.
pub fn read_frame<R: Read>(r: &mut R) -> io::Result<Option<Vec<u8>>> {
    let mut header = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut header[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(io::ErrorKind::UnexpectedEof.into()),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    let len = u32::from_be_bytes(header) as usize;
    if len > MAX_FRAME_LEN {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("frame of {len} bytes exceeds limit"),
        ));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    Ok(Some(body))
}

pub fn read_json_frame<R: Read, T: for<'de> Deserialize<'de>>(r: &mut R) -> io::Result<Option<T>> {
    match read_frame(r)? {
        None => Ok(None),
        Some(body) => serde_json::from_slice(&body)
            .map(Some)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)),
    }
}

/// First frame sent by the dialing side of a data connection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum DataHandshake {
    Subscribe {
        topic: String,
        #[serde(rename = "type")]
        msg_type: String,
        caller_id: String,
    },
    Call {
        service: String,
        caller_id: String,
        request: Value,
    },
}

/// Publisher/provider answer to a handshake.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum DataReply {
    Ok {
        #[serde(rename = "type")]
        msg_type: String,
        latched: bool,
    },
    Response {
        result: Value,
    },
    Error {
        message: String,
    },
}
