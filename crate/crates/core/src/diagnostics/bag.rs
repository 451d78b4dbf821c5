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

//! Append-only message log.
//!
//! A file starts with the magic `MRBAG01\n` and holds records of
//!
//! ```text
//! stamp:   8 bytes, big-endian i64 nanoseconds
//! topic:   2-byte big-endian length, UTF-8 bytes
//! type:    2-byte big-endian length, UTF-8 bytes
//! payload: 4-byte big-endian length, JSON bytes
//! ```
//!
//! Stamps never decrease within a file.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use serde_json::Value;
use thiserror::Error;

use crate::msg::{MessageEnvelope, SchemaRegistry, ANY_TYPE};
use crate::namegraph::GraphName;
use crate::node::clock::now_ns;
use crate::node::{NodeError, NodeSession, Publisher, Subscription};

pub const MAGIC: &[u8; 8] = b"MRBAG01\n";

#[derive(Debug, Error)]
pub enum BagError {
    #[error("not a bag file (bad magic)")]
    BadMagic,
    #[error("truncated record at byte {offset}")]
    TruncatedRecord { offset: u64 },
    #[error("bad record at byte {offset}: {reason}")]
    BadRecord { offset: u64, reason: String },
    #[error("stamp {stamp} is earlier than the previous record ({previous})")]
    StampOrder { stamp: i64, previous: i64 },
    #[error("{0} is too long for its length field")]
    TooLong(&'static str),
    #[error("invalid replay rate {0}")]
    BadRate(f64),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Node(#[from] NodeError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BagRecord {
    pub stamp: i64,
    pub topic: GraphName,
    pub msg_type: String,
    pub payload: Vec<u8>,
}

impl BagRecord {
    pub fn from_envelope(env: &MessageEnvelope, stamp: i64) -> Self {
        BagRecord {
            stamp,
            topic: env.topic.clone(),
            msg_type: env.msg_type.clone(),
            payload: serde_json::to_vec(&env.payload).expect("JSON values serialize"),
        }
    }

    pub fn payload_value(&self) -> Result<Value, serde_json::Error> {
        serde_json::from_slice(&self.payload)
    }

    fn encoded_len(&self) -> usize {
        8 + 2 + self.topic.as_str().len() + 2 + self.msg_type.len() + 4 + self.payload.len()
    }
}

pub struct BagWriter<W: Write> {
    out: W,
    last: Option<i64>,
    count: usize,
}

impl BagWriter<BufWriter<File>> {
    pub fn create(path: &Path) -> Result<Self, BagError> {
        BagWriter::new(BufWriter::new(File::create(path)?))
    }
}

impl<W: Write> BagWriter<W> {
    pub fn new(mut out: W) -> Result<Self, BagError> {
        out.write_all(MAGIC)?;
        Ok(BagWriter {
            out,
            last: None,
            count: 0,
        })
    }

    pub fn write(&mut self, rec: &BagRecord) -> Result<(), BagError> {
        if let Some(prev) = self.last {
            if rec.stamp < prev {
                return Err(BagError::StampOrder {
                    stamp: rec.stamp,
                    previous: prev,
                });
            }
        }
        let topic = rec.topic.as_str().as_bytes();
        let ty = rec.msg_type.as_bytes();
        let tl = u16::try_from(topic.len()).map_err(|_| BagError::TooLong("topic"))?;
        let yl = u16::try_from(ty.len()).map_err(|_| BagError::TooLong("type"))?;
        let pl = u32::try_from(rec.payload.len()).map_err(|_| BagError::TooLong("payload"))?;
        let mut buf = Vec::with_capacity(rec.encoded_len());
        buf.extend_from_slice(&rec.stamp.to_be_bytes());
        buf.extend_from_slice(&tl.to_be_bytes());
        buf.extend_from_slice(topic);
        buf.extend_from_slice(&yl.to_be_bytes());
        buf.extend_from_slice(ty);
        buf.extend_from_slice(&pl.to_be_bytes());
        buf.extend_from_slice(&rec.payload);
        self.out.write_all(&buf)?;
        self.last = Some(rec.stamp);
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn finish(mut self) -> Result<W, BagError> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn encode_bag(records: &[BagRecord]) -> Result<Vec<u8>, BagError> {
    let mut w = BagWriter::new(Vec::new())?;
    for r in records {
        w.write(r)?;
    }
    w.finish()
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    start: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], BagError> {
        if self.buf.len() - self.pos < n {
            return Err(BagError::TruncatedRecord {
                offset: self.start as u64,
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn be<const N: usize>(&mut self) -> Result<[u8; N], BagError> {
        Ok(self.take(N)?.try_into().expect("slice has N bytes"))
    }

    fn text(&mut self, len: usize, what: &str) -> Result<&'a str, BagError> {
        let start = self.start as u64;
        std::str::from_utf8(self.take(len)?).map_err(|_| BagError::BadRecord {
            offset: start,
            reason: format!("{what} is not UTF-8"),
        })
    }
}

/// Parses a whole bag. Every record's topic must be a valid name, its
/// payload must match the type's schema, and stamps must not decrease.
/// Errors carry the byte offset of the offending record.
pub fn decode_bag(bytes: &[u8]) -> Result<Vec<BagRecord>, BagError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(BagError::BadMagic);
    }
    let mut c = Cursor {
        buf: bytes,
        pos: MAGIC.len(),
        start: MAGIC.len(),
    };
    let reg = SchemaRegistry::builtin();
    let mut out: Vec<BagRecord> = Vec::new();
    while c.pos < bytes.len() {
        c.start = c.pos;
        let offset = c.start as u64;
        let bad = |reason: String| BagError::BadRecord { offset, reason };
        let stamp = i64::from_be_bytes(c.be::<8>()?);
        let tl = u16::from_be_bytes(c.be::<2>()?) as usize;
        let topic = c.text(tl, "topic")?;
        let yl = u16::from_be_bytes(c.be::<2>()?) as usize;
        let msg_type = c.text(yl, "type")?.to_string();
        let pl = u32::from_be_bytes(c.be::<4>()?) as usize;
        let payload = c.take(pl)?.to_vec();
        let topic = GraphName::parse(topic).map_err(|e| bad(e.to_string()))?;
        let value: Value = serde_json::from_slice(&payload).map_err(|e| bad(format!("payload: {e}")))?;
        reg.validate(&msg_type, &value).map_err(|e| bad(e.to_string()))?;
        if let Some(prev) = out.last() {
            if stamp < prev.stamp {
                return Err(bad(format!("stamp {stamp} precedes {}", prev.stamp)));
            }
        }
        out.push(BagRecord {
            stamp,
            topic,
            msg_type,
            payload,
        });
    }
    Ok(out)
}

pub fn read_bag(path: &Path) -> Result<Vec<BagRecord>, BagError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode_bag(&bytes)
}

pub fn write_bag(path: &Path, records: &[BagRecord]) -> Result<(), BagError> {
    let mut w = BagWriter::create(path)?;
    for r in records {
        w.write(r)?;
    }
    w.finish()?;
    Ok(())
}

/// Records subscribed topics to a file from a background thread. Each
/// record is stamped with its receive time, clamped so stamps never
/// decrease.
pub struct Recorder {
    session: NodeSession,
    all: bool,
    subs: BTreeMap<String, Subscription>,
    tx: mpsc::Sender<MessageEnvelope>,
    stop: Arc<AtomicBool>,
    count: Arc<std::sync::atomic::AtomicUsize>,
    writer: Option<thread::JoinHandle<Result<usize, BagError>>>,
}

impl Recorder {
    /// Starts recording `topics`, or every published topic when `topics`
    /// is empty. In that mode [`Recorder::refresh`] picks up new topics.
    pub fn start(session: &NodeSession, topics: &[String], out: &Path) -> Result<Self, BagError> {
        Self::start_capped(session, topics, out, None)
    }

    /// Like [`Recorder::start`], but writes at most `cap` messages.
    pub fn start_capped(
        session: &NodeSession,
        topics: &[String],
        out: &Path,
        cap: Option<usize>,
    ) -> Result<Self, BagError> {
        let mut writer = BagWriter::create(out)?;
        let (tx, rx): (_, Receiver<MessageEnvelope>) = mpsc::channel();
        let stop = Arc::new(AtomicBool::new(false));
        let count = Arc::new(std::sync::atomic::AtomicUsize::new(0));
        let (stop2, count2) = (stop.clone(), count.clone());
        let handle = thread::Builder::new().name("bag-writer".into()).spawn(move || {
            let mut last = i64::MIN;
            while cap.is_none_or(|c| writer.count() < c) {
                // Once stopped, only drain what is already queued.
                let next = if stop2.load(Ordering::SeqCst) {
                    rx.try_recv().map_err(|_| RecvTimeoutError::Disconnected)
                } else {
                    rx.recv_timeout(Duration::from_millis(20))
                };
                match next {
                    Ok(env) => {
                        last = last.max(now_ns());
                        writer.write(&BagRecord::from_envelope(&env, last))?;
                        count2.fetch_add(1, Ordering::SeqCst);
                    }
                    Err(RecvTimeoutError::Timeout) => {}
                    Err(RecvTimeoutError::Disconnected) => break,
                }
            }
            let n = writer.count();
            writer.finish()?;
            Ok(n)
        })?;
        let mut rec = Recorder {
            session: session.clone(),
            all: topics.is_empty(),
            subs: BTreeMap::new(),
            tx,
            stop,
            count,
            writer: Some(handle),
        };
        for t in topics {
            rec.add_topic(t)?;
        }
        rec.refresh()?;
        Ok(rec)
    }

    fn add_topic(&mut self, topic: &str) -> Result<(), BagError> {
        let name = self.session.resolve(topic)?.to_string();
        if self.subs.contains_key(&name) {
            return Ok(());
        }
        let tx = self.tx.clone();
        let sub = self.session.subscribe(&name, ANY_TYPE, move |env| {
            let _ = tx.send(env.clone());
        })?;
        self.subs.insert(name, sub);
        Ok(())
    }

    /// Subscribes to published topics not yet recorded. A no-op unless
    /// recording everything.
    pub fn refresh(&mut self) -> Result<(), BagError> {
        if !self.all {
            return Ok(());
        }
        let st = self.session.master().system_state()?;
        for t in st.publishers.keys() {
            self.add_topic(t.as_str())?;
        }
        Ok(())
    }

    pub fn topics(&self) -> BTreeSet<String> {
        self.subs.keys().cloned().collect()
    }

    /// Messages written so far.
    pub fn count(&self) -> usize {
        self.count.load(Ordering::SeqCst)
    }

    /// Unsubscribes, drains what already arrived, and closes the file.
    pub fn finish(mut self) -> Result<usize, BagError> {
        for (_, sub) in std::mem::take(&mut self.subs) {
            sub.unsubscribe();
        }
        self.stop.store(true, Ordering::SeqCst);
        let handle = self.writer.take().expect("writer is joined once");
        drop(self);
        handle.join().unwrap_or_else(|_| Err(BagError::Io(io::Error::other("bag writer panicked"))))
    }
}

impl Drop for Recorder {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RecordLimit {
    pub count: Option<usize>,
    pub duration: Option<Duration>,
}

/// Records until `limit` is met or the session ends.
pub fn record_bag(session: &NodeSession, topics: &[String], out: &Path, limit: RecordLimit) -> Result<usize, BagError> {
    let mut rec = Recorder::start_capped(session, topics, out, limit.count)?;
    let deadline = limit.duration.map(|d| Instant::now() + d);
    let mut last_refresh = Instant::now();
    loop {
        if limit.count.is_some_and(|c| rec.count() >= c) || deadline.is_some_and(|d| Instant::now() >= d) {
            break;
        }
        if !session.is_running() {
            break;
        }
        if last_refresh.elapsed() >= Duration::from_millis(250) {
            rec.refresh()?;
            last_refresh = Instant::now();
        }
        thread::sleep(Duration::from_millis(5));
    }
    rec.finish()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlayOptions {
    /// Time scale; 2.0 plays twice as fast. Zero plays without pauses.
    pub rate: f64,
    /// How long to wait for each topic to gain a subscriber before playing.
    pub wait_for_subscribers: Duration,
}

impl Default for PlayOptions {
    fn default() -> Self {
        PlayOptions {
            rate: 1.0,
            wait_for_subscribers: Duration::from_secs(2),
        }
    }
}

/// Republishes `records`, keeping the recorded gaps scaled by `1/rate` and
/// the recorded stamps. Returns the number published.
pub fn play_records(session: &NodeSession, records: &[BagRecord], opts: &PlayOptions) -> Result<usize, BagError> {
    if !(opts.rate >= 0.0 && opts.rate.is_finite()) {
        return Err(BagError::BadRate(opts.rate));
    }
    if records.is_empty() {
        return Ok(0);
    }
    let mut pubs: BTreeMap<&str, Publisher> = BTreeMap::new();
    for r in records {
        if !pubs.contains_key(r.topic.as_str()) {
            pubs.insert(r.topic.as_str(), session.advertise(r.topic.as_str(), &r.msg_type, false)?);
        }
    }
    let deadline = Instant::now() + opts.wait_for_subscribers;
    for p in pubs.values() {
        let left = deadline.saturating_duration_since(Instant::now());
        p.wait_for_subscribers(1, left);
    }
    let first = records[0].stamp;
    let t0 = Instant::now();
    for r in records {
        if opts.rate > 0.0 {
            let offset = Duration::from_secs_f64((r.stamp - first) as f64 / 1e9 / opts.rate);
            if let Some(wait) = (t0 + offset).checked_duration_since(Instant::now()) {
                thread::sleep(wait);
            }
        }
        let value = r.payload_value().map_err(|e| BagError::BadRecord {
            offset: 0,
            reason: e.to_string(),
        })?;
        pubs[r.topic.as_str()].publish_stamped(value, r.stamp)?;
    }
    Ok(records.len())
}

pub fn play_bag(session: &NodeSession, path: &Path, opts: &PlayOptions) -> Result<usize, BagError> {
    let records = read_bag(path)?;
    play_records(session, &records, opts)
}
