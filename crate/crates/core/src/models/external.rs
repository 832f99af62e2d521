//! Adapter for models living in another process.
//!
//! Wire format (UTF-8, one JSON object per line, over stdio or TCP):
//!
//! ```text
//! -> {"id":7,"x":{"3":1.0,"12":0.5}}
//! <- {"id":7,"score":0.83}
//! ```
//!
//! Only nonzero coordinates are sent. Replies may arrive in any order and are
//! matched by `id`. Requests are serialized over the single connection.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ModelError, ScoreModel};
use crate::data::FeatureVector;

/// Requests in flight at once; keeps both pipe directions from filling up.
const CHUNK: usize = 256;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("connection closed by peer")]
    Closed,
    #[error("connection unusable after an earlier protocol error")]
    Poisoned,
    #[error("malformed reply {line:?}: {reason}")]
    Malformed { line: String, reason: String },
    #[error("reply for unknown request id {0}")]
    UnknownId(u64),
    #[error("duplicate reply for request id {0}")]
    DuplicateId(u64),
    #[error("score {score} for request {id} outside [0, 1]")]
    OutOfRange { id: u64, score: f64 },
    #[error("cannot start scorer: {0}")]
    Spawn(String),
}

#[derive(Serialize)]
struct Request<'a> {
    id: u64,
    x: &'a FeatureVector,
}

#[derive(Deserialize)]
struct Reply {
    id: u64,
    score: f64,
}

struct Connection {
    writer: Box<dyn Write + Send>,
    reader: Box<dyn BufRead + Send>,
    child: Option<Child>,
    next_id: u64,
    poisoned: bool,
}

impl Connection {
    fn exchange(&mut self, xs: &[FeatureVector]) -> Result<Vec<f64>, ProtocolError> {
        if self.poisoned {
            return Err(ProtocolError::Poisoned);
        }
        let result = self.exchange_inner(xs);
        if result.is_err() {
            self.poisoned = true;
        }
        result
    }

    fn exchange_inner(&mut self, xs: &[FeatureVector]) -> Result<Vec<f64>, ProtocolError> {
        let mut out = vec![f64::NAN; xs.len()];
        for (c, chunk) in xs.chunks(CHUNK).enumerate() {
            let base = self.next_id;
            self.next_id += chunk.len() as u64;
            let mut buf = Vec::new();
            for (k, x) in chunk.iter().enumerate() {
                serde_json::to_writer(&mut buf, &Request { id: base + k as u64, x })
                    .map_err(std::io::Error::other)?;
                buf.push(b'\n');
            }
            self.writer.write_all(&buf)?;
            self.writer.flush()?;

            let mut pending: HashMap<u64, usize> =
                (0..chunk.len()).map(|k| (base + k as u64, c * CHUNK + k)).collect();
            let mut line = String::new();
            while !pending.is_empty() {
                line.clear();
                if self.reader.read_line(&mut line)? == 0 {
                    return Err(ProtocolError::Closed);
                }
                let text = line.trim_end_matches(['\r', '\n']);
                if text.trim().is_empty() {
                    continue;
                }
                let reply: Reply =
                    serde_json::from_str(text).map_err(|e| ProtocolError::Malformed {
                        line: text.to_string(),
                        reason: e.to_string(),
                    })?;
                let Some(slot) = pending.remove(&reply.id) else {
                    return Err(if reply.id >= base && reply.id < self.next_id {
                        ProtocolError::DuplicateId(reply.id)
                    } else {
                        ProtocolError::UnknownId(reply.id)
                    });
                };
                if !(0.0..=1.0).contains(&reply.score) {
                    return Err(ProtocolError::OutOfRange {
                        id: reply.id,
                        score: reply.score,
                    });
                }
                out[slot] = reply.score;
            }
        }
        Ok(out)
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        if let Some(mut child) = self.child.take() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// A scorer reachable over the line-delimited JSON protocol.
pub struct ExternalModel {
    dim: usize,
    endpoint: String,
    conn: Mutex<Connection>,
}

impl std::fmt::Debug for ExternalModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalModel")
            .field("dim", &self.dim)
            .field("endpoint", &self.endpoint)
            .finish()
    }
}

impl ExternalModel {
    /// Spawns `program args...` and speaks the protocol over its stdio.
    pub fn spawn(argv: &[String], dim: usize) -> Result<Self, ProtocolError> {
        let (program, args) = argv
            .split_first()
            .ok_or_else(|| ProtocolError::Spawn("empty command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| ProtocolError::Spawn(format!("{program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        Ok(Self {
            dim,
            endpoint: argv.join(" "),
            conn: Mutex::new(Connection {
                writer: Box::new(stdin),
                reader: Box::new(BufReader::new(stdout)),
                child: Some(child),
                next_id: 0,
                poisoned: false,
            }),
        })
    }

    pub fn connect(addr: &str, dim: usize) -> Result<Self, ProtocolError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let reader = stream.try_clone()?;
        Ok(Self::from_streams(reader, stream, dim, format!("tcp://{addr}")))
    }

    /// Wraps an already-open byte stream pair.
    pub fn from_streams<R, W>(reader: R, writer: W, dim: usize, endpoint: String) -> Self
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        Self {
            dim,
            endpoint,
            conn: Mutex::new(Connection {
                writer: Box::new(writer),
                reader: Box::new(BufReader::new(reader)),
                child: None,
                next_id: 0,
                poisoned: false,
            }),
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

impl ScoreModel for ExternalModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn score(&self, x: &FeatureVector) -> Result<f64, ModelError> {
        Ok(self.batch_score(std::slice::from_ref(x))?[0])
    }

    fn batch_score(&self, xs: &[FeatureVector]) -> Result<Vec<f64>, ModelError> {
        for x in xs {
            self.check_dim(x)?;
        }
        let mut conn = self.conn.lock().unwrap_or_else(|p| p.into_inner());
        Ok(conn.exchange(xs)?)
    }
}
