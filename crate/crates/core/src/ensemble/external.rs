//! Out-of-process backbones speaking line-delimited JSON.
//!
//! Request: `{"request_id": .., "chip_png_b64": .., "meta": [15 numbers]}`.
//! Reply: `{"request_id": .., "logits": [5 numbers]}`.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use base64::Engine;
use image::ImageEncoder;
use serde::{Deserialize, Serialize};

use crate::disaster::DisasterType;
use crate::error::EnsembleError;
use crate::rastergeom::Chip;

use super::backbone::{Backbone, BackboneKind};
use super::{FeatureVector, MetaVector, META_LEN, NUM_LEVELS};

pub const DEFAULT_TIMEOUT_MS: u64 = 5000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InferRequest {
    pub request_id: String,
    pub chip_png_b64: String,
    pub meta: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InferResponse {
    pub request_id: String,
    pub logits: Vec<f64>,
}

pub fn encode_chip_png(chip: &Chip) -> Result<String, EnsembleError> {
    let mut buf = Vec::new();
    image::codecs::png::PngEncoder::new(&mut buf)
        .write_image(
            chip.pixels.as_raw(),
            chip.pixels.width(),
            chip.pixels.height(),
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|e| EnsembleError::InvalidInput(format!("chip encoding failed: {e}")))?;
    Ok(base64::engine::general_purpose::STANDARD.encode(buf))
}

/// Where the external model lives.
#[derive(Debug, Clone, PartialEq)]
pub enum Transport {
    /// argv of a child process; never passed through a shell.
    Process { command: Vec<String>, pool_size: usize },
    /// Endpoint accepting `POST` with the request body.
    Http { url: String },
}

struct Worker {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

impl Worker {
    fn spawn(command: &[String]) -> std::io::Result<Self> {
        let (prog, args) = command
            .split_first()
            .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty command"))?;
        let mut child = Command::new(prog)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Worker { child, stdin, lines: rx })
    }
}

impl Drop for Worker {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Backbone that forwards chips to an external model.
pub struct ExternalBackbone {
    disaster_type: DisasterType,
    transport: Transport,
    timeout: Duration,
    workers: Vec<Mutex<Option<Worker>>>,
    next_worker: AtomicUsize,
    next_id: AtomicU64,
    agent: Option<ureq::Agent>,
}

impl std::fmt::Debug for ExternalBackbone {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalBackbone")
            .field("disaster_type", &self.disaster_type)
            .field("transport", &self.transport)
            .field("timeout", &self.timeout)
            .finish()
    }
}

impl ExternalBackbone {
    /// Workers are spawned lazily on first use and respawned after a failure.
    pub fn new(disaster_type: DisasterType, transport: Transport, timeout: Duration) -> Result<Self, EnsembleError> {
        let (workers, agent) = match &transport {
            Transport::Process { command, pool_size } => {
                if command.is_empty() {
                    return Err(EnsembleError::InvalidInput("external command is empty".into()));
                }
                ((0..(*pool_size).max(1)).map(|_| Mutex::new(None)).collect(), None)
            }
            Transport::Http { .. } => {
                let agent: ureq::Agent = ureq::Agent::config_builder()
                    .timeout_global(Some(timeout))
                    .http_status_as_error(true)
                    .build()
                    .into();
                (Vec::new(), Some(agent))
            }
        };
        Ok(ExternalBackbone {
            disaster_type,
            transport,
            timeout,
            workers,
            next_worker: AtomicUsize::new(0),
            next_id: AtomicU64::new(0),
            agent,
        })
    }

    /// Spawns every pooled process now instead of on first use.
    pub fn warm_up(&self) -> Result<(), EnsembleError> {
        if let Transport::Process { command, .. } = &self.transport {
            for slot in &self.workers {
                let mut guard = slot.lock().unwrap_or_else(|p| p.into_inner());
                if guard.is_none() {
                    *guard = Some(Worker::spawn(command).map_err(|e| self.failure(format!("spawn failed: {e}")))?);
                }
            }
        }
        Ok(())
    }

    pub fn transport(&self) -> &Transport {
        &self.transport
    }

    fn failure(&self, message: impl Into<String>) -> EnsembleError {
        EnsembleError::BackboneFailure {
            backbone: format!("external:{}", self.disaster_type),
            message: message.into(),
        }
    }

    fn call_process(&self, command: &[String], req: &InferRequest) -> Result<InferResponse, EnsembleError> {
        let slot = self.next_worker.fetch_add(1, Ordering::Relaxed) % self.workers.len();
        let mut guard = self.workers[slot].lock().unwrap_or_else(|p| p.into_inner());
        if guard.is_none() {
            *guard = Some(Worker::spawn(command).map_err(|e| self.failure(format!("spawn failed: {e}")))?);
        }
        let worker = guard.as_mut().expect("worker present");
        let deadline = Instant::now() + self.timeout;
        let result = (|| {
            let mut line = serde_json::to_string(req).expect("request serializes");
            line.push('\n');
            worker
                .stdin
                .write_all(line.as_bytes())
                .and_then(|_| worker.stdin.flush())
                .map_err(|e| self.failure(format!("write failed: {e}")))?;
            loop {
                let left = deadline.saturating_duration_since(Instant::now());
                match worker.lines.recv_timeout(left) {
                    Ok(line) => {
                        let Ok(resp) = serde_json::from_str::<InferResponse>(&line) else {
                            return Err(self.failure(format!("malformed reply: {line}")));
                        };
                        if resp.request_id == req.request_id {
                            return Ok(resp);
                        }
                        log::debug!("skipping stale reply {}", resp.request_id);
                    }
                    Err(RecvTimeoutError::Timeout) => {
                        return Err(self.failure(format!("timed out after {} ms", self.timeout.as_millis())))
                    }
                    Err(RecvTimeoutError::Disconnected) => return Err(self.failure("process exited")),
                }
            }
        })();
        if result.is_err() {
            // A worker in an unknown state is discarded.
            *guard = None;
        }
        result
    }

    fn call_http(&self, url: &str, req: &InferRequest) -> Result<InferResponse, EnsembleError> {
        let agent = self.agent.as_ref().expect("http agent");
        let mut resp = agent
            .post(url)
            .send_json(req)
            .map_err(|e| self.failure(format!("request failed: {e}")))?;
        resp.body_mut()
            .read_json::<InferResponse>()
            .map_err(|e| self.failure(format!("malformed reply: {e}")))
    }
}

impl Backbone for ExternalBackbone {
    fn kind(&self) -> BackboneKind {
        BackboneKind::External
    }

    fn disaster_type(&self) -> DisasterType {
        self.disaster_type
    }

    fn logits(
        &self,
        chip: &Chip,
        _features: &FeatureVector<f64>,
        meta: &MetaVector<f64>,
    ) -> Result<[f64; NUM_LEVELS], EnsembleError> {
        let req = InferRequest {
            request_id: format!("{}-{}", chip.building_id, self.next_id.fetch_add(1, Ordering::Relaxed)),
            chip_png_b64: encode_chip_png(chip)?,
            meta: meta.0.to_vec(),
        };
        debug_assert_eq!(req.meta.len(), META_LEN);
        let resp = match &self.transport {
            Transport::Process { command, .. } => self.call_process(command, &req)?,
            Transport::Http { url } => self.call_http(url, &req)?,
        };
        if resp.request_id != req.request_id {
            return Err(self.failure("reply for a different request"));
        }
        let logits: [f64; NUM_LEVELS] = resp
            .logits
            .as_slice()
            .try_into()
            .map_err(|_| self.failure(format!("expected {NUM_LEVELS} logits, got {}", resp.logits.len())))?;
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(self.failure("non-finite logits"));
        }
        Ok(logits)
    }
}
