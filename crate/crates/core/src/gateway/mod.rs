//! Client layer over the image-edit, text and video services: job lifecycle,
//! content-addressed caching and the latency ledger.

pub mod backend;
pub mod clock;
pub mod ledger;
pub mod live;
pub mod media;
pub mod store;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planner::{PromptDocument, PromptKind, TextService};

pub use backend::{
    ImageBackend, MockImageBackend, MockTextBackend, MockVideoBackend, PollReply, ScriptedTextBackend,
    TextBackend, VideoBackend, VideoPayload, MOCK_CLIP_FPS, MOCK_CLIP_FRAMES,
};
pub use clock::{Backoff, Clock, ManualClock, SystemClock};
pub use ledger::{
    report_latency, LatencyLedger, LatencyReport, LedgerEntry, MetricKind, StageMean, REFERENCE_MEANS,
    STAGE_BODY_ESTIMATION, STAGE_EMBODIMENT_TRANSFER, STAGE_HAND_ESTIMATION, STAGE_TASK_DECOMPOSITION,
    STAGE_VIDEO_GENERATION,
};
pub use store::{request_digest, sha256_hex, ArtifactRef, ArtifactStore, MediaType};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum GatewayError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("prompt not submittable: {0}")]
    Prompt(String),
    #[error("job {job_id} timed out after {waited_s} s")]
    TimedOut { job_id: String, waited_s: f64 },
    #[error("job {job_id} failed: {message}")]
    Failed { job_id: String, message: String },
    #[error("backend refused: {0}")]
    Refused(String),
    #[error("artifact integrity: {0}")]
    Integrity(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("io: {0}")]
    Io(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum JobKind {
    ImageEdit,
    Text,
    Video,
}

impl JobKind {
    pub fn as_str(self) -> &'static str {
        match self {
            JobKind::ImageEdit => "IMAGE_EDIT",
            JobKind::Text => "TEXT",
            JobKind::Video => "VIDEO",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum JobStatus {
    Pending,
    Running,
    Succeeded,
    Failed,
    TimedOut,
}

impl JobStatus {
    fn rank(self) -> u8 {
        match self {
            JobStatus::Pending => 0,
            JobStatus::Running => 1,
            _ => 2,
        }
    }

    pub fn is_terminal(self) -> bool {
        self.rank() == 2
    }

    pub fn as_str(self) -> &'static str {
        match self {
            JobStatus::Pending => "PENDING",
            JobStatus::Running => "RUNNING",
            JobStatus::Succeeded => "SUCCEEDED",
            JobStatus::Failed => "FAILED",
            JobStatus::TimedOut => "TIMED_OUT",
        }
    }
}

impl FromStr for JobStatus {
    type Err = GatewayError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "PENDING" => JobStatus::Pending,
            "RUNNING" => JobStatus::Running,
            "SUCCEEDED" => JobStatus::Succeeded,
            "FAILED" => JobStatus::Failed,
            "TIMED_OUT" => JobStatus::TimedOut,
            other => return Err(GatewayError::Transport(format!("unknown job status {other:?}"))),
        })
    }
}

impl fmt::Display for JobStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationJob {
    pub job_id: String,
    pub kind: JobKind,
    pub status: JobStatus,
    pub submitted_at: f64,
    pub completed_at: Option<f64>,
    pub request_digest: String,
    pub artifact: Option<ArtifactRef>,
}

impl GenerationJob {
    pub fn new(job_id: impl Into<String>, kind: JobKind, submitted_at: f64, request_digest: impl Into<String>) -> Self {
        Self {
            job_id: job_id.into(),
            kind,
            status: JobStatus::Pending,
            submitted_at,
            completed_at: None,
            request_digest: request_digest.into(),
            artifact: None,
        }
    }

    /// Applies a reported status if it moves the job forward. Reports that
    /// would move it backward, or out of a terminal state, are ignored.
    pub fn observe(&mut self, status: JobStatus, now: f64) -> bool {
        if self.status.is_terminal() || status.rank() <= self.status.rank() {
            return false;
        }
        self.status = status;
        if status.is_terminal() {
            self.completed_at = Some(now.max(self.submitted_at));
        }
        true
    }
}

/// Per-call options for video jobs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VideoJobOptions {
    pub timeout_s: f64,
    /// Skip the request cache and generate again.
    pub regenerate: bool,
}

impl Default for VideoJobOptions {
    fn default() -> Self {
        Self {
            timeout_s: 900.0,
            regenerate: false,
        }
    }
}

/// Shared store, ledger and clock for all backend calls of a run.
pub struct Gateway {
    pub store: ArtifactStore,
    pub ledger: LatencyLedger,
    pub clock: Arc<dyn Clock>,
    pub backoff: Backoff,
}

fn submittable(doc: &PromptDocument) -> Result<String, GatewayError> {
    if let Some(slot) = doc.placeholders.first() {
        return Err(GatewayError::Prompt(format!("unresolved slot {slot}")));
    }
    let text = doc.render();
    if text.trim().is_empty() {
        return Err(GatewayError::Input("empty prompt".into()));
    }
    Ok(text)
}

impl Gateway {
    pub fn new(store: ArtifactStore, ledger: LatencyLedger, clock: Arc<dyn Clock>) -> Self {
        Self {
            store,
            ledger,
            clock,
            backoff: Backoff::default(),
        }
    }

    pub fn edit_image(
        &self,
        image: &ArtifactRef,
        prompt: &PromptDocument,
        backend: &dyn ImageBackend,
    ) -> Result<ArtifactRef, GatewayError> {
        if prompt.kind != PromptKind::EmbodimentTransfer {
            return Err(GatewayError::Input(format!("image edit needs an embodiment prompt, got {}", prompt.kind)));
        }
        let text = submittable(prompt)?;
        let png = self.store.read(image)?;
        media::check_png(&png)?;
        let digest = request_digest(JobKind::ImageEdit.as_str(), &text, &[&png]);
        if let Some(hit) = self.store.lookup(&digest)? {
            return Ok(hit);
        }
        let start = self.clock.now_s();
        let edited = backend.edit(&png, &text)?;
        media::check_png(&edited).map_err(|e| GatewayError::Integrity(format!("edited image: {e}")))?;
        let elapsed = self.clock.now_s() - start;
        let out = self.store.put(&edited, MediaType::PngImage)?;
        self.ledger.record(LedgerEntry::per_request(STAGE_EMBODIMENT_TRANSFER, elapsed))?;
        self.store.remember(&digest, &out)?;
        Ok(out)
    }

    /// Completes a prompt; the reply is cached as a text artifact and timed
    /// under `stage`.
    pub fn complete_text(
        &self,
        prompt: &PromptDocument,
        backend: &dyn TextBackend,
        stage: &str,
    ) -> Result<String, GatewayError> {
        let text = submittable(prompt)?;
        let digest = request_digest(JobKind::Text.as_str(), &text, &[]);
        if let Some(hit) = self.store.lookup(&digest)? {
            let bytes = self.store.read(&hit)?;
            return String::from_utf8(bytes).map_err(|e| GatewayError::Integrity(e.to_string()));
        }
        let start = self.clock.now_s();
        let reply = backend.complete(&text)?;
        let elapsed = self.clock.now_s() - start;
        let out = self.store.put(reply.as_bytes(), MediaType::Text)?;
        self.ledger.record(LedgerEntry::per_request(stage, elapsed))?;
        self.store.remember(&digest, &out)?;
        Ok(reply)
    }

    pub fn text_service<'a>(&'a self, backend: &'a dyn TextBackend, stage: &'a str) -> GatewayText<'a> {
        GatewayText {
            gateway: self,
            backend,
            stage,
        }
    }

    pub fn run_video_job(
        &self,
        reference_image: &ArtifactRef,
        prompt: &PromptDocument,
        backend: &dyn VideoBackend,
        options: VideoJobOptions,
    ) -> Result<GenerationJob, GatewayError> {
        if !matches!(prompt.kind, PromptKind::VideoB | PromptKind::VideoAs) {
            return Err(GatewayError::Input(format!("video job needs a video prompt, got {}", prompt.kind)));
        }
        if !(options.timeout_s > 0.0) {
            return Err(GatewayError::Input("timeout must be positive".into()));
        }
        let text = submittable(prompt)?;
        let png = self.store.read(reference_image)?;
        media::check_png(&png)?;
        let digest = request_digest(JobKind::Video.as_str(), &text, &[&png]);
        if !options.regenerate {
            if let Some(hit) = self.store.lookup(&digest)? {
                let now = self.clock.now_s();
                let mut job = GenerationJob::new("cached", JobKind::Video, now, digest);
                job.observe(JobStatus::Succeeded, now);
                job.artifact = Some(hit);
                return Ok(job);
            }
        }

        let start = self.clock.now_s();
        let job_id = backend.submit(&png, &text)?;
        let mut job = GenerationJob::new(job_id, JobKind::Video, start, digest.clone());
        let mut attempt = 0;
        loop {
            let reply = backend.poll(&job.job_id)?;
            job.observe(reply.status, self.clock.now_s());
            match job.status {
                JobStatus::Succeeded => break,
                JobStatus::Failed => {
                    return Err(GatewayError::Failed {
                        job_id: job.job_id,
                        message: reply.message.unwrap_or_else(|| "no message".into()),
                    })
                }
                JobStatus::TimedOut => {
                    return Err(GatewayError::TimedOut {
                        job_id: job.job_id,
                        waited_s: self.clock.now_s() - start,
                    })
                }
                JobStatus::Pending | JobStatus::Running => {}
            }
            let delay = self.backoff.delay(attempt);
            attempt += 1;
            let waited = self.clock.now_s() - start;
            if waited + delay.as_secs_f64() > options.timeout_s {
                job.observe(JobStatus::TimedOut, self.clock.now_s());
                return Err(GatewayError::TimedOut {
                    job_id: job.job_id,
                    waited_s: waited,
                });
            }
            self.clock.sleep(delay);
        }

        let payload = backend.fetch(&job.job_id)?;
        check_clip(&payload)?;
        media::mp4_boxes(&payload.bytes).map_err(|e| GatewayError::Integrity(e.to_string()))?;
        let elapsed = self.clock.now_s() - start;
        let artifact = self.store.put_video(&payload.bytes, payload.fps, payload.frame_count)?;
        self.ledger.record(LedgerEntry::per_video_second(
            STAGE_VIDEO_GENERATION,
            elapsed,
            payload.duration_s,
        ))?;
        self.store.remember(&digest, &artifact)?;
        job.artifact = Some(artifact);
        Ok(job)
    }
}

/// Declared fps, duration and frame count must agree within one frame.
pub fn check_clip(p: &VideoPayload) -> Result<(), GatewayError> {
    let ok = p.fps > 0.0
        && p.duration_s > 0.0
        && p.frame_count > 0
        && (p.fps * p.duration_s - p.frame_count as f64).abs() <= 1.0;
    if ok {
        Ok(())
    } else {
        Err(GatewayError::Integrity(format!(
            "clip declares {} fps x {} s but {} frames",
            p.fps, p.duration_s, p.frame_count
        )))
    }
}

/// A text backend routed through the gateway's cache and ledger.
pub struct GatewayText<'a> {
    gateway: &'a Gateway,
    backend: &'a dyn TextBackend,
    stage: &'a str,
}

impl TextService for GatewayText<'_> {
    fn complete_text(&self, doc: &PromptDocument) -> Result<String, GatewayError> {
        self.gateway.complete_text(doc, self.backend, self.stage)
    }
}

/// Sends documents straight to a backend with no caching or timing.
pub struct Direct<'a>(pub &'a dyn TextBackend);

impl TextService for Direct<'_> {
    fn complete_text(&self, doc: &PromptDocument) -> Result<String, GatewayError> {
        self.0.complete(&submittable(doc)?)
    }
}
