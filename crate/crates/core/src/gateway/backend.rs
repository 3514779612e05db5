//! Backend seams and the deterministic in-process mocks.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::planner::{draft_description, draft_steps, fallback_tier, render_paragraph};

use super::media::{png_with_text, stub_mp4};
use super::store::sha256_hex;
use super::{GatewayError, JobStatus};

pub trait TextBackend: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, GatewayError>;
}

pub trait ImageBackend: Send + Sync {
    /// Returns the edited PNG.
    fn edit(&self, png: &[u8], prompt: &str) -> Result<Vec<u8>, GatewayError>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct PollReply {
    pub status: JobStatus,
    pub message: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VideoPayload {
    pub bytes: Vec<u8>,
    pub fps: f64,
    pub frame_count: usize,
    pub duration_s: f64,
}

/// Provider-shaped video seam: submit, poll, fetch.
pub trait VideoBackend: Send + Sync {
    fn submit(&self, png: &[u8], prompt: &str) -> Result<String, GatewayError>;
    fn poll(&self, job_id: &str) -> Result<PollReply, GatewayError>;
    fn fetch(&self, job_id: &str) -> Result<VideoPayload, GatewayError>;
}

/// Value of the first `label: value` line in a prompt.
fn field<'a>(prompt: &'a str, label: &str) -> Option<&'a str> {
    prompt
        .lines()
        .find_map(|l| l.strip_prefix(label)?.strip_prefix(':'))
        .map(str::trim)
}

/// Rule-based stand-in for the language model. Recognises the bundled
/// prompts by their title line.
#[derive(Debug, Default)]
pub struct MockTextBackend {
    calls: AtomicUsize,
}

impl MockTextBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl TextBackend for MockTextBackend {
    fn complete(&self, prompt: &str) -> Result<String, GatewayError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let title = prompt.lines().next().unwrap_or("");
        if title.starts_with("Action Decomposition Prompt") {
            let goal = field(prompt, "Task goal").unwrap_or("");
            Ok(render_paragraph(&draft_steps(goal)))
        } else if title.starts_with("Multimodal Action Description") {
            let scene = field(prompt, "Visual observation").unwrap_or("");
            let chain = field(prompt, "Action chain").unwrap_or("");
            let steps: Vec<String> = chain.split("; ").map(str::to_string).collect();
            Ok(draft_description(scene, &steps))
        } else if title.starts_with("Task Difficulty Classification") {
            let goal = field(prompt, "Task goal").unwrap_or("");
            Ok(format!("Tier: {}", fallback_tier(goal)))
        } else if prompt.trim().is_empty() {
            Err(GatewayError::Input("empty prompt".into()))
        } else {
            Ok(format!("ack {}", &sha256_hex(prompt.as_bytes())[..16]))
        }
    }
}

/// Returns queued replies in order, then errors.
#[derive(Debug, Default)]
pub struct ScriptedTextBackend {
    replies: Mutex<VecDeque<Result<String, GatewayError>>>,
    prompts: Mutex<Vec<String>>,
}

impl ScriptedTextBackend {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            replies: Mutex::new(replies.into_iter().map(|s| Ok(s.into())).collect()),
            prompts: Mutex::default(),
        }
    }

    pub fn push_error(&self, e: GatewayError) {
        self.replies.lock().expect("lock").push_back(Err(e));
    }

    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().expect("lock").clone()
    }
}

impl TextBackend for ScriptedTextBackend {
    fn complete(&self, prompt: &str) -> Result<String, GatewayError> {
        self.prompts.lock().expect("lock").push(prompt.to_string());
        self.replies
            .lock()
            .expect("lock")
            .pop_front()
            .unwrap_or_else(|| Err(GatewayError::Transport("script exhausted".into())))
    }
}

/// Tags the input PNG with a tEXt chunk derived from the prompt.
#[derive(Debug, Default)]
pub struct MockImageBackend {
    calls: AtomicUsize,
}

impl MockImageBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ImageBackend for MockImageBackend {
    fn edit(&self, png: &[u8], prompt: &str) -> Result<Vec<u8>, GatewayError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        png_with_text(png, "exo-edit", &sha256_hex(prompt.as_bytes()))
    }
}

pub const MOCK_CLIP_FPS: f64 = 24.0;
pub const MOCK_CLIP_FRAMES: usize = 240;

/// Replays a fixed status script per job and serves a 10 s, 24 fps stub clip.
#[derive(Debug)]
pub struct MockVideoBackend {
    script: Vec<PollReply>,
    state: Mutex<Vec<(String, usize, String)>>,
    submits: AtomicUsize,
    pub fps: f64,
    pub frame_count: usize,
    pub duration_s: f64,
}

impl Default for MockVideoBackend {
    fn default() -> Self {
        Self::with_script(vec![JobStatus::Pending, JobStatus::Running, JobStatus::Succeeded])
    }
}

impl MockVideoBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_script(statuses: Vec<JobStatus>) -> Self {
        Self::with_replies(
            statuses
                .into_iter()
                .map(|status| PollReply { status, message: None })
                .collect(),
        )
    }

    pub fn with_replies(script: Vec<PollReply>) -> Self {
        Self {
            script,
            state: Mutex::default(),
            submits: AtomicUsize::new(0),
            fps: MOCK_CLIP_FPS,
            frame_count: MOCK_CLIP_FRAMES,
            duration_s: MOCK_CLIP_FRAMES as f64 / MOCK_CLIP_FPS,
        }
    }

    pub fn submits(&self) -> usize {
        self.submits.load(Ordering::SeqCst)
    }
}

impl VideoBackend for MockVideoBackend {
    fn submit(&self, png: &[u8], prompt: &str) -> Result<String, GatewayError> {
        let n = self.submits.fetch_add(1, Ordering::SeqCst);
        let id = format!("mock-{n}");
        let note = sha256_hex(&[png, prompt.as_bytes()].concat());
        self.state.lock().expect("lock").push((id.clone(), 0, note));
        Ok(id)
    }

    fn poll(&self, job_id: &str) -> Result<PollReply, GatewayError> {
        let mut st = self.state.lock().expect("lock");
        let job = st
            .iter_mut()
            .find(|(id, _, _)| id == job_id)
            .ok_or_else(|| GatewayError::Input(format!("unknown job {job_id}")))?;
        let i = job.1.min(self.script.len().saturating_sub(1));
        job.1 += 1;
        self.script
            .get(i)
            .cloned()
            .ok_or_else(|| GatewayError::Transport("empty poll script".into()))
    }

    fn fetch(&self, job_id: &str) -> Result<VideoPayload, GatewayError> {
        let st = self.state.lock().expect("lock");
        let (_, _, note) = st
            .iter()
            .find(|(id, _, _)| id == job_id)
            .ok_or_else(|| GatewayError::Input(format!("unknown job {job_id}")))?;
        Ok(VideoPayload {
            bytes: stub_mp4(self.fps, self.frame_count, note),
            fps: self.fps,
            frame_count: self.frame_count,
            duration_s: self.duration_s,
        })
    }
}
