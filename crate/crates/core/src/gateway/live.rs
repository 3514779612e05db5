//! HTTPS adapters for hosted services. Each speaks a small JSON protocol so a
//! provider-specific proxy can sit behind it; credentials come from the
//! environment.

use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use reqwest::blocking::Client;
use serde_json::{json, Value};

use super::backend::{ImageBackend, PollReply, TextBackend, VideoBackend, VideoPayload};
use super::{GatewayError, JobStatus};

pub const TEXT_KEY_VAR: &str = "EXO_TEXT_KEY";
pub const IMAGE_KEY_VAR: &str = "EXO_IMAGE_KEY";
pub const VIDEO_KEY_VAR: &str = "EXO_VIDEO_KEY";

fn key(var: &str) -> Result<String, GatewayError> {
    std::env::var(var).map_err(|_| GatewayError::Input(format!("{var} is not set")))
}

fn transport(e: reqwest::Error) -> GatewayError {
    if e.is_timeout() {
        GatewayError::Transport(format!("request timed out: {e}"))
    } else {
        GatewayError::Transport(e.to_string())
    }
}

#[derive(Debug, Clone)]
struct Http {
    client: Client,
    endpoint: String,
    key: String,
}

impl Http {
    fn new(endpoint: &str, key: String, timeout: Duration) -> Result<Self, GatewayError> {
        let client = Client::builder().timeout(timeout).build().map_err(transport)?;
        Ok(Self {
            client,
            endpoint: endpoint.trim_end_matches('/').to_string(),
            key,
        })
    }

    fn check(resp: reqwest::blocking::Response) -> Result<reqwest::blocking::Response, GatewayError> {
        let status = resp.status();
        if status.is_success() {
            return Ok(resp);
        }
        let body = resp.text().unwrap_or_default();
        Err(GatewayError::Transport(format!("HTTP {status}: {body}")))
    }

    fn post_json(&self, path: &str, body: &Value) -> Result<Value, GatewayError> {
        let resp = self
            .client
            .post(format!("{}{path}", self.endpoint))
            .bearer_auth(&self.key)
            .json(body)
            .send()
            .map_err(transport)?;
        Self::check(resp)?.json().map_err(transport)
    }

    fn get(&self, path: &str) -> Result<reqwest::blocking::Response, GatewayError> {
        let resp = self
            .client
            .get(format!("{}{path}", self.endpoint))
            .bearer_auth(&self.key)
            .send()
            .map_err(transport)?;
        Self::check(resp)
    }
}

fn str_field<'a>(v: &'a Value, key: &str) -> Result<&'a str, GatewayError> {
    v.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| GatewayError::Transport(format!("response lacks string field {key:?}: {v}")))
}

/// `POST {endpoint}/complete {"prompt"}` → `{"text"}`; a `"refusal"` field
/// is surfaced as an error with the raw reply.
#[derive(Debug, Clone)]
pub struct HttpTextBackend {
    http: Http,
}

impl HttpTextBackend {
    pub fn new(endpoint: &str, timeout: Duration) -> Result<Self, GatewayError> {
        Self::with_key(endpoint, key(TEXT_KEY_VAR)?, timeout)
    }

    pub fn with_key(endpoint: &str, key: String, timeout: Duration) -> Result<Self, GatewayError> {
        Ok(Self {
            http: Http::new(endpoint, key, timeout)?,
        })
    }
}

impl TextBackend for HttpTextBackend {
    fn complete(&self, prompt: &str) -> Result<String, GatewayError> {
        let v = self.http.post_json("/complete", &json!({ "prompt": prompt }))?;
        if let Some(r) = v.get("refusal").and_then(Value::as_str) {
            return Err(GatewayError::Refused(format!("{r} (raw: {v})")));
        }
        Ok(str_field(&v, "text")?.to_string())
    }
}

/// `POST {endpoint}/edit {"prompt", "image_base64"}` → `{"image_base64"}`.
#[derive(Debug, Clone)]
pub struct HttpImageBackend {
    http: Http,
}

impl HttpImageBackend {
    pub fn new(endpoint: &str, timeout: Duration) -> Result<Self, GatewayError> {
        Ok(Self {
            http: Http::new(endpoint, key(IMAGE_KEY_VAR)?, timeout)?,
        })
    }
}

impl ImageBackend for HttpImageBackend {
    fn edit(&self, png: &[u8], prompt: &str) -> Result<Vec<u8>, GatewayError> {
        let v = self.http.post_json(
            "/edit",
            &json!({ "prompt": prompt, "image_base64": B64.encode(png) }),
        )?;
        B64.decode(str_field(&v, "image_base64")?)
            .map_err(|e| GatewayError::Transport(format!("bad image payload: {e}")))
    }
}

/// `POST /jobs` → `{"job_id"}`; `GET /jobs/{id}` → `{"status", "message"?,
/// "fps"?, "frame_count"?, "duration_s"?}`; `GET /jobs/{id}/content` → MP4.
#[derive(Debug, Clone)]
pub struct HttpVideoBackend {
    http: Http,
}

impl HttpVideoBackend {
    pub fn new(endpoint: &str, timeout: Duration) -> Result<Self, GatewayError> {
        Ok(Self {
            http: Http::new(endpoint, key(VIDEO_KEY_VAR)?, timeout)?,
        })
    }
}

impl VideoBackend for HttpVideoBackend {
    fn submit(&self, png: &[u8], prompt: &str) -> Result<String, GatewayError> {
        let v = self.http.post_json(
            "/jobs",
            &json!({ "prompt": prompt, "image_base64": B64.encode(png) }),
        )?;
        Ok(str_field(&v, "job_id")?.to_string())
    }

    fn poll(&self, job_id: &str) -> Result<PollReply, GatewayError> {
        let v: Value = self.http.get(&format!("/jobs/{job_id}"))?.json().map_err(transport)?;
        let status = str_field(&v, "status")?.parse()?;
        Ok(PollReply {
            status,
            message: v.get("message").and_then(Value::as_str).map(str::to_string),
        })
    }

    fn fetch(&self, job_id: &str) -> Result<VideoPayload, GatewayError> {
        let meta: Value = self.http.get(&format!("/jobs/{job_id}"))?.json().map_err(transport)?;
        if str_field(&meta, "status")?.parse::<JobStatus>()? != JobStatus::Succeeded {
            return Err(GatewayError::Transport(format!("job {job_id} is not finished")));
        }
        let num = |k: &str| {
            meta.get(k)
                .and_then(Value::as_f64)
                .ok_or_else(|| GatewayError::Transport(format!("job metadata lacks {k:?}")))
        };
        let fps = num("fps")?;
        let frame_count = num("frame_count")? as usize;
        let duration_s = num("duration_s")?;
        let bytes = self
            .http
            .get(&format!("/jobs/{job_id}/content"))?
            .bytes()
            .map_err(transport)?
            .to_vec();
        Ok(VideoPayload {
            bytes,
            fps,
            frame_count,
            duration_s,
        })
    }
}
