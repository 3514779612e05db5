use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::header::CONTENT_TYPE;

use crate::gateway::store::read_verified;
use crate::motion::{BodyMotionSequence, FacingMode, HandPoseSequence, MotionArchive};

use super::wire::{encode_request, EstimateParams, Health, Stream, HEALTH_PATH};
use super::{EstimationError, EstimatorBackend, VideoClip};

const REQUEST_TIMEOUT: Duration = Duration::from_secs(600);

/// Client for an estimation service speaking the multipart protocol.
#[derive(Clone, Debug)]
pub struct RemoteEstimator {
    base: String,
    client: Client,
}

impl RemoteEstimator {
    pub fn new(endpoint: &str) -> Result<Self, EstimationError> {
        if endpoint.trim().is_empty() {
            return Err(EstimationError::InvalidArgument("empty estimator endpoint".into()));
        }
        let client = Client::builder()
            .timeout(REQUEST_TIMEOUT)
            .build()
            .map_err(|e| EstimationError::Transport(e.to_string()))?;
        Ok(Self {
            base: endpoint.trim_end_matches('/').to_string(),
            client,
        })
    }

    pub fn endpoint(&self) -> &str {
        &self.base
    }

    pub fn health(&self) -> Result<Health, EstimationError> {
        let resp = self
            .client
            .get(format!("{}{HEALTH_PATH}", self.base))
            .send()
            .map_err(|e| EstimationError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.text().map_err(|e| EstimationError::Transport(e.to_string()))?;
        if status != 200 {
            return Err(EstimationError::Remote { status, message: text });
        }
        Health::parse(&text)
    }

    fn call(&self, stream: Stream, clip: &VideoClip, facing: Option<FacingMode>) -> Result<MotionArchive, EstimationError> {
        let video = read_verified(&clip.artifact)?;
        let params = EstimateParams {
            fps: clip.fps,
            frame_count: clip.frame_count,
            facing,
        };
        let (content_type, body) = encode_request(&params, &video);
        let resp = self
            .client
            .post(format!("{}{}", self.base, stream.path()))
            .header(CONTENT_TYPE, content_type)
            .body(body)
            .send()
            .map_err(|e| EstimationError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let bytes = resp.bytes().map_err(|e| EstimationError::Transport(e.to_string()))?;
        if status != 200 {
            return Err(EstimationError::Remote {
                status,
                message: String::from_utf8_lossy(&bytes).into_owned(),
            });
        }
        Ok(MotionArchive::from_bytes(&bytes)?)
    }
}

impl EstimatorBackend for RemoteEstimator {
    fn estimate_body(&self, clip: &VideoClip) -> Result<BodyMotionSequence, EstimationError> {
        self.call(Stream::Body, clip, None)?
            .body
            .ok_or_else(|| EstimationError::Protocol("reply has no body stream".into()))
    }

    fn estimate_hands(&self, clip: &VideoClip, facing: FacingMode) -> Result<HandPoseSequence, EstimationError> {
        self.call(Stream::Hands, clip, Some(facing))?
            .hands
            .ok_or_else(|| EstimationError::Protocol("reply has no hand stream".into()))
    }
}
