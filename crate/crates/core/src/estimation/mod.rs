//! Whole-body and hand estimation seam: backend trait, adapter checks,
//! aperture quantization and assembly of the interaction-aware motion.

mod oracle;
mod remote;
pub mod wire;

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{ArtifactRef, GatewayError, MediaType};
use crate::motion::rotation::{angle_between, canonicalize};
use crate::motion::{
    smooth_states, synchronize, validate, ArchiveError, BodyMotionSequence, FacingMode, HandPoseSequence,
    InteractionAwareMotion, InteractionStateSequence, MotionError,
};

pub use oracle::{
    leg_ik, right_column, synthetic_oracle, Gait, OracleConfig, OracleEstimator, OracleOutput, ScenarioScript,
};
pub use remote::RemoteEstimator;
pub use wire::Health;

pub const OPEN_THRESHOLD: f64 = 0.7;
pub const CLOSED_THRESHOLD: f64 = 0.3;
/// Frames below this confidence keep the previous frame's grasp state.
pub const MIN_CONFIDENCE: f64 = 0.5;
pub const MIN_DWELL_FRAMES: usize = 5;

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("input: {0}")]
    Input(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("estimator returned {actual} frames for a {expected}-frame clip")]
    FrameCount { expected: usize, actual: usize },
    #[error("estimator returned non-finite values in frames {frames:?}")]
    NonFinite { frames: Vec<usize> },
    #[error("estimator output rejected: {0}")]
    Invalid(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("estimator service answered {status}: {message}")]
    Remote { status: u16, message: String },
    #[error("protocol: {0}")]
    Protocol(String),
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error(transparent)]
    Archive(#[from] ArchiveError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// A generated third-person clip handed to the estimators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoClip {
    pub artifact: ArtifactRef,
    pub fps: f64,
    pub frame_count: usize,
    pub facing_hint: Option<FacingMode>,
}

impl VideoClip {
    pub fn from_artifact(artifact: ArtifactRef, facing_hint: Option<FacingMode>) -> Result<Self, EstimationError> {
        let fps = artifact
            .fps
            .ok_or_else(|| EstimationError::Input("video artifact has no frame rate".into()))?;
        let frame_count = artifact
            .frame_count
            .ok_or_else(|| EstimationError::Input("video artifact has no frame count".into()))?;
        let clip = Self {
            artifact,
            fps,
            frame_count,
            facing_hint,
        };
        clip.check()?;
        Ok(clip)
    }

    pub fn check(&self) -> Result<(), EstimationError> {
        if self.artifact.media != MediaType::Mp4Video {
            return Err(EstimationError::Input(format!("artifact is {:?}, not a video", self.artifact.media)));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(EstimationError::Input(format!("clip fps {} is not positive", self.fps)));
        }
        if self.frame_count == 0 {
            return Err(EstimationError::Input("clip has zero frames".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Transport {
    InProcessMock,
    RemoteService,
}

impl FromStr for Transport {
    type Err = EstimationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "IN_PROCESS_MOCK" | "MOCK" => Ok(Transport::InProcessMock),
            "REMOTE_SERVICE" | "REMOTE" => Ok(Transport::RemoteService),
            other => Err(EstimationError::InvalidArgument(format!("unknown transport {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorDescriptor {
    pub name: String,
    pub transport: Transport,
    pub endpoint: Option<String>,
}

impl EstimatorDescriptor {
    pub fn mock(name: &str) -> Self {
        Self {
            name: name.into(),
            transport: Transport::InProcessMock,
            endpoint: None,
        }
    }

    pub fn remote(name: &str, endpoint: &str) -> Self {
        Self {
            name: name.into(),
            transport: Transport::RemoteService,
            endpoint: Some(endpoint.into()),
        }
    }

    pub fn check(&self) -> Result<(), EstimationError> {
        if self.transport == Transport::RemoteService && self.endpoint.as_deref().is_none_or(str::is_empty) {
            return Err(EstimationError::InvalidArgument(format!(
                "remote estimator {:?} has no endpoint",
                self.name
            )));
        }
        Ok(())
    }

    /// Concrete backend; mock transports answer with `oracle`.
    pub fn connect(&self, oracle: &OracleEstimator) -> Result<Box<dyn EstimatorBackend>, EstimationError> {
        self.check()?;
        Ok(match self.transport {
            Transport::InProcessMock => Box::new(oracle.clone()),
            Transport::RemoteService => Box::new(RemoteEstimator::new(self.endpoint.as_deref().unwrap_or_default())?),
        })
    }
}

/// Raw estimator. Implementations may return anything; the `estimate_*`
/// adapters enforce the output contract.
pub trait EstimatorBackend: Send + Sync {
    fn estimate_body(&self, clip: &VideoClip) -> Result<BodyMotionSequence, EstimationError>;
    fn estimate_hands(&self, clip: &VideoClip, facing: FacingMode) -> Result<HandPoseSequence, EstimationError>;
}

fn check_count(clip: &VideoClip, actual: usize) -> Result<(), EstimationError> {
    if actual != clip.frame_count {
        return Err(EstimationError::FrameCount {
            expected: clip.frame_count,
            actual,
        });
    }
    Ok(())
}

pub fn estimate_body(clip: &VideoClip, backend: &dyn EstimatorBackend) -> Result<BodyMotionSequence, EstimationError> {
    clip.check()?;
    let mut body = backend.estimate_body(clip)?;
    check_count(clip, body.frame_count())?;
    check_count(clip, body.joint_rotations.len())?;
    check_count(clip, body.root_positions.len())?;
    let bad: Vec<usize> = (0..body.frame_count())
        .filter(|&i| {
            body.joint_rotations[i].iter().flatten().any(|v| !v.is_finite())
                || body.root_positions[i].iter().any(|v| !v.is_finite())
        })
        .collect();
    if !bad.is_empty() {
        return Err(EstimationError::NonFinite { frames: bad });
    }
    for frame in &mut body.joint_rotations {
        for r in frame.iter_mut() {
            *r = canonicalize(*r);
        }
    }
    Ok(body)
}

pub fn estimate_hands(
    clip: &VideoClip,
    facing: FacingMode,
    backend: &dyn EstimatorBackend,
) -> Result<HandPoseSequence, EstimationError> {
    clip.check()?;
    let mut hands = backend.estimate_hands(clip, facing)?;
    check_count(clip, hands.clock.frame_count)?;
    check_count(clip, hands.columns.len())?;
    if hands.facing != facing {
        return Err(EstimationError::Invalid(format!(
            "asked for {facing} hands, estimator labelled them {}",
            hands.facing
        )));
    }
    let mut bad = Vec::new();
    for (i, row) in hands.columns.iter().enumerate() {
        let finite = row
            .iter()
            .all(|d| d.wrist_rotation.iter().chain([&d.aperture, &d.confidence]).all(|v| v.is_finite()));
        if !finite {
            bad.push(i);
        } else if row.iter().any(|d| !(0.0..=1.0).contains(&d.aperture) || !(0.0..=1.0).contains(&d.confidence)) {
            return Err(EstimationError::Invalid(format!("frame {i}: aperture or confidence outside [0, 1]")));
        }
    }
    if !bad.is_empty() {
        return Err(EstimationError::NonFinite { frames: bad });
    }
    for row in &mut hands.columns {
        for d in row.iter_mut() {
            d.wrist_rotation = canonicalize(d.wrist_rotation);
        }
    }
    Ok(hands)
}

/// Maps apertures to grasp codes: above `open_thresh` open (0), below
/// `closed_thresh` closed (2), half-open (1) between. Low-confidence frames
/// keep the previous frame's code; the first frame falls back to open.
pub fn quantize_states(
    hands: &HandPoseSequence,
    open_thresh: f64,
    closed_thresh: f64,
) -> Result<InteractionStateSequence, EstimationError> {
    if !(0.0 < closed_thresh && closed_thresh < open_thresh && open_thresh < 1.0) {
        return Err(EstimationError::InvalidArgument(format!(
            "need 0 < closed ({closed_thresh}) < open ({open_thresh}) < 1"
        )));
    }
    let mut prev = [0u8; 2];
    let mut states = Vec::with_capacity(hands.columns.len());
    for row in &hands.columns {
        let mut out = [0u8; 2];
        for (c, d) in row.iter().enumerate() {
            out[c] = if d.confidence < MIN_CONFIDENCE {
                prev[c]
            } else if d.aperture > open_thresh {
                0
            } else if d.aperture < closed_thresh {
                2
            } else {
                1
            };
        }
        states.push(out);
        prev = out;
    }
    Ok(InteractionStateSequence::new(hands.clock, states)?)
}

/// Synchronizes onto the body clock, removes state flicker and insists on a
/// clean validation report.
pub fn assemble(
    body: &BodyMotionSequence,
    hands: &HandPoseSequence,
    states: &InteractionStateSequence,
) -> Result<InteractionAwareMotion, EstimationError> {
    let mut motion = synchronize(body, hands, states)?;
    motion.states = smooth_states(&motion.states, MIN_DWELL_FRAMES);
    let report = validate(&motion);
    if !report.is_empty() {
        return Err(EstimationError::Invalid(report.to_string()));
    }
    Ok(motion)
}

/// Largest per-column wrist orientation error (radians) against a scripted
/// reference on the same clock.
pub fn wrist_axis_deviation(hands: &HandPoseSequence, reference: &HandPoseSequence) -> Result<[f64; 2], EstimationError> {
    if hands.columns.len() != reference.columns.len() {
        return Err(EstimationError::FrameCount {
            expected: reference.columns.len(),
            actual: hands.columns.len(),
        });
    }
    let mut worst = [0.0f64; 2];
    for (a, b) in hands.columns.iter().zip(&reference.columns) {
        for c in 0..2 {
            worst[c] = worst[c].max(angle_between(a[c].wrist_rotation, b[c].wrist_rotation));
        }
    }
    Ok(worst)
}
