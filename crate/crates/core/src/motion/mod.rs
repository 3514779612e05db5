//! Motion representations: body kinematics, bilateral hand descriptors and
//! discrete grasp states over a shared frame clock, plus the temporal
//! operations on them.
//!
//! World frame is z-up with +x along the first-frame root heading. Body pose
//! uses the 24-joint SMPL order with joint 0 as the root orientation.

mod archive;
pub mod rotation;
mod resample;
mod smooth;
mod validate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use archive::{ArchiveError, MotionArchive, ARCHIVE_MAGIC};
pub use resample::{resample, resample_with, synchronize, SYNC_TOLERANCE_S};
pub use smooth::smooth_states;
pub use validate::validate;

/// Number of SMPL body joints, root included.
pub const JOINT_COUNT: usize = 24;

/// Axis-angle rotation vector in radians.
pub type AxisAngle = [f64; 3];
pub type Vec3 = [f64; 3];

/// One frame of body pose: 24 axis-angle joint rotations.
pub type JointFrame = [AxisAngle; JOINT_COUNT];

#[derive(Debug, Error, PartialEq)]
pub enum MotionError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("stream durations differ by {gap_s:.3} s ({a} vs {b}); streams were likely estimated from different clips")]
    Sync { a: String, b: String, gap_s: f64 },
}

/// Frame rate and frame count of a sampled stream.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameClock {
    pub fps: f64,
    pub frame_count: usize,
}

impl FrameClock {
    pub fn new(fps: f64, frame_count: usize) -> Result<Self, MotionError> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(MotionError::InvalidArgument(format!(
                "fps must be positive, got {fps}"
            )));
        }
        if frame_count == 0 {
            return Err(MotionError::InvalidArgument(
                "frame_count must be at least 1".into(),
            ));
        }
        Ok(Self { fps, frame_count })
    }

    /// Time between the first and last frame.
    pub fn duration_s(&self) -> f64 {
        (self.frame_count - 1) as f64 / self.fps
    }

    pub fn time_of(&self, frame: usize) -> f64 {
        frame as f64 / self.fps
    }

    pub fn period_s(&self) -> f64 {
        1.0 / self.fps
    }
}

/// Whole-body kinematics: per-frame joint rotations and world root position.
#[derive(Clone, Debug, PartialEq)]
pub struct BodyMotionSequence {
    pub clock: FrameClock,
    pub joint_rotations: Vec<JointFrame>,
    pub root_positions: Vec<Vec3>,
}

impl BodyMotionSequence {
    pub fn new(
        clock: FrameClock,
        joint_rotations: Vec<JointFrame>,
        root_positions: Vec<Vec3>,
    ) -> Result<Self, MotionError> {
        if joint_rotations.len() != clock.frame_count || root_positions.len() != clock.frame_count
        {
            return Err(MotionError::InvalidArgument(format!(
                "body arrays have {} rotations and {} positions for {} frames",
                joint_rotations.len(),
                root_positions.len(),
                clock.frame_count
            )));
        }
        Ok(Self {
            clock,
            joint_rotations,
            root_positions,
        })
    }

    pub fn frame_count(&self) -> usize {
        self.clock.frame_count
    }
}

/// Which hands the two descriptor columns refer to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FacingMode {
    /// Subject faces the camera; columns are the anatomical left and right hands.
    Front,
    /// Subject faces away; columns are the image-plane left and right hands.
    Back,
}

impl FacingMode {
    pub fn flipped(self) -> Self {
        match self {
            FacingMode::Front => FacingMode::Back,
            FacingMode::Back => FacingMode::Front,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FacingMode::Front => "FRONT",
            FacingMode::Back => "BACK",
        }
    }
}

impl fmt::Display for FacingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FacingMode {
    type Err = MotionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "FRONT" => Ok(FacingMode::Front),
            "BACK" => Ok(FacingMode::Back),
            other => Err(MotionError::InvalidArgument(format!(
                "unknown facing {other:?}"
            ))),
        }
    }
}

/// Per-hand, per-frame pose summary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandPoseDescriptor {
    /// Wrist orientation, axis-angle radians in the camera frame.
    pub wrist_rotation: AxisAngle,
    /// Fingertip spread: 0 fully closed, 1 fully open.
    pub aperture: f64,
    pub confidence: f64,
}

impl HandPoseDescriptor {
    pub fn open() -> Self {
        Self {
            wrist_rotation: [0.0; 3],
            aperture: 1.0,
            confidence: 1.0,
        }
    }
}

/// Bilateral hand poses stored as a `[T, 2]` array.
#[derive(Clone, Debug, PartialEq)]
pub struct HandPoseSequence {
    pub clock: FrameClock,
    pub columns: Vec<[HandPoseDescriptor; 2]>,
    pub facing: FacingMode,
}

impl HandPoseSequence {
    pub fn new(
        clock: FrameClock,
        columns: Vec<[HandPoseDescriptor; 2]>,
        facing: FacingMode,
    ) -> Result<Self, MotionError> {
        if columns.len() != clock.frame_count {
            return Err(MotionError::InvalidArgument(format!(
                "hand array has {} rows for {} frames",
                columns.len(),
                clock.frame_count
            )));
        }
        Ok(Self {
            clock,
            columns,
            facing,
        })
    }
}

/// Discrete grasp label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum GraspState {
    Open = 0,
    HalfOpen = 1,
    Closed = 2,
}

impl GraspState {
    pub const ALL: [GraspState; 3] = [GraspState::Open, GraspState::HalfOpen, GraspState::Closed];

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(GraspState::Open),
            1 => Some(GraspState::HalfOpen),
            2 => Some(GraspState::Closed),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }
}

/// Per-frame grasp state for both hand columns, stored as raw codes so that
/// out-of-range values can be represented and reported.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionStateSequence {
    pub clock: FrameClock,
    pub states: Vec<[u8; 2]>,
}

impl InteractionStateSequence {
    pub fn new(clock: FrameClock, states: Vec<[u8; 2]>) -> Result<Self, MotionError> {
        if states.len() != clock.frame_count {
            return Err(MotionError::InvalidArgument(format!(
                "state array has {} rows for {} frames",
                states.len(),
                clock.frame_count
            )));
        }
        if let Some((frame, row)) = states
            .iter()
            .enumerate()
            .find(|(_, row)| row.iter().any(|&s| s > 2))
        {
            return Err(MotionError::InvalidArgument(format!(
                "state {:?} out of range at frame {frame}",
                row
            )));
        }
        Ok(Self { clock, states })
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = u8> + '_ {
        self.states.iter().map(move |row| row[col])
    }
}

/// Body, hands and grasp states on one shared clock.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionAwareMotion {
    pub body: BodyMotionSequence,
    pub hands: HandPoseSequence,
    pub states: InteractionStateSequence,
    /// Frame rate of the video the streams were estimated from.
    pub source_fps: f64,
}

impl InteractionAwareMotion {
    pub fn clock(&self) -> FrameClock {
        self.body.clock
    }

    pub fn facing(&self) -> FacingMode {
        self.hands.facing
    }

    pub fn frame_count(&self) -> usize {
        self.body.clock.frame_count
    }
}
