//! Executor bridge: turns an interaction-aware motion into the fixed-layout
//! command frames consumed by the robot-side controller.
//!
//! There is no retargeting step. Body pose is fed through unchanged after
//! resampling to the control rate; only the hands are mapped, from discrete
//! grasp states to rate-limited 7-DoF joint targets.

mod codec;
mod hands;
mod stream;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::motion::{MotionError, JOINT_COUNT};

pub use codec::{
    decode_batch, decode_frame, encode_batch, encode_frame, CodecError, ExoqReader, FRAME_MAGIC,
    FRAME_SIZE,
};
pub use hands::{
    resolve_handedness, state_to_joints, HandCalibration, HandJointTargets, RobotHandStream,
    HAND_DOF,
};
pub use stream::{
    build_frames, build_frames_with, event_queue, make_reference_window, read_length_delimited,
    stream, FrameSink, LengthDelimitedSink, QueueReceiver, QueueSink, ReferenceWindow, SinkError,
    StreamError, StreamSummary, VecSink, WriterSink, DEFAULT_CONTROL_FPS, DEFAULT_WINDOW_HORIZON,
};

#[derive(Debug, Error, PartialEq)]
pub enum BridgeError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("window start {start} + horizon {horizon} is outside {len} frames")]
    Index {
        start: usize,
        horizon: usize,
        len: usize,
    },
    #[error(transparent)]
    Motion(#[from] MotionError),
}

/// One executor message: root pose, joint rotations and both hand targets.
///
/// `rotations[0]` is the root orientation; 1..24 are the body joints in SMPL
/// order. Values are single precision, matching the wire layout, so a frame
/// survives encode/decode bit for bit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotCommandFrame {
    pub frame_index: u32,
    pub timestamp_s: f64,
    pub root_position: [f32; 3],
    pub rotations: [[f32; 3]; JOINT_COUNT],
    pub left_hand: [f32; HAND_DOF],
    pub right_hand: [f32; HAND_DOF],
}

impl RobotCommandFrame {
    pub fn zeroed() -> Self {
        Self {
            frame_index: 0,
            timestamp_s: 0.0,
            root_position: [0.0; 3],
            rotations: [[0.0; 3]; JOINT_COUNT],
            left_hand: [0.0; HAND_DOF],
            right_hand: [0.0; HAND_DOF],
        }
    }

    pub fn rotation_f64(&self, joint: usize) -> [f64; 3] {
        let r = self.rotations[joint];
        [r[0] as f64, r[1] as f64, r[2] as f64]
    }

    pub fn root_position_f64(&self) -> [f64; 3] {
        let p = self.root_position;
        [p[0] as f64, p[1] as f64, p[2] as f64]
    }
}
