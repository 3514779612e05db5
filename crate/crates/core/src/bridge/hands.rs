use serde::{Deserialize, Serialize};

use crate::motion::{FacingMode, GraspState, HandPoseDescriptor, HandPoseSequence, InteractionStateSequence};

use super::BridgeError;

/// Degrees of freedom of one robot hand (thumb 3, index 2, middle 2).
pub const HAND_DOF: usize = 7;

// Relative slack for snapping onto the target when the remaining distance
// equals one step up to rounding.
const SNAP_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandJointTargets {
    pub joints: [f64; HAND_DOF],
}

impl HandJointTargets {
    pub const fn new(joints: [f64; HAND_DOF]) -> Self {
        Self { joints }
    }

    pub fn to_f32(&self) -> [f32; HAND_DOF] {
        self.joints.map(|j| j as f32)
    }

    pub fn from_f32(joints: [f32; HAND_DOF]) -> Self {
        Self {
            joints: joints.map(|j| j as f64),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.joints
            .iter()
            .zip(&other.joints)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn distance_sq(&self, other: &[f64; HAND_DOF]) -> f64 {
        self.joints
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

/// Per-state hand poses, joint limits and the joint speed cap.
///
/// The defaults are placeholders with symmetric limits; they are not the
/// vendor values and must be recalibrated on hardware.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandCalibration {
    pub open_pose: HandJointTargets,
    pub half_pose: HandJointTargets,
    pub closed_pose: HandJointTargets,
    pub limits: [(f64, f64); HAND_DOF],
    /// rad/s; `f64::INFINITY` disables rate limiting.
    pub max_joint_speed: f64,
}

impl Default for HandCalibration {
    fn default() -> Self {
        Self {
            open_pose: HandJointTargets::new([0.0; HAND_DOF]),
            half_pose: HandJointTargets::new([0.0, 0.45, 0.6, -0.6, -0.6, -0.6, -0.6]),
            closed_pose: HandJointTargets::new([0.0, 0.9, 1.2, -1.2, -1.2, -1.2, -1.2]),
            limits: [(-1.75, 1.75); HAND_DOF],
            max_joint_speed: 6.0,
        }
    }
}

impl HandCalibration {
    pub fn check(&self) -> Result<(), BridgeError> {
        if !(self.max_joint_speed > 0.0) {
            return Err(BridgeError::InvalidArgument(format!(
                "max joint speed must be positive, got {}",
                self.max_joint_speed
            )));
        }
        for (j, (lo, hi)) in self.limits.iter().enumerate() {
            if !(lo < hi) {
                return Err(BridgeError::InvalidArgument(format!(
                    "joint {j} limits ({lo}, {hi}) are not ordered"
                )));
            }
        }
        let poses = [
            ("open", &self.open_pose),
            ("half", &self.half_pose),
            ("closed", &self.closed_pose),
        ];
        for (name, pose) in poses {
            for (j, v) in pose.joints.iter().enumerate() {
                let (lo, hi) = self.limits[j];
                if !(lo..=hi).contains(v) {
                    return Err(BridgeError::InvalidArgument(format!(
                        "{name} pose joint {j} = {v} outside ({lo}, {hi})"
                    )));
                }
            }
        }
        if self.open_pose == self.half_pose
            || self.half_pose == self.closed_pose
            || self.open_pose == self.closed_pose
        {
            return Err(BridgeError::InvalidArgument(
                "open/half/closed poses must be pairwise distinct".into(),
            ));
        }
        Ok(())
    }

    pub fn pose(&self, state: GraspState) -> &HandJointTargets {
        match state {
            GraspState::Open => &self.open_pose,
            GraspState::HalfOpen => &self.half_pose,
            GraspState::Closed => &self.closed_pose,
        }
    }

    /// The state whose pose is closest to `joints`; ties go to the more open
    /// state.
    pub fn nearest_state(&self, joints: &[f64; HAND_DOF]) -> GraspState {
        let mut best = GraspState::Open;
        let mut best_d = f64::INFINITY;
        for s in GraspState::ALL {
            let d = self.pose(s).distance_sq(joints);
            if d < best_d {
                best = s;
                best_d = d;
            }
        }
        best
    }
}

/// Moves `previous` toward the calibrated pose for `state`, with every joint
/// travelling at most `max_joint_speed * dt`. Lands on the pose exactly once
/// it is within one step.
pub fn state_to_joints(
    state: u8,
    previous: &HandJointTargets,
    dt: f64,
    calib: &HandCalibration,
) -> Result<HandJointTargets, BridgeError> {
    let state = GraspState::from_code(state)
        .ok_or_else(|| BridgeError::InvalidArgument(format!("grasp state {state} not in 0..=2")))?;
    if !(dt > 0.0) {
        return Err(BridgeError::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let target = calib.pose(state);
    let step = calib.max_joint_speed * dt;
    let mut next = *previous;
    for (j, out) in next.joints.iter_mut().enumerate() {
        let prev = previous.joints[j];
        let goal = target.joints[j];
        let delta = goal - prev;
        *out = if delta.abs() <= step * (1.0 + SNAP_SLACK) {
            goal
        } else {
            prev + step.copysign(delta)
        };
    }
    Ok(next)
}

/// Descriptors and states feeding one robot hand.
#[derive(Clone, Debug, PartialEq)]
pub struct RobotHandStream {
    pub source_column: usize,
    pub descriptors: Vec<HandPoseDescriptor>,
    pub states: Vec<u8>,
}

/// Column feeding the robot's left hand for a given facing.
fn left_column(facing: FacingMode) -> usize {
    match facing {
        FacingMode::Front => 0,
        FacingMode::Back => 1,
    }
}

/// Routes the two estimator columns to the robot's (left, right) hands.
///
/// FRONT columns are anatomical, so column 0 drives the left hand. BACK
/// columns are image-plane, so they are swapped. States travel with their
/// column.
pub fn resolve_handedness(
    hands: &HandPoseSequence,
    states: &InteractionStateSequence,
) -> (RobotHandStream, RobotHandStream) {
    let left = left_column(hands.facing);
    let take = |col: usize| RobotHandStream {
        source_column: col,
        descriptors: hands.columns.iter().map(|row| row[col]).collect(),
        states: states.column(col).collect(),
    };
    (take(left), take(1 - left))
}
