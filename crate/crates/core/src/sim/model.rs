use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bridge::HandCalibration;
use crate::kv::{KvDoc, KvError};
use crate::motion::rotation::to_matrix;
use crate::motion::{Vec3, JOINT_COUNT};

pub const PELVIS: usize = 0;
pub const L_HIP: usize = 1;
pub const R_HIP: usize = 2;
pub const SPINE1: usize = 3;
pub const L_KNEE: usize = 4;
pub const R_KNEE: usize = 5;
pub const SPINE2: usize = 6;
pub const L_ANKLE: usize = 7;
pub const R_ANKLE: usize = 8;
pub const SPINE3: usize = 9;
pub const NECK: usize = 12;
pub const L_COLLAR: usize = 13;
pub const R_COLLAR: usize = 14;
pub const L_SHOULDER: usize = 16;
pub const R_SHOULDER: usize = 17;
pub const L_ELBOW: usize = 18;
pub const R_ELBOW: usize = 19;
pub const L_WRIST: usize = 20;
pub const R_WRIST: usize = 21;

/// SMPL kinematic tree; `None` marks the root.
pub const SMPL_PARENTS: [Option<usize>; JOINT_COUNT] = [
    None,
    Some(0),
    Some(0),
    Some(0),
    Some(1),
    Some(2),
    Some(3),
    Some(4),
    Some(5),
    Some(6),
    Some(7),
    Some(8),
    Some(9),
    Some(9),
    Some(9),
    Some(12),
    Some(13),
    Some(14),
    Some(16),
    Some(17),
    Some(18),
    Some(19),
    Some(20),
    Some(21),
];

/// Joints whose offset is a limb segment and must have positive length.
const LIMB_JOINTS: [usize; 8] = [
    L_KNEE, R_KNEE, L_ANKLE, R_ANKLE, L_ELBOW, R_ELBOW, L_WRIST, R_WRIST,
];

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid humanoid model: {0}")]
    Invalid(String),
    #[error(transparent)]
    File(#[from] KvError),
}

/// Simplified humanoid used for kinematic replay.
///
/// Rest pose stands upright with arms hanging, z-up, facing +x, +y to the
/// robot's left. `offsets[j]` is joint `j`'s position relative to its parent
/// in the parent frame. Limits apply to each axis-angle component of the
/// joint's local rotation. Default dimensions are roughly G1-sized and are
/// not vendor values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumanoidModel {
    pub offsets: [Vec3; JOINT_COUNT],
    pub joint_limits: [[(f64, f64); 3]; JOINT_COUNT],
    pub velocity_limits: [f64; JOINT_COUNT],
    /// Ankle height above the floor with the foot flat.
    pub sole_height: f64,
    pub hand: HandCalibration,
}

impl Default for HumanoidModel {
    fn default() -> Self {
        let mut offsets = [[0.0; 3]; JOINT_COUNT];
        offsets[L_HIP] = [0.0, 0.09, -0.07];
        offsets[R_HIP] = [0.0, -0.09, -0.07];
        offsets[SPINE1] = [0.0, 0.0, 0.10];
        offsets[L_KNEE] = [0.0, 0.0, -0.36];
        offsets[R_KNEE] = [0.0, 0.0, -0.36];
        offsets[SPINE2] = [0.0, 0.0, 0.12];
        offsets[L_ANKLE] = [0.0, 0.0, -0.36];
        offsets[R_ANKLE] = [0.0, 0.0, -0.36];
        offsets[SPINE3] = [0.0, 0.0, 0.05];
        offsets[10] = [0.12, 0.0, -0.05];
        offsets[11] = [0.12, 0.0, -0.05];
        offsets[NECK] = [0.0, 0.0, 0.18];
        offsets[L_COLLAR] = [0.0, 0.06, 0.12];
        offsets[R_COLLAR] = [0.0, -0.06, 0.12];
        offsets[15] = [0.0, 0.0, 0.10];
        offsets[L_SHOULDER] = [0.0, 0.10, 0.0];
        offsets[R_SHOULDER] = [0.0, -0.10, 0.0];
        offsets[L_ELBOW] = [0.0, 0.0, -0.22];
        offsets[R_ELBOW] = [0.0, 0.0, -0.22];
        offsets[L_WRIST] = [0.0, 0.0, -0.22];
        offsets[R_WRIST] = [0.0, 0.0, -0.22];
        offsets[22] = [0.0, 0.0, -0.08];
        offsets[23] = [0.0, 0.0, -0.08];

        let mut joint_limits = [[(-2.5, 2.5); 3]; JOINT_COUNT];
        joint_limits[PELVIS] = [(-PI, PI); 3];
        joint_limits[L_HIP] = [(-1.6, 1.6); 3];
        joint_limits[R_HIP] = [(-1.6, 1.6); 3];
        for knee in [L_KNEE, R_KNEE] {
            joint_limits[knee] = [(-0.3, 0.3), (-0.1, 2.6), (-0.3, 0.3)];
        }

        Self {
            offsets,
            joint_limits,
            velocity_limits: [20.0; JOINT_COUNT],
            sole_height: 0.05,
            hand: HandCalibration::default(),
        }
    }
}

fn norm(v: Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

impl HumanoidModel {
    pub fn check(&self) -> Result<(), ModelError> {
        for (j, limits) in self.joint_limits.iter().enumerate() {
            for (axis, (lo, hi)) in limits.iter().enumerate() {
                if !(lo <= hi) {
                    return Err(ModelError::Invalid(format!(
                        "joint {j} axis {axis} limits ({lo}, {hi}) are not ordered"
                    )));
                }
            }
        }
        for j in LIMB_JOINTS {
            if !(norm(self.offsets[j]) > 0.0) {
                return Err(ModelError::Invalid(format!("joint {j} has zero link length")));
            }
        }
        if let Some(j) = self.velocity_limits.iter().position(|v| !(*v > 0.0)) {
            return Err(ModelError::Invalid(format!(
                "joint {j} velocity limit must be positive"
            )));
        }
        if !(self.sole_height >= 0.0) {
            return Err(ModelError::Invalid("sole height must be non-negative".into()));
        }
        self.hand
            .check()
            .map_err(|e| ModelError::Invalid(e.to_string()))
    }

    pub fn thigh_length(&self) -> f64 {
        norm(self.offsets[L_KNEE])
    }

    pub fn shin_length(&self) -> f64 {
        norm(self.offsets[L_ANKLE])
    }

    pub fn arm_length(&self) -> f64 {
        norm(self.offsets[R_ELBOW]) + norm(self.offsets[R_WRIST])
    }

    /// Pelvis height at which straight legs put the ankles at sole height.
    pub fn standing_pelvis_height(&self) -> f64 {
        self.sole_height - self.offsets[L_HIP][2] + self.thigh_length() + self.shin_length()
    }

    /// Offset from pelvis to the right shoulder joint with a neutral spine.
    pub fn pelvis_to_right_shoulder(&self) -> Vec3 {
        let mut p = [0.0; 3];
        for j in [SPINE1, SPINE2, SPINE3, R_COLLAR, R_SHOULDER] {
            for (acc, o) in p.iter_mut().zip(self.offsets[j]) {
                *acc += o;
            }
        }
        p
    }

    /// Applies `key = value` overrides from a model file on top of the
    /// defaults. Recognised keys: `sole_height`, `offset.<j>` (x,y,z),
    /// `limit.<j>.<axis>` (lo,hi), `velocity_limit.<j>`, `hand.max_speed`.
    pub fn from_kv(doc: &KvDoc) -> Result<Self, ModelError> {
        let mut model = HumanoidModel::default();
        for key in doc.keys() {
            let list = doc.get_list(key)?.unwrap_or_default();
            let bad = || ModelError::Invalid(format!("bad model entry {key:?}"));
            let joint = |s: &str| -> Result<usize, ModelError> {
                s.parse::<usize>()
                    .ok()
                    .filter(|j| *j < JOINT_COUNT)
                    .ok_or_else(bad)
            };
            let parts: Vec<&str> = key.split('.').collect();
            match parts.as_slice() {
                ["sole_height"] if list.len() == 1 => model.sole_height = list[0],
                ["hand", "max_speed"] if list.len() == 1 => model.hand.max_joint_speed = list[0],
                ["offset", j] if list.len() == 3 => {
                    model.offsets[joint(j)?] = [list[0], list[1], list[2]]
                }
                ["limit", j, axis] if list.len() == 2 => {
                    let axis: usize = axis.parse().ok().filter(|a| *a < 3).ok_or_else(bad)?;
                    model.joint_limits[joint(j)?][axis] = (list[0], list[1]);
                }
                ["velocity_limit", j] if list.len() == 1 => {
                    model.velocity_limits[joint(j)?] = list[0]
                }
                _ => return Err(bad()),
            }
        }
        model.check()?;
        Ok(model)
    }
}

/// World positions of all 24 joints.
pub fn forward_kinematics(
    model: &HumanoidModel,
    root_position: Vec3,
    rotations: &[[f64; 3]; JOINT_COUNT],
) -> [Vec3; JOINT_COUNT] {
    let mut global_rot = [Matrix3::<f64>::identity(); JOINT_COUNT];
    let mut pos = [Vector3::<f64>::zeros(); JOINT_COUNT];
    for j in 0..JOINT_COUNT {
        let local = *to_matrix(rotations[j]).matrix();
        match SMPL_PARENTS[j] {
            None => {
                global_rot[j] = local;
                pos[j] = Vector3::from(root_position);
            }
            Some(p) => {
                pos[j] = pos[p] + global_rot[p] * Vector3::from(model.offsets[j]);
                global_rot[j] = global_rot[p] * local;
            }
        }
    }
    pos.map(|p| [p.x, p.y, p.z])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_model_is_valid() {
        HumanoidModel::default().check().unwrap();
    }

    #[test]
    fn rest_pose_heights() {
        let m = HumanoidModel::default();
        let h = m.standing_pelvis_height();
        assert!((h - 0.84).abs() < 1e-12);
        let p = forward_kinematics(&m, [0.0, 0.0, h], &[[0.0; 3]; JOINT_COUNT]);
        assert!((p[L_ANKLE][2] - m.sole_height).abs() < 1e-12);
        assert!((p[R_ANKLE][2] - m.sole_height).abs() < 1e-12);
        let shoulder = m.pelvis_to_right_shoulder();
        assert!((p[R_SHOULDER][2] - (h + shoulder[2])).abs() < 1e-12);
        assert!((p[R_WRIST][2] - (h + shoulder[2] - m.arm_length())).abs() < 1e-12);
    }

    #[test]
    fn shoulder_pitch_raises_arm_forward() {
        let m = HumanoidModel::default();
        let mut rot = [[0.0; 3]; JOINT_COUNT];
        rot[R_SHOULDER] = [0.0, -std::f64::consts::FRAC_PI_2, 0.0];
        let p = forward_kinematics(&m, [0.0, 0.0, 1.0], &rot);
        let s = p[R_SHOULDER];
        assert!((p[R_WRIST][0] - s[0] - 0.44).abs() < 1e-12);
        assert!((p[R_WRIST][2] - s[2]).abs() < 1e-12);
    }

    #[test]
    fn model_file_overrides() {
        let doc = KvDoc::parse("sole_height = 0.06\nlimit.4.1 = 0, 2\noffset.4 = 0,0,-0.4").unwrap();
        let m = HumanoidModel::from_kv(&doc).unwrap();
        assert_eq!(m.sole_height, 0.06);
        assert_eq!(m.joint_limits[4][1], (0.0, 2.0));
        assert_eq!(m.offsets[4], [0.0, 0.0, -0.4]);
        assert!(HumanoidModel::from_kv(&KvDoc::parse("offset.4 = 0,0,0").unwrap()).is_err());
        assert!(HumanoidModel::from_kv(&KvDoc::parse("limit.3.0 = 1,-1").unwrap()).is_err());
        assert!(HumanoidModel::from_kv(&KvDoc::parse("bogus = 1").unwrap()).is_err());
    }
}
