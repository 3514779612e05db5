use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bridge::{CodecError, RobotCommandFrame};
use crate::exec::Exec;
use crate::motion::rotation::angle_between;
use crate::motion::{GraspState, Vec3, JOINT_COUNT};

use super::model::{forward_kinematics, HumanoidModel, L_ANKLE, L_WRIST, R_ANKLE, R_WRIST};

/// Ankle clearance above sole height below which a foot counts as planted.
pub const STANCE_CLEARANCE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub height_tol: f64,
    pub dist_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            height_tol: 0.03,
            dist_tol: 0.10,
        }
    }
}

/// What the replay is measured against.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    /// Declared final pelvis position in the ground plane (x, y).
    pub target_position: Option<[f64; 2]>,
    /// Wrist height for each expected grasp event, in order.
    pub grasp_heights: Vec<f64>,
    pub tolerances: Tolerances,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FailureClass {
    Success,
    ExecutionHeight,
    ExecutionDistance,
    InfeasibleLimits,
    StreamFault,
}

impl FailureClass {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureClass::Success => "SUCCESS",
            FailureClass::ExecutionHeight => "EXECUTION_HEIGHT",
            FailureClass::ExecutionDistance => "EXECUTION_DISTANCE",
            FailureClass::InfeasibleLimits => "INFEASIBLE_LIMITS",
            FailureClass::StreamFault => "STREAM_FAULT",
        }
    }
}

impl fmt::Display for FailureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    JointLimit,
    JointVelocity,
}

/// One entry per offending frame and kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameViolation {
    pub frame: usize,
    pub kind: ViolationKind,
    pub joints: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspEvent {
    pub frame: usize,
    pub side: Side,
    pub wrist_height: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandHeightError {
    pub event_index: usize,
    pub error: f64,
}

/// Per-frame terms; report totals are sums over these rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub frame: usize,
    pub timestamp_s: f64,
    pub pelvis: Vec3,
    pub left_ankle_z: f64,
    pub right_ankle_z: f64,
    pub left_wrist_z: f64,
    pub right_wrist_z: f64,
    pub left_stance: bool,
    pub right_stance: bool,
    /// Horizontal stance-foot displacement since the previous frame.
    pub foot_slide: f64,
    pub limit_violations: usize,
    pub velocity_violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub frames: usize,
    pub violations: Vec<FrameViolation>,
    pub foot_slide_total: f64,
    pub final_position_error: f64,
    pub grasp_events: Vec<GraspEvent>,
    pub hand_height_errors: Vec<HandHeightError>,
    /// Declared grasp heights with no matching event.
    pub missed_grasp_events: usize,
    pub stream_fault: Option<String>,
    pub classification: FailureClass,
    pub per_frame: Vec<FrameMetrics>,
}

impl FeasibilityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Flat per-frame table, comma separated with a header row.
    pub fn write_table<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "frame,timestamp_s,pelvis_x,pelvis_y,pelvis_z,left_ankle_z,right_ankle_z,\
             left_wrist_z,right_wrist_z,left_stance,right_stance,foot_slide,\
             limit_violations,velocity_violations"
        )?;
        for m in &self.per_frame {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                m.frame,
                m.timestamp_s,
                m.pelvis[0],
                m.pelvis[1],
                m.pelvis[2],
                m.left_ankle_z,
                m.right_ankle_z,
                m.left_wrist_z,
                m.right_wrist_z,
                u8::from(m.left_stance),
                u8::from(m.right_stance),
                m.foot_slide,
                m.limit_violations,
                m.velocity_violations
            )?;
        }
        Ok(())
    }
}

/// Metrics that feed classification.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClassifyInput {
    pub stream_fault: bool,
    pub violation_count: usize,
    pub hand_height_errors: Vec<f64>,
    pub missed_grasp_events: usize,
    pub final_position_error: f64,
}

/// STREAM_FAULT > INFEASIBLE_LIMITS > EXECUTION_HEIGHT > EXECUTION_DISTANCE >
/// SUCCESS. A declared grasp that never happened counts as a height failure.
pub fn classify(input: &ClassifyInput, tol: &Tolerances) -> FailureClass {
    if input.stream_fault {
        FailureClass::StreamFault
    } else if input.violation_count > 0 {
        FailureClass::InfeasibleLimits
    } else if input.missed_grasp_events > 0
        || input
            .hand_height_errors
            .iter()
            .any(|e| !(e.abs() <= tol.height_tol))
    {
        FailureClass::ExecutionHeight
    } else if !(input.final_position_error <= tol.dist_tol) {
        FailureClass::ExecutionDistance
    } else {
        FailureClass::Success
    }
}

struct Kinematics {
    pelvis: Vec3,
    ankles: [Vec3; 2],
    wrists: [Vec3; 2],
    limit_joints: Vec<usize>,
}

fn frame_kinematics(model: &HumanoidModel, frame: &RobotCommandFrame) -> Kinematics {
    let mut rot = [[0.0; 3]; JOINT_COUNT];
    let mut limit_joints = Vec::new();
    for (j, r) in rot.iter_mut().enumerate() {
        *r = frame.rotation_f64(j);
        let out = r
            .iter()
            .zip(&model.joint_limits[j])
            .any(|(v, (lo, hi))| !(lo..=hi).contains(&v));
        if out {
            limit_joints.push(j);
        }
    }
    let pos = forward_kinematics(model, frame.root_position_f64(), &rot);
    Kinematics {
        pelvis: pos[0],
        ankles: [pos[L_ANKLE], pos[R_ANKLE]],
        wrists: [pos[L_WRIST], pos[R_WRIST]],
        limit_joints,
    }
}

fn horizontal(a: Vec3, b: Vec3) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn in_stance(model: &HumanoidModel, ankle: Vec3) -> bool {
    ankle[2] < model.sole_height + STANCE_CLEARANCE
}

/// Sum of horizontal ankle displacement between consecutive frames in which
/// that foot is planted.
pub fn foot_slide_metric(frames: &[RobotCommandFrame], model: &HumanoidModel) -> f64 {
    let kin = Exec::default().map_slice(frames, |f| frame_kinematics(model, f));
    kin.windows(2)
        .map(|w| slide_between(model, &w[0], &w[1]))
        .sum()
}

fn slide_between(model: &HumanoidModel, prev: &Kinematics, cur: &Kinematics) -> f64 {
    (0..2)
        .filter(|&s| in_stance(model, prev.ankles[s]) && in_stance(model, cur.ankles[s]))
        .map(|s| horizontal(prev.ankles[s], cur.ankles[s]))
        .sum()
}

pub fn replay<I>(source: I, model: &HumanoidModel, spec: &TargetSpec) -> FeasibilityReport
where
    I: IntoIterator<Item = Result<RobotCommandFrame, CodecError>>,
{
    replay_with(source, model, spec, Exec::default())
}

/// Replays frames in order. A decode error or a non-increasing timestamp
/// stops the replay; metrics up to that point are kept.
pub fn replay_with<I>(
    source: I,
    model: &HumanoidModel,
    spec: &TargetSpec,
    exec: Exec,
) -> FeasibilityReport
where
    I: IntoIterator<Item = Result<RobotCommandFrame, CodecError>>,
{
    let mut frames = Vec::new();
    let mut fault = None;
    for item in source {
        match item {
            Ok(f) => {
                if let Some(prev) = frames.last() {
                    let prev: &RobotCommandFrame = prev;
                    if !(f.timestamp_s > prev.timestamp_s) {
                        fault = Some(format!(
                            "frame {}: timestamp {} does not increase",
                            frames.len(),
                            f.timestamp_s
                        ));
                        break;
                    }
                }
                frames.push(f);
            }
            Err(e) => {
                fault = Some(format!("frame {}: {e}", frames.len()));
                break;
            }
        }
    }

    let kin = exec.map_slice(&frames, |f| frame_kinematics(model, f));

    let mut violations = Vec::new();
    let mut per_frame = Vec::with_capacity(frames.len());
    let mut grasp_events = Vec::new();
    let mut hand_state = [None::<GraspState>; 2];
    for (i, (frame, k)) in frames.iter().zip(&kin).enumerate() {
        if !k.limit_joints.is_empty() {
            violations.push(FrameViolation {
                frame: i,
                kind: ViolationKind::JointLimit,
                joints: k.limit_joints.clone(),
            });
        }
        let mut fast = Vec::new();
        let mut slide = 0.0;
        if i > 0 {
            let prev = &frames[i - 1];
            let dt = frame.timestamp_s - prev.timestamp_s;
            for j in 0..JOINT_COUNT {
                let speed = angle_between(prev.rotation_f64(j), frame.rotation_f64(j)) / dt;
                if speed > model.velocity_limits[j] {
                    fast.push(j);
                }
            }
            slide = slide_between(model, &kin[i - 1], k);
        }
        let velocity_violations = fast.len();
        if !fast.is_empty() {
            violations.push(FrameViolation {
                frame: i,
                kind: ViolationKind::JointVelocity,
                joints: fast,
            });
        }

        let hands = [&frame.left_hand, &frame.right_hand];
        for (s, side) in [Side::Left, Side::Right].into_iter().enumerate() {
            let joints = hands[s].map(f64::from);
            let state = model.hand.nearest_state(&joints);
            if state == GraspState::Closed && hand_state[s] != Some(GraspState::Closed) {
                grasp_events.push(GraspEvent {
                    frame: i,
                    side,
                    wrist_height: k.wrists[s][2],
                });
            }
            hand_state[s] = Some(state);
        }

        per_frame.push(FrameMetrics {
            frame: i,
            timestamp_s: frame.timestamp_s,
            pelvis: k.pelvis,
            left_ankle_z: k.ankles[0][2],
            right_ankle_z: k.ankles[1][2],
            left_wrist_z: k.wrists[0][2],
            right_wrist_z: k.wrists[1][2],
            left_stance: in_stance(model, k.ankles[0]),
            right_stance: in_stance(model, k.ankles[1]),
            foot_slide: slide,
            limit_violations: k.limit_joints.len(),
            velocity_violations,
        });
    }

    let foot_slide_total = per_frame.iter().map(|m| m.foot_slide).sum();
    let final_position_error = match (spec.target_position, kin.last()) {
        (Some(t), Some(k)) => (k.pelvis[0] - t[0]).hypot(k.pelvis[1] - t[1]),
        _ => 0.0,
    };
    let hand_height_errors: Vec<HandHeightError> = grasp_events
        .iter()
        .zip(&spec.grasp_heights)
        .enumerate()
        .map(|(event_index, (e, target))| HandHeightError {
            event_index,
            error: e.wrist_height - target,
        })
        .collect();
    let missed_grasp_events = spec.grasp_heights.len().saturating_sub(grasp_events.len());

    let classification = classify(
        &ClassifyInput {
            stream_fault: fault.is_some(),
            violation_count: violations.len(),
            hand_height_errors: hand_height_errors.iter().map(|h| h.error).collect(),
            missed_grasp_events,
            final_position_error,
        },
        &spec.tolerances,
    );

    FeasibilityReport {
        frames: frames.len(),
        violations,
        foot_slide_total,
        final_position_error,
        grasp_events,
        hand_height_errors,
        missed_grasp_events,
        stream_fault: fault,
        classification,
        per_frame,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standing(model: &HumanoidModel, n: usize) -> Vec<RobotCommandFrame> {
        (0..n)
            .map(|i| {
                let mut f = RobotCommandFrame::zeroed();
                f.frame_index = i as u32;
                f.timestamp_s = i as f64 / 50.0;
                f.root_position = [0.0, 0.0, model.standing_pelvis_height() as f32];
                f
            })
            .collect()
    }

    #[test]
    fn stationary_is_clean() {
        let model = HumanoidModel::default();
        let frames = standing(&model, 20);
        let spec = TargetSpec {
            target_position: Some([0.0, 0.0]),
            ..Default::default()
        };
        let r = replay(frames.into_iter().map(Ok), &model, &spec);
        assert_eq!(r.frames, 20);
        assert!(r.violations.is_empty());
        assert_eq!(r.foot_slide_total, 0.0);
        assert_eq!(r.final_position_error, 0.0);
        assert_eq!(r.classification, FailureClass::Success);
        assert!(r.per_frame.iter().all(|m| m.left_stance && m.right_stance));
    }

    #[test]
    fn stance_slide_sums_displacement() {
        let model = HumanoidModel::default();
        let mut frames = standing(&model, 11);
        for (i, f) in frames.iter_mut().enumerate() {
            f.root_position[0] = (0.002 * i as f64) as f32;
        }
        // Both feet planted and sliding 2 cm each.
        let slide = foot_slide_metric(&frames, &model);
        assert!((slide - 0.04).abs() < 1e-6, "{slide}");
    }

    #[test]
    fn airborne_motion_is_not_slide() {
        let model = HumanoidModel::default();
        let mut frames = standing(&model, 11);
        for (i, f) in frames.iter_mut().enumerate() {
            f.root_position[0] = (0.01 * i as f64) as f32;
            f.root_position[2] += 0.2;
        }
        assert_eq!(foot_slide_metric(&frames, &model), 0.0);
    }

    #[test]
    fn codec_error_is_stream_fault_with_partial_metrics() {
        let model = HumanoidModel::default();
        let frames = standing(&model, 5);
        let mut source: Vec<Result<RobotCommandFrame, CodecError>> =
            frames.into_iter().map(Ok).collect();
        source.push(Err(CodecError::Length {
            expected: 374,
            actual: 3,
        }));
        let r = replay(source, &model, &TargetSpec::default());
        assert_eq!(r.frames, 5);
        assert_eq!(r.classification, FailureClass::StreamFault);
        assert!(r.stream_fault.is_some());
    }

    #[test]
    fn limit_violation_recorded_once_per_frame() {
        let model = HumanoidModel::default();
        let mut frames = standing(&model, 6);
        frames[3].rotations[4] = [1.0, 0.0, 0.0];
        frames[3].rotations[5] = [1.0, 0.0, 0.0];
        let r = replay(frames.into_iter().map(Ok), &model, &TargetSpec::default());
        let limits: Vec<_> = r
            .violations
            .iter()
            .filter(|v| v.kind == ViolationKind::JointLimit)
            .collect();
        assert_eq!(limits.len(), 1);
        assert_eq!(limits[0].frame, 3);
        assert_eq!(limits[0].joints, vec![4, 5]);
        assert_eq!(r.classification, FailureClass::InfeasibleLimits);
    }

    #[test]
    fn classification_precedence() {
        let tol = Tolerances::default();
        let mut input = ClassifyInput {
            hand_height_errors: vec![-0.05],
            violation_count: 2,
            ..Default::default()
        };
        assert_eq!(classify(&input, &tol), FailureClass::InfeasibleLimits);
        input.violation_count = 0;
        assert_eq!(classify(&input, &tol), FailureClass::ExecutionHeight);
        input.hand_height_errors = vec![0.01];
        input.final_position_error = 0.2;
        assert_eq!(classify(&input, &tol), FailureClass::ExecutionDistance);
        input.final_position_error = 0.05;
        assert_eq!(classify(&input, &tol), FailureClass::Success);
        input.stream_fault = true;
        input.violation_count = 1;
        assert_eq!(classify(&input, &tol), FailureClass::StreamFault);
    }

    #[test]
    fn grasp_event_height() {
        let model = HumanoidModel::default();
        let mut frames = standing(&model, 4);
        frames[2].right_hand = model.hand.closed_pose.to_f32();
        frames[3].right_hand = model.hand.closed_pose.to_f32();
        let spec = TargetSpec {
            grasp_heights: vec![0.80],
            ..Default::default()
        };
        let r = replay(frames.into_iter().map(Ok), &model, &spec);
        assert_eq!(r.grasp_events.len(), 1);
        assert_eq!(r.grasp_events[0].frame, 2);
        assert_eq!(r.grasp_events[0].side, Side::Right);
        // Hanging wrist sits at 1.23 - 0.44 = 0.79.
        assert!((r.hand_height_errors[0].error + 0.01).abs() < 1e-6);
        assert_eq!(r.classification, FailureClass::Success);
    }
}
