//! Kinematic replay of command streams on a simplified humanoid: feasibility
//! checks, execution-error metrics and failure classification.

pub mod model;
pub mod replay;

pub use model::{forward_kinematics, HumanoidModel, ModelError, SMPL_PARENTS};
pub use replay::{
    classify, foot_slide_metric, replay, replay_with, ClassifyInput, FailureClass,
    FeasibilityReport, FrameMetrics, FrameViolation, GraspEvent, HandHeightError, Side,
    TargetSpec, Tolerances, ViolationKind, STANCE_CLEARANCE,
};
