use proptest::prelude::*;

use exo_core::bridge::{build_frames, RobotCommandFrame};
use exo_core::estimation::{quantize_states, synthetic_oracle, OracleConfig, ScenarioScript};
use exo_core::exec::Exec;
use exo_core::motion::{FacingMode, FrameClock, InteractionAwareMotion, JOINT_COUNT};
use exo_core::sim::{replay, replay_with, FailureClass, HumanoidModel, TargetSpec, ViolationKind};

fn walk(seconds: f64, speed: f64) -> Vec<RobotCommandFrame> {
    let model = HumanoidModel::default();
    let clock = FrameClock::new(24.0, (seconds * 24.0).round() as usize + 1).unwrap();
    let out = synthetic_oracle(
        &OracleConfig::new(ScenarioScript::WalkLine { speed }),
        clock,
        FacingMode::Front,
        &model,
    )
    .unwrap();
    let states = quantize_states(&out.hands, 0.7, 0.3).unwrap();
    let m = InteractionAwareMotion {
        body: out.body,
        hands: out.hands,
        states,
        source_fps: 24.0,
    };
    build_frames(&m, 50.0, &model.hand).unwrap()
}

fn standing(n: usize) -> Vec<RobotCommandFrame> {
    let h = HumanoidModel::default().standing_pelvis_height() as f32;
    (0..n)
        .map(|i| {
            let mut f = RobotCommandFrame::zeroed();
            f.frame_index = i as u32;
            f.timestamp_s = i as f64 / 50.0;
            f.root_position = [0.0, 0.0, h];
            f
        })
        .collect()
}

fn run(frames: &[RobotCommandFrame], exec: Exec) -> exo_core::sim::FeasibilityReport {
    replay_with(frames.iter().copied().map(Ok), &HumanoidModel::default(), &TargetSpec::default(), exec)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn replay_is_deterministic_across_modes(seconds in 1.0f64..6.0, speed in 0.2f64..1.2) {
        let frames = walk(seconds, speed);
        let a = run(&frames, Exec::Sequential);
        prop_assert_eq!(&a, &run(&frames, Exec::Sequential));
        prop_assert_eq!(a.to_json(), run(&frames, Exec::Parallel).to_json());
    }

    #[test]
    fn slide_is_additive_over_splits(seconds in 1.0f64..6.0, speed in 0.2f64..1.2, cut in 0.0f64..1.0) {
        let frames = walk(seconds, speed);
        let k = ((frames.len() - 1) as f64 * cut) as usize;
        let whole = run(&frames, Exec::Sequential).foot_slide_total;
        let mut tail = frames[k..].to_vec();
        // Timestamps only need to increase.
        tail.iter_mut().enumerate().for_each(|(i, f)| f.timestamp_s = i as f64 / 50.0);
        let left = run(&frames[..=k], Exec::Sequential).foot_slide_total;
        let right = run(&tail, Exec::Sequential).foot_slide_total;
        prop_assert!((whole - (left + right)).abs() <= 1e-12 * (1.0 + whole), "{whole} vs {left} + {right}");
    }

    #[test]
    fn injected_limit_is_reported_exactly(
        n in 3usize..60,
        at in any::<prop::sample::Index>(),
        joint in 1usize..JOINT_COUNT,
        axis in 0usize..3,
        over in 0.01f64..0.3,
        below in any::<bool>(),
    ) {
        let model = HumanoidModel::default();
        let mut frames = standing(n);
        let i = at.index(n);
        let (lo, hi) = model.joint_limits[joint][axis];
        frames[i].rotations[joint][axis] = if below { lo - over } else { hi + over } as f32;
        let r = run(&frames, Exec::Sequential);
        let limits: Vec<(usize, Vec<usize>)> = r
            .violations
            .iter()
            .filter(|v| v.kind == ViolationKind::JointLimit)
            .map(|v| (v.frame, v.joints.clone()))
            .collect();
        prop_assert_eq!(limits, vec![(i, vec![joint])]);
        prop_assert_eq!(r.classification, FailureClass::InfeasibleLimits);
        prop_assert_eq!(r.per_frame[i].limit_violations, 1);
    }
}

#[test]
fn zero_motion_is_clean_success() {
    let frames = standing(200);
    let spec = TargetSpec {
        target_position: Some([0.0, 0.0]),
        ..TargetSpec::default()
    };
    let r = replay(frames.iter().copied().map(Ok), &HumanoidModel::default(), &spec);
    assert_eq!(r.classification, FailureClass::Success);
    assert_eq!(r.frames, 200);
    assert_eq!(r.foot_slide_total, 0.0);
    assert_eq!(r.final_position_error, 0.0);
    assert!(r.violations.is_empty());
    assert!(r.grasp_events.is_empty());
    assert!(r.per_frame.iter().all(|m| m.left_stance && m.right_stance));
}

#[test]
fn non_increasing_timestamp_faults() {
    let mut frames = standing(10);
    frames[6].timestamp_s = frames[5].timestamp_s;
    let r = run(&frames, Exec::Sequential);
    assert_eq!(r.classification, FailureClass::StreamFault);
    assert_eq!(r.frames, 6);
}
