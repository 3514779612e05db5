use std::f64::consts::PI;

use crate::validation::ValidationReport;

use super::rotation::norm;
use super::{FrameClock, InteractionAwareMotion};

// Canonical axis-angle magnitudes may land a few ulps above pi.
const ANGLE_SLACK: f64 = 1e-9;

fn check_clock(report: &mut ValidationReport, field: &str, clock: &FrameClock) {
    if !(clock.fps.is_finite() && clock.fps > 0.0) {
        report.push(field, None, None, format!("fps {} is not positive", clock.fps));
    }
    if clock.frame_count == 0 {
        report.push(field, None, None, "frame_count is zero");
    }
}

fn check_unit(report: &mut ValidationReport, field: &str, frame: usize, col: usize, v: f64) {
    if !(0.0..=1.0).contains(&v) {
        report.push(field, Some(frame), Some(col), format!("{v} outside [0, 1]"));
    }
}

fn check_rotation(
    report: &mut ValidationReport,
    field: &str,
    frame: usize,
    col: Option<usize>,
    v: [f64; 3],
) {
    if v.iter().any(|x| !x.is_finite()) {
        report.push(field, Some(frame), col, format!("non-finite rotation {v:?}"));
    } else if norm(v) > PI + ANGLE_SLACK {
        report.push(
            field,
            Some(frame),
            col,
            format!("rotation magnitude {} exceeds pi", norm(v)),
        );
    }
}

/// Lists every violated invariant of `motion`. Never fails; an empty report
/// means the motion is well formed.
pub fn validate(motion: &InteractionAwareMotion) -> ValidationReport {
    let mut report = ValidationReport::default();
    let body = &motion.body;
    let hands = &motion.hands;
    let states = &motion.states;

    check_clock(&mut report, "body.clock", &body.clock);
    check_clock(&mut report, "hands.clock", &hands.clock);
    check_clock(&mut report, "states.clock", &states.clock);
    if hands.clock != body.clock {
        report.push(
            "hands.clock",
            None,
            None,
            format!("{:?} differs from body clock {:?}", hands.clock, body.clock),
        );
    }
    if states.clock != body.clock {
        report.push(
            "states.clock",
            None,
            None,
            format!("{:?} differs from body clock {:?}", states.clock, body.clock),
        );
    }
    if !(motion.source_fps.is_finite() && motion.source_fps > 0.0) {
        report.push(
            "source_fps",
            None,
            None,
            format!("{} is not positive", motion.source_fps),
        );
    }

    let expect = |field: &str, len: usize, clock: &FrameClock, report: &mut ValidationReport| {
        if len != clock.frame_count {
            report.push(
                field,
                None,
                None,
                format!("{len} rows for {} frames", clock.frame_count),
            );
        }
    };
    expect("joint_rotations", body.joint_rotations.len(), &body.clock, &mut report);
    expect("root_positions", body.root_positions.len(), &body.clock, &mut report);
    expect("hands.columns", hands.columns.len(), &hands.clock, &mut report);
    expect("states", states.states.len(), &states.clock, &mut report);

    for (t, joints) in body.joint_rotations.iter().enumerate() {
        for (j, rot) in joints.iter().enumerate() {
            check_rotation(&mut report, "joint_rotations", t, Some(j), *rot);
        }
    }
    for (t, p) in body.root_positions.iter().enumerate() {
        if p.iter().any(|x| !x.is_finite()) {
            report.push("root_positions", Some(t), None, format!("non-finite {p:?}"));
        }
    }
    for (t, row) in hands.columns.iter().enumerate() {
        for (c, d) in row.iter().enumerate() {
            check_rotation(&mut report, "wrist_rotation", t, Some(c), d.wrist_rotation);
            check_unit(&mut report, "aperture", t, c, d.aperture);
            check_unit(&mut report, "confidence", t, c, d.confidence);
        }
    }
    for (t, row) in states.states.iter().enumerate() {
        for (c, &s) in row.iter().enumerate() {
            if s > 2 {
                report.push("states", Some(t), Some(c), format!("state value {s}"));
            }
        }
    }
    report
}
