use crate::exec::Exec;

use super::rotation::{lerp, lerp3, slerp};
use super::{
    BodyMotionSequence, FrameClock, HandPoseDescriptor, HandPoseSequence, InteractionAwareMotion,
    InteractionStateSequence, JointFrame, MotionError, JOINT_COUNT,
};

/// Largest duration gap tolerated between streams being synchronized.
pub const SYNC_TOLERANCE_S: f64 = 0.5;

// Absorbs float noise in duration * fps before flooring.
const FLOOR_SLACK: f64 = 1e-9;

/// Where an output sample falls on the source frame grid.
#[derive(Clone, Copy, Debug)]
struct SamplePoint {
    lower: usize,
    upper: usize,
    frac: f64,
    nearest: usize,
}

impl SamplePoint {
    fn at(position: f64, frame_count: usize) -> Self {
        let last = frame_count - 1;
        let pos = position.clamp(0.0, last as f64);
        let lower = (pos.floor() as usize).min(last);
        let upper = (lower + 1).min(last);
        let frac = if lower == upper { 0.0 } else { pos - lower as f64 };
        let nearest = ((pos + 0.5).floor() as usize).min(last);
        Self {
            lower,
            upper,
            frac,
            nearest,
        }
    }
}

fn output_frame_count(duration_s: f64, fps_out: f64) -> usize {
    (duration_s * fps_out + FLOOR_SLACK).floor() as usize + 1
}

/// Sample points for an output clock laid over a source clock; frame `j` of
/// the output sits at time `j / out.fps`.
fn plan(src: FrameClock, out: FrameClock) -> Vec<SamplePoint> {
    let ratio = src.fps / out.fps;
    (0..out.frame_count)
        .map(|j| SamplePoint::at(j as f64 * ratio, src.frame_count))
        .collect()
}

fn sample_body(
    body: &BodyMotionSequence,
    out: FrameClock,
    points: &[SamplePoint],
    exec: Exec,
) -> BodyMotionSequence {
    let frames: Vec<(JointFrame, [f64; 3])> = exec.map_slice(points, |p| {
        let a = &body.joint_rotations[p.lower];
        let b = &body.joint_rotations[p.upper];
        let mut joints = [[0.0; 3]; JOINT_COUNT];
        for j in 0..JOINT_COUNT {
            joints[j] = slerp(a[j], b[j], p.frac);
        }
        let pos = lerp3(
            body.root_positions[p.lower],
            body.root_positions[p.upper],
            p.frac,
        );
        (joints, pos)
    });
    let (joint_rotations, root_positions) = frames.into_iter().unzip();
    BodyMotionSequence {
        clock: out,
        joint_rotations,
        root_positions,
    }
}

fn lerp_unit(a: f64, b: f64, t: f64) -> f64 {
    lerp(a, b, t).clamp(a.min(b), a.max(b))
}

fn sample_hands(
    hands: &HandPoseSequence,
    out: FrameClock,
    points: &[SamplePoint],
    exec: Exec,
) -> HandPoseSequence {
    let columns = exec.map_slice(points, |p| {
        let a = &hands.columns[p.lower];
        let b = &hands.columns[p.upper];
        let mix = |c: usize| HandPoseDescriptor {
            wrist_rotation: slerp(a[c].wrist_rotation, b[c].wrist_rotation, p.frac),
            aperture: lerp_unit(a[c].aperture, b[c].aperture, p.frac),
            confidence: lerp_unit(a[c].confidence, b[c].confidence, p.frac),
        };
        [mix(0), mix(1)]
    });
    HandPoseSequence {
        clock: out,
        columns,
        facing: hands.facing,
    }
}

fn sample_states(
    states: &InteractionStateSequence,
    out: FrameClock,
    points: &[SamplePoint],
) -> InteractionStateSequence {
    InteractionStateSequence {
        clock: out,
        states: points.iter().map(|p| states.states[p.nearest]).collect(),
    }
}

/// Resamples every stream to `fps_out`.
///
/// Rotations use shortest-arc slerp, positions and hand scalars linear
/// interpolation, grasp states nearest neighbour. The output covers
/// `floor(duration * fps_out) + 1` frames. A single-frame input yields a
/// single-frame copy at the new rate.
pub fn resample(
    seq: &InteractionAwareMotion,
    fps_out: f64,
) -> Result<InteractionAwareMotion, MotionError> {
    resample_with(seq, fps_out, Exec::default())
}

pub fn resample_with(
    seq: &InteractionAwareMotion,
    fps_out: f64,
    exec: Exec,
) -> Result<InteractionAwareMotion, MotionError> {
    if !(fps_out.is_finite() && fps_out > 0.0) {
        return Err(MotionError::InvalidArgument(format!(
            "output fps must be positive, got {fps_out}"
        )));
    }
    let src = seq.clock();
    if fps_out == src.fps {
        return Ok(seq.clone());
    }
    let out = FrameClock::new(fps_out, output_frame_count(src.duration_s(), fps_out))?;
    let points = plan(src, out);
    Ok(InteractionAwareMotion {
        body: sample_body(&seq.body, out, &points, exec),
        hands: sample_hands(&seq.hands, out, &points, exec),
        states: sample_states(&seq.states, out, &points),
        source_fps: seq.source_fps,
    })
}

fn check_gap(
    a_name: &str,
    a: FrameClock,
    b_name: &str,
    b: FrameClock,
) -> Result<(), MotionError> {
    let gap = (a.duration_s() - b.duration_s()).abs();
    if gap > SYNC_TOLERANCE_S {
        return Err(MotionError::Sync {
            a: format!("{a_name} {:.3} s", a.duration_s()),
            b: format!("{b_name} {:.3} s", b.duration_s()),
            gap_s: gap,
        });
    }
    Ok(())
}

/// Puts hands and states on the body clock. The body stream is the timing
/// master; the other streams are sampled at the body frame times, clamped to
/// their own extent.
pub fn synchronize(
    body: &BodyMotionSequence,
    hands: &HandPoseSequence,
    states: &InteractionStateSequence,
) -> Result<InteractionAwareMotion, MotionError> {
    check_gap("body", body.clock, "hands", hands.clock)?;
    check_gap("body", body.clock, "states", states.clock)?;
    check_gap("hands", hands.clock, "states", states.clock)?;

    let master = body.clock;
    let hands_out = if hands.clock == master {
        hands.clone()
    } else {
        sample_hands(hands, master, &plan(hands.clock, master), Exec::default())
    };
    let states_out = if states.clock == master {
        states.clone()
    } else {
        sample_states(states, master, &plan(states.clock, master))
    };
    Ok(InteractionAwareMotion {
        body: body.clone(),
        hands: hands_out,
        states: states_out,
        source_fps: hands.clock.fps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{FacingMode, HandPoseDescriptor};

    fn motion(fps: f64, frames: usize, rot: impl Fn(usize) -> [f64; 3]) -> InteractionAwareMotion {
        let clock = FrameClock::new(fps, frames).unwrap();
        let body = BodyMotionSequence::new(
            clock,
            (0..frames)
                .map(|i| {
                    let mut f = [[0.0; 3]; JOINT_COUNT];
                    f[0] = rot(i);
                    f
                })
                .collect(),
            (0..frames).map(|i| [i as f64 / fps, 0.0, 0.9]).collect(),
        )
        .unwrap();
        let hands = HandPoseSequence::new(
            clock,
            vec![[HandPoseDescriptor::open(); 2]; frames],
            FacingMode::Front,
        )
        .unwrap();
        let states = InteractionStateSequence::new(clock, vec![[0, 0]; frames]).unwrap();
        InteractionAwareMotion {
            body,
            hands,
            states,
            source_fps: fps,
        }
    }

    #[test]
    fn frame_count_follows_floor_rule() {
        // floor(10.0 * 50) + 1
        let m = motion(24.0, 241, |_| [0.0; 3]);
        let r = resample(&m, 50.0).unwrap();
        assert_eq!(r.frame_count(), 501);
        assert_eq!(r.body.root_positions[500], m.body.root_positions[240]);
    }

    #[test]
    fn same_rate_is_identity() {
        let m = motion(30.0, 17, |i| [0.0, 0.0, i as f64 * 0.01]);
        assert_eq!(resample(&m, 30.0).unwrap(), m);
    }

    #[test]
    fn slerp_midpoint_frame() {
        let m = motion(10.0, 2, |i| [0.0, 0.0, 0.4 * i as f64]);
        let r = resample(&m, 20.0).unwrap();
        assert_eq!(r.frame_count(), 3);
        assert!((r.body.joint_rotations[1][0][2] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn single_frame_copies() {
        let m = motion(24.0, 1, |_| [0.1, 0.0, 0.0]);
        let r = resample(&m, 50.0).unwrap();
        assert_eq!(r.frame_count(), 1);
        assert_eq!(r.clock().fps, 50.0);
        assert_eq!(r.body.joint_rotations, m.body.joint_rotations);
    }

    #[test]
    fn rejects_non_positive_rate() {
        let m = motion(24.0, 5, |_| [0.0; 3]);
        assert!(matches!(
            resample(&m, 0.0),
            Err(MotionError::InvalidArgument(_))
        ));
        assert!(resample(&m, -3.0).is_err());
        assert!(resample(&m, f64::NAN).is_err());
    }

    #[test]
    fn states_are_never_blended() {
        let mut m = motion(10.0, 4, |_| [0.0; 3]);
        m.states.states = vec![[0, 2], [2, 0], [0, 2], [2, 0]];
        let r = resample(&m, 37.0).unwrap();
        for row in &r.states.states {
            assert!(row.iter().all(|s| *s == 0 || *s == 2));
        }
    }

    #[test]
    fn synchronize_passthrough_and_resample() {
        let m = motion(24.0, 240, |_| [0.0; 3]);
        let s = synchronize(&m.body, &m.hands, &m.states).unwrap();
        assert_eq!(s, m);

        let fast = motion(50.0, 500, |_| [0.0; 3]);
        let s = synchronize(&fast.body, &m.hands, &m.states).unwrap();
        assert_eq!(s.hands.columns.len(), 500);
        assert_eq!(s.hands.clock, fast.body.clock);
        assert_eq!(s.states.clock, fast.body.clock);
        assert_eq!(s.source_fps, 24.0);
    }

    #[test]
    fn synchronize_rejects_wrong_clip() {
        let long = motion(24.0, 241, |_| [0.0; 3]);
        let short = motion(24.0, 121, |_| [0.0; 3]);
        let err = synchronize(&long.body, &short.hands, &short.states).unwrap_err();
        assert!(matches!(err, MotionError::Sync { .. }));
    }
}
