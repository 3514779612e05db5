//! Scripted synthetic estimator: closed-form motion with exactly known
//! ground truth.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::motion::rotation::canonicalize;
use crate::motion::{
    BodyMotionSequence, FacingMode, FrameClock, HandPoseDescriptor, HandPoseSequence,
    InteractionStateSequence, JointFrame, Vec3, JOINT_COUNT,
};
use crate::sim::model::{
    HumanoidModel, L_ANKLE, L_HIP, L_KNEE, L_SHOULDER, R_ANKLE, R_HIP, R_KNEE, R_SHOULDER,
};
use crate::sim::TargetSpec;

use super::{EstimationError, EstimatorBackend, VideoClip};

/// Nominal single-support duration; shortened at high speed so the stride
/// stays within reach.
const STEP_TIME_S: f64 = 0.5;
const MAX_STRIDE_M: f64 = 0.6;
const PELVIS_DROP_M: f64 = 0.04;
const FOOT_LIFT_M: f64 = 0.08;
const ARM_SWING_RAD: f64 = 0.15;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScenarioScript {
    Stand,
    WalkLine { speed: f64 },
    WalkTurn { speed: f64, turn_rate: f64 },
    /// Right-hand reach to `grasp_height`, carry to `place_height`, release.
    /// The scripted wrist lands `wrist_offset` away from the nominal height.
    ReachGraspPlace {
        grasp_height: f64,
        place_height: f64,
        wrist_offset: f64,
    },
}

impl ScenarioScript {
    pub fn walk_line() -> Self {
        ScenarioScript::WalkLine { speed: 0.6 }
    }

    pub fn walk_turn() -> Self {
        ScenarioScript::WalkTurn {
            speed: 0.6,
            turn_rate: 0.2,
        }
    }

    pub fn reach_grasp_place() -> Self {
        ScenarioScript::ReachGraspPlace {
            grasp_height: 0.85,
            place_height: 0.95,
            wrist_offset: 0.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioScript::Stand => "STAND",
            ScenarioScript::WalkLine { .. } => "WALK_LINE",
            ScenarioScript::WalkTurn { .. } => "WALK_TURN",
            ScenarioScript::ReachGraspPlace { .. } => "REACH_GRASP_PLACE",
        }
    }

    /// Targets the replay should meet for a clip on `clock`.
    pub fn target_spec(&self, clock: FrameClock) -> TargetSpec {
        let d = clock.duration_s();
        let (target_position, grasp_heights) = match *self {
            ScenarioScript::Stand => (Some([0.0, 0.0]), vec![]),
            ScenarioScript::WalkLine { speed } => (Some([speed * d, 0.0]), vec![]),
            ScenarioScript::WalkTurn { speed, turn_rate } => {
                let p = arc_position(speed, turn_rate, d);
                (Some([p[0], p[1]]), vec![])
            }
            ScenarioScript::ReachGraspPlace { grasp_height, .. } => (Some([0.0, 0.0]), vec![grasp_height]),
        };
        TargetSpec {
            target_position,
            grasp_heights,
            ..Default::default()
        }
    }
}

impl fmt::Display for ScenarioScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ScenarioScript::Stand => write!(f, "STAND"),
            ScenarioScript::WalkLine { speed } => write!(f, "WALK_LINE(speed={speed})"),
            ScenarioScript::WalkTurn { speed, turn_rate } => {
                write!(f, "WALK_TURN(speed={speed},turn_rate={turn_rate})")
            }
            ScenarioScript::ReachGraspPlace {
                grasp_height,
                place_height,
                wrist_offset,
            } => write!(
                f,
                "REACH_GRASP_PLACE(grasp_height={grasp_height},place_height={place_height},wrist_offset={wrist_offset})"
            ),
        }
    }
}

/// `NAME` or `NAME(key=value,...)`; omitted keys take their defaults.
impl FromStr for ScenarioScript {
    type Err = EstimationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (name, args) = match s.split_once('(') {
            Some((n, rest)) => (
                n.trim(),
                rest.strip_suffix(')')
                    .ok_or_else(|| EstimationError::InvalidArgument(format!("unclosed scenario arguments in {s:?}")))?,
            ),
            None => (s, ""),
        };
        let mut kv = Vec::new();
        for part in args.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| EstimationError::InvalidArgument(format!("bad scenario argument {part:?}")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| EstimationError::InvalidArgument(format!("bad number in {part:?}")))?;
            kv.push((k.trim().to_string(), v));
        }
        let mut script = match name {
            "STAND" => ScenarioScript::Stand,
            "WALK_LINE" => ScenarioScript::walk_line(),
            "WALK_TURN" => ScenarioScript::walk_turn(),
            "REACH_GRASP_PLACE" => ScenarioScript::reach_grasp_place(),
            other => return Err(EstimationError::InvalidArgument(format!("unknown scenario {other:?}"))),
        };
        for (k, v) in kv {
            let slot = match (&mut script, k.as_str()) {
                (ScenarioScript::WalkLine { speed }, "speed") => speed,
                (ScenarioScript::WalkTurn { speed, .. }, "speed") => speed,
                (ScenarioScript::WalkTurn { turn_rate, .. }, "turn_rate") => turn_rate,
                (ScenarioScript::ReachGraspPlace { grasp_height, .. }, "grasp_height") => grasp_height,
                (ScenarioScript::ReachGraspPlace { place_height, .. }, "place_height") => place_height,
                (ScenarioScript::ReachGraspPlace { wrist_offset, .. }, "wrist_offset") => wrist_offset,
                _ => {
                    return Err(EstimationError::InvalidArgument(format!(
                        "scenario {name} has no parameter {k:?}"
                    )))
                }
            };
            *slot = v;
        }
        Ok(script)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleConfig {
    pub script: ScenarioScript,
    pub seed: u64,
    /// Amplitude of seeded hand-descriptor noise; 0 gives exact output.
    pub noise: f64,
}

impl OracleConfig {
    pub fn new(script: ScenarioScript) -> Self {
        Self {
            script,
            seed: 0,
            noise: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleOutput {
    pub body: BodyMotionSequence,
    pub hands: HandPoseSequence,
    pub states: InteractionStateSequence,
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Smoothstep from `a` to `b` while `t` runs over `[t0, t1]`.
fn ease(t: f64, t0: f64, t1: f64, a: f64, b: f64) -> f64 {
    if t1 <= t0 {
        return if t < t0 { a } else { b };
    }
    a + (b - a) * smoothstep((t - t0) / (t1 - t0))
}

fn ramp(t: f64, t0: f64, t1: f64, a: f64, b: f64) -> f64 {
    if t1 <= t0 {
        return if t < t0 { a } else { b };
    }
    a + (b - a) * ((t - t0) / (t1 - t0)).clamp(0.0, 1.0)
}

fn arc_position(speed: f64, turn_rate: f64, t: f64) -> Vec3 {
    if turn_rate.abs() < 1e-12 {
        [speed * t, 0.0, 0.0]
    } else {
        let r = speed / turn_rate;
        [r * (turn_rate * t).sin(), r * (1.0 - (turn_rate * t).cos()), 0.0]
    }
}

/// Planar two-link IK in the sagittal plane. `dx` forward and `dz` up from
/// hip to ankle; returns (hip pitch, knee flexion) about +y.
pub fn leg_ik(dx: f64, dz: f64, thigh: f64, shin: f64) -> Result<(f64, f64), EstimationError> {
    let r2 = dx * dx + dz * dz;
    let c = (r2 - thigh * thigh - shin * shin) / (2.0 * thigh * shin);
    if !(-1.0..=1.0).contains(&c) {
        return Err(EstimationError::InvalidArgument(format!(
            "foot target ({dx:.3}, {dz:.3}) is out of leg reach"
        )));
    }
    let knee = c.acos();
    let phi = (-dx).atan2(-dz);
    let hip = phi - (shin * knee.sin()).atan2(thigh + shin * knee.cos());
    Ok((hip, knee))
}

/// Gait timing for a straight-ahead walk at `speed`.
#[derive(Clone, Copy, Debug)]
pub struct Gait {
    pub speed: f64,
    pub step_time: f64,
    pub sole: f64,
    pub lift: f64,
}

impl Gait {
    pub fn new(speed: f64, sole: f64) -> Self {
        let step_time = if speed > 0.0 {
            STEP_TIME_S.min(MAX_STRIDE_M / (2.0 * speed))
        } else {
            STEP_TIME_S
        };
        Self {
            speed,
            step_time,
            sole,
            lift: FOOT_LIFT_M,
        }
    }

    /// Distance along the path and height of a foot's ankle. Side 0 (left)
    /// is planted in even single-support phases, side 1 in odd ones.
    pub fn foot(&self, side: usize, t: f64) -> (f64, f64) {
        let tt = self.step_time;
        let k = (t / tt).floor();
        let u = t / tt - k;
        let stride = self.speed * tt;
        let planted = (k as i64).rem_euclid(2) as usize == side;
        if planted {
            return (stride * (k + 0.5), self.sole);
        }
        let from = stride * (k - 0.5);
        let to = stride * (k + 1.5);
        let s = from + (to - from) * smoothstep((u - 0.2) / 0.6);
        let z = if u < 0.2 {
            self.sole + self.lift * smoothstep(u / 0.2)
        } else if u > 0.8 {
            self.sole + self.lift * smoothstep((1.0 - u) / 0.2)
        } else {
            self.sole + self.lift
        };
        (s, z)
    }
}

fn standing_frame() -> JointFrame {
    [[0.0; 3]; JOINT_COUNT]
}

/// Body pose for a walk in the pelvis frame: legs by IK, arms in
/// counter-swing. Returns rotations and the pelvis height used.
fn walk_pose(model: &HumanoidModel, gait: &Gait, t: f64) -> Result<(JointFrame, f64), EstimationError> {
    let mut rot = standing_frame();
    let pelvis_z = model.standing_pelvis_height() - PELVIS_DROP_M;
    let pelvis_s = gait.speed * t;
    let thigh = model.thigh_length();
    let shin = model.shin_length();
    for (side, (hip, knee, ankle)) in [(L_HIP, L_KNEE, L_ANKLE), (R_HIP, R_KNEE, R_ANKLE)].into_iter().enumerate() {
        let (s, z) = gait.foot(side, t);
        let hip_z = pelvis_z + model.offsets[hip][2];
        let (a, b) = leg_ik(s - pelvis_s - model.offsets[hip][0], z - hip_z, thigh, shin)?;
        rot[hip] = [0.0, a, 0.0];
        rot[knee] = [0.0, b, 0.0];
        rot[ankle] = [0.0, -(a + b), 0.0];
    }
    let swing = ARM_SWING_RAD * (PI * t / gait.step_time).sin();
    rot[L_SHOULDER] = [0.0, swing, 0.0];
    rot[R_SHOULDER] = [0.0, -swing, 0.0];
    Ok((rot, pelvis_z))
}

/// Shoulder pitch that puts a straight right arm's wrist at height `h`.
fn reach_pitch(model: &HumanoidModel, pelvis_z: f64, h: f64) -> Result<f64, EstimationError> {
    let shoulder_z = pelvis_z + model.pelvis_to_right_shoulder()[2];
    let c = (shoulder_z - h) / model.arm_length();
    if !(-1.0..=1.0).contains(&c) {
        return Err(EstimationError::InvalidArgument(format!("wrist height {h} is out of arm reach")));
    }
    Ok(c.acos())
}

struct ReachPlan {
    grasp: f64,
    place: f64,
}

impl ReachPlan {
    /// Right shoulder pitch magnitude at normalized time `x` in [0, 1].
    fn pitch(&self, x: f64) -> f64 {
        if x < 0.3 {
            ease(x, 0.1, 0.3, 0.0, self.grasp)
        } else if x < 0.5 {
            self.grasp
        } else if x < 0.8 {
            ease(x, 0.5, 0.65, self.grasp, self.place)
        } else {
            ease(x, 0.8, 1.0, self.place, 0.0)
        }
    }

    fn aperture(x: f64) -> f64 {
        if x < 0.5 {
            ramp(x, 0.35, 0.375, 1.0, 0.0)
        } else {
            ramp(x, 0.7, 0.725, 0.0, 1.0)
        }
    }
}

/// Scripted wrist orientation of the acting hand: tilts with the arm so the
/// hand stays upright.
fn scripted_wrist(pitch: f64) -> [f64; 3] {
    [0.0, pitch, 0.0]
}

/// Column holding the robot's right hand for this facing.
pub fn right_column(facing: FacingMode) -> usize {
    match facing {
        FacingMode::Front => 1,
        FacingMode::Back => 0,
    }
}

pub fn synthetic_oracle(
    config: &OracleConfig,
    clock: FrameClock,
    facing: FacingMode,
    model: &HumanoidModel,
) -> Result<OracleOutput, EstimationError> {
    let n = clock.frame_count;
    if n == 0 {
        return Err(EstimationError::Input("clip has no frames".into()));
    }
    let d = clock.duration_s();
    let mut rotations = Vec::with_capacity(n);
    let mut roots = Vec::with_capacity(n);
    let mut hands = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    let act = right_column(facing);

    let reach = match config.script {
        ScenarioScript::ReachGraspPlace {
            grasp_height,
            place_height,
            wrist_offset,
        } => {
            let z = model.standing_pelvis_height();
            Some(ReachPlan {
                grasp: reach_pitch(model, z, grasp_height + wrist_offset)?,
                place: reach_pitch(model, z, place_height + wrist_offset)?,
            })
        }
        _ => None,
    };

    for i in 0..n {
        let t = clock.time_of(i);
        let mut row = [HandPoseDescriptor::open(); 2];
        let mut state = [0u8; 2];
        let (rot, root) = match config.script {
            ScenarioScript::Stand => (standing_frame(), [0.0, 0.0, model.standing_pelvis_height()]),
            ScenarioScript::WalkLine { speed } => {
                let gait = Gait::new(speed, model.sole_height);
                let (rot, z) = walk_pose(model, &gait, t)?;
                (rot, [speed * t, 0.0, z])
            }
            ScenarioScript::WalkTurn { speed, turn_rate } => {
                let gait = Gait::new(speed, model.sole_height);
                let (mut rot, z) = walk_pose(model, &gait, t)?;
                rot[0] = canonicalize([0.0, 0.0, turn_rate * t]);
                let p = arc_position(speed, turn_rate, t);
                (rot, [p[0], p[1], z])
            }
            ScenarioScript::ReachGraspPlace { .. } => {
                let plan = reach.as_ref().expect("reach plan");
                let x = if d > 0.0 { t / d } else { 0.0 };
                let pitch = plan.pitch(x);
                let mut rot = standing_frame();
                rot[R_SHOULDER] = [0.0, -pitch, 0.0];
                let aperture = ReachPlan::aperture(x);
                row[act] = HandPoseDescriptor {
                    wrist_rotation: scripted_wrist(pitch),
                    aperture,
                    confidence: 1.0,
                };
                state[act] = if aperture < 0.5 { 2 } else { 0 };
                (rot, [0.0, 0.0, model.standing_pelvis_height()])
            }
        };
        rotations.push(rot);
        roots.push(root);
        hands.push(row);
        states.push(state);
    }

    if config.noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for row in &mut hands {
            for h in row.iter_mut() {
                h.aperture = (h.aperture + config.noise * rng.random_range(-1.0..=1.0)).clamp(0.0, 1.0);
                h.confidence = (1.0 - config.noise * rng.random::<f64>()).clamp(0.0, 1.0);
            }
        }
    }

    Ok(OracleOutput {
        body: BodyMotionSequence::new(clock, rotations, roots)?,
        hands: HandPoseSequence::new(clock, hands, facing)?,
        states: InteractionStateSequence::new(clock, states)?,
    })
}

/// In-process estimator answering every clip with the scripted scenario.
#[derive(Clone, Debug)]
pub struct OracleEstimator {
    pub config: OracleConfig,
    pub model: HumanoidModel,
}

impl OracleEstimator {
    pub fn new(script: ScenarioScript) -> Self {
        Self {
            config: OracleConfig::new(script),
            model: HumanoidModel::default(),
        }
    }

    pub fn generate(&self, clip: &VideoClip, facing: FacingMode) -> Result<OracleOutput, EstimationError> {
        let clock = FrameClock::new(clip.fps, clip.frame_count).map_err(|e| EstimationError::Input(e.to_string()))?;
        synthetic_oracle(&self.config, clock, facing, &self.model)
    }
}

impl EstimatorBackend for OracleEstimator {
    fn estimate_body(&self, clip: &VideoClip) -> Result<BodyMotionSequence, EstimationError> {
        Ok(self.generate(clip, clip.facing_hint.unwrap_or(FacingMode::Front))?.body)
    }

    fn estimate_hands(&self, clip: &VideoClip, facing: FacingMode) -> Result<HandPoseSequence, EstimationError> {
        Ok(self.generate(clip, facing)?.hands)
    }
}
