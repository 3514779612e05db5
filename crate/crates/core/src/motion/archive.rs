//! Motion archive container: a text metadata block followed by flat
//! little-endian arrays.
//!
//! ```text
//! EXOMOTION 1
//! fps=24
//! frame_count=240
//! facing=FRONT            (NONE when no hand stream is present)
//! source_fps=24
//! streams=body,hands,states
//! <empty line>
//! body:   T x 24 x 3 f32 joint rotations, then T x 3 f32 root positions
//! hands:  T x 2 x (wrist x, wrist y, wrist z, aperture, confidence) f32
//! states: T x 2 u8
//! ```
//!
//! Only the streams listed in `streams` are present, always in that order.

use thiserror::Error;

use super::{
    BodyMotionSequence, FacingMode, FrameClock, HandPoseDescriptor, HandPoseSequence,
    InteractionAwareMotion, InteractionStateSequence, MotionError, JOINT_COUNT,
};

pub const ARCHIVE_MAGIC: &str = "EXOMOTION 1";

const BODY_FLOATS_PER_FRAME: usize = JOINT_COUNT * 3 + 3;
const HAND_FLOATS_PER_FRAME: usize = 2 * 5;

#[derive(Debug, Error, PartialEq)]
pub enum ArchiveError {
    #[error("archive header: {0}")]
    Header(String),
    #[error("archive truncated: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("archive has {0} trailing bytes")]
    Trailing(usize),
    #[error("archive does not contain a {0} stream")]
    Missing(&'static str),
    #[error(transparent)]
    Motion(#[from] MotionError),
}

/// Any subset of the three motion streams on one clock.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionArchive {
    pub clock: FrameClock,
    pub facing: Option<FacingMode>,
    pub source_fps: f64,
    pub body: Option<BodyMotionSequence>,
    pub hands: Option<HandPoseSequence>,
    pub states: Option<InteractionStateSequence>,
}

impl MotionArchive {
    pub fn from_motion(m: &InteractionAwareMotion) -> Self {
        Self {
            clock: m.body.clock,
            facing: Some(m.hands.facing),
            source_fps: m.source_fps,
            body: Some(m.body.clone()),
            hands: Some(m.hands.clone()),
            states: Some(m.states.clone()),
        }
    }

    pub fn from_body(body: &BodyMotionSequence, source_fps: f64) -> Self {
        Self {
            clock: body.clock,
            facing: None,
            source_fps,
            body: Some(body.clone()),
            hands: None,
            states: None,
        }
    }

    pub fn from_hands(hands: &HandPoseSequence, source_fps: f64) -> Self {
        Self {
            clock: hands.clock,
            facing: Some(hands.facing),
            source_fps,
            body: None,
            hands: Some(hands.clone()),
            states: None,
        }
    }

    pub fn into_motion(self) -> Result<InteractionAwareMotion, ArchiveError> {
        Ok(InteractionAwareMotion {
            body: self.body.ok_or(ArchiveError::Missing("body"))?,
            hands: self.hands.ok_or(ArchiveError::Missing("hands"))?,
            states: self.states.ok_or(ArchiveError::Missing("states"))?,
            source_fps: self.source_fps,
        })
    }

    fn stream_names(&self) -> Vec<&'static str> {
        let mut names = Vec::new();
        if self.body.is_some() {
            names.push("body");
        }
        if self.hands.is_some() {
            names.push("hands");
        }
        if self.states.is_some() {
            names.push("states");
        }
        names
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let facing = self.facing.map_or("NONE", FacingMode::as_str);
        let header = format!(
            "{ARCHIVE_MAGIC}\nfps={}\nframe_count={}\nfacing={facing}\nsource_fps={}\nstreams={}\n\n",
            self.clock.fps,
            self.clock.frame_count,
            self.source_fps,
            self.stream_names().join(",")
        );
        let t = self.clock.frame_count;
        let mut out = header.into_bytes();
        out.reserve(t * (4 * (BODY_FLOATS_PER_FRAME + HAND_FLOATS_PER_FRAME) + 2));
        let put = |v: f64, out: &mut Vec<u8>| out.extend_from_slice(&(v as f32).to_le_bytes());
        if let Some(body) = &self.body {
            for frame in &body.joint_rotations {
                for rot in frame {
                    for &v in rot {
                        put(v, &mut out);
                    }
                }
            }
            for p in &body.root_positions {
                for &v in p {
                    put(v, &mut out);
                }
            }
        }
        if let Some(hands) = &self.hands {
            for row in &hands.columns {
                for d in row {
                    for &v in &d.wrist_rotation {
                        put(v, &mut out);
                    }
                    put(d.aperture, &mut out);
                    put(d.confidence, &mut out);
                }
            }
        }
        if let Some(states) = &self.states {
            for row in &states.states {
                out.extend_from_slice(row);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ArchiveError> {
        let split = bytes
            .windows(2)
            .position(|w| w == b"\n\n")
            .ok_or_else(|| ArchiveError::Header("no end-of-header marker".into()))?;
        let header = std::str::from_utf8(&bytes[..split])
            .map_err(|_| ArchiveError::Header("metadata block is not UTF-8".into()))?;
        let mut lines = header.lines();
        if lines.next() != Some(ARCHIVE_MAGIC) {
            return Err(ArchiveError::Header(format!("missing {ARCHIVE_MAGIC:?} magic")));
        }
        let mut field = |key: &str| -> Result<&str, ArchiveError> {
            let line = lines
                .next()
                .ok_or_else(|| ArchiveError::Header(format!("missing {key}")))?;
            line.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix('='))
                .ok_or_else(|| ArchiveError::Header(format!("expected {key}=, got {line:?}")))
        };
        let bad = |key: &str, v: &str| ArchiveError::Header(format!("bad {key} value {v:?}"));
        let fps_s = field("fps")?;
        let fps: f64 = fps_s.parse().map_err(|_| bad("fps", fps_s))?;
        let count_s = field("frame_count")?;
        let frame_count: usize = count_s.parse().map_err(|_| bad("frame_count", count_s))?;
        let facing = match field("facing")? {
            "NONE" => None,
            other => Some(other.parse::<FacingMode>()?),
        };
        let src_s = field("source_fps")?;
        let source_fps: f64 = src_s.parse().map_err(|_| bad("source_fps", src_s))?;
        let streams = field("streams")?;
        let names: Vec<&str> = if streams.is_empty() {
            Vec::new()
        } else {
            streams.split(',').collect()
        };
        let has = |n: &str| names.contains(&n);
        let known = ["body", "hands", "states"];
        let mut order = known.iter().filter(|n| has(n));
        if names.len() != order.clone().count() || names.iter().any(|n| Some(n) != order.next()) {
            return Err(ArchiveError::Header(format!("bad stream list {streams:?}")));
        }
        if has("hands") && facing.is_none() {
            return Err(ArchiveError::Header("hand stream without facing".into()));
        }
        let clock = FrameClock::new(fps, frame_count)?;

        let t = frame_count;
        let payload = &bytes[split + 2..];
        let expected = [
            ("body", 4 * BODY_FLOATS_PER_FRAME * t),
            ("hands", 4 * HAND_FLOATS_PER_FRAME * t),
            ("states", 2 * t),
        ]
        .iter()
        .filter(|(n, _)| has(n))
        .map(|(_, len)| len)
        .sum::<usize>();
        if payload.len() < expected {
            return Err(ArchiveError::Truncated {
                expected,
                actual: payload.len(),
            });
        }
        if payload.len() > expected {
            return Err(ArchiveError::Trailing(payload.len() - expected));
        }

        let mut cursor = 0usize;
        let mut take = || {
            let v = f32::from_le_bytes(payload[cursor..cursor + 4].try_into().unwrap());
            cursor += 4;
            v as f64
        };
        let body = if has("body") {
            let mut joint_rotations = Vec::with_capacity(t);
            for _ in 0..t {
                let mut frame = [[0.0; 3]; JOINT_COUNT];
                for rot in frame.iter_mut() {
                    *rot = [take(), take(), take()];
                }
                joint_rotations.push(frame);
            }
            let root_positions = (0..t).map(|_| [take(), take(), take()]).collect();
            Some(BodyMotionSequence {
                clock,
                joint_rotations,
                root_positions,
            })
        } else {
            None
        };
        let hands = match (has("hands"), facing) {
            (true, Some(facing)) => {
                let mut desc = || HandPoseDescriptor {
                    wrist_rotation: [take(), take(), take()],
                    aperture: take(),
                    confidence: take(),
                };
                let columns = (0..t).map(|_| [desc(), desc()]).collect();
                Some(HandPoseSequence {
                    clock,
                    columns,
                    facing,
                })
            }
            _ => None,
        };
        let states = if has("states") {
            let raw = &payload[cursor..];
            Some(InteractionStateSequence {
                clock,
                states: raw.chunks_exact(2).map(|c| [c[0], c[1]]).collect(),
            })
        } else {
            None
        };
        Ok(Self {
            clock,
            facing,
            source_fps,
            body,
            hands,
            states,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> InteractionAwareMotion {
        let clock = FrameClock::new(24.0, 3).unwrap();
        let mut rot = [[0.0; 3]; JOINT_COUNT];
        rot[4] = [0.5, -0.25, 0.125];
        InteractionAwareMotion {
            body: BodyMotionSequence::new(clock, vec![rot; 3], vec![[0.0, 1.0, 0.875]; 3]).unwrap(),
            hands: HandPoseSequence::new(
                clock,
                vec![[HandPoseDescriptor::open(); 2]; 3],
                FacingMode::Back,
            )
            .unwrap(),
            states: InteractionStateSequence::new(clock, vec![[0, 1], [1, 2], [2, 0]]).unwrap(),
            source_fps: 24.0,
        }
    }

    #[test]
    fn exact_values_survive() {
        let m = sample();
        let bytes = MotionArchive::from_motion(&m).to_bytes();
        let back = MotionArchive::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.into_motion().unwrap(), m);
    }

    #[test]
    fn layout_size() {
        let bytes = MotionArchive::from_motion(&sample()).to_bytes();
        let header = "EXOMOTION 1\nfps=24\nframe_count=3\nfacing=BACK\nsource_fps=24\nstreams=body,hands,states\n\n";
        assert!(bytes.starts_with(header.as_bytes()));
        assert_eq!(bytes.len(), header.len() + 3 * (75 * 4 + 10 * 4 + 2));
    }

    #[test]
    fn partial_archives() {
        let m = sample();
        let body_only = MotionArchive::from_body(&m.body, 24.0).to_bytes();
        let back = MotionArchive::from_bytes(&body_only).unwrap();
        assert_eq!(back.body.as_ref(), Some(&m.body));
        assert_eq!(back.facing, None);
        assert!(matches!(back.into_motion(), Err(ArchiveError::Missing("hands"))));
    }

    #[test]
    fn rejects_damage() {
        let bytes = MotionArchive::from_motion(&sample()).to_bytes();
        assert!(matches!(
            MotionArchive::from_bytes(&bytes[..bytes.len() - 1]),
            Err(ArchiveError::Truncated { .. })
        ));
        let mut extra = bytes.clone();
        extra.push(0);
        assert_eq!(MotionArchive::from_bytes(&extra), Err(ArchiveError::Trailing(1)));
        assert!(matches!(
            MotionArchive::from_bytes(b"EXOMOTION 2\n\n"),
            Err(ArchiveError::Header(_))
        ));
        assert!(MotionArchive::from_bytes(b"garbage").is_err());
    }
}
