//! Fixed 374-byte little-endian frame layout:
//!
//! | offset | size | field                                   |
//! |-------:|-----:|-----------------------------------------|
//! |      0 |    4 | magic `EXO1`                            |
//! |      4 |    4 | frame_index, u32                        |
//! |      8 |    8 | timestamp_s, f64                        |
//! |     16 |   12 | root position, 3 x f32                  |
//! |     28 |  288 | root orientation + 23 joints, 24x3 f32  |
//! |    316 |   28 | left hand, 7 x f32                      |
//! |    344 |   28 | right hand, 7 x f32                     |
//! |    372 |    2 | zero padding                            |

use std::io::Read;

use thiserror::Error;

use crate::exec::Exec;
use crate::motion::JOINT_COUNT;

use super::{RobotCommandFrame, HAND_DOF};

pub const FRAME_MAGIC: [u8; 4] = *b"EXO1";
pub const FRAME_SIZE: usize = 374;

const POSITION_AT: usize = 16;
const ROTATIONS_AT: usize = 28;
const LEFT_AT: usize = ROTATIONS_AT + JOINT_COUNT * 3 * 4;
const RIGHT_AT: usize = LEFT_AT + HAND_DOF * 4;
const PAD_AT: usize = RIGHT_AT + HAND_DOF * 4;

const _: () = assert!(PAD_AT + 2 == FRAME_SIZE);

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("bad frame magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("frame buffer has {actual} bytes, expected {expected}")]
    Length { expected: usize, actual: usize },
    #[error("non-zero padding bytes {0:02x?}")]
    Padding([u8; 2]),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("i/o error reading frames: {0}")]
    Io(String),
}

pub fn encode_frame(frame: &RobotCommandFrame) -> [u8; FRAME_SIZE] {
    let mut buf = [0u8; FRAME_SIZE];
    buf[0..4].copy_from_slice(&FRAME_MAGIC);
    buf[4..8].copy_from_slice(&frame.frame_index.to_le_bytes());
    buf[8..16].copy_from_slice(&frame.timestamp_s.to_le_bytes());
    let mut at = POSITION_AT;
    let mut put = |v: f32| {
        buf[at..at + 4].copy_from_slice(&v.to_le_bytes());
        at += 4;
    };
    frame.root_position.iter().for_each(|&v| put(v));
    frame.rotations.iter().flatten().for_each(|&v| put(v));
    frame.left_hand.iter().for_each(|&v| put(v));
    frame.right_hand.iter().for_each(|&v| put(v));
    buf
}

fn f32_at(buf: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(buf[at..at + 4].try_into().unwrap())
}

fn finite(values: &[f32], field: &'static str) -> Result<(), CodecError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(CodecError::NonFinite(field))
    }
}

pub fn decode_frame(buf: &[u8]) -> Result<RobotCommandFrame, CodecError> {
    if buf.len() != FRAME_SIZE {
        return Err(CodecError::Length {
            expected: FRAME_SIZE,
            actual: buf.len(),
        });
    }
    let magic: [u8; 4] = buf[0..4].try_into().unwrap();
    if magic != FRAME_MAGIC {
        return Err(CodecError::BadMagic(magic));
    }
    let pad: [u8; 2] = buf[PAD_AT..].try_into().unwrap();
    if pad != [0, 0] {
        return Err(CodecError::Padding(pad));
    }
    let frame_index = u32::from_le_bytes(buf[4..8].try_into().unwrap());
    let timestamp_s = f64::from_le_bytes(buf[8..16].try_into().unwrap());
    if !timestamp_s.is_finite() {
        return Err(CodecError::NonFinite("timestamp_s"));
    }
    let root_position = std::array::from_fn(|i| f32_at(buf, POSITION_AT + 4 * i));
    let rotations: [[f32; 3]; JOINT_COUNT] = std::array::from_fn(|j| {
        std::array::from_fn(|c| f32_at(buf, ROTATIONS_AT + 12 * j + 4 * c))
    });
    let left_hand = std::array::from_fn(|i| f32_at(buf, LEFT_AT + 4 * i));
    let right_hand = std::array::from_fn(|i| f32_at(buf, RIGHT_AT + 4 * i));
    finite(&root_position, "root_position")?;
    finite(rotations.as_flattened(), "rotations")?;
    finite(&left_hand, "left_hand")?;
    finite(&right_hand, "right_hand")?;
    Ok(RobotCommandFrame {
        frame_index,
        timestamp_s,
        root_position,
        rotations,
        left_hand,
        right_hand,
    })
}

/// Encodes frames into one contiguous `.exoq` buffer.
pub fn encode_batch(frames: &[RobotCommandFrame], exec: Exec) -> Vec<u8> {
    exec.map_slice(frames, encode_frame).concat()
}

/// Decodes a contiguous `.exoq` buffer.
pub fn decode_batch(bytes: &[u8], exec: Exec) -> Result<Vec<RobotCommandFrame>, CodecError> {
    if bytes.len() % FRAME_SIZE != 0 {
        return Err(CodecError::Length {
            expected: (bytes.len() / FRAME_SIZE + 1) * FRAME_SIZE,
            actual: bytes.len(),
        });
    }
    let chunks: Vec<&[u8]> = bytes.chunks_exact(FRAME_SIZE).collect();
    exec.map_slice(&chunks, |c| decode_frame(c)).into_iter().collect()
}

/// Streams frames out of a reader holding concatenated 374-byte frames.
/// A trailing partial frame yields one `Length` error, then the iterator ends.
pub struct ExoqReader<R> {
    inner: R,
    done: bool,
}

impl<R: Read> ExoqReader<R> {
    pub fn new(inner: R) -> Self {
        Self { inner, done: false }
    }
}

impl<R: Read> Iterator for ExoqReader<R> {
    type Item = Result<RobotCommandFrame, CodecError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut buf = [0u8; FRAME_SIZE];
        let mut filled = 0;
        while filled < FRAME_SIZE {
            match self.inner.read(&mut buf[filled..]) {
                Ok(0) => break,
                Ok(n) => filled += n,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
                Err(e) => {
                    self.done = true;
                    return Some(Err(CodecError::Io(e.to_string())));
                }
            }
        }
        if filled == 0 {
            self.done = true;
            return None;
        }
        if filled < FRAME_SIZE {
            self.done = true;
            return Some(Err(CodecError::Length {
                expected: FRAME_SIZE,
                actual: filled,
            }));
        }
        Some(decode_frame(&buf))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_frame_layout() {
        let bytes = encode_frame(&RobotCommandFrame::zeroed());
        assert_eq!(bytes.len(), 374);
        assert_eq!(&bytes[0..4], b"EXO1");
        assert!(bytes[4..].iter().all(|&b| b == 0));
    }

    #[test]
    fn field_offsets() {
        let mut f = RobotCommandFrame::zeroed();
        f.frame_index = 0x01020304;
        f.timestamp_s = 1.5;
        f.root_position = [1.0, 2.0, 3.0];
        f.rotations[23] = [0.0, 0.0, -0.5];
        f.right_hand[6] = 0.25;
        let b = encode_frame(&f);
        assert_eq!(&b[4..8], &[4, 3, 2, 1]);
        assert_eq!(&b[8..16], &1.5f64.to_le_bytes());
        assert_eq!(&b[24..28], &3.0f32.to_le_bytes());
        assert_eq!(&b[312..316], &(-0.5f32).to_le_bytes());
        assert_eq!(&b[368..372], &0.25f32.to_le_bytes());
        assert_eq!(decode_frame(&b).unwrap(), f);
    }

    #[test]
    fn rejects_truncation_magic_padding_nan() {
        let b = encode_frame(&RobotCommandFrame::zeroed());
        assert_eq!(
            decode_frame(&b[..373]),
            Err(CodecError::Length {
                expected: 374,
                actual: 373
            })
        );
        let mut bad = b;
        bad[0] = b'X';
        assert!(matches!(decode_frame(&bad), Err(CodecError::BadMagic(_))));
        let mut bad = b;
        bad[373] = 1;
        assert!(matches!(decode_frame(&bad), Err(CodecError::Padding(_))));
        let mut f = RobotCommandFrame::zeroed();
        f.left_hand[0] = f32::NAN;
        assert_eq!(
            decode_frame(&encode_frame(&f)),
            Err(CodecError::NonFinite("left_hand"))
        );
    }

    #[test]
    fn reader_reports_partial_tail() {
        let mut bytes = encode_batch(&[RobotCommandFrame::zeroed(); 3], Exec::Sequential);
        bytes.truncate(bytes.len() - 10);
        let out: Vec<_> = ExoqReader::new(&bytes[..]).collect();
        assert_eq!(out.len(), 3);
        assert!(out[0].is_ok() && out[1].is_ok());
        assert!(matches!(out[2], Err(CodecError::Length { actual: 364, .. })));
    }
}
