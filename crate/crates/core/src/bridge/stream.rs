use std::io::{Read, Write};
use std::time::Duration;

use crossbeam_channel::{bounded, Receiver, SendTimeoutError, Sender};
use thiserror::Error;

use crate::exec::Exec;
use crate::motion::{resample_with, InteractionAwareMotion, JOINT_COUNT};

use super::codec::{decode_frame, encode_frame, CodecError, FRAME_SIZE};
use super::hands::{resolve_handedness, state_to_joints, HandCalibration};
use super::{BridgeError, RobotCommandFrame};

pub const DEFAULT_CONTROL_FPS: f64 = 50.0;
/// About half a second of lookahead at the default control rate.
pub const DEFAULT_WINDOW_HORIZON: usize = 24;

#[derive(Debug, Error, PartialEq)]
pub enum SinkError {
    #[error("sink rejected frame: {0}")]
    Rejected(String),
    #[error("backpressure deadline of {0:?} exceeded")]
    Deadline(Duration),
    #[error("consumer disconnected")]
    Disconnected,
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum StreamError {
    #[error(transparent)]
    Build(#[from] BridgeError),
    #[error("stream failed at frame {frame_index}: {source}")]
    Sink {
        frame_index: u32,
        #[source]
        source: SinkError,
    },
}

/// Consumer side of the event queue.
pub trait FrameSink {
    fn send(&mut self, frame: &RobotCommandFrame) -> Result<(), SinkError>;

    /// Frames accepted but not yet consumed.
    fn backlog(&self) -> usize {
        0
    }
}

/// Collects frames in memory.
#[derive(Debug, Default)]
pub struct VecSink {
    pub frames: Vec<RobotCommandFrame>,
}

impl FrameSink for VecSink {
    fn send(&mut self, frame: &RobotCommandFrame) -> Result<(), SinkError> {
        self.frames.push(*frame);
        Ok(())
    }
}

/// Writes concatenated frames, the `.exoq` file layout.
pub struct WriterSink<W: Write> {
    inner: W,
}

impl<W: Write> WriterSink<W> {
    pub fn new(inner: W) -> Self {
        Self { inner }
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

impl<W: Write> FrameSink for WriterSink<W> {
    fn send(&mut self, frame: &RobotCommandFrame) -> Result<(), SinkError> {
        self.inner
            .write_all(&encode_frame(frame))
            .map_err(|e| SinkError::Io(e.to_string()))
    }
}

/// Writes each frame behind a little-endian u32 length prefix, for socket
/// transports.
pub struct LengthDelimitedSink<W: Write> {
    inner: W,
}

impl<W: Write> LengthDelimitedSink<W> {
    pub fn new(inner: W) -> Self {
        Self { inner }
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

impl<W: Write> FrameSink for LengthDelimitedSink<W> {
    fn send(&mut self, frame: &RobotCommandFrame) -> Result<(), SinkError> {
        let io = |e: std::io::Error| SinkError::Io(e.to_string());
        self.inner
            .write_all(&(FRAME_SIZE as u32).to_le_bytes())
            .map_err(io)?;
        self.inner.write_all(&encode_frame(frame)).map_err(io)?;
        self.inner.flush().map_err(io)
    }
}

/// Reads one length-delimited frame. `Ok(None)` on clean end of stream.
pub fn read_length_delimited<R: Read>(
    reader: &mut R,
) -> Result<Option<RobotCommandFrame>, CodecError> {
    let mut len = [0u8; 4];
    match reader.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(CodecError::Io(e.to_string())),
    }
    let n = u32::from_le_bytes(len) as usize;
    if n != FRAME_SIZE {
        return Err(CodecError::Length {
            expected: FRAME_SIZE,
            actual: n,
        });
    }
    let mut buf = [0u8; FRAME_SIZE];
    reader
        .read_exact(&mut buf)
        .map_err(|e| CodecError::Io(e.to_string()))?;
    decode_frame(&buf).map(Some)
}

/// Producer half of the bounded event queue. `send` blocks while the queue
/// is full and fails once `deadline` passes.
pub struct QueueSink {
    tx: Sender<[u8; FRAME_SIZE]>,
    deadline: Duration,
    peak: usize,
}

/// Consumer half of the bounded event queue.
pub struct QueueReceiver {
    rx: Receiver<[u8; FRAME_SIZE]>,
}

/// Creates a bounded single-producer, single-consumer frame queue.
pub fn event_queue(capacity: usize, deadline: Duration) -> (QueueSink, QueueReceiver) {
    let (tx, rx) = bounded(capacity.max(1));
    (
        QueueSink {
            tx,
            deadline,
            peak: 0,
        },
        QueueReceiver { rx },
    )
}

impl QueueSink {
    pub fn peak_backlog(&self) -> usize {
        self.peak
    }
}

impl FrameSink for QueueSink {
    fn send(&mut self, frame: &RobotCommandFrame) -> Result<(), SinkError> {
        match self.tx.send_timeout(encode_frame(frame), self.deadline) {
            Ok(()) => {
                self.peak = self.peak.max(self.tx.len());
                Ok(())
            }
            Err(SendTimeoutError::Timeout(_)) => Err(SinkError::Deadline(self.deadline)),
            Err(SendTimeoutError::Disconnected(_)) => Err(SinkError::Disconnected),
        }
    }

    fn backlog(&self) -> usize {
        self.tx.len()
    }
}

impl QueueReceiver {
    /// Blocks for the next frame; `None` once the producer is gone and the
    /// queue is drained.
    pub fn recv(&self) -> Option<Result<RobotCommandFrame, CodecError>> {
        self.rx.recv().ok().map(|b| decode_frame(&b))
    }

    pub fn len(&self) -> usize {
        self.rx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rx.is_empty()
    }
}

impl Iterator for QueueReceiver {
    type Item = Result<RobotCommandFrame, CodecError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.recv()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StreamSummary {
    pub frames_sent: usize,
    pub peak_backlog: usize,
    pub control_fps: f64,
}

/// Converts a motion into executor frames at `control_fps`.
pub fn build_frames(
    motion: &InteractionAwareMotion,
    control_fps: f64,
    calib: &HandCalibration,
) -> Result<Vec<RobotCommandFrame>, BridgeError> {
    build_frames_with(motion, control_fps, calib, Exec::default())
}

pub fn build_frames_with(
    motion: &InteractionAwareMotion,
    control_fps: f64,
    calib: &HandCalibration,
    exec: Exec,
) -> Result<Vec<RobotCommandFrame>, BridgeError> {
    calib.check()?;
    if !(control_fps.is_finite() && control_fps > 0.0) {
        return Err(BridgeError::InvalidArgument(format!(
            "control fps must be positive, got {control_fps}"
        )));
    }
    let m = resample_with(motion, control_fps, exec)?;
    let n = m.frame_count();
    if n > u32::MAX as usize {
        return Err(BridgeError::InvalidArgument(format!(
            "{n} frames exceed the u32 frame index"
        )));
    }
    let (left, right) = resolve_handedness(&m.hands, &m.states);

    let dt = 1.0 / control_fps;
    let mut left_targets = Vec::with_capacity(n);
    let mut right_targets = Vec::with_capacity(n);
    let (mut l, mut r) = (calib.open_pose, calib.open_pose);
    for i in 0..n {
        l = state_to_joints(left.states[i], &l, dt, calib)?;
        r = state_to_joints(right.states[i], &r, dt, calib)?;
        left_targets.push(l.to_f32());
        right_targets.push(r.to_f32());
    }

    Ok(exec.map_indices(n, |i| {
        let joints = &m.body.joint_rotations[i];
        let rotations: [[f32; 3]; JOINT_COUNT] =
            std::array::from_fn(|j| joints[j].map(|v| v as f32));
        RobotCommandFrame {
            frame_index: i as u32,
            timestamp_s: i as f64 / control_fps,
            root_position: m.body.root_positions[i].map(|v| v as f32),
            rotations,
            left_hand: left_targets[i],
            right_hand: right_targets[i],
        }
    }))
}

/// Builds the frames and pushes them into `sink` in index order.
pub fn stream(
    motion: &InteractionAwareMotion,
    control_fps: f64,
    calib: &HandCalibration,
    sink: &mut dyn FrameSink,
) -> Result<StreamSummary, StreamError> {
    let frames = build_frames(motion, control_fps, calib)?;
    let mut peak = 0;
    for frame in &frames {
        sink.send(frame).map_err(|source| StreamError::Sink {
            frame_index: frame.frame_index,
            source,
        })?;
        peak = peak.max(sink.backlog());
    }
    Ok(StreamSummary {
        frames_sent: frames.len(),
        peak_backlog: peak,
        control_fps,
    })
}

/// Reference frames `start..=start + horizon` handed to a tracking controller.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceWindow {
    pub start: usize,
    pub horizon: usize,
    pub frames: Vec<RobotCommandFrame>,
}

pub fn make_reference_window(
    frames: &[RobotCommandFrame],
    start: usize,
    horizon: usize,
) -> Result<ReferenceWindow, BridgeError> {
    let end = start.checked_add(horizon).filter(|&e| e < frames.len());
    let Some(end) = end else {
        return Err(BridgeError::Index {
            start,
            horizon,
            len: frames.len(),
        });
    };
    Ok(ReferenceWindow {
        start,
        horizon,
        frames: frames[start..=end].to_vec(),
    })
}
