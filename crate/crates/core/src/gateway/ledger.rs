use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::PathBuf;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::GatewayError;

pub const STAGE_EMBODIMENT_TRANSFER: &str = "embodiment_transfer";
pub const STAGE_TASK_DECOMPOSITION: &str = "task_decomposition";
pub const STAGE_VIDEO_GENERATION: &str = "video_generation";
pub const STAGE_BODY_ESTIMATION: &str = "body_estimation";
pub const STAGE_HAND_ESTIMATION: &str = "hand_estimation";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MetricKind {
    PerRequest,
    PerVideoSecond,
}

/// Reference means from the published runtime table: seconds per request or
/// seconds per second of video.
pub const REFERENCE_MEANS: [(&str, MetricKind, f64); 5] = [
    (STAGE_EMBODIMENT_TRANSFER, MetricKind::PerRequest, 10.7),
    (STAGE_TASK_DECOMPOSITION, MetricKind::PerRequest, 2.5),
    (STAGE_VIDEO_GENERATION, MetricKind::PerVideoSecond, 13.2),
    (STAGE_BODY_ESTIMATION, MetricKind::PerVideoSecond, 2.9),
    (STAGE_HAND_ESTIMATION, MetricKind::PerVideoSecond, 16.4),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub stage: String,
    pub kind: MetricKind,
    pub elapsed_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_s: Option<f64>,
}

impl LedgerEntry {
    pub fn per_request(stage: &str, elapsed_s: f64) -> Self {
        Self {
            stage: stage.to_string(),
            kind: MetricKind::PerRequest,
            elapsed_s,
            video_s: None,
        }
    }

    pub fn per_video_second(stage: &str, elapsed_s: f64, video_s: f64) -> Self {
        Self {
            stage: stage.to_string(),
            kind: MetricKind::PerVideoSecond,
            elapsed_s,
            video_s: Some(video_s),
        }
    }

    pub fn check(&self) -> Result<(), GatewayError> {
        if !(self.elapsed_s >= 0.0) {
            return Err(GatewayError::Input(format!("elapsed {} < 0", self.elapsed_s)));
        }
        match (self.kind, self.video_s) {
            (MetricKind::PerVideoSecond, Some(v)) if v > 0.0 => Ok(()),
            (MetricKind::PerVideoSecond, _) => Err(GatewayError::Input(
                "per-video-second entry needs positive video seconds".into(),
            )),
            (MetricKind::PerRequest, _) => Ok(()),
        }
    }

    /// Elapsed seconds, or seconds per video second.
    pub fn value(&self) -> f64 {
        match self.kind {
            MetricKind::PerRequest => self.elapsed_s,
            MetricKind::PerVideoSecond => self.elapsed_s / self.video_s.unwrap_or(f64::NAN),
        }
    }
}

/// Append-only latency records, optionally mirrored to an NDJSON file.
#[derive(Debug, Default)]
pub struct LatencyLedger {
    entries: Mutex<Vec<LedgerEntry>>,
    path: Option<PathBuf>,
}

impl LatencyLedger {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or creates) a persisted ledger and loads existing records.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, GatewayError> {
        let path = path.into();
        let entries = if path.exists() {
            read_entries(&fs::read_to_string(&path).map_err(|e| GatewayError::Io(e.to_string()))?)?
        } else {
            Vec::new()
        };
        Ok(Self {
            entries: Mutex::new(entries),
            path: Some(path),
        })
    }

    pub fn record(&self, entry: LedgerEntry) -> Result<(), GatewayError> {
        entry.check()?;
        let mut entries = self.entries.lock().expect("ledger lock");
        if let Some(path) = &self.path {
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir).map_err(|e| GatewayError::Io(e.to_string()))?;
            }
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| GatewayError::Io(e.to_string()))?;
            let line = serde_json::to_string(&entry).expect("entry serializes");
            writeln!(f, "{line}").map_err(|e| GatewayError::Io(e.to_string()))?;
        }
        entries.push(entry);
        Ok(())
    }

    pub fn entries(&self) -> Vec<LedgerEntry> {
        self.entries.lock().expect("ledger lock").clone()
    }
}

pub fn read_entries(text: &str) -> Result<Vec<LedgerEntry>, GatewayError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| GatewayError::Input(format!("ledger line {}: {e}", i + 1)))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageMean {
    pub stage: String,
    pub kind: MetricKind,
    pub count: usize,
    pub mean: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    /// In order of first appearance.
    pub stages: Vec<StageMean>,
}

impl LatencyReport {
    pub fn from_means(means: &[(&str, MetricKind, f64)]) -> Self {
        Self {
            stages: means
                .iter()
                .map(|(s, k, m)| StageMean {
                    stage: s.to_string(),
                    kind: *k,
                    count: 1,
                    mean: *m,
                })
                .collect(),
        }
    }

    pub fn reference() -> Self {
        Self::from_means(&REFERENCE_MEANS)
    }

    fn sum(&self, kind: MetricKind) -> f64 {
        self.stages.iter().filter(|s| s.kind == kind).map(|s| s.mean).sum()
    }

    pub fn per_request_sum(&self) -> f64 {
        self.sum(MetricKind::PerRequest)
    }

    pub fn per_video_second_sum(&self) -> f64 {
        self.sum(MetricKind::PerVideoSecond)
    }

    /// Projected end-to-end seconds for a clip of `video_s` seconds.
    pub fn total(&self, video_s: f64) -> f64 {
        self.per_request_sum() + video_s * self.per_video_second_sum()
    }
}

/// Per-(stage, kind) means of the ledger entries.
pub fn report_latency(entries: &[LedgerEntry]) -> LatencyReport {
    let mut stages: Vec<(String, MetricKind, Vec<f64>)> = Vec::new();
    for e in entries {
        match stages.iter_mut().find(|(s, k, _)| *s == e.stage && *k == e.kind) {
            Some((_, _, v)) => v.push(e.value()),
            None => stages.push((e.stage.clone(), e.kind, vec![e.value()])),
        }
    }
    LatencyReport {
        stages: stages
            .into_iter()
            .map(|(stage, kind, v)| StageMean {
                stage,
                kind,
                count: v.len(),
                mean: v.iter().sum::<f64>() / v.len() as f64,
            })
            .collect(),
    }
}
