use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::gateway::ArtifactRef;
use crate::planner::TaskInstruction;

use super::PipelineError;

/// Fixed stage order.
pub const STAGES: [&str; 8] = [
    "transfer", "decompose", "fuse", "video", "body_est", "hand_est", "assemble", "replay",
];

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const LEDGER_FILE: &str = "ledger.ndjson";

pub fn stage_index(name: &str) -> Option<usize> {
    STAGES.iter().position(|s| *s == name)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StageStatus {
    Succeeded,
    Failed,
    SkippedCached,
}

impl StageStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            StageStatus::Succeeded => "SUCCEEDED",
            StageStatus::Failed => "FAILED",
            StageStatus::SkippedCached => "SKIPPED_CACHED",
        }
    }

    pub fn is_complete(self) -> bool {
        matches!(self, StageStatus::Succeeded | StageStatus::SkippedCached)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub status: StageStatus,
    pub input_digests: Vec<String>,
    pub artifacts: BTreeMap<String, ArtifactRef>,
    pub outputs: BTreeMap<String, Value>,
    pub elapsed_s: f64,
    pub diagnostics: Option<String>,
}

impl StageRecord {
    pub fn new(stage: &str) -> Self {
        Self {
            stage: stage.to_string(),
            status: StageStatus::Succeeded,
            input_digests: Vec::new(),
            artifacts: BTreeMap::new(),
            outputs: BTreeMap::new(),
            elapsed_s: 0.0,
            diagnostics: None,
        }
    }

    pub fn artifact(&self, key: &str) -> Result<&ArtifactRef, PipelineError> {
        self.artifacts
            .get(key)
            .ok_or_else(|| PipelineError::Manifest(format!("stage {} has no {key} artifact", self.stage)))
    }

    pub fn output(&self, key: &str) -> Result<&Value, PipelineError> {
        self.outputs
            .get(key)
            .ok_or_else(|| PipelineError::Manifest(format!("stage {} has no {key} output", self.stage)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub run_id: String,
    pub task: TaskInstruction,
    pub image: ArtifactRef,
    pub config: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Line {
    Run(RunHeader),
    Stage(StageRecord),
}

/// Append-only run record: one header line, then one line per stage
/// attempt. The latest line for a stage is its current state.
#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub dir: PathBuf,
    pub header: RunHeader,
    pub records: Vec<StageRecord>,
}

fn io(path: &Path, e: std::io::Error) -> PipelineError {
    PipelineError::Io(format!("{}: {e}", path.display()))
}

impl RunManifest {
    pub fn create(dir: &Path, header: RunHeader) -> Result<Self, PipelineError> {
        let path = dir.join(MANIFEST_FILE);
        if path.exists() {
            return Err(PipelineError::Config(format!("run {} already exists", header.run_id)));
        }
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let m = Self {
            dir: dir.to_path_buf(),
            header,
            records: Vec::new(),
        };
        m.write_line(&Line::Run(m.header.clone()))?;
        Ok(m)
    }

    pub fn load(dir: &Path) -> Result<Self, PipelineError> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| io(&path, e))?;
        let mut header = None;
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let parsed: Line = serde_json::from_str(line)
                .map_err(|e| PipelineError::Manifest(format!("{} line {}: {e}", path.display(), i + 1)))?;
            match (parsed, header.is_some()) {
                (Line::Run(h), false) => header = Some(h),
                (Line::Stage(r), true) => records.push(r),
                _ => {
                    return Err(PipelineError::Manifest(format!(
                        "{} line {}: header must come first, exactly once",
                        path.display(),
                        i + 1
                    )))
                }
            }
        }
        let header = header.ok_or_else(|| PipelineError::Manifest(format!("{} is empty", path.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            header,
            records,
        })
    }

    fn write_line(&self, line: &Line) -> Result<(), PipelineError> {
        let path = self.dir.join(MANIFEST_FILE);
        let mut f: File = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| io(&path, e))?;
        let mut text = serde_json::to_string(line).map_err(|e| PipelineError::Manifest(e.to_string()))?;
        text.push('\n');
        f.write_all(text.as_bytes()).map_err(|e| io(&path, e))?;
        f.sync_data().map_err(|e| io(&path, e))
    }

    pub fn append(&mut self, record: StageRecord) -> Result<(), PipelineError> {
        self.write_line(&Line::Stage(record.clone()))?;
        self.records.push(record);
        Ok(())
    }

    pub fn latest(&self, stage: &str) -> Option<&StageRecord> {
        self.records.iter().rev().find(|r| r.stage == stage)
    }

    pub fn is_complete(&self, stage: &str) -> bool {
        self.latest(stage).is_some_and(|r| r.status.is_complete())
    }

    /// Latest record of a stage that must already be complete.
    pub fn completed(&self, stage: &str) -> Result<&StageRecord, PipelineError> {
        self.latest(stage)
            .filter(|r| r.status.is_complete())
            .ok_or_else(|| PipelineError::Manifest(format!("stage {stage} has not completed")))
    }

    pub fn ledger_path(&self) -> PathBuf {
        self.dir.join(LEDGER_FILE)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::MediaType;

    fn header() -> RunHeader {
        RunHeader {
            run_id: "r1".into(),
            task: TaskInstruction::new("walk to the table", "").unwrap(),
            image: ArtifactRef {
                path: "/x".into(),
                digest: "ab".repeat(32),
                media: MediaType::PngImage,
                bytes: 1,
                fps: None,
                frame_count: None,
            },
            config: "facing = FRONT\n".into(),
        }
    }

    #[test]
    fn append_and_reload() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::create(dir.path(), header()).unwrap();
        let mut r = StageRecord::new("transfer");
        r.outputs.insert("x".into(), Value::from(1.5));
        m.append(r.clone()).unwrap();
        let mut f = StageRecord::new("decompose");
        f.status = StageStatus::Failed;
        m.append(f).unwrap();
        let back = RunManifest::load(dir.path()).unwrap();
        assert_eq!(back, m);
        assert!(back.is_complete("transfer"));
        assert!(!back.is_complete("decompose"));
        assert!(RunManifest::create(dir.path(), header()).is_err());
    }

    #[test]
    fn stage_order() {
        assert_eq!(stage_index("transfer"), Some(0));
        assert_eq!(stage_index("replay"), Some(7));
        assert_eq!(stage_index("stream"), None);
    }
}
