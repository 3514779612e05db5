//! Staged, resumable end-to-end run: embodiment transfer through replay,
//! with a manifest persisted after every stage.

mod config;
mod latency;
mod manifest;

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde_json::json;
use thiserror::Error;

use crate::bridge::{make_reference_window, stream, ExoqReader, WriterSink};
use crate::estimation::{
    assemble, estimate_body, estimate_hands, quantize_states, wrist_axis_deviation, EstimatorBackend,
    OracleConfig, OracleEstimator, RemoteEstimator, ScenarioScript, VideoClip,
};
use crate::gateway::live::{HttpImageBackend, HttpTextBackend, HttpVideoBackend};
use crate::gateway::{
    ArtifactRef, ArtifactStore, Clock, Gateway, ImageBackend, LatencyLedger, LedgerEntry, ManualClock, MediaType,
    MockImageBackend, MockTextBackend, MockVideoBackend, SystemClock, TextBackend, VideoBackend, VideoJobOptions,
    STAGE_BODY_ESTIMATION, STAGE_HAND_ESTIMATION, STAGE_TASK_DECOMPOSITION,
};
use crate::motion::MotionArchive;
use crate::planner::{
    build_embodiment_prompt, build_video_prompt, classify_difficulty, construct_description, decompose,
    ActionChain, DifficultyTier, TaskInstruction, TextService,
};
use crate::sim::{replay, FailureClass, TargetSpec};

pub use config::{EstimatorChoice, PipelineConfig, ServiceBackend};
pub use latency::{latency_report, render_latency};
pub use manifest::{stage_index, RunHeader, RunManifest, StageRecord, StageStatus, LEDGER_FILE, MANIFEST_FILE, STAGES};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("stage {stage} failed: {message}")]
    Stage { stage: String, message: String },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl PipelineError {
    /// CLI exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            _ => 3,
        }
    }
}

/// What to run. A fresh run needs `goal` and `image`; a resumed one reads
/// them from its manifest.
#[derive(Clone, Debug, Default)]
pub struct RunRequest {
    pub goal: Option<String>,
    pub image: Option<PathBuf>,
    pub run_id: Option<String>,
    pub resume: bool,
    /// Stop once this stage has completed.
    pub stop_after: Option<String>,
    /// Run only this stage; its predecessors must be complete.
    pub only: Option<String>,
    /// Execute this stage and everything after it even if complete.
    pub rerun_from: Option<String>,
    /// Bypass the video request cache.
    pub regenerate_video: bool,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub executed: Vec<String>,
    pub skipped: Vec<String>,
    pub classification: Option<FailureClass>,
}

type StageResult = Result<StageRecord, String>;

/// Backend instances for one run.
#[derive(Clone)]
pub struct Backends {
    pub text: Arc<dyn TextBackend>,
    pub image: Arc<dyn ImageBackend>,
    pub video: Arc<dyn VideoBackend>,
    /// Used instead of the oracle when set.
    pub estimator: Option<Arc<dyn EstimatorBackend>>,
}

impl Backends {
    pub fn mock() -> Self {
        Self {
            text: Arc::new(MockTextBackend::new()),
            image: Arc::new(MockImageBackend::new()),
            video: Arc::new(MockVideoBackend::new()),
            estimator: None,
        }
    }

    pub fn from_config(cfg: &PipelineConfig) -> Result<Self, PipelineError> {
        let timeout = Duration::from_secs_f64(cfg.request_timeout_s);
        let cfg_err = |e: String| PipelineError::Config(e);
        let mut b = Self::mock();
        if let ServiceBackend::Live { endpoint } = &cfg.text {
            b.text = Arc::new(HttpTextBackend::new(endpoint, timeout).map_err(|e| cfg_err(e.to_string()))?);
        }
        if let ServiceBackend::Live { endpoint } = &cfg.image {
            b.image = Arc::new(HttpImageBackend::new(endpoint, timeout).map_err(|e| cfg_err(e.to_string()))?);
        }
        if let ServiceBackend::Live { endpoint } = &cfg.video {
            b.video = Arc::new(HttpVideoBackend::new(endpoint, timeout).map_err(|e| cfg_err(e.to_string()))?);
        }
        if let EstimatorChoice::Remote { endpoint } = &cfg.estimator {
            b.estimator = Some(Arc::new(RemoteEstimator::new(endpoint).map_err(|e| cfg_err(e.to_string()))?));
        }
        Ok(b)
    }
}

/// Oracle scenario for a run: configured, or picked from the task tier.
pub fn scenario_for(cfg: &PipelineConfig, tier: DifficultyTier) -> ScenarioScript {
    cfg.scenario.unwrap_or(match tier {
        DifficultyTier::B => ScenarioScript::walk_line(),
        DifficultyTier::A | DifficultyTier::S => ScenarioScript::reach_grasp_place(),
    })
}

fn tier_of(m: &RunManifest) -> Result<DifficultyTier, PipelineError> {
    let v = m.completed("decompose")?.output("tier")?;
    v.as_str()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| PipelineError::Manifest(format!("bad tier {v}")))
}

fn chain_of(m: &RunManifest) -> Result<ActionChain, PipelineError> {
    let steps: Vec<String> = serde_json::from_value(m.completed("decompose")?.output("steps")?.clone())
        .map_err(|e| PipelineError::Manifest(format!("bad steps: {e}")))?;
    Ok(ActionChain::from_texts(&steps, &m.header.task.goal_text))
}

fn read_archive(store: &ArtifactStore, art: &ArtifactRef) -> Result<MotionArchive, String> {
    let bytes = store.read(art).map_err(|e| e.to_string())?;
    MotionArchive::from_bytes(&bytes).map_err(|e| e.to_string())
}

struct Engine<'a> {
    cfg: &'a PipelineConfig,
    gateway: Gateway,
    clock: Arc<dyn Clock>,
    regenerate_video: bool,
    backends: Backends,
}

impl Engine<'_> {
    fn oracle(&self, m: &RunManifest) -> OracleEstimator {
        let tier = tier_of(m).unwrap_or(DifficultyTier::B);
        OracleEstimator {
            config: OracleConfig {
                script: scenario_for(self.cfg, tier),
                seed: self.cfg.seed,
                noise: self.cfg.oracle_noise,
            },
            model: self.cfg.model.clone(),
        }
    }

    fn text_service(&self) -> impl TextService + '_ {
        self.gateway.text_service(self.backends.text.as_ref(), STAGE_TASK_DECOMPOSITION)
    }

    fn clip(&self, m: &RunManifest) -> Result<VideoClip, String> {
        let art = m.completed("video").map_err(|e| e.to_string())?.artifact("clip").map_err(|e| e.to_string())?;
        VideoClip::from_artifact(art.clone(), Some(self.cfg.facing)).map_err(|e| e.to_string())
    }

    fn run_stage(&self, stage: &str, m: &RunManifest) -> StageResult {
        let oracle = self.oracle(m);
        let estimator: &dyn EstimatorBackend = match &self.backends.estimator {
            Some(e) => e.as_ref(),
            None => &oracle,
        };
        let using_oracle = self.backends.estimator.is_none();
        let task = &m.header.task;
        let mut rec = StageRecord::new(stage);
        let s = |e: &dyn std::fmt::Display| e.to_string();
        let result: Result<(), String> = (|| {
            match stage {
                "transfer" => {
                    let doc = build_embodiment_prompt(task).map_err(|e| s(&e))?;
                    rec.input_digests = vec![m.header.image.digest.clone()];
                    let out = self
                        .gateway
                        .edit_image(&m.header.image, &doc, self.backends.image.as_ref())
                        .map_err(|e| s(&e))?;
                    rec.artifacts.insert("human_image".into(), out);
                }
                "decompose" => {
                    let text = self.text_service();
                    let tier = classify_difficulty(task, Some(&text));
                    let chain = decompose(task, &text).map_err(|e| s(&e))?;
                    rec.outputs.insert("tier".into(), json!(tier.as_str()));
                    rec.outputs.insert("steps".into(), json!(chain.texts()));
                }
                "fuse" => {
                    let chain = chain_of(m).map_err(|e| s(&e))?;
                    let text = self.text_service();
                    let description = construct_description(task, &chain, &text).map_err(|e| s(&e))?;
                    rec.outputs.insert("description".into(), json!(description));
                }
                "video" => {
                    let tier = tier_of(m).map_err(|e| s(&e))?;
                    let fuse = m.completed("fuse").map_err(|e| s(&e))?;
                    let description = fuse.output("description").map_err(|e| s(&e))?.as_str().unwrap_or_default();
                    let human = m.completed("transfer").map_err(|e| s(&e))?.artifact("human_image").map_err(|e| s(&e))?;
                    let doc = build_video_prompt(tier, description).map_err(|e| s(&e))?;
                    rec.input_digests = vec![human.digest.clone()];
                    let opts = VideoJobOptions {
                        timeout_s: self.cfg.video_timeout_s,
                        regenerate: self.regenerate_video,
                    };
                    let job = self
                        .gateway
                        .run_video_job(human, &doc, self.backends.video.as_ref(), opts)
                        .map_err(|e| s(&e))?;
                    let clip = job.artifact.clone().ok_or("video job returned no artifact")?;
                    rec.outputs.insert("job_id".into(), json!(job.job_id));
                    rec.outputs.insert("fps".into(), json!(clip.fps));
                    rec.outputs.insert("frame_count".into(), json!(clip.frame_count));
                    rec.artifacts.insert("clip".into(), clip);
                }
                "body_est" | "hand_est" => {
                    let clip = self.clip(m)?;
                    rec.input_digests = vec![clip.artifact.digest.clone()];
                    // Video seconds as the generator reports them: frames / fps.
                    let duration = clip.frame_count as f64 / clip.fps;
                    let start = self.clock.now_s();
                    let (archive, ledger_stage) = if stage == "body_est" {
                        let body = estimate_body(&clip, estimator).map_err(|e| s(&e))?;
                        (MotionArchive::from_body(&body, clip.fps), STAGE_BODY_ESTIMATION)
                    } else {
                        let hands = estimate_hands(&clip, self.cfg.facing, estimator).map_err(|e| s(&e))?;
                        if using_oracle {
                            let script = oracle.generate(&clip, self.cfg.facing).map_err(|e| s(&e))?;
                            let dev = wrist_axis_deviation(&hands, &script.hands).map_err(|e| s(&e))?;
                            rec.outputs.insert("wrist_axis_deviation_rad".into(), json!(dev));
                        }
                        (MotionArchive::from_hands(&hands, clip.fps), STAGE_HAND_ESTIMATION)
                    };
                    let elapsed = self.clock.now_s() - start;
                    if duration > 0.0 {
                        self.gateway
                            .ledger
                            .record(LedgerEntry::per_video_second(ledger_stage, elapsed, duration))
                            .map_err(|e| s(&e))?;
                    }
                    let art = self
                        .gateway
                        .store
                        .put(&archive.to_bytes(), MediaType::MotionArchive)
                        .map_err(|e| s(&e))?;
                    rec.artifacts.insert(if stage == "body_est" { "body" } else { "hands" }.into(), art);
                }
                "assemble" => {
                    let body_art = m.completed("body_est").map_err(|e| s(&e))?.artifact("body").map_err(|e| s(&e))?;
                    let hand_art = m.completed("hand_est").map_err(|e| s(&e))?.artifact("hands").map_err(|e| s(&e))?;
                    rec.input_digests = vec![body_art.digest.clone(), hand_art.digest.clone()];
                    let body = read_archive(&self.gateway.store, body_art)?.body.ok_or("body archive has no body stream")?;
                    let hands = read_archive(&self.gateway.store, hand_art)?.hands.ok_or("hand archive has no hand stream")?;
                    let states = quantize_states(&hands, self.cfg.open_threshold, self.cfg.closed_threshold)
                        .map_err(|e| s(&e))?;
                    let motion = assemble(&body, &hands, &states).map_err(|e| s(&e))?;
                    let transitions: Vec<usize> = (0..2)
                        .map(|c| {
                            let col: Vec<u8> = motion.states.column(c).collect();
                            col.windows(2).filter(|w| w[0] != w[1]).count()
                        })
                        .collect();
                    let art = self
                        .gateway
                        .store
                        .put(&MotionArchive::from_motion(&motion).to_bytes(), MediaType::MotionArchive)
                        .map_err(|e| s(&e))?;
                    rec.outputs.insert("frames".into(), json!(motion.frame_count()));
                    rec.outputs.insert("state_transitions".into(), json!(transitions));
                    rec.artifacts.insert("motion".into(), art);
                }
                "replay" => {
                    let motion_art =
                        m.completed("assemble").map_err(|e| s(&e))?.artifact("motion").map_err(|e| s(&e))?;
                    rec.input_digests = vec![motion_art.digest.clone()];
                    let motion = read_archive(&self.gateway.store, motion_art)?.into_motion().map_err(|e| s(&e))?;
                    let mut sink = WriterSink::new(Vec::new());
                    let summary = stream(&motion, self.cfg.control_fps, &self.cfg.model.hand, &mut sink).map_err(|e| s(&e))?;
                    let bytes = sink.into_inner();
                    let stream_art = self.gateway.store.put(&bytes, MediaType::CommandStream).map_err(|e| s(&e))?;
                    let stream_path = m.dir.join("stream.exoq");
                    std::fs::write(&stream_path, &bytes).map_err(|e| s(&e))?;
                    rec.outputs.insert("frames_sent".into(), json!(summary.frames_sent));
                    rec.outputs.insert("control_fps".into(), json!(summary.control_fps));
                    rec.artifacts.insert("stream".into(), stream_art);
                    if self.cfg.replay {
                        let file = std::fs::File::open(&stream_path).map_err(|e| s(&e))?;
                        let frames: Vec<_> = ExoqReader::new(std::io::BufReader::new(file)).collect();
                        if let Some(Ok(_)) = frames.first() {
                            let decoded: Vec<_> = frames.iter().filter_map(|f| f.as_ref().ok().copied()).collect();
                            let horizon = self.cfg.window.min(decoded.len() - 1);
                            make_reference_window(&decoded, 0, horizon).map_err(|e| s(&e))?;
                        }
                        let mut spec = if using_oracle {
                            oracle.config.script.target_spec(motion.clock())
                        } else {
                            TargetSpec::default()
                        };
                        spec.tolerances = self.cfg.tolerances;
                        let report = replay(frames, &self.cfg.model, &spec);
                        let json_text = report.to_json();
                        let report_art = self
                            .gateway
                            .store
                            .put(json_text.as_bytes(), MediaType::Json)
                            .map_err(|e| s(&e))?;
                        std::fs::write(m.dir.join("report.json"), &json_text).map_err(|e| s(&e))?;
                        rec.outputs.insert("classification".into(), json!(report.classification.as_str()));
                        rec.outputs.insert("final_position_error".into(), json!(report.final_position_error));
                        rec.outputs.insert("foot_slide_total".into(), json!(report.foot_slide_total));
                        rec.outputs.insert("violations".into(), json!(report.violations.len()));
                        rec.artifacts.insert("report".into(), report_art);
                    }
                }
                other => return Err(format!("unknown stage {other}")),
            }
            Ok(())
        })();
        result.map(|()| rec)
    }
}

fn default_run_id(runs_dir: &Path, goal: &str, image_digest: &str, config: &str) -> String {
    let stem = &crate::gateway::sha256_hex(format!("{goal}\n{image_digest}\n{config}").as_bytes())[..12];
    (1..)
        .map(|n| format!("run-{stem}-{n}"))
        .find(|id| !runs_dir.join(id).exists())
        .expect("unbounded")
}

fn check_stage_name(name: &Option<String>) -> Result<(), PipelineError> {
    match name {
        Some(n) if stage_index(n).is_none() => Err(PipelineError::Config(format!(
            "unknown stage {n:?}; stages are {}",
            STAGES.join(", ")
        ))),
        _ => Ok(()),
    }
}

fn classification_of(m: &RunManifest) -> Option<FailureClass> {
    let v = m.latest("replay")?.outputs.get("classification")?.clone();
    serde_json::from_value(v).ok()
}

pub fn run_pipeline(cfg: &PipelineConfig, req: &RunRequest) -> Result<RunOutcome, PipelineError> {
    run_pipeline_with(cfg, req, Backends::from_config(cfg)?)
}

pub fn run_pipeline_with(cfg: &PipelineConfig, req: &RunRequest, backends: Backends) -> Result<RunOutcome, PipelineError> {
    check_stage_name(&req.stop_after)?;
    check_stage_name(&req.only)?;
    check_stage_name(&req.rerun_from)?;

    let store = ArtifactStore::open(&cfg.store_dir).map_err(|e| PipelineError::Io(e.to_string()))?;
    let mut manifest = if req.resume {
        let id = req
            .run_id
            .as_deref()
            .ok_or_else(|| PipelineError::Config("resume needs a run id".into()))?;
        let m = RunManifest::load(&cfg.runs_dir.join(id))?;
        if let Some(goal) = &req.goal {
            if goal != &m.header.task.goal_text {
                return Err(PipelineError::Config(format!("run {id} was started for a different task")));
            }
        }
        m
    } else {
        let goal = req.goal.clone().ok_or_else(|| PipelineError::Config("a task is required".into()))?;
        if cfg.scene.trim().is_empty() {
            return Err(PipelineError::Config(
                "scene (initial state of the robot and its surroundings) is required".into(),
            ));
        }
        let task = TaskInstruction::new(goal.clone(), cfg.scene.clone()).map_err(|e| PipelineError::Config(e.to_string()))?;
        let image_path = req.image.as_ref().ok_or_else(|| PipelineError::Config("a scene image is required".into()))?;
        let png = std::fs::read(image_path)
            .map_err(|e| PipelineError::Config(format!("scene image {}: {e}", image_path.display())))?;
        crate::gateway::media::check_png(&png)
            .map_err(|e| PipelineError::Config(format!("scene image {}: {e}", image_path.display())))?;
        let image = store.put(&png, MediaType::PngImage).map_err(|e| PipelineError::Io(e.to_string()))?;
        let run_id = match &req.run_id {
            Some(id) => id.clone(),
            None => default_run_id(&cfg.runs_dir, &goal, &image.digest, &cfg.snapshot),
        };
        if run_id.is_empty() || run_id.contains(['/', '\\']) || run_id.starts_with('.') {
            return Err(PipelineError::Config(format!("bad run id {run_id:?}")));
        }
        RunManifest::create(
            &cfg.runs_dir.join(&run_id),
            RunHeader {
                run_id,
                task,
                image,
                config: cfg.snapshot.clone(),
            },
        )?
    };

    let clock: Arc<dyn Clock> = if cfg.all_mock() {
        Arc::new(ManualClock::new())
    } else {
        Arc::new(SystemClock::default())
    };
    let ledger = LatencyLedger::open(manifest.ledger_path()).map_err(|e| PipelineError::Io(e.to_string()))?;
    let engine = Engine {
        cfg,
        gateway: Gateway::new(store, ledger, clock.clone()),
        clock,
        regenerate_video: req.regenerate_video,
        backends,
    };

    let only = req.only.as_deref().and_then(stage_index);
    let rerun = req.rerun_from.as_deref().and_then(stage_index);
    let stop = req.stop_after.as_deref().and_then(stage_index);
    let mut executed = Vec::new();
    let mut skipped = Vec::new();
    let mut prefix_complete = true;
    for (i, stage) in STAGES.iter().enumerate() {
        if let Some(o) = only {
            if i < o {
                manifest.completed(stage).map_err(|e| PipelineError::Config(format!("cannot run {}: {e}", STAGES[o])))?;
                continue;
            }
            if i > o {
                break;
            }
        }
        let forced = only == Some(i) || rerun.is_some_and(|r| i >= r);
        if !forced && prefix_complete && manifest.is_complete(stage) {
            let mut rec = manifest.latest(stage).expect("complete").clone();
            rec.status = StageStatus::SkippedCached;
            rec.elapsed_s = 0.0;
            rec.diagnostics = None;
            manifest.append(rec)?;
            skipped.push(stage.to_string());
        } else {
            prefix_complete = false;
            let start = engine.clock.now_s();
            let result = engine.run_stage(stage, &manifest);
            let elapsed = engine.clock.now_s() - start;
            match result {
                Ok(mut rec) => {
                    rec.elapsed_s = elapsed;
                    manifest.append(rec)?;
                    executed.push(stage.to_string());
                }
                Err(message) => {
                    let mut rec = StageRecord::new(stage);
                    rec.status = StageStatus::Failed;
                    rec.elapsed_s = elapsed;
                    rec.diagnostics = Some(message.clone());
                    manifest.append(rec)?;
                    return Err(PipelineError::Stage {
                        stage: stage.to_string(),
                        message,
                    });
                }
            }
        }
        if stop == Some(i) {
            break;
        }
    }
    let classification = classification_of(&manifest);
    Ok(RunOutcome {
        manifest,
        executed,
        skipped,
        classification,
    })
}

/// Location of a run's directory.
pub fn run_dir(cfg: &PipelineConfig, run_id: &str) -> PathBuf {
    cfg.runs_dir.join(run_id)
}

/// Final motion archive bytes of a completed run.
pub fn motion_archive_bytes(m: &RunManifest) -> Result<Vec<u8>, PipelineError> {
    let art = m.completed("assemble")?.artifact("motion")?;
    crate::gateway::store::read_verified(art).map_err(|e| PipelineError::Io(e.to_string()))
}

/// Report JSON of a completed run, if replay ran.
pub fn report_json(m: &RunManifest) -> Result<Option<String>, PipelineError> {
    let rec = m.completed("replay")?;
    match rec.artifacts.get("report") {
        Some(art) => {
            let bytes = crate::gateway::store::read_verified(art).map_err(|e| PipelineError::Io(e.to_string()))?;
            Ok(Some(String::from_utf8_lossy(&bytes).into_owned()))
        }
        None => Ok(None),
    }
}

