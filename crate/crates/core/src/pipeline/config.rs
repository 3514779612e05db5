use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bridge::{DEFAULT_CONTROL_FPS, DEFAULT_WINDOW_HORIZON};
use crate::estimation::{ScenarioScript, CLOSED_THRESHOLD, OPEN_THRESHOLD};
use crate::gateway::live::{IMAGE_KEY_VAR, TEXT_KEY_VAR, VIDEO_KEY_VAR};
use crate::kv::KvDoc;
use crate::motion::FacingMode;
use crate::sim::{HumanoidModel, Tolerances};

use super::PipelineError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ServiceBackend {
    Mock,
    Live { endpoint: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EstimatorChoice {
    Oracle,
    Remote { endpoint: String },
}

/// Everything a run needs besides the task and the scene image. Parsed from
/// a `key = value` file; unknown keys are rejected.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub store_dir: PathBuf,
    pub runs_dir: PathBuf,
    pub text: ServiceBackend,
    pub image: ServiceBackend,
    pub video: ServiceBackend,
    pub estimator: EstimatorChoice,
    /// Oracle scenario; derived from the task tier when absent.
    pub scenario: Option<ScenarioScript>,
    pub seed: u64,
    pub oracle_noise: f64,
    pub facing: FacingMode,
    pub scene: String,
    pub open_threshold: f64,
    pub closed_threshold: f64,
    pub control_fps: f64,
    pub window: usize,
    pub tolerances: Tolerances,
    pub video_timeout_s: f64,
    pub request_timeout_s: f64,
    pub replay: bool,
    pub model: HumanoidModel,
    /// The text the config was parsed from, kept in the manifest.
    pub snapshot: String,
}

const KEYS: &[&str] = &[
    "store",
    "runs",
    "text_backend",
    "image_backend",
    "video_backend",
    "estimator",
    "scenario",
    "seed",
    "oracle_noise",
    "facing",
    "scene",
    "open_threshold",
    "closed_threshold",
    "control_fps",
    "window",
    "height_tol",
    "dist_tol",
    "video_timeout_s",
    "request_timeout_s",
    "replay",
    "model",
];

fn service(doc: &KvDoc, key: &str, var: &str) -> Result<ServiceBackend, PipelineError> {
    match doc.get(key).unwrap_or("mock") {
        "mock" => Ok(ServiceBackend::Mock),
        v => {
            let endpoint = v
                .strip_prefix("live:")
                .filter(|e| !e.trim().is_empty())
                .ok_or_else(|| PipelineError::Config(format!("{key} must be `mock` or `live:<url>`, got {v:?}")))?;
            if std::env::var(var).map_or(true, |k| k.trim().is_empty()) {
                return Err(PipelineError::Config(format!("{key} is live but {var} is not set")));
            }
            Ok(ServiceBackend::Live {
                endpoint: endpoint.trim().to_string(),
            })
        }
    }
}

fn parsed<T: FromStr>(doc: &KvDoc, key: &str, default: T) -> Result<T, PipelineError> {
    Ok(doc
        .get_parsed(key)
        .map_err(|e| PipelineError::Config(e.to_string()))?
        .unwrap_or(default))
}

impl PipelineConfig {
    /// Parses config text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, PipelineError> {
        let doc = KvDoc::parse(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        if let Some(k) = doc.keys().find(|k| !KEYS.contains(k)) {
            return Err(PipelineError::Config(format!("unknown config key {k:?}")));
        }
        let path = |key: &str, default: &str| base.join(doc.get(key).unwrap_or(default));
        let estimator = match doc.get("estimator").unwrap_or("oracle") {
            "oracle" => EstimatorChoice::Oracle,
            v => EstimatorChoice::Remote {
                endpoint: v
                    .strip_prefix("remote:")
                    .filter(|e| !e.trim().is_empty())
                    .ok_or_else(|| {
                        PipelineError::Config(format!("estimator must be `oracle` or `remote:<url>`, got {v:?}"))
                    })?
                    .trim()
                    .to_string(),
            },
        };
        let scenario = match doc.get("scenario") {
            Some(s) => Some(s.parse().map_err(|e| PipelineError::Config(format!("scenario: {e}")))?),
            None => None,
        };
        let facing = doc
            .get("facing")
            .ok_or_else(|| PipelineError::Config("facing (FRONT or BACK) is required".into()))?
            .parse()
            .map_err(|e| PipelineError::Config(format!("facing: {e}")))?;
        let model = match doc.get("model") {
            Some(p) => {
                let file = base.join(p);
                let text = std::fs::read_to_string(&file)
                    .map_err(|e| PipelineError::Config(format!("model file {}: {e}", file.display())))?;
                let kv = KvDoc::parse(&text).map_err(|e| PipelineError::Config(format!("model file: {e}")))?;
                HumanoidModel::from_kv(&kv).map_err(|e| PipelineError::Config(format!("model file: {e}")))?
            }
            None => HumanoidModel::default(),
        };
        let defaults = Tolerances::default();
        let cfg = Self {
            store_dir: path("store", "exo-store"),
            runs_dir: path("runs", "runs"),
            text: service(&doc, "text_backend", TEXT_KEY_VAR)?,
            image: service(&doc, "image_backend", IMAGE_KEY_VAR)?,
            video: service(&doc, "video_backend", VIDEO_KEY_VAR)?,
            estimator,
            scenario,
            seed: parsed(&doc, "seed", 0u64)?,
            oracle_noise: parsed(&doc, "oracle_noise", 0.0)?,
            facing,
            scene: doc.get("scene").unwrap_or("").to_string(),
            open_threshold: parsed(&doc, "open_threshold", OPEN_THRESHOLD)?,
            closed_threshold: parsed(&doc, "closed_threshold", CLOSED_THRESHOLD)?,
            control_fps: parsed(&doc, "control_fps", DEFAULT_CONTROL_FPS)?,
            window: parsed(&doc, "window", DEFAULT_WINDOW_HORIZON)?,
            tolerances: Tolerances {
                height_tol: parsed(&doc, "height_tol", defaults.height_tol)?,
                dist_tol: parsed(&doc, "dist_tol", defaults.dist_tol)?,
            },
            video_timeout_s: parsed(&doc, "video_timeout_s", 900.0)?,
            request_timeout_s: parsed(&doc, "request_timeout_s", 120.0)?,
            replay: parsed(&doc, "replay", true)?,
            model,
            snapshot: text.to_string(),
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("config {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn check(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if !(0.0 < self.closed_threshold && self.closed_threshold < self.open_threshold && self.open_threshold < 1.0) {
            return bad(format!(
                "thresholds need 0 < closed ({}) < open ({}) < 1",
                self.closed_threshold, self.open_threshold
            ));
        }
        if !(self.control_fps.is_finite() && self.control_fps > 0.0) {
            return bad(format!("control_fps must be positive, got {}", self.control_fps));
        }
        if self.window == 0 {
            return bad("window must be at least 1".into());
        }
        if !(self.video_timeout_s > 0.0 && self.request_timeout_s > 0.0) {
            return bad("timeouts must be positive".into());
        }
        if !(self.tolerances.height_tol > 0.0 && self.tolerances.dist_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.oracle_noise) {
            return bad(format!("oracle_noise must lie in [0, 1], got {}", self.oracle_noise));
        }
        Ok(())
    }

    /// True when every service runs in process, so a virtual clock is used.
    pub fn all_mock(&self) -> bool {
        self.text == ServiceBackend::Mock
            && self.image == ServiceBackend::Mock
            && self.video == ServiceBackend::Mock
            && self.estimator == EstimatorChoice::Oracle
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let c = PipelineConfig::parse("facing = FRONT\n", Path::new("/tmp/x")).unwrap();
        assert_eq!(c.store_dir, Path::new("/tmp/x/exo-store"));
        assert!(c.all_mock());
        assert_eq!(c.open_threshold, 0.7);
        assert_eq!(c.control_fps, 50.0);
    }

    #[test]
    fn rejects_bad_configs() {
        let base = Path::new(".");
        for text in [
            "",
            "facing = SIDEWAYS",
            "facing = FRONT\nopen_threshold = 0.2",
            "facing = FRONT\ncolour = red",
            "facing = FRONT\nestimator = gpu",
            "facing = FRONT\nscenario = JUMP",
            "facing = FRONT\ntext_backend = live:",
        ] {
            assert!(matches!(PipelineConfig::parse(text, base), Err(PipelineError::Config(_))), "{text}");
        }
    }

    #[test]
    fn live_backend_needs_key() {
        // The variable name is never set in the test environment.
        let err = PipelineConfig::parse("facing = BACK\nvideo_backend = live:https://example.invalid", Path::new("."));
        if std::env::var(VIDEO_KEY_VAR).is_err() {
            assert!(matches!(err, Err(PipelineError::Config(m)) if m.contains(VIDEO_KEY_VAR)));
        }
    }

    #[test]
    fn remote_estimator_and_scenario() {
        let c = PipelineConfig::parse(
            "facing = BACK\nestimator = remote:http://127.0.0.1:9\nscenario = WALK_LINE(speed=0.5)",
            Path::new("."),
        )
        .unwrap();
        assert_eq!(
            c.estimator,
            EstimatorChoice::Remote {
                endpoint: "http://127.0.0.1:9".into()
            }
        );
        assert_eq!(c.scenario, Some(ScenarioScript::WalkLine { speed: 0.5 }));
        assert!(!c.all_mock());
    }
}
