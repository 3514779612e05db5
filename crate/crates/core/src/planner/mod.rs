//! Instruction to prompt documents: action-chain decomposition, difficulty
//! routing, description fusion and the image/video prompt templates.

pub mod draft;
pub mod grounding;
pub mod paragraph;
pub mod template;
mod words;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::GatewayError;
use crate::validation::ValidationReport;

pub use draft::draft_steps;
pub use grounding::{object_heads, ungrounded_nouns};
pub use paragraph::{is_plain_step, parse_paragraph, render_paragraph, ActionStep, MAX_STEPS, MIN_STEPS};
pub use template::{sanitize, PromptDocument, PromptKind, Template};

#[derive(Debug, Error, PartialEq)]
pub enum PlannerError {
    #[error("template error: {0}")]
    Template(String),
    #[error("template slot {0} is unresolved or empty")]
    UnresolvedSlot(String),
    #[error("scene summary is required for this prompt")]
    MissingState,
    #[error("goal text is empty")]
    EmptyGoal,
    #[error("response format: {0}")]
    Format(String),
    #[error("decomposition has {count} sub-actions, expected 4 to 8: {raw:?}")]
    Decomposition { count: usize, raw: String },
    #[error("description names objects not in the scene or goal: {}", .0.join(", "))]
    Grounding(Vec<String>),
    #[error(transparent)]
    Backend(#[from] GatewayError),
}

/// Completes a resolved prompt document. Implemented by the gateway, which
/// adds caching and latency bookkeeping on top of a raw backend.
pub trait TextService {
    fn complete_text(&self, doc: &PromptDocument) -> Result<String, GatewayError>;
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskInstruction {
    pub goal_text: String,
    /// Structured initial-state text; may be empty except for embodiment
    /// transfer.
    pub scene_summary: String,
}

impl TaskInstruction {
    pub fn new(goal_text: impl Into<String>, scene_summary: impl Into<String>) -> Result<Self, PlannerError> {
        let goal_text = goal_text.into();
        if goal_text.trim().is_empty() {
            return Err(PlannerError::EmptyGoal);
        }
        Ok(Self {
            goal_text,
            scene_summary: scene_summary.into(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionChain {
    pub steps: Vec<ActionStep>,
    pub source_goal: String,
}

impl ActionChain {
    pub fn from_texts<S: AsRef<str>>(texts: &[S], source_goal: &str) -> Self {
        Self {
            steps: texts.iter().map(|t| ActionStep::parse(t.as_ref())).collect(),
            source_goal: source_goal.to_string(),
        }
    }

    pub fn texts(&self) -> Vec<String> {
        self.steps.iter().map(|s| s.text.clone()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DifficultyTier {
    B,
    A,
    S,
}

impl DifficultyTier {
    pub fn as_str(self) -> &'static str {
        match self {
            DifficultyTier::B => "B",
            DifficultyTier::A => "A",
            DifficultyTier::S => "S",
        }
    }
}

impl FromStr for DifficultyTier {
    type Err = PlannerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "B" => Ok(DifficultyTier::B),
            "A" => Ok(DifficultyTier::A),
            "S" => Ok(DifficultyTier::S),
            other => Err(PlannerError::Format(format!("unknown tier {other:?}"))),
        }
    }
}

impl fmt::Display for DifficultyTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn scene_or_none(task: &TaskInstruction) -> &str {
    if task.scene_summary.trim().is_empty() {
        "not provided"
    } else {
        &task.scene_summary
    }
}

pub fn build_decomposition_prompt(task: &TaskInstruction) -> Result<PromptDocument, PlannerError> {
    template::render_strict(
        &template::DECOMPOSITION,
        &[("GOAL", &task.goal_text), ("SCENE", scene_or_none(task))],
    )
}

pub fn build_difficulty_prompt(task: &TaskInstruction) -> Result<PromptDocument, PlannerError> {
    template::render_strict(
        &template::DIFFICULTY,
        &[("GOAL", &task.goal_text), ("SCENE", scene_or_none(task))],
    )
}

/// Chain steps joined with `; ` for the fusion prompt's input block.
pub fn chain_line(chain: &ActionChain) -> String {
    chain.texts().join("; ")
}

pub fn build_fusion_prompt(task: &TaskInstruction, chain: &ActionChain) -> Result<PromptDocument, PlannerError> {
    template::render_strict(
        &template::FUSION,
        &[
            ("OBSERVATION", scene_or_none(task)),
            ("CHAIN", &chain_line(chain)),
            ("GOAL", &task.goal_text),
        ],
    )
}

pub fn build_embodiment_prompt(task: &TaskInstruction) -> Result<PromptDocument, PlannerError> {
    if task.scene_summary.trim().is_empty() {
        return Err(PlannerError::MissingState);
    }
    template::render_strict(&template::EMBODIMENT, &[("INITIAL_STATE", &task.scene_summary)])
}

/// Default execution block for tiers A and S.
pub fn default_execution_block(tier: DifficultyTier) -> &'static str {
    match tier {
        DifficultyTier::S => {
            "perform each step of the action chain in order, pausing to align the hand with the \
             target before every contact and keeping held items steady until release."
        }
        _ => {
            "perform each step of the action chain in order as one coordinated whole-body \
             movement, keeping balance over the feet throughout."
        }
    }
}

pub fn build_video_prompt(tier: DifficultyTier, description: &str) -> Result<PromptDocument, PlannerError> {
    build_video_prompt_with(tier, description, default_execution_block(tier))
}

pub fn build_video_prompt_with(
    tier: DifficultyTier,
    description: &str,
    execution_block: &str,
) -> Result<PromptDocument, PlannerError> {
    match tier {
        DifficultyTier::B => template::render_strict(&template::VIDEO_B, &[("NAVIGATION_ACTION", description)]),
        DifficultyTier::A | DifficultyTier::S => template::render_strict(
            &template::VIDEO_AS,
            &[
                ("TASK_ACTION_CHAIN", description),
                ("TASK_SPECIFIC_EXECUTION_BLOCK", execution_block),
            ],
        ),
    }
}

pub fn validate_chain(chain: &ActionChain) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = chain.steps.len();
    if !(MIN_STEPS..=MAX_STEPS).contains(&n) {
        report.push("steps", None, None, format!("{n} steps, expected {MIN_STEPS} to {MAX_STEPS}"));
    }
    for (i, s) in chain.steps.iter().enumerate() {
        if s.text.trim().is_empty() {
            report.push("steps", Some(i), None, "empty step");
        }
        if i > 0 && s.text.trim().eq_ignore_ascii_case(chain.steps[i - 1].text.trim()) {
            report.push("steps", Some(i), None, "duplicate of the previous step");
        }
    }
    report
}

pub fn decompose(task: &TaskInstruction, text: &dyn TextService) -> Result<ActionChain, PlannerError> {
    let doc = build_decomposition_prompt(task)?;
    let raw = text.complete_text(&doc)?;
    let steps = parse_paragraph(&raw)?;
    let chain = ActionChain::from_texts(&steps, &task.goal_text);
    let report = validate_chain(&chain);
    if !report.is_empty() {
        return Err(PlannerError::Format(report.to_string()));
    }
    Ok(chain)
}

const S_WORDS: &[&str] = &[
    "place", "places", "placing", "placed", "insert", "inserts", "inserting", "inserted", "throw",
    "throws", "throwing", "threw", "toss", "tossing", "pour", "pours", "pouring", "stack",
    "stacks", "stacking", "hang", "hanging",
];
const A_WORDS: &[&str] = &[
    "sit", "sits", "sitting", "sat", "lift", "lifts", "lifting", "sweep", "sweeps", "sweeping",
    "wipe", "wipes", "wiping", "duck", "ducks", "ducking", "crouch", "crouching", "squat",
    "squatting", "bend", "bending", "push", "pushing", "pull", "pulling", "pick", "picking",
    "grasp", "grab", "carry", "carrying", "kick", "kicking", "climb", "climbing", "kneel",
    "kneeling", "lie", "open", "close",
];

/// Keyword rubric: fine placement verbs give S, whole-body interaction verbs
/// give A, anything else is navigation (B). Total over any input.
pub fn fallback_tier(goal: &str) -> DifficultyTier {
    let toks = words::tokens(goal);
    let has = |list: &[&str]| toks.iter().any(|t| list.contains(&t.as_str()));
    let put_into = toks.iter().any(|t| t == "put")
        && toks.iter().any(|t| matches!(t.as_str(), "into" | "onto" | "in" | "on" | "inside"));
    if has(S_WORDS) || put_into {
        DifficultyTier::S
    } else if has(A_WORDS) {
        DifficultyTier::A
    } else {
        DifficultyTier::B
    }
}

/// Reads `Tier: X` (or a bare `X`) from a classifier reply.
pub fn parse_tier_reply(reply: &str) -> Option<DifficultyTier> {
    for line in reply.lines() {
        let l = line.trim();
        let v = l
            .strip_prefix("Tier:")
            .or_else(|| l.strip_prefix("tier:"))
            .unwrap_or(l)
            .trim()
            .trim_end_matches('.');
        if let Ok(t) = v.parse() {
            return Some(t);
        }
    }
    None
}

/// Asks the backend when one is given; falls back to the keyword rubric if
/// there is none, it fails, or its reply is unreadable.
pub fn classify_difficulty(task: &TaskInstruction, text: Option<&dyn TextService>) -> DifficultyTier {
    let asked = text.and_then(|svc| {
        let doc = build_difficulty_prompt(task).ok()?;
        let reply = svc.complete_text(&doc).ok()?;
        parse_tier_reply(&reply)
    });
    asked.unwrap_or_else(|| fallback_tier(&task.goal_text))
}

pub fn construct_description(
    task: &TaskInstruction,
    chain: &ActionChain,
    text: &dyn TextService,
) -> Result<String, PlannerError> {
    let doc = build_fusion_prompt(task, chain)?;
    let raw = text.complete_text(&doc)?;
    let description = raw.trim();
    if description.is_empty() {
        return Err(PlannerError::Format("empty description".into()));
    }
    if description.lines().any(|l| l.trim().is_empty()) {
        return Err(PlannerError::Format("description has more than one paragraph".into()));
    }
    let leaks = ungrounded_nouns(description, &task.scene_summary, &task.goal_text);
    if !leaks.is_empty() {
        return Err(PlannerError::Grounding(leaks));
    }
    Ok(description.split_whitespace().collect::<Vec<_>>().join(" "))
}

/// Deterministic description in the shape the fusion prompt asks for.
pub fn draft_description(scene: &str, steps: &[String]) -> String {
    let mut out = String::from("Starting from the initial position, the person will ");
    let n = steps.len();
    for (i, s) in steps.iter().enumerate() {
        if i > 0 {
            out.push_str(if i + 1 == n { ", and finally " } else { ", then " });
        }
        out.push_str(s);
    }
    out.push_str(", ending in a stable posture.");
    let scene = scene.split_whitespace().collect::<Vec<_>>().join(" ");
    if !scene.is_empty() && scene != "not provided" {
        out.push_str(" The scene stays as observed: ");
        out.push_str(scene.trim_end_matches('.'));
        out.push('.');
    }
    out
}
