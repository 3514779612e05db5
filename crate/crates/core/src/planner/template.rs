//! Prompt templates: data files with a small header, `== Section` lines and
//! `${SLOT}` markers.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use super::PlannerError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PromptKind {
    EmbodimentTransfer,
    Decomposition,
    DescriptionFusion,
    VideoB,
    VideoAs,
    Difficulty,
}

impl PromptKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptKind::EmbodimentTransfer => "EMBODIMENT_TRANSFER",
            PromptKind::Decomposition => "DECOMPOSITION",
            PromptKind::DescriptionFusion => "DESCRIPTION_FUSION",
            PromptKind::VideoB => "VIDEO_B",
            PromptKind::VideoAs => "VIDEO_AS",
            PromptKind::Difficulty => "DIFFICULTY",
        }
    }
}

impl FromStr for PromptKind {
    type Err = PlannerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "EMBODIMENT_TRANSFER" => PromptKind::EmbodimentTransfer,
            "DECOMPOSITION" => PromptKind::Decomposition,
            "DESCRIPTION_FUSION" => PromptKind::DescriptionFusion,
            "VIDEO_B" => PromptKind::VideoB,
            "VIDEO_AS" => PromptKind::VideoAs,
            "DIFFICULTY" => PromptKind::Difficulty,
            other => return Err(PlannerError::Template(format!("unknown prompt kind {other:?}"))),
        })
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Template {
    pub kind: PromptKind,
    pub title: String,
    pub preamble: String,
    pub sections: Vec<(String, String)>,
}

impl Template {
    pub fn parse(text: &str) -> Result<Self, PlannerError> {
        let bad = |m: &str| PlannerError::Template(m.to_string());
        let (head, body) = text.split_once("\n---\n").ok_or_else(|| bad("missing header separator"))?;
        let mut kind = None;
        let mut title = None;
        for line in head.lines() {
            match line.split_once(':') {
                Some(("kind", v)) => kind = Some(v.trim().parse()?),
                Some(("title", v)) => title = Some(v.trim().to_string()),
                _ => return Err(bad(&format!("bad header line {line:?}"))),
            }
        }
        let mut preamble = String::new();
        let mut sections: Vec<(String, String)> = Vec::new();
        for line in body.lines() {
            if let Some(h) = line.strip_prefix("== ") {
                sections.push((h.trim().to_string(), String::new()));
                continue;
            }
            let target = match sections.last_mut() {
                Some((_, b)) => b,
                None => &mut preamble,
            };
            if !target.is_empty() {
                target.push('\n');
            }
            target.push_str(line);
        }
        if sections.is_empty() {
            return Err(bad("template has no sections"));
        }
        Ok(Template {
            kind: kind.ok_or_else(|| bad("missing kind"))?,
            title: title.ok_or_else(|| bad("missing title"))?,
            preamble: preamble.trim().to_string(),
            sections: sections
                .into_iter()
                .map(|(h, b)| (h, b.trim().to_string()))
                .collect(),
        })
    }

    /// Substitutes slots. Slots without a value stay as `${NAME}` markers and
    /// are listed in the document's `placeholders`.
    pub fn fill(&self, slots: &BTreeMap<&str, String>) -> PromptDocument {
        let mut missing = Vec::new();
        let mut sub = |s: &str| substitute(s, slots, &mut missing);
        let preamble = sub(&self.preamble);
        let sections = self
            .sections
            .iter()
            .map(|(h, b)| (h.clone(), sub(b)))
            .collect();
        missing.dedup();
        PromptDocument {
            kind: self.kind,
            title: self.title.clone(),
            preamble,
            sections,
            placeholders: missing,
        }
    }

    /// Slot names in order of first appearance.
    pub fn slots(&self) -> Vec<String> {
        let mut out = Vec::new();
        let texts = std::iter::once(&self.preamble).chain(self.sections.iter().map(|(_, b)| b));
        for t in texts {
            substitute(t, &BTreeMap::new(), &mut out);
        }
        let mut seen = std::collections::HashSet::new();
        out.retain(|s| seen.insert(s.clone()));
        out
    }
}

fn substitute(text: &str, slots: &BTreeMap<&str, String>, missing: &mut Vec<String>) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(at) = rest.find("${") {
        out.push_str(&rest[..at]);
        let after = &rest[at + 2..];
        match after.find('}') {
            Some(end) => {
                let name = &after[..end];
                match slots.get(name) {
                    Some(v) => out.push_str(v),
                    None => {
                        out.push_str(&rest[at..at + 3 + end]);
                        missing.push(name.to_string());
                    }
                }
                rest = &after[end + 1..];
            }
            None => {
                out.push_str(&rest[at..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

/// Makes a user value safe to splice into a template: square brackets become
/// parentheses, `${` loses its brace and whitespace runs collapse to one
/// space.
pub fn sanitize(value: &str) -> String {
    value
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .replace('[', "(")
        .replace(']', ")")
        .replace("${", "$(")
}

/// A rendered prompt: ordered (header, body) sections plus any slot names left
/// unresolved.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptDocument {
    pub kind: PromptKind,
    pub title: String,
    pub preamble: String,
    pub sections: Vec<(String, String)>,
    pub placeholders: Vec<String>,
}

impl PromptDocument {
    pub fn headers(&self) -> Vec<&str> {
        self.sections.iter().map(|(h, _)| h.as_str()).collect()
    }

    pub fn section(&self, header: &str) -> Option<&str> {
        self.sections
            .iter()
            .find(|(h, _)| h == header)
            .map(|(_, b)| b.as_str())
    }

    /// Errors naming the first unresolved slot.
    pub fn ensure_resolved(&self) -> Result<(), PlannerError> {
        match self.placeholders.first() {
            Some(slot) => Err(PlannerError::UnresolvedSlot(slot.clone())),
            None => Ok(()),
        }
    }

    pub fn render(&self) -> String {
        let mut out = format!("{}\n{}\n", self.title, self.preamble);
        for (h, b) in &self.sections {
            out.push_str(&format!("\n{h}.\n{b}\n"));
        }
        out
    }
}

impl fmt::Display for PromptDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

fn load(text: &str) -> Template {
    Template::parse(text).expect("bundled template parses")
}

pub static DECOMPOSITION: LazyLock<Template> =
    LazyLock::new(|| load(include_str!("../../templates/decomposition.txt")));
pub static EMBODIMENT: LazyLock<Template> =
    LazyLock::new(|| load(include_str!("../../templates/embodiment.txt")));
pub static FUSION: LazyLock<Template> =
    LazyLock::new(|| load(include_str!("../../templates/fusion.txt")));
pub static VIDEO_B: LazyLock<Template> =
    LazyLock::new(|| load(include_str!("../../templates/video_b.txt")));
pub static VIDEO_AS: LazyLock<Template> =
    LazyLock::new(|| load(include_str!("../../templates/video_as.txt")));
pub static DIFFICULTY: LazyLock<Template> =
    LazyLock::new(|| load(include_str!("../../templates/classification.txt")));

/// Fills `template` and fails if any slot is missing or given an empty value.
pub fn render_strict(
    template: &Template,
    values: &[(&'static str, &str)],
) -> Result<PromptDocument, PlannerError> {
    let mut slots = BTreeMap::new();
    for (name, v) in values {
        let v = sanitize(v);
        if v.is_empty() {
            return Err(PlannerError::UnresolvedSlot((*name).to_string()));
        }
        slots.insert(*name, v);
    }
    let doc = template.fill(&slots);
    doc.ensure_resolved()?;
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_templates_parse_without_brackets() {
        for t in [&*DECOMPOSITION, &*EMBODIMENT, &*FUSION, &*VIDEO_B, &*VIDEO_AS, &*DIFFICULTY] {
            let all: String = std::iter::once(t.preamble.clone())
                .chain(t.sections.iter().map(|(h, b)| format!("{h}{b}")))
                .collect();
            assert!(!all.contains('['), "{}", t.title);
            assert!(!t.slots().is_empty());
        }
        assert_eq!(VIDEO_B.slots(), vec!["NAVIGATION_ACTION"]);
        assert_eq!(
            VIDEO_AS.slots(),
            vec!["TASK_ACTION_CHAIN", "TASK_SPECIFIC_EXECUTION_BLOCK"]
        );
    }

    #[test]
    fn fill_reports_missing_slots() {
        let doc = VIDEO_AS.fill(&BTreeMap::from([("TASK_ACTION_CHAIN", "x".to_string())]));
        assert_eq!(doc.placeholders, vec!["TASK_SPECIFIC_EXECUTION_BLOCK"]);
        assert!(doc.render().contains("${TASK_SPECIFIC_EXECUTION_BLOCK}"));
        assert_eq!(
            doc.ensure_resolved(),
            Err(PlannerError::UnresolvedSlot("TASK_SPECIFIC_EXECUTION_BLOCK".into()))
        );
    }

    #[test]
    fn values_are_not_rescanned() {
        let doc = render_strict(&VIDEO_B, &[("NAVIGATION_ACTION", "go to ${GOAL} [x]")]).unwrap();
        let action = doc.section("Action").unwrap();
        assert!(action.ends_with("go to $(GOAL} (x)"));
        assert!(doc.placeholders.is_empty());
    }

    #[test]
    fn render_layout() {
        let doc = render_strict(&VIDEO_B, &[("NAVIGATION_ACTION", "walk to the table")]).unwrap();
        let text = doc.render();
        assert!(text.starts_with("B-Level Navigation Task Generation Prompt\n"));
        assert!(text.contains("\nShot.\n"));
        assert!(text.contains("\nTASK.\n"));
    }
}
