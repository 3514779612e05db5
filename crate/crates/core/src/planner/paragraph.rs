//! Single-paragraph action chains: parsing by transition words and clause
//! commas, and the matching renderer.

use serde::{Deserialize, Serialize};

use super::words::{is_in, tokens, DETERMINERS, PREPOSITIONS};
use super::PlannerError;

pub const MIN_STEPS: usize = 4;
pub const MAX_STEPS: usize = 8;

const TRANSITIONS: &[&str] = &[
    "first", "firstly", "then", "next", "finally", "afterwards", "afterward", "lastly",
    "subsequently",
];

/// Fragments starting with these words continue the previous step.
const CONTINUATIONS: &[&str] = &["which", "that", "while", "where", "with", "using", "keeping"];

const PARTICLES: &[&str] = &["up", "down", "over", "around", "back", "forward", "away", "out", "off"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionStep {
    pub text: String,
    pub verb: String,
    /// First determiner-led object phrase, if any.
    pub target: Option<String>,
    /// Trailing prepositional phrase after the target, if any.
    pub qualifier: Option<String>,
}

impl ActionStep {
    pub fn parse(text: &str) -> Self {
        let text = text.trim().to_string();
        let words: Vec<&str> = text.split_whitespace().collect();
        let lower: Vec<String> = words.iter().map(|w| w.to_lowercase()).collect();
        let mut verb_len = usize::from(!words.is_empty());
        if words.len() > 1 && is_in(PARTICLES, &lower[1]) {
            verb_len = 2;
        }
        let verb = words[..verb_len].join(" ");
        let mut target = None;
        let mut qualifier = None;
        if let Some(d) = (verb_len..words.len()).find(|&i| is_in(DETERMINERS, &lower[i])) {
            let end = (d + 1..words.len())
                .find(|&i| is_in(PREPOSITIONS, &lower[i]))
                .unwrap_or(words.len());
            if end > d + 1 {
                target = Some(words[d..end].join(" "));
            }
            if end < words.len() {
                qualifier = Some(words[end..].join(" "));
            }
        }
        ActionStep {
            text,
            verb,
            target,
            qualifier,
        }
    }
}

fn is_list_line(line: &str) -> bool {
    let t = line.trim_start();
    if t.starts_with("- ") || t.starts_with("* ") || t.starts_with('•') {
        return true;
    }
    let digits = t.chars().take_while(|c| c.is_ascii_digit()).count();
    digits > 0 && matches!(t[digits..].chars().next(), Some('.') | Some(')'))
}

/// Splits one action-chain paragraph into step texts.
///
/// Rejects multi-paragraph and list-formatted input with `Format`, and a step
/// count outside 4..=8 with `Decomposition` carrying the raw text.
pub fn parse_paragraph(raw: &str) -> Result<Vec<String>, PlannerError> {
    let text = raw.trim();
    if text.is_empty() {
        return Err(PlannerError::Format("empty response".into()));
    }
    let lines: Vec<&str> = text.lines().collect();
    if lines.iter().any(|l| l.trim().is_empty()) {
        return Err(PlannerError::Format("response has more than one paragraph".into()));
    }
    if lines.iter().any(|l| is_list_line(l)) {
        return Err(PlannerError::Format("response uses list formatting".into()));
    }
    let joined = lines.join(" ");

    let mut fragments: Vec<Vec<&str>> = Vec::new();
    for clause in joined.split(['.', '!', '?', ';', ',']) {
        let mut cur: Vec<&str> = Vec::new();
        let words: Vec<&str> = clause.split_whitespace().collect();
        let mut i = 0;
        while i < words.len() {
            let w = bare(words[i]);
            let two = i + 1 < words.len() && w == "after" && bare(words[i + 1]) == "that";
            if is_in(TRANSITIONS, &w) || two {
                // A trailing "and" belongs to the transition.
                if cur.last().is_some_and(|p| bare(p) == "and") {
                    cur.pop();
                }
                fragments.push(std::mem::take(&mut cur));
                i += if two { 2 } else { 1 };
                continue;
            }
            cur.push(words[i]);
            i += 1;
        }
        fragments.push(cur);
    }

    let mut steps: Vec<String> = Vec::new();
    for mut frag in fragments {
        while frag.first().is_some_and(|w| bare(w) == "and") {
            frag.remove(0);
        }
        if frag.is_empty() {
            continue;
        }
        let s = frag.join(" ");
        match steps.last_mut() {
            Some(prev) if is_in(CONTINUATIONS, &bare(frag[0])) => {
                prev.push_str(", ");
                prev.push_str(&s);
            }
            _ => steps.push(s),
        }
    }

    if !(MIN_STEPS..=MAX_STEPS).contains(&steps.len()) {
        return Err(PlannerError::Decomposition {
            count: steps.len(),
            raw: raw.to_string(),
        });
    }
    Ok(steps)
}

fn bare(w: &str) -> String {
    tokens(w).into_iter().find(|t| t != ",").unwrap_or_default()
}

/// `First, a, then b, next c, ..., and finally z.`
pub fn render_paragraph(steps: &[String]) -> String {
    let mut out = String::new();
    let n = steps.len();
    for (i, s) in steps.iter().enumerate() {
        let lead = match i {
            0 => "First, ",
            _ if i + 1 == n => ", and finally ",
            _ if i % 2 == 1 => ", then ",
            _ => ", next ",
        };
        out.push_str(lead);
        out.push_str(s);
    }
    out.push('.');
    out
}

/// Whether a step text survives a render/parse round trip unchanged.
pub fn is_plain_step(s: &str) -> bool {
    let words: Vec<String> = s.split_whitespace().map(bare).collect();
    !s.is_empty()
        && s == s.split_whitespace().collect::<Vec<_>>().join(" ")
        && !s.contains(['.', '!', '?', ';', ',', '\n'])
        && !words.iter().any(|w| is_in(TRANSITIONS, w) || w == "after" || w == "and")
        && !words.first().is_some_and(|w| is_in(CONTINUATIONS, w))
        && !words.iter().any(|w| w.is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BOX: &str = "First, approach the box, then bend down, next grasp the box, then lift \
                       the box, and finally stand upright.";

    #[test]
    fn worked_example_parses_to_five_steps() {
        let steps = parse_paragraph(BOX).unwrap();
        assert_eq!(
            steps,
            ["approach the box", "bend down", "grasp the box", "lift the box", "stand upright"]
        );
    }

    #[test]
    fn free_prose_with_clauses() {
        let p = "First the robot turns toward the table, then it walks forward while keeping \
                 its arms relaxed. Next it stops in front of the table, after that it raises \
                 both hands, and finally it places the cup on the table.";
        let steps = parse_paragraph(p).unwrap();
        assert_eq!(steps.len(), 5);
        assert_eq!(steps[1], "it walks forward while keeping its arms relaxed");
        assert_eq!(steps[4], "it places the cup on the table");
    }

    #[test]
    fn continuation_clause_merges() {
        let p = "First, walk to the shelf, then grasp the bottle, keeping it upright, next lift \
                 it, and finally step back.";
        let steps = parse_paragraph(p).unwrap();
        assert_eq!(steps[1], "grasp the bottle, keeping it upright");
        assert_eq!(steps.len(), 4);
    }

    #[test]
    fn step_count_limits() {
        let three = "First, walk, then turn, and finally stop.";
        assert!(matches!(
            parse_paragraph(three),
            Err(PlannerError::Decomposition { count: 3, .. })
        ));
        let nine: Vec<String> = (0..9).map(|i| format!("do step{i}")).collect();
        assert!(matches!(
            parse_paragraph(&render_paragraph(&nine)),
            Err(PlannerError::Decomposition { count: 9, .. })
        ));
    }

    #[test]
    fn list_and_multi_paragraph_rejected() {
        assert!(matches!(
            parse_paragraph("1. walk\n2. stop"),
            Err(PlannerError::Format(_))
        ));
        assert!(matches!(
            parse_paragraph("First, a, then b.\n\nNext c, and finally d."),
            Err(PlannerError::Format(_))
        ));
    }

    #[test]
    fn render_round_trip() {
        let steps: Vec<String> = ["approach the box", "bend down", "grasp the box", "lift the box"]
            .map(String::from)
            .to_vec();
        assert_eq!(parse_paragraph(&render_paragraph(&steps)).unwrap(), steps);
    }

    #[test]
    fn step_fields() {
        let s = ActionStep::parse("lower the bottle into the basket");
        assert_eq!(s.verb, "lower");
        assert_eq!(s.target.as_deref(), Some("the bottle"));
        assert_eq!(s.qualifier.as_deref(), Some("into the basket"));
        let s = ActionStep::parse("bend down");
        assert_eq!(s.verb, "bend down");
        assert_eq!(s.target, None);
    }
}
