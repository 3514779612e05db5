//! Small word lists shared by the paragraph parser, the step drafter and the
//! grounding check.

pub const DETERMINERS: &[&str] = &[
    "the", "a", "an", "this", "that", "these", "those", "its", "his", "her", "their", "each",
    "every", "another",
];

pub const PREPOSITIONS: &[&str] = &[
    "in", "into", "onto", "on", "under", "over", "to", "toward", "towards", "from", "behind",
    "beside", "near", "next", "at", "around", "across", "above", "below", "with", "through",
    "past", "between", "along", "of", "off", "inside", "against", "by", "for", "until",
];

pub const CONJUNCTIONS: &[&str] = &["and", "or", "but", "while", "then", "so", "as", "before", "after"];

/// Words that are never the head of an object phrase.
pub const NON_NOUNS: &[&str] = &[
    "upright", "down", "up", "forward", "forwards", "backward", "back", "away", "still", "slowly",
    "carefully", "steadily", "level", "again", "straight", "firmly", "gently", "fully", "both",
    "will", "is", "are", "was", "were", "be", "should", "must", "can", "may", "stays", "remains",
];

/// Body, camera and scene-frame words any description may use.
pub const EMBODIMENT_WORDS: &[&str] = &[
    "person", "subject", "man", "human", "robot", "body", "torso", "arm", "hand", "finger", "leg",
    "knee", "hip", "foot", "feet", "head", "shoulder", "elbow", "wrist", "waist", "floor",
    "ground", "camera", "scene", "frame", "position", "posture", "pose", "place", "front", "side",
    "step", "way", "direction", "room", "left", "right", "end", "start", "motion", "balance",
    "grip", "gait", "destination", "environment", "view", "viewpoint", "goal", "task",
];

/// Lower-cased word tokens; punctuation other than hyphen and apostrophe
/// becomes a `,` token so phrase scanning can stop at it.
pub fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() || c == '-' || c == '\'' {
            cur.extend(c.to_lowercase());
        } else {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            if !c.is_whitespace() {
                out.push(",".to_string());
            }
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Crude English singular form used for containment checks.
pub fn singular(word: &str) -> String {
    if word == "feet" {
        return "foot".into();
    }
    if let Some(stem) = word.strip_suffix("ies") {
        if !stem.is_empty() {
            return format!("{stem}y");
        }
    }
    for suffix in ["ches", "shes", "sses", "xes", "zes"] {
        if word.ends_with(suffix) {
            return word[..word.len() - 2].to_string();
        }
    }
    if word.len() > 3 && word.ends_with('s') && !word.ends_with("ss") {
        return word[..word.len() - 1].to_string();
    }
    word.to_string()
}

pub fn is_in(list: &[&str], w: &str) -> bool {
    list.contains(&w)
}
