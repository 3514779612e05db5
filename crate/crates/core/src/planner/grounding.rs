//! Surface-level check that a description only names objects present in the
//! scene summary or the goal.

use std::collections::HashSet;

use super::words::{is_in, singular, tokens, CONJUNCTIONS, DETERMINERS, EMBODIMENT_WORDS, NON_NOUNS, PREPOSITIONS};

const MAX_PHRASE: usize = 4;

/// Head word of every determiner-led phrase, in order of appearance.
pub fn object_heads(text: &str) -> Vec<String> {
    let toks = tokens(text);
    let mut heads = Vec::new();
    for (i, t) in toks.iter().enumerate() {
        if !is_in(DETERMINERS, t) {
            continue;
        }
        let phrase: Vec<&String> = toks[i + 1..]
            .iter()
            .take_while(|w| {
                *w != ","
                    && !is_in(DETERMINERS, w)
                    && !is_in(PREPOSITIONS, w)
                    && !is_in(CONJUNCTIONS, w)
                    && !is_in(NON_NOUNS, w)
            })
            .take(MAX_PHRASE)
            .collect();
        if let Some(head) = phrase.last() {
            if !head.chars().all(|c| c.is_ascii_digit()) {
                heads.push((*head).clone());
            }
        }
    }
    heads
}

/// Heads in `description` found neither in `scene`, in `goal`, nor among the
/// embodiment/scene-frame words. Deduplicated, in order of appearance.
pub fn ungrounded_nouns(description: &str, scene: &str, goal: &str) -> Vec<String> {
    let mut allowed: HashSet<String> = tokens(scene)
        .into_iter()
        .chain(tokens(goal))
        .map(|w| singular(&w))
        .collect();
    allowed.extend(EMBODIMENT_WORDS.iter().map(|w| singular(w)));
    let mut seen = HashSet::new();
    object_heads(description)
        .into_iter()
        .filter(|h| !allowed.contains(&singular(h)))
        .filter(|h| seen.insert(h.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heads_skip_adjectives_and_adverbs() {
        assert_eq!(
            object_heads("the person will lift the brown box upright onto a low shelf."),
            ["person", "box", "shelf"]
        );
    }

    #[test]
    fn plural_and_whitelist() {
        let scene = "Two chairs stand between the person and a wooden table.";
        assert!(ungrounded_nouns("walk around the chair to the tables with both hands", scene, "").is_empty());
        assert_eq!(
            ungrounded_nouns("grasp the bottle and the cups on the table", scene, "walk"),
            ["bottle", "cups"]
        );
    }

    #[test]
    fn goal_counts_as_grounding() {
        assert!(ungrounded_nouns("lift the box", "", "pick up the box").is_empty());
    }
}
