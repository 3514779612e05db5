//! Rule-based action-chain drafting from a goal sentence. Backs the mock
//! text backend so the pipeline runs without a language model.

use super::paragraph::{MAX_STEPS, MIN_STEPS};
use super::words::{is_in, tokens, DETERMINERS, NON_NOUNS, PREPOSITIONS};

const PADDING: [&str; 4] = [
    "stand still in a stable posture",
    "lower the arms to the sides",
    "keep the torso upright",
    "hold the final posture",
];

const NAV: &[&str] = &[
    "walk", "go", "move", "navigate", "head", "run", "come", "return", "approach", "cross",
];
const PICK: &[&str] = &["pick", "grab", "take", "lift", "raise", "hold", "carry"];
const PLACE: &[&str] = &["place", "put", "insert", "set", "drop", "stack", "pour"];
const THROW: &[&str] = &["throw", "toss"];
const WIPE: &[&str] = &["wipe", "sweep", "clean"];
const DUCK: &[&str] = &["duck", "crouch", "squat"];

/// `the <head>` for the determiner phrase starting at `from`, if any.
fn phrase_at(toks: &[String], from: usize) -> Option<String> {
    let det = (from..toks.len()).find(|&i| is_in(DETERMINERS, &toks[i]))?;
    let stop = |w: &String| w == "," || is_in(PREPOSITIONS, w) || is_in(NON_NOUNS, w) || w == "and";
    let words: Vec<&String> = toks[det + 1..].iter().take_while(|w| !stop(w)).collect();
    let head = words.last()?;
    let det = if toks[det] == "a" || toks[det] == "an" { "the" } else { toks[det].as_str() };
    Some(format!("{det} {head}"))
}

/// Phrase following the first of `preps` in the clause.
fn phrase_after(toks: &[String], preps: &[&str]) -> Option<(String, String)> {
    let i = toks.iter().position(|w| preps.contains(&w.as_str()))?;
    let p = phrase_at(toks, i + 1)?;
    Some((toks[i].clone(), p))
}

fn first_object(toks: &[String]) -> Option<String> {
    let stop = toks
        .iter()
        .position(|w| is_in(PREPOSITIONS, w) && w != "up")
        .unwrap_or(toks.len());
    let det = (1..stop).find(|&i| is_in(DETERMINERS, &toks[i]))?;
    phrase_at(toks, det)
}

fn clause_steps(toks: &[String], last_place: &mut Option<String>) -> Vec<String> {
    let Some(verb) = toks.first() else {
        return Vec::new();
    };
    let verb = verb.as_str();
    let obj = first_object(toks);
    let dest = phrase_after(toks, &["to", "toward", "towards"]).map(|(_, p)| p);
    let mut out = Vec::new();
    if is_in(NAV, verb) {
        let target = dest.or_else(|| if verb == "approach" { phrase_at(toks, 1) } else { None });
        let around = phrase_after(toks, &["around", "past", "between"]);
        match &target {
            Some(t) => out.push(format!("turn toward {t}")),
            None => out.push("face forward".to_string()),
        }
        if let Some((p, o)) = around {
            out.push(format!("walk {p} {o}"));
        }
        match &target {
            Some(t) => {
                out.push(format!("walk toward {t}"));
                out.push(format!("stop in front of {t}"));
            }
            None => {
                out.push("walk forward".to_string());
                out.push("stop walking".to_string());
            }
        }
        *last_place = target;
    } else if verb == "stand" || verb == "rise" || (verb == "get" && toks.get(1).is_some_and(|w| w == "up")) {
        out.push("stand upright".to_string());
    } else if verb == "sit" {
        let seat = phrase_after(toks, &["on", "onto", "in"])
            .map(|(_, p)| p)
            .or_else(|| last_place.clone());
        out.push("turn around".to_string());
        out.push("bend the knees".to_string());
        out.push(match seat {
            Some(s) => format!("sit down on {s}"),
            None => "sit down".to_string(),
        });
    } else if is_in(PLACE, verb) {
        let into = phrase_after(toks, &["into", "onto", "on", "in", "inside"]);
        let obj = obj.unwrap_or_else(|| "the object".to_string());
        match into {
            Some((p, c)) => {
                out.push(format!("approach {c}"));
                out.push(format!("align {obj} above {c}"));
                out.push(format!("lower {obj} {p} {c}"));
            }
            None => {
                out.push(format!("lower {obj}"));
            }
        }
        out.push(format!("release {obj}"));
        out.push("retract the arms".to_string());
    } else if is_in(THROW, verb) {
        let obj = obj.unwrap_or_else(|| "the object".to_string());
        match phrase_after(toks, &["into", "onto", "at", "to", "in"]) {
            Some((p, c)) => {
                out.push(format!("turn toward {c}"));
                out.push(format!("raise {obj}"));
                out.push(format!("throw {obj} {p} {c}"));
            }
            None => {
                out.push(format!("raise {obj}"));
                out.push(format!("throw {obj}"));
            }
        }
        out.push("lower the arms".to_string());
    } else if is_in(PICK, verb) {
        let obj = obj.unwrap_or_else(|| "the object".to_string());
        out.push(format!("approach {obj}"));
        out.push("bend down".to_string());
        out.push(format!("grasp {obj}"));
        out.push(format!("lift {obj}"));
    } else if is_in(WIPE, verb) {
        let obj = obj.unwrap_or_else(|| "the surface".to_string());
        out.push(format!("approach {obj}"));
        out.push(format!("reach toward {obj}"));
        out.push(format!("{verb} {obj}"));
        out.push("retract the arms".to_string());
    } else if is_in(DUCK, verb) {
        let under = phrase_after(toks, &["under", "below", "beneath"]).map(|(_, p)| p);
        if let Some(u) = &under {
            out.push(format!("approach {u}"));
        }
        out.push("bend down".to_string());
        out.push(match &under {
            Some(u) => format!("{verb} under {u}"),
            None => verb.to_string(),
        });
        out.push("stand upright".to_string());
    } else {
        if let Some(o) = &obj {
            out.push(format!("turn toward {o}"));
        }
        let words: Vec<&str> = toks
            .iter()
            .map(String::as_str)
            .filter(|w| *w != "," && !matches!(*w, "then" | "next" | "first" | "finally"))
            .collect();
        out.push(words.join(" "));
    }
    out
}

/// Drafts 4..=8 plain steps for `goal`.
pub fn draft_steps(goal: &str) -> Vec<String> {
    let toks = tokens(goal);
    let mut clauses: Vec<Vec<String>> = vec![Vec::new()];
    for t in toks {
        if t == "," || t == "and" || t == "then" {
            if !clauses.last().is_some_and(Vec::is_empty) {
                clauses.push(Vec::new());
            }
        } else {
            clauses.last_mut().expect("non-empty").push(t);
        }
    }
    let mut steps: Vec<String> = Vec::new();
    let mut last_place = None;
    for c in clauses.iter().filter(|c| !c.is_empty()) {
        for s in clause_steps(c, &mut last_place) {
            if steps.last() != Some(&s) && !s.is_empty() {
                steps.push(s);
            }
        }
    }
    for p in PADDING {
        if steps.len() >= MIN_STEPS {
            break;
        }
        steps.push(p.to_string());
    }
    steps.truncate(MAX_STEPS);
    steps
}
