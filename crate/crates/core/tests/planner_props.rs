use proptest::prelude::*;

use exo_core::planner::{
    build_decomposition_prompt, build_difficulty_prompt, build_embodiment_prompt, build_fusion_prompt,
    build_video_prompt, fallback_tier, is_plain_step, parse_paragraph, render_paragraph, ActionChain, DifficultyTier,
    PlannerError, PromptDocument, TaskInstruction,
};

const VIDEO_B_HEADERS: [&str; 8] = ["Shot", "Scene", "Subject", "Action", "Motion", "Consistency", "End State", "TASK"];
const VIDEO_AS_HEADERS: [&str; 9] =
    ["Shot", "Scene", "Subject", "Task", "Motion", "Execution", "Consistency", "End State", "TASK"];
const EMBODIMENT_HEADERS: [&str; 8] = [
    "Style",
    "Initial State Information",
    "Mandatory Alignment Principle",
    "Subject Details",
    "Attire",
    "Hands",
    "Important Constraints",
    "TASK",
];

fn user_text() -> impl Strategy<Value = String> {
    // Brackets, dollar signs and braces try to smuggle in placeholders.
    "[a-zA-Z0-9 \\[\\]${}_.,\n]{1,80}".prop_filter("non-blank", |s| !s.trim().is_empty())
}

fn clean(doc: &PromptDocument) -> bool {
    let text = doc.render();
    doc.placeholders.is_empty() && !text.contains('[') && !text.contains("${")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn rendered_prompts_are_pure(goal in user_text(), scene in user_text(), desc in user_text()) {
        let task = TaskInstruction::new(goal.clone(), scene.clone()).unwrap();
        let chain = ActionChain::from_texts(&["walk to the table", "reach for the cup"], &goal);
        let docs = [
            build_decomposition_prompt(&task).unwrap(),
            build_difficulty_prompt(&task).unwrap(),
            build_fusion_prompt(&task, &chain).unwrap(),
            build_embodiment_prompt(&task).unwrap(),
            build_video_prompt(DifficultyTier::B, &desc).unwrap(),
            build_video_prompt(DifficultyTier::A, &desc).unwrap(),
            build_video_prompt(DifficultyTier::S, &desc).unwrap(),
        ];
        for d in &docs {
            prop_assert!(clean(d), "{}", d.render());
        }
        prop_assert_eq!(docs[4].headers(), VIDEO_B_HEADERS.to_vec());
        prop_assert_eq!(docs[5].headers(), VIDEO_AS_HEADERS.to_vec());
        prop_assert_eq!(docs[6].headers(), VIDEO_AS_HEADERS.to_vec());
        prop_assert_eq!(docs[3].headers(), EMBODIMENT_HEADERS.to_vec());
        // Same inputs, same bytes.
        prop_assert_eq!(build_embodiment_prompt(&task).unwrap().render(), docs[3].render());
    }

    #[test]
    fn fallback_tier_is_total(goal in "\\PC{0,120}") {
        let t = fallback_tier(&goal);
        prop_assert!(matches!(t, DifficultyTier::B | DifficultyTier::A | DifficultyTier::S));
        prop_assert_eq!(fallback_tier(&goal), t);
    }
}

fn step() -> impl Strategy<Value = String> {
    "[a-z]{2,9}( [a-z]{2,9}){0,3}".prop_filter("plain", |s| is_plain_step(s))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn paragraph_round_trip(steps in prop::collection::vec(step(), 4..=8)) {
        prop_assert_eq!(parse_paragraph(&render_paragraph(&steps)).unwrap(), steps);
    }

    #[test]
    fn out_of_range_counts_are_rejected(steps in prop_oneof![
        prop::collection::vec(step(), 1..=3),
        prop::collection::vec(step(), 9..=14),
    ]) {
        let n = steps.len();
        let raw = render_paragraph(&steps);
        prop_assert_eq!(
            parse_paragraph(&raw),
            Err(PlannerError::Decomposition { count: n, raw: raw.clone() })
        );
    }
}

#[test]
fn three_and_nine_steps_fail() {
    let three = "First, approach the box, then bend down, and finally lift the box.";
    assert!(matches!(parse_paragraph(three), Err(PlannerError::Decomposition { count: 3, .. })));
    let nine = "First, walk to the door, then open the door, next step through, then turn left, next walk \
                to the desk, then sit down, next pick up the pen, then write a note, and finally stand up.";
    assert!(matches!(parse_paragraph(nine), Err(PlannerError::Decomposition { count: 9, .. })));
}

#[test]
fn box_example_has_five_steps() {
    let box_text = "First, approach the box, then bend down, next grasp the box, then lift the box, and finally \
                    stand upright.";
    assert_eq!(
        parse_paragraph(box_text).unwrap(),
        ["approach the box", "bend down", "grasp the box", "lift the box", "stand upright"]
    );
}

#[test]
fn list_and_multi_paragraph_replies_are_format_errors() {
    assert!(matches!(parse_paragraph("1. walk\n2. stop"), Err(PlannerError::Format(_))));
    assert!(matches!(
        parse_paragraph("First, a, then b.\n\nNext c, then d."),
        Err(PlannerError::Format(_))
    ));
}
