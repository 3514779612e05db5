use std::sync::Arc;

use proptest::prelude::*;

use exo_core::gateway::{
    report_latency, ArtifactStore, Gateway, GenerationJob, JobKind, JobStatus, LatencyLedger, LedgerEntry,
    ManualClock, MediaType, MetricKind, MockImageBackend, MockTextBackend, MockVideoBackend, VideoJobOptions,
};
use exo_core::planner::{build_decomposition_prompt, build_embodiment_prompt, build_video_prompt, DifficultyTier, TaskInstruction};

const PNG_HEX: &str = "89504e470d0a1a0a0000000d49484452000000010000000108060000001f15c4890000000a49444154789c63000100000500010d0a2db40000000049454e44ae426082";

fn status() -> impl Strategy<Value = JobStatus> {
    prop_oneof![
        Just(JobStatus::Pending),
        Just(JobStatus::Running),
        Just(JobStatus::Succeeded),
        Just(JobStatus::Failed),
        Just(JobStatus::TimedOut),
    ]
}

fn rank(s: JobStatus) -> u8 {
    match s {
        JobStatus::Pending => 0,
        JobStatus::Running => 1,
        _ => 2,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn job_status_only_moves_forward(
        reports in prop::collection::vec((status(), 0.0f64..100.0), 0..20),
        submitted in 0.0f64..50.0,
    ) {
        let mut job = GenerationJob::new("j", JobKind::Video, submitted, "d");
        for (s, now) in reports {
            let before = job.status;
            let changed = job.observe(s, now);
            prop_assert!(rank(job.status) >= rank(before));
            if before.is_terminal() {
                prop_assert!(!changed);
                prop_assert_eq!(job.status, before);
            }
            prop_assert_eq!(changed, job.status != before);
            prop_assert_eq!(job.completed_at.is_some(), job.status.is_terminal());
            if let Some(t) = job.completed_at {
                prop_assert!(t >= job.submitted_at);
            }
        }
    }

    #[test]
    fn ledger_projection_is_linear(
        per_request in prop::collection::vec((0.0f64..50.0, 0usize..3), 1..10),
        per_second in prop::collection::vec((0.0f64..500.0, 0.5f64..30.0, 3usize..6), 1..10),
        a in 0.0f64..60.0,
        b in 0.0f64..60.0,
    ) {
        let mut entries = Vec::new();
        for (e, s) in &per_request {
            entries.push(LedgerEntry::per_request(&format!("r{s}"), *e));
        }
        for (e, v, s) in &per_second {
            entries.push(LedgerEntry::per_video_second(&format!("v{s}"), *e, *v));
        }
        let r = report_latency(&entries);
        let fixed = r.total(0.0);
        prop_assert!((r.total(a + b) - (r.total(a) + r.total(b) - fixed)).abs() <= 1e-9 * (1.0 + r.total(a + b)));
        // Each stage mean is the plain mean of its normalised entries.
        for m in &r.stages {
            let vals: Vec<f64> = entries.iter().filter(|e| e.stage == m.stage && e.kind == m.kind).map(|e| e.value()).collect();
            prop_assert_eq!(m.count, vals.len());
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            prop_assert!((m.mean - mean).abs() <= 1e-12 * (1.0 + mean));
        }
        prop_assert!(r.stages.iter().all(|m| m.kind == MetricKind::PerRequest || m.stage.starts_with('v')));
    }
}

fn gateway(dir: &std::path::Path) -> Gateway {
    Gateway::new(
        ArtifactStore::open(dir.join("store")).unwrap(),
        LatencyLedger::open(dir.join("ledger.ndjson")).unwrap(),
        Arc::new(ManualClock::new()),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn repeated_requests_hit_the_cache(goal in "[a-z]{3,10}( [a-z]{2,8}){1,5}", scene in "[a-z ]{5,40}") {
        let dir = tempfile::tempdir().unwrap();
        let gw = gateway(dir.path());
        let task = TaskInstruction::new(goal, format!("a {scene}")).unwrap();
        let png = gw.store.put(&hex::decode(PNG_HEX).unwrap(), MediaType::PngImage).unwrap();

        let text = MockTextBackend::new();
        let doc = build_decomposition_prompt(&task).unwrap();
        let first = gw.complete_text(&doc, &text, "task_decomposition").unwrap();
        prop_assert_eq!(gw.complete_text(&doc, &text, "task_decomposition").unwrap(), first);
        prop_assert_eq!(text.calls(), 1);

        let image = MockImageBackend::new();
        let edit = build_embodiment_prompt(&task).unwrap();
        let a = gw.edit_image(&png, &edit, &image).unwrap();
        prop_assert_eq!(gw.edit_image(&png, &edit, &image).unwrap(), a);
        prop_assert_eq!(image.calls(), 1);

        let video = MockVideoBackend::new();
        let vp = build_video_prompt(DifficultyTier::B, &task.goal_text).unwrap();
        let j1 = gw.run_video_job(&png, &vp, &video, VideoJobOptions::default()).unwrap();
        let j2 = gw.run_video_job(&png, &vp, &video, VideoJobOptions::default()).unwrap();
        prop_assert_eq!(j1.artifact, j2.artifact);
        prop_assert_eq!(video.submits(), 1);
        let again = VideoJobOptions { regenerate: true, ..VideoJobOptions::default() };
        gw.run_video_job(&png, &vp, &video, again).unwrap();
        prop_assert_eq!(video.submits(), 2);

        // One ledger row per real backend call, none for cache hits.
        prop_assert_eq!(gw.ledger.entries().len(), 4);
    }
}

#[test]
fn mock_video_backoff_totals_six_seconds() {
    let dir = tempfile::tempdir().unwrap();
    let clock = Arc::new(ManualClock::new());
    let gw = Gateway::new(
        ArtifactStore::open(dir.path().join("store")).unwrap(),
        LatencyLedger::in_memory(),
        clock.clone(),
    );
    let png = gw.store.put(&hex::decode(PNG_HEX).unwrap(), MediaType::PngImage).unwrap();
    let vp = build_video_prompt(DifficultyTier::B, "walk to the table").unwrap();
    let video = MockVideoBackend::new();
    let job = gw.run_video_job(&png, &vp, &video, VideoJobOptions::default()).unwrap();
    assert_eq!(job.status, JobStatus::Succeeded);
    let slept: f64 = clock.sleeps().iter().map(|d| d.as_secs_f64()).sum();
    assert_eq!(slept, 6.0);
    let e = &gw.ledger.entries()[0];
    assert_eq!(e.video_s, Some(10.0));
    assert_eq!(e.value(), 0.6);
}
