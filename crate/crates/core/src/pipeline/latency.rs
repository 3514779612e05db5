use std::fmt::Write;

use crate::gateway::ledger::{read_entries, report_latency, LatencyReport, MetricKind};

use super::{PipelineError, RunManifest};

/// Per-stage latency means of a run's ledger.
pub fn latency_report(manifest: &RunManifest) -> Result<LatencyReport, PipelineError> {
    let path = manifest.ledger_path();
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(PipelineError::Io(format!("{}: {e}", path.display()))),
    };
    let entries = read_entries(&text).map_err(|e| PipelineError::Manifest(e.to_string()))?;
    Ok(report_latency(&entries))
}

/// Two-column table (per request, per second of video) plus the projected
/// end-to-end time for `video_s` seconds of video. An empty report renders
/// as the header alone.
pub fn render_latency(report: &LatencyReport, video_s: f64) -> String {
    let mut out = format!("{:<22} {:>12} {:>16} {:>6}\n", "stage", "per_request_s", "per_video_second", "count");
    if report.stages.is_empty() {
        return out;
    }
    for s in &report.stages {
        let (a, b) = match s.kind {
            MetricKind::PerRequest => (s.mean.to_string(), "-".to_string()),
            MetricKind::PerVideoSecond => ("-".to_string(), s.mean.to_string()),
        };
        let _ = writeln!(out, "{:<22} {:>12} {:>16} {:>6}", s.stage, a, b, s.count);
    }
    let _ = writeln!(out, "total for {video_s} s of video: {} s", report.total(video_s));
    out
}
