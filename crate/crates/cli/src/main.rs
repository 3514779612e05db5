use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use exo_core::bridge::{decode_frame, ExoqReader, FRAME_SIZE};
use exo_core::estimation::ScenarioScript;
use exo_core::kv::KvDoc;
use exo_core::motion::FrameClock;
use exo_core::pipeline::{
    latency_report, render_latency, run_pipeline, PipelineConfig, PipelineError, RunManifest, RunOutcome,
    RunRequest,
};
use exo_core::sim::{replay, FailureClass, HumanoidModel, TargetSpec, Tolerances};

const EXIT_CONFIG: u8 = 2;
const EXIT_STAGE: u8 = 3;
const EXIT_NOT_SUCCESS: u8 = 4;

#[derive(Parser)]
#[command(name = "exo", version, about = "Task instruction and scene image to a replayed humanoid command stream")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Pipeline config file (key = value lines).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline, or resume an earlier run.
    Run {
        #[arg(long)]
        task: Option<String>,
        #[arg(long)]
        image: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArg,
        /// Resume this run at its first incomplete stage.
        #[arg(long, value_name = "RUN_ID", conflicts_with = "run_id")]
        resume: Option<String>,
        /// Name for a new run; derived from the inputs when omitted.
        #[arg(long)]
        run_id: Option<String>,
        #[arg(long, value_name = "STAGE")]
        stop_after: Option<String>,
        /// Overrides the config's scene summary.
        #[arg(long)]
        scene: Option<String>,
    },
    /// Run one stage of an existing run; its predecessors must be complete.
    Stage {
        name: String,
        #[arg(long = "run", value_name = "RUN_ID")]
        run_id: String,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Replay an .exoq command stream and print the feasibility report.
    Replay {
        stream: PathBuf,
        /// Humanoid model file; the built-in model when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Oracle scenario whose targets the stream is checked against.
        #[arg(long)]
        scenario: Option<String>,
        /// Final pelvis target as `x,y`.
        #[arg(long, value_delimiter = ',', num_args = 2, allow_negative_numbers = true)]
        target: Option<Vec<f64>>,
        /// Declared grasp heights in metres.
        #[arg(long = "grasp-height")]
        grasp_heights: Vec<f64>,
        /// Per-frame metrics as CSV.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Latency table of a run's ledger.
    Latency {
        run_id: String,
        #[command(flatten)]
        config: ConfigArg,
        /// Seconds of video for the projected total; defaults to the run's clip.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Generate the run's video again, bypassing the cache, and redo the
    /// stages after it.
    RegenVideo {
        run_id: String,
        #[command(flatten)]
        config: ConfigArg,
    },
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("exo: {msg}");
    ExitCode::from(code)
}

fn pipeline_fail(e: PipelineError) -> ExitCode {
    fail(e.exit_code() as u8, e)
}

fn load_config(path: &Path, scene: Option<String>) -> Result<PipelineConfig, ExitCode> {
    let mut cfg = PipelineConfig::load(path).map_err(pipeline_fail)?;
    if let Some(s) = scene {
        cfg.scene = s;
    }
    Ok(cfg)
}

fn print_outcome(out: &RunOutcome) -> ExitCode {
    println!("run {}", out.manifest.header.run_id);
    let n = out.executed.len() + out.skipped.len();
    for rec in &out.manifest.records[out.manifest.records.len() - n..] {
        println!("  {:<10} {:<15} {:.3} s", rec.stage, rec.status.as_str(), rec.elapsed_s);
    }
    match out.classification {
        Some(c) => {
            println!("replay {}", c.as_str());
            if c == FailureClass::Success {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_NOT_SUCCESS)
            }
        }
        None => ExitCode::SUCCESS,
    }
}

fn execute(cfg: &PipelineConfig, req: &RunRequest) -> ExitCode {
    match run_pipeline(cfg, req) {
        Ok(out) => print_outcome(&out),
        Err(e) => pipeline_fail(e),
    }
}

/// Frame count and control rate read off the stream's first frames.
fn stream_clock(path: &Path) -> Option<FrameClock> {
    let bytes = std::fs::read(path).ok()?;
    let n = bytes.len() / FRAME_SIZE;
    let t = |i: usize| decode_frame(&bytes[i * FRAME_SIZE..(i + 1) * FRAME_SIZE]).ok().map(|f| f.timestamp_s);
    let fps = if n > 1 { 1.0 / (t(1)? - t(0)?) } else { 50.0 };
    FrameClock::new(fps, n).ok()
}

fn replay_cmd(
    stream: &Path,
    model: Option<&Path>,
    scenario: Option<&str>,
    target: Option<Vec<f64>>,
    grasp_heights: Vec<f64>,
    table: Option<&Path>,
) -> ExitCode {
    let model = match model {
        Some(p) => {
            let parsed = std::fs::read_to_string(p)
                .map_err(|e| e.to_string())
                .and_then(|t| KvDoc::parse(&t).map_err(|e| e.to_string()))
                .and_then(|d| HumanoidModel::from_kv(&d).map_err(|e| e.to_string()));
            match parsed {
                Ok(m) => m,
                Err(e) => return fail(EXIT_CONFIG, format!("model {}: {e}", p.display())),
            }
        }
        None => HumanoidModel::default(),
    };
    let mut spec = match scenario {
        Some(s) => {
            let script: ScenarioScript = match s.parse() {
                Ok(v) => v,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            match stream_clock(stream) {
                Some(clock) => script.target_spec(clock),
                None => return fail(EXIT_CONFIG, format!("cannot read a clock from {}", stream.display())),
            }
        }
        None => TargetSpec::default(),
    };
    if let Some(t) = target {
        spec.target_position = Some([t[0], t[1]]);
    }
    if !grasp_heights.is_empty() {
        spec.grasp_heights = grasp_heights;
    }
    spec.tolerances = Tolerances::default();
    let file = match File::open(stream) {
        Ok(f) => f,
        Err(e) => return fail(EXIT_CONFIG, format!("{}: {e}", stream.display())),
    };
    let report = replay(ExoqReader::new(BufReader::new(file)), &model, &spec);
    println!("{}", report.to_json());
    if let Some(path) = table {
        let written = File::create(path).and_then(|f| report.write_table(std::io::BufWriter::new(f)));
        if let Err(e) = written {
            return fail(EXIT_STAGE, format!("{}: {e}", path.display()));
        }
    }
    if report.classification == FailureClass::Success {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NOT_SUCCESS)
    }
}

fn latency_cmd(cfg: &PipelineConfig, run_id: &str, duration: Option<f64>) -> ExitCode {
    let manifest = match RunManifest::load(&cfg.runs_dir.join(run_id)) {
        Ok(m) => m,
        Err(e) => return pipeline_fail(e),
    };
    let clip_duration = manifest.completed("video").ok().and_then(|r| {
        let fps = r.outputs.get("fps")?.as_f64()?;
        let n = r.outputs.get("frame_count")?.as_u64()?;
        Some(n as f64 / fps)
    });
    let d = duration.or(clip_duration).unwrap_or(10.0);
    match latency_report(&manifest) {
        Ok(report) => {
            print!("{}", render_latency(&report, d));
            ExitCode::SUCCESS
        }
        Err(e) => pipeline_fail(e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            task,
            image,
            config,
            resume,
            run_id,
            stop_after,
            scene,
        } => {
            let cfg = match load_config(&config.config, scene) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let req = RunRequest {
                goal: task,
                image,
                resume: resume.is_some(),
                run_id: resume.or(run_id),
                stop_after,
                ..Default::default()
            };
            execute(&cfg, &req)
        }
        Command::Stage { name, run_id, config } => {
            let cfg = match load_config(&config.config, None) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let req = RunRequest {
                run_id: Some(run_id),
                resume: true,
                only: Some(name),
                ..Default::default()
            };
            execute(&cfg, &req)
        }
        Command::Replay {
            stream,
            model,
            scenario,
            target,
            grasp_heights,
            table,
        } => replay_cmd(&stream, model.as_deref(), scenario.as_deref(), target, grasp_heights, table.as_deref()),
        Command::Latency {
            run_id,
            config,
            duration,
        } => match load_config(&config.config, None) {
            Ok(cfg) => latency_cmd(&cfg, &run_id, duration),
            Err(code) => code,
        },
        Command::RegenVideo { run_id, config } => {
            let cfg = match load_config(&config.config, None) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let req = RunRequest {
                run_id: Some(run_id),
                resume: true,
                rerun_from: Some("video".into()),
                regenerate_video: true,
                ..Default::default()
            };
            execute(&cfg, &req)
        }
    }
}
