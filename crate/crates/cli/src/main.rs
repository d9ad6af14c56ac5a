use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use omagent_core::eval::{load_dataset, run_benchmark, BenchmarkOptions, EvalReport, Mode};
use omagent_core::fixtures;
use omagent_core::video::DetectionParams;
use omagent_core::workspace::Workspace;

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_EMPTY_DATASET: u8 = 3;

#[derive(Parser)]
#[command(name = "omagent", version, about = "Long-video question answering over a timestamped knowledge store")]
struct Cli {
    /// Workspace directory (providers.json, settings.json, store, video index).
    #[arg(long, short = 'w', global = true, env = "OMAGENT_WORKSPACE", default_value = ".omagent")]
    workspace: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment, caption and store one video from its manifest.
    Ingest(IngestArgs),
    /// Answer a question about an ingested video.
    Ask(AskArgs),
    /// Inspect the knowledge store.
    Store {
        #[command(subcommand)]
        command: StoreCommand,
    },
    /// Inspect the tool catalog.
    Tools {
        #[command(subcommand)]
        command: ToolsCommand,
    },
    /// Score a system on a question dataset.
    Eval(EvalArgs),
    /// Write the synthetic fixture videos, datasets and scripts.
    Fixtures(FixturesArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Frame-difference threshold for scene cuts, in (0, 1).
    #[arg(long)]
    threshold: Option<f64>,
    /// Minimum segment length in seconds.
    #[arg(long = "min-seg")]
    min_seg: Option<f64>,
    /// Frames captioned per segment.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args)]
struct AskArgs {
    #[arg(long, required_unless_present = "global")]
    video: Option<String>,
    #[arg(long)]
    q: String,
    /// Write the execution trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Segments retrieved per query.
    #[arg(long)]
    k: Option<usize>,
    /// Retrieve across every ingested video.
    #[arg(long)]
    global: bool,
}

#[derive(Subcommand)]
enum StoreCommand {
    /// Entry counts and dimension.
    Stats,
    /// One JSON line per entry.
    Dump {
        #[arg(long)]
        video: Option<String>,
    },
}

#[derive(Subcommand)]
enum ToolsCommand {
    /// Print the catalog shown to the agent.
    List,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_parser = parse_mode)]
    mode: Mode,
    #[arg(long)]
    out: PathBuf,
    /// Write one trace per question into this directory.
    #[arg(long)]
    traces: Option<PathBuf>,
    #[arg(long)]
    concurrency: Option<usize>,
    #[arg(long)]
    global: bool,
}

#[derive(Args)]
struct FixturesArgs {
    #[arg(long)]
    out: PathBuf,
    /// Also ingest both videos, leaving `out` ready as a workspace.
    #[arg(long)]
    ingest: bool,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    Mode::parse(s).ok_or_else(|| format!("unknown mode {s:?}; expected omagent, frames_stt or video2rag"))
}

fn ingest(ws: &mut Workspace, args: &IngestArgs) -> anyhow::Result<u8> {
    let mut params: DetectionParams = ws.settings.detection;
    if let Some(t) = args.threshold {
        params.diff_threshold = t;
    }
    if let Some(s) = args.min_seg {
        params.min_segment_seconds = s;
    }
    if let Some(k) = args.k {
        params.frames_per_segment = k;
    }
    let report = ws.ingest(&args.manifest, Some(params))?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    if report.failed() > 0 {
        eprintln!("{} of {} segments failed", report.failed(), report.segments.len());
        return Ok(EXIT_RUNTIME);
    }
    Ok(0)
}

fn ask(ws: &Workspace, args: &AskArgs) -> anyhow::Result<u8> {
    let session = ws.session()?;
    let mut config = ws.settings.query;
    if let Some(k) = args.k {
        config.k = k;
    }
    let video = if args.global { None } else { args.video.as_deref() };
    let answer = ws.ask(&session, &args.q, video, config)?;
    if let Some(path) = &args.trace {
        answer.trace.save(path).with_context(|| format!("writing trace {}", path.display()))?;
    }
    for notice in &answer.trace.notices {
        eprintln!("note: {notice}");
    }
    println!("{}", answer.text);
    Ok(0)
}

fn eval(ws: &Workspace, args: &EvalArgs) -> anyhow::Result<u8> {
    let questions = load_dataset(&args.dataset)?;
    if questions.is_empty() {
        EvalReport::assemble(args.mode, Vec::new()).save(&args.out)?;
        eprintln!("dataset {} is empty", args.dataset.display());
        return Ok(EXIT_EMPTY_DATASET);
    }
    let session = ws.session()?;
    let answerer = ws.answerer(&session, args.mode, args.global);
    let opts = BenchmarkOptions {
        concurrency: args.concurrency.unwrap_or(ws.settings.eval_concurrency),
        trace_dir: args.traces.clone(),
    };
    let report = run_benchmark(&questions, answerer.as_ref(), &ws.video_types(), &opts)?;
    report.save(&args.out)?;
    println!("{}: {}/{} ({:.3})", args.mode.name(), report.total.correct, report.total.total, report.total.accuracy);
    for (c, a) in &report.per_category {
        println!("  {:<20} {}/{} ({:.3})", c.name(), a.correct, a.total, a.accuracy);
    }
    for (t, a) in &report.per_video_type {
        println!("  {:<20} {}/{} ({:.3})", t, a.correct, a.total, a.accuracy);
    }
    let errors = report.records.iter().filter(|r| r.error.is_some()).count();
    if errors > 0 {
        eprintln!("{errors} questions failed to run; see the report");
    }
    Ok(0)
}

fn fixtures_cmd(args: &FixturesArgs) -> anyhow::Result<u8> {
    let paths = fixtures::write_all(&args.out)?;
    if args.ingest {
        let mut ws = Workspace::open(&args.out)?;
        for m in &paths.manifests {
            let report = ws.ingest(m, None)?;
            if report.failed() > 0 {
                bail!("ingesting {} left {} failed segments", m.display(), report.failed());
            }
        }
    }
    println!("{}", paths.root.display());
    Ok(0)
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    if let Command::Fixtures(args) = &cli.command {
        return fixtures_cmd(args);
    }
    let mut ws =
        Workspace::open(&cli.workspace).with_context(|| format!("opening workspace {}", cli.workspace.display()))?;
    match &cli.command {
        Command::Ingest(args) => ingest(&mut ws, args),
        Command::Ask(args) => ask(&ws, args),
        Command::Store { command: StoreCommand::Stats } => {
            println!("{}", serde_json::to_string_pretty(&ws.store().meta())?);
            Ok(0)
        }
        Command::Store { command: StoreCommand::Dump { video } } => {
            for e in ws.store().entries(video.as_deref()) {
                println!("{}", serde_json::to_string(&e)?);
            }
            Ok(0)
        }
        Command::Tools { command: ToolsCommand::List } => {
            print!("{}", ws.session()?.tools.catalog_document());
            Ok(0)
        }
        Command::Eval(args) => eval(&ws, args),
        Command::Fixtures(_) => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
