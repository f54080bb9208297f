use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use eval3d::backends::protocol::{read_request, serve_job};
use eval3d::backends::stubs::{build_stub, StubOptions};
use eval3d::backends::{BackendKind, BackendRequest};
use eval3d::bench::{
    agreement_report, load_annotations, load_scores, OperatingPoints, UncertainPolicy,
};
use eval3d::metrics::MetricKind;
use eval3d::pipeline::{compare_models, run_eval, CompareManifest, RunConfig};

#[derive(Parser)]
#[command(name = "eval3d", version, about = "Score generated 3D assets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one asset.
    Run(RunArgs),
    /// Evaluate several models over a shared prompt list.
    Compare {
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory [default: <manifest dir>/compare_out]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Agreement between metric scores and human annotations.
    Bench {
        #[command(subcommand)]
        command: BenchCommand,
    },
    /// Answer one job directory with a built-in stub backend.
    #[command(hide = true)]
    StubServe {
        #[arg(long)]
        kind: String,
        /// Stub options as JSON.
        #[arg(long)]
        options: Option<String>,
        job_dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory [default: out_dir from the config, else <config dir>/out]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use stub backends for every backend the config leaves unset.
    #[arg(long)]
    stub_all: bool,
    /// Number of rig views.
    #[arg(long)]
    views: Option<usize>,
    /// Comma-separated subset of geo,sem,struct,align,aes.
    #[arg(long, value_delimiter = ',', value_parser = parse_metric)]
    metrics: Option<Vec<MetricKind>>,
}

#[derive(Subcommand)]
enum BenchCommand {
    Agreement {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        /// Drop uncertain judgments instead of collapsing them to yes/no.
        #[arg(long)]
        drop_uncertain: bool,
        /// Fixed operating points as JSON, e.g. {"structural":75.8,"semantic":63.3}.
        #[arg(long)]
        operating_points: Option<String>,
    },
}

fn parse_metric(s: &str) -> Result<MetricKind, String> {
    MetricKind::parse(s.trim())
        .ok_or_else(|| format!("unknown metric {s:?}; expected geo, sem, struct, align or aes"))
}

fn parent_dir(p: &Path) -> PathBuf {
    p.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn cmd_run(args: RunArgs) -> anyhow::Result<u8> {
    let mut cfg = RunConfig::load(&args.config)?;
    cfg.apply_overrides(args.stub_all, args.views, args.metrics);
    let out = match (args.out, &cfg.out_dir) {
        (Some(o), _) => o,
        (None, Some(o)) => cfg.resolve(o),
        (None, None) => parent_dir(&args.config).join("out"),
    };
    let report = run_eval(&cfg, &out)?;
    for (m, slot) in &report.metrics {
        match slot.value() {
            Some(v) => println!("{m:<6} {v:7.2}"),
            None => println!(
                "{m:<6} skipped: {}",
                serde_json::to_value(slot)?["reason"].as_str().unwrap_or("")
            ),
        }
    }
    println!("report: {}", out.join("report.json").display());
    Ok(report.exit_code() as u8)
}

fn cmd_compare(manifest: PathBuf, out: Option<PathBuf>) -> anyhow::Result<u8> {
    let m = CompareManifest::load(&manifest)?;
    let out = out.unwrap_or_else(|| parent_dir(&manifest).join("compare_out"));
    let board = compare_models(&m, &out)?;
    print!("{:<16}", "model");
    for k in MetricKind::ALL {
        print!(" {:>7}", k.name());
    }
    println!();
    let mut partial = false;
    for row in &board.rows {
        print!("{:<16}", row.name);
        for k in MetricKind::ALL {
            match row.scores.get(&k).copied().flatten() {
                Some(v) => print!(" {v:7.2}"),
                None => {
                    partial = true;
                    print!(" {:>7}", "-")
                }
            }
        }
        println!();
    }
    println!("leaderboard: {}", out.join("leaderboard.json").display());
    Ok(if partial { 2 } else { 0 })
}

fn cmd_agreement(
    scores: PathBuf,
    annotations: PathBuf,
    drop: bool,
    points: Option<String>,
) -> anyhow::Result<u8> {
    let scores = load_scores(&scores)?;
    let annotations = load_annotations(&annotations)?;
    let points: OperatingPoints = match points {
        Some(s) => serde_json::from_str(&s).context("--operating-points")?,
        None => OperatingPoints::default(),
    };
    let policy = if drop {
        UncertainPolicy::Drop
    } else {
        UncertainPolicy::Collapse
    };
    let report = agreement_report(&scores, &annotations, policy, &points);
    if report.is_empty() {
        bail!("no metric has both scores and annotations");
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(if report.values().any(|r| r.error.is_some()) {
        2
    } else {
        0
    })
}

fn cmd_stub_serve(kind: &str, options: Option<String>, dir: &Path) -> anyhow::Result<u8> {
    let kind =
        BackendKind::parse(kind).with_context(|| format!("unknown backend kind {kind:?}"))?;
    let opts: StubOptions = match options {
        Some(s) => serde_json::from_str(&s).context("--options")?,
        None => StubOptions::default(),
    };
    // the question generator is seeded by the prompt in the request
    let prompt = match read_request(dir) {
        Ok(BackendRequest::Qagen { prompt }) => prompt,
        _ => String::new(),
    };
    let backend = build_stub(kind, &opts, &prompt);
    Ok(serve_job(dir, backend.as_ref()).clamp(0, 255) as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // usage errors are fatal (1); 2 is reserved for partial reports
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare { manifest, out } => cmd_compare(manifest, out),
        Command::Bench {
            command:
                BenchCommand::Agreement {
                    scores,
                    annotations,
                    drop_uncertain,
                    operating_points,
                },
        } => cmd_agreement(scores, annotations, drop_uncertain, operating_points),
        Command::StubServe {
            kind,
            options,
            job_dir,
        } => cmd_stub_serve(&kind, options, &job_dir),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
