use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::LevelFilter;

use actannot::pipeline::config::InstanceBudgets;
use actannot::pipeline::run::read_annotations;
use actannot::pipeline::{
    ablate, evaluate, ingest, ingest_strict, run, write_outputs, write_synthetic, PipelineConfig, SynthSpec,
};
use actannot::Error;

#[derive(Parser)]
#[command(name = "actannot", version, about = "Weakly supervised spatio-temporal action annotation")]
struct Cli {
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    log_level: LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a dataset manifest and print a summary.
    IngestCheck {
        manifest: PathBuf,
        /// Treat any per-video failure as fatal.
        #[arg(long)]
        strict: bool,
    },
    /// Write a synthetic dataset.
    Synth(SynthArgs),
    /// Annotate every class and write annotations plus report.json.
    Run(RunArgs),
    /// Score an annotations directory against ground truth.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        /// Directory of per-class annotation files.
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare similarity components on one dataset.
    Ablate {
        #[command(flatten)]
        stage: StageArgs,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// TOML file with generator settings; flags override it.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    videos_per_class: Option<usize>,
    #[arg(long)]
    proposals_per_video: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    instances: Option<u32>,
    #[arg(long)]
    no_distractors: bool,
}

#[derive(Args)]
struct StageArgs {
    /// TOML pipeline configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    eval_threshold: Option<f64>,
    /// Per-video instance budgets: `manifest` or `one`.
    #[arg(long, value_parser = parse_budgets)]
    instance_budgets: Option<InstanceBudgets>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    stage: StageArgs,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_budgets(s: &str) -> Result<InstanceBudgets, String> {
    match s {
        "manifest" => Ok(InstanceBudgets::Manifest),
        "one" => Ok(InstanceBudgets::One),
        _ => Err(format!("expected `manifest` or `one`, got {s:?}")),
    }
}

impl StageArgs {
    fn config(&self, seed: Option<u64>) -> Result<PipelineConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(m) = &self.manifest {
            cfg.dataset = Some(m.clone());
        }
        if let Some(s) = seed {
            cfg.seed = s;
        }
        if let Some(v) = self.top_k {
            cfg.top_k = v;
        }
        if let Some(v) = self.alpha {
            cfg.solver.alpha = v;
        }
        if let Some(v) = self.max_iterations {
            cfg.solver.max_iterations = v;
        }
        if let Some(v) = self.restarts {
            cfg.solver.restarts = v;
        }
        if let Some(v) = self.eval_threshold {
            cfg.eval_threshold = v;
        }
        if let Some(v) = self.instance_budgets {
            cfg.instance_budgets = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn manifest_of(cfg: &PipelineConfig) -> Result<&Path, Error> {
    cfg.dataset
        .as_deref()
        .ok_or_else(|| Error::Config("no dataset: pass --manifest or set `dataset` in the config".into()))
}

fn write_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    match out {
        Some(p) => actannot::pipeline::format::write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(cmd: Command) -> Result<u8, Error> {
    match cmd {
        Command::IngestCheck { manifest, strict } => {
            let ds = if strict { ingest_strict(&manifest)? } else { ingest(&manifest)? };
            let classes = ds.classes();
            for c in &classes {
                let proposals: usize = c.videos.iter().map(|v| v.proposals.len()).sum();
                println!(
                    "{}\tvideos={}\tfailed={}\tproposals={}",
                    c.label,
                    c.videos.len(),
                    c.failures.len(),
                    proposals
                );
            }
            for f in &ds.failures {
                eprintln!("{}: {}", f.video_id, f.message);
            }
            Ok(match (ds.videos.is_empty(), ds.failures.is_empty()) {
                (_, true) => 0,
                (true, false) => 1,
                (false, false) => 2,
            })
        }
        Command::Synth(a) => {
            let mut spec = match &a.spec {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
                }
                None => SynthSpec::default(),
            };
            if let Some(v) = a.classes {
                spec.classes = v;
            }
            if let Some(v) = a.videos_per_class {
                spec.videos_per_class = v;
            }
            if let Some(v) = a.proposals_per_video {
                spec.proposals_per_video = v;
            }
            if let Some(v) = a.noise {
                spec.noise = v;
            }
            if let Some(v) = a.instances {
                spec.instances = v;
            }
            if a.no_distractors {
                spec.distractors = false;
            }
            let manifest = write_synthetic(&spec, a.seed, &a.out)?;
            println!("{}", manifest.display());
            Ok(0)
        }
        Command::Run(a) => {
            let cfg = a.stage.config(Some(a.seed))?;
            let out = a
                .out
                .clone()
                .or_else(|| cfg.output.clone())
                .ok_or_else(|| Error::Config("no output directory: pass --out or set `output` in the config".into()))?;
            let ds = ingest(manifest_of(&cfg)?)?;
            let outcome = run(&ds, &cfg)?;
            let report = write_outputs(&outcome, &out)?;
            if let Some(e) = &outcome.report.eval {
                log::info!("localization accuracy {:.4}, MABO {:.4}", e.localization_accuracy, e.mabo);
            }
            println!("{}", report.display());
            Ok(outcome.exit_code() as u8)
        }
        Command::Eval {
            manifest,
            annotations,
            threshold,
            out,
        } => {
            let ds = ingest(&manifest)?;
            let records = read_annotations(&annotations)?;
            let threshold = threshold.unwrap_or(PipelineConfig::default().eval_threshold);
            let report = evaluate(&ds, &records, threshold)?;
            write_json(&report, out.as_deref())?;
            Ok(0)
        }
        Command::Ablate { stage, seed, out } => {
            let cfg = stage.config(seed)?;
            let ds = ingest(manifest_of(&cfg)?)?;
            let rows = ablate(&ds, &cfg)?;
            for r in &rows {
                eprintln!("{:<24} {:.4}", r.name, r.localization_accuracy);
            }
            write_json(&rows, out.as_deref())?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors exit 1; 2 is reserved for partial runs.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    env_logger::Builder::new()
        .filter_level(cli.log_level)
        .format_timestamp(None)
        .init();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
