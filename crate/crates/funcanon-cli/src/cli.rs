//! Command-line front end. One subcommand per pipeline stage plus task
//! decomposition, checkpoint sampling, and the full pipeline; every flag
//! overrides the matching configuration key. Exit codes: 0 on success, 2 for
//! invalid configuration or arguments, 3 when a stage fails.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use funcanon_core::decompose::{decompose, DecomposerBackend, RemoteDecomposer};
use funcanon_core::geometry::FrameTag;
use funcanon_core::llm::{ChatClient, ResponseCache};
use funcanon_core::recognition::VerbVocabulary;
use funcanon_core::transfer::{Demonstration, TransferMethod};
use funcanon_core::SE3Pose;
use funcanon_policy::{ddim_sample, encode_state, Checkpoint};
use serde::Deserialize;

use crate::config::PipelineConfig;
use crate::evaluate::{ExecutorKind, PolicyBundle, Reanchor};
use crate::pipeline;
use crate::report::EvalReport;
use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "funcanon",
    version,
    about = "Functional-region canonicalization, trajectory transfer, and policy evaluation on a synthesized desk"
)]
pub struct Cli {
    /// TOML configuration file; built-in defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Artifact directory (overrides the config).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Run seed (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cluster each object's points into candidate functional regions.
    Propose {
        /// Regions per object (overrides regions.m).
        #[arg(long)]
        m: Option<usize>,
    },
    /// Accept or reject each proposed region per (verb, role).
    Recognize,
    /// Canonicalize accepted regions into per-category functional frames.
    Align,
    /// Split a task sentence into actor-verb-object steps.
    Decompose(DecomposeArgs),
    /// Retarget reference demonstrations across aligned instances.
    Transfer {
        /// "offset" or "frame" (overrides transfer.method).
        #[arg(long)]
        method: Option<String>,
        /// Comma-separated target object ids (overrides transfer.targets).
        #[arg(long, value_delimiter = ',')]
        targets: Option<Vec<String>>,
    },
    /// Train the action-chunk denoiser on demos plus transfers.
    Train {
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch: Option<usize>,
        /// JSON array of demonstrations to train on instead of the
        /// synthesized references and transfers.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Sample an action chunk from a trained checkpoint.
    Infer(InferArgs),
    /// Judge the configured executor on every scenario.
    Evaluate(EvalArgs),
    /// Run every stage in order and write all artifacts.
    Pipeline(EvalArgs),
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// Task sentence, e.g. "pour water".
    #[arg(long)]
    pub task: String,
    /// Comma-separated object names on the desk; defaults to the configured
    /// object ids.
    #[arg(long, value_delimiter = ',')]
    pub objects: Option<Vec<String>>,
    /// "rules" or "remote".
    #[arg(long, default_value = "rules")]
    pub backend: String,
    /// Chat-completions endpoint for the remote backend.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Model name for the remote backend.
    #[arg(long)]
    pub model: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long, default_value = "FUNCANON_API_KEY")]
    pub api_key_env: String,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    /// Checkpoint path; defaults to <out_dir>/checkpoint.json.
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    /// JSON file with actor_pose, object_pose, actor, object, and verb.
    #[arg(long)]
    pub state: PathBuf,
    /// Seed of the sampling noise stream.
    #[arg(long, default_value_t = 0)]
    pub sample_seed: u64,
    /// Write the sampled trajectory here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct EvalArgs {
    /// Episodes per scenario per seed (overrides evaluate.trials).
    #[arg(long)]
    pub trials: Option<usize>,
    /// Comma-separated evaluation seeds (overrides evaluate.seeds).
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// "transfer" or "policy" (overrides evaluate.executor).
    #[arg(long)]
    pub executor: Option<ExecutorKind>,
    /// "offset" or "frame" (overrides evaluate.reanchor).
    #[arg(long)]
    pub reanchor: Option<Reanchor>,
}

impl EvalArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(trials) = self.trials {
            cfg.evaluate.trials = trials;
        }
        if let Some(seeds) = &self.seeds {
            cfg.evaluate.seeds = seeds.clone();
        }
        if let Some(executor) = self.executor {
            cfg.evaluate.executor = executor;
        }
        if let Some(reanchor) = self.reanchor {
            cfg.evaluate.reanchor = reanchor;
        }
    }
}

/// The sampling context for `infer`, read from a JSON file.
#[derive(Debug, Deserialize)]
struct InferState {
    actor_pose: SE3Pose,
    object_pose: SE3Pose,
    actor: String,
    object: String,
    verb: String,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(dir) = &cli.out_dir {
        cfg.out_dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn stage_err(stage: &'static str, message: impl ToString) -> CliError {
    CliError::Stage {
        stage,
        message: message.to_string(),
    }
}

fn percent(x: f64) -> String {
    format!("{:5.1}", 100.0 * x)
}

fn percent_opt(x: Option<f64>) -> String {
    x.map(percent).unwrap_or_else(|| "    -".into())
}

fn print_report(report: &EvalReport) {
    println!(
        "{:<28} {:<9} {:>6} {:>6} {:>6}",
        "scenario", "variation", "Sub1", "Sub2", "SR"
    );
    for s in &report.scenarios {
        println!(
            "{:<28} {:<9} {} {} {}",
            s.scenario_id,
            s.variation.to_string(),
            percent(s.mean.sub1_rate),
            percent_opt(s.mean.sub2_rate),
            percent(s.mean.success_rate),
        );
    }
    println!(
        "{:<28} {:<9} {} {} {}",
        "aggregate",
        "",
        percent(report.aggregate.sub1_rate),
        percent_opt(report.aggregate.sub2_rate),
        percent(report.aggregate.success_rate),
    );
    if !report.failures.is_empty() {
        println!("{} episode failures (see report.json)", report.failures.len());
    }
}

fn run_decompose(cfg: &PipelineConfig, args: &DecomposeArgs) -> Result<(), CliError> {
    let objects: Vec<String> = match &args.objects {
        Some(objects) => objects.clone(),
        None => cfg.objects.iter().map(|o| o.id.clone()).collect(),
    };
    let vocabulary = VerbVocabulary::new(cfg.recognition.verbs.clone());
    let backend = match args.backend.as_str() {
        "rules" => DecomposerBackend::Rules,
        "remote" => {
            let endpoint = args
                .endpoint
                .as_ref()
                .ok_or_else(|| CliError::Config("remote backend needs --endpoint".into()))?;
            let model = args
                .model
                .as_ref()
                .ok_or_else(|| CliError::Config("remote backend needs --model".into()))?;
            let key = std::env::var(&args.api_key_env).ok();
            let client = ChatClient::new(endpoint, key, model);
            DecomposerBackend::Remote(RemoteDecomposer::new(client, ResponseCache::in_memory()))
        }
        other => {
            return Err(CliError::Config(format!(
                "backend must be \"rules\" or \"remote\", got {other:?}"
            )));
        }
    };
    let plan = decompose(&args.task, &objects, &backend, &vocabulary)
        .map_err(|e| stage_err("decompose", e))?;
    let json = serde_json::to_string_pretty(&plan).map_err(|e| stage_err("decompose", e))?;
    println!("{json}");
    Ok(())
}

fn run_infer(cfg: &PipelineConfig, args: &InferArgs) -> Result<(), CliError> {
    const STAGE: &str = "infer";
    let ckpt_path = args
        .ckpt
        .clone()
        .unwrap_or_else(|| cfg.out_dir.join(pipeline::CHECKPOINT_FILE));
    let checkpoint = Checkpoint::load(&ckpt_path)
        .map_err(|e| stage_err(STAGE, format!("cannot load {}: {e}", ckpt_path.display())))?;
    let text = fs::read_to_string(&args.state)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.state.display())))?;
    let state: InferState = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", args.state.display())))?;
    let vocabulary = VerbVocabulary::new(cfg.recognition.verbs.clone());
    let bundle = PolicyBundle::new(checkpoint, &vocabulary).map_err(|e| stage_err(STAGE, e))?;
    let encoded = encode_state(
        &state.actor_pose,
        &state.object_pose,
        &state.actor,
        &state.object,
        &state.verb,
        &bundle.encoder,
        &bundle.verbs,
        bundle.checkpoint.config.feature_dim,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    let mut chunk = ddim_sample(
        &encoded,
        &bundle.checkpoint.denoiser,
        &bundle.schedule,
        &bundle.checkpoint.config,
        args.sample_seed,
    )
    .map_err(|e| stage_err(STAGE, e))?;
    chunk.sanitize();
    let trajectory = chunk
        .to_trajectory(&state.actor_pose, 0.0, FrameTag::World)
        .map_err(|e| stage_err(STAGE, e))?;
    let mut json = serde_json::to_string_pretty(&trajectory).map_err(|e| stage_err(STAGE, e))?;
    json.push('\n');
    match &args.out {
        Some(path) => {
            fs::write(path, json)
                .map_err(|e| stage_err(STAGE, format!("cannot write {}: {e}", path.display())))?;
            println!("trajectory -> {}", path.display());
        }
        None => print!("{json}"),
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = load_config(&cli)?;
    match &cli.command {
        Command::Propose { m } => {
            if let Some(m) = m {
                cfg.regions.m = *m;
            }
            cfg.validate()?;
            let proposals = pipeline::run_propose(&cfg)?;
            println!(
                "proposed {} regions per object for {} objects -> {}",
                cfg.regions.m,
                proposals.len(),
                cfg.out_dir.join(pipeline::PROPOSALS_FILE).display()
            );
        }
        Command::Recognize => {
            cfg.validate()?;
            let sets = pipeline::run_recognize(&cfg)?;
            println!(
                "accepted {} functional sets -> {}",
                sets.len(),
                cfg.out_dir.join(pipeline::FUNCTIONAL_SETS_FILE).display()
            );
        }
        Command::Align => {
            cfg.validate()?;
            let table = pipeline::run_align(&cfg)?;
            println!(
                "canonicalized {} functional frames -> {}",
                table.entries().len(),
                cfg.out_dir.join(pipeline::ALIGNMENTS_FILE).display()
            );
        }
        Command::Decompose(args) => {
            cfg.validate()?;
            run_decompose(&cfg, args)?;
        }
        Command::Transfer { method, targets } => {
            if let Some(method) = method {
                cfg.transfer.method = match method.as_str() {
                    "offset" => TransferMethod::Offset,
                    "frame" => TransferMethod::Frame,
                    other => {
                        return Err(CliError::Config(format!(
                            "method must be \"offset\" or \"frame\", got {other:?}"
                        )));
                    }
                };
            }
            if let Some(targets) = targets {
                cfg.transfer.targets = Some(targets.clone());
            }
            cfg.validate()?;
            let records = pipeline::run_transfer(&cfg)?;
            println!(
                "transferred {} trajectories -> {}",
                records.len(),
                cfg.out_dir.join(pipeline::TRANSFERS_FILE).display()
            );
        }
        Command::Train {
            epochs,
            lr,
            batch,
            data,
        } => {
            if let Some(epochs) = epochs {
                cfg.train.epochs = *epochs;
            }
            if let Some(lr) = lr {
                cfg.train.lr = *lr;
            }
            if let Some(batch) = batch {
                cfg.train.batch = *batch;
            }
            cfg.validate()?;
            let checkpoint = match data {
                Some(path) => {
                    let text = fs::read_to_string(path).map_err(|e| {
                        CliError::Config(format!("cannot read {}: {e}", path.display()))
                    })?;
                    let demos: Vec<Demonstration> = serde_json::from_str(&text).map_err(|e| {
                        CliError::Config(format!("cannot parse {}: {e}", path.display()))
                    })?;
                    pipeline::run_train_on(&cfg, &demos, &[])?
                }
                None => pipeline::run_train(&cfg)?,
            };
            let last_loss = checkpoint.losses.last().copied().unwrap_or(f64::NAN);
            println!(
                "trained {} epochs (final loss {last_loss:.6}) -> {}",
                cfg.train.epochs,
                cfg.out_dir.join(pipeline::CHECKPOINT_FILE).display()
            );
        }
        Command::Infer(args) => {
            cfg.validate()?;
            run_infer(&cfg, args)?;
        }
        Command::Evaluate(args) => {
            args.apply(&mut cfg);
            cfg.validate()?;
            let report = pipeline::run_evaluate(&cfg)?;
            print_report(&report);
            println!("report -> {}", cfg.out_dir.join(pipeline::REPORT_FILE).display());
        }
        Command::Pipeline(args) => {
            args.apply(&mut cfg);
            cfg.validate()?;
            let run = crate::pipeline::pipeline_run(&cfg)?;
            print_report(&run.report);
            println!("artifacts -> {}", run.out_dir.display());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_parse_into_typed_overrides() {
        let cli = Cli::parse_from([
            "funcanon", "--seed", "9", "--out-dir", "/tmp/x", "evaluate", "--trials", "4",
            "--seeds", "1,2,3", "--executor", "policy", "--reanchor", "offset",
        ]);
        assert_eq!(cli.seed, Some(9));
        assert_eq!(cli.out_dir.as_deref(), Some(std::path::Path::new("/tmp/x")));
        let Command::Evaluate(args) = &cli.command else {
            panic!("expected evaluate");
        };
        assert_eq!(args.trials, Some(4));
        assert_eq!(args.seeds, Some(vec![1, 2, 3]));
        assert_eq!(args.executor, Some(ExecutorKind::Policy));
        assert_eq!(args.reanchor, Some(Reanchor::Offset));
    }

    #[test]
    fn bad_enum_values_are_rejected_at_parse_time() {
        assert!(Cli::try_parse_from(["funcanon", "evaluate", "--executor", "warp"]).is_err());
        assert!(Cli::try_parse_from(["funcanon", "evaluate", "--reanchor", "nope"]).is_err());
    }

    #[test]
    fn decompose_requires_a_task() {
        assert!(Cli::try_parse_from(["funcanon", "decompose"]).is_err());
        let cli = Cli::try_parse_from([
            "funcanon", "decompose", "--task", "pour water", "--objects", "teapot,cup",
        ])
        .unwrap();
        let Command::Decompose(args) = &cli.command else {
            panic!("expected decompose");
        };
        assert_eq!(args.task, "pour water");
        assert_eq!(args.objects, Some(vec!["teapot".into(), "cup".into()]));
        assert_eq!(args.backend, "rules");
    }
}
