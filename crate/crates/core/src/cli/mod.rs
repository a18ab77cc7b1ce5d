//! Command-line driver: corpus generation, training, attacks, evaluation.
//!
//! Every command resolves a [`RunConfig`] (defaults, config file,
//! `SMI_*` environment variables, flags), writes it to `run.lock` in the run
//! directory and works inside that directory:
//!
//! ```text
//! runs/<name>/
//!   corpus/            generated corpus (unless corpus.external is set)
//!   checkpoint/        model.smi, history.csv
//!   inverted/<attack>/<init>/spk_NNN.{wav,f64,json}
//!   dvectors/<init>/spk_NNN.json
//!   reports/           results.csv, results.json, pca_scatter.csv, sweep.csv
//!   run.lock
//! ```
//!
//! Exit codes: 0 success, 1 runtime or numerical failure, 2 configuration
//! error.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{env_key, parse_value, resolve, set_path, AttackSection, CorpusSection, EvalSection, Lambda, RunConfig, ENV_PREFIX};

use crate::error::{config_err, Error, Result};

#[derive(Debug, Parser)]
#[command(name = "speaker-mi", version, about = "Model-inversion attacks on a speaker recognizer")]
pub struct Cli {
    /// TOML config file (a run.lock works too).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run directory; overrides output_dir.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for per-speaker attacks (0 = all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Override any config value, e.g. `--set train.epochs=5`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    /// Print the effective config and exit.
    #[arg(long)]
    pub print_config: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize the speaker corpus.
    GenCorpus(GenCorpusArgs),
    /// Train the speaker model.
    Train(TrainArgs),
    /// Invert every speaker to audio with the standard and/or sliding attack.
    Invert(InvertArgs),
    /// Invert every speaker to a d-vector through the classifier head.
    InvertDvector(InitArgs),
    /// Score stored inversions and write the report.
    Evaluate,
    /// Re-render the report from a stored evaluation.
    Report,
    /// Run the attacks over the configured learning-rate grid.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct GenCorpusArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub speakers: Option<usize>,
    #[arg(long)]
    pub utterances: Option<usize>,
    #[arg(long)]
    pub seconds: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct InitArgs {
    /// Init kind; repeat for several.
    #[arg(long = "init")]
    pub inits: Vec<String>,
    /// Fixed step size instead of the per-init default.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub alpha: Option<usize>,
}

#[derive(Debug, Args)]
pub struct InvertArgs {
    /// standard or sliding; repeat for both. Replaces attack.kinds.
    #[arg(long = "attack")]
    pub attacks: Vec<String>,
    #[command(flatten)]
    pub init: InitArgs,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub output_len: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// standard, sliding or dvector; repeat for several.
    #[arg(long = "attack")]
    pub attacks: Vec<String>,
    #[arg(long = "init")]
    pub inits: Vec<String>,
    /// Comma-separated learning rates.
    #[arg(long, value_delimiter = ',')]
    pub grid: Vec<f64>,
}

fn push<T: Into<toml::Value>>(out: &mut Vec<(String, toml::Value)>, key: &str, v: Option<T>) {
    if let Some(v) = v {
        out.push((key.to_string(), v.into()));
    }
}

fn push_list(out: &mut Vec<(String, toml::Value)>, key: &str, v: &[String]) {
    if !v.is_empty() {
        out.push((key.to_string(), toml::Value::Array(v.iter().cloned().map(toml::Value::from).collect())));
    }
}

fn push_init(out: &mut Vec<(String, toml::Value)>, a: &InitArgs) {
    push_list(out, "attack.inits", &a.inits);
    push(out, "attack.lambda", a.lambda);
    push(out, "attack.alpha", a.alpha.map(|v| v as i64));
}

impl Cli {
    /// Flag values as config overrides, applied after the file and env.
    fn overrides(&self) -> Result<Vec<(String, toml::Value)>> {
        let mut out = Vec::new();
        for s in &self.set {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| config_err!("--set expects KEY=VALUE, got '{s}'"))?;
            out.push((k.trim().to_string(), parse_value(v.trim())));
        }
        push(&mut out, "output_dir", self.out.as_ref().map(|p| p.display().to_string()));
        push(&mut out, "workers", self.workers.map(|v| v as i64));
        let u = |v: Option<usize>| v.map(|v| v as i64);
        match &self.command {
            Some(Command::GenCorpus(a)) => {
                push(&mut out, "corpus.seed", a.seed.map(|v| v as i64));
                push(&mut out, "corpus.n_speakers", u(a.speakers));
                // The model follows the corpus size unless set explicitly.
                push(&mut out, "model.num_classes", u(a.speakers));
                push(&mut out, "corpus.utterances_per_speaker", u(a.utterances));
                push(&mut out, "corpus.utterance_seconds", a.seconds);
            }
            Some(Command::Train(a)) => {
                push(&mut out, "train.epochs", u(a.epochs));
                push(&mut out, "train.learning_rate", a.lr);
                push(&mut out, "train.batch_size", u(a.batch_size));
                push(&mut out, "train.seed", a.seed.map(|v| v as i64));
            }
            Some(Command::Invert(a)) => {
                push_list(&mut out, "attack.kinds", &a.attacks);
                push_init(&mut out, &a.init);
                push(&mut out, "attack.stride", u(a.stride));
                push(&mut out, "attack.window", u(a.window));
                push(&mut out, "attack.output_len", u(a.output_len));
            }
            Some(Command::InvertDvector(a)) => push_init(&mut out, a),
            Some(Command::Sweep(a)) => {
                push_list(&mut out, "attack.kinds", &a.attacks);
                push_list(&mut out, "attack.inits", &a.inits);
                if !a.grid.is_empty() {
                    out.push((
                        "attack.sweep_grid".into(),
                        toml::Value::Array(a.grid.iter().copied().map(toml::Value::from).collect()),
                    ));
                }
            }
            Some(Command::Evaluate) | Some(Command::Report) | None => {}
        }
        Ok(out)
    }
}

/// Maps an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_config() {
        2
    } else {
        1
    }
}

/// Runs the CLI with the process environment. Returns the exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let env: Vec<(String, String)> = std::env::vars().collect();
    run_with_env(args, &env)
}

/// Runs the CLI with an explicit environment (only `SMI_*` entries matter).
pub fn run_with_env<I, S>(args: I, env: &[(String, String)]) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli, env) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Resolves the config and runs the selected command.
pub fn execute(cli: &Cli, env: &[(String, String)]) -> Result<()> {
    let cfg = resolve(cli.config.as_deref(), env, &cli.overrides()?)?;
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let Some(cmd) = &cli.command else {
        return Err(config_err!("no command given; see --help"));
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if cfg.workers > 0 {
        pool = pool.num_threads(cfg.workers);
    }
    let pool = pool.build().map_err(|e| config_err!("cannot start worker pool: {e}"))?;
    pool.install(|| commands::dispatch(cmd, &cfg))
}
