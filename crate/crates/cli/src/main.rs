//! biosketch: enroll/authenticate/revoke against a hashed template
//! store, plus reproducible evaluation and toy-trainer experiments.
//!
//! Exit codes: 0 success or GRANT, 1 DENY, 2 usage or parse error,
//! 3 data error, 4 internal error.

mod commands;
mod config;
mod evalrun;
mod toyrun;

use clap::{Parser, Subcommand};
use config::FileConfig;
use std::path::PathBuf;

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or unparseable input the caller controls directly.
    Usage(String),
    /// Missing or malformed data files, unknown subjects, IO problems.
    Data(String),
    /// Decode exhaustion, divergence, or anything that signals a bug.
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Internal(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "biosketch",
    version,
    about = "Keyed-selection secure-sketch template protection and its evaluation harness"
)]
struct Cli {
    /// Experiment configuration (TOML). Flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; defaults to the config's experiment.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for trial-level parallelism (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory; defaults to the config's experiment.out_dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Enroll a subject: derive the hashed template and issue a key.
    Enroll {
        #[arg(long)]
        store: PathBuf,
        /// Feature file (.jsonl or .csv) holding the subject's samples.
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        subject: String,
        /// Also write the issued key here (hex indices, one per line).
        #[arg(long)]
        key_out: Option<PathBuf>,
        /// Code length N for a new store (template is 8N bits).
        #[arg(long)]
        n: Option<usize>,
        /// Code dimension K for a new store (sketch is 8K bits).
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value = "fallback")]
        policy: String,
    },
    /// Verify a capture against an enrolled subject. Exit 0 on GRANT, 1 on DENY.
    Auth {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        subject: String,
        /// The subject's key file.
        #[arg(long)]
        key: PathBuf,
        #[arg(long, default_value = "fallback")]
        policy: String,
    },
    /// Revoke a subject's template and issue a fresh key.
    Revoke {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        subject: String,
        #[arg(long)]
        key_out: Option<PathBuf>,
        #[arg(long, default_value = "fallback")]
        policy: String,
    },
    /// Run the configured analyses and write CSV/JSON artifacts.
    Eval,
    /// Train the toy fusion-hashing network and export its codes.
    TrainToy {
        /// Pick loss weights by coordinate grid search before training.
        #[arg(long)]
        grid_search: bool,
    },
}

fn load_config(cli: &Cli) -> Result<FileConfig, CliError> {
    match &cli.config {
        Some(path) => FileConfig::load(path),
        None => {
            let cfg = FileConfig::default();
            cfg.validate()?;
            Ok(cfg)
        }
    }
}

fn run(cli: Cli) -> Result<i32, CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        // Ignore the error when a pool already exists (tests in-process).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }

    match &cli.cmd {
        Cmd::Enroll {
            store,
            features,
            subject,
            key_out,
            n,
            k,
            policy,
        } => {
            let policy = config::parse_policy(policy)?;
            let seed = cli.seed.unwrap_or(7);
            commands::cmd_enroll(
                store,
                features,
                subject,
                key_out.as_deref(),
                *n,
                *k,
                policy,
                seed,
            )?;
            Ok(0)
        }
        Cmd::Auth {
            store,
            features,
            subject,
            key,
            policy,
        } => {
            let policy = config::parse_policy(policy)?;
            let decision = commands::cmd_auth(store, features, subject, key, policy)?;
            Ok(if decision.granted() { 0 } else { 1 })
        }
        Cmd::Revoke {
            store,
            features,
            subject,
            key_out,
            policy,
        } => {
            let policy = config::parse_policy(policy)?;
            let seed = cli.seed.unwrap_or(7);
            commands::cmd_revoke(store, features, subject, key_out.as_deref(), policy, seed)?;
            Ok(0)
        }
        Cmd::Eval => {
            let cfg = load_config(&cli)?;
            cfg.validate_paths()?;
            let seed = cli.seed.unwrap_or(cfg.experiment.seed);
            let out_dir = cli
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from(&cfg.experiment.out_dir));
            let outcome = evalrun::run_eval(&cfg, seed, &out_dir)?;
            if outcome.failures.is_empty() {
                Ok(0)
            } else {
                Ok(3)
            }
        }
        Cmd::TrainToy { grid_search } => {
            let cfg = load_config(&cli)?;
            let seed = cli.seed.unwrap_or(cfg.experiment.seed);
            let out_dir = cli
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from(&cfg.experiment.out_dir));
            toyrun::run_train_toy(&cfg, seed, &out_dir, *grid_search)?;
            Ok(0)
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap exits 0 for --help/--version and 2 for usage errors.
            e.exit();
        }
    };
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    };
    std::process::exit(code);
}
