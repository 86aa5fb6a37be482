use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use contact_rl::config::{output_root, parse_override, RunConfig};
use contact_rl::experiment::{ablate, evaluate, selftest, train_all, EvalOptions};
use contact_rl::rewards::RewardMode;
use contact_rl::trainer::Checkpoint;
use contact_rl::Error;

const EXIT_CHECK: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_FAULT: u8 = 3;

#[derive(Parser)]
#[command(name = "contact-rl", version, about = "Train, evaluate and ablate contact-stage policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Train only this seed instead of the config's list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output root (else $CONTACT_RL_OUT, the config's out_dir, or ./runs).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dotted-key override, e.g. rewards.w_curi=500. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of a config.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Reward mode: full, zero-one, no-stage, no-curiosity, rnd-curiosity.
        #[arg(long)]
        mode: Option<String>,
    },
    /// Roll out a checkpoint with mean actions and report progress.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 20)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for eval.json and trajectory.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sample dynamics from the run's randomization intervals.
        #[arg(long)]
        randomize: bool,
    },
    /// Train every listed mode for every seed and summarize final progress.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated modes; defaults to full, no-stage, zero-one, no-curiosity.
        #[arg(long)]
        mode: Option<String>,
    },
    /// Check golden reference values.
    Selftest,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { EXIT_CONFIG } else { EXIT_FAULT })
        }
    }
}

fn load(args: &RunArgs) -> contact_rl::Result<RunConfig> {
    let overrides = args
        .overrides
        .iter()
        .map(|s| parse_override(s))
        .collect::<contact_rl::Result<Vec<_>>>()?;
    let mut config = RunConfig::load(&args.config, &overrides)?;
    if let Some(seed) = args.seed {
        config.seeds = vec![seed];
    }
    Ok(config)
}

fn parse_mode(name: &str) -> contact_rl::Result<RewardMode> {
    RewardMode::from_name(name.trim()).ok_or_else(|| Error::config(format!("unknown mode `{name}`")))
}

fn run(command: Command) -> contact_rl::Result<ExitCode> {
    match command {
        Command::Train { run, mode } => {
            let mut config = load(&run)?;
            if let Some(m) = mode {
                config.mode = parse_mode(&m)?;
            }
            let resolved = config.resolve()?;
            let root = output_root(run.out.as_deref(), &config);
            for s in train_all(&resolved, &root)? {
                let m = &s.final_metrics;
                println!(
                    "{} seed {}: progress {:.3} return {:.2} success {:.2} -> {}",
                    s.mode,
                    s.seed,
                    m.mean_progress,
                    m.mean_return,
                    m.success_rate,
                    s.dir.display()
                );
            }
        }
        Command::Eval {
            checkpoint,
            episodes,
            seed,
            out,
            randomize,
        } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            if let Some(dir) = &out {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            let opts = EvalOptions {
                episodes,
                seed,
                randomize,
                trajectory: out.as_ref().map(|d| d.join("trajectory.csv")),
            };
            let report = evaluate(&ckpt, &opts)?;
            let text = serde_json::to_string_pretty(&report)?;
            if let Some(dir) = &out {
                write(&dir.join("eval.json"), &text)?;
            }
            println!("{text}");
        }
        Command::Ablate { run, mode } => {
            let config = load(&run)?;
            let modes = match mode {
                Some(list) => list.split(',').map(parse_mode).collect::<contact_rl::Result<Vec<_>>>()?,
                None => vec![RewardMode::Full, RewardMode::NoStage, RewardMode::ZeroOne, RewardMode::NoCuriosity],
            };
            let root = output_root(run.out.as_deref(), &config);
            let summary = ablate(&config, &modes, &root)?;
            for (m, p) in &summary.median_progress {
                println!("{m:>14}: median final progress {p:.3}");
            }
        }
        Command::Selftest => {
            let checks = selftest();
            for c in &checks {
                println!("[{}] {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
            }
            if checks.iter().any(|c| !c.passed) {
                return Ok(ExitCode::from(EXIT_CHECK));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn write(path: &Path, text: &str) -> contact_rl::Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
