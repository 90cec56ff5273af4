use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tsrvq::codebook::{generate_rvq, load_codebook, save_codebook};
use tsrvq::harness::{
    emit_csv, format_csv, init_thread_pool, predict, run_cdma_sweep, run_complexity_profile, run_mimo_sweep,
    ExperimentConfig, ResultRow, Scenario,
};
use tsrvq::rng::{domain, stream};
use tsrvq::trees::{build_gla_tree, build_kd_tree, save_tree, Tree};
use tsrvq::{Error, Result};

#[derive(Parser)]
#[command(name = "tsrvq", version, about = "Tree-structured random vector quantization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Capacity of quantized MIMO beamforming over a bit sweep.
    SweepMimo(SweepArgs),
    /// Matched-filter SINR of quantized CDMA signatures over a bit sweep.
    SweepCdma(SweepArgs),
    /// Performance against mean search cost per scheme and bit count.
    Complexity(SweepArgs),
    /// Large-system closed-form predictions over the config's bit sweep.
    Predict(SweepArgs),
    /// Generates an RVQ codebook file.
    GenCodebook(CodebookArgs),
    /// Builds a GLA or kd tree over a codebook and writes it to a file.
    BuildTree(TreeArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// CSV destination; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scheme name or comma-separated list.
    #[arg(long)]
    scheme: Option<String>,
    /// Bit counts, e.g. `0,2,4` or `0-12`.
    #[arg(long)]
    bits: Option<String>,
    /// Any other config key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct CodebookArgs {
    /// Vector dimension N.
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    bits: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum TreeKind {
    Kd,
    Gla,
}

#[derive(Args)]
struct TreeArgs {
    #[arg(long, value_enum)]
    kind: TreeKind,
    /// Existing codebook file; otherwise one is generated from --dim/--bits/--seed.
    #[arg(long)]
    codebook: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    bits: Option<u32>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn load_config(args: &SweepArgs, scenario: Option<Scenario>) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = scenario {
        cfg.scenario = s;
    }
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects key=value, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(scheme) = &args.scheme {
        cfg.set("schemes", scheme)?;
    }
    if let Some(bits) = &args.bits {
        cfg.set("bits", bits)?;
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_rows(rows: &[ResultRow], out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            emit_csv(rows, path)?;
            log::info!("wrote {} rows to {}", rows.len(), path.display());
        }
        None => {
            if rows.is_empty() {
                return Err(Error::Contract("no result rows to write".into()));
            }
            print!("{}", format_csv(rows));
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SweepMimo(args) => {
            let cfg = load_config(&args, Some(Scenario::Mimo))?;
            write_rows(&run_mimo_sweep(&cfg)?, cfg.out.as_deref())
        }
        Command::SweepCdma(args) => {
            let cfg = load_config(&args, Some(Scenario::Cdma))?;
            write_rows(&run_cdma_sweep(&cfg)?, cfg.out.as_deref())
        }
        Command::Complexity(args) => {
            let cfg = load_config(&args, None)?;
            write_rows(&run_complexity_profile(&cfg)?, cfg.out.as_deref())
        }
        Command::Predict(args) => {
            let cfg = load_config(&args, None)?;
            write_rows(&predict(&cfg)?, cfg.out.as_deref())
        }
        Command::GenCodebook(args) => {
            let cb = generate_rvq(args.dim, args.bits, &mut stream(args.seed, domain::CODEBOOK, 0))?;
            save_codebook(&cb, &args.out)
        }
        Command::BuildTree(args) => {
            let cb = match (&args.codebook, args.dim, args.bits) {
                (Some(path), None, None) => load_codebook(path)?,
                (None, Some(dim), Some(bits)) => generate_rvq(dim, bits, &mut stream(args.seed, domain::CODEBOOK, 0))?,
                _ => return Err(Error::Config("give either --codebook or both --dim and --bits".into())),
            };
            let tree = match args.kind {
                TreeKind::Kd => Tree::Kd(build_kd_tree(&cb)),
                TreeKind::Gla => Tree::Gla(build_gla_tree(&cb, &mut stream(args.seed, domain::GLA, 0))),
            };
            save_tree(&tree, &args.out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = init_thread_pool().and_then(|()| run(cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 2,
                Error::Capacity { .. } => 3,
                _ => 1,
            })
        }
    }
}
