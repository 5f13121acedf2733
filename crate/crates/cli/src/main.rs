mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use namlite::explain::ImportanceMode;

use commands::{CalibrateArgs, ExplainArgs};
use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "namlite", version, about = "Neural additive models with kernel-smoothed bin embeddings")]
#[command(arg_required_else_help = true)]
struct Cli {
    /// Worker threads for split-parallel training (default: one per split).
    #[arg(long, global = true, env = "NAMLITE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit an ensemble and write model.json and metrics.json.
    Train(ConfigArg),
    /// Write predictions for every row of a CSV.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run gate-based feature selection at model.selection.reg_param.
    Select(ConfigArg),
    /// Trace selected features over a doubling penalty ladder.
    Path {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = 1e-4)]
        init_reg_param: f64,
    },
    /// Export importances, shape functions and pair surfaces.
    Explain(ExplainCli),
    /// Compare predicted CDFs with Kaplan-Meier estimates by risk bin.
    Calibrate(CalibrateCli),
}

#[derive(Args, Debug)]
struct ConfigArg {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args, Debug)]
struct ExplainCli {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value = "explain")]
    out_dir: PathBuf,
    #[arg(long)]
    importance: bool,
    #[arg(long, default_value = "include")]
    mode: String,
    /// Score importance on this CSV instead of each split's training fold.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long = "shape", value_name = "FEATURE")]
    shapes: Vec<String>,
    #[arg(long)]
    include_missing: bool,
    #[arg(long = "pair", num_args = 2, value_names = ["A", "B"])]
    pairs: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    eval_times: Vec<f64>,
    #[arg(long)]
    svg_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    top_n: usize,
}

#[derive(Args, Debug)]
struct CalibrateCli {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "time")]
    time: String,
    #[arg(long, default_value = "event")]
    event: String,
    #[arg(long, value_delimiter = ',')]
    eval_times: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    bins: usize,
    #[arg(long, default_value = "calibration.csv")]
    out: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
}

fn load(arg: &ConfigArg, threads: Option<usize>) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::load(&arg.config)?;
    if threads.is_some() {
        cfg.model.threads = threads;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train(c) => commands::train(&load(&c, cli.threads)?),
        Command::Predict { model, data, out } => commands::predict(&model, &data, &out),
        Command::Select(c) => commands::select(&load(&c, cli.threads)?),
        Command::Path { config, init_reg_param } => commands::path(&load(&config, cli.threads)?, init_reg_param),
        Command::Explain(e) => commands::explain(&ExplainArgs {
            model: e.model,
            out_dir: e.out_dir,
            importance: e.importance,
            mode: e.mode.parse::<ImportanceMode>()?,
            data: e.data,
            shapes: e.shapes,
            include_missing: e.include_missing,
            pairs: e.pairs,
            eval_times: e.eval_times,
            svg_dir: e.svg_dir,
            top_n: e.top_n,
        }),
        Command::Calibrate(c) => commands::calibrate(&CalibrateArgs {
            model: c.model,
            data: c.data,
            time: c.time,
            event: c.event,
            eval_times: c.eval_times,
            bins: c.bins,
            out: c.out,
            svg: c.svg,
        }),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(failure::exit_code(&e))
        }
    }
}
