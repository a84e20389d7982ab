use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use coopnet::config::{parse_config, ExperimentConfig, ExperimentKind};
use coopnet::runner::{resolve_out_dir, run};

#[derive(Parser)]
#[command(name = "coopnet", version, about = "Cooperative-network simulation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Expected-vs-sampled path counts on random graphs
    Paths(RunArgs),
    /// Diffusion LMS with an impaired high-noise node
    Diffusion(RunArgs),
    /// Multi-agent Q-learning with a broken agent
    Marl(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config's `seed`
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides config and COOPNET_OUT
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; overrides the config's `jobs`
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Paths(a) => (ExperimentKind::Paths, a),
        Command::Diffusion(a) => (ExperimentKind::Diffusion, a),
        Command::Marl(a) => (ExperimentKind::Marl, a),
    };
    match execute(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn execute(kind: ExperimentKind, args: &RunArgs) -> Result<(), String> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| format!("cannot read {}: {e}", args.config.display()))?;
    let config: ExperimentConfig = parse_config(&text).map_err(|e| e.to_string())?;
    if config.kind != kind {
        return Err(format!(
            "config kind is `{}` but the `{kind}` subcommand was invoked",
            config.kind
        ));
    }

    let master_seed = args.seed.or(config.seed).unwrap_or(0);
    let jobs = args
        .jobs
        .or(config.jobs)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let out_dir = resolve_out_dir(args.out.as_deref(), &config);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| format!("cannot build thread pool: {e}"))?;
    let output = pool
        .install(|| run(&config, master_seed, &out_dir, jobs))
        .map_err(|e| e.to_string())?;

    println!("wrote {}", output.summary_path.display());
    for path in &output.csv_paths {
        println!("wrote {}", path.display());
    }
    Ok(())
}
