use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use gom::cli::{cmd_bench, cmd_eval, cmd_fit, cmd_gibbs, cmd_simulate, CliFamily, FitArgs, GibbsArgs};
use gom::estimator::FitConfig;
use gom::gibbs::GibbsConfig;
use gom::vertex::PruneConfig;

#[derive(Parser)]
#[command(name = "gom", version, about = "Spectral estimation for grade-of-membership models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic datasets from a scenario description
    Simulate {
        /// Scenario JSON file
        scenario: PathBuf,
        /// Output directory
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Fit the spectral estimator to a data file
    Fit {
        /// Numeric CSV data file
        data: PathBuf,
        /// Category-count sidecar (required for polytomous data)
        #[arg(long)]
        categories: Option<PathBuf>,
        /// Number of extreme latent profiles
        #[arg(short, long)]
        k: usize,
        /// Data family
        #[arg(long, value_enum, default_value = "polytomous")]
        family: CliFamily,
        /// Disable row pruning before vertex hunting
        #[arg(long)]
        no_prune: bool,
        /// Clipping floor for post-processed estimates
        #[arg(long, default_value_t = 1e-8)]
        epsilon: f64,
        /// RNG seed (overridden by GGOM_SEED)
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Compare an estimate directory against ground truth
    Eval {
        /// Directory with pi_post.csv / theta_post.csv
        estimate: PathBuf,
        /// Directory with pi_true.csv / theta_true.csv
        truth: PathBuf,
        /// Output metrics CSV
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run a benchmark suite of scenarios
    Bench {
        /// Suite JSON file
        suite: PathBuf,
        /// Output directory
        #[arg(short, long)]
        out: PathBuf,
        /// Worker threads (defaults to all cores)
        #[arg(short, long)]
        jobs: Option<usize>,
    },
    /// Run the Gibbs-sampling baseline on polytomous data
    Gibbs {
        /// Numeric CSV data file
        data: PathBuf,
        /// Category-count sidecar
        #[arg(long)]
        categories: PathBuf,
        /// Number of extreme latent profiles
        #[arg(short, long)]
        k: usize,
        /// Dirichlet prior concentration for membership rows
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        /// Dirichlet prior concentration for category tables
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        /// Burn-in sweeps
        #[arg(long, default_value_t = 5000)]
        burnin: usize,
        /// Retained sweeps
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        /// RNG seed (overridden by GGOM_SEED)
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn env_seed(default: u64) -> Result<u64, String> {
    match std::env::var("GGOM_SEED") {
        Ok(v) => v
            .trim()
            .parse::<u64>()
            .map_err(|e| format!("GGOM_SEED must be a non-negative integer: {e}")),
        Err(_) => Ok(default),
    }
}

fn run() -> gom::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { scenario, out } => cmd_simulate(&scenario, &out),
        Command::Fit {
            data,
            categories,
            k,
            family,
            no_prune,
            epsilon,
            seed,
            out,
        } => {
            let seed = env_seed(seed).map_err(gom::GomError::Config)?;
            let fit_cfg = FitConfig {
                prune: if no_prune { None } else { Some(PruneConfig::default()) },
                epsilon,
                seed,
            };
            cmd_fit(&FitArgs {
                data,
                categories,
                k,
                family,
                fit_cfg,
                out_dir: out,
            })
        }
        Command::Eval { estimate, truth, out } => cmd_eval(&estimate, &truth, &out),
        Command::Bench { suite, out, jobs } => cmd_bench(&suite, &out, jobs),
        Command::Gibbs {
            data,
            categories,
            k,
            alpha,
            beta,
            burnin,
            samples,
            seed,
            out,
        } => {
            let seed = env_seed(seed).map_err(gom::GomError::Config)?;
            cmd_gibbs(&GibbsArgs {
                data,
                categories,
                k,
                cfg: GibbsConfig {
                    alpha: vec![alpha; k],
                    beta: vec![beta],
                    burnin,
                    samples,
                    seed,
                },
                out_dir: out,
            })
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
