use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use simcache_cli::commands::{self, ContArgs, ContModel, OnlineArgs, PlaceAlgorithm, PlaceArgs, Stop};
use simcache_cli::config::validate_config;
use simcache_cli::runner::run_experiment;

#[derive(Parser)]
#[command(name = "simcache", version, about = "Placement in networks of similarity caches")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every point of an experiment config and write CSVs plus a manifest.
    Run { config: PathBuf },
    /// Check an experiment config without running it.
    Validate { config: PathBuf },
    /// Place objects on an instance with an offline algorithm.
    Place {
        #[arg(value_enum)]
        algorithm: PlaceAlgorithm,
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        max_iters: usize,
        #[arg(long, value_enum, default_value_t = Stop::Converged)]
        stop: Stop,
        /// First cache holds objects nearer than this to the demand barycenter,
        /// the others hold the rest.
        #[arg(long)]
        constraint_d_star: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a continuous relaxation on a region profile.
    Cont {
        #[arg(value_enum)]
        model: ContModel,
        /// CSV of per-region rates.
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        /// Cache sizes from the leaf up (`inf` for unbounded).
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        k: Vec<f64>,
        /// Retrieval cost of each level from the leaf; a single value for the tandem.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        h: Vec<f64>,
        #[arg(long, default_value_t = 0.0)]
        beta_parent: f64,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        leaf_scales: Vec<f64>,
        #[arg(long, default_value_t = 1e-10)]
        tolerance: f64,
        #[arg(long, default_value_t = 2000)]
        max_sweeps: usize,
        /// Write the JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Online placement driven by a request trace.
    Online {
        #[command(subcommand)]
        policy: Online,
    },
}

#[derive(Subcommand)]
enum Online {
    Netduel {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value_t = 500)]
        window: usize,
        #[arg(long, default_value_t = 0.05)]
        margin: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Use only the first N requests of the trace.
        #[arg(long)]
        requests: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Prints to stdout; a closed pipe is not an error.
fn emit(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn fail(e: simcache::Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(commands::exit_code(&e))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => match validate_config(&config) {
            Ok(c) => {
                println!("{}: ok ({})", config.display(), c.config.kind.name());
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Run { config } => {
            let loaded = match validate_config(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            match run_experiment(&loaded) {
                Ok(r) => {
                    let n = r.manifest.points.len();
                    let bad = r.failed();
                    println!("{}: {} of {n} points ok", r.dir.display(), n - bad);
                    if bad == 0 {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(2)
                    }
                }
                Err(e) => fail(e),
            }
        }
        Command::Place {
            algorithm,
            instance,
            seed,
            max_iters,
            stop,
            constraint_d_star,
            out,
        } => {
            let args = PlaceArgs {
                algorithm,
                instance,
                seed,
                max_iters,
                stop,
                constraint_d_star,
                out: out.unwrap_or_else(|| commands::default_out("place")),
            };
            match commands::place(&args) {
                Ok(r) => {
                    println!("cost {} ({} stored) -> {}", r.cost, r.stored, args.out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Cont {
            model,
            profile,
            gamma,
            k,
            h,
            beta_parent,
            leaf_scales,
            tolerance,
            max_sweeps,
            out,
        } => {
            let args = ContArgs {
                model,
                profile,
                gamma,
                k,
                h,
                beta_parent,
                leaf_scales,
                tolerance,
                max_sweeps,
            };
            let value = match commands::cont(&args) {
                Ok(v) => v,
                Err(e) => return fail(e),
            };
            let text = serde_json::to_string_pretty(&value).expect("json values serialize");
            match out {
                Some(p) => match std::fs::write(&p, text) {
                    Ok(()) => ExitCode::SUCCESS,
                    Err(e) => fail(e.into()),
                },
                None => {
                    emit(&text);
                    ExitCode::SUCCESS
                }
            }
        }
        Command::Online {
            policy:
                Online::Netduel {
                    instance,
                    trace,
                    window,
                    margin,
                    seed,
                    requests,
                    out,
                },
        } => {
            let args = OnlineArgs {
                instance,
                trace,
                window,
                margin,
                seed,
                requests,
                out: out.unwrap_or_else(|| commands::default_out("netduel")),
            };
            match commands::online(&args) {
                Ok(v) => {
                    println!("final cost {} -> {}", v["final_cost"], args.out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
    }
}
