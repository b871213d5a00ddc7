use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pdist::auction::{AuctionEngine, AuctionParams};
use pdist::bottleneck::BottleneckEngine;
use pdist::diagram::PersistenceDiagram;
use pdist::masses::MassAuctionParams;
use pdist_cli::{format_diagram, gen_massed, records_to_csv, run_bench, BenchConfig};

/// Distances between persistence diagrams.
#[derive(Parser)]
#[command(name = "pdist", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BottleneckEngineArg {
    Geometric,
    Nongeometric,
}

#[derive(Clone, Copy, ValueEnum)]
enum WassersteinEngineArg {
    Geometric,
    Lazyheap,
    Masses,
}

#[derive(Subcommand)]
enum Command {
    /// Bottleneck distance between two diagram files.
    Bottleneck {
        file_a: PathBuf,
        file_b: PathBuf,
        /// Relative approximation parameter.
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        /// Refine the approximation to the exact distance.
        #[arg(long)]
        exact: bool,
        #[arg(long, value_enum, default_value = "geometric")]
        engine: BottleneckEngineArg,
    },
    /// q-Wasserstein distance between two diagram files.
    Wasserstein {
        file_a: PathBuf,
        file_b: PathBuf,
        /// Cost exponent (a real >= 1).
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        /// Relative approximation parameter.
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        #[arg(long, value_enum, default_value = "geometric")]
        engine: WassersteinEngineArg,
        /// Shuffle the bidder order with this seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate a synthetic diagram file.
    Gen {
        /// Number of points.
        #[arg(long)]
        n: usize,
        /// Scale: births are uniform in [0, s], persistences half-normal
        /// with standard deviation s.
        #[arg(long, default_value_t = 100.0)]
        s: f64,
        /// Average integer mass (masses uniform in [k/2, 3k/2]).
        #[arg(long, default_value_t = 1)]
        k: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Time the distance algorithms over generated instances; CSV output.
    Bench {
        /// Comma-separated diagram sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        /// Instance pairs per size.
        #[arg(long, default_value_t = 10)]
        reps: usize,
        /// Comma-separated cost exponents for the Wasserstein runs.
        #[arg(long, value_delimiter = ',', default_values_t = [1.0])]
        q: Vec<f64>,
        /// Engines to run (geometric, nongeometric, lazyheap, masses);
        /// default all.
        #[arg(long, value_delimiter = ',')]
        engines: Vec<String>,
        /// Output CSV file.
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

enum CliError {
    /// File I/O or diagram syntax trouble.
    Io(String),
    /// A flag value outside its documented range.
    Usage(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Io(m) | CliError::Usage(m) => write!(f, "{m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

fn load_diagram(path: &PathBuf) -> Result<PersistenceDiagram, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    pdist::parse_diagram(&text).map_err(|e| match e {
        pdist::Error::Parse { line, msg } => {
            CliError::Io(format!("{}:{line}: {msg}", path.display()))
        }
        other => CliError::Io(other.to_string()),
    })
}

fn lift_param_error(err: pdist::Error) -> CliError {
    match err {
        pdist::Error::InvalidParameter(m) => CliError::Usage(m),
        other => CliError::Io(other.to_string()),
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Bottleneck {
            file_a,
            file_b,
            delta,
            exact,
            engine,
        } => {
            let x = load_diagram(&file_a)?;
            let y = load_diagram(&file_b)?;
            let engine = match engine {
                BottleneckEngineArg::Geometric => BottleneckEngine::Geometric,
                BottleneckEngineArg::Nongeometric => BottleneckEngine::NonGeometric,
            };
            let value = if exact {
                pdist::exact_bottleneck_with(&x, &y, delta, engine).map_err(lift_param_error)?
            } else {
                pdist::approx_bottleneck_with(&x, &y, delta, engine)
                    .map_err(lift_param_error)?
                    .1
            };
            println!("{value}");
        }
        Command::Wasserstein {
            file_a,
            file_b,
            q,
            delta,
            engine,
            seed,
        } => {
            let x = load_diagram(&file_a)?;
            let y = load_diagram(&file_b)?;
            let value = match engine {
                WassersteinEngineArg::Geometric | WassersteinEngineArg::Lazyheap => {
                    let kind = match engine {
                        WassersteinEngineArg::Geometric => AuctionEngine::Geometric,
                        _ => AuctionEngine::LazyHeap,
                    };
                    let mut params = AuctionParams::new(delta, kind);
                    params.shuffle_seed = seed;
                    pdist::wasserstein_with(&x, &y, q, &params)
                        .map_err(lift_param_error)?
                        .value
                }
                WassersteinEngineArg::Masses => {
                    let mut params = MassAuctionParams::new(delta);
                    if let Some(s) = seed {
                        params.seed = s;
                    }
                    pdist::wasserstein_masses_with(&x, &y, q, &params)
                        .map_err(lift_param_error)?
                        .value
                }
            };
            println!("{value}");
        }
        Command::Gen {
            n,
            s,
            k,
            seed,
            output,
        } => {
            if n == 0 {
                return Err(CliError::Usage("--n must be at least 1".into()));
            }
            if s <= 0.0 {
                return Err(CliError::Usage("--s must be positive".into()));
            }
            if k == 0 {
                return Err(CliError::Usage("--k must be at least 1".into()));
            }
            let d = gen_massed(n, s, k, seed);
            std::fs::write(&output, format_diagram(&d))
                .map_err(|e| CliError::Io(format!("{}: {e}", output.display())))?;
        }
        Command::Bench {
            sizes,
            reps,
            q,
            engines,
            output,
        } => {
            if sizes.is_empty() {
                return Err(CliError::Usage("--sizes needs at least one size".into()));
            }
            let mut cfg = BenchConfig::new(sizes);
            cfg.reps = reps;
            cfg.qs = q;
            cfg.engines = engines;
            let records = run_bench(&cfg, |rec| {
                eprintln!(
                    "{} {} n={} q={} {:.3}s -> {}",
                    rec.algorithm, rec.engine, rec.n, rec.q, rec.seconds, rec.result
                );
            });
            std::fs::write(&output, records_to_csv(&records))
                .map_err(|e| CliError::Io(format!("{}: {e}", output.display())))?;
        }
    }
    Ok(())
}
