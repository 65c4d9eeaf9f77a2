use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use extnet::pipeline::{self, PipelineConfig, SimSource};
use extnet::{io, ptcc, Error, ErrorClass};

#[derive(Parser)]
#[command(name = "extnet", version, about = "Extremal dependence networks from heavy-tailed data")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a benchmark case or a given coefficient matrix.
    Simulate(SimulateArgs),
    /// Run the estimation pipeline and write all artifacts.
    Run(RunArgs),
    /// Partial tail-correlation matrix of a TPDM file.
    Ptcc(PtccArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Benchmark case 1, 2 or 3.
    #[arg(long, conflicts_with = "matrix", required_unless_present = "matrix")]
    case: Option<u8>,
    /// Coefficient matrix CSV (header row; rows are variables).
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sample CSV to write; truth files go next to it.
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Key-value configuration file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// raw | pre-transformed
    #[arg(long)]
    margins: Option<String>,
    #[arg(long)]
    quantile: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    m: Option<f64>,
    /// glasso | sgl
    #[arg(long)]
    method: Option<String>,
    /// soft-connected | fixed-sparsity
    #[arg(long)]
    selection: Option<String>,
    #[arg(long)]
    sparsity: Option<f64>,
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Any other configuration key, as key=value (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct PtccArgs {
    /// TPDM CSV (header row of names).
    #[arg(long)]
    tpdm: PathBuf,
    #[arg(long, short)]
    output: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numerical => 4,
    }
}

fn run_config(args: &RunArgs) -> Result<PipelineConfig, Error> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        pairs.extend(io::parse_key_values(&text)?.into_iter().map(|(k, v, _)| (k, v)));
    }
    let mut flag = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            pairs.push((k.to_string(), v));
        }
    };
    flag("input", args.input.as_ref().map(|p| p.display().to_string()));
    flag("output", args.output.as_ref().map(|p| p.display().to_string()));
    flag("margins", args.margins.clone());
    flag("quantile", args.quantile.map(|v| v.to_string()));
    flag("radius", args.radius.map(|v| v.to_string()));
    flag("m", args.m.map(|v| v.to_string()));
    flag("method", args.method.clone());
    flag("selection", args.selection.clone());
    flag("sparsity", args.sparsity.map(|v| v.to_string()));
    flag("bootstrap", args.bootstrap.map(|v| v.to_string()));
    flag("seed", args.seed.map(|v| v.to_string()));
    for s in &args.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{s}'")))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    // A threshold flag replaces the other kind given in the file.
    if args.quantile.is_some() {
        pairs.retain(|(k, _)| k != "radius");
    } else if args.radius.is_some() {
        pairs.retain(|(k, _)| k != "quantile");
    }
    PipelineConfig::from_pairs(&pairs)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(4);
        }
    }

    let result: Result<(), (String, Error)> = match cli.command {
        Command::Simulate(a) => {
            let source = match (a.case, a.matrix) {
                (Some(c), _) => SimSource::Case(c),
                (None, Some(m)) => SimSource::Matrix(m),
                (None, None) => unreachable!("clap requires one of --case/--matrix"),
            };
            pipeline::simulate_to_files(&source, a.n, a.seed, &a.output)
                .map(|files| {
                    for f in files {
                        log::info!("wrote {}", f.display());
                    }
                })
                .map_err(|e| ("simulate".to_string(), e))
        }
        Command::Run(a) => match run_config(&a) {
            Err(e) => Err(("config".to_string(), e)),
            Ok(cfg) => pipeline::run_pipeline(&cfg)
                .map(|report| {
                    println!(
                        "{} edges, {} exceedances; artifacts in {}",
                        report.estimate.selected.edge_count(),
                        report.estimate.tpdm.n_exceedances,
                        cfg.output.display()
                    );
                })
                .map_err(|f| (f.stage.to_string(), f.error)),
        },
        Command::Ptcc(a) => io::read_tpdm(&a.tpdm)
            .and_then(|t| {
                let m = ptcc::ptcc_matrix(&t.sigma)?;
                io::write_matrix_csv(&a.output, &t.names, &m)
            })
            .map_err(|e| ("ptcc".to_string(), e)),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((stage, e)) => {
            eprint!("{}", pipeline::error_record(&stage, &e));
            ExitCode::from(exit_code(&e))
        }
    }
}
