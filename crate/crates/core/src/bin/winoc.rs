use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use winoc::cli::{emit_csv, load_config, run_command, schema_help, CliError, Command, Detail, Format, RunOptions};
use winoc::{Model, ThetaBoundRule};

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Total channel gain.
    Gain,
    /// Boundary-less against boundary-constrained gain.
    CompareModels,
    /// Exact gain against the reduced approximation.
    ApproxError,
    /// All models along the [sweep] axis.
    Sweep,
    /// Loop counters and their closed-form prediction.
    Complexity,
    /// Counting against exhaustive enumeration on the [oracle] matrix.
    OracleCheck,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Tsv,
}

#[derive(Clone, Copy, ValueEnum)]
enum DetailArg {
    Summary,
    Angle,
    Class,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    BoundaryLess,
    BoundaryConstrained,
}

#[derive(Parser)]
#[command(name = "winoc", version, about = "Channel gain of layered wireless NoC stacks", after_help = schema_help())]
struct Args {
    #[command(subcommand)]
    command: Cmd,
    /// TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; defaults to [output].path, then stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Override geometry.r.
    #[arg(long, global = true)]
    r: Option<u32>,
    /// Override geometry.q.
    #[arg(long, global = true, conflicts_with = "theta_bound")]
    q: Option<u32>,
    /// Use this critical angle (radians) instead of solving for it.
    #[arg(long = "theta-bound", global = true)]
    theta_bound: Option<f64>,
    #[arg(long, global = true, value_enum, default_value = "summary")]
    detail: DetailArg,
    #[arg(long, global = true, value_enum)]
    model: Option<ModelArg>,
    /// Evaluate angle samples on one thread.
    #[arg(long, global = true)]
    serial: bool,
}

fn run(args: Args) -> Result<(), CliError> {
    let Some(path) = args.config else {
        return Err(winoc::cli::ConfigError::Invalid {
            key: "--config".into(),
            constraint: "a config file is required".into(),
        }
        .into());
    };
    let mut cfg = load_config(&path)?;
    if let Some(r) = args.r {
        if r == 0 {
            return Err(winoc::cli::ConfigError::Invalid {
                key: "--r".into(),
                constraint: "r ≥ 1".into(),
            }
            .into());
        }
        cfg.geometry.samples = r;
    }
    if let Some(q) = args.q {
        cfg.theta_rule = ThetaBoundRule::Solve { q };
    }
    if let Some(t) = args.theta_bound {
        if !(t > 0.0 && t < std::f64::consts::FRAC_PI_2) {
            return Err(winoc::cli::ConfigError::Invalid {
                key: "--theta-bound".into(),
                constraint: "0 < theta_bound < π/2".into(),
            }
            .into());
        }
        cfg.theta_rule = ThetaBoundRule::Fixed(t);
    }
    let format = match args.format {
        Some(FormatArg::Csv) => Format::Csv,
        Some(FormatArg::Tsv) => Format::Tsv,
        None => cfg.output.format,
    };
    let opts = RunOptions {
        detail: match args.detail {
            DetailArg::Summary => Detail::Summary,
            DetailArg::Angle => Detail::Angle,
            DetailArg::Class => Detail::Class,
        },
        model: args.model.map(|m| match m {
            ModelArg::BoundaryLess => Model::BoundaryLess,
            ModelArg::BoundaryConstrained => Model::BoundaryConstrained,
        }),
        serial: args.serial,
    };
    let cmd = match args.command {
        Cmd::Gain => Command::Gain,
        Cmd::CompareModels => Command::CompareModels,
        Cmd::ApproxError => Command::ApproxError,
        Cmd::Sweep => Command::Sweep,
        Cmd::Complexity => Command::Complexity,
        Cmd::OracleCheck => Command::OracleCheck,
    };
    let table = run_command(cmd, &cfg, &opts)?;
    match args.out.or(cfg.output.path) {
        Some(p) => emit_csv(&table, format, &p),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            winoc::cli::write_table(&table, format, &mut lock)?;
            lock.flush().map_err(|source| CliError::Io {
                path: PathBuf::from("<stdout>"),
                source,
            })
        }
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("winoc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
