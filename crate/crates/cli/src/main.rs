use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use invfeas::config::{parse_pair, Config};
use invfeas::verify::Fault;
use invfeas::{commands, CliError};
use invfeas_core::optimizer::Method;

#[derive(Parser)]
#[command(name = "invfeas", version, about = "Feasible output regions and safe setpoints for current-limited inverters")]
struct Cli {
    /// TOML configuration; every key defaults to the reference inverter.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the boundary of the feasible output region.
    Region {
        #[arg(long, default_value = "pq")]
        pair: String,
        #[arg(long, default_value_t = 360)]
        samples: usize,
        /// CSV path; the current circle goes to `<stem>_disk.<ext>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closest feasible outputs to a target.
    Optimize {
        #[arg(long, default_value = "pq")]
        pair: String,
        #[arg(long, num_args = 2, value_names = ["S1", "S2"], allow_negative_numbers = true, required = true)]
        target: Vec<f64>,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        gamma: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Sdp)]
        method: MethodArg,
        /// CSV of solver iterates.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a controller scenario.
    Simulate {
        #[arg(long)]
        scenario: String,
        /// Replace the scenario setpoints by the closest feasible outputs.
        #[arg(long)]
        optimize: bool,
        /// CSV path; without it the CSV goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the cross-checks and report pass/fail per suite.
    Verify {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Corrupt one component on purpose (negative control).
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<FaultArg>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Sdp,
    Fw,
    Grid,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    Support,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Region { pair, samples, out } => {
            commands::region(&cfg, parse_pair(&pair)?, samples, out.as_deref())
        }
        Command::Optimize { pair, target, gamma, method, out } => {
            let method = match method {
                MethodArg::Sdp => Method::Sdp,
                MethodArg::Fw => Method::FrankWolfe,
                MethodArg::Grid => Method::Grid,
            };
            let target = [target[0], target[1]];
            commands::optimize(&cfg, parse_pair(&pair)?, target, gamma, method, out.as_deref(), &mut stdout)
        }
        Command::Simulate { scenario, optimize, out } => {
            commands::simulate(&cfg, &scenario, optimize, out.as_deref(), &mut stdout)
        }
        Command::Verify { seed, out, inject_fault } => {
            let fault = inject_fault.map(|FaultArg::Support| Fault::Support);
            commands::verify(&cfg, seed, fault, out.as_deref(), &mut stdout)
        }
    }
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("INVFEAS_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !matches!(e, CliError::VerifyFailed) {
                eprintln!("invfeas: {e}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
