use std::path::PathBuf;
use std::process::ExitCode;

use aeromanip::cli::{cmd_compare, cmd_rank, cmd_run, RunManifest};
use aeromanip::control::ControlMode;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aeromanip", version, about = "Fully actuated aerial manipulator simulator")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenarios and write <stem>.csv and <stem>.metrics for each.
    Run {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides every scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides every scenario's controller mode (dc_pid or plain_pid).
        #[arg(long)]
        mode: Option<ControlMode>,
        /// Scenarios run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
    },
    /// Run one scenario under several controller modes with the same seed.
    Compare {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "dc_pid,plain_pid")]
        modes: Vec<ControlMode>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write <stem>.<mode>.csv logs here.
        #[arg(long)]
        out: Option<PathBuf>,
        scenario: PathBuf,
    },
    /// Print the coupling matrix, rank and wrench envelope of a model's rotors.
    Rank {
        #[arg(long)]
        model: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(args: Args) -> aeromanip::Result<u8> {
    match args.command {
        Command::Run { model, out, seed, mode, jobs, scenarios } => {
            let mut manifest = RunManifest::new(model, scenarios, out)?;
            manifest.seed = seed;
            manifest.mode = mode;
            manifest.jobs = jobs;
            let report = cmd_run(&manifest)?;
            for o in &report.outcomes {
                match &o.result {
                    Ok(_) => println!("{}: ok", o.stem),
                    Err(e) => eprintln!("{}: failed: {e}", o.stem),
                }
            }
            Ok(report.exit_code())
        }
        Command::Compare { model, modes, seed, out, scenario } => {
            let cmp = cmd_compare(&model, &scenario, &modes, seed, out.as_deref())?;
            print!("{}", cmp.table());
            Ok(0)
        }
        Command::Rank { model } => {
            print!("{}", cmd_rank(&model)?);
            Ok(0)
        }
    }
}
