use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lmcf_core::experiment::{
    load_config, resume_experiment, run_experiment, sweep_experiment, verify_experiment,
    ExitStatus, ExperimentError, RunSummary, SweepParam,
};
use lmcf_core::verify::Suite;

#[derive(Parser)]
#[command(
    name = "lmcf",
    version,
    about = "Lagrangian mean curvature flow laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a config file or a built-in experiment.
    Run {
        /// Config file path, or one of the built-in experiment names.
        config: String,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run a verification suite (all, geometry, inequalities, decay, variation).
    Verify {
        suite: Suite,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Repeat a run over a list of values of one parameter.
    Sweep {
        config: String,
        /// epsilon, kappa or N.
        #[arg(long)]
        param: SweepParam,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Continue a run from a checkpoint file.
    Resume {
        checkpoint: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Config to take flow parameters from; defaults to the
        /// config.txt next to the checkpoint.
        #[arg(long)]
        config: Option<String>,
        /// New final time.
        #[arg(long)]
        t_max: Option<f64>,
    },
}

fn report_run(s: &RunSummary) -> ExitStatus {
    let tag = if s.exploratory { " [exploratory]" } else { "" };
    println!("{}{tag}: {}", s.outcome, s.detail);
    s.status
}

fn execute(command: Command) -> Result<ExitStatus, ExperimentError> {
    match command {
        Command::Run { config, out } => {
            let cfg = load_config(&config)?;
            Ok(report_run(&run_experiment(&cfg, &out)?))
        }
        Command::Verify { suite, out } => {
            let (status, reports) = verify_experiment(suite, &out)?;
            for r in &reports {
                println!("{}", r.summary());
            }
            let failed = reports.iter().filter(|r| !r.pass).count();
            println!("{} reports, {failed} failed", reports.len());
            Ok(status)
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => {
            let cfg = load_config(&config)?;
            let (status, rows) = sweep_experiment(&cfg, param, &values, &out)?;
            for r in &rows {
                println!(
                    "{param} = {:e}: {} (psi_max {:e}, rate {:e})",
                    r.value, r.outcome, r.final_psi_max, r.fitted_rate
                );
            }
            Ok(status)
        }
        Command::Resume {
            checkpoint,
            out,
            config,
            t_max,
        } => {
            let cfg = config.as_deref().map(load_config).transpose()?;
            Ok(report_run(&resume_experiment(
                &checkpoint,
                &out,
                cfg,
                t_max,
            )?))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap's own usage errors would exit with 2, which means TimedOut here.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let status = match execute(cli.command) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            ExitStatus::Error
        }
    };
    ExitCode::from(status.code() as u8)
}
