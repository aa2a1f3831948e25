use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sdre_cli::commands::{
    cmd_cases, cmd_gains, cmd_montecarlo, cmd_simulate, exit, Context, Overrides,
};

/// SDRE satellite attitude control: gain tables, simulations and campaigns.
///
/// Exit codes: 0 success, 1 I/O, 2 usage, 3 parse, 4 validation,
/// 5 solver, 6 divergence, 7 unsettled Monte-Carlo runs.
#[derive(Parser)]
#[command(name = "sdre", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build, certify and save the gain table.
    Gains(Common),
    /// Run one closed-loop simulation and write its trajectory.
    Simulate(Common),
    /// Compare the four reference weight cases on a shared scenario.
    Cases(Common),
    /// Run an inertia-uncertainty Monte-Carlo campaign.
    Montecarlo(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Gain-table file: output path for `gains`, input for `simulate` and `montecarlo`.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Output directory (overrides `[output] dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed (overrides `[montecarlo] seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Also write PNG plots of trajectories.
    #[arg(long)]
    plot: bool,
}

impl From<&Common> for Overrides {
    fn from(c: &Common) -> Self {
        Overrides {
            config: c.config.clone(),
            table: c.table.clone(),
            out: c.out.clone(),
            seed: c.seed,
            plot: c.plot,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE } else { exit::SUCCESS });
        }
    };
    let (common, run): (&Common, fn(&Context) -> _) = match &cli.command {
        Command::Gains(c) => (c, cmd_gains),
        Command::Simulate(c) => (c, cmd_simulate),
        Command::Cases(c) => (c, cmd_cases),
        Command::Montecarlo(c) => (c, cmd_montecarlo),
    };
    let result = Context::new(&common.into()).and_then(|ctx| run(&ctx));
    match result {
        Ok(outcome) => {
            print!("{}", outcome.stdout);
            ExitCode::from(outcome.code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
