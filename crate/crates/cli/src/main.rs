use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ehrenfest_cli::commands::{self, Options};

#[derive(Parser)]
#[command(name = "ehrenfest", version, about = "Ehrenfest times, revivals and phase-space densities for wave packets in regular potentials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; defaults to ehrenfest-out/<scenario hash>.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for ensembles and sweeps.
    #[arg(long, global = true, env = "EHRENFEST_THREADS")]
    threads: Option<usize>,
    /// Replace every seed in the config.
    #[arg(long, global = true)]
    seed_override: Option<u64>,
    /// Reduced ensembles, sweeps and 2D grids.
    #[arg(long, global = true)]
    quick: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its datasets.
    Run,
    /// Sweep ħ_ε (or N) and fit the scaling exponent.
    Sweep,
    /// Predicted and measured τ and T_r against 1/ħ_ε.
    Diagram,
    /// Closed-form time scales for everyday and atomic systems.
    Examples,
    /// Check a config without running it.
    Validate,
}

fn dispatch(cli: &Cli) -> anyhow::Result<()> {
    let opts = Options { config: cli.config.clone(), out: cli.out.clone(), seed_override: cli.seed_override, quick: cli.quick };
    match cli.command {
        Command::Run => println!("wrote {}", commands::cmd_run(&opts)?.display()),
        Command::Sweep => println!("wrote {}", commands::cmd_sweep(&opts)?.display()),
        Command::Diagram => println!("wrote {}", commands::cmd_diagram(&opts)?.display()),
        Command::Examples => print!("{}", commands::cmd_examples(&opts)?),
        Command::Validate => print!("{}", commands::cmd_validate(&opts)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads.filter(|&n| n > 0) {
        pool = pool.num_threads(n);
    }
    let result = match pool.build() {
        Ok(pool) => pool.install(|| dispatch(&cli)),
        Err(e) => Err(e.into()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(ehrenfest_cli::exit_code(&e) as u8)
        }
    }
}
