use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use isaacs_cli::error::{EXIT_OK, EXIT_USAGE};
use isaacs_cli::{execute, replay, resolve_out, CliResult, Command, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "isaacs-lab",
    version,
    about = "Run priority-game experiments and write CSV tables"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides run.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides run.levels, e.g. `25,50,100`.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
}

#[derive(Subcommand)]
enum Sub {
    /// Brute-force representation check on random one-period games.
    Static(RunArgs),
    /// Lower, mixed and upper Hamiltonians at random states.
    Hamiltonian(RunArgs),
    /// Marks, sub-grid and density report.
    Schedule(RunArgs),
    /// Explicit monotone solves of the three Isaacs equations.
    Pde(RunArgs),
    /// Lattice values and Markov strategies.
    Dp(RunArgs),
    /// Monte Carlo play of the lattice profile, plus exploitability.
    Simulate(RunArgs),
    /// Gap to the PDE reference across refinement levels.
    Converge(RunArgs),
    /// Re-run a manifest and check every output digest.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run_with(command: Command, args: RunArgs) -> CliResult<()> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.run.seed = seed;
    }
    if let Some(levels) = args.levels {
        config.run.levels = levels;
    }
    config.validate()?;
    let out = resolve_out(args.out, &config);
    execute(command, &config, &out)?;
    println!("{} finished; outputs in {}", command.name(), out.display());
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let (command, args) = match cli.command {
        Sub::Static(a) => (Command::Static, a),
        Sub::Hamiltonian(a) => (Command::Hamiltonian, a),
        Sub::Schedule(a) => (Command::Schedule, a),
        Sub::Pde(a) => (Command::Pde, a),
        Sub::Dp(a) => (Command::Dp, a),
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::Converge(a) => (Command::Converge, a),
        Sub::Replay { manifest, out } => {
            let m = replay(&manifest, &out)?;
            println!(
                "replayed {}: {} outputs match",
                m.manifest.command,
                m.manifest.outputs.len()
            );
            return Ok(());
        }
    };
    run_with(command, args)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
