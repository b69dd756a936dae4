use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use allee_cli::{run, CliError, Command, RunConfig};
use clap::{Parser, Subcommand};

/// Resource and strategy coevolution under an Allee effect.
#[derive(Parser)]
#[command(name = "allee", version)]
struct Cli {
    /// Flat key=value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<String>,
    /// Base seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    quiet: bool,
    /// Extra key=value assignments applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Macroscopic trajectory: t,R,x
    Simulate,
    /// Agent-based ensemble statistics
    Ensemble,
    /// Equilibria with eigenvalues and stability (JSON)
    FixedPoints,
    /// Terminal resource over an initial-condition grid
    Basin,
    /// Bi-stability over an (A, e_D_hat) window
    Region,
    /// Equilibrium branches and simulated terminal states along a parameter
    Bifurcation,
    /// Replicator versus knowledge-feedback bi-stability regions (JSON)
    CompareRegions,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Simulate => Command::Simulate,
            Sub::Ensemble => Command::Ensemble,
            Sub::FixedPoints => Command::FixedPoints,
            Sub::Basin => Command::Basin,
            Sub::Region => Command::Region,
            Sub::Bifurcation => Command::Bifurcation,
            Sub::CompareRegions => Command::CompareRegions,
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    for a in &cli.set {
        cfg.apply_assignment(a)?;
    }
    if let Some(seed) = cli.seed {
        cfg.sim.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn write_file(path: &str, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("{path}: {e}")))
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    let command = Command::from(cli.command);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Config(e.to_string()))?;
    let output = pool.install(|| run(command, &cfg))?;
    if cfg.out.is_empty() {
        std::io::stdout()
            .write_all(output.main.as_bytes())
            .map_err(|e| CliError::Io(e.to_string()))?;
    } else {
        write_file(&cfg.out, &output.main)?;
    }
    for (path, contents) in &output.sidecars {
        write_file(path, contents)?;
    }
    if !cli.quiet {
        let dest = if cfg.out.is_empty() {
            "stdout"
        } else {
            &cfg.out
        };
        eprintln!("{}: wrote {dest}", command.name());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
