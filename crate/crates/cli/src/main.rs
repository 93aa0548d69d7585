use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hcbh_lab::{load, run, CliError, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "hcbh-lab", version, about = "Run driven hard-core Bose-Hubbard lattice experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run(Target),
    /// Check a config file without running it.
    Validate(Target),
}

#[derive(Args)]
struct Target {
    config: PathBuf,
    /// Replace the config's seed (and seed lists).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for data-parallel kernels.
    #[arg(long)]
    workers: Option<usize>,
    /// Directory for output files.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl Target {
    fn load(&self) -> Result<RunConfig, CliError> {
        let overrides = Overrides { seed: self.seed, workers: self.workers, out_dir: self.out_dir.clone() };
        load(&self.config, &overrides)
    }
}

fn set_workers(workers: Option<usize>) -> Result<(), CliError> {
    match workers {
        Some(0) => Err(CliError::Config("workers must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("worker pool: {e}"))),
        None => Ok(()),
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Validate(t) => {
            let c = t.load()?;
            if c.workers == Some(0) {
                return Err(CliError::Config("workers must be at least 1".into()));
            }
            println!(
                "ok: kind = {}, lattice = {} ({} sites), config sha256 = {}",
                c.kind.name(),
                c.lattice_name,
                c.spec.n_sites(),
                c.hash
            );
            Ok(())
        }
        Command::Run(t) => {
            let c = t.load()?;
            set_workers(c.workers)?;
            let manifest = run(&c)?;
            println!("wrote {}", manifest.display());
            Ok(())
        }
    }
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
