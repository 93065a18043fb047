use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use matdist_cli::{run, Command, Overrides};

#[derive(Parser)]
#[command(
    name = "matdist",
    version,
    about = "Material distribution analysis of evolving bodies"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Fiber dimensions at every grid point.
    Dims(Common),
    /// Remodeling and aging verdicts over the grid.
    Classify(Common),
    /// Material isomorphism between two point-instants.
    Isomorphism(Common),
    /// Leaf trace through a seed point.
    Trace(Common),
    /// Analysis of a sampled remodeling process.
    Remodel(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `sampling.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MATDIST_LOG", "warn")).init();
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Sub::Dims(c) => (Command::Dims, c),
        Sub::Classify(c) => (Command::Classify, c),
        Sub::Isomorphism(c) => (Command::Isomorphism, c),
        Sub::Trace(c) => (Command::Trace, c),
        Sub::Remodel(c) => (Command::Remodel, c),
    };
    let overrides = Overrides {
        seed: common.seed,
        out: common.out,
        jobs: common.jobs,
    };
    std::process::exit(run(command, &common.config, &overrides));
}
