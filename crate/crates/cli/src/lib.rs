//! Configuration, orchestration and report emission for the `matdist` binary.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

pub use commands::{
    cmd_classify, cmd_dims, cmd_isomorphism, cmd_remodel, cmd_trace, Written, SCHEMA_VERSION,
};
pub use config::RunConfig;
pub use error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Dims,
    Classify,
    Isomorphism,
    Trace,
    Remodel,
}

/// Command-line overrides applied on top of the config file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Worker threads; `None` uses the rayon default.
    pub jobs: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(seed) = self.seed {
            cfg.sampling.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
    }
}

/// Runs one command on a dedicated worker pool.
pub fn execute(
    command: Command,
    cfg: &RunConfig,
    jobs: Option<usize>,
) -> Result<Written, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match command {
        Command::Dims => cmd_dims(cfg),
        Command::Classify => cmd_classify(cfg),
        Command::Isomorphism => cmd_isomorphism(cfg),
        Command::Trace => cmd_trace(cfg),
        Command::Remodel => cmd_remodel(cfg),
    })
}

/// Loads the config, applies overrides and runs; returns the process exit code.
pub fn run(command: Command, config: &std::path::Path, overrides: &Overrides) -> i32 {
    let result = RunConfig::load(config).and_then(|mut cfg| {
        overrides.apply(&mut cfg);
        cfg.validate()?;
        execute(command, &cfg, overrides.jobs)
    });
    match result {
        Ok(written) => {
            for f in &written.files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
