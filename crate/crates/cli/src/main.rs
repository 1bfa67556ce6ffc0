use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ehmm_cli::config::{ConfigLayer, RunConfig};
use ehmm_cli::{cmd_run, cmd_simulate, default_data_path, report, CliError};
use ehmm_core::SamplerKind;

/// Embedded-HMM MCMC experiments on the Ricker model.
#[derive(Parser)]
#[command(name = "ehmm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate observations and the latent path.
    Simulate(ConfigArgs),
    /// Run the configured chains and write one trace per chain.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Observations file; defaults to <out>/observations.csv.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// ACT, ACT x time and posterior summary of two or more traces.
    Act {
        /// Trace files (chain-<c>.csv or its .json sidecar).
        #[arg(required = true, num_args = 1..)]
        traces: Vec<PathBuf>,
        /// Output directory; defaults to the directory of the first trace.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Combined comparison table over the runs of an experiment directory.
    Report { dir: PathBuf },
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON configuration file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_sampler)]
    sampler: Option<SamplerKind>,
    #[arg(long)]
    pool_size: Option<usize>,
    #[arg(long)]
    scaling: Option<f64>,
    #[arg(long)]
    updates_per_pool: Option<usize>,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_sampler(s: &str) -> Result<SamplerKind, String> {
    s.parse().map_err(|e: ehmm_core::Error| e.to_string())
}

impl ConfigArgs {
    fn resolve(self) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(p) => ConfigLayer::from_file(p)?,
            None => ConfigLayer::default(),
        };
        let flags = ConfigLayer {
            seed: self.seed,
            sampler: self.sampler,
            pool_size: self.pool_size,
            scaling: self.scaling,
            updates_per_pool: self.updates_per_pool,
            n1: self.n1,
            iterations: self.iterations,
            chains: self.chains,
            out: self.out,
            ..Default::default()
        };
        RunConfig::resolve(file.overlay(flags))
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate(args) => {
            let config = args.resolve()?;
            let paths = cmd_simulate(&config)?;
            println!(
                "wrote {} and {}",
                paths.observations.display(),
                paths.latent.display()
            );
        }
        Command::Run { config, data } => {
            let config = config.resolve()?;
            let data = data.unwrap_or_else(|| default_data_path(&config));
            println!("{}", cmd_run(&config, &data)?.line());
        }
        Command::Act { traces, out } => {
            let out = out.unwrap_or_else(|| {
                traces[0]
                    .parent()
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from("."))
            });
            let written = report::cmd_act(&traces, &out)?;
            print!(
                "{}",
                std::fs::read_to_string(&written.act_txt).unwrap_or_default()
            );
        }
        Command::Report { dir } => {
            let written = report::cmd_report(&dir)?;
            print!(
                "{}",
                std::fs::read_to_string(&written.text).unwrap_or_default()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
