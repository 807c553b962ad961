use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cvroute::network::RoadNetwork;
use cvroute::scenario::{comparison_text, load_scenario, run_matrix, run_scenario, ExperimentMatrix};

#[derive(Parser)]
#[command(name = "cvroute", version, about = "Traffic and V2V co-simulation of breakdown warnings and rerouting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run an experiment matrix and compare its arms.
    Matrix {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Network file utilities.
    Net {
        #[command(subcommand)]
        command: NetCommand,
    },
}

#[derive(Subcommand)]
enum NetCommand {
    /// Parse and validate a network file.
    Validate { file: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::Run { scenario, seed, out } => {
            let mut config = load_scenario(&scenario)?;
            if let Some(seed) = seed {
                config.scenario.seed = seed;
            }
            let output = run_scenario(&config, Some(&out))?;
            let s = &output.summary;
            println!(
                "{}: {}/{} arrived, mean delay {:.3} s, {} rerouted, outputs in {}",
                s.scenario,
                s.arrived,
                s.demand,
                s.mean_delay_s,
                s.reroute_count,
                out.display()
            );
        }
        Command::Matrix { config, jobs, out } => {
            let matrix = ExperimentMatrix::load(&config)?;
            let (comparison, _) = run_matrix(&matrix, jobs, Some(&out))?;
            print!("{}", comparison_text(&comparison));
        }
        Command::Net {
            command: NetCommand::Validate { file },
        } => {
            let text = std::fs::read_to_string(&file).map_err(|e| format!("{}: {e}", file.display()))?;
            let net = RoadNetwork::parse(&text).map_err(|e| format!("{}: {e}", file.display()))?;
            println!("{}: {} nodes, {} edges, ok", file.display(), net.nodes().len(), net.edges().len());
        }
    }
    Ok(())
}
