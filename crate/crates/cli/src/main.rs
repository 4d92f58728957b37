use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod plot;

use commands::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "radioslam",
    version,
    about = "Multi-robot pose-graph SLAM from WiFi fingerprints"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// Pipeline config file (.toml or .json); flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long, global = true, env = "RADIOSLAM_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset directory.
    Simulate(commands::SimulateArgs),
    /// Group raw scans into fingerprints.
    Ingest(commands::IngestArgs),
    /// Fit the similarity-to-distance model.
    TrainModel(commands::TrainArgs),
    /// Build and optimise the pose graph.
    Slam(commands::SlamArgs),
    /// Score an estimate against ground truth.
    Evaluate(commands::EvaluateArgs),
    /// Grid over nu_s x nu_p for each similarity measure.
    Sweep(commands::SweepArgs),
    /// SVG overlay of ground truth, odometry and estimates.
    ExportPlot(commands::PlotArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(2);
        }
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&cli.global, a),
        Command::Ingest(a) => commands::ingest(&cli.global, a),
        Command::TrainModel(a) => commands::train_model(&cli.global, a),
        Command::Slam(a) => commands::slam(&cli.global, a),
        Command::Evaluate(a) => commands::evaluate(&cli.global, a),
        Command::Sweep(a) => commands::sweep(&cli.global, a),
        Command::ExportPlot(a) => commands::export_plot(&cli.global, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::NotConverged(why) => write!(f, "solver did not converge ({why}); report written"),
        }
    }
}
