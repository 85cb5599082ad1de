//! Command-line front end for the backscatter channel-estimation simulator.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for infeasible
//! scenarios (e.g. a training length shorter than K+1).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use backcom_core::pilots::{
    custom_pilot, default_tau, dft_pilot, hadamard_pilot, hadamard_pilot_with_tau,
    modified_zc_pilot, validate_pilot, PilotDesign, PilotMatrix, DEFAULT_TOLERANCE,
};
use backcom_core::scenario::{preset, run_scenario, ScenarioConfig, PRESET_NAMES};
use backcom_core::Error;

#[derive(Parser)]
#[command(
    name = "backcom",
    about = "Monte-Carlo simulator for one-shot pilot-based channel estimation in backscatter networks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo scenario and write a CSV result table.
    Run {
        /// Named preset scenario.
        #[arg(long, conflicts_with = "config", value_parser = PRESET_NAMES)]
        preset: Option<String>,
        /// JSON scenario file (see the manifest of any run for the schema).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the trial count.
        #[arg(long)]
        trials: Option<usize>,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of tags.
        #[arg(long)]
        tags: Option<usize>,
        /// Override the training length.
        #[arg(long)]
        tau: Option<usize>,
        /// Output CSV path; a JSON manifest is written alongside.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a pilot matrix and write it as CSV.
    Pilots {
        #[arg(long, value_enum)]
        design: DesignArg,
        /// Number of tags K (the matrix has K+1 rows).
        #[arg(long)]
        tags: usize,
        /// Sequence length; defaults to the smallest feasible for the design.
        #[arg(long)]
        tau: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a pilot matrix CSV against the orthogonality conditions.
    Validate {
        #[arg(long = "in")]
        input: PathBuf,
        /// Largest tolerated orthogonality defect.
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DesignArg {
    Hadamard,
    Zc,
    Dft,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Infeasible(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn dispatch(command: Command) -> Result<(), Error> {
    match command {
        Command::Run { preset: preset_name, config, trials, seed, tags, tau, out } => {
            let mut cfg = load_config(preset_name.as_deref(), config.as_deref())?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(k) = tags {
                cfg.num_tags = k;
            }
            if let Some(t) = tau {
                cfg.tau = Some(t);
            }
            let result = run_scenario(&cfg)?;
            std::fs::write(&out, &result.csv)?;
            let manifest_path = out.with_extension("manifest.json");
            let manifest = serde_json_string(&result.manifest)?;
            std::fs::write(&manifest_path, manifest)?;
            println!(
                "wrote {} records to {} (manifest: {})",
                result.records.len(),
                out.display(),
                manifest_path.display()
            );
            Ok(())
        }
        Command::Pilots { design, tags, tau, out } => {
            let matrix = build_pilots(design, tags, tau)?;
            std::fs::write(&out, matrix.to_csv())?;
            println!(
                "wrote {} x {} {} pilot matrix to {}",
                matrix.rows(),
                matrix.tau(),
                matrix.design(),
                out.display()
            );
            Ok(())
        }
        Command::Validate { input, tolerance } => {
            let text = std::fs::read_to_string(&input)?;
            let matrix = PilotMatrix::<f64>::from_csv(&text)?;
            // re-run the full construction checks on top of the raw report
            let report = validate_pilot(&matrix, tolerance);
            println!("rows: {} (K = {})", matrix.rows(), matrix.num_tags());
            println!("tau: {}", matrix.tau());
            println!("source orthogonality defect: {:e}", report.source_orthogonality_defect);
            println!("mutual orthogonality defect: {:e}", report.mutual_orthogonality_defect);
            println!("gram defect: {:e}", report.gram_defect);
            if report.passed && custom_pilot(matrix.matrix().clone()).is_ok() {
                println!("pilot matrix is valid");
                Ok(())
            } else {
                Err(Error::InvalidPilot(format!(
                    "defects exceed tolerance {tolerance:e} or structural checks failed"
                )))
            }
        }
    }
}

fn load_config(preset_name: Option<&str>, config: Option<&Path>) -> Result<ScenarioConfig, Error> {
    match (preset_name, config) {
        (Some(name), None) => preset(name),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)?;
            ScenarioConfig::from_json(&text)
        }
        _ => Err(Error::Config("exactly one of --preset or --config is required".into())),
    }
}

fn build_pilots(
    design: DesignArg,
    tags: usize,
    tau: Option<usize>,
) -> Result<PilotMatrix<f64>, Error> {
    match design {
        DesignArg::Hadamard => match tau {
            Some(t) => hadamard_pilot_with_tau(tags, t),
            None => Ok(hadamard_pilot(tags)),
        },
        DesignArg::Zc => {
            let t = tau.unwrap_or_else(|| default_tau(PilotDesign::ModifiedZc, tags));
            modified_zc_pilot(tags, t)
        }
        DesignArg::Dft => {
            let t = tau.unwrap_or_else(|| default_tau(PilotDesign::Dft, tags));
            dft_pilot(tags, t)
        }
    }
}

fn serde_json_string(manifest: &backcom_core::scenario::RunManifest) -> Result<String, Error> {
    backcom_core::scenario::manifest_json(manifest)
}
