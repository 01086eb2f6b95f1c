//! `roughnet`: p-variation curves, forward passes, stability certificates
//! and residual-network embeddings from the command line.

// `!(x >= 0.0)` style comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod error;
mod fields;
mod weights;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use roughnet::Norm;

use commands::{CertifyOptions, PvarOptions};
use error::{CliError, CliResult, EXIT_VIOLATION};
use weights::WeightFile;

#[derive(Parser)]
#[command(name = "roughnet", version, about = "Rough-path analysis of residual network weights")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    L1,
    L2,
    Linf,
}

impl From<NormArg> for Norm {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::L1 => Norm::L1,
            NormArg::L2 => Norm::L2,
            NormArg::Linf => Norm::LInf,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// p-variation of a weight series over a grid of exponents, as CSV.
    Pvar {
        #[arg(long)]
        input: PathBuf,
        /// Inclusive grid A:B:STEP.
        #[arg(long)]
        p_grid: String,
        /// Sub-interval k,l of the layer indices.
        #[arg(long)]
        interval: Option<String>,
        /// Use the homogeneous rough-path norm for p >= 2.
        #[arg(long)]
        lifted: bool,
        /// Permit exponents below 1.
        #[arg(long)]
        allow_quasinorm: bool,
        #[arg(long, value_enum, default_value = "l2")]
        norm: NormArg,
        /// Output path, or `-` for stdout.
        #[arg(long)]
        output: PathBuf,
    },
    /// Run the network driven by the weight series, as CSV of x_k per layer.
    Solve {
        #[arg(long)]
        input: PathBuf,
        /// tanh, sigmoid, softplus, softplus:BETA, relu or linear.
        #[arg(long)]
        field: String,
        /// JSON array of matrices for a linear field.
        #[arg(long)]
        matrices: Option<PathBuf>,
        /// Initial state, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
        #[arg(long)]
        output: PathBuf,
    },
    /// Stability certificate as JSON; exits 4 if the bound is violated.
    Certify {
        #[arg(long)]
        input: PathBuf,
        /// Second weight series; defaults to the first.
        #[arg(long)]
        input2: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        p: f64,
        #[arg(long)]
        field: String,
        #[arg(long)]
        matrices: Option<PathBuf>,
        /// Initial state, comma separated; defaults to all ones.
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
        /// Added to every coordinate of the second initial state.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        perturb_x0: f64,
        #[arg(long, value_enum, default_value = "l2")]
        norm: NormArg,
        #[arg(long)]
        output: PathBuf,
    },
    /// Embed y_{k+1} = y_k + sigma(y_k, theta_k) as a controlled system and write its weight file.
    Embed {
        /// JSON array of N square matrices.
        #[arg(long)]
        theta: PathBuf,
        #[arg(long, default_value = "tanh-matvec")]
        sigma: String,
        #[arg(long, allow_hyphen_values = true)]
        y0: String,
        #[arg(long)]
        output: PathBuf,
    },
}

/// Writes the whole document at once; files go through a temporary sibling
/// and a rename so a failed run leaves no partial output.
fn write_output(path: &Path, content: &str) -> CliResult<()> {
    if path.as_os_str() == "-" {
        let mut out = std::io::stdout().lock();
        return out.write_all(content.as_bytes()).map_err(|e| CliError::input(format!("cannot write stdout: {e}")));
    }
    let name = path.file_name().ok_or_else(|| CliError::input(format!("bad output path {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, content).map_err(|e| CliError::input(format!("cannot write {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        CliError::input(format!("cannot write {}: {e}", path.display()))
    })
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Pvar { input, p_grid, interval, lifted, allow_quasinorm, norm, output } => {
            let file = WeightFile::load(&input)?;
            let opts = PvarOptions { grid: &p_grid, interval: interval.as_deref(), lifted, allow_quasinorm, norm: norm.into() };
            write_output(&output, &commands::pvar_csv(&file, &opts)?)
        }
        Command::Solve { input, field, matrices, x0, output } => {
            let file = WeightFile::load(&input)?;
            write_output(&output, &commands::solve_csv(&file, &field, matrices.as_deref(), &x0)?)
        }
        Command::Certify { input, input2, p, field, matrices, x0, perturb_x0, norm, output } => {
            let file = WeightFile::load(&input)?;
            let other = input2.as_deref().map(WeightFile::load).transpose()?;
            let opts = CertifyOptions {
                field: &field,
                matrices: matrices.as_deref(),
                p,
                x0: x0.as_deref(),
                perturb_x0,
                norm: norm.into(),
            };
            let cert = commands::certify(&file, other.as_ref(), &opts)?;
            let mut json = serde_json::to_string_pretty(&cert).expect("certificates serialize");
            json.push('\n');
            // A violated certificate is still a complete document: write it, then signal.
            write_output(&output, &json)?;
            if cert.holds {
                Ok(())
            } else {
                Err(CliError::violation(format!(
                    "bound violated: observed {} exceeds bound {}",
                    cert.observed.0, cert.bound_value.0
                )))
            }
        }
        Command::Embed { theta, sigma, y0, output } => {
            let file = commands::embed(&theta, &sigma, &y0)?;
            write_output(&output, &file.to_json())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let label = if e.code == EXIT_VIOLATION { "violation" } else { "error" };
            eprintln!("roughnet: {label}: {e}");
            ExitCode::from(e.code)
        }
    }
}
