//! Command-line surface. Parsing failures exit with the usage status (2);
//! anything that parses cleanly is handed to `commands`.

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "nnbisim",
    version,
    about = "Reduce feedforward networks by merging indistinguishable nodes",
    propagate_version = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check whether a partition is a valid (delta-)bisimulation.
    Check(CheckArgs),
    /// Compute the coarsest merge partition and write the reduced model.
    Minimize(MinimizeArgs),
    /// Collapse a model by an explicitly given partition.
    Quotient(QuotientArgs),
    /// Certify an output deviation bound for a delta-reduction.
    Bound(BoundArgs),
    /// Sample inputs and measure the deviation between two models.
    Compare(CompareArgs),
    /// Run a forward pass on one input vector.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Model document (JSON).
    pub model: PathBuf,
    /// Partition document (JSON).
    pub partition: PathBuf,
    /// Merge tolerance; 0 demands exact equality.
    #[arg(long, default_value_t = 0.0, value_parser = parse_nonnegative)]
    pub delta: f64,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct MinimizeArgs {
    pub model: PathBuf,
    /// Where to write the reduced model.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Where to write the partition that produced it.
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// Also merge input and output nodes. This shrinks harder but changes
    /// the network's interface; by default those layers stay untouched.
    #[arg(long)]
    pub merge_io: bool,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct QuotientArgs {
    pub model: PathBuf,
    pub partition: PathBuf,
    /// Merge tolerance the partition must satisfy.
    #[arg(long, default_value_t = 0.0, value_parser = parse_nonnegative)]
    pub delta: f64,
    /// Which member of a merged block donates weights and bias.
    #[arg(long, value_enum, default_value_t = PolicyArg::MinIndex)]
    pub policy: PolicyArg,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    pub model: PathBuf,
    pub partition: PathBuf,
    #[arg(long, value_parser = parse_nonnegative)]
    pub delta: f64,
    /// Input block spread the bound should absorb.
    #[arg(long, default_value_t = 0.0, value_parser = parse_nonnegative)]
    pub eps0: f64,
    /// Largest input magnitude the bound covers.
    #[arg(long, default_value_t = 1.0, value_parser = parse_nonnegative)]
    pub vinf: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Uniform)]
    pub mode: ModeArg,
    /// Override the built-in Lipschitz estimate with a sharper sound one.
    #[arg(long, value_parser = parse_nonnegative)]
    pub lipschitz: Option<f64>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// The original model.
    pub original: PathBuf,
    /// The reduced model.
    pub reduced: PathBuf,
    /// Partition mapping original nodes to reduced nodes.
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long, default_value_t = 256)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Inputs are drawn with magnitudes up to this value.
    #[arg(long, default_value_t = 1.0, value_parser = parse_nonnegative)]
    pub vinf: f64,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub model: PathBuf,
    /// Input values, comma separated, one per input node.
    #[arg(long, value_parser = parse_csv_values)]
    pub input: CsvValues,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Include wall-clock timings in the report. Off by default so reports
    /// are byte-stable across runs.
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    MinIndex,
    MaxIndex,
    PerValueMin,
    PerValueMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Uniform,
    PerLayer,
}

/// Comma-separated f64 list, parsed at the clap layer so malformed values
/// are usage errors.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvValues(pub Vec<f64>);

fn parse_csv_values(text: &str) -> Result<CsvValues, String> {
    let values = text
        .split(',')
        .map(|part| {
            let part = part.trim();
            part.parse::<f64>().map_err(|_| format!("not a number: {part:?}"))
        })
        .collect::<Result<Vec<f64>, String>>()?;
    if values.is_empty() {
        return Err("expected at least one value".to_string());
    }
    if let Some(bad) = values.iter().find(|x| !x.is_finite()) {
        return Err(format!("input values must be finite, got {bad}"));
    }
    Ok(CsvValues(values))
}

fn parse_nonnegative(text: &str) -> Result<f64, String> {
    let x: f64 = text.parse().map_err(|_| format!("not a number: {text:?}"))?;
    if !(x >= 0.0) || !x.is_finite() {
        return Err(format!("must be a finite value >= 0, got {x}"));
    }
    Ok(x)
}
