use std::path::PathBuf;

use bec_design::ensemble::DegreeConvention;
use bec_design::optimizer::{DesignMode, Method};
use bec_design::sdp::SolverSettings;
use clap::{Args, Parser, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Solve a design problem.
    Optimize,
    /// Check a given ensemble (or a saved result) by density evolution.
    Verify,
    /// Estimate the decoding threshold of a given ensemble.
    Threshold,
    /// Compare the live design against published ensembles.
    Table,
    /// Run the bundled presets against their published values.
    Examples,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    MaxThreshold,
    MaxRate,
    MinCheckAverage,
    MinGap,
}

impl From<ModeArg> for DesignMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::MaxThreshold => DesignMode::MaxThreshold,
            ModeArg::MaxRate => DesignMode::MaxRateVariableSide,
            ModeArg::MinCheckAverage => DesignMode::MinCheckAverage,
            ModeArg::MinGap => DesignMode::MinGap,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    #[default]
    Sdp,
    GridLp,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Sdp => Method::Sdp,
            MethodArg::GridLp => Method::GridLp,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    #[default]
    Text,
    Csv,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ConventionArg {
    #[default]
    NodeDegree,
    PolyDegree,
}

impl From<ConventionArg> for DegreeConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::NodeDegree => DegreeConvention::NodeDegree,
            ConventionArg::PolyDegree => DegreeConvention::PolyDegree,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, Args)]
pub struct ProblemConfig {
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, value_enum, default_value = "sdp")]
    #[serde(default)]
    pub method: MethodArg,
    /// Check distribution, e.g. "x^5" or "0.5*x^5 + 0.5*x^6".
    #[arg(long)]
    pub rho: Option<String>,
    /// Variable distribution in the same syntax as --rho.
    #[arg(long)]
    pub lambda: Option<String>,
    /// Largest variable degree (read under --convention).
    #[arg(long)]
    pub dv_max: Option<usize>,
    /// Largest check degree (read under --convention).
    #[arg(long)]
    pub dc_max: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Grid intervals for the discretized LP.
    #[arg(long, default_value_t = bec_design::optimizer::DEFAULT_GRID)]
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Rescale distributions whose fractions do not sum to 1.
    #[arg(long)]
    #[serde(default)]
    pub renormalize: bool,
}

fn default_grid() -> usize {
    bec_design::optimizer::DEFAULT_GRID
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, Args)]
pub struct SolverOverrides {
    #[arg(long)]
    pub gap_tol: Option<f64>,
    #[arg(long)]
    pub feas_tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

impl SolverOverrides {
    pub fn settings(&self) -> SolverSettings {
        let d = SolverSettings::default();
        SolverSettings {
            gap_tol: self.gap_tol.unwrap_or(d.gap_tol),
            feas_tol: self.feas_tol.unwrap_or(d.feas_tol),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            ..d
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, Args)]
pub struct OutputConfig {
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    #[serde(default)]
    pub format: Format,
    /// Directory for constraint and density-evolution curves (CSV).
    #[arg(long)]
    pub emit_curves: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Parser)]
#[command(name = "bec-design", version, about = "LDPC degree distribution design for the binary erasure channel")]
pub struct RunConfig {
    #[arg(value_enum)]
    pub command: Command,
    #[command(flatten)]
    pub problem: ProblemConfig,
    #[command(flatten)]
    #[serde(default)]
    pub solver: SolverOverrides,
    #[command(flatten)]
    #[serde(default)]
    pub output: OutputConfig,
    #[arg(long, value_enum, default_value = "node-degree")]
    #[serde(default)]
    pub convention: ConventionArg,
    /// A saved optimize result to re-check (verify only).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Comma-separated table columns or preset names; all when absent.
    #[arg(long)]
    pub only: Option<String>,
}

impl RunConfig {
    /// Entries of `--only`, or `None` for "everything".
    pub fn selection(&self) -> Option<Vec<String>> {
        self.only.as_ref().map(|s| {
            s.split(',')
                .map(|t| t.trim().to_string())
                .filter(|t| !t.is_empty())
                .collect()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_optimize_flags() {
        let c = RunConfig::try_parse_from([
            "bec-design", "optimize", "--mode", "max-rate", "--rho", "x^4", "--dv-max", "5", "--epsilon", "0.44",
            "--gap-tol", "1e-9", "--format", "json", "--convention", "poly-degree",
        ])
        .unwrap();
        assert_eq!(c.command, Command::Optimize);
        assert_eq!(c.problem.mode, Some(ModeArg::MaxRate));
        assert_eq!(c.problem.dv_max, Some(5));
        assert_eq!(c.solver.settings().gap_tol, 1e-9);
        assert_eq!(c.solver.settings().max_iter, 200);
        assert_eq!(c.output.format, Format::Json);
        assert_eq!(c.convention, ConventionArg::PolyDegree);
    }

    #[test]
    fn round_trips_through_json() {
        let c = RunConfig::try_parse_from([
            "bec-design", "table", "--only", "live,type-a", "--out", "t.csv", "--format", "csv", "--renormalize",
        ])
        .unwrap();
        let s = serde_json::to_string(&c).unwrap();
        let back: RunConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.selection().unwrap(), vec!["live", "type-a"]);
    }

    #[test]
    fn unknown_mode_is_rejected() {
        assert!(RunConfig::try_parse_from(["bec-design", "optimize", "--mode", "fastest"]).is_err());
    }
}
