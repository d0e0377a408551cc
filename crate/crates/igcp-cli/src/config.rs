//! Run configuration: TOML file, command-line overrides and defaults.
//!
//! Every field is optional at both layers. A value given on the command
//! line wins over the file, which wins over the built-in default.

use std::path::Path;

use clap::{Args, ValueEnum};
use igcp::compound::JumpLaw;
use igcp::{GcpParams, IgcpParams, MvIgcpParams, QIterParams, RateSchedule, StableParams, TcIgcpParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ProcessKind {
    Gcp,
    Igcp,
    NhIgcp,
    Compound,
    Multivariate,
    Qiter,
    TcIgcp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub grid: Vec<f64>,
    pub rates: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessSection {
    pub kind: Option<ProcessKind>,
    pub outer: Option<std::vec::Vec<f64>>,
    pub inner: Option<std::vec::Vec<f64>>,
    pub alpha: Option<f64>,
    pub layers: Option<std::vec::Vec<Vec<f64>>>,
    pub components: Option<std::vec::Vec<Vec<f64>>>,
    pub law: Option<JumpLaw<f64>>,
    pub schedule: Option<ScheduleSection>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandSection {
    pub t: Option<f64>,
    pub n_max: Option<usize>,
    pub t_grid: Option<Vec<f64>>,
    pub u_grid: Option<Vec<f64>>,
    pub s: Option<f64>,
    pub h: Option<f64>,
    pub suite: Option<String>,
    pub checks: Option<Vec<String>>,
    pub paths: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub samples: Option<u64>,
    pub master_seed: Option<u64>,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<String>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub process: ProcessSection,
    #[serde(default)]
    pub command: CommandSection,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("'{x}': {e}")))
        .collect()
}

fn parse_groups(s: &str) -> Result<Vec<Vec<f64>>, String> {
    s.split(';').map(parse_list).collect()
}

fn parse_law(s: &str) -> Result<JumpLaw<f64>, String> {
    serde_json::from_str(s).map_err(|e| e.to_string())
}

fn parse_schedule(s: &str) -> Result<ScheduleSection, String> {
    serde_json::from_str(s).map_err(|e| e.to_string())
}

/// Process flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct ProcessArgs {
    /// Process family.
    #[arg(long, value_enum)]
    pub process: Option<ProcessKind>,
    /// Outer rates λ₁,…,λ_k (comma separated).
    #[arg(long, value_parser = parse_list)]
    pub outer: Option<std::vec::Vec<f64>>,
    /// Inner rates μ₁,…,μ_{k₀}.
    #[arg(long, value_parser = parse_list)]
    pub inner: Option<std::vec::Vec<f64>>,
    /// Stable index for tc_igcp.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Inner layers of a q-iterated process, outermost first: "0.6;0.4,0.2".
    #[arg(long, value_parser = parse_groups)]
    pub layers: Option<std::vec::Vec<Vec<f64>>>,
    /// Component rate vectors of a multivariate process: "1,0.5;0.4".
    #[arg(long, value_parser = parse_groups)]
    pub components: Option<std::vec::Vec<Vec<f64>>>,
    /// Jump law as JSON, e.g. '{"kind":"geometric","p":0.4}'.
    #[arg(long, value_parser = parse_law)]
    pub law: Option<JumpLaw<f64>>,
    /// Inner rate schedule as JSON {"grid":[…],"rates":[[…]]}.
    #[arg(long, value_parser = parse_schedule)]
    pub schedule: Option<ScheduleSection>,
}

/// Output flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct OutputArgs {
    /// Output file; stdout when absent.
    #[arg(long, short)]
    pub output: Option<String>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

/// Monte Carlo flags.
#[derive(Debug, Clone, Default, Args)]
pub struct McArgs {
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
}

pub const DEFAULT_OUTER: [f64; 2] = [1.0, 0.5];
pub const DEFAULT_INNER: [f64; 2] = [0.7, 0.3];
pub const DEFAULT_ALPHA: f64 = 0.6;
pub const DEFAULT_SEED: u64 = 20240601;
pub const DEFAULT_SAMPLES: u64 = 100_000;

/// A validated process ready for the library.
#[derive(Debug, Clone)]
pub enum Process {
    Gcp(GcpParams<f64>),
    Igcp(IgcpParams<f64>),
    NhIgcp { outer: GcpParams<f64>, schedule: RateSchedule<f64> },
    Compound { params: IgcpParams<f64>, law: JumpLaw<f64> },
    Multivariate(MvIgcpParams<f64>),
    QIter(QIterParams<f64>),
    TcIgcp(TcIgcpParams<f64>),
}

impl Process {
    pub fn name(&self) -> &'static str {
        match self {
            Process::Gcp(_) => "gcp",
            Process::Igcp(_) => "igcp",
            Process::NhIgcp { .. } => "nh_igcp",
            Process::Compound { .. } => "compound",
            Process::Multivariate(_) => "multivariate",
            Process::QIter(_) => "qiter",
            Process::TcIgcp(_) => "tc_igcp",
        }
    }
}

/// Merge CLI over file over defaults and validate the parameters.
pub fn resolve_process(cli: &ProcessArgs, file: &ProcessSection, horizon: f64) -> Result<Process, CliError> {
    let kind = cli.process.or(file.kind).unwrap_or(ProcessKind::Igcp);
    let outer = cli.outer.clone().or_else(|| file.outer.clone()).unwrap_or_else(|| DEFAULT_OUTER.to_vec());
    let inner = cli.inner.clone().or_else(|| file.inner.clone()).unwrap_or_else(|| DEFAULT_INNER.to_vec());
    let alpha = cli.alpha.or(file.alpha).unwrap_or(DEFAULT_ALPHA);
    let gcp = |r: Vec<f64>| GcpParams::new(r).map_err(CliError::from);
    Ok(match kind {
        ProcessKind::Gcp => Process::Gcp(gcp(outer)?),
        ProcessKind::Igcp => Process::Igcp(IgcpParams::new(gcp(outer)?, gcp(inner)?)?),
        ProcessKind::NhIgcp => {
            let schedule = match cli.schedule.clone().or_else(|| file.schedule.clone()) {
                Some(s) => RateSchedule::new(s.grid, s.rates)?,
                None => RateSchedule::constant(&inner, horizon.max(1.0))?,
            };
            Process::NhIgcp { outer: gcp(outer)?, schedule }
        }
        ProcessKind::Compound => {
            let law = cli.law.clone().or_else(|| file.law.clone()).unwrap_or(JumpLaw::Geometric { p: 0.5 });
            law.validate()?;
            Process::Compound { params: IgcpParams::new(gcp(outer)?, gcp(inner)?)?, law }
        }
        ProcessKind::Multivariate => {
            let comps = cli
                .components
                .clone()
                .or_else(|| file.components.clone())
                .unwrap_or_else(|| vec![DEFAULT_OUTER.to_vec(), vec![0.4]]);
            let comps = comps.into_iter().map(gcp).collect::<Result<Vec<_>, _>>()?;
            Process::Multivariate(MvIgcpParams::new(comps, gcp(inner)?)?)
        }
        ProcessKind::Qiter => {
            let layers = cli.layers.clone().or_else(|| file.layers.clone()).unwrap_or_else(|| vec![inner.clone()]);
            let layers = layers.into_iter().map(gcp).collect::<Result<Vec<_>, _>>()?;
            Process::QIter(QIterParams::new(gcp(outer)?, layers)?)
        }
        ProcessKind::TcIgcp => {
            Process::TcIgcp(TcIgcpParams::new(IgcpParams::new(gcp(outer)?, gcp(inner)?)?, StableParams::new(alpha)?)?)
        }
    })
}

/// CLI value, else file value, else default.
pub fn pick<T: Clone>(cli: &Option<T>, file: &Option<T>, default: T) -> T {
    cli.clone().or_else(|| file.clone()).unwrap_or(default)
}
