use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use igcp::compound::{compound_igcp_moments, compound_igcp_pmf, sample_compound_igcp_value};
use igcp::gcp::{gcp_moments, gcp_pmf_vector, sample_gcp_path, sample_gcp_value};
use igcp::igcp::{
    igcp_moments, igcp_pmf, nh_igcp_moments, nh_igcp_pmf, sample_igcp_path, sample_igcp_value, sample_nh_igcp_path,
    sample_nh_igcp_value,
};
use igcp::mc::{map_samples, try_map_samples, McConfig};
use igcp::multivariate::{mv_covariance_matrix, mv_pmf_lattice, sample_mv_value};
use igcp::qiter::{qiter_moments, qiter_pmf, sample_qiter_value};
use igcp::timechange::{lrd_exponent, sample_tc_igcp_value, srd_increment_diagnostic, tc_igcp_moments, tc_igcp_pmf};
use igcp::verify::{run_selected, run_suite, VerifyConfig};
use igcp::CountingPath;
use serde::Serialize;

use crate::config::{
    pick, resolve_process, FileConfig, Format, McArgs, OutputArgs, Process, ProcessArgs, ProcessKind, DEFAULT_SAMPLES,
    DEFAULT_SEED,
};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "igcp", version, about = "Iterated generalized counting processes")]
pub struct Cli {
    /// TOML run configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the state probabilities at time t.
    Pmf(PmfArgs),
    /// Draw samples or event paths.
    Simulate(SimulateArgs),
    /// Run a named cross-check suite and emit a JSON report.
    Verify(VerifyArgs),
    /// Mean and variance over a time grid.
    Moments(MomentsArgs),
    /// Correlation-decay exponent of the time-changed process.
    Lrd(LrdArgs),
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| format!("'{x}': {e}"))).collect()
}

#[derive(Debug, Args)]
pub struct PmfArgs {
    #[command(flatten)]
    pub process: ProcessArgs,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub process: ProcessArgs,
    /// Sampling time, or path horizon with --paths.
    #[arg(long)]
    pub t: Option<f64>,
    /// Emit event lists instead of values.
    #[arg(long)]
    pub paths: bool,
    #[command(flatten)]
    pub mc: McArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub suite: Option<String>,
    /// Run only these checks (repeatable).
    #[arg(long = "check")]
    pub checks: Vec<String>,
    #[command(flatten)]
    pub mc: McArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct MomentsArgs {
    #[command(flatten)]
    pub process: ProcessArgs,
    #[arg(long, value_parser = parse_list)]
    pub t_grid: Option<std::vec::Vec<f64>>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct LrdArgs {
    #[command(flatten)]
    pub process: ProcessArgs,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long, value_parser = parse_list)]
    pub t_grid: Option<std::vec::Vec<f64>>,
    /// Monte Carlo increment diagnostic instead of the analytic fit.
    #[arg(long)]
    pub srd: bool,
    #[arg(long)]
    pub h: Option<f64>,
    #[command(flatten)]
    pub mc: McArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Rendered output and whether the command's own checks passed.
pub struct Outcome {
    pub text: String,
    pub path: Option<String>,
    pub failure: Option<CliError>,
}

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn output_target(cli: &OutputArgs, file: &FileConfig) -> (Option<String>, Format) {
    (
        cli.output.clone().or_else(|| file.output.path.clone()),
        pick(&cli.format, &file.output.format, Format::Csv),
    )
}

fn mc_config(cli: &McArgs, file: &FileConfig, default_samples: u64) -> McConfig {
    McConfig::new(
        pick(&cli.samples, &file.mc.samples, default_samples),
        pick(&cli.seed, &file.mc.master_seed, DEFAULT_SEED),
        pick(&cli.workers, &file.mc.workers, 1),
    )
}

fn check_time(t: f64) -> Result<f64, CliError> {
    if t.is_finite() && t >= 0.0 {
        Ok(t)
    } else {
        Err(CliError::Input(format!("time must be finite and non-negative, got {t}")))
    }
}

pub fn run(cli: Cli) -> Result<Outcome, CliError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Pmf(a) => cmd_pmf(&a, &file),
        Command::Simulate(a) => cmd_simulate(&a, &file),
        Command::Verify(a) => cmd_verify(&a, &file),
        Command::Moments(a) => cmd_moments(&a, &file),
        Command::Lrd(a) => cmd_lrd(&a, &file),
    }
}

#[derive(Serialize)]
struct PmfRow {
    n: u64,
    probability: f64,
    tail_bound: f64,
}

#[derive(Serialize)]
struct PmfTable<'a> {
    process: &'a str,
    t: f64,
    rows: Vec<PmfRow>,
}

pub fn cmd_pmf(a: &PmfArgs, file: &FileConfig) -> Result<Outcome, CliError> {
    let t = check_time(pick(&a.t, &file.command.t, 1.0))?;
    let n_max = pick(&a.n_max, &file.command.n_max, 10);
    let process = resolve_process(&a.process, &file.process, t)?;
    let (path, format) = output_target(&a.output, file);
    if let Process::Multivariate(p) = &process {
        let dims = vec![n_max; p.q()];
        let lattice = mv_pmf_lattice(p, t, Some(&dims))?;
        let text = match format {
            Format::Csv => lattice.to_csv(),
            Format::Json => serde_json::to_string_pretty(&lattice).expect("lattice serializes") + "\n",
        };
        return Ok(Outcome { text, path, failure: None });
    }
    let mut rows = Vec::with_capacity(n_max + 1);
    if let Process::Gcp(p) = &process {
        let v = gcp_pmf_vector(p, t, n_max);
        for (n, &pr) in v.probs.iter().enumerate() {
            rows.push(PmfRow { n: n as u64, probability: pr, tail_bound: v.tail_bound });
        }
    } else {
        for n in 0..=n_max as u64 {
            let r = match &process {
                Process::Igcp(p) => igcp_pmf(p, n, t)?,
                Process::NhIgcp { outer, schedule } => nh_igcp_pmf(outer, schedule, n, t)?,
                Process::Compound { params, law } => compound_igcp_pmf(params, law, n, t, None)?,
                Process::QIter(p) => qiter_pmf(p, n, t, None)?,
                Process::TcIgcp(p) => tc_igcp_pmf(p, n, t, None)?,
                Process::Gcp(_) | Process::Multivariate(_) => unreachable!("handled above"),
            };
            rows.push(PmfRow { n, probability: r.value, tail_bound: r.tail_bound });
        }
    }
    let text = match format {
        Format::Csv => {
            let mut s = String::from("n,probability,tail_bound\n");
            for r in &rows {
                let _ = writeln!(s, "{},{},{}", r.n, real(r.probability), real(r.tail_bound));
            }
            s
        }
        Format::Json => {
            serde_json::to_string_pretty(&PmfTable { process: process.name(), t, rows }).expect("table serializes") + "\n"
        }
    };
    Ok(Outcome { text, path, failure: None })
}

#[derive(Serialize)]
struct SampleMeta<'a> {
    process: &'a str,
    t: f64,
    samples: u64,
    master_seed: u64,
    stream_id: u64,
    block_size: u64,
}

#[derive(Serialize)]
struct SampleFile<'a> {
    metadata: SampleMeta<'a>,
    values: Vec<String>,
}

#[derive(Serialize)]
struct PathFile<'a> {
    metadata: SampleMeta<'a>,
    paths: Vec<CountingPath>,
}

pub fn cmd_simulate(a: &SimulateArgs, file: &FileConfig) -> Result<Outcome, CliError> {
    let t = check_time(pick(&a.t, &file.command.t, 1.0))?;
    let process = resolve_process(&a.process, &file.process, t)?;
    let cfg = mc_config(&a.mc, file, 10);
    cfg.validate()?;
    let (path, format) = output_target(&a.output, file);
    let paths = a.paths || file.command.paths.unwrap_or(false);
    let meta = SampleMeta {
        process: process.name(),
        t,
        samples: cfg.samples,
        master_seed: cfg.master_seed,
        stream_id: cfg.stream_offset,
        block_size: cfg.block_size,
    };
    let header = format!(
        "# process={} t={} samples={} master_seed={} stream_id={} block_size={}\n",
        meta.process, meta.t, meta.samples, meta.master_seed, meta.stream_id, meta.block_size
    );
    if paths {
        let drawn: Vec<CountingPath> = match &process {
            Process::Gcp(p) => map_samples(|r| sample_gcp_path(p, t, r), &cfg)?,
            Process::Igcp(p) => map_samples(|r| sample_igcp_path(p, t, r), &cfg)?,
            Process::NhIgcp { outer, schedule } => try_map_samples(|r| sample_nh_igcp_path(outer, schedule, t, r), &cfg)?,
            other => {
                return Err(CliError::Input(format!("path output is not available for {}", other.name())));
            }
        };
        let text = match format {
            Format::Csv => {
                let mut s = header;
                s.push_str("path,time,jump\n");
                for (i, p) in drawn.iter().enumerate() {
                    for (&tm, &j) in p.event_times.iter().zip(&p.jump_sizes) {
                        let _ = writeln!(s, "{i},{},{j}", real(tm));
                    }
                }
                s
            }
            Format::Json => {
                serde_json::to_string_pretty(&PathFile { metadata: meta, paths: drawn }).expect("paths serialize") + "\n"
            }
        };
        return Ok(Outcome { text, path, failure: None });
    }
    let (columns, values): (String, Vec<String>) = match &process {
        Process::Gcp(p) => ("value".into(), map_samples(|r| sample_gcp_value(p, t, r).to_string(), &cfg)?),
        Process::Igcp(p) => ("value".into(), map_samples(|r| sample_igcp_value(p, t, r).to_string(), &cfg)?),
        Process::NhIgcp { outer, schedule } => (
            "value".into(),
            try_map_samples(|r| sample_nh_igcp_value(outer, schedule, t, r).map(|v| v.to_string()), &cfg)?,
        ),
        Process::Compound { params, law } => {
            ("value".into(), map_samples(|r| real(sample_compound_igcp_value(params, law, t, r)), &cfg)?)
        }
        Process::Multivariate(p) => {
            let cols = (1..=p.q()).map(|i| format!("value_{i}")).collect::<Vec<_>>().join(",");
            let vals = map_samples(
                |r| sample_mv_value(p, t, r).iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
                &cfg,
            )?;
            (cols, vals)
        }
        Process::QIter(p) => ("value".into(), map_samples(|r| sample_qiter_value(p, t, r).to_string(), &cfg)?),
        Process::TcIgcp(p) => ("value".into(), map_samples(|r| sample_tc_igcp_value(p, t, r).to_string(), &cfg)?),
    };
    let text = match format {
        Format::Csv => {
            let mut s = header;
            let _ = writeln!(s, "index,{columns}");
            for (i, v) in values.iter().enumerate() {
                let _ = writeln!(s, "{i},{v}");
            }
            s
        }
        Format::Json => serde_json::to_string_pretty(&SampleFile { metadata: meta, values }).expect("samples serialize") + "\n",
    };
    Ok(Outcome { text, path, failure: None })
}

pub fn cmd_verify(a: &VerifyArgs, file: &FileConfig) -> Result<Outcome, CliError> {
    let cfg = VerifyConfig {
        master_seed: pick(&a.mc.seed, &file.mc.master_seed, DEFAULT_SEED),
        samples: pick(&a.mc.samples, &file.mc.samples, DEFAULT_SAMPLES),
        workers: pick(&a.mc.workers, &file.mc.workers, 1),
    };
    let checks = if a.checks.is_empty() { file.command.checks.clone().unwrap_or_default() } else { a.checks.clone() };
    let report = if checks.is_empty() {
        let suite = a.suite.clone().or_else(|| file.command.suite.clone()).unwrap_or_else(|| "desk".into());
        run_suite(&suite, &cfg)?
    } else {
        run_selected(&checks, &cfg)?
    };
    let (path, _) = output_target(&a.output, file);
    let failure = if report.budget_exceeded() {
        Some(CliError::Library(igcp::Error::Budget { needed: 0, limit: 0 }))
    } else if !report.all_pass() {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.check.as_str()).collect();
        Some(CliError::Verification(failed.join(", ")))
    } else {
        None
    };
    Ok(Outcome { text: report.to_json(), path, failure })
}

pub fn cmd_moments(a: &MomentsArgs, file: &FileConfig) -> Result<Outcome, CliError> {
    let grid = pick(&a.t_grid, &file.command.t_grid, vec![1.0]);
    if grid.is_empty() {
        return Err(CliError::Input("time grid is empty".into()));
    }
    for &t in &grid {
        check_time(t)?;
    }
    let horizon = grid.iter().copied().fold(0.0, f64::max);
    let process = resolve_process(&a.process, &file.process, horizon)?;
    let (path, format) = output_target(&a.output, file);
    if let Process::Multivariate(p) = &process {
        let mut rows = Vec::new();
        for &t in &grid {
            let cov = mv_covariance_matrix(p, t);
            for (i, row) in cov.iter().enumerate() {
                for (l, &c) in row.iter().enumerate() {
                    rows.push((t, i + 1, l + 1, c));
                }
            }
        }
        let text = match format {
            Format::Csv => {
                let mut s = String::from("t,i,l,covariance\n");
                for (t, i, l, c) in &rows {
                    let _ = writeln!(s, "{},{i},{l},{}", real(*t), real(*c));
                }
                s
            }
            Format::Json => {
                let v: Vec<_> = rows
                    .iter()
                    .map(|(t, i, l, c)| serde_json::json!({"t": t, "i": i, "l": l, "covariance": c}))
                    .collect();
                serde_json::to_string_pretty(&v).expect("rows serialize") + "\n"
            }
        };
        return Ok(Outcome { text, path, failure: None });
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &t in &grid {
        let (m, v) = match &process {
            Process::Gcp(p) => gcp_moments(p, t),
            Process::Igcp(p) => {
                let m = igcp_moments(p, t, t)?;
                (m.mean, m.variance)
            }
            Process::NhIgcp { outer, schedule } => nh_igcp_moments(outer, schedule, t)?,
            Process::Compound { params, law } => compound_igcp_moments(params, law, t),
            Process::QIter(p) => qiter_moments(p, t),
            Process::TcIgcp(p) => tc_igcp_moments(p, t),
            Process::Multivariate(_) => unreachable!("handled above"),
        };
        rows.push((t, m, v));
    }
    let text = match format {
        Format::Csv => {
            let mut s = String::from("t,mean,variance\n");
            for (t, m, v) in &rows {
                let _ = writeln!(s, "{},{},{}", real(*t), real(*m), real(*v));
            }
            s
        }
        Format::Json => {
            let v: Vec<_> =
                rows.iter().map(|(t, m, v)| serde_json::json!({"t": t, "mean": m, "variance": v})).collect();
            serde_json::to_string_pretty(&v).expect("rows serialize") + "\n"
        }
    };
    Ok(Outcome { text, path, failure: None })
}

pub fn default_lrd_grid() -> Vec<f64> {
    (0..=30).map(|i| 10f64.powf(3.0 + 0.1 * i as f64)).collect()
}

pub fn cmd_lrd(a: &LrdArgs, file: &FileConfig) -> Result<Outcome, CliError> {
    let mut pargs = a.process.clone();
    if pargs.process.is_none() && file.process.kind.is_none() {
        pargs.process = Some(ProcessKind::TcIgcp);
    }
    let process = resolve_process(&pargs, &file.process, 1.0)?;
    let Process::TcIgcp(p) = process else {
        return Err(CliError::Input(format!("lrd needs a tc_igcp process, got {}", process.name())));
    };
    let s = pick(&a.s, &file.command.s, 1.0);
    let (path, format) = output_target(&a.output, file);
    let report = if a.srd {
        let grid = pick(&a.t_grid, &file.command.t_grid, vec![3.0, 6.0, 12.0, 24.0]);
        let h = pick(&a.h, &file.command.h, 1.0);
        let cfg = mc_config(&a.mc, file, DEFAULT_SAMPLES);
        srd_increment_diagnostic(&p, h, s, &grid, &cfg)?
    } else {
        let grid = pick(&a.t_grid, &file.command.t_grid, default_lrd_grid());
        lrd_exponent(&p, s, &grid)?
    };
    let text = match format {
        Format::Json => report.to_json() + "\n",
        Format::Csv => {
            let mut out = format!("# alpha={} fitted_exponent={}\nt,correlation\n", report.alpha, real(report.fitted_exponent));
            for (t, c) in report.grid.iter().zip(&report.correlations) {
                let _ = writeln!(out, "{},{}", real(*t), real(*c));
            }
            out
        }
    };
    Ok(Outcome { text, path, failure: None })
}
