//! Named cross-check suites with deterministic JSON reports.
//!
//! Each check compares two independent routes to the same quantity and
//! records the discrepancy (or a z-score / p-value for Monte Carlo
//! checks) against a threshold. All randomness comes from the configured
//! master seed, so a report is byte-identical across runs.

use serde::{Deserialize, Serialize};

use crate::compound::{compound_igcp_pgf, d_process_pgf, JumpLaw};
use crate::error::{Error, Result};
use crate::gcp::{gcp_pmf_vector, sample_gcp_value, GcpParams};
use crate::igcp::{
    exponential_martingale, igcp_levy_measure, igcp_ode_verify, igcp_pmf, igcp_pmf_series_oracle, martingale_residual,
    sample_igcp_path, sample_igcp_value, IgcpParams,
};
use crate::kernels::{bell_polynomials, chernoff_tail, mittag_leffler_3p, truncation_point};
use crate::mc::{chi_square_gof, map_samples, run_mc, run_mc_multi, tabulate, McConfig};
use crate::multivariate::{mv_pmf, mv_pmf_bell, MvIgcpParams};
use crate::qiter::{qiter_pgf, qiter_pmf, QIterParams};
use crate::scalar::{ln_factorial, Compensated};
use crate::timechange::{
    caputo_residual_order, lrd_exponent, tc_factorial_moment, tc_igcp_moments, tc_igcp_pmf,
    tc_igcp_pmf_conditioning_oracle, TcIgcpParams,
};

/// How a check's value is compared with its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Budget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
    pub comparison: Comparison,
    pub status: CheckStatus,
}

impl CheckResult {
    pub fn new(check: &str, value: f64, threshold: f64, comparison: Comparison) -> Self {
        let pass = match comparison {
            Comparison::AtMost => value <= threshold,
            Comparison::AtLeast => value >= threshold,
        };
        let status = if pass { CheckStatus::Pass } else { CheckStatus::Fail };
        Self { check: check.to_string(), value, threshold, pass, comparison, status }
    }

    fn budget(check: &str, threshold: f64, comparison: Comparison) -> Self {
        Self {
            check: check.to_string(),
            value: f64::NAN,
            threshold,
            pass: false,
            comparison,
            status: CheckStatus::Budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: String,
    pub master_seed: u64,
    pub samples: u64,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn budget_exceeded(&self) -> bool {
        self.checks.iter().any(|c| c.status == CheckStatus::Budget)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Inputs shared by all checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub master_seed: u64,
    pub samples: u64,
    pub workers: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { master_seed: 20240601, samples: 100_000, workers: 1 }
    }
}

impl VerifyConfig {
    fn mc(&self, stream_offset: u64) -> McConfig {
        McConfig::new(self.samples, self.master_seed, self.workers).with_stream_offset(stream_offset << 32)
    }
}

type CheckFn = fn(&VerifyConfig) -> Result<f64>;

struct Check {
    name: &'static str,
    suite: &'static str,
    threshold: f64,
    comparison: Comparison,
    run: CheckFn,
}

const MC_SE: f64 = 4.0;
const MC_P: f64 = 1e-3;

fn desk_igcp() -> IgcpParams<f64> {
    IgcpParams::from_rates(vec![1.0, 0.5], vec![0.7, 0.3]).expect("valid")
}

fn desk_tc() -> TcIgcpParams<f64> {
    TcIgcpParams::from_rates(vec![1.0], vec![1.0], 0.6).expect("valid")
}

const CHECKS: &[Check] = &[
    Check { name: "bell_recurrence_vs_series", suite: "kernels", threshold: 1e-12, comparison: Comparison::AtMost, run: bell_recurrence_vs_series },
    Check { name: "mittag_leffler_e", suite: "kernels", threshold: 1e-12, comparison: Comparison::AtMost, run: mittag_leffler_e },
    Check { name: "mittag_leffler_erfc", suite: "kernels", threshold: 1e-10, comparison: Comparison::AtMost, run: mittag_leffler_erfc },
    Check { name: "gcp_normalization_tail", suite: "gcp", threshold: 1e-9, comparison: Comparison::AtMost, run: gcp_normalization_tail },
    Check { name: "gcp_sampler_chi_square_p", suite: "gcp", threshold: MC_P, comparison: Comparison::AtLeast, run: gcp_sampler_chi_square },
    Check { name: "igcp_pmf_vs_oracle", suite: "igcp", threshold: 1e-8, comparison: Comparison::AtMost, run: igcp_pmf_vs_oracle },
    Check { name: "igcp_ode_residual", suite: "igcp", threshold: 1e-6, comparison: Comparison::AtMost, run: igcp_ode_residual },
    Check { name: "igcp_mean_mc_z", suite: "igcp", threshold: MC_SE, comparison: Comparison::AtMost, run: igcp_mean_mc },
    Check { name: "igcp_variance_mc_z", suite: "igcp", threshold: MC_SE, comparison: Comparison::AtMost, run: igcp_variance_mc },
    Check { name: "igcp_martingale_mc_z", suite: "igcp", threshold: MC_SE, comparison: Comparison::AtMost, run: igcp_martingale_mc },
    Check { name: "igcp_exponential_martingale_mc_z", suite: "igcp", threshold: MC_SE, comparison: Comparison::AtMost, run: igcp_exponential_martingale_mc },
    Check { name: "igcp_levy_mass", suite: "igcp", threshold: 1e-10, comparison: Comparison::AtMost, run: igcp_levy_mass },
    Check { name: "compound_d_process_vs_pgf", suite: "compound", threshold: 1e-10, comparison: Comparison::AtMost, run: compound_d_process_vs_pgf },
    Check { name: "mv_series_vs_bell", suite: "multivariate", threshold: 1e-8, comparison: Comparison::AtMost, run: mv_series_vs_bell },
    Check { name: "qiter_pmf_vs_pgf", suite: "qiter", threshold: 1e-8, comparison: Comparison::AtMost, run: qiter_pmf_vs_pgf },
    Check { name: "tc_pmf_vs_oracle", suite: "timechange", threshold: 1e-6, comparison: Comparison::AtMost, run: tc_pmf_vs_oracle },
    Check { name: "tc_factorial_moment_identity", suite: "timechange", threshold: 1e-6, comparison: Comparison::AtMost, run: tc_factorial_identity },
    Check { name: "tc_caputo_order_gap", suite: "timechange", threshold: 0.3, comparison: Comparison::AtMost, run: tc_caputo_order_gap },
    Check { name: "tc_lrd_exponent_gap", suite: "timechange", threshold: 0.03, comparison: Comparison::AtMost, run: tc_lrd_gap },
];

/// Suite names accepted by [`run_suite`]; "desk" runs every check.
pub fn suite_names() -> Vec<&'static str> {
    let mut v = vec!["desk"];
    for c in CHECKS {
        if !v.contains(&c.suite) {
            v.push(c.suite);
        }
    }
    v
}

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.name).collect()
}

fn run_checks<'a>(checks: impl Iterator<Item = &'a Check>, cfg: &VerifyConfig) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    for c in checks {
        match (c.run)(cfg) {
            Ok(v) => out.push(CheckResult::new(c.name, v, c.threshold, c.comparison)),
            Err(Error::Budget { .. }) => out.push(CheckResult::budget(c.name, c.threshold, c.comparison)),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Run a named suite.
pub fn run_suite(suite: &str, cfg: &VerifyConfig) -> Result<VerifyReport> {
    if !suite_names().contains(&suite) {
        return Err(Error::InvalidParams(format!("unknown suite '{suite}'; known: {}", suite_names().join(", "))));
    }
    let checks = run_checks(CHECKS.iter().filter(|c| suite == "desk" || c.suite == suite), cfg)?;
    Ok(VerifyReport { suite: suite.to_string(), master_seed: cfg.master_seed, samples: cfg.samples, checks })
}

/// Run selected checks by name.
pub fn run_selected(names: &[String], cfg: &VerifyConfig) -> Result<VerifyReport> {
    let mut picked = Vec::new();
    for n in names {
        match CHECKS.iter().find(|c| c.name == n) {
            Some(c) => picked.push(c),
            None => return Err(Error::InvalidParams(format!("unknown check '{n}'"))),
        }
    }
    let checks = run_checks(picked.into_iter(), cfg)?;
    Ok(VerifyReport { suite: "selection".into(), master_seed: cfg.master_seed, samples: cfg.samples, checks })
}

fn bell_recurrence_vs_series(_: &VerifyConfig) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &x in &[0.3, 1.0, 2.5] {
        let rec = bell_polynomials(15, x)?;
        for (n, &b) in rec.iter().enumerate() {
            let mut acc = Compensated::new();
            for r in 0..400u64 {
                let ln = n as f64 * (r as f64).ln() + r as f64 * f64::ln(x) - ln_factorial::<f64>(r);
                acc.add(if r == 0 && n > 0 { 0.0 } else if r == 0 { 1.0 } else { ln.exp() });
            }
            let series = (-x as f64).exp() * acc.value();
            worst = worst.max((b - series).abs() / b.abs().max(1.0));
        }
    }
    Ok(worst)
}

fn mittag_leffler_e(_: &VerifyConfig) -> Result<f64> {
    Ok((mittag_leffler_3p(1.0, 1.0, 1.0, 1.0f64)?.value - std::f64::consts::E).abs())
}

fn mittag_leffler_erfc(_: &VerifyConfig) -> Result<f64> {
    let v = mittag_leffler_3p(0.5, 1.0, 1.0, -1.0f64)?.value;
    Ok((v - libm::exp(1.0) * libm::erfc(1.0)).abs())
}

fn gcp_normalization_tail(_: &VerifyConfig) -> Result<f64> {
    let p = GcpParams::new(vec![1.0, 0.5])?;
    let n = p.truncation(1.0);
    let v = gcp_pmf_vector(&p, 1.0f64, n);
    Ok((1.0 - v.mass()).abs().max(v.tail_bound))
}

fn gcp_sampler_chi_square(cfg: &VerifyConfig) -> Result<f64> {
    let p = GcpParams::new(vec![1.0, 0.5])?;
    let xs = map_samples(|r| sample_gcp_value(&p, 1.0, r), &cfg.mc(1))?;
    let pmf = gcp_pmf_vector(&p, 1.0f64, p.truncation(1.0));
    Ok(chi_square_gof(&tabulate(&xs), &pmf, 5.0)?.p_value)
}

fn igcp_pmf_vs_oracle(_: &VerifyConfig) -> Result<f64> {
    let p = IgcpParams::<f64>::from_rates(vec![1.0, 0.5], vec![0.7, 0.3])?;
    let mut worst: f64 = 0.0;
    for &t in &[0.5, 1.0, 2.0] {
        let s_max = truncation_point(p.inner.first_moment() * t, p.inner.second_moment() * t) + 40;
        for n in 0..=12 {
            let a = igcp_pmf(&p, n, t)?.value;
            let b = igcp_pmf_series_oracle(&p, n, t, s_max).value;
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

fn igcp_ode_residual(_: &VerifyConfig) -> Result<f64> {
    igcp_ode_verify(&desk_igcp(), 15, 2.0)
}

fn igcp_mean_mc(cfg: &VerifyConfig) -> Result<f64> {
    let p = desk_igcp();
    let e = run_mc(|r| sample_igcp_value(&p, 1.0, r) as f64, &cfg.mc(2))?;
    Ok(e.z_score(p.s_const()).abs())
}

fn igcp_variance_mc(cfg: &VerifyConfig) -> Result<f64> {
    let p = desk_igcp();
    let m = p.s_const();
    let e = run_mc(|r| (sample_igcp_value(&p, 1.0, r) as f64 - m).powi(2), &cfg.mc(3))?;
    Ok(e.z_score(p.t_const()).abs())
}

fn igcp_martingale_mc(cfg: &VerifyConfig) -> Result<f64> {
    let p = desk_igcp();
    let times = [0.5, 1.0, 2.0];
    let est = run_mc_multi(
        |r| {
            let path = sample_igcp_path(&p, 2.0, r);
            times.iter().map(|&t| martingale_residual(path.value_at(t), &p, t)).collect()
        },
        times.len(),
        &cfg.mc(4).with_checkpoints(times.to_vec()),
    )?;
    Ok(est.iter().map(|e| e.z_score(0.0).abs()).fold(0.0, f64::max))
}

fn igcp_exponential_martingale_mc(cfg: &VerifyConfig) -> Result<f64> {
    let p = desk_igcp();
    let e = run_mc(|r| exponential_martingale(sample_igcp_value(&p, 1.0, r), &p, 0.2, 1.0), &cfg.mc(5))?;
    Ok(e.z_score(1.0).abs())
}

fn igcp_levy_mass(_: &VerifyConfig) -> Result<f64> {
    let p = desk_igcp();
    let lam = p.outer.total_rate();
    let closed: f64 = p.inner.rates.iter().enumerate().map(|(i, &m)| m * (1.0 - (-(i as f64 + 1.0) * lam).exp())).sum();
    let top = 80u64;
    let mut acc = Compensated::new();
    for n in 1..=top {
        acc.add(igcp_levy_measure(&p, n)?);
    }
    // Mass beyond `top`: Σ μ_{j₀} Pr{M(j₀) > top}.
    let tail: f64 = p
        .inner
        .rates
        .iter()
        .enumerate()
        .map(|(i, &m)| m * chernoff_tail(|th| p.outer.log_mgf(th, i as f64 + 1.0), top as f64 + 1.0, 10.0))
        .sum();
    Ok((acc.value() - closed).abs().max(tail))
}

fn compound_d_process_vs_pgf(_: &VerifyConfig) -> Result<f64> {
    let p = desk_igcp();
    let law = JumpLaw::Geometric { p: 0.4 };
    let mut worst: f64 = 0.0;
    for &u in &[0.0, 0.3, 0.7, 0.95] {
        let a = d_process_pgf(&p, &law, u, 1.0)?.value;
        let b = compound_igcp_pgf(&p, &law, u, 1.0)?;
        worst = worst.max((a - b).abs());
    }
    Ok(worst)
}

fn mv_series_vs_bell(_: &VerifyConfig) -> Result<f64> {
    let p = MvIgcpParams::<f64>::new(
        vec![GcpParams::new(vec![0.6, 0.3])?, GcpParams::new(vec![0.4])?],
        GcpParams::new(vec![0.8, 0.2])?,
    )?;
    let mut worst: f64 = 0.0;
    for n1 in 0..=6u64 {
        for n2 in 0..=6u64 {
            let a = mv_pmf(&p, &[n1, n2], 1.0, None)?.value;
            let b = mv_pmf_bell(&p, &[n1, n2], 1.0)?.value;
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

fn qiter_pmf_vs_pgf(_: &VerifyConfig) -> Result<f64> {
    let p = QIterParams::<f64>::new(GcpParams::new(vec![0.5, 0.25])?, vec![GcpParams::new(vec![0.6])?, GcpParams::new(vec![0.4, 0.2])?])?;
    let mut worst: f64 = 0.0;
    for &u in &[0.2, 0.5, 0.8] {
        let mut acc = Compensated::new();
        let mut un = 1.0;
        for n in 0..=40 {
            acc.add(un * qiter_pmf(&p, n, 1.0, None)?.value);
            un *= u;
        }
        worst = worst.max((acc.value() - qiter_pgf(&p, u, 1.0)?).abs());
    }
    Ok(worst)
}

fn tc_pmf_vs_oracle(_: &VerifyConfig) -> Result<f64> {
    let p = desk_tc();
    let mut worst: f64 = 0.0;
    for n in 0..=8 {
        let a = tc_igcp_pmf(&p, n, 1.0, None)?.value;
        let b = tc_igcp_pmf_conditioning_oracle(&p, n, 1.0, 80)?.value;
        worst = worst.max((a - b).abs());
    }
    Ok(worst)
}

fn tc_factorial_identity(_: &VerifyConfig) -> Result<f64> {
    let p = TcIgcpParams::<f64>::from_rates(vec![1.0, 0.5], vec![0.7, 0.3], 0.6)?;
    let mut worst: f64 = 0.0;
    for &t in &[0.5, 1.0, 2.0] {
        let (m, v) = tc_igcp_moments(&p, t);
        let f1 = tc_factorial_moment(&p, 1, t, None)?.value;
        let f2 = tc_factorial_moment(&p, 2, t, None)?.value;
        let target = v + m * m - m;
        worst = worst.max(((f1 - m) / m).abs()).max(((f2 - target) / target).abs());
    }
    Ok(worst)
}

fn tc_caputo_order_gap(_: &VerifyConfig) -> Result<f64> {
    let p = desk_tc();
    let o = caputo_residual_order(&p, 5, 2.0, 512)?;
    Ok((o.order - (2.0 - p.alpha())).abs())
}

fn tc_lrd_gap(_: &VerifyConfig) -> Result<f64> {
    let p = desk_tc();
    let grid: Vec<f64> = (0..=30).map(|i| 10f64.powf(3.0 + 0.1 * i as f64)).collect();
    Ok((lrd_exponent(&p, 1.0, &grid)?.fitted_exponent - p.alpha()).abs())
}
