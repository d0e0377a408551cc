//! Deterministic parallel Monte Carlo and goodness-of-fit comparators.
//!
//! Samples are drawn in fixed-size blocks. Block b always uses the ChaCha8
//! stream `(master_seed, stream_offset + b)`, so the set of draws depends
//! only on the seed and the sample count. Block summaries are merged by a
//! fixed pairwise tree, which makes aggregates bit-identical for any
//! number of workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels::{regularized_gamma_q, PmfVector};

pub type McRng = ChaCha8Rng;

pub const DEFAULT_BLOCK: u64 = 4096;

fn default_block() -> u64 {
    DEFAULT_BLOCK
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: u64,
    pub master_seed: u64,
    pub workers: usize,
    #[serde(default)]
    pub checkpoints: Vec<f64>,
    #[serde(default = "default_block")]
    pub block_size: u64,
    #[serde(default)]
    pub stream_offset: u64,
}

impl McConfig {
    pub fn new(samples: u64, master_seed: u64, workers: usize) -> Self {
        Self { samples, master_seed, workers, checkpoints: Vec::new(), block_size: DEFAULT_BLOCK, stream_offset: 0 }
    }

    pub fn with_checkpoints(mut self, checkpoints: Vec<f64>) -> Self {
        self.checkpoints = checkpoints;
        self
    }

    /// Same seed, disjoint streams starting at `offset`.
    pub fn with_stream_offset(mut self, offset: u64) -> Self {
        self.stream_offset = offset;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            return Err(invalid(format!("need at least 2 samples, got {}", self.samples)));
        }
        if self.workers == 0 {
            return Err(invalid("workers must be positive"));
        }
        if self.block_size == 0 {
            return Err(invalid("block_size must be positive"));
        }
        if self.checkpoints.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(invalid("checkpoints must be finite and non-negative"));
        }
        Ok(())
    }

    fn blocks(&self) -> u64 {
        self.samples.div_ceil(self.block_size)
    }

    fn block_len(&self, b: u64) -> u64 {
        self.block_size.min(self.samples - b * self.block_size)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedProvenance {
    pub master_seed: u64,
    /// First stream id; block b used stream_id + b.
    pub stream_id: u64,
    pub streams: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub variance: f64,
    pub n: u64,
    pub seed_provenance: SeedProvenance,
}

impl McEstimate {
    /// (mean − target) / std_error, 0 when both vanish.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = self.mean - target;
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }

    pub fn within(&self, target: f64, n_se: f64) -> bool {
        (self.mean - target).abs() <= n_se * self.std_error
    }
}

/// Independent stream `stream_id` derived from `master_seed`.
pub fn stream_rng(master_seed: u64, stream_id: u64) -> McRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id);
    rng
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(a: Moments, b: Moments) -> Moments {
        if a.n == 0 {
            return b;
        }
        if b.n == 0 {
            return a;
        }
        let n = a.n + b.n;
        let d = b.mean - a.mean;
        let mean = a.mean + d * (b.n as f64 / n as f64);
        let m2 = a.m2 + b.m2 + d * d * (a.n as f64 * b.n as f64 / n as f64);
        Moments { n, mean, m2 }
    }
}

fn tree_reduce(mut parts: Vec<Moments>) -> Moments {
    if parts.is_empty() {
        return Moments::default();
    }
    while parts.len() > 1 {
        parts = parts.chunks(2).map(|c| if c.len() == 2 { Moments::merge(c[0], c[1]) } else { c[0] }).collect();
    }
    parts[0]
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Worker { stream: 0, message: e.to_string() })
}

fn estimate(m: Moments, cfg: &McConfig) -> McEstimate {
    let variance = if m.n > 1 { m.m2 / (m.n - 1) as f64 } else { 0.0 };
    McEstimate {
        mean: m.mean,
        std_error: (variance / m.n as f64).sqrt(),
        variance,
        n: m.n,
        seed_provenance: SeedProvenance {
            master_seed: cfg.master_seed,
            stream_id: cfg.stream_offset,
            streams: cfg.blocks(),
        },
    }
}

/// Mean and standard error of `sampler` over `config.samples` draws.
pub fn run_mc<F>(sampler: F, config: &McConfig) -> Result<McEstimate>
where
    F: Fn(&mut McRng) -> f64 + Sync,
{
    try_run_mc(|rng| Ok(sampler(rng)), config)
}

/// As [`run_mc`] for a fallible sampler; the first failing stream (lowest id)
/// is reported.
pub fn try_run_mc<F>(sampler: F, config: &McConfig) -> Result<McEstimate>
where
    F: Fn(&mut McRng) -> Result<f64> + Sync,
{
    let mut v = try_run_mc_multi(|rng| sampler(rng).map(|x| vec![x]), 1, config)?;
    Ok(v.remove(0))
}

/// Vector-valued sampler of fixed dimension `dim`; one estimate per
/// coordinate, all coordinates drawn from the same stream.
pub fn run_mc_multi<F>(sampler: F, dim: usize, config: &McConfig) -> Result<Vec<McEstimate>>
where
    F: Fn(&mut McRng) -> Vec<f64> + Sync,
{
    try_run_mc_multi(|rng| Ok(sampler(rng)), dim, config)
}

pub fn try_run_mc_multi<F>(sampler: F, dim: usize, config: &McConfig) -> Result<Vec<McEstimate>>
where
    F: Fn(&mut McRng) -> Result<Vec<f64>> + Sync,
{
    config.validate()?;
    let blocks: Vec<u64> = (0..config.blocks()).collect();
    let run_block = |b: u64| -> Result<Vec<Moments>> {
        let stream = config.stream_offset + b;
        let mut rng = stream_rng(config.master_seed, stream);
        let mut acc = vec![Moments::default(); dim];
        for _ in 0..config.block_len(b) {
            let x = sampler(&mut rng).map_err(|e| Error::Worker { stream, message: e.to_string() })?;
            if x.len() != dim {
                return Err(Error::Worker { stream, message: format!("expected {dim} values, got {}", x.len()) });
            }
            for (a, v) in acc.iter_mut().zip(x) {
                a.push(v);
            }
        }
        Ok(acc)
    };
    let parts: Vec<Result<Vec<Moments>>> = pool(config.workers)?.install(|| blocks.par_iter().map(|&b| run_block(b)).collect());
    let mut per_dim: Vec<Vec<Moments>> = vec![Vec::with_capacity(parts.len()); dim];
    for p in parts {
        for (d, m) in p?.into_iter().enumerate() {
            per_dim[d].push(m);
        }
    }
    Ok(per_dim.into_iter().map(|v| estimate(tree_reduce(v), config)).collect())
}

/// All draws of `sampler`, in block order.
pub fn map_samples<S, F>(sampler: F, config: &McConfig) -> Result<Vec<S>>
where
    S: Send,
    F: Fn(&mut McRng) -> S + Sync,
{
    try_map_samples(|rng| Ok(sampler(rng)), config)
}

pub fn try_map_samples<S, F>(sampler: F, config: &McConfig) -> Result<Vec<S>>
where
    S: Send,
    F: Fn(&mut McRng) -> Result<S> + Sync,
{
    config.validate()?;
    let blocks: Vec<u64> = (0..config.blocks()).collect();
    let parts: Vec<Result<Vec<S>>> = pool(config.workers)?.install(|| {
        blocks
            .par_iter()
            .map(|&b| {
                let stream = config.stream_offset + b;
                let mut rng = stream_rng(config.master_seed, stream);
                (0..config.block_len(b))
                    .map(|_| sampler(&mut rng).map_err(|e| Error::Worker { stream, message: e.to_string() }))
                    .collect()
            })
            .collect()
    });
    let mut out = Vec::with_capacity(config.samples as usize);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Mean and standard error of a finished sample.
pub fn summarize(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::Empty);
    }
    let mut m = Moments::default();
    values.iter().for_each(|&x| m.push(x));
    let var = m.m2 / (m.n - 1) as f64;
    Ok((m.mean, (var / m.n as f64).sqrt()))
}

/// Sample covariance and the standard error of the mean of the centred
/// products.
pub fn covariance(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(invalid("covariance inputs differ in length"));
    }
    let (mx, _) = summarize(x)?;
    let (my, _) = summarize(y)?;
    let prod: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect();
    let (m, se) = summarize(&prod)?;
    let n = x.len() as f64;
    Ok((m * n / (n - 1.0), se))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub statistic: f64,
    pub p_value: f64,
    pub dof: usize,
}

/// Counts of each value 0..=max in `samples`.
pub fn tabulate(samples: &[u64]) -> Vec<u64> {
    let top = samples.iter().copied().max().unwrap_or(0) as usize;
    let mut counts = vec![0u64; top + 1];
    for &s in samples {
        counts[s as usize] += 1;
    }
    counts
}

/// Pearson chi-square of `observed[n]` against `expected.probs[n]`.
///
/// States are pooled left to right until each bin expects at least
/// `min_bin` counts; observations beyond the vector and the missing mass
/// form a final tail bin, merged into its neighbour when too small.
pub fn chi_square_gof(observed: &[u64], expected: &PmfVector<f64>, min_bin: f64) -> Result<GofResult> {
    let total: u64 = observed.iter().sum();
    if total == 0 || expected.is_empty() {
        return Err(Error::Empty);
    }
    let n = total as f64;
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut e_acc, mut o_acc) = (0.0, 0.0);
    for (i, &p) in expected.probs.iter().enumerate() {
        e_acc += p * n;
        o_acc += observed.get(i).copied().unwrap_or(0) as f64;
        if e_acc >= min_bin {
            bins.push((o_acc, e_acc));
            e_acc = 0.0;
            o_acc = 0.0;
        }
    }
    let tail_o: u64 = observed.iter().skip(expected.len()).sum();
    e_acc += (1.0 - expected.mass()).max(0.0) * n;
    o_acc += tail_o as f64;
    if e_acc >= min_bin || bins.is_empty() {
        bins.push((o_acc, e_acc));
    } else if let Some(last) = bins.last_mut() {
        last.0 += o_acc;
        last.1 += e_acc;
    }
    if bins.len() < 2 {
        return Err(Error::Degenerate("all expected mass falls in one bin".into()));
    }
    let mut stat = 0.0;
    for &(o, e) in &bins {
        if e > 0.0 {
            stat += (o - e) * (o - e) / e;
        } else if o > 0.0 {
            stat = f64::INFINITY;
        }
    }
    let dof = bins.len() - 1;
    let p_value = if stat.is_finite() { regularized_gamma_q(dof as f64 / 2.0, stat / 2.0)? } else { 0.0 };
    Ok(GofResult { statistic: stat, p_value, dof })
}

/// Pr{K > λ} for the Kolmogorov distribution.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

fn ks_lambda(d: f64, n_eff: f64) -> f64 {
    let r = n_eff.sqrt();
    (r + 0.12 + 0.11 / r) * d
}

/// One-sample Kolmogorov-Smirnov test against `cdf`.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<GofResult> {
    if samples.is_empty() {
        return Err(Error::Empty);
    }
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let mut j = i;
        while j + 1 < xs.len() && xs[j + 1] == xs[i] {
            j += 1;
        }
        let f = cdf(xs[i]);
        let f_left = cdf_left(&cdf, xs[i]);
        d = d.max((f - (j + 1) as f64 / n).abs()).max((i as f64 / n - f_left).abs());
        i = j + 1;
    }
    Ok(GofResult { statistic: d, p_value: kolmogorov_q(ks_lambda(d, n)), dof: xs.len() })
}

fn cdf_left(cdf: &impl Fn(f64) -> f64, x: f64) -> f64 {
    let below = if x == 0.0 { -f64::MIN_POSITIVE } else { x - x.abs() * 1e-12 };
    cdf(below)
}

/// Two-sample Kolmogorov-Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<GofResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty);
    }
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(|p, q| p.total_cmp(q));
    xb.sort_by(|p, q| p.total_cmp(q));
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let n_eff = na * nb / (na + nb);
    Ok(GofResult { statistic: d, p_value: kolmogorov_q(ks_lambda(d, n_eff)), dof: xa.len() + xb.len() })
}
