//! The generalized counting process M(t) = Σ_j j·N_j(t), where N_j are
//! independent Poisson processes with rates λ_j, j = 1..k.
//!
//! Analytic quantities are generic over [`Real`]; samplers run in `f64`.

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Result};
use crate::kernels::{chernoff_tail, for_each_weighted_partition, truncation_point, PmfVector};
use crate::scalar::{ln_factorial, log_sum_exp, Compensated, Real};

/// Rates λ₁..λ_k of one GCP layer; λ_j drives jumps of amplitude j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct GcpParams<T = f64> {
    pub rates: Vec<T>,
}

impl<T: Real> GcpParams<T> {
    pub fn new(rates: Vec<T>) -> Result<Self> {
        let p = Self { rates };
        p.validate()?;
        Ok(p)
    }

    /// Single-amplitude layer, i.e. a Poisson process.
    pub fn poisson(rate: T) -> Result<Self> {
        Self::new(vec![rate])
    }

    pub fn validate(&self) -> Result<()> {
        if self.rates.is_empty() {
            return Err(invalid("a GCP layer needs at least one rate"));
        }
        if let Some(bad) = self.rates.iter().find(|r| !(**r > T::zero()) || !r.is_finite()) {
            return Err(invalid(format!("GCP rates must be positive and finite, got {bad}")));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.rates.len()
    }

    /// λ = Σ λ_j.
    pub fn total_rate(&self) -> T {
        self.rates.iter().fold(T::zero(), |a, &b| a + b)
    }

    /// Σ j λ_j, the mean per unit time.
    pub fn first_moment(&self) -> T {
        self.weighted(1)
    }

    /// Σ j² λ_j, the variance per unit time.
    pub fn second_moment(&self) -> T {
        self.weighted(2)
    }

    fn weighted(&self, power: i32) -> T {
        self.rates
            .iter()
            .enumerate()
            .fold(T::zero(), |a, (i, &l)| a + T::from_count(i as u64 + 1).powi(power) * l)
    }

    /// Σ λ_j (1 − u^j).
    pub fn exponent(&self, u: T) -> T {
        self.rates.iter().enumerate().fold(T::zero(), |a, (i, &l)| a + l * (T::one() - u.powi(i as i32 + 1)))
    }

    /// log E e^{θ M(t)} = t Σ λ_j (e^{θ j} − 1).
    pub fn log_mgf(&self, theta: T, t: T) -> T {
        t * self.rates.iter().enumerate().fold(T::zero(), |a, (i, &l)| {
            a + l * ((theta * T::from_count(i as u64 + 1)).exp() - T::one())
        })
    }

    /// Bound on Pr{M(t) > n}.
    pub fn tail_bound(&self, n: usize, t: T) -> T {
        if t == T::zero() {
            return T::zero();
        }
        chernoff_tail(|th| self.log_mgf(th, t), T::from_count(n as u64 + 1), T::lit(30.0) / T::from_count(self.k() as u64))
    }

    /// Default truncation state for M(t).
    pub fn truncation(&self, t: T) -> usize {
        truncation_point(self.first_moment() * t, self.second_moment() * t)
    }

    pub fn to_f64(&self) -> GcpParams<f64> {
        GcpParams { rates: self.rates.iter().map(|r| r.as_f64()).collect() }
    }
}

/// Pr{M(t) = n} = Σ_{Ω(k,n)} Π_j (λ_j t)^{x_j} e^{−λ_j t}/x_j!.
pub fn gcp_pmf<T: Real>(params: &GcpParams<T>, n: u64, t: T) -> T {
    if t == T::zero() {
        return if n == 0 { T::one() } else { T::zero() };
    }
    let lam_t = params.total_rate() * t;
    let ln_rates: Vec<T> = params.rates.iter().map(|&l| (l * t).ln()).collect();
    let mut logs = Vec::new();
    for_each_weighted_partition(params.k(), n as u32, |x| {
        let mut s = -lam_t;
        for (j, &xj) in x.iter().enumerate() {
            if xj > 0 {
                s += T::from_count(xj as u64) * ln_rates[j] - ln_factorial::<T>(xj as u64);
            }
        }
        logs.push(s);
    });
    log_sum_exp(&logs).exp()
}

/// Pr{M(t) = n} for n = 0..=n_max by the recursion
/// n·p(n) = t Σ_j j λ_j p(n − j), with a Chernoff bound on the missing tail.
pub fn gcp_pmf_vector<T: Real>(params: &GcpParams<T>, t: T, n_max: usize) -> PmfVector<T> {
    if t == T::zero() {
        let mut v = PmfVector::delta(0);
        v.probs.resize(n_max + 1, T::zero());
        return v;
    }
    let lam_t = params.total_rate() * t;
    let mut probs = Vec::with_capacity(n_max + 1);
    if lam_t > T::lit(600.0) {
        for n in 0..=n_max {
            probs.push(gcp_pmf(params, n as u64, t));
        }
    } else {
        probs.push((-lam_t).exp());
        let k = params.k();
        for n in 1..=n_max {
            let mut acc = Compensated::new();
            for j in 1..=k.min(n) {
                acc.add(T::from_count(j as u64) * params.rates[j - 1] * probs[n - j]);
            }
            probs.push(acc.value() * t / T::from_count(n as u64));
        }
    }
    PmfVector::new(probs, params.tail_bound(n_max, t))
}

/// exp(−t Σ λ_j (1 − u^j)).
pub fn gcp_pgf<T: Real>(params: &GcpParams<T>, u: T, t: T) -> Result<T> {
    if u.abs() > T::one() {
        return Err(domain(format!("pgf argument must satisfy |u| <= 1, got {u}")));
    }
    Ok((-t * params.exponent(u)).exp())
}

/// (mean, variance) = (Σ j λ_j t, Σ j² λ_j t).
pub fn gcp_moments<T: Real>(params: &GcpParams<T>, t: T) -> (T, T) {
    (params.first_moment() * t, params.second_moment() * t)
}

/// Non-decreasing pure-jump path on [0, horizon].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingPath {
    pub event_times: Vec<f64>,
    pub jump_sizes: Vec<u64>,
    pub horizon: f64,
}

/// Paths of the base process carry amplitudes in 1..k.
pub type GcpPath = CountingPath;

impl CountingPath {
    pub fn value_at(&self, t: f64) -> u64 {
        let idx = self.event_times.partition_point(|&s| s <= t);
        self.jump_sizes[..idx].iter().sum()
    }

    pub fn final_value(&self) -> u64 {
        self.jump_sizes.iter().sum()
    }

    /// ∫₀ᵗ value(s) ds.
    pub fn integral(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for (&s, &j) in self.event_times.iter().zip(&self.jump_sizes) {
            if s >= t {
                break;
            }
            acc += j as f64 * (t - s);
        }
        acc
    }

    /// First time the path equals `n` exactly.
    pub fn first_hit(&self, n: u64) -> Option<f64> {
        if n == 0 {
            return Some(0.0);
        }
        let mut level = 0u64;
        for (&s, &j) in self.event_times.iter().zip(&self.jump_sizes) {
            level += j;
            if level == n {
                return Some(s);
            }
            if level > n {
                return None;
            }
        }
        None
    }

    /// First time the path is at least `n`.
    pub fn first_passage(&self, n: u64) -> Option<f64> {
        if n == 0 {
            return Some(0.0);
        }
        let mut level = 0u64;
        for (&s, &j) in self.event_times.iter().zip(&self.jump_sizes) {
            level += j;
            if level >= n {
                return Some(s);
            }
        }
        None
    }
}

pub(crate) fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive finite Poisson mean").sample(rng) as u64
}

/// Exact path: k independent Poisson streams with amplitudes 1..k merged in time.
pub fn sample_gcp_path<T: Real, R: Rng + ?Sized>(params: &GcpParams<T>, horizon: f64, rng: &mut R) -> GcpPath {
    let mut events: Vec<(f64, u64)> = Vec::new();
    for (i, rate) in params.rates.iter().enumerate() {
        let exp = Exp::new(rate.as_f64()).expect("positive rate");
        let mut s = exp.sample(rng);
        while s <= horizon {
            events.push((s, i as u64 + 1));
            s += exp.sample(rng);
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    CountingPath {
        event_times: events.iter().map(|e| e.0).collect(),
        jump_sizes: events.iter().map(|e| e.1).collect(),
        horizon,
    }
}

/// M(t) drawn as Σ_j j·Poisson(λ_j t).
pub fn sample_gcp_value<T: Real, R: Rng + ?Sized>(params: &GcpParams<T>, t: f64, rng: &mut R) -> u64 {
    params
        .rates
        .iter()
        .enumerate()
        .map(|(i, r)| (i as u64 + 1) * poisson_count(r.as_f64() * t, rng))
        .sum()
}

/// Piecewise-constant rates μ_{j₀}(t) on a finite grid 0 = g₀ < g₁ < … < g_P.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct RateSchedule<T = f64> {
    pub grid: Vec<T>,
    /// `rates[j0 - 1][p]` is μ_{j₀} on [g_p, g_{p+1}).
    pub rates: Vec<Vec<T>>,
}

impl<T: Real> RateSchedule<T> {
    pub fn new(grid: Vec<T>, rates: Vec<Vec<T>>) -> Result<Self> {
        if grid.len() < 2 || grid[0] != T::zero() {
            return Err(invalid("schedule grid must start at 0 and contain at least one piece"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("schedule grid must be strictly increasing"));
        }
        if rates.is_empty() {
            return Err(invalid("schedule needs at least one amplitude"));
        }
        for r in &rates {
            if r.len() != grid.len() - 1 {
                return Err(invalid("each rate row needs one value per grid piece"));
            }
            if r.iter().any(|v| !(*v >= T::zero()) || !v.is_finite()) {
                return Err(invalid("schedule rates must be finite and non-negative"));
            }
        }
        Ok(Self { grid, rates })
    }

    /// Constant rates μ_{j₀} on [0, horizon].
    pub fn constant(rates: &[T], horizon: T) -> Result<Self> {
        Self::new(vec![T::zero(), horizon], rates.iter().map(|&r| vec![r]).collect())
    }

    pub fn k0(&self) -> usize {
        self.rates.len()
    }

    pub fn horizon(&self) -> T {
        *self.grid.last().expect("non-empty grid")
    }

    fn check(&self, t: T) -> Result<()> {
        if !(t >= T::zero()) || t > self.horizon() {
            return Err(domain(format!("time {t} outside schedule support [0, {}]", self.horizon())));
        }
        Ok(())
    }

    /// μ_{j₀}(t), right-continuous.
    pub fn rate(&self, j0: usize, t: T) -> Result<T> {
        self.check(t)?;
        let p = self.piece(t);
        Ok(self.rates[j0 - 1][p])
    }

    fn piece(&self, t: T) -> usize {
        let idx = self.grid.partition_point(|&g| g <= t);
        idx.saturating_sub(1).min(self.grid.len() - 2)
    }

    /// ρ_{j₀}(t) = ∫₀ᵗ μ_{j₀}(s) ds.
    pub fn rho(&self, j0: usize, t: T) -> Result<T> {
        self.check(t)?;
        let row = &self.rates[j0 - 1];
        let mut acc = T::zero();
        for p in 0..row.len() {
            let (a, b) = (self.grid[p], self.grid[p + 1]);
            if t <= a {
                break;
            }
            acc += row[p] * (b.min(t) - a);
        }
        Ok(acc)
    }

    /// (ρ₁(t), …, ρ_{k₀}(t)).
    pub fn rhos(&self, t: T) -> Result<Vec<T>> {
        (1..=self.k0()).map(|j0| self.rho(j0, t)).collect()
    }

    /// ρ_{j₀}(v, v + t) = ρ_{j₀}(v + t) − ρ_{j₀}(v) for every j₀.
    pub fn increment_rhos(&self, v: T, t: T) -> Result<Vec<T>> {
        (1..=self.k0()).map(|j0| Ok(self.rho(j0, v + t)? - self.rho(j0, v)?)).collect()
    }
}

/// Σ_{j₀} j₀·Poisson(ρ_{j₀}(t)), with one Poisson count per grid piece.
pub fn sample_nh_gcp_value<T: Real, R: Rng + ?Sized>(schedule: &RateSchedule<T>, t: f64, rng: &mut R) -> Result<u64> {
    let tt = T::lit(t);
    schedule.check(tt)?;
    let mut total = 0u64;
    for (i, row) in schedule.rates.iter().enumerate() {
        for (p, mu) in row.iter().enumerate() {
            let (a, b) = (schedule.grid[p].as_f64(), schedule.grid[p + 1].as_f64());
            if t <= a {
                break;
            }
            total += (i as u64 + 1) * poisson_count(mu.as_f64() * (b.min(t) - a), rng);
        }
    }
    Ok(total)
}

/// Exact path of the non-homogeneous layer: per piece a Poisson count with
/// uniformly placed event times.
pub fn sample_nh_gcp_path<T: Real, R: Rng + ?Sized>(
    schedule: &RateSchedule<T>,
    horizon: f64,
    rng: &mut R,
) -> Result<CountingPath> {
    schedule.check(T::lit(horizon))?;
    let mut events: Vec<(f64, u64)> = Vec::new();
    for (i, row) in schedule.rates.iter().enumerate() {
        for (p, mu) in row.iter().enumerate() {
            let a = schedule.grid[p].as_f64();
            if horizon <= a {
                break;
            }
            let b = schedule.grid[p + 1].as_f64().min(horizon);
            let count = poisson_count(mu.as_f64() * (b - a), rng);
            for _ in 0..count {
                events.push((a + (b - a) * rng.random::<f64>(), i as u64 + 1));
            }
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(CountingPath {
        event_times: events.iter().map(|e| e.0).collect(),
        jump_sizes: events.iter().map(|e| e.1).collect(),
        horizon,
    })
}
