//! The iterated GCP M̂(t) = M(M₀(t)).
//!
//! The outer layer M has rates λ_j (j = 1..k), the inner layer M₀ has
//! rates μ_{j₀} (j₀ = 1..k₀). With S = (Σ j λ_j)(Σ j₀ μ_{j₀}) and
//! T = (Σ j λ_j)² Σ j₀² μ_{j₀} + (Σ j² λ_j)(Σ j₀ μ_{j₀}) the process has
//! mean S·t, variance T·t and covariance T·min(s, t).
//!
//! The non-homogeneous variant replaces μ_{j₀}t by a cumulative rate
//! ρ_{j₀}(t) from a [`RateSchedule`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::gcp::{
    gcp_pmf, gcp_pmf_vector, sample_gcp_path, sample_gcp_value, sample_nh_gcp_path, sample_nh_gcp_value,
    CountingPath, GcpParams, RateSchedule,
};
use crate::kernels::{
    count_compositions, count_weighted_partitions, for_each_composition, for_each_weighted_partition,
    ln_bell_polynomials, truncation_point, PmfVector, SeriesResult, WORK_BUDGET,
};
use crate::ode::{integrate, OdeConfig};
use crate::scalar::{beta_fn, ln_factorial, log_sum_exp, Compensated, Real};

/// Outer and inner layers of M(M₀(t)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct IgcpParams<T = f64> {
    pub outer: GcpParams<T>,
    pub inner: GcpParams<T>,
}

impl<T: Real> IgcpParams<T> {
    pub fn new(outer: GcpParams<T>, inner: GcpParams<T>) -> Result<Self> {
        outer.validate()?;
        inner.validate()?;
        Ok(Self { outer, inner })
    }

    pub fn from_rates(outer: Vec<T>, inner: Vec<T>) -> Result<Self> {
        Self::new(GcpParams::new(outer)?, GcpParams::new(inner)?)
    }

    /// S = (Σ j λ_j)(Σ j₀ μ_{j₀}).
    pub fn s_const(&self) -> T {
        self.outer.first_moment() * self.inner.first_moment()
    }

    /// T = (Σ j λ_j)² Σ j₀² μ_{j₀} + (Σ j² λ_j)(Σ j₀ μ_{j₀}).
    pub fn t_const(&self) -> T {
        let m = self.outer.first_moment();
        m * m * self.inner.second_moment() + self.outer.second_moment() * self.inner.first_moment()
    }

    /// μ = Σ μ_{j₀}.
    pub fn mu(&self) -> T {
        self.inner.total_rate()
    }

    /// log E e^{θ M̂(t)} = Σ μ_{j₀} t (exp(j₀ Σ λ_j (e^{θj} − 1)) − 1).
    pub fn log_mgf(&self, theta: T, t: T) -> T {
        let g = self.outer.log_mgf(theta, T::one());
        t * self.inner.rates.iter().enumerate().fold(T::zero(), |a, (i, &mu)| {
            a + mu * ((T::from_count(i as u64 + 1) * g).exp() - T::one())
        })
    }

    /// Chernoff bound on Pr{M̂(t) > n}.
    pub fn tail_bound(&self, n: usize, t: T) -> T {
        if t == T::zero() {
            return T::zero();
        }
        let k = T::from_count(self.outer.k() as u64);
        crate::kernels::chernoff_tail(|th| self.log_mgf(th, t), T::from_count(n as u64 + 1), T::lit(6.0) / k)
    }

    pub fn truncation(&self, t: T) -> usize {
        truncation_point(self.s_const() * t, self.t_const() * t)
    }

    pub fn to_f64(&self) -> IgcpParams<f64> {
        IgcpParams { outer: self.outer.to_f64(), inner: self.inner.to_f64() }
    }
}

fn check_budget(needed: u64, limit: u64) -> Result<()> {
    if needed > limit {
        Err(Error::Budget { needed, limit })
    } else {
        Ok(())
    }
}

/// Bell-form pmf with inner cumulative intensities `cum[j0-1]`
/// (μ_{j₀}t in the homogeneous case, ρ_{j₀}(t) otherwise).
pub(crate) fn bell_form_pmf<T: Real>(outer: &GcpParams<T>, cum: &[T], n: u64, budget: u64) -> Result<SeriesResult<T>> {
    if cum.iter().all(|&c| c == T::zero()) {
        let v = if n == 0 { T::one() } else { T::zero() };
        return Ok(SeriesResult::exact(v, 1));
    }
    let k = outer.k();
    let k0 = cum.len();
    let nn = n as u32;
    check_budget(count_weighted_partitions(k, nn), budget)?;
    let mut needed = 0u64;
    for_each_weighted_partition(k, nn, |x| {
        let z: u32 = x.iter().sum();
        needed = needed.saturating_add(count_compositions(z, k0));
    });
    check_budget(needed, budget)?;

    let lam = outer.total_rate();
    let ln_lam: Vec<T> = outer.rates.iter().map(|l| l.ln()).collect();
    let mut ln_bell = Vec::with_capacity(k0);
    let mut ln_const = T::zero();
    let mut ln_j0 = Vec::with_capacity(k0);
    for (i, &c) in cum.iter().enumerate() {
        let j0 = T::from_count(i as u64 + 1);
        let decay = (-j0 * lam).exp();
        ln_bell.push(ln_bell_polynomials(n as usize, c * decay)?);
        ln_const -= c * (T::one() - decay);
        ln_j0.push(j0.ln());
    }
    let mut logs: Vec<T> = Vec::new();
    for_each_weighted_partition(k, nn, |x| {
        let mut base = ln_const;
        for (j, &xj) in x.iter().enumerate() {
            if xj > 0 {
                base += T::from_count(xj as u64) * ln_lam[j] - ln_factorial::<T>(xj as u64);
            }
        }
        let z: u32 = x.iter().sum();
        base += ln_factorial::<T>(z as u64);
        for_each_composition(z, k0, |r| {
            let mut s = base;
            for (i, &ri) in r.iter().enumerate() {
                s += T::from_count(ri as u64) * ln_j0[i] - ln_factorial::<T>(ri as u64) + ln_bell[i][ri as usize];
            }
            logs.push(s);
        });
    });
    let value = log_sum_exp(&logs).exp();
    Ok(SeriesResult::exact(if value.is_nan() { T::zero() } else { value }, logs.len()))
}

fn inner_cum<T: Real>(inner: &GcpParams<T>, t: T) -> Vec<T> {
    inner.rates.iter().map(|&m| m * t).collect()
}

/// p̂(n, t) from the Bell-polynomial closed form.
pub fn igcp_pmf<T: Real>(params: &IgcpParams<T>, n: u64, t: T) -> Result<SeriesResult<T>> {
    igcp_pmf_with_budget(params, n, t, WORK_BUDGET)
}

pub fn igcp_pmf_with_budget<T: Real>(params: &IgcpParams<T>, n: u64, t: T, budget: u64) -> Result<SeriesResult<T>> {
    if !(t >= T::zero()) {
        return Err(domain(format!("time must be non-negative, got {t}")));
    }
    bell_form_pmf(&params.outer, &inner_cum(&params.inner, t), n, budget)
}

/// p̂(0..=n_max, t) with the Chernoff bound on Pr{M̂(t) > n_max} as tail.
pub fn igcp_pmf_vector<T: Real>(params: &IgcpParams<T>, t: T, n_max: usize) -> Result<PmfVector<T>> {
    let mut probs = Vec::with_capacity(n_max + 1);
    let mut err = T::zero();
    for n in 0..=n_max {
        let r = igcp_pmf(params, n as u64, t)?;
        probs.push(r.value);
        err += r.tail_bound;
    }
    Ok(PmfVector::new(probs, err + params.tail_bound(n_max, t)))
}

/// Σ_{s ≤ s_max} Pr{M(s) = n}·Pr{M₀(t) = s}, with the inner tail beyond
/// s_max as certificate.
pub fn igcp_pmf_series_oracle<T: Real>(params: &IgcpParams<T>, n: u64, t: T, s_max: usize) -> SeriesResult<T> {
    if t == T::zero() {
        return SeriesResult::exact(if n == 0 { T::one() } else { T::zero() }, 1);
    }
    let inner = gcp_pmf_vector(&params.inner, t, s_max);
    let mut acc = Compensated::new();
    for (s, &p0) in inner.probs.iter().enumerate() {
        acc.add(gcp_pmf(&params.outer, n, T::from_count(s as u64)) * p0);
    }
    SeriesResult { value: acc.value(), terms_used: s_max + 1, tail_bound: inner.tail_bound }
}

/// exp(−Σ μ_{j₀} t (1 − exp(−j₀ Σ λ_j (1 − u^j)))).
pub fn igcp_pgf<T: Real>(params: &IgcpParams<T>, u: T, t: T) -> Result<T> {
    if u.abs() > T::one() {
        return Err(domain(format!("pgf argument must satisfy |u| <= 1, got {u}")));
    }
    Ok(pgf_with_cum(&params.outer, &inner_cum(&params.inner, t), u))
}

fn pgf_with_cum<T: Real>(outer: &GcpParams<T>, cum: &[T], u: T) -> T {
    let g = outer.exponent(u);
    let e = cum.iter().enumerate().fold(T::zero(), |a, (i, &c)| {
        a + c * (T::one() - (-T::from_count(i as u64 + 1) * g).exp())
    });
    (-e).exp()
}

/// Pr{M(j₀) = m} for j₀ = 1..k₀ and m = 0..=m_max.
fn outer_at_amplitudes<T: Real>(params: &IgcpParams<T>, m_max: usize) -> Vec<Vec<T>> {
    (1..=params.inner.k())
        .map(|j0| (0..=m_max).map(|m| gcp_pmf(&params.outer, m as u64, T::from_count(j0 as u64))).collect())
        .collect()
}

/// O(h) coefficients of the transition probabilities: m = 0 gives
/// −μ + Σ μ_{j₀} e^{−j₀λ}, m > 0 gives Σ μ_{j₀} Pr{M(j₀) = m}.
pub fn igcp_transition_rates<T: Real>(params: &IgcpParams<T>, m: u64) -> T {
    let lam = params.outer.total_rate();
    if m == 0 {
        let stay = params.inner.rates.iter().enumerate().fold(T::zero(), |a, (i, &mu)| {
            a + mu * (-T::from_count(i as u64 + 1) * lam).exp()
        });
        return stay - params.mu();
    }
    params.inner.rates.iter().enumerate().fold(T::zero(), |a, (i, &mu)| {
        a + mu * gcp_pmf(&params.outer, m, T::from_count(i as u64 + 1))
    })
}

/// Lévy measure ν(n) = Σ μ_{j₀} Pr{M(j₀) = n}, n ≥ 1.
pub fn igcp_levy_measure<T: Real>(params: &IgcpParams<T>, n: u64) -> Result<T> {
    if n == 0 {
        return Err(domain("the Lévy measure is defined on n >= 1"));
    }
    Ok(igcp_transition_rates(params, n))
}

/// Integrate the forward equations on states 0..=n_max from δ₀ and return
/// the largest deviation from [`igcp_pmf`] on a 21-point grid of [0, t_end].
pub fn igcp_ode_verify<T: Real>(params: &IgcpParams<T>, n_max: usize, t_end: T) -> Result<T> {
    let w = outer_at_amplitudes(params, n_max);
    let mut rates = vec![T::zero(); n_max + 1];
    for (i, &mu) in params.inner.rates.iter().enumerate() {
        for m in 0..=n_max {
            rates[m] += mu * w[i][m];
        }
    }
    let mu = params.mu();
    let rhs = |_t: T, p: &[T], dp: &mut [T]| {
        for n in 0..p.len() {
            let mut acc = -mu * p[n];
            for m in 0..=n {
                acc += rates[m] * p[n - m];
            }
            dp[n] = acc;
        }
    };
    let grid: Vec<T> = (0..=20).map(|i| t_end * T::from_count(i) / T::lit(20.0)).collect();
    let mut y0 = vec![T::zero(); n_max + 1];
    y0[0] = T::one();
    let sol = integrate(rhs, T::zero(), &y0, &grid, &OdeConfig::default())?;
    let mut worst = T::zero();
    for (t, y) in grid.iter().zip(&sol) {
        for (n, &v) in y.iter().enumerate() {
            worst = worst.max((v - igcp_pmf(params, n as u64, *t)?.value).abs());
        }
    }
    Ok(worst)
}

/// Mean, variance and covariance of the IGCP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IgcpMoments<T> {
    pub mean: T,
    pub variance: T,
    pub covariance: T,
}

impl<T: Real> IgcpMoments<T> {
    /// Index of dispersion minus one.
    pub fn overdispersion(&self) -> T {
        self.variance - self.mean
    }
}

/// mean = S t, var = T t, Cov(M̂(s), M̂(t)) = T s for s ≤ t.
pub fn igcp_moments<T: Real>(params: &IgcpParams<T>, s: T, t: T) -> Result<IgcpMoments<T>> {
    if !(s >= T::zero() && s <= t) {
        return Err(domain(format!("need 0 <= s <= t, got s = {s}, t = {t}")));
    }
    let tc = params.t_const();
    Ok(IgcpMoments { mean: params.s_const() * t, variance: tc * t, covariance: tc * s })
}

/// Density at s of the first time T_n at which M̂ equals n:
/// Σ_{j₀} μ_{j₀} Σ_{m=1}^{n} Σ_r Pr{M(r) = n−m} Pr{M(j₀) = m} Pr{M₀(s) = r}.
/// The mass of this density is Pr{T_n < ∞}.
pub fn first_passage_density<T: Real>(
    params: &IgcpParams<T>,
    n: u64,
    s: T,
    r_max: Option<usize>,
) -> Result<SeriesResult<T>> {
    if n == 0 {
        return Err(domain("first passage is defined for n >= 1"));
    }
    if !(s > T::zero()) {
        return Err(domain(format!("first-passage density needs s > 0, got {s}")));
    }
    let n = n as usize;
    let r_max = r_max.unwrap_or_else(|| params.inner.truncation(s));
    let k0 = params.inner.k();
    check_budget(((r_max + 1) * n * (k0 + 1)) as u64, WORK_BUDGET)?;
    let hits = outer_at_amplitudes(params, n);
    let inner = gcp_pmf_vector(&params.inner, s, r_max);
    let mut acc = Compensated::new();
    for (r, &p_in) in inner.probs.iter().enumerate() {
        if p_in == T::zero() {
            continue;
        }
        let before = gcp_pmf_vector(&params.outer, T::from_count(r as u64), n - 1);
        let mut jump = T::zero();
        for (i, &mu) in params.inner.rates.iter().enumerate() {
            let mut inner_sum = T::zero();
            for m in 1..=n {
                inner_sum += before.probs[n - m] * hits[i][m];
            }
            jump += mu * inner_sum;
        }
        acc.add(jump * p_in);
    }
    Ok(SeriesResult { value: acc.value(), terms_used: r_max + 1, tail_bound: params.mu() * inner.tail_bound })
}

/// First-passage density to state 1 in the reduced form
/// Σ_{j₀} μ_{j₀} Σ_r j₀ λ₁ e^{−j₀λ} e^{−rλ} Pr{M₀(s) = r}.
pub fn first_passage_density_state_one<T: Real>(params: &IgcpParams<T>, s: T, r_max: Option<usize>) -> SeriesResult<T> {
    let r_max = r_max.unwrap_or_else(|| params.inner.truncation(s));
    let lam = params.outer.total_rate();
    let l1 = params.outer.rates[0];
    let lead = params.inner.rates.iter().enumerate().fold(T::zero(), |a, (i, &mu)| {
        let j0 = T::from_count(i as u64 + 1);
        a + mu * j0 * l1 * (-j0 * lam).exp()
    });
    let inner = gcp_pmf_vector(&params.inner, s, r_max);
    let mut acc = Compensated::new();
    for (r, &p) in inner.probs.iter().enumerate() {
        acc.add((-T::from_count(r as u64) * lam).exp() * p);
    }
    SeriesResult { value: lead * acc.value(), terms_used: r_max + 1, tail_bound: lead * inner.tail_bound }
}

/// Pr{T₁ < ∞} = Σ_{j₀} (μ_{j₀}/μ) j₀ λ₁ e^{−j₀λ} Σ_r e^{−rλ} Σ_{Ω(k₀,r)} z! Π (μ_{j₀}/μ)^{x}/x!.
pub fn first_passage_finite_probability<T: Real>(params: &IgcpParams<T>) -> SeriesResult<T> {
    let lam = params.outer.total_rate();
    let mu = params.mu();
    let l1 = params.outer.rates[0];
    let lead = params.inner.rates.iter().enumerate().fold(T::zero(), |a, (i, &m)| {
        let j0 = T::from_count(i as u64 + 1);
        a + m / mu * j0 * l1 * (-j0 * lam).exp()
    });
    let ln_pi: Vec<T> = params.inner.rates.iter().map(|&m| (m / mu).ln()).collect();
    let tol = T::epsilon() * T::lit(0.01);
    let decay = (-lam).exp();
    let mut acc = Compensated::new();
    let mut r = 0u32;
    loop {
        let mut logs = Vec::new();
        for_each_weighted_partition(params.inner.k(), r, |x| {
            let z: u32 = x.iter().sum();
            let mut s = ln_factorial::<T>(z as u64);
            for (i, &xi) in x.iter().enumerate() {
                if xi > 0 {
                    s += T::from_count(xi as u64) * ln_pi[i] - ln_factorial::<T>(xi as u64);
                }
            }
            logs.push(s);
        });
        let w = (-T::from_count(r as u64) * lam).exp();
        acc.add(w * log_sum_exp(&logs).exp());
        r += 1;
        let tail = (-T::from_count(r as u64) * lam).exp() / (T::one() - decay);
        if tail < tol || r as usize >= crate::kernels::MAX_SERIES_TERMS {
            return SeriesResult { value: lead * acc.value(), terms_used: r as usize, tail_bound: lead * tail };
        }
    }
}

/// M̂(t) − S t.
pub fn martingale_residual<T: Real>(path_value: u64, params: &IgcpParams<T>, t: T) -> T {
    T::from_count(path_value) - params.s_const() * t
}

/// exp(u M̂(t) − Σ μ_{j₀} t (exp(−j₀ Σ λ_j (1 − e^{uj})) − 1)).
pub fn exponential_martingale<T: Real>(path_value: u64, params: &IgcpParams<T>, u: T, t: T) -> T {
    (u * T::from_count(path_value) - params.log_mgf(u, t)).exp()
}

/// Moments of the Riemann-Liouville integral 𝓧̂(t) = (1/Γ(α)) ∫₀ᵗ (t−s)^{α−1} M̂(s) ds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionalMoments<T> {
    pub mean: T,
    pub variance: T,
    /// Cov(M̂(t), 𝓧̂(t)) = T t^{α+1}/Γ(α+2); T t²/2 at α = 1.
    pub cov_with_process: T,
}

pub fn fractional_integral_moments<T: Real>(params: &IgcpParams<T>, alpha: T, t: T) -> Result<FractionalMoments<T>> {
    if !(alpha > T::zero()) || !(t >= T::zero()) {
        return Err(domain(format!("need alpha > 0 and t >= 0, got {alpha}, {t}")));
    }
    let one = T::one();
    let two = T::lit(2.0);
    let g1 = (alpha + one).gamma();
    Ok(FractionalMoments {
        mean: params.s_const() * t.powf(alpha + one) / (alpha + two).gamma(),
        variance: params.t_const() * t.powf(two * alpha + one) / ((two * alpha + one) * g1 * g1),
        cov_with_process: params.t_const() * t.powf(alpha + one) / (alpha + two).gamma(),
    })
}

/// E[𝓧̂(t) | M̂(t) = n]
/// = (1/Γ(α)) Σ_r r/p̂(n,t) ∫₀ᵗ (t−s)^{α−1} p̂(r,s) p̂(n−r,t−s) ds,
/// expanded over the inner layer so that each integral is a beta function.
pub fn fractional_integral_conditional_mean<T: Real>(
    params: &IgcpParams<T>,
    alpha: T,
    t: T,
    n: u64,
    work_budget: u64,
) -> Result<SeriesResult<T>> {
    if !(alpha > T::zero()) || !(t > T::zero()) {
        return Err(domain(format!("need alpha > 0 and t > 0, got {alpha}, {t}")));
    }
    if n == 0 {
        return Ok(SeriesResult::exact(T::zero(), 1));
    }
    let n = n as usize;
    let denom = igcp_pmf(params, n as u64, t)?.value;
    if !(denom > T::zero()) {
        return Err(domain("conditioning event has zero probability"));
    }
    let x_max = params.inner.truncation(t);
    let k0 = params.inner.k();
    // c[x][a] = Σ_{Ω(k0,x), Σ parts = a} Π μ^{parts}/parts!
    let mut needed = 0u64;
    for x in 0..=x_max {
        needed = needed.saturating_add(count_weighted_partitions(k0, x as u32));
    }
    needed = needed.saturating_add(((x_max + 1) * (x_max + 1) * (n + 1)) as u64);
    needed = needed.saturating_add(((x_max + 1) * (x_max + 1) * n) as u64);
    check_budget(needed, work_budget)?;
    let ln_mu: Vec<T> = params.inner.rates.iter().map(|m| m.ln()).collect();
    let mut c = vec![vec![T::zero(); x_max + 1]; x_max + 1];
    for (x, row) in c.iter_mut().enumerate() {
        for_each_weighted_partition(k0, x as u32, |parts| {
            let a: u32 = parts.iter().sum();
            let mut s = T::zero();
            for (i, &p) in parts.iter().enumerate() {
                if p > 0 {
                    s += T::from_count(p as u64) * ln_mu[i] - ln_factorial::<T>(p as u64);
                }
            }
            row[a as usize] += s.exp();
        });
    }
    // u[r][a] = Σ_x Pr{M(x) = r} c[x][a]
    let mut u = vec![vec![T::zero(); x_max + 1]; n + 1];
    for (x, row) in c.iter().enumerate() {
        let outer = gcp_pmf_vector(&params.outer, T::from_count(x as u64), n);
        for r in 0..=n {
            let w = outer.probs[r];
            if w == T::zero() {
                continue;
            }
            for a in 0..=x_max {
                u[r][a] += w * row[a];
            }
        }
    }
    let ln_t = t.ln();
    let mu_t = params.mu() * t;
    let mut acc = Compensated::new();
    for r in 1..=n {
        let mut inner_sum = Compensated::new();
        for a in 0..=x_max {
            if u[r][a] == T::zero() {
                continue;
            }
            for l in 0..=x_max {
                let v = u[n - r][l];
                if v == T::zero() {
                    continue;
                }
                let al = T::from_count(a as u64);
                let ll = T::from_count(l as u64);
                let pw = ((alpha + ll + al) * ln_t - mu_t).exp();
                inner_sum.add(u[r][a] * v * pw * beta_fn(al + T::one(), alpha + ll));
            }
        }
        acc.add(T::from_count(r as u64) * inner_sum.value());
    }
    let value = acc.value() / alpha.gamma() / denom;
    let eps = params.inner.tail_bound(x_max, t);
    let nn = T::from_count(n as u64);
    let tail = nn * (nn + T::one()) * eps * t.powf(alpha) / (alpha + T::one()).gamma() / denom;
    Ok(SeriesResult { value, terms_used: needed as usize, tail_bound: tail })
}

/// Non-homogeneous IGCP pmf: Bell form with ρ_{j₀}(t).
pub fn nh_igcp_pmf<T: Real>(outer: &GcpParams<T>, schedule: &RateSchedule<T>, n: u64, t: T) -> Result<SeriesResult<T>> {
    bell_form_pmf(outer, &schedule.rhos(t)?, n, WORK_BUDGET)
}

/// exp(−Σ ρ_{j₀}(t)(1 − exp(−j₀ Σ λ_j (1 − u^j)))).
pub fn nh_igcp_pgf<T: Real>(outer: &GcpParams<T>, schedule: &RateSchedule<T>, u: T, t: T) -> Result<T> {
    if u.abs() > T::one() {
        return Err(domain(format!("pgf argument must satisfy |u| <= 1, got {u}")));
    }
    Ok(pgf_with_cum(outer, &schedule.rhos(t)?, u))
}

/// (Σ j λ_j Σ j₀ ρ_{j₀}(t), (Σ j λ_j)² Σ j₀² ρ_{j₀}(t) + Σ j² λ_j Σ j₀ ρ_{j₀}(t)).
pub fn nh_igcp_moments<T: Real>(outer: &GcpParams<T>, schedule: &RateSchedule<T>, t: T) -> Result<(T, T)> {
    let rho = schedule.rhos(t)?;
    let (mut a1, mut a2) = (T::zero(), T::zero());
    for (i, &r) in rho.iter().enumerate() {
        let j0 = T::from_count(i as u64 + 1);
        a1 += j0 * r;
        a2 += j0 * j0 * r;
    }
    let m = outer.first_moment();
    Ok((m * a1, m * m * a2 + outer.second_moment() * a1))
}

/// F(t) = 1 − Σ_{m<n} q̂(m, t), the probability that the process has
/// reached at least n by time t.
pub fn nh_first_passage_cdf<T: Real>(outer: &GcpParams<T>, schedule: &RateSchedule<T>, n: u64, t: T) -> Result<T> {
    if n == 0 {
        return Err(domain("first passage is defined for n >= 1"));
    }
    let mut acc = Compensated::new();
    for m in 0..n {
        acc.add(nh_igcp_pmf(outer, schedule, m, t)?.value);
    }
    Ok((T::one() - acc.value()).max(T::zero()))
}

/// Pr{M̂(t + v) − M̂(v) = n}: Bell form with ρ_{j₀}(t + v) − ρ_{j₀}(v).
pub fn nh_increment_pmf<T: Real>(
    outer: &GcpParams<T>,
    schedule: &RateSchedule<T>,
    n: u64,
    t: T,
    v: T,
) -> Result<SeriesResult<T>> {
    if !(v >= T::zero()) || !(t >= T::zero()) {
        return Err(domain(format!("need t, v >= 0, got t = {t}, v = {v}")));
    }
    bell_form_pmf(outer, &schedule.increment_rhos(v, t)?, n, WORK_BUDGET)
}

/// Integrate the non-homogeneous forward equations for the increment
/// process started at v, piece by piece of the schedule, and return the
/// largest deviation from [`nh_increment_pmf`] on a 21-point grid of
/// [0, t_end]. With v = 0 this checks the process itself.
pub fn nh_increment_ode_verify<T: Real>(
    outer: &GcpParams<T>,
    schedule: &RateSchedule<T>,
    n_max: usize,
    t_end: T,
    v: T,
) -> Result<T> {
    let k0 = schedule.k0();
    let w: Vec<Vec<T>> = (1..=k0)
        .map(|j0| (0..=n_max).map(|m| gcp_pmf(outer, m as u64, T::from_count(j0 as u64))).collect())
        .collect();
    let rhs = |s: T, p: &[T], dp: &mut [T]| {
        let mut loss = T::zero();
        let mut rates = vec![T::zero(); p.len()];
        for (i, row) in w.iter().enumerate() {
            let mu = schedule.rate(i + 1, (v + s).min(schedule.horizon())).unwrap_or(T::zero());
            loss += mu;
            for m in 0..p.len() {
                rates[m] += mu * row[m];
            }
        }
        for n in 0..p.len() {
            let mut acc = -loss * p[n];
            for m in 0..=n {
                acc += rates[m] * p[n - m];
            }
            dp[n] = acc;
        }
    };
    let grid: Vec<T> = (0..=20).map(|i| t_end * T::from_count(i) / T::lit(20.0)).collect();
    let mut stops: Vec<T> = grid.clone();
    for &g in &schedule.grid {
        if g > v && g - v < t_end {
            stops.push(g - v);
        }
    }
    stops.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    stops.dedup();
    let mut y = vec![T::zero(); n_max + 1];
    y[0] = T::one();
    let mut t0 = T::zero();
    let mut states = Vec::new();
    for &stop in &stops {
        if stop > t0 {
            // Rates are constant between consecutive stops.
            let mid = (t0 + stop) / T::lit(2.0);
            let seg = integrate(
                |_s: T, p: &[T], dp: &mut [T]| rhs(mid, p, dp),
                t0,
                &y,
                &[stop],
                &OdeConfig::default(),
            )?;
            y = seg.into_iter().next().expect("one output");
            t0 = stop;
        }
        if grid.contains(&stop) {
            states.push((stop, y.clone()));
        }
    }
    let mut worst = T::zero();
    for (t, y) in &states {
        for (n, &p) in y.iter().enumerate() {
            worst = worst.max((p - nh_increment_pmf(outer, schedule, n as u64, *t, v)?.value).abs());
        }
    }
    Ok(worst)
}

/// M̂(t) drawn as M evaluated at an independent draw of M₀(t).
pub fn sample_igcp_value<T: Real, R: Rng + ?Sized>(params: &IgcpParams<T>, t: f64, rng: &mut R) -> u64 {
    let m0 = sample_gcp_value(&params.inner, t, rng);
    sample_gcp_value(&params.outer, m0 as f64, rng)
}

/// Exact path: every inner event of amplitude j₀ moves M̂ by an independent
/// copy of M(j₀). Zero moves are not recorded.
pub fn sample_igcp_path<T: Real, R: Rng + ?Sized>(params: &IgcpParams<T>, horizon: f64, rng: &mut R) -> CountingPath {
    let inner = sample_gcp_path(&params.inner, horizon, rng);
    outer_moves(&params.outer, inner, rng)
}

fn outer_moves<T: Real, R: Rng + ?Sized>(outer: &GcpParams<T>, inner: CountingPath, rng: &mut R) -> CountingPath {
    let mut times = Vec::new();
    let mut sizes = Vec::new();
    for (&s, &j0) in inner.event_times.iter().zip(&inner.jump_sizes) {
        let step = sample_gcp_value(outer, j0 as f64, rng);
        if step > 0 {
            times.push(s);
            sizes.push(step);
        }
    }
    CountingPath { event_times: times, jump_sizes: sizes, horizon: inner.horizon }
}

pub fn sample_nh_igcp_value<T: Real, R: Rng + ?Sized>(
    outer: &GcpParams<T>,
    schedule: &RateSchedule<T>,
    t: f64,
    rng: &mut R,
) -> Result<u64> {
    let m0 = sample_nh_gcp_value(schedule, t, rng)?;
    Ok(sample_gcp_value(outer, m0 as f64, rng))
}

pub fn sample_nh_igcp_path<T: Real, R: Rng + ?Sized>(
    outer: &GcpParams<T>,
    schedule: &RateSchedule<T>,
    horizon: f64,
    rng: &mut R,
) -> Result<CountingPath> {
    let inner = sample_nh_gcp_path(schedule, horizon, rng)?;
    Ok(outer_moves(outer, inner, rng))
}
