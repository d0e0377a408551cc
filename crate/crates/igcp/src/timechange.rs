//! The IGCP time-changed by an inverse α-stable subordinator,
//! M̂ᵅ(t) = M̂(Yᵅ(t)).
//!
//! Yᵅ(t) = inf{x > 0 : Dᵅ(x) > t} where Dᵅ is the standard α-stable
//! subordinator with E e^{−sDᵅ(1)} = e^{−sᵅ}. The inner layer M₀(Yᵅ(t)) is a
//! generalized fractional counting process (GFCP) whose pmf is a weighted
//! partition sum of three-parameter Mittag-Leffler functions.

use rand::Rng;
use rand_distr::{Exp1, Open01};
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};
use crate::gcp::{gcp_pmf, GcpParams};
use crate::igcp::{sample_igcp_value, IgcpParams};
use crate::kernels::{
    chernoff_tail, count_compositions, falling_factorial, for_each_composition, for_each_weighted_partition,
    mittag_leffler_3p, PmfVector, SeriesResult, WORK_BUDGET,
};
use crate::mc::{covariance, map_samples, McConfig};
use crate::scalar::{ln_factorial, log_sum_exp, Compensated, Real};

/// Step of the discretised subordinator path used by the increment diagnostic.
pub const SRD_PATH_STEP: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams<T = f64> {
    pub alpha: T,
}

impl<T: Real> StableParams<T> {
    pub fn new(alpha: T) -> Result<Self> {
        let s = Self { alpha };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > T::zero() && self.alpha < T::one()) {
            return Err(invalid(format!("alpha must lie in (0,1), got {}", self.alpha)));
        }
        Ok(())
    }

    /// E Yᵅ(t) = tᵅ/Γ(α+1).
    pub fn inverse_mean(&self, t: T) -> T {
        t.powf(self.alpha) / (self.alpha + T::one()).gamma()
    }

    /// Var Yᵅ(t) = t^{2α}(2/Γ(2α+1) − 1/Γ²(α+1)).
    pub fn inverse_variance(&self, t: T) -> T {
        t.powf(T::lit(2.0) * self.alpha) * self.variance_factor()
    }

    fn variance_factor(&self) -> T {
        let a = self.alpha;
        let g1 = (a + T::one()).gamma();
        T::lit(2.0) / (T::lit(2.0) * a + T::one()).gamma() - T::one() / (g1 * g1)
    }

    pub fn to_f64(&self) -> StableParams<f64> {
        StableParams { alpha: self.alpha.as_f64() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct TcIgcpParams<T = f64> {
    pub base: IgcpParams<T>,
    pub stable: StableParams<T>,
}

impl<T: Real> TcIgcpParams<T> {
    pub fn new(base: IgcpParams<T>, stable: StableParams<T>) -> Result<Self> {
        base.outer.validate()?;
        base.inner.validate()?;
        stable.validate()?;
        Ok(Self { base, stable })
    }

    pub fn from_rates(outer: Vec<T>, inner: Vec<T>, alpha: T) -> Result<Self> {
        Self::new(IgcpParams::from_rates(outer, inner)?, StableParams::new(alpha)?)
    }

    pub fn alpha(&self) -> T {
        self.stable.alpha
    }

    /// R = S²(2/Γ(2α+1) − 1/Γ²(α+1)).
    pub fn r_const(&self) -> T {
        let s = self.base.s_const();
        s * s * self.stable.variance_factor()
    }

    pub fn to_f64(&self) -> TcIgcpParams<f64> {
        TcIgcpParams { base: self.base.to_f64(), stable: self.stable.to_f64() }
    }
}

/// Standard positive α-stable variate with E e^{−sD} = e^{−sᵅ}
/// (Kanter's representation).
pub fn sample_positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u = std::f64::consts::PI * rng.sample::<f64, _>(Open01);
    let w: f64 = rng.sample(Exp1);
    let a = alpha;
    (a * u).sin() / u.sin().powf(1.0 / a) * (((1.0 - a) * u).sin() / w).powf((1.0 - a) / a)
}

/// Yᵅ(t) drawn as tᵅ D^{−α}.
pub fn sample_inverse_stable<T: Real, R: Rng + ?Sized>(stable: &StableParams<T>, t: f64, rng: &mut R) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let a = stable.alpha.as_f64();
    let d = sample_positive_stable(a, rng);
    (t / d).powf(a)
}

/// Yᵅ at each of the ascending `times`, read off one discretised path of
/// Dᵅ with step `dx`. Each value overshoots the exact hitting time by less
/// than `dx`.
pub fn sample_inverse_stable_path<T: Real, R: Rng + ?Sized>(
    stable: &StableParams<T>,
    times: &[f64],
    dx: f64,
    rng: &mut R,
) -> Vec<f64> {
    let a = stable.alpha.as_f64();
    let scale = dx.powf(1.0 / a);
    let mut out = Vec::with_capacity(times.len());
    let (mut x, mut d) = (0.0f64, 0.0f64);
    let mut steps = 0u64;
    for &t in times {
        if t <= 0.0 {
            out.push(0.0);
            continue;
        }
        while d <= t {
            d += scale * sample_positive_stable(a, rng);
            steps += 1;
            x = steps as f64 * dx;
        }
        out.push(x);
    }
    out
}

/// ln E_{α,1}(x); +∞ when the series cannot be summed.
fn ln_ml1<T: Real>(alpha: T, x: T) -> T {
    match mittag_leffler_3p(alpha, T::one(), T::one(), x) {
        Ok(r) if r.value > T::zero() && r.value.is_finite() => r.value.ln(),
        _ => T::infinity(),
    }
}

/// Chernoff bound Pr{X ≥ level} for X with E e^{θX} = E_{α,1}(arg(θ)).
fn fractional_tail<T: Real>(alpha: T, arg: impl Fn(T) -> T, level: T, theta_max: T) -> T {
    chernoff_tail(|th| ln_ml1(alpha, arg(th)), level, theta_max)
}

/// E u^{M̂ᵅ(t)} = E_{α,1}(Σ μ_{j₀} tᵅ (exp(j₀ Σ λ_j (u^j − 1)) − 1)).
pub fn tc_igcp_pgf<T: Real>(params: &TcIgcpParams<T>, u: T, t: T) -> Result<T> {
    if u.abs() > T::one() {
        return Err(domain(format!("pgf argument must satisfy |u| <= 1, got {u}")));
    }
    if !(t >= T::zero()) {
        return Err(domain(format!("time must be non-negative, got {t}")));
    }
    if t == T::zero() {
        return Ok(T::one());
    }
    let g = params.base.outer.exponent(u);
    let ta = t.powf(params.alpha());
    let arg = params.base.inner.rates.iter().enumerate().fold(T::zero(), |a, (i, &mu)| {
        a + mu * ta * ((-T::from_count(i as u64 + 1) * g).exp() - T::one())
    });
    Ok(mittag_leffler_3p(params.alpha(), T::one(), T::one(), arg)?.value)
}

fn log_mgf_outer<T: Real>(outer: &GcpParams<T>, theta: T) -> T {
    outer.log_mgf(theta, T::one())
}

/// Chernoff bound on Pr{M̂ᵅ(t) > n}.
pub fn tc_tail_bound<T: Real>(params: &TcIgcpParams<T>, n: usize, t: T) -> T {
    if t == T::zero() {
        return T::zero();
    }
    let ta = t.powf(params.alpha());
    let arg = |th: T| {
        let g = log_mgf_outer(&params.base.outer, th);
        params.base.inner.rates.iter().enumerate().fold(T::zero(), |a, (i, &mu)| {
            a + mu * ta * ((T::from_count(i as u64 + 1) * g).exp() - T::one())
        })
    };
    let k = T::from_count(params.base.outer.k() as u64);
    fractional_tail(params.alpha(), arg, T::from_count(n as u64 + 1), T::lit(3.0) / k)
}

/// GFCP pmf p^α(n, t) = Σ_{Ω(k,n)} r! Π (λ_j tᵅ)^{x_j}/x_j! · E^{r+1}_{α,rα+1}(−λtᵅ),
/// r = Σ x_j.
pub fn gfcp_pmf<T: Real>(params: &GcpParams<T>, alpha: T, n: u64, t: T) -> Result<SeriesResult<T>> {
    if !(alpha > T::zero() && alpha <= T::one()) {
        return Err(domain(format!("alpha must lie in (0,1], got {alpha}")));
    }
    if !(t >= T::zero()) {
        return Err(domain(format!("time must be non-negative, got {t}")));
    }
    if t == T::zero() {
        return Ok(SeriesResult::exact(if n == 0 { T::one() } else { T::zero() }, 1));
    }
    let ta = t.powf(alpha);
    let lam = params.total_rate();
    let mut ml: Vec<Option<SeriesResult<T>>> = vec![None; n as usize + 1];
    let ln_rate: Vec<T> = params.rates.iter().map(|&l| (l * ta).ln()).collect();
    let mut acc = Compensated::new();
    let mut err = T::zero();
    let mut terms = 0usize;
    let mut failure = None;
    for_each_weighted_partition(params.k(), n as u32, |x| {
        if failure.is_some() {
            return;
        }
        let r: u32 = x.iter().sum();
        let e = match ml[r as usize] {
            Some(e) => e,
            None => {
                let rr = T::from_count(r as u64);
                match mittag_leffler_3p(alpha, rr * alpha + T::one(), rr + T::one(), -lam * ta) {
                    Ok(e) => {
                        ml[r as usize] = Some(e);
                        e
                    }
                    Err(e) => {
                        failure = Some(e);
                        return;
                    }
                }
            }
        };
        let mut lw = ln_factorial::<T>(r as u64);
        for (j, &xj) in x.iter().enumerate() {
            if xj > 0 {
                lw += T::from_count(xj as u64) * ln_rate[j] - ln_factorial::<T>(xj as u64);
            }
        }
        let w = lw.exp();
        acc.add(w * e.value);
        err += w * e.tail_bound;
        terms += e.terms_used;
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(SeriesResult { value: acc.value().max(T::zero()), terms_used: terms, tail_bound: err })
}

/// Chernoff bound on Pr{M₀ᵅ(t) > m}.
pub fn gfcp_tail_bound<T: Real>(params: &GcpParams<T>, alpha: T, m: usize, t: T) -> T {
    if t == T::zero() {
        return T::zero();
    }
    let ta = t.powf(alpha);
    let arg = |th: T| {
        params.rates.iter().enumerate().fold(T::zero(), |a, (i, &mu)| {
            a + mu * ta * ((T::from_count(i as u64 + 1) * th).exp() - T::one())
        })
    };
    let k = T::from_count(params.k() as u64);
    fractional_tail(alpha, arg, T::from_count(m as u64 + 1), T::lit(3.0) / k)
}

/// Σ_{m ≤ m_max} Pr{M(m) = n}·p^α_{M₀}(m, t) with the GFCP tail beyond
/// m_max as certificate.
pub fn tc_igcp_pmf_conditioning_oracle<T: Real>(
    params: &TcIgcpParams<T>,
    n: u64,
    t: T,
    m_max: usize,
) -> Result<SeriesResult<T>> {
    if t == T::zero() {
        return Ok(SeriesResult::exact(if n == 0 { T::one() } else { T::zero() }, 1));
    }
    let mut acc = Compensated::new();
    let mut err = T::zero();
    let mut terms = 0usize;
    for m in 0..=m_max {
        let p = gfcp_pmf(&params.base.inner, params.alpha(), m as u64, t)?;
        let q = gcp_pmf(&params.base.outer, n, T::from_count(m as u64));
        acc.add(p.value * q);
        err += p.tail_bound * q;
        terms += p.terms_used;
    }
    let tail = gfcp_tail_bound(&params.base.inner, params.alpha(), m_max, t);
    Ok(SeriesResult { value: acc.value(), terms_used: terms, tail_bound: err + tail })
}

/// Time-dependent part of the lattice sum: for every x on the simplex
/// Σ x_{j₀} ≤ z_max, ln of z! Π (μ_{j₀}tᵅe^{−j₀λ})^{x_{j₀}}/x_{j₀}! ·
/// E^{z+1}_{α,αz+1}(−μtᵅ), with z = Σ x_{j₀} and m = Σ j₀ x_{j₀}.
struct TcKernel<T> {
    entries: Vec<(u64, T, T)>,
    truncation: T,
}

fn z_max_for<T: Real>(params: &TcIgcpParams<T>, t: T) -> (usize, T) {
    let a = params.alpha();
    let mu = params.base.mu();
    let ta = t.powf(a);
    let mean = mu * params.stable.inverse_mean(t);
    let sd = (mean + mu * mu * params.stable.inverse_variance(t)).sqrt();
    let tol = T::series_tol() * T::lit(0.1);
    let mut z = (mean + T::lit(10.0) * sd + T::lit(10.0)).ceil().to_usize().unwrap_or(usize::MAX / 2);
    loop {
        let b = fractional_tail(a, |th: T| mu * ta * (th.exp() - T::one()), T::from_count(z as u64 + 1), T::lit(3.0));
        if b <= tol || z > 1_000_000 {
            return (z, b);
        }
        z = z + z / 2 + 1;
    }
}

fn tc_kernel<T: Real>(params: &TcIgcpParams<T>, t: T, z_max: usize, truncation: T, budget: u64) -> Result<TcKernel<T>> {
    let k0 = params.base.inner.k();
    let mut points = 0u64;
    for z in 0..=z_max {
        points = points.saturating_add(count_compositions(z as u32, k0));
    }
    if points > budget {
        return Err(Error::Budget { needed: points, limit: budget });
    }
    let a = params.alpha();
    let ta = t.powf(a);
    let mu = params.base.mu();
    let lam = params.base.outer.total_rate();
    let ln_rate: Vec<T> = params.base.inner.rates.iter().map(|&m| (m * ta).ln()).collect();
    let mut entries = Vec::with_capacity(points as usize);
    for z in 0..=z_max {
        let zz = T::from_count(z as u64);
        let e = mittag_leffler_3p(a, zz * a + T::one(), zz + T::one(), -mu * ta)?;
        if !(e.value > T::zero()) {
            continue;
        }
        let ln_e = e.value.ln();
        let rel = e.tail_bound / e.value;
        let base = ln_factorial::<T>(z as u64) + ln_e;
        for_each_composition(z as u32, k0, |x| {
            let mut lw = base;
            let mut m = 0u64;
            for (i, &xi) in x.iter().enumerate() {
                if xi > 0 {
                    lw += T::from_count(xi as u64) * ln_rate[i] - ln_factorial::<T>(xi as u64);
                    m += (i as u64 + 1) * xi as u64;
                }
            }
            lw -= T::from_count(m) * lam;
            entries.push((m, lw, rel));
        });
    }
    Ok(TcKernel { entries, truncation })
}

/// ln c_z, c_z = Σ_{Ω(k,n), Σx = z} Π λ_j^{x_j}/x_j!, z = 0..=n.
fn ln_partition_coefficients<T: Real>(outer: &GcpParams<T>, n: u64) -> Vec<T> {
    let ln_lam: Vec<T> = outer.rates.iter().map(|l| l.ln()).collect();
    let mut groups: Vec<Vec<T>> = vec![Vec::new(); n as usize + 1];
    for_each_weighted_partition(outer.k(), n as u32, |x| {
        let z: u32 = x.iter().sum();
        let mut s = T::zero();
        for (j, &xj) in x.iter().enumerate() {
            if xj > 0 {
                s += T::from_count(xj as u64) * ln_lam[j] - ln_factorial::<T>(xj as u64);
            }
        }
        groups[z as usize].push(s);
    });
    groups.iter().map(|g| log_sum_exp(g)).collect()
}

fn pmf_from_kernel<T: Real>(kernel: &TcKernel<T>, outer: &GcpParams<T>, n: u64) -> SeriesResult<T> {
    let ln_c = ln_partition_coefficients(outer, n);
    let mut cache: std::collections::HashMap<u64, T> = std::collections::HashMap::new();
    let mut acc = Compensated::new();
    let mut err = T::zero();
    let mut buf = Vec::with_capacity(ln_c.len());
    for &(m, lw, rel) in &kernel.entries {
        let ln_p = *cache.entry(m).or_insert_with(|| {
            if m == 0 {
                return ln_c[0];
            }
            let ln_m = T::from_count(m).ln();
            buf.clear();
            buf.extend(ln_c.iter().enumerate().map(|(z, &c)| c + T::from_count(z as u64) * ln_m));
            log_sum_exp(&buf)
        });
        let v = (lw + ln_p).exp();
        acc.add(v);
        err += v * rel;
    }
    SeriesResult { value: acc.value(), terms_used: kernel.entries.len(), tail_bound: err + kernel.truncation }
}

/// q̂ᵅ(n, t) from the closed-form sum over the x-lattice, truncated at the
/// first z_max with Pr{Z₀ > z_max} below tolerance, Z₀ being the number of
/// inner events (a fractional Poisson count with rate μ).
pub fn tc_igcp_pmf<T: Real>(params: &TcIgcpParams<T>, n: u64, t: T, budget: Option<u64>) -> Result<SeriesResult<T>> {
    if !(t >= T::zero()) {
        return Err(domain(format!("time must be non-negative, got {t}")));
    }
    if t == T::zero() {
        return Ok(SeriesResult::exact(if n == 0 { T::one() } else { T::zero() }, 1));
    }
    let (z_max, trunc) = z_max_for(params, t);
    let kernel = tc_kernel(params, t, z_max, trunc, budget.unwrap_or(WORK_BUDGET))?;
    Ok(pmf_from_kernel(&kernel, &params.base.outer, n))
}

/// q̂ᵅ(0..=n_max, t); tail is the Chernoff bound on Pr{M̂ᵅ(t) > n_max} plus
/// the per-state certificates.
pub fn tc_igcp_pmf_vector<T: Real>(params: &TcIgcpParams<T>, t: T, n_max: usize) -> Result<PmfVector<T>> {
    if t == T::zero() {
        let mut v = PmfVector::delta(0);
        v.probs.resize(n_max + 1, T::zero());
        return Ok(v);
    }
    let (z_max, trunc) = z_max_for(params, t);
    let kernel = tc_kernel(params, t, z_max, trunc, WORK_BUDGET)?;
    pmf_vector_with_kernel(params, &kernel, t, n_max)
}

fn pmf_vector_with_kernel<T: Real>(
    params: &TcIgcpParams<T>,
    kernel: &TcKernel<T>,
    t: T,
    n_max: usize,
) -> Result<PmfVector<T>> {
    let mut probs = Vec::with_capacity(n_max + 1);
    let mut err = T::zero();
    for n in 0..=n_max {
        let r = pmf_from_kernel(kernel, &params.base.outer, n as u64);
        probs.push(r.value);
        err += r.tail_bound;
    }
    Ok(PmfVector::new(probs, err + tc_tail_bound(params, n_max, t)))
}

/// Max absolute residual of the fractional forward equations
/// D^α q̂(n,t) = −μ q̂(n,t) + Σ_{j₀} μ_{j₀} Σ_{m ≤ n} Pr{M(j₀) = m} q̂(n−m,t)
/// over n ≤ n_max, with the Caputo derivative replaced by the L1 scheme on
/// the uniform grid `t_grid` (which must start at 0). The residual is taken
/// over grid points in the upper half of the time range.
pub fn tc_fractional_ode_residual<T: Real>(params: &TcIgcpParams<T>, n_max: usize, t_grid: &[T]) -> Result<T> {
    let len = t_grid.len();
    if len < 3 {
        return Err(invalid("time grid needs at least 3 points"));
    }
    if t_grid[0] != T::zero() {
        return Err(invalid("time grid must start at 0"));
    }
    let h = t_grid[1] - t_grid[0];
    if !(h > T::zero()) {
        return Err(invalid("time grid must be increasing"));
    }
    for w in t_grid.windows(2) {
        if ((w[1] - w[0]) - h).abs() > T::lit(1e-9) * h.max(T::one()) {
            return Err(invalid("time grid must be uniform"));
        }
    }
    let a = params.alpha();
    let t_end = t_grid[len - 1];
    let (z_max, _) = z_max_for(params, t_end);
    let mut q: Vec<Vec<T>> = Vec::with_capacity(len);
    for &t in t_grid {
        if t == T::zero() {
            let mut v = vec![T::zero(); n_max + 1];
            v[0] = T::one();
            q.push(v);
        } else {
            let kernel = tc_kernel(params, t, z_max, T::zero(), WORK_BUDGET)?;
            let v: Vec<T> =
                (0..=n_max).map(|n| pmf_from_kernel(&kernel, &params.base.outer, n as u64).value).collect();
            q.push(v);
        }
    }
    let mu: Vec<T> = params.base.inner.rates.clone();
    let jump: Vec<Vec<T>> = (1..=mu.len())
        .map(|j0| (0..=n_max).map(|m| gcp_pmf(&params.base.outer, m as u64, T::from_count(j0 as u64))).collect())
        .collect();
    let mu_total = params.base.mu();
    let one_minus = T::one() - a;
    let b: Vec<T> = (0..len)
        .map(|j| {
            let jf = T::from_count(j as u64);
            (jf + T::one()).powf(one_minus) - jf.powf(one_minus)
        })
        .collect();
    let scale = T::one() / ((T::lit(2.0) - a).gamma() * h.powf(a));
    let mut worst = T::zero();
    for i in 1..len {
        if t_grid[i] < t_end / T::lit(2.0) {
            continue;
        }
        for n in 0..=n_max {
            let mut d = Compensated::new();
            for j in 0..i {
                d.add(b[j] * (q[i - j][n] - q[i - j - 1][n]));
            }
            let lhs = scale * d.value();
            let mut rhs = -mu_total * q[i][n];
            for (j0, &m0) in mu.iter().enumerate() {
                let mut s = T::zero();
                for m in 0..=n {
                    s += jump[j0][m] * q[i][n - m];
                }
                rhs += m0 * s;
            }
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

/// `points + 1` equally spaced times on [0, t_end].
pub fn uniform_grid<T: Real>(t_end: T, points: usize) -> Vec<T> {
    let h = t_end / T::from_count(points as u64);
    (0..=points).map(|i| T::from_count(i as u64) * h).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaputoOrder<T> {
    pub coarse: T,
    pub fine: T,
    pub order: T,
}

/// Residuals on grids of `points` and `2·points` intervals over [0, t_end]
/// and the observed order log₂(coarse/fine).
pub fn caputo_residual_order<T: Real>(
    params: &TcIgcpParams<T>,
    n_max: usize,
    t_end: T,
    points: usize,
) -> Result<CaputoOrder<T>> {
    let coarse = tc_fractional_ode_residual(params, n_max, &uniform_grid(t_end, points))?;
    let fine = tc_fractional_ode_residual(params, n_max, &uniform_grid(t_end, 2 * points))?;
    Ok(CaputoOrder { coarse, fine, order: (coarse / fine).log2() })
}

/// Mean S tᵅ/Γ(α+1) and variance R t^{2α} + T tᵅ/Γ(α+1), i.e.
/// (E M̂(1))² Var Yᵅ(t) + Var M̂(1) · E Yᵅ(t).
pub fn tc_igcp_moments<T: Real>(params: &TcIgcpParams<T>, t: T) -> (T, T) {
    if t == T::zero() {
        return (T::zero(), T::zero());
    }
    let s = params.base.s_const();
    let ey = params.stable.inverse_mean(t);
    let var = s * s * params.stable.inverse_variance(t) + params.base.t_const() * ey;
    (s * ey, var)
}

/// (R t^{2α} + T tᵅ)/Γ(α+1): the variance with both terms over a single
/// Γ(α+1). Kept for comparison with [`tc_igcp_moments`].
pub fn tc_igcp_variance_single_denominator<T: Real>(params: &TcIgcpParams<T>, t: T) -> T {
    let a = params.alpha();
    (params.r_const() * t.powf(T::lit(2.0) * a) + params.base.t_const() * t.powf(a)) / (a + T::one()).gamma()
}

/// Large-t form of Cov(M̂ᵅ(s), M̂ᵅ(t)):
/// T sᵅ/Γ(α+1) + S²/Γ²(α+1)·(α s^{2α} B(α,α+1) − α²/(α+1)·s^{α+1}/t^{1−α}).
pub fn tc_covariance_asymptotic<T: Real>(params: &TcIgcpParams<T>, s: T, t: T) -> T {
    let a = params.alpha();
    let one = T::one();
    let g1 = (a + one).gamma();
    let sc = params.base.s_const();
    let beta = crate::scalar::beta_fn(a, a + one);
    params.base.t_const() * s.powf(a) / g1
        + sc * sc / (g1 * g1)
            * (a * s.powf(T::lit(2.0) * a) * beta - a * a / (a + one) * s.powf(a + one) / t.powf(one - a))
}

/// c(s) in Corr(M̂ᵅ(s), M̂ᵅ(t)) ~ c(s) t^{−α}.
pub fn lrd_prefactor<T: Real>(params: &TcIgcpParams<T>, s: T) -> T {
    let a = params.alpha();
    let sc = params.base.s_const();
    let num = params.base.t_const() * s.powf(a) / (a + T::one()).gamma()
        + sc * sc * s.powf(T::lit(2.0) * a) / (T::lit(2.0) * a + T::one()).gamma();
    num / (params.r_const() * tc_igcp_moments(params, s).1).sqrt()
}

/// Result of a correlation-decay fit Corr ~ c·t^{−θ}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceReport {
    pub alpha: f64,
    pub fitted_exponent: f64,
    /// Approximate 95% interval for the exponent.
    pub ci: [f64; 2],
    pub grid: Vec<f64>,
    pub correlations: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub std_errors: Vec<f64>,
    #[serde(default)]
    pub inconclusive: bool,
}

impl DependenceReport {
    pub fn is_long_range(&self) -> bool {
        self.fitted_exponent > 0.0 && self.fitted_exponent < 1.0
    }

    pub fn is_short_range(&self) -> bool {
        self.fitted_exponent > 1.0 && self.fitted_exponent < 2.0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Weighted least squares of y on x; returns (slope, slope standard error).
fn wls(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64) {
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(a, b)| b * (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).zip(w).map(|((a, c), b)| b * (a - mx) * (c - my)).sum();
    let slope = sxy / sxx;
    (slope, (1.0 / sxx).sqrt())
}

/// −slope of ln Corr against ln t for the analytic correlation
/// tc_covariance_asymptotic(s,t)/√(Var(s)·Var(t)).
pub fn lrd_exponent<T: Real>(params: &TcIgcpParams<T>, s: T, t_grid: &[T]) -> Result<DependenceReport> {
    if t_grid.len() < 2 {
        return Err(Error::Degenerate("LRD fit needs at least two times".into()));
    }
    if !(s > T::zero()) {
        return Err(domain("s must be positive"));
    }
    let v_s = tc_igcp_moments(params, s).1;
    let mut xs = Vec::with_capacity(t_grid.len());
    let mut ys = Vec::with_capacity(t_grid.len());
    let mut corr = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        if !(t > s) {
            return Err(domain(format!("grid times must exceed s, got {t}")));
        }
        let c = tc_covariance_asymptotic(params, s, t) / (v_s * tc_igcp_moments(params, t).1).sqrt();
        if !(c > T::zero()) {
            return Err(Error::Degenerate(format!("non-positive correlation at t = {t}")));
        }
        xs.push(t.as_f64().ln());
        ys.push(c.as_f64().ln());
        corr.push(c.as_f64());
    }
    if xs.windows(2).all(|w| w[0] == w[1]) {
        return Err(Error::Degenerate("grid has a single distinct time".into()));
    }
    let w = vec![1.0; xs.len()];
    let (slope, _) = wls(&xs, &ys, &w);
    let n = xs.len();
    let half = if n > 2 {
        let mx = xs.iter().sum::<f64>() / n as f64;
        let my = ys.iter().sum::<f64>() / n as f64;
        let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        1.96 * (rss / (n - 2) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    Ok(DependenceReport {
        alpha: params.alpha().as_f64(),
        fitted_exponent: -slope,
        ci: [-slope - half, -slope + half],
        grid: t_grid.iter().map(|t| t.as_f64()).collect(),
        correlations: corr,
        std_errors: Vec::new(),
        inconclusive: false,
    })
}

const SRD_BATCHES: usize = 20;

/// Correlation of Ẑ_h(s) = M̂ᵅ(s+h) − M̂ᵅ(s) with Ẑ_h(t) for each t in the
/// grid, estimated from common subordinator paths, and the fitted decay
/// exponent. Given the subordinator, IGCP increments over disjoint
/// intervals are independent with mean S·ΔY and variance T·ΔY, so the
/// conditional moments are integrated out exactly and only Yᵅ is
/// simulated. Standard errors come from batch means.
pub fn srd_increment_diagnostic(
    params: &TcIgcpParams<f64>,
    h: f64,
    s: f64,
    t_grid: &[f64],
    mc: &McConfig,
) -> Result<DependenceReport> {
    if !(h >= 0.0) || !(s >= 0.0) {
        return Err(domain("h and s must be non-negative"));
    }
    if t_grid.is_empty() {
        return Err(Error::Empty);
    }
    if t_grid.iter().any(|&t| !(t >= s)) {
        return Err(domain("grid times must be at least s"));
    }
    let mut times: Vec<f64> = vec![s, s + h];
    for &t in t_grid {
        times.push(t);
        times.push(t + h);
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| times[i]).collect();
    let stable = params.stable;
    let paths: Vec<Vec<f64>> = map_samples(
        |rng| {
            let ys = sample_inverse_stable_path(&stable, &sorted, SRD_PATH_STEP, rng);
            let mut out = vec![0.0; ys.len()];
            for (k, &i) in order.iter().enumerate() {
                out[i] = ys[k];
            }
            out
        },
        mc,
    )?;
    let sc = params.base.s_const();
    let tc = params.base.t_const();
    let inc = |p: &[f64], i: usize| p[2 * i + 1] - p[2 * i];
    let overlap = |p: &[f64], i: usize| (p[2 * i + 1].min(p[1]) - p[2 * i].max(p[0])).max(0.0);
    let corr_of = |rows: &[Vec<f64>], i: usize| -> Result<f64> {
        let d0: Vec<f64> = rows.iter().map(|p| inc(p, 0)).collect();
        let di: Vec<f64> = rows.iter().map(|p| inc(p, i)).collect();
        let (v0, _) = covariance(&d0, &d0)?;
        let (vi, _) = covariance(&di, &di)?;
        let (c, _) = covariance(&d0, &di)?;
        let m0 = d0.iter().sum::<f64>() / d0.len() as f64;
        let mi = di.iter().sum::<f64>() / di.len() as f64;
        let ov = rows.iter().map(|p| overlap(p, i)).sum::<f64>() / rows.len() as f64;
        let var0 = sc * sc * v0 + tc * m0;
        let vari = sc * sc * vi + tc * mi;
        if !(var0 > 0.0 && vari > 0.0) {
            return Err(Error::Degenerate("increments vanish on every path".into()));
        }
        Ok((sc * sc * c + tc * ov) / (var0 * vari).sqrt())
    };
    let batch = paths.len() / SRD_BATCHES;
    let mut corr = Vec::with_capacity(t_grid.len());
    let mut se = Vec::with_capacity(t_grid.len());
    for i in 1..=t_grid.len() {
        corr.push(corr_of(&paths, i)?);
        if batch >= 2 {
            let reps: Vec<f64> = paths
                .chunks(batch)
                .take(SRD_BATCHES)
                .map(|c| corr_of(c, i).unwrap_or(f64::NAN))
                .collect();
            let m = reps.iter().sum::<f64>() / reps.len() as f64;
            let v = reps.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (reps.len() - 1) as f64;
            se.push((v / reps.len() as f64).sqrt());
        } else {
            se.push(f64::NAN);
        }
    }
    let mut inconclusive = false;
    let (mut xs, mut ys, mut ws) = (Vec::new(), Vec::new(), Vec::new());
    for ((&t, &c), &e) in t_grid.iter().zip(&corr).zip(&se) {
        if !(c > 0.0) || !(e.is_finite()) || c < 2.0 * e || t <= 0.0 {
            inconclusive = true;
            continue;
        }
        xs.push(t.ln());
        ys.push(c.ln());
        ws.push((c / e).powi(2));
    }
    let distinct = xs.windows(2).any(|w| w[0] != w[1]);
    let (exponent, ci) = if xs.len() >= 2 && distinct {
        let (slope, s_err) = wls(&xs, &ys, &ws);
        (-slope, [-slope - 1.96 * s_err, -slope + 1.96 * s_err])
    } else {
        inconclusive = true;
        (f64::NAN, [f64::NAN, f64::NAN])
    };
    Ok(DependenceReport {
        alpha: params.alpha(),
        fitted_exponent: exponent,
        ci,
        grid: t_grid.to_vec(),
        correlations: corr,
        std_errors: se,
        inconclusive,
    })
}

/// Φᵅ(r,t) = Σ_{n=1}^{r} r! t^{nα}/Γ(nα+1) Σ_{m₁+…+m_n = r, m_l ≥ 1} Π_l c(m_l),
/// c(m) = Σ_{j₀} μ_{j₀} Σ_{s=1}^{m} j₀^s/s! Σ_{x₁+…+x_s = m, x_i ≥ 1} Π_i h(x_i),
/// h(x) = Σ_j λ_j (j)_x / x!. Every sum is finite.
pub fn tc_factorial_moment<T: Real>(params: &TcIgcpParams<T>, r: u32, t: T, budget: Option<u64>) -> Result<SeriesResult<T>> {
    if r == 0 {
        return Err(domain("factorial moment order must be at least 1"));
    }
    if !(t >= T::zero()) {
        return Err(domain(format!("time must be non-negative, got {t}")));
    }
    let limit = budget.unwrap_or(WORK_BUDGET);
    let needed = 1u64.checked_shl(r - 1).unwrap_or(u64::MAX);
    if needed > limit {
        return Err(Error::Budget { needed, limit });
    }
    if t == T::zero() {
        return Ok(SeriesResult::exact(T::zero(), 0));
    }
    let rr = r as usize;
    let hx: Vec<T> = (0..=rr)
        .map(|x| {
            if x == 0 {
                return T::zero();
            }
            params.base.outer.rates.iter().enumerate().fold(T::zero(), |a, (j, &l)| {
                let ff = falling_factorial(j as i64 + 1, x as u32);
                a + l * T::lit(ff as f64) / ln_factorial::<T>(x as u64).exp()
            })
        })
        .collect();
    // power[s][m]: coefficient sum over x₁+…+x_s = m, x_i ≥ 1, of Π h(x_i).
    let mut power: Vec<Vec<T>> = vec![vec![T::zero(); rr + 1]; rr + 1];
    power[1] = hx.clone();
    for s in 2..=rr {
        for m in s..=rr {
            let mut acc = T::zero();
            for x in 1..=(m - s + 1) {
                acc += hx[x] * power[s - 1][m - x];
            }
            power[s][m] = acc;
        }
    }
    let c: Vec<T> = (0..=rr)
        .map(|m| {
            let mut acc = T::zero();
            for (i, &mu) in params.base.inner.rates.iter().enumerate() {
                let j0 = T::from_count(i as u64 + 1);
                let mut inner = T::zero();
                for s in 1..=m {
                    inner += j0.powi(s as i32) / ln_factorial::<T>(s as u64).exp() * power[s][m];
                }
                acc += mu * inner;
            }
            acc
        })
        .collect();
    let a = params.alpha();
    let ln_rf = ln_factorial::<T>(r as u64);
    let mut total = Compensated::new();
    let mut terms = 0usize;
    for n in 1..=rr {
        let mut inner = Compensated::new();
        for_each_composition((rr - n) as u32, n, |ms| {
            let mut p = T::one();
            for &m in ms {
                p *= c[m as usize + 1];
            }
            inner.add(p);
            terms += 1;
        });
        let nf = T::from_count(n as u64);
        let coef = (ln_rf + nf * a * t.ln() - (nf * a + T::one()).ln_gamma()).exp();
        total.add(coef * inner.value());
    }
    Ok(SeriesResult::exact(total.value(), terms))
}

/// M̂ᵅ(t) drawn as M̂ at an independent draw of Yᵅ(t).
pub fn sample_tc_igcp_value<T: Real, R: Rng + ?Sized>(params: &TcIgcpParams<T>, t: f64, rng: &mut R) -> u64 {
    let y = sample_inverse_stable(&params.stable, t, rng);
    sample_igcp_value(&params.base, y, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk() -> TcIgcpParams<f64> {
        TcIgcpParams::from_rates(vec![1.0], vec![1.0], 0.6).unwrap()
    }

    #[test]
    fn pgf_at_one_is_one() {
        assert!((tc_igcp_pgf(&desk(), 1.0, 1.3).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_state_matches_pgf() {
        let p = desk();
        let a = tc_igcp_pmf(&p, 0, 1.0, None).unwrap().value;
        let b = tc_igcp_pgf(&p, 0.0, 1.0).unwrap();
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }

    #[test]
    fn lattice_sum_matches_conditioning() {
        let p = desk();
        for n in 0..=6 {
            let a = tc_igcp_pmf(&p, n, 1.0, None).unwrap().value;
            let b = tc_igcp_pmf_conditioning_oracle(&p, n, 1.0, 60).unwrap().value;
            assert!((a - b).abs() < 1e-9, "n={n}: {a} vs {b}");
        }
    }

    #[test]
    fn first_factorial_moment_is_mean() {
        let p = TcIgcpParams::from_rates(vec![1.0, 0.5], vec![0.7, 0.3], 0.6).unwrap();
        let f: f64 = tc_factorial_moment(&p, 1, 2.0, None).unwrap().value;
        assert!((f - tc_igcp_moments(&p, 2.0).0).abs() < 1e-12);
    }

    #[test]
    fn invalid_alpha_rejected() {
        assert!(StableParams::new(1.0f64).is_err());
        assert!(StableParams::new(0.0f64).is_err());
    }
}
