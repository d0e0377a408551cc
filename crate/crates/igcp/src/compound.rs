//! Compound processes Z(t) = Σ_{i ≤ N(t)} X_i with iid jumps X_i, where N is
//! either a GCP (CGCP) or an IGCP (compound IGCP).

use rand::Rng;
use rand_distr::{Distribution, Exp, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};
use crate::gcp::{gcp_pmf, sample_gcp_value, GcpParams};
use crate::igcp::{igcp_pmf_vector, sample_igcp_value, IgcpParams};
use crate::kernels::{convolve_truncated, pmf_convolution_power, regularized_gamma_p, PmfVector, SeriesResult};
use crate::scalar::{ln_factorial, Compensated, Real};

/// Truncation tolerance for certified jump-law pmfs.
pub const LAW_TAIL_TOL: f64 = 1e-12;

/// Tail tolerance above which a truncated convolution sum is rejected.
pub const CDF_TAIL_TOL: f64 = 1e-8;

/// Distribution of the jumps X_i.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound(deserialize = "T: Deserialize<'de>"))]
pub enum JumpLaw<T = f64> {
    /// X ≡ a.
    PointMass { a: u64 },
    /// Pr{X = n} = p(1−p)^{n−1}, n ≥ 1.
    Geometric { p: T },
    /// Density rate·e^{−rate·x}.
    Exponential { rate: T },
    /// X distributed as a GCP at unit time.
    GcpUnit { params: GcpParams<T> },
    /// Tabulated pmf on 0..=N.
    ExplicitDiscrete { pmf: PmfVector<T> },
}

impl<T: Real> JumpLaw<T> {
    pub fn validate(&self) -> Result<()> {
        match self {
            JumpLaw::PointMass { .. } => Ok(()),
            JumpLaw::Geometric { p } => {
                if *p > T::zero() && *p <= T::one() {
                    Ok(())
                } else {
                    Err(invalid(format!("geometric parameter must lie in (0,1], got {p}")))
                }
            }
            JumpLaw::Exponential { rate } => {
                if *rate > T::zero() && rate.is_finite() {
                    Ok(())
                } else {
                    Err(invalid(format!("exponential rate must be positive, got {rate}")))
                }
            }
            JumpLaw::GcpUnit { params } => params.validate(),
            JumpLaw::ExplicitDiscrete { pmf } => {
                if pmf.probs.is_empty() || pmf.probs.iter().any(|p| !(*p >= T::zero())) {
                    return Err(invalid("explicit pmf needs non-negative masses"));
                }
                let gap = (T::one() - pmf.mass()).abs();
                if gap > T::lit(LAW_TAIL_TOL) + pmf.tail_bound {
                    return Err(invalid(format!("explicit pmf mass deviates from 1 by {gap}")));
                }
                Ok(())
            }
        }
    }

    pub fn is_discrete(&self) -> bool {
        !matches!(self, JumpLaw::Exponential { .. })
    }

    /// Smallest value with positive probability.
    pub fn min_support(&self) -> u64 {
        match self {
            JumpLaw::PointMass { a } => *a,
            JumpLaw::Geometric { .. } => 1,
            JumpLaw::Exponential { .. } | JumpLaw::GcpUnit { .. } => 0,
            JumpLaw::ExplicitDiscrete { pmf } => pmf.probs.iter().position(|&p| p > T::zero()).unwrap_or(0) as u64,
        }
    }

    pub fn mean(&self) -> T {
        match self {
            JumpLaw::PointMass { a } => T::from_count(*a),
            JumpLaw::Geometric { p } => T::one() / *p,
            JumpLaw::Exponential { rate } => T::one() / *rate,
            JumpLaw::GcpUnit { params } => params.first_moment(),
            JumpLaw::ExplicitDiscrete { pmf } => pmf.mean(),
        }
    }

    pub fn variance(&self) -> T {
        match self {
            JumpLaw::PointMass { .. } => T::zero(),
            JumpLaw::Geometric { p } => (T::one() - *p) / (*p * *p),
            JumpLaw::Exponential { rate } => T::one() / (*rate * *rate),
            JumpLaw::GcpUnit { params } => params.second_moment(),
            JumpLaw::ExplicitDiscrete { pmf } => {
                let m = pmf.mean();
                let mut acc = Compensated::new();
                for (n, &p) in pmf.probs.iter().enumerate() {
                    let d = T::from_count(n as u64) - m;
                    acc.add(d * d * p);
                }
                acc.value()
            }
        }
    }

    /// E u^X for discrete laws.
    pub fn pgf(&self, u: T) -> Result<T> {
        if u.abs() > T::one() {
            return Err(domain(format!("pgf argument must satisfy |u| <= 1, got {u}")));
        }
        match self {
            JumpLaw::PointMass { a } => Ok(u.powi(*a as i32)),
            JumpLaw::Geometric { p } => Ok(*p * u / (T::one() - (T::one() - *p) * u)),
            JumpLaw::GcpUnit { params } => Ok((-params.exponent(u)).exp()),
            JumpLaw::ExplicitDiscrete { pmf } => Ok(pmf.pgf(u)),
            JumpLaw::Exponential { .. } => Err(domain("pgf requires a discrete jump law")),
        }
    }

    /// Pr{X = n}.
    pub fn pmf(&self, n: u64) -> Result<T> {
        self.convolution_pmf(1, n)
    }

    /// Ψ^{*(m)}(n) = Pr{X₁ + … + X_m = n}.
    pub fn convolution_pmf(&self, m: u64, n: u64) -> Result<T> {
        if m == 0 {
            return Ok(if n == 0 { T::one() } else { T::zero() });
        }
        match self {
            JumpLaw::PointMass { a } => Ok(if n == m * a { T::one() } else { T::zero() }),
            JumpLaw::Geometric { p } => {
                if n < m {
                    return Ok(T::zero());
                }
                if *p == T::one() {
                    return Ok(if n == m { T::one() } else { T::zero() });
                }
                let ln_binom = ln_factorial::<T>(n - 1) - ln_factorial::<T>(m - 1) - ln_factorial::<T>(n - m);
                Ok((ln_binom + T::from_count(m) * p.ln() + T::from_count(n - m) * (T::one() - *p).ln()).exp())
            }
            JumpLaw::GcpUnit { params } => Ok(gcp_pmf(params, n, T::from_count(m))),
            JumpLaw::ExplicitDiscrete { pmf } => {
                let trimmed = pmf.truncated(n as usize);
                Ok(pmf_convolution_power(&trimmed, m as usize).get(n as usize))
            }
            JumpLaw::Exponential { .. } => Err(domain("convolution pmf requires a discrete jump law")),
        }
    }

    /// H^{*(m)}(w) = Pr{X₁ + … + X_m ≤ w}.
    pub fn convolution_cdf(&self, m: u64, w: T) -> Result<T> {
        if w < T::zero() {
            return Ok(T::zero());
        }
        if m == 0 {
            return Ok(T::one());
        }
        match self {
            JumpLaw::Exponential { rate } => regularized_gamma_p(T::from_count(m), *rate * w),
            _ => {
                let top = w.floor().to_u64().unwrap_or(u64::MAX);
                if top >= m.saturating_mul(self.max_support().unwrap_or(u64::MAX)) {
                    return Ok(T::one());
                }
                let mut acc = Compensated::new();
                for n in 0..=top {
                    acc.add(self.convolution_pmf(m, n)?);
                }
                Ok(acc.value().min(T::one()))
            }
        }
    }

    fn max_support(&self) -> Option<u64> {
        match self {
            JumpLaw::PointMass { a } => Some(*a),
            JumpLaw::ExplicitDiscrete { pmf } if pmf.tail_bound == T::zero() => Some(pmf.max_state() as u64),
            _ => None,
        }
    }

    /// Pmf on 0..=N with Pr{X > N} ≤ `tol`.
    pub fn certified_pmf(&self, tol: T) -> Result<PmfVector<T>> {
        match self {
            JumpLaw::PointMass { a } => Ok(PmfVector::delta(*a as usize)),
            JumpLaw::Geometric { p } => {
                let q = T::one() - *p;
                let n_max = if q == T::zero() { 1 } else { (tol.ln() / q.ln()).ceil().to_usize().unwrap_or(1).max(1) };
                let probs = (0..=n_max as u64).map(|n| self.convolution_pmf(1, n)).collect::<Result<Vec<_>>>()?;
                Ok(PmfVector::new(probs, q.powi(n_max as i32)))
            }
            JumpLaw::GcpUnit { params } => {
                let mut n_max = params.truncation(T::one());
                while params.tail_bound(n_max, T::one()) > tol {
                    n_max *= 2;
                }
                Ok(crate::gcp::gcp_pmf_vector(params, T::one(), n_max))
            }
            JumpLaw::ExplicitDiscrete { pmf } => Ok(pmf.clone()),
            JumpLaw::Exponential { .. } => Err(domain("certified pmf requires a discrete jump law")),
        }
    }

    pub fn to_f64(&self) -> JumpLaw<f64> {
        match self {
            JumpLaw::PointMass { a } => JumpLaw::PointMass { a: *a },
            JumpLaw::Geometric { p } => JumpLaw::Geometric { p: p.as_f64() },
            JumpLaw::Exponential { rate } => JumpLaw::Exponential { rate: rate.as_f64() },
            JumpLaw::GcpUnit { params } => JumpLaw::GcpUnit { params: params.to_f64() },
            JumpLaw::ExplicitDiscrete { pmf } => JumpLaw::ExplicitDiscrete {
                pmf: PmfVector::new(pmf.probs.iter().map(|p| p.as_f64()).collect(), pmf.tail_bound.as_f64()),
            },
        }
    }
}

fn require_discrete<T: Real>(law: &JumpLaw<T>) -> Result<()> {
    law.validate()?;
    if law.is_discrete() {
        Ok(())
    } else {
        Err(domain("operation requires a discrete jump law"))
    }
}

/// exp(−Σ λ_j t (1 − (E u^X)^j)).
pub fn cgcp_pgf<T: Real>(outer: &GcpParams<T>, law: &JumpLaw<T>, u: T, t: T) -> Result<T> {
    require_discrete(law)?;
    let phi = law.pgf(u)?;
    Ok((-t * outer.exponent(phi)).exp())
}

/// exp(−Σ μ_{j₀} t (1 − exp(−j₀ Σ λ_j (1 − (E u^X)^j)))).
pub fn compound_igcp_pgf<T: Real>(params: &IgcpParams<T>, law: &JumpLaw<T>, u: T, t: T) -> Result<T> {
    require_discrete(law)?;
    let phi = law.pgf(u)?;
    crate::igcp::igcp_pgf(params, phi, t)
}

/// (mean, variance) of Z(t).
pub fn compound_igcp_moments<T: Real>(params: &IgcpParams<T>, law: &JumpLaw<T>, t: T) -> (T, T) {
    let ex = law.mean();
    let vx = law.variance();
    let m = params.outer.first_moment();
    let v = params.outer.second_moment();
    let mean = params.s_const() * t * ex;
    let a = m * ex;
    let var = a * a * params.inner.second_moment() * t + params.inner.first_moment() * t * (vx * m + ex * ex * v);
    (mean, var)
}

fn igcp_weights<T: Real>(params: &IgcpParams<T>, t: T, m_max: usize) -> Result<PmfVector<T>> {
    igcp_pmf_vector(params, t, m_max)
}

/// Pr{Z(t) ≤ w} = 𝟙{w ≥ 0} p̂(0,t) + Σ_{m ≥ 1} H^{*(m)}(w) p̂(m,t).
pub fn compound_igcp_cdf<T: Real>(
    params: &IgcpParams<T>,
    law: &JumpLaw<T>,
    w: T,
    t: T,
    m_max: Option<usize>,
) -> Result<SeriesResult<T>> {
    law.validate()?;
    if w < T::zero() {
        return Ok(SeriesResult::exact(T::zero(), 0));
    }
    let m_max = m_max.unwrap_or_else(|| params.truncation(t));
    let weights = igcp_weights(params, t, m_max)?;
    if weights.tail_bound > T::lit(CDF_TAIL_TOL) {
        return Err(Error::Truncation { partial: weights.mass().as_f64(), terms: m_max + 1 });
    }
    let mut acc = Compensated::new();
    for (m, &p) in weights.probs.iter().enumerate() {
        acc.add(law.convolution_cdf(m as u64, w)? * p);
    }
    Ok(SeriesResult { value: acc.value(), terms_used: m_max + 1, tail_bound: weights.tail_bound })
}

/// [`compound_igcp_cdf`] at several points, sharing the count weights.
pub fn compound_igcp_cdf_many<T: Real>(
    params: &IgcpParams<T>,
    law: &JumpLaw<T>,
    ws: &[T],
    t: T,
    m_max: Option<usize>,
) -> Result<Vec<T>> {
    law.validate()?;
    let m_max = m_max.unwrap_or_else(|| params.truncation(t));
    let weights = igcp_weights(params, t, m_max)?;
    if weights.tail_bound > T::lit(CDF_TAIL_TOL) {
        return Err(Error::Truncation { partial: weights.mass().as_f64(), terms: m_max + 1 });
    }
    ws.iter()
        .map(|&w| {
            if w < T::zero() {
                return Ok(T::zero());
            }
            let mut acc = Compensated::new();
            for (m, &p) in weights.probs.iter().enumerate() {
                acc.add(law.convolution_cdf(m as u64, w)? * p);
            }
            Ok(acc.value())
        })
        .collect()
}

/// Pr{Z(t) = n} for a discrete law.
pub fn compound_igcp_pmf<T: Real>(
    params: &IgcpParams<T>,
    law: &JumpLaw<T>,
    n: u64,
    t: T,
    m_max: Option<usize>,
) -> Result<SeriesResult<T>> {
    require_discrete(law)?;
    let mut m_max = m_max.unwrap_or_else(|| params.truncation(t));
    let mut exact = false;
    if law.min_support() >= 1 {
        let cap = (n / law.min_support()) as usize;
        if cap <= m_max {
            m_max = cap;
            exact = true;
        }
    }
    let weights = igcp_weights(params, t, m_max)?;
    let mut acc = Compensated::new();
    for (m, &p) in weights.probs.iter().enumerate() {
        acc.add(law.convolution_pmf(m as u64, n)? * p);
    }
    let tail = if exact { T::zero() } else { weights.tail_bound };
    Ok(SeriesResult { value: acc.value(), terms_used: m_max + 1, tail_bound: tail })
}

/// Pr{Z(t) = n} for n = 0..=n_max, sharing the convolution work.
pub fn compound_igcp_pmf_vector<T: Real>(
    params: &IgcpParams<T>,
    law: &JumpLaw<T>,
    t: T,
    n_max: usize,
    m_max: Option<usize>,
) -> Result<PmfVector<T>> {
    require_discrete(law)?;
    let mut m_max = m_max.unwrap_or_else(|| params.truncation(t));
    let mut exact = false;
    if law.min_support() >= 1 && n_max / law.min_support() as usize <= m_max {
        m_max = n_max / law.min_support() as usize;
        exact = true;
    }
    let weights = igcp_weights(params, t, m_max)?;
    let base = law.certified_pmf(T::lit(LAW_TAIL_TOL))?.truncated(n_max);
    let mut conv = vec![T::zero(); n_max + 1];
    conv[0] = T::one();
    let mut out = vec![T::zero(); n_max + 1];
    for (m, &p) in weights.probs.iter().enumerate() {
        if m > 0 {
            conv = convolve_truncated(&conv, &base.probs, n_max + 1);
        }
        for n in 0..=n_max {
            out[n] += p * conv[n];
        }
    }
    let tail = if exact { T::zero() } else { weights.tail_bound };
    let law_err = base.tail_bound * T::from_count(m_max as u64);
    Ok(PmfVector::new(out, tail + law_err))
}

/// Pr{Z(t₁) ≤ x₁, …, Z(t_n) ≤ x_n} by dynamic programming over independent
/// stationary increments.
pub fn compound_fdd<T: Real>(
    params: &IgcpParams<T>,
    law: &JumpLaw<T>,
    times: &[T],
    targets: &[T],
    m_max: Option<usize>,
) -> Result<SeriesResult<T>> {
    require_discrete(law)?;
    if times.is_empty() || times.len() != targets.len() {
        return Err(domain("times and targets must be non-empty and of equal length"));
    }
    if times[0] < T::zero() || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(domain("times must be non-negative and strictly increasing"));
    }
    if targets.iter().any(|x| *x < T::zero()) {
        return Ok(SeriesResult::exact(T::zero(), 0));
    }
    let caps: Vec<usize> = targets.iter().map(|x| x.floor().to_usize().unwrap_or(0)).collect();
    let top = *caps.iter().max().expect("non-empty");
    let mut state = vec![T::zero(); top + 1];
    state[0] = T::one();
    let mut prev = T::zero();
    let mut err = T::zero();
    let mut terms = 0usize;
    for (&t, &cap) in times.iter().zip(&caps) {
        let dt = t - prev;
        prev = t;
        let inc = if dt == T::zero() {
            let mut d = vec![T::zero(); top + 1];
            d[0] = T::one();
            PmfVector::new(d, T::zero())
        } else {
            compound_igcp_pmf_vector(params, law, dt, top, m_max)?
        };
        err += inc.tail_bound;
        state = convolve_truncated(&state, &inc.probs, top + 1);
        for v in state.iter_mut().skip(cap + 1) {
            *v = T::zero();
        }
        terms += (top + 1) * (top + 1);
    }
    let mut acc = Compensated::new();
    for &v in &state {
        acc.add(v);
    }
    Ok(SeriesResult { value: acc.value(), terms_used: terms, tail_bound: err })
}

/// The D(t) representation with cached convolution coefficients α_i^{*(j)}.
#[derive(Debug, Clone)]
pub struct DProcess<T = f64> {
    params: IgcpParams<T>,
    alphas: Vec<PmfVector<T>>,
    law_tail: T,
}

impl<T: Real> DProcess<T> {
    pub fn new(params: &IgcpParams<T>, law: &JumpLaw<T>) -> Result<Self> {
        require_discrete(law)?;
        let base = law.certified_pmf(T::lit(LAW_TAIL_TOL))?;
        let alphas = (1..=params.outer.k()).map(|j| pmf_convolution_power(&base, j)).collect();
        Ok(Self { params: params.clone(), alphas, law_tail: base.tail_bound })
    }

    /// exp(−t Σ μ_{j₀}(1 − exp(−j₀ Σ_j λ_j Σ_{i≥1} α_i^{*(j)}(1 − uⁱ)))).
    pub fn pgf(&self, u: T, t: T) -> Result<SeriesResult<T>> {
        if u.abs() > T::one() {
            return Err(domain(format!("pgf argument must satisfy |u| <= 1, got {u}")));
        }
        let mut g = T::zero();
        let mut err_rate = T::zero();
        for (jm1, (alpha, &lam)) in self.alphas.iter().zip(&self.params.outer.rates).enumerate() {
            let mut s = Compensated::new();
            let mut ui = T::one();
            for a in alpha.probs.iter().skip(1) {
                ui = ui * u;
                s.add(*a * (T::one() - ui));
            }
            g += lam * s.value();
            err_rate += lam * T::lit(2.0) * T::from_count(jm1 as u64 + 1) * self.law_tail;
        }
        let mut e = T::zero();
        let mut err = T::zero();
        for (i, &mu) in self.params.inner.rates.iter().enumerate() {
            let j0 = T::from_count(i as u64 + 1);
            e += mu * (T::one() - (-j0 * g).exp());
            err += mu * j0 * err_rate;
        }
        let terms = self.alphas.iter().map(|a| a.len()).sum();
        Ok(SeriesResult { value: (-t * e).exp(), terms_used: terms, tail_bound: t * err })
    }
}

pub fn d_process_pgf<T: Real>(params: &IgcpParams<T>, law: &JumpLaw<T>, u: T, t: T) -> Result<SeriesResult<T>> {
    DProcess::new(params, law)?.pgf(u, t)
}

/// D(t) − S t E[X₁].
pub fn compound_martingale_residual<T: Real>(value: T, params: &IgcpParams<T>, law: &JumpLaw<T>, t: T) -> T {
    value - params.s_const() * t * law.mean()
}

pub fn sample_jump<T: Real, R: Rng + ?Sized>(law: &JumpLaw<T>, rng: &mut R) -> f64 {
    match law {
        JumpLaw::PointMass { a } => *a as f64,
        JumpLaw::Geometric { p } => {
            let p = p.as_f64();
            if p >= 1.0 {
                1.0
            } else {
                Geometric::new(p).expect("valid geometric").sample(rng) as f64 + 1.0
            }
        }
        JumpLaw::Exponential { rate } => Exp::new(rate.as_f64()).expect("positive rate").sample(rng),
        JumpLaw::GcpUnit { params } => sample_gcp_value(params, 1.0, rng) as f64,
        JumpLaw::ExplicitDiscrete { pmf } => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (n, p) in pmf.probs.iter().enumerate() {
                acc += p.as_f64();
                if u < acc {
                    return n as f64;
                }
            }
            pmf.max_state() as f64
        }
    }
}

/// Sum of `count` independent jumps.
pub fn sample_jump_sum<T: Real, R: Rng + ?Sized>(law: &JumpLaw<T>, count: u64, rng: &mut R) -> f64 {
    match law {
        JumpLaw::PointMass { a } => (count * a) as f64,
        _ => (0..count).map(|_| sample_jump(law, rng)).sum(),
    }
}

pub fn sample_compound_igcp_value<T: Real, R: Rng + ?Sized>(
    params: &IgcpParams<T>,
    law: &JumpLaw<T>,
    t: f64,
    rng: &mut R,
) -> f64 {
    let n = sample_igcp_value(params, t, rng);
    sample_jump_sum(law, n, rng)
}

/// Z at increasing times, built from independent increments.
pub fn sample_compound_igcp_at_times<T: Real, R: Rng + ?Sized>(
    params: &IgcpParams<T>,
    law: &JumpLaw<T>,
    times: &[f64],
    rng: &mut R,
) -> Vec<f64> {
    let mut prev = 0.0;
    let mut level = 0.0;
    times
        .iter()
        .map(|&t| {
            level += sample_compound_igcp_value(params, law, t - prev, rng);
            prev = t;
            level
        })
        .collect()
}

pub fn sample_cgcp_value<T: Real, R: Rng + ?Sized>(outer: &GcpParams<T>, law: &JumpLaw<T>, t: f64, rng: &mut R) -> f64 {
    let n = sample_gcp_value(outer, t, rng);
    sample_jump_sum(law, n, rng)
}
