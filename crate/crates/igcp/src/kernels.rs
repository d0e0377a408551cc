//! Numerical and combinatorial primitives.
//!
//! Touchard (Bell) polynomials, the three-parameter Mittag-Leffler
//! function E^δ_{α,β}, incomplete gamma functions, falling factorials,
//! enumeration of the weighted partition sets Ω(k,n) = {x ≥ 0 : Σ j·x_j = n},
//! compositions, discrete convolution powers and Chernoff tail bounds.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::scalar::{ln_factorial, Compensated, Real};

/// Hard cap on the number of series terms evaluated by any kernel.
pub const MAX_SERIES_TERMS: usize = 10_000;

/// Default work budget (terms) for finite-but-large sums.
pub const WORK_BUDGET: u64 = 10_000_000;

/// A truncated series value with its truncation certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesResult<T> {
    pub value: T,
    pub terms_used: usize,
    /// Absolute bound on |value − exact|.
    pub tail_bound: T,
}

impl<T: Real> SeriesResult<T> {
    pub fn exact(value: T, terms_used: usize) -> Self {
        Self { value, terms_used, tail_bound: T::zero() }
    }
}

/// Probability masses on 0..=N plus a bound on the mass that is missing
/// or misplaced relative to the exact distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmfVector<T = f64> {
    pub probs: Vec<T>,
    pub tail_bound: T,
}

impl<T: Real> PmfVector<T> {
    pub fn new(probs: Vec<T>, tail_bound: T) -> Self {
        Self { probs, tail_bound }
    }

    /// Point mass at `n`.
    pub fn delta(n: usize) -> Self {
        let mut probs = vec![T::zero(); n + 1];
        probs[n] = T::one();
        Self { probs, tail_bound: T::zero() }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Largest represented state.
    pub fn max_state(&self) -> usize {
        self.probs.len().saturating_sub(1)
    }

    pub fn get(&self, n: usize) -> T {
        self.probs.get(n).copied().unwrap_or_else(T::zero)
    }

    pub fn mass(&self) -> T {
        let mut acc = Compensated::new();
        for &p in &self.probs {
            acc.add(p);
        }
        acc.value()
    }

    pub fn cdf(&self, n: usize) -> T {
        let mut acc = Compensated::new();
        for &p in self.probs.iter().take(n + 1) {
            acc.add(p);
        }
        acc.value()
    }

    pub fn mean(&self) -> T {
        let mut acc = Compensated::new();
        for (n, &p) in self.probs.iter().enumerate() {
            acc.add(T::from_count(n as u64) * p);
        }
        acc.value()
    }

    /// Σ uⁿ p(n) over the represented states.
    pub fn pgf(&self, u: T) -> T {
        let mut acc = T::zero();
        for &p in self.probs.iter().rev() {
            acc = acc * u + p;
        }
        acc
    }

    /// Drop states above `max_state`, moving their mass into the tail bound.
    pub fn truncated(&self, max_state: usize) -> Self {
        if self.probs.len() <= max_state + 1 {
            return self.clone();
        }
        let dropped: T = self.probs[max_state + 1..].iter().fold(T::zero(), |a, &b| a + b);
        Self { probs: self.probs[..=max_state].to_vec(), tail_bound: self.tail_bound + dropped }
    }

    /// CSV with header `n,probability`, values at 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,probability\n");
        for (n, p) in self.probs.iter().enumerate() {
            out.push_str(&format!("{},{:.16e}\n", n, p.as_f64()));
        }
        out
    }
}

/// One element of Ω(k, n): `parts[j-1]` is the multiplicity x_j of amplitude j.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WeightedPartition {
    pub parts: Vec<u32>,
    pub weight: u32,
}

impl WeightedPartition {
    /// z_k = Σ x_j.
    pub fn count(&self) -> u32 {
        self.parts.iter().sum()
    }
}

/// Touchard polynomial 𝓑ₙ(x) = e^{-x} Σ_r rⁿ xʳ/r!.
pub fn bell_polynomial<T: Real>(n: usize, x: T) -> Result<T> {
    Ok(bell_polynomials(n, x)?[n])
}

/// 𝓑₀(x), …, 𝓑_{n_max}(x) via 𝓑_{n+1}(x) = x Σ_m C(n,m) 𝓑_m(x).
pub fn bell_polynomials<T: Real>(n_max: usize, x: T) -> Result<Vec<T>> {
    if !(x >= T::zero()) || !x.is_finite() {
        return Err(domain(format!("bell polynomial argument must be finite and >= 0, got {x}")));
    }
    let mut bell = Vec::with_capacity(n_max + 1);
    bell.push(T::one());
    let mut binom = vec![T::one()];
    for n in 0..n_max {
        let mut acc = Compensated::new();
        for (m, c) in binom.iter().enumerate() {
            acc.add(*c * bell[m]);
        }
        let next = x * acc.value();
        if !next.is_finite() {
            return Err(Error::Range(format!("bell polynomial of order {} at x = {x}", n + 1)));
        }
        bell.push(next);
        let mut row = Vec::with_capacity(n + 2);
        row.push(T::one());
        for w in binom.windows(2) {
            row.push(w[0] + w[1]);
        }
        row.push(T::one());
        binom = row;
    }
    Ok(bell)
}

/// ln 𝓑₀(y), …, ln 𝓑_{n_max}(y), evaluated on the scale max(1, y)^r so
/// that large orders and arguments stay representable.
pub fn ln_bell_polynomials<T: Real>(n_max: usize, y: T) -> Result<Vec<T>> {
    if !(y >= T::zero()) || !y.is_finite() {
        return Err(domain(format!("bell polynomial argument must be finite and >= 0, got {y}")));
    }
    let scale = y.max(T::one());
    let ratio = y / scale;
    let inv = T::one() / scale;
    let mut b = Vec::with_capacity(n_max + 1);
    b.push(T::one());
    let mut binom = vec![T::one()];
    for n in 0..n_max {
        // b_{n+1} = (y/s) Σ_m C(n,m) b_m s^{m-n}
        let mut acc = Compensated::new();
        let mut w = T::one();
        for m in (0..=n).rev() {
            acc.add(binom[m] * b[m] * w);
            w = w * inv;
        }
        b.push(ratio * acc.value());
        let mut row = Vec::with_capacity(n + 2);
        row.push(T::one());
        for pair in binom.windows(2) {
            row.push(pair[0] + pair[1]);
        }
        row.push(T::one());
        if row.iter().any(|c| !c.is_finite()) {
            return Err(Error::Range(format!("binomial coefficients of order {}", n + 1)));
        }
        binom = row;
    }
    let ln_s = scale.ln();
    Ok(b.iter().enumerate().map(|(r, &v)| v.ln() + T::from_count(r as u64) * ln_s).collect())
}

/// Truncation controls for the Mittag-Leffler series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlConfig<T> {
    pub tol: T,
    pub max_terms: usize,
}

impl<T: Real> Default for MlConfig<T> {
    fn default() -> Self {
        Self { tol: T::series_tol(), max_terms: MAX_SERIES_TERMS }
    }
}

/// E^δ_{α,β}(x) = Σ_j Γ(j+δ) xʲ / (Γ(δ) j! Γ(jα+β)).
pub fn mittag_leffler_3p<T: Real>(alpha: T, beta: T, delta: T, x: T) -> Result<SeriesResult<T>> {
    mittag_leffler_3p_with(alpha, beta, delta, x, MlConfig::default())
}

pub fn mittag_leffler_3p_with<T: Real>(
    alpha: T,
    beta: T,
    delta: T,
    x: T,
    cfg: MlConfig<T>,
) -> Result<SeriesResult<T>> {
    if !(alpha > T::zero() && alpha <= T::one()) {
        return Err(domain(format!("alpha must lie in (0,1], got {alpha}")));
    }
    if !(beta > T::zero()) || !(delta > T::zero()) {
        return Err(domain(format!("beta and delta must be positive, got {beta}, {delta}")));
    }
    if !x.is_finite() {
        return Err(domain("Mittag-Leffler argument must be finite"));
    }
    if x == T::zero() {
        return Ok(SeriesResult::exact(T::one() / beta.gamma(), 1));
    }
    let ln_x = x.abs().ln();
    let negative = x < T::zero();
    let ln_gd = delta.ln_gamma();
    let ln_term = |j: usize| -> T {
        let jr = T::from_count(j as u64);
        (jr + delta).ln_gamma() - ln_gd - ln_factorial::<T>(j as u64) - (jr * alpha + beta).ln_gamma()
            + jr * ln_x
    };
    let mut acc = Compensated::new();
    let mut abs_sum = T::zero();
    let mut prev = T::infinity();
    for j in 0..cfg.max_terms {
        let mag = ln_term(j).exp();
        let term = if negative && j % 2 == 1 { -mag } else { mag };
        acc.add(term);
        abs_sum += mag;
        let partial = acc.value();
        if j > 0 && mag <= prev && mag < cfg.tol * partial.abs() {
            let jr = T::from_count(j as u64);
            let lead = T::one().max((jr + delta) / (jr + T::one()));
            let z = jr * alpha + beta;
            let r = lead * (z.ln_gamma() - (z + alpha).ln_gamma()).exp() * x.abs();
            if r < T::one() {
                let tail = mag * r / (T::one() - r);
                if tail <= cfg.tol * partial.abs() {
                    let rounding = T::lit(4.0) * T::epsilon() * abs_sum;
                    return Ok(SeriesResult { value: partial, terms_used: j + 1, tail_bound: tail + rounding });
                }
            }
        }
        prev = mag;
    }
    Err(Error::Truncation { partial: acc.value().as_f64(), terms: cfg.max_terms })
}

/// Visit every element of Ω(k, n) in lexicographically descending order of
/// (x_k, …, x₁). The slice passed to `visit` holds (x₁, …, x_k).
pub fn for_each_weighted_partition(k: usize, n: u32, mut visit: impl FnMut(&[u32])) {
    assert!(k >= 1, "k must be positive");
    let mut x = vec![0u32; k];
    let mut rem = vec![0u32; k + 1];
    rem[k] = n;
    let mut level = k;
    loop {
        while level > 1 {
            let j = level as u32;
            x[level - 1] = rem[level] / j;
            rem[level - 1] = rem[level] - j * x[level - 1];
            level -= 1;
        }
        x[0] = rem[1];
        visit(&x);
        let mut l = 2;
        while l <= k && x[l - 1] == 0 {
            l += 1;
        }
        if l > k {
            break;
        }
        x[l - 1] -= 1;
        rem[l - 1] = rem[l] - (l as u32) * x[l - 1];
        level = l - 1;
    }
}

/// Ω(k, n) materialised.
pub fn enumerate_weighted_partitions(k: usize, n: u32) -> Vec<WeightedPartition> {
    let mut out = Vec::new();
    for_each_weighted_partition(k, n, |x| out.push(WeightedPartition { parts: x.to_vec(), weight: n }));
    out
}

/// |Ω(k, n)| by the standard coin-change recursion.
pub fn count_weighted_partitions(k: usize, n: u32) -> u64 {
    let n = n as usize;
    let mut ways = vec![0u64; n + 1];
    ways[0] = 1;
    for j in 1..=k {
        for m in j..=n {
            ways[m] = ways[m].saturating_add(ways[m - j]);
        }
    }
    ways[n]
}

/// Visit every tuple of `parts` non-negative integers summing to `total`,
/// in lexicographically descending order.
pub fn for_each_composition(total: u32, parts: usize, mut visit: impl FnMut(&[u32])) {
    assert!(parts >= 1, "parts must be positive");
    let mut r = vec![0u32; parts];
    r[0] = total;
    loop {
        visit(&r);
        let Some(i) = (0..parts - 1).rev().find(|&i| r[i] > 0) else {
            break;
        };
        let rest: u32 = r[i + 1..].iter().sum();
        r[i] -= 1;
        for v in r[i + 1..].iter_mut() {
            *v = 0;
        }
        r[i + 1] = rest + 1;
    }
}

pub fn enumerate_compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for_each_composition(total, parts, |r| out.push(r.to_vec()));
    out
}

/// C(total + parts − 1, parts − 1), saturating.
pub fn count_compositions(total: u32, parts: usize) -> u64 {
    let n = total as u64 + parts as u64 - 1;
    let k = (parts as u64 - 1).min(total as u64);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
        if c > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    c as u64
}

/// Full linear convolution of two mass vectors.
pub fn convolve<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![T::zero(); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == T::zero() {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Convolution keeping only states 0..len.
pub fn convolve_truncated<T: Real>(a: &[T], b: &[T], len: usize) -> Vec<T> {
    let mut out = vec![T::zero(); len];
    for (i, &x) in a.iter().enumerate().take(len) {
        if x == T::zero() {
            continue;
        }
        for (j, &y) in b.iter().enumerate().take(len - i) {
            out[i + j] += x * y;
        }
    }
    out
}

/// m-fold convolution power. The support grows to m·N; the tail bound of
/// the result is m times the input bound.
pub fn pmf_convolution_power<T: Real>(pmf: &PmfVector<T>, m: usize) -> PmfVector<T> {
    if m == 0 {
        return PmfVector::delta(0);
    }
    let mut result: Option<Vec<T>> = None;
    let mut base = pmf.probs.clone();
    let mut e = m;
    while e > 0 {
        if e & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => convolve(&r, &base),
            });
        }
        e >>= 1;
        if e > 0 {
            base = convolve(&base, &base);
        }
    }
    PmfVector { probs: result.unwrap_or_default(), tail_bound: pmf.tail_bound * T::from_count(m as u64) }
}

/// γ(s, x) = ∫₀ˣ e^{−u} u^{s−1} du.
pub fn lower_incomplete_gamma<T: Real>(s: T, x: T) -> Result<T> {
    Ok(regularized_gamma_p(s, x)? * s.gamma())
}

/// P(s, x) = γ(s, x)/Γ(s).
pub fn regularized_gamma_p<T: Real>(s: T, x: T) -> Result<T> {
    let (p, q) = regularized_gamma_pq(s, x)?;
    Ok(if x < s + T::one() { p } else { T::one() - q })
}

/// Q(s, x) = 1 − P(s, x).
pub fn regularized_gamma_q<T: Real>(s: T, x: T) -> Result<T> {
    let (p, q) = regularized_gamma_pq(s, x)?;
    Ok(if x < s + T::one() { T::one() - p } else { q })
}

// Returns (P from the series, Q from the continued fraction); only the
// component on the convergent side of x = s + 1 is computed.
fn regularized_gamma_pq<T: Real>(s: T, x: T) -> Result<(T, T)> {
    if !(s > T::zero()) {
        return Err(domain(format!("incomplete gamma requires s > 0, got {s}")));
    }
    if !(x >= T::zero()) {
        return Err(domain(format!("incomplete gamma requires x >= 0, got {x}")));
    }
    if x == T::zero() {
        return Ok((T::zero(), T::one()));
    }
    let ln_pre = s * x.ln() - x - s.ln_gamma();
    let eps = T::epsilon();
    if x < s + T::one() {
        let mut ap = s;
        let mut del = T::one() / s;
        let mut sum = del;
        for _ in 0..MAX_SERIES_TERMS {
            ap += T::one();
            del = del * x / ap;
            sum += del;
            if del.abs() < sum.abs() * eps {
                return Ok(((ln_pre.exp() * sum).min(T::one()), T::zero()));
            }
        }
        Err(Error::Truncation { partial: (ln_pre.exp() * sum).as_f64(), terms: MAX_SERIES_TERMS })
    } else {
        let tiny = T::min_positive_value() / eps;
        let mut b = x + T::one() - s;
        let mut c = T::one() / tiny;
        let mut d = T::one() / b;
        let mut h = d;
        for i in 1..MAX_SERIES_TERMS {
            let ir = T::from_count(i as u64);
            let an = -ir * (ir - s);
            b += T::lit(2.0);
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = T::one() / d;
            let del = d * c;
            h = h * del;
            if (del - T::one()).abs() < eps {
                return Ok((T::zero(), (ln_pre.exp() * h).min(T::one())));
            }
        }
        Err(Error::Truncation { partial: (ln_pre.exp() * h).as_f64(), terms: MAX_SERIES_TERMS })
    }
}

/// (j)_m = j(j−1)…(j−m+1).
pub fn falling_factorial(j: i64, m: u32) -> i128 {
    if m == 0 {
        return 1;
    }
    if j >= 0 && (j as u64) < m as u64 {
        return 0;
    }
    (0..m as i64).fold(1i128, |acc, i| acc.saturating_mul((j - i) as i128))
}

/// Chernoff bound Pr{X ≥ level} ≤ inf_{0<θ≤θ_max} exp(K(θ) − θ·level)
/// for a cumulant generating function K that is convex and finite on
/// [0, θ_max].
pub fn chernoff_tail<T: Real>(log_mgf: impl Fn(T) -> T, level: T, theta_max: T) -> T {
    let h = |th: T| {
        let v = log_mgf(th) - th * level;
        if v.is_nan() {
            T::infinity()
        } else {
            v
        }
    };
    let golden = T::lit(0.618_033_988_749_894_9);
    let (mut a, mut b) = (T::zero(), theta_max);
    let mut c = b - golden * (b - a);
    let mut d = a + golden * (b - a);
    let (mut fc, mut fd) = (h(c), h(d));
    for _ in 0..200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - golden * (b - a);
            fc = h(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + golden * (b - a);
            fd = h(d);
        }
        if (b - a).abs() < T::lit(1e-10) * (T::one() + theta_max) {
            break;
        }
    }
    let best = fc.min(fd).min(h(theta_max)).min(T::zero());
    best.exp().min(T::one())
}

/// Default state truncation ceil(mean + 12·sd + 20).
pub fn truncation_point<T: Real>(mean: T, variance: T) -> usize {
    let n = (mean + T::lit(12.0) * variance.max(T::zero()).sqrt() + T::lit(20.0)).ceil();
    n.to_usize().unwrap_or(usize::MAX)
}

/// Poisson mass vector on 0..=n_max computed by the stable forward recursion.
pub fn poisson_pmf_vector<T: Real>(mean: T, n_max: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(n_max + 1);
    if mean == T::zero() {
        out.push(T::one());
        out.resize(n_max + 1, T::zero());
        return out;
    }
    let ln_mean = mean.ln();
    for n in 0..=n_max {
        let v = (T::from_count(n as u64) * ln_mean - mean - ln_factorial::<T>(n as u64)).exp();
        out.push(v);
    }
    out
}
