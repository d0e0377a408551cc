//! Multivariate IGCP (M₁(M₀(t)), …, M_q(M₀(t))): q independent GCPs
//! driven by one shared inner GCP M₀. Λ = Σ_i Σ_{j_i} λ_{i j_i}.

use num_complex::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};
use crate::gcp::{gcp_pmf, gcp_pmf_vector, sample_gcp_value, GcpParams};
use crate::kernels::{for_each_composition, for_each_weighted_partition, ln_bell_polynomials, SeriesResult, WORK_BUDGET};
use crate::ode::{integrate, OdeConfig};
use crate::scalar::{ln_factorial, log_sum_exp, Compensated, Real};

/// Lattice points allowed in joint evaluations.
pub const LATTICE_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct MvIgcpParams<T = f64> {
    pub components: Vec<GcpParams<T>>,
    pub inner: GcpParams<T>,
}

impl<T: Real> MvIgcpParams<T> {
    pub fn new(components: Vec<GcpParams<T>>, inner: GcpParams<T>) -> Result<Self> {
        if components.is_empty() {
            return Err(invalid("need at least one component"));
        }
        for c in &components {
            c.validate()?;
        }
        inner.validate()?;
        Ok(Self { components, inner })
    }

    pub fn q(&self) -> usize {
        self.components.len()
    }

    /// Λ = Σ_i Σ_j λ_{ij}.
    pub fn lambda_total(&self) -> T {
        self.components.iter().fold(T::zero(), |a, c| a + c.total_rate())
    }

    /// Default per-component truncation from the marginal moments.
    pub fn marginal_truncation(&self, t: T) -> Vec<usize> {
        self.components
            .iter()
            .map(|c| {
                let mean = c.first_moment() * self.inner.first_moment() * t;
                let m = c.first_moment();
                let var = m * m * self.inner.second_moment() * t + c.second_moment() * self.inner.first_moment() * t;
                crate::kernels::truncation_point(mean, var)
            })
            .collect()
    }

    fn check_state(&self, n: &[u64]) -> Result<()> {
        if n.len() != self.q() {
            return Err(domain(format!("state has {} coordinates, expected {}", n.len(), self.q())));
        }
        Ok(())
    }
}

/// exp(−Σ μ_{j₀} t (1 − exp(−j₀ Σ_i Σ_j λ_{ij}(1 − u_i^j)))).
pub fn mv_pgf<T: Real>(params: &MvIgcpParams<T>, u: &[T], t: T) -> Result<T> {
    if u.len() != params.q() {
        return Err(domain("pgf argument has the wrong dimension"));
    }
    if u.iter().any(|x| x.abs() > T::one()) {
        return Err(domain("pgf arguments must satisfy |u_i| <= 1"));
    }
    let g = params.components.iter().zip(u).fold(T::zero(), |a, (c, &ui)| a + c.exponent(ui));
    let e = params.inner.rates.iter().enumerate().fold(T::zero(), |a, (i, &mu)| {
        a + mu * t * (T::one() - (-T::from_count(i as u64 + 1) * g).exp())
    });
    Ok((-e).exp())
}

/// Σ_m Π_i Pr{M_i(m) = n_i} Pr{M₀(t) = m}, truncated at m_max with the
/// inner tail as certificate.
pub fn mv_pmf<T: Real>(params: &MvIgcpParams<T>, n: &[u64], t: T, m_max: Option<usize>) -> Result<SeriesResult<T>> {
    params.check_state(n)?;
    if t == T::zero() {
        let v = if n.iter().all(|&x| x == 0) { T::one() } else { T::zero() };
        return Ok(SeriesResult::exact(v, 1));
    }
    let m_max = m_max.unwrap_or_else(|| params.inner.truncation(t));
    let inner = gcp_pmf_vector(&params.inner, t, m_max);
    let mut acc = Compensated::new();
    for (m, &p0) in inner.probs.iter().enumerate() {
        let s = T::from_count(m as u64);
        let mut w = p0;
        for (c, &ni) in params.components.iter().zip(n) {
            w = w * gcp_pmf(c, ni, s);
        }
        acc.add(w);
    }
    Ok(SeriesResult { value: acc.value(), terms_used: m_max + 1, tail_bound: inner.tail_bound })
}

/// Bell-polynomial form: Σ over Π_i Ω(k_i, n_i) of Π λ^{x}/x! times
/// Σ_{Σ r = Z} Z! Π_{j₀} j₀^{r}/r! e^{−μ_{j₀}t(1−e^{−j₀Λ})} 𝓑_r(μ_{j₀} t e^{−j₀Λ}),
/// Z being the total multiplicity.
pub fn mv_pmf_bell<T: Real>(params: &MvIgcpParams<T>, n: &[u64], t: T) -> Result<SeriesResult<T>> {
    params.check_state(n)?;
    if t == T::zero() {
        let v = if n.iter().all(|&x| x == 0) { T::one() } else { T::zero() };
        return Ok(SeriesResult::exact(v, 1));
    }
    let big_lam = params.lambda_total();
    let z_max: u64 = n.iter().sum();
    let k0 = params.inner.k();
    // ln F(Z)
    let mut ln_bell = Vec::with_capacity(k0);
    let mut ln_const = T::zero();
    for (i, &mu) in params.inner.rates.iter().enumerate() {
        let j0 = T::from_count(i as u64 + 1);
        let decay = (-j0 * big_lam).exp();
        ln_bell.push(ln_bell_polynomials(z_max as usize, mu * t * decay)?);
        ln_const -= mu * t * (T::one() - decay);
    }
    let mut terms = 0u64;
    let mut ln_f = Vec::with_capacity(z_max as usize + 1);
    for z in 0..=z_max as u32 {
        let mut logs = Vec::new();
        for_each_composition(z, k0, |r| {
            let mut s = ln_factorial::<T>(z as u64) + ln_const;
            for (i, &ri) in r.iter().enumerate() {
                s += T::from_count(ri as u64) * T::from_count(i as u64 + 1).ln() - ln_factorial::<T>(ri as u64)
                    + ln_bell[i][ri as usize];
            }
            logs.push(s);
        });
        terms += logs.len() as u64;
        if terms > WORK_BUDGET {
            return Err(Error::Budget { needed: terms, limit: WORK_BUDGET });
        }
        ln_f.push(log_sum_exp(&logs));
    }
    // G_i(z) = Σ_{x ∈ Ω(k_i, n_i), Σx = z} Π λ^x/x!
    let mut g: Vec<Vec<T>> = Vec::with_capacity(params.q());
    for (c, &ni) in params.components.iter().zip(n) {
        let ln_l: Vec<T> = c.rates.iter().map(|l| l.ln()).collect();
        let mut row = vec![T::zero(); ni as usize + 1];
        for_each_weighted_partition(c.k(), ni as u32, |x| {
            let z: u32 = x.iter().sum();
            let mut s = T::zero();
            for (j, &xj) in x.iter().enumerate() {
                if xj > 0 {
                    s += T::from_count(xj as u64) * ln_l[j] - ln_factorial::<T>(xj as u64);
                }
            }
            row[z as usize] += s.exp();
        });
        g.push(row);
    }
    // Σ over (z_1..z_q) of Π G_i(z_i) F(Σ z_i): fold the convolution.
    let mut conv = vec![T::one()];
    for row in &g {
        let mut next = vec![T::zero(); conv.len() + row.len() - 1];
        for (a, &x) in conv.iter().enumerate() {
            for (b, &y) in row.iter().enumerate() {
                next[a + b] += x * y;
            }
        }
        conv = next;
    }
    let mut acc = Compensated::new();
    for (z, &c) in conv.iter().enumerate() {
        if c > T::zero() {
            acc.add((c.ln() + ln_f[z]).exp());
        }
    }
    Ok(SeriesResult::exact(acc.value(), terms as usize))
}

fn lattice_size(dims: &[usize]) -> u64 {
    dims.iter().fold(1u64, |a, &d| a.saturating_mul(d as u64 + 1))
}

fn unravel(mut idx: usize, dims: &[usize], out: &mut [usize]) {
    for i in (0..dims.len()).rev() {
        let d = dims[i] + 1;
        out[i] = idx % d;
        idx /= d;
    }
}

fn ravel(n: &[usize], dims: &[usize]) -> usize {
    n.iter().zip(dims).fold(0, |a, (&x, &d)| a * (d + 1) + x)
}

/// Joint pmf on the box Π_i {0..=n_max_i}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MvLattice<T = f64> {
    pub dims: Vec<usize>,
    /// Row-major, last coordinate fastest.
    pub probs: Vec<T>,
    pub tail_bound: T,
}

impl<T: Real> MvLattice<T> {
    pub fn get(&self, n: &[usize]) -> T {
        if n.iter().zip(&self.dims).any(|(a, b)| a > b) {
            return T::zero();
        }
        self.probs[ravel(n, &self.dims)]
    }

    pub fn mass(&self) -> T {
        let mut acc = Compensated::new();
        for &p in &self.probs {
            acc.add(p);
        }
        acc.value()
    }

    /// CSV with columns n1..nq, probability.
    pub fn to_csv(&self) -> String {
        let q = self.dims.len();
        let mut out: String = (1..=q).map(|i| format!("n{i},")).collect();
        out.push_str("probability\n");
        let mut idx = vec![0usize; q];
        for (k, p) in self.probs.iter().enumerate() {
            unravel(k, &self.dims, &mut idx);
            for v in &idx {
                out.push_str(&format!("{v},"));
            }
            out.push_str(&format!("{:.16e}\n", p.as_f64()));
        }
        out
    }
}

/// Joint pmf on a truncated lattice, sharing the inner weights.
pub fn mv_pmf_lattice<T: Real>(params: &MvIgcpParams<T>, t: T, dims: Option<&[usize]>) -> Result<MvLattice<T>> {
    let dims: Vec<usize> = dims.map(|d| d.to_vec()).unwrap_or_else(|| params.marginal_truncation(t));
    if dims.len() != params.q() {
        return Err(domain("lattice dimension mismatch"));
    }
    let size = lattice_size(&dims);
    if size > LATTICE_BUDGET {
        return Err(Error::Budget { needed: size, limit: LATTICE_BUDGET });
    }
    let m_max = params.inner.truncation(t);
    let inner = gcp_pmf_vector(&params.inner, t, m_max);
    let mut probs = vec![T::zero(); size as usize];
    let mut idx = vec![0usize; dims.len()];
    for (m, &p0) in inner.probs.iter().enumerate() {
        if p0 == T::zero() {
            continue;
        }
        let s = T::from_count(m as u64);
        let marg: Vec<Vec<T>> = params.components.iter().zip(&dims).map(|(c, &d)| gcp_pmf_vector(c, s, d).probs).collect();
        for (k, slot) in probs.iter_mut().enumerate() {
            unravel(k, &dims, &mut idx);
            let mut w = p0;
            for (i, &x) in idx.iter().enumerate() {
                w = w * marg[i][x];
            }
            *slot += w;
        }
    }
    let mut out = MvLattice { dims, probs, tail_bound: T::zero() };
    out.tail_bound = (T::one() - out.mass()).max(T::zero());
    Ok(out)
}

/// ν(n̄) = Σ_{j₀} μ_{j₀} Π_i Pr{M_i(j₀) = n_i}, n̄ ≠ 0̄.
pub fn mv_levy_measure<T: Real>(params: &MvIgcpParams<T>, n: &[u64]) -> Result<T> {
    params.check_state(n)?;
    if n.iter().all(|&x| x == 0) {
        return Err(domain("the Lévy measure is defined away from the origin"));
    }
    Ok(params.inner.rates.iter().enumerate().fold(T::zero(), |a, (i, &mu)| {
        let s = T::from_count(i as u64 + 1);
        a + mu * params.components.iter().zip(n).fold(T::one(), |w, (c, &ni)| w * gcp_pmf(c, ni, s))
    }))
}

/// Integrate the forward equations on the lattice Π {0..=n_max_i} from δ_{0̄}
/// and return the largest deviation from [`mv_pmf`] on an 11-point grid.
pub fn mv_ode_verify<T: Real>(params: &MvIgcpParams<T>, n_max: &[usize], t_end: T) -> Result<T> {
    if n_max.len() != params.q() {
        return Err(domain("lattice dimension mismatch"));
    }
    let size = lattice_size(n_max);
    if size > LATTICE_BUDGET {
        return Err(Error::Budget { needed: size, limit: LATTICE_BUDGET });
    }
    let size = size as usize;
    let big_lam = params.lambda_total();
    let loss = params.inner.rates.iter().enumerate().fold(T::zero(), |a, (i, &mu)| {
        a + mu * (T::one() - (-T::from_count(i as u64 + 1) * big_lam).exp())
    });
    let q = params.q();
    let mut idx = vec![0usize; q];
    let mut jumps: Vec<(Vec<usize>, T)> = Vec::new();
    for k in 1..size {
        unravel(k, n_max, &mut idx);
        let m: Vec<u64> = idx.iter().map(|&x| x as u64).collect();
        jumps.push((idx.clone(), mv_levy_measure(params, &m)?));
    }
    let dims = n_max.to_vec();
    let rhs = |_t: T, p: &[T], dp: &mut [T]| {
        let mut cur = vec![0usize; q];
        let mut src = vec![0usize; q];
        for k in 0..p.len() {
            unravel(k, &dims, &mut cur);
            let mut acc = -loss * p[k];
            for (m, w) in &jumps {
                if m.iter().zip(&cur).any(|(a, b)| a > b) {
                    continue;
                }
                for i in 0..q {
                    src[i] = cur[i] - m[i];
                }
                acc += *w * p[ravel(&src, &dims)];
            }
            dp[k] = acc;
        }
    };
    let grid: Vec<T> = (0..=10).map(|i| t_end * T::from_count(i) / T::lit(10.0)).collect();
    let mut y0 = vec![T::zero(); size];
    y0[0] = T::one();
    let sol = integrate(rhs, T::zero(), &y0, &grid, &OdeConfig::default())?;
    let mut worst = T::zero();
    for (t, y) in grid.iter().zip(&sol) {
        for (k, &v) in y.iter().enumerate() {
            unravel(k, n_max, &mut idx);
            let n: Vec<u64> = idx.iter().map(|&x| x as u64).collect();
            worst = worst.max((v - mv_pmf(params, &n, *t, None)?.value).abs());
        }
    }
    Ok(worst)
}

/// Cov(M_i(M₀(t)), M_l(M₀(t))) with 1-based component indices.
pub fn mv_covariance<T: Real>(params: &MvIgcpParams<T>, i: usize, l: usize, t: T) -> Result<T> {
    let q = params.q();
    if i == 0 || l == 0 || i > q || l > q {
        return Err(Error::Index(format!("components are numbered 1..={q}, got ({i}, {l})")));
    }
    let ci = &params.components[i - 1];
    let cl = &params.components[l - 1];
    let cross = ci.first_moment() * cl.first_moment() * params.inner.second_moment() * t;
    let diag = if i == l { params.inner.first_moment() * t * ci.second_moment() } else { T::zero() };
    Ok(diag + cross)
}

pub fn mv_covariance_matrix<T: Real>(params: &MvIgcpParams<T>, t: T) -> Vec<Vec<T>> {
    let q = params.q();
    (1..=q).map(|i| (1..=q).map(|l| mv_covariance(params, i, l, t).expect("valid indices")).collect()).collect()
}

fn cumulant_exponents<T: Real>(params: &MvIgcpParams<T>, i: usize, l: usize, omega: Complex<T>) -> Result<(Complex<T>, Complex<T>)> {
    let q = params.q();
    if i == 0 || l == 0 || i > q || l > q {
        return Err(Error::Index(format!("components are numbered 1..={q}, got ({i}, {l})")));
    }
    let side = |c: &GcpParams<T>, w: Complex<T>| {
        c.rates.iter().enumerate().fold(Complex::new(T::zero(), T::zero()), |a, (j, &lam)| {
            a + (w.scale(T::from_count(j as u64 + 1)).exp() - T::one()).scale(lam)
        })
    };
    Ok((side(&params.components[i - 1], omega), side(&params.components[l - 1], -omega)))
}

/// Codifference
/// τ = Σ μ_{j₀} t (2 − e^{j₀A} − e^{j₀B}) − Σ μ_{j₀} t (1 − e^{j₀(A+B)}) 𝟙{i ≠ l},
/// A = Σ_j λ_{ij}(e^{ωj} − 1), B = Σ_j λ_{lj}(e^{−ωj} − 1); this is
/// log E e^{ω(X−Y)} − log E e^{ωX} − log E e^{−ωY}.
pub fn mv_codifference<T: Real>(params: &MvIgcpParams<T>, i: usize, l: usize, omega: Complex<T>, t: T) -> Result<Complex<T>> {
    codifference_impl(params, i, l, omega, t, -T::one())
}

/// Same expression with +e^{j₀B} in the first sum, as it is sometimes
/// printed. Kept for comparison only.
pub fn mv_codifference_literal<T: Real>(
    params: &MvIgcpParams<T>,
    i: usize,
    l: usize,
    omega: Complex<T>,
    t: T,
) -> Result<Complex<T>> {
    codifference_impl(params, i, l, omega, t, T::one())
}

fn codifference_impl<T: Real>(
    params: &MvIgcpParams<T>,
    i: usize,
    l: usize,
    omega: Complex<T>,
    t: T,
    b_sign: T,
) -> Result<Complex<T>> {
    let (a, b) = cumulant_exponents(params, i, l, omega)?;
    let two = Complex::new(T::lit(2.0), T::zero());
    let one = Complex::new(T::one(), T::zero());
    let mut first = Complex::new(T::zero(), T::zero());
    let mut second = Complex::new(T::zero(), T::zero());
    for (idx, &mu) in params.inner.rates.iter().enumerate() {
        let j0 = T::from_count(idx as u64 + 1);
        let ea = a.scale(j0).exp();
        let eb = b.scale(j0).exp();
        first += (two - ea + eb.scale(b_sign)).scale(mu * t);
        second += (one - (a + b).scale(j0).exp()).scale(mu * t);
    }
    Ok(if i != l { first - second } else { first })
}

pub fn sample_mv_value<T: Real, R: Rng + ?Sized>(params: &MvIgcpParams<T>, t: f64, rng: &mut R) -> Vec<u64> {
    let m = sample_gcp_value(&params.inner, t, rng) as f64;
    params.components.iter().map(|c| sample_gcp_value(c, m, rng)).collect()
}
