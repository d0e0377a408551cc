//! Brute-force reference values for the integration tests. Nothing here
//! calls into the library.
#![allow(dead_code)]

pub fn ln_fact(n: u64) -> f64 {
    (1..=n).map(|i| (i as f64).ln()).sum()
}

/// Poisson(mean) pmf on 0..=n_max.
pub fn poisson(mean: f64, n_max: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    out[0] = (-mean).exp();
    for k in 1..=n_max {
        out[k] = out[k - 1] * mean / k as f64;
    }
    out
}

/// Σ_j j·Poisson(λ_j t) by direct convolution, states 0..=n_max.
pub fn gcp_pmf(rates: &[f64], t: f64, n_max: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    out[0] = 1.0;
    for (i, &l) in rates.iter().enumerate() {
        let j = i + 1;
        let p = poisson(l * t, n_max / j);
        let mut next = vec![0.0; n_max + 1];
        for a in 0..=n_max {
            if out[a] == 0.0 {
                continue;
            }
            for (c, &pc) in p.iter().enumerate() {
                let b = a + j * c;
                if b > n_max {
                    break;
                }
                next[b] += out[a] * pc;
            }
        }
        out = next;
    }
    out
}

pub fn first_moment(rates: &[f64]) -> f64 {
    rates.iter().enumerate().map(|(i, l)| (i + 1) as f64 * l).sum()
}

pub fn second_moment(rates: &[f64]) -> f64 {
    rates.iter().enumerate().map(|(i, l)| ((i + 1) * (i + 1)) as f64 * l).sum()
}

/// A state beyond which a GCP at time t carries negligible mass.
pub fn cutoff(rates: &[f64], t: f64) -> usize {
    let m = first_moment(rates) * t;
    let sd = (second_moment(rates) * t).sqrt();
    (m + 15.0 * sd + 40.0).ceil() as usize
}

/// Pr{M(M₀(t)) = n}, n ≤ n_max, by summing over the inner value.
pub fn igcp_pmf(outer: &[f64], inner: &[f64], t: f64, n_max: usize) -> Vec<f64> {
    let w = gcp_pmf(inner, t, cutoff(inner, t));
    let mut out = vec![0.0; n_max + 1];
    for (m, &wm) in w.iter().enumerate() {
        if wm < 1e-300 {
            continue;
        }
        let p = gcp_pmf(outer, m as f64, n_max);
        for n in 0..=n_max {
            out[n] += wm * p[n];
        }
    }
    out
}

/// S = (Σ jλ_j)(Σ j₀μ_{j₀}).
pub fn s_const(outer: &[f64], inner: &[f64]) -> f64 {
    first_moment(outer) * first_moment(inner)
}

/// T = (Σ jλ_j)² Σ j₀²μ_{j₀} + (Σ j²λ_j)(Σ j₀μ_{j₀}).
pub fn t_const(outer: &[f64], inner: &[f64]) -> f64 {
    first_moment(outer).powi(2) * second_moment(inner) + second_moment(outer) * first_moment(inner)
}

/// Jump intensities of M(M₀(t)) at 1..=n_max (index 0 unused).
pub fn levy_measure(outer: &[f64], inner: &[f64], n_max: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    for (i, &mu) in inner.iter().enumerate() {
        let p = gcp_pmf(outer, (i + 1) as f64, n_max);
        for n in 1..=n_max {
            out[n] += mu * p[n];
        }
    }
    out
}

/// Total jump rate Σ μ_{j₀}(1 − e^{−j₀Σλ}).
pub fn jump_rate(outer: &[f64], inner: &[f64]) -> f64 {
    let lam: f64 = outer.iter().sum();
    inner.iter().enumerate().map(|(i, &mu)| mu * (1.0 - (-((i + 1) as f64) * lam).exp())).sum()
}

/// log E u^{M̂(t)} for u > 0.
pub fn igcp_log_pgf(outer: &[f64], inner: &[f64], u: f64, t: f64) -> f64 {
    let lam: f64 = outer.iter().sum();
    let g: f64 = outer.iter().enumerate().map(|(i, &l)| l * u.powi(i as i32 + 1)).sum::<f64>() - lam;
    inner.iter().enumerate().map(|(i, &mu)| mu * t * (((i + 1) as f64 * g).exp() - 1.0)).sum()
}

/// Forward equations of a compound Poisson count with total jump rate
/// `total` and jump intensities `levy[1..]`, integrated by classical RK4
/// from a point mass at 0.
pub fn forward_equation_rk4(levy: &[f64], total: f64, n_max: usize, outputs: &[f64], step: f64) -> Vec<Vec<f64>> {
    let rhs = |p: &[f64]| -> Vec<f64> {
        (0..=n_max)
            .map(|n| {
                let mut d = -total * p[n];
                for m in 1..=n.min(levy.len() - 1) {
                    d += levy[m] * p[n - m];
                }
                d
            })
            .collect()
    };
    let mut p = vec![0.0; n_max + 1];
    p[0] = 1.0;
    let mut t = 0.0;
    let mut out = Vec::new();
    for &target in outputs {
        while t < target - 1e-15 {
            let h = step.min(target - t);
            let k1 = rhs(&p);
            let y2: Vec<f64> = p.iter().zip(&k1).map(|(a, b)| a + 0.5 * h * b).collect();
            let k2 = rhs(&y2);
            let y3: Vec<f64> = p.iter().zip(&k2).map(|(a, b)| a + 0.5 * h * b).collect();
            let k3 = rhs(&y3);
            let y4: Vec<f64> = p.iter().zip(&k3).map(|(a, b)| a + h * b).collect();
            let k4 = rhs(&y4);
            for n in 0..=n_max {
                p[n] += h / 6.0 * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n]);
            }
            t += h;
        }
        out.push(p.clone());
    }
    out
}

/// n-fold convolution powers of a (defective) sequence, states 0..=n_max.
pub fn convolution_powers(base: &[f64], n_max: usize) -> Vec<Vec<f64>> {
    let mut powers = Vec::with_capacity(n_max + 1);
    let mut cur = vec![0.0; n_max + 1];
    cur[0] = 1.0;
    powers.push(cur.clone());
    for _ in 1..=n_max {
        let mut next = vec![0.0; n_max + 1];
        for a in 0..=n_max {
            if cur[a] == 0.0 {
                continue;
            }
            for b in 1..base.len().min(n_max + 1 - a) {
                next[a + b] += cur[a] * base[b];
            }
        }
        cur = next;
        powers.push(cur.clone());
    }
    powers
}

/// E[Y^c e^{−νY}]/c! for the inverse α-stable subordinator at time t, by
/// term-wise differentiation of E_α(−ν tᵅ).
pub fn inverse_stable_weighted_moment(alpha: f64, nu: f64, c: u32, t: f64) -> f64 {
    let x = nu * t.powf(alpha);
    let mut acc = 0.0;
    let mut binom = 1.0;
    for k in 0..400u32 {
        if k > 0 {
            binom *= (c + k) as f64 / k as f64;
        }
        let term = binom * (-x).powi(k as i32) * t.powf(alpha * c as f64) / libm::tgamma(alpha * (k + c) as f64 + 1.0);
        acc += term;
        if k > 10 && term.abs() < 1e-18 * acc.abs().max(1e-300) {
            break;
        }
    }
    acc
}

/// Pr{M(M₀(Yᵅ(t))) = n}, n ≤ n_max, through the compound Poisson form of
/// the base process.
pub fn tc_igcp_pmf(outer: &[f64], inner: &[f64], alpha: f64, t: f64, n_max: usize) -> Vec<f64> {
    let levy = levy_measure(outer, inner, n_max);
    let nu = jump_rate(outer, inner);
    let powers = convolution_powers(&levy, n_max);
    (0..=n_max)
        .map(|n| (0..=n).map(|c| powers[c][n] * inverse_stable_weighted_moment(alpha, nu, c as u32, t)).sum())
        .collect()
}

/// Touchard polynomial by its defining series.
pub fn bell_series(n: u32, x: f64) -> f64 {
    let mut acc = if n == 0 { 1.0 } else { 0.0 };
    for r in 1..600u64 {
        let ln = n as f64 * (r as f64).ln() + r as f64 * x.ln() - ln_fact(r);
        acc += ln.exp();
    }
    (-x).exp() * acc
}

/// Composite Simpson rule on [a, b] with an even number of intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}
