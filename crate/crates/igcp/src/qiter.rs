//! q-iterated GCP M(M₁(M₂(…M_q(t)…))). Layer 1 feeds the outer process M
//! directly; layer q runs on physical time.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};
use crate::gcp::{gcp_pmf_vector, sample_gcp_value, GcpParams};
use crate::igcp::{bell_form_pmf, IgcpParams};
use crate::kernels::{count_compositions, count_weighted_partitions, SeriesResult, WORK_BUDGET};
use crate::scalar::{Compensated, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct QIterParams<T = f64> {
    pub outer: GcpParams<T>,
    pub layers: Vec<GcpParams<T>>,
}

impl<T: Real> QIterParams<T> {
    pub fn new(outer: GcpParams<T>, layers: Vec<GcpParams<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(invalid("need at least one inner layer"));
        }
        outer.validate()?;
        for l in &layers {
            l.validate()?;
        }
        Ok(Self { outer, layers })
    }

    pub fn q(&self) -> usize {
        self.layers.len()
    }
}

/// Pr{M̂^q(t) = n} by conditioning level by level on the integer output
/// of each layer, innermost level evaluated in Bell form.
pub fn qiter_pmf<T: Real>(params: &QIterParams<T>, n: u64, t: T, budget: Option<u64>) -> Result<SeriesResult<T>> {
    let budget = budget.unwrap_or(WORK_BUDGET);
    if !(t >= T::zero()) {
        return Err(domain(format!("time must be non-negative, got {t}")));
    }
    if t == T::zero() {
        return Ok(SeriesResult::exact(if n == 0 { T::one() } else { T::zero() }, 1));
    }
    let q = params.q();
    if q == 1 {
        let ig = IgcpParams { outer: params.outer.clone(), inner: params.layers[0].clone() };
        return crate::igcp::igcp_pmf_with_budget(&ig, n, t, budget);
    }
    // ranges[i] bounds the output of layer i+1 (0-based layers[i]).
    let mut ranges = vec![0usize; q];
    let mut times = vec![T::zero(); q];
    times[q - 1] = t;
    ranges[q - 1] = params.layers[q - 1].truncation(t);
    for i in (1..q - 1).rev() {
        times[i] = T::from_count(ranges[i + 1] as u64);
        ranges[i] = params.layers[i].truncation(times[i]);
    }
    // Work estimate.
    let bell_cost = {
        let mut c = 0u64;
        let k0 = params.layers[0].k();
        crate::kernels::for_each_weighted_partition(params.outer.k(), n as u32, |x| {
            c = c.saturating_add(count_compositions(x.iter().sum(), k0));
        });
        c.max(count_weighted_partitions(params.outer.k(), n as u32))
    };
    let mut needed = (ranges[1] as u64 + 1).saturating_mul(bell_cost);
    for i in 1..q {
        let upper = if i + 1 < q { ranges[i + 1] as u64 + 1 } else { 1 };
        needed = needed.saturating_add((ranges[i] as u64 + 1).saturating_mul(upper));
    }
    if needed > budget {
        return Err(Error::Budget { needed, limit: budget });
    }
    // level[s] = Pr{M(M₁(s)) = n} for s = 0..=ranges[1].
    let mut level: Vec<T> = Vec::with_capacity(ranges[1] + 1);
    for s in 0..=ranges[1] {
        let cum: Vec<T> = params.layers[0].rates.iter().map(|&m| m * T::from_count(s as u64)).collect();
        level.push(bell_form_pmf(&params.outer, &cum, n, budget)?.value);
    }
    let mut tail = T::zero();
    for i in 1..q {
        let layer = &params.layers[i];
        let eval_times: Vec<T> = if i + 1 < q {
            (0..=ranges[i + 1]).map(|s| T::from_count(s as u64)).collect()
        } else {
            vec![t]
        };
        tail += layer.tail_bound(ranges[i], times[i]);
        let next: Vec<T> = eval_times
            .iter()
            .map(|&s| {
                let w = gcp_pmf_vector(layer, s, ranges[i]);
                let mut acc = Compensated::new();
                for (sp, &p) in w.probs.iter().enumerate() {
                    acc.add(level[sp] * p);
                }
                acc.value()
            })
            .collect();
        level = next;
    }
    Ok(SeriesResult { value: level[0], terms_used: needed as usize, tail_bound: tail })
}

/// Nested exponential pgf: h₀ = Σ λ_j(1 − u^j), h_i = Σ λ_{j_i}(1 − e^{−j_i h_{i−1}}),
/// result e^{−t h_q}.
pub fn qiter_pgf<T: Real>(params: &QIterParams<T>, u: T, t: T) -> Result<T> {
    if u.abs() > T::one() {
        return Err(domain(format!("pgf argument must satisfy |u| <= 1, got {u}")));
    }
    let mut h = params.outer.exponent(u);
    for layer in &params.layers {
        h = layer.exponent((-h).exp());
    }
    Ok((-t * h).exp())
}

/// (mean, variance) through Var M(X) = E X·Var M(1) + (E M(1))² Var X applied
/// from the physical-time layer outwards.
pub fn qiter_moments<T: Real>(params: &QIterParams<T>, t: T) -> (T, T) {
    let last = params.layers.last().expect("q >= 1");
    let (mut a, mut b) = (last.first_moment() * t, last.second_moment() * t);
    for layer in params.layers.iter().rev().skip(1).chain(std::iter::once(&params.outer)) {
        let m = layer.first_moment();
        let v = layer.second_moment();
        let (na, nb) = (m * a, v * a + m * m * b);
        a = na;
        b = nb;
    }
    (a, b)
}

pub fn sample_qiter_value<T: Real, R: Rng + ?Sized>(params: &QIterParams<T>, t: f64, rng: &mut R) -> u64 {
    let mut s = t;
    for layer in params.layers.iter().rev() {
        s = sample_gcp_value(layer, s, rng) as f64;
    }
    sample_gcp_value(&params.outer, s, rng)
}
