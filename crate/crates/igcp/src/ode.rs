//! Adaptive Dormand-Prince 5(4) integrator for the forward equations.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct OdeConfig<T> {
    pub atol: T,
    pub rtol: T,
    pub h_init: T,
    pub h_min: T,
    pub max_steps: usize,
}

impl<T: Real> Default for OdeConfig<T> {
    fn default() -> Self {
        Self { atol: T::lit(1e-9), rtol: T::lit(1e-9), h_init: T::lit(1e-3), h_min: T::lit(1e-14), max_steps: 1_000_000 }
    }
}

const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate y' = f(t, y) from (t0, y0), returning the state at each of the
/// increasing `outputs` (all ≥ t0).
pub fn integrate<T: Real, F>(f: F, t0: T, y0: &[T], outputs: &[T], cfg: &OdeConfig<T>) -> Result<Vec<Vec<T>>>
where
    F: Fn(T, &[T], &mut [T]),
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut h = cfg.h_init;
    let mut k: Vec<Vec<T>> = vec![vec![T::zero(); n]; 7];
    let mut tmp = vec![T::zero(); n];
    let mut y5 = vec![T::zero(); n];
    let mut out = Vec::with_capacity(outputs.len());
    let mut steps = 0usize;
    for &target in outputs {
        if target < t {
            return Err(Error::Integration(format!("output time {target} precedes current time {t}")));
        }
        while t < target {
            steps += 1;
            if steps > cfg.max_steps {
                return Err(Error::Integration("step limit reached".into()));
            }
            let last = t + h >= target;
            let step = if last { target - t } else { h };
            f(t, &y, &mut k[0]);
            for s in 0..6 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (r, a) in A[s].iter().enumerate().take(s + 1) {
                        if *a != 0.0 {
                            acc += step * T::lit(*a) * k[r][i];
                        }
                    }
                    tmp[i] = acc;
                }
                f(t + T::lit(C[s]) * step, &tmp, &mut k[s + 1]);
            }
            let mut err = T::zero();
            for i in 0..n {
                let mut hi = T::zero();
                let mut lo = T::zero();
                for r in 0..7 {
                    hi += T::lit(B5[r]) * k[r][i];
                    lo += T::lit(B4[r]) * k[r][i];
                }
                y5[i] = y[i] + step * hi;
                let scale = cfg.atol + cfg.rtol * y[i].abs().max(y5[i].abs());
                err = err.max((step * (hi - lo)).abs() / scale);
            }
            if err <= T::one() {
                t = if last { target } else { t + step };
                y.copy_from_slice(&y5);
            }
            let factor = if err == T::zero() {
                T::lit(5.0)
            } else {
                (T::lit(0.9) * err.powf(T::lit(-0.2))).min(T::lit(5.0)).max(T::lit(0.2))
            };
            if err <= T::one() {
                if !last {
                    h = step * factor;
                }
            } else {
                h = step * factor;
            }
            if h < cfg.h_min {
                return Err(Error::Integration(format!("step size underflow at t = {t}")));
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}
