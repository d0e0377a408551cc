//! Scalar abstraction shared by the analytic code.
//!
//! Everything that evaluates a closed form, a finite sum or a truncated
//! series is generic over [`Real`]. Samplers and Monte Carlo reductions
//! work in `f64` and convert parameters at the boundary.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar usable by every analytic routine in the crate.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Natural log of |Γ(x)|.
    fn ln_gamma(self) -> Self;
    /// Γ(x).
    fn gamma(self) -> Self;
    /// Complementary error function.
    fn erfc(self) -> Self;
    /// Default relative tolerance for series truncation.
    fn series_tol() -> Self;

    /// Lossless-enough conversion of an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    /// Conversion of a count or index.
    #[inline]
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count fits the scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    fn ln_gamma(self) -> Self {
        libm::lgamma_r(self).0
    }
    fn gamma(self) -> Self {
        libm::tgamma(self)
    }
    fn erfc(self) -> Self {
        libm::erfc(self)
    }
    fn series_tol() -> Self {
        1e-12
    }
}

impl Real for f32 {
    fn ln_gamma(self) -> Self {
        libm::lgammaf_r(self).0
    }
    fn gamma(self) -> Self {
        libm::tgammaf(self)
    }
    fn erfc(self) -> Self {
        libm::erfcf(self)
    }
    fn series_tol() -> Self {
        1e-6
    }
}

/// ln(n!) for a count.
#[inline]
pub fn ln_factorial<T: Real>(n: u64) -> T {
    T::from_count(n + 1).ln_gamma()
}

/// Beta function via log-gamma.
pub fn beta_fn<T: Real>(a: T, b: T) -> T {
    (a.ln_gamma() + b.ln_gamma() - (a + b).ln_gamma()).exp()
}

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Compensated<T> {
    sum: T,
    carry: T,
}

impl<T: Real> Compensated<T> {
    pub fn new() -> Self {
        Self { sum: T::zero(), carry: T::zero() }
    }

    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum + self.carry
    }
}

/// log(Σ exp(x_i)) over a slice, robust to large magnitudes.
pub fn log_sum_exp<T: Real>(xs: &[T]) -> T {
    let m = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if m == T::neg_infinity() {
        return m;
    }
    let mut acc = Compensated::new();
    for &x in xs {
        acc.add((x - m).exp());
    }
    m + acc.value().ln()
}
