//! The entire functions
//!
//! ```text
//! phi_j(v) = sum_{k >= 0} (-v)^k / (2k + j)!
//! ```
//!
//! so that `phi_0(v) = cos(sqrt v)` and `phi_1(v) = sin(sqrt v) / sqrt v`.
//! They are the building blocks of every matrix-valued coefficient of an
//! ERKN method, evaluated at the (non-negative) eigenvalues of `V = h^2 M`.
//!
//! Evaluation switches between a truncated Taylor series close to the origin
//! and the trigonometric closed form (plus the recurrence
//! `phi_{j+2}(v) = (1/j! - phi_j(v)) / v`) further out. The recurrence
//! amplifies rounding by roughly `(j+2)(j+1)/v` per step, so orders `j >= 2`
//! keep the series up to a wider crossover than `phi_0`/`phi_1`.
//!
//! All routines are generic over [`Scalar`], which lets the same code run on
//! complex arguments (used to extract Taylor coefficients by contour
//! integration).

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Highest supported order `j`.
pub const MAX_ORDER: usize = 6;

/// Series/closed-form crossover for `phi_0` and `phi_1`.
pub const CROSSOVER: f64 = 1e-2;

/// Series/recurrence crossover for `phi_j`, `j >= 2`.
pub const HIGH_ORDER_CROSSOVER: f64 = 4.0;

/// Number of Taylor terms used below the crossover.
pub const SERIES_TERMS: usize = 12;

/// Field operations needed to evaluate the phi-functions and the method
/// coefficients built from them. Implemented for `f64` and `Complex64`.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    /// Absolute value (modulus for complex numbers).
    fn modulus(self) -> f64;
    fn is_finite(self) -> bool;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn scale(self, x: f64) -> Self {
        self * Self::from_f64(x)
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Scalar for Complex64 {
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn sqrt(self) -> Self {
        Complex64::sqrt(self)
    }
    fn sin(self) -> Self {
        Complex64::sin(self)
    }
    fn cos(self) -> Self {
        Complex64::cos(self)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn is_finite(self) -> bool {
        Complex64::is_finite(self)
    }
}

/// A scalar analytic function of `v`, evaluable on any [`Scalar`].
///
/// Coefficient functions may fail (denominator guards), hence `Result`.
pub trait ScalarAnalyticFn {
    fn eval<T: Scalar>(&self, v: T) -> Result<T>;
}

/// `phi_j` as a [`ScalarAnalyticFn`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Phi(pub usize);

impl ScalarAnalyticFn for Phi {
    fn eval<T: Scalar>(&self, v: T) -> Result<T> {
        if self.0 > MAX_ORDER {
            return Err(Error::PhiOrder(self.0));
        }
        Ok(phi_all(v)[self.0])
    }
}

const INV_FACTORIAL_LEN: usize = 2 * 40 + MAX_ORDER + 1;

fn inv_factorials() -> &'static [f64; INV_FACTORIAL_LEN] {
    use std::sync::OnceLock;
    static TABLE: OnceLock<[f64; INV_FACTORIAL_LEN]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [1.0; INV_FACTORIAL_LEN];
        for n in 1..INV_FACTORIAL_LEN {
            t[n] = t[n - 1] / n as f64;
        }
        t
    })
}

/// `1 / n!` for `n < 87`.
pub fn inv_factorial(n: usize) -> f64 {
    inv_factorials()[n]
}

/// Crossover below which `phi_j` is summed as a series.
pub fn crossover(j: usize) -> f64 {
    if j < 2 {
        CROSSOVER
    } else {
        HIGH_ORDER_CROSSOVER
    }
}

/// Truncated series `sum_{k < terms} (-v)^k / (2k + j)!`, summed by Horner's rule.
///
/// `terms` is capped at 40.
pub fn phi_series<T: Scalar>(j: usize, v: T, terms: usize) -> T {
    let table = inv_factorials();
    let terms = terms.clamp(1, 40);
    let mut acc = T::from_f64(table[2 * (terms - 1) + j]);
    for k in (0..terms - 1).rev() {
        acc = T::from_f64(table[2 * k + j]) - v * acc;
    }
    acc
}

/// Closed forms `(cos sqrt v, sin sqrt v / sqrt v)`; not meant for `v` near 0.
pub fn phi01_closed<T: Scalar>(v: T) -> (T, T) {
    let root = v.sqrt();
    (root.cos(), root.sin() / root)
}

/// `phi_j(v)` from the closed form and the downward recurrence only.
///
/// Exposed for seam tests; loses accuracy as `v -> 0` for `j >= 2`.
pub fn phi_closed<T: Scalar>(j: usize, v: T) -> T {
    let (p0, p1) = phi01_closed(v);
    let mut vals = [p0, p1, T::zero(), T::zero(), T::zero(), T::zero(), T::zero()];
    for k in 2..=j.min(MAX_ORDER) {
        vals[k] = (T::from_f64(inv_factorial(k - 2)) - vals[k - 2]) / v;
    }
    vals[j.min(MAX_ORDER)]
}

/// All of `phi_0(v) ..= phi_6(v)` at once.
pub fn phi_all<T: Scalar>(v: T) -> [T; MAX_ORDER + 1] {
    let m = v.modulus();
    let mut out = [T::zero(); MAX_ORDER + 1];
    if m < CROSSOVER {
        for (j, slot) in out.iter_mut().enumerate() {
            *slot = phi_series(j, v, SERIES_TERMS);
        }
        return out;
    }
    let (p0, p1) = phi01_closed(v);
    out[0] = p0;
    out[1] = p1;
    if m < HIGH_ORDER_CROSSOVER {
        for (j, slot) in out.iter_mut().enumerate().skip(2) {
            *slot = phi_series(j, v, SERIES_TERMS);
        }
    } else {
        for j in 2..=MAX_ORDER {
            out[j] = (T::from_f64(inv_factorial(j - 2)) - out[j - 2]) / v;
        }
    }
    out
}

/// `phi_j(v)` for `j` in `0..=6` and `v >= 0`.
pub fn phi_scalar(j: usize, v: f64) -> Result<f64> {
    if j > MAX_ORDER {
        return Err(Error::PhiOrder(j));
    }
    if v.is_nan() || v < 0.0 {
        return Err(Error::NegativeArgument(v));
    }
    Ok(phi_all(v)[j])
}
