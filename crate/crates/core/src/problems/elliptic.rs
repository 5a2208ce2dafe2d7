//! Jacobi elliptic functions for moduli `k` in `[0, 1)`.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

/// Below this modulus the functions are their first-order expansion in `k^2`.
const SMALL_MODULUS: f64 = 1e-10;
const MAX_LANDEN: usize = 32;

/// A Jacobi modulus together with its complete elliptic integral `K(k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticModulus {
    k: f64,
    quarter_period: f64,
}

impl EllipticModulus {
    pub fn new(k: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&k) {
            return Err(Error::InvalidParameter(format!("modulus must lie in [0, 1), got {k}")));
        }
        Ok(Self { k, quarter_period: complete_first_kind(k) })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// `K(k)`.
    pub fn quarter_period(&self) -> f64 {
        self.quarter_period
    }

    /// `(sn, cn, dn)(u, k)`.
    pub fn sn_cn_dn(&self, u: f64) -> (f64, f64, f64) {
        sn_cn_dn(u, self.k)
    }
}

/// `K(k) = pi / (2 AGM(1, sqrt(1 - k^2)))`.
pub fn complete_first_kind(k: f64) -> f64 {
    let mut a = 1.0f64;
    let mut b = (1.0 - k * k).sqrt();
    for _ in 0..MAX_LANDEN {
        if (a - b).abs() <= 4.0 * f64::EPSILON * a {
            break;
        }
        let next = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = next;
    }
    FRAC_PI_2 / a
}

/// Jacobi `sn`, `cn`, `dn` by the descending Landen transformation.
///
/// `k_{n+1} = k_n^2 / (1 + k_n')^2`, `u_{n+1} = u_n / (1 + k_{n+1})`; once
/// the modulus is negligible the trigonometric limit is unwound with
/// `sn = (1 + k1) sn1 / (1 + k1 sn1^2)` and `cn = cn1 dn1 / (1 + k1 sn1^2)`.
pub fn sn_cn_dn(u: f64, k: f64) -> (f64, f64, f64) {
    let mut moduli = Vec::new();
    let mut kn = k;
    let mut un = u;
    while kn >= SMALL_MODULUS && moduli.len() < MAX_LANDEN {
        let kp = (1.0 - kn * kn).sqrt();
        let next = kn * kn / ((1.0 + kp) * (1.0 + kp));
        un /= 1.0 + next;
        moduli.push(next);
        kn = next;
    }
    let (s, c) = un.sin_cos();
    let drift = 0.25 * kn * kn * (un - s * c);
    let mut sn = s - drift * c;
    let mut cn = c + drift * s;
    let mut dn = 1.0 - 0.5 * kn * kn * s * s;
    for level in (0..moduli.len()).rev() {
        let k1 = moduli[level];
        let k_outer = if level == 0 { k } else { moduli[level - 1] };
        let den = 1.0 + k1 * sn * sn;
        let next_sn = (1.0 + k1) * sn / den;
        let next_cn = cn * dn / den;
        sn = next_sn;
        cn = next_cn;
        dn = (1.0 - k_outer * k_outer * sn * sn).sqrt();
    }
    (sn, cn, dn)
}
