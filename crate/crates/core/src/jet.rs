//! Truncated Taylor series in one variable, usable wherever a [`Scalar`] is.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::phi::Scalar;

pub const JET_TERMS: usize = 4;

/// `sum_k c[k] t^k + O(t^JET_TERMS)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet(pub [f64; JET_TERMS]);

impl Jet {
    pub fn constant(x: f64) -> Self {
        let mut c = [0.0; JET_TERMS];
        c[0] = x;
        Jet(c)
    }

    /// The expansion variable `t` itself.
    pub fn variable() -> Self {
        let mut c = [0.0; JET_TERMS];
        c[1] = 1.0;
        Jet(c)
    }

    pub fn coefficients(&self) -> [f64; JET_TERMS] {
        self.0
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet(std::array::from_fn(|k| self.0[k] + o.0[k]))
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet(std::array::from_fn(|k| self.0[k] - o.0[k]))
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet(self.0.map(|x| -x))
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet(std::array::from_fn(|k| (0..=k).map(|j| self.0[j] * o.0[k - j]).sum()))
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        let mut q = [0.0; JET_TERMS];
        for k in 0..JET_TERMS {
            let acc: f64 = (1..=k).map(|j| o.0[j] * q[k - j]).sum();
            q[k] = (self.0[k] - acc) / o.0[0];
        }
        Jet(q)
    }
}

impl Scalar for Jet {
    fn from_f64(x: f64) -> Self {
        Jet::constant(x)
    }

    fn sqrt(self) -> Self {
        let mut r = [0.0; JET_TERMS];
        r[0] = self.0[0].sqrt();
        for k in 1..JET_TERMS {
            let acc: f64 = (1..k).map(|j| r[j] * r[k - j]).sum();
            r[k] = (self.0[k] - acc) / (2.0 * r[0]);
        }
        Jet(r)
    }

    fn sin(self) -> Self {
        sin_cos(self).0
    }

    fn cos(self) -> Self {
        sin_cos(self).1
    }

    fn modulus(self) -> f64 {
        self.0[0].abs()
    }

    fn is_finite(self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

fn sin_cos(u: Jet) -> (Jet, Jet) {
    let mut s = [0.0; JET_TERMS];
    let mut c = [0.0; JET_TERMS];
    s[0] = u.0[0].sin();
    c[0] = u.0[0].cos();
    for k in 1..JET_TERMS {
        let kf = k as f64;
        s[k] = (1..=k).map(|j| j as f64 * u.0[j] * c[k - j]).sum::<f64>() / kf;
        c[k] = -(1..=k).map(|j| j as f64 * u.0[j] * s[k - j]).sum::<f64>() / kf;
    }
    (Jet(s), Jet(c))
}
