//! Benchmark systems: a sine-Gordon lattice, the Duffing equation with an
//! exact elliptic solution, and a two-degree-of-freedom stellar orbit model.

pub mod elliptic;

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::integrator::{Potential, Problem, State};

pub use elliptic::{complete_first_kind, sn_cn_dn, EllipticModulus};

/// Problem names accepted by [`make_problem`].
pub const PROBLEM_NAMES: [&str; 3] = ["sine-gordon", "duffing", "stellar"];

/// Lattice spacing of the sine-Gordon semi-discretisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Spacing {
    /// `dx = 1/N`.
    #[default]
    OverN,
    /// `dx = 2/N`, the spacing of `N` periodic points on `(-1, 1)`.
    TwoOverN,
}

impl Spacing {
    pub fn dx(self, n: usize) -> f64 {
        match self {
            Spacing::OverN => 1.0 / n as f64,
            Spacing::TwoOverN => 2.0 / n as f64,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Spacing::OverN => "1/N",
            Spacing::TwoOverN => "2/N",
        }
    }
}

/// Parameters of all three problems; each problem reads its own fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemParams {
    pub n: usize,
    pub spacing: Spacing,
    pub k: f64,
    pub a: f64,
    pub b: f64,
    pub eps: f64,
}

impl Default for ProblemParams {
    fn default() -> Self {
        Self { n: 32, spacing: Spacing::OverN, k: 0.03, a: 2.0, b: 1.0, eps: 1e-3 }
    }
}

/// Build a problem by name.
pub fn make_problem(name: &str, params: &ProblemParams) -> Result<Problem> {
    match name {
        "sine-gordon" => make_sine_gordon(params.n, params.spacing),
        "duffing" => make_duffing(params.k),
        "stellar" => make_stellar(params.a, params.b, params.eps),
        other => Err(Error::InvalidParameter(format!(
            "unknown problem `{other}` (expected one of {})",
            PROBLEM_NAMES.join(", ")
        ))),
    }
}

#[derive(Debug, Clone, Copy)]
struct SineGordon;

impl Potential for SineGordon {
    fn value(&self, q: &DVector<f64>) -> f64 {
        -q.iter().map(|x| x.cos()).sum::<f64>()
    }
    fn gradient(&self, q: &DVector<f64>) -> DVector<f64> {
        q.map(f64::sin)
    }
}

/// Periodic second-difference matrix `(1/dx^2) circ(-1, 2, -1)`.
pub fn periodic_laplacian(n: usize, dx: f64) -> DMatrix<f64> {
    let w = 1.0 / (dx * dx);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] += 2.0 * w;
        m[(i, (i + 1) % n)] -= w;
        m[(i, (i + n - 1) % n)] -= w;
    }
    m
}

/// Sine-Gordon lattice `u'' = u_xx - sin u` with `N` periodic points,
/// `q0 = (pi, ..., pi)` and `p0_i = sqrt(N) (0.01 + sin(2 pi i / N))`.
pub fn make_sine_gordon(n: usize, spacing: Spacing) -> Result<Problem> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("N must be at least 2, got {n}")));
    }
    let m = periodic_laplacian(n, spacing.dx(n));
    let root = (n as f64).sqrt();
    let q0 = DVector::from_element(n, PI);
    let p0 = DVector::from_fn(n, |i, _| root * (0.01 + (2.0 * PI * (i + 1) as f64 / n as f64).sin()));
    Problem::new(
        format!("sine-gordon(N={n}, dx={})", spacing.label()),
        m,
        Arc::new(SineGordon),
        State::new(0.0, q0, p0),
    )
}

#[derive(Debug, Clone, Copy)]
struct Duffing {
    k2: f64,
}

impl Potential for Duffing {
    fn value(&self, q: &DVector<f64>) -> f64 {
        let x = q[0];
        -self.k2 * (0.5 * x.powi(4) - 0.5 * x * x)
    }
    fn gradient(&self, q: &DVector<f64>) -> DVector<f64> {
        let x = q[0];
        DVector::from_element(1, self.k2 * (x - 2.0 * x * x * x))
    }
}

/// Duffing equation `q'' + 100 q = k^2 (2 q^3 - q)`, `(q0, p0) = (0, 10)`,
/// with exact solution `q(t) = sn(10 t, k/10)`.
pub fn make_duffing(k: f64) -> Result<Problem> {
    if !(0.0..10.0).contains(&k) {
        return Err(Error::InvalidParameter(format!("k must lie in [0, 10), got {k}")));
    }
    let modulus = EllipticModulus::new(k / 10.0)?;
    let problem = Problem::new(
        format!("duffing(k={k})"),
        DMatrix::from_element(1, 1, 100.0),
        Arc::new(Duffing { k2: k * k }),
        State::new(0.0, DVector::from_element(1, 0.0), DVector::from_element(1, 10.0)),
    )?;
    Ok(problem.with_reference(Arc::new(move |t| {
        let (sn, cn, dn) = modulus.sn_cn_dn(10.0 * t);
        (DVector::from_element(1, sn), DVector::from_element(1, 10.0 * cn * dn))
    })))
}

/// `sn(10 t, k/10)`.
pub fn duffing_reference(t: f64, k: f64) -> Result<f64> {
    Ok(EllipticModulus::new(k / 10.0)?.sn_cn_dn(10.0 * t).0)
}

#[derive(Debug, Clone, Copy)]
struct Stellar {
    eps: f64,
}

impl Potential for Stellar {
    fn value(&self, q: &DVector<f64>) -> f64 {
        -self.eps * q[0] * q[1] * q[1]
    }
    fn gradient(&self, q: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![-self.eps * q[1] * q[1], -2.0 * self.eps * q[0] * q[1]])
    }
}

/// Stellar orbit model with `M = diag(a^2, b^2)`, `U = -eps q1 q2^2` and
/// `(q0, p0) = ((1, 1), (0, 0))`.
pub fn make_stellar(a: f64, b: f64, eps: f64) -> Result<Problem> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "need a, b > 0 and finite eps, got a = {a}, b = {b}, eps = {eps}"
        )));
    }
    Problem::new(
        format!("stellar(a={a}, b={b}, eps={eps})"),
        DMatrix::from_diagonal(&DVector::from_vec(vec![a * a, b * b])),
        Arc::new(Stellar { eps }),
        State::new(0.0, DVector::from_vec(vec![1.0, 1.0]), DVector::zeros(2)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fd_gradient(p: &Problem, q: &DVector<f64>) -> DVector<f64> {
        let pot = p.potential();
        DVector::from_fn(q.len(), |i, _| {
            let step = 1e-6 * (1.0 + q[i].abs());
            let mut up = q.clone();
            let mut down = q.clone();
            up[i] += step;
            down[i] -= step;
            (pot.value(&up) - pot.value(&down)) / (2.0 * step)
        })
    }

    #[test]
    fn sine_gordon_construction() {
        let p = make_sine_gordon(2, Spacing::OverN).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[8.0, -8.0, -8.0, 8.0]);
        assert_eq!(p.matrix(), &want);

        let p = make_sine_gordon(32, Spacing::OverN).unwrap();
        let init = p.initial();
        let kinetic = 0.5 * init.p.dot(&init.p);
        let h = p.hamiltonian(&init.q, &init.p);
        assert!((h - (kinetic + 32.0)).abs() < 1e-9 * h);
        let zero = DVector::zeros(32);
        assert_eq!(p.gradient(&zero), zero);
        assert_eq!(p.potential().value(&zero), -32.0);
        assert!(make_sine_gordon(1, Spacing::OverN).is_err());
    }

    #[test]
    fn sine_gordon_spectrum() {
        for spacing in [Spacing::OverN, Spacing::TwoOverN] {
            let n = 32;
            let p = make_sine_gordon(n, spacing).unwrap();
            let dx = spacing.dx(n);
            let mut want: Vec<f64> = (0..n)
                .map(|m| 4.0 / (dx * dx) * (PI * m as f64 / n as f64).sin().powi(2))
                .collect();
            want.sort_by(f64::total_cmp);
            for (g, w) in p.spectral().eigenvalues().iter().zip(&want) {
                assert!((g - w).abs() <= 1e-9 * w.max(1.0));
            }
            let kernel = p.spectral().basis().column(0).abs();
            let flat = 1.0 / (n as f64).sqrt();
            assert!(kernel.iter().all(|x| (x - flat).abs() < 1e-12));
        }
    }

    #[test]
    fn duffing_construction() {
        let p = make_duffing(0.0).unwrap();
        let q = DVector::from_element(1, 0.4);
        let pv = DVector::from_element(1, 1.5);
        assert!((p.hamiltonian(&q, &pv) - (0.5 * 2.25 + 50.0 * 0.16)).abs() < 1e-14);
        let p = make_duffing(0.03).unwrap();
        let init = p.initial();
        assert_eq!(p.hamiltonian(&init.q, &init.p), 50.0);
        let q = DVector::from_element(1, 0.7);
        let fd = fd_gradient(&p, &q);
        assert!((fd[0] - p.gradient(&q)[0]).abs() < 1e-8);
        assert!(make_duffing(10.0).is_err());
        assert!(make_duffing(-1.0).is_err());
    }

    #[test]
    fn duffing_reference_values() {
        assert_eq!(duffing_reference(0.0, 0.03).unwrap(), 0.0);
        for &t in &[0.1, 1.7, 10.0] {
            assert!((duffing_reference(t, 0.0).unwrap() - (10.0 * t).sin()).abs() < 1e-15);
        }
        let p = make_duffing(0.03).unwrap();
        let (q, v) = (p.reference().unwrap())(0.0);
        assert_eq!((q[0], v[0]), (0.0, 10.0));
    }

    #[test]
    fn duffing_reference_solves_the_ode() {
        let k = 0.03;
        let dt = 1e-4;
        for i in 1..50 {
            let t = 0.2 * i as f64;
            let f = |t: f64| duffing_reference(t, k).unwrap();
            let sn = f(t);
            let second = (f(t + dt) - 2.0 * sn + f(t - dt)) / (dt * dt);
            let residual = second + 100.0 * sn - k * k * (2.0 * sn.powi(3) - sn);
            // Truncation error of the difference quotient is dt^2/12 |q''''| ~ 1e-5.
            assert!(residual.abs() < 1e-4, "t={t}: {residual}");
        }
    }

    #[test]
    fn stellar_construction() {
        let p = make_stellar(2.0, 1.0, 0.0).unwrap();
        let init = p.initial();
        assert_eq!(p.hamiltonian(&init.q, &init.p), 2.5);
        let p = make_stellar(2.0, 1.0, 1e-3).unwrap();
        assert!((p.hamiltonian(&init.q, &init.p) - (2.5 - 1e-3)).abs() < 1e-15);
        // q1'' = -(M q + grad U)_1 = -4 q1 + eps q2^2.
        let accel = -(p.matrix() * &init.q + p.gradient(&init.q));
        assert!((accel[0] + 4.0 - 1e-3).abs() < 1e-15);
        assert!(make_stellar(0.0, 1.0, 1e-3).is_err());
    }

    #[test]
    fn lookup_by_name() {
        let params = ProblemParams::default();
        for name in PROBLEM_NAMES {
            assert!(make_problem(name, &params).is_ok());
        }
        assert!(make_problem("fpu", &params).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]
        #[test]
        fn gradients_match_finite_differences(
            xs in proptest::collection::vec(-2.0f64..2.0, 32),
            which in 0usize..3,
        ) {
            let p = make_problem(PROBLEM_NAMES[which], &ProblemParams::default()).unwrap();
            let q = DVector::from_iterator(p.dim(), xs.into_iter().take(p.dim()));
            let exact = p.gradient(&q);
            let fd = fd_gradient(&p, &q);
            prop_assert!((&exact - &fd).amax() <= 1e-6 * (1.0 + exact.amax()));
        }
    }
}
