//! Time stepping with the diagonal implicit ERKN scheme
//!
//! ```text
//! Q_i     = phi_0(c_i^2 V) q + h c_i phi_1(c_i^2 V) p - h^2 sum_{j<=i} a_bar_ij(V) g(Q_j)
//! q_{n+1} = phi_0(V) q + h phi_1(V) p - h^2 sum_i b_bar_i(V) g(Q_i)
//! p_{n+1} = -h M phi_1(V) q + phi_0(V) p - h sum_i b_i(V) g(Q_i)
//! ```
//!
//! with `V = h^2 M` and `g = grad U`. Every matrix function is diagonal in
//! the eigenbasis of `M`, so a [`Stepper`] tabulates the per-mode factors
//! once for a fixed `h` and works in modal coordinates. Implicit stages are
//! solved by fixed-point iteration on `g`.
//!
//! Classical (frozen) tableaux run as the RKN method for the full force
//! `M q + g(q)`; the linear part of each implicit stage is then solved
//! exactly per mode and the iteration again acts on `g` only.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::phi::phi_all;
use crate::spectral::{spectral_decompose, SpectralCache};
use crate::tableau::MethodTableau;

/// Nonlinear part `U` of the Hamiltonian.
pub trait Potential: Send + Sync {
    fn value(&self, q: &DVector<f64>) -> f64;
    fn gradient(&self, q: &DVector<f64>) -> DVector<f64>;
}

/// `U = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPotential;

impl Potential for ZeroPotential {
    fn value(&self, _q: &DVector<f64>) -> f64 {
        0.0
    }
    fn gradient(&self, q: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(q.len())
    }
}

/// Exact solution `t -> (q(t), p(t))`.
pub type Reference = Arc<dyn Fn(f64) -> (DVector<f64>, DVector<f64>) + Send + Sync>;

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub q: DVector<f64>,
    pub p: DVector<f64>,
}

impl State {
    pub fn new(t: f64, q: DVector<f64>, p: DVector<f64>) -> Self {
        Self { t, q, p }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.q.iter().chain(self.p.iter()).all(|x| x.is_finite())
    }
}

/// `q'' + M q = -grad U(q)` together with its initial state.
#[derive(Clone)]
pub struct Problem {
    name: String,
    matrix: DMatrix<f64>,
    spectral: SpectralCache,
    potential: Arc<dyn Potential>,
    initial: State,
    reference: Option<Reference>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("eigenvalues", &self.spectral.eigenvalues())
            .field("has_reference", &self.reference.is_some())
            .finish()
    }
}

impl Problem {
    pub fn new(
        name: impl Into<String>,
        matrix: DMatrix<f64>,
        potential: Arc<dyn Potential>,
        initial: State,
    ) -> Result<Self> {
        let spectral = spectral_decompose(&matrix)?;
        let n = spectral.dim();
        for len in [initial.q.len(), initial.p.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, found: len });
            }
        }
        if !initial.is_finite() {
            return Err(Error::NonFinite("initial state".into()));
        }
        Ok(Self {
            name: name.into(),
            matrix,
            spectral,
            potential,
            initial,
            reference: None,
        })
    }

    pub fn with_reference(mut self, reference: Reference) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.spectral.dim()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn spectral(&self) -> &SpectralCache {
        &self.spectral
    }

    pub fn potential(&self) -> &dyn Potential {
        self.potential.as_ref()
    }

    pub fn initial(&self) -> &State {
        &self.initial
    }

    pub fn reference(&self) -> Option<&Reference> {
        self.reference.as_ref()
    }

    pub fn gradient(&self, q: &DVector<f64>) -> DVector<f64> {
        self.potential.gradient(q)
    }

    /// `H = p^T p / 2 + q^T M q / 2 + U(q)`.
    pub fn hamiltonian(&self, q: &DVector<f64>, p: &DVector<f64>) -> f64 {
        0.5 * p.dot(p) + 0.5 * q.dot(&(&self.matrix * q)) + self.potential.value(q)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveSettings {
    pub h: f64,
    pub t_end: f64,
    pub stage_tol: f64,
    pub max_iters: usize,
    pub record_stride: usize,
}

impl SolveSettings {
    pub const DEFAULT_STAGE_TOL: f64 = 1e-14;
    pub const DEFAULT_MAX_ITERS: usize = 50;

    pub fn new(h: f64, t_end: f64) -> Self {
        Self {
            h,
            t_end,
            stage_tol: Self::DEFAULT_STAGE_TOL,
            max_iters: Self::DEFAULT_MAX_ITERS,
            record_stride: 1,
        }
    }

    pub fn with_record_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSettings(msg));
        if !(self.h.is_finite() && self.h > 0.0) {
            return bad(format!("h must be positive, got {}", self.h));
        }
        if !self.t_end.is_finite() {
            return bad("t_end must be finite".into());
        }
        if !(self.stage_tol > 0.0 && self.stage_tol < 1e-8) {
            return bad(format!("stage_tol must lie in (0, 1e-8), got {}", self.stage_tol));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        if self.record_stride == 0 {
            return bad("record_stride must be at least 1".into());
        }
        Ok(())
    }

    /// Number of steps from `t0`; `n h` lands within `h/2` of `t_end - t0`.
    pub fn steps_from(&self, t0: f64) -> Result<usize> {
        self.validate()?;
        let span = self.t_end - t0;
        if span < -0.5 * self.h {
            return Err(Error::InvalidSettings(format!(
                "t_end = {} precedes the initial time {t0}",
                self.t_end
            )));
        }
        Ok((span / self.h).round().max(0.0) as usize)
    }
}

/// Work done by one step.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StepStats {
    /// Fixed-point iterations per stage.
    pub iterations: Vec<usize>,
    /// Gradient evaluations (one per iteration).
    pub evaluations: usize,
}

/// A converged implicit stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSolution {
    /// Stage value in physical coordinates.
    pub q: DVector<f64>,
    /// Modal coordinates of `grad U` used downstream.
    pub gradient: DVector<f64>,
    pub iterations: usize,
}

/// Per-mode factors of one method at one step size.
#[derive(Debug, Clone)]
pub struct Stepper {
    h: f64,
    stages: usize,
    spectral: SpectralCache,
    stage_tol: f64,
    max_iters: usize,
    /// Linear-force weight per mode in the stage forces: 0 for exponential
    /// methods, `lambda` for classical ones.
    kappa: Vec<f64>,
    stage_q: Vec<Vec<f64>>,
    stage_p: Vec<Vec<f64>>,
    /// `h^2 a_bar_ij` per mode, `j <= i`.
    a: Vec<Vec<Vec<f64>>>,
    /// `1 / (1 + h^2 a_bar_ii kappa)` per mode.
    stage_scale: Vec<Vec<f64>>,
    /// `h^2 b_bar_i` and `h b_i` per mode.
    bq: Vec<Vec<f64>>,
    bp: Vec<Vec<f64>>,
    qq: Vec<f64>,
    qp: Vec<f64>,
    pq: Vec<f64>,
    pp: Vec<f64>,
}

impl Stepper {
    pub fn new(method: &MethodTableau, problem: &Problem, settings: &SolveSettings) -> Result<Self> {
        settings.validate()?;
        let h = settings.h;
        let s = method.stages();
        let spectral = problem.spectral().clone();
        let n = spectral.dim();
        let classical = method.is_classical();
        let nodes = method.nodes();

        let mut me = Self {
            h,
            stages: s,
            spectral,
            stage_tol: settings.stage_tol,
            max_iters: settings.max_iters,
            kappa: vec![0.0; n],
            stage_q: vec![vec![0.0; n]; s],
            stage_p: vec![vec![0.0; n]; s],
            a: (0..s).map(|i| vec![vec![0.0; n]; i + 1]).collect(),
            stage_scale: vec![vec![1.0; n]; s],
            bq: vec![vec![0.0; n]; s],
            bp: vec![vec![0.0; n]; s],
            qq: vec![0.0; n],
            qp: vec![0.0; n],
            pq: vec![0.0; n],
            pp: vec![0.0; n],
        };
        let h2 = h * h;
        for (k, &lambda) in me.spectral.eigenvalues().to_vec().iter().enumerate() {
            let v = h2 * lambda;
            let coeffs = method.coefficients_at(v)?;
            for i in 0..s {
                for j in 0..=i {
                    me.a[i][j][k] = h2 * coeffs.a_bar[i][j];
                }
                me.bq[i][k] = h2 * coeffs.b_bar[i];
                me.bp[i][k] = h * coeffs.b[i];
            }
            if classical {
                me.kappa[k] = lambda;
                for i in 0..s {
                    me.stage_q[i][k] = 1.0;
                    me.stage_p[i][k] = h * nodes[i];
                    me.stage_scale[i][k] = 1.0 / (1.0 + me.a[i][i][k] * lambda);
                }
                me.qq[k] = 1.0;
                me.qp[k] = h;
                me.pq[k] = 0.0;
                me.pp[k] = 1.0;
            } else {
                for i in 0..s {
                    let phi = phi_all(nodes[i] * nodes[i] * v);
                    me.stage_q[i][k] = phi[0];
                    me.stage_p[i][k] = h * nodes[i] * phi[1];
                }
                let phi = phi_all(v);
                me.qq[k] = phi[0];
                me.qp[k] = h * phi[1];
                me.pq[k] = -h * lambda * phi[1];
                me.pp[k] = phi[0];
            }
        }
        Ok(me)
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Solve `Q = predictor - D_i g(Q)` by fixed-point iteration, where
    /// `predictor` is in modal coordinates and `D_i` is the scaled diagonal
    /// coefficient of stage `i`. Iteration starts from the predictor and
    /// stops once `|Q_{k+1} - Q_k|_inf <= tol (1 + |Q_k|_inf)`.
    pub fn solve_stage(
        &self,
        problem: &Problem,
        stage: usize,
        predictor: &DVector<f64>,
    ) -> Result<StageSolution> {
        if stage >= self.stages {
            return Err(Error::IndexOutOfRange(format!("stage {stage}")));
        }
        let diag: Vec<f64> = self.a[stage][stage]
            .iter()
            .zip(&self.stage_scale[stage])
            .map(|(a, s)| a * s)
            .collect();
        let mut q = self.spectral.from_modal(predictor)?;
        for iteration in 1..=self.max_iters {
            let g = self.spectral.to_modal(&problem.gradient(&q))?;
            let mut next = predictor.clone();
            for ((x, d), gk) in next.iter_mut().zip(&diag).zip(g.iter()) {
                *x -= d * gk;
            }
            let next_q = self.spectral.from_modal(&next)?;
            if !next_q.iter().all(|x| x.is_finite()) {
                return Err(Error::NonFiniteIterate { stage });
            }
            let delta = (&next_q - &q).amax();
            let scale = 1.0 + q.amax();
            q = next_q;
            if delta <= self.stage_tol * scale {
                return Ok(StageSolution { q, gradient: g, iterations: iteration });
            }
        }
        Err(Error::StageNotConverged { stage, iterations: self.max_iters })
    }

    /// One step of size `h`.
    pub fn step(&self, problem: &Problem, state: &State) -> Result<(State, StepStats)> {
        let qm = self.spectral.to_modal(&state.q)?;
        let pm = self.spectral.to_modal(&state.p)?;
        let n = qm.len();
        let mut forces: Vec<DVector<f64>> = Vec::with_capacity(self.stages);
        let mut stats = StepStats::default();
        for i in 0..self.stages {
            let mut pred = DVector::zeros(n);
            for k in 0..n {
                let mut x = self.stage_q[i][k] * qm[k] + self.stage_p[i][k] * pm[k];
                for (j, f) in forces.iter().enumerate() {
                    x -= self.a[i][j][k] * f[k];
                }
                pred[k] = x * self.stage_scale[i][k];
            }
            let sol = self.solve_stage(problem, i, &pred)?;
            stats.iterations.push(sol.iterations);
            stats.evaluations += sol.iterations;
            let stage_modal = self.spectral.to_modal(&sol.q)?;
            let force = DVector::from_fn(n, |k, _| self.kappa[k] * stage_modal[k] + sol.gradient[k]);
            forces.push(force);
        }
        let mut q1 = DVector::zeros(n);
        let mut p1 = DVector::zeros(n);
        for k in 0..n {
            let mut x = self.qq[k] * qm[k] + self.qp[k] * pm[k];
            let mut y = self.pq[k] * qm[k] + self.pp[k] * pm[k];
            for (i, f) in forces.iter().enumerate() {
                x -= self.bq[i][k] * f[k];
                y -= self.bp[i][k] * f[k];
            }
            q1[k] = x;
            p1[k] = y;
        }
        let next = State {
            t: state.t + self.h,
            q: self.spectral.from_modal(&q1)?,
            p: self.spectral.from_modal(&p1)?,
        };
        if !next.is_finite() {
            return Err(Error::NonFinite(format!("state at t = {}", next.t)));
        }
        Ok((next, stats))
    }
}

/// One step of `method` from `state`.
pub fn step(
    method: &MethodTableau,
    problem: &Problem,
    state: &State,
    settings: &SolveSettings,
) -> Result<State> {
    Ok(Stepper::new(method, problem, settings)?.step(problem, state)?.0)
}

/// Totals of an integration run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunSummary {
    pub steps: usize,
    pub evaluations: usize,
    /// Summed fixed-point iterations of each completed step.
    pub iterations: Vec<usize>,
    /// First error; the run stops there.
    pub error: Option<Error>,
}

/// Step from `initial` to `settings.t_end`, calling `observe(n, state)` on
/// the initial state (`n = 0`) and after every step. Times are `t0 + n h`.
pub fn integrate_observed<F: FnMut(usize, &State)>(
    method: &MethodTableau,
    problem: &Problem,
    initial: &State,
    settings: &SolveSettings,
    mut observe: F,
) -> Result<RunSummary> {
    let steps = settings.steps_from(initial.t)?;
    let stepper = Stepper::new(method, problem, settings)?;
    let mut summary = RunSummary::default();
    let mut state = initial.clone();
    observe(0, &state);
    for n in 1..=steps {
        match stepper.step(problem, &state) {
            Ok((mut next, stats)) => {
                next.t = initial.t + n as f64 * settings.h;
                summary.steps = n;
                summary.evaluations += stats.evaluations;
                summary.iterations.push(stats.iterations.iter().sum());
                state = next;
                observe(n, &state);
            }
            Err(e) => {
                summary.error = Some(e);
                break;
            }
        }
    }
    Ok(summary)
}

/// Recorded states of a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub hamiltonian: Vec<f64>,
    pub summary: RunSummary,
}

impl Trajectory {
    pub fn last(&self) -> Option<&State> {
        self.states.last()
    }
}

/// Integrate and record every `record_stride`-th state plus the final one.
pub fn integrate(
    method: &MethodTableau,
    problem: &Problem,
    initial: &State,
    settings: &SolveSettings,
) -> Result<Trajectory> {
    let stride = settings.record_stride;
    let mut states = Vec::new();
    let mut last = None;
    let summary = integrate_observed(method, problem, initial, settings, |n, s| {
        if n % stride == 0 {
            states.push(s.clone());
            last = None;
        } else {
            last = Some(s.clone());
        }
    })?;
    states.extend(last);
    let hamiltonian = states.iter().map(|s| problem.hamiltonian(&s.q, &s.p)).collect();
    Ok(Trajectory { states, hamiltonian, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phi::phi_scalar;
    use crate::tableau::{CoefficientId, SERKN_NAMES};

    struct Linear(f64);
    impl Potential for Linear {
        fn value(&self, q: &DVector<f64>) -> f64 {
            0.5 * self.0 * q.dot(q)
        }
        fn gradient(&self, q: &DVector<f64>) -> DVector<f64> {
            q * self.0
        }
    }

    struct Duffing(f64);
    impl Potential for Duffing {
        fn value(&self, q: &DVector<f64>) -> f64 {
            let x = q[0];
            -self.0 * self.0 * (x.powi(4) / 2.0 - x * x / 2.0)
        }
        fn gradient(&self, q: &DVector<f64>) -> DVector<f64> {
            let x = q[0];
            DVector::from_element(1, self.0 * self.0 * (x - 2.0 * x.powi(3)))
        }
    }

    fn scalar(omega2: f64, potential: Arc<dyn Potential>, q0: f64, p0: f64) -> Problem {
        let m = DMatrix::from_element(1, 1, omega2);
        let init = State::new(0.0, DVector::from_element(1, q0), DVector::from_element(1, p0));
        Problem::new("scalar", m, potential, init).unwrap()
    }

    #[test]
    fn free_oscillator_is_exact_rotation() {
        let w: f64 = 3.7;
        let prob = scalar(w * w, Arc::new(ZeroPotential), 0.4, -1.3);
        let h = 0.05;
        let settings = SolveSettings::new(h, h);
        for name in SERKN_NAMES {
            let m = MethodTableau::by_name(name).unwrap();
            let out = step(&m, &prob, prob.initial(), &settings).unwrap();
            let (q0, p0) = (0.4, -1.3);
            let q1 = (h * w).cos() * q0 + (h * w).sin() / w * p0;
            let p1 = -w * (h * w).sin() * q0 + (h * w).cos() * p0;
            assert!((out.q[0] - q1).abs() < 1e-15, "{name}");
            assert!((out.p[0] - p1).abs() < 1e-15, "{name}");
        }
    }

    #[test]
    fn zero_gradient_stage_takes_one_iteration() {
        let prob = scalar(2.0, Arc::new(ZeroPotential), 1.0, 0.0);
        let m = MethodTableau::serkn2s4();
        let st = Stepper::new(&m, &prob, &SolveSettings::new(0.1, 1.0)).unwrap();
        let pred = DVector::from_element(1, 0.7);
        let sol = st.solve_stage(&prob, 1, &pred).unwrap();
        assert_eq!(sol.iterations, 1);
        assert_eq!(sol.q, pred);
    }

    #[test]
    fn linear_stage_matches_closed_form() {
        let (eps, w2, h) = (0.3, 4.0, 0.1);
        let prob = scalar(w2, Arc::new(Linear(eps)), 1.0, 0.0);
        let m = MethodTableau::serkn3s4_1();
        let st = Stepper::new(&m, &prob, &SolveSettings::new(h, 1.0)).unwrap();
        let pred = DVector::from_element(1, 0.8);
        for i in 0..3 {
            let a = m.coefficient(CoefficientId::a_bar(i, i), h * h * w2).unwrap();
            let want = 0.8 / (1.0 + h * h * eps * a);
            let sol = st.solve_stage(&prob, i, &pred).unwrap();
            assert!((sol.q[0] - want).abs() <= 1e-14 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn duffing_stage_converges_quickly() {
        let prob = scalar(100.0, Arc::new(Duffing(0.03)), 0.0, 10.0);
        let m = MethodTableau::serkn3s4_2();
        let st = Stepper::new(&m, &prob, &SolveSettings::new(1.0 / 200.0, 1.0)).unwrap();
        let (_, stats) = st.step(&prob, prob.initial()).unwrap();
        assert!(stats.iterations.iter().all(|&k| k <= 5), "{:?}", stats.iterations);
    }

    /// Direct transcription of the scheme for a scalar problem, stage by
    /// stage, with 200 fixed-point sweeps per stage.
    fn brute_force_step(m: &MethodTableau, w2: f64, g: impl Fn(f64) -> f64, q: f64, p: f64, h: f64) -> (f64, f64) {
        let v = h * h * w2;
        let c = m.nodes();
        let s = m.stages();
        let mut gs: Vec<f64> = Vec::new();
        for i in 0..s {
            let cv = c[i] * c[i] * v;
            let lin = phi_scalar(0, cv).unwrap() * q + h * c[i] * phi_scalar(1, cv).unwrap() * p;
            let mut explicit = lin;
            for (j, gj) in gs.iter().enumerate() {
                explicit -= h * h * m.coefficient(CoefficientId::a_bar(i, j), v).unwrap() * gj;
            }
            let aii = m.coefficient(CoefficientId::a_bar(i, i), v).unwrap();
            let mut x = explicit;
            for _ in 0..200 {
                x = explicit - h * h * aii * g(x);
            }
            gs.push(g(x));
        }
        let mut q1 = phi_scalar(0, v).unwrap() * q + h * phi_scalar(1, v).unwrap() * p;
        let mut p1 = -h * w2 * phi_scalar(1, v).unwrap() * q + phi_scalar(0, v).unwrap() * p;
        for (i, gi) in gs.iter().enumerate() {
            q1 -= h * h * m.coefficient(CoefficientId::b_bar(i), v).unwrap() * gi;
            p1 -= h * m.coefficient(CoefficientId::b(i), v).unwrap() * gi;
        }
        (q1, p1)
    }

    #[test]
    fn duffing_step_matches_brute_force() {
        let k = 0.03;
        let prob = scalar(100.0, Arc::new(Duffing(k)), 0.0, 10.0);
        let h = 1.0 / 200.0;
        let settings = SolveSettings::new(h, h);
        for name in SERKN_NAMES {
            let m = MethodTableau::by_name(name).unwrap();
            let got = step(&m, &prob, prob.initial(), &settings).unwrap();
            let (q1, p1) = brute_force_step(&m, 100.0, |x| k * k * (x - 2.0 * x.powi(3)), 0.0, 10.0, h);
            assert!((got.q[0] - q1).abs() < 1e-13, "{name}: {} vs {q1}", got.q[0]);
            assert!((got.p[0] - p1).abs() < 1e-13, "{name}: {} vs {p1}", got.p[0]);
        }
    }

    #[test]
    fn zero_matrix_gives_classical_step() {
        let prob = scalar(0.0, Arc::new(Duffing(0.5)), 0.3, 0.2);
        let settings = SolveSettings::new(0.1, 0.1);
        for name in SERKN_NAMES {
            let m = MethodTableau::by_name(name).unwrap();
            let a = step(&m, &prob, prob.initial(), &settings).unwrap();
            let b = step(&m.rkn_limit(), &prob, prob.initial(), &settings).unwrap();
            assert!((a.q[0] - b.q[0]).abs() < 1e-15 && (a.p[0] - b.p[0]).abs() < 1e-15, "{name}");
        }
    }

    #[test]
    fn classical_limit_integrates_linear_force() {
        // RKN on q'' = -w^2 q must match the harmonic solution to its order.
        let w2 = 4.0;
        let prob = scalar(w2, Arc::new(ZeroPotential), 1.0, 0.0);
        let m = MethodTableau::by_name("RKN3s4").unwrap();
        let settings = SolveSettings::new(0.01, 1.0);
        let traj = integrate(&m, &prob, prob.initial(), &settings).unwrap();
        let last = traj.last().unwrap();
        assert!((last.q[0] - 2.0f64.cos()).abs() < 1e-9);
    }

    #[test]
    fn time_reversal_returns_home() {
        let m_mat = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 100.0]));
        let init = State::new(0.0, DVector::from_vec(vec![0.5, -0.2]), DVector::from_vec(vec![0.1, 2.0]));
        let prob = Problem::new("free", m_mat, Arc::new(ZeroPotential), init).unwrap();
        let settings = SolveSettings::new(0.07, 0.07);
        for name in SERKN_NAMES {
            let m = MethodTableau::by_name(name).unwrap();
            let fwd = step(&m, &prob, prob.initial(), &settings).unwrap();
            let flipped = State::new(0.0, fwd.q.clone(), -&fwd.p);
            let back = step(&m, &prob, &flipped, &settings).unwrap();
            assert!((&back.q - &prob.initial().q).amax() < 1e-10);
            assert!((-&back.p - &prob.initial().p).amax() < 1e-10);
        }
    }

    #[test]
    fn zero_length_run_keeps_initial_state() {
        let prob = scalar(1.0, Arc::new(ZeroPotential), 1.0, 0.0);
        let m = MethodTableau::serkn2s3();
        let traj = integrate(&m, &prob, prob.initial(), &SolveSettings::new(0.1, 0.0)).unwrap();
        assert_eq!(traj.states, vec![prob.initial().clone()]);
        assert_eq!(traj.hamiltonian.len(), 1);
    }

    #[test]
    fn recording_and_step_count() {
        let prob = scalar(1.0, Arc::new(Linear(0.1)), 1.0, 0.0);
        let m = MethodTableau::serkn2s3();
        let settings = SolveSettings::new(0.1, 1.0).with_record_stride(3);
        let traj = integrate(&m, &prob, prob.initial(), &settings).unwrap();
        assert_eq!(traj.summary.steps, 10);
        // n = 0, 3, 6, 9 and the final state at n = 10.
        assert_eq!(traj.states.len(), 5);
        assert!((traj.last().unwrap().t - 1.0).abs() < 1e-15);
        assert_eq!(traj.states.len(), traj.hamiltonian.len());
        assert!(traj.summary.iterations.iter().all(|&k| k <= 2 * 50));
    }

    #[test]
    fn settings_are_validated() {
        let prob = scalar(1.0, Arc::new(ZeroPotential), 1.0, 0.0);
        let m = MethodTableau::serkn2s3();
        let mut s = SolveSettings::new(0.1, 1.0);
        s.stage_tol = 1e-6;
        assert!(matches!(integrate(&m, &prob, prob.initial(), &s), Err(Error::InvalidSettings(_))));
        let s = SolveSettings::new(-0.1, 1.0);
        assert!(integrate(&m, &prob, prob.initial(), &s).is_err());
        let s = SolveSettings::new(0.1, -1.0);
        assert!(integrate(&m, &prob, prob.initial(), &s).is_err());
    }

    #[test]
    fn divergent_stage_is_reported() {
        // h^2 a_11 L >> 1 makes the fixed-point map expansive.
        let prob = scalar(0.0, Arc::new(Linear(1e6)), 1.0, 0.0);
        let m = MethodTableau::by_name("SERKN1s2(1)").unwrap();
        let traj = integrate(&m, &prob, prob.initial(), &SolveSettings::new(0.1, 1.0)).unwrap();
        assert!(matches!(
            traj.summary.error,
            Some(Error::StageNotConverged { .. }) | Some(Error::NonFiniteIterate { .. })
        ));
        assert_eq!(traj.states.len(), 1);
    }
}
