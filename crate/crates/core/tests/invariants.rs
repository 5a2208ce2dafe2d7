//! Property tests for the structural invariants of each layer.

use std::sync::Arc;

use erkn_core::phi::inv_factorial;
use erkn_core::problems::{duffing_reference, make_problem, ProblemParams};
use erkn_core::stability::{classify_point, scan_region, stability_matrix, OUT_OF_DOMAIN};
use erkn_core::verification::{jacobian_symplecticity, symplectic_residuals, SYMPLECTIC_TOL};
use erkn_core::{
    integrate, phi_scalar, step, CoefficientId, MethodTableau, Problem, SolveSettings, State, ZeroPotential,
    METHOD_NAMES, SERKN_NAMES,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn serkn(i: usize) -> MethodTableau {
    MethodTableau::by_name(SERKN_NAMES[i]).unwrap()
}

fn free_problem(w2: [f64; 2], q: [f64; 2], p: [f64; 2]) -> Problem {
    let m = DMatrix::from_diagonal(&DVector::from_row_slice(&w2));
    let init = State::new(0.0, DVector::from_row_slice(&q), DVector::from_row_slice(&p));
    Problem::new("free", m, Arc::new(ZeroPotential), init).unwrap()
}

/// Thirty-term Maclaurin series, summed directly.
fn series30(j: usize, v: f64) -> f64 {
    (0..30).map(|k| (-v).powi(k as i32) * inv_factorial(2 * k + j)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn phi_pythagoras(v in 0.0f64..400.0) {
        let (p0, p1) = (phi_scalar(0, v).unwrap(), phi_scalar(1, v).unwrap());
        prop_assert!((p0 * p0 + v * p1 * p1 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn phi_matches_long_series(j in 0usize..=6, v in 0.0f64..4.0) {
        let want = series30(j, v);
        prop_assert!((phi_scalar(j, v).unwrap() - want).abs() <= 1e-12 * want.abs());
    }

    #[test]
    fn phi_recurrence(j in 0usize..=4, v in 0.0f64..400.0) {
        let r = v * phi_scalar(j + 2, v).unwrap() + phi_scalar(j, v).unwrap() - inv_factorial(j);
        prop_assert!(r.abs() < 1e-13, "residual {r:e}");
    }

    /// `b_i` agrees with the unreduced form through the addition theorem.
    #[test]
    fn reduced_weights(which in 0usize..6, v in 0.0f64..400.0) {
        let m = serkn(which);
        let (p0, p1) = (phi_scalar(0, v).unwrap(), phi_scalar(1, v).unwrap());
        for (i, (&c, &d)) in m.nodes().iter().zip(m.weights()).enumerate() {
            let cv = c * c * v;
            let unreduced = d * (p0 * phi_scalar(0, cv).unwrap() + c * v * p1 * phi_scalar(1, cv).unwrap())
                / (p0 * p0 + v * p1 * p1);
            let reduced = d * phi_scalar(0, (1.0 - c) * (1.0 - c) * v).unwrap();
            prop_assert!((unreduced - reduced).abs() < 1e-12);
            prop_assert!((m.coefficient(CoefficientId::b(i), v).unwrap() - reduced).abs() < 1e-12);
        }
    }

    #[test]
    fn symplectic_identities(which in 0usize..6, v in 0.0f64..400.0) {
        let worst = symplectic_residuals(&serkn(which), v).unwrap().into_iter().fold(0.0, f64::max);
        prop_assert!(worst < SYMPLECTIC_TOL, "{}: {worst:e} at v = {v}", SERKN_NAMES[which]);
    }

    #[test]
    fn stability_det_is_one_on_the_free_line(which in 0usize..9, v in 1e-3f64..50.0) {
        let m = MethodTableau::by_name(METHOD_NAMES[which]).unwrap();
        let s = stability_matrix(&m, v, 0.0).unwrap();
        let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        prop_assert!((det - 1.0).abs() < 1e-12, "{}: det {det} at V = {v}", METHOD_NAMES[which]);
    }

    #[test]
    fn stability_outside_domain(which in 0usize..9, v in 1e-3f64..50.0, excess in 0.0f64..50.0) {
        let m = MethodTableau::by_name(METHOD_NAMES[which]).unwrap();
        prop_assert_eq!(classify_point(&m, v, -v - excess).unwrap(), OUT_OF_DOMAIN);
    }

    #[test]
    fn duffing_reference_solves_the_ode(t in 0.0f64..20.0, k in 0.0f64..0.9) {
        let dt = 1e-4;
        let f = |t: f64| duffing_reference(t, k).unwrap();
        let sn = f(t);
        let second = (f(t + dt) - 2.0 * sn + f(t - dt)) / (dt * dt);
        let residual = second + 100.0 * sn - k * k * (2.0 * sn.powi(3) - sn);
        prop_assert!(residual.abs() < 1e-4, "t = {t}, k = {k}: {residual:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn free_flow_is_exact(
        which in 0usize..6,
        w2 in prop::array::uniform2(0.01f64..100.0),
        q in prop::array::uniform2(-1.0f64..1.0),
        p in prop::array::uniform2(-1.0f64..1.0),
        h in 0.001f64..0.05,
    ) {
        let prob = free_problem(w2, q, p);
        let steps = 10_000;
        let traj = integrate(&serkn(which), &prob, prob.initial(), &SolveSettings::new(h, h * steps as f64)).unwrap();
        prop_assert_eq!(traj.summary.steps, steps);
        let last = traj.last().unwrap();
        for k in 0..2 {
            let w = w2[k].sqrt();
            let t = last.t;
            let qe = (w * t).cos() * q[k] + (w * t).sin() / w * p[k];
            let pe = -w * (w * t).sin() * q[k] + (w * t).cos() * p[k];
            let scale = 1.0 + q[k].abs() + p[k].abs() / w;
            prop_assert!((last.q[k] - qe).abs() < 1e-12 * scale * w.max(1.0), "q: {:e}", last.q[k] - qe);
            prop_assert!((last.p[k] - pe).abs() < 1e-12 * scale * w.max(1.0) * w, "p: {:e}", last.p[k] - pe);
        }
    }

    #[test]
    fn reversed_step_returns(
        which in 0usize..6,
        w2 in prop::array::uniform2(0.0f64..200.0),
        q in prop::array::uniform2(-1.0f64..1.0),
        p in prop::array::uniform2(-5.0f64..5.0),
        h in 0.001f64..0.2,
    ) {
        let prob = free_problem(w2, q, p);
        let settings = SolveSettings::new(h, h);
        let m = serkn(which);
        let fwd = step(&m, &prob, prob.initial(), &settings).unwrap();
        let back = step(&m, &prob, &State::new(0.0, fwd.q.clone(), -&fwd.p), &settings).unwrap();
        prop_assert!((&back.q - &prob.initial().q).amax() < 1e-10);
        prop_assert!((-&back.p - &prob.initial().p).amax() < 1e-10);
    }

    #[test]
    fn one_step_maps_are_symplectic(
        which in 0usize..9,
        stellar in any::<bool>(),
        q in prop::array::uniform2(-1.0f64..1.0),
        p in prop::array::uniform2(-10.0f64..10.0),
    ) {
        let m = MethodTableau::by_name(METHOD_NAMES[which]).unwrap();
        let name = if stellar { "stellar" } else { "duffing" };
        let prob = make_problem(name, &ProblemParams::default()).unwrap();
        let n = prob.dim();
        let s = State::new(0.0, DVector::from_row_slice(&q[..n]), DVector::from_row_slice(&p[..n]));
        let defect = jacobian_symplecticity(&m, &prob, &s, 1.0 / 20.0).unwrap();
        prop_assert!(defect <= 1e-6, "{} on {name}: {defect:e}", METHOD_NAMES[which]);
    }

    #[test]
    fn jacobian_check_is_scale_free_on_linear_problems(
        which in 0usize..6,
        w2 in prop::array::uniform2(0.1f64..50.0),
        q in prop::array::uniform2(-1.0f64..1.0),
        p in prop::array::uniform2(-1.0f64..1.0),
    ) {
        let prob = free_problem(w2, q, p);
        let m = serkn(which);
        let init = prob.initial();
        let scaled = State::new(0.0, &init.q * 2.0, init.p.clone());
        let a = jacobian_symplecticity(&m, &prob, init, 0.1).unwrap();
        let b = jacobian_symplecticity(&m, &prob, &scaled, 0.1).unwrap();
        // Linear maps leave only difference-quotient rounding, ~eps / 1e-6 * |J|.
        let floor = 1e-9;
        prop_assert!(b <= 2.0 * a.max(floor) && a <= 2.0 * b.max(floor), "{a:e} vs {b:e}");
    }

    /// A grid point classifies exactly as a direct evaluation does.
    #[test]
    fn grid_agrees_with_direct_sampling(
        which in 0usize..9,
        v_lo in 0.1f64..10.0,
        v_span in 1.0f64..40.0,
        z_lo in -20.0f64..0.0,
        z_span in 1.0f64..40.0,
        nv in 2usize..7,
        nz in 2usize..7,
    ) {
        let m = MethodTableau::by_name(METHOD_NAMES[which]).unwrap();
        let g = scan_region(&m, (v_lo, v_lo + v_span), (z_lo, z_lo + z_span), nv, nz).unwrap();
        for iv in 0..nv {
            for iz in 0..nz {
                let direct = classify_point(&m, g.v_axis[iv], g.z_axis[iz]).unwrap();
                prop_assert_eq!(g.code(iv, iz), direct);
            }
        }
    }
}
