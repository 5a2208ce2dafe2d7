//! Numerical checks of the symplecticity identities and of the order
//! conditions.
//!
//! Symplecticity of an `s`-stage method at `v` is the set of `2s + s(s-1)/2`
//! residuals
//!
//! ```text
//! |phi_0 b_i + v phi_1 b_bar_i - d_i phi_0(c_i^2 v)|
//! |phi_1 b_i - phi_0 b_bar_i - c_i d_i phi_1(c_i^2 v)|
//! |b_bar_j b_i - b_bar_i b_j - d_i a_bar_ij|            (j < i)
//! ```
//!
//! Order conditions mix functions of `V = h^2 omega^2` with `O(h^k)`
//! remainders, so each line is checked by fitting the decay of its residual
//! over a sequence of step sizes.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::integrator::{Problem, SolveSettings, State, Stepper};
use crate::phi::phi_all;
use crate::tableau::{Coefficients, MethodTableau};

/// Residuals below this at every step size count as exactly satisfied.
pub const EXACT_ZERO: f64 = 1e-14;

/// Threshold on symplecticity residuals.
pub const SYMPLECTIC_TOL: f64 = 1e-12;

/// Slack allowed below the printed remainder order.
pub const SLOPE_SLACK: f64 = 0.1;

/// Arguments at which symplecticity is checked.
pub const SYMPLECTIC_GRID: [f64; 6] = [0.0, 0.1, 1.0, 10.0, 100.0, 400.0];

/// Symplecticity residuals of `method` at `v`.
pub fn symplectic_residuals(method: &MethodTableau, v: f64) -> Result<Vec<f64>> {
    if v.is_nan() || v < 0.0 {
        return Err(Error::NegativeArgument(v));
    }
    let coeffs = method.coefficients_at(v)?;
    Ok(symplectic_residuals_of(&coeffs, method.nodes(), method.weights(), v))
}

/// Symplecticity residuals of explicitly given coefficient values.
pub fn symplectic_residuals_of(
    coeffs: &Coefficients<f64>,
    nodes: &[f64],
    weights: &[f64],
    v: f64,
) -> Vec<f64> {
    let phi = phi_all(v);
    let s = nodes.len();
    let mut out = Vec::with_capacity(2 * s + s * (s - 1) / 2);
    for i in 0..s {
        let (b, bb, c, d) = (coeffs.b[i], coeffs.b_bar[i], nodes[i], weights[i]);
        let cv = phi_all(c * c * v);
        out.push((phi[0] * b + v * phi[1] * bb - d * cv[0]).abs());
        out.push((phi[1] * b - phi[0] * bb - c * d * cv[1]).abs());
    }
    for i in 0..s {
        for j in 0..i {
            let lhs = coeffs.b_bar[j] * coeffs.b[i] - coeffs.b_bar[i] * coeffs.b[j];
            out.push((lhs - weights[i] * coeffs.a_bar[i][j]).abs());
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weights {
    B,
    BBar,
}

/// Left-hand side of one order condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lhs {
    /// `sum_i w_i c_i^power`.
    Moment { weights: Weights, power: i32 },
    /// `sum_i w_i c_i^power sum_j a_bar_ij(0)`.
    RowSum { weights: Weights, power: i32 },
    /// `sum_i w_i sum_j c_j a_bar_ij(0)`.
    NodeRowSum { weights: Weights },
}

/// One line `LHS(V) = factor phi_k(V) + O(h^remainder)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderCondition {
    pub set: &'static str,
    /// One-based line number within its equation; the unnumbered trailing
    /// line is numbered after the last printed one.
    pub line: usize,
    pub lhs: Lhs,
    pub factor: f64,
    pub phi: usize,
    pub remainder: u32,
    /// Reported but not gating.
    pub informational: bool,
}

impl OrderCondition {
    pub fn id(&self) -> String {
        if self.informational {
            format!("{}:{}-printed", self.set, self.line)
        } else {
            format!("{}:{}", self.set, self.line)
        }
    }

    /// `|LHS(v) - factor phi_k(v)|` with the a_bar factors frozen at 0.
    pub fn residual(&self, method: &MethodTableau, v: f64) -> Result<f64> {
        if method.stages() != stages_of(self.set) {
            return Err(Error::InvalidParameter(format!(
                "{} applies to {}-stage methods, {} has {}",
                self.set,
                stages_of(self.set),
                method.name(),
                method.stages()
            )));
        }
        let at_v = method.coefficients_at(v)?;
        let c = method.nodes();
        let w = |kind: Weights| match kind {
            Weights::B => &at_v.b,
            Weights::BBar => &at_v.b_bar,
        };
        let lhs = match self.lhs {
            Lhs::Moment { weights, power } => {
                w(weights).iter().zip(c).map(|(wi, ci)| wi * ci.powi(power)).sum::<f64>()
            }
            Lhs::RowSum { weights, power } => {
                let at0 = method.coefficients_at(0.0)?;
                w(weights)
                    .iter()
                    .enumerate()
                    .map(|(i, wi)| wi * c[i].powi(power) * at0.a_bar[i].iter().sum::<f64>())
                    .sum()
            }
            Lhs::NodeRowSum { weights } => {
                let at0 = method.coefficients_at(0.0)?;
                w(weights)
                    .iter()
                    .enumerate()
                    .map(|(i, wi)| {
                        wi * at0.a_bar[i].iter().zip(c).map(|(a, cj)| a * cj).sum::<f64>()
                    })
                    .sum()
            }
        };
        let r = (lhs - self.factor * phi_all(v)[self.phi]).abs();
        if !r.is_finite() {
            return Err(Error::NonFinite(format!("residual of {} at v = {v}", self.id())));
        }
        Ok(r)
    }
}

/// Names of the enumerated order-condition sets.
pub const ORDER_SETS: [&str; 4] = ["order2-1s", "order3-2s", "order4-2s", "order4-3s"];

fn stages_of(set: &str) -> usize {
    match set {
        "order2-1s" => 1,
        "order3-2s" => 2,
        "order4-2s" => 2,
        _ => 3,
    }
}

/// The order-condition set that applies to a method of this order and
/// stage count.
pub fn order_set_for(method: &MethodTableau) -> Option<&'static str> {
    match (method.order(), method.stages()) {
        (2, 1) => Some("order2-1s"),
        (3, 2) => Some("order3-2s"),
        (4, 2) => Some("order4-2s"),
        (4, 3) => Some("order4-3s"),
        _ => None,
    }
}

/// Lines of an order-condition set.
///
/// In `order4-2s` the eighth line is printed with `b` weights, which makes
/// it contradict the ninth line; the gating line uses `b_bar` (the form of
/// the general order conditions and of the three-stage set) and the printed
/// form is kept as an informational line.
pub fn order_conditions(set: &str) -> Result<Vec<OrderCondition>> {
    use Lhs::*;
    use Weights::*;
    let line = |set: &'static str, line, lhs, factor, phi, remainder| OrderCondition {
        set,
        line,
        lhs,
        factor,
        phi,
        remainder,
        informational: false,
    };
    let fourth = |set: &'static str| {
        vec![
            line(set, 1, Moment { weights: B, power: 0 }, 1.0, 1, 4),
            line(set, 2, Moment { weights: B, power: 1 }, 1.0, 2, 3),
            line(set, 3, Moment { weights: B, power: 2 }, 2.0, 3, 2),
            line(set, 4, Moment { weights: B, power: 3 }, 6.0, 4, 1),
            line(set, 5, Moment { weights: BBar, power: 0 }, 1.0, 2, 3),
            line(set, 6, Moment { weights: BBar, power: 1 }, 1.0, 3, 2),
            line(set, 7, Moment { weights: BBar, power: 2 }, 2.0, 4, 1),
            line(set, 8, RowSum { weights: BBar, power: 0 }, 1.0, 4, 1),
            line(set, 9, RowSum { weights: B, power: 0 }, 1.0, 3, 2),
            line(set, 10, RowSum { weights: B, power: 1 }, 3.0, 4, 1),
            line(set, 11, NodeRowSum { weights: B }, 1.0, 4, 1),
        ]
    };
    Ok(match set {
        "order2-1s" => vec![
            line("order2-1s", 1, Moment { weights: BBar, power: 0 }, 1.0, 2, 1),
            line("order2-1s", 2, Moment { weights: B, power: 0 }, 1.0, 1, 2),
            line("order2-1s", 3, Moment { weights: B, power: 1 }, 1.0, 2, 1),
        ],
        "order3-2s" => vec![
            line("order3-2s", 1, Moment { weights: B, power: 0 }, 1.0, 1, 3),
            line("order3-2s", 2, Moment { weights: B, power: 1 }, 1.0, 2, 2),
            line("order3-2s", 3, Moment { weights: B, power: 2 }, 2.0, 3, 1),
            line("order3-2s", 4, Moment { weights: BBar, power: 0 }, 1.0, 2, 2),
            line("order3-2s", 5, Moment { weights: BBar, power: 1 }, 1.0, 3, 1),
            line("order3-2s", 6, RowSum { weights: B, power: 0 }, 1.0, 3, 1),
        ],
        "order4-2s" => {
            let mut lines = fourth("order4-2s");
            let mut printed = line("order4-2s", 8, RowSum { weights: B, power: 0 }, 1.0, 4, 1);
            printed.informational = true;
            lines.insert(8, printed);
            lines
        }
        "order4-3s" => fourth("order4-3s"),
        other => return Err(Error::InvalidParameter(format!("unknown order-condition set `{other}`"))),
    })
}

/// Outcome of a decay fit.
#[derive(Debug, Clone, PartialEq)]
pub struct Decay {
    pub residuals: Vec<f64>,
    /// Least-squares slope of `log r` against `log h`; `+inf` when every
    /// residual is below [`EXACT_ZERO`].
    pub slope: f64,
}

/// Residual decay of one condition over `h_list` at frequency `omega`.
pub fn order_residual_decay(
    method: &MethodTableau,
    condition: &OrderCondition,
    omega: f64,
    h_list: &[f64],
) -> Result<Decay> {
    if h_list.len() < 4 {
        return Err(Error::InvalidParameter("need at least four step sizes".into()));
    }
    if h_list.windows(2).any(|w| !(w[1] < w[0])) || h_list.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::InvalidParameter("step sizes must be positive and strictly decreasing".into()));
    }
    let residuals = h_list
        .iter()
        .map(|h| condition.residual(method, h * h * omega * omega))
        .collect::<Result<Vec<_>>>()?;
    if residuals.iter().all(|r| *r < EXACT_ZERO) {
        return Ok(Decay { residuals, slope: f64::INFINITY });
    }
    let xs: Vec<f64> = h_list.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = residuals.iter().map(|r| r.max(f64::MIN_POSITIVE).ln()).collect();
    Ok(Decay { slope: least_squares_slope(&xs, &ys), residuals })
}

/// Slope of the least-squares line through `(xs, ys)`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Default step sizes for decay fits.
pub const DECAY_STEPS: [f64; 4] = [0.5, 0.25, 0.125, 0.0625];

/// `|J^T Omega J - Omega|_inf` (max row sum) for the central-difference
/// Jacobian `J` of one step from `state`.
pub fn jacobian_symplecticity(
    method: &MethodTableau,
    problem: &Problem,
    state: &State,
    h: f64,
) -> Result<f64> {
    let n = problem.dim();
    if n > 4 {
        return Err(Error::InvalidParameter(format!("dimension {n} exceeds 4")));
    }
    if !state.is_finite() {
        return Err(Error::NonFinite("state".into()));
    }
    let stepper = Stepper::new(method, problem, &SolveSettings::new(h, h))?;
    let flat = |s: &State| -> DVector<f64> {
        DVector::from_iterator(2 * n, s.q.iter().chain(s.p.iter()).copied())
    };
    let x0 = flat(state);
    let delta = 1e-6 * (1.0 + x0.amax());
    let map = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let s = State::new(state.t, x.rows(0, n).into_owned(), x.rows(n, n).into_owned());
        Ok(flat(&stepper.step(problem, &s)?.0))
    };
    let mut jac = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..2 * n {
        let mut up = x0.clone();
        let mut down = x0.clone();
        up[k] += delta;
        down[k] -= delta;
        let col = (map(&up)? - map(&down)?) / (2.0 * delta);
        jac.set_column(k, &col);
    }
    let mut omega = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        omega[(i, n + i)] = 1.0;
        omega[(n + i, i)] = -1.0;
    }
    let defect = jac.transpose() * &omega * &jac - omega;
    Ok(defect
        .row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max))
}

/// One line of a verification report.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub check_id: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
    pub informational: bool,
}

/// Symplecticity on [`SYMPLECTIC_GRID`] plus the order-condition decay of
/// the method's set (if any) at `omega = 2`.
pub fn verify_method(method: &MethodTableau) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    let sympl = format!("sympl-{}s", method.stages());
    for v in SYMPLECTIC_GRID {
        let worst = symplectic_residuals(method, v)?.into_iter().fold(0.0, f64::max);
        rows.push(CheckRow {
            check_id: format!("{sympl}@v={v}"),
            value: worst,
            threshold: SYMPLECTIC_TOL,
            pass: worst < SYMPLECTIC_TOL,
            informational: false,
        });
    }
    if let Some(set) = order_set_for(method) {
        for cond in order_conditions(set)? {
            let decay = order_residual_decay(method, &cond, 2.0, &DECAY_STEPS)?;
            let threshold = cond.remainder as f64 - SLOPE_SLACK;
            rows.push(CheckRow {
                check_id: cond.id(),
                value: decay.slope,
                threshold,
                pass: decay.slope >= threshold,
                informational: cond.informational,
            });
        }
    }
    Ok(rows)
}
