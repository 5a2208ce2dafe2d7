//! Diagonal implicit symplectic ERKN tableaux.
//!
//! A method is described by its nodes `c_i`, the weights `d_i` that appear in
//! the symplecticity conditions, and coefficient functions `b_i(v)`,
//! `b_bar_i(v)`, `a_bar_ij(v)` (`j <= i`) of the scalar `v = h^2 lambda`.
//! The coefficients are evaluated in closed form from the phi-functions:
//!
//! ```text
//! b_i(v)     = d_i phi_0((1 - c_i)^2 v)
//! b_bar_i(v) = d_i (1 - c_i) phi_1((1 - c_i)^2 v)
//! a_bar_ij(v) = (b_i b_bar_j - b_j b_bar_i) / d_i          (j < i)
//! ```
//!
//! while the diagonal entries `a_bar_ii` are fixed by the highest order
//! conditions and differ between the method families.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::jet::{Jet, JET_TERMS};
use crate::phi::{phi01_closed, phi_all, phi_series, Scalar, ScalarAnalyticFn, CROSSOVER, SERIES_TERMS};

/// Denominators below this magnitude trip [`Error::DenominatorGuard`].
pub const DENOMINATOR_GUARD: f64 = 1e-10;

/// Registry names, in display order.
pub const METHOD_NAMES: [&str; 9] = [
    "SERKN1s2(1)",
    "SERKN1s2(2)",
    "SERKN2s3",
    "SERKN2s4",
    "SERKN3s4(1)",
    "SERKN3s4(2)",
    "RKN1s2",
    "RKN2s3",
    "RKN3s4",
];

/// The six symplectic ERKN methods.
pub const SERKN_NAMES: [&str; 6] = [
    "SERKN1s2(1)",
    "SERKN1s2(2)",
    "SERKN2s3",
    "SERKN2s4",
    "SERKN3s4(1)",
    "SERKN3s4(2)",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OneStageVariant {
    /// `a_bar_11 = phi_0(v)`.
    Phi0,
    /// `a_bar_11 = b_bar_1(v)`.
    BBar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoefficientKind {
    B,
    BBar,
    ABar,
}

/// Addresses one coefficient function; indices are zero-based and `column`
/// is only meaningful for [`CoefficientKind::ABar`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CoefficientId {
    pub kind: CoefficientKind,
    pub stage: usize,
    pub column: usize,
}

impl CoefficientId {
    pub fn b(stage: usize) -> Self {
        Self { kind: CoefficientKind::B, stage, column: 0 }
    }
    pub fn b_bar(stage: usize) -> Self {
        Self { kind: CoefficientKind::BBar, stage, column: 0 }
    }
    pub fn a_bar(stage: usize, column: usize) -> Self {
        Self { kind: CoefficientKind::ABar, stage, column }
    }

    /// Label such as `b1`, `bbar2` or `abar31` (one-based, as in tableaux).
    pub fn label(&self) -> String {
        match self.kind {
            CoefficientKind::B => format!("b{}", self.stage + 1),
            CoefficientKind::BBar => format!("bbar{}", self.stage + 1),
            CoefficientKind::ABar => format!("abar{}{}", self.stage + 1, self.column + 1),
        }
    }
}

/// All coefficient values of a tableau at one argument.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients<T> {
    pub b: Vec<T>,
    pub b_bar: Vec<T>,
    /// Lower triangle: `a_bar[i]` has `i + 1` entries.
    pub a_bar: Vec<Vec<T>>,
}

impl<T: Scalar> Coefficients<T> {
    pub fn stages(&self) -> usize {
        self.b.len()
    }

    pub fn get(&self, id: CoefficientId) -> Result<T> {
        let out_of_range = || Error::IndexOutOfRange(id.label());
        match id.kind {
            CoefficientKind::B => self.b.get(id.stage).copied().ok_or_else(out_of_range),
            CoefficientKind::BBar => self.b_bar.get(id.stage).copied().ok_or_else(out_of_range),
            CoefficientKind::ABar => self
                .a_bar
                .get(id.stage)
                .and_then(|row| row.get(id.column))
                .copied()
                .ok_or_else(out_of_range),
        }
    }

    pub fn get_mut(&mut self, id: CoefficientId) -> Option<&mut T> {
        match id.kind {
            CoefficientKind::B => self.b.get_mut(id.stage),
            CoefficientKind::BBar => self.b_bar.get_mut(id.stage),
            CoefficientKind::ABar => self.a_bar.get_mut(id.stage).and_then(|r| r.get_mut(id.column)),
        }
    }

    fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Coefficients<U> {
        Coefficients {
            b: self.b.iter().copied().map(&f).collect(),
            b_bar: self.b_bar.iter().copied().map(&f).collect(),
            a_bar: self
                .a_bar
                .iter()
                .map(|row| row.iter().copied().map(&f).collect())
                .collect(),
        }
    }
}

/// Every coefficient id of an `s`-stage tableau: b's, then b_bar's, then
/// the lower triangle of a_bar by rows.
pub fn coefficient_ids(stages: usize) -> Vec<CoefficientId> {
    let mut ids: Vec<_> = (0..stages).map(CoefficientId::b).collect();
    ids.extend((0..stages).map(CoefficientId::b_bar));
    for i in 0..stages {
        ids.extend((0..=i).map(|j| CoefficientId::a_bar(i, j)));
    }
    ids
}

#[derive(Debug, Clone, PartialEq)]
enum Family {
    OneStage(OneStageVariant),
    TwoStageOrder3,
    TwoStageOrder4,
    /// `near_zero[i]` holds Taylor coefficients of the row sum
    /// `sum_j a_bar_ij`, used for `|v| < NEAR_ZERO_RADIUS` where the exact
    /// expression is 0/0.
    ThreeStage { near_zero: [Vec<f64>; 3] },
    /// Constant coefficients (classical RKN method).
    Frozen(Coefficients<f64>),
}

/// An `s`-stage diagonal implicit ERKN method.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodTableau {
    name: String,
    order: u32,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    family: Family,
}

fn guard<T: Scalar>(coefficient: &'static str, v: T, denominator: T) -> Result<()> {
    if denominator.modulus() < DENOMINATOR_GUARD || !denominator.is_finite() {
        return Err(Error::DenominatorGuard {
            coefficient,
            v: v.modulus(),
            denominator: denominator.modulus(),
        });
    }
    Ok(())
}

/// `b_i = d_i phi_0(alpha_i^2 v)` and `b_bar_i = d_i alpha_i phi_1(alpha_i^2 v)`.
fn reduced_b<T: Scalar>(nodes: &[f64], weights: &[f64], v: T) -> (Vec<T>, Vec<T>) {
    nodes
        .iter()
        .zip(weights)
        .map(|(&c, &d)| {
            let alpha = 1.0 - c;
            let (p0, p1) = phi01(v.scale(alpha * alpha));
            (p0.scale(d), p1.scale(d * alpha))
        })
        .unzip()
}

/// Row sums `x_i = sum_j a_bar_ij` of a three-stage method, from the
/// three highest order conditions (Cramer's rule; `den` is the printed
/// denominator).
fn three_stage_row_sums<T: Scalar>(c: &[f64], v: T, b: &[T], bb: &[T]) -> Result<[T; 3]> {
    let phi = phi_all(v);
    let (p3, p4) = (phi[3], phi[4]);
    let k = |x: f64| T::from_f64(x);
    let den = b[1] * b[2] * bb[0] * k(c[1] - c[2])
        + b[0] * (b[1] * bb[2] * k(c[0] - c[1]) + b[2] * bb[1] * k(c[2] - c[0]));
    guard("a_bar_ii", v, den)?;
    let x1 = ((b[2] * bb[1] * k(c[2]) - b[1] * bb[2] * k(c[1])) * p3
        + (k(3.0) * (b[1] * bb[2] - b[2] * bb[1]) + b[1] * b[2] * k(c[1] - c[2])) * p4)
        / den;
    let x2 = ((b[0] * bb[2] * k(c[0]) - b[2] * bb[0] * k(c[2])) * p3
        + (k(3.0) * (b[2] * bb[0] - b[0] * bb[2]) + b[0] * b[2] * k(c[2] - c[0])) * p4)
        / den;
    let x3 = ((b[1] * bb[0] * k(c[1]) - b[0] * bb[1] * k(c[0])) * p3
        + (k(3.0) * (b[0] * bb[1] - b[1] * bb[0]) + b[0] * b[1] * k(c[0] - c[1])) * p4)
        / den;
    Ok([x1, x2, x3])
}

fn horner<T: Scalar>(coeffs: &[f64], v: T) -> T {
    coeffs
        .iter()
        .rev()
        .fold(T::zero(), |acc, &c| acc * v + T::from_f64(c))
}

fn phi01<T: Scalar>(v: T) -> (T, T) {
    if v.modulus() < CROSSOVER {
        (phi_series(0, v, SERIES_TERMS), phi_series(1, v, SERIES_TERMS))
    } else {
        phi01_closed(v)
    }
}

impl MethodTableau {
    /// One-stage order-two methods, `c = 1/2`, `d = 1`.
    pub fn one_stage(variant: OneStageVariant) -> Self {
        let name = match variant {
            OneStageVariant::Phi0 => "SERKN1s2(1)",
            OneStageVariant::BBar => "SERKN1s2(2)",
        };
        Self {
            name: name.into(),
            order: 2,
            nodes: vec![0.5],
            weights: vec![1.0],
            family: Family::OneStage(variant),
        }
    }

    /// Two-stage order-three family parametrised by `c1`; `a_bar_22 = a_bar_11`.
    pub fn two_stage_order3(c1: f64, name: &str) -> Result<Self> {
        if (3.0 - 6.0 * c1).abs() < DENOMINATOR_GUARD {
            return Err(Error::InvalidTableau("c1 = 1/2 leaves c2 undefined".into()));
        }
        let c2 = (2.0 - 3.0 * c1) / (3.0 - 6.0 * c1);
        if (c1 - c2).abs() < DENOMINATOR_GUARD {
            return Err(Error::InvalidTableau("coincident nodes".into()));
        }
        let d1 = (1.0 - 2.0 * c2) / (2.0 * (c1 - c2));
        let d2 = (2.0 * c1 - 1.0) / (2.0 * (c1 - c2));
        Ok(Self {
            name: name.into(),
            order: 3,
            nodes: vec![c1, c2],
            weights: vec![d1, d2],
            family: Family::TwoStageOrder3,
        })
    }

    /// SERKN2s3: `c1 = 1/5`, so `c2 = 7/9`, `d = (25/52, 27/52)`.
    pub fn serkn2s3() -> Self {
        Self::two_stage_order3(0.2, "SERKN2s3").expect("valid node")
    }

    /// SERKN2s4 on the two Gauss nodes `(3 -+ sqrt 3)/6` with `d = (1/2, 1/2)`.
    pub fn serkn2s4() -> Self {
        let r3 = 3f64.sqrt();
        Self {
            name: "SERKN2s4".into(),
            order: 4,
            nodes: vec![(3.0 - r3) / 6.0, (3.0 + r3) / 6.0],
            weights: vec![0.5, 0.5],
            family: Family::TwoStageOrder4,
        }
    }

    /// Three-stage order-four family; `c3` and `d` follow from `(c1, c2)`.
    pub fn three_stage(c1: f64, c2: f64, name: &str) -> Result<Self> {
        if (c1 - c2).abs() < DENOMINATOR_GUARD {
            return Err(Error::InvalidTableau("c1 and c2 coincide".into()));
        }
        let den = 4.0 - 6.0 * c1 - 6.0 * c2 + 12.0 * c1 * c2;
        if den.abs() < DENOMINATOR_GUARD {
            return Err(Error::InvalidTableau("4 - 6c1 - 6c2 + 12c1c2 vanishes".into()));
        }
        let c3 = (3.0 - 4.0 * c1 - 4.0 * c2 + 6.0 * c1 * c2) / den;
        if (c3 - c1).abs() < DENOMINATOR_GUARD || (c3 - c2).abs() < DENOMINATOR_GUARD {
            return Err(Error::InvalidTableau(format!("c3 = {c3} repeats a node")));
        }
        let d1 = (2.0 - 3.0 * c3 + c2 * (-3.0 + 6.0 * c3)) / (6.0 * (c1 - c2) * (c1 - c3));
        let d2 = (-2.0 + c1 * (3.0 - 6.0 * c3) + 3.0 * c3) / (6.0 * (c1 - c2) * (c2 - c3));
        let d3 = (-2.0 + c1 * (3.0 - 6.0 * c2) + 3.0 * c2) / (6.0 * (c1 - c3) * (c3 - c2));
        let nodes = vec![c1, c2, c3];
        let weights = vec![d1, d2, d3];
        let near_zero = contour_series(
            |z| {
                let (b, bb) = reduced_b(&nodes, &weights, z);
                three_stage_row_sums(&nodes, z, &b, &bb)
            },
            NEAR_ZERO_CONTOUR,
            NEAR_ZERO_TERMS,
        )?;
        Ok(Self {
            name: name.into(),
            order: 4,
            nodes,
            weights,
            family: Family::ThreeStage { near_zero },
        })
    }

    /// SERKN3s4(1): `c1 = (5 - sqrt 15)/10`, `c2 = 1/2`.
    pub fn serkn3s4_1() -> Self {
        let r = 15f64.sqrt();
        Self::three_stage((5.0 - r) / 10.0, 0.5, "SERKN3s4(1)").expect("valid nodes")
    }

    /// SERKN3s4(2): `c1 = (5 + sqrt 15)/10`, `c2 = (5 - sqrt 15)/10`.
    pub fn serkn3s4_2() -> Self {
        let r = 15f64.sqrt();
        Self::three_stage((5.0 + r) / 10.0, (5.0 - r) / 10.0, "SERKN3s4(2)").expect("valid nodes")
    }

    /// Look a method up by its registry name.
    pub fn by_name(name: &str) -> Result<Self> {
        Ok(match name {
            "SERKN1s2(1)" => Self::one_stage(OneStageVariant::Phi0),
            "SERKN1s2(2)" => Self::one_stage(OneStageVariant::BBar),
            "SERKN2s3" => Self::serkn2s3(),
            "SERKN2s4" => Self::serkn2s4(),
            "SERKN3s4(1)" => Self::serkn3s4_1(),
            "SERKN3s4(2)" => Self::serkn3s4_2(),
            "RKN1s2" => Self::one_stage(OneStageVariant::Phi0).rkn_limit(),
            "RKN2s3" => Self::serkn2s3().rkn_limit(),
            "RKN3s4" => Self::serkn3s4_1().rkn_limit(),
            other => return Err(Error::UnknownMethod(other.to_string())),
        })
    }

    /// The classical RKN method obtained by freezing every coefficient at `v = 0`.
    pub fn rkn_limit(&self) -> Self {
        let frozen = self
            .coefficients_at(0.0)
            .expect("coefficients are regular at v = 0");
        let mut name = self.name.replacen("SERKN", "RKN", 1);
        if let Some(stripped) = name.strip_suffix("(1)") {
            name = stripped.to_string();
        }
        Self {
            name,
            order: self.order,
            nodes: self.nodes.clone(),
            weights: self.weights.clone(),
            family: Family::Frozen(frozen),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn stages(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `true` for frozen (classical RKN) tableaux.
    pub fn is_classical(&self) -> bool {
        matches!(self.family, Family::Frozen(_))
    }

    /// Evaluate every coefficient function at `v`.
    pub fn coefficients_at<T: Scalar>(&self, v: T) -> Result<Coefficients<T>> {
        if let Family::Frozen(ref c) = self.family {
            return Ok(c.map(T::from_f64));
        }
        let s = self.stages();
        let (b, b_bar) = reduced_b(&self.nodes, &self.weights, v);
        let mut a_bar: Vec<Vec<T>> = (0..s).map(|i| vec![T::zero(); i + 1]).collect();
        for i in 0..s {
            for j in 0..i {
                a_bar[i][j] = (b[i] * b_bar[j] - b[j] * b_bar[i]).scale(1.0 / self.weights[i]);
            }
        }
        self.fill_diagonal(v, &b, &b_bar, &mut a_bar)?;
        Ok(Coefficients { b, b_bar, a_bar })
    }

    fn fill_diagonal<T: Scalar>(&self, v: T, b: &[T], bb: &[T], a: &mut [Vec<T>]) -> Result<()> {
        match self.family {
            Family::OneStage(OneStageVariant::Phi0) => {
                a[0][0] = phi01(v).0;
            }
            Family::OneStage(OneStageVariant::BBar) => {
                a[0][0] = bb[0];
            }
            Family::TwoStageOrder3 => {
                let phi = phi_all(v);
                let den = b[0] + b[1];
                guard("a_bar_11", v, den)?;
                let diag = (phi[3] - a[1][0] * b[1]) / den;
                a[0][0] = diag;
                a[1][1] = diag;
            }
            Family::TwoStageOrder4 => {
                let phi = phi_all(v);
                let den = b[0] * bb[1] - b[1] * bb[0];
                guard("a_bar_11", v, den)?;
                a[0][0] = (bb[1] * phi[3] - b[1] * phi[4]) / den;
                a[1][1] = (a[1][0] * (b[1] * bb[0] - b[0] * bb[1]) - bb[0] * phi[3] + b[0] * phi[4])
                    / den;
            }
            Family::ThreeStage { ref near_zero } => {
                let x = if v.modulus() < NEAR_ZERO_RADIUS {
                    near_zero.each_ref().map(|coeffs| horner(coeffs, v))
                } else {
                    three_stage_row_sums(&self.nodes, v, b, bb)?
                };
                a[0][0] = x[0];
                a[1][1] = x[1] - a[1][0];
                a[2][2] = x[2] - a[2][0] - a[2][1];
            }
            Family::Frozen(_) => unreachable!("frozen tableaux return early"),
        }
        Ok(())
    }

    /// A single coefficient function value at real `v >= 0`.
    pub fn coefficient(&self, id: CoefficientId, v: f64) -> Result<f64> {
        if v.is_nan() || v < 0.0 {
            return Err(Error::NegativeArgument(v));
        }
        self.check_id(id)?;
        self.coefficients_at(v)?.get(id)
    }

    fn check_id(&self, id: CoefficientId) -> Result<()> {
        let s = self.stages();
        let ok = id.stage < s && (id.kind != CoefficientKind::ABar || id.column <= id.stage);
        if ok {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange(format!("{} in a {s}-stage tableau", id.label())))
        }
    }

    /// A coefficient as a standalone analytic function.
    pub fn function(&self, id: CoefficientId) -> Result<CoefficientFn<'_>> {
        self.check_id(id)?;
        Ok(CoefficientFn { tableau: self, id })
    }
}

/// One coefficient function of a tableau.
#[derive(Debug, Clone, Copy)]
pub struct CoefficientFn<'a> {
    tableau: &'a MethodTableau,
    id: CoefficientId,
}

impl ScalarAnalyticFn for CoefficientFn<'_> {
    fn eval<T: Scalar>(&self, v: T) -> Result<T> {
        self.tableau.coefficients_at(v)?.get(self.id)
    }
}

/// The printed denominator of the three-stage diagonal has a simple zero
/// at `v = 0`; inside this radius the row sums come from their Taylor series.
/// The next zero sits near `v = 39.4`.
const NEAR_ZERO_RADIUS: f64 = 0.5;
const NEAR_ZERO_TERMS: usize = 24;
const NEAR_ZERO_CONTOUR: Contour = Contour { radius: 8.0, points: 128 };

#[derive(Debug, Clone, Copy)]
struct Contour {
    radius: f64,
    points: usize,
}

/// Taylor coefficients at 0 of `N` functions evaluated together, by the
/// trapezoidal rule on the Cauchy integral over a circle.
fn contour_series<const N: usize>(
    f: impl Fn(Complex64) -> Result<[Complex64; N]>,
    contour: Contour,
    n_terms: usize,
) -> Result<[Vec<f64>; N]> {
    let m = contour.points;
    let nodes: Vec<Complex64> = (0..m)
        .map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / m as f64))
        .collect();
    let mut samples = Vec::with_capacity(m);
    for w in &nodes {
        let z = w * contour.radius;
        let fz = f(z)?;
        if fz.iter().any(|x| !Scalar::is_finite(*x)) {
            return Err(Error::NonFinite(format!("coefficient at {z}")));
        }
        samples.push(fz);
    }
    Ok(std::array::from_fn(|i| {
        (0..n_terms)
            .map(|n| {
                let sum: Complex64 = samples
                    .iter()
                    .enumerate()
                    .map(|(k, fz)| fz[i] * nodes[(n * k) % m].conj())
                    .sum();
                sum.re / (m as f64 * contour.radius.powi(n as i32))
            })
            .collect()
    }))
}

/// Leading Taylor coefficients at 0 of an analytic function, `n_terms <= 4`,
/// by truncated power-series arithmetic.
pub fn taylor_coefficients<F: ScalarAnalyticFn>(f: &F, n_terms: usize) -> Result<Vec<f64>> {
    if n_terms == 0 || n_terms > JET_TERMS {
        return Err(Error::InvalidParameter(format!(
            "n_terms must be in 1..={JET_TERMS}, got {n_terms}"
        )));
    }
    let jet = f.eval(Jet::variable())?;
    if !jet.is_finite() {
        return Err(Error::NonFinite("Taylor coefficients".into()));
    }
    Ok(jet.coefficients()[..n_terms].to_vec())
}
