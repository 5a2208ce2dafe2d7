//! Linear stability of a method on `y'' + omega^2 y = -eps y`, with
//! `V = h^2 omega^2` and `z = h^2 eps`.

use rayon::prelude::*;
use std::io::Write;

use crate::error::{Error, Result};
use crate::phi::phi_all;
use crate::tableau::MethodTableau;

pub const RHO_TOL: f64 = 1e-10;
pub const RESONANCE_GUARD: f64 = 1e-12;

pub const UNSTABLE: i8 = 0;
pub const STABLE: i8 = 1;
pub const PERIODIC: i8 = 2;
/// `V + z <= 0`: outside the test equation's domain.
pub const OUT_OF_DOMAIN: i8 = -1;

pub type Matrix2 = [[f64; 2]; 2];

/// `S(V, z)`.
///
/// Classical methods see the whole `V + z` as the perturbation, so their
/// matrix is the RKN one at `z' = V + z` with `phi_k(0)` in place of
/// `phi_k(V)`.
pub fn stability_matrix(method: &MethodTableau, v: f64, z: f64) -> Result<Matrix2> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::InvalidParameter(format!("V must be positive, got {v}")));
    }
    if !z.is_finite() {
        return Err(Error::NonFinite("z".into()));
    }
    if v + z <= 0.0 {
        return Err(Error::InvalidParameter(format!("V + z = {} is not positive", v + z)));
    }
    let (arg, zz) = if method.is_classical() { (0.0, v + z) } else { (v, z) };
    let coeffs = method.coefficients_at(arg)?;
    let c = method.nodes();
    let s = c.len();

    let mut det = 1.0;
    for i in 0..s {
        det *= 1.0 + zz * coeffs.a_bar[i][i];
    }
    if det.abs() < RESONANCE_GUARD {
        return Err(Error::SingularStageMatrix(det));
    }

    let solve = |rhs: Vec<f64>| -> Vec<f64> {
        let mut x = rhs;
        for i in 0..s {
            let mut acc = x[i];
            for j in 0..i {
                acc -= zz * coeffs.a_bar[i][j] * x[j];
            }
            x[i] = acc / (1.0 + zz * coeffs.a_bar[i][i]);
        }
        x
    };
    let col_q = solve(c.iter().map(|ci| phi_all(ci * ci * arg)[0]).collect());
    let col_p = solve(c.iter().map(|ci| ci * phi_all(ci * ci * arg)[1]).collect());
    let dot = |w: &[f64], x: &[f64]| w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();

    let phi = phi_all(arg);
    Ok([
        [
            phi[0] - zz * dot(&coeffs.b_bar, &col_q),
            phi[1] - zz * dot(&coeffs.b_bar, &col_p),
        ],
        [
            -arg * phi[1] - zz * dot(&coeffs.b, &col_q),
            phi[0] - zz * dot(&coeffs.b, &col_p),
        ],
    ])
}

/// Spectral radius from the closed-form eigenvalues.
pub fn spectral_radius(s: &Matrix2) -> f64 {
    let tr = s[0][0] + s[1][1];
    let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    let disc = tr * tr - 4.0 * det;
    if disc < 0.0 {
        det.sqrt()
    } else {
        let r = disc.sqrt();
        ((tr + r) / 2.0).abs().max(((tr - r) / 2.0).abs())
    }
}

/// Classification code and spectral radius of `S`. A double eigenvalue on
/// the unit circle counts as unstable.
pub fn classify_matrix(s: &Matrix2) -> (i8, f64) {
    let rho = spectral_radius(s);
    let tr = s[0][0] + s[1][1];
    let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    let code = if rho < 1.0 - RHO_TOL {
        STABLE
    } else if (rho - 1.0).abs() <= RHO_TOL && 4.0 * det - tr * tr > RHO_TOL {
        PERIODIC
    } else {
        UNSTABLE
    };
    (code, rho)
}

/// Code of one point; `OUT_OF_DOMAIN` when `V + z <= 0`, as in a scan.
pub fn classify_point(method: &MethodTableau, v: f64, z: f64) -> Result<i8> {
    if v > 0.0 && v.is_finite() && z.is_finite() && v + z <= 0.0 {
        return Ok(OUT_OF_DOMAIN);
    }
    Ok(classify_matrix(&stability_matrix(method, v, z)?).0)
}

/// Uniform grid classification, row-major in `V` then `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityGrid {
    pub v_axis: Vec<f64>,
    pub z_axis: Vec<f64>,
    pub codes: Vec<i8>,
    pub rho: Vec<f64>,
    /// Points whose evaluation failed (recorded as unstable).
    pub failed: Vec<bool>,
}

impl StabilityGrid {
    pub fn index(&self, iv: usize, iz: usize) -> usize {
        iv * self.z_axis.len() + iz
    }

    pub fn code(&self, iv: usize, iz: usize) -> i8 {
        self.codes[self.index(iv, iz)]
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "V,z,code,rho")?;
        for (iv, v) in self.v_axis.iter().enumerate() {
            for (iz, z) in self.z_axis.iter().enumerate() {
                let k = self.index(iv, iz);
                writeln!(out, "{v:.16e},{z:.16e},{},{:.16e}", self.codes[k], self.rho[k])?;
            }
        }
        Ok(())
    }
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

pub fn scan_region(
    method: &MethodTableau,
    v_range: (f64, f64),
    z_range: (f64, f64),
    nv: usize,
    nz: usize,
) -> Result<StabilityGrid> {
    if nv < 2 || nz < 2 {
        return Err(Error::InvalidParameter("grids need at least 2 points per axis".into()));
    }
    let (v_lo, v_hi) = v_range;
    if !(v_lo > 0.0 && v_hi > v_lo && v_hi.is_finite()) {
        return Err(Error::InvalidParameter(format!("bad V range ({v_lo}, {v_hi})")));
    }
    if !(z_range.1 > z_range.0 && z_range.0.is_finite() && z_range.1.is_finite()) {
        return Err(Error::InvalidParameter(format!("bad z range {z_range:?}")));
    }
    let v_axis = axis(v_lo, v_hi, nv);
    let z_axis = axis(z_range.0, z_range.1, nz);
    let rows: Vec<Vec<(i8, f64, bool)>> = v_axis
        .par_iter()
        .map(|&v| {
            z_axis
                .iter()
                .map(|&z| {
                    if v + z <= 0.0 {
                        return (OUT_OF_DOMAIN, f64::NAN, false);
                    }
                    match stability_matrix(method, v, z) {
                        Ok(s) => {
                            let (code, rho) = classify_matrix(&s);
                            (code, rho, false)
                        }
                        Err(_) => (UNSTABLE, f64::NAN, true),
                    }
                })
                .collect()
        })
        .collect();
    let mut grid = StabilityGrid {
        v_axis,
        z_axis,
        codes: Vec::with_capacity(nv * nz),
        rho: Vec::with_capacity(nv * nz),
        failed: Vec::with_capacity(nv * nz),
    };
    for (code, rho, failed) in rows.into_iter().flatten() {
        grid.codes.push(code);
        grid.rho.push(rho);
        grid.failed.push(failed);
    }
    Ok(grid)
}
