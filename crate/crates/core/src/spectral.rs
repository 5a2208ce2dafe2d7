//! Eigendecomposition of the symmetric positive semi-definite stiffness
//! matrix and evaluation of scalar functions of it.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::phi::ScalarAnalyticFn;

const SYMMETRY_TOL: f64 = 1e-12;
const OFF_DIAGONAL_TOL: f64 = 1e-14;
const CLAMP_BAND: f64 = 1e-10;
const MAX_SWEEPS: usize = 64;

/// `M = B diag(lambda) B^T` with orthonormal `B` and `lambda` ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCache {
    eigenvalues: Vec<f64>,
    basis: DMatrix<f64>,
}

impl SpectralCache {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Columns are eigenvectors.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found,
            });
        }
        Ok(())
    }

    /// Coordinates of `x` in the eigenbasis, `B^T x`.
    pub fn to_modal(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(x.len())?;
        Ok(self.basis.tr_mul(x))
    }

    /// Inverse of [`to_modal`](Self::to_modal), `B y`.
    pub fn from_modal(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(y.len())?;
        Ok(&self.basis * y)
    }

    /// `B diag(d) B^T x`.
    pub fn apply_diagonal(&self, diagonal: &[f64], x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(diagonal.len())?;
        let mut y = self.to_modal(x)?;
        for (yi, di) in y.iter_mut().zip(diagonal) {
            *yi *= di;
        }
        self.from_modal(&y)
    }

    /// `f(scale * lambda_i)` for every eigenvalue.
    pub fn diagonal_of<F: ScalarAnalyticFn>(&self, f: &F, scale: f64) -> Result<Vec<f64>> {
        if scale.is_nan() || scale < 0.0 {
            return Err(Error::NegativeArgument(scale));
        }
        self.eigenvalues.iter().map(|&l| f.eval(scale * l)).collect()
    }
}

/// `f(scale * M) x`, evaluated in the eigenbasis of `M`.
pub fn apply_analytic<F: ScalarAnalyticFn>(
    f: &F,
    cache: &SpectralCache,
    scale: f64,
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    cache.check_dim(x.len())?;
    let diagonal = cache.diagonal_of(f, scale)?;
    cache.apply_diagonal(&diagonal, x)
}

/// Cyclic Jacobi eigendecomposition of a symmetric PSD matrix.
///
/// Sweeps visit `(p, q)` pairs in row order until the off-diagonal Frobenius
/// norm drops below `1e-14 * |M|_F`. Eigenvalues in `[-1e-10 |M|_F, 0)` are
/// clamped to zero; anything more negative is rejected.
pub fn spectral_decompose(matrix: &DMatrix<f64>) -> Result<SpectralCache> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: matrix.ncols(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidParameter("empty matrix".into()));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (matrix[(i, j)], matrix[(j, i)]);
            let gap = (a - b).abs();
            if gap > SYMMETRY_TOL * a.abs().max(b.abs()) || !gap.is_finite() {
                return Err(Error::NotSymmetric { row: i, col: j, gap });
            }
        }
    }

    let mut a = (matrix + matrix.transpose()) * 0.5;
    let norm = a.norm();
    let mut v = DMatrix::<f64>::identity(n, n);

    let off = |a: &DMatrix<f64>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)] * a[(i, j)];
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while off(&a) >= OFF_DIAGONAL_TOL * norm && norm > 0.0 {
        if sweeps == MAX_SWEEPS {
            return Err(Error::EigenNoConvergence(MAX_SWEEPS));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]).then(i.cmp(&j)));

    let mut eigenvalues = Vec::with_capacity(n);
    let mut basis = DMatrix::<f64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut lambda = a[(src, src)];
        if lambda < 0.0 {
            if lambda >= -CLAMP_BAND * norm {
                lambda = 0.0;
            } else {
                return Err(Error::NotPositiveSemiDefinite(lambda));
            }
        }
        eigenvalues.push(lambda);
        basis.set_column(dst, &v.column(src));
    }
    Ok(SpectralCache { eigenvalues, basis })
}
