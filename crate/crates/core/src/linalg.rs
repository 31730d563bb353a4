//! Thin SVD and the two proximal maps used by every solver step:
//! entrywise soft-thresholding (prox of the l1 norm) and singular value
//! shrinkage (prox of the nuclear norm).

use crate::error::{Error, Result};
use crate::tensor::{dot, DenseTensor, Matrix};

const MAX_SWEEPS: usize = 80;

/// `m = u · diag(s) · vt` with `s` descending and non-negative.
#[derive(Clone, Debug)]
pub struct SvdResult {
    /// m × r, r = min(m, n). Columns paired with a zero singular value are zero.
    pub u: Matrix,
    pub s: Vec<f64>,
    /// r × n
    pub vt: Matrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (j, &sj) in self.s.iter().enumerate() {
            us.col_mut(j).iter_mut().for_each(|v| *v *= sj);
        }
        us.matmul(&self.vt).expect("svd factors are conformable")
    }

    /// Number of singular values above `1e-12 · σ_1`. Display only.
    pub fn numerical_rank(&self) -> usize {
        let top = self.s.first().copied().unwrap_or(0.0);
        self.s.iter().filter(|&&v| v > 1e-12 * top).count()
    }
}

/// Thin SVD by one-sided (Hestenes) Jacobi rotations.
pub fn thin_svd(m: &Matrix) -> Result<SvdResult> {
    if !m.is_finite() {
        return Err(Error::NonFinite("svd input"));
    }
    if m.rows() >= m.cols() {
        jacobi_tall(m)
    } else {
        let t = jacobi_tall(&m.transpose())?;
        Ok(SvdResult { u: t.vt.transpose(), s: t.s, vt: t.u.transpose() })
    }
}

fn jacobi_tall(m: &Matrix) -> Result<SvdResult> {
    let (rows, n) = (m.rows(), m.cols());
    let mut a = m.clone();
    let mut v = Matrix::identity(n);
    // orthogonality threshold, scaled with the column length
    let tol = f64::EPSILON * (rows as f64).max(8.0);
    // columns below this squared norm are rounding noise of a rank-deficient input
    let negligible = (f64::EPSILON * f64::EPSILON) * m.data().iter().map(|v| v * v).sum::<f64>();

    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let alpha = dot(a.col(p), a.col(p));
                let beta = dot(a.col(q), a.col(q));
                let gamma = dot(a.col(p), a.col(q));
                if gamma == 0.0 || alpha <= negligible || beta <= negligible || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(a.data_mut(), rows, p, q, c, s);
                rotate(v.data_mut(), n, p, q, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::SvdNoConvergence { sweeps: MAX_SWEEPS });
    }

    let norms: Vec<f64> = (0..n).map(|j| dot(a.col(j), a.col(j)).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    let mut u = Matrix::zeros(rows, n);
    let mut vt = Matrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        let sigma = norms[j];
        s.push(sigma);
        if sigma > 0.0 {
            for (dst, &src) in u.col_mut(k).iter_mut().zip(a.col(j)) {
                *dst = src / sigma;
            }
        }
        for i in 0..n {
            vt.set(k, i, v.get(i, j));
        }
    }
    Ok(SvdResult { u, s, vt })
}

#[inline]
fn rotate(data: &mut [f64], rows: usize, p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = data.split_at_mut(q * rows);
    let cp = &mut head[p * rows..(p + 1) * rows];
    let cq = &mut tail[..rows];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Entrywise `sign(t)·max(|t| − tau, 0)`.
pub fn soft_threshold(t: &DenseTensor, tau: f64) -> Result<DenseTensor> {
    if tau < 0.0 || tau.is_nan() {
        return Err(Error::NegativeThreshold(tau));
    }
    Ok(t.map(|v| shrink_scalar(v, tau)))
}

#[inline]
pub(crate) fn shrink_scalar(v: f64, tau: f64) -> f64 {
    let mag = v.abs() - tau;
    if mag > 0.0 {
        mag.copysign(v)
    } else {
        0.0
    }
}

/// Singular value shrinkage `U·diag(max(σ − tau, 0))·Vᵀ`.
pub fn svd_shrink(m: &Matrix, tau: f64) -> Result<Matrix> {
    if tau < 0.0 || tau.is_nan() {
        return Err(Error::NegativeThreshold(tau));
    }
    let mut svd = thin_svd(m)?;
    svd.s.iter_mut().for_each(|s| *s = (*s - tau).max(0.0));
    Ok(svd.reconstruct())
}

pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    Ok(thin_svd(m)?.s)
}

pub fn nuclear_norm(m: &Matrix) -> Result<f64> {
    Ok(singular_values(m)?.iter().sum())
}

pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    Ok(singular_values(m)?.first().copied().unwrap_or(0.0))
}
