//! Dense N-way tensors, column-major matrices and the multilinear algebra
//! built on top of them.
//!
//! Every tensor is stored with the first index varying fastest. Under that
//! linearization the mode-n unfolding enumerates the remaining indices with
//! smaller-numbered modes varying fastest, so that
//! `vec(G x_1 U_1 ... x_N U_N) = (U_N ⊗ ... ⊗ U_1) vec(G)` holds verbatim.
//!
//! Modes are zero-based throughout the library.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column-major dense matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i + i * n] = 1.0;
        }
        m
    }

    /// Builds a matrix from column-major data.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Self::zeros(nrows, ncols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != ncols {
                return Err(Error::Shape("ragged rows".into()));
            }
            for (j, &v) in row.iter().enumerate() {
                m.data[i + j * nrows] = v;
            }
        }
        Ok(m)
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i + i * n] = d;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i + j * self.rows]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i + j * self.rows] = v;
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        let r = self.rows;
        &mut self.data[j * r..(j + 1) * r]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                t.data[j + i * self.cols] = self.data[i + j * self.rows];
            }
        }
        t
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for k in 0..self.cols {
                let b = other.data[k + j * other.rows];
                if b == 0.0 {
                    continue;
                }
                let a = &self.data[k * self.rows..(k + 1) * self.rows];
                for (d, &x) in dst.iter_mut().zip(a) {
                    *d += x * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ * other`.
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply ({}x{})ᵀ by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        for j in 0..other.cols {
            let b = other.col(j);
            for i in 0..self.cols {
                out.data[i + j * self.cols] = dot(self.col(i), b);
            }
        }
        Ok(out)
    }

    /// `self * otherᵀ`.
    pub fn matmul_t(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by ({}x{})ᵀ",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        for k in 0..self.cols {
            let a = self.col(k);
            for j in 0..other.rows {
                let b = other.data[j + k * other.rows];
                if b == 0.0 {
                    continue;
                }
                let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
                for (d, &x) in dst.iter_mut().zip(a) {
                    *d += x * b;
                }
            }
        }
        Ok(out)
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    /// `self + s * other`, in place.
    pub fn axpy(&mut self, s: f64, other: &Matrix) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Shape("axpy on matrices of different shapes".into()));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    pub fn frobenius_norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dense N-way real tensor, first index fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

fn check_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() {
        return Err(Error::InvalidDims("tensor must have at least one mode".into()));
    }
    if let Some(d) = dims.iter().find(|&&d| d == 0) {
        return Err(Error::InvalidDims(format!("mode size {d} must be positive")));
    }
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::InvalidDims("element count overflows".into()))
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len = check_dims(&dims)?;
        if data.len() != len {
            return Err(Error::Shape(format!(
                "dims {dims:?} need {len} values, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let len = check_dims(dims)?;
        Ok(Self { dims: dims.to_vec(), data: vec![0.0; len] })
    }

    pub fn filled(dims: &[usize], value: f64) -> Result<Self> {
        let len = check_dims(dims)?;
        Ok(Self { dims: dims.to_vec(), data: vec![value; len] })
    }

    #[inline]
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.dims.len()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Linear offset of a multi-index.
    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.dims.len());
        let mut off = 0;
        let mut stride = 1;
        for (&i, &d) in index.iter().zip(&self.dims) {
            off += i * stride;
            stride *= d;
        }
        off
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseTensor {
        DenseTensor { dims: self.dims.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn scaled(&self, s: f64) -> DenseTensor {
        self.map(|v| v * s)
    }

    /// `self + s * other`, in place.
    pub fn axpy(&mut self, s: f64, other: &DenseTensor) -> Result<()> {
        self.check_same_dims(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn check_same_dims(&self, other: &DenseTensor) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::Shape(format!("dims {:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(())
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            return Err(Error::ModeOutOfRange { mode, order: self.order() });
        }
        Ok(())
    }

    /// (product of sizes before `mode`, size of `mode`, product after `mode`)
    fn split(&self, mode: usize) -> (usize, usize, usize) {
        let left = self.dims[..mode].iter().product();
        let right = self.dims[mode + 1..].iter().product();
        (left, self.dims[mode], right)
    }
}

/// Mode-`mode` unfolding `X_(mode)`, of shape `I_mode × ∏_{j≠mode} I_j`.
pub fn unfold(t: &DenseTensor, mode: usize) -> Result<Matrix> {
    t.check_mode(mode)?;
    let (left, size, right) = t.split(mode);
    let mut m = Matrix::zeros(size, left * right);
    for r in 0..right {
        for i in 0..size {
            let src = &t.data[left * (i + size * r)..left * (i + size * r) + left];
            for (l, &v) in src.iter().enumerate() {
                m.data[i + size * (l + left * r)] = v;
            }
        }
    }
    Ok(m)
}

/// Inverse of [`unfold`].
pub fn fold(m: &Matrix, mode: usize, dims: &[usize]) -> Result<DenseTensor> {
    let mut t = DenseTensor::zeros(dims)?;
    t.check_mode(mode)?;
    let (left, size, right) = t.split(mode);
    if m.rows != size || m.cols != left * right {
        return Err(Error::Shape(format!(
            "{}x{} matrix cannot fold into dims {dims:?} along mode {mode}",
            m.rows, m.cols
        )));
    }
    for r in 0..right {
        for i in 0..size {
            let dst = &mut t.data[left * (i + size * r)..left * (i + size * r) + left];
            for (l, d) in dst.iter_mut().enumerate() {
                *d = m.data[i + size * (l + left * r)];
            }
        }
    }
    Ok(t)
}

/// Mode-n product `t ×_mode u`; mode size `I_mode` is replaced by `u.rows()`.
pub fn mode_product(t: &DenseTensor, u: &Matrix, mode: usize) -> Result<DenseTensor> {
    t.check_mode(mode)?;
    let (left, size, right) = t.split(mode);
    if u.cols != size {
        return Err(Error::Shape(format!(
            "factor with {} columns cannot act on mode {mode} of size {size}",
            u.cols
        )));
    }
    let out_size = u.rows;
    let mut dims = t.dims.clone();
    dims[mode] = out_size;
    let mut data = vec![0.0; left * out_size * right];
    if left == 1 {
        for r in 0..right {
            let src = &t.data[size * r..size * (r + 1)];
            let dst = &mut data[out_size * r..out_size * (r + 1)];
            for (i, &x) in src.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                for (d, &a) in dst.iter_mut().zip(u.col(i)) {
                    *d += a * x;
                }
            }
        }
    } else {
        for r in 0..right {
            for i in 0..size {
                let src = &t.data[left * (i + size * r)..left * (i + size * r + 1)];
                for o in 0..out_size {
                    let a = u.data[o + out_size * i];
                    if a == 0.0 {
                        continue;
                    }
                    let start = left * (o + out_size * r);
                    for (d, &x) in data[start..start + left].iter_mut().zip(src) {
                        *d += a * x;
                    }
                }
            }
        }
    }
    Ok(DenseTensor { dims, data })
}

/// Applies `factors[n]` along every mode `n` for which it is `Some`, in
/// ascending mode order.
pub fn multi_mode_product(t: &DenseTensor, factors: &[Option<&Matrix>]) -> Result<DenseTensor> {
    if factors.len() != t.order() {
        return Err(Error::Shape(format!(
            "{} factors for a tensor of order {}",
            factors.len(),
            t.order()
        )));
    }
    let mut out = t.clone();
    for (n, f) in factors.iter().enumerate() {
        if let Some(u) = f {
            out = mode_product(&out, u, n)?;
        }
    }
    Ok(out)
}

/// `g ×_1 U_1 ×_2 ... ×_N U_N`.
pub fn tucker_reconstruct(g: &DenseTensor, factors: &[Matrix]) -> Result<DenseTensor> {
    let refs: Vec<Option<&Matrix>> = factors.iter().map(Some).collect();
    multi_mode_product(g, &refs)
}

/// `G_(skip) V_skipᵀ`, computed as the mode-`skip` unfolding of
/// `g` multiplied by every factor except `factors[skip]`.
pub fn core_times_all_but(g: &DenseTensor, factors: &[Matrix], skip: usize) -> Result<Matrix> {
    g.check_mode(skip)?;
    let refs: Vec<Option<&Matrix>> =
        factors.iter().enumerate().map(|(n, u)| (n != skip).then_some(u)).collect();
    unfold(&multi_mode_product(g, &refs)?, skip)
}

/// Takes `t_obs` on observed entries and `recon` elsewhere.
pub fn compose_completion(
    t_obs: &DenseTensor,
    mask: &ObservationMask,
    recon: &DenseTensor,
) -> Result<DenseTensor> {
    t_obs.check_same_dims(recon)?;
    mask.check_dims(t_obs.dims())?;
    let data = t_obs
        .data
        .iter()
        .zip(&recon.data)
        .zip(&mask.observed)
        .map(|((&t, &r), &o)| if o { t } else { r })
        .collect();
    Ok(DenseTensor { dims: t_obs.dims.clone(), data })
}

pub fn frobenius_norm(t: &DenseTensor) -> f64 {
    dot(&t.data, &t.data).sqrt()
}

pub fn inner(a: &DenseTensor, b: &DenseTensor) -> Result<f64> {
    a.check_same_dims(b)?;
    Ok(dot(&a.data, &b.data))
}

/// Boolean observation pattern Ω over a tensor's entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationMask {
    dims: Vec<usize>,
    observed: Vec<bool>,
}

impl ObservationMask {
    pub fn new(dims: Vec<usize>, observed: Vec<bool>) -> Result<Self> {
        let len = check_dims(&dims)?;
        if observed.len() != len {
            return Err(Error::Shape(format!(
                "mask dims {dims:?} need {len} entries, got {}",
                observed.len()
            )));
        }
        Ok(Self { dims, observed })
    }

    pub fn full(dims: &[usize], value: bool) -> Result<Self> {
        let len = check_dims(dims)?;
        Ok(Self { dims: dims.to_vec(), observed: vec![value; len] })
    }

    /// Interprets a tensor holding exactly 0.0 / 1.0 values as a mask.
    pub fn from_tensor(t: &DenseTensor) -> Result<Self> {
        let observed = t
            .data()
            .iter()
            .map(|&v| match v {
                v if v == 1.0 => Ok(true),
                v if v == 0.0 => Ok(false),
                v => Err(Error::Format(format!("mask value {v} is neither 0 nor 1"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dims: t.dims().to_vec(), observed })
    }

    pub fn to_tensor(&self) -> DenseTensor {
        DenseTensor {
            dims: self.dims.clone(),
            data: self.observed.iter().map(|&o| if o { 1.0 } else { 0.0 }).collect(),
        }
    }

    #[inline]
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    #[inline]
    pub fn observed(&self) -> &[bool] {
        &self.observed
    }

    #[inline]
    pub fn is_observed(&self, offset: usize) -> bool {
        self.observed[offset]
    }

    pub fn count_observed(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }

    pub fn count_missing(&self) -> usize {
        self.observed.len() - self.count_observed()
    }

    pub fn sample_ratio(&self) -> f64 {
        self.count_observed() as f64 / self.observed.len() as f64
    }

    pub fn complement(&self) -> ObservationMask {
        ObservationMask { dims: self.dims.clone(), observed: self.observed.iter().map(|o| !o).collect() }
    }

    pub(crate) fn check_dims(&self, dims: &[usize]) -> Result<()> {
        if self.dims != dims {
            return Err(Error::Shape(format!("mask dims {:?} vs tensor dims {dims:?}", self.dims)));
        }
        Ok(())
    }

    /// Zeros every entry of `t` outside Ω.
    pub fn project(&self, t: &DenseTensor) -> Result<DenseTensor> {
        self.check_dims(t.dims())?;
        let data = t.data.iter().zip(&self.observed).map(|(&v, &o)| if o { v } else { 0.0 }).collect();
        Ok(DenseTensor { dims: t.dims.clone(), data })
    }

    /// Frobenius norm of `t` restricted to Ω.
    pub fn observed_norm(&self, t: &DenseTensor) -> Result<f64> {
        self.check_dims(t.dims())?;
        Ok(t.data
            .iter()
            .zip(&self.observed)
            .filter(|(_, &o)| o)
            .map(|(v, _)| v * v)
            .sum::<f64>()
            .sqrt())
    }

    /// Mean of `t` over Ω.
    pub fn observed_mean(&self, t: &DenseTensor) -> Result<f64> {
        self.check_dims(t.dims())?;
        let n = self.count_observed();
        if n == 0 {
            return Err(Error::EmptyMask);
        }
        let sum: f64 = t.data.iter().zip(&self.observed).filter(|(_, &o)| o).map(|(v, _)| v).sum();
        Ok(sum / n as f64)
    }
}
