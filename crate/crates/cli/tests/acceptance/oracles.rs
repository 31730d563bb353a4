//! Reference computations written independently of the library kernels.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tuckercomp::{DenseTensor, Matrix, ObservationMask};

pub fn random_tensor(dims: &[usize], rng: &mut ChaCha8Rng) -> DenseTensor {
    let n = dims.iter().product();
    DenseTensor::new(dims.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_col_major(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows() * b.rows(), a.cols() * b.cols());
    for ja in 0..a.cols() {
        for ia in 0..a.rows() {
            for jb in 0..b.cols() {
                for ib in 0..b.rows() {
                    out.set(ia * b.rows() + ib, ja * b.cols() + jb, a.get(ia, ja) * b.get(ib, jb));
                }
            }
        }
    }
    out
}

/// `U_N ⊗ ⋯ ⊗ U_1`.
pub fn kron_chain(factors: &[Matrix]) -> Matrix {
    factors.iter().fold(Matrix::identity(1), |acc, u| kron(u, &acc))
}

pub fn mat_vec(m: &Matrix, v: &[f64]) -> Vec<f64> {
    (0..m.rows()).map(|i| (0..m.cols()).map(|j| m.get(i, j) * v[j]).sum()).collect()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Descending singular values from the eigenvalues of `MᵀM`.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    let a = DMatrix::from_column_slice(m.rows(), m.cols(), m.data());
    let mut s: Vec<f64> =
        (a.transpose() * &a).symmetric_eigen().eigenvalues.iter().map(|&e| e.max(0.0).sqrt()).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s.truncate(m.rows().min(m.cols()));
    s
}

/// Observed entries kept, the rest set to the mean of the observed ones.
pub fn mean_fill(t: &DenseTensor, mask: &ObservationMask) -> DenseTensor {
    let (mut sum, mut n) = (0.0, 0usize);
    for i in 0..t.len() {
        if mask.observed()[i] {
            sum += t.data()[i];
            n += 1;
        }
    }
    let mean = sum / n as f64;
    let data = (0..t.len()).map(|i| if mask.observed()[i] { t.data()[i] } else { mean }).collect();
    DenseTensor::new(t.dims().to_vec(), data).unwrap()
}

pub fn rse(est: &DenseTensor, truth: &DenseTensor) -> f64 {
    let num: f64 = est.data().iter().zip(truth.data()).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = truth.data().iter().map(|b| b * b).sum();
    (num / den).sqrt()
}

/// Mean over mode-3 slices of `10 log10(max² / MSE)` on missing entries.
pub fn mpsnr(est: &DenseTensor, truth: &DenseTensor, mask: &ObservationMask) -> f64 {
    let d = truth.dims();
    let peak = truth.data().iter().copied().fold(f64::MIN, f64::max);
    let mut values = Vec::new();
    for k in 0..d[2] {
        let (mut sq, mut n) = (0.0, 0usize);
        for j in 0..d[1] {
            for i in 0..d[0] {
                if !mask.is_observed(truth.offset(&[i, j, k])) {
                    sq += (est.get(&[i, j, k]) - truth.get(&[i, j, k])).powi(2);
                    n += 1;
                }
            }
        }
        if n > 0 {
            values.push(10.0 * (peak * peak * n as f64 / sq).log10());
        }
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// A 64×64 RGB test scene: colour gradients, a disc and a diagonal band,
/// quantized to 8 bits.
pub fn test_image_ppm() -> Vec<u8> {
    let n = 64;
    let mut bytes = format!("P6\n{n} {n}\n255\n").into_bytes();
    for r in 0..n {
        for c in 0..n {
            let (y, x) = (r as f64 / 63.0, c as f64 / 63.0);
            let disc = ((x - 0.35).powi(2) + (y - 0.4).powi(2)).sqrt() < 0.22;
            let band = (0.6 * x + 0.4 * y - 0.75).abs() < 0.08;
            let base = [0.3 + 0.5 * x, 0.2 + 0.6 * y * (1.0 - x), 0.7 - 0.4 * x * y];
            for ch in 0..3 {
                let mut v = base[ch] + 0.05 * (9.0 * x + 3.0 * ch as f64).sin() * (7.0 * y).cos();
                if disc {
                    v = [0.9, 0.3, 0.2][ch] - 0.2 * y;
                }
                if band {
                    v = [0.15, 0.5, 0.85][ch];
                }
                bytes.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
    }
    bytes
}
