#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tuckercomp::{DenseTensor, Matrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(dims: &[usize], rng: &mut ChaCha8Rng) -> DenseTensor {
    let n = dims.iter().product();
    DenseTensor::new(dims.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_col_major(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// `a ⊗ b` by definition.
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

/// `U_N ⊗ ⋯ ⊗ U_1`, skipping `skip` when given.
pub fn kron_chain(factors: &[Matrix], skip: Option<usize>) -> Matrix {
    let mut acc = Matrix::identity(1);
    for (n, u) in factors.iter().enumerate() {
        if Some(n) != skip {
            acc = kron(u, &acc);
        }
    }
    acc
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

/// Direct element-by-element unfolding.
pub fn unfold_by_index(t: &DenseTensor, mode: usize) -> Matrix {
    let dims = t.dims();
    let cols: usize = dims.iter().enumerate().filter(|&(n, _)| n != mode).map(|(_, &d)| d).product();
    let mut m = Matrix::zeros(dims[mode], cols);
    let mut idx = vec![0usize; dims.len()];
    for &v in t.data() {
        let mut col = 0;
        let mut stride = 1;
        for (n, &i) in idx.iter().enumerate() {
            if n != mode {
                col += i * stride;
                stride *= dims[n];
            }
        }
        m.set(idx[mode], col, v);
        for (n, i) in idx.iter_mut().enumerate() {
            *i += 1;
            if *i < dims[n] {
                break;
            }
            *i = 0;
        }
    }
    m
}
