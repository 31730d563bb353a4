mod common;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use tuckercomp::linalg::*;
use tuckercomp::{DenseTensor, Matrix};

/// Singular values via the eigenvalues of `MᵀM` in nalgebra.
fn oracle_singular_values(m: &Matrix) -> Vec<f64> {
    let a = DMatrix::from_column_slice(m.rows(), m.cols(), m.data());
    let gram = a.transpose() * &a;
    let mut s: Vec<f64> = gram.symmetric_eigen().eigenvalues.iter().map(|&e| e.max(0.0).sqrt()).collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s.truncate(m.rows().min(m.cols()));
    s
}

fn prox_objective(x: &Matrix, m: &Matrix, tau: f64) -> f64 {
    let fit: f64 = x.data().iter().zip(m.data()).map(|(a, b)| (a - b) * (a - b)).sum();
    tau * nuclear_norm(x).unwrap() + 0.5 * fit
}

#[test]
fn soft_threshold_closed_form() {
    let mut r = rng(10);
    let t = random_tensor(&[4, 3, 2], &mut r).scaled(3.0);
    for tau in [0.0, 0.3, 1.0, 5.0] {
        let s = soft_threshold(&t, tau).unwrap();
        for (&a, &b) in t.data().iter().zip(s.data()) {
            assert_eq!(b, a.signum() * (a.abs() - tau).max(0.0));
        }
    }
    assert!(soft_threshold(&t, -1.0).is_err());
}

#[test]
fn jacobi_singular_values_match_eigen_oracle() {
    let mut r = rng(11);
    for (rows, cols) in [(5, 5), (7, 3), (3, 7), (1, 4), (6, 1)] {
        let m = random_matrix(rows, cols, &mut r);
        let got = singular_values(&m).unwrap();
        let want = oracle_singular_values(&m);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-9 * want[0].max(1.0), "{rows}x{cols}: {got:?} vs {want:?}");
        }
        let svd = thin_svd(&m).unwrap();
        assert!(rel_err(svd.reconstruct().data(), m.data()) < 1e-12);
    }
}

#[test]
fn svd_shrink_is_the_prox_of_the_nuclear_norm() {
    let mut r = rng(12);
    for trial in 0..10 {
        let m = random_matrix(5, 5, &mut r).scaled(2.0);
        let tau = r.random_range(0.1..1.5);
        let x = svd_shrink(&m, tau).unwrap();
        let before = oracle_singular_values(&m);
        let after = singular_values(&x).unwrap();
        for (a, b) in after.iter().zip(&before) {
            assert!((a - (b - tau).max(0.0)).abs() < 1e-9, "trial {trial}");
        }
        let best = prox_objective(&x, &m, tau);
        for _ in 0..200 {
            let scale = r.random_range(1e-4..1.0);
            let dir = random_matrix(5, 5, &mut r);
            let mut y = x.clone();
            y.axpy(scale / dir.frobenius_norm(), &dir).unwrap();
            assert!(prox_objective(&y, &m, tau) >= best - 1e-12, "trial {trial} beaten by perturbation");
        }
    }
}

#[test]
fn norm_examples() {
    let i = Matrix::identity(4);
    assert!((nuclear_norm(&i).unwrap() - 4.0).abs() < 1e-12);
    assert!((spectral_norm(&i).unwrap() - 1.0).abs() < 1e-12);
    let d = Matrix::from_diag(&[3.0, 1.0]);
    assert!((nuclear_norm(&d).unwrap() - 4.0).abs() < 1e-12);
    assert!((spectral_norm(&d).unwrap() - 3.0).abs() < 1e-12);
    assert_eq!(nuclear_norm(&Matrix::zeros(3, 2)).unwrap(), 0.0);
}

#[test]
fn rank_deficient_inputs_converge() {
    let u = Matrix::from_col_major(4, 1, vec![1.0, 2.0, 0.0, -1.0]).unwrap();
    let v = Matrix::from_col_major(3, 1, vec![0.5, -1.0, 2.0]).unwrap();
    let m = u.matmul_t(&v).unwrap();
    let svd = thin_svd(&m).unwrap();
    assert_eq!(svd.numerical_rank(), 1);
    assert!(rel_err(svd.reconstruct().data(), m.data()) < 1e-12);
}

proptest! {
    #[test]
    fn soft_threshold_is_a_contraction(seed in any::<u64>(), tau in 0.0f64..2.0) {
        let mut r = rng(seed);
        let a = random_tensor(&[3, 3, 2], &mut r).scaled(2.0);
        let b = random_tensor(&[3, 3, 2], &mut r).scaled(2.0);
        let sa = soft_threshold(&a, tau).unwrap();
        let sb = soft_threshold(&b, tau).unwrap();
        let d = |x: &DenseTensor, y: &DenseTensor| tuckercomp::tensor::frobenius_norm(&x.sub(y).unwrap());
        prop_assert!(d(&sa, &sb) <= d(&a, &b) + 1e-12);
    }

    #[test]
    fn svd_shrink_singular_values(seed in any::<u64>(), tau in 0.0f64..2.0, rows in 1usize..6, cols in 1usize..6) {
        let mut r = rng(seed);
        let m = random_matrix(rows, cols, &mut r).scaled(2.0);
        let s = singular_values(&m).unwrap();
        let shrunk = singular_values(&svd_shrink(&m, tau).unwrap()).unwrap();
        for (a, b) in shrunk.iter().zip(&s) {
            prop_assert!((a - (b - tau).max(0.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn spectral_norm_of_gram(seed in any::<u64>(), rows in 1usize..7, cols in 1usize..7) {
        let mut r = rng(seed);
        let m = random_matrix(rows, cols, &mut r);
        let s = spectral_norm(&m).unwrap();
        let g = spectral_norm(&m.t_matmul(&m).unwrap()).unwrap();
        prop_assert!((g - s * s).abs() <= 1e-9 * g.max(1e-300));
    }

    #[test]
    fn norm_ordering(seed in any::<u64>(), rows in 1usize..7, cols in 1usize..7) {
        let mut r = rng(seed);
        let m = random_matrix(rows, cols, &mut r);
        let spec = spectral_norm(&m).unwrap();
        let fro = m.frobenius_norm();
        let nuc = nuclear_norm(&m).unwrap();
        prop_assert!(spec <= fro * (1.0 + 1e-12) && fro <= nuc * (1.0 + 1e-12));
    }
}
