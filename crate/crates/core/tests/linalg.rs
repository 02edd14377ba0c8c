use lp_coreset::linalg::*;
use lp_coreset::rng::{gaussian_matrix, gaussian_vec, rng_from};
use proptest::prelude::*;

/// Singular values by one-sided Jacobi rotations on the columns.
fn jacobi_singular_values(a: &DenseMatrix) -> Vec<f64> {
    let (n, m) = a.shape();
    let mut cols: Vec<Vec<f64>> = (0..m).map(|j| a.col(j)).collect();
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..m {
            for j in i + 1..m {
                let alpha: f64 = cols[i].iter().map(|v| v * v).sum();
                let beta: f64 = cols[j].iter().map(|v| v * v).sum();
                let gamma: f64 = cols[i].iter().zip(&cols[j]).map(|(x, y)| x * y).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..n {
                    let (x, y) = (cols[i][k], cols[j][k]);
                    cols[i][k] = c * x - s * y;
                    cols[j][k] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

fn jacobi_rank(a: &DenseMatrix) -> usize {
    let sv = jacobi_singular_values(a);
    sv.iter().filter(|&&s| s > 1e-10 * sv[0]).count()
}

#[test]
fn gaussian_matrices_have_full_rank() {
    for seed in 0..20 {
        let a = gaussian_matrix(100, 3, seed);
        assert_eq!(jacobi_rank(&a), 3);
        assert_eq!(numeric_rank(&a, DEFAULT_RANK_TOL).unwrap(), 3);
    }
}

#[test]
fn planted_rank_matches_the_svd_oracle() {
    for (seed, (n, m, r)) in [(60, 5, 2), (40, 6, 4), (30, 3, 1), (80, 8, 8), (25, 7, 5)].into_iter().enumerate() {
        let left = gaussian_matrix(n, r, 10 + seed as u64);
        let right = gaussian_matrix(r, m, 20 + seed as u64);
        let a = left.matmul(&right).unwrap();
        assert_eq!(jacobi_rank(&a), r);
        assert_eq!(numeric_rank(&a, DEFAULT_RANK_TOL).unwrap(), r, "{n}x{m} rank {r}");
    }
}

#[test]
fn qr_examples() {
    let f = qr_thin(&DenseMatrix::identity(3), DEFAULT_RANK_TOL).unwrap();
    assert_eq!(f.rank, 3);
    let col = DenseMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
    let f = qr_thin(&col, DEFAULT_RANK_TOL).unwrap();
    assert_eq!(f.rank, 1);
    assert!((f.q[(0, 0)].abs() - 0.5f64.sqrt()).abs() <= 1e-15);
    let collinear = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![-1.0, -2.0], vec![3.0, 6.0]]).unwrap();
    assert_eq!(numeric_rank(&collinear, DEFAULT_RANK_TOL).unwrap(), 1);
    assert_eq!(numeric_rank(&DenseMatrix::zeros(3, 2), DEFAULT_RANK_TOL).unwrap(), 0);
}

#[test]
fn entrywise_norm_sums_rows_and_columns() {
    let m = gaussian_matrix(30, 4, 3);
    for p in [1.0, 1.5, 2.0, 3.0, 7.5] {
        let total = mat_entrywise_p_norm(&m, p).unwrap().powf(p);
        let by_col: f64 = (0..4).map(|j| vec_p_norm(&m.col(j), p).unwrap().powf(p)).sum();
        let by_row: f64 = (0..30).map(|i| vec_p_norm(m.row(i), p).unwrap().powf(p)).sum();
        assert!((total - by_col).abs() <= 1e-10 * total);
        assert!((total - by_row).abs() <= 1e-10 * total);
    }
}

#[test]
fn qr_reconstructs_random_matrices() {
    for t in 0..200u64 {
        let n = 1 + (t as usize * 13) % 200;
        let m = 1 + (t as usize * 7) % 20;
        let a = gaussian_matrix(n, m.min(n.max(1)), 1000 + t);
        let f = qr_thin(&a, DEFAULT_RANK_TOL).unwrap();
        let recon = f.q.matmul(&f.r_unpivoted()).unwrap();
        assert!(recon.sub(&a).unwrap().max_abs() <= 1e-10 * a.max_abs().max(1.0), "instance {t}");
        let qtq = f.q.transpose().matmul(&f.q).unwrap();
        assert!(qtq.sub(&DenseMatrix::identity(f.rank)).unwrap().max_abs() <= 1e-12);
    }
}

proptest! {
    #[test]
    fn norm_is_homogeneous(seed in 0u64..1000, c in -1e3f64..1e3, p in prop_oneof![Just(1.0), Just(2.0), 1.0f64..10.0]) {
        let v = gaussian_vec(&mut rng_from(seed), 17);
        let scaled: Vec<f64> = v.iter().map(|x| c * x).collect();
        let lhs = lp_norm(&scaled, p);
        let rhs = c.abs() * lp_norm(&v, p);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn relaxed_triangle_inequality_for_pth_powers(seed in 0u64..1000, p in prop_oneof![Just(1.0), Just(1.5), Just(2.0), Just(3.0)]) {
        let mut rng = rng_from(seed);
        let v = gaussian_vec(&mut rng, 9);
        let w = gaussian_vec(&mut rng, 9);
        let u = gaussian_vec(&mut rng, 9);
        let d = |x: &[f64], y: &[f64]| {
            let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
            lp_norm(&diff, p).powf(p)
        };
        let bound = 2f64.powf(p - 1.0) * (d(&v, &u) + d(&u, &w));
        prop_assert!(d(&v, &w) <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn jacobi_and_qr_agree_on_rank(seed in 0u64..500, n in 8usize..40, m in 1usize..6, r in 1usize..6) {
        let r = r.min(m);
        let a = gaussian_matrix(n, r, seed).matmul(&gaussian_matrix(r, m, seed + 1)).unwrap();
        prop_assert_eq!(numeric_rank(&a, DEFAULT_RANK_TOL).unwrap(), jacobi_rank(&a));
    }
}
