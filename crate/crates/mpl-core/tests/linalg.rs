mod common;

use approx::assert_relative_eq;
use mpl_core::linalg;
use mpl_core::rng::SeededRng;
use nalgebra::{Complex, DMatrix};
use proptest::prelude::*;

use common::{lyapunov_series, max_abs, stable_system};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-5.0..5.0f64, rows * cols).prop_map(move |v| DMatrix::from_row_slice(rows, cols, &v))
}

fn sized_matrix(max: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (1..=max, 1..=max).prop_flat_map(|(r, c)| matrix(r, c))
}

proptest! {
    #[test]
    fn kron_matches_elementwise_definition(a in sized_matrix(3), b in sized_matrix(3)) {
        let k = linalg::kron(&a, &b);
        let (p, q) = b.shape();
        prop_assert_eq!(k.shape(), (a.nrows() * p, a.ncols() * q));
        for i in 0..k.nrows() {
            for j in 0..k.ncols() {
                prop_assert_eq!(k[(i, j)], a[(i / p, j / q)] * b[(i % p, j % q)]);
            }
        }
    }

    #[test]
    fn pinv_satisfies_penrose_conditions(m in sized_matrix(5)) {
        let x = linalg::pinv(&m);
        let scale = 1.0 + max_abs(&m) * max_abs(&x);
        prop_assert!(max_abs(&(&m * &x * &m - &m)) <= 1e-9 * scale * max_abs(&m));
        prop_assert!(max_abs(&(&x * &m * &x - &x)) <= 1e-9 * scale * max_abs(&x));
        let mx = &m * &x;
        let xm = &x * &m;
        prop_assert!(max_abs(&(&mx - mx.transpose())) <= 1e-9 * scale);
        prop_assert!(max_abs(&(&xm - xm.transpose())) <= 1e-9 * scale);
    }

    #[test]
    fn null_space_is_orthonormal_and_annihilated(m in sized_matrix(5)) {
        let k = linalg::null_space(&m, 1e-10);
        prop_assert_eq!(k.ncols(), m.ncols() - linalg::rank(&m));
        if k.ncols() > 0 {
            prop_assert!(max_abs(&(&m * &k)) < 1e-9 * (1.0 + max_abs(&m)));
            let g = k.transpose() * &k;
            prop_assert!(max_abs(&(g - DMatrix::identity(k.ncols(), k.ncols()))) < 1e-10);
        }
    }

    #[test]
    fn full_rank_factorization_reconstructs(l in matrix(5, 2), r in matrix(2, 6)) {
        let m = &l * &r;
        prop_assume!(linalg::rank(&m) == 2);
        let (left, right) = linalg::full_rank_factorize(&m, 2).unwrap();
        prop_assert_eq!(left.shape(), (5, 2));
        prop_assert!(max_abs(&(&left * &right - &m)) < 1e-9 * (1.0 + max_abs(&m)));
    }

    #[test]
    fn psd_clip_is_psd_and_idempotent(m in matrix(4, 4)) {
        let s = linalg::symmetrize(&m);
        let c = linalg::psd_clip(&s);
        prop_assert!(linalg::psd_min_eig(&c).unwrap() >= -1e-10);
        prop_assert!(max_abs(&(linalg::psd_clip(&c) - &c)) < 1e-9);
    }
}

/// Minimizes ‖ZΘ‖_F s.t. E₀Θ = I through the full KKT system, column by
/// column: [2ZᵀZ E₀ᵀ; E₀ 0][θ; λ] = [0; eᵢ].
fn lsq_by_kkt(z: &DMatrix<f64>, e0: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, k) = e0.shape();
    let mut kkt = DMatrix::zeros(k + n, k + n);
    kkt.view_mut((0, 0), (k, k)).copy_from(&(z.transpose() * z * 2.0));
    kkt.view_mut((0, k), (k, n)).copy_from(&e0.transpose());
    kkt.view_mut((k, 0), (n, k)).copy_from(e0);
    let lu = kkt.lu();
    let mut theta = DMatrix::zeros(k, n);
    for i in 0..n {
        let mut rhs = nalgebra::DVector::zeros(k + n);
        rhs[k + i] = 1.0;
        let sol = lu.solve(&rhs).unwrap();
        theta.set_column(i, &sol.rows(0, k));
    }
    theta
}

#[test]
fn equality_constrained_lsq_matches_kkt_solution() {
    for seed in 0..20 {
        let mut rng = SeededRng::new(seed);
        let e0: DMatrix<f64> = rng.uniform_matrix(3, 9, -1.0, 1.0);
        let z: DMatrix<f64> = rng.uniform_matrix(8, 9, -1.0, 1.0);
        let (theta, eps) = linalg::eq_constrained_lsq(&z, &e0).unwrap();
        let oracle = lsq_by_kkt(&z, &e0);
        assert!(max_abs(&(&e0 * &theta - DMatrix::identity(3, 3))) < 1e-10);
        assert_relative_eq!(eps, (&z * &oracle).norm(), max_relative = 1e-8);
        assert!(max_abs(&(&theta - &oracle)) < 1e-8);
    }
}

#[test]
fn equality_constrained_lsq_reaches_zero_when_satisfiable() {
    let mut rng = SeededRng::new(3);
    let e0: DMatrix<f64> = rng.uniform_matrix(2, 8, -1.0, 1.0);
    let z: DMatrix<f64> = rng.uniform_matrix(3, 8, -1.0, 1.0);
    let (_, eps) = linalg::eq_constrained_lsq(&z, &e0).unwrap();
    assert!(eps < 1e-12, "{eps}");
}

#[test]
fn dlyap_residual_and_series_agree_on_stable_systems() {
    for seed in 0..100 {
        let mut rng = SeededRng::new(seed);
        let n = 1 + (seed as usize % 4);
        let sys = stable_system(&mut rng, n, 1, 1, 0.85);
        let q = common::spd(&mut rng, n, 0.1);
        let y = linalg::dlyap(&sys.a, &q).unwrap();
        let resid = sys.a.transpose() * &y * &sys.a - &y + &q;
        assert!(resid.norm() <= 1e-10 * y.norm(), "seed {seed}: {}", resid.norm() / y.norm());
        // 0.85^400 is far below double precision.
        let series = lyapunov_series(&sys.a, &q, 400);
        assert!(max_abs(&(&series - &y)) <= 1e-8 * (1.0 + max_abs(&y)), "seed {seed}");
    }
}

#[test]
fn dlyap_rejects_unstable_matrices() {
    let a = DMatrix::from_row_slice(2, 2, &[1.1, 0.0, 0.0, 0.5]);
    assert!(matches!(linalg::dlyap(&a, &DMatrix::identity(2, 2)), Err(mpl_core::Error::Unstable(_))));
}

#[test]
fn expm_of_diagonal_and_nilpotent() {
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, 0.5, 3.0]));
    let e = linalg::expm(&d).unwrap();
    for (i, l) in [-1.0f64, 0.5, 3.0].iter().enumerate() {
        assert_relative_eq!(e[(i, i)], l.exp(), max_relative = 1e-14);
    }
    // exp([[0, t], [0, 0]]) = [[1, t], [0, 1]].
    let n = DMatrix::from_row_slice(2, 2, &[0.0, 7.0, 0.0, 0.0]);
    let e = linalg::expm(&n).unwrap();
    assert!(max_abs(&(e - DMatrix::from_row_slice(2, 2, &[1.0, 7.0, 0.0, 1.0]))) < 1e-13);
}

#[test]
fn expm_matches_taylor_series_on_small_matrices() {
    for seed in 0..20 {
        let mut rng = SeededRng::new(seed);
        let a: DMatrix<f64> = rng.uniform_matrix(4, 4, -0.5, 0.5);
        let mut term = DMatrix::identity(4, 4);
        let mut sum = term.clone();
        for k in 1..40 {
            term = &term * &a / k as f64;
            sum += &term;
        }
        assert!(max_abs(&(linalg::expm(&a).unwrap() - sum)) < 1e-13);
    }
}

#[test]
fn expm_handles_large_norm_by_squaring() {
    // Rotation generator: exp(θJ) = [[cos θ, sin θ], [−sin θ, cos θ]].
    let theta = 40.0f64;
    let j = DMatrix::from_row_slice(2, 2, &[0.0, theta, -theta, 0.0]);
    let e = linalg::expm(&j).unwrap();
    let expect = DMatrix::from_row_slice(2, 2, &[theta.cos(), theta.sin(), -theta.sin(), theta.cos()]);
    assert!(max_abs(&(e - expect)) < 1e-11);
}

#[test]
fn hankel_realization_reproduces_markov_parameters() {
    for seed in 0..20 {
        let mut rng = SeededRng::new(seed);
        let n = 2 + (seed as usize % 3);
        let sys = stable_system(&mut rng, n, 2, 2, 0.9);
        let markov = mpl_core::lti::markov_parameters(&sys, 2 * n + 1).unwrap();
        let real = linalg::hankel_realize(&markov, n).unwrap();
        let mut ab = real.b_t.clone();
        for h in &markov {
            let est = &real.c_t * &ab;
            assert!(max_abs(&(est - h)) < 1e-8, "seed {seed}");
            ab = &real.a_t * ab;
        }
        let d = linalg::multiset_distance(&linalg::eigenvalues(&real.a_t), &linalg::eigenvalues(&sys.a));
        assert!(d < 1e-6, "seed {seed}: {d}");
    }
}

#[test]
fn hankel_realization_detects_wrong_order() {
    let mut rng = SeededRng::new(1);
    let sys = stable_system(&mut rng, 2, 1, 1, 0.8);
    let markov = mpl_core::lti::markov_parameters(&sys, 9).unwrap();
    assert!(matches!(linalg::hankel_realize(&markov, 4), Err(mpl_core::Error::RankMismatch { expected: 4, found: 2 })));
}

#[test]
fn error_index_and_multiset_distance() {
    let a = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 4.0]);
    assert_eq!(linalg::error_index(&a, &a).unwrap(), 0.0);
    assert_relative_eq!(linalg::error_index(&a, &DMatrix::zeros(2, 2)).unwrap(), 1.0);
    let x = [Complex::new(1.0, 0.0), Complex::new(2.0, 0.0)];
    let y = [Complex::new(2.0, 0.0), Complex::new(1.5, 0.0)];
    assert_relative_eq!(linalg::multiset_distance(&x, &y), 0.5);
    assert_eq!(linalg::multiset_distance(&x, &y[..1]), f64::INFINITY);
}

#[test]
fn rank_respects_relative_tolerance() {
    let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1e-6, 1e-14]));
    assert_eq!(linalg::rank(&m), 2);
    assert_eq!(linalg::numerical_rank(&m, 1e-5), 1);
}

#[test]
fn f32_instantiation_agrees_with_f64() {
    let a64 = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.3]);
    let a32 = a64.map(|v| v as f32);
    let q64 = DMatrix::identity(2, 2);
    let y64 = linalg::dlyap(&a64, &q64).unwrap();
    let y32 = linalg::dlyap(&a32, &q64.map(|v| v as f32)).unwrap();
    assert!(max_abs(&(y32.map(f64::from) - y64)) < 1e-5);
}

#[test]
fn svd_reconstructs_rank_deficient_wide_matrix() {
    // Product of 5×2 and 2×6 factors on which a bidiagonal QR SVD loses the
    // decomposition.
    #[rustfmt::skip]
    let l = DMatrix::from_column_slice(5, 2, &[
        0.0, -0.6922959944135441, 2.8198458633572017, -4.878604440591063, 2.7975242417238313,
        -0.3797048305195209, -4.646562554261234, 4.182312566205816, 3.1660290739996997, -2.133057936808012,
    ]);
    #[rustfmt::skip]
    let r = DMatrix::from_column_slice(2, 6, &[
        -0.35788437845668764, -3.743520686029779, 3.3554447391365017, 0.34346295289453405,
        2.2188487974177233, -2.52839964627662, 2.0924273949797345, 1.4021999626125763,
        1.393794626124828, 0.10744519957735837, -0.5590201837768868, -1.5874678771619875,
    ]);
    let m = &l * &r;
    let svd = linalg::Svd::new(&m);
    let s = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(svd.s.clone()));
    assert!(max_abs(&(&svd.u * s * &svd.v_t - &m)) < 1e-12 * max_abs(&m));
    assert_eq!(svd.rank(1e-10), 2);
}

proptest! {
    #[test]
    fn svd_is_orthonormal_and_reconstructs(m in sized_matrix(6)) {
        let svd = linalg::Svd::new(&m);
        let k = svd.s.len();
        prop_assert_eq!(k, m.nrows().min(m.ncols()));
        prop_assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
        let s = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(svd.s.clone()));
        prop_assert!(max_abs(&(&svd.u * s * &svd.v_t - &m)) < 1e-12 * (1.0 + max_abs(&m)));
        prop_assert!(max_abs(&(svd.u.transpose() * &svd.u - DMatrix::identity(k, k))) < 1e-12);
        prop_assert!(max_abs(&(&svd.v_t * svd.v_t.transpose() - DMatrix::identity(k, k))) < 1e-12);
    }
}
