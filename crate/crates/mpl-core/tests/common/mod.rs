#![allow(dead_code)]

use mpl_core::rng::SeededRng;
use mpl_core::{linalg, lti, LtiSystem64};
use nalgebra::{Complex, DMatrix, DVector};

/// Random minimal discrete system with spectral radius `rho`.
pub fn stable_system(rng: &mut SeededRng, n: usize, m: usize, p: usize, rho: f64) -> LtiSystem64 {
    loop {
        let a: DMatrix<f64> = rng.uniform_matrix(n, n, -1.0, 1.0);
        let r = linalg::spectral_radius(&a);
        if r < 1e-3 {
            continue;
        }
        let a = a * (rho / r);
        let b = rng.uniform_matrix(n, m, -1.0, 1.0);
        let c = rng.uniform_matrix(p, n, -1.0, 1.0);
        let sys = LtiSystem64::new(a, b, c, true).unwrap();
        if lti::is_minimal(&sys) {
            return sys;
        }
    }
}

/// Random symmetric positive definite matrix with eigenvalues ≥ `floor`.
pub fn spd(rng: &mut SeededRng, n: usize, floor: f64) -> DMatrix<f64> {
    let g: DMatrix<f64> = rng.uniform_matrix(n, n, -1.0, 1.0);
    &g * g.transpose() + DMatrix::identity(n, n) * floor
}

pub fn random_vector(rng: &mut SeededRng, n: usize, scale: f64) -> DVector<f64> {
    rng.normal_vector::<f64>(n) * scale
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn real_sorted(zs: &[Complex<f64>]) -> Vec<f64> {
    let mut v: Vec<f64> = zs.iter().map(|z| z.re).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// Σ_{i<N} (Aᵀ)^i Q A^i, computed term by term.
pub fn lyapunov_series(a: &DMatrix<f64>, q: &DMatrix<f64>, terms: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let mut sum = DMatrix::zeros(n, n);
    let mut pow = DMatrix::identity(n, n);
    for _ in 0..terms {
        sum += pow.transpose() * q * &pow;
        pow = a * pow;
    }
    sum
}

/// Rolls the dynamics forward from x0 under the input sequence z.
pub fn simulate(sys: &LtiSystem64, x0: &DVector<f64>, z: &DVector<f64>) -> Vec<DVector<f64>> {
    let m = sys.m();
    let mut xs = vec![x0.clone()];
    for k in 0..z.len() / m {
        let u = z.rows(k * m, m);
        let next = &sys.a * &xs[k] + &sys.b * u;
        xs.push(next);
    }
    xs
}
