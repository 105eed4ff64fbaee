use nalgebra::{DMatrix, DVector};

use super::left_inverse;
use crate::linalg;
use crate::lti::LtiSystem;
use crate::rng::{rand_matrix, Require, SeededRng};
use crate::{cst, tol, Error, Real, Result};

/// Lifted input encoding ũ = Ḡu + b with b ∈ ker Ḡˡ, so that Ḡˡũ = u.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredNoiseKey<T: Real> {
    pub g_bar: DMatrix<T>,
    /// Moore-Penrose left inverse of `g_bar`.
    pub g_left: DMatrix<T>,
    /// Orthonormal basis of ker Ḡˡ.
    pub noise_basis: DMatrix<T>,
    pub radius: T,
    pub t_bar: DMatrix<T>,
    pub s_bar: DMatrix<T>,
}

impl<T: Real> StructuredNoiseKey<T> {
    pub fn new(g_bar: DMatrix<T>, t_bar: DMatrix<T>, s_bar: DMatrix<T>, radius: T) -> Result<Self> {
        let m = g_bar.ncols();
        if g_bar.nrows() <= m || linalg::rank(&g_bar) < m {
            return Err(Error::InvalidArgument("Ḡ must be tall with full column rank".into()));
        }
        let g_left = left_inverse(&g_bar);
        let noise_basis = linalg::null_space(&g_left, tol::DEFAULT.rank);
        Ok(Self { g_bar, g_left, noise_basis, radius, t_bar, s_bar })
    }

    /// Ḡˡũ.
    pub fn decode(&self, u_enc: &DVector<T>) -> DVector<T> {
        &self.g_left * u_enc
    }

    /// The lifted system (T̄AT̄ˡ, T̄BḠˡ, S̄CT̄ˡ) the solver receives.
    pub fn immersed_system(&self, sys: &LtiSystem<T>) -> Result<LtiSystem<T>> {
        let tl = left_inverse(&self.t_bar);
        LtiSystem::new(
            &self.t_bar * &sys.a * &tl,
            &self.t_bar * &sys.b * &self.g_left,
            &self.s_bar * &sys.c * &tl,
            sys.discrete,
        )
    }
}

pub fn gen_structured_noise_key<T: Real>(
    rng: &mut SeededRng,
    sys: &LtiSystem<T>,
    dims: (usize, usize, usize),
    range: (f64, f64),
    radius: T,
) -> Result<StructuredNoiseKey<T>> {
    let (n_bar, m_bar, p_bar) = dims;
    let (lo, hi) = range;
    let t_bar = rand_matrix(rng, n_bar, sys.n(), lo, hi, Require::FullColumnRank)?;
    let g_bar = rand_matrix(rng, m_bar, sys.m(), lo, hi, Require::FullColumnRank)?;
    let s_bar = rand_matrix(rng, p_bar, sys.p(), lo, hi, Require::FullColumnRank)?;
    StructuredNoiseKey::new(g_bar, t_bar, s_bar, radius)
}

/// ũ = Ḡu + b with b uniform in the ball of radius `key.radius` in ker Ḡˡ.
pub fn encode_structured_noise<T: Real>(key: &StructuredNoiseKey<T>, rng: &mut SeededRng, u: &DVector<T>) -> DVector<T> {
    let k = key.noise_basis.ncols();
    if k == 0 {
        return encode_with(key, u, &DVector::zeros(0));
    }
    let dir: DVector<T> = rng.normal_vector(k);
    let norm = dir.norm();
    let scale = if norm > T::zero() {
        key.radius * cst::<T>(rng.uniform(0.0, 1.0).powf(1.0 / k as f64)) / norm
    } else {
        T::zero()
    };
    encode_with(key, u, &(dir * scale))
}

/// ũ = Ḡu + K·w for the noise basis K and given coordinates w.
pub fn encode_with<T: Real>(key: &StructuredNoiseKey<T>, u: &DVector<T>, w: &DVector<T>) -> DVector<T> {
    let mut out = &key.g_bar * u;
    if !w.is_empty() {
        out += &key.noise_basis * w;
    }
    out
}
