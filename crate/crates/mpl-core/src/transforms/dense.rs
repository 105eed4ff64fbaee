use nalgebra::{DMatrix, DVector};

use crate::dense::{DenseQp, QpShape};
use crate::rng::{rand_matrix, Require, SeededRng};
use crate::{Error, Real, Result};

/// Change of variables z = 𝐑ζ + 𝐫 with an optional row shuffle 𝐏 of the
/// constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseKey<T: Real> {
    pub r_mat: DMatrix<T>,
    pub r_vec: DVector<T>,
    /// Row i of the shuffled constraints is row `perm[i]` of the original.
    pub perm: Option<Vec<usize>>,
    pub time_varying: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseKeyConfig {
    pub low: f64,
    pub high: f64,
    pub permute: bool,
    pub time_varying: bool,
}

impl Default for DenseKeyConfig {
    fn default() -> Self {
        Self { low: -1e3, high: 1e3, permute: true, time_varying: false }
    }
}

/// One transformed QP instance: min ½ζᵀH̃ζ + f̃ᵀζ s.t. G̃ζ ≤ ẽ.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedQp<T: Real> {
    pub h_t: DMatrix<T>,
    pub f_t: DVector<T>,
    pub g_t: DMatrix<T>,
    pub e_t: DVector<T>,
}

impl<T: Real> DenseKey<T> {
    pub fn identity(shape: QpShape) -> Self {
        let k = shape.nvar();
        Self { r_mat: DMatrix::identity(k, k), r_vec: DVector::zeros(k), perm: None, time_varying: false }
    }

    /// z = 𝐑ζ + 𝐫.
    pub fn recover(&self, zeta: &DVector<T>) -> DVector<T> {
        &self.r_mat * zeta + &self.r_vec
    }

    fn validate(&self, shape: QpShape) -> Result<()> {
        let k = shape.nvar();
        if self.r_mat.shape() != (k, k) || self.r_vec.len() != k {
            return Err(Error::InvalidArgument("dense key does not match the problem size".into()));
        }
        if let Some(perm) = &self.perm {
            let mut seen = vec![false; shape.ncon()];
            if perm.len() != seen.len() || perm.iter().any(|&i| i >= seen.len() || std::mem::replace(&mut seen[i], true)) {
                return Err(Error::InvalidArgument("row shuffle is not a permutation".into()));
            }
        }
        Ok(())
    }
}

pub fn gen_dense_key<T: Real>(rng: &mut SeededRng, shape: QpShape, cfg: &DenseKeyConfig) -> Result<DenseKey<T>> {
    let k = shape.nvar();
    let r_mat = rand_matrix(rng, k, k, cfg.low, cfg.high, Require::Invertible)?;
    let r_vec = rng.uniform_matrix::<T>(k, 1, cfg.low, cfg.high).column(0).into_owned();
    let perm = cfg.permute.then(|| rng.permutation(shape.ncon()));
    Ok(DenseKey { r_mat, r_vec, perm, time_varying: cfg.time_varying })
}

/// Keys for `count` instances: one shared key, or a fresh key per instance
/// from forked streams when `cfg.time_varying` is set.
pub fn gen_dense_keys<T: Real>(
    rng: &mut SeededRng,
    shape: QpShape,
    cfg: &DenseKeyConfig,
    count: usize,
) -> Result<Vec<DenseKey<T>>> {
    if cfg.time_varying {
        (0..count)
            .map(|i| gen_dense_key(&mut rng.fork(i as u64), shape, cfg))
            .collect()
    } else {
        let key = gen_dense_key(rng, shape, cfg)?;
        Ok(vec![key; count])
    }
}

/// H̃ = 𝐑ᵀH𝐑, f̃ = 𝐑ᵀ(Fᵀx₀ + H𝐫), G̃ = 𝐏G𝐑, ẽ = 𝐏(W + Ox₀ − G𝐫).
pub fn apply_dense<T: Real>(key: &DenseKey<T>, qp: &DenseQp<T>, x0: &DVector<T>) -> Result<TransformedQp<T>> {
    key.validate(qp.shape)?;
    if x0.len() != qp.shape.n {
        return Err(Error::InvalidArgument(format!("x0 must have length {}", qp.shape.n)));
    }
    let (c, e) = qp.instance(x0);
    let rt = key.r_mat.transpose();
    let h_t = crate::linalg::symmetrize(&(&rt * &qp.h * &key.r_mat));
    let f_t = &rt * (c + &qp.h * &key.r_vec);
    let mut g_t = &qp.g * &key.r_mat;
    let mut e_t = e - &qp.g * &key.r_vec;
    if let Some(perm) = &key.perm {
        g_t = DMatrix::from_fn(g_t.nrows(), g_t.ncols(), |i, j| g_t[(perm[i], j)]);
        e_t = DVector::from_fn(e_t.len(), |i, _| e_t[perm[i]]);
    }
    Ok(TransformedQp { h_t, f_t, g_t, e_t })
}
