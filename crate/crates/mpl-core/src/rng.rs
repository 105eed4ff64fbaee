//! Reproducible random streams.
//!
//! The generator is ChaCha20 (`rand_chacha`), a counter-based stream cipher
//! whose output depends only on the key (derived from the seed) and the
//! stream number. Forked streams are therefore independent of how much the
//! parent has already consumed.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::linalg::Svd;
use crate::{cst, tol, Error, Real, Result};

pub const ALGORITHM: &str = "chacha20";

#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: ChaCha20Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, stream, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn algorithm(&self) -> &'static str {
        ALGORITHM
    }

    /// A fresh stream determined by this stream's identity and `index`.
    pub fn fork(&self, index: u64) -> Self {
        let stream = self
            .stream
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(index.wrapping_add(1));
        Self::with_stream(self.seed, stream)
    }

    pub fn uniform(&mut self, low: f64, high: f64) -> f64 {
        self.inner.random_range(low..high)
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        p.shuffle(&mut self.inner);
        p
    }

    pub fn uniform_matrix<T: Real>(&mut self, rows: usize, cols: usize, low: f64, high: f64) -> DMatrix<T> {
        // Filled row by row so the stream order matches the row-major file format.
        let mut m = DMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = cst(self.uniform(low, high));
            }
        }
        m
    }

    pub fn normal_vector<T: Real>(&mut self, len: usize) -> nalgebra::DVector<T> {
        nalgebra::DVector::from_fn(len, |_, _| cst(self.normal()))
    }
}

/// Rank requirement enforced by [`rand_matrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Require {
    None,
    Invertible,
    FullColumnRank,
}

/// Uniform random matrix, resampled until the rank requirement holds.
pub fn rand_matrix<T: Real>(
    rng: &mut SeededRng,
    rows: usize,
    cols: usize,
    low: f64,
    high: f64,
    require: Require,
) -> Result<DMatrix<T>> {
    if !(low < high) {
        return Err(Error::InvalidArgument(format!("empty range [{low}, {high})")));
    }
    if require == Require::Invertible && rows != cols {
        return Err(Error::InvalidArgument("invertible matrices must be square".into()));
    }
    if require == Require::FullColumnRank && rows < cols {
        return Err(Error::InvalidArgument("full column rank needs rows >= cols".into()));
    }
    let t = tol::DEFAULT;
    for _ in 0..t.max_attempts {
        let m = rng.uniform_matrix(rows, cols, low, high);
        if well_conditioned(&m, require, &t) {
            return Ok(m);
        }
    }
    Err(Error::GenerationFailed(t.max_attempts))
}

fn well_conditioned<T: Real>(m: &DMatrix<T>, require: Require, t: &tol::Tolerances) -> bool {
    if require == Require::None {
        return true;
    }
    let s = Svd::new(m).s;
    let (Some(&hi), Some(&lo)) = (s.first(), s.last()) else {
        return true;
    };
    if lo <= T::zero() {
        return false;
    }
    match require {
        Require::Invertible => hi / lo <= cst(t.max_cond),
        _ => lo >= hi * cst::<T>(t.min_rel_sv),
    }
}
