//! Secret keys and the transformations that produce what the solver sees.

mod dense;
mod noise;
mod separate;

pub use dense::{apply_dense, gen_dense_key, gen_dense_keys, DenseKey, DenseKeyConfig, TransformedQp};
pub use noise::{encode_structured_noise, encode_with, gen_structured_noise_key, StructuredNoiseKey};
pub use separate::{
    apply_separate, apply_separate_with_cross, gen_separate_key, gen_separate_keys, observability_preserved,
    KeyConfig, Residual, ResidualSite, ResidualTag, SeparateKey, TransformedProblem, Variant,
};

use nalgebra::DMatrix;

use crate::{linalg, Real};

/// Inverse for square matrices, Moore-Penrose left inverse otherwise.
pub(crate) fn left_inverse<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    if m.is_square() {
        if let Some(inv) = linalg::inverse(m) {
            return inv;
        }
    }
    linalg::pinv(m)
}
