//! Numerical thresholds shared by every module.

/// Default thresholds. Attack post-conditions are sensitive to these, so they
/// live in one place.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative singular-value cutoff for numerical rank.
    pub rank: f64,
    /// Relative singular-value cutoff for the pseudo-inverse.
    pub pinv: f64,
    /// Absolute slack used by PSD and symmetry checks.
    pub psd: f64,
    /// Allowed relative asymmetry of inputs declared symmetric.
    pub symmetry: f64,
    /// Constraint violation accepted by the QP solver, relative to the bound.
    pub feasibility: f64,
    /// Largest condition number accepted for invertible random keys.
    pub max_cond: f64,
    /// Smallest relative singular value accepted for full-column-rank keys.
    pub min_rel_sv: f64,
    /// Resampling attempts before key generation gives up.
    pub max_attempts: usize,
    /// Eigenvalues with modulus below this (relative to the largest) count as zero.
    pub zero_eig: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        DEFAULT
    }
}

pub const DEFAULT: Tolerances = Tolerances {
    rank: 1e-10,
    pinv: 1e-12,
    psd: 1e-10,
    symmetry: 1e-12,
    feasibility: 1e-10,
    max_cond: 1e6,
    min_rel_sv: 1e-6,
    max_attempts: 100,
    zero_eig: 1e-8,
};
