use nalgebra::{DMatrix, DVector};

use super::{failed, zeros_of, AttackReport};
use crate::linalg;
use crate::transforms::{ResidualTag, TransformedProblem, Variant};
use crate::{cst, tol, Error, Real, Result};

struct Blocks<T: Real> {
    m11: DMatrix<T>,
    m21: DMatrix<T>,
    m22: DMatrix<T>,
}

fn blocks<T: Real>(tp: &TransformedProblem<T>) -> Blocks<T> {
    let (n, m) = (tp.n(), tp.m());
    Blocks {
        m11: tp.m_t.view((0, 0), (n, n)).into_owned(),
        m21: tp.m_t.view((n, 0), (m, n)).into_owned(),
        m22: tp.m_t.view((n, n), (m, m)).into_owned(),
    }
}

/// Reads R̂, F̂T⁻¹, Q̂ and Â = TAT⁻¹ off the quadratic blocks of M̃.
pub fn attack_separate<T: Real>(tp: &TransformedProblem<T>) -> Result<AttackReport<T>> {
    if tp.variant == Variant::Highdim {
        return Err(Error::InvalidArgument("use attack_highdim for lifted problems".into()));
    }
    quadratic_blocks(tp, "attack_separate")
}

fn quadratic_blocks<T: Real>(tp: &TransformedProblem<T>, op: &str) -> Result<AttackReport<T>> {
    let b = blocks(tp);
    if linalg::cond(&b.m22) > cst(1.0 / tol::DEFAULT.rank) {
        return failed("M̃₂₂ is singular, R cannot be isolated");
    }
    let ft = match b.m22.clone().cholesky() {
        Some(ch) => -ch.solve(&b.m21),
        None => -b.m22.clone().lu().solve(&b.m21).ok_or_else(|| Error::AttackFailed("M̃₂₂ is singular".into()))?,
    };
    let q_hat = linalg::symmetrize(&(&b.m11 - ft.transpose() * &b.m22 * &ft));
    let a_hat = &tp.a_t + &tp.b_t * &ft;
    let mut rep = AttackReport {
        eigenvalues: linalg::eigenvalues(&a_hat),
        zeros: zeros_of(&a_hat, &tp.b_t, &tp.c_t),
        r_hat: Some(b.m22),
        q_hat: Some(q_hat),
        p_hat: Some(tp.p_t.clone()),
        ft_hat: Some(ft),
        b_hat: Some(tp.b_t.clone()),
        c_hat: Some(tp.c_t.clone()),
        a_hat: Some(a_hat),
        ..Default::default()
    };
    rep.tag(op, &["a_hat", "b_hat", "c_hat", "r_hat", "q_hat", "p_hat", "ft_hat", "eigenvalues", "zeros"]);
    Ok(rep)
}

/// Lifted variant: the particular solution −pinv(M̃₂₂)M̃₂₁ still yields
/// Â = T̄AT̄ˡ, whose nonzero spectrum is that of A.
pub fn attack_highdim<T: Real>(tp: &TransformedProblem<T>) -> Result<AttackReport<T>> {
    let b = blocks(tp);
    let ft = -(linalg::pinv(&b.m22) * &b.m21);
    let q_hat = linalg::symmetrize(&(&b.m11 - ft.transpose() * &b.m22 * &ft));
    let a_hat = &tp.a_t + &tp.b_t * &ft;
    let mut rep = AttackReport {
        eigenvalues: linalg::nonzero_eigenvalues(&a_hat, tol::DEFAULT.zero_eig),
        r_hat: Some(b.m22),
        q_hat: Some(q_hat),
        p_hat: Some(tp.p_t.clone()),
        ft_hat: Some(ft),
        b_hat: Some(tp.b_t.clone()),
        c_hat: Some(tp.c_t.clone()),
        a_hat: Some(a_hat),
        ..Default::default()
    };
    rep.tag("attack_highdim", &["a_hat", "b_hat", "c_hat", "r_hat", "q_hat", "p_hat", "ft_hat", "eigenvalues"]);
    Ok(rep)
}

/// Polynomial variant: every nonlinear term arrives tagged, so the quadratic
/// blocks can be read exactly as in the plain case.
pub fn attack_poly<T: Real>(tp: &TransformedProblem<T>) -> Result<AttackReport<T>> {
    if tp.residuals.iter().any(|r| r.tag == ResidualTag::Untagged) {
        return failed("untagged nonlinear residual, quadratic blocks cannot be isolated");
    }
    quadratic_blocks(tp, "attack_poly")
}

/// What the solver learns about inputs hidden by structured noise.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseReport<T: Real> {
    /// dim ker B_h, the number of noise directions.
    pub noise_dim: usize,
    /// m̄ − dim ker B_h.
    pub m_estimate: usize,
    /// Rows spanning the row space of B_h.
    pub basis: DMatrix<T>,
    /// basis·ũ_k = 𝐐u_k for an unknown invertible 𝐐.
    pub q_times_u: Vec<DVector<T>>,
}

/// Strips the noise from encoded inputs using ker B_h = ker Ḡˡ, which holds
/// when B has full column rank.
pub fn attack_structured_noise<T: Real>(
    _a_h: &DMatrix<T>,
    b_h: &DMatrix<T>,
    _c_h: &DMatrix<T>,
    encoded: &[DVector<T>],
) -> Result<NoiseReport<T>> {
    let m_bar = b_h.ncols();
    if encoded.iter().any(|u| u.len() != m_bar) {
        return Err(Error::InvalidArgument("encoded inputs do not match B_h".into()));
    }
    let kernel = linalg::null_space(b_h, tol::DEFAULT.rank);
    let noise_dim = kernel.ncols();
    let basis = linalg::range_basis(&b_h.transpose(), tol::DEFAULT.rank).transpose();
    let q_times_u = encoded.iter().map(|u| &basis * u).collect();
    Ok(NoiseReport { noise_dim, m_estimate: m_bar - noise_dim, basis, q_times_u })
}
