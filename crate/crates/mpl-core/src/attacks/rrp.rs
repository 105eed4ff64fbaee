use nalgebra::DMatrix;

use super::{failed, AttackReport, DataLog};
use crate::linalg;
use crate::{Error, Real, Result};

/// Difference matrices built from consecutive instances of a log.
#[derive(Debug, Clone, PartialEq)]
pub struct RrpData<T: Real> {
    /// ΔF̃₀ = [δf̃₁ … δf̃_{I−2}].
    pub df0: DMatrix<T>,
    /// ΔF̃₁ = [δf̃₂ … δf̃_{I−1}].
    pub df1: DMatrix<T>,
    /// ΔZ̃* = [δζ₁ … δζ_{I−2}].
    pub dz: DMatrix<T>,
    /// ΔF̃₀ = ΔF_b·E₀.
    pub df_b: DMatrix<T>,
    pub e0: DMatrix<T>,
    /// E₁ = pinv(ΔF_b)·ΔF̃₁.
    pub e1: DMatrix<T>,
}

impl<T: Real> RrpData<T> {
    pub fn from_log(log: &DataLog<T>) -> Result<Self> {
        let n = log.shape.n;
        let count = log.len();
        if count < n + 2 {
            return failed("insufficient excitation");
        }
        let diff = |m: DMatrix<T>| {
            let k = m.ncols() - 1;
            m.columns(1, k) - m.columns(0, k)
        };
        let df = diff(log.f_matrix());
        let dz = diff(log.zeta_matrix());
        let k = count - 2;
        let df0 = df.columns(0, k).into_owned();
        let df1 = df.columns(1, k).into_owned();
        let dz = dz.columns(0, k).into_owned();
        let (df_b, e0) = match linalg::full_rank_factorize(&df0, n) {
            Ok(v) => v,
            Err(Error::RankMismatch { .. }) => return failed("insufficient excitation"),
            Err(e) => return Err(e),
        };
        let e1 = linalg::pinv(&df_b) * &df1;
        Ok(Self { df0, df1, dz, df_b, e0, e1 })
    }
}

/// Estimates TAT⁻¹ from a log of transformed instances solved under one
/// (𝐑, 𝐫, 𝐏) key. Θ minimizes ‖ΔZ̃*Θ‖_F subject to E₀Θ = I and the
/// achieved value is reported as `eps_relax`; Â is exact when it is zero.
///
/// `f_full_rank` is the side knowledge rank F = n.
pub fn attack_rrp<T: Real>(log: &DataLog<T>, f_full_rank: bool) -> Result<AttackReport<T>> {
    if !f_full_rank {
        return failed("needs the side knowledge rank F = n");
    }
    let data = RrpData::from_log(log)?;
    let (theta, eps) = linalg::eq_constrained_lsq(&data.dz, &data.e0)?;
    let a_hat = &data.e1 * theta;
    let mut rep = AttackReport {
        eigenvalues: linalg::eigenvalues(&a_hat),
        eps_relax: Some(eps),
        a_hat: Some(a_hat),
        ..Default::default()
    };
    rep.tag("attack_rrp", &["a_hat", "eigenvalues", "eps_relax"]);
    Ok(rep)
}

/// With [E₀; ΔZ̃*] of full row rank, solves for both TAT⁻¹ and TB̄𝐑, where B̄
/// maps z to the first input block.
pub fn attack_rrp_extended<T: Real>(log: &DataLog<T>) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let data = RrpData::from_log(log)?;
    let n = log.shape.n;
    let stacked = linalg::vstack(&[&data.e0, &data.dz]);
    if linalg::rank(&stacked) < stacked.nrows() {
        return failed("PE condition not met");
    }
    let both = &data.e1 * linalg::pinv(&stacked);
    let a_hat = both.columns(0, n).into_owned();
    let tbr = both.columns(n, both.ncols() - n).into_owned();
    Ok((a_hat, tbr))
}
