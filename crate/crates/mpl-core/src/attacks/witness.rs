use nalgebra::DMatrix;

use crate::linalg;
use crate::{cst, tol, Real, Result};

/// A direction X (symmetric, XB = 0) and step ε such that (Q̂ + ε(X − AᵀXA),
/// P̂ + εX) is another PSD pair producing the same H and F.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyWitness<T: Real> {
    pub x_dir: DMatrix<T>,
    pub epsilon: T,
    pub min_eig_q: T,
    pub min_eig_p: T,
}

impl<T: Real> UncertaintyWitness<T> {
    /// (Q̂ + ε(X − AᵀXA), P̂ + εX).
    pub fn perturbed(&self, a: &DMatrix<T>, q_hat: &DMatrix<T>, p_hat: &DMatrix<T>) -> (DMatrix<T>, DMatrix<T>) {
        let d_q = &self.x_dir - a.transpose() * &self.x_dir * a;
        (
            linalg::symmetrize(&(q_hat + d_q * self.epsilon)),
            linalg::symmetrize(&(p_hat + &self.x_dir * self.epsilon)),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WitnessOutcome<T: Real> {
    Witness(UncertaintyWitness<T>),
    /// No nonzero symmetric X with XB = 0 exists.
    SingletonCertified,
    /// Directions exist but none keeps both matrices PSD for a usable ε.
    Boundary,
}

fn spectral_norm<T: Real>(m: &DMatrix<T>) -> T {
    linalg::Svd::new(m).s.first().copied().unwrap_or_else(T::zero)
}

fn min_eig<T: Real>(m: &DMatrix<T>) -> T {
    linalg::psd_min_eig(&linalg::symmetrize(m)).unwrap_or_else(|_| cst(f64::NEG_INFINITY))
}

/// Searches {X = Xᵀ : XB = 0} for a direction that keeps (Q̂, P̂) PSD.
pub fn uncertainty_witness<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    q_hat: &DMatrix<T>,
    p_hat: &DMatrix<T>,
) -> Result<WitnessOutcome<T>> {
    let t = tol::DEFAULT;
    let psd = cst::<T>(t.psd);
    let k = linalg::null_space(&b.transpose(), t.rank);
    if k.ncols() == 0 {
        return Ok(WitnessOutcome::SingletonCertified);
    }
    let dq_of = |x: &DMatrix<T>| x - a.transpose() * x * a;
    let check = |x: &DMatrix<T>, eps: T| {
        let d_q = dq_of(x);
        (min_eig(&(q_hat + d_q * eps)), min_eig(&(p_hat + x * eps)))
    };
    let delta_q = min_eig(q_hat);
    let delta_p = min_eig(p_hat);

    let kkt = &k * k.transpose();
    let x = &kkt / spectral_norm(&kkt);
    let nq = spectral_norm(&dq_of(&x));
    let bound = |delta: T, norm: T| if norm > T::zero() { delta / norm } else { T::one() };

    let direct = if delta_q > psd && delta_p > psd {
        Some(bound(delta_q, nq).min(bound(delta_p, T::one())))
    } else if delta_q > psd && delta_p >= -psd {
        // X ⪰ 0 keeps P̂ + εX ⪰ P̂.
        Some(bound(delta_q, nq))
    } else {
        None
    };
    if let Some(step) = direct {
        let eps = (step * cst(0.5)).min(T::one());
        let (mq, mp) = check(&x, eps);
        if mq >= -psd && mp >= -psd {
            return Ok(WitnessOutcome::Witness(UncertaintyWitness { x_dir: x, epsilon: eps, min_eig_q: mq, min_eig_p: mp }));
        }
    }

    // Singular Q̂: try the pure kernel directions one at a time.
    let mut candidates = vec![x.clone(), -x];
    for i in 0..k.ncols() {
        let ki = k.column(i);
        let xi = ki * ki.transpose();
        candidates.push(-&xi);
        candidates.push(xi);
    }
    let min_eps = cst::<T>(1e-6);
    for x in candidates {
        let mut eps = T::one();
        while eps >= min_eps {
            let (mq, mp) = check(&x, eps);
            if mq >= -psd && mp >= -psd {
                return Ok(WitnessOutcome::Witness(UncertaintyWitness { x_dir: x, epsilon: eps, min_eig_q: mq, min_eig_p: mp }));
            }
            eps *= cst(0.5);
        }
    }
    Ok(WitnessOutcome::Boundary)
}
