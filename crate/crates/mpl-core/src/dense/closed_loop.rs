use nalgebra::DVector;

use super::{build_dense, qp_solve};
use crate::lti::{self, BoxConstraints, CostSpec, LtiSystem};
use crate::{Error, Real, Result};

/// States x₀..x_K, applied inputs u₀..u_{K−1} (before the disturbance) and
/// outputs y₀..y_{K−1}.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Real> {
    pub x: Vec<DVector<T>>,
    pub u: Vec<DVector<T>>,
    pub y: Vec<DVector<T>>,
}

/// Receding-horizon simulation. The disturbance enters through the input
/// channel: x_{k+1} = Ax_k + B(u_k + d_k).
pub fn closed_loop<T: Real>(
    sys: &LtiSystem<T>,
    cost: &CostSpec<T>,
    bounds: &BoxConstraints<T>,
    x0: &DVector<T>,
    steps: usize,
    disturbance: &[DVector<T>],
) -> Result<Trajectory<T>> {
    let qp = build_dense(sys, cost, bounds)?;
    let m = sys.m();
    closed_loop_with(sys, x0, steps, disturbance, |_, x| {
        Ok(qp_solve(&qp, x)?.z_star.rows(0, m).into_owned())
    })
}

/// Closed loop with a caller-supplied policy `(k, x_k) ↦ u_k`.
pub fn closed_loop_with<T: Real, F>(
    sys: &LtiSystem<T>,
    x0: &DVector<T>,
    steps: usize,
    disturbance: &[DVector<T>],
    mut policy: F,
) -> Result<Trajectory<T>>
where
    F: FnMut(usize, &DVector<T>) -> Result<DVector<T>>,
{
    if !disturbance.is_empty() && disturbance.len() < steps {
        return Err(Error::InvalidArgument("disturbance sequence is shorter than the run".into()));
    }
    let mut traj = Trajectory { x: vec![x0.clone()], u: Vec::with_capacity(steps), y: Vec::with_capacity(steps) };
    for k in 0..steps {
        let xk = &traj.x[k];
        let uk = policy(k, xk).map_err(|err| match err {
            Error::Infeasible { .. } => Error::Infeasible { step: Some(k) },
            other => other,
        })?;
        let applied = match disturbance.get(k) {
            Some(d) => &uk + d,
            None => uk.clone(),
        };
        let (next, yk) = lti::step(sys, xk, &applied)?;
        traj.x.push(next);
        traj.u.push(uk);
        traj.y.push(yk);
    }
    Ok(traj)
}

/// e = ‖y‖₂ / √K over the stacked output samples.
pub fn rms_index<T: Real>(y: &[DVector<T>]) -> T {
    if y.is_empty() {
        return T::zero();
    }
    let sq = y.iter().fold(T::zero(), |acc, v| acc + v.norm_squared());
    (sq / crate::cst::<T>(y.len() as f64)).sqrt()
}
