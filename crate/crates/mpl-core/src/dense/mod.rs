//! Condensed (dense) MPC: min ½zᵀHz + x₀ᵀFz s.t. Gz ≤ W + Ox₀.

mod closed_loop;
mod qp;

pub use closed_loop::{closed_loop, closed_loop_with, rms_index, Trajectory};
pub use qp::{solve_qp, QpSolution};

use nalgebra::{DMatrix, DVector};

use crate::linalg::{self, kron};
use crate::lti::{BoxConstraints, CostSpec, LtiSystem};
use crate::{cst, Error, Real, Result};

pub use crate::linalg::error_index;

/// Dimensions of a condensed problem; public to every party.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QpShape {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub horizon: usize,
}

impl QpShape {
    pub fn nvar(&self) -> usize {
        self.horizon * self.m
    }

    pub fn ncon(&self) -> usize {
        2 * self.horizon * (self.m + self.p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseQp<T: Real> {
    pub shape: QpShape,
    pub h: DMatrix<T>,
    pub f: DMatrix<T>,
    pub y: DMatrix<T>,
    pub g: DMatrix<T>,
    pub w: DVector<T>,
    pub o: DMatrix<T>,
    /// 𝒮: maps the input sequence to x₁..x_N.
    pub s_cal: DMatrix<T>,
    /// 𝒯 = col(A, …, A^N).
    pub t_cal: DMatrix<T>,
    /// 𝒬 = bdiag(Q, …, Q, P).
    pub q_cal: DMatrix<T>,
    /// ℛ = I_N ⊗ R.
    pub r_cal: DMatrix<T>,
    /// 𝒢 = (I_N ⊗ C)𝒮.
    pub g_cal: DMatrix<T>,
    /// 𝒪 = col(CA, …, CA^N).
    pub o_cal: DMatrix<T>,
}

/// Builds 𝒮 (Nn×Nm) and 𝒯 (Nn×n).
pub fn prediction_matrices<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, horizon: usize) -> (DMatrix<T>, DMatrix<T>) {
    let (n, m) = b.shape();
    let mut powers = Vec::with_capacity(horizon + 1);
    powers.push(DMatrix::<T>::identity(n, n));
    for k in 1..=horizon {
        powers.push(a * &powers[k - 1]);
    }
    let mut s_cal = DMatrix::zeros(horizon * n, horizon * m);
    let mut t_cal = DMatrix::zeros(horizon * n, n);
    for i in 0..horizon {
        t_cal.view_mut((i * n, 0), (n, n)).copy_from(&powers[i + 1]);
        for j in 0..=i {
            s_cal
                .view_mut((i * n, j * m), (n, m))
                .copy_from(&(&powers[i - j] * b));
        }
    }
    (s_cal, t_cal)
}

/// 𝒬 = bdiag(Q, …, Q, P) with N blocks.
pub fn stacked_state_weight<T: Real>(q: &DMatrix<T>, p: &DMatrix<T>, horizon: usize) -> DMatrix<T> {
    let n = q.nrows();
    let mut out = DMatrix::zeros(horizon * n, horizon * n);
    for i in 0..horizon {
        let blk = if i + 1 == horizon { p } else { q };
        out.view_mut((i * n, i * n), (n, n)).copy_from(blk);
    }
    out
}

pub fn build_dense<T: Real>(sys: &LtiSystem<T>, cost: &CostSpec<T>, bounds: &BoxConstraints<T>) -> Result<DenseQp<T>> {
    if !sys.discrete {
        return Err(Error::InvalidArgument("build_dense needs a discrete system".into()));
    }
    let (n, m, p) = (sys.n(), sys.m(), sys.p());
    if cost.q.shape() != (n, n) || cost.r.shape() != (m, m) {
        return Err(Error::InvalidArgument("cost weights do not match the system".into()));
    }
    if bounds.u_min.len() != m || bounds.y_min.len() != p {
        return Err(Error::InvalidArgument("bounds do not match the system".into()));
    }
    let big_n = cost.horizon;
    let (s_cal, t_cal) = prediction_matrices(&sys.a, &sys.b, big_n);
    let q_cal = stacked_state_weight(&cost.q, &cost.p_terminal, big_n);
    let r_cal = kron(&DMatrix::identity(big_n, big_n), &cost.r);
    let c_blk = kron(&DMatrix::identity(big_n, big_n), &sys.c);
    let g_cal = &c_blk * &s_cal;
    let o_cal = &c_blk * &t_cal;

    let two = cst::<T>(2.0);
    let qs = &q_cal * &s_cal;
    let h = linalg::symmetrize(&((&r_cal + s_cal.transpose() * &qs) * two));
    let f = t_cal.transpose() * &qs * two;
    let y = &cost.q + t_cal.transpose() * &q_cal * &t_cal;

    let nu = big_n * m;
    let ny = big_n * p;
    let eye = DMatrix::<T>::identity(nu, nu);
    let g = linalg::vstack(&[&eye, &(-&eye), &g_cal, &(-&g_cal)]);
    let tile = |v: &DVector<T>, sign: T| DVector::from_fn(big_n * v.len(), |i, _| v[i % v.len()] * sign);
    let parts = [
        tile(&bounds.u_max, T::one()),
        tile(&bounds.u_min, -T::one()),
        tile(&bounds.y_max, T::one()),
        tile(&bounds.y_min, -T::one()),
    ];
    let w = DVector::from_iterator(2 * (nu + ny), parts.iter().flat_map(|v| v.iter().copied()));
    let o = linalg::vstack(&[
        &DMatrix::zeros(nu, n),
        &DMatrix::zeros(nu, n),
        &(-&o_cal),
        &o_cal,
    ]);
    Ok(DenseQp {
        shape: QpShape { n, m, p, horizon: big_n },
        h,
        f,
        y,
        g,
        w,
        o,
        s_cal,
        t_cal,
        q_cal,
        r_cal,
        g_cal,
        o_cal,
    })
}

impl<T: Real> DenseQp<T> {
    /// Block (i, j) of ½H, 1-based.
    pub fn h_block(&self, i: usize, j: usize) -> DMatrix<T> {
        half_h_block(&self.h, self.shape.m, i, j)
    }

    /// Block (1, j) of ½F, 1-based.
    pub fn f_block(&self, j: usize) -> DMatrix<T> {
        half_f_block(&self.f, self.shape.m, j)
    }

    /// Linear term Fᵀx₀ and right-hand side W + Ox₀ for initial state x₀.
    pub fn instance(&self, x0: &DVector<T>) -> (DVector<T>, DVector<T>) {
        (self.f.transpose() * x0, &self.w + &self.o * x0)
    }
}

/// Block (i, j) of ½H with m×m blocks, 1-based.
pub fn half_h_block<T: Real>(h: &DMatrix<T>, m: usize, i: usize, j: usize) -> DMatrix<T> {
    h.view(((i - 1) * m, (j - 1) * m), (m, m)) * cst::<T>(0.5)
}

/// Block (1, j) of ½F with n×m blocks, 1-based.
pub fn half_f_block<T: Real>(f: &DMatrix<T>, m: usize, j: usize) -> DMatrix<T> {
    f.columns((j - 1) * m, m) * cst::<T>(0.5)
}

/// Solves the condensed problem for initial state x₀.
pub fn qp_solve<T: Real>(qp: &DenseQp<T>, x0: &DVector<T>) -> Result<QpSolution<T>> {
    if x0.len() != qp.shape.n {
        return Err(Error::InvalidArgument(format!("x0 must have length {}", qp.shape.n)));
    }
    let (c, e) = qp.instance(x0);
    solve_qp(&qp.h, &c, &qp.g, &e)
}
