//! Dual active-set QP solver (Goldfarb–Idnani) for strictly convex problems
//!
//! ```text
//! min ½zᵀHz + cᵀz  s.t.  Gz ≤ e
//! ```
//!
//! Starts from the unconstrained minimizer and adds the most violated
//! constraint at each outer iteration, keeping the dual iterate feasible.
//! The active-set factorization follows Goldfarb and Idnani: with H = LLᵀ,
//! J = L⁻ᵀQ where L⁻¹N = Q[R; 0] for the active normals N. Adding or dropping
//! a constraint updates J and R with Givens rotations.

use nalgebra::{DMatrix, DVector};

use crate::{cst, tol, Error, Real, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution<T: Real> {
    pub z_star: DVector<T>,
    /// Indices of constraints active at the solution.
    pub active_set: Vec<usize>,
    /// Multipliers matching `active_set`.
    pub multipliers: Vec<T>,
    /// Max of stationarity, primal infeasibility and complementarity residuals.
    pub kkt_residual: T,
    pub iterations: usize,
}

struct Factor<T: Real> {
    j: DMatrix<T>,
    r: DMatrix<T>,
    q: usize,
}

#[inline]
fn givens<T: Real>(a: T, b: T) -> (T, T, T) {
    let h = a.hypot(b);
    if h == T::zero() {
        (T::one(), T::zero(), T::zero())
    } else {
        (a / h, b / h, h)
    }
}

fn rotate_cols<T: Real>(m: &mut DMatrix<T>, i: usize, k: usize, c: T, s: T) {
    for row in 0..m.nrows() {
        let (x, y) = (m[(row, i)], m[(row, k)]);
        m[(row, i)] = c * x + s * y;
        m[(row, k)] = -s * x + c * y;
    }
}

impl<T: Real> Factor<T> {
    fn split(&self, d: &DVector<T>) -> (DVector<T>, DVector<T>) {
        let n = self.j.nrows();
        let q = self.q;
        let z = self.j.columns(q, n - q) * d.rows(q, n - q);
        let mut r = d.rows(0, q).into_owned();
        for i in (0..q).rev() {
            let mut acc = r[i];
            for k in i + 1..q {
                acc -= self.r[(i, k)] * r[k];
            }
            r[i] = acc / self.r[(i, i)];
        }
        (z, r)
    }

    fn add(&mut self, d: &mut DVector<T>) {
        let n = self.j.nrows();
        for k in (self.q + 1..n).rev() {
            let (c, s, h) = givens(d[k - 1], d[k]);
            d[k - 1] = h;
            d[k] = T::zero();
            rotate_cols(&mut self.j, k - 1, k, c, s);
        }
        for i in 0..=self.q {
            self.r[(i, self.q)] = d[i];
        }
        self.q += 1;
    }

    fn drop(&mut self, l: usize) {
        let q = self.q;
        for col in l..q - 1 {
            for row in 0..q {
                self.r[(row, col)] = self.r[(row, col + 1)];
            }
        }
        for row in 0..q {
            self.r[(row, q - 1)] = T::zero();
        }
        for k in l..q - 1 {
            let (c, s, h) = givens(self.r[(k, k)], self.r[(k + 1, k)]);
            self.r[(k, k)] = h;
            self.r[(k + 1, k)] = T::zero();
            for col in k + 1..q - 1 {
                let (x, y) = (self.r[(k, col)], self.r[(k + 1, col)]);
                self.r[(k, col)] = c * x + s * y;
                self.r[(k + 1, col)] = -s * x + c * y;
            }
            rotate_cols(&mut self.j, k, k + 1, c, s);
        }
        self.q -= 1;
    }
}

/// Solves min ½zᵀHz + cᵀz subject to Gz ≤ e for symmetric positive definite H.
pub fn solve_qp<T: Real>(h: &DMatrix<T>, c: &DVector<T>, g: &DMatrix<T>, e: &DVector<T>) -> Result<QpSolution<T>> {
    let n = h.nrows();
    let mc = g.nrows();
    if !h.is_square() || c.len() != n || g.ncols() != n || e.len() != mc {
        return Err(Error::InvalidArgument("QP dimensions are inconsistent".into()));
    }
    let chol = h
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("H is not positive definite".into()))?;
    let l_inv = chol
        .l()
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or_else(|| Error::InvalidArgument("H is not positive definite".into()))?;
    let mut fac = Factor { j: l_inv.transpose(), r: DMatrix::zeros(n, n), q: 0 };
    let mut x = -chol.solve(c);

    let eps = T::default_epsilon();
    let feas = cst::<T>(tol::DEFAULT.feasibility);
    let row_norm: Vec<T> = (0..mc).map(|i| g.row(i).norm().max(eps)).collect();
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<T> = Vec::new();
    let mut is_active = vec![false; mc];
    let max_iter = 50 * (n + mc) + 100;
    let mut iter = 0;

    loop {
        // Most violated constraint, measured as a normalized distance.
        let slack = e - g * &x;
        let mut pick: Option<(usize, T)> = None;
        for i in 0..mc {
            if is_active[i] {
                continue;
            }
            let viol = -slack[i] / row_norm[i];
            let thresh = feas * (T::one() + e[i].abs() / row_norm[i]);
            if viol > thresh && pick.is_none_or(|(_, v)| viol > v) {
                pick = Some((i, viol));
            }
        }
        let Some((p, _)) = pick else { break };
        let np = -g.row(p).transpose();
        let mut u_p = T::zero();

        loop {
            iter += 1;
            if iter > max_iter {
                return Err(Error::IterationLimit);
            }
            let mut d = fac.j.transpose() * &np;
            let (z, r) = fac.split(&d);
            let dnorm = d.norm();
            let z_zero = z.norm() <= cst::<T>(1e3) * eps * dnorm.max(eps);

            // Largest dual step keeping the multipliers nonnegative.
            let mut t1: Option<(usize, T)> = None;
            for (k, &rk) in r.iter().enumerate() {
                if rk > T::zero() {
                    let ratio = u[k] / rk;
                    if t1.is_none_or(|(_, t)| ratio < t) {
                        t1 = Some((k, ratio));
                    }
                }
            }
            let s_p = e[p] - g.row(p).dot(&x.transpose());
            let t2 = if z_zero { None } else { Some(-s_p / z.dot(&np)) };

            match (t1, t2) {
                (None, None) => return Err(Error::Infeasible { step: None }),
                (Some((l, t)), None) => {
                    for k in 0..u.len() {
                        u[k] -= t * r[k];
                    }
                    u_p += t;
                    fac.drop(l);
                    is_active[active[l]] = false;
                    active.remove(l);
                    u.remove(l);
                }
                (t1, Some(t2v)) => {
                    let full = t1.is_none_or(|(_, t)| t2v <= t);
                    let t = if full { t2v } else { t1.unwrap().1 };
                    x += &z * t;
                    for k in 0..u.len() {
                        u[k] -= t * r[k];
                    }
                    u_p += t;
                    if full {
                        fac.add(&mut d);
                        active.push(p);
                        is_active[p] = true;
                        u.push(u_p);
                        break;
                    }
                    let l = t1.unwrap().0;
                    fac.drop(l);
                    is_active[active[l]] = false;
                    active.remove(l);
                    u.remove(l);
                }
            }
        }
    }

    let mut grad = h * &x + c;
    for (k, &i) in active.iter().enumerate() {
        grad += g.row(i).transpose() * u[k];
    }
    let slack = e - g * &x;
    let infeas = slack.iter().fold(T::zero(), |acc, &s| acc.max(-s));
    let compl = active
        .iter()
        .zip(&u)
        .fold(T::zero(), |acc, (&i, &ui)| acc.max((ui * slack[i]).abs()));
    let kkt_residual = grad.amax().max(infeas).max(compl);
    Ok(QpSolution { z_star: x, active_set: active, multipliers: u, kkt_residual, iterations: iter })
}
