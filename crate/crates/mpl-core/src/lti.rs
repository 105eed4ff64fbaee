//! Linear time-invariant systems, MPC cost data and box constraints.

use nalgebra::{Complex, DMatrix, DVector};

use crate::linalg::{self, Svd};
use crate::{cst, tol, Error, Real, Result};

/// State-space triple x⁺ = Ax + Bu, y = Cx (or ẋ = Ax + Bu when continuous).
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem<T: Real> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub c: DMatrix<T>,
    pub discrete: bool,
}

impl<T: Real> LtiSystem<T> {
    pub fn new(a: DMatrix<T>, b: DMatrix<T>, c: DMatrix<T>, discrete: bool) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || !a.is_square() {
            return Err(Error::InvalidArgument(format!("A must be square and nonempty, got {:?}", a.shape())));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(Error::InvalidArgument(format!("B must be {n}×m, got {:?}", b.shape())));
        }
        if c.ncols() != n || c.nrows() == 0 {
            return Err(Error::InvalidArgument(format!("C must be p×{n}, got {:?}", c.shape())));
        }
        if a.iter().chain(b.iter()).chain(c.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidModel("non-finite entry".into()));
        }
        Ok(Self { a, b, c, discrete })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    /// Applies a state similarity: (TAT⁻¹, TB, CT⁻¹).
    pub fn similar(&self, t: &DMatrix<T>) -> Result<Self> {
        let t_inv = linalg::inverse(t)
            .ok_or_else(|| Error::InvalidArgument("similarity is singular".into()))?;
        Self::new(t * &self.a * &t_inv, t * &self.b, &self.c * t_inv, self.discrete)
    }
}

/// Quadratic stage and terminal weights with prediction horizon N.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec<T: Real> {
    pub q: DMatrix<T>,
    pub r: DMatrix<T>,
    pub p_terminal: DMatrix<T>,
    pub horizon: usize,
}

impl<T: Real> CostSpec<T> {
    pub fn new(q: DMatrix<T>, r: DMatrix<T>, p_terminal: DMatrix<T>, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        if q.shape() != p_terminal.shape() {
            return Err(Error::InvalidArgument("Q and P must have the same shape".into()));
        }
        let eps = cst::<T>(tol::DEFAULT.psd);
        if linalg::psd_min_eig(&q)? < -eps {
            return Err(Error::InvalidArgument("Q is not positive semidefinite".into()));
        }
        if linalg::psd_min_eig(&p_terminal)? < -eps {
            return Err(Error::InvalidArgument("P is not positive semidefinite".into()));
        }
        if r.nrows() == 0 || linalg::psd_min_eig(&r)? <= eps {
            return Err(Error::InvalidArgument("R is not positive definite".into()));
        }
        Ok(Self { q, r, p_terminal, horizon })
    }

    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        Self::new(self.q.clone(), self.r.clone(), self.p_terminal.clone(), horizon)
    }

    /// Stage weight M = bdiag(Q, R).
    pub fn stage_weight(&self) -> DMatrix<T> {
        linalg::block_diag(&[&self.q, &self.r])
    }
}

/// Componentwise input and output bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxConstraints<T: Real> {
    pub u_min: DVector<T>,
    pub u_max: DVector<T>,
    pub y_min: DVector<T>,
    pub y_max: DVector<T>,
}

impl<T: Real> BoxConstraints<T> {
    pub fn new(u_min: DVector<T>, u_max: DVector<T>, y_min: DVector<T>, y_max: DVector<T>) -> Result<Self> {
        if u_min.len() != u_max.len() || y_min.len() != y_max.len() {
            return Err(Error::InvalidArgument("bound vectors differ in length".into()));
        }
        if u_min.iter().zip(u_max.iter()).any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::InvalidArgument("u_min must be below u_max".into()));
        }
        if y_min.iter().zip(y_max.iter()).any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::InvalidArgument("y_min must be below y_max".into()));
        }
        Ok(Self { u_min, u_max, y_min, y_max })
    }

    /// Symmetric bounds |u_i| ≤ u, |y_i| ≤ y.
    pub fn symmetric(m: usize, u: T, p: usize, y: T) -> Result<Self> {
        Self::new(
            DVector::from_element(m, -u),
            DVector::from_element(m, u),
            DVector::from_element(p, -y),
            DVector::from_element(p, y),
        )
    }
}

/// Zero-order-hold discretization with sampling period `ts`.
pub fn zoh_discretize<T: Real>(sys: &LtiSystem<T>, ts: T) -> Result<LtiSystem<T>> {
    if sys.discrete {
        return Err(Error::InvalidArgument("system is already discrete".into()));
    }
    if !(ts > T::zero()) || !ts.is_finite() {
        return Err(Error::InvalidArgument("sampling period must be positive".into()));
    }
    let (n, m) = (sys.n(), sys.m());
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(&sys.a * ts));
    aug.view_mut((0, n), (n, m)).copy_from(&(&sys.b * ts));
    let e = linalg::expm(&aug)?;
    LtiSystem::new(
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, m)).into_owned(),
        sys.c.clone(),
        true,
    )
}

pub fn ctrb_matrix<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let n = a.nrows();
    let mut blocks = Vec::with_capacity(n);
    let mut cur = b.clone();
    for _ in 0..n {
        let next = a * &cur;
        blocks.push(std::mem::replace(&mut cur, next));
    }
    linalg::hstack(&blocks.iter().collect::<Vec<_>>())
}

pub fn obsv_matrix<T: Real>(a: &DMatrix<T>, c: &DMatrix<T>) -> DMatrix<T> {
    ctrb_matrix(&a.transpose(), &c.transpose()).transpose()
}

/// Numerical ranks of the controllability and observability matrices.
pub fn structural_ranks<T: Real>(sys: &LtiSystem<T>) -> (usize, usize) {
    (
        linalg::rank(&ctrb_matrix(&sys.a, &sys.b)),
        linalg::rank(&obsv_matrix(&sys.a, &sys.c)),
    )
}

pub fn is_minimal<T: Real>(sys: &LtiSystem<T>) -> bool {
    structural_ranks(sys) == (sys.n(), sys.n())
}

/// h(k) = C A^{k−1} B for k = 1..count.
pub fn markov_parameters<T: Real>(sys: &LtiSystem<T>, count: usize) -> Result<Vec<DMatrix<T>>> {
    if count < 1 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(count);
    let mut ak_b = sys.b.clone();
    for _ in 0..count {
        out.push(&sys.c * &ak_b);
        ak_b = &sys.a * ak_b;
    }
    Ok(out)
}

/// One step of the discrete dynamics: (Ax + Bu, Cx).
pub fn step<T: Real>(sys: &LtiSystem<T>, x: &DVector<T>, u: &DVector<T>) -> Result<(DVector<T>, DVector<T>)> {
    if x.len() != sys.n() || u.len() != sys.m() {
        return Err(Error::InvalidArgument(format!(
            "expected x of length {} and u of length {}",
            sys.n(),
            sys.m()
        )));
    }
    Ok((&sys.a * x + &sys.b * u, &sys.c * x))
}

/// Finite transmission zeros of a square system (m = p).
///
/// The Rosenbrock pencil [[A − zI, B], [C, 0]] is deflated with orthogonal
/// transformations until its feedthrough block is invertible, at which point
/// the zeros are the eigenvalues of A − BD⁻¹C. Each deflation removes the
/// directions the pencil maps to infinity, so only finite zeros remain.
pub fn transmission_zeros<T: Real>(sys: &LtiSystem<T>) -> Result<Vec<Complex<T>>> {
    if sys.m() != sys.p() {
        return Err(Error::Unsupported(format!(
            "transmission zeros need a square system, got m = {}, p = {}",
            sys.m(),
            sys.p()
        )));
    }
    let tau = tol::DEFAULT.rank;
    let mut a = sys.a.clone();
    let mut b = sys.b.clone();
    let mut c = sys.c.clone();
    let mut d = DMatrix::<T>::zeros(sys.p(), sys.m());
    loop {
        let n = a.nrows();
        let m = b.ncols();
        if n == 0 {
            return Ok(Vec::new());
        }
        if m == 0 {
            return Ok(linalg::eigenvalues(&a));
        }
        // Split off the invertible part of the feedthrough.
        let svd = Svd::new(&d);
        let r = if d.amax() > T::zero() { svd.rank(tau) } else { 0 };
        if r == m {
            let d_inv_c = d
                .clone()
                .lu()
                .solve(&c)
                .ok_or_else(|| Error::InvalidModel("feedthrough became singular".into()))?;
            return Ok(linalg::eigenvalues(&(&a - &b * d_inv_c)));
        }
        if r > 0 {
            let u = &svd.u;
            let v = svd.v_t.transpose();
            let bv = &b * &v;
            let utc = u.transpose() * &c;
            let s_inv = DMatrix::from_diagonal(&DVector::from_iterator(
                r,
                svd.s[..r].iter().map(|s| T::one() / *s),
            ));
            a -= bv.columns(0, r) * s_inv * utc.rows(0, r);
            b = bv.columns(r, m - r).into_owned();
            c = utc.rows(r, m - r).into_owned();
            d = DMatrix::zeros(m - r, m - r);
            continue;
        }
        // D = 0: the input absorbs the rows spanned by B.
        let bsvd = Svd::new(&b);
        if bsvd.rank(tau) < m {
            return Err(Error::Unsupported("pencil is singular (B is rank deficient)".into()));
        }
        let q1 = bsvd.u.columns(0, m).into_owned();
        let q2 = linalg::null_space(&q1.transpose(), tau);
        let u = linalg::hstack(&[&q1, &q2]);
        let at = u.transpose() * &a * &u;
        let ct = &c * &u;
        let k = n - m;
        let a_new = at.view((m, m), (k, k)).into_owned();
        let b_new = at.view((m, 0), (k, m)).into_owned();
        let c_new = ct.columns(m, k).into_owned();
        let d_new = ct.columns(0, m).into_owned();
        a = a_new;
        b = b_new;
        c = c_new;
        d = d_new;
    }
}
