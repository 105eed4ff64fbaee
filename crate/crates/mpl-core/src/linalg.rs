//! Dense linear-algebra kernels: pseudo-inverse, rank, matrix exponential,
//! discrete Lyapunov equation, Ho-Kalman realization, full-rank
//! factorization and equality-constrained least squares.

use nalgebra::{Complex, DMatrix, DVector};

use crate::{cst, tol, to_f64, Error, Real, Result};

/// A state-space triple identified only up to an unknown similarity.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization<T: Real> {
    pub a_t: DMatrix<T>,
    pub b_t: DMatrix<T>,
    pub c_t: DMatrix<T>,
    pub order: usize,
}

/// Thin SVD with singular values sorted in decreasing order.
pub struct Svd<T: Real> {
    pub u: DMatrix<T>,
    pub s: Vec<T>,
    pub v_t: DMatrix<T>,
}

impl<T: Real> Svd<T> {
    pub fn new(m: &DMatrix<T>) -> Self {
        let (r, c) = m.shape();
        if r == 0 || c == 0 {
            return Self {
                u: DMatrix::zeros(r, 0),
                s: Vec::new(),
                v_t: DMatrix::zeros(0, c),
            };
        }
        if r < c {
            let t = Self::new(&m.transpose());
            return Self { u: t.v_t.transpose(), s: t.s, v_t: t.u.transpose() };
        }
        let (u, s, v) = jacobi_svd(m);
        let k = s.len();
        let mut idx: Vec<usize> = (0..k).collect();
        idx.sort_by(|&i, &j| s[j].partial_cmp(&s[i]).unwrap_or(std::cmp::Ordering::Equal));
        let u = DMatrix::from_fn(r, k, |row, col| u[(row, idx[col])]);
        let v_t = DMatrix::from_fn(k, c, |row, col| v[(col, idx[row])]);
        let s = idx.iter().map(|&i| s[i]).collect();
        Self { u, s, v_t }
    }

    /// Number of singular values above `tau` times the largest.
    pub fn rank(&self, tau: f64) -> usize {
        match self.s.first() {
            Some(&s1) if s1 > T::zero() => {
                let cut = s1 * cst::<T>(tau);
                self.s.iter().filter(|&&s| s > cut).count()
            }
            _ => 0,
        }
    }
}

/// One-sided Jacobi SVD of a tall matrix: orthogonalizes the columns of a
/// working copy by plane rotations, accumulating them into V.
fn jacobi_svd<T: Real>(m: &DMatrix<T>) -> (DMatrix<T>, Vec<T>, DMatrix<T>) {
    const MAX_SWEEPS: usize = 80;
    let (r, c) = m.shape();
    let eps = T::default_epsilon();
    let mut w = m.clone();
    let mut v = DMatrix::<T>::identity(c, c);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..c {
            for q in p + 1..c {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma * cst(2.0));
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let t = if zeta == T::zero() { T::one() } else { t };
                let cs = T::one() / (T::one() + t * t).sqrt();
                let sn = cs * t;
                rotate(&mut w, p, q, cs, sn);
                rotate(&mut v, p, q, cs, sn);
            }
        }
        if !rotated {
            break;
        }
    }
    let s: Vec<T> = (0..c).map(|j| w.column(j).norm()).collect();
    let mut u = DMatrix::zeros(r, c);
    let mut missing = Vec::new();
    for j in 0..c {
        if s[j] > T::zero() {
            u.set_column(j, &(w.column(j) / s[j]));
        } else {
            missing.push(j);
        }
    }
    // Exactly zero columns get orthonormal completions.
    let mut e = 0;
    for j in missing {
        while e < r {
            let mut cand = DVector::<T>::zeros(r);
            cand[e] = T::one();
            e += 1;
            for k in 0..c {
                let uk = u.column(k).into_owned();
                let proj = uk.dot(&cand);
                cand -= uk * proj;
            }
            let nrm = cand.norm();
            if nrm > cst(0.5) {
                u.set_column(j, &(cand / nrm));
                break;
            }
        }
    }
    (u, s, v)
}

fn rotate<T: Real>(m: &mut DMatrix<T>, p: usize, q: usize, cs: T, sn: T) {
    for i in 0..m.nrows() {
        let a = m[(i, p)];
        let b = m[(i, q)];
        m[(i, p)] = cs * a - sn * b;
        m[(i, q)] = sn * a + cs * b;
    }
}

pub fn numerical_rank<T: Real>(m: &DMatrix<T>, tau: f64) -> usize {
    Svd::new(m).rank(tau)
}

pub fn rank<T: Real>(m: &DMatrix<T>) -> usize {
    numerical_rank(m, tol::DEFAULT.rank)
}

/// Moore-Penrose pseudo-inverse with the default relative cutoff.
pub fn pinv<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    pinv_tol(m, tol::DEFAULT.pinv)
}

pub fn pinv_tol<T: Real>(m: &DMatrix<T>, tau: f64) -> DMatrix<T> {
    let (r, c) = m.shape();
    let svd = Svd::new(m);
    let k = svd.rank(tau);
    let mut out = DMatrix::zeros(c, r);
    for i in 0..k {
        let vi = svd.v_t.row(i).transpose();
        let ui = svd.u.column(i);
        out += (vi * ui.transpose()) / svd.s[i];
    }
    out
}

/// Inverse through LU with partial pivoting. nalgebra's `try_inverse` uses
/// cofactor formulas up to 4×4, which lose accuracy on ill-conditioned input.
pub fn inverse<T: Real>(m: &DMatrix<T>) -> Option<DMatrix<T>> {
    if !m.is_square() {
        return None;
    }
    m.clone().lu().try_inverse()
}

/// 2-norm condition number; infinite when singular.
pub fn cond<T: Real>(m: &DMatrix<T>) -> T {
    let svd = Svd::new(m);
    match (svd.s.first(), svd.s.last()) {
        (Some(&hi), Some(&lo)) if lo > T::zero() && svd.s.len() == m.nrows().min(m.ncols()) => {
            hi / lo
        }
        _ => cst(f64::INFINITY),
    }
}

/// Orthonormal basis (columns) of the null space of `m`.
pub fn null_space<T: Real>(m: &DMatrix<T>, tau: f64) -> DMatrix<T> {
    let (r, c) = m.shape();
    if c == 0 {
        return DMatrix::zeros(0, 0);
    }
    // Pad wide matrices so the SVD returns a full right basis.
    let padded = if r < c {
        let mut p = DMatrix::zeros(c, c);
        p.rows_mut(0, r).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = Svd::new(&padded);
    let k = svd.rank(tau);
    svd.v_t.rows(k, c - k).transpose()
}

/// Orthonormal basis (columns) of the column space of `m`.
pub fn range_basis<T: Real>(m: &DMatrix<T>, tau: f64) -> DMatrix<T> {
    let svd = Svd::new(m);
    let k = svd.rank(tau);
    svd.u.columns(0, k).into_owned()
}

pub fn kron<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    a.kronecker(b)
}

pub fn block_diag<T: Real>(blocks: &[&DMatrix<T>]) -> DMatrix<T> {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Stacks matrices vertically.
pub fn vstack<T: Real>(blocks: &[&DMatrix<T>]) -> DMatrix<T> {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), b.shape()).copy_from(*b);
        r += b.nrows();
    }
    out
}

/// Stacks matrices horizontally.
pub fn hstack<T: Real>(blocks: &[&DMatrix<T>]) -> DMatrix<T> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        out.view_mut((0, c), b.shape()).copy_from(*b);
        c += b.ncols();
    }
    out
}

pub fn symmetrize<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) * cst::<T>(0.5)
}

fn check_symmetric<T: Real>(m: &DMatrix<T>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::InvalidArgument("matrix is not square".into()));
    }
    let scale = m.amax().max(T::one());
    let asym = (m - m.transpose()).amax();
    if asym > scale * cst::<T>(tol::DEFAULT.symmetry) {
        return Err(Error::InvalidArgument(format!(
            "matrix is not symmetric (max asymmetry {:e})",
            to_f64(asym)
        )));
    }
    Ok(())
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn psd_min_eig<T: Real>(m: &DMatrix<T>) -> Result<T> {
    check_symmetric(m)?;
    if m.nrows() == 0 {
        return Ok(T::zero());
    }
    let eig = symmetrize(m).symmetric_eigenvalues();
    Ok(eig.iter().copied().fold(eig[0], |a, b| a.min(b)))
}

/// Projects a symmetric matrix onto the PSD cone by clipping eigenvalues at 0.
pub fn psd_clip<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    if m.nrows() == 0 {
        return m.clone();
    }
    let eig = symmetrize(m).symmetric_eigen();
    let d = eig.eigenvalues.map(|l| l.max(T::zero()));
    symmetrize(&(&eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()))
}

/// Eigenvalues sorted by real part, then imaginary part.
pub fn eigenvalues<T: Real>(m: &DMatrix<T>) -> Vec<Complex<T>> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<Complex<T>> = m.clone().complex_eigenvalues().iter().copied().collect();
    sort_complex(&mut ev);
    ev
}

pub fn sort_complex<T: Real>(v: &mut [Complex<T>]) {
    v.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
    });
}

pub fn modulus<T: Real>(z: &Complex<T>) -> T {
    z.re.hypot(z.im)
}

/// Eigenvalues whose modulus exceeds `rel` times the largest modulus.
pub fn nonzero_eigenvalues<T: Real>(m: &DMatrix<T>, rel: f64) -> Vec<Complex<T>> {
    let ev = eigenvalues(m);
    let top = ev.iter().map(modulus).fold(T::zero(), |a, b| a.max(b));
    let cut = top * cst::<T>(rel);
    ev.into_iter().filter(|z| modulus(z) > cut).collect()
}

pub fn spectral_radius<T: Real>(m: &DMatrix<T>) -> T {
    eigenvalues(m)
        .iter()
        .map(modulus)
        .fold(T::zero(), |a, b| a.max(b))
}

/// Largest distance between paired elements under the best one-to-one pairing
/// of two multisets. Infinite when the sizes differ.
pub fn multiset_distance<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let n = a.len();
    let d: Vec<Vec<f64>> = a
        .iter()
        .map(|x| b.iter().map(|y| to_f64(modulus(&(x - y)))).collect())
        .collect();
    if n <= 8 {
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        permute(&mut perm, 0, &mut |p| {
            let worst = p.iter().enumerate().map(|(i, &j)| d[i][j]).fold(0.0, f64::max);
            best = best.min(worst);
        });
        if n == 0 {
            0.0
        } else {
            best
        }
    } else {
        // Greedy pairing is an upper bound on the bottleneck distance.
        let mut used = vec![false; n];
        let mut worst: f64 = 0.0;
        for row in &d {
            let (j, dist) = row
                .iter()
                .enumerate()
                .filter(|(j, _)| !used[*j])
                .fold((0, f64::INFINITY), |acc, (j, &v)| if v < acc.1 { (j, v) } else { acc });
            used[j] = true;
            worst = worst.max(dist);
        }
        worst
    }
}

fn permute(p: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, f);
        p.swap(k, i);
    }
}

/// Relative Frobenius error ‖X − X̂‖_F / ‖X‖_F.
pub fn error_index<T: Real>(truth: &DMatrix<T>, est: &DMatrix<T>) -> Result<T> {
    if truth.shape() != est.shape() {
        return Err(Error::InvalidArgument(format!(
            "shape mismatch {:?} vs {:?}",
            truth.shape(),
            est.shape()
        )));
    }
    let den = truth.norm();
    if den == T::zero() {
        return Err(Error::InvalidArgument("reference matrix is zero".into()));
    }
    Ok((truth - est).norm() / den)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
pub fn expm<T: Real>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    if !a.is_square() {
        return Err(Error::InvalidArgument("expm needs a square matrix".into()));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidModel("non-finite entry".into()));
    }
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|j| to_f64(a.column(j).lp_norm(1)))
        .fold(0.0, f64::max);
    let s = if norm1 > THETA13 {
        (norm1 / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a * cst::<T>(2f64.powi(-s));
    let b = |i: usize| cst::<T>(PADE13[i]);
    let id = DMatrix::<T>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9))
        + &a6 * b(7)
        + &a4 * b(5)
        + &a2 * b(3)
        + &id * b(1);
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8))
        + &a6 * b(6)
        + &a4 * b(4)
        + &a2 * b(2)
        + &id * b(0);
    let mut r = (&v - &u)
        .lu()
        .solve(&(&v + &u))
        .ok_or_else(|| Error::InvalidModel("Padé denominator is singular".into()))?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

/// Solves AᵀYA − Y = −Q for Schur-stable A.
pub fn dlyap<T: Real>(a: &DMatrix<T>, q: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = a.nrows();
    if !a.is_square() || q.shape() != (n, n) {
        return Err(Error::InvalidArgument("dlyap dimension mismatch".into()));
    }
    let rho = spectral_radius(a);
    if rho >= T::one() {
        return Err(Error::Unstable(to_f64(rho)));
    }
    let at = a.transpose();
    // vec(AᵀYA) = (Aᵀ ⊗ Aᵀ) vec(Y) for column-major vec.
    let op = DMatrix::<T>::identity(n * n, n * n) - at.kronecker(&at);
    let lu = op.clone().lu();
    let rhs = DVector::from_column_slice(q.as_slice());
    let mut y = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Unstable(to_f64(rho)))?;
    let resid = &rhs - &op * &y;
    if let Some(dy) = lu.solve(&resid) {
        y += dy;
    }
    Ok(symmetrize(&DMatrix::from_column_slice(n, n, y.as_slice())))
}

/// Ho-Kalman realization from Markov parameters h(1), h(2), ….
///
/// The Hankel matrix with n+1 block rows and columns is factored by SVD and
/// split as Σ^{1/2}·Σ^{1/2}, giving balanced coordinates.
pub fn hankel_realize<T: Real>(markov: &[DMatrix<T>], order_hint: usize) -> Result<Realization<T>> {
    let n = order_hint;
    if n == 0 {
        return Err(Error::InvalidArgument("order must be positive".into()));
    }
    if markov.len() < 2 * n + 1 {
        return Err(Error::InvalidArgument(format!(
            "{} Markov parameters given, at least {} needed",
            markov.len(),
            2 * n + 1
        )));
    }
    let (p, m) = markov[0].shape();
    if markov.iter().any(|h| h.shape() != (p, m)) {
        return Err(Error::InvalidArgument("Markov parameters differ in shape".into()));
    }
    let k = n + 1;
    let mut hank = DMatrix::zeros(k * p, k * m);
    for i in 0..k {
        for j in 0..k {
            hank.view_mut((i * p, j * m), (p, m)).copy_from(&markov[i + j]);
        }
    }
    let svd = Svd::new(&hank);
    let r = svd.rank(tol::DEFAULT.rank);
    if r != n {
        return Err(Error::RankMismatch { expected: n, found: r });
    }
    let sqrt_s = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        svd.s[..n].iter().map(|s| s.sqrt()),
    ));
    let obs = svd.u.columns(0, n) * &sqrt_s;
    let ctr = &sqrt_s * svd.v_t.rows(0, n);
    let c_t = obs.rows(0, p).into_owned();
    let b_t = ctr.columns(0, m).into_owned();
    let up = obs.rows(0, n * p).into_owned();
    let down = obs.rows(p, n * p).into_owned();
    let a_t = pinv(&up) * down;
    Ok(Realization { a_t, b_t, c_t, order: n })
}

/// Factors `mat` = left · right with left of full column rank `r`.
pub fn full_rank_factorize<T: Real>(mat: &DMatrix<T>, r: usize) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let svd = Svd::new(mat);
    let found = svd.rank(tol::DEFAULT.rank);
    if found != r {
        return Err(Error::RankMismatch { expected: r, found });
    }
    let sqrt_s = DMatrix::from_diagonal(&DVector::from_iterator(
        r,
        svd.s[..r].iter().map(|s| s.sqrt()),
    ));
    let left = svd.u.columns(0, r) * &sqrt_s;
    let right = &sqrt_s * svd.v_t.rows(0, r);
    Ok((left, right))
}

/// Minimizes ‖Z·Θ‖_F subject to E₀·Θ = I by the null-space method.
///
/// Returns Θ and the achieved ‖Z·Θ‖_F.
pub fn eq_constrained_lsq<T: Real>(z: &DMatrix<T>, e0: &DMatrix<T>) -> Result<(DMatrix<T>, T)> {
    let (n, k) = e0.shape();
    if z.ncols() != k {
        return Err(Error::InvalidArgument("column counts of Z and E0 differ".into()));
    }
    let r = rank(e0);
    if r != n {
        return Err(Error::RankMismatch { expected: n, found: r });
    }
    let theta_p = pinv(e0);
    let basis = null_space(e0, tol::DEFAULT.rank);
    let theta = if basis.ncols() == 0 {
        theta_p
    } else {
        let zn = z * &basis;
        let w = -pinv(&zn) * (z * &theta_p);
        &theta_p + basis * w
    };
    let eps = (z * &theta).norm();
    Ok((theta, eps))
}
