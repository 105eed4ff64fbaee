use nalgebra::{DMatrix, DVector};

use super::{failed, uncertainty_witness, zeros_of, AttackReport, DataLog, DensePublic};
use crate::dense::{half_f_block, half_h_block, prediction_matrices, QpShape};
use crate::linalg::{self, hstack, vstack, Realization};
use crate::{cst, Error, Real, Result};

fn rank_n<T: Real>(m: &DMatrix<T>, n: usize) -> bool {
    linalg::rank(m) >= n
}

fn centering<T: Real>(k: usize) -> DMatrix<T> {
    DMatrix::identity(k, k) - DMatrix::from_element(k, k, T::one() / cst::<T>(k as f64))
}

/// col(CA, …, CA^N).
fn shifted_obsv<T: Real>(a: &DMatrix<T>, c: &DMatrix<T>, big_n: usize) -> DMatrix<T> {
    let p = c.nrows();
    let mut out = DMatrix::zeros(big_n * p, a.ncols());
    let mut cur = c * a;
    for k in 0..big_n {
        out.rows_mut(k * p, p).copy_from(&cur);
        cur = &cur * a;
    }
    out
}

/// Markov parameters h(1..N) from the first block column of 𝒢.
fn markov_from_g<T: Real>(g_cal: &DMatrix<T>, shape: QpShape) -> Vec<DMatrix<T>> {
    let (m, p) = (shape.m, shape.p);
    (0..shape.horizon).map(|k| g_cal.view((k * p, 0), (p, m)).into_owned()).collect()
}

/// Ho-Kalman realization of the system behind 𝒢 (needs N ≥ 2n + 1).
pub fn realize_from_g<T: Real>(g_cal: &DMatrix<T>, shape: QpShape, n_hint: usize) -> Result<Realization<T>> {
    if shape.horizon < 2 * n_hint + 1 {
        return Err(Error::InvalidArgument(format!(
            "realization needs N >= {}, got N = {}",
            2 * n_hint + 1,
            shape.horizon
        )));
    }
    if g_cal.shape() != (shape.horizon * shape.p, shape.nvar()) {
        return Err(Error::InvalidArgument("𝒢 does not match the problem shape".into()));
    }
    linalg::hankel_realize(&markov_from_g(g_cal, shape), n_hint)
}

/// A PSD pair (Q̂, P̂) reproducing ½H − I⊗R̂ = 𝒮ᵀ𝒬𝒮 and ½F = 𝒯ᵀ𝒬𝒮 in the
/// least-squares sense, given (A, B) in the same basis as `f`.
pub fn consistent_cost<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    r_hat: &DMatrix<T>,
    h: &DMatrix<T>,
    f: &DMatrix<T>,
    horizon: usize,
) -> (DMatrix<T>, DMatrix<T>) {
    let (n, m) = b.shape();
    let nm = horizon * m;
    let (s_cal, t_cal) = prediction_matrices(a, b, horizon);
    let half = cst::<T>(0.5);
    let target_h = h * half - linalg::kron(&DMatrix::identity(horizon, horizon), r_hat);
    let target_f = f * half;
    let rows_h = nm * nm;
    let mut rhs = DVector::zeros(rows_h + n * nm);
    rhs.rows_mut(0, rows_h).copy_from_slice(target_h.as_slice());
    rhs.rows_mut(rows_h, n * nm).copy_from_slice(target_f.as_slice());

    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let np = pairs.len();
    let mut design = DMatrix::zeros(rhs.len(), 2 * np);
    for (slot, blocks) in [(0, 0..horizon - 1), (1, horizon - 1..horizon)] {
        for (col, &(i, j)) in pairs.iter().enumerate() {
            let mut acc_h = DMatrix::<T>::zeros(nm, nm);
            let mut acc_f = DMatrix::<T>::zeros(n, nm);
            for k in blocks.clone() {
                let sk = s_cal.rows(k * n, n);
                let tk = t_cal.rows(k * n, n);
                let (si, sj) = (sk.row(i), sk.row(j));
                acc_h += si.transpose() * sj;
                acc_f += tk.row(i).transpose() * sj;
                if i != j {
                    acc_h += sj.transpose() * si;
                    acc_f += tk.row(j).transpose() * si;
                }
            }
            let c = slot * np + col;
            design.view_mut((0, c), (rows_h, 1)).copy_from_slice(acc_h.as_slice());
            design.view_mut((rows_h, c), (n * nm, 1)).copy_from_slice(acc_f.as_slice());
        }
    }
    let coef = linalg::pinv(&design) * rhs;
    let null = linalg::null_space(&design, 1e-10);
    let unpack = |v: &DVector<T>, off: usize| {
        let mut m = DMatrix::zeros(n, n);
        for (col, &(i, j)) in pairs.iter().enumerate() {
            m[(i, j)] = v[off + col];
            m[(j, i)] = v[off + col];
        }
        m
    };
    let coef = psd_member(&coef, &null, |v| (unpack(v, 0), unpack(v, np)));
    (linalg::psd_clip(&unpack(&coef, 0)), linalg::psd_clip(&unpack(&coef, np)))
}

/// Moves `coef` along the columns of `null` until both unpacked matrices are
/// PSD, using Polyak subgradient steps on the smaller of the two minimum
/// eigenvalues. Returns the best point found.
fn psd_member<T: Real>(
    coef: &DVector<T>,
    null: &DMatrix<T>,
    unpack: impl Fn(&DVector<T>) -> (DMatrix<T>, DMatrix<T>),
) -> DVector<T> {
    let min_eig = |v: &DVector<T>| -> (T, DVector<T>) {
        let (q, p) = unpack(v);
        let mut best: Option<(T, DVector<T>)> = None;
        for (mat, dir_of) in [(q, 0usize), (p, 1usize)] {
            let eig = linalg::symmetrize(&mat).symmetric_eigen();
            let k = eig.eigenvalues.imin();
            let lam = eig.eigenvalues[k];
            if best.as_ref().is_none_or(|(b, _)| lam < *b) {
                let u = eig.eigenvectors.column(k).into_owned();
                // d λ / d t_l = uᵀ M_l u along each null direction.
                let grad = DVector::from_fn(null.ncols(), |l, _| {
                    let (ql, pl) = unpack(&null.column(l).into_owned());
                    let ml = if dir_of == 0 { ql } else { pl };
                    (u.transpose() * ml * &u)[(0, 0)]
                });
                best = Some((lam, grad));
            }
        }
        best.unwrap()
    };
    let scale = coef.amax().max(T::one());
    let target = cst::<T>(1e-9) * scale;
    let mut cur = coef.clone();
    let (mut lam, mut grad) = min_eig(&cur);
    if null.ncols() == 0 || lam >= T::zero() {
        return cur;
    }
    let mut best = (lam, cur.clone());
    for _ in 0..500 {
        let g2 = grad.norm_squared();
        if g2 <= cst::<T>(1e-300) {
            break;
        }
        let step = (target - lam) / g2;
        cur += null * (&grad * step);
        (lam, grad) = min_eig(&cur);
        if lam > best.0 {
            best = (lam, cur.clone());
        }
        if lam >= target {
            break;
        }
    }
    best.1
}

fn attach_cost<T: Real>(
    rep: &mut AttackReport<T>,
    op: &str,
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    r_hat: &DMatrix<T>,
    h: &DMatrix<T>,
    f: &DMatrix<T>,
    horizon: usize,
) -> Result<()> {
    let (q_hat, p_hat) = consistent_cost(a, b, r_hat, h, f, horizon);
    rep.witness = Some(uncertainty_witness(a, b, &q_hat, &p_hat)?);
    rep.q_hat = Some(q_hat);
    rep.p_hat = Some(p_hat);
    rep.tag(op, &["q_hat", "p_hat"]);
    rep.tag("uncertainty_witness", &["witness"]);
    Ok(())
}

/// Recovers (A, B, C, R) from H, F, G, W, O of a single problem (N > n).
pub fn attack_dense_full<T: Real>(public: &DensePublic<T>) -> Result<AttackReport<T>> {
    let s = public.shape;
    let (n, m, p, big_n) = (s.n, s.m, s.p, s.horizon);
    if big_n <= n {
        return Err(Error::InvalidArgument(format!("needs N > n, got N = {big_n}, n = {n}")));
    }
    let o_cal = public.o_cal();
    let g_cal = public.g_cal();
    let o_minus = o_cal.rows(0, (big_n - 1) * p).into_owned();
    let o_plus = o_cal.rows(p, (big_n - 1) * p).into_owned();
    if !rank_n(&o_minus, n) {
        return failed("shifted observability data has rank below n");
    }
    let a_hat = linalg::pinv(&o_minus) * o_plus;
    let a_inv = linalg::inverse(&a_hat)
        .ok_or_else(|| Error::AttackFailed("recovered A is singular".into()))?;
    let c_hat = o_cal.rows(0, p) * &a_inv;
    let stacked = vstack(&[&c_hat, &o_minus]);
    let b_hat = linalg::pinv(&stacked) * g_cal.view((0, 0), (big_n * p, m));
    let pb = terminal_pb(&a_hat, &b_hat, &public.h, &public.f, big_n)?;
    let r_hat = linalg::symmetrize(&(half_h_block(&public.h, m, big_n, big_n) - b_hat.transpose() * pb));

    let mut rep = AttackReport {
        eigenvalues: linalg::eigenvalues(&a_hat),
        zeros: zeros_of(&a_hat, &b_hat, &c_hat),
        ..Default::default()
    };
    rep.tag("attack_dense_full", &["a_hat", "b_hat", "c_hat", "r_hat", "eigenvalues", "zeros"]);
    attach_cost(&mut rep, "attack_dense_full", &a_hat, &b_hat, &r_hat, &public.h, &public.f, big_n)?;
    rep.a_hat = Some(a_hat);
    rep.b_hat = Some(b_hat);
    rep.c_hat = Some(c_hat);
    rep.r_hat = Some(r_hat);
    Ok(rep)
}

/// PB from the last input column: ½F_N = (A^N)ᵀPB and ½H_{j,N} = (A^{N−j}B)ᵀPB
/// for j < N, solved jointly in the least-squares sense. A^N alone is nearly
/// singular for stable A and long horizons.
fn terminal_pb<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, h: &DMatrix<T>, f: &DMatrix<T>, big_n: usize) -> Result<DMatrix<T>> {
    let (n, m) = b.shape();
    let mut lhs = DMatrix::zeros(n + (big_n - 1) * m, n);
    let mut rhs = DMatrix::zeros(n + (big_n - 1) * m, m);
    lhs.rows_mut(0, n).copy_from(&a.pow(big_n as u32).transpose());
    rhs.rows_mut(0, n).copy_from(&half_f_block(f, m, big_n));
    let mut akb = a * b;
    for j in (1..big_n).rev() {
        let row = n + (j - 1) * m;
        lhs.rows_mut(row, m).copy_from(&akb.transpose());
        rhs.rows_mut(row, m).copy_from(&half_h_block(h, m, j, big_n));
        akb = a * akb;
    }
    if !rank_n(&lhs, n) {
        return failed("terminal block equations have rank below n");
    }
    Ok(linalg::pinv(&lhs) * rhs)
}

/// Recovers the system up to similarity plus R from H, G and a log of
/// (Fᵀx₀, W + Ox₀) over several initial states.
pub fn attack_dense_multi<T: Real>(log: &DataLog<T>, h: &DMatrix<T>, g: &DMatrix<T>) -> Result<AttackReport<T>> {
    let s = log.shape;
    let (n, m, p, big_n) = (s.n, s.m, s.p, s.horizon);
    let public_g = g.rows(2 * s.nvar(), big_n * p).into_owned();
    let real = realize_from_g(&public_g, s, n)?;
    let (a_t, b_t, c_t) = (real.a_t, real.b_t, real.c_t);
    let o_t = shifted_obsv(&a_t, &c_t, big_n);

    let k = log.len();
    if k < 2 {
        return failed("insufficient initial-state excitation");
    }
    let l = centering::<T>(k);
    let e = log.e_matrix().rows(2 * s.nvar() + big_n * p, big_n * p) * &l;
    if !rank_n(&e, n) {
        return failed("insufficient initial-state excitation");
    }
    let x0l = linalg::pinv(&o_t) * e;
    let ftx = log.f_matrix() * &l;
    let f_t = (ftx * linalg::pinv(&x0l)).transpose();

    let pb = terminal_pb(&a_t, &b_t, h, &f_t, big_n)?;
    let r_hat = linalg::symmetrize(&(half_h_block(h, m, big_n, big_n) - b_t.transpose() * pb));

    let mut rep = AttackReport {
        eigenvalues: linalg::eigenvalues(&a_t),
        zeros: zeros_of(&a_t, &b_t, &c_t),
        ..Default::default()
    };
    rep.tag("attack_dense_multi", &["a_hat", "b_hat", "c_hat", "r_hat", "eigenvalues", "zeros"]);
    attach_cost(&mut rep, "attack_dense_multi", &a_t, &b_t, &r_hat, h, &f_t, big_n)?;
    rep.a_hat = Some(a_t);
    rep.b_hat = Some(b_t);
    rep.c_hat = Some(c_t);
    rep.r_hat = Some(r_hat);
    Ok(rep)
}

/// [F₁,₁ … F₁,ₖ] for blocks starting at `first` (1-based).
fn f_row<T: Real>(f: &DMatrix<T>, m: usize, first: usize, count: usize) -> DMatrix<T> {
    let blocks: Vec<DMatrix<T>> = (first..first + count).map(|j| half_f_block(f, m, j)).collect();
    hstack(&blocks.iter().collect::<Vec<_>>())
}

/// [H₂,₁ … H_{n+1},₁] side by side.
fn h_first_column<T: Real>(h: &DMatrix<T>, m: usize, n: usize) -> DMatrix<T> {
    let blocks: Vec<DMatrix<T>> = (2..=n + 1).map(|i| half_h_block(h, m, i, 1)).collect();
    hstack(&blocks.iter().collect::<Vec<_>>())
}

/// Recovers (A, B, R) from H and F alone, for a Schur-stable A and a long
/// horizon. The estimates carry a bias that shrinks like ρ(A)^N.
pub fn attack_hf<T: Real>(
    h: &DMatrix<T>,
    f: &DMatrix<T>,
    shape: QpShape,
    n_hint: usize,
    c_known: Option<&DMatrix<T>>,
) -> Result<AttackReport<T>> {
    let (n, m) = (n_hint, shape.m);
    if shape.horizon < n + 1 {
        return Err(Error::InvalidArgument(format!("needs N >= {}, got {}", n + 1, shape.horizon)));
    }
    let c0 = f_row(f, m, 1, n);
    let c1 = f_row(f, m, 2, n);
    if !rank_n(&c0, n) {
        return failed("pair (A, BᵀȲ) not observable from data");
    }
    let c0_pinv = linalg::pinv(&c0);
    let a_hat = (&c1 * &c0_pinv).transpose();
    let hb: Vec<DMatrix<T>> = (2..=n + 1).map(|i| half_h_block(h, m, i, 1).transpose()).collect();
    let b_hat = (hstack(&hb.iter().collect::<Vec<_>>()) * &c0_pinv).transpose();
    let yb = a_hat
        .transpose()
        .lu()
        .solve(&half_f_block(f, m, 1))
        .ok_or_else(|| Error::AttackFailed("recovered A is singular".into()))?;
    let r_hat = linalg::symmetrize(&(half_h_block(h, m, 1, 1) - b_hat.transpose() * yb));

    let mut rep = AttackReport { eigenvalues: linalg::eigenvalues(&a_hat), ..Default::default() };
    rep.tag("attack_hf", &["a_hat", "b_hat", "r_hat", "eigenvalues"]);
    if let Some(c) = c_known {
        rep.zeros = zeros_of(&a_hat, &b_hat, c);
        rep.tag("attack_hf", &["zeros"]);
    }
    attach_cost(&mut rep, "attack_hf", &a_hat, &b_hat, &r_hat, h, f, shape.horizon)?;
    rep.a_hat = Some(a_hat);
    rep.b_hat = Some(b_hat);
    rep.r_hat = Some(r_hat);
    Ok(rep)
}

/// Recovers (A, B) up to similarity plus R from H and the logged Fᵀx₀
/// vectors, for a Schur-stable A and a long horizon.
pub fn attack_hx0f<T: Real>(log: &DataLog<T>, h: &DMatrix<T>) -> Result<AttackReport<T>> {
    let s = log.shape;
    let (n, m) = (s.n, s.m);
    if s.horizon < n + 1 {
        return Err(Error::InvalidArgument(format!("needs N >= {}, got {}", n + 1, s.horizon)));
    }
    // Row i holds x₀ᵢᵀF, so X₀ᵀ𝒞 is half of its first n blocks.
    let data = log.f_matrix().transpose();
    let half = cst::<T>(0.5);
    let d0 = data.columns(0, n * m) * half;
    let d1 = data.columns(m, n * m) * half;
    let (x_b, c_b) = match linalg::full_rank_factorize(&d0, n) {
        Ok(v) => v,
        Err(Error::RankMismatch { .. }) => return failed("initial states do not span the state space"),
        Err(e) => return Err(e),
    };
    let x_b_pinv = linalg::pinv(&x_b);
    let c_b_pinv = linalg::pinv(&c_b);
    let a_hat = (&x_b_pinv * d1 * &c_b_pinv).transpose();
    let hb: Vec<DMatrix<T>> = (2..=n + 1).map(|i| half_h_block(h, m, i, 1).transpose()).collect();
    let b_hat = (hstack(&hb.iter().collect::<Vec<_>>()) * &c_b_pinv).transpose();

    let mut powers = Vec::with_capacity(n);
    let mut cur = &a_hat * &b_hat;
    for _ in 0..n {
        powers.push(cur.clone());
        cur = &a_hat * cur;
    }
    let ctrb = hstack(&powers.iter().collect::<Vec<_>>());
    let bty = h_first_column(h, m, n) * linalg::pinv(&ctrb);
    let r_hat = linalg::symmetrize(&(half_h_block(h, m, 1, 1) - bty * &b_hat));
    let f_t = &x_b_pinv * data;

    let mut rep = AttackReport { eigenvalues: linalg::eigenvalues(&a_hat), ..Default::default() };
    rep.tag("attack_hx0f", &["a_hat", "b_hat", "r_hat", "eigenvalues"]);
    attach_cost(&mut rep, "attack_hx0f", &a_hat, &b_hat, &r_hat, h, &f_t, s.horizon)?;
    rep.a_hat = Some(a_hat);
    rep.b_hat = Some(b_hat);
    rep.r_hat = Some(r_hat);
    Ok(rep)
}

/// Reads 𝐑 off the identity rows of G̃ and the centered offset off ẽ.
/// Returns (R̂, r̂) with R̂ = 𝐑 and r̂ = (L⊗I_m)𝐫. Assumes no row shuffle.
pub fn recover_dense_key<T: Real>(g_tilde: &DMatrix<T>, e_tilde: &DVector<T>, shape: QpShape) -> Result<(DMatrix<T>, DVector<T>)> {
    let k = shape.nvar();
    if g_tilde.shape() != (shape.ncon(), k) || e_tilde.len() != shape.ncon() {
        return Err(Error::InvalidArgument("transformed constraints do not match the shape".into()));
    }
    let r_hat = g_tilde.rows(0, k).into_owned();
    let l = linalg::kron(&centering::<T>(shape.horizon), &DMatrix::identity(shape.m, shape.m));
    let r_vec = -(l * e_tilde.rows(0, k));
    Ok((r_hat, r_vec))
}
