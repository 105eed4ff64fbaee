use nalgebra::{DMatrix, DVector};

use super::left_inverse;
use crate::linalg::{self, hstack, vstack};
use crate::lti::{self, CostSpec, LtiSystem};
use crate::poly::{self, Exponents, PolyMap, Polynomial};
use crate::rng::{rand_matrix, Require, SeededRng};
use crate::{cst, tol, Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// x̃ = Tx, ũ = Gu + Fx, ỹ = Sy.
    Plain,
    /// Plain plus constant offsets r₁, r₂, r₃.
    Affine,
    /// Tall T̄, Ḡ, S̄ lifting into larger spaces.
    Highdim,
    /// ũ = r₂ + Fx + F₁Z(x) + Gu with Z(x) the monomials of degree 2..d.
    Poly,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Plain => "plain",
            Variant::Affine => "affine",
            Variant::Highdim => "highdim",
            Variant::Poly => "poly",
        }
    }
}

/// Sampling parameters for [`gen_separate_key`].
#[derive(Debug, Clone, PartialEq)]
pub struct KeyConfig {
    pub low: f64,
    pub high: f64,
    /// Lifted dimensions for the high-dimensional variant; `None` means one more
    /// than the original.
    pub n_bar: Option<usize>,
    pub m_bar: Option<usize>,
    pub p_bar: Option<usize>,
    /// Highest monomial degree in Z(x).
    pub degree: u32,
}

impl Default for KeyConfig {
    fn default() -> Self {
        Self { low: -1e3, high: 1e3, n_bar: None, m_bar: None, p_bar: None, degree: 2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparateKey<T: Real> {
    pub variant: Variant,
    pub t_mat: DMatrix<T>,
    pub f_mat: DMatrix<T>,
    pub g_mat: DMatrix<T>,
    pub s_mat: DMatrix<T>,
    pub r1: DVector<T>,
    pub r2: DVector<T>,
    pub r3: DVector<T>,
    /// Coefficients of Z(x), m × basis length.
    pub f1: DMatrix<T>,
    pub degree: u32,
    pub basis: Vec<Exponents>,
}

impl<T: Real> SeparateKey<T> {
    /// The key that leaves every problem unchanged.
    pub fn identity(n: usize, m: usize, p: usize) -> Self {
        Self::plain(
            DMatrix::identity(n, n),
            DMatrix::zeros(m, n),
            DMatrix::identity(m, m),
            DMatrix::identity(p, p),
        )
    }

    pub fn plain(t_mat: DMatrix<T>, f_mat: DMatrix<T>, g_mat: DMatrix<T>, s_mat: DMatrix<T>) -> Self {
        let (n, m, p) = (t_mat.nrows(), g_mat.nrows(), s_mat.nrows());
        Self {
            variant: Variant::Plain,
            t_mat,
            f_mat,
            g_mat,
            s_mat,
            r1: DVector::zeros(n),
            r2: DVector::zeros(m),
            r3: DVector::zeros(p),
            f1: DMatrix::zeros(m, 0),
            degree: 0,
            basis: Vec::new(),
        }
    }

    /// Checks shapes and rank conditions against `sys`.
    pub fn validate(&self, sys: &LtiSystem<T>) -> Result<()> {
        let (n, m, p) = (sys.n(), sys.m(), sys.p());
        let (nt, mt, pt) = (self.t_mat.nrows(), self.g_mat.nrows(), self.s_mat.nrows());
        let shapes_ok = self.t_mat.ncols() == n
            && self.g_mat.ncols() == m
            && self.s_mat.ncols() == p
            && self.f_mat.shape() == (mt, n)
            && self.r1.len() == nt
            && self.r2.len() == mt
            && self.r3.len() == pt
            && self.f1.shape() == (mt, self.basis.len());
        if !shapes_ok {
            return Err(Error::InvalidArgument("key does not match the system dimensions".into()));
        }
        let square = nt == n && mt == m && pt == p;
        match self.variant {
            Variant::Highdim => {
                if nt <= n || mt <= m || pt <= p {
                    return Err(Error::InvalidArgument("lifted dimensions must exceed the originals".into()));
                }
            }
            _ if !square => return Err(Error::InvalidArgument("key matrices must be square".into())),
            _ => {}
        }
        for (name, mat) in [("T", &self.t_mat), ("G", &self.g_mat), ("S", &self.s_mat)] {
            if linalg::rank(mat) < mat.ncols() {
                return Err(Error::InvalidArgument(format!("{name} is rank deficient")));
            }
        }
        Ok(())
    }
}

fn lifted(dim: usize, requested: Option<usize>) -> usize {
    requested.unwrap_or(dim + 1)
}

/// Observability of the closed pair (A − BG⁻¹F, C), which is what the
/// transformed system (Ã, C̃) inherits.
pub fn observability_preserved<T: Real>(sys: &LtiSystem<T>, key: &SeparateKey<T>) -> bool {
    let gl = left_inverse(&key.g_mat);
    let a_cl = &sys.a - &sys.b * &gl * &key.f_mat;
    linalg::rank(&lti::obsv_matrix(&a_cl, &sys.c)) == sys.n()
}

/// Samples a key of the requested variant, redrawing F until observability of
/// the transformed system is preserved.
pub fn gen_separate_key<T: Real>(
    rng: &mut SeededRng,
    sys: &LtiSystem<T>,
    variant: Variant,
    cfg: &KeyConfig,
) -> Result<SeparateKey<T>> {
    let (n, m, p) = (sys.n(), sys.m(), sys.p());
    let (lo, hi) = (cfg.low, cfg.high);
    let (nt, mt, pt, req) = match variant {
        Variant::Highdim => (
            lifted(n, cfg.n_bar),
            lifted(m, cfg.m_bar),
            lifted(p, cfg.p_bar),
            Require::FullColumnRank,
        ),
        _ => (n, m, p, Require::Invertible),
    };
    let t_mat = rand_matrix(rng, nt, n, lo, hi, req)?;
    let g_mat = rand_matrix(rng, mt, m, lo, hi, req)?;
    let s_mat = rand_matrix(rng, pt, p, lo, hi, req)?;
    let mut key = SeparateKey::plain(t_mat, DMatrix::zeros(mt, n), g_mat, s_mat);
    key.variant = variant;
    match variant {
        Variant::Affine => {
            key.r1 = rng.uniform_matrix::<T>(n, 1, lo, hi).column(0).into_owned();
            key.r2 = rng.uniform_matrix::<T>(m, 1, lo, hi).column(0).into_owned();
            key.r3 = rng.uniform_matrix::<T>(p, 1, lo, hi).column(0).into_owned();
        }
        Variant::Poly => {
            if cfg.degree < 2 {
                return Err(Error::InvalidArgument("polynomial degree must be at least 2".into()));
            }
            key.degree = cfg.degree;
            key.basis = poly::monomial_basis(n, 2, cfg.degree);
            key.f1 = rng.uniform_matrix(m, key.basis.len(), -1.0, 1.0);
            key.r2 = rng.uniform_matrix::<T>(m, 1, lo, hi).column(0).into_owned();
        }
        _ => {}
    }
    for _ in 0..tol::DEFAULT.max_attempts {
        key.f_mat = rng.uniform_matrix(mt, n, lo, hi);
        if observability_preserved(sys, &key) {
            key.validate(sys)?;
            return Ok(key);
        }
    }
    Err(Error::GenerationFailed(tol::DEFAULT.max_attempts))
}

/// A fresh key per instance, each drawn from its own forked stream.
pub fn gen_separate_keys<T: Real>(
    rng: &SeededRng,
    sys: &LtiSystem<T>,
    variant: Variant,
    cfg: &KeyConfig,
    count: usize,
) -> Result<Vec<SeparateKey<T>>> {
    (0..count)
        .map(|i| gen_separate_key(&mut rng.fork(i as u64), sys, variant, cfg))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualTag {
    Affine,
    Nonlinear,
    /// Present in the data without a declared structure.
    Untagged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualSite {
    Dynamics,
    StageCost,
}

/// Extra term of a transformed problem, as polynomials in ξ = [x̃; ũ].
#[derive(Debug, Clone, PartialEq)]
pub struct Residual<T: Real> {
    pub tag: ResidualTag,
    pub site: ResidualSite,
    pub terms: PolyMap<T>,
}

/// The system and cost the solver receives.
///
/// Dynamics: x̃⁺ = Ãx̃ + B̃ũ + state_offset + Σ residuals at `Dynamics`.
/// Stage cost: ξᵀM̃ξ + 2ξᵀ·stage_linear + stage_constant + Σ residuals at
/// `StageCost`. Terminal cost: x̃ᵀP̃x̃ + 2x̃ᵀ·terminal_linear + terminal_constant.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedProblem<T: Real> {
    pub variant: Variant,
    pub a_t: DMatrix<T>,
    pub b_t: DMatrix<T>,
    pub c_t: DMatrix<T>,
    pub m_t: DMatrix<T>,
    pub p_t: DMatrix<T>,
    pub horizon: usize,
    pub state_offset: DVector<T>,
    pub output_offset: DVector<T>,
    pub stage_linear: DVector<T>,
    pub terminal_linear: DVector<T>,
    pub stage_constant: T,
    pub terminal_constant: T,
    pub residuals: Vec<Residual<T>>,
}

impl<T: Real> TransformedProblem<T> {
    pub fn n(&self) -> usize {
        self.a_t.nrows()
    }

    pub fn m(&self) -> usize {
        self.b_t.ncols()
    }

    fn xi(&self, x: &DVector<T>, u: &DVector<T>) -> Vec<T> {
        x.iter().chain(u.iter()).copied().collect()
    }

    pub fn next_state(&self, x: &DVector<T>, u: &DVector<T>) -> DVector<T> {
        let xi = self.xi(x, u);
        let mut next = &self.a_t * x + &self.b_t * u + &self.state_offset;
        for r in self.residuals.iter().filter(|r| r.site == ResidualSite::Dynamics) {
            next += r.terms.eval(&xi);
        }
        next
    }

    pub fn output(&self, x: &DVector<T>) -> DVector<T> {
        &self.c_t * x + &self.output_offset
    }

    pub fn stage_cost(&self, x: &DVector<T>, u: &DVector<T>) -> T {
        let xi_v = DVector::from_vec(self.xi(x, u));
        let mut c = xi_v.dot(&(&self.m_t * &xi_v))
            + cst::<T>(2.0) * xi_v.dot(&self.stage_linear)
            + self.stage_constant;
        for r in self.residuals.iter().filter(|r| r.site == ResidualSite::StageCost) {
            c += r.terms.eval(xi_v.as_slice())[0];
        }
        c
    }

    pub fn terminal_cost(&self, x: &DVector<T>) -> T {
        x.dot(&(&self.p_t * x)) + cst::<T>(2.0) * x.dot(&self.terminal_linear) + self.terminal_constant
    }
}

/// Applies `key` to the system and the block-diagonal cost M = bdiag(Q, R).
pub fn apply_separate<T: Real>(
    key: &SeparateKey<T>,
    sys: &LtiSystem<T>,
    cost: &CostSpec<T>,
) -> Result<TransformedProblem<T>> {
    apply_separate_with_cross(key, sys, cost, &DMatrix::zeros(sys.n(), sys.m()))
}

/// Same as [`apply_separate`] for the general stage weight [[Q, S], [Sᵀ, R]].
pub fn apply_separate_with_cross<T: Real>(
    key: &SeparateKey<T>,
    sys: &LtiSystem<T>,
    cost: &CostSpec<T>,
    cross: &DMatrix<T>,
) -> Result<TransformedProblem<T>> {
    key.validate(sys)?;
    let (n, m) = (sys.n(), sys.m());
    if cost.q.nrows() != n || cost.r.nrows() != m || cross.shape() != (n, m) {
        return Err(Error::InvalidArgument("cost does not match the system".into()));
    }
    let (nt, mt) = (key.t_mat.nrows(), key.g_mat.nrows());
    let tl = left_inverse(&key.t_mat);
    let gl = left_inverse(&key.g_mat);
    let ftl = &key.f_mat * &tl;

    let a_t = &key.t_mat * (&sys.a - &sys.b * &gl * &key.f_mat) * &tl;
    let b_t = &key.t_mat * &sys.b * &gl;
    let c_t = &key.s_mat * &sys.c * &tl;

    // [x; u] = L·[x̃; ũ] + [r_x; r_u]
    let l_mat = vstack(&[
        &hstack(&[&tl, &DMatrix::zeros(n, mt)]),
        &hstack(&[&(-(&gl * &ftl)), &gl]),
    ]);
    let m_full = vstack(&[&hstack(&[&cost.q, cross]), &hstack(&[&cross.transpose(), &cost.r])]);
    let m_t = linalg::symmetrize(&(l_mat.transpose() * &m_full * &l_mat));
    let p_t = linalg::symmetrize(&(tl.transpose() * &cost.p_terminal * &tl));

    let (r_x, r_u) = match key.variant {
        Variant::Poly => (DVector::zeros(n), -(&gl * &key.r2)),
        _ => {
            let r_x = -(&tl * &key.r1);
            let r_u = -(&gl * (&key.f_mat * &r_x + &key.r2));
            (r_x, r_u)
        }
    };
    let r_xu = DVector::from_iterator(n + m, r_x.iter().chain(r_u.iter()).copied());
    let state_offset = &key.t_mat * (&sys.a * &r_x + &sys.b * &r_u) + &key.r1;
    let output_offset = &key.s_mat * &sys.c * &r_x + &key.r3;
    let stage_linear = l_mat.transpose() * (&m_full * &r_xu);
    let terminal_linear = tl.transpose() * (&cost.p_terminal * &r_x);
    let stage_constant = r_xu.dot(&(&m_full * &r_xu));
    let terminal_constant = r_x.dot(&(&cost.p_terminal * &r_x));

    let mut residuals = Vec::new();
    if key.variant == Variant::Poly && !key.basis.is_empty() {
        let nv = nt + mt;
        // φ(x̃) = −G⁻¹F₁Z(T⁻¹x̃), written in ξ = [x̃; ũ].
        let z_map = poly::monomial_map::<T>(n, &key.basis);
        let z_of_xt = PolyMap {
            components: z_map.components.iter().map(|p| p.compose_linear(&tl).embed(nv, 0)).collect(),
        };
        let phi = z_of_xt.left_mul(&(-(&gl * &key.f1)));
        residuals.push(Residual {
            tag: ResidualTag::Nonlinear,
            site: ResidualSite::Dynamics,
            terms: phi.left_mul(&(&key.t_mat * &sys.b)),
        });
        // 2ξᵀLᵀM[0; φ] + φᵀRφ + 2r_uᵀRφ
        let k_mat = l_mat.transpose() * m_full.columns(n, m);
        let k_phi = phi.left_mul(&k_mat);
        let mut stage = Polynomial::zero(nv);
        for (i, comp) in k_phi.components.iter().enumerate() {
            stage = stage.add(&Polynomial::var(nv, i).mul(comp).scale(cst(2.0)));
        }
        let r_phi = phi.left_mul(&cost.r);
        let ru_r = cost.r.transpose() * &r_u;
        for i in 0..m {
            stage = stage.add(&phi.components[i].mul(&r_phi.components[i]));
            stage = stage.add(&phi.components[i].scale(ru_r[i] * cst(2.0)));
        }
        residuals.push(Residual {
            tag: ResidualTag::Nonlinear,
            site: ResidualSite::StageCost,
            terms: PolyMap { components: vec![stage] },
        });
    }

    Ok(TransformedProblem {
        variant: key.variant,
        a_t,
        b_t,
        c_t,
        m_t,
        p_t,
        horizon: cost.horizon,
        state_offset,
        output_offset,
        stage_linear,
        terminal_linear,
        stage_constant,
        terminal_constant,
        residuals,
    })
}
