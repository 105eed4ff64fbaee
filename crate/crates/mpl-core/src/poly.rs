//! Sparse multivariate polynomials with real coefficients.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::Real;

/// Exponent vector of a monomial.
pub type Exponents = Vec<u32>;

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial<T: Real> {
    nvars: usize,
    terms: BTreeMap<Exponents, T>,
}

impl<T: Real> Polynomial<T> {
    pub fn zero(nvars: usize) -> Self {
        Self { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: T) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    /// The polynomial x_i.
    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(e, T::one());
        p
    }

    /// Σ_j coeffs[j]·x_j.
    pub fn linear(coeffs: &[T]) -> Self {
        let n = coeffs.len();
        let mut p = Self::zero(n);
        for (j, &c) in coeffs.iter().enumerate() {
            let mut e = vec![0; n];
            e[j] = 1;
            p.add_term(e, c);
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponents, &T)> {
        self.terms.iter()
    }

    pub fn add_term(&mut self, exps: Exponents, c: T) {
        debug_assert_eq!(exps.len(), self.nvars);
        if c == T::zero() {
            return;
        }
        let slot = self.terms.entry(exps).or_insert_with(T::zero);
        *slot += c;
        if *slot == T::zero() {
            self.terms.retain(|_, v| *v != T::zero());
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Highest total degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).max()
    }

    /// Lowest total degree, or `None` for the zero polynomial.
    pub fn min_degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).min()
    }

    /// Terms of total degree exactly `d`.
    pub fn homogeneous_part(&self, d: u32) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|(e, _)| e.iter().sum::<u32>() == d)
            .map(|(e, c)| (e.clone(), *c))
            .collect();
        Self { nvars: self.nvars, terms }
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), *c * s);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, *ca * *cb);
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::constant(self.nvars, T::one());
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    pub fn eval(&self, x: &[T]) -> T {
        self.terms.iter().fold(T::zero(), |acc, (e, c)| {
            let mono = e
                .iter()
                .zip(x)
                .fold(T::one(), |m, (&k, &xi)| m * xi.powi(k as i32));
            acc + *c * mono
        })
    }

    /// Substitutes x = M·y, returning a polynomial in y.
    pub fn compose_linear(&self, m: &DMatrix<T>) -> Self {
        let ny = m.ncols();
        let rows: Vec<Self> = (0..m.nrows())
            .map(|i| Self::linear(m.row(i).iter().copied().collect::<Vec<_>>().as_slice()))
            .collect();
        let mut out = Self::zero(ny);
        for (e, c) in &self.terms {
            let mut mono = Self::constant(ny, *c);
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    mono = mono.mul(&rows[i].pow(k));
                }
            }
            out = out.add(&mono);
        }
        out
    }

    /// Re-embeds into `nvars` variables, placing the current ones at `offset`.
    pub fn embed(&self, nvars: usize, offset: usize) -> Self {
        let mut out = Self::zero(nvars);
        for (e, c) in &self.terms {
            let mut f = vec![0; nvars];
            f[offset..offset + e.len()].copy_from_slice(e);
            out.add_term(f, *c);
        }
        out
    }
}

/// A vector of polynomials sharing the same variables.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMap<T: Real> {
    pub components: Vec<Polynomial<T>>,
}

impl<T: Real> PolyMap<T> {
    pub fn eval(&self, x: &[T]) -> DVector<T> {
        DVector::from_iterator(self.components.len(), self.components.iter().map(|p| p.eval(x)))
    }

    /// Returns M·self.
    pub fn left_mul(&self, m: &DMatrix<T>) -> Self {
        let nvars = self.components.first().map_or(0, |p| p.nvars());
        let components = (0..m.nrows())
            .map(|i| {
                self.components
                    .iter()
                    .enumerate()
                    .fold(Polynomial::zero(nvars), |acc, (j, p)| acc.add(&p.scale(m[(i, j)])))
            })
            .collect();
        Self { components }
    }

    pub fn min_degree(&self) -> Option<u32> {
        self.components.iter().filter_map(|p| p.min_degree()).min()
    }
}

/// All exponent vectors in `nvars` variables with total degree in
/// `min_deg..=max_deg`, ordered by degree and then lexicographically
/// (x₁ before x₂ and so on).
pub fn monomial_basis(nvars: usize, min_deg: u32, max_deg: u32) -> Vec<Exponents> {
    let mut out = Vec::new();
    for d in min_deg..=max_deg {
        let mut cur = vec![0; nvars];
        fill(&mut cur, 0, d, &mut out);
    }
    out
}

fn fill(cur: &mut Exponents, i: usize, left: u32, out: &mut Vec<Exponents>) {
    if i + 1 == cur.len() {
        cur[i] = left;
        out.push(cur.clone());
        cur[i] = 0;
        return;
    }
    if cur.is_empty() {
        return;
    }
    for k in (0..=left).rev() {
        cur[i] = k;
        fill(cur, i + 1, left - k, out);
    }
    cur[i] = 0;
}

/// Z(x) as a polynomial map in `nvars` variables for the given basis.
pub fn monomial_map<T: Real>(nvars: usize, basis: &[Exponents]) -> PolyMap<T> {
    let components = basis
        .iter()
        .map(|e| {
            let mut p = Polynomial::zero(nvars);
            p.add_term(e.clone(), T::one());
            p
        })
        .collect();
    PolyMap { components }
}
