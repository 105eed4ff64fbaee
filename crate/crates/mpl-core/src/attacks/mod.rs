//! Inference procedures available to a solver that follows the protocol but
//! studies everything it receives.
//!
//! Each operation takes only data the solver holds (plus stated side
//! knowledge such as the state dimension) and returns an [`AttackReport`]
//! whose `provenance` map names the operation behind every populated field.

mod dense;
mod rrp;
mod separate;
mod witness;

pub use dense::{attack_dense_full, attack_dense_multi, attack_hf, attack_hx0f, consistent_cost, realize_from_g, recover_dense_key};
pub use rrp::{attack_rrp, attack_rrp_extended, RrpData};
pub use separate::{attack_highdim, attack_poly, attack_separate, attack_structured_noise, NoiseReport};
pub use witness::{uncertainty_witness, UncertaintyWitness, WitnessOutcome};

use std::collections::BTreeMap;

use nalgebra::{Complex, DMatrix, DVector};

use crate::dense::{DenseQp, QpShape};
use crate::lti::{self, LtiSystem};
use crate::{Error, Real, Result};

/// One solved instance as logged by the solver. `x0` is kept for tests and
/// is never read by an attack.
#[derive(Debug, Clone, PartialEq)]
pub struct DataRecord<T: Real> {
    pub x0: DVector<T>,
    pub f_tilde: DVector<T>,
    pub e_tilde: DVector<T>,
    pub zeta_star: DVector<T>,
}

/// Instances that share one problem and one key.
#[derive(Debug, Clone, PartialEq)]
pub struct DataLog<T: Real> {
    pub shape: QpShape,
    pub records: Vec<DataRecord<T>>,
}

impl<T: Real> DataLog<T> {
    pub fn new(shape: QpShape) -> Self {
        Self { shape, records: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn columns(&self, pick: impl Fn(&DataRecord<T>) -> &DVector<T>) -> DMatrix<T> {
        let rows = self.records.first().map_or(0, |r| pick(r).len());
        DMatrix::from_fn(rows, self.records.len(), |i, j| pick(&self.records[j])[i])
    }

    /// [f̃₁ … f̃_I].
    pub fn f_matrix(&self) -> DMatrix<T> {
        self.columns(|r| &r.f_tilde)
    }

    /// [ẽ₁ … ẽ_I].
    pub fn e_matrix(&self) -> DMatrix<T> {
        self.columns(|r| &r.e_tilde)
    }

    /// [ζ₁* … ζ_I*].
    pub fn zeta_matrix(&self) -> DMatrix<T> {
        self.columns(|r| &r.zeta_star)
    }
}

/// Matrices of a condensed problem that are shared across instances.
#[derive(Debug, Clone, PartialEq)]
pub struct DensePublic<T: Real> {
    pub shape: QpShape,
    pub h: DMatrix<T>,
    pub f: DMatrix<T>,
    pub g: DMatrix<T>,
    pub w: DVector<T>,
    pub o: DMatrix<T>,
}

impl<T: Real> DensePublic<T> {
    pub fn from_qp(qp: &DenseQp<T>) -> Self {
        Self { shape: qp.shape, h: qp.h.clone(), f: qp.f.clone(), g: qp.g.clone(), w: qp.w.clone(), o: qp.o.clone() }
    }

    /// 𝒢, the output rows of G.
    pub fn g_cal(&self) -> DMatrix<T> {
        let s = self.shape;
        self.g.rows(2 * s.nvar(), s.horizon * s.p).into_owned()
    }

    /// 𝒪, the upper output-bound rows of O.
    pub fn o_cal(&self) -> DMatrix<T> {
        let s = self.shape;
        self.o.rows(2 * s.nvar() + s.horizon * s.p, s.horizon * s.p).into_owned()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackReport<T: Real> {
    pub a_hat: Option<DMatrix<T>>,
    pub b_hat: Option<DMatrix<T>>,
    pub c_hat: Option<DMatrix<T>>,
    pub r_hat: Option<DMatrix<T>>,
    pub q_hat: Option<DMatrix<T>>,
    pub p_hat: Option<DMatrix<T>>,
    /// Recovered feedback part of the input map in transformed coordinates.
    pub ft_hat: Option<DMatrix<T>>,
    pub eigenvalues: Vec<Complex<T>>,
    pub zeros: Vec<Complex<T>>,
    pub witness: Option<WitnessOutcome<T>>,
    pub eps_relax: Option<T>,
    /// Field name to producing operation.
    pub provenance: BTreeMap<String, String>,
}

impl<T: Real> Default for AttackReport<T> {
    fn default() -> Self {
        Self {
            a_hat: None,
            b_hat: None,
            c_hat: None,
            r_hat: None,
            q_hat: None,
            p_hat: None,
            ft_hat: None,
            eigenvalues: Vec::new(),
            zeros: Vec::new(),
            witness: None,
            eps_relax: None,
            provenance: BTreeMap::new(),
        }
    }
}

impl<T: Real> AttackReport<T> {
    pub(crate) fn tag(&mut self, op: &str, fields: &[&str]) {
        for f in fields {
            self.provenance.insert((*f).to_string(), op.to_string());
        }
    }
}

/// Transmission zeros when the triple is square and the pencil is regular.
pub(crate) fn zeros_of<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, c: &DMatrix<T>) -> Vec<Complex<T>> {
    if b.ncols() != c.nrows() {
        return Vec::new();
    }
    LtiSystem::new(a.clone(), b.clone(), c.clone(), true)
        .and_then(|s| lti::transmission_zeros(&s))
        .unwrap_or_default()
}

pub(crate) fn failed<T>(msg: &str) -> Result<T> {
    Err(Error::AttackFailed(msg.into()))
}
