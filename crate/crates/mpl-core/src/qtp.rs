//! Linearized quadruple-tank process and its MPC benchmark settings.

use nalgebra::{DMatrix, DVector};

use crate::lti::{self, BoxConstraints, CostSpec, LtiSystem};
use crate::{cst, Real, Result};

/// Tank cross-sections (cm²).
pub const AREA: [f64; 4] = [28.0, 32.0, 28.0, 32.0];
/// Tank time constants (s).
pub const TIME_CONST: [f64; 4] = [63.0, 91.0, 39.0, 56.0];
// The measured pump gain 3.14, not π.
#[allow(clippy::approx_constant)]
pub const PUMP_GAIN: [f64; 2] = [3.14, 3.29];
pub const VALVE: [f64; 2] = [0.43, 0.34];
pub const SENSOR_GAIN: f64 = 0.5;
pub const SAMPLE_TIME: f64 = 2.0;

pub const STEPS: usize = 500;
pub const DISTURBANCE_ONSET: usize = 200;
pub const DISTURBANCE_DECAY: f64 = 0.99;
pub const DISTURBANCE: [f64; 2] = [3.0, -3.0];
pub const U_BOUND: f64 = 1.0;
pub const Y_BOUND: f64 = 2.0;

pub fn continuous<T: Real>() -> LtiSystem<T> {
    let [a1, a2, a3, a4] = AREA;
    let [t1, t2, t3, t4] = TIME_CONST;
    let [k1, k2] = PUMP_GAIN;
    let [g1, g2] = VALVE;
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(4, 4, &[
        -1.0 / t1, 0.0, a3 / (a1 * t3), 0.0,
        0.0, -1.0 / t2, 0.0, a4 / (a2 * t4),
        0.0, 0.0, -1.0 / t3, 0.0,
        0.0, 0.0, 0.0, -1.0 / t4,
    ]);
    #[rustfmt::skip]
    let b = DMatrix::from_row_slice(4, 2, &[
        g1 * k1 / a1, 0.0,
        0.0, g2 * k2 / a2,
        0.0, (1.0 - g2) * k2 / a3,
        (1.0 - g1) * k1 / a4, 0.0,
    ]);
    #[rustfmt::skip]
    let c = DMatrix::from_row_slice(2, 4, &[
        SENSOR_GAIN, 0.0, 0.0, 0.0,
        0.0, SENSOR_GAIN, 0.0, 0.0,
    ]);
    LtiSystem::new(a.map(cst), b.map(cst), c.map(cst), false).expect("fixture is well formed")
}

pub fn discrete<T: Real>() -> LtiSystem<T> {
    lti::zoh_discretize(&continuous::<T>(), cst(SAMPLE_TIME)).expect("fixture discretizes")
}

/// Q = 2I₄, R = I₂, P = 0.
pub fn cost<T: Real>(horizon: usize) -> Result<CostSpec<T>> {
    CostSpec::new(
        DMatrix::identity(4, 4) * cst::<T>(2.0),
        DMatrix::identity(2, 2),
        DMatrix::zeros(4, 4),
        horizon,
    )
}

pub fn constraints<T: Real>() -> BoxConstraints<T> {
    BoxConstraints::symmetric(2, cst(U_BOUND), 2, cst(Y_BOUND)).expect("fixture bounds are valid")
}

/// d_k = [3, −3]ᵀ·0.99^{k−200} for k ≥ 200, zero before.
pub fn disturbance<T: Real>(steps: usize) -> Vec<DVector<T>> {
    (0..steps)
        .map(|k| {
            if k < DISTURBANCE_ONSET {
                DVector::zeros(2)
            } else {
                let s = DISTURBANCE_DECAY.powi((k - DISTURBANCE_ONSET) as i32);
                DVector::from_iterator(2, DISTURBANCE.iter().map(|d| cst(d * s)))
            }
        })
        .collect()
}
