//! Open-loop stiffness of the levitator at fixed currents and attitude.
//!
//! The force on a fixed dipole is the gradient of m·b, a harmonic function, so
//! K_s = ∂f/∂p is symmetric and traceless; any nonzero K_s therefore has a
//! positive eigenvalue (an unstable direction).

use nalgebra::SymmetricEigen;
use serde::Serialize;

use crate::fieldmodel::FieldModel;
use crate::magnetics::{wrench, LevitatorParams};
use crate::{CurrentVector, Error, Mat3, Result, Vec3};

/// Central-difference step [m].
pub const STIFFNESS_STEP: f64 = 1e-5;

/// Largest |f − m·g·e_z| accepted as force balance [N].
const BALANCE_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StiffnessReport {
    /// K_s = ∂f/∂p [N/m], row i = force component i.
    pub stiffness: Mat3,
    /// Ascending eigenvalues of the symmetric part [N/m].
    pub eigenvalues: Vec3,
    /// Eigenvector of the largest eigenvalue.
    pub unstable_direction: Vec3,
    pub k_max: f64,
    /// sqrt(m / k_max) when k_max > 0 [s].
    pub time_constant: Option<f64>,
    pub trace: f64,
    /// |f(p) − m·g·e_z| [N].
    pub force_residual: f64,
    pub currents: CurrentVector,
}

fn force(model: &FieldModel, params: &LevitatorParams, p: &Vec3, r: &Mat3, currents: &CurrentVector) -> Result<Vec3> {
    Ok(wrench(model, r, p, &params.dipole_body, currents)?.1)
}

/// ∂f/∂p at fixed currents and attitude, fourth-order central differences
/// with step [`STIFFNESS_STEP`].
pub fn stiffness_matrix(model: &FieldModel, params: &LevitatorParams, p: &Vec3, r: &Mat3, currents: &CurrentVector) -> Result<Mat3> {
    let h = STIFFNESS_STEP;
    let mut k = Mat3::zeros();
    for j in 0..3 {
        let e = Vec3::ith(j, h);
        let f = |s: f64| force(model, params, &(p + e * s), r, currents);
        let column = (f(-2.0)? - f(2.0)? + (f(1.0)? - f(-1.0)?) * 8.0) / (12.0 * h);
        k.set_column(j, &column);
    }
    Ok(k)
}

/// Stiffness, its eigen-decomposition and the divergence time constant at a
/// force-balanced hover.
pub fn stiffness_analysis(
    model: &FieldModel,
    params: &LevitatorParams,
    p: &Vec3,
    r: &Mat3,
    currents: &CurrentVector,
    gravity: f64,
) -> Result<StiffnessReport> {
    let f = force(model, params, p, r, currents)?;
    let force_residual = (f - Vec3::new(0.0, 0.0, params.mass * gravity)).norm();
    if !(force_residual < BALANCE_TOLERANCE) {
        return Err(Error::NotForceBalanced { residual: force_residual });
    }
    let stiffness = stiffness_matrix(model, params, p, r, currents)?;
    let sym = (stiffness + stiffness.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = Vec3::new(eig.eigenvalues[order[0]], eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
    let k_max = eigenvalues.z;
    Ok(StiffnessReport {
        stiffness,
        eigenvalues,
        unstable_direction: eig.eigenvectors.column(order[2]).into_owned(),
        k_max,
        time_constant: (k_max > 0.0).then(|| (params.mass / k_max).sqrt()),
        trace: stiffness.trace(),
        force_residual,
        currents: *currents,
    })
}
