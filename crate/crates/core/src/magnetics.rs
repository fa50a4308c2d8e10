//! Wrench on the levitator's point dipole.
//!
//! Torque is expressed in the body frame, force in the world frame:
//!
//! ```text
//! τᴮ = [mᴮ]× Rᵀ b          f = M_F(R mᴮ) g
//! ```
//!
//! The torque about the dipole axis is identically zero, so the reduced maps
//! keep only (τx, τy) and the three force components.

use nalgebra::{Matrix2x3, SMatrix, Vector2, Vector5};
use serde::{Deserialize, Serialize};

use crate::fieldmodel::{FieldModel, Gradient5};
use crate::so3::{skew, validate_rotation};
use crate::{CurrentVector, Error, Mat3, Result, Vec3, MU0};

pub type ForceMap = SMatrix<f64, 3, 5>;
pub type InteractionMatrix = SMatrix<f64, 6, 8>;
pub type AllocationMatrix = SMatrix<f64, 6, 8>;
pub type ReducedInteractionMatrix = SMatrix<f64, 5, 8>;
pub type ReducedAllocationMatrix = SMatrix<f64, 5, 8>;

/// Levitator physical parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevitatorParams {
    /// [kg]
    pub mass: f64,
    /// Principal moments (Ixx, Iyy, Izz) [kg·m²].
    pub inertia: Vec3,
    /// Dipole moment in the body frame [A·m²].
    pub dipole_body: Vec3,
    /// Per-coil current limit [A].
    pub current_limit: f64,
}

/// Remanence assumed for N52 NdFeB [T].
pub const N52_REMANENCE: f64 = 1.45;

/// Two Ø5 mm × 10 mm disc magnets [m³].
pub fn default_magnet_volume() -> f64 {
    2.0 * std::f64::consts::PI * 0.0025_f64.powi(2) * 0.01
}

impl Default for LevitatorParams {
    fn default() -> Self {
        let strength = dipole_strength(N52_REMANENCE, default_magnet_volume());
        Self {
            mass: 0.0324,
            inertia: Vec3::new(6.21e-6, 5.63e-6, 1.14e-6),
            dipole_body: Vec3::new(0.0, 0.0, -strength),
            current_limit: 4.0,
        }
    }
}

impl LevitatorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) {
            return Err(Error::param(format!("levitator mass must be positive, got {}", self.mass)));
        }
        if !self.inertia.iter().all(|&i| i > 0.0) {
            return Err(Error::param("levitator inertia components must be positive"));
        }
        if !(self.current_limit > 0.0) {
            return Err(Error::param("current limit must be positive"));
        }
        if !self.dipole_body.iter().all(|x| x.is_finite()) {
            return Err(Error::param("dipole moment must be finite"));
        }
        Ok(())
    }

    /// Signed dipole component along body z.
    pub fn axial_dipole(&self) -> Result<f64> {
        axial_component(&self.dipole_body)
    }
}

fn axial_component(dipole_body: &Vec3) -> Result<f64> {
    let tol = 1e-12 * dipole_body.norm();
    if dipole_body.x.abs() > tol || dipole_body.y.abs() > tol || dipole_body.z == 0.0 {
        return Err(Error::DipoleNotAxial([dipole_body.x, dipole_body.y, dipole_body.z]));
    }
    Ok(dipole_body.z)
}

/// Controllable part of the wrench: body (τx, τy) and world force.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ReducedWrench {
    pub torque_xy: Vector2<f64>,
    pub force: Vec3,
}

impl ReducedWrench {
    pub fn new(torque_xy: Vector2<f64>, force: Vec3) -> Self {
        Self { torque_xy, force }
    }

    pub fn as_vector(&self) -> Vector5<f64> {
        Vector5::new(self.torque_xy.x, self.torque_xy.y, self.force.x, self.force.y, self.force.z)
    }

    pub fn from_vector(w: &Vector5<f64>) -> Self {
        Self { torque_xy: Vector2::new(w[0], w[1]), force: Vec3::new(w[2], w[3], w[4]) }
    }
}

/// Dipole strength B_r·V/μ0 [A·m²] of a magnet with remanence [T] and volume [m³].
pub fn dipole_strength(remanence: f64, volume: f64) -> f64 {
    remanence * volume / MU0
}

/// World field → body torque: [mᴮ]× Rᵀ.
pub fn torque_map(r: &Mat3, dipole_body: &Vec3) -> Result<Mat3> {
    validate_rotation(r)?;
    Ok(skew(dipole_body) * r.transpose())
}

/// Packed gradient → world force for a world-frame dipole moment.
pub fn force_map(dipole_world: &Vec3) -> ForceMap {
    let (mx, my, mz) = (dipole_world.x, dipole_world.y, dipole_world.z);
    #[rustfmt::skip]
    let m = ForceMap::new(
        mx,  my, mz,  0.0, 0.0,
        0.0, mx, 0.0, my,  mz,
        -mz, 0.0, mx, -mz, my,
    );
    m
}

/// Full map (field; gradient) → (τᴮ; f).
pub fn interaction_matrix(r: &Mat3, dipole_body: &Vec3) -> Result<SMatrix<f64, 6, 8>> {
    let mut m = InteractionMatrix::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&torque_map(r, dipole_body)?);
    m.fixed_view_mut::<3, 5>(3, 3).copy_from(&force_map(&(r * dipole_body)));
    Ok(m)
}

/// Currents → (τᴮ; f) at pose (R, p).
pub fn allocation_matrix(model: &FieldModel, r: &Mat3, p: &Vec3, dipole_body: &Vec3) -> Result<AllocationMatrix> {
    Ok(interaction_matrix(r, dipole_body)? * model.actuation_matrix(p)?)
}

/// Torque rows of the reduced interaction matrix: the first two rows of [mᴮ]× Rᵀ
/// for an axial dipole.
fn reduced_torque_block(r: &Mat3, axial: f64) -> Matrix2x3<f64> {
    Matrix2x3::new(0.0, -axial, 0.0, axial, 0.0, 0.0) * r.transpose()
}

/// (field; gradient) → (τx, τy, f). Requires the dipole along body z.
pub fn reduced_interaction_matrix(r: &Mat3, dipole_body: &Vec3) -> Result<ReducedInteractionMatrix> {
    let axial = axial_component(dipole_body)?;
    validate_rotation(r)?;
    let mut m = ReducedInteractionMatrix::zeros();
    m.fixed_view_mut::<2, 3>(0, 0).copy_from(&reduced_torque_block(r, axial));
    m.fixed_view_mut::<3, 5>(2, 3).copy_from(&force_map(&(r * dipole_body)));
    Ok(m)
}

/// Currents → (τx, τy, f) at pose (R, p).
pub fn reduced_allocation_matrix(
    model: &FieldModel,
    r: &Mat3,
    p: &Vec3,
    dipole_body: &Vec3,
) -> Result<ReducedAllocationMatrix> {
    Ok(reduced_interaction_matrix(r, dipole_body)? * model.actuation_matrix(p)?)
}

/// Body torque and world force on the dipole from a field and gradient.
pub fn wrench_from_field(r: &Mat3, dipole_body: &Vec3, b: &Vec3, g: &Gradient5) -> (Vec3, Vec3) {
    let torque = dipole_body.cross(&(r.transpose() * b));
    let force = force_map(&(r * dipole_body)) * g.0;
    (torque, force)
}

/// Body torque and world force produced by `currents` at the pose (R, p).
pub fn wrench(model: &FieldModel, r: &Mat3, p: &Vec3, dipole_body: &Vec3, currents: &CurrentVector) -> Result<(Vec3, Vec3)> {
    let (b, g) = model.field_and_gradient(p, currents)?;
    Ok(wrench_from_field(r, dipole_body, &b, &g))
}
