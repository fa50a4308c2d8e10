//! SO(3) helpers: hat/vee, exponential and logarithm maps, validation and
//! XYZ-intrinsic Euler angles.

use nalgebra::{Rotation3, UnitQuaternion};

use crate::{Error, Mat3, Result, Vec3};

/// Tolerance on ‖RᵀR − I‖_F used to accept a matrix as a rotation.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Skew-symmetric matrix such that `skew(a) * b == a × b`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`skew`] (takes the skew-symmetric part).
pub fn vee(m: &Mat3) -> Vec3 {
    Vec3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Rodrigues exponential of a rotation vector.
pub fn exp(phi: &Vec3) -> Mat3 {
    Rotation3::new(*phi).into_inner()
}

/// Rotation vector of `r` (inverse of [`exp`] for angles below π).
///
/// The angle comes from atan2(|vee(R)|, (tr R − 1)/2), which keeps full
/// relative precision for small rotations; an acos of the trace alone rounds
/// angles below about 1e-8 rad to zero.
pub fn log(r: &Mat3) -> Vec3 {
    let s = vee(r);
    let sin = s.norm();
    let cos = 0.5 * (r.trace() - 1.0);
    let angle = sin.atan2(cos);
    if angle < 1e-4 {
        // θ / sin θ = 1 + θ²/6 + O(θ⁴)
        s * (1.0 + angle * angle / 6.0)
    } else if angle < std::f64::consts::PI - 1e-3 {
        s * (angle / sin)
    } else {
        // near π the skew part vanishes; the quaternion carries the axis
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r)).scaled_axis()
    }
}

/// Frobenius norm of RᵀR − I.
pub fn orthogonality_error(r: &Mat3) -> f64 {
    (r.transpose() * r - Mat3::identity()).norm()
}

pub fn validate_rotation(r: &Mat3) -> Result<()> {
    let orthogonality = orthogonality_error(r);
    let det = r.determinant();
    if !(orthogonality < ROTATION_TOLERANCE) || !(det > 0.0) {
        return Err(Error::InvalidRotation { orthogonality, det });
    }
    Ok(())
}

/// Closest rotation in the Frobenius sense (polar projection via SVD).
pub fn project_to_so3(r: &Mat3) -> Mat3 {
    let svd = r.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let mut out = u * v_t;
    if out.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        out = u * v_t;
    }
    out
}

pub fn rot_x(angle: f64) -> Mat3 {
    exp(&Vec3::new(angle, 0.0, 0.0))
}

pub fn rot_y(angle: f64) -> Mat3 {
    exp(&Vec3::new(0.0, angle, 0.0))
}

pub fn rot_z(angle: f64) -> Mat3 {
    exp(&Vec3::new(0.0, 0.0, angle))
}

/// R = Rx(roll)·Ry(pitch)·Rz(yaw), i.e. XYZ intrinsic Euler angles.
pub fn from_euler_xyz(roll: f64, pitch: f64, yaw: f64) -> Mat3 {
    rot_x(roll) * rot_y(pitch) * rot_z(yaw)
}

/// Inverse of [`from_euler_xyz`]; returns (roll, pitch, yaw) with pitch in [-π/2, π/2].
pub fn euler_xyz(r: &Mat3) -> Vec3 {
    let pitch = r[(0, 2)].clamp(-1.0, 1.0).asin();
    let roll = (-r[(1, 2)]).atan2(r[(2, 2)]);
    let yaw = (-r[(0, 1)]).atan2(r[(0, 0)]);
    Vec3::new(roll, pitch, yaw)
}

/// Unit quaternion (w, x, y, z) with w ≥ 0.
pub fn quaternion(r: &Mat3) -> [f64; 4] {
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r));
    let s = if q.w < 0.0 { -1.0 } else { 1.0 };
    [s * q.w, s * q.i, s * q.j, s * q.k]
}
