//! Levitator dynamics and the fixed-step integrator.
//!
//! Translation is a point mass under the magnetic force and gravity. Rotation
//! follows Euler's equations for a diagonal inertia with torque only about body
//! x and y (a single dipole cannot be torqued about its own axis). Drag is
//! neglected.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::magnetics::LevitatorParams;
use crate::so3::{self, skew};
use crate::{Mat3, Vec3};

/// Pose and twist of the levitator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidBodyState {
    /// Position in the world frame [m].
    pub p: Vec3,
    /// Velocity in the world frame [m/s].
    pub v: Vec3,
    /// Rotation body → world.
    pub rotation: Mat3,
    /// Angular velocity in the body frame [rad/s].
    pub omega_body: Vec3,
}

impl RigidBodyState {
    pub fn at_rest(p: Vec3, rotation: Mat3) -> Self {
        Self { p, v: Vec3::zeros(), rotation, omega_body: Vec3::zeros() }
    }

    pub fn is_finite(&self) -> bool {
        self.p.iter().chain(self.v.iter()).chain(self.rotation.iter()).chain(self.omega_body.iter()).all(|x| x.is_finite())
    }

    pub fn kinetic_energy(&self, params: &LevitatorParams) -> f64 {
        0.5 * params.mass * self.v.norm_squared() + 0.5 * self.omega_body.component_mul(&params.inertia).dot(&self.omega_body)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateDerivative {
    pub p_dot: Vec3,
    pub v_dot: Vec3,
    pub rotation_dot: Mat3,
    pub omega_dot: Vec3,
}

fn angular_acceleration(omega: &Vec3, torque_xy: &Vector2<f64>, inertia: &Vec3) -> Vec3 {
    let (ixx, iyy, izz) = (inertia.x, inertia.y, inertia.z);
    let (wx, wy, wz) = (omega.x, omega.y, omega.z);
    Vec3::new(
        ((iyy - izz) * wy * wz + torque_xy.x) / ixx,
        ((izz - ixx) * wz * wx + torque_xy.y) / iyy,
        (ixx - iyy) / izz * wx * wy,
    )
}

fn linear_acceleration(force_world: &Vec3, mass: f64, gravity: f64) -> Vec3 {
    force_world / mass - Vec3::new(0.0, 0.0, gravity)
}

/// Time derivative of the state under a body torque (τx, τy) and a world force.
/// Gravity `gravity` [m/s²] acts along −z on top of `force_world`.
pub fn dynamics_derivative(
    state: &RigidBodyState,
    torque_xy: &Vector2<f64>,
    force_world: &Vec3,
    params: &LevitatorParams,
    gravity: f64,
) -> StateDerivative {
    StateDerivative {
        p_dot: state.v,
        v_dot: linear_acceleration(force_world, params.mass, gravity),
        rotation_dot: state.rotation * skew(&state.omega_body),
        omega_dot: angular_acceleration(&state.omega_body, torque_xy, &params.inertia),
    }
}

/// Rotation drift above which the integrator re-projects onto SO(3).
pub const REORTHONORMALIZE_THRESHOLD: f64 = 1e-9;

/// θ̇ = dexp⁻¹_θ(ω) for R = R₀·exp(θ), truncated after the terms a
/// fourth-order method needs.
fn dexp_inv(theta: &Vec3, omega: &Vec3) -> Vec3 {
    let c = theta.cross(omega);
    omega + c * 0.5 + theta.cross(&c) / 12.0
}

/// One RK4 step of length `dt` with the wrench held constant.
///
/// The rotation is advanced in Munthe-Kaas form: the RK4 stages act on the
/// local coordinate θ of R = R₀·exp(θ), so R stays on SO(3) by construction
/// and the step keeps fourth order.
pub fn step(
    state: &RigidBodyState,
    torque_xy: &Vector2<f64>,
    force_world: &Vec3,
    params: &LevitatorParams,
    gravity: f64,
    dt: f64,
) -> RigidBodyState {
    debug_assert!(dt > 0.0 && dt <= 1e-2, "physics step {dt} outside (0, 1e-2]");
    let a = linear_acceleration(force_world, params.mass, gravity);
    let alpha = |w: &Vec3| angular_acceleration(w, torque_xy, &params.inertia);

    let w1 = state.omega_body;
    let k1 = alpha(&w1);
    let t1 = w1;
    let w2 = w1 + k1 * (0.5 * dt);
    let k2 = alpha(&w2);
    let t2 = dexp_inv(&(t1 * (0.5 * dt)), &w2);
    let w3 = w1 + k2 * (0.5 * dt);
    let k3 = alpha(&w3);
    let t3 = dexp_inv(&(t2 * (0.5 * dt)), &w3);
    let w4 = w1 + k3 * dt;
    let k4 = alpha(&w4);
    let t4 = dexp_inv(&(t3 * dt), &w4);

    let omega = w1 + (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (dt / 6.0);
    let theta = (t1 + 2.0 * t2 + 2.0 * t3 + t4) * (dt / 6.0);

    // ṗ = v, v̇ = a constant: RK4 reduces to the exact quadratic.
    let p = state.p + state.v * dt + a * (0.5 * dt * dt);
    let v = state.v + a * dt;

    let mut rotation = state.rotation * so3::exp(&theta);
    if so3::orthogonality_error(&rotation) > REORTHONORMALIZE_THRESHOLD {
        rotation = so3::project_to_so3(&rotation);
    }
    RigidBodyState { p, v, rotation, omega_body: omega }
}
