//! # maglev-core
//!
//! Modeling and control for levitating a single permanent-magnet dipole in an
//! eight-coil electromagnetic navigation system (eMNS).
//!
//! ## Modules
//!
//! - [`fieldmodel`]: dipole-term coil model, actuation matrix and least-squares calibration
//! - [`magnetics`]: field/gradient to wrench maps and the (reduced) allocation matrices
//! - [`rigidbody`]: levitator dynamics and a fixed-step RK4 / exponential-map integrator
//! - [`attitude_control`]: reduced attitude on the unit sphere and its controller
//! - [`translation_control`]: per-axis discrete LQR with integral action and gravity feedforward
//! - [`allocation`]: pseudoinverse current solve and saturation
//! - [`sim`]: closed-loop simulation harness and the negative-stiffness analyzer
//!
//! Conventions: world frame W has +z up; body frame B is attached to the levitator with
//! the dipole along body z. Every field-model quantity is expressed in W.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod attitude_control;
mod error;
pub mod fieldmodel;
pub mod magnetics;
pub mod rigidbody;
pub mod sim;
pub mod so3;
pub mod translation_control;

pub use error::{Error, Result};

use nalgebra::{Matrix3, SVector, Vector3};

/// 3D vector type
pub type Vec3 = Vector3<f64>;

/// 3x3 matrix type
pub type Mat3 = Matrix3<f64>;

/// One current per coil, in amperes. Index order matches [`fieldmodel::FieldModel::coils`].
pub type CurrentVector = SVector<f64, 8>;

/// Number of coils in the eMNS.
pub const NUM_COILS: usize = 8;

/// Vacuum permeability [T·m/A]
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;

/// Default gravitational acceleration [m/s²]
pub const STANDARD_GRAVITY: f64 = 9.81;
