//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use maglev_core::fieldmodel::{CoilSource, FieldModel};
use maglev_core::magnetics::LevitatorParams;
use maglev_core::sim::{InitialCondition, SimConfig};
use maglev_core::so3;
use maglev_core::{CurrentVector, Mat3, Vec3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn uniform_vec(rng: &mut ChaCha8Rng, half_width: f64) -> Vec3 {
    Vec3::from_fn(|_, _| rng.random_range(-half_width..half_width))
}

pub fn random_currents(rng: &mut ChaCha8Rng, limit: f64) -> CurrentVector {
    CurrentVector::from_fn(|_, _| rng.random_range(-limit..limit))
}

/// Uniformly distributed rotation axis, angle up to π.
pub fn random_rotation(rng: &mut ChaCha8Rng) -> Mat3 {
    let axis = loop {
        let v = uniform_vec(rng, 1.0);
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            break v / n;
        }
    };
    so3::exp(&(axis * rng.random_range(0.0..std::f64::consts::PI)))
}

/// Tilt of `angle` about a random horizontal axis followed by a random yaw,
/// so Γ = R·e_z makes exactly `angle` with e_z up to rounding.
pub fn tilted(rng: &mut ChaCha8Rng, angle: f64) -> Mat3 {
    let az = rng.random_range(0.0..2.0 * std::f64::consts::PI);
    let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    so3::exp(&(Vec3::new(az.cos(), az.sin(), 0.0) * angle)) * so3::rot_z(yaw)
}

/// Initial condition that reproduces `rotation` through the XYZ Euler angles.
pub fn initial_attitude(rotation: &Mat3, omega_body: Vec3) -> InitialCondition {
    InitialCondition { roll_pitch_yaw: so3::euler_xyz(rotation), omega_body, ..Default::default() }
}

/// Five placements of the 4×4×4 sensor grid around the workspace.
pub fn placements() -> Vec<Vec3> {
    vec![
        Vec3::zeros(),
        Vec3::new(0.02, 0.0, 0.01),
        Vec3::new(-0.02, 0.0, 0.01),
        Vec3::new(0.0, 0.02, -0.01),
        Vec3::new(0.0, -0.02, -0.01),
    ]
}

/// Every center coordinate and the strength scaled by 1 ± `scale`, the axis
/// tilted by up to `scale` per component.
pub fn perturbed(model: &FieldModel, scale: f64, rng: &mut ChaCha8Rng) -> FieldModel {
    let mut m = model.clone();
    for c in m.coils.iter_mut() {
        let center = c.center.map(|x| x * (1.0 + scale * rng.random_range(-1.0..1.0)));
        let axis = c.axis + uniform_vec(rng, scale);
        let strength = c.strength * (1.0 + scale * rng.random_range(-1.0..1.0));
        *c = CoilSource::new(center, axis, strength).unwrap();
    }
    m
}

/// Largest relative parameter error over all coils: center and strength
/// relative to their magnitudes, the unit axis in absolute terms.
pub fn max_parameter_error(fit: &FieldModel, truth: &FieldModel) -> f64 {
    fit.coils
        .iter()
        .zip(truth.coils.iter())
        .map(|(a, b)| {
            let center = (a.center - b.center).norm() / b.center.norm();
            let axis = (a.axis - b.axis).norm();
            let strength = (a.strength - b.strength).abs() / b.strength;
            center.max(axis).max(strength)
        })
        .fold(0.0, f64::max)
}

pub fn symmetric_params() -> LevitatorParams {
    let d = LevitatorParams::default();
    let i = 0.5 * (d.inertia.x + d.inertia.y);
    LevitatorParams { inertia: Vec3::new(i, i, d.inertia.z), ..d }
}

/// The default loop with a 5 mm offset along x.
pub fn offset_hover(duration: f64) -> SimConfig {
    SimConfig {
        duration,
        initial: InitialCondition { position_offset: Vec3::new(0.005, 0.0, 0.0), ..Default::default() },
        ..SimConfig::default()
    }
}
