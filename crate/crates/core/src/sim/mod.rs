//! Closed-loop simulation of the levitation pipeline and the
//! negative-stiffness analyzer.
//!
//! One controller tick: sense the delayed, noisy pose, estimate velocities by
//! backward differences, run both controllers, allocate currents at the
//! estimated pose, saturate, and hold the setpoints while the physics substeps
//! (driver lag, wrench at the true pose, rigid-body step) advance by Ts.

mod record;
mod plant;
mod runner;
mod stiffness;
mod trajectory;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::attitude_control::AttitudeGains;
use crate::fieldmodel::FieldModel;
use crate::magnetics::LevitatorParams;
use crate::rigidbody::RigidBodyState;
use crate::so3::from_euler_xyz;
use crate::translation_control::TranslationGains;
use crate::{Error, Result, Vec3, STANDARD_GRAVITY};

pub use record::{write_csv, SimLog, SimOutcome, SimRecord, SimSummary, CSV_HEADER};
pub use plant::{driver_step, estimate_body_rate, estimate_velocity, Pose, Sensor};
pub use runner::{run_batch, run_closed_loop, DIVERGENCE_OMEGA, DIVERGENCE_RADIUS};
pub use stiffness::{stiffness_analysis, stiffness_matrix, StiffnessReport, STIFFNESS_STEP};
pub use trajectory::{gamma_from_roll_pitch, AttitudeStep, PositionStep, Setpoint, Trajectory};

/// Initial state relative to the reference at t = 0.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialCondition {
    /// Added to p_des(0) [m].
    pub position_offset: Vec3,
    /// World-frame velocity [m/s].
    pub velocity: Vec3,
    /// XYZ intrinsic Euler angles (roll, pitch, yaw) [rad].
    pub roll_pitch_yaw: Vec3,
    /// Body-frame angular velocity [rad/s].
    pub omega_body: Vec3,
}

impl InitialCondition {
    pub fn state(&self, p_des: &Vec3) -> RigidBodyState {
        let rpy = self.roll_pitch_yaw;
        RigidBodyState {
            p: p_des + self.position_offset,
            v: self.velocity,
            rotation: from_euler_xyz(rpy.x, rpy.y, rpy.z),
            omega_body: self.omega_body,
        }
    }
}

/// Everything a closed-loop run needs.
#[derive(Clone, Debug)]
pub struct SimConfig {
    /// Controller period Ts [s].
    pub controller_period: f64,
    /// Physics step; must divide Ts [s].
    pub physics_step: f64,
    pub duration: f64,
    /// Current driver −3 dB bandwidth [Hz].
    pub corner_frequency: f64,
    /// Sensing-to-actuation delay; an integer multiple of Ts [s].
    pub loop_delay: f64,
    pub pos_noise_std: f64,
    pub att_noise_std: f64,
    pub seed: u64,
    /// [m/s²], acting along −z.
    pub gravity: f64,
    /// Constant world force added at the plant only [N].
    pub disturbance_force: Vec3,
    /// When false both integral gains are forced to zero.
    pub integrators: bool,
    pub trajectory: Trajectory,
    pub attitude_gains: AttitudeGains,
    pub translation_gains: TranslationGains,
    pub levitator: LevitatorParams,
    pub field_model: Arc<FieldModel>,
    pub initial: InitialCondition,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            controller_period: 1e-3,
            physics_step: 1e-4,
            duration: 10.0,
            corner_frequency: 26.4,
            loop_delay: 4e-3,
            pos_noise_std: 5e-5,
            att_noise_std: 1e-3,
            seed: 0,
            gravity: STANDARD_GRAVITY,
            disturbance_force: Vec3::zeros(),
            integrators: true,
            trajectory: Trajectory::default(),
            attitude_gains: AttitudeGains::default(),
            translation_gains: TranslationGains::default(),
            levitator: LevitatorParams::default(),
            field_model: Arc::new(FieldModel::default()),
            initial: InitialCondition::default(),
        }
    }
}

/// Integer tick structure derived from a validated config.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Timing {
    pub ticks: usize,
    pub substeps: usize,
    pub delay_ticks: usize,
}

fn integer_ratio(num: f64, den: f64, what: &str) -> Result<usize> {
    let ratio = num / den;
    let n = ratio.round();
    if !ratio.is_finite() || n < 0.0 || (ratio - n).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::param(format!("{what} must be an integer multiple ({num} / {den} = {ratio})")));
    }
    Ok(n as usize)
}

impl SimConfig {
    pub fn noiseless(mut self) -> Self {
        self.pos_noise_std = 0.0;
        self.att_noise_std = 0.0;
        self
    }

    pub fn validate(&self) -> Result<Timing> {
        let positive = |x: f64, name: &str| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::param(format!("{name} must be positive, got {x}")))
            }
        };
        positive(self.controller_period, "controller period")?;
        positive(self.physics_step, "physics step")?;
        positive(self.duration, "duration")?;
        positive(self.corner_frequency, "corner frequency")?;
        if self.physics_step > 1e-2 {
            return Err(Error::param("physics step must not exceed 10 ms"));
        }
        if !(self.loop_delay >= 0.0) || !(self.pos_noise_std >= 0.0) || !(self.att_noise_std >= 0.0) {
            return Err(Error::param("delay and noise levels must be non-negative"));
        }
        if !self.gravity.is_finite() || !self.disturbance_force.iter().all(|x| x.is_finite()) {
            return Err(Error::param("gravity and disturbance must be finite"));
        }
        self.levitator.validate()?;
        self.levitator.axial_dipole()?;
        self.trajectory.validate()?;
        let substeps = integer_ratio(self.controller_period, self.physics_step, "controller period / physics step")?;
        let delay_ticks = integer_ratio(self.loop_delay, self.controller_period, "loop delay / controller period")?;
        // the last tick may run past `duration`
        let ticks = (self.duration / self.controller_period - 1e-9).ceil() as usize;
        if substeps == 0 || ticks == 0 {
            return Err(Error::param("run must contain at least one tick and one substep"));
        }
        Ok(Timing { ticks, substeps, delay_ticks })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_timing() {
        let t = SimConfig::default().validate().unwrap();
        assert_eq!(t, Timing { ticks: 10_000, substeps: 10, delay_ticks: 4 });
    }

    #[test]
    fn rejects_non_dividing_steps() {
        let c = SimConfig { physics_step: 3e-4, ..SimConfig::default() };
        assert!(c.validate().is_err());
        let c = SimConfig { loop_delay: 2.5e-3, ..SimConfig::default() };
        assert!(c.validate().is_err());
        let c = SimConfig { duration: 0.0, ..SimConfig::default() };
        assert!(c.validate().is_err());
        let c = SimConfig { duration: 1.0, controller_period: 3e-3, loop_delay: 6e-3, ..SimConfig::default() };
        assert_eq!(c.validate().unwrap().ticks, 334);
    }

    #[test]
    fn initial_condition_offsets_reference() {
        let ic = InitialCondition { position_offset: Vec3::new(0.005, 0.0, 0.0), ..Default::default() };
        let s = ic.state(&Vec3::new(0.0, 0.0, 0.01));
        assert_eq!(s.p, Vec3::new(0.005, 0.0, 0.01));
        assert_eq!(s.rotation, crate::Mat3::identity());
    }
}
