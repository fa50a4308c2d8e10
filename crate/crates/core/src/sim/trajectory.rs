//! Reference trajectories.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::attitude_control::ReducedAttitude;
use crate::{Error, Result, Vec3};

/// Reference at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Setpoint {
    pub p_des: Vec3,
    pub v_des: Vec3,
    pub gamma_des: ReducedAttitude,
}

/// Roll/pitch target held from `time` until the next step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttitudeStep {
    pub time: f64,
    pub roll_deg: f64,
    pub pitch_deg: f64,
}

/// Position target held from `time` until the next step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositionStep {
    pub time: f64,
    pub position: Vec3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Trajectory {
    /// Hold a point, upright.
    Hover { position: Vec3 },
    /// Hold a point while stepping through roll/pitch targets.
    AttitudeSteps { position: Vec3, steps: Vec<AttitudeStep> },
    /// x = Ax·sin(2πt/T), y = Ay·sin(4πt/T) around `center`, upright.
    FigureEight { center: Vec3, ax: f64, ay: f64, period: f64 },
    /// Piecewise-constant positions, upright.
    PositionSteps { steps: Vec<PositionStep> },
}

impl Default for Trajectory {
    fn default() -> Self {
        Trajectory::Hover { position: Vec3::zeros() }
    }
}

/// Γ_des = Rx(roll)·Ry(pitch)·e_z.
pub fn gamma_from_roll_pitch(roll: f64, pitch: f64) -> ReducedAttitude {
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    ReducedAttitude::new(Vec3::new(sp, -sr * cp, cr * cp)).expect("unit vector")
}

fn upright() -> ReducedAttitude {
    ReducedAttitude::new(Vec3::z()).expect("unit vector")
}

/// Index of the last step whose start time is ≤ t (steps sorted by time).
fn active<T>(steps: &[T], t: f64, time: impl Fn(&T) -> f64) -> Option<&T> {
    steps.iter().take_while(|s| time(s) <= t).last()
}

impl Trajectory {
    /// Level at t = 0, then +45° roll, level, −45° roll, level, +45° pitch,
    /// level, −45° pitch, level, one step every 2 s.
    pub fn default_attitude_steps(position: Vec3) -> Self {
        let angles = [
            (0.0, 0.0),
            (45.0, 0.0),
            (0.0, 0.0),
            (-45.0, 0.0),
            (0.0, 0.0),
            (0.0, 45.0),
            (0.0, 0.0),
            (0.0, -45.0),
            (0.0, 0.0),
        ];
        let steps = angles
            .iter()
            .enumerate()
            .map(|(k, &(roll_deg, pitch_deg))| AttitudeStep { time: 2.0 * k as f64, roll_deg, pitch_deg })
            .collect();
        Trajectory::AttitudeSteps { position, steps }
    }

    /// Ax = 10 mm, Ay = 5 mm, T = 10 s.
    pub fn default_figure_eight(center: Vec3) -> Self {
        Trajectory::FigureEight { center, ax: 0.01, ay: 0.005, period: 10.0 }
    }

    pub fn validate(&self) -> Result<()> {
        fn sorted(times: impl Iterator<Item = f64>) -> bool {
            let v: Vec<f64> = times.collect();
            v.iter().all(|t| t.is_finite()) && v.windows(2).all(|w| w[0] <= w[1])
        }
        match self {
            Trajectory::Hover { .. } => Ok(()),
            Trajectory::AttitudeSteps { steps, .. } => {
                if steps.is_empty() || !sorted(steps.iter().map(|s| s.time)) {
                    return Err(Error::param("attitude steps must be non-empty and sorted by time"));
                }
                if steps.iter().any(|s| s.roll_deg.abs() >= 90.0 || s.pitch_deg.abs() >= 90.0) {
                    return Err(Error::param("attitude step angles must be within (-90°, 90°)"));
                }
                Ok(())
            }
            Trajectory::FigureEight { period, .. } if !(*period > 0.0) => {
                Err(Error::param("figure-eight period must be positive"))
            }
            Trajectory::FigureEight { .. } => Ok(()),
            Trajectory::PositionSteps { steps } => {
                if steps.is_empty() || !sorted(steps.iter().map(|s| s.time)) {
                    return Err(Error::param("position steps must be non-empty and sorted by time"));
                }
                Ok(())
            }
        }
    }

    /// Reference at time t. Before the first step the first step is used.
    pub fn evaluate(&self, t: f64) -> Setpoint {
        match self {
            Trajectory::Hover { position } => Setpoint { p_des: *position, v_des: Vec3::zeros(), gamma_des: upright() },
            Trajectory::AttitudeSteps { position, steps } => {
                let s = active(steps, t, |s| s.time).unwrap_or(&steps[0]);
                Setpoint {
                    p_des: *position,
                    v_des: Vec3::zeros(),
                    gamma_des: gamma_from_roll_pitch(s.roll_deg.to_radians(), s.pitch_deg.to_radians()),
                }
            }
            Trajectory::FigureEight { center, ax, ay, period } => {
                let w = 2.0 * PI / period;
                let p = center + Vec3::new(ax * (w * t).sin(), ay * (2.0 * w * t).sin(), 0.0);
                let v = Vec3::new(ax * w * (w * t).cos(), 2.0 * ay * w * (2.0 * w * t).cos(), 0.0);
                Setpoint { p_des: p, v_des: v, gamma_des: upright() }
            }
            Trajectory::PositionSteps { steps } => {
                let s = active(steps, t, |s| s.time).unwrap_or(&steps[0]);
                Setpoint { p_des: s.position, v_des: Vec3::zeros(), gamma_des: upright() }
            }
        }
    }

    /// Times at which the reference jumps.
    pub fn step_times(&self) -> Vec<f64> {
        match self {
            Trajectory::AttitudeSteps { steps, .. } => steps.iter().map(|s| s.time).collect(),
            Trajectory::PositionSteps { steps } => steps.iter().map(|s| s.time).collect(),
            _ => Vec::new(),
        }
    }

    /// True when every reference attitude is upright.
    pub fn is_level(&self) -> bool {
        match self {
            Trajectory::AttitudeSteps { steps, .. } => steps.iter().all(|s| s.roll_deg == 0.0 && s.pitch_deg == 0.0),
            _ => true,
        }
    }
}
