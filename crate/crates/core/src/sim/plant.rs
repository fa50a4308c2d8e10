//! Plant-side pieces of the loop: current driver lag, motion-capture sensor
//! and the backward-difference estimators.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::so3;
use crate::{CurrentVector, Mat3, Vec3};

/// First-order lag of each coil current toward its setpoint, exact for a
/// setpoint held over `dt`.
pub fn driver_step(i_actual: &CurrentVector, i_setpoint: &CurrentVector, fc: f64, dt: f64) -> CurrentVector {
    debug_assert!(fc > 0.0);
    let decay = (-2.0 * std::f64::consts::PI * fc * dt).exp();
    i_setpoint + (i_actual - i_setpoint) * decay
}

/// v̂ = (p_k − p_{k−1}) / Ts
pub fn estimate_velocity(p_k: &Vec3, p_km1: &Vec3, ts: f64) -> Vec3 {
    (p_k - p_km1) / ts
}

/// ω̂ = log(R_{k−1}ᵀ R_k)^∨ / Ts, in the body frame.
pub fn estimate_body_rate(r_k: &Mat3, r_km1: &Mat3, ts: f64) -> Vec3 {
    so3::log(&(r_km1.transpose() * r_k)) / ts
}

/// A measured pose.
#[derive(Clone, Debug, PartialEq)]
pub struct Pose {
    pub p: Vec3,
    pub rotation: Mat3,
}

/// Integer-tick delay line followed by Gaussian position noise and a
/// small-angle rotation perturbation R·exp(n).
#[derive(Clone, Debug)]
pub struct Sensor {
    buffer: VecDeque<Pose>,
    delay_ticks: usize,
    pos_noise: Option<Normal<f64>>,
    att_noise: Option<Normal<f64>>,
}

impl Sensor {
    /// The buffer starts filled with `initial`, as if the levitator had been
    /// resting there.
    pub fn new(initial: Pose, delay_ticks: usize, pos_noise_std: f64, att_noise_std: f64) -> Self {
        let normal = |std: f64| (std > 0.0).then(|| Normal::new(0.0, std).expect("finite positive std"));
        Self {
            buffer: std::iter::repeat_n(initial, delay_ticks).collect(),
            delay_ticks,
            pos_noise: normal(pos_noise_std),
            att_noise: normal(att_noise_std),
        }
    }

    pub fn delay_ticks(&self) -> usize {
        self.delay_ticks
    }

    /// Pushes the current true pose and returns the measurement released this tick.
    pub fn measure<R: Rng>(&mut self, truth: &Pose, rng: &mut R) -> Pose {
        self.buffer.push_back(truth.clone());
        let mut out = self.buffer.pop_front().expect("buffer holds at least the pushed pose");
        if let Some(n) = &self.pos_noise {
            out.p += Vec3::from_fn(|_, _| n.sample(rng));
        }
        if let Some(n) = &self.att_noise {
            let phi = Vec3::from_fn(|_, _| n.sample(rng));
            out.rotation *= so3::exp(&phi);
        }
        out
    }
}
