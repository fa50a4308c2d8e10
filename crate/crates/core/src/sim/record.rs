//! Per-tick record of a run, its summary and the CSV writer.

use std::io::Write;

use nalgebra::Vector2;
use serde::Serialize;

use crate::allocation::SaturationFlags;
use crate::magnetics::ReducedWrench;
use crate::rigidbody::RigidBodyState;
use crate::so3::{euler_xyz, quaternion};
use crate::{CurrentVector, Mat3, Result, Vec3};

/// One controller tick.
#[derive(Clone, Debug, PartialEq)]
pub struct SimRecord {
    pub t: f64,
    /// True state at t.
    pub state: RigidBodyState,
    /// Delayed, noisy pose and the backward-difference rates.
    pub estimate: RigidBodyState,
    pub p_des: Vec3,
    pub v_des: Vec3,
    pub gamma_des: Vec3,
    pub wrench: ReducedWrench,
    /// Ñ⁺w before saturation.
    pub currents_requested: CurrentVector,
    /// Setpoints sent to the drivers, held over the tick.
    pub currents_commanded: CurrentVector,
    /// Driver output at t.
    pub currents_actual: CurrentVector,
    pub saturation: SaturationFlags,
    /// ‖Ñ i_req − w‖ / ‖w‖
    pub allocation_residual: f64,
}

impl SimRecord {
    pub fn position_error(&self) -> Vec3 {
        self.state.p - self.p_des
    }

    /// Angle between Γ and Γ_des [rad].
    pub fn attitude_error(&self) -> f64 {
        let gamma: Vec3 = self.state.rotation.column(2).into_owned();
        gamma.cross(&self.gamma_des).norm().atan2(gamma.dot(&self.gamma_des))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SimOutcome {
    Completed,
    Diverged { time: f64, reason: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimLog {
    pub controller_period: f64,
    pub records: Vec<SimRecord>,
    pub outcome: SimOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimSummary {
    pub outcome: SimOutcome,
    pub ticks: usize,
    /// RMS of p − p_des per axis [m].
    pub rms_position_error: [f64; 3],
    /// RMS reduced-attitude angle error [deg].
    pub rms_attitude_error_deg: f64,
    pub max_attitude_error_deg: f64,
    /// Largest commanded |i_j| [A].
    pub max_commanded_current: f64,
    pub max_actual_current: f64,
    /// Fraction of ticks with at least one coil clamped.
    pub saturation_fraction: f64,
    /// Largest allocation residual over unsaturated ticks.
    pub max_allocation_residual: f64,
}

impl SimLog {
    pub fn diverged(&self) -> bool {
        matches!(self.outcome, SimOutcome::Diverged { .. })
    }

    /// Records with t ≥ `from`.
    pub fn since(&self, from: f64) -> impl Iterator<Item = &SimRecord> {
        self.records.iter().filter(move |r| r.t >= from - 1e-12)
    }

    /// Mean of p − p_des over records with t ≥ `from`.
    pub fn mean_position_error(&self, from: f64) -> Vec3 {
        let (sum, n) = self.since(from).fold((Vec3::zeros(), 0usize), |(s, n), r| (s + r.position_error(), n + 1));
        if n == 0 {
            Vec3::repeat(f64::NAN)
        } else {
            sum / n as f64
        }
    }

    pub fn summary(&self) -> SimSummary {
        let n = self.records.len().max(1) as f64;
        let mut sq = Vec3::zeros();
        let mut att_sq = 0.0;
        let mut att_max: f64 = 0.0;
        let mut max_cmd: f64 = 0.0;
        let mut max_act: f64 = 0.0;
        let mut saturated = 0usize;
        let mut max_res: f64 = 0.0;
        for r in &self.records {
            sq += r.position_error().map(|e| e * e);
            let a = r.attitude_error().to_degrees();
            att_sq += a * a;
            att_max = att_max.max(a);
            max_cmd = max_cmd.max(r.currents_commanded.amax());
            max_act = max_act.max(r.currents_actual.amax());
            if r.saturation.any() {
                saturated += 1;
            } else {
                max_res = max_res.max(r.allocation_residual);
            }
        }
        let rms = (sq / n).map(f64::sqrt);
        SimSummary {
            outcome: self.outcome.clone(),
            ticks: self.records.len(),
            rms_position_error: [rms.x, rms.y, rms.z],
            rms_attitude_error_deg: (att_sq / n).sqrt(),
            max_attitude_error_deg: att_max,
            max_commanded_current: max_cmd,
            max_actual_current: max_act,
            saturation_fraction: saturated as f64 / n,
            max_allocation_residual: max_res,
        }
    }
}

pub const CSV_HEADER: [&str; 37] = [
    "t", "px", "py", "pz", "vx", "vy", "vz", "qw", "qx", "qy", "qz", "roll", "pitch", "yaw", "wx", "wy", "wz", "px_des",
    "py_des", "pz_des", "gx_des", "gy_des", "gz_des", "tau_x", "tau_y", "fx", "fy", "fz", "i1", "i2", "i3", "i4", "i5",
    "i6", "i7", "i8", "sat_flags",
];

fn push_all(row: &mut Vec<String>, values: impl IntoIterator<Item = f64>) {
    row.extend(values.into_iter().map(|x| x.to_string()));
}

fn rotation_columns(r: &Mat3) -> ([f64; 4], Vec3) {
    (quaternion(r), euler_xyz(r))
}

/// One row per tick: true state, reference, commanded wrench and the
/// saturated current setpoints. Floats use the shortest round-trip form.
pub fn write_csv<W: Write>(log: &SimLog, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    let mut row = Vec::with_capacity(CSV_HEADER.len());
    for r in &log.records {
        row.clear();
        let s = &r.state;
        let (q, rpy) = rotation_columns(&s.rotation);
        push_all(&mut row, [r.t]);
        push_all(&mut row, s.p.iter().chain(s.v.iter()).copied());
        push_all(&mut row, q);
        push_all(&mut row, rpy.iter().chain(s.omega_body.iter()).copied());
        push_all(&mut row, r.p_des.iter().chain(r.gamma_des.iter()).copied());
        let tau: Vector2<f64> = r.wrench.torque_xy;
        push_all(&mut row, tau.iter().chain(r.wrench.force.iter()).copied());
        push_all(&mut row, r.currents_commanded.iter().copied());
        row.push(r.saturation.0.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
