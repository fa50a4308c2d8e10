//! The fixed-rate closed loop.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::record::{SimLog, SimOutcome, SimRecord};
use super::plant::{driver_step, estimate_body_rate, estimate_velocity, Pose, Sensor};
use super::SimConfig;
use crate::allocation::{hover_currents, saturate, solve_currents, wrench_residual};
use crate::attitude_control::{AttitudeController, AttitudeGains, AttitudeIntegral};
use crate::magnetics::{reduced_allocation_matrix, wrench, ReducedWrench};
use crate::rigidbody::{step, RigidBodyState};
use crate::translation_control::{TranslationController, TranslationGains, TranslationIntegral};
use crate::{Error, Result, Vec3};

/// The run is aborted once |p| exceeds this [m].
pub const DIVERGENCE_RADIUS: f64 = 0.2;
/// The run is aborted once |ω| exceeds this [rad/s].
pub const DIVERGENCE_OMEGA: f64 = 500.0;

fn pose(state: &RigidBodyState) -> Pose {
    Pose { p: state.p, rotation: state.rotation }
}

fn divergence(state: &RigidBodyState) -> Option<String> {
    if !state.is_finite() {
        Some("non-finite state".into())
    } else if state.p.norm() > DIVERGENCE_RADIUS {
        Some(format!("|p| = {:.4} m exceeds {DIVERGENCE_RADIUS} m", state.p.norm()))
    } else if state.omega_body.norm() > DIVERGENCE_OMEGA {
        Some(format!("|ω| = {:.1} rad/s exceeds {DIVERGENCE_OMEGA} rad/s", state.omega_body.norm()))
    } else {
        None
    }
}

fn controllers(config: &SimConfig) -> Result<(AttitudeController, TranslationController)> {
    let mut att_gains = config.attitude_gains.clone();
    let mut tr_gains = config.translation_gains.clone();
    if !config.integrators {
        att_gains = AttitudeGains { ki: 0.0, ..att_gains };
        tr_gains = TranslationGains { ki: Vec3::zeros(), ..tr_gains };
    }
    let att = AttitudeController::new(att_gains, &config.levitator, config.gravity)?;
    let tr = TranslationController::new(&tr_gains, &config.levitator, config.gravity, config.controller_period)?;
    Ok((att, tr))
}

/// Runs the loop for `config.duration`. Configuration problems and an
/// infeasible starting hover are errors; divergence mid-run ends the log early
/// with [`SimOutcome::Diverged`].
pub fn run_closed_loop(config: &SimConfig) -> Result<SimLog> {
    let timing = config.validate()?;
    let (att, tr) = controllers(config)?;
    let params = &config.levitator;
    let model = config.field_model.as_ref();
    let dipole = params.dipole_body;
    let ts = config.controller_period;
    let h = config.physics_step;

    let mut state = config.initial.state(&config.trajectory.evaluate(0.0).p_des);
    crate::so3::validate_rotation(&state.rotation)?;
    let i_hover = hover_currents(model, params, &state.p, &state.rotation, config.gravity)?;
    if i_hover.amax() > params.current_limit {
        return Err(Error::HoverInfeasible { required: i_hover.amax(), limit: params.current_limit });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut sensor = Sensor::new(pose(&state), timing.delay_ticks, config.pos_noise_std, config.att_noise_std);
    let mut previous: Option<Pose> = None;
    let mut i_actual = i_hover;
    let mut att_int = AttitudeIntegral::default();
    let mut tr_int = TranslationIntegral::default();
    let mut records = Vec::with_capacity(timing.ticks);
    let mut outcome = SimOutcome::Completed;

    'ticks: for k in 0..timing.ticks {
        let t = k as f64 * ts;
        let meas = sensor.measure(&pose(&state), &mut rng);
        let prev = previous.as_ref().unwrap_or(&meas);
        let v_hat = estimate_velocity(&meas.p, &prev.p, ts);
        let w_hat = estimate_body_rate(&meas.rotation, &prev.rotation, ts);

        let sp = config.trajectory.evaluate(t);
        let (torque_xy, a_int) = att.compute(&meas.rotation, &w_hat.xy(), &sp.gamma_des, &att_int, ts);
        let (force, t_int) = tr.compute(&meas.p, &v_hat, &sp.p_des, &sp.v_des, &tr_int, ts);
        att_int = a_int;
        tr_int = t_int;
        let w_des = ReducedWrench::new(torque_xy, force);

        let solved = reduced_allocation_matrix(model, &meas.rotation, &meas.p, &dipole)
            .and_then(|n| solve_currents(&n, &w_des).map(|i| (i, wrench_residual(&n, &i, &w_des))));
        let (i_req, residual) = match solved {
            Ok(v) => v,
            Err(e) => {
                outcome = SimOutcome::Diverged { time: t, reason: format!("allocation failed: {e}") };
                break 'ticks;
            }
        };
        let (i_cmd, flags) = saturate(&i_req, params.current_limit);

        records.push(SimRecord {
            t,
            state: state.clone(),
            estimate: RigidBodyState { p: meas.p, v: v_hat, rotation: meas.rotation, omega_body: w_hat },
            p_des: sp.p_des,
            v_des: sp.v_des,
            gamma_des: *sp.gamma_des.vector(),
            wrench: w_des,
            currents_requested: i_req,
            currents_commanded: i_cmd,
            currents_actual: i_actual,
            saturation: flags,
            allocation_residual: residual,
        });
        previous = Some(meas);

        for j in 0..timing.substeps {
            let (torque_body, f_mag) = match wrench(model, &state.rotation, &state.p, &dipole, &i_actual) {
                Ok(w) => w,
                Err(e) => {
                    outcome = SimOutcome::Diverged { time: t + j as f64 * h, reason: format!("field evaluation failed: {e}") };
                    break 'ticks;
                }
            };
            state = step(&state, &torque_body.xy(), &(f_mag + config.disturbance_force), params, config.gravity, h);
            i_actual = driver_step(&i_actual, &i_cmd, config.corner_frequency, h);
            if let Some(reason) = divergence(&state) {
                outcome = SimOutcome::Diverged { time: t + (j + 1) as f64 * h, reason };
                break 'ticks;
            }
        }
    }
    if let SimOutcome::Diverged { time, reason } = &outcome {
        log::warn!("simulation diverged at t = {time:.4} s: {reason}");
    }
    Ok(SimLog { controller_period: ts, records, outcome })
}

/// Independent runs in parallel; results keep the input order.
pub fn run_batch(configs: &[SimConfig]) -> Vec<Result<SimLog>> {
    configs.par_iter().map(run_closed_loop).collect()
}
