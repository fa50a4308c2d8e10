//! Least-squares calibration of the dipole-term model (Levenberg–Marquardt).
//!
//! Per coil the solver moves 6 local coordinates: the center (3), a tangent-plane
//! step of the axis (2) followed by renormalization, and the strength (1).

use log::{debug, warn};
use nalgebra::{DMatrix, DVector, SMatrix};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{field_from_offset, jacobian_from_offset, CoilSource, FieldModel, FieldSample};
use crate::{CurrentVector, Error, Result, Vec3, NUM_COILS};

const LOCAL_DOF: usize = 6;
const DOF: usize = LOCAL_DOF * NUM_COILS;

#[derive(Clone, Debug)]
pub struct FitOptions {
    pub initial_lambda: f64,
    pub lambda_factor: f64,
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub relative_tolerance: f64,
    /// Condition number of the Jacobian above which the fit is flagged.
    pub rank_warning_condition: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            initial_lambda: 1e-3,
            lambda_factor: 10.0,
            max_iterations: 200,
            relative_tolerance: 1e-12,
            rank_warning_condition: 1e12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct FitReport {
    /// RMS of the per-component field residual at the returned model [T].
    pub rms_residual: f64,
    pub initial_rms_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Condition number of the residual Jacobian at the returned model.
    pub condition_number: f64,
    pub rank_warning: bool,
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub model: FieldModel,
    pub report: FitReport,
}

fn tangent_basis(axis: &Vec3) -> (Vec3, Vec3) {
    let pick = if axis.x.abs() <= axis.y.abs() && axis.x.abs() <= axis.z.abs() {
        Vec3::x()
    } else if axis.y.abs() <= axis.z.abs() {
        Vec3::y()
    } else {
        Vec3::z()
    };
    let u = axis.cross(&pick).normalize();
    let v = axis.cross(&u);
    (u, v)
}

fn prefactor(coil: &CoilSource, current: f64) -> f64 {
    crate::MU0 * coil.strength * current / (4.0 * std::f64::consts::PI)
}

fn predict(model: &FieldModel, s: &FieldSample) -> Result<Vec3> {
    model.field(&s.position, &s.coil_currents)
}

fn cost(model: &FieldModel, samples: &[FieldSample]) -> Result<f64> {
    samples.iter().try_fold(0.0, |acc, s| Ok(acc + (s.measured_field - predict(model, s)?).norm_squared()))
}

/// Normal equations JᵀJ and Jᵀr with J = ∂(predicted field)/∂(local coordinates).
fn normal_equations(model: &FieldModel, samples: &[FieldSample]) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let bases: Vec<(Vec3, Vec3)> = model.coils.iter().map(|c| tangent_basis(&c.axis)).collect();
    let mut jtj = DMatrix::zeros(DOF, DOF);
    let mut jtr = DVector::zeros(DOF);
    let mut block = SMatrix::<f64, 3, DOF>::zeros();
    for s in samples {
        block.fill(0.0);
        let mut predicted = Vec3::zeros();
        for (j, coil) in model.coils.iter().enumerate() {
            let current = s.coil_currents[j];
            if current == 0.0 {
                continue;
            }
            let r = coil.offset(&s.position)?;
            let k = prefactor(coil, current);
            let b = field_from_offset(&coil.axis, &r, k);
            predicted += b;
            let col = LOCAL_DOF * j;
            // moving the center by δc moves the offset by −δc
            block.fixed_view_mut::<3, 3>(0, col).copy_from(&(-jacobian_from_offset(&coil.axis, &r, k)));
            let (u, v) = bases[j];
            block.fixed_view_mut::<3, 1>(0, col + 3).copy_from(&field_from_offset(&u, &r, k));
            block.fixed_view_mut::<3, 1>(0, col + 4).copy_from(&field_from_offset(&v, &r, k));
            block.fixed_view_mut::<3, 1>(0, col + 5).copy_from(&(b / coil.strength));
        }
        let residual = s.measured_field - predicted;
        jtj += block.transpose() * block;
        jtr += block.transpose() * residual;
    }
    Ok((jtj, jtr))
}

fn apply_step(model: &FieldModel, step: &DVector<f64>) -> Option<FieldModel> {
    let mut coils = model.coils.clone();
    for (j, coil) in coils.iter_mut().enumerate() {
        let d = step.fixed_rows::<LOCAL_DOF>(LOCAL_DOF * j);
        let (u, v) = tangent_basis(&coil.axis);
        let center = coil.center + Vec3::new(d[0], d[1], d[2]);
        let axis = coil.axis + u * d[3] + v * d[4];
        let strength = coil.strength + d[5];
        *coil = CoilSource::new(center, axis, strength).ok()?;
    }
    Some(FieldModel { coils })
}

fn condition_number(jtj: &DMatrix<f64>) -> f64 {
    let eig = jtj.clone().symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        (max / min).sqrt()
    }
}

/// Fits all coil parameters to field measurements, starting from `initial`.
///
/// Non-convergence is not an error: the best iterate is returned with
/// `report.converged == false`.
pub fn fit_mpem(samples: &[FieldSample], initial: &FieldModel, options: &FitOptions) -> Result<FitResult> {
    if samples.len() * 3 < NUM_COILS * 7 {
        return Err(Error::param(format!(
            "calibration needs at least {} scalar residuals, got {}",
            NUM_COILS * 7,
            samples.len() * 3
        )));
    }
    if let Some(bad) = samples.iter().position(|s| !s.is_finite()) {
        return Err(Error::param(format!("calibration sample {bad} has non-finite entries")));
    }
    for (a, ca) in initial.coils.iter().enumerate() {
        for cb in &initial.coils[a + 1..] {
            if (ca.center - cb.center).norm() <= super::SINGULARITY_RADIUS {
                return Err(Error::param("initial guess has coincident coil centers"));
            }
        }
    }

    let n_residuals = (samples.len() * 3) as f64;
    let mut model = initial.clone();
    let mut current_cost = cost(&model, samples)?;
    let initial_rms_residual = (current_cost / n_residuals).sqrt();
    let mut lambda = options.initial_lambda;
    let mut converged = current_cost == 0.0;
    let mut iterations = 0;
    let (mut jtj, mut jtr) = normal_equations(&model, samples)?;

    while !converged && iterations < options.max_iterations {
        iterations += 1;
        let diag_floor = jtj.diagonal().max() * 1e-15;
        let mut damped = jtj.clone();
        for k in 0..DOF {
            damped[(k, k)] += lambda * jtj[(k, k)].max(diag_floor);
        }
        let candidate = damped
            .cholesky()
            .map(|c| c.solve(&jtr))
            .and_then(|step| apply_step(&model, &step))
            .map(|m| cost(&m, samples).map(|c| (m, c)))
            .transpose()?;

        match candidate {
            Some((next, next_cost)) if next_cost < current_cost => {
                let decrease = (current_cost - next_cost) / current_cost;
                debug!("iteration {iterations}: cost {next_cost:e}, lambda {lambda:e}");
                model = next;
                current_cost = next_cost;
                lambda = (lambda / options.lambda_factor).max(1e-15);
                if decrease < options.relative_tolerance || current_cost == 0.0 {
                    converged = true;
                }
                (jtj, jtr) = normal_equations(&model, samples)?;
            }
            _ => {
                lambda *= options.lambda_factor;
                // No step of any length lowers the cost: a numerical minimum.
                if lambda > 1e16 {
                    converged = true;
                }
            }
        }
    }

    let condition_number = condition_number(&jtj);
    let rank_warning = condition_number > options.rank_warning_condition;
    if rank_warning {
        warn!("calibration Jacobian is ill-conditioned (condition number {condition_number:e})");
    }
    if !converged {
        warn!("calibration stopped after {iterations} iterations without converging");
    }
    Ok(FitResult {
        model,
        report: FitReport {
            rms_residual: (current_cost / n_residuals).sqrt(),
            initial_rms_residual,
            iterations,
            converged,
            condition_number,
            rank_warning,
        },
    })
}

/// Relative RMS prediction error ‖b_measured − b_model‖ / ‖b_measured‖ over a set.
pub fn prediction_error(model: &FieldModel, samples: &[FieldSample]) -> Result<f64> {
    let mut err = 0.0;
    let mut norm = 0.0;
    for s in samples {
        err += (s.measured_field - predict(model, s)?).norm_squared();
        norm += s.measured_field.norm_squared();
    }
    Ok((err / norm).sqrt())
}

/// Sensor positions of a 4×4×4 grid (pitch `spacing`) placed at each offset.
pub fn calibration_positions(spacing: f64, placements: &[Vec3]) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(64 * placements.len());
    for offset in placements {
        for ix in 0..4 {
            for iy in 0..4 {
                for iz in 0..4 {
                    let local = Vec3::new(ix as f64 - 1.5, iy as f64 - 1.5, iz as f64 - 1.5) * spacing;
                    out.push(offset + local);
                }
            }
        }
    }
    out
}

/// One-coil-at-a-time excitation at `amplitude` for every position, with
/// multiplicative Gaussian noise of relative size `noise` on each field component.
pub fn synthetic_samples<R: Rng>(
    model: &FieldModel,
    positions: &[Vec3],
    amplitude: f64,
    noise: f64,
    rng: &mut R,
) -> Result<Vec<FieldSample>> {
    let mut out = Vec::with_capacity(positions.len() * NUM_COILS);
    for p in positions {
        for j in 0..NUM_COILS {
            let mut currents = CurrentVector::zeros();
            currents[j] = amplitude;
            let b = model.field(p, &currents)?;
            let measured = b.map(|x| {
                let n: f64 = rng.sample(StandardNormal);
                x * (1.0 + noise * n)
            });
            out.push(FieldSample { position: *p, coil_currents: currents, measured_field: measured });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn placements() -> Vec<Vec3> {
        vec![
            Vec3::zeros(),
            Vec3::new(0.02, 0.0, 0.01),
            Vec3::new(-0.02, 0.0, 0.01),
            Vec3::new(0.0, 0.02, -0.01),
            Vec3::new(0.0, -0.02, -0.01),
        ]
    }

    fn perturbed(model: &FieldModel, scale: f64, rng: &mut ChaCha8Rng) -> FieldModel {
        let mut m = model.clone();
        for c in m.coils.iter_mut() {
            let jitter = |rng: &mut ChaCha8Rng| 1.0 + scale * rng.random_range(-1.0..1.0);
            let center = c.center.map(|x| x * jitter(rng));
            let axis = c.axis + Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale;
            *c = CoilSource::new(center, axis, c.strength * jitter(rng)).unwrap();
        }
        m
    }

    #[test]
    fn single_coil_data_only_informs_that_coil() {
        let truth = FieldModel::default_layout();
        let positions = calibration_positions(0.01, &placements()[..1]);
        let mut samples = Vec::new();
        for p in &positions {
            let mut i = CurrentVector::zeros();
            i[2] = 1.5;
            samples.push(FieldSample { position: *p, coil_currents: i, measured_field: truth.field(p, &i).unwrap() });
        }
        let base = cost(&truth, &samples).unwrap();
        for j in 0..NUM_COILS {
            let mut m = truth.clone();
            m.coils[j].strength *= 1.1;
            let changed = cost(&m, &samples).unwrap() != base;
            assert_eq!(changed, j == 2, "coil {j}");
        }
    }

    #[test]
    fn rejects_too_few_samples() {
        let truth = FieldModel::default_layout();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let samples = synthetic_samples(&truth, &[Vec3::zeros()], 1.0, 0.0, &mut rng).unwrap();
        assert!(fit_mpem(&samples[..5], &truth, &FitOptions::default()).is_err());
    }

    #[test]
    fn exact_start_is_a_fixed_point() {
        let truth = FieldModel::default_layout();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let positions = calibration_positions(0.01, &placements()[..1]);
        let samples = synthetic_samples(&truth, &positions, 2.0, 0.0, &mut rng).unwrap();
        let fit = fit_mpem(&samples, &truth, &FitOptions::default()).unwrap();
        assert!(fit.report.converged);
        assert!(fit.report.rms_residual < 1e-15);
    }

    #[test]
    fn sample_order_does_not_matter() {
        let truth = FieldModel::default_layout();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let positions = calibration_positions(0.012, &placements());
        let samples = synthetic_samples(&truth, &positions, 2.0, 0.005, &mut rng).unwrap();
        let init = perturbed(&truth, 0.03, &mut rng);
        let mut reversed = samples.clone();
        reversed.reverse();
        let a = fit_mpem(&samples, &init, &FitOptions::default()).unwrap();
        let b = fit_mpem(&reversed, &init, &FitOptions::default()).unwrap();
        for (ca, cb) in a.model.coils.iter().zip(b.model.coils.iter()) {
            assert!((ca.center - cb.center).norm() < 1e-9 * ca.center.norm());
            assert!((ca.axis - cb.axis).norm() < 1e-9);
            assert!((ca.strength - cb.strength).abs() < 1e-9 * ca.strength);
        }
    }

    #[test]
    fn iteration_cap_flags_non_convergence() {
        let truth = FieldModel::default_layout();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let positions = calibration_positions(0.01, &placements());
        let samples = synthetic_samples(&truth, &positions, 2.0, 0.0, &mut rng).unwrap();
        let init = perturbed(&truth, 0.05, &mut rng);
        let options = FitOptions { max_iterations: 1, ..FitOptions::default() };
        let fit = fit_mpem(&samples, &init, &options).unwrap();
        assert!(!fit.report.converged);
        assert_eq!(fit.report.iterations, 1);
        assert!(fit.report.rms_residual <= fit.report.initial_rms_residual);
    }
}
