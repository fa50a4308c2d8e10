//! Calibration from synthetic datasets.

mod common;

use maglev_core::fieldmodel::{
    calibration_positions, fit_mpem, prediction_error, read_samples_csv, synthetic_samples, write_samples_csv, FieldModel, FitOptions,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

#[test]
fn recovers_the_model_from_several_starts() {
    let truth = FieldModel::default();
    let positions = calibration_positions(0.01, &placements());
    for seed in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = synthetic_samples(&truth, &positions, 2.0, 0.0, &mut rng).unwrap();
        let init = perturbed(&truth, 0.05, &mut rng);
        let fit = fit_mpem(&samples, &init, &FitOptions::default()).unwrap();
        assert!(fit.report.converged);
        assert!(!fit.report.rank_warning);
        assert!(fit.report.rms_residual < 1e-12 * fit.report.initial_rms_residual.max(1e-3));
        assert!(max_parameter_error(&fit.model, &truth) < 1e-6);
    }
}

#[test]
fn noisy_fit_residual_matches_the_noise_level() {
    let truth = FieldModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let positions = calibration_positions(0.01, &placements());
    let samples = synthetic_samples(&truth, &positions, 2.0, 0.01, &mut rng).unwrap();
    let init = perturbed(&truth, 0.05, &mut rng);
    let fit = fit_mpem(&samples, &init, &FitOptions::default()).unwrap();
    assert!(fit.report.converged);
    // 56 parameters against 7680 residuals: the fit absorbs little of the noise
    let err = prediction_error(&fit.model, &samples).unwrap();
    assert!((0.009..0.011).contains(&err), "{err}");
    let truth_err = prediction_error(&truth, &samples).unwrap();
    assert!(err <= truth_err);
}

#[test]
fn csv_round_trip_gives_the_same_fit() {
    let truth = FieldModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let positions = calibration_positions(0.012, &placements()[..3]);
    let samples = synthetic_samples(&truth, &positions, 1.5, 0.005, &mut rng).unwrap();
    let mut buf = Vec::new();
    write_samples_csv(&mut buf, &samples).unwrap();
    let back = read_samples_csv(buf.as_slice()).unwrap();
    assert_eq!(back, samples);

    let init = perturbed(&truth, 0.03, &mut rng);
    let a = fit_mpem(&samples, &init, &FitOptions::default()).unwrap();
    let b = fit_mpem(&back, &init, &FitOptions::default()).unwrap();
    assert_eq!(a.model, b.model);
    // loading renormalizes each axis, which may move it by an ulp
    let reloaded = FieldModel::from_json(&a.model.to_json()).unwrap();
    assert!(max_parameter_error(&reloaded, &a.model) < 4.0 * f64::EPSILON);
}
