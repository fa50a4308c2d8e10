//! The four subcommands.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use maglev_core::allocation::hover_currents;
use maglev_core::fieldmodel::{fit_mpem, prediction_error, read_samples_csv, FieldModel, FitOptions, FitReport};
use maglev_core::sim::{run_batch, stiffness_analysis, write_csv, SimConfig, SimOutcome, SimSummary, StiffnessReport};
use maglev_core::so3::from_euler_xyz;
use maglev_core::translation_control::{design_axis_lqr, discretize_axis};
use maglev_core::{Mat3, Vec3};
use serde::Serialize;

use crate::scenario::Scenario;

pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_DIVERGED: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    fn config(error: impl Into<anyhow::Error>) -> Self {
        Self { code: EXIT_CONFIG, error: error.into() }
    }
}

/// Model-side errors are solver failures unless they stem from the inputs.
fn classify(error: maglev_core::Error) -> Failure {
    use maglev_core::Error as E;
    let code = match &error {
        E::Singularity { .. } | E::RankDeficient { .. } | E::DareNotConverged { .. } | E::NotForceBalanced { .. } => EXIT_SOLVER,
        _ => EXIT_CONFIG,
    };
    Failure { code, error: error.into() }
}

type CmdResult = Result<(), Failure>;

fn write_json<T: Serialize>(path: &Path, value: &T) -> CmdResult {
    let text = serde_json::to_string_pretty(value).map_err(Failure::config)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display())).map_err(Failure::config)
}

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plot maglev simulation logs: python3 plot_log.py log.csv [more.csv ...]"""
import sys

import matplotlib.pyplot as plt
import pandas as pd

for path in sys.argv[1:] or ["log.csv"]:
    df = pd.read_csv(path)
    fig, ax = plt.subplots(4, 1, sharex=True, figsize=(9, 10))
    for c in "xyz":
        ax[0].plot(df.t, 1e3 * (df["p" + c] - df["p" + c + "_des"]), label="e_" + c)
    ax[0].set_ylabel("position error [mm]")
    for c in ("roll", "pitch", "yaw"):
        ax[1].plot(df.t, df[c].apply(lambda r: r * 180.0 / 3.141592653589793), label=c)
    ax[1].set_ylabel("attitude [deg]")
    for c in ("wx", "wy", "wz"):
        ax[2].plot(df.t, df[c], label=c)
    ax[2].set_ylabel("body rate [rad/s]")
    for k in range(1, 9):
        ax[3].plot(df.t, df["i%d" % k], label="i%d" % k)
    ax[3].set_ylabel("current [A]")
    ax[3].set_xlabel("t [s]")
    for a in ax:
        a.grid(True)
        a.legend(loc="upper right", fontsize="small", ncol=4)
    fig.suptitle(path)
    fig.tight_layout()
plt.show()
"#;

#[derive(Serialize)]
struct SeedSummary {
    seed: u64,
    log: String,
    #[serde(flatten)]
    summary: SimSummary,
}

fn print_summary(seed: u64, s: &SimSummary) {
    let rms = s.rms_position_error.map(|e| e * 1e3);
    let status = match &s.outcome {
        SimOutcome::Completed => "completed".to_string(),
        SimOutcome::Diverged { time, reason } => format!("DIVERGED at {time:.4} s ({reason})"),
    };
    println!(
        "seed {seed}: {status}; {} ticks; RMS error x {:.4} y {:.4} z {:.4} mm; attitude RMS {:.3}° max {:.3}°; max |i| {:.3} A; saturated {:.2} %",
        s.ticks,
        rms[0],
        rms[1],
        rms[2],
        s.rms_attitude_error_deg,
        s.max_attitude_error_deg,
        s.max_commanded_current,
        100.0 * s.saturation_fraction
    );
}

pub fn simulate(scenario_path: &Path, out: &Path, seeds: u64, verbose: bool) -> CmdResult {
    let scenario = Scenario::load(scenario_path).map_err(Failure::config)?;
    let base = scenario.sim_config();
    base.validate().map_err(classify)?;
    let configs: Vec<SimConfig> = (0..seeds).map(|k| SimConfig { seed: base.seed.wrapping_add(k), ..base.clone() }).collect();
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display())).map_err(Failure::config)?;

    let mut summaries = Vec::new();
    let mut diverged = Vec::new();
    for (config, result) in configs.iter().zip(run_batch(&configs)) {
        let log = result.map_err(classify)?;
        let name = if seeds == 1 { "log.csv".to_string() } else { format!("log_seed{}.csv", config.seed) };
        let path: PathBuf = out.join(&name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display())).map_err(Failure::config)?;
        write_csv(&log, BufWriter::new(file)).map_err(classify)?;
        let summary = log.summary();
        if verbose {
            print_summary(config.seed, &summary);
        }
        if let SimOutcome::Diverged { time, reason } = &summary.outcome {
            diverged.push(format!("seed {} at {time:.4} s: {reason}", config.seed));
        }
        summaries.push(SeedSummary { seed: config.seed, log: name, summary });
    }
    if seeds == 1 {
        write_json(&out.join("summary.json"), &summaries[0])?;
    } else {
        write_json(&out.join("summary.json"), &summaries)?;
    }
    let script = out.join("plot_log.py");
    fs::write(&script, PLOT_SCRIPT).with_context(|| format!("writing {}", script.display())).map_err(Failure::config)?;
    if verbose {
        println!("wrote {}", out.display());
    }
    if diverged.is_empty() {
        Ok(())
    } else {
        Err(Failure { code: EXIT_DIVERGED, error: anyhow!("simulation diverged: {}", diverged.join("; ")) })
    }
}

#[derive(Serialize)]
struct CalibrationReport {
    #[serde(flatten)]
    fit: FitReport,
    fit_samples: usize,
    held_out_samples: usize,
    /// Relative RMS prediction error on the held-out samples.
    held_out_error: Option<f64>,
    /// Relative RMS prediction error on the fitted samples.
    training_error: f64,
}

pub fn calibrate(data: &Path, init: Option<&Path>, out: &Path, holdout_every: usize, max_iterations: usize, verbose: bool) -> CmdResult {
    let file = File::open(data).with_context(|| format!("opening {}", data.display())).map_err(Failure::config)?;
    let samples = read_samples_csv(file).map_err(|e| Failure::config(anyhow!(e).context(format!("reading {}", data.display()))))?;
    let initial = match init {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(Failure::config)?;
            FieldModel::from_json(&text).map_err(|e| Failure::config(anyhow!(e).context(format!("parsing {}", path.display()))))?
        }
        None => FieldModel::default(),
    };
    let (mut train, mut held) = (Vec::new(), Vec::new());
    for (k, s) in samples.into_iter().enumerate() {
        if holdout_every > 0 && k % holdout_every == holdout_every - 1 {
            held.push(s);
        } else {
            train.push(s);
        }
    }
    let options = FitOptions { max_iterations, ..FitOptions::default() };
    let fit = fit_mpem(&train, &initial, &options).map_err(classify)?;
    let held_out_error = if held.is_empty() { None } else { Some(prediction_error(&fit.model, &held).map_err(classify)?) };
    let report = CalibrationReport {
        training_error: prediction_error(&fit.model, &train).map_err(classify)?,
        fit: fit.report.clone(),
        fit_samples: train.len(),
        held_out_samples: held.len(),
        held_out_error,
    };

    fs::write(out, fit.model.to_json() + "\n").with_context(|| format!("writing {}", out.display())).map_err(Failure::config)?;
    let report_path = out.with_extension("report.json");
    write_json(&report_path, &report)?;
    if verbose {
        println!(
            "fit on {} samples: RMS residual {:.3e} T (from {:.3e} T) after {} iterations, converged: {}",
            report.fit_samples, report.fit.rms_residual, report.fit.initial_rms_residual, report.fit.iterations, report.fit.converged
        );
        if let Some(e) = held_out_error {
            println!("held-out error on {} samples: {:.3} %", report.held_out_samples, 100.0 * e);
        }
        for (j, c) in fit.model.coils.iter().enumerate() {
            println!(
                "coil {}: center ({:+.6}, {:+.6}, {:+.6}) m, axis ({:+.6}, {:+.6}, {:+.6}), strength {:.6} A·m²/A",
                j + 1,
                c.center.x,
                c.center.y,
                c.center.z,
                c.axis.x,
                c.axis.y,
                c.axis.z,
                c.strength
            );
        }
        println!("wrote {} and {}", out.display(), report_path.display());
    }
    if fit.report.converged {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_SOLVER,
            error: anyhow!("calibration did not converge after {} iterations; model written but unreliable", fit.report.iterations),
        })
    }
}

#[derive(Serialize)]
struct AxisReport {
    axis: &'static str,
    /// Force per (position error, velocity error) [N/m, N·s/m].
    k: [f64; 2],
    /// Closed-loop eigenvalues as (re, im).
    eigenvalues: [[f64; 2]; 2],
    spectral_radius: f64,
    dare_residual: f64,
}

#[derive(Serialize)]
struct LqrReport {
    sampling_period: f64,
    mass: f64,
    axes: Vec<AxisReport>,
}

pub fn design_lqr(scenario_path: &Path, out: Option<&Path>, verbose: bool) -> CmdResult {
    let scenario = Scenario::load(scenario_path).map_err(Failure::config)?;
    let gains = scenario.file.translation_gains();
    let params = scenario.file.levitator();
    let ts = gains.design_period.unwrap_or(scenario.file.sim.controller_period);
    let model = discretize_axis(params.mass, ts).map_err(classify)?;
    let mut axes = Vec::new();
    for (name, q) in ["x", "y", "z"].into_iter().zip(gains.q.iter()) {
        let d = design_axis_lqr(&model, q, gains.rho, gains.xi).map_err(classify)?;
        let ev = d.closed_loop_eigenvalues();
        axes.push(AxisReport {
            axis: name,
            k: [d.k[0], d.k[1]],
            eigenvalues: [[ev[0].re, ev[0].im], [ev[1].re, ev[1].im]],
            spectral_radius: d.spectral_radius(),
            dare_residual: d.dare_residual,
        });
    }
    let report = LqrReport { sampling_period: ts, mass: params.mass, axes };
    if verbose {
        println!("LQR design at Ts = {} s, m = {} kg", report.sampling_period, report.mass);
        for a in &report.axes {
            let stable = if a.spectral_radius < 1.0 { "stable" } else { "NOT stable" };
            println!(
                "{}: K = [{:.6}, {:.6}]  poles {:.6}{:+.6}i, {:.6}{:+.6}i  |λ|max {:.6} ({stable})  DARE residual {:.2e}",
                a.axis, a.k[0], a.k[1], a.eigenvalues[0][0], a.eigenvalues[0][1], a.eigenvalues[1][0], a.eigenvalues[1][1], a.spectral_radius, a.dare_residual
            );
        }
    }
    if let Some(path) = out {
        write_json(path, &report)?;
    }
    Ok(())
}

/// "x,y,z" [m] or "x,y,z,roll,pitch,yaw" [m, deg].
pub fn parse_pose(text: &str) -> anyhow::Result<(Vec3, Mat3)> {
    let values: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("pose component {s:?} is not a number")))
        .collect::<anyhow::Result<_>>()?;
    match values.as_slice() {
        [x, y, z] => Ok((Vec3::new(*x, *y, *z), Mat3::identity())),
        [x, y, z, roll, pitch, yaw] => Ok((Vec3::new(*x, *y, *z), from_euler_xyz(roll.to_radians(), pitch.to_radians(), yaw.to_radians()))),
        _ => Err(anyhow!("pose needs 3 or 6 comma-separated values, got {}", values.len())),
    }
}

#[derive(Serialize)]
struct StiffnessOutput {
    position: Vec3,
    rotation: Mat3,
    hover_feasible: bool,
    #[serde(flatten)]
    report: StiffnessReport,
}

pub fn analyze_stiffness(scenario_path: &Path, pose: Option<&str>, out: Option<&Path>, verbose: bool) -> CmdResult {
    let scenario = Scenario::load(scenario_path).map_err(Failure::config)?;
    let config = scenario.sim_config();
    let params = &config.levitator;
    params.validate().map_err(classify)?;
    let (p, r) = match pose {
        Some(text) => parse_pose(text).map_err(Failure::config)?,
        None => {
            let start = config.initial.state(&config.trajectory.evaluate(0.0).p_des);
            (start.p, start.rotation)
        }
    };
    let model = scenario.field_model.as_ref();
    let currents = hover_currents(model, params, &p, &r, config.gravity).map_err(classify)?;
    let report = stiffness_analysis(model, params, &p, &r, &currents, config.gravity).map_err(classify)?;
    let hover_feasible = currents.amax() <= params.current_limit;
    if !hover_feasible {
        log::warn!("hover at this pose needs {:.3} A, above the {} A limit", currents.amax(), params.current_limit);
    }
    if verbose {
        println!("pose p = ({:+.5}, {:+.5}, {:+.5}) m", p.x, p.y, p.z);
        println!("hover currents [A]: {}", currents.iter().map(|i| format!("{i:+.4}")).collect::<Vec<_>>().join(" "));
        println!("stiffness K_s = ∂f/∂p [N/m]:");
        for row in report.stiffness.row_iter() {
            println!("  [{:+12.6} {:+12.6} {:+12.6}]", row[0], row[1], row[2]);
        }
        let e = report.eigenvalues;
        println!("eigenvalues [N/m]: {:+.6} {:+.6} {:+.6}", e.x, e.y, e.z);
        println!("trace [N/m]: {:+.3e}", report.trace);
        let d = report.unstable_direction;
        println!("most unstable direction: ({:+.4}, {:+.4}, {:+.4}), k_max = {:.6} N/m", d.x, d.y, d.z, report.k_max);
        match report.time_constant {
            Some(tau) => println!("divergence time constant sqrt(m / k_max): {tau:.5} s"),
            None => println!("no positive stiffness"),
        }
    }
    if let Some(path) = out {
        write_json(path, &StiffnessOutput { position: p, rotation: r, hover_feasible, report })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pose_parsing() {
        let (p, r) = parse_pose("0.01, -0.002,0").unwrap();
        assert_eq!(p, Vec3::new(0.01, -0.002, 0.0));
        assert_eq!(r, Mat3::identity());
        let (_, r) = parse_pose("0,0,0,90,0,0").unwrap();
        assert!((r * Vec3::z() - Vec3::new(0.0, -1.0, 0.0)).norm() < 1e-15);
        assert!(parse_pose("1,2").is_err());
        assert!(parse_pose("1,2,x").is_err());
    }

    #[test]
    fn error_classes() {
        assert_eq!(classify(maglev_core::Error::DareNotConverged { iterations: 1 }).code, EXIT_SOLVER);
        assert_eq!(classify(maglev_core::Error::RankDeficient { singular_values: vec![] }).code, EXIT_SOLVER);
        assert_eq!(classify(maglev_core::Error::HoverInfeasible { required: 5.0, limit: 4.0 }).code, EXIT_CONFIG);
    }
}
