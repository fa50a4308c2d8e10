//! Scenario files: JSON with sections `field_model`, `levitator`, `gains`,
//! `sim`, `trajectory` and an optional `initial`. Every object except the
//! trajectory may carry a free-form `comment`; any other unknown key is an
//! error.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use maglev_core::attitude_control::AttitudeGains;
use maglev_core::fieldmodel::FieldModel;
use maglev_core::magnetics::LevitatorParams;
use maglev_core::sim::{InitialCondition, SimConfig, Trajectory};
use maglev_core::translation_control::TranslationGains;
use maglev_core::Vec3;
use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// 2×2 matrix written row by row.
pub type Rows2 = [[f64; 2]; 2];

fn to_matrix(rows: &Rows2) -> Matrix2<f64> {
    Matrix2::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1])
}

#[cfg(test)]
fn to_rows(m: &Matrix2<f64>) -> Rows2 {
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

/// `"default"`, a path to a model JSON (relative to the scenario file), or
/// the model inline.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldModelSource {
    Named(String),
    Inline(Box<FieldModel>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevitatorSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<Value>,
    pub mass: f64,
    pub inertia: Vec3,
    pub dipole_body: Vec3,
    pub current_limit: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttitudeSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<Value>,
    pub kd: Rows2,
    pub kp: f64,
    pub ki: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisCosts {
    pub x: Rows2,
    pub y: Rows2,
    pub z: Rows2,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranslationSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<Value>,
    pub q: AxisCosts,
    pub rho: f64,
    pub xi: f64,
    pub ki: Vec3,
    /// Design the LQR for this period instead of the controller period [s].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design_period: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<Value>,
    pub attitude: AttitudeSection,
    pub translation: TranslationSection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<Value>,
    pub controller_period: f64,
    pub physics_step: f64,
    pub duration: f64,
    pub corner_frequency: f64,
    pub loop_delay: f64,
    pub pos_noise_std: f64,
    pub att_noise_std: f64,
    pub seed: u64,
    pub gravity: f64,
    pub integrators: bool,
    #[serde(default)]
    pub disturbance_force: Vec3,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<Value>,
    pub field_model: FieldModelSource,
    pub levitator: LevitatorSection,
    pub gains: GainsSection,
    pub sim: SimSection,
    pub trajectory: Trajectory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialCondition>,
}

/// A parsed scenario with its field model loaded.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub field_model: Arc<FieldModel>,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// The library defaults, hovering at the origin.
    #[cfg(test)]
    pub fn defaults() -> Self {
        let lev = LevitatorParams::default();
        let att = AttitudeGains::default();
        let tr = TranslationGains::default();
        let sim = SimConfig::default();
        Self {
            comment: None,
            field_model: FieldModelSource::Named("default".into()),
            levitator: LevitatorSection {
                comment: None,
                mass: lev.mass,
                inertia: lev.inertia,
                dipole_body: lev.dipole_body,
                current_limit: lev.current_limit,
            },
            gains: GainsSection {
                comment: None,
                attitude: AttitudeSection { comment: None, kd: to_rows(&att.kd), kp: att.kp, ki: att.ki },
                translation: TranslationSection {
                    comment: None,
                    q: AxisCosts { x: to_rows(&tr.q[0]), y: to_rows(&tr.q[1]), z: to_rows(&tr.q[2]) },
                    rho: tr.rho,
                    xi: tr.xi,
                    ki: tr.ki,
                    design_period: tr.design_period,
                },
            },
            sim: SimSection {
                comment: None,
                controller_period: sim.controller_period,
                physics_step: sim.physics_step,
                duration: sim.duration,
                corner_frequency: sim.corner_frequency,
                loop_delay: sim.loop_delay,
                pos_noise_std: sim.pos_noise_std,
                att_noise_std: sim.att_noise_std,
                seed: sim.seed,
                gravity: sim.gravity,
                integrators: sim.integrators,
                disturbance_force: sim.disturbance_force,
            },
            trajectory: Trajectory::default(),
            initial: None,
        }
    }

    pub fn levitator(&self) -> LevitatorParams {
        let l = &self.levitator;
        LevitatorParams { mass: l.mass, inertia: l.inertia, dipole_body: l.dipole_body, current_limit: l.current_limit }
    }

    pub fn attitude_gains(&self) -> AttitudeGains {
        let a = &self.gains.attitude;
        AttitudeGains { kd: to_matrix(&a.kd), kp: a.kp, ki: a.ki }
    }

    pub fn translation_gains(&self) -> TranslationGains {
        let t = &self.gains.translation;
        TranslationGains {
            q: [to_matrix(&t.q.x), to_matrix(&t.q.y), to_matrix(&t.q.z)],
            rho: t.rho,
            xi: t.xi,
            ki: t.ki,
            design_period: t.design_period,
        }
    }
}

fn load_field_model(source: &FieldModelSource, base: &Path) -> Result<FieldModel> {
    match source {
        FieldModelSource::Inline(model) => Ok(model.as_ref().clone()),
        FieldModelSource::Named(name) if name == "default" => Ok(FieldModel::default()),
        FieldModelSource::Named(path) => {
            let path: PathBuf = base.join(path);
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading field model {}", path.display()))?;
            FieldModel::from_json(&text).with_context(|| format!("parsing field model {}", path.display()))
        }
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading scenario {}", path.display()))?;
        let file = ScenarioFile::parse(&text).with_context(|| format!("parsing scenario {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let field_model = Arc::new(load_field_model(&file.field_model, base)?);
        Ok(Self { file, field_model })
    }

    pub fn sim_config(&self) -> SimConfig {
        let f = &self.file;
        let s = &f.sim;
        SimConfig {
            controller_period: s.controller_period,
            physics_step: s.physics_step,
            duration: s.duration,
            corner_frequency: s.corner_frequency,
            loop_delay: s.loop_delay,
            pos_noise_std: s.pos_noise_std,
            att_noise_std: s.att_noise_std,
            seed: s.seed,
            gravity: s.gravity,
            disturbance_force: s.disturbance_force,
            integrators: s.integrators,
            trajectory: f.trajectory.clone(),
            attitude_gains: f.attitude_gains(),
            translation_gains: f.translation_gains(),
            levitator: f.levitator(),
            field_model: Arc::clone(&self.field_model),
            initial: f.initial.clone().unwrap_or_default(),
        }
    }
}
