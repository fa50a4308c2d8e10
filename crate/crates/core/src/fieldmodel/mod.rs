//! Dipole-term multipole model of the eight-coil eMNS.
//!
//! Each coil is a point dipole whose moment scales linearly with the coil
//! current. Fields and gradients superpose, so the currents-to-(field, gradient)
//! map at a position is a single 8×8 matrix, the actuation matrix.

mod fit;
mod io;

pub use fit::{calibration_positions, fit_mpem, prediction_error, synthetic_samples, FitOptions, FitReport, FitResult};
pub use io::{read_samples_csv, write_samples_csv};

use std::f64::consts::PI;

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::{CurrentVector, Error, Mat3, Result, Vec3, MU0, NUM_COILS};

/// Evaluations closer than this to a coil's magnetic center are rejected.
pub const SINGULARITY_RADIUS: f64 = 1e-6;

/// The currents-to-(field; gradient) map at one position.
pub type ActuationMatrix = SMatrix<f64, 8, 8>;

/// One coil's dipole-term model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCoil")]
pub struct CoilSource {
    /// Magnetic center in the world frame [m].
    pub center: Vec3,
    /// Unit dipole orientation.
    pub axis: Vec3,
    /// Dipole moment per ampere [A·m²/A].
    pub strength: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoil {
    center: Vec3,
    axis: Vec3,
    strength: f64,
}

impl TryFrom<RawCoil> for CoilSource {
    type Error = Error;

    fn try_from(raw: RawCoil) -> Result<Self> {
        CoilSource::new(raw.center, raw.axis, raw.strength)
    }
}

impl CoilSource {
    /// Normalizes `axis`; rejects a zero axis and non-positive strength.
    pub fn new(center: Vec3, axis: Vec3, strength: f64) -> Result<Self> {
        let n = axis.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::param("coil axis must be a nonzero finite vector"));
        }
        if !(strength > 0.0) || !strength.is_finite() {
            return Err(Error::param(format!("coil strength must be positive, got {strength}")));
        }
        if !center.iter().all(|c| c.is_finite()) {
            return Err(Error::param("coil center must be finite"));
        }
        Ok(Self { center, axis: axis / n, strength })
    }

    fn offset(&self, p: &Vec3) -> Result<Vec3> {
        let r = p - self.center;
        let distance = r.norm();
        if !(distance > SINGULARITY_RADIUS) {
            return Err(Error::Singularity { distance });
        }
        Ok(r)
    }
}

/// The five independent gradient components
/// (∂bx/∂x, ∂bx/∂y, ∂bx/∂z, ∂by/∂y, ∂by/∂z) [T/m].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gradient5(pub SVector<f64, 5>);

impl Gradient5 {
    pub fn zeros() -> Self {
        Self(SVector::zeros())
    }

    /// Packs a field Jacobian `J[i][j] = ∂b_i/∂x_j`. Only the five independent
    /// entries are read.
    pub fn from_jacobian(j: &Mat3) -> Self {
        Self(SVector::<f64, 5>::new(j[(0, 0)], j[(0, 1)], j[(0, 2)], j[(1, 1)], j[(1, 2)]))
    }

    /// Full Jacobian rebuilt with the curl-free (symmetry) and divergence-free
    /// (zero trace) identities.
    pub fn jacobian(&self) -> Mat3 {
        let g = &self.0;
        Mat3::new(
            g[0],
            g[1],
            g[2],
            g[1],
            g[3],
            g[4],
            g[2],
            g[4],
            -(g[0] + g[3]),
        )
    }

    pub fn as_vector(&self) -> &SVector<f64, 5> {
        &self.0
    }
}

fn dipole_prefactor(src: &CoilSource, current: f64) -> f64 {
    MU0 * src.strength * current / (4.0 * PI)
}

/// Field of one coil at `p` for `current` amperes [T].
pub fn dipole_field(src: &CoilSource, p: &Vec3, current: f64) -> Result<Vec3> {
    let r = src.offset(p)?;
    Ok(field_from_offset(&src.axis, &r, dipole_prefactor(src, current)))
}

fn field_from_offset(axis: &Vec3, r: &Vec3, k: f64) -> Vec3 {
    let d2 = r.norm_squared();
    let d = d2.sqrt();
    let r_hat = r / d;
    (3.0 * axis.dot(&r_hat) * r_hat - axis) * (k / (d2 * d))
}

/// Analytic Jacobian `∂b_i/∂p_j` of [`dipole_field`] [T/m].
pub fn dipole_jacobian(src: &CoilSource, p: &Vec3, current: f64) -> Result<Mat3> {
    let r = src.offset(p)?;
    Ok(jacobian_from_offset(&src.axis, &r, dipole_prefactor(src, current)))
}

// b = k·(3(m·r)r/|r|⁵ − m/|r|³)
// ∂b_i/∂r_j = k·[3(m_j r_i + m_i r_j + (m·r)δ_ij)/|r|⁵ − 15(m·r) r_i r_j/|r|⁷]
fn jacobian_from_offset(axis: &Vec3, r: &Vec3, k: f64) -> Mat3 {
    let d2 = r.norm_squared();
    let d5 = d2 * d2 * d2.sqrt();
    let mr = axis.dot(r);
    let outer = r * axis.transpose() + axis * r.transpose();
    (outer * 3.0 + Mat3::identity() * (3.0 * mr) - r * r.transpose() * (15.0 * mr / d2)) * (k / d5)
}

/// Gradient of one coil's field at `p`, packed as [`Gradient5`].
pub fn dipole_gradient(src: &CoilSource, p: &Vec3, current: f64) -> Result<Gradient5> {
    dipole_jacobian(src, p, current).map(|j| Gradient5::from_jacobian(&j))
}

/// A calibration measurement: position, applied currents, measured field.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSample {
    pub position: Vec3,
    pub coil_currents: CurrentVector,
    pub measured_field: Vec3,
}

impl FieldSample {
    pub fn is_finite(&self) -> bool {
        self.position.iter().chain(self.coil_currents.iter()).chain(self.measured_field.iter()).all(|x| x.is_finite())
    }
}

/// Eight coil sources in current-vector order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldModel {
    pub coils: [CoilSource; NUM_COILS],
}

impl FieldModel {
    pub fn new(coils: [CoilSource; NUM_COILS]) -> Self {
        Self { coils }
    }

    /// Synthetic eight-coil layout: two rings of four coils on a sphere of
    /// radius 0.12 m (polar angles 45° and 100°, azimuths 0/90/180/270°), each
    /// axis pointing at the origin, 60 A·m² per ampere. Hovering the default
    /// levitator upright at the origin takes about 1.7 A in the busiest coil.
    pub fn default_layout() -> Self {
        Self::spherical_layout(0.12, [45.0, 100.0], 60.0)
    }

    /// Two rings of four coils on a sphere, axes pointing at the origin.
    pub fn spherical_layout(radius: f64, polar_deg: [f64; 2], strength: f64) -> Self {
        let coils = std::array::from_fn(|j| {
            let theta = polar_deg[j / 4].to_radians();
            let phi = (90.0 * (j % 4) as f64).to_radians();
            let center = radius * Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
            CoilSource::new(center, -center, strength).expect("valid layout")
        });
        Self { coils }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    /// Total field for a current vector [T].
    pub fn field(&self, p: &Vec3, currents: &CurrentVector) -> Result<Vec3> {
        self.coils.iter().zip(currents.iter()).try_fold(Vec3::zeros(), |acc, (c, &i)| Ok(acc + dipole_field(c, p, i)?))
    }

    /// Total field Jacobian `∂b_i/∂p_j` for a current vector [T/m].
    pub fn field_jacobian(&self, p: &Vec3, currents: &CurrentVector) -> Result<Mat3> {
        self.coils.iter().zip(currents.iter()).try_fold(Mat3::zeros(), |acc, (c, &i)| Ok(acc + dipole_jacobian(c, p, i)?))
    }

    /// Field and packed gradient for a current vector.
    pub fn field_and_gradient(&self, p: &Vec3, currents: &CurrentVector) -> Result<(Vec3, Gradient5)> {
        let mut b = Vec3::zeros();
        let mut j = Mat3::zeros();
        for (coil, &i) in self.coils.iter().zip(currents.iter()) {
            let r = coil.offset(p)?;
            let k = dipole_prefactor(coil, i);
            b += field_from_offset(&coil.axis, &r, k);
            j += jacobian_from_offset(&coil.axis, &r, k);
        }
        Ok((b, Gradient5::from_jacobian(&j)))
    }

    /// Column j holds (field; gradient) at `p` for 1 A in coil j.
    pub fn actuation_matrix(&self, p: &Vec3) -> Result<ActuationMatrix> {
        let mut a = ActuationMatrix::zeros();
        for (j, coil) in self.coils.iter().enumerate() {
            let r = coil.offset(p)?;
            let k = dipole_prefactor(coil, 1.0);
            let b = field_from_offset(&coil.axis, &r, k);
            let g = Gradient5::from_jacobian(&jacobian_from_offset(&coil.axis, &r, k));
            a.fixed_view_mut::<3, 1>(0, j).copy_from(&b);
            a.fixed_view_mut::<5, 1>(3, j).copy_from(&g.0);
        }
        Ok(a)
    }
}

impl Default for FieldModel {
    fn default() -> Self {
        Self::default_layout()
    }
}
