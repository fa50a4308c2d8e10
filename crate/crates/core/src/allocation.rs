//! Current allocation: minimum-norm currents for a reduced wrench, then a
//! per-coil clamp to the driver limit.

use nalgebra::{SMatrix, Vector2, Vector5};
use serde::{Deserialize, Serialize};

use crate::fieldmodel::FieldModel;
use crate::magnetics::{reduced_allocation_matrix, LevitatorParams, ReducedAllocationMatrix, ReducedWrench};
use crate::{CurrentVector, Error, Mat3, Result, Vec3, NUM_COILS};

/// Smallest accepted ratio σ_min/σ_max of the reduced allocation matrix.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// One-sided Jacobi SVD of the tall 8×5 matrix A: returns (A·V, V) with the
/// columns of A·V mutually orthogonal, so A = U Σ Vᵀ with σ_j = |(AV)_j|.
///
/// nalgebra's bidiagonal SVD can stop early with a visibly wrong factorization
/// when singular values come in near-equal pairs, which symmetric coil layouts
/// produce. Jacobi rotations converge to full accuracy regardless.
fn jacobi_svd(a: &SMatrix<f64, 8, 5>) -> (SMatrix<f64, 8, 5>, SMatrix<f64, 5, 5>) {
    let mut a = *a;
    let mut v = SMatrix::<f64, 5, 5>::identity();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..5 {
            for q in p + 1..5 {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                a.rotate(p, q, c, s);
                v.rotate(p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    (a, v)
}

const JACOBI_MAX_SWEEPS: usize = 60;

trait RotateColumns {
    fn rotate(&mut self, p: usize, q: usize, c: f64, s: f64);
}

impl<const R: usize> RotateColumns for SMatrix<f64, R, 5> {
    fn rotate(&mut self, p: usize, q: usize, c: f64, s: f64) {
        for k in 0..R {
            let (x, y) = (self[(k, p)], self[(k, q)]);
            self[(k, p)] = c * x - s * y;
            self[(k, q)] = s * x + c * y;
        }
    }
}

/// Singular values of Ñ, descending.
pub fn singular_values(n_tilde: &ReducedAllocationMatrix) -> [f64; 5] {
    let (av, _) = jacobi_svd(&n_tilde.transpose());
    let mut sigma = [0.0; 5];
    for (j, s) in sigma.iter_mut().enumerate() {
        *s = av.column(j).norm();
    }
    sigma.sort_by(|a, b| b.total_cmp(a));
    sigma
}

/// Moore–Penrose pseudoinverse (8×5) of a full-row-rank reduced allocation matrix.
pub fn pseudoinverse(n_tilde: &ReducedAllocationMatrix) -> Result<SMatrix<f64, 8, 5>> {
    // Ñᵀ = U Σ Vᵀ with U Σ = Ñᵀ V, so Ñ⁺ = U Σ⁻¹ Vᵀ = Σ_j (ÑᵀV)_j v_jᵀ / σ_j².
    let (av, v) = jacobi_svd(&n_tilde.transpose());
    let sigma: [f64; 5] = std::array::from_fn(|j| av.column(j).norm());
    let max = sigma.iter().copied().fold(0.0, f64::max);
    let min = sigma.iter().copied().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || !(min > RANK_TOLERANCE * max) {
        let mut singular_values = sigma.to_vec();
        singular_values.sort_by(|a, b| b.total_cmp(a));
        return Err(Error::RankDeficient { singular_values });
    }
    let mut pinv = SMatrix::<f64, 8, 5>::zeros();
    for (j, s) in sigma.iter().enumerate() {
        pinv += av.column(j) * v.column(j).transpose() / (s * s);
    }
    Ok(pinv)
}

/// i = Ñ⁺ w, the minimum-norm exact solution of Ñ i = w.
pub fn solve_currents(n_tilde: &ReducedAllocationMatrix, wrench: &ReducedWrench) -> Result<CurrentVector> {
    Ok(pseudoinverse(n_tilde)? * wrench.as_vector())
}

/// ‖Ñ i − w‖ / ‖w‖ (absolute when w = 0).
pub fn wrench_residual(n_tilde: &ReducedAllocationMatrix, currents: &CurrentVector, wrench: &ReducedWrench) -> f64 {
    let w: Vector5<f64> = wrench.as_vector();
    let diff = (n_tilde * currents - w).norm();
    let scale = w.norm();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Currents that hold the levitator at pose (p, R) against gravity with zero
/// roll/pitch torque.
pub fn hover_currents(model: &FieldModel, params: &LevitatorParams, p: &Vec3, r: &Mat3, gravity: f64) -> Result<CurrentVector> {
    let n = reduced_allocation_matrix(model, r, p, &params.dipole_body)?;
    let w = ReducedWrench::new(Vector2::zeros(), Vec3::new(0.0, 0.0, params.mass * gravity));
    solve_currents(&n, &w)
}

/// Which coils were clamped, bit j for coil j + 1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SaturationFlags(pub u8);

impl SaturationFlags {
    pub fn is_set(&self, coil: usize) -> bool {
        self.0 & (1 << coil) != 0
    }

    pub fn any(&self) -> bool {
        self.0 != 0
    }

    pub fn count(&self) -> u32 {
        self.0.count_ones()
    }
}

/// Clamps each current to [−limit, limit].
pub fn saturate(currents: &CurrentVector, limit: f64) -> (CurrentVector, SaturationFlags) {
    debug_assert!(limit > 0.0);
    let mut flags = 0u8;
    let mut out = *currents;
    for j in 0..NUM_COILS {
        if out[j].abs() > limit {
            out[j] = out[j].clamp(-limit, limit);
            flags |= 1 << j;
        }
    }
    (out, SaturationFlags(flags))
}
