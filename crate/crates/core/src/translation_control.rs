//! Translational control: each world axis is a double integrator discretized
//! by zero-order hold and regulated by a discrete LQR designed in a normalized
//! state space, plus integral action and gravity feedforward.

use nalgebra::{Complex, DMatrix, Matrix2, RowVector2, SMatrix, SVector, Vector2};

use crate::magnetics::LevitatorParams;
use crate::{Error, Result, Vec3};

/// ZOH model of one translational axis, state (position, velocity).
#[derive(Clone, Debug, PartialEq)]
pub struct AxisModel {
    pub a: Matrix2<f64>,
    pub b: Vector2<f64>,
    pub ts: f64,
    pub mass: f64,
}

/// Exact zero-order-hold discretization of ẍ = u/m.
pub fn discretize_axis(mass: f64, ts: f64) -> Result<AxisModel> {
    if !(mass > 0.0) || !(ts > 0.0) {
        return Err(Error::param(format!("axis model needs mass > 0 and Ts > 0, got m={mass}, Ts={ts}")));
    }
    Ok(AxisModel {
        a: Matrix2::new(1.0, ts, 0.0, 1.0),
        b: Vector2::new(ts * ts / (2.0 * mass), ts / mass),
        ts,
        mass,
    })
}

pub const DARE_TOLERANCE: f64 = 1e-12;
pub const DARE_MAX_ITERATIONS: usize = 1_000_000;

fn riccati_map<const N: usize>(
    a: &SMatrix<f64, N, N>,
    b: &SVector<f64, N>,
    q: &SMatrix<f64, N, N>,
    r: f64,
    p: &SMatrix<f64, N, N>,
) -> SMatrix<f64, N, N> {
    let atpb = a.transpose() * (p * b);
    let s = r + b.dot(&(p * b));
    q + a.transpose() * p * a - atpb * atpb.transpose() / s
}

/// Solves P = Q + AᵀPA − AᵀPB(r + BᵀPB)⁻¹BᵀPA for a single input by
/// fixed-point iteration from P₀ = Q.
pub fn solve_dare<const N: usize>(
    a: &SMatrix<f64, N, N>,
    b: &SVector<f64, N>,
    q: &SMatrix<f64, N, N>,
    r: f64,
) -> Result<SMatrix<f64, N, N>> {
    if !(r > 0.0) {
        return Err(Error::param(format!("input cost must be positive, got {r}")));
    }
    if (q - q.transpose()).amax() > 1e-12 * q.amax() {
        return Err(Error::param("state cost must be symmetric"));
    }
    let q_dyn = DMatrix::from_column_slice(N, N, q.as_slice());
    if q_dyn.symmetric_eigenvalues().min() < -1e-12 * q.amax() {
        return Err(Error::param("state cost must be positive semidefinite"));
    }
    let mut p = *q;
    for _ in 0..DARE_MAX_ITERATIONS {
        let next = riccati_map(a, b, q, r, &p);
        let next = (next + next.transpose()) * 0.5;
        let delta = (next - p).norm();
        p = next;
        if !p.iter().all(|x| x.is_finite()) {
            break;
        }
        if delta <= DARE_TOLERANCE * p.norm() {
            return Ok(p);
        }
    }
    Err(Error::DareNotConverged { iterations: DARE_MAX_ITERATIONS })
}

/// K = (r + BᵀPB)⁻¹ BᵀPA.
pub fn lqr_gain<const N: usize>(a: &SMatrix<f64, N, N>, b: &SVector<f64, N>, r: f64, p: &SMatrix<f64, N, N>) -> SMatrix<f64, 1, N> {
    (b.transpose() * p * a) / (r + b.dot(&(p * b)))
}

/// ‖P − riccati(P)‖_F / ‖P‖_F (absolute when P = 0).
pub fn dare_residual<const N: usize>(
    a: &SMatrix<f64, N, N>,
    b: &SVector<f64, N>,
    q: &SMatrix<f64, N, N>,
    r: f64,
    p: &SMatrix<f64, N, N>,
) -> f64 {
    let diff = (p - riccati_map(a, b, q, r, p)).norm();
    let scale = p.norm();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// One axis' LQR design and its normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct LqrDesign {
    pub model: AxisModel,
    /// State cost in normalized coordinates.
    pub q_bar: Matrix2<f64>,
    /// Input cost in normalized coordinates.
    pub rho: f64,
    /// x = Tx·x̄
    pub tx: Matrix2<f64>,
    /// u = Tu·ū
    pub tu: f64,
    pub p_bar: Matrix2<f64>,
    pub k_bar: RowVector2<f64>,
    /// Physical gain, force = K·(x_des − x).
    pub k: RowVector2<f64>,
    /// Relative DARE residual in normalized coordinates.
    pub dare_residual: f64,
}

impl LqrDesign {
    pub fn closed_loop(&self) -> Matrix2<f64> {
        self.model.a - self.model.b * self.k
    }

    pub fn closed_loop_eigenvalues(&self) -> [Complex<f64>; 2] {
        let ev = self.closed_loop().complex_eigenvalues();
        [ev[0], ev[1]]
    }

    pub fn spectral_radius(&self) -> f64 {
        self.closed_loop_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Design with Tx = diag(ξ, 5ξ) and Tu = 5·m·ξ.
pub fn design_axis_lqr(model: &AxisModel, q_bar: &Matrix2<f64>, rho: f64, xi: f64) -> Result<LqrDesign> {
    if !(xi > 0.0) {
        return Err(Error::param(format!("normalization length must be positive, got {xi}")));
    }
    let tx = Matrix2::new(xi, 0.0, 0.0, 5.0 * xi);
    let tu = 5.0 * model.mass * xi;
    design_axis_lqr_scaled(model, q_bar, rho, &tx, tu)
}

/// Design in coordinates x̄ = Tx⁻¹x, ū = u/Tu, then K = Tu·K̄·Tx⁻¹.
pub fn design_axis_lqr_scaled(model: &AxisModel, q_bar: &Matrix2<f64>, rho: f64, tx: &Matrix2<f64>, tu: f64) -> Result<LqrDesign> {
    let tx_inv = tx.try_inverse().ok_or_else(|| Error::param("state normalization Tx must be invertible"))?;
    if tu == 0.0 || !tu.is_finite() {
        return Err(Error::param("input normalization Tu must be nonzero"));
    }
    let a_bar = tx_inv * model.a * tx;
    let b_bar = tx_inv * model.b * tu;
    let p_bar = solve_dare(&a_bar, &b_bar, q_bar, rho)?;
    let k_bar = lqr_gain(&a_bar, &b_bar, rho, &p_bar);
    let k = k_bar * tx_inv * tu;
    Ok(LqrDesign {
        model: model.clone(),
        q_bar: *q_bar,
        rho,
        tx: *tx,
        tu,
        p_bar,
        k_bar,
        k,
        dare_residual: dare_residual(&a_bar, &b_bar, q_bar, rho, &p_bar),
    })
}

/// Per-axis LQR costs, normalization and integral gains.
#[derive(Clone, Debug, PartialEq)]
pub struct TranslationGains {
    /// Normalized state cost per axis (x, y, z).
    pub q: [Matrix2<f64>; 3],
    pub rho: f64,
    /// Nominal displacement ξ used for normalization [m].
    pub xi: f64,
    /// Integral gains (kIx, kIy, kIz) [N/(m·s)].
    pub ki: Vec3,
    /// Sampling time the LQR is designed for; `None` uses the controller period.
    pub design_period: Option<f64>,
}

impl Default for TranslationGains {
    fn default() -> Self {
        Self {
            q: [
                Matrix2::new(22.0, 0.0, 0.0, 7.0),
                Matrix2::new(15.0, 0.0, 0.0, 7.0),
                Matrix2::new(30.0, 0.0, 0.0, 10.0),
            ],
            rho: 0.1,
            xi: 5e-3,
            ki: Vec3::repeat(10.0),
            design_period: None,
        }
    }
}

/// Accumulated ∫(p_des − p) dt per axis.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct TranslationIntegral(pub Vec3);

#[derive(Clone, Debug, PartialEq)]
pub struct TranslationController {
    pub designs: [LqrDesign; 3],
    pub ki: Vec3,
    pub mass: f64,
    pub gravity: f64,
    /// Per-axis bound on the integral force [N].
    pub integral_force_limit: f64,
}

impl TranslationController {
    /// Designs the three axes at `gains.design_period` (or `ts`).
    pub fn new(gains: &TranslationGains, params: &LevitatorParams, gravity: f64, ts: f64) -> Result<Self> {
        params.validate()?;
        if gains.ki.iter().any(|k| !(*k >= 0.0)) {
            return Err(Error::param("translation integral gains must be non-negative"));
        }
        let model = discretize_axis(params.mass, gains.design_period.unwrap_or(ts))?;
        let designs = [
            design_axis_lqr(&model, &gains.q[0], gains.rho, gains.xi)?,
            design_axis_lqr(&model, &gains.q[1], gains.rho, gains.xi)?,
            design_axis_lqr(&model, &gains.q[2], gains.rho, gains.xi)?,
        ];
        Ok(Self::from_designs(designs, gains.ki, params.mass, gravity))
    }

    pub fn from_designs(designs: [LqrDesign; 3], ki: Vec3, mass: f64, gravity: f64) -> Self {
        Self { designs, ki, mass, gravity, integral_force_limit: 0.5 * mass * gravity.abs() }
    }

    /// One controller sample: world force [N] and the advanced integral.
    pub fn compute(
        &self,
        p: &Vec3,
        v: &Vec3,
        p_des: &Vec3,
        v_des: &Vec3,
        integral: &TranslationIntegral,
        dt: f64,
    ) -> (Vec3, TranslationIntegral) {
        let mut force = Vec3::new(0.0, 0.0, self.mass * self.gravity);
        let mut acc = integral.0;
        for axis in 0..3 {
            let err = Vector2::new(p_des[axis] - p[axis], v_des[axis] - v[axis]);
            acc[axis] += err.x * dt;
            let ki = self.ki[axis];
            if ki > 0.0 {
                let bound = self.integral_force_limit / ki;
                acc[axis] = acc[axis].clamp(-bound, bound);
            }
            force[axis] += (self.designs[axis].k * err)[0] + ki * acc[axis];
        }
        (force, TranslationIntegral(acc))
    }
}

/// Free-function form of [`TranslationController::compute`].
pub fn translation_control(
    controller: &TranslationController,
    state: (&Vec3, &Vec3),
    setpoint: (&Vec3, &Vec3),
    integral: &TranslationIntegral,
    dt: f64,
) -> (Vec3, TranslationIntegral) {
    controller.compute(state.0, state.1, setpoint.0, setpoint.1, integral, dt)
}
