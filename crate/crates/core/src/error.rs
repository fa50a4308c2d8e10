use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("field evaluation at {distance:e} m from a coil center (singular below 1e-6 m)")]
    Singularity { distance: f64 },

    #[error("matrix is not a rotation: |RᵀR - I| = {orthogonality:e}, det = {det}")]
    InvalidRotation { orthogonality: f64, det: f64 },

    #[error("dipole moment must lie along body z for the reduced maps, got {0:?}")]
    DipoleNotAxial([f64; 3]),

    #[error("allocation matrix is rank deficient, singular values {singular_values:?}")]
    RankDeficient { singular_values: Vec<f64> },

    #[error("Riccati iteration did not converge after {iterations} iterations")]
    DareNotConverged { iterations: usize },

    #[error("currents do not balance the levitator: force residual {residual:e} N")]
    NotForceBalanced { residual: f64 },

    #[error("hover at the start pose needs {required:.3} A, limit is {limit} A")]
    HoverInfeasible { required: f64, limit: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
