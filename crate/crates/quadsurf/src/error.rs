use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid complex: {0}")]
    InvalidComplex(String),

    #[error("disconnected surface: {0}")]
    Disconnected(String),

    #[error("unsupported on a complex with boundary: {0}")]
    NotClosed(String),

    #[error("degree mismatch: {0}")]
    Degree(String),

    #[error("complex mismatch: expected {expected} cells, got {got}")]
    Mismatch { expected: usize, got: usize },

    #[error("solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },

    #[error("form is not liftable to the quad-graph: {0}")]
    NotLiftable(String),

    #[error("nonzero holonomy {holonomy:.3e} around loop through vertex {vertex}")]
    Holonomy { vertex: usize, holonomy: f64 },

    #[error("form is not closed: max |dθ| = {0:.3e}")]
    NotClosedForm(f64),

    #[error("not a critical map: {} non-rhombic faces (first: {:?})", faces.len(), faces.first())]
    NotCritical { faces: Vec<(usize, String)> },

    #[error("singular face {face}: {reason}")]
    SingularFace { face: usize, reason: String },

    #[error("pole hit on edge direction angle {theta:.6}")]
    Pole { theta: f64 },

    #[error("series diverges: |λ| = {lambda:.6} ≥ 2/δ = {bound:.6}")]
    Divergent { lambda: f64, bound: f64 },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("ill-conditioned matrix: condition number {0:.3e}")]
    IllConditioned(f64),

    #[error("quadrature did not converge: successive estimates differ by {0:.3e}")]
    Quadrature(f64),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by the input (bad parameters, wrong kind of
    /// complex or form); false for numerical failures on valid input.
    pub fn is_input(&self) -> bool {
        !matches!(
            self,
            Error::NoConvergence { .. } | Error::Consistency(_) | Error::IllConditioned(_) | Error::Quadrature(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
