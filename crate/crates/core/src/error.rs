use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("mesh generation failed: non-positive Jacobian {jacobian:e} in cell {cell}")]
    DegenerateCell { cell: usize, jacobian: f64 },

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("inverted element: J = {jacobian:e} in cell {cell} at {point:?}")]
    InvertedElement {
        cell: usize,
        point: [f64; 3],
        jacobian: f64,
    },

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point {point:?} is not located in any source cell")]
    PointLocation { point: [f64; 3] },

    #[error("state blow-up: non-finite value at dof {dof} in {field}")]
    StateBlowUp { field: &'static str, dof: usize },

    #[error("diverged constitutive state: exponent {exponent:e} overflows")]
    DivergedState { exponent: f64 },

    #[error("singular Schur complement: |J_pd w| = {value:e}")]
    SingularSchur { value: f64 },

    #[error("open endocardial ring: {0}")]
    OpenRing(String),

    #[error("zero base area")]
    ZeroBaseArea,

    #[error("initialization failed: {0}")]
    Initialization(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("time step failure at t = {time:.6} s in {module}: {source}")]
    Step {
        time: f64,
        module: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn at_step(self, time: f64, module: &'static str) -> Self {
        Error::Step {
            time,
            module,
            source: Box::new(self),
        }
    }

    /// Walks through `Step` wrappers to the underlying cause.
    pub fn root(&self) -> &Error {
        match self {
            Error::Step { source, .. } => source.root(),
            e => e,
        }
    }
}
