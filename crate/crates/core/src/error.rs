use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("mesh parse error at line {line}: {msg}")]
    MeshParse { line: usize, msg: String },

    #[error("duplicate vertices {first} and {second}")]
    DuplicateVertex { first: usize, second: usize },

    #[error("cell {cell} is inverted or degenerate (signed area {signed_area:e})")]
    InvertedCell { cell: usize, signed_area: f64 },

    #[error("edge ({a}, {b}) is shared by more than two cells")]
    NonManifoldEdge { a: usize, b: usize },

    #[error("degenerate mesh range: {0}")]
    DegenerateRange(String),

    #[error("invalid friction angles: phi = {phi}, delta = {delta} (need 0 <= delta <= phi < pi/2)")]
    InvalidFriction { phi: f64, delta: f64 },

    #[error("loss of hyperbolicity: {0}")]
    HyperbolicityLoss(String),

    #[error("non-finite value in {stage} at {location}")]
    NonFinite { stage: &'static str, location: String },

    #[error("time step {dt:e} fell below floor {floor:e} at t = {t}")]
    DtBelowFloor { dt: f64, floor: f64, t: f64 },

    #[error("step limit {0} reached before t_end")]
    StepLimit(usize),

    #[error("VTK parse error: {0}")]
    VtkParse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("scenario `{0}` has no exact solution")]
    NoOracle(String),

    #[error("{path}: {source}")]
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

    /// True for errors raised while advancing the solution, as opposed to
    /// problems with the input.
    pub fn is_solver_abort(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::DtBelowFloor { .. }
                | Error::StepLimit(_)
                | Error::HyperbolicityLoss(_)
        )
    }
}
