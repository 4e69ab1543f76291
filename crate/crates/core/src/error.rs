use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    /// A bit with `B_i = 0` reached an operation that divides by `B_i`.
    #[error("degenerate instance: bit {bit} appears in no clause (clean the instance first)")]
    DegenerateInstance { bit: usize },

    /// An intermediate state of a perturbative path has the same energy as the
    /// reference assignment.
    #[error("degenerate neighbor: flipping bits {flip_set:?} leaves the energy unchanged")]
    DegenerateNeighbor { flip_set: Vec<usize> },

    /// A proper subset of an Agree instance has zero cut energy.
    #[error("degenerate path: flipping bits {subset:?} costs no energy (disconnected instance)")]
    DegeneratePath { subset: Vec<usize> },

    #[error("eigensolver did not converge (best residual {residual:e})")]
    ConvergenceFailure { residual: f64 },

    #[error("hypotheses not met: {0}")]
    Inapplicable(String),

    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
