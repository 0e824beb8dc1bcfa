use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate CFR: all values are zero")]
    DegenerateCfr,

    #[error("dictionary aliasing: delay_max {delay_max:e} s exceeds symbol time {symbol_time:e} s")]
    DictionaryAliasing { delay_max: f64, symbol_time: f64 },

    #[error("empty decomposition: no nonzero path coefficient")]
    EmptyDecomposition,

    #[error("lasso solver did not converge after {iterations} iterations (objective {objective:e}, kkt residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        objective: f64,
        residual: f64,
    },

    #[error("non-contiguous window: expected packet {expected}, found {found}")]
    NonContiguousWindow { expected: u64, found: u64 },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("training data is missing classes {0:?}")]
    MissingClasses(Vec<usize>),

    #[error("fusion needs at least one activity vector")]
    EmptyFusion,

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("truncated file: expected {expected} records, found {found}")]
    Truncated { expected: u64, found: u64 },

    #[error("duplicate record for packet {packet}, antenna {antenna}")]
    DuplicateRecord { packet: u64, antenna: u16 },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit code for the command-line tool: 2 for data errors, 3 for
    /// numeric failures. Usage errors (1) are raised by argument parsing.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergence { .. } | Error::DegenerateCfr | Error::EmptyDecomposition => 3,
            Error::Stage { source, .. } => source.exit_code(),
            Error::Invalid { .. } | Error::MissingClasses(_) => 1,
            _ => 2,
        }
    }
}
