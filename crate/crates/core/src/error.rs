use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("operands live on different mode registries")]
    RegistryMismatch,

    #[error("structural error: {0}")]
    Structural(String),

    #[error("unknown mode `{0}`")]
    UnknownMode(String),

    #[error("photon number {degree} exceeds the configured cap {cap}")]
    PhotonCap { degree: u32, cap: u32 },

    #[error("matrix is not unitary: max |U^dag U - I| = {deviation:e}")]
    UnitarityViolation { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state has zero norm")]
    ZeroState,

    #[error("mode `{0}` was already measured earlier in the cascade")]
    ConsumedMode(String),

    #[error("strategy branch for outcome {outcome} after history {history:?} can never be reached")]
    UnreachableBranch { history: Vec<u32>, outcome: u32 },

    #[error("system states must be homogeneous of a common degree: {0}")]
    NotHomogeneous(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("auxiliary and system states share modes {0:?}")]
    OverlappingSupport(Vec<String>),

    #[error("size cap violated: {0}")]
    CapViolation(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("numerical failure: {0}")]
    Numeric(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Schema(e.to_string())
    }
}
