use thiserror::Error;

use crate::game::Coalition;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid player set: {0}")]
    InvalidPlayers(String),

    #[error(
        "exact enumeration over {n} players exceeds the limit of {limit}; \
         use Monte Carlo sampling (--samples M) instead"
    )]
    EnumerationGuard { n: usize, limit: usize },

    #[error("a dense payoff table over {n} players exceeds the limit of {limit}")]
    TableTooLarge { n: usize, limit: usize },

    #[error("coalition {0} appears more than once in the payoff table")]
    DuplicateCoalition(Coalition),

    #[error("payoff table has no entry for coalition {0} (enable zero-fill to default it to 0)")]
    MissingCoalition(Coalition),

    #[error("coalition {coalition} refers to player {index} but the game has {n} players")]
    PlayerOutOfRange {
        coalition: String,
        index: usize,
        n: usize,
    },

    #[error("payoff oracle returned a non-finite value for coalition {0}")]
    NonFinite(Coalition),

    #[error("sample count must be at least 1")]
    ZeroSamples,

    #[error("games are defined over different player sets ({0} vs {1} players)")]
    MismatchedPlayers(usize, usize),

    #[error("attention document: {0}")]
    Schema(String),

    #[error("layer {layer}, row {row}: attention sums to {sum}, more than 1e-4 away from 1")]
    RowSum { layer: usize, row: usize, sum: f64 },

    #[error("layer {layer}, row {row}, column {col}: attention weight {value} is negative or not finite")]
    BadWeight {
        layer: usize,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("players must sit at the input layer, got layer {0}")]
    PlayersNotAtInput(usize),

    #[error("sink target {target} is out of range for {n} tokens")]
    TargetOutOfRange { target: usize, n: usize },

    #[error("residual weight must lie in (0, 1), got {0}")]
    ResidualWeight(f64),

    #[error("{0}")]
    InvalidInput(String),

    #[error("cannot read {path}: {source}")]
    Read {
        path: std::path::PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn read(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Read {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit status for this error: 2 for size guards, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::EnumerationGuard { .. } | Error::TableTooLarge { .. } => 2,
            _ => 1,
        }
    }
}
