use thiserror::Error;

/// Errors produced by the interaction engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("player {player} out of range for a game with {n} players")]
    PlayerOutOfRange { player: usize, n: usize },

    #[error("player {0} has been removed from this game")]
    PlayerAbsent(usize),

    #[error("interaction requires two distinct players, got {0} twice")]
    SamePlayer(usize),

    #[error("exact enumeration infeasible: {players} active players exceeds the cap of {cap}")]
    ExactInfeasible { players: usize, cap: usize },

    #[error("games are limited to {max} players, got {n}")]
    TooManyPlayers { n: usize, max: usize },

    #[error("game must have at least one player")]
    NoPlayers,

    #[error("coalition must not be empty")]
    EmptyCoalition,

    #[error("coalition mask {mask:#x} has bits outside the {n} players of the game")]
    CoalitionOutOfRange { mask: u64, n: usize },

    #[error("player lists overlap at player {0}")]
    OverlappingPlayers(usize),

    #[error("games have different player counts ({left} vs {right})")]
    PlayerCountMismatch { left: usize, right: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("token {index} has zero norm")]
    ZeroNorm { index: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    Diverged { epoch: usize, loss: f64 },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: String, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
