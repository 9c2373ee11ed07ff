use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("bad parameter: {0}")]
    Parameter(String),
    #[error("beyond capability: {0}")]
    Capability(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("wrong mode: {0}")]
    Mode(String),
    #[error("incomplete strategy: player {player} has no message at node {node}")]
    IncompleteStrategy { player: usize, node: usize },
    #[error("player {player} does not speak at node {node}")]
    NotASpeaker { player: usize, node: usize },
    #[error("reconstruction failed: {0}")]
    Reconstruction(String),
    #[error("taxation violation: {0}")]
    Taxation(String),
    #[error("infeasible allocation: {0}")]
    Infeasible(String),
    #[error("generation failed: {0}")]
    Generation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Capability(_) | Error::Budget(_) => 3,
            _ => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
