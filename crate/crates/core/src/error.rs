use crate::game::{NodeId, Role};

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid topology: {0}")]
    InvalidTopology(&'static str),
    #[error("invalid game constants: {0}")]
    InvalidConstants(&'static str),
    #[error("shape mismatch: {0}")]
    Shape(&'static str),
    #[error("attribute value outside [0, w]")]
    AttributeOutOfRange,
    #[error("invalid game state: {0}")]
    InvalidState(&'static str),
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("unknown scenario id {0}, expected 1, 2 or 3")]
    UnknownScenario(u8),
    #[error("game is over")]
    GameOver,
    #[error("illegal {0:?} action")]
    IllegalAction(Role),
    #[error("empty input")]
    Empty,
    #[error("no legal action available")]
    NoLegalAction,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite value in layer `{layer}`")]
    NonFinite { layer: &'static str },
    #[error("batch contains truncated episodes")]
    TruncatedEpisode,
    #[error("batch is missing behavior log-probabilities")]
    MissingLogProbs,
    #[error("policy kind does not match the learning algorithm")]
    PolicyMismatch,
    #[error("unknown algorithm, expected reinforce, ppo or ppo-ar")]
    UnknownAlgo,
    #[error("{0:?} policy cannot act for this role")]
    WrongRole(Role),
}
