use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("adversary fault in round {round}: {reason}")]
    AdversaryFault { round: u64, reason: String },
    #[error("protocol fault in round {round}: {reason}")]
    ProtocolFault { round: u64, reason: String },
    #[error("round cap {cap} exceeded with {running} processes still running")]
    RoundCap { cap: u64, running: usize },
}
