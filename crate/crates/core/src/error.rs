use thiserror::Error;

use crate::protocol::BitId;

/// Errors raised by the simulator, the protocol engine and the oracle.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("qubit {qubit} out of range for a {num_qubits}-qubit state")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },

    #[error("control and target must differ (both are qubit {0})")]
    SameQubit(usize),

    #[error("qubit {0} listed more than once")]
    DuplicateQubit(usize),

    #[error("qubit subset must not be empty")]
    EmptySubset,

    #[error("branch {bit} on qubit {qubit} has probability {probability:e}")]
    ZeroProbabilityBranch {
        qubit: usize,
        bit: u8,
        probability: f64,
    },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("amplitude vector of length {0} is not a power of two")]
    InvalidLength(usize),

    #[error("state norm {0} is not 1")]
    NotNormalized(f64),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("gate matrix is not unitary")]
    NonUnitary,

    #[error("GHZ state needs at least 2 qubits, got {0}")]
    GhzTooSmall(usize),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("participant {participant} / instance {instance} does not hold a resource qubit")]
    NoSuchQubit { participant: usize, instance: usize },

    #[error("classical bit {0} was not delivered")]
    MissingClassicalBit(BitId),

    #[error("{total} qubits exceeds the cap of {cap}")]
    SizeCapExceeded { total: usize, cap: usize },

    #[error("branch {0} does not act as a signed permutation on the message basis")]
    NonPermutation(String),

    #[error("cannot parse {what}: {input:?}")]
    Parse { what: &'static str, input: String },
}

pub type Result<T> = std::result::Result<T, Error>;
