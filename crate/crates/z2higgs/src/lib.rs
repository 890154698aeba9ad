//! Desk-scale workbench for real-time dynamics of the (2+1)-D Z2-Higgs
//! lattice gauge theory: trivalent lattice construction, second-order
//! Trotter circuit compilation with gauge dynamical decoupling and Pauli
//! twirling, noisy statevector execution, Gauss-sector syndrome decoding,
//! operator decoherence renormalization, and bootstrap statistics.

pub mod analytics;
pub mod compiler;
pub mod correction;
pub mod experiments;
pub mod io;
pub mod lattice;
pub mod mitigation;
pub mod model;
pub mod pauli;
pub mod sim;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown node id {0}")]
    UnknownNode(usize),
    #[error("unknown edge id {0}")]
    UnknownEdge(usize),
    #[error("lattice is not 2-colorable: nodes {0} and {1} conflict")]
    BipartitionConflict(usize, usize),
    #[error("invalid string path: {0}")]
    InvalidPath(String),
    #[error("register size {got} exceeds the configured qubit cap {cap}")]
    RegisterOverCap { got: usize, cap: usize },
    #[error("register size mismatch: state has {state} qubits, operand needs {operand}")]
    RegisterMismatch { state: usize, operand: usize },
    #[error("evolution did not converge to tolerance {tol}")]
    NoConvergence { tol: f64 },
    #[error("bending frequency undefined at g = 0")]
    BendingAtZeroG,
    #[error("effective plaquette coupling undefined at m = 0")]
    PlaquetteAtZeroMass,
    #[error("both couplings are zero")]
    ZeroCouplings,
    #[error("circuit has an odd number of layers ({0}); mirror needs an even count")]
    OddLayerCount(usize),
    #[error("bitstring length {got} does not match register size {want}")]
    BitstringLength { got: usize, want: usize },
    #[error("invalid gate location {0}")]
    InvalidLocation(usize),
    #[error("observable is not diagonal (contains {0} letters)")]
    NonDiagonalObservable(char),
    #[error("post-selection threshold {min_keep} exceeds total shot count {total}")]
    PostselectThreshold { min_keep: usize, total: usize },
    #[error("calibration factor {factor:.4} at or below threshold {threshold:.4}: too noisy to mitigate")]
    MitigationRefused { factor: f64, threshold: f64 },
    #[error("empty sample set")]
    EmptySamples,
    #[error("bootstrap needs at least 100 resamples, got {0}")]
    TooFewResamples(usize),
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, Error>;
