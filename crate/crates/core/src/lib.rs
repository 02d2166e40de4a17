//! Simulation, verification and visualization of controlled quantum
//! teleportation over multipartite GHZ resources.
//!
//! An n-qubit message held by one or more senders is teleported to a
//! receiver through n GHZ states shared by m participants. Every
//! intermediate participant acts as a controller: without its measurement
//! bit the receiver cannot reconstruct the message.
//!
//! - [`qstate`]: dense state vectors, density matrices and fidelity.
//! - [`resource`]: GHZ resources, message states and the qubit layout.
//! - [`protocol`]: the participant schedule, classical routing and corrections.
//! - [`verify`]: the exhaustive branch oracle and symbolic tables.
//! - [`viz`]: Hinton diagrams as SVG and text.

pub mod error;
pub mod protocol;
pub mod qstate;
pub mod resource;
pub mod verify;
pub mod viz;

pub use error::{Error, Result};
pub use protocol::{run_protocol, BitId, ProtocolConfig, ProtocolRun, Transcript};
pub use qstate::{fidelity, pure_fidelity, DensityMatrix, Gate, StateVector};
pub use resource::{random_message, MessageState, Mode, ResourceLayout};
