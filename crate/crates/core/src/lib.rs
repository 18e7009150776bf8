//! Linear-optics simulation on creation-operator polynomials, conditional
//! photon counting cascades, and numerical checks of how auxiliary photons
//! affect the distinguishability of Fock-state sets.

pub mod cli;
pub mod discriminate;
pub mod error;
pub mod measurement;
pub mod network;
pub mod nogo;
pub mod oracle;
pub mod poly;
pub mod random;
pub mod report;

pub use error::{Error, Result};
pub use measurement::{condition, expand_by_mode, run_cascade, CascadeStrategy, ModeExpansion};
pub use network::LinearNetwork;
pub use poly::{AlgebraConfig, CreationPolynomial, ModeId, ModeRegistry};
