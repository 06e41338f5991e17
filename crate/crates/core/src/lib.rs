//! Time-discretized simulation of cooperative vehicle platoons under sudden
//! braking and packet losses, with a guaranteed bound on the error of every
//! computed inter-vehicle distance.
//!
//! The platoon is a linear system whose inputs are piecewise constant between
//! communication instants. Between simulation instants the state is propagated
//! exactly with a matrix exponential, and the instants themselves are spaced
//! by one of two step rules so that no distance can drift by more than `α`
//! between consecutive samples. The sampled minimum distance therefore
//! brackets the continuous-time minimum to within `α`.

pub mod braking;
pub mod campaign;
pub mod comms;
pub mod error;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod scenario;
pub mod simulator;
pub mod stepper;

pub use error::{Error, Result};
