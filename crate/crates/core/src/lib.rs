//! Parity-encoded spin systems as error-correcting codes: code construction,
//! noise channels, decoders, Boltzmann samplers and experiment drivers.

pub mod channels;
pub mod decoders;
pub mod error;
pub mod harness;
pub mod oracle;
pub mod parity_code;
pub mod sampler;

pub use error::{Error, Result};
