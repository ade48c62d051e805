pub mod dimension;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod par;
pub mod pswf;
pub mod recovery;
pub mod rng;
pub mod sensing;
pub mod signal;

pub use error::{Error, Result};
