pub mod agp;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod models;
pub mod optimize;
pub mod pauli;

pub use error::{Error, Result};
