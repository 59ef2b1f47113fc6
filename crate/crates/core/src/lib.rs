pub mod classical;
pub mod ensemble;
pub mod error;
pub mod quantum;
pub mod stark;
pub mod sweep;
pub mod units;

pub use error::{Error, Result};
