pub mod bench;
pub mod error;
pub mod exp;
pub mod lds;
pub mod net;
pub mod rng;
pub mod train;
pub mod variation;

pub use error::{Error, Result};
