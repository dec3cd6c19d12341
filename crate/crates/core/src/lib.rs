pub mod code;
pub mod decoders;
pub mod error;
pub mod gf2;
pub mod llr;
pub mod plan;
pub mod projection;
pub mod pruning;
pub mod sim;

pub use error::{Error, Result};
