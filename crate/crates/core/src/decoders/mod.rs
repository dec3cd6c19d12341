//! MAP, soft-MAP and recursive projection-aggregation decoders.

pub mod aggregate;
pub mod fht;
pub mod map;
pub mod ml;
pub mod rpa;

pub use aggregate::{aggregate_hard, aggregate_logsum, aggregate_soft};
pub use fht::{fht, fht_map_rm1};
pub use map::{info_bit_llrs, map_decode, soft_map};
pub use ml::MlDecoder;
pub use rpa::{soft_subrpa_decode, subrpa_decode, Aggregation, RpaDecoder, RpaVariant, DEFAULT_NMAX};

use crate::error::Result;
use crate::gf2::BinVector;

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub codeword: BinVector,
    /// Output LLRs of iterative decoders.
    pub final_llr: Option<Vec<f64>>,
    pub iterations_used: usize,
}

impl DecodeResult {
    pub fn hard(codeword: BinVector) -> Self {
        DecodeResult {
            codeword,
            final_llr: None,
            iterations_used: 0,
        }
    }
}

/// A decoder of one fixed code.
pub trait BlockDecoder: Sync {
    fn decode(&self, llr: &[f64]) -> Result<DecodeResult>;

    fn name(&self) -> &'static str;
}
