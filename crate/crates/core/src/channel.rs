//! BPSK over AWGN with the all-zero codeword.
//!
//! LLRs follow `log P(0|y) / P(1|y)`; bit 0 is sent as `+1`, so a correct
//! decision has a positive LLR. Doped blocks are shortened: they are never
//! transmitted, consume no noise, and enter the decoder pinned at `+llr_sat`.

use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::lifting::TannerGraph;
use crate::rng::keyed_rng;

/// Pinning constant for known bits.
pub const DEFAULT_LLR_SAT: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ChannelError {
    #[error("code rate {0} is outside (0, 1)")]
    InvalidRate(f64),
}

/// Noise standard deviation for a given `Eb/N0` in dB and code rate.
///
/// `ebn0_db = +inf` is the noiseless sentinel and yields `0`.
pub fn sigma_from_ebn0(ebn0_db: f64, rate: f64) -> Result<f64, ChannelError> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(ChannelError::InvalidRate(rate));
    }
    Ok((1.0 / (2.0 * rate * 10f64.powf(ebn0_db / 10.0))).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub ebn0_db: f64,
    /// Rate used for energy normalization.
    pub rate: f64,
    pub seed: u64,
    pub llr_sat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlrBlock {
    pub values: Vec<f64>,
}

/// A configured AWGN channel. Stateless: every block is keyed by
/// `(seed, frame, block)` and can be regenerated in isolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AwgnChannel {
    config: ChannelConfig,
    sigma: f64,
}

impl AwgnChannel {
    pub fn new(config: ChannelConfig) -> Result<Self, ChannelError> {
        let sigma = sigma_from_ebn0(config.ebn0_db, config.rate)?;
        Ok(AwgnChannel { config, sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.config
    }

    /// Channel LLRs of variable block `block` in `frame`.
    pub fn transmit_block(&self, frame: u64, block: usize, graph: &TannerGraph) -> LlrBlock {
        let n = graph.block_size();
        if graph.is_known_block(block) {
            return LlrBlock {
                values: vec![self.config.llr_sat; n],
            };
        }
        if self.sigma == 0.0 {
            return LlrBlock {
                values: vec![self.config.llr_sat; n],
            };
        }
        let mut rng = keyed_rng(self.config.seed, &[frame], block as u64);
        let scale = 2.0 / (self.sigma * self.sigma);
        let values = (0..n)
            .map(|_| {
                let noise: f64 = StandardNormal.sample(&mut rng);
                scale * (1.0 + self.sigma * noise)
            })
            .collect();
        LlrBlock { values }
    }
}
