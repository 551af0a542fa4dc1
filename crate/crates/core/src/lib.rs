//! Spatially coupled LDPC codes with check- and variable-node doping,
//! sliding window decoding with window extension, and seeded Monte Carlo
//! simulation of the resulting error-propagation behavior.

pub mod channel;
pub mod cli;
pub mod config;
pub mod decoder;
pub mod lifting;
pub mod protograph;
pub mod rng;
pub mod simulator;

pub use channel::{sigma_from_ebn0, AwgnChannel, ChannelConfig, LlrBlock, DEFAULT_LLR_SAT};
pub use decoder::{
    decode_chain, decode_chain_with_extension, flood_decode, BlockDecision, DecoderError,
    LlrSupplier, UpdateRule, WindowConfig, WindowDecoder,
};
pub use lifting::{lift, verify_lift, LiftMethod, LiftSpec, TannerGraph};
pub use protograph::{
    build_chain, degree_profile, design_rate, BaseMatrix, CoupledChain, DopingKind, DopingSpec,
    EdgeSpreading, RateReport,
};
