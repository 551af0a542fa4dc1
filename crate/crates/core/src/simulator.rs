//! Monte Carlo campaigns.
//!
//! Every frame is an independent work unit keyed by
//! `(master_seed, snr_index, frame_index)`. Frames are run in fixed-size
//! chunks on a worker pool and folded into the metrics strictly in frame
//! order, so the output never depends on the number of workers.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{AwgnChannel, ChannelConfig, ChannelError};
use crate::decoder::{decode_chain_with_extension, DecoderError, WindowConfig};
use crate::lifting::{lift, LiftError, LiftSpec, TannerGraph};
use crate::protograph::{design_rate, rate_to_f64, CoupledChain};
use crate::rng::derive_seed;

/// Frames dispatched per scheduling round.
const FRAME_CHUNK: usize = 16;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Lift(#[from] LiftError),
    #[error(transparent)]
    Decoder(#[from] DecoderError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("no frame matches the filter")]
    NoMatchingFrames,
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BurstMode {
    /// Channel LLRs replaced by zero.
    Erase,
    /// Channel LLRs negated.
    Flip,
}

/// Channel corruption injected into a run of blocks of every frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BurstSpec {
    pub start_block: usize,
    pub length: usize,
    pub mode: BurstMode,
}

impl BurstSpec {
    pub fn end(&self) -> usize {
        self.start_block + self.length
    }

    fn apply(&self, block: usize, llrs: &mut [f64]) {
        if !(self.start_block..self.end()).contains(&block) {
            return;
        }
        match self.mode {
            BurstMode::Erase => llrs.iter_mut().for_each(|x| *x = 0.0),
            BurstMode::Flip => llrs.iter_mut().for_each(|x| *x = -*x),
        }
    }
}

/// A code and decoder, fixed for a whole campaign.
#[derive(Debug, Clone)]
pub struct Simulation {
    chain: Arc<CoupledChain>,
    graph: Arc<TannerGraph>,
    window: WindowConfig,
    rate: f64,
}

impl Simulation {
    /// Lifts the chain. `rate` defaults to the doped design rate.
    pub fn new(
        chain: CoupledChain,
        lift_spec: &LiftSpec,
        window: WindowConfig,
        rate: Option<f64>,
    ) -> Result<Self, SimError> {
        window.validate()?;
        let graph = lift(&chain, lift_spec)?;
        let rate = rate.unwrap_or_else(|| rate_to_f64(design_rate(&chain).doped));
        Ok(Simulation {
            chain: Arc::new(chain),
            graph: Arc::new(graph),
            window,
            rate,
        })
    }

    pub fn chain(&self) -> &CoupledChain {
        &self.chain
    }

    pub fn graph(&self) -> &TannerGraph {
        &self.graph
    }

    pub fn window(&self) -> &WindowConfig {
        &self.window
    }

    /// Rate used to normalize `Eb/N0`.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Same code, different decoder settings.
    pub fn with_window(&self, window: WindowConfig) -> Result<Self, SimError> {
        window.validate()?;
        Ok(Simulation {
            window,
            ..self.clone()
        })
    }

    fn channel(
        &self,
        ebn0_db: f64,
        snr_index: usize,
        master_seed: u64,
    ) -> Result<AwgnChannel, SimError> {
        Ok(AwgnChannel::new(ChannelConfig {
            ebn0_db,
            rate: self.rate,
            seed: derive_seed(master_seed, &[snr_index as u64]),
            llr_sat: self.window.llr_sat,
        })?)
    }

    /// Decodes one frame against the all-zero codeword.
    pub fn run_frame(
        &self,
        ebn0_db: f64,
        snr_index: usize,
        master_seed: u64,
        frame: usize,
        burst: Option<&BurstSpec>,
        ep_run_threshold: usize,
    ) -> Result<FrameResult, SimError> {
        let channel = self.channel(ebn0_db, snr_index, master_seed)?;
        let graph = &*self.graph;
        let mut supplier = |b: usize| {
            let mut llrs = channel.transmit_block(frame as u64, b, graph).values;
            if let Some(burst) = burst {
                if !graph.is_known_block(b) {
                    burst.apply(b, &mut llrs);
                }
            }
            llrs
        };
        let decisions = decode_chain_with_extension(graph, &self.window, &mut supplier)?;

        let n = decisions.len();
        let mut result = FrameResult {
            frame,
            per_block_bit_errors: Vec::with_capacity(n),
            block_error_flags: Vec::with_capacity(n),
            window_sizes: Vec::with_capacity(n),
            avg_llrs: Vec::with_capacity(n),
            bits: 0,
            blocks: 0,
            is_error_propagation: false,
        };
        for d in &decisions {
            let errors = d.bit_errors() as u64;
            result.per_block_bit_errors.push(errors);
            result.block_error_flags.push(errors > 0);
            result.window_sizes.push(d.window_size_at_decode);
            result.avg_llrs.push(d.avg_llr);
            // Doped blocks carry no transmitted bits.
            if !graph.is_known_block(d.block) {
                result.bits += d.bits.len() as u64;
                result.blocks += 1;
            }
        }
        result.is_error_propagation = detect_error_propagation(&result, ep_run_threshold);
        Ok(result)
    }
}

/// Outcome of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    pub frame: usize,
    pub per_block_bit_errors: Vec<u64>,
    pub block_error_flags: Vec<bool>,
    pub window_sizes: Vec<usize>,
    pub avg_llrs: Vec<f64>,
    /// Transmitted (non-doped) bits.
    pub bits: u64,
    /// Transmitted (non-doped) blocks.
    pub blocks: u64,
    pub is_error_propagation: bool,
}

impl FrameResult {
    pub fn bit_errors(&self) -> u64 {
        self.per_block_bit_errors.iter().sum()
    }

    pub fn block_errors(&self) -> u64 {
        self.block_error_flags.iter().filter(|&&f| f).count() as u64
    }

    pub fn last_error_block(&self) -> Option<usize> {
        self.block_error_flags.iter().rposition(|&f| f)
    }

    pub fn first_error_block(&self) -> Option<usize> {
        self.block_error_flags.iter().position(|&f| f)
    }
}

/// True iff the frame has at least `run_threshold` consecutive block errors.
pub fn detect_error_propagation(result: &FrameResult, run_threshold: usize) -> bool {
    longest_error_run(&result.block_error_flags) >= run_threshold.max(1)
}

pub fn longest_error_run(flags: &[bool]) -> usize {
    let mut best = 0;
    let mut run = 0;
    for &f in flags {
        run = if f { run + 1 } else { 0 };
        best = best.max(run);
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    #[serde(rename = "snr_db")]
    pub snr_points_db: Vec<f64>,
    pub frames: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Stop an SNR point once this many block errors have been seen.
    /// Written as `0` when unlimited.
    #[serde(default = "default_max_block_errors", with = "zero_is_none")]
    pub max_block_errors: Option<u64>,
    /// Consecutive block errors that make a frame an error-propagation frame.
    #[serde(default = "default_ep_run_threshold")]
    pub ep_run_threshold: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burst: Option<BurstSpec>,
}

fn default_max_block_errors() -> Option<u64> {
    Some(200)
}

fn default_ep_run_threshold() -> usize {
    5
}

mod zero_is_none {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<u64>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(v.unwrap_or(0))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
        Ok(Some(u64::deserialize(d)?).filter(|&n| n > 0))
    }
}

impl CampaignConfig {
    pub fn new(snr_points_db: Vec<f64>, frames: usize, master_seed: u64) -> Self {
        CampaignConfig {
            snr_points_db,
            frames,
            master_seed,
            max_block_errors: default_max_block_errors(),
            ep_run_threshold: default_ep_run_threshold(),
            burst: None,
        }
    }
}

/// Aggregated counters for one SNR point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SnrMetrics {
    pub snr_db: f64,
    pub frames: u64,
    pub frame_errors: u64,
    pub bits: u64,
    pub bit_errors: u64,
    pub blocks: u64,
    pub block_errors: u64,
    pub ep_frames: u64,
    /// Sum of window sizes over every decoded block, doped ones included.
    pub window_sum: u64,
    pub decoded_blocks: u64,
}

impl SnrMetrics {
    fn add(&mut self, r: &FrameResult) {
        self.frames += 1;
        self.frame_errors += u64::from(r.block_errors() > 0);
        self.bits += r.bits;
        self.bit_errors += r.bit_errors();
        self.blocks += r.blocks;
        self.block_errors += r.block_errors();
        self.ep_frames += u64::from(r.is_error_propagation);
        self.window_sum += r.window_sizes.iter().map(|&w| w as u64).sum::<u64>();
        self.decoded_blocks += r.window_sizes.len() as u64;
    }

    pub fn ber(&self) -> f64 {
        ratio(self.bit_errors, self.bits)
    }

    pub fn bler(&self) -> f64 {
        ratio(self.block_errors, self.blocks)
    }

    pub fn fer(&self) -> f64 {
        ratio(self.frame_errors, self.frames)
    }

    pub fn mean_window_size(&self) -> f64 {
        ratio(self.window_sum, self.decoded_blocks)
    }

    pub fn bler_ci95(&self) -> (f64, f64) {
        wilson_interval(self.block_errors, self.blocks, Z_95)
    }

    pub fn ber_ci95(&self) -> (f64, f64) {
        wilson_interval(self.bit_errors, self.bits, Z_95)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignOutput {
    pub metrics: Vec<SnrMetrics>,
    /// Per SNR point, the frames that were folded into the metrics.
    pub frames: Vec<Vec<FrameResult>>,
}

/// Runs every SNR point of the campaign on `workers` threads.
pub fn run_campaign(
    sim: &Simulation,
    campaign: &CampaignConfig,
    workers: usize,
) -> Result<CampaignOutput, SimError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| SimError::Pool(e.to_string()))?;
    let mut out = CampaignOutput {
        metrics: Vec::new(),
        frames: Vec::new(),
    };
    for (snr_index, &snr) in campaign.snr_points_db.iter().enumerate() {
        let mut metrics = SnrMetrics {
            snr_db: snr,
            ..Default::default()
        };
        let mut kept = Vec::new();
        let mut next = 0;
        'chunks: while next < campaign.frames {
            let hi = (next + FRAME_CHUNK).min(campaign.frames);
            let results: Vec<FrameResult> = pool.install(|| {
                (next..hi)
                    .into_par_iter()
                    .map(|f| {
                        sim.run_frame(
                            snr,
                            snr_index,
                            campaign.master_seed,
                            f,
                            campaign.burst.as_ref(),
                            campaign.ep_run_threshold,
                        )
                    })
                    .collect::<Result<_, _>>()
            })?;
            next = hi;
            for r in results {
                metrics.add(&r);
                kept.push(r);
                if campaign
                    .max_block_errors
                    .is_some_and(|cap| metrics.block_errors >= cap)
                {
                    break 'chunks;
                }
            }
        }
        log::info!(
            "snr {snr} dB: {} frames, ber {:.3e}, bler {:.3e}",
            metrics.frames,
            metrics.ber(),
            metrics.bler()
        );
        out.metrics.push(metrics);
        out.frames.push(kept);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameFilter {
    All,
    /// Frames with at least one block error.
    Errors,
    /// Error-propagation frames only.
    #[default]
    Propagation,
}

impl FrameFilter {
    pub fn accepts(&self, r: &FrameResult) -> bool {
        match self {
            FrameFilter::All => true,
            FrameFilter::Errors => r.block_errors() > 0,
            FrameFilter::Propagation => r.is_error_propagation,
        }
    }
}

/// Per-block bit error counts of one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorDistribution {
    pub frame: usize,
    /// `(block, bit_errors)` for every block of the frame.
    pub rows: Vec<(usize, u64)>,
}

impl ErrorDistribution {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("block,bit_errors\n");
        for (b, e) in &self.rows {
            let _ = writeln!(s, "{b},{e}");
        }
        s
    }

    pub fn nonzero_rows(&self) -> usize {
        self.rows.iter().filter(|(_, e)| *e > 0).count()
    }
}

pub fn errdist_report(
    results: &[FrameResult],
    filter: FrameFilter,
) -> Result<Vec<ErrorDistribution>, SimError> {
    let out: Vec<ErrorDistribution> = results
        .iter()
        .filter(|r| filter.accepts(r))
        .map(|r| ErrorDistribution {
            frame: r.frame,
            rows: r.per_block_bit_errors.iter().copied().enumerate().collect(),
        })
        .collect();
    if out.is_empty() {
        return Err(SimError::NoMatchingFrames);
    }
    Ok(out)
}

pub const METRICS_HEADER: &str =
    "snr_db,ber,bler,fer,mean_window,ep_frames,bits,bit_errors,blocks,block_errors";

pub fn metrics_csv(metrics: &[SnrMetrics]) -> String {
    let mut s = format!("{METRICS_HEADER}\n");
    for m in metrics {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            m.snr_db,
            m.ber(),
            m.bler(),
            m.fer(),
            m.mean_window_size(),
            m.ep_frames,
            m.bits,
            m.bit_errors,
            m.blocks,
            m.block_errors
        );
    }
    s
}

/// Per-block decoder trace: `frame,block,window_size_at_decode,avg_llr,bit_errors`.
pub fn trace_csv(results: &[FrameResult]) -> String {
    let mut s = String::from("frame,block,window_size_at_decode,avg_llr,bit_errors\n");
    for r in results {
        for b in 0..r.per_block_bit_errors.len() {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.frame, b, r.window_sizes[b], r.avg_llrs[b], r.per_block_bit_errors[b]
            );
        }
    }
    s
}
