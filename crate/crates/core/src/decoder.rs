//! Sliding window belief propagation.
//!
//! The decoder works directly on the lifted graph. A window position is a
//! target block `t` and a size `w`: variable blocks `t .. t + w` are live,
//! blocks before `t` are decided and only contribute their final LLRs, and
//! blocks at or after `t + w` have not been received yet.
//!
//! The check span starts at the first check time touching the target and
//! covers `w + m` check times, clipped at the chain end. Within the span a
//! check takes part in message passing only once all of its variables have
//! been received; checks waiting on future blocks would only ever emit zero
//! messages. With check-node doping the span start jumps by two check times
//! when the doping point becomes the target, which keeps the number of check
//! times in the window constant.
//!
//! Edge messages live in one array indexed by edge id. Checks leaving the
//! live set have their messages cleared, so a variable's posterior is always
//! its channel LLR plus the sum over all of its incident check messages.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::DEFAULT_LLR_SAT;
use crate::lifting::TannerGraph;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecoderError {
    #[error("invalid window configuration: {0}")]
    InvalidConfig(String),
    #[error("block {0} is not in the current window")]
    BlockNotInWindow(usize),
    #[error("end of chain")]
    EndOfChain,
    #[error("supplier returned {found} LLRs for block {block}, expected {expected}")]
    BadBlockLength {
        block: usize,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    SumProduct,
    MinSum { scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub w_init: usize,
    pub w_max: usize,
    /// Observation span: number of leading window blocks checked for low reliability.
    pub tau: usize,
    /// Extension threshold on the mean LLR magnitude of a block.
    pub theta: f64,
    /// Iterations per decoding round.
    pub i_max: usize,
    pub update_rule: UpdateRule,
    pub early_stop: bool,
    pub llr_clamp: f64,
    /// Pinning constant for doped variables.
    pub llr_sat: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            w_init: 18,
            w_max: 18,
            tau: 1,
            theta: 8.0,
            i_max: 100,
            update_rule: UpdateRule::SumProduct,
            early_stop: true,
            llr_clamp: 50.0,
            llr_sat: DEFAULT_LLR_SAT,
        }
    }
}

impl WindowConfig {
    /// Fixed-size window of `w` blocks, extension disabled.
    pub fn plain(w: usize) -> Self {
        WindowConfig {
            w_init: w,
            w_max: w,
            theta: 0.0,
            ..Default::default()
        }
    }

    pub fn with_extension(w_init: usize, w_max: usize, tau: usize, theta: f64) -> Self {
        WindowConfig {
            w_init,
            w_max,
            tau,
            theta,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), DecoderError> {
        let bad = |s: String| Err(DecoderError::InvalidConfig(s));
        if self.tau < 1 || self.tau > self.w_init || self.w_init > self.w_max {
            return bad(format!(
                "need 1 <= tau <= w_init <= w_max, got tau={}, w_init={}, w_max={}",
                self.tau, self.w_init, self.w_max
            ));
        }
        if !(self.theta.is_finite() && self.theta >= 0.0) {
            return bad(format!("theta must be finite and >= 0, got {}", self.theta));
        }
        if self.i_max < 1 {
            return bad("i_max must be at least 1".into());
        }
        if !(self.llr_clamp.is_finite() && self.llr_clamp > 0.0) {
            return bad(format!(
                "llr_clamp must be positive, got {}",
                self.llr_clamp
            ));
        }
        if !(self.llr_sat.is_finite() && self.llr_sat > 0.0) {
            return bad(format!("llr_sat must be positive, got {}", self.llr_sat));
        }
        if let UpdateRule::MinSum { scale } = self.update_rule {
            if !(scale > 0.0 && scale <= 1.0) {
                return bad(format!("min-sum scale must be in (0, 1], got {scale}"));
            }
        }
        Ok(())
    }

    /// Largest window reachable from `w_init` in steps of two without
    /// exceeding `w_max`.
    pub fn cap(&self) -> usize {
        self.w_init + (self.w_max - self.w_init) / 2 * 2
    }

    pub fn extension_enabled(&self) -> bool {
        self.theta > 0.0 && self.cap() > self.w_init
    }
}

/// Anything that can hand out channel LLRs block by block.
pub trait LlrSupplier {
    fn block_llrs(&mut self, block: usize) -> Vec<f64>;
}

impl<F: FnMut(usize) -> Vec<f64>> LlrSupplier for F {
    fn block_llrs(&mut self, block: usize) -> Vec<f64> {
        self(block)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockDecision {
    pub block: usize,
    pub bits: Vec<u8>,
    pub final_llrs: Vec<f64>,
    /// Mean LLR magnitude of the block when it was decided.
    pub avg_llr: f64,
    pub window_size_at_decode: usize,
}

impl BlockDecision {
    pub fn bit_errors(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }
}

/// Hard decision: non-negative LLRs (ties included) decide 0.
pub fn hard_decision(llr: f64) -> u8 {
    u8::from(llr < 0.0)
}

/// Mean magnitude of a slice of LLRs.
pub fn mean_magnitude(llrs: &[f64]) -> f64 {
    llrs.iter().map(|x| x.abs()).sum::<f64>() / llrs.len() as f64
}

/// Sum-product check update. `out[k]` receives the message for edge `k`
/// computed from all other inputs; inputs are assumed already clamped.
pub fn sum_product_check(inputs: &[f64], out: &mut [f64], clamp: f64) {
    let mut work = inputs.to_vec();
    sum_product_in_place(&mut work, out, clamp);
}

/// Same as [`sum_product_check`], overwriting `work` with `tanh(x/2)`.
fn sum_product_in_place(work: &mut [f64], out: &mut [f64], clamp: f64) {
    let n = work.len();
    debug_assert_eq!(n, out.len());
    match n {
        0 => return,
        1 => {
            out[0] = 0.0;
            return;
        }
        2 => {
            out[0] = work[1];
            out[1] = work[0];
            return;
        }
        _ => {}
    }
    // out holds prefix products first.
    let mut acc = 1.0;
    for k in 0..n {
        out[k] = acc;
        // tanh(x/2) = (e^x - 1) / (e^x + 1)
        let e = work[k].exp();
        work[k] = (e - 1.0) / (e + 1.0);
        acc *= work[k];
    }
    let mut suffix = 1.0;
    for k in (0..n).rev() {
        let p = out[k] * suffix;
        suffix *= work[k];
        // 2 atanh(p) = ln((1 + p) / (1 - p))
        out[k] = ((1.0 + p) / (1.0 - p)).ln().clamp(-clamp, clamp);
    }
}

/// Scaled min-sum check update.
pub fn min_sum_check(inputs: &[f64], out: &mut [f64], scale: f64, clamp: f64) {
    let n = inputs.len();
    debug_assert_eq!(n, out.len());
    if n == 1 {
        out[0] = 0.0;
        return;
    }
    let mut min1 = f64::INFINITY;
    let mut min2 = f64::INFINITY;
    let mut min_idx = 0;
    let mut negative = false;
    for (k, &x) in inputs.iter().enumerate() {
        let a = x.abs();
        negative ^= x < 0.0;
        if a < min1 {
            min2 = min1;
            min1 = a;
            min_idx = k;
        } else if a < min2 {
            min2 = a;
        }
    }
    for (k, &x) in inputs.iter().enumerate() {
        let mag = if k == min_idx { min2 } else { min1 };
        let neg = negative ^ (x < 0.0);
        let v = scale * mag;
        out[k] = (if neg { -v } else { v }).clamp(-clamp, clamp);
    }
}

/// Mutable state of one sliding window decoder.
#[derive(Debug, Clone)]
pub struct WindowDecoder<'g> {
    graph: &'g TannerGraph,
    config: WindowConfig,
    /// Target block.
    t: usize,
    /// Nominal window size.
    w: usize,
    /// Blocks `0..received` have channel LLRs.
    received: usize,
    /// End (exclusive) of the live variable blocks.
    vn_end: usize,
    channel: Vec<f64>,
    /// Decision LLRs. Frozen at their final values for decided blocks.
    posterior: Vec<f64>,
    c2v: Vec<f64>,
    /// Clamped check inputs of the last update, per edge. NaN forces a
    /// recomputation.
    v2c: Vec<f64>,
    /// Live check nodes.
    active: Range<usize>,
    /// Check times in the window span.
    cn_span: Range<usize>,
    iterations: usize,
    /// Per variable node: belongs to a doped block.
    known: Vec<bool>,
    inputs: Vec<f64>,
    outputs: Vec<f64>,
}

impl<'g> WindowDecoder<'g> {
    /// Window over blocks `0 .. w_init` with zeroed messages.
    pub fn new(
        graph: &'g TannerGraph,
        config: WindowConfig,
        supplier: &mut dyn LlrSupplier,
    ) -> Result<Self, DecoderError> {
        config.validate()?;
        let max_deg = (0..graph.cn_count())
            .map(|c| graph.cn_degree(c))
            .max()
            .unwrap_or(0);
        let mut dec = WindowDecoder {
            graph,
            config,
            t: 0,
            w: config.w_init,
            received: 0,
            vn_end: 0,
            channel: vec![0.0; graph.vn_count()],
            posterior: vec![0.0; graph.vn_count()],
            c2v: vec![0.0; graph.edge_count()],
            v2c: vec![f64::NAN; graph.edge_count()],
            active: 0..0,
            cn_span: 0..0,
            iterations: 0,
            known: (0..graph.vn_count()).map(|v| graph.is_known(v)).collect(),
            inputs: vec![0.0; max_deg],
            outputs: vec![0.0; max_deg],
        };
        dec.update_window(supplier)?;
        Ok(dec)
    }

    pub fn config(&self) -> &WindowConfig {
        &self.config
    }

    pub fn target(&self) -> usize {
        self.t
    }

    pub fn window_size(&self) -> usize {
        self.w
    }

    /// Live variable blocks.
    pub fn vn_blocks(&self) -> Range<usize> {
        self.t..self.vn_end
    }

    /// Check times covered by the window.
    pub fn cn_window_span(&self) -> Range<usize> {
        self.cn_span.clone()
    }

    /// Check nodes currently exchanging messages.
    pub fn active_checks(&self) -> Range<usize> {
        self.active.clone()
    }

    /// Total flooding iterations run so far.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Decision LLRs of every variable node; decided blocks hold their
    /// final values.
    pub fn posteriors(&self) -> &[f64] {
        &self.posterior
    }

    /// Final LLRs of the up to `m` most recently decided blocks.
    pub fn past_llrs(&self) -> &[f64] {
        let m = self.graph.coupling_width();
        let lo = self.t.saturating_sub(m);
        let bs = self.graph.block_size();
        &self.posterior[lo * bs..self.t * bs]
    }

    pub fn c2v_messages(&self) -> &[f64] {
        &self.c2v
    }

    fn ingest(&mut self, upto: usize, supplier: &mut dyn LlrSupplier) -> Result<(), DecoderError> {
        while self.received < upto {
            let b = self.received;
            let llrs = supplier.block_llrs(b);
            let range = self.graph.vn_range(b);
            if llrs.len() != range.len() {
                return Err(DecoderError::BadBlockLength {
                    block: b,
                    expected: range.len(),
                    found: llrs.len(),
                });
            }
            self.channel[range].copy_from_slice(&llrs);
            self.received += 1;
        }
        Ok(())
    }

    fn compute_active(&self) -> (Range<usize>, Range<usize>) {
        let g = self.graph;
        let Some((c_lo, _)) = g.vn_time_cn_range(self.t) else {
            return (0..0, 0..0);
        };
        let span_hi = (c_lo + self.w + g.coupling_width()).min(g.n_cn_times());
        let mut c_end = c_lo;
        while c_end < span_hi {
            match g.cn_time_vn_range(c_end) {
                Some((_, hi)) if hi >= self.vn_end => break,
                _ => c_end += 1,
            }
        }
        let checks = if c_end > c_lo {
            g.cn_range(c_lo).start..g.cn_range(c_end - 1).end
        } else {
            0..0
        };
        (checks, c_lo..span_hi)
    }

    /// Re-derives the live sets after `t` or `w` changed.
    fn update_window(&mut self, supplier: &mut dyn LlrSupplier) -> Result<(), DecoderError> {
        let n_blocks = self.graph.n_vn_times();
        self.vn_end = (self.t + self.w).min(n_blocks);
        self.ingest(self.vn_end, supplier)?;
        let (active, span) = self.compute_active();
        // Checks dropping out on the right lose their messages.
        for c in self.active.start.max(active.end)..self.active.end {
            for e in self.graph.cn_edges(c) {
                self.c2v[e] = 0.0;
                self.v2c[e] = f64::NAN;
            }
        }
        self.active = active;
        self.cn_span = span;
        for b in self.t..self.vn_end {
            for v in self.graph.vn_range(b) {
                self.posterior[v] = self.variable_posterior(v);
            }
        }
        Ok(())
    }

    fn variable_posterior(&self, v: usize) -> f64 {
        if self.known[v] {
            return self.config.llr_sat;
        }
        self.graph
            .vn_edges(v)
            .iter()
            .fold(self.channel[v], |acc, &e| acc + self.c2v[e as usize])
    }

    fn check_update(&mut self) {
        let g = self.graph;
        let clamp = self.config.llr_clamp;
        let first_live_vn = self.t * g.block_size();
        let edge_vn = g.edge_vn_slice();
        for c in self.active.clone() {
            let edges = g.cn_edges(c);
            let n = edges.len();
            let inputs = &mut self.inputs[..n];
            let mut unchanged = true;
            for (slot, e) in inputs.iter_mut().zip(edges.clone()) {
                let v = edge_vn[e] as usize;
                let x = if v < first_live_vn {
                    self.posterior[v]
                } else if self.known[v] {
                    self.config.llr_sat
                } else {
                    self.posterior[v] - self.c2v[e]
                };
                *slot = x.clamp(-clamp, clamp);
                // NaN never compares equal.
                unchanged &= *slot == self.v2c[e];
            }
            // Same inputs give the same outputs, which c2v already holds.
            if unchanged {
                continue;
            }
            self.v2c[edges.clone()].copy_from_slice(inputs);
            let outputs = &mut self.outputs[..n];
            match self.config.update_rule {
                UpdateRule::SumProduct => sum_product_in_place(inputs, outputs, clamp),
                UpdateRule::MinSum { scale } => min_sum_check(inputs, outputs, scale, clamp),
            }
            for (k, e) in edges.enumerate() {
                if edge_vn[e] as usize >= first_live_vn {
                    self.c2v[e] = outputs[k];
                }
            }
        }
    }

    fn variable_update(&mut self) {
        let bs = self.graph.block_size();
        for v in self.t * bs..self.vn_end * bs {
            self.posterior[v] = self.variable_posterior(v);
        }
    }

    /// True when every live check is satisfied by the current hard decisions.
    pub fn window_satisfied(&self) -> bool {
        let edge_vn = self.graph.edge_vn_slice();
        self.active.clone().all(|c| {
            self.graph.cn_edges(c).fold(0u8, |acc, e| {
                acc ^ hard_decision(self.posterior[edge_vn[e] as usize])
            }) == 0
        })
    }

    /// Runs up to `iterations` flooding iterations; returns how many ran.
    pub fn bp_round(&mut self, iterations: usize, early_stop: bool) -> usize {
        for it in 0..iterations {
            self.check_update();
            self.variable_update();
            self.iterations += 1;
            if early_stop && self.window_satisfied() {
                return it + 1;
            }
        }
        iterations
    }

    /// Mean LLR magnitude of block `i`.
    pub fn block_avg_llr(&self, i: usize) -> Result<f64, DecoderError> {
        if !(self.t..self.vn_end).contains(&i) {
            return Err(DecoderError::BlockNotInWindow(i));
        }
        Ok(mean_magnitude(&self.posterior[self.graph.vn_range(i)]))
    }

    /// Whether any of the first `tau` window blocks has a mean LLR
    /// magnitude strictly below `theta`.
    pub fn extension_triggered(&self) -> bool {
        let hi = (self.t + self.config.tau).min(self.vn_end);
        (self.t..hi)
            .any(|i| mean_magnitude(&self.posterior[self.graph.vn_range(i)]) < self.config.theta)
    }

    /// Hard decisions on the target block. Its LLRs become read-only once
    /// the window shifts.
    pub fn decode_target(&self) -> BlockDecision {
        let range = self.graph.vn_range(self.t);
        let final_llrs = self.posterior[range].to_vec();
        BlockDecision {
            block: self.t,
            bits: final_llrs.iter().map(|&x| hard_decision(x)).collect(),
            avg_llr: mean_magnitude(&final_llrs),
            final_llrs,
            window_size_at_decode: self.w,
        }
    }

    /// Moves the target forward by one block and resets the window to
    /// `w_init`.
    pub fn shift_window(&mut self, supplier: &mut dyn LlrSupplier) -> Result<(), DecoderError> {
        if self.t + 1 >= self.graph.n_vn_times() {
            return Err(DecoderError::EndOfChain);
        }
        self.t += 1;
        self.w = self.config.w_init;
        self.update_window(supplier)
    }

    /// Grows the window by two blocks, keeping every existing message.
    /// Returns false at the cap or when no unreceived block is left.
    pub fn extend(&mut self, supplier: &mut dyn LlrSupplier) -> Result<bool, DecoderError> {
        if self.w + 2 > self.config.w_max || self.t + self.w >= self.graph.n_vn_times() {
            return Ok(false);
        }
        self.w += 2;
        self.update_window(supplier)?;
        Ok(true)
    }
}

/// Plain sliding window decoding with a fixed window of `w_init` blocks.
pub fn decode_chain(
    graph: &TannerGraph,
    config: &WindowConfig,
    supplier: &mut dyn LlrSupplier,
) -> Result<Vec<BlockDecision>, DecoderError> {
    let mut dec = WindowDecoder::new(graph, *config, supplier)?;
    let mut out = Vec::with_capacity(graph.n_vn_times());
    loop {
        dec.bp_round(config.i_max, config.early_stop);
        out.push(dec.decode_target());
        match dec.shift_window(supplier) {
            Ok(()) => {}
            Err(DecoderError::EndOfChain) => return Ok(out),
            Err(e) => return Err(e),
        }
    }
}

/// Sliding window decoding with window extension.
///
/// After each round of `i_max` iterations the leading `tau` blocks are
/// checked; if one is unreliable and the window can still grow, two more
/// blocks are received and the round restarts on the larger window. At the
/// cap the target is decided regardless. Every decision resets the window to
/// `w_init`. Early stopping is suppressed while extension is possible so the
/// reliability test always sees a full round.
pub fn decode_chain_with_extension(
    graph: &TannerGraph,
    config: &WindowConfig,
    supplier: &mut dyn LlrSupplier,
) -> Result<Vec<BlockDecision>, DecoderError> {
    let extension = config.extension_enabled();
    let early_stop = config.early_stop && !extension;
    let mut dec = WindowDecoder::new(graph, *config, supplier)?;
    let mut out = Vec::with_capacity(graph.n_vn_times());
    loop {
        dec.bp_round(config.i_max, early_stop);
        if extension && dec.extension_triggered() && dec.extend(supplier)? {
            continue;
        }
        out.push(dec.decode_target());
        match dec.shift_window(supplier) {
            Ok(()) => {}
            Err(DecoderError::EndOfChain) => return Ok(out),
            Err(e) => return Err(e),
        }
    }
}

/// Flooding BP over the whole graph at once; returns the decision LLRs.
pub fn flood_decode(
    graph: &TannerGraph,
    channel_llrs: &[f64],
    config: &WindowConfig,
) -> Result<Vec<f64>, DecoderError> {
    let n = graph.n_vn_times();
    let whole = WindowConfig {
        w_init: n,
        w_max: n,
        tau: config.tau.min(n),
        ..*config
    };
    let bs = graph.block_size();
    let mut supplier = |b: usize| channel_llrs[b * bs..(b + 1) * bs].to_vec();
    let mut dec = WindowDecoder::new(graph, whole, &mut supplier)?;
    dec.bp_round(config.i_max, config.early_stop);
    Ok(dec.posterior)
}
