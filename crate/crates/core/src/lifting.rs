//! Lifting a coupled protograph into a Tanner graph.
//!
//! Node numbering is block-contiguous: variable block `t` owns variable
//! nodes `t * block_size .. (t + 1) * block_size` (column `j`, copy `k` at
//! offset `j * M + k`), and check time `c` owns check nodes
//! `c * checks_per_time ..` (row `r`, copy `k` at offset `r * M + k`). The
//! window decoder relies on this to address a window as two index ranges.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protograph::CoupledChain;
use crate::rng::keyed_rng;

const MAX_PERMUTATION_RETRIES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LiftError {
    #[error("lifting factor must be at least 1")]
    ZeroLift,
    #[error("cannot lift a proto-edge of multiplicity {multiplicity} without parallel edges at M = {lift}")]
    LiftFailure { multiplicity: u32, lift: usize },
    #[error("malformed alist: {0}")]
    Alist(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftMethod {
    Circulant,
    #[default]
    RandomPermutation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftSpec {
    #[serde(rename = "factor")]
    pub lift: usize,
    #[serde(default)]
    pub method: LiftMethod,
    #[serde(default)]
    pub seed: u64,
}

impl LiftSpec {
    pub fn random(lift: usize, seed: u64) -> Self {
        LiftSpec {
            lift,
            method: LiftMethod::RandomPermutation,
            seed,
        }
    }

    pub fn circulant(lift: usize, seed: u64) -> Self {
        LiftSpec {
            lift,
            method: LiftMethod::Circulant,
            seed,
        }
    }
}

/// Block structure of a graph, independent of its edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphLayout {
    pub lift: usize,
    /// Variable nodes per variable block.
    pub block_size: usize,
    /// Check nodes per check time.
    pub checks_per_time: usize,
    pub n_vn_times: usize,
    pub n_cn_times: usize,
    pub coupling_width: usize,
    /// One flag per variable block: doped blocks are known to be all-zero.
    pub known_blocks: Vec<bool>,
}

/// Sparse bipartite graph with cross-indexed adjacency.
///
/// Edges are numbered in check-major order; `vn_edges` lists, per variable
/// node, the ids of its edges in that numbering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TannerGraph {
    layout: GraphLayout,
    cn_edge_start: Vec<u32>,
    edge_vn: Vec<u32>,
    vn_edge_start: Vec<u32>,
    vn_edges: Vec<u32>,
    cn_time_vn_range: Vec<Option<(usize, usize)>>,
    vn_time_cn_range: Vec<Option<(usize, usize)>>,
}

impl TannerGraph {
    /// Builds a graph from `(check, variable)` pairs. Duplicates are kept so
    /// that [`verify_lift`] can report them.
    pub fn from_edges(layout: GraphLayout, mut edges: Vec<(usize, usize)>) -> Self {
        let vn_count = layout.n_vn_times * layout.block_size;
        let cn_count = layout.n_cn_times * layout.checks_per_time;
        assert_eq!(layout.known_blocks.len(), layout.n_vn_times);
        assert!(
            u32::try_from(edges.len()).is_ok() && u32::try_from(vn_count.max(cn_count)).is_ok(),
            "graph too large for 32-bit indices"
        );
        edges.sort_unstable();

        let mut cn_edge_start = vec![0u32; cn_count + 1];
        let mut vn_degree = vec![0u32; vn_count];
        for &(c, v) in &edges {
            assert!(c < cn_count && v < vn_count, "edge ({c}, {v}) out of range");
            cn_edge_start[c + 1] += 1;
            vn_degree[v] += 1;
        }
        for c in 0..cn_count {
            cn_edge_start[c + 1] += cn_edge_start[c];
        }
        let mut vn_edge_start = vec![0u32; vn_count + 1];
        for v in 0..vn_count {
            vn_edge_start[v + 1] = vn_edge_start[v] + vn_degree[v];
        }
        let mut fill = vn_edge_start.clone();
        let mut vn_edges = vec![0u32; edges.len()];
        let mut edge_vn = Vec::with_capacity(edges.len());
        for (e, &(_, v)) in edges.iter().enumerate() {
            edge_vn.push(v as u32);
            vn_edges[fill[v] as usize] = e as u32;
            fill[v] += 1;
        }

        let mut cn_time_vn_range = vec![None; layout.n_cn_times];
        let mut vn_time_cn_range = vec![None; layout.n_vn_times];
        let widen = |slot: &mut Option<(usize, usize)>, x: usize| {
            *slot = Some(match *slot {
                None => (x, x),
                Some((lo, hi)) => (lo.min(x), hi.max(x)),
            });
        };
        for &(c, v) in &edges {
            let ct = c / layout.checks_per_time;
            let vt = v / layout.block_size;
            widen(&mut cn_time_vn_range[ct], vt);
            widen(&mut vn_time_cn_range[vt], ct);
        }

        TannerGraph {
            layout,
            cn_edge_start,
            edge_vn,
            vn_edge_start,
            vn_edges,
            cn_time_vn_range,
            vn_time_cn_range,
        }
    }

    /// A single-block graph for an arbitrary parity-check matrix given as
    /// check neighbor lists.
    pub fn from_parity_checks(n_vars: usize, checks: &[Vec<usize>]) -> Self {
        let layout = GraphLayout {
            lift: 1,
            block_size: n_vars,
            checks_per_time: checks.len(),
            n_vn_times: 1,
            n_cn_times: 1,
            coupling_width: 0,
            known_blocks: vec![false],
        };
        let edges = checks
            .iter()
            .enumerate()
            .flat_map(|(c, vs)| vs.iter().map(move |&v| (c, v)))
            .collect();
        TannerGraph::from_edges(layout, edges)
    }

    pub fn layout(&self) -> &GraphLayout {
        &self.layout
    }

    pub fn vn_count(&self) -> usize {
        self.vn_edge_start.len() - 1
    }

    pub fn cn_count(&self) -> usize {
        self.cn_edge_start.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.edge_vn.len()
    }

    pub fn block_size(&self) -> usize {
        self.layout.block_size
    }

    pub fn checks_per_time(&self) -> usize {
        self.layout.checks_per_time
    }

    pub fn n_vn_times(&self) -> usize {
        self.layout.n_vn_times
    }

    pub fn n_cn_times(&self) -> usize {
        self.layout.n_cn_times
    }

    pub fn coupling_width(&self) -> usize {
        self.layout.coupling_width
    }

    pub fn vn_block_of(&self, v: usize) -> usize {
        v / self.layout.block_size
    }

    pub fn cn_block_of(&self, c: usize) -> usize {
        c / self.layout.checks_per_time
    }

    pub fn is_known_block(&self, t: usize) -> bool {
        self.layout.known_blocks[t]
    }

    pub fn is_known(&self, v: usize) -> bool {
        self.is_known_block(self.vn_block_of(v))
    }

    pub fn known_vns(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.vn_count()).filter(|&v| self.is_known(v))
    }

    /// Variable node range of block `t`.
    pub fn vn_range(&self, t: usize) -> std::ops::Range<usize> {
        t * self.layout.block_size..(t + 1) * self.layout.block_size
    }

    /// Check node range of check time `c`.
    pub fn cn_range(&self, c: usize) -> std::ops::Range<usize> {
        c * self.layout.checks_per_time..(c + 1) * self.layout.checks_per_time
    }

    /// Edge ids of check `c`; the edge id indexes [`TannerGraph::edge_vn`].
    pub fn cn_edges(&self, c: usize) -> std::ops::Range<usize> {
        self.cn_edge_start[c] as usize..self.cn_edge_start[c + 1] as usize
    }

    pub fn cn_degree(&self, c: usize) -> usize {
        self.cn_edges(c).len()
    }

    pub fn vn_degree(&self, v: usize) -> usize {
        (self.vn_edge_start[v + 1] - self.vn_edge_start[v]) as usize
    }

    pub fn edge_vn(&self, e: usize) -> usize {
        self.edge_vn[e] as usize
    }

    pub(crate) fn edge_vn_slice(&self) -> &[u32] {
        &self.edge_vn
    }

    /// Edge ids incident to variable `v`.
    pub fn vn_edges(&self, v: usize) -> &[u32] {
        &self.vn_edges[self.vn_edge_start[v] as usize..self.vn_edge_start[v + 1] as usize]
    }

    pub fn cn_neighbors(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        self.cn_edges(c).map(move |e| self.edge_vn(e))
    }

    /// `(check, variable)` pairs in edge-id order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.cn_count()).flat_map(move |c| self.cn_neighbors(c).map(move |v| (c, v)))
    }

    /// Smallest and largest variable time adjacent to check time `c`.
    pub fn cn_time_vn_range(&self, c: usize) -> Option<(usize, usize)> {
        self.cn_time_vn_range[c]
    }

    /// Smallest and largest check time adjacent to variable time `t`.
    pub fn vn_time_cn_range(&self, t: usize) -> Option<(usize, usize)> {
        self.vn_time_cn_range[t]
    }

    /// True when `bits` (one per variable node) satisfies check `c`.
    pub fn check_satisfied(&self, c: usize, bits: &[u8]) -> bool {
        self.cn_neighbors(c).fold(0u8, |acc, v| acc ^ bits[v]) == 0
    }

    pub fn syndrome_ok(&self, bits: &[u8]) -> bool {
        (0..self.cn_count()).all(|c| self.check_satisfied(c, bits))
    }

    /// Parity-check matrix in MacKay's alist format.
    pub fn to_alist(&self) -> String {
        let n = self.vn_count();
        let m = self.cn_count();
        let col_w: Vec<usize> = (0..n).map(|v| self.vn_degree(v)).collect();
        let row_w: Vec<usize> = (0..m).map(|c| self.cn_degree(c)).collect();
        let max_col = col_w.iter().copied().max().unwrap_or(0);
        let max_row = row_w.iter().copied().max().unwrap_or(0);
        let join = |xs: &mut dyn Iterator<Item = usize>| {
            xs.map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
        };
        let mut out = String::new();
        let _ = writeln!(out, "{n} {m}");
        let _ = writeln!(out, "{max_col} {max_row}");
        let _ = writeln!(out, "{}", join(&mut col_w.iter().copied()));
        let _ = writeln!(out, "{}", join(&mut row_w.iter().copied()));
        for v in 0..n {
            let mut rows: Vec<usize> = self
                .vn_edges(v)
                .iter()
                .map(|&e| self.edge_cn(e as usize) + 1)
                .collect();
            rows.resize(max_col, 0);
            let _ = writeln!(out, "{}", join(&mut rows.into_iter()));
        }
        for c in 0..m {
            let mut cols: Vec<usize> = self.cn_neighbors(c).map(|v| v + 1).collect();
            cols.resize(max_row, 0);
            let _ = writeln!(out, "{}", join(&mut cols.into_iter()));
        }
        out
    }

    /// Check node owning edge `e`.
    pub fn edge_cn(&self, e: usize) -> usize {
        self.cn_edge_start.partition_point(|&s| s as usize <= e) - 1
    }

    /// Parses an alist file into a single-block graph.
    pub fn from_alist(text: &str) -> Result<Self, LiftError> {
        let bad = |msg: &str| LiftError::Alist(msg.to_string());
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut nums = |what: &str| -> Result<Vec<usize>, LiftError> {
            lines
                .next()
                .ok_or_else(|| bad(&format!("missing {what}")))?
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| bad(&format!("bad number in {what}"))))
                .collect()
        };
        let dims = nums("dimensions")?;
        let [n, m] = dims[..] else {
            return Err(bad("dimension line needs two numbers"));
        };
        nums("maximum weights")?;
        nums("column weights")?;
        nums("row weights")?;
        for _ in 0..n {
            nums("column list")?;
        }
        let mut checks = Vec::with_capacity(m);
        for _ in 0..m {
            let cols = nums("row list")?;
            let mut row = Vec::new();
            for c in cols.into_iter().filter(|&c| c > 0) {
                if c > n {
                    return Err(bad("column index out of range"));
                }
                row.push(c - 1);
            }
            checks.push(row);
        }
        Ok(TannerGraph::from_parity_checks(n, &checks))
    }
}

fn layout_for(chain: &CoupledChain, lift: usize) -> GraphLayout {
    let base = chain.spreading().base();
    GraphLayout {
        lift,
        block_size: base.cols() * lift,
        checks_per_time: base.rows() * lift,
        n_vn_times: chain.length(),
        n_cn_times: chain.n_cn_times(),
        coupling_width: chain.m(),
        known_blocks: chain.vn_blocks().iter().map(|b| b.known).collect(),
    }
}

/// Draws `count` pairwise disjoint permutations of `0..lift`.
fn draw_permutations(
    spec: &LiftSpec,
    key: &[u64],
    count: u32,
) -> Result<Vec<Vec<usize>>, LiftError> {
    let m = spec.lift;
    if count as usize > m {
        return Err(LiftError::LiftFailure {
            multiplicity: count,
            lift: m,
        });
    }
    let mut rng = keyed_rng(spec.seed, key, 0);
    let mut perms: Vec<Vec<usize>> = Vec::with_capacity(count as usize);
    match spec.method {
        LiftMethod::Circulant => {
            let mut shifts: Vec<usize> = Vec::new();
            while shifts.len() < count as usize {
                let s = rng.random_range(0..m);
                if !shifts.contains(&s) {
                    shifts.push(s);
                }
            }
            for s in shifts {
                perms.push((0..m).map(|k| (k + s) % m).collect());
            }
        }
        LiftMethod::RandomPermutation => {
            while perms.len() < count as usize {
                let mut tries = 0;
                loop {
                    let mut p: Vec<usize> = (0..m).collect();
                    p.shuffle(&mut rng);
                    if perms.iter().all(|q| q.iter().zip(&p).all(|(a, b)| a != b)) {
                        perms.push(p);
                        break;
                    }
                    tries += 1;
                    if tries >= MAX_PERMUTATION_RETRIES {
                        return Err(LiftError::LiftFailure {
                            multiplicity: count,
                            lift: m,
                        });
                    }
                }
            }
        }
    }
    Ok(perms)
}

/// Lifts every proto-edge of the chain by `spec.lift`.
///
/// A proto-edge of multiplicity `q` becomes `q` pairwise disjoint
/// permutations, so the result has no parallel edges. The output depends only
/// on `(chain, spec)`.
pub fn lift(chain: &CoupledChain, spec: &LiftSpec) -> Result<TannerGraph, LiftError> {
    if spec.lift == 0 {
        return Err(LiftError::ZeroLift);
    }
    let layout = layout_for(chain, spec.lift);
    let m = spec.lift;
    let mut edges = Vec::with_capacity(chain.edge_count() as usize * m);
    for block in chain.vn_blocks() {
        for (i, comp) in chain.spreading().components().iter().enumerate() {
            let c = block.cn_time(i);
            if c >= layout.n_cn_times {
                continue;
            }
            for row in 0..comp.rows() {
                for col in 0..comp.cols() {
                    let q = comp.get(row, col);
                    if q == 0 {
                        continue;
                    }
                    let key = [block.time as u64, i as u64, row as u64, col as u64];
                    let cn_base = c * layout.checks_per_time + row * m;
                    let vn_base = block.time * layout.block_size + col * m;
                    for perm in draw_permutations(spec, &key, q)? {
                        edges.extend(
                            perm.iter()
                                .enumerate()
                                .map(|(k, &p)| (cn_base + p, vn_base + k)),
                        );
                    }
                }
            }
        }
    }
    Ok(TannerGraph::from_edges(layout, edges))
}

/// The protograph itself as a multigraph (lift 1, multiplicities expanded
/// into parallel edges).
pub fn expand_protograph(chain: &CoupledChain) -> TannerGraph {
    let layout = layout_for(chain, 1);
    let mut edges = Vec::new();
    for cn in chain.cn_blocks() {
        for e in &cn.edges {
            let c = cn.time * layout.checks_per_time + e.row;
            let v = e.vn_time * layout.block_size + e.col;
            edges.extend(std::iter::repeat_n((c, v), e.multiplicity as usize));
        }
    }
    TannerGraph::from_edges(layout, edges)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LiftReport {
    pub degree_violations: usize,
    pub mapping_violations: usize,
    pub parallel_edges: usize,
    /// Number of check pairs sharing two or more variables. A warning only.
    pub four_cycles: usize,
    pub messages: Vec<String>,
}

impl LiftReport {
    pub fn is_valid(&self) -> bool {
        self.degree_violations == 0 && self.mapping_violations == 0 && self.parallel_edges == 0
    }
}

/// Structural checks of a lifted graph against its chain.
pub fn verify_lift(graph: &TannerGraph, chain: &CoupledChain) -> LiftReport {
    let mut report = LiftReport::default();
    let layout = graph.layout();
    let lift = layout.lift;
    let spreading = chain.spreading();
    let comps = spreading.components();

    if layout.n_vn_times != chain.length() || layout.n_cn_times != chain.n_cn_times() {
        report.mapping_violations += 1;
        report
            .messages
            .push("block counts differ between graph and chain".into());
        return report;
    }

    // Expected variable degrees per (block, column).
    for block in chain.vn_blocks() {
        for col in 0..spreading.base().cols() {
            let expected: u32 = comps
                .iter()
                .enumerate()
                .filter(|(i, _)| block.cn_time(*i) < chain.n_cn_times())
                .map(|(_, c)| c.col_degree(col))
                .sum();
            for k in 0..lift {
                let v = block.time * layout.block_size + col * lift + k;
                if graph.vn_degree(v) != expected as usize {
                    report.degree_violations += 1;
                }
            }
        }
    }
    for cn in chain.cn_blocks() {
        for row in 0..spreading.base().rows() {
            let expected: u32 = cn
                .edges
                .iter()
                .filter(|e| e.row == row)
                .map(|e| e.multiplicity)
                .sum();
            for k in 0..lift {
                let c = cn.time * layout.checks_per_time + row * lift + k;
                if graph.cn_degree(c) != expected as usize {
                    report.degree_violations += 1;
                }
            }
        }
    }

    for c in 0..graph.cn_count() {
        let ct = graph.cn_block_of(c);
        let row = (c % layout.checks_per_time) / lift;
        let mut prev = None;
        for v in graph.cn_neighbors(c) {
            if prev == Some(v) {
                report.parallel_edges += 1;
            }
            prev = Some(v);
            let block = &chain.vn_blocks()[graph.vn_block_of(v)];
            let col = (v % layout.block_size) / lift;
            let ok = ct
                .checked_sub(block.time + block.cn_offset)
                .and_then(|i| comps.get(i))
                .is_some_and(|comp| comp.get(row, col) > 0);
            if !ok {
                report.mapping_violations += 1;
            }
        }
    }

    let mut pairs: HashMap<(usize, usize), u32> = HashMap::new();
    for v in 0..graph.vn_count() {
        let mut cns: Vec<usize> = graph
            .vn_edges(v)
            .iter()
            .map(|&e| graph.edge_cn(e as usize))
            .collect();
        cns.dedup();
        for a in 0..cns.len() {
            for b in a + 1..cns.len() {
                *pairs.entry((cns[a], cns[b])).or_default() += 1;
            }
        }
    }
    report.four_cycles = pairs.values().filter(|&&n| n >= 2).count();

    if report.degree_violations > 0 {
        report.messages.push(format!(
            "{} nodes with wrong degree",
            report.degree_violations
        ));
    }
    if report.mapping_violations > 0 {
        report.messages.push(format!(
            "{} edges outside their coupling neighborhood",
            report.mapping_violations
        ));
    }
    if report.parallel_edges > 0 {
        report
            .messages
            .push(format!("{} parallel edges", report.parallel_edges));
    }
    if report.four_cycles > 0 {
        report.messages.push(format!(
            "warning: {} check pairs close a 4-cycle",
            report.four_cycles
        ));
    }
    report
}
