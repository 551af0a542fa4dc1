//! Coupled protograph chains.
//!
//! A chain is built from a base matrix `B` (check rows by variable columns,
//! entries are edge multiplicities) and an edge spreading `B = B_0 + ... + B_m`.
//! The variable block at time `t` connects through component `B_i` to the
//! check block at check time `t + i + offset(t)`, where `offset(t)` counts the
//! check-node doping points at or before `t`.
//!
//! Variable-node doping leaves the edges alone and flags the doped blocks as
//! known. Check-node doping shifts the check timeline by one for every doping
//! point, which leaves reduced-degree check blocks around the doping point
//! the same way termination does at the chain ends.

use std::fmt::{self, Write as _};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact rational used for design rates.
pub type Rate = Ratio<i64>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("base matrix is empty")]
    EmptyBase,
    #[error("matrix rows have inconsistent lengths")]
    RaggedMatrix,
    #[error("base matrix has no edges")]
    NoEdges,
    #[error("edge spreading needs at least one component")]
    NoComponents,
    #[error("component {component} has shape {found:?}, expected {expected:?}")]
    ShapeMismatch {
        component: usize,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("components sum to {found} at entry ({row}, {col}), base has {expected}")]
    SumConstraintViolated {
        row: usize,
        col: usize,
        expected: u32,
        found: u32,
    },
    #[error("chain length {length} must exceed the coupling width {m}")]
    ChainTooShort { length: usize, m: usize },
    #[error("doping position {position} is outside the chain of length {length}")]
    DopingOutOfRange { position: usize, length: usize },
    #[error("doping positions must be strictly increasing")]
    DopingNotIncreasing,
    #[error("check-node doping at {position} is too dense: {reason}")]
    DopingTooDense { position: usize, reason: String },
}

/// Protograph base matrix: `rows` check types by `cols` variable types.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<u32>>", into = "Vec<Vec<u32>>")]
pub struct BaseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<u32>,
}

impl BaseMatrix {
    pub fn new(rows: Vec<Vec<u32>>) -> Result<Self, ChainError> {
        let m = Self::from_rows_unchecked(rows)?;
        if m.entries.iter().all(|&e| e == 0) {
            return Err(ChainError::NoEdges);
        }
        Ok(m)
    }

    /// Same as [`BaseMatrix::new`] but allows an all-zero matrix, which is a
    /// legitimate spreading component.
    pub fn component(rows: Vec<Vec<u32>>) -> Result<Self, ChainError> {
        Self::from_rows_unchecked(rows)
    }

    fn from_rows_unchecked(rows: Vec<Vec<u32>>) -> Result<Self, ChainError> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if n_rows == 0 || n_cols == 0 {
            return Err(ChainError::EmptyBase);
        }
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(ChainError::RaggedMatrix);
        }
        Ok(BaseMatrix {
            rows: n_rows,
            cols: n_cols,
            entries: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.entries[row * self.cols + col]
    }

    pub fn row_degree(&self, row: usize) -> u32 {
        (0..self.cols).map(|c| self.get(row, c)).sum()
    }

    pub fn col_degree(&self, col: usize) -> u32 {
        (0..self.rows).map(|r| self.get(r, col)).sum()
    }

    pub fn edge_count(&self) -> u32 {
        self.entries.iter().sum()
    }

    /// `(J, K)` when every column sums to `J` and every row to `K`.
    pub fn regular_degrees(&self) -> Option<(u32, u32)> {
        let j = self.col_degree(0);
        let k = self.row_degree(0);
        let regular = (0..self.cols).all(|c| self.col_degree(c) == j)
            && (0..self.rows).all(|r| self.row_degree(r) == k);
        regular.then_some((j, k))
    }

    pub fn to_rows(&self) -> Vec<Vec<u32>> {
        self.entries
            .chunks(self.cols)
            .map(<[u32]>::to_vec)
            .collect()
    }
}

impl TryFrom<Vec<Vec<u32>>> for BaseMatrix {
    type Error = ChainError;

    fn try_from(rows: Vec<Vec<u32>>) -> Result<Self, Self::Error> {
        BaseMatrix::component(rows)
    }
}

impl From<BaseMatrix> for Vec<Vec<u32>> {
    fn from(m: BaseMatrix) -> Self {
        m.to_rows()
    }
}

impl fmt::Display for BaseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self
            .to_rows()
            .iter()
            .map(|r| r.iter().map(u32::to_string).collect::<Vec<_>>().join(" "))
            .collect();
        write!(f, "[{}]", rows.join("; "))
    }
}

/// A validated decomposition `B = B_0 + B_1 + ... + B_m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSpreading {
    base: BaseMatrix,
    components: Vec<BaseMatrix>,
}

impl EdgeSpreading {
    pub fn new(base: BaseMatrix, components: Vec<BaseMatrix>) -> Result<Self, ChainError> {
        validate_edge_spreading(&base, &components)?;
        Ok(EdgeSpreading { base, components })
    }

    /// The (3,6)-regular spreading `[3 3] = [1 1] + [1 1] + [1 1]`.
    pub fn regular_3_6() -> Self {
        let one = BaseMatrix::new(vec![vec![1, 1]]).unwrap();
        EdgeSpreading::new(
            BaseMatrix::new(vec![vec![3, 3]]).unwrap(),
            vec![one.clone(), one.clone(), one],
        )
        .unwrap()
    }

    pub fn base(&self) -> &BaseMatrix {
        &self.base
    }

    pub fn components(&self) -> &[BaseMatrix] {
        &self.components
    }

    /// Coupling width.
    pub fn m(&self) -> usize {
        self.components.len() - 1
    }

    /// Decoding constraint length, `m + 1`.
    pub fn eta(&self) -> usize {
        self.components.len()
    }
}

/// Checks shapes and the entry-wise sum constraint.
pub fn validate_edge_spreading(
    base: &BaseMatrix,
    components: &[BaseMatrix],
) -> Result<(), ChainError> {
    if components.is_empty() {
        return Err(ChainError::NoComponents);
    }
    for (i, c) in components.iter().enumerate() {
        if c.shape() != base.shape() {
            return Err(ChainError::ShapeMismatch {
                component: i,
                expected: base.shape(),
                found: c.shape(),
            });
        }
    }
    for row in 0..base.rows() {
        for col in 0..base.cols() {
            let found: u32 = components.iter().map(|c| c.get(row, col)).sum();
            let expected = base.get(row, col);
            if found != expected {
                return Err(ChainError::SumConstraintViolated {
                    row,
                    col,
                    expected,
                    found,
                });
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DopingKind {
    #[default]
    None,
    Vn,
    Cn,
}

impl fmt::Display for DopingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DopingKind::None => "none",
            DopingKind::Vn => "vn",
            DopingKind::Cn => "cn",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DopingSpec {
    pub kind: DopingKind,
    #[serde(default)]
    pub positions: Vec<usize>,
}

impl DopingSpec {
    pub fn none() -> Self {
        DopingSpec::default()
    }

    pub fn vn(positions: Vec<usize>) -> Self {
        DopingSpec {
            kind: DopingKind::Vn,
            positions,
        }
    }

    pub fn cn(positions: Vec<usize>) -> Self {
        DopingSpec {
            kind: DopingKind::Cn,
            positions,
        }
    }

    /// Number of doped positions. A spec of kind `none` has `d = 0`.
    pub fn d(&self) -> usize {
        match self.kind {
            DopingKind::None => 0,
            _ => self.positions.len(),
        }
    }

    fn active_positions(&self) -> &[usize] {
        match self.kind {
            DopingKind::None => &[],
            _ => &self.positions,
        }
    }

    /// Validates the positions against a chain of `length` blocks and
    /// coupling width `m`.
    pub fn validate(&self, length: usize, m: usize) -> Result<(), ChainError> {
        let pos = self.active_positions();
        if let Some(&p) = pos.iter().find(|&&p| p >= length) {
            return Err(ChainError::DopingOutOfRange {
                position: p,
                length,
            });
        }
        if pos.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ChainError::DopingNotIncreasing);
        }
        match self.kind {
            DopingKind::Cn => {
                for (k, &p) in pos.iter().enumerate() {
                    if p == 0 {
                        return Err(ChainError::DopingTooDense {
                            position: p,
                            reason: "the first block cannot be a check-node doping point".into(),
                        });
                    }
                    if length - 1 - p < m {
                        return Err(ChainError::DopingTooDense {
                            position: p,
                            reason: format!("within {m} blocks of the chain end"),
                        });
                    }
                    if k > 0 && p - pos[k - 1] <= m {
                        return Err(ChainError::DopingTooDense {
                            position: p,
                            reason: format!("within {m} blocks of the previous doping point"),
                        });
                    }
                }
            }
            DopingKind::Vn => {
                for w in pos.windows(2) {
                    if w[1] - w[0] <= m {
                        log::warn!(
                            "VN doping points {} and {} have overlapping check neighborhoods",
                            w[0],
                            w[1]
                        );
                    }
                }
            }
            DopingKind::None => {}
        }
        Ok(())
    }
}

/// One proto-edge class: variable column `col` at `vn_time` joined to check
/// row `row` through spreading component `component`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProtoEdge {
    pub vn_time: usize,
    pub component: usize,
    pub row: usize,
    pub col: usize,
    pub multiplicity: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VnBlock {
    pub time: usize,
    /// Doped: every bit of the block is fixed to zero and known to the decoder.
    pub known: bool,
    /// Cumulative check-time offset from check-node doping at or before `time`.
    pub cn_offset: usize,
}

impl VnBlock {
    /// Check time reached through component `component`.
    pub fn cn_time(&self, component: usize) -> usize {
        self.time + component + self.cn_offset
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnBlock {
    pub time: usize,
    /// Incident proto-edges, sorted by `(vn_time, component, row, col)`.
    pub edges: Vec<ProtoEdge>,
}

impl CnBlock {
    pub fn degree(&self) -> u32 {
        self.edges.iter().map(|e| e.multiplicity).sum()
    }

    pub fn vn_time_range(&self) -> Option<(usize, usize)> {
        let lo = self.edges.iter().map(|e| e.vn_time).min()?;
        let hi = self.edges.iter().map(|e| e.vn_time).max()?;
        Some((lo, hi))
    }
}

/// On-demand block generator for an unbounded coupled chain.
///
/// Finite chains are windows onto this generator; unterminated streaming
/// decoders can pull blocks from it directly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamingChain {
    spreading: EdgeSpreading,
    doping: DopingSpec,
}

impl StreamingChain {
    pub fn new(spreading: EdgeSpreading, doping: DopingSpec) -> Self {
        StreamingChain { spreading, doping }
    }

    pub fn spreading(&self) -> &EdgeSpreading {
        &self.spreading
    }

    pub fn doping(&self) -> &DopingSpec {
        &self.doping
    }

    /// Check-node doping points at or before `t`.
    pub fn cn_offset(&self, t: usize) -> usize {
        match self.doping.kind {
            DopingKind::Cn => self.doping.positions.partition_point(|&p| p <= t),
            _ => 0,
        }
    }

    pub fn vn_block(&self, t: usize) -> VnBlock {
        VnBlock {
            time: t,
            known: self.doping.kind == DopingKind::Vn && self.doping.positions.contains(&t),
            cn_offset: self.cn_offset(t),
        }
    }

    /// Variable time reaching check time `c` through component `i`, if any.
    fn vn_time_for(&self, c: usize, i: usize) -> Option<usize> {
        let s = c.checked_sub(i)?;
        // t + offset(t) is strictly increasing, so at most one t solves it.
        (0..=self.doping.positions.len().min(s))
            .map(|k| s - k)
            .find(|&t| t + self.cn_offset(t) == s)
    }

    /// Check block at time `c`, restricted to variable times below `vn_limit`.
    pub fn cn_block(&self, c: usize, vn_limit: usize) -> CnBlock {
        let mut edges = Vec::new();
        for (i, comp) in self.spreading.components().iter().enumerate() {
            let Some(t) = self.vn_time_for(c, i) else {
                continue;
            };
            if t >= vn_limit {
                continue;
            }
            for row in 0..comp.rows() {
                for col in 0..comp.cols() {
                    let q = comp.get(row, col);
                    if q > 0 {
                        edges.push(ProtoEdge {
                            vn_time: t,
                            component: i,
                            row,
                            col,
                            multiplicity: q,
                        });
                    }
                }
            }
        }
        edges.sort_by_key(|e| (e.vn_time, e.component, e.row, e.col));
        CnBlock { time: c, edges }
    }

    /// Iterator over variable blocks `0, 1, 2, ...` without end.
    pub fn vn_blocks(&self) -> impl Iterator<Item = VnBlock> + '_ {
        (0..).map(move |t| self.vn_block(t))
    }
}

/// A finite coupled chain of `length` variable blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoupledChain {
    generator: StreamingChain,
    length: usize,
    terminated: bool,
    vn_blocks: Vec<VnBlock>,
    cn_blocks: Vec<CnBlock>,
}

/// Builds a chain of `length` variable blocks.
///
/// Terminated chains carry the trailing `m` reduced-degree check blocks.
/// Unterminated chains stop at the last check block whose neighbors all lie
/// inside the horizon; the remaining blocks come from
/// [`CoupledChain::stream`].
pub fn build_chain(
    spreading: EdgeSpreading,
    length: usize,
    doping: DopingSpec,
    terminated: bool,
) -> Result<CoupledChain, ChainError> {
    let m = spreading.m();
    if length <= m {
        return Err(ChainError::ChainTooShort { length, m });
    }
    doping.validate(length, m)?;
    let generator = StreamingChain::new(spreading, doping);
    let vn_blocks: Vec<VnBlock> = (0..length).map(|t| generator.vn_block(t)).collect();
    let end_offset = generator.cn_offset(length - 1);
    let n_cn_times = if terminated {
        length + m + end_offset
    } else {
        length + end_offset
    };
    let cn_blocks = (0..n_cn_times)
        .map(|c| generator.cn_block(c, length))
        .collect();
    Ok(CoupledChain {
        generator,
        length,
        terminated,
        vn_blocks,
        cn_blocks,
    })
}

impl CoupledChain {
    pub fn spreading(&self) -> &EdgeSpreading {
        self.generator.spreading()
    }

    pub fn doping(&self) -> &DopingSpec {
        self.generator.doping()
    }

    pub fn stream(&self) -> &StreamingChain {
        &self.generator
    }

    /// Frame length `L` in variable blocks.
    pub fn length(&self) -> usize {
        self.length
    }

    pub fn terminated(&self) -> bool {
        self.terminated
    }

    pub fn m(&self) -> usize {
        self.spreading().m()
    }

    pub fn vn_blocks(&self) -> &[VnBlock] {
        &self.vn_blocks
    }

    pub fn cn_blocks(&self) -> &[CnBlock] {
        &self.cn_blocks
    }

    pub fn n_cn_times(&self) -> usize {
        self.cn_blocks.len()
    }

    pub fn is_known(&self, t: usize) -> bool {
        self.vn_blocks[t].known
    }

    pub fn cn_offset(&self, t: usize) -> usize {
        self.vn_blocks[t].cn_offset
    }

    /// Unknown variable nodes at protograph scale.
    pub fn n_v(&self) -> usize {
        let cols = self.spreading().base().cols();
        self.vn_blocks.iter().filter(|b| !b.known).count() * cols
    }

    /// Check nodes at protograph scale.
    pub fn n_c(&self) -> usize {
        self.cn_blocks.len() * self.spreading().base().rows()
    }

    pub fn vn_degree(&self, t: usize) -> u32 {
        let block = &self.vn_blocks[t];
        self.spreading()
            .components()
            .iter()
            .enumerate()
            .filter(|(i, _)| block.cn_time(*i) < self.cn_blocks.len())
            .map(|(_, c)| c.edge_count())
            .sum()
    }

    pub fn edge_count(&self) -> u32 {
        self.cn_blocks.iter().map(CnBlock::degree).sum()
    }

    /// One line per check time: `cn_time, degree, effective_degree, [vn_time:component,...]`.
    pub fn adjacency_listing(&self) -> String {
        let profile = degree_profile(self);
        let mut out = String::new();
        for (cn, deg) in self.cn_blocks.iter().zip(&profile) {
            let mut pairs: Vec<(usize, usize)> =
                cn.edges.iter().map(|e| (e.vn_time, e.component)).collect();
            pairs.dedup();
            let list: Vec<String> = pairs.iter().map(|(t, i)| format!("{t}:{i}")).collect();
            let _ = writeln!(
                out,
                "{}, {}, {}, [{}]",
                cn.time,
                deg.degree,
                deg.effective_degree,
                list.join(",")
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RateReport {
    /// Design rate of the uncoupled protograph, `1 - J/K`.
    pub uncoupled: Rate,
    /// Undoped rate of a chain with the same length and termination.
    pub coupled: Rate,
    /// Rate after doping; equals `coupled` when there is none.
    pub doped: Rate,
}

impl RateReport {
    pub fn rate_loss(&self) -> Rate {
        self.coupled - self.doped
    }
}

pub fn rate_to_f64(r: Rate) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Design rates of a chain, in exact arithmetic.
///
/// Terminated chains use `R_L = 1 - ((L+m)/L)(1-R)`; VN doping gives
/// `1 - ((L+m)/(L-d))(1-R)` and CN doping `1 - ((L+m+d)/L)(1-R)`. For
/// unterminated chains the `m` termination term vanishes in the limit and
/// only the doping density remains.
pub fn design_rate(chain: &CoupledChain) -> RateReport {
    let base = chain.spreading().base();
    let one = Rate::from_integer(1);
    let check_ratio = Rate::new(base.rows() as i64, base.cols() as i64);
    let uncoupled = one - check_ratio;
    let l = chain.length() as i64;
    let m = if chain.terminated() {
        chain.m() as i64
    } else {
        0
    };
    let d = chain.doping().d() as i64;
    let coupled = one - Rate::new(l + m, l) * check_ratio;
    let doped = match chain.doping().kind {
        DopingKind::None => coupled,
        DopingKind::Vn => one - Rate::new(l + m, l - d) * check_ratio,
        DopingKind::Cn => one - Rate::new(l + m + d, l) * check_ratio,
    };
    RateReport {
        uncoupled,
        coupled,
        doped,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CnDegree {
    pub cn_time: usize,
    /// Proto-edges into the check time, with multiplicity, summed over rows.
    pub degree: u32,
    /// `degree` minus the edges coming from known (doped) variable blocks.
    pub effective_degree: u32,
}

pub fn degree_profile(chain: &CoupledChain) -> Vec<CnDegree> {
    chain
        .cn_blocks()
        .iter()
        .map(|cn| {
            let degree = cn.degree();
            let known: u32 = cn
                .edges
                .iter()
                .filter(|e| chain.is_known(e.vn_time))
                .map(|e| e.multiplicity)
                .sum();
            CnDegree {
                cn_time: cn.time,
                degree,
                effective_degree: degree - known,
            }
        })
        .collect()
}
