//! Processor-space algebra.
//!
//! A [`ProcSpace`] is a logical view of a two-level machine grid
//! `(nodes, procs_per_node)` reshaped by a chain of invertible
//! transformations. Indexing a transformed space walks the chain
//! backwards, mapping each index to the index of the space it was
//! derived from, until a base `(node, proc)` coordinate is reached:
//!
//! ```text
//! split(i, d)      b_i = a_i + a_{i+1} * d,          b_t = a_{t+1} for t > i
//! merge(p, q)      b_p = a_p mod s_p,  b_q = a_p / s_p
//! swap(p, q)       b_p = a_q,  b_q = a_p
//! slice(i, lo, hi) b_i = a_i + lo
//! ```
//!
//! All arithmetic is checked. An index that falls outside the space it
//! addresses is an error, never wrapped.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Ordered sequence of integers: an iteration point, an extent, or a
/// processor-space index.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tuple(Vec<i64>);

impl Tuple {
    pub fn new(elements: Vec<i64>) -> Self {
        Tuple(elements)
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<i64> {
        self.0
    }

    /// Product of all elements, `None` on overflow.
    pub fn product(&self) -> Option<i64> {
        self.0.iter().try_fold(1i64, |acc, &x| acc.checked_mul(x))
    }

    /// True when every element of `self` lies in `0..extent` of `shape`.
    pub fn in_bounds(&self, shape: &Tuple) -> bool {
        self.len() == shape.len() && self.iter().zip(shape.iter()).all(|(&a, &s)| 0 <= a && a < s)
    }

    /// Iterates every point of the rectangular space `0..extents[0] x ...`,
    /// last dimension varying fastest.
    pub fn points_of(extents: &Tuple) -> PointIter {
        PointIter::new(extents.clone())
    }
}

impl Deref for Tuple {
    type Target = [i64];
    fn deref(&self) -> &[i64] {
        &self.0
    }
}

impl From<Vec<i64>> for Tuple {
    fn from(v: Vec<i64>) -> Self {
        Tuple(v)
    }
}

impl<const N: usize> From<[i64; N]> for Tuple {
    fn from(v: [i64; N]) -> Self {
        Tuple(v.to_vec())
    }
}

impl fmt::Display for Tuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x}")?;
        }
        if self.0.len() == 1 {
            write!(f, ",")?;
        }
        write!(f, ")")
    }
}

/// Parses `6,6`, `6x6`, or `(6, 6)`.
impl FromStr for Tuple {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let parts: Vec<&str> = inner
            .split([',', 'x'])
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .collect();
        if parts.is_empty() {
            return Err(format!("empty tuple `{s}`"));
        }
        parts
            .iter()
            .map(|p| p.parse::<i64>().map_err(|e| format!("bad tuple element `{p}`: {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(Tuple)
    }
}

/// Row-major iterator over all points of a rectangular extent.
#[derive(Clone, Debug)]
pub struct PointIter {
    extents: Tuple,
    next: Option<Vec<i64>>,
}

impl PointIter {
    fn new(extents: Tuple) -> Self {
        let next = if extents.is_empty() || extents.iter().any(|&e| e <= 0) {
            None
        } else {
            Some(vec![0; extents.len()])
        };
        PointIter { extents, next }
    }
}

impl Iterator for PointIter {
    type Item = Tuple;

    fn next(&mut self) -> Option<Tuple> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut dim = succ.len();
        loop {
            if dim == 0 {
                break;
            }
            dim -= 1;
            succ[dim] += 1;
            if succ[dim] < self.extents[dim] {
                self.next = Some(succ);
                break;
            }
            succ[dim] = 0;
        }
        Some(Tuple(current))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ProcKind {
    Cpu,
    Gpu,
    Omp,
}

impl ProcKind {
    pub fn keyword(self) -> &'static str {
        match self {
            ProcKind::Cpu => "CPU",
            ProcKind::Gpu => "GPU",
            ProcKind::Omp => "OMP",
        }
    }
}

impl fmt::Display for ProcKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

impl FromStr for ProcKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "CPU" => Ok(ProcKind::Cpu),
            "GPU" => Ok(ProcKind::Gpu),
            "OMP" => Ok(ProcKind::Omp),
            other => Err(format!("unknown processor kind `{other}` (expected CPU, GPU or OMP)")),
        }
    }
}

/// The base two-dimensional machine grid `(nodes, procs_per_node)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MachineShape {
    pub kind: ProcKind,
    pub nodes: u32,
    pub procs_per_node: u32,
}

impl MachineShape {
    pub fn new(kind: ProcKind, nodes: u32, procs_per_node: u32) -> Result<Self, SpaceError> {
        if nodes == 0 || procs_per_node == 0 {
            return Err(SpaceError::EmptyMachine);
        }
        Ok(MachineShape { kind, nodes, procs_per_node })
    }

    pub fn gpu(nodes: u32, procs_per_node: u32) -> Self {
        MachineShape::new(ProcKind::Gpu, nodes, procs_per_node).expect("non-empty machine")
    }

    pub fn shape(&self) -> Tuple {
        Tuple(vec![i64::from(self.nodes), i64::from(self.procs_per_node)])
    }

    pub fn processor_count(&self) -> u64 {
        u64::from(self.nodes) * u64::from(self.procs_per_node)
    }
}

/// A base processor coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProcessorRef {
    pub node: u32,
    pub proc: u32,
}

impl ProcessorRef {
    pub fn new(node: u32, proc: u32) -> Self {
        ProcessorRef { node, proc }
    }
}

impl fmt::Display for ProcessorRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(node {}, proc {})", self.node, self.proc)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Transform {
    Split { dim: usize, factor: i64 },
    Merge { p: usize, q: usize },
    Swap { p: usize, q: usize },
    Slice { dim: usize, low: i64, high: i64 },
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Transform::Split { dim, factor } => write!(f, "split({dim}, {factor})"),
            Transform::Merge { p, q } => write!(f, "merge({p}, {q})"),
            Transform::Swap { p, q } => write!(f, "swap({p}, {q})"),
            Transform::Slice { dim, low, high } => write!(f, "slice({dim}, {low}, {high})"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpaceError {
    #[error("machine must have at least one node and one processor per node")]
    EmptyMachine,
    #[error("dimension {dim} out of range for a {rank}-dimensional space")]
    DimOutOfRange { dim: usize, rank: usize },
    #[error("split factor {factor} does not divide extent {extent} of dimension {dim}")]
    NonDivisibleSplit { dim: usize, factor: i64, extent: i64 },
    #[error("merge requires p < q, got p = {p}, q = {q}")]
    BadDimOrder { p: usize, q: usize },
    #[error("slice bounds [{low}, {high}] invalid for extent {extent} of dimension {dim}")]
    BadSliceBounds { dim: usize, low: i64, high: i64, extent: i64 },
    #[error("factorization product {product} does not equal extent {extent} of dimension {dim}")]
    ProductMismatch { dim: usize, product: i64, extent: i64 },
    #[error("index {index} out of range for space of shape {shape}")]
    IndexOutOfRange { index: Tuple, shape: Tuple },
    #[error("index arithmetic overflowed")]
    Overflow,
}

/// A machine grid plus the chain of transformations applied to it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProcSpace {
    base: MachineShape,
    chain: Vec<Transform>,
    // shapes[i] is the shape the i-th transform was applied to; the last
    // entry is the current shape, so shapes.len() == chain.len() + 1.
    shapes: Vec<Tuple>,
}

impl ProcSpace {
    pub fn machine(base: MachineShape) -> Self {
        ProcSpace { base, chain: Vec::new(), shapes: vec![base.shape()] }
    }

    pub fn base(&self) -> MachineShape {
        self.base
    }

    pub fn chain(&self) -> &[Transform] {
        &self.chain
    }

    pub fn shape(&self) -> &Tuple {
        self.shapes.last().expect("shape history is never empty")
    }

    pub fn rank(&self) -> usize {
        self.shape().len()
    }

    /// Number of addressable indices.
    pub fn volume(&self) -> i64 {
        self.shape().product().expect("extents are bounded by the machine size")
    }

    pub fn has_slice(&self) -> bool {
        self.chain.iter().any(|t| matches!(t, Transform::Slice { .. }))
    }

    fn check_dim(&self, dim: usize) -> Result<(), SpaceError> {
        if dim < self.rank() {
            Ok(())
        } else {
            Err(SpaceError::DimOutOfRange { dim, rank: self.rank() })
        }
    }

    fn push(&self, t: Transform, shape: Vec<i64>) -> ProcSpace {
        let mut out = self.clone();
        out.chain.push(t);
        out.shapes.push(Tuple(shape));
        out
    }

    /// Splits dimension `dim` into `(factor, extent / factor)`.
    pub fn split(&self, dim: usize, factor: i64) -> Result<ProcSpace, SpaceError> {
        self.check_dim(dim)?;
        let extent = self.shape()[dim];
        if factor <= 0 || extent % factor != 0 {
            return Err(SpaceError::NonDivisibleSplit { dim, factor, extent });
        }
        let mut shape = self.shape().to_vec();
        shape[dim] = factor;
        shape.insert(dim + 1, extent / factor);
        Ok(self.push(Transform::Split { dim, factor }, shape))
    }

    /// Fuses dimensions `p < q` into a single dimension at position `p`.
    pub fn merge(&self, p: usize, q: usize) -> Result<ProcSpace, SpaceError> {
        self.check_dim(p)?;
        self.check_dim(q)?;
        if p >= q {
            return Err(SpaceError::BadDimOrder { p, q });
        }
        let mut shape = self.shape().to_vec();
        shape[p] = shape[p].checked_mul(shape[q]).ok_or(SpaceError::Overflow)?;
        shape.remove(q);
        Ok(self.push(Transform::Merge { p, q }, shape))
    }

    pub fn swap(&self, p: usize, q: usize) -> Result<ProcSpace, SpaceError> {
        self.check_dim(p)?;
        self.check_dim(q)?;
        let mut shape = self.shape().to_vec();
        shape.swap(p, q);
        Ok(self.push(Transform::Swap { p, q }, shape))
    }

    /// Restricts dimension `dim` to the inclusive range `low..=high`.
    pub fn slice(&self, dim: usize, low: i64, high: i64) -> Result<ProcSpace, SpaceError> {
        self.check_dim(dim)?;
        let extent = self.shape()[dim];
        if low < 0 || low > high || high >= extent {
            return Err(SpaceError::BadSliceBounds { dim, low, high, extent });
        }
        let mut shape = self.shape().to_vec();
        shape[dim] = high - low + 1;
        Ok(self.push(Transform::Slice { dim, low, high }, shape))
    }

    pub fn apply(&self, t: Transform) -> Result<ProcSpace, SpaceError> {
        match t {
            Transform::Split { dim, factor } => self.split(dim, factor),
            Transform::Merge { p, q } => self.merge(p, q),
            Transform::Swap { p, q } => self.swap(p, q),
            Transform::Slice { dim, low, high } => self.slice(dim, low, high),
        }
    }

    /// Replaces dimension `dim` by the given factors, in order, through
    /// the split sequence `split(dim + n - 1, factors[n - 1])` for
    /// `n = 1 .. k - 1`.
    pub fn desugar_decompose(&self, dim: usize, factors: &[i64]) -> Result<ProcSpace, SpaceError> {
        self.check_dim(dim)?;
        let extent = self.shape()[dim];
        let product = factors
            .iter()
            .try_fold(1i64, |acc, &f| acc.checked_mul(f))
            .ok_or(SpaceError::Overflow)?;
        if factors.is_empty() || product != extent || factors.iter().any(|&f| f <= 0) {
            return Err(SpaceError::ProductMismatch { dim, product, extent });
        }
        let mut space = self.clone();
        for (n, &f) in factors.iter().enumerate().take(factors.len() - 1) {
            space = space.split(dim + n, f)?;
        }
        Ok(space)
    }

    /// Maps an index of this space to an index of the base machine grid.
    pub fn resolve_to_base(&self, idx: &Tuple) -> Result<Tuple, SpaceError> {
        if !idx.in_bounds(self.shape()) {
            return Err(SpaceError::IndexOutOfRange { index: idx.clone(), shape: self.shape().clone() });
        }
        let mut a = idx.to_vec();
        for (t, input) in self.chain.iter().zip(&self.shapes).rev() {
            a = invert_step(*t, input, &a)?;
            debug_assert!(Tuple(a.clone()).in_bounds(input));
        }
        Ok(Tuple(a))
    }

    /// Resolves an index to its base `(node, proc)` coordinate.
    pub fn resolve(&self, idx: &Tuple) -> Result<ProcessorRef, SpaceError> {
        let b = self.resolve_to_base(idx)?;
        let node = u32::try_from(b[0]).map_err(|_| SpaceError::Overflow)?;
        let proc = u32::try_from(b[1]).map_err(|_| SpaceError::Overflow)?;
        Ok(ProcessorRef { node, proc })
    }

    /// Every `(index, processor)` pair of the space, row-major. Intended
    /// for exhaustive checks on small spaces.
    pub fn materialize(&self) -> Result<Vec<(Tuple, ProcessorRef)>, SpaceError> {
        Tuple::points_of(self.shape())
            .map(|idx| self.resolve(&idx).map(|p| (idx, p)))
            .collect()
    }
}

fn invert_step(t: Transform, input: &Tuple, a: &[i64]) -> Result<Vec<i64>, SpaceError> {
    let b = match t {
        Transform::Split { dim, factor } => {
            let mut b = Vec::with_capacity(a.len() - 1);
            b.extend_from_slice(&a[..dim]);
            let fused = a[dim + 1]
                .checked_mul(factor)
                .and_then(|x| x.checked_add(a[dim]))
                .ok_or(SpaceError::Overflow)?;
            b.push(fused);
            b.extend_from_slice(&a[dim + 2..]);
            b
        }
        Transform::Merge { p, q } => {
            let sp = input[p];
            let mut b = Vec::with_capacity(a.len() + 1);
            for (t, _) in input.iter().enumerate() {
                let v = if t < p || (p < t && t < q) {
                    a[t]
                } else if t == p {
                    a[p].rem_euclid(sp)
                } else if t == q {
                    a[p].div_euclid(sp)
                } else {
                    a[t - 1]
                };
                b.push(v);
            }
            b
        }
        Transform::Swap { p, q } => {
            let mut b = a.to_vec();
            b.swap(p, q);
            b
        }
        Transform::Slice { dim, low, .. } => {
            let mut b = a.to_vec();
            b[dim] = b[dim].checked_add(low).ok_or(SpaceError::Overflow)?;
            b
        }
    };
    if !Tuple(b.clone()).in_bounds(input) {
        return Err(SpaceError::IndexOutOfRange { index: Tuple(b), shape: input.clone() });
    }
    Ok(b)
}
