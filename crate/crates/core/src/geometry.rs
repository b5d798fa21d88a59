//! Elementary regions and the binary partition schemes that generate them.
//!
//! Continuous regions are dyadic boxes inside `[0, 1]^p`. Each dimension is
//! stored as a heap-numbered dyadic interval: code `2^depth + index` covers
//! `[index / 2^depth, (index + 1) / 2^depth)`, with the upper end closed when it
//! touches 1. Because the code describes the rectangle itself and not the path
//! that produced it, two split orders reaching the same box yield equal
//! regions, which is what lets the marginal-likelihood memo merge them.
//!
//! Discrete regions are slices of the binary table `{1, 2}^p`: each dimension
//! is either unset (code 0) or fixed to state 1 or 2.

use std::fmt;

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Deepest dyadic refinement allowed in a single dimension.
pub const MAX_DEPTH_PER_DIM: u32 = 62;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RegionKind {
    Continuous,
    Discrete,
}

/// Which half of a binary split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Child {
    Left,
    Right,
}

impl Child {
    /// 1-based child number (1 = left/lower, 2 = right/upper).
    pub fn number(self) -> usize {
        match self {
            Child::Left => 1,
            Child::Right => 2,
        }
    }
}

/// An elementary region of a recursive binary partition.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Region {
    kind: RegionKind,
    codes: SmallVec<[u64; 4]>,
}

/// Hashable identity of a region; equal rectangles give equal keys.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegionKey(Region);

impl RegionKey {
    pub fn region(&self) -> &Region {
        &self.0
    }
}

impl fmt::Display for RegionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl Region {
    /// The unit cube `[0, 1]^dim`.
    pub fn continuous_root(dim: usize) -> Self {
        Region {
            kind: RegionKind::Continuous,
            codes: SmallVec::from_elem(1, dim),
        }
    }

    /// The full table `{1, 2}^dim`.
    pub fn discrete_root(dim: usize) -> Self {
        Region {
            kind: RegionKind::Discrete,
            codes: SmallVec::from_elem(0, dim),
        }
    }

    /// Builds a continuous region from per-dimension `(depth, index)` pairs.
    pub fn from_dyadic(intervals: &[(u32, u64)]) -> Result<Self> {
        let mut codes = SmallVec::with_capacity(intervals.len());
        for &(depth, index) in intervals {
            if depth > MAX_DEPTH_PER_DIM || index >= 1u64 << depth {
                return Err(Error::InvalidConfig(format!(
                    "dyadic interval (depth {depth}, index {index}) is not valid"
                )));
            }
            codes.push((1u64 << depth) + index);
        }
        Ok(Region {
            kind: RegionKind::Continuous,
            codes,
        })
    }

    /// Builds a discrete region from per-dimension states (`None` = unset).
    pub fn from_states(states: &[Option<u8>]) -> Result<Self> {
        let mut codes = SmallVec::with_capacity(states.len());
        for s in states {
            match s {
                None => codes.push(0),
                Some(v @ (1 | 2)) => codes.push(u64::from(*v)),
                Some(v) => {
                    return Err(Error::InvalidConfig(format!(
                        "table state {v} is not 1 or 2"
                    )))
                }
            }
        }
        Ok(Region {
            kind: RegionKind::Discrete,
            codes,
        })
    }

    pub fn kind(&self) -> RegionKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.codes.len()
    }

    pub fn is_continuous(&self) -> bool {
        self.kind == RegionKind::Continuous
    }

    /// Dyadic depth of dimension `d` (continuous regions only; 0 otherwise).
    pub fn depth(&self, d: usize) -> u32 {
        match self.kind {
            RegionKind::Continuous => 63 - self.codes[d].leading_zeros(),
            RegionKind::Discrete => 0,
        }
    }

    /// Dyadic index of dimension `d` (continuous regions only).
    pub fn index(&self, d: usize) -> u64 {
        let code = self.codes[d];
        code - (1u64 << (63 - code.leading_zeros()))
    }

    /// Table state of dimension `d` (discrete regions only).
    pub fn state(&self, d: usize) -> Option<u8> {
        match self.codes[d] {
            0 => None,
            v => Some(v as u8),
        }
    }

    /// Number of splits applied since the root.
    pub fn level(&self) -> u32 {
        match self.kind {
            RegionKind::Continuous => (0..self.dim()).map(|d| self.depth(d)).sum(),
            RegionKind::Discrete => self.codes.iter().filter(|&&c| c != 0).count() as u32,
        }
    }

    /// Dimensions of a discrete region that are still unset, in ascending order.
    pub fn unset_dims(&self) -> impl Iterator<Item = usize> + '_ {
        self.codes
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 0)
            .map(|(d, _)| d)
    }

    /// Exact measure: Lebesgue volume or cell count.
    pub fn measure(&self) -> f64 {
        match self.kind {
            RegionKind::Continuous => pow2(-(self.level() as i32)),
            RegionKind::Discrete => pow2(self.unset_dims().count() as i32),
        }
    }

    /// Natural log of [`Region::measure`], computed from the exponent directly.
    pub fn log_measure(&self) -> f64 {
        match self.kind {
            RegionKind::Continuous => -(self.level() as f64) * std::f64::consts::LN_2,
            RegionKind::Discrete => self.unset_dims().count() as f64 * std::f64::consts::LN_2,
        }
    }

    /// Bounds `[lo, hi]` of dimension `d`. Discrete states map to `[s, s]`,
    /// unset dimensions to `[1, 2]`.
    pub fn bounds(&self, d: usize) -> (f64, f64) {
        match self.kind {
            RegionKind::Continuous => {
                let width = pow2(-(self.depth(d) as i32));
                let lo = self.index(d) as f64 * width;
                (lo, lo + width)
            }
            RegionKind::Discrete => match self.state(d) {
                Some(s) => (f64::from(s), f64::from(s)),
                None => (1.0, 2.0),
            },
        }
    }

    /// Euclidean diameter of a continuous region.
    pub fn diameter(&self) -> f64 {
        (0..self.dim())
            .map(|d| {
                let w = pow2(-(self.depth(d) as i32));
                w * w
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Whether `x` belongs to the region under the half-open convention.
    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self.kind {
            RegionKind::Continuous => (0..self.dim()).all(|d| {
                let (lo, hi) = self.bounds(d);
                let v = x[d];
                v >= lo && (v < hi || (hi == 1.0 && v == 1.0))
            }),
            RegionKind::Discrete => (0..self.dim()).all(|d| match self.state(d) {
                Some(s) => x[d] == f64::from(s),
                None => x[d] == 1.0 || x[d] == 2.0,
            }),
        }
    }

    /// Whether `self` is contained in `other` (both from the same root).
    pub fn is_within(&self, other: &Region) -> bool {
        if self.kind != other.kind || self.dim() != other.dim() {
            return false;
        }
        match self.kind {
            RegionKind::Continuous => (0..self.dim()).all(|d| {
                let (ds, dother) = (self.depth(d), other.depth(d));
                ds >= dother && self.codes[d] >> (ds - dother) == other.codes[d]
            }),
            RegionKind::Discrete => (0..self.dim()).all(|d| other.codes[d] == 0 || other.codes[d] == self.codes[d]),
        }
    }

    /// Whether dimension `d` of `self` is strictly finer than in `other`.
    pub(crate) fn finer_in(&self, other: &Region, d: usize) -> bool {
        match self.kind {
            RegionKind::Continuous => self.depth(d) > other.depth(d),
            RegionKind::Discrete => other.codes[d] == 0 && self.codes[d] != 0,
        }
    }

    /// Halves `self` along `d`, returning `(lower, upper)`.
    pub fn bisect(&self, d: usize) -> (Region, Region) {
        self.halve(d)
    }

    pub fn canonical_key(&self) -> RegionKey {
        RegionKey(self.clone())
    }

    fn halve(&self, d: usize) -> (Region, Region) {
        let mut left = self.clone();
        let mut right = self.clone();
        match self.kind {
            RegionKind::Continuous => {
                left.codes[d] = self.codes[d] << 1;
                right.codes[d] = (self.codes[d] << 1) | 1;
            }
            RegionKind::Discrete => {
                left.codes[d] = 1;
                right.codes[d] = 2;
            }
        }
        (left, right)
    }

    /// Midpoint of dimension `d` of a continuous region.
    fn midpoint(&self, d: usize) -> f64 {
        let depth = self.depth(d) as i32;
        (2 * self.index(d) + 1) as f64 * pow2(-(depth + 1))
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            RegionKind::Continuous => {
                f.write_str("C:")?;
                for d in 0..self.dim() {
                    if d > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{}.{}", self.depth(d), self.index(d))?;
                }
            }
            RegionKind::Discrete => {
                f.write_str("T:")?;
                for d in 0..self.dim() {
                    if d > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{}", self.codes[d])?;
                }
            }
        }
        Ok(())
    }
}

impl Serialize for Region {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let (lower, upper): (Vec<f64>, Vec<f64>) = (0..self.dim()).map(|d| self.bounds(d)).unzip();
        let mut s = serializer.serialize_struct("Region", 4)?;
        s.serialize_field("key", &self.to_string())?;
        s.serialize_field("level", &self.level())?;
        s.serialize_field("lower", &lower)?;
        s.serialize_field("upper", &upper)?;
        s.end()
    }
}

/// Exact power of two.
fn pow2(e: i32) -> f64 {
    2f64.powi(e)
}

/// A recursive binary partitioning rule over `p` dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "variant", content = "dim", rename_all = "snake_case")]
pub enum PartitionScheme {
    /// Any coordinate may be bisected at its midpoint: `M(A) = p`.
    FullDyadic(usize),
    /// Coordinates are bisected in turn; at level `k` only `k mod p` is cut.
    Cycling(usize),
    /// Binary contingency table; any still-free coordinate may be fixed.
    BinaryTable(usize),
}

impl PartitionScheme {
    pub fn dim(&self) -> usize {
        match *self {
            PartitionScheme::FullDyadic(p)
            | PartitionScheme::Cycling(p)
            | PartitionScheme::BinaryTable(p) => p,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, PartitionScheme::BinaryTable(_))
    }

    pub fn root(&self) -> Region {
        match *self {
            PartitionScheme::BinaryTable(p) => Region::discrete_root(p),
            PartitionScheme::FullDyadic(p) | PartitionScheme::Cycling(p) => {
                Region::continuous_root(p)
            }
        }
    }

    /// True when every splittable region has exactly one way to split.
    pub fn has_unique_split(&self) -> bool {
        match *self {
            PartitionScheme::Cycling(_) => true,
            PartitionScheme::FullDyadic(p) | PartitionScheme::BinaryTable(p) => p == 1,
        }
    }

    fn check(&self, region: &Region) -> Result<()> {
        if region.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: region.dim(),
            });
        }
        if region.is_continuous() == self.is_discrete() {
            return Err(Error::RegionKindMismatch);
        }
        Ok(())
    }

    /// `M(A)`: the number of ways `region` can be split.
    pub fn num_splits(&self, region: &Region) -> Result<usize> {
        self.check(region)?;
        Ok(self.splits_unchecked(region))
    }

    pub(crate) fn splits_unchecked(&self, region: &Region) -> usize {
        match *self {
            PartitionScheme::FullDyadic(p) => p,
            PartitionScheme::Cycling(_) => 1,
            PartitionScheme::BinaryTable(_) => region.unset_dims().count(),
        }
    }

    /// The coordinate cut by split `j` (0-based) of `region`.
    pub fn split_dim(&self, region: &Region, j: usize) -> Result<usize> {
        let available = self.num_splits(region)?;
        if j >= available {
            return Err(Error::SplitOutOfRange {
                index: j,
                available,
            });
        }
        Ok(self.split_dim_unchecked(region, j))
    }

    pub(crate) fn split_dim_unchecked(&self, region: &Region, j: usize) -> usize {
        match *self {
            PartitionScheme::FullDyadic(_) => j,
            PartitionScheme::Cycling(p) => region.level() as usize % p,
            PartitionScheme::BinaryTable(_) => region
                .unset_dims()
                .nth(j)
                .expect("split index checked against num_splits"),
        }
    }

    /// Applies split `j` (0-based) and returns `(left, right)`.
    pub fn split(&self, region: &Region, j: usize) -> Result<(Region, Region)> {
        let d = self.split_dim(region, j)?;
        if region.is_continuous() && region.depth(d) >= MAX_DEPTH_PER_DIM {
            return Err(Error::InvalidConfig(format!(
                "dimension {d} cannot be refined past depth {MAX_DEPTH_PER_DIM}"
            )));
        }
        Ok(region.halve(d))
    }

    pub(crate) fn split_unchecked(&self, region: &Region, j: usize) -> (Region, Region) {
        region.halve(self.split_dim_unchecked(region, j))
    }

    /// Which child of split `j` contains `x`.
    pub fn locate(&self, region: &Region, j: usize, x: &[f64]) -> Result<Child> {
        let d = self.split_dim(region, j)?;
        if !region.contains(x) {
            return Err(Error::PointOutsideRegion { point: x.to_vec() });
        }
        Ok(locate_in_dim(region, d, x))
    }
}

/// Child of the bisection of `region` along `d` holding `x`; `x` must lie in `region`.
pub(crate) fn locate_in_dim(region: &Region, d: usize, x: &[f64]) -> Child {
    match region.kind {
        RegionKind::Continuous => {
            if x[d] < region.midpoint(d) {
                Child::Left
            } else {
                Child::Right
            }
        }
        RegionKind::Discrete => {
            if x[d] == 1.0 {
                Child::Left
            } else {
                Child::Right
            }
        }
    }
}
