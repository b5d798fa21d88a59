//! Marginal likelihood recursion and posterior parameters.
//!
//! For a region `A` holding data, `Phi(A)` is the expected likelihood of the
//! points in `A` under the tree induced on `A`:
//!
//! ```text
//! Phi(A) = rho * Phi0(A)
//!        + (1 - rho) * sum_j lambda_j * D(n^j + alpha^j) / D(alpha^j) * Phi(A_1^j) * Phi(A_2^j)
//! ```
//!
//! with `Phi0(A) = mu(A)^-n(A)` and `D(t) = Gamma(t1) Gamma(t2) / Gamma(t1 + t2)`.
//! Everything is carried in log space. Results are memoized per rectangle in a
//! concurrent [`PhiTable`], so the overlapping split orders of the full dyadic
//! scheme are evaluated once.

use std::collections::HashMap;

use dashmap::DashMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::format::FORMAT_VERSION;
use crate::geometry::{locate_in_dim, Child, PartitionScheme, Region, MAX_DEPTH_PER_DIM};
use crate::prior::PriorSpec;

/// Regions with fewer points than this are processed on the calling thread.
const PARALLEL_MIN_POINTS: usize = 512;

/// Tolerance for rounding overshoot of the posterior stopping probability.
const POST_RHO_SLACK: f64 = 1e-12;

/// A set of `p`-dimensional observations stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    dim: usize,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidData("dimension must be at least 1".into()));
        }
        if values.len() % dim != 0 {
            return Err(Error::InvalidData(format!(
                "{} values do not form {dim}-dimensional points",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("non-finite coordinate {v}")));
        }
        Ok(Dataset { dim, values })
    }

    pub fn empty(dim: usize) -> Self {
        Dataset {
            dim,
            values: Vec::new(),
        }
    }

    pub fn from_points<P: AsRef<[f64]>>(dim: usize, points: &[P]) -> Result<Self> {
        let mut values = Vec::with_capacity(points.len() * dim);
        for p in points {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            values.extend_from_slice(p);
        }
        Self::new(dim, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Checks that every point lies in the scheme's root region.
    pub fn validate_for(&self, scheme: &PartitionScheme) -> Result<()> {
        if self.dim != scheme.dim() {
            return Err(Error::DimensionMismatch {
                expected: scheme.dim(),
                found: self.dim,
            });
        }
        let root = scheme.root();
        for (i, p) in self.points().enumerate() {
            if !root.contains(p) {
                let domain = if scheme.is_discrete() { "{1,2}^p" } else { "[0,1]^p" };
                return Err(Error::InvalidData(format!(
                    "observation {} = {p:?} lies outside {domain}",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

/// Depth controls for the recursion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecursionLimits {
    /// Regions with measure below this are treated as uniform.
    pub precision_threshold: f64,
    /// Regions at this level are treated as uniform.
    pub max_level: u32,
}

impl RecursionLimits {
    pub fn new(precision_threshold: f64, max_level: u32) -> Result<Self> {
        if !(precision_threshold > 0.0 && precision_threshold.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "precision threshold must be positive, got {precision_threshold}"
            )));
        }
        if max_level > MAX_DEPTH_PER_DIM {
            return Err(Error::InvalidConfig(format!(
                "max level {max_level} exceeds {MAX_DEPTH_PER_DIM}"
            )));
        }
        Ok(RecursionLimits {
            precision_threshold,
            max_level,
        })
    }

    /// `1e-6` in one dimension, `1e-4` otherwise.
    /// Whether `region` is too small or too deep to be refined further.
    pub fn forces_stop(&self, region: &Region) -> bool {
        region.measure() < self.precision_threshold || region.level() >= self.max_level
    }

    pub fn for_dim(dim: usize) -> Self {
        RecursionLimits {
            precision_threshold: if dim <= 1 { 1e-6 } else { 1e-4 },
            max_level: MAX_DEPTH_PER_DIM,
        }
    }
}

/// Why a region's value came from a closed form instead of the recursion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    /// No observations: `Phi = 1`.
    Empty,
    /// A single table cell: `Phi = 1`.
    SingleCell,
    /// One observation under the self-similar Beta(1/2, 1/2) prior: `Phi = 1 / mu(A)`.
    SingleObservation,
    /// Below the precision threshold or at the level cap: `Phi = Phi0`.
    Precision,
}

/// Memoized quantities for one region.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhiRecord {
    pub n: usize,
    pub log_phi: f64,
    pub log_phi0: f64,
    pub post_rho: f64,
    pub post_lambda: Vec<f64>,
    pub post_alpha: Vec<(f64, f64)>,
    pub split_counts: Vec<(usize, usize)>,
    pub terminal: Option<Terminal>,
}

/// Posterior parameters of the optional Pólya tree at one region.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PosteriorParams {
    pub post_rho: f64,
    pub post_lambda: Vec<f64>,
    pub post_alpha: Vec<(f64, f64)>,
}

/// Concurrent memo of [`PhiRecord`]s keyed by region.
#[derive(Debug, Default)]
pub struct PhiTable {
    map: DashMap<Region, PhiRecord>,
}

#[derive(Serialize)]
struct TableEntry<'a> {
    region: &'a Region,
    #[serde(flatten)]
    record: &'a PhiRecord,
}

#[derive(Serialize)]
struct TableDocument<'a> {
    format_version: u32,
    entries: Vec<TableEntry<'a>>,
}

impl PhiTable {
    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, region: &Region) -> Option<PhiRecord> {
        self.map.get(region).map(|r| r.clone())
    }

    pub fn log_phi(&self, region: &Region) -> Option<f64> {
        self.map.get(region).map(|r| r.log_phi)
    }

    fn insert_if_absent(&self, region: Region, record: PhiRecord) {
        self.map.entry(region).or_insert(record);
    }

    /// All entries ordered by region.
    pub fn sorted_entries(&self) -> Vec<(Region, PhiRecord)> {
        let mut v: Vec<_> = self
            .map
            .iter()
            .map(|e| (e.key().clone(), e.value().clone()))
            .collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }

    /// JSON export, entries ordered by region.
    pub fn to_json(&self) -> serde_json::Result<String> {
        let entries = self.sorted_entries();
        let doc = TableDocument {
            format_version: FORMAT_VERSION,
            entries: entries
                .iter()
                .map(|(region, record)| TableEntry { region, record })
                .collect(),
        };
        crate::format::to_json_string(&doc)
    }
}

/// `log Phi0(A) = -n log mu(A)`, and 0 for an empty region.
pub fn log_phi0(region: &Region, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        -(n as f64) * region.log_measure()
    }
}

/// `log Gamma(a + n) - log Gamma(a)`.
fn ln_rising(a: f64, n: usize) -> f64 {
    match n {
        0 => 0.0,
        1..=32 => {
            let mut prod = 1.0;
            for i in 0..n {
                prod *= a + i as f64;
            }
            prod.ln()
        }
        _ => ln_gamma(a + n as f64) - ln_gamma(a),
    }
}

/// `log D(n + alpha) - log D(alpha)` for a binary split.
pub fn log_dirichlet_ratio(n: (usize, usize), alpha: (f64, f64)) -> f64 {
    ln_rising(alpha.0, n.0) + ln_rising(alpha.1, n.1) - ln_rising(alpha.0 + alpha.1, n.0 + n.1)
}

/// `log(exp(a) + exp(b))` tolerant of `-inf` arguments.
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + ((a - hi).exp() + (b - hi).exp()).ln()
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let hi = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + terms.iter().map(|t| (t - hi).exp()).sum::<f64>().ln()
}

/// The observations inside one region: data indices plus an optional
/// hypothetical extra point.
#[derive(Clone, Copy)]
struct Members<'a> {
    idx: &'a [u32],
    extra: Option<&'a [f64]>,
}

impl Members<'_> {
    fn len(&self) -> usize {
        self.idx.len() + usize::from(self.extra.is_some())
    }
}

/// Per-split ingredients gathered before combining into a record.
struct SplitTerm {
    counts: (usize, usize),
    alpha: (f64, f64),
    log_children: f64,
}

/// Computes and memoizes `Phi` for one dataset and prior.
#[derive(Debug)]
pub struct PhiEngine {
    data: Dataset,
    spec: PriorSpec,
    limits: RecursionLimits,
    closed_forms: bool,
    table: PhiTable,
}

impl PhiEngine {
    pub fn new(data: Dataset, spec: PriorSpec, limits: RecursionLimits) -> Result<Self> {
        data.validate_for(spec.scheme())?;
        if data.len() > u32::MAX as usize {
            return Err(Error::InvalidData("too many observations".into()));
        }
        Ok(PhiEngine {
            data,
            spec,
            limits,
            closed_forms: true,
            table: PhiTable::default(),
        })
    }

    /// Disables the single-observation closed form, forcing explicit recursion.
    pub fn without_closed_forms(mut self) -> Self {
        self.closed_forms = false;
        self
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn spec(&self) -> &PriorSpec {
        &self.spec
    }

    pub fn scheme(&self) -> &PartitionScheme {
        self.spec.scheme()
    }

    pub fn limits(&self) -> &RecursionLimits {
        &self.limits
    }

    pub fn table(&self) -> &PhiTable {
        &self.table
    }

    /// Indices of the observations lying in `region`.
    pub fn indices_in(&self, region: &Region) -> Vec<u32> {
        (0..self.data.len() as u32)
            .filter(|&i| region.contains(self.data.point(i as usize)))
            .collect()
    }

    fn all_indices(&self) -> Vec<u32> {
        (0..self.data.len() as u32).collect()
    }

    /// `log Phi(root)`, the log marginal likelihood of the whole dataset.
    pub fn log_phi_root(&self) -> Result<f64> {
        let root = self.scheme().root();
        self.compute_with_indices(&root, &self.all_indices())
    }

    /// `log Phi(region)`, filling the table for the region and its descendants.
    pub fn compute_log_phi(&self, region: &Region) -> Result<f64> {
        self.scheme().num_splits(region)?;
        if let Some(v) = self.table.log_phi(region) {
            return Ok(v);
        }
        let idx = self.indices_in(region);
        self.compute_with_indices(region, &idx)
    }

    /// Like [`PhiEngine::compute_log_phi`] with the region's members already known.
    pub(crate) fn compute_with_indices(&self, region: &Region, idx: &[u32]) -> Result<f64> {
        if let Some(v) = self.table.log_phi(region) {
            return Ok(v);
        }
        let level = region.level();
        if level > self.limits.max_level {
            return Err(Error::MaxLevelExceeded {
                level,
                max_level: self.limits.max_level,
            });
        }
        let members = Members { idx, extra: None };
        let record = match self.terminal_record(region, members) {
            Some(r) => r,
            None => {
                let terms = self.split_terms_base(region, idx)?;
                self.combine(region, members.len(), terms)?
            }
        };
        let value = record.log_phi;
        self.table.insert_if_absent(region.clone(), record);
        Ok(value)
    }

    /// Memo lookup, computing the record from scratch when absent.
    pub(crate) fn record_with_indices(&self, region: &Region, idx: &[u32]) -> Result<PhiRecord> {
        if let Some(r) = self.table.get(region) {
            return Ok(r);
        }
        self.compute_with_indices(region, idx)?;
        self.table
            .get(region)
            .ok_or_else(|| Error::RegionNotInTable(region.to_string()))
    }

    /// Posterior stopping, selection and allocation parameters at `region`.
    pub fn posterior_params(&self, region: &Region) -> Result<PosteriorParams> {
        let r = self
            .table
            .get(region)
            .ok_or_else(|| Error::RegionNotInTable(region.to_string()))?;
        Ok(PosteriorParams {
            post_rho: r.post_rho,
            post_lambda: r.post_lambda,
            post_alpha: r.post_alpha,
        })
    }

    fn terminal_kind(&self, region: &Region, n: usize) -> Option<Terminal> {
        if n == 0 {
            return Some(Terminal::Empty);
        }
        let m = self.scheme().splits_unchecked(region);
        if m == 0 {
            return Some(Terminal::SingleCell);
        }
        if n == 1 && self.closed_forms && self.spec.is_self_similar_half() {
            return Some(Terminal::SingleObservation);
        }
        if self.limits.forces_stop(region) {
            return Some(Terminal::Precision);
        }
        None
    }

    fn terminal_record(&self, region: &Region, members: Members<'_>) -> Option<PhiRecord> {
        let n = members.len();
        let kind = self.terminal_kind(region, n)?;
        let scheme = self.scheme();
        let m = scheme.splits_unchecked(region);
        let rho = self.spec.rho();
        let log_phi0 = log_phi0(region, n);
        let record = match kind {
            Terminal::Empty => {
                let alpha: Vec<_> = (0..m).map(|j| self.split_alpha(region, j)).collect();
                PhiRecord {
                    n,
                    log_phi: 0.0,
                    log_phi0,
                    post_rho: rho,
                    post_lambda: vec![1.0 / m as f64; m],
                    split_counts: vec![(0, 0); m],
                    post_alpha: alpha,
                    terminal: Some(kind),
                }
            }
            Terminal::SingleCell | Terminal::Precision => PhiRecord {
                n,
                log_phi: log_phi0,
                log_phi0,
                post_rho: 1.0,
                post_lambda: Vec::new(),
                post_alpha: Vec::new(),
                split_counts: Vec::new(),
                terminal: Some(kind),
            },
            Terminal::SingleObservation => {
                let x = match members.extra {
                    Some(x) => x,
                    None => self.data.point(members.idx[0] as usize),
                };
                let mut counts = Vec::with_capacity(m);
                let mut alpha = Vec::with_capacity(m);
                for j in 0..m {
                    let d = scheme.split_dim_unchecked(region, j);
                    let c = match locate_in_dim(region, d, x) {
                        Child::Left => (1, 0),
                        Child::Right => (0, 1),
                    };
                    let a = self.split_alpha(region, j);
                    alpha.push((a.0 + c.0 as f64, a.1 + c.1 as f64));
                    counts.push(c);
                }
                PhiRecord {
                    n,
                    log_phi: -region.log_measure(),
                    log_phi0,
                    post_rho: rho,
                    post_lambda: vec![1.0 / m as f64; m],
                    post_alpha: alpha,
                    split_counts: counts,
                    terminal: Some(kind),
                }
            }
        };
        Some(record)
    }

    fn split_alpha(&self, region: &Region, j: usize) -> (f64, f64) {
        let (l, r) = self.scheme().split_unchecked(region, j);
        self.spec.weights_for_children(region, &l, &r)
    }

    /// Splits `idx` into the members of the lower and upper halves along `d`.
    pub(crate) fn partition_indices(&self, region: &Region, d: usize, idx: &[u32]) -> (Vec<u32>, Vec<u32>) {
        self.partition(region, d, idx)
    }

    fn partition(&self, region: &Region, d: usize, idx: &[u32]) -> (Vec<u32>, Vec<u32>) {
        idx.iter()
            .partition(|&&i| locate_in_dim(region, d, self.data.point(i as usize)) == Child::Left)
    }

    fn split_terms_base(&self, region: &Region, idx: &[u32]) -> Result<Vec<SplitTerm>> {
        let m = self.scheme().splits_unchecked(region);
        let one = |j: usize| -> Result<SplitTerm> {
            let scheme = self.scheme();
            let (left, right) = scheme.split_unchecked(region, j);
            let alpha = self.spec.weights_for_children(region, &left, &right);
            let cached = self
                .table
                .get(&left)
                .zip(self.table.get(&right))
                .map(|(l, r)| ((l.n, r.n), l.log_phi + r.log_phi));
            let (counts, log_children) = match cached {
                Some(c) => c,
                None => {
                    let d = scheme.split_dim_unchecked(region, j);
                    let (li, ri) = self.partition(region, d, idx);
                    let (lv, rv) = if idx.len() >= PARALLEL_MIN_POINTS {
                        rayon::join(
                            || self.compute_with_indices(&left, &li),
                            || self.compute_with_indices(&right, &ri),
                        )
                    } else {
                        (
                            self.compute_with_indices(&left, &li),
                            self.compute_with_indices(&right, &ri),
                        )
                    };
                    ((li.len(), ri.len()), lv? + rv?)
                }
            };
            Ok(SplitTerm {
                counts,
                alpha,
                log_children,
            })
        };
        if idx.len() >= PARALLEL_MIN_POINTS && m > 1 {
            (0..m).into_par_iter().map(one).collect()
        } else {
            (0..m).map(one).collect()
        }
    }

    fn combine(&self, region: &Region, n: usize, terms: Vec<SplitTerm>) -> Result<PhiRecord> {
        let m = terms.len();
        let rho = self.spec.rho();
        let log_phi0 = log_phi0(region, n);
        let log_lambda = -(m as f64).ln();
        let split_logs: Vec<f64> = terms
            .iter()
            .map(|t| log_lambda + log_dirichlet_ratio(t.counts, t.alpha) + t.log_children)
            .collect();
        let split_total = log_sum_exp(&split_logs);
        let stop_term = rho.ln() + log_phi0;
        let log_phi = log_add_exp(stop_term, (-rho).ln_1p() + split_total);
        if !log_phi.is_finite() || !split_total.is_finite() {
            return Err(Error::NumericalFault(format!(
                "log Phi is {log_phi} at region {region} (n = {n})"
            )));
        }
        let mut post_rho = (stop_term - log_phi).exp();
        if post_rho > 1.0 + POST_RHO_SLACK {
            return Err(Error::NumericalFault(format!(
                "posterior stopping probability {post_rho} at region {region}"
            )));
        }
        post_rho = post_rho.min(1.0);
        let post_lambda = split_logs.iter().map(|t| (t - split_total).exp()).collect();
        Ok(PhiRecord {
            n,
            log_phi,
            log_phi0,
            post_rho,
            post_lambda,
            post_alpha: terms
                .iter()
                .map(|t| (t.counts.0 as f64 + t.alpha.0, t.counts.1 as f64 + t.alpha.1))
                .collect(),
            split_counts: terms.iter().map(|t| t.counts).collect(),
            terminal: None,
        })
    }

    /// `log Phi(root | data + x)`, reusing the memo for every region that does
    /// not contain `x`.
    pub fn log_phi_with_point(&self, x: &[f64]) -> Result<f64> {
        let root = self.scheme().root();
        if x.len() != self.data.dim() || !root.contains(x) {
            return Err(Error::PointOutsideRegion { point: x.to_vec() });
        }
        let mut memo = HashMap::new();
        self.compute_extra(&root, &self.all_indices(), x, &mut memo)
    }

    fn compute_extra(
        &self,
        region: &Region,
        idx: &[u32],
        x: &[f64],
        memo: &mut HashMap<Region, f64>,
    ) -> Result<f64> {
        if let Some(&v) = memo.get(region) {
            return Ok(v);
        }
        let members = Members {
            idx,
            extra: Some(x),
        };
        let value = match self.terminal_record(region, members) {
            Some(r) => r.log_phi,
            None => {
                let scheme = self.scheme();
                let m = scheme.splits_unchecked(region);
                let mut terms = Vec::with_capacity(m);
                for j in 0..m {
                    let (left, right) = scheme.split_unchecked(region, j);
                    let alpha = self.spec.weights_for_children(region, &left, &right);
                    let d = scheme.split_dim_unchecked(region, j);
                    let (li, ri) = self.partition(region, d, idx);
                    let (counts, log_children) = match locate_in_dim(region, d, x) {
                        Child::Left => (
                            (li.len() + 1, ri.len()),
                            self.compute_extra(&left, &li, x, memo)?
                                + self.compute_with_indices(&right, &ri)?,
                        ),
                        Child::Right => (
                            (li.len(), ri.len() + 1),
                            self.compute_with_indices(&left, &li)?
                                + self.compute_extra(&right, &ri, x, memo)?,
                        ),
                    };
                    terms.push(SplitTerm {
                        counts,
                        alpha,
                        log_children,
                    });
                }
                self.combine(region, members.len(), terms)?.log_phi
            }
        };
        memo.insert(region.clone(), value);
        Ok(value)
    }

    /// Recomputes the right side of the recursion for every non-terminal
    /// entry from its stored children and returns the largest absolute
    /// discrepancy in `log Phi`.
    pub fn audit_recursion(&self) -> Result<f64> {
        let scheme = self.scheme();
        let mut worst = 0.0f64;
        for (region, record) in self.table.sorted_entries() {
            if record.terminal.is_some() {
                continue;
            }
            let m = scheme.splits_unchecked(&region);
            let mut terms = Vec::with_capacity(m);
            for j in 0..m {
                let (left, right) = scheme.split_unchecked(&region, j);
                let l = self
                    .table
                    .get(&left)
                    .ok_or_else(|| Error::RegionNotInTable(left.to_string()))?;
                let r = self
                    .table
                    .get(&right)
                    .ok_or_else(|| Error::RegionNotInTable(right.to_string()))?;
                if l.n + r.n != record.n {
                    return Err(Error::NumericalFault(format!(
                        "child counts {} + {} differ from {} at {region}",
                        l.n, r.n, record.n
                    )));
                }
                terms.push(SplitTerm {
                    counts: (l.n, r.n),
                    alpha: self.spec.weights_for_children(&region, &left, &right),
                    log_children: l.log_phi + r.log_phi,
                });
            }
            let again = self.combine(&region, record.n, terms)?;
            worst = worst.max((again.log_phi - record.log_phi).abs());
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::LN_2;

    use super::*;
    use crate::prior::AlphaRule;

    fn engine(scheme: PartitionScheme, points: &[Vec<f64>], rho: f64) -> PhiEngine {
        let data = Dataset::from_points(scheme.dim(), points).unwrap();
        let spec = PriorSpec::new(scheme, rho, AlphaRule::ConstantHalf).unwrap();
        PhiEngine::new(data, spec, RecursionLimits::for_dim(scheme.dim())).unwrap()
    }

    #[test]
    fn phi0_values() {
        assert_eq!(log_phi0(&Region::continuous_root(2), 7), 0.0);
        let r = Region::from_dyadic(&[(3, 2)]).unwrap();
        assert!((log_phi0(&r, 2) - 6.0 * LN_2).abs() < 1e-15);
        assert!((log_phi0(&r, 2) - 4.1588830833596715).abs() < 1e-12);
        assert_eq!(log_phi0(&r, 0), 0.0);
    }

    #[test]
    fn dirichlet_ratio_values() {
        assert_eq!(log_dirichlet_ratio((0, 0), (0.5, 0.5)), 0.0);
        assert!((log_dirichlet_ratio((1, 0), (0.5, 0.5)) - 0.5f64.ln()).abs() < 1e-15);
        // Gamma(5/2) Gamma(3/2) / Gamma(4) / pi = (3/4)(1/2)/6 = 1/16.
        assert!((log_dirichlet_ratio((2, 1), (0.5, 0.5)) - (1.0f64 / 16.0).ln()).abs() < 1e-14);
    }

    #[test]
    fn dirichlet_ratio_branches_agree() {
        // The product branch and the log-gamma branch must meet smoothly at n = 32/33.
        for &a in &[0.5, 1.0, 9.0, 400.0] {
            let small = ln_rising(a, 32) + (a + 32.0).ln();
            let large = ln_rising(a, 33);
            assert!((small - large).abs() < 1e-11 * large.abs().max(1.0), "a = {a}");
        }
    }

    #[test]
    fn table_single_observation_closed_form() {
        for m in 1..=6 {
            let e = engine(PartitionScheme::BinaryTable(m), &[vec![1.0; m]], 0.5);
            let v = e.log_phi_root().unwrap();
            assert!((v + m as f64 * LN_2).abs() < 1e-12);
            let explicit = engine(PartitionScheme::BinaryTable(m), &[vec![1.0; m]], 0.5).without_closed_forms();
            let w = explicit.log_phi_root().unwrap();
            assert!((w + m as f64 * LN_2).abs() < 1e-12, "m = {m}: {w}");
        }
    }

    #[test]
    fn continuous_single_observation_closed_form() {
        let e = engine(PartitionScheme::FullDyadic(2), &[vec![0.3, 0.7]], 0.5);
        let r = Region::from_dyadic(&[(2, 1), (1, 1)]).unwrap();
        assert!((e.compute_log_phi(&r).unwrap() - 3.0 * LN_2).abs() < 1e-15);
    }

    #[test]
    fn lower_bound_and_lambda_normalization() {
        let pts: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 * 0.618) % 1.0, (i as f64 * 0.377) % 1.0]).collect();
        let e = engine(PartitionScheme::FullDyadic(2), &pts, 0.3);
        e.log_phi_root().unwrap();
        for (region, r) in e.table().sorted_entries() {
            assert!(r.log_phi >= 0.3f64.ln() + r.log_phi0 - 1e-12, "{region}");
            if r.terminal.is_none() {
                let s: f64 = r.post_lambda.iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
                for (a, c) in r.post_alpha.iter().zip(&r.split_counts) {
                    assert_eq!(*a, (c.0 as f64 + 0.5, c.1 as f64 + 0.5));
                }
            }
        }
        assert!(e.audit_recursion().unwrap() < 1e-12);
    }

    #[test]
    fn posterior_matches_prior_without_data() {
        let e = engine(PartitionScheme::FullDyadic(2), &[], 0.5);
        e.log_phi_root().unwrap();
        let p = e.posterior_params(&Region::continuous_root(2)).unwrap();
        assert_eq!(p.post_rho, 0.5);
        assert_eq!(p.post_lambda, vec![0.5, 0.5]);
        assert_eq!(p.post_alpha, vec![(0.5, 0.5), (0.5, 0.5)]);
    }

    #[test]
    fn single_point_posterior_stop_probability() {
        let e = engine(PartitionScheme::BinaryTable(2), &[vec![2.0, 1.0]], 0.5);
        e.log_phi_root().unwrap();
        let p = e.posterior_params(&Region::discrete_root(2)).unwrap();
        assert_eq!(p.post_rho, 0.5);
        assert_eq!(p.post_lambda, vec![0.5, 0.5]);
    }

    #[test]
    fn symmetric_data_gives_even_selection() {
        let pts = vec![vec![0.25, 0.25], vec![0.75, 0.75], vec![0.25, 0.75], vec![0.75, 0.25], vec![0.1, 0.1], vec![0.9, 0.9]];
        let e = engine(PartitionScheme::FullDyadic(2), &pts, 0.5);
        e.log_phi_root().unwrap();
        let p = e.posterior_params(&Region::continuous_root(2)).unwrap();
        assert_eq!(p.post_lambda[0], p.post_lambda[1]);
        assert!((p.post_lambda[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn permutation_invariance() {
        let pts: Vec<Vec<f64>> = (0..60).map(|i| vec![((i * 37) % 101) as f64 / 101.0]).collect();
        let mut rev = pts.clone();
        rev.reverse();
        let a = engine(PartitionScheme::FullDyadic(1), &pts, 0.5);
        let b = engine(PartitionScheme::FullDyadic(1), &rev, 0.5);
        a.log_phi_root().unwrap();
        b.log_phi_root().unwrap();
        assert_eq!(a.table().sorted_entries(), b.table().sorted_entries());
    }

    #[test]
    fn duplicates_terminate_at_threshold() {
        let e = engine(PartitionScheme::FullDyadic(1), &[vec![0.3], vec![0.3], vec![0.3]], 0.5);
        let v = e.log_phi_root().unwrap();
        assert!(v.is_finite() && v > 0.0);
        assert!(e.table().sorted_entries().iter().any(|(_, r)| r.terminal == Some(Terminal::Precision)));
    }

    #[test]
    fn missing_region_is_an_error() {
        let e = engine(PartitionScheme::FullDyadic(1), &[vec![0.3]], 0.5);
        assert!(matches!(
            e.posterior_params(&Region::continuous_root(1)),
            Err(Error::RegionNotInTable(_))
        ));
    }

    #[test]
    fn extra_point_matches_augmented_dataset() {
        let pts: Vec<Vec<f64>> = (0..25).map(|i| vec![((i * 13) % 29) as f64 / 29.0, ((i * 7) % 31) as f64 / 31.0]).collect();
        let e = engine(PartitionScheme::FullDyadic(2), &pts, 0.5);
        e.log_phi_root().unwrap();
        let x = [0.41, 0.77];
        let fast = e.log_phi_with_point(&x).unwrap();
        let mut more = pts.clone();
        more.push(x.to_vec());
        let slow = engine(PartitionScheme::FullDyadic(2), &more, 0.5).log_phi_root().unwrap();
        assert!((fast - slow).abs() < 1e-10, "{fast} vs {slow}");
    }

    #[test]
    fn threads_do_not_change_values() {
        let pts: Vec<Vec<f64>> = (0..3000).map(|i| vec![((i * 7919) % 10007) as f64 / 10007.0, ((i * 104729) % 10009) as f64 / 10009.0]).collect();
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                let e = engine(PartitionScheme::FullDyadic(2), &pts, 0.5);
                e.log_phi_root().unwrap();
                e.table().sorted_entries()
            })
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn baseline_never_stops() {
        let data = Dataset::from_points(1, &[vec![0.2], vec![0.21], vec![0.8]]).unwrap();
        let spec = PriorSpec::standard_polya(PartitionScheme::FullDyadic(1)).unwrap();
        let e = PhiEngine::new(data, spec, RecursionLimits::for_dim(1)).unwrap();
        e.log_phi_root().unwrap();
        for (_, r) in e.table().sorted_entries() {
            if r.terminal.is_none() {
                assert_eq!(r.post_rho, 0.0);
            }
        }
    }
}
