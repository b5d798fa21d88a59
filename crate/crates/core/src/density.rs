//! Piecewise-constant densities over a finite partition of the root region.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::FORMAT_VERSION;
use crate::geometry::{locate_in_dim, Child, Region};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityLeaf {
    pub region: Region,
    pub density: f64,
}

/// Lookup tree reproducing the hierarchy of the leaves.
#[derive(Clone, Debug)]
enum Node {
    Leaf(usize),
    Split { dim: usize, children: Box<[Node; 2]> },
}

/// A density that is constant on each leaf of a recursive partition.
#[derive(Clone, Debug)]
pub struct PiecewiseDensity {
    root: Region,
    leaves: Vec<DensityLeaf>,
    index: Node,
}

/// One cell of a rasterized density.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridCell {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub density: f64,
}

impl PiecewiseDensity {
    /// Builds a density from leaves that must partition `root` exactly.
    pub fn new(root: Region, leaves: Vec<DensityLeaf>) -> Result<Self> {
        if let Some(l) = leaves.iter().find(|l| !(l.density >= 0.0 && l.density.is_finite())) {
            return Err(Error::NumericalFault(format!(
                "density {} at {} is not a finite nonnegative value",
                l.density, l.region
            )));
        }
        let all: Vec<usize> = (0..leaves.len()).collect();
        let index = build_index(&root, &leaves, all)?;
        Ok(PiecewiseDensity {
            root,
            leaves,
            index,
        })
    }

    pub fn uniform(root: Region) -> Self {
        let density = 1.0 / root.measure();
        Self::new(root.clone(), vec![DensityLeaf { region: root, density }])
            .expect("a single leaf partitions its root")
    }

    pub fn root(&self) -> &Region {
        &self.root
    }

    pub fn dim(&self) -> usize {
        self.root.dim()
    }

    pub fn leaves(&self) -> &[DensityLeaf] {
        &self.leaves
    }

    /// `sum density * measure` over the leaves.
    pub fn total_mass(&self) -> f64 {
        self.leaves.iter().map(|l| l.density * l.region.measure()).sum()
    }

    /// Density value at `x`.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if !self.root.contains(x) {
            return Err(Error::PointOutsideRegion { point: x.to_vec() });
        }
        let mut node = &self.index;
        let mut region = self.root.clone();
        loop {
            match node {
                Node::Leaf(i) => return Ok(self.leaves[*i].density),
                Node::Split { dim, children } => {
                    let (l, r) = region.bisect(*dim);
                    match locate_in_dim(&region, *dim, x) {
                        Child::Left => {
                            node = &children[0];
                            region = l;
                        }
                        Child::Right => {
                            node = &children[1];
                            region = r;
                        }
                    }
                }
            }
        }
    }

    /// Probability mass assigned to the box `[lower, upper]` (continuous only).
    pub fn mass_in_box(&self, lower: &[f64], upper: &[f64]) -> f64 {
        self.leaves
            .iter()
            .map(|l| l.density * overlap_volume(&l.region, lower, upper))
            .sum()
    }

    /// Probability mass of a region of the same partition family.
    pub fn mass_in(&self, region: &Region) -> f64 {
        if region.is_continuous() {
            let (lo, hi): (Vec<f64>, Vec<f64>) = (0..region.dim()).map(|d| region.bounds(d)).unzip();
            self.mass_in_box(&lo, &hi)
        } else {
            self.leaves
                .iter()
                .map(|l| {
                    let shared = (0..region.dim()).try_fold(1.0, |acc, d| {
                        match (l.region.state(d), region.state(d)) {
                            (Some(a), Some(b)) if a != b => None,
                            (None, None) => Some(acc * 2.0),
                            _ => Some(acc),
                        }
                    });
                    shared.map_or(0.0, |cells| cells * l.density)
                })
                .sum()
        }
    }

    /// Averages the density over a regular grid with `cells_per_dim` cells per
    /// axis. Each cell value is its exact mass divided by its volume. Discrete
    /// roots ignore `cells_per_dim` and emit one row per table cell.
    pub fn grid(&self, cells_per_dim: usize) -> Vec<GridCell> {
        let p = self.dim();
        if !self.root.is_continuous() {
            let mut out = Vec::with_capacity(1 << p);
            for code in 0..(1usize << p) {
                let x: Vec<f64> = (0..p).map(|d| if code >> (p - 1 - d) & 1 == 0 { 1.0 } else { 2.0 }).collect();
                let density = self.evaluate(&x).expect("table cells lie in the root");
                out.push(GridCell {
                    lower: x.clone(),
                    upper: x,
                    density,
                });
            }
            return out;
        }
        let n = cells_per_dim.max(1);
        let total = n.pow(p as u32);
        let width = 1.0 / n as f64;
        let mut mass = vec![0.0; total];
        for leaf in &self.leaves {
            let ranges: Vec<(usize, usize)> = (0..p)
                .map(|d| {
                    let (lo, hi) = leaf.region.bounds(d);
                    let first = ((lo * n as f64).floor() as usize).min(n - 1);
                    let last = ((hi * n as f64).ceil() as usize).clamp(first + 1, n);
                    (first, last)
                })
                .collect();
            for_each_cell(&ranges, |cursor| {
                let mut vol = 1.0;
                let mut flat = 0;
                for d in 0..p {
                    let (lo, hi) = leaf.region.bounds(d);
                    let c_lo = cursor[d] as f64 * width;
                    let c_hi = c_lo + width;
                    vol *= (hi.min(c_hi) - lo.max(c_lo)).max(0.0);
                    flat = flat * n + cursor[d];
                }
                mass[flat] += leaf.density * vol;
            });
        }
        let cell_volume = width.powi(p as i32);
        (0..total)
            .map(|flat| {
                let mut rest = flat;
                let mut idx = vec![0; p];
                for d in (0..p).rev() {
                    idx[d] = rest % n;
                    rest /= n;
                }
                GridCell {
                    lower: idx.iter().map(|&i| i as f64 * width).collect(),
                    upper: idx.iter().map(|&i| (i + 1) as f64 * width).collect(),
                    density: mass[flat] / cell_volume,
                }
            })
            .collect()
    }

    /// Sorted leaf boundaries of a one-dimensional density.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self
            .leaves
            .iter()
            .flat_map(|l| {
                let (lo, hi) = l.region.bounds(0);
                [lo, hi]
            })
            .collect();
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            format_version: u32,
            dim: usize,
            total_mass: f64,
            leaves: &'a [DensityLeaf],
        }
        crate::format::to_json_string(&Doc {
            format_version: FORMAT_VERSION,
            dim: self.dim(),
            total_mass: self.total_mass(),
            leaves: &self.leaves,
        })
    }
}

/// Calls `f` for every index vector in the product of half-open `ranges`.
fn for_each_cell(ranges: &[(usize, usize)], mut f: impl FnMut(&[usize])) {
    let mut cursor: Vec<usize> = ranges.iter().map(|r| r.0).collect();
    'outer: loop {
        f(&cursor);
        for d in (0..ranges.len()).rev() {
            cursor[d] += 1;
            if cursor[d] < ranges[d].1 {
                continue 'outer;
            }
            cursor[d] = ranges[d].0;
        }
        return;
    }
}

/// Volume of `region ∩ [lower, upper]`.
fn overlap_volume(region: &Region, lower: &[f64], upper: &[f64]) -> f64 {
    (0..region.dim())
        .map(|d| {
            let (lo, hi) = region.bounds(d);
            (hi.min(upper[d]) - lo.max(lower[d])).max(0.0)
        })
        .product()
}

fn build_index(region: &Region, leaves: &[DensityLeaf], members: Vec<usize>) -> Result<Node> {
    let not_partition = || Error::InvalidData(format!("leaves do not partition region {region}"));
    if members.is_empty() {
        return Err(not_partition());
    }
    if members.len() == 1 && leaves[members[0]].region == *region {
        return Ok(Node::Leaf(members[0]));
    }
    if members.iter().any(|&i| !leaves[i].region.is_within(region) || leaves[i].region == *region) {
        return Err(not_partition());
    }
    let dim = (0..region.dim())
        .find(|&d| members.iter().all(|&i| leaves[i].region.finer_in(region, d)))
        .ok_or_else(not_partition)?;
    let (left, right) = region.bisect(dim);
    let (lm, rm): (Vec<usize>, Vec<usize>) = members
        .into_iter()
        .partition(|&i| leaves[i].region.is_within(&left));
    Ok(Node::Split {
        dim,
        children: Box::new([build_index(&left, leaves, lm)?, build_index(&right, leaves, rm)?]),
    })
}
