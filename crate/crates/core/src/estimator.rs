//! Density estimates derived from the posterior optional Pólya tree.
//!
//! Three routes are provided:
//!
//! * [`mean_density_dichotomous`]: the exact posterior mean for schemes with a
//!   single split per region, by propagating `a_i = E[P(A_i); stopped]` and
//!   `b_i = E[P(A_i); not stopped]` down the tree.
//! * [`hmap_tree`] followed by [`conditional_mean_density`]: a representative
//!   partition chosen top-down by stop-or-best-split decisions, then the Beta
//!   posterior means on that fixed partition.
//! * [`hutter_point_density`]: the predictive ratio `Phi(root | D, x) / Phi(root | D)`.

use serde::Serialize;

use crate::density::{DensityLeaf, PiecewiseDensity};
use crate::error::{Error, Result};
use crate::format::FORMAT_VERSION;
use crate::geometry::Region;
use crate::marginal::{PhiEngine, PhiRecord, Terminal};

/// Why a leaf of a [`TreeTopology`] was not split further.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Posterior stopping probability of at least one half.
    PosteriorStop,
    /// Precision threshold, level cap, or an unsplittable table cell.
    PrecisionStop,
    /// No observations; the posterior mean is uniform inside.
    EmptyRegion,
    /// The caller's depth limit was reached.
    QueryDepth,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        region: Region,
        reason: StopReason,
    },
    Split {
        region: Region,
        /// 0-based split index at this region.
        split: usize,
        /// Coordinate that was bisected.
        dim: usize,
        children: Box<[TreeNode; 2]>,
    },
}

impl TreeNode {
    pub fn region(&self) -> &Region {
        match self {
            TreeNode::Leaf { region, .. } | TreeNode::Split { region, .. } => region,
        }
    }
}

/// A finite recursive partition of the root region.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TreeTopology {
    pub root: TreeNode,
}

impl TreeTopology {
    /// Leaves in depth-first, lower-half-first order.
    pub fn leaves(&self) -> Vec<(&Region, StopReason)> {
        let mut out = Vec::new();
        let mut stack = vec![&self.root];
        while let Some(node) = stack.pop() {
            match node {
                TreeNode::Leaf { region, reason } => out.push((region, *reason)),
                TreeNode::Split { children, .. } => {
                    stack.push(&children[1]);
                    stack.push(&children[0]);
                }
            }
        }
        out
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves().len()
    }

    pub fn max_level(&self) -> u32 {
        self.leaves().iter().map(|(r, _)| r.level()).max().unwrap_or(0)
    }

    /// The first split dimension at the root, if the root was split.
    pub fn root_split_dim(&self) -> Option<usize> {
        match &self.root {
            TreeNode::Split { dim, .. } => Some(*dim),
            TreeNode::Leaf { .. } => None,
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            format_version: u32,
            num_leaves: usize,
            root: &'a TreeNode,
        }
        crate::format::to_json_string(&Doc {
            format_version: FORMAT_VERSION,
            num_leaves: self.num_leaves(),
            root: &self.root,
        })
    }
}

/// Posterior mean density and the partition it was evaluated on.
#[derive(Clone, Debug)]
pub struct MeanDensity {
    pub density: PiecewiseDensity,
    pub tree: TreeTopology,
}

/// `(a_i, b_i)` for a node of the mean-density induction.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeMass {
    pub region: Region,
    /// Expected mass of the node on the event that growth stopped at or above it.
    pub stopped: f64,
    /// Expected mass of the node on the event that growth continues below it.
    pub continuing: f64,
}

fn require_unique_split(engine: &PhiEngine) -> Result<()> {
    if engine.scheme().has_unique_split() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "the mean-density induction needs one split per region; {:?} has several",
            engine.scheme()
        )))
    }
}

struct Induction<'a> {
    engine: &'a PhiEngine,
}

impl Induction<'_> {
    /// Children of a node together with their `(a, b)` values.
    fn step(
        &self,
        region: &Region,
        idx: &[u32],
        rec: &PhiRecord,
        a: f64,
        b: f64,
    ) -> Result<[(Region, Vec<u32>, PhiRecord, f64, f64); 2]> {
        let scheme = self.engine.scheme();
        let d = scheme.split_dim(region, 0)?;
        let (left, right) = region.bisect(d);
        let (li, ri) = self.engine.partition_indices(region, d, idx);
        let frozen = matches!(rec.terminal, Some(Terminal::Precision | Terminal::SingleCell));
        let (w_left, w_right) = match rec.post_alpha.first() {
            Some(&(a1, a2)) if !frozen => (a1 / (a1 + a2), a2 / (a1 + a2)),
            _ => (0.5, 0.5),
        };
        let mut out = Vec::with_capacity(2);
        for (child, cidx, w) in [(left, li, w_left), (right, ri, w_right)] {
            let crec = if frozen {
                // Below a forced stop the tree is stopped with certainty.
                PhiRecord {
                    n: cidx.len(),
                    log_phi: 0.0,
                    log_phi0: 0.0,
                    post_rho: 1.0,
                    post_lambda: Vec::new(),
                    post_alpha: Vec::new(),
                    split_counts: Vec::new(),
                    terminal: rec.terminal,
                }
            } else {
                self.engine.record_with_indices(&child, &cidx)?
            };
            let ratio = child.measure() / region.measure();
            let rho = crec.post_rho;
            let ca = ratio * a + w * rho * b;
            let cb = w * (1.0 - rho) * b;
            out.push((child, cidx, crec, ca, cb));
        }
        let right = out.pop().expect("two children");
        let left = out.pop().expect("two children");
        Ok([left, right])
    }
}

/// `(a, b)` for every node at `depth` below the root, continuing through
/// terminal regions with their closed-form parameters.
pub fn appendix_masses(engine: &PhiEngine, depth: u32) -> Result<Vec<NodeMass>> {
    require_unique_split(engine)?;
    let root = engine.scheme().root();
    let idx = engine.indices_in(&root);
    let rec = engine.record_with_indices(&root, &idx)?;
    let ind = Induction { engine };
    let a0 = rec.post_rho;
    let mut frontier = vec![(root, idx, rec, a0, 1.0 - a0)];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(frontier.len() * 2);
        for (region, idx, rec, a, b) in &frontier {
            if engine.scheme().num_splits(region)? == 0 {
                return Err(Error::InvalidConfig(format!("depth {depth} exceeds the table depth")));
            }
            next.extend(ind.step(region, idx, rec, *a, *b)?);
        }
        frontier = next;
    }
    Ok(frontier
        .into_iter()
        .map(|(region, _, _, a, b)| NodeMass {
            region,
            stopped: a,
            continuing: b,
        })
        .collect())
}

/// Posterior mean density for schemes with a unique split per region.
///
/// Regions without data and regions below the precision threshold have a
/// uniform posterior mean and become leaves; otherwise nodes are refined until
/// `query_depth`, where the leaf value is the mean mass divided by volume.
pub fn mean_density_dichotomous(engine: &PhiEngine, query_depth: u32) -> Result<MeanDensity> {
    require_unique_split(engine)?;
    let root = engine.scheme().root();
    let idx = engine.indices_in(&root);
    let rec = engine.record_with_indices(&root, &idx)?;
    let ind = Induction { engine };
    let mut leaves = Vec::new();
    let a0 = rec.post_rho;
    let tree = grow_mean(&ind, root.clone(), idx, rec, a0, 1.0 - a0, query_depth, &mut leaves)?;
    let density = PiecewiseDensity::new(root, leaves)?;
    Ok(MeanDensity {
        density,
        tree: TreeTopology { root: tree },
    })
}

#[allow(clippy::too_many_arguments)]
fn grow_mean(
    ind: &Induction<'_>,
    region: Region,
    idx: Vec<u32>,
    rec: PhiRecord,
    a: f64,
    b: f64,
    query_depth: u32,
    leaves: &mut Vec<DensityLeaf>,
) -> Result<TreeNode> {
    let reason = match rec.terminal {
        Some(Terminal::Empty) => Some(StopReason::EmptyRegion),
        Some(Terminal::Precision | Terminal::SingleCell) => Some(StopReason::PrecisionStop),
        _ if ind.engine.limits().forces_stop(&region) => Some(StopReason::PrecisionStop),
        _ if region.level() >= query_depth => Some(StopReason::QueryDepth),
        _ => None,
    };
    if let Some(reason) = reason {
        leaves.push(DensityLeaf {
            density: (a + b) / region.measure(),
            region: region.clone(),
        });
        return Ok(TreeNode::Leaf { region, reason });
    }
    let dim = ind.engine.scheme().split_dim(&region, 0)?;
    let [l, r] = ind.step(&region, &idx, &rec, a, b)?;
    drop(idx);
    let left = grow_mean(ind, l.0, l.1, l.2, l.3, l.4, query_depth, leaves)?;
    let right = grow_mean(ind, r.0, r.1, r.2, r.3, r.4, query_depth, leaves)?;
    Ok(TreeNode::Split {
        region,
        split: 0,
        dim,
        children: Box::new([left, right]),
    })
}

/// Hierarchical MAP partition: stop where the posterior stopping probability
/// is at least one half, otherwise split along the most probable direction
/// (lowest index on ties) and recurse.
pub fn hmap_tree(engine: &PhiEngine) -> Result<TreeTopology> {
    let root = engine.scheme().root();
    let idx = engine.indices_in(&root);
    engine.compute_with_indices(&root, &idx)?;
    Ok(TreeTopology {
        root: grow_hmap(engine, root, idx)?,
    })
}

fn grow_hmap(engine: &PhiEngine, region: Region, idx: Vec<u32>) -> Result<TreeNode> {
    let rec = engine.record_with_indices(&region, &idx)?;
    if matches!(rec.terminal, Some(Terminal::Precision | Terminal::SingleCell))
        || engine.limits().forces_stop(&region)
    {
        return Ok(TreeNode::Leaf {
            region,
            reason: StopReason::PrecisionStop,
        });
    }
    if rec.post_rho >= 0.5 {
        return Ok(TreeNode::Leaf {
            region,
            reason: StopReason::PosteriorStop,
        });
    }
    if rec.terminal == Some(Terminal::Empty) {
        return Ok(TreeNode::Leaf {
            region,
            reason: StopReason::EmptyRegion,
        });
    }
    let mut best = 0;
    for (j, &p) in rec.post_lambda.iter().enumerate() {
        if p > rec.post_lambda[best] {
            best = j;
        }
    }
    let scheme = engine.scheme();
    let dim = scheme.split_dim(&region, best)?;
    let (left, right) = region.bisect(dim);
    let (li, ri) = engine.partition_indices(&region, dim, &idx);
    drop(idx);
    let (l, r) = if li.len() + ri.len() >= 512 {
        rayon::join(|| grow_hmap(engine, left, li), || grow_hmap(engine, right, ri))
    } else {
        (grow_hmap(engine, left, li), grow_hmap(engine, right, ri))
    };
    Ok(TreeNode::Split {
        region,
        split: best,
        dim,
        children: Box::new([l?, r?]),
    })
}

/// Piecewise-constant posterior mean given a fixed tree: each leaf receives
/// the product of Beta posterior means along its path and is uniform inside.
pub fn conditional_mean_density(tree: &TreeTopology, engine: &PhiEngine) -> Result<PiecewiseDensity> {
    let mut leaves = Vec::new();
    let mut stack = vec![(&tree.root, 1.0f64)];
    while let Some((node, mass)) = stack.pop() {
        match node {
            TreeNode::Leaf { region, .. } => leaves.push(DensityLeaf {
                region: region.clone(),
                density: mass / region.measure(),
            }),
            TreeNode::Split {
                region,
                split,
                children,
                ..
            } => {
                let rec = engine
                    .table()
                    .get(region)
                    .ok_or_else(|| Error::RegionNotInTable(region.to_string()))?;
                let &(a1, a2) = rec.post_alpha.get(*split).ok_or_else(|| {
                    Error::InvalidData(format!("tree split {split} at {region} does not match the table"))
                })?;
                let left = mass * a1 / (a1 + a2);
                let right = mass * a2 / (a1 + a2);
                stack.push((&children[1], right));
                stack.push((&children[0], left));
            }
        }
    }
    PiecewiseDensity::new(tree.root.region().clone(), leaves)
}

/// Predictive density at `x`: `exp(log Phi(root | D, x) - log Phi(root | D))`.
pub fn hutter_point_density(engine: &PhiEngine, x: &[f64]) -> Result<f64> {
    let base = engine.log_phi_root()?;
    let with_x = engine.log_phi_with_point(x)?;
    Ok((with_x - base).exp())
}
