//! Draws of the random measure `Q^(k)` from the prior or the posterior.
//!
//! Each region draws, from its own random stream, a stop flag
//! `S ~ Bernoulli(rho)`, a split `J ~ lambda` and a Beta share `theta`; the
//! lower child receives `theta` of the parent's mass and the upper child the
//! remainder. Regions still growing at `max_depth` keep their mass, spread
//! uniformly.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::density::{DensityLeaf, PiecewiseDensity};
use crate::error::{Error, Result};
use crate::format::FORMAT_VERSION;
use crate::geometry::{PartitionScheme, Region};
use crate::marginal::PhiEngine;
use crate::prior::PriorSpec;
use crate::rng::{region_labels, stream};

/// Where the per-region parameters come from.
#[derive(Clone, Copy, Debug)]
pub enum ParamsSource<'a> {
    Prior(&'a PriorSpec),
    Posterior(&'a PhiEngine),
}

impl ParamsSource<'_> {
    pub fn scheme(&self) -> &PartitionScheme {
        match self {
            ParamsSource::Prior(s) => s.scheme(),
            ParamsSource::Posterior(e) => e.scheme(),
        }
    }

    /// `(rho, lambda, alpha)` at `region`.
    fn params(&self, region: &Region, idx: &[u32]) -> Result<(f64, Vec<f64>, Vec<(f64, f64)>)> {
        match self {
            ParamsSource::Prior(spec) => {
                let m = spec.scheme().num_splits(region)?;
                if m == 0 {
                    return Ok((1.0, Vec::new(), Vec::new()));
                }
                let alpha = (0..m)
                    .map(|j| spec.assignment_weights(region, j))
                    .collect::<Result<Vec<_>>>()?;
                Ok((spec.stopping_prob(region), spec.selection_probs(region)?, alpha))
            }
            ParamsSource::Posterior(engine) => {
                let rec = engine.record_with_indices(region, idx)?;
                Ok((rec.post_rho, rec.post_lambda, rec.post_alpha))
            }
        }
    }
}

/// A node of a sampled partition with the mass it received.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum DrawNode {
    Leaf {
        region: Region,
        mass: f64,
        /// `true` when the stop flag fired, `false` when cut off at `max_depth`.
        stopped: bool,
    },
    Split {
        region: Region,
        mass: f64,
        split: usize,
        dim: usize,
        children: Box<[DrawNode; 2]>,
    },
}

/// One draw of `Q^(k)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RandomMeasureDraw {
    pub seed: u64,
    pub draw: u64,
    pub max_depth: u32,
    /// Deepest level at which a region was reached.
    pub depth_reached: u32,
    /// `reached_mass[k]`: total mass of the level-`k` regions reached without
    /// stopping, i.e. `Q^(k)(T_1^k)`.
    pub reached_mass: Vec<f64>,
    pub root: DrawNode,
}

impl RandomMeasureDraw {
    /// `(region, mass, stopped)` for every leaf, lower half first.
    pub fn leaves(&self) -> Vec<(&Region, f64, bool)> {
        let mut out = Vec::new();
        let mut stack = vec![&self.root];
        while let Some(node) = stack.pop() {
            match node {
                DrawNode::Leaf { region, mass, stopped } => out.push((region, *mass, *stopped)),
                DrawNode::Split { children, .. } => {
                    stack.push(&children[1]);
                    stack.push(&children[0]);
                }
            }
        }
        out
    }

    /// The draw as a density, uniform inside each leaf.
    pub fn to_density(&self) -> Result<PiecewiseDensity> {
        let root = match &self.root {
            DrawNode::Leaf { region, .. } | DrawNode::Split { region, .. } => region.clone(),
        };
        let leaves = self
            .leaves()
            .into_iter()
            .map(|(r, m, _)| DensityLeaf {
                region: r.clone(),
                density: m / r.measure(),
            })
            .collect();
        PiecewiseDensity::new(root, leaves)
    }
}

/// Serializes a batch of draws as one JSON document.
pub fn draws_to_json(draws: &[RandomMeasureDraw]) -> serde_json::Result<String> {
    #[derive(Serialize)]
    struct Doc<'a> {
        format_version: u32,
        draws: &'a [RandomMeasureDraw],
    }
    crate::format::to_json_string(&Doc {
        format_version: FORMAT_VERSION,
        draws,
    })
}

struct DrawContext<'a> {
    source: ParamsSource<'a>,
    max_depth: u32,
    seed: u64,
    draw: u64,
}

impl DrawContext<'_> {
    fn grow(
        &self,
        region: Region,
        idx: Vec<u32>,
        mass: f64,
        reached: &mut Vec<f64>,
    ) -> Result<DrawNode> {
        let level = region.level();
        reached[level as usize] += mass;
        if level >= self.max_depth {
            return Ok(DrawNode::Leaf {
                region,
                mass,
                stopped: false,
            });
        }
        let (rho, lambda, alpha) = self.source.params(&region, &idx)?;
        let mut labels = vec![self.draw];
        labels.extend(region_labels(&region));
        let mut rng = stream(self.seed, &labels);
        let u_stop: f64 = rng.random();
        if lambda.is_empty() || u_stop < rho {
            return Ok(DrawNode::Leaf {
                region,
                mass,
                stopped: true,
            });
        }
        let u_split: f64 = rng.random();
        let mut split = lambda.len() - 1;
        let mut cum = 0.0;
        for (j, p) in lambda.iter().enumerate() {
            cum += p;
            if u_split < cum {
                split = j;
                break;
            }
        }
        let (a1, a2) = alpha[split];
        let beta = Beta::new(a1, a2)
            .map_err(|e| Error::NumericalFault(format!("Beta({a1}, {a2}): {e}")))?;
        let theta: f64 = beta.sample(&mut rng);
        let lower = mass * theta;
        let upper = mass - lower;

        let scheme = self.source.scheme();
        let dim = scheme.split_dim(&region, split)?;
        let (left, right) = region.bisect(dim);
        let (li, ri) = match self.source {
            ParamsSource::Posterior(engine) => engine.partition_indices(&region, dim, &idx),
            ParamsSource::Prior(_) => (Vec::new(), Vec::new()),
        };
        let l = self.grow(left, li, lower, reached)?;
        let r = self.grow(right, ri, upper, reached)?;
        Ok(DrawNode::Split {
            region,
            mass,
            split,
            dim,
            children: Box::new([l, r]),
        })
    }
}

/// Draws `Q^(max_depth)` with stream number `draw` under `seed`.
pub fn sample_measure(
    source: ParamsSource<'_>,
    max_depth: u32,
    seed: u64,
    draw: u64,
) -> Result<RandomMeasureDraw> {
    if max_depth == 0 {
        return Err(Error::InvalidConfig("max_depth must be at least 1".into()));
    }
    let root = source.scheme().root();
    let idx = match source {
        ParamsSource::Posterior(engine) => {
            let idx = engine.indices_in(&root);
            engine.record_with_indices(&root, &idx)?;
            idx
        }
        ParamsSource::Prior(_) => Vec::new(),
    };
    let ctx = DrawContext {
        source,
        max_depth,
        seed,
        draw,
    };
    let mut reached = vec![0.0; max_depth as usize + 1];
    let root = ctx.grow(root, idx, 1.0, &mut reached)?;
    let depth_reached = reached.iter().rposition(|&m| m > 0.0).unwrap_or(0) as u32;
    Ok(RandomMeasureDraw {
        seed,
        draw,
        max_depth,
        depth_reached,
        reached_mass: reached,
        root,
    })
}

/// `n_draws` independent draws, numbered `0..n_draws`.
pub fn sample_many(
    source: ParamsSource<'_>,
    max_depth: u32,
    seed: u64,
    n_draws: u64,
) -> Result<Vec<RandomMeasureDraw>> {
    (0..n_draws)
        .into_par_iter()
        .map(|d| sample_measure(source, max_depth, seed, d))
        .collect()
}

/// One point of the unstopped-mass curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MassPoint {
    pub depth: u32,
    pub mean: f64,
    pub std_error: f64,
}

/// Monte Carlo estimate of `E[Q^(k)(T_1^k)]` at each requested depth.
pub fn unstopped_mass_curve(
    spec: &PriorSpec,
    depths: &[u32],
    n_draws: u64,
    seed: u64,
) -> Result<Vec<MassPoint>> {
    if n_draws < 100 {
        return Err(Error::InvalidConfig("at least 100 draws are required".into()));
    }
    let max_depth = depths.iter().copied().max().unwrap_or(0).max(1);
    let curves: Vec<Vec<f64>> = (0..n_draws)
        .into_par_iter()
        .map(|d| sample_measure(ParamsSource::Prior(spec), max_depth, seed, d).map(|m| m.reached_mass))
        .collect::<Result<_>>()?;
    let n = n_draws as f64;
    Ok(depths
        .iter()
        .map(|&k| {
            let values = curves.iter().map(|c| c[k as usize]);
            let mean = values.clone().sum::<f64>() / n;
            let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            MassPoint {
                depth: k,
                mean,
                std_error: (var / n).sqrt(),
            }
        })
        .collect())
}
