//! Optional Pólya tree priors for Bayesian density estimation.

pub mod density;
pub mod error;
pub mod estimator;
pub mod evalsuite;
pub mod format;
pub mod geometry;
pub mod marginal;
pub mod prior;
pub mod rng;
pub mod sampler;

pub use density::{DensityLeaf, GridCell, PiecewiseDensity};
pub use error::{Error, Result};
pub use estimator::{
    appendix_masses, conditional_mean_density, hmap_tree, hutter_point_density,
    mean_density_dichotomous, MeanDensity, NodeMass, StopReason, TreeNode, TreeTopology,
};
pub use geometry::{Child, PartitionScheme, Region, RegionKey, RegionKind};
pub use marginal::{Dataset, PhiEngine, PhiRecord, PhiTable, PosteriorParams, RecursionLimits, Terminal};
pub use prior::{AlphaRule, LambdaRule, PriorSpec};
pub use sampler::{sample_many, sample_measure, unstopped_mass_curve, MassPoint, ParamsSource, RandomMeasureDraw};
