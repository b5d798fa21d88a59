//! Prior parameters of an optional Pólya tree: stopping probability,
//! split-selection probabilities and Beta assignment weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PartitionScheme, Region};

/// Rule for the Beta pseudo-counts attached to each split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum AlphaRule {
    /// `alpha = 1/2` for both children (Jeffreys' Beta(1/2, 1/2)).
    ConstantHalf,
    /// `alpha_i = tau^k * mu(child_i) / mu(root)` for a region at level `k`.
    TauScaled { tau: f64 },
    /// Standard Pólya tree baseline: `alpha = max(1, k^2)` with `k` the child level.
    QuadraticDepth,
}

/// Split-selection rule. Only the uniform rule is supported.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    #[default]
    UniformOverAvailable,
}

/// Complete prior specification.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    rho: f64,
    lambda: LambdaRule,
    alpha: AlphaRule,
    scheme: PartitionScheme,
}

impl PriorSpec {
    /// An optional Pólya tree prior with constant stopping probability `rho`.
    pub fn new(scheme: PartitionScheme, rho: f64, alpha: AlphaRule) -> Result<Self> {
        if scheme.dim() == 0 {
            return Err(Error::InvalidConfig("dimension must be at least 1".into()));
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "stopping probability must lie in (0, 1), got {rho}"
            )));
        }
        match alpha {
            AlphaRule::TauScaled { tau } if !(tau > 0.0 && tau.is_finite()) => {
                return Err(Error::InvalidConfig(format!("tau must be positive, got {tau}")))
            }
            AlphaRule::QuadraticDepth => {
                return Err(Error::InvalidConfig(
                    "quadratic pseudo-counts belong to the standard Pólya tree; use PriorSpec::standard_polya".into(),
                ))
            }
            _ => {}
        }
        Ok(PriorSpec {
            rho,
            lambda: LambdaRule::UniformOverAvailable,
            alpha,
            scheme,
        })
    }

    /// Like [`PriorSpec::new`] but also admits the degenerate stopping
    /// probabilities 0 and 1, which remain meaningful for drawing partitions.
    pub fn for_sampling(scheme: PartitionScheme, rho: f64, alpha: AlphaRule) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::InvalidConfig(format!(
                "stopping probability must lie in [0, 1], got {rho}"
            )));
        }
        let inner = if rho > 0.0 && rho < 1.0 { rho } else { 0.5 };
        let mut spec = Self::new(scheme, inner, alpha)?;
        spec.rho = rho;
        Ok(spec)
    }

    /// The default optional tree prior: `rho = 1/2`, `alpha = 1/2`.
    pub fn default_for(scheme: PartitionScheme) -> Self {
        Self::new(scheme, 0.5, AlphaRule::ConstantHalf).expect("default prior is valid")
    }

    /// The never-stopping standard Pólya tree with `alpha = depth^2`.
    pub fn standard_polya(scheme: PartitionScheme) -> Result<Self> {
        if scheme.dim() == 0 {
            return Err(Error::InvalidConfig("dimension must be at least 1".into()));
        }
        Ok(PriorSpec {
            rho: 0.0,
            lambda: LambdaRule::UniformOverAvailable,
            alpha: AlphaRule::QuadraticDepth,
            scheme,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn alpha_rule(&self) -> AlphaRule {
        self.alpha
    }

    pub fn lambda_rule(&self) -> LambdaRule {
        self.lambda
    }

    pub fn scheme(&self) -> &PartitionScheme {
        &self.scheme
    }

    pub fn is_standard_polya(&self) -> bool {
        self.alpha == AlphaRule::QuadraticDepth
    }

    /// True when the prior is self-similar with Beta(1/2, 1/2) splits, so the
    /// single-observation closed forms apply.
    pub fn is_self_similar_half(&self) -> bool {
        match self.alpha {
            AlphaRule::ConstantHalf => true,
            AlphaRule::TauScaled { tau } => tau == 2.0,
            AlphaRule::QuadraticDepth => false,
        }
    }

    pub fn stopping_prob(&self, _region: &Region) -> f64 {
        self.rho
    }

    pub fn selection_probs(&self, region: &Region) -> Result<Vec<f64>> {
        let m = self.scheme.num_splits(region)?;
        if m == 0 {
            return Err(Error::InvalidConfig(format!(
                "region {region} cannot be split"
            )));
        }
        Ok(vec![1.0 / m as f64; m])
    }

    /// Beta parameters for the two children of split `j`.
    pub fn assignment_weights(&self, region: &Region, j: usize) -> Result<(f64, f64)> {
        let (left, right) = self.scheme.split(region, j)?;
        Ok(self.weights_for_children(region, &left, &right))
    }

    pub(crate) fn weights_for_children(
        &self,
        region: &Region,
        left: &Region,
        right: &Region,
    ) -> (f64, f64) {
        match self.alpha {
            AlphaRule::ConstantHalf => (0.5, 0.5),
            AlphaRule::TauScaled { tau } => {
                let root = self.scheme.root().measure();
                let scale = tau.powi(region.level() as i32);
                (scale * left.measure() / root, scale * right.measure() / root)
            }
            AlphaRule::QuadraticDepth => {
                let k = f64::from(region.level() + 1).max(1.0);
                (k * k, k * k)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stopping_probabilities() {
        let s = PartitionScheme::FullDyadic(1);
        let spec = PriorSpec::new(s, 0.5, AlphaRule::ConstantHalf).unwrap();
        assert_eq!(spec.stopping_prob(&Region::from_dyadic(&[(7, 3)]).unwrap()), 0.5);
        let spec = PriorSpec::new(s, 0.2, AlphaRule::ConstantHalf).unwrap();
        assert_eq!(spec.stopping_prob(&s.root()), 0.2);
        let base = PriorSpec::standard_polya(s).unwrap();
        assert_eq!(base.stopping_prob(&s.root()), 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        let s = PartitionScheme::FullDyadic(1);
        for rho in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(PriorSpec::new(s, rho, AlphaRule::ConstantHalf).is_err());
        }
        assert!(PriorSpec::new(s, 0.5, AlphaRule::TauScaled { tau: 0.0 }).is_err());
        assert!(PriorSpec::new(s, 0.5, AlphaRule::QuadraticDepth).is_err());
    }

    #[test]
    fn selection_is_uniform() {
        let full = PriorSpec::default_for(PartitionScheme::FullDyadic(2));
        assert_eq!(full.selection_probs(&full.scheme().root()).unwrap(), vec![0.5, 0.5]);

        let table = PriorSpec::default_for(PartitionScheme::BinaryTable(3));
        let r = Region::from_states(&[None, Some(2), None]).unwrap();
        assert_eq!(table.selection_probs(&r).unwrap(), vec![0.5, 0.5]);
        let cell = Region::from_states(&[Some(1), Some(2), Some(1)]).unwrap();
        assert!(table.selection_probs(&cell).is_err());

        let cyc = PriorSpec::default_for(PartitionScheme::Cycling(3));
        assert_eq!(cyc.selection_probs(&cyc.scheme().root()).unwrap(), vec![1.0]);
    }

    #[test]
    fn weights_per_rule() {
        let s = PartitionScheme::FullDyadic(2);
        let half = PriorSpec::default_for(s);
        assert_eq!(half.assignment_weights(&s.root(), 1).unwrap(), (0.5, 0.5));

        let base = PriorSpec::standard_polya(PartitionScheme::FullDyadic(1)).unwrap();
        let level2 = Region::from_dyadic(&[(2, 1)]).unwrap();
        assert_eq!(base.assignment_weights(&level2, 0).unwrap(), (9.0, 9.0));
        assert_eq!(base.assignment_weights(&Region::continuous_root(1), 0).unwrap(), (1.0, 1.0));

        let tau3 = PriorSpec::new(PartitionScheme::FullDyadic(1), 0.5, AlphaRule::TauScaled { tau: 3.0 }).unwrap();
        let (a, b) = tau3.assignment_weights(&level2, 0).unwrap();
        assert!((a - 9.0 / 8.0).abs() < 1e-15 && a == b);
    }

    #[test]
    fn tau_two_matches_half_exactly() {
        let s = PartitionScheme::FullDyadic(2);
        let half = PriorSpec::default_for(s);
        let tau = PriorSpec::new(s, 0.5, AlphaRule::TauScaled { tau: 2.0 }).unwrap();
        let mut frontier = vec![s.root()];
        for _ in 0..20 {
            let mut next = Vec::new();
            for r in &frontier {
                for j in 0..2 {
                    assert_eq!(
                        half.assignment_weights(r, j).unwrap(),
                        tau.assignment_weights(r, j).unwrap()
                    );
                }
            }
            // Follow a few branches only; full enumeration to depth 20 is 2^40 regions.
            for r in frontier.iter().take(4) {
                let (a, b) = s.split(r, 0).unwrap();
                let (c, _) = s.split(r, 1).unwrap();
                next.extend([a, b, c]);
            }
            frontier = next;
        }

        let t = PartitionScheme::BinaryTable(4);
        let half = PriorSpec::default_for(t);
        let tau = PriorSpec::new(t, 0.5, AlphaRule::TauScaled { tau: 2.0 }).unwrap();
        let r = Region::from_states(&[Some(1), None, Some(2), None]).unwrap();
        assert_eq!(half.assignment_weights(&r, 1).unwrap(), tau.assignment_weights(&r, 1).unwrap());
    }

    #[test]
    fn selection_sums_to_one() {
        for p in 1..=12 {
            let spec = PriorSpec::default_for(PartitionScheme::BinaryTable(p));
            let sum: f64 = spec.selection_probs(&spec.scheme().root()).unwrap().iter().sum();
            assert!((sum - 1.0).abs() <= 1e-15);
        }
    }
}
