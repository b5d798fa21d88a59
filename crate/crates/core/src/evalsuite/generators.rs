//! Reference mixtures on the unit cube.

use rand::Rng;
use rand_distr::{Beta as BetaSampler, Distribution, Normal as NormalSampler};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::marginal::Dataset;
use crate::rng::stream;

const GENERATOR_STREAM: u64 = 0x6765_6e65_7261_7465;
const MAX_REJECTIONS_PER_POINT: u64 = 1_000_000;

/// One coordinate of a mixture component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Factor {
    Uniform { lo: f64, hi: f64 },
    Beta { a: f64, b: f64 },
    /// Normal law restricted to `[0, 1]`.
    TruncatedNormal { mean: f64, sd: f64 },
}

impl Factor {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Factor::Uniform { lo, hi } => (0.0..1.0).contains(&lo) && hi > lo && hi <= 1.0,
            Factor::Beta { a, b } => a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite(),
            Factor::TruncatedNormal { mean, sd } => mean.is_finite() && sd > 0.0 && sd.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid mixture factor {self:?}")))
        }
    }

    fn normal(mean: f64, sd: f64) -> Normal {
        Normal::new(mean, sd).expect("validated normal parameters")
    }

    /// Density on `[0, 1]`.
    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Factor::Uniform { lo, hi } => {
                if (lo..=hi).contains(&x) {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Factor::Beta { a, b } => {
                let d = Beta::new(a, b).expect("validated beta parameters");
                if x <= 0.0 || x >= 1.0 {
                    // Endpoint values only matter on a null set.
                    0.0
                } else {
                    d.pdf(x)
                }
            }
            Factor::TruncatedNormal { mean, sd } => {
                let n = Self::normal(mean, sd);
                n.pdf(x) / (n.cdf(1.0) - n.cdf(0.0))
            }
        }
    }

    /// Distribution function on `[0, 1]`.
    pub fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match *self {
            Factor::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Factor::Beta { a, b } => Beta::new(a, b).expect("validated beta parameters").cdf(x),
            Factor::TruncatedNormal { mean, sd } => {
                let n = Self::normal(mean, sd);
                let lo = n.cdf(0.0);
                (n.cdf(x) - lo) / (n.cdf(1.0) - lo)
            }
        }
    }

    /// Points where the density is not smooth, inside `(0, 1)`.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Factor::Uniform { lo, hi } => [lo, hi].into_iter().filter(|&v| v > 0.0 && v < 1.0).collect(),
            _ => Vec::new(),
        }
    }
}

/// A weighted product law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub factors: Vec<Factor>,
}

/// A finite mixture of product laws on `[0, 1]^p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    components: Vec<Component>,
}

impl Mixture {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        let dim = components
            .first()
            .map(|c| c.factors.len())
            .ok_or_else(|| Error::InvalidConfig("a mixture needs at least one component".into()))?;
        if dim == 0 {
            return Err(Error::InvalidConfig("mixture components need at least one factor".into()));
        }
        let mut total = 0.0;
        for c in &components {
            if c.factors.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: c.factors.len(),
                });
            }
            if !(c.weight > 0.0 && c.weight.is_finite()) {
                return Err(Error::InvalidConfig(format!("mixture weight {} is not positive", c.weight)));
            }
            for f in &c.factors {
                f.validate()?;
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(Self { components })
    }

    pub fn dim(&self) -> usize {
        self.components[0].factors.len()
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// Mixture density at `x`; errors outside `[0, 1]^p`.
    pub fn density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::PointOutsideRegion { point: x.to_vec() });
        }
        Ok(self
            .components
            .iter()
            .map(|c| c.weight * c.factors.iter().zip(x).map(|(f, &v)| f.pdf(v)).product::<f64>())
            .sum())
    }

    /// Mixture distribution function of a one-dimensional mixture.
    pub fn cdf_1d(&self, x: f64) -> f64 {
        self.components.iter().map(|c| c.weight * c.factors[0].cdf(x)).sum()
    }

    /// Sorted, deduplicated non-smooth points of a one-dimensional mixture.
    pub fn breakpoints_1d(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.components.iter().flat_map(|c| c.factors[0].breakpoints()).collect();
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// Mass of the box `[lo, hi]`.
    pub fn box_mass(&self, lo: &[f64], hi: &[f64]) -> f64 {
        self.components
            .iter()
            .map(|c| {
                c.weight
                    * c.factors
                        .iter()
                        .enumerate()
                        .map(|(d, f)| f.cdf(hi[d]) - f.cdf(lo[d]))
                        .product::<f64>()
            })
            .sum()
    }
}

/// Named reference laws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GeneratorName {
    SpikyUniforms,
    BetaMixture,
    UniformSemiBeta2D,
    BivariateNormal2D,
    Custom,
}

impl GeneratorName {
    pub const NAMED: [GeneratorName; 4] = [
        GeneratorName::SpikyUniforms,
        GeneratorName::BetaMixture,
        GeneratorName::UniformSemiBeta2D,
        GeneratorName::BivariateNormal2D,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GeneratorName::SpikyUniforms => "SpikyUniforms",
            GeneratorName::BetaMixture => "BetaMixture",
            GeneratorName::UniformSemiBeta2D => "UniformSemiBeta2D",
            GeneratorName::BivariateNormal2D => "BivariateNormal2D",
            GeneratorName::Custom => "Custom",
        }
    }

    /// Case-insensitive lookup, accepting `-` and `_` separators.
    pub fn parse(name: &str) -> Result<Self> {
        let key: String = name
            .chars()
            .filter(|c| *c != '-' && *c != '_')
            .flat_map(char::to_lowercase)
            .collect();
        Self::NAMED
            .into_iter()
            .chain([GeneratorName::Custom])
            .find(|g| g.as_str().to_lowercase() == key)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown generator {name:?}")))
    }

    fn mixture(self) -> Option<Mixture> {
        use Factor::*;
        let comps = match self {
            GeneratorName::SpikyUniforms => vec![
                Component {
                    weight: 0.5,
                    factors: vec![Uniform { lo: 0.23, hi: 0.232 }],
                },
                Component {
                    weight: 0.5,
                    factors: vec![Uniform { lo: 0.233, hi: 0.235 }],
                },
            ],
            GeneratorName::BetaMixture => vec![
                Component {
                    weight: 0.7,
                    factors: vec![Beta { a: 40.0, b: 60.0 }],
                },
                Component {
                    weight: 0.3,
                    factors: vec![Beta { a: 2000.0, b: 1000.0 }],
                },
            ],
            GeneratorName::UniformSemiBeta2D => vec![
                Component {
                    weight: 0.35,
                    factors: vec![Uniform { lo: 0.78, hi: 0.80 }, Uniform { lo: 0.2, hi: 0.8 }],
                },
                Component {
                    weight: 0.65,
                    factors: vec![Uniform { lo: 0.25, hi: 0.4 }, Beta { a: 100.0, b: 120.0 }],
                },
            ],
            GeneratorName::BivariateNormal2D => vec![Component {
                weight: 1.0,
                factors: vec![
                    TruncatedNormal { mean: 0.6, sd: 0.1 },
                    TruncatedNormal { mean: 0.4, sd: 0.1 },
                ],
            }],
            GeneratorName::Custom => return None,
        };
        Some(Mixture::new(comps).expect("built-in mixtures are valid"))
    }
}

/// A reference law together with the seed used to sample from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub name: GeneratorName,
    pub mixture: Mixture,
    pub seed: u64,
}

impl GeneratorSpec {
    /// One of the built-in laws; `Custom` needs [`GeneratorSpec::custom`].
    pub fn named(name: GeneratorName, seed: u64) -> Result<Self> {
        let mixture = name
            .mixture()
            .ok_or_else(|| Error::InvalidConfig("a custom generator needs explicit components".into()))?;
        Ok(Self { name, mixture, seed })
    }

    pub fn custom(mixture: Mixture, seed: u64) -> Self {
        Self {
            name: GeneratorName::Custom,
            mixture,
            seed,
        }
    }

    pub fn dim(&self) -> usize {
        self.mixture.dim()
    }

    /// Remarks to carry into run metadata.
    pub fn notes(&self) -> Vec<String> {
        match self.name {
            GeneratorName::BivariateNormal2D => vec![
                "mean (0.6, 0.4) follows the example text; the figure caption states (0.4, 0.6)".into(),
                "the normal law is truncated to the unit square and renormalized".into(),
            ],
            _ => Vec::new(),
        }
    }
}

/// A sample together with the number of out-of-domain draws it discarded.
#[derive(Clone, Debug)]
pub struct Generated {
    pub data: Dataset,
    pub rejections: u64,
}

fn sample_factor<R: Rng>(f: &Factor, rng: &mut R) -> f64 {
    match *f {
        Factor::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        Factor::Beta { a, b } => BetaSampler::new(a, b).expect("validated").sample(rng),
        Factor::TruncatedNormal { mean, sd } => NormalSampler::new(mean, sd).expect("validated").sample(rng),
    }
}

/// `n` independent draws; draw `i` uses its own stream, so the output does not
/// depend on the thread count.
pub fn generate(spec: &GeneratorSpec, n: usize) -> Result<Generated> {
    if n == 0 {
        return Err(Error::InvalidConfig("sample size must be at least 1".into()));
    }
    let mix = &spec.mixture;
    let dim = mix.dim();
    let draws: Vec<(Vec<f64>, u64)> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(spec.seed, &[GENERATOR_STREAM, i]);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut comp = &mix.components[mix.components.len() - 1];
            for c in &mix.components {
                acc += c.weight;
                if u < acc {
                    comp = c;
                    break;
                }
            }
            let mut rejected = 0;
            loop {
                let x: Vec<f64> = comp.factors.iter().map(|f| sample_factor(f, &mut rng)).collect();
                if x.iter().all(|v| (0.0..=1.0).contains(v)) {
                    return Ok((x, rejected));
                }
                rejected += 1;
                if rejected >= MAX_REJECTIONS_PER_POINT {
                    return Err(Error::InvalidConfig("mixture puts almost no mass on the unit cube".into()));
                }
            }
        })
        .collect::<Result<_>>()?;
    let mut values = Vec::with_capacity(n * dim);
    let mut rejections = 0;
    for (x, r) in draws {
        values.extend(x);
        rejections += r;
    }
    Ok(Generated {
        data: Dataset::new(dim, values)?,
        rejections,
    })
}

/// Density of the law at `x`; errors outside `[0, 1]^p`.
pub fn true_density(spec: &GeneratorSpec, x: &[f64]) -> Result<f64> {
    spec.mixture.density(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn named(n: GeneratorName) -> GeneratorSpec {
        GeneratorSpec::named(n, 1).unwrap()
    }

    #[test]
    fn density_examples() {
        let s = named(GeneratorName::SpikyUniforms);
        assert!((true_density(&s, &[0.231]).unwrap() - 250.0).abs() < 1e-9);
        assert_eq!(true_density(&s, &[0.5]).unwrap(), 0.0);
        assert!(true_density(&s, &[1.5]).is_err());
        let u = named(GeneratorName::UniformSemiBeta2D);
        assert!((true_density(&u, &[0.79, 0.5]).unwrap() - 0.35 / 0.012).abs() < 1e-9);
    }

    #[test]
    fn parse_names() {
        assert_eq!(GeneratorName::parse("spiky-uniforms").unwrap(), GeneratorName::SpikyUniforms);
        assert_eq!(GeneratorName::parse("BivariateNormal2D").unwrap(), GeneratorName::BivariateNormal2D);
        assert!(GeneratorName::parse("gaussian").is_err());
        assert!(GeneratorSpec::named(GeneratorName::Custom, 0).is_err());
    }

    #[test]
    fn invalid_mixtures_rejected() {
        let bad = |c: Vec<Component>| Mixture::new(c).is_err();
        assert!(bad(vec![]));
        assert!(bad(vec![Component {
            weight: 0.5,
            factors: vec![Factor::Beta { a: 1.0, b: 1.0 }]
        }]));
        assert!(bad(vec![Component {
            weight: 1.0,
            factors: vec![Factor::Uniform { lo: 0.5, hi: 0.2 }]
        }]));
    }

    #[test]
    fn generation_is_deterministic_and_in_domain() {
        for name in GeneratorName::NAMED {
            let s = named(name);
            let a = generate(&s, 500).unwrap();
            let b = generate(&s, 500).unwrap();
            assert_eq!(a.data.values(), b.data.values());
            assert!(a.data.values().iter().all(|v| (0.0..=1.0).contains(v)));
        }
        assert!(generate(&named(GeneratorName::BetaMixture), 0).is_err());
    }

    #[test]
    fn truncated_normal_cdf_spans_unit_interval() {
        let f = Factor::TruncatedNormal { mean: 0.6, sd: 0.1 };
        assert_eq!(f.cdf(0.0), 0.0);
        assert!((f.cdf(1.0) - 1.0).abs() < 1e-15);
    }
}
