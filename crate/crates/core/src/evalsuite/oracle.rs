//! Exact marginal likelihood on small binary tables by listing every tree.
//!
//! A tree either stops at a region or splits it along one of the dimensions
//! still free there; a fully specified cell always stops. Each tree's prior
//! weight and its Beta-integrated likelihood are computed in exact rational
//! arithmetic and summed.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::PartitionScheme;
use crate::marginal::{Dataset, PhiEngine, RecursionLimits};
use crate::prior::{AlphaRule, PriorSpec};
use crate::rng::stream;

pub const MAX_TABLE_DIM: usize = 3;
pub const MAX_POINTS: usize = 5;
const ORACLE_STREAM: u64 = 0x6f72_6163_6c65;

#[derive(Clone, Debug)]
enum Tree {
    Stop,
    Split(usize, Box<Tree>, Box<Tree>),
}

fn all_trees(free: &[usize]) -> Vec<Tree> {
    let mut out = vec![Tree::Stop];
    for (k, &d) in free.iter().enumerate() {
        let mut rest = free.to_vec();
        rest.remove(k);
        let subs = all_trees(&rest);
        for l in &subs {
            for r in &subs {
                out.push(Tree::Split(d, Box::new(l.clone()), Box::new(r.clone())));
            }
        }
    }
    out
}

fn factorial(m: usize) -> BigInt {
    (1..=m).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// `Gamma(m + 1/2) / Gamma(1/2) = (2m)! / (4^m m!)`.
fn half_gamma_ratio(m: usize) -> BigRational {
    BigRational::new(factorial(2 * m), BigInt::from(4).pow(m as u32) * factorial(m))
}

/// `D(n + 1/2) / D(1/2)` for a binary split.
fn dirichlet_ratio(n1: usize, n2: usize) -> BigRational {
    half_gamma_ratio(n1) * half_gamma_ratio(n2) / BigRational::from_integer(factorial(n1 + n2))
}

/// `prior weight * likelihood` of `tree` at the region whose free dimensions
/// are `free`, holding `cells` (one bit per dimension, 0 for state 1), as
/// `(c, a, b)` with value `c * rho^a * (1 - rho)^b`.
fn tree_value(tree: &Tree, free: &[usize], cells: &[&[u8]]) -> (BigRational, u32, u32) {
    let m = free.len();
    match tree {
        Tree::Stop if m == 0 => (BigRational::one(), 0, 0),
        Tree::Stop => {
            let volume = BigInt::from(2).pow((m * cells.len()) as u32);
            (BigRational::new(BigInt::one(), volume), 1, 0)
        }
        Tree::Split(d, left, right) => {
            let rest: Vec<usize> = free.iter().copied().filter(|v| v != d).collect();
            let (lc, rc): (Vec<&[u8]>, Vec<&[u8]>) = cells.iter().copied().partition(|c| c[*d] == 0);
            let (cl, al, bl) = tree_value(left, &rest, &lc);
            let (cr, ar, br) = tree_value(right, &rest, &rc);
            let c = dirichlet_ratio(lc.len(), rc.len()) * cl * cr / BigRational::from_integer(BigInt::from(m));
            (c, al + ar, bl + br + 1)
        }
    }
}

fn pow(x: &BigRational, k: u32) -> BigRational {
    (0..k).fold(BigRational::one(), |acc, _| acc * x)
}

/// Exact marginal likelihood and its logarithm.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactPhi {
    pub phi: BigRational,
    pub log_phi: f64,
}

/// `Phi(root)` for data on `{1,2}^p` under a constant-`rho`, `alpha = 1/2`
/// optional Pólya tree, by enumeration.
pub fn brute_force_phi(p: usize, data: &Dataset, spec: &PriorSpec) -> Result<ExactPhi> {
    if p == 0 || p > MAX_TABLE_DIM {
        return Err(Error::Bounds(format!("table dimension {p} is outside 1..={MAX_TABLE_DIM}")));
    }
    if data.len() > MAX_POINTS {
        return Err(Error::Bounds(format!(
            "{} observations exceed the limit of {MAX_POINTS}",
            data.len()
        )));
    }
    if *spec.scheme() != PartitionScheme::BinaryTable(p) || spec.alpha_rule() != AlphaRule::ConstantHalf {
        return Err(Error::InvalidConfig(
            "the enumeration oracle needs a binary table scheme with alpha = 1/2".into(),
        ));
    }
    data.validate_for(spec.scheme())?;
    let rho = BigRational::from_float(spec.rho())
        .ok_or_else(|| Error::InvalidConfig("rho is not finite".into()))?;
    let cells: Vec<Vec<u8>> = data
        .points()
        .map(|x| x.iter().map(|&v| u8::from(v == 2.0)).collect())
        .collect();
    let cells: Vec<&[u8]> = cells.iter().map(Vec::as_slice).collect();
    let free: Vec<usize> = (0..p).collect();
    let mut groups: BTreeMap<(u32, u32), BigRational> = BTreeMap::new();
    for t in all_trees(&free) {
        let (c, a, b) = tree_value(&t, &free, &cells);
        *groups.entry((a, b)).or_insert_with(BigRational::zero) += c;
    }
    let stay = BigRational::one() - &rho;
    let phi = groups
        .into_iter()
        .map(|((a, b), c)| c * pow(&rho, a) * pow(&stay, b))
        .fold(BigRational::zero(), |acc, v| acc + v);
    let log_phi = phi
        .to_f64()
        .filter(|v| *v > 0.0 && v.is_finite())
        .ok_or_else(|| Error::NumericalFault("exact value is not representable".into()))?
        .ln();
    Ok(ExactPhi { phi, log_phi })
}

/// Outcome of comparing the recursion with the enumeration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    pub p: usize,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub max_rel_error: f64,
    pub worst_trial: usize,
    pub worst_rho: f64,
    pub passed: bool,
}

pub const ORACLE_TOLERANCE: f64 = 1e-10;

/// Runs `trials` random datasets of `n` points on `{1,2}^p`, each with its own
/// stopping probability, and records the largest relative error of
/// `exp(compute_log_phi)` against the exact value.
pub fn oracle_check(p: usize, n: usize, trials: usize, seed: u64) -> Result<OracleReport> {
    if p == 0 || p > MAX_TABLE_DIM || n > MAX_POINTS {
        return Err(Error::Bounds(format!(
            "oracle needs 1 <= p <= {MAX_TABLE_DIM} and n <= {MAX_POINTS}, got p = {p}, n = {n}"
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    let scheme = PartitionScheme::BinaryTable(p);
    let mut report = OracleReport {
        p,
        n,
        trials,
        seed,
        tolerance: ORACLE_TOLERANCE,
        max_rel_error: 0.0,
        worst_trial: 0,
        worst_rho: 0.5,
        passed: true,
    };
    for t in 0..trials {
        let mut rng = stream(seed, &[ORACLE_STREAM, p as u64, n as u64, t as u64]);
        let rho = 0.05 + 0.9 * rng.random::<f64>();
        let values: Vec<f64> = (0..n * p).map(|_| if rng.random::<bool>() { 2.0 } else { 1.0 }).collect();
        let data = Dataset::new(p, values)?;
        let spec = PriorSpec::new(scheme, rho, AlphaRule::ConstantHalf)?;
        let exact = brute_force_phi(p, &data, &spec)?;
        let engine = PhiEngine::new(data, spec, RecursionLimits::for_dim(p))?;
        let got = engine.log_phi_root()?.exp();
        let want = exact.log_phi.exp();
        let rel = ((got - want) / want).abs();
        if rel > report.max_rel_error || !rel.is_finite() {
            report.max_rel_error = if rel.is_finite() { rel } else { f64::INFINITY };
            report.worst_trial = t;
            report.worst_rho = rho;
        }
    }
    report.passed = report.max_rel_error < ORACLE_TOLERANCE;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(p: usize, pts: &[Vec<f64>], rho: f64) -> (Dataset, PriorSpec) {
        (
            Dataset::from_points(p, pts).unwrap(),
            PriorSpec::new(PartitionScheme::BinaryTable(p), rho, AlphaRule::ConstantHalf).unwrap(),
        )
    }

    #[test]
    fn tree_counts() {
        assert_eq!(all_trees(&[]).len(), 1);
        assert_eq!(all_trees(&[0]).len(), 2);
        assert_eq!(all_trees(&[0, 1]).len(), 9);
        assert_eq!(all_trees(&[0, 1, 2]).len(), 244);
    }

    #[test]
    fn exact_examples() {
        let (d, s) = table(1, &[vec![1.0]], 0.5);
        assert_eq!(brute_force_phi(1, &d, &s).unwrap().phi, BigRational::new(1.into(), 2.into()));
        let (d, s) = table(2, &[vec![2.0, 1.0]], 0.5);
        assert_eq!(brute_force_phi(2, &d, &s).unwrap().phi, BigRational::new(1.into(), 4.into()));
        let (d, s) = table(2, &[], 0.5);
        assert_eq!(brute_force_phi(2, &d, &s).unwrap().phi, BigRational::one());
    }

    #[test]
    fn dirichlet_ratio_values() {
        assert_eq!(dirichlet_ratio(1, 0), BigRational::new(1.into(), 2.into()));
        assert_eq!(dirichlet_ratio(2, 1), BigRational::new(1.into(), 16.into()));
    }

    #[test]
    fn bounds_enforced() {
        let (d, s) = table(2, &vec![vec![1.0, 1.0]; 6], 0.5);
        assert!(matches!(brute_force_phi(2, &d, &s), Err(Error::Bounds(_))));
        assert!(matches!(oracle_check(4, 1, 1, 0), Err(Error::Bounds(_))));
        assert!(oracle_check(2, 3, 0, 0).is_err());
    }

    #[test]
    fn recursion_matches_enumeration() {
        let r = oracle_check(2, 3, 50, 11).unwrap();
        assert!(r.passed, "{r:?}");
    }
}
