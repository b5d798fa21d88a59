use std::f64::consts::LN_2;

use optree::evalsuite::brute_force_phi;
use optree::marginal::{log_dirichlet_ratio, log_phi0};
use optree::{AlphaRule, Dataset, PartitionScheme, PhiEngine, PriorSpec, RecursionLimits, Region};

fn engine(scheme: PartitionScheme, pts: &[Vec<f64>], rho: f64, limits: RecursionLimits) -> PhiEngine {
    let spec = PriorSpec::new(scheme, rho, AlphaRule::ConstantHalf).unwrap();
    PhiEngine::new(Dataset::from_points(scheme.dim(), pts).unwrap(), spec, limits).unwrap()
}

#[test]
fn phi0_examples() {
    let unit = Region::continuous_root(3);
    assert_eq!(log_phi0(&unit, 7), 0.0);
    let small = Region::from_dyadic(&[(3, 5)]).unwrap();
    assert!((log_phi0(&small, 2) - 6.0 * LN_2).abs() < 1e-15);
    assert_eq!(log_phi0(&small, 0), 0.0);
}

#[test]
fn dirichlet_ratio_examples() {
    assert_eq!(log_dirichlet_ratio((0, 0), (0.5, 0.5)), 0.0);
    assert!((log_dirichlet_ratio((1, 0), (0.5, 0.5)) - 0.5f64.ln()).abs() < 1e-15);
    assert!((log_dirichlet_ratio((2, 1), (0.5, 0.5)) - (1.0f64 / 16.0).ln()).abs() < 1e-14);
}

#[test]
fn table_single_observation_is_two_to_minus_m() {
    for m in 1..=20usize {
        let mut x = vec![1.0; m];
        x[m / 2] = 2.0;
        let e = engine(PartitionScheme::BinaryTable(m), &[x], 0.5, RecursionLimits::for_dim(m));
        let v = e.log_phi_root().unwrap();
        assert!((v + m as f64 * LN_2).abs() < 1e-12, "M = {m}: {v}");
    }
}

#[test]
fn table_single_observation_without_shortcut() {
    // Full recursion reaches the same value for small tables.
    for m in 1..=6usize {
        let x = vec![2.0; m];
        let e = engine(PartitionScheme::BinaryTable(m), &[x], 0.5, RecursionLimits::for_dim(m)).without_closed_forms();
        let v = e.log_phi_root().unwrap();
        assert!((v + m as f64 * LN_2).abs() < 1e-12, "M = {m}: {v}");
    }
}

#[test]
fn continuous_single_observation_is_inverse_measure() {
    let limits = RecursionLimits::new(1e-300, 40).unwrap();
    for depth in [0u32, 3, 10] {
        let region = Region::from_dyadic(&[(depth, 1)]).unwrap_or_else(|_| Region::continuous_root(1));
        let (lo, hi) = region.bounds(0);
        let x = lo + 0.3 * (hi - lo);
        for rho in [0.2, 0.5, 0.9] {
            let e = engine(PartitionScheme::FullDyadic(1), &[vec![x]], rho, limits).without_closed_forms();
            let v = e.compute_log_phi(&region).unwrap();
            assert!((v + region.log_measure()).abs() < 1e-9, "depth {depth}, rho {rho}: {v}");
        }
    }
}

#[test]
fn two_by_two_table_matches_enumeration() {
    let pts = vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![2.0, 2.0]];
    let e = engine(PartitionScheme::BinaryTable(2), &pts, 0.5, RecursionLimits::for_dim(2));
    let got = e.log_phi_root().unwrap();
    let exact = brute_force_phi(2, e.data(), e.spec()).unwrap();
    assert!(((got - exact.log_phi).exp() - 1.0).abs() < 1e-10);
}

#[test]
fn single_point_posterior_stop_probability() {
    let e = engine(PartitionScheme::BinaryTable(2), &[vec![1.0, 2.0]], 0.5, RecursionLimits::for_dim(2));
    e.log_phi_root().unwrap();
    let p = e.posterior_params(&Region::discrete_root(2)).unwrap();
    assert!((p.post_rho - 0.5).abs() < 1e-15);
}
