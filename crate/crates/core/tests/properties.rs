use optree::evalsuite::{generate, oracle_check, GeneratorName, GeneratorSpec};
use optree::{
    appendix_masses, conditional_mean_density, hmap_tree, mean_density_dichotomous, AlphaRule, Dataset,
    PartitionScheme, PhiEngine, PriorSpec, RecursionLimits, Region, TreeNode,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;

fn spiky(n: usize, seed: u64) -> Dataset {
    let spec = GeneratorSpec::named(GeneratorName::SpikyUniforms, seed).unwrap();
    generate(&spec, n).unwrap().data
}

fn engine_for(data: Dataset, scheme: PartitionScheme) -> PhiEngine {
    PhiEngine::new(data, PriorSpec::default_for(scheme), RecursionLimits::for_dim(scheme.dim())).unwrap()
}

#[test]
fn oracle_equivalence_over_random_tables() {
    for p in 1..=3 {
        for n in 0..=5 {
            let r = oracle_check(p, n, 200, 2024).unwrap();
            assert!(r.passed, "{r:?}");
        }
    }
}

#[test]
fn recursion_audit_and_lower_bound() {
    let e = engine_for(spiky(500, 3), PartitionScheme::FullDyadic(1));
    e.log_phi_root().unwrap();
    assert!(e.audit_recursion().unwrap() <= 1e-12);
    let rho = e.spec().rho().ln();
    for (region, rec) in e.table().sorted_entries() {
        assert!(rec.log_phi >= rho + rec.log_phi0 - 1e-12, "{region}");
        if !rec.post_lambda.is_empty() && rec.post_rho < 1.0 {
            let s: f64 = rec.post_lambda.iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        for (j, &(a1, a2)) in rec.post_alpha.iter().enumerate() {
            let (n1, n2) = rec.split_counts[j];
            assert!(a1 >= n1 as f64 && a2 >= n2 as f64);
        }
    }
}

#[test]
fn audit_in_two_dimensions() {
    let spec = GeneratorSpec::named(GeneratorName::UniformSemiBeta2D, 5).unwrap();
    let e = engine_for(generate(&spec, 400).unwrap().data, PartitionScheme::FullDyadic(2));
    e.log_phi_root().unwrap();
    assert!(e.audit_recursion().unwrap() <= 1e-12);
}

fn walk_prior_equality(e: &PhiEngine, region: Region, depth: u32) {
    let p = e.posterior_params(&region).unwrap();
    let spec = e.spec();
    let m = spec.scheme().num_splits(&region).unwrap();
    assert_eq!(p.post_rho, spec.stopping_prob(&region));
    if m == 0 {
        return;
    }
    assert_eq!(p.post_lambda, spec.selection_probs(&region).unwrap());
    for j in 0..m {
        assert_eq!(p.post_alpha[j], spec.assignment_weights(&region, j).unwrap());
    }
    if depth == 0 {
        return;
    }
    for j in 0..m {
        let (l, r) = spec.scheme().split(&region, j).unwrap();
        e.compute_log_phi(&l).unwrap();
        e.compute_log_phi(&r).unwrap();
        walk_prior_equality(e, l, depth - 1);
        walk_prior_equality(e, r, depth - 1);
    }
}

#[test]
fn empty_data_posterior_is_prior() {
    let spec = PriorSpec::new(PartitionScheme::Cycling(2), 0.3, AlphaRule::TauScaled { tau: 3.0 }).unwrap();
    let e = PhiEngine::new(Dataset::empty(2), spec, RecursionLimits::for_dim(2)).unwrap();
    e.log_phi_root().unwrap();
    walk_prior_equality(&e, Region::continuous_root(2), 10);
    let e = engine_for(Dataset::empty(1), PartitionScheme::FullDyadic(1));
    e.log_phi_root().unwrap();
    walk_prior_equality(&e, Region::continuous_root(1), 10);
}

#[test]
fn permutation_invariance() {
    let data = spiky(300, 9);
    let mut pts: Vec<Vec<f64>> = data.points().map(<[f64]>::to_vec).collect();
    let a = engine_for(data, PartitionScheme::FullDyadic(1));
    a.log_phi_root().unwrap();
    pts.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(1));
    let b = engine_for(Dataset::from_points(1, &pts).unwrap(), PartitionScheme::FullDyadic(1));
    b.log_phi_root().unwrap();
    assert_eq!(a.table().sorted_entries(), b.table().sorted_entries());
}

#[test]
fn normalization_and_depth_sums() {
    let e = engine_for(spiky(500, 4), PartitionScheme::FullDyadic(1));
    for k in 1..=12 {
        let nodes = appendix_masses(&e, k).unwrap();
        assert_eq!(nodes.len(), 1 << k);
        let s: f64 = nodes.iter().map(|m| m.stopped + m.continuing).sum();
        assert!((s - 1.0).abs() < 1e-10, "depth {k}: {s}");
    }
    let m = mean_density_dichotomous(&e, 62).unwrap();
    assert!((m.density.total_mass() - 1.0).abs() < 1e-8);
    let t = hmap_tree(&e).unwrap();
    let f = conditional_mean_density(&t, &e).unwrap();
    assert!((f.total_mass() - 1.0).abs() < 1e-8);
}

#[test]
fn conditional_mass_telescopes() {
    let spec = GeneratorSpec::named(GeneratorName::BivariateNormal2D, 2).unwrap();
    let e = engine_for(generate(&spec, 1000).unwrap().data, PartitionScheme::FullDyadic(2));
    let t = hmap_tree(&e).unwrap();
    let f = conditional_mean_density(&t, &e).unwrap();
    fn check(node: &TreeNode, f: &optree::PiecewiseDensity) -> f64 {
        let mass = f.mass_in(node.region());
        if let TreeNode::Split { children, .. } = node {
            let sum = check(&children[0], f) + check(&children[1], f);
            assert!((sum - mass).abs() < 1e-12);
        }
        mass
    }
    assert!((check(&t.root, &f) - 1.0).abs() < 1e-10);
}

#[test]
fn hmap_is_thread_invariant() {
    let data = spiky(3000, 5);
    let build = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            let e = engine_for(data.clone(), PartitionScheme::FullDyadic(1));
            (hmap_tree(&e).unwrap(), e.table().sorted_entries())
        })
    };
    assert_eq!(build(1), build(4));
}

#[test]
fn semi_beta_root_splits_x_first() {
    let spec = GeneratorSpec::named(GeneratorName::UniformSemiBeta2D, 11).unwrap();
    let e = engine_for(generate(&spec, 10_000).unwrap().data, PartitionScheme::FullDyadic(2));
    let t = hmap_tree(&e).unwrap();
    assert_eq!(t.root_split_dim(), Some(0));
    let p = e.posterior_params(&Region::continuous_root(2)).unwrap();
    assert!(p.post_lambda[0] > p.post_lambda[1]);
}

#[test]
fn spiky_hmap_beats_standard_polya_tree() {
    let data = spiky(2500, 1);
    let target = GeneratorSpec::named(GeneratorName::SpikyUniforms, 1).unwrap();
    let e = engine_for(data.clone(), PartitionScheme::FullDyadic(1));
    let t = hmap_tree(&e).unwrap();
    let f = conditional_mean_density(&t, &e).unwrap();
    let base = PhiEngine::new(
        data,
        PriorSpec::standard_polya(PartitionScheme::FullDyadic(1)).unwrap(),
        RecursionLimits::for_dim(1),
    )
    .unwrap();
    let g = mean_density_dichotomous(&base, 62).unwrap().density;
    let l1 = |d| optree::evalsuite::l1_distance(d, &target, 0).unwrap().distance;
    assert!(l1(&f) < l1(&g));
}
