//! Randomised invariants of meshes, prolongation, assembly and the rate
//! computation.

use approx::assert_relative_eq;
use biharmonic::fem::{assemble_mass, assemble_stiffness, h1_seminorm_diff};
use biharmonic::geometry::{builtin_domain, perp_dimension, BoundaryType, BuiltinDomain, PolygonDomain};
use biharmonic::mesh::{initial_mesh, mesh_hierarchy, TriMesh};
use biharmonic::study::cauchy_rate;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn domain_strategy() -> impl Strategy<Value = PolygonDomain> {
    (0..BuiltinDomain::ALL.len(), 0..BoundaryType::ALL.len())
        .prop_map(|(d, b)| builtin_domain(BuiltinDomain::ALL[d], BoundaryType::ALL[b]).unwrap())
}

fn hierarchy(domain: &PolygonDomain, levels: usize) -> Vec<TriMesh> {
    mesh_hierarchy(domain, levels).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn prolongation_reproduces_affine_functions(
        domain in domain_strategy(),
        a in -3.0..3.0f64,
        b in -3.0..3.0f64,
        c in -3.0..3.0f64,
        levels in 1usize..4,
    ) {
        let meshes = hierarchy(&domain, levels);
        let f = |p: &[f64; 2]| a + b * p[0] + c * p[1];
        for pair in meshes.windows(2) {
            let coarse: Vec<f64> = pair[0].nodes().iter().map(f).collect();
            let fine = pair[1].prolongation().unwrap().apply(&coarse).unwrap();
            for (v, p) in fine.iter().zip(pair[1].nodes()) {
                prop_assert!((v - f(p)).abs() <= 1e-12 * (1.0 + f(p).abs()));
            }
        }
    }

    #[test]
    fn prolongation_preserves_the_energy(domain in domain_strategy(), seed in any::<u64>()) {
        let meshes = hierarchy(&domain, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for pair in meshes.windows(2) {
            let v: Vec<f64> = (0..pair[0].num_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let zero_coarse = vec![0.0; v.len()];
            let coarse = h1_seminorm_diff(&v, &zero_coarse, &assemble_stiffness(&pair[0]).unwrap()).unwrap();
            let pv = pair[1].prolongation().unwrap().apply(&v).unwrap();
            let zero_fine = vec![0.0; pv.len()];
            let fine = h1_seminorm_diff(&pv, &zero_fine, &assemble_stiffness(&pair[1]).unwrap()).unwrap();
            prop_assert!((fine - coarse).abs() <= 1e-12 * coarse);
        }
    }

    #[test]
    fn refinement_bookkeeping(domain in domain_strategy(), levels in 1usize..4) {
        let meshes = hierarchy(&domain, levels);
        for pair in meshes.windows(2) {
            let (coarse, fine) = (&pair[0], &pair[1]);
            prop_assert_eq!(fine.num_triangles(), 4 * coarse.num_triangles());
            prop_assert_eq!(fine.num_nodes(), coarse.num_nodes() + coarse.edges().len());
            prop_assert!((fine.total_area() - domain.area()).abs() <= 1e-13 * domain.area());
            let report = fine.check_conformity();
            prop_assert!(report.is_conforming(), "{:?}", report);
        }
    }

    #[test]
    fn stiffness_ignores_constants(domain in domain_strategy(), shift in -5.0..5.0f64, seed in any::<u64>()) {
        let mesh = initial_mesh(&domain).unwrap().refine_uniform();
        let a = assemble_stiffness(&mesh).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..mesh.num_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
        let e = a.bilinear(&v, &v);
        prop_assert!(e > 0.0);
        prop_assert!((a.bilinear(&shifted, &shifted) - e).abs() <= 1e-10 * (e + shift * shift));
        let m = assemble_mass(&mesh).unwrap();
        prop_assert!((m.total_sum() - domain.area()).abs() <= 1e-12 * domain.area());
    }

    #[test]
    fn perp_dimension_is_invariant_under_rigid_motions(
        domain in domain_strategy(),
        angle in -6.3..6.3f64,
        dx in -10.0..10.0f64,
        dy in -10.0..10.0f64,
    ) {
        let moved = domain.transformed(angle, [dx, dy]).unwrap();
        let a = perp_dimension(&domain);
        let b = perp_dimension(&moved);
        prop_assert_eq!(a.d_perp, b.d_perp);
        prop_assert_eq!(a.contributing, b.contributing);
        prop_assert!((moved.area() - domain.area()).abs() <= 1e-12 * domain.area());
    }

    #[test]
    fn geometric_differences_give_constant_rates(d0 in 1e-3..10.0f64, alpha in 0.05..2.0f64, n in 2usize..10) {
        let d: Vec<f64> = (0..n).map(|k| d0 * 2f64.powf(-alpha * k as f64)).collect();
        for r in cauchy_rate(&d).unwrap() {
            prop_assert!((r - alpha).abs() <= 1e-12);
        }
    }
}

#[test]
fn level_zero_meshes_match_the_unit_grid() {
    for (name, triangles) in
        [(BuiltinDomain::I, 16), (BuiltinDomain::II, 20), (BuiltinDomain::III, 24), (BuiltinDomain::IV, 28)]
    {
        let domain = builtin_domain(name, BoundaryType::B3).unwrap();
        let mesh = initial_mesh(&domain).unwrap();
        assert_eq!(mesh.num_triangles(), triangles, "domain {name}");
        assert_relative_eq!(mesh.total_area(), domain.area(), max_relative = 1e-14);
        assert!(mesh.find_node([0.0, 0.0], 1e-12).is_some());
    }
}

#[test]
fn mesh_text_round_trip() {
    let domain = builtin_domain(BuiltinDomain::IV, BoundaryType::B4).unwrap();
    let mesh = initial_mesh(&domain).unwrap().refine_uniform();
    let back = TriMesh::from_text(&mesh.to_text()).unwrap();
    assert_eq!(back.nodes(), mesh.nodes());
    assert_eq!(back.triangles(), mesh.triangles());
    assert_eq!(back.dirichlet_nodes(), mesh.dirichlet_nodes());
}
