//! P1 Lagrange finite elements: assembly, boundary conditions, linear
//! solves and discrete norms.

mod assembly;
mod solve;
mod sparse;

pub use assembly::{
    assemble_load, assemble_load_midpoint, assemble_local_vectors, assemble_mass, assemble_stiffness, element_mass,
    element_stiffness, p1_gradients,
};
pub use solve::{
    apply_dirichlet, solve_mean_zero, solve_spd, DirichletReduction, IncompleteCholesky, LinearSolveOptions,
    Preconditioner, ReducedSystem, SolveError, SolveStats,
};
pub use sparse::{dot, norm2, SparseSymmetric};

use thiserror::Error;

use crate::mesh::TriMesh;
use crate::quadrature::TriangleRule;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("degenerate triangle with area {area:e}")]
    DegenerateTriangle { area: f64 },
    #[error("vector has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// `|v_fine - v_coarse|_1 = sqrt(d^T A d)` with `A` the stiffness matrix of
/// the finer mesh and both vectors given on its nodes.
pub fn h1_seminorm_diff(v_fine: &[f64], v_coarse: &[f64], stiffness: &SparseSymmetric) -> Result<f64, FemError> {
    let n = stiffness.dim();
    for v in [v_fine, v_coarse] {
        if v.len() != n {
            return Err(FemError::DimensionMismatch { expected: n, got: v.len() });
        }
    }
    let d: Vec<f64> = v_fine.iter().zip(v_coarse).map(|(a, b)| a - b).collect();
    Ok(stiffness.bilinear(&d, &d).max(0.0).sqrt())
}

/// Largest nodal difference.
pub fn linf_diff(v1: &[f64], v2: &[f64]) -> Result<f64, FemError> {
    if v1.len() != v2.len() {
        return Err(FemError::DimensionMismatch { expected: v1.len(), got: v2.len() });
    }
    Ok(v1.iter().zip(v2).fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs())))
}

/// `|u - u_h|_1` against an exact gradient, by a degree-9 rule per triangle.
pub fn h1_error<G>(mesh: &TriMesh, u_h: &[f64], exact_gradient: G) -> f64
where
    G: Fn(f64, f64) -> [f64; 2] + Sync,
{
    let rule = TriangleRule::conical(5);
    let err2 = assemble_local_vectors(mesh, |t, p| {
        let (g, area) = p1_gradients(p);
        let tri = mesh.triangles()[t];
        let mut gh = [0.0; 2];
        for k in 0..3 {
            gh[0] += u_h[tri[k]] * g[k][0];
            gh[1] += u_h[tri[k]] * g[k][1];
        }
        let mut s = 0.0;
        for q in 0..rule.len() {
            let x = rule.point(q, p);
            let ge = exact_gradient(x[0], x[1]);
            s += rule.weights[q] * area * ((ge[0] - gh[0]).powi(2) + (ge[1] - gh[1]).powi(2));
        }
        // Attributed to one vertex so the global sum is the squared error.
        [s, 0.0, 0.0]
    });
    err2.iter().sum::<f64>().sqrt()
}

/// Discrete mean `1^T M v / 1^T M 1`.
pub fn discrete_mean(mass: &SparseSymmetric, v: &[f64]) -> f64 {
    let m1 = mass.row_sums();
    dot(&m1, v) / m1.iter().sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{builtin_domain, BcTag, BoundaryType, BuiltinDomain, PolygonDomain};
    use crate::mesh::initial_mesh;
    use crate::source::SourceTerm;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn l_shape_mesh(levels: usize, bc: BoundaryType) -> TriMesh {
        let d = builtin_domain(BuiltinDomain::III, bc).unwrap();
        let mut m = initial_mesh(&d).unwrap();
        for _ in 0..levels {
            m = m.refine_uniform();
        }
        m
    }

    #[test]
    fn seminorm_of_linear_function() {
        let m = l_shape_mesh(2, BoundaryType::B1);
        let a = assemble_stiffness(&m).unwrap();
        let x: Vec<f64> = m.nodes().iter().map(|p| p[0]).collect();
        let zero = vec![0.0; m.num_nodes()];
        assert_relative_eq!(h1_seminorm_diff(&x, &zero, &a).unwrap(), 12f64.sqrt(), max_relative = 1e-13);
        assert_eq!(h1_seminorm_diff(&x, &x, &a).unwrap(), 0.0);
        assert_eq!(h1_seminorm_diff(&x, &zero, &a).unwrap(), h1_seminorm_diff(&zero, &x, &a).unwrap());
        assert!(h1_seminorm_diff(&x, &[0.0], &a).is_err());
    }

    #[test]
    fn linf_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut brute: f64 = 0.0;
        for i in 0..50 {
            brute = brute.max((a[i] - b[i]).abs());
        }
        assert_eq!(linf_diff(&a, &b).unwrap(), brute);
        assert_eq!(linf_diff(&a, &a).unwrap(), 0.0);
        let mut c = a.clone();
        c[17] += 0.25;
        assert_relative_eq!(linf_diff(&a, &c).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn stiffness_is_semidefinite_with_constant_kernel() {
        let m = l_shape_mesh(1, BoundaryType::B1);
        let a = assemble_stiffness(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let mut v: Vec<f64> = (0..m.num_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            v.iter_mut().for_each(|x| *x -= mean);
            assert!(a.bilinear(&v, &v) > 0.0);
        }
    }

    #[test]
    fn assembly_is_permutation_invariant() {
        let m = l_shape_mesh(1, BoundaryType::B1);
        let mut tris = m.triangles().to_vec();
        tris.reverse();
        for t in tris.iter_mut() {
            t.rotate_left(1);
        }
        let shuffled = TriMesh::from_parts(m.nodes().to_vec(), tris, m.boundary_edges().to_vec());
        let a1 = assemble_stiffness(&m).unwrap();
        let a2 = assemble_stiffness(&shuffled).unwrap();
        let m1 = assemble_mass(&m).unwrap();
        let m2 = assemble_mass(&shuffled).unwrap();
        for i in 0..m.num_nodes() {
            for j in 0..m.num_nodes() {
                assert!((a1.get(i, j) - a2.get(i, j)).abs() < 1e-14);
                assert!((m1.get(i, j) - m2.get(i, j)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn reduced_system_is_spd_and_solvable() {
        let m = l_shape_mesh(2, BoundaryType::B3);
        let a = assemble_stiffness(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b: Vec<f64> = (0..m.num_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sys = apply_dirichlet(&a, &b, m.dirichlet_nodes()).unwrap();
        let opts = LinearSolveOptions::default();
        let (x, stats) = solve_spd(&sys.matrix, &sys.rhs, &opts).unwrap();
        assert!(stats.relative_residual <= 1e-10);
        // Galerkin orthogonality: residual against every free test vector.
        let r: Vec<f64> = sys.matrix.mul(&x).iter().zip(&sys.rhs).map(|(ax, b)| ax - b).collect();
        assert!(norm2(&r) <= 1e-10 * norm2(&sys.rhs));
    }

    #[test]
    fn solve_is_invariant_under_symmetric_permutation() {
        let m = l_shape_mesh(2, BoundaryType::B1);
        let a = assemble_stiffness(&m).unwrap();
        let b = assemble_load(&m, &SourceTerm::Constant(1.0));
        let sys = apply_dirichlet(&a, &b, m.dirichlet_nodes()).unwrap();
        let n = sys.matrix.dim();
        let perm: Vec<usize> = (0..n).rev().collect();
        let pa = sys.matrix.permuted(&perm);
        let pb: Vec<f64> = perm.iter().map(|&i| sys.rhs[i]).collect();
        let opts = LinearSolveOptions { tolerance: 1e-12, ..Default::default() };
        let (x, _) = solve_spd(&sys.matrix, &sys.rhs, &opts).unwrap();
        let (px, _) = solve_spd(&pa, &pb, &opts).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            assert!((px[k] - x[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn square_two_triangles_has_no_unknowns() {
        let sq = PolygonDomain::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], vec![BcTag::Dirichlet; 4])
            .unwrap();
        let m = initial_mesh(&sq).unwrap();
        let a = assemble_stiffness(&m).unwrap();
        assert!(matches!(apply_dirichlet(&a, &[0.0; 4], m.dirichlet_nodes()), Err(SolveError::AllConstrained)));
    }

    #[test]
    fn poisson_h1_error_is_first_order() {
        let sq = PolygonDomain::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], vec![BcTag::Dirichlet; 4])
            .unwrap();
        // -Lap u = 2 pi^2 sin sin, u = sin(pi x) sin(pi y).
        let f = SourceTerm::Callback(std::sync::Arc::new(|x, y| 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin()));
        let grad = |x: f64, y: f64| [PI * (PI * x).cos() * (PI * y).sin(), PI * (PI * x).sin() * (PI * y).cos()];
        let mut m = initial_mesh(&sq).unwrap().refine_uniform().refine_uniform();
        let mut errors = Vec::new();
        for _ in 0..4 {
            let a = assemble_stiffness(&m).unwrap();
            let b = assemble_load(&m, &f);
            let sys = apply_dirichlet(&a, &b, m.dirichlet_nodes()).unwrap();
            let (x, _) = solve_spd(&sys.matrix, &sys.rhs, &LinearSolveOptions::default()).unwrap();
            errors.push(h1_error(&m, &sys.reduction.extend(&x), grad));
            m = m.refine_uniform();
        }
        for w in errors.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 0.95 && order < 1.1, "order {order}");
        }
    }

    #[test]
    fn mean_zero_solve() {
        let m = l_shape_mesh(3, BoundaryType::B5);
        let a = assemble_stiffness(&m).unwrap();
        let mass = assemble_mass(&m).unwrap();
        let opts = LinearSolveOptions::default();
        let (x, _) = solve_mean_zero(&a, &mass, &vec![0.0; m.num_nodes()], &opts).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));

        let b = assemble_load(&m, &SourceTerm::Quadrant);
        let (x, stats) = solve_mean_zero(&a, &mass, &b, &opts).unwrap();
        assert!(stats.relative_residual <= 1e-10);
        let vm = mass.bilinear(&x, &x).sqrt();
        assert!(dot(&mass.row_sums(), &x).abs() <= 1e-9 * vm);
        assert!(discrete_mean(&mass, &x).abs() < 1e-10);
        let r: Vec<f64> = a.mul(&x).iter().zip(&b).map(|(ax, bi)| ax - bi).collect();
        assert!(norm2(&r) <= 1e-9 * norm2(&b));

        let ones = assemble_load(&m, &SourceTerm::Constant(1.0));
        assert!(matches!(solve_mean_zero(&a, &mass, &ones, &opts), Err(SolveError::Incompatible { .. })));
    }
}
