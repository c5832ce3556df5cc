//! P1 stiffness, mass and load assembly.

use rayon::prelude::*;

use super::sparse::SparseSymmetric;
use super::FemError;
use crate::geometry::Point;
use crate::mesh::{triangle_area, TriMesh};
use crate::quadrature::TriangleRule;
use crate::source::SourceTerm;

/// Gradients of the three barycentric basis functions and the area.
#[inline]
pub fn p1_gradients(p: &[Point; 3]) -> ([[f64; 2]; 3], f64) {
    let area = triangle_area(*p);
    let inv = 1.0 / (2.0 * area);
    let g = [
        [(p[1][1] - p[2][1]) * inv, (p[2][0] - p[1][0]) * inv],
        [(p[2][1] - p[0][1]) * inv, (p[0][0] - p[2][0]) * inv],
        [(p[0][1] - p[1][1]) * inv, (p[1][0] - p[0][0]) * inv],
    ];
    (g, area)
}

pub fn element_stiffness(p: &[Point; 3]) -> Result<[[f64; 3]; 3], FemError> {
    let (g, area) = p1_gradients(p);
    if !(area > 0.0) {
        return Err(FemError::DegenerateTriangle { area });
    }
    let mut k = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            k[a][b] = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
        }
    }
    Ok(k)
}

pub fn element_mass(p: &[Point; 3]) -> Result<[[f64; 3]; 3], FemError> {
    let area = triangle_area(*p);
    if !(area > 0.0) {
        return Err(FemError::DegenerateTriangle { area });
    }
    let d = area / 6.0;
    let o = area / 12.0;
    Ok([[d, o, o], [o, d, o], [o, o, d]])
}

type ElementMatrix = fn(&[Point; 3]) -> Result<[[f64; 3]; 3], FemError>;

fn assemble(mesh: &TriMesh, local: ElementMatrix) -> Result<SparseSymmetric, FemError> {
    let mut a = SparseSymmetric::with_mesh_pattern(mesh);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let k = local(&mesh.triangle_points(t))?;
        for i in 0..3 {
            for j in 0..3 {
                a.add_to(tri[i], tri[j], k[i][j]);
            }
        }
    }
    Ok(a)
}

/// `A_ij = int grad phi_i . grad phi_j`, no boundary conditions applied.
pub fn assemble_stiffness(mesh: &TriMesh) -> Result<SparseSymmetric, FemError> {
    assemble(mesh, element_stiffness)
}

/// `M_ij = int phi_i phi_j`.
pub fn assemble_mass(mesh: &TriMesh) -> Result<SparseSymmetric, FemError> {
    assemble(mesh, element_mass)
}

/// Adds per-triangle local vectors into a global nodal vector. Local
/// contributions are computed in parallel and summed in triangle order.
pub fn assemble_local_vectors<F>(mesh: &TriMesh, local: F) -> Vec<f64>
where
    F: Fn(usize, &[Point; 3]) -> [f64; 3] + Sync,
{
    let contributions: Vec<[f64; 3]> =
        (0..mesh.num_triangles()).into_par_iter().map(|t| local(t, &mesh.triangle_points(t))).collect();
    let mut out = vec![0.0; mesh.num_nodes()];
    for (tri, c) in mesh.triangles().iter().zip(&contributions) {
        for k in 0..3 {
            out[tri[k]] += c[k];
        }
    }
    out
}

/// `b_i = int f phi_i`. Piecewise-constant sources use the centroid value
/// (exact on axis-aligned grids); smooth sources a degree-9 rule.
pub fn assemble_load(mesh: &TriMesh, f: &SourceTerm) -> Vec<f64> {
    if f.is_piecewise_constant() {
        return assemble_local_vectors(mesh, |_, p| {
            let area = triangle_area(*p);
            let c = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
            let v = f.eval(c[0], c[1]) * area / 3.0;
            [v, v, v]
        });
    }
    let rule = TriangleRule::conical(5);
    assemble_local_vectors(mesh, |_, p| {
        let area = triangle_area(*p);
        let mut out = [0.0; 3];
        for k in 0..rule.len() {
            let x = rule.point(k, p);
            let w = rule.weights[k] * area * f.eval(x[0], x[1]);
            for (o, l) in out.iter_mut().zip(rule.bary[k]) {
                *o += w * l;
            }
        }
        out
    })
}

/// Load vector with the edge-midpoint rule (exact for quadratic `f phi_i`).
pub fn assemble_load_midpoint(mesh: &TriMesh, f: &SourceTerm) -> Vec<f64> {
    let rule = TriangleRule::edge_midpoints();
    assemble_local_vectors(mesh, |_, p| {
        let area = triangle_area(*p);
        let mut out = [0.0; 3];
        for k in 0..rule.len() {
            let x = rule.point(k, p);
            let w = rule.weights[k] * area * f.eval(x[0], x[1]);
            for (o, l) in out.iter_mut().zip(rule.bary[k]) {
                *o += w * l;
            }
        }
        out
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{builtin_domain, BcTag, BoundaryType, BuiltinDomain, PolygonDomain};
    use crate::mesh::initial_mesh;
    use approx::assert_relative_eq;

    #[test]
    fn unit_right_triangle_stiffness() {
        // Hand integration: gradients (-1,-1), (1,0), (0,1) on area 1/2.
        let k = element_stiffness(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let expected = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for a in 0..3 {
            for b in 0..3 {
                assert_relative_eq!(k[a][b], expected[a][b], epsilon = 1e-15);
            }
        }
        assert!(matches!(
            element_stiffness(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]),
            Err(FemError::DegenerateTriangle { .. })
        ));
    }

    #[test]
    fn mass_diagonal_is_area_over_six() {
        // int lambda_0^2 over a triangle = 2 A / 4! * 2! = A / 6.
        let p = [[0.3, 0.1], [2.0, 0.4], [0.7, 1.9]];
        let m = element_mass(&p).unwrap();
        let area = triangle_area(p);
        let rule = TriangleRule::conical(3);
        for (a, row) in m.iter().enumerate() {
            for (b, &entry) in row.iter().enumerate() {
                let q: f64 = (0..rule.len()).map(|k| rule.weights[k] * area * rule.bary[k][a] * rule.bary[k][b]).sum();
                assert_relative_eq!(entry, q, max_relative = 1e-13);
            }
            assert_relative_eq!(row[a], area / 6.0);
        }
    }

    #[test]
    fn global_matrices() {
        let d = builtin_domain(BuiltinDomain::III, BoundaryType::B1).unwrap();
        let mesh = initial_mesh(&d).unwrap().refine_uniform();
        let a = assemble_stiffness(&mesh).unwrap();
        assert!(a.row_sums().iter().all(|s| s.abs() < 1e-13));
        assert!(a.is_symmetric(1e-15));
        let m = assemble_mass(&mesh).unwrap();
        assert_relative_eq!(m.total_sum(), 12.0, max_relative = 1e-12);
        let ones = assemble_load(&mesh, &SourceTerm::Constant(1.0));
        assert_relative_eq!(ones.iter().sum::<f64>(), 12.0, max_relative = 1e-12);
        let quad = assemble_load(&mesh, &SourceTerm::Quadrant);
        assert!(quad.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn mass_is_positive_definite() {
        let sq = PolygonDomain::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], vec![BcTag::Dirichlet; 4])
            .unwrap();
        let mesh = initial_mesh(&sq).unwrap().refine_uniform().refine_uniform();
        let m = assemble_mass(&mesh).unwrap().to_dense();
        let eig = nalgebra::SymmetricEigen::new(m);
        assert!(eig.eigenvalues.min() > 0.0);
    }

    #[test]
    fn midpoint_rule_load() {
        let d = builtin_domain(BuiltinDomain::I, BoundaryType::B3).unwrap();
        let mesh = initial_mesh(&d).unwrap();
        // Linear f: f phi is quadratic and both rules are exact.
        let f = SourceTerm::Callback(std::sync::Arc::new(|x, y| x - 2.0 * y + 0.5));
        let a = assemble_load(&mesh, &f);
        let b = assemble_load_midpoint(&mesh, &f);
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(x, y, epsilon = 1e-13);
        }
    }
}
