//! Gauss rules on the unit interval and on triangles.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::geometry::Point;

/// Nodes and weights on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Gauss rule for `int_0^1 r^alpha g(r) dr`, `alpha > -1`, exact for
/// polynomials `g` of degree `2n - 1`.
///
/// Built with Golub-Welsch from the Jacobi recurrence for the weight
/// `(1 + x)^alpha` on `[-1, 1]`, then mapped to `[0, 1]`.
pub fn gauss_jacobi_left(n: usize, alpha: f64) -> Rule1d {
    assert!(n > 0 && alpha > -1.0);
    let b = alpha;
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let s = 2.0 * kf + b;
        jac[(k, k)] = if k == 0 { b / (b + 2.0) } else { b * b / (s * (s + 2.0)) };
        if k + 1 < n {
            let m = kf + 1.0;
            let s = 2.0 * m + b;
            let beta = 4.0 * m * m * (m + b) * (m + b) / (s * s * (s + 1.0) * (s - 1.0));
            jac[(k, k + 1)] = beta.sqrt();
            jac[(k + 1, k)] = beta.sqrt();
        }
    }
    // Total mass of (1 + x)^b on [-1, 1].
    let mu0 = 2f64.powf(b + 1.0) / (b + 1.0);
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            let x = eig.eigenvalues[k];
            ((1.0 + x) / 2.0, mu0 * v0 * v0 * 2f64.powf(-b - 1.0))
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Rule1d { nodes: pairs.iter().map(|p| p.0).collect(), weights: pairs.iter().map(|p| p.1).collect() }
}

pub fn gauss_legendre(n: usize) -> Rule1d {
    gauss_jacobi_left(n, 0.0)
}

/// Points and weights on a triangle; scale the weights by the triangle area.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleRule {
    /// Barycentric coordinates of each point.
    pub bary: Vec<[f64; 3]>,
    /// Weights summing to one.
    pub weights: Vec<f64>,
}

impl TriangleRule {
    /// Collapsed (Duffy) product rule exact for degree `2n - 1`.
    pub fn conical(n: usize) -> Self {
        let radial = gauss_jacobi_left(n, 1.0);
        let angular = gauss_legendre(n);
        let mut bary = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (u, wu) in radial.nodes.iter().zip(&radial.weights) {
            for (v, wv) in angular.nodes.iter().zip(&angular.weights) {
                // p = p0 + u (p1 - p0) + u v (p2 - p1)
                let l1 = u * (1.0 - v);
                let l2 = u * v;
                bary.push([1.0 - l1 - l2, l1, l2]);
                weights.push(2.0 * wu * wv);
            }
        }
        Self { bary, weights }
    }

    /// Edge-midpoint rule, exact for quadratics.
    pub fn edge_midpoints() -> Self {
        Self { bary: vec![[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]], weights: vec![1.0 / 3.0; 3] }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn point(&self, k: usize, p: &[Point; 3]) -> Point {
        let l = self.bary[k];
        [l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0], l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_integrates_monomials() {
        let r = gauss_legendre(6);
        for k in 0..12 {
            let s: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(k)).sum();
            assert_relative_eq!(s, 1.0 / (k as f64 + 1.0), max_relative = 1e-13);
        }
    }

    #[test]
    fn jacobi_integrates_weighted_monomials() {
        for &alpha in &[-0.71, -0.3333, 0.0, 0.5, 1.0] {
            let r = gauss_jacobi_left(8, alpha);
            assert!(r.nodes.iter().all(|&x| x > 0.0 && x < 1.0));
            for k in 0..16 {
                let s: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(k)).sum();
                assert_relative_eq!(s, 1.0 / (alpha + k as f64 + 1.0), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn conical_rule_degree() {
        let rule = TriangleRule::conical(4);
        let p = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        // int x^a y^b over the unit right triangle = a! b! / (a + b + 2)!
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        for a in 0..=7u32 {
            for b in 0..=(7 - a) {
                let s: f64 = (0..rule.len())
                    .map(|k| {
                        let x = rule.point(k, &p);
                        rule.weights[k] * 0.5 * x[0].powi(a as i32) * x[1].powi(b as i32)
                    })
                    .sum();
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                assert_relative_eq!(s, exact, max_relative = 1e-12);
            }
        }
        let w: f64 = TriangleRule::edge_midpoints().weights.iter().sum();
        assert_relative_eq!(w, 1.0);
    }
}
