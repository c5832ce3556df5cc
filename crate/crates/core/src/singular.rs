//! Cut-off function, corner singular functions and the integrals that
//! involve them.
//!
//! Every integral with an analytic factor is computed per triangle. Triangles
//! near the singular vertex or crossing one of the cut-off circles are
//! integrated in polar coordinates about the vertex, with the angular range
//! split at triangle vertices and circle crossings and the radial range split
//! at the circles. On triangles that have the vertex as a corner the inner
//! radial piece uses a Gauss-Jacobi rule that absorbs the `r^{-gamma}`
//! singularity exactly. All other triangles use a degree-9 product rule.

use rayon::prelude::*;
use thiserror::Error;

use crate::fem::{assemble_local_vectors, dot, SparseSymmetric};
use crate::geometry::{point_segment_distance, LocalFrame, Point, PolygonDomain, SingularExponent, SingularSpec};
use crate::mesh::{triangle_area, TriMesh};
use crate::quadrature::{gauss_jacobi_left, gauss_legendre, Rule1d, TriangleRule};

/// Gauss points per direction in each polar piece.
const POLAR_POINTS: usize = 12;
/// Gauss points per direction for pair integrals.
const PAIR_POINTS: usize = 16;
/// Triangles closer to the vertex than this many diameters go polar.
const NEAR_FACTOR: f64 = 3.0;
/// Relative agreement required between two polar orders for pair integrals.
const PAIR_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SingularError {
    #[error("invalid cut-off parameters tau = {tau}, R = {radius} (need 0 < tau < 1, R > 0)")]
    InvalidCutoff { tau: f64, radius: f64 },
    #[error(
        "cut-off radius {radius} exceeds {limit:.6}, the largest disc around the vertex that stays inside the domain"
    )]
    CutoffTooLarge { radius: f64, limit: f64 },
    #[error("singular function evaluated at the singular vertex")]
    EvaluationAtVertex,
    #[error("singular exponents sum to {0}, integrand not integrable")]
    NotIntegrable(f64),
    #[error("singular quadrature did not reach the target accuracy (estimated relative error {estimate:e})")]
    QuadratureInaccurate { estimate: f64 },
}

/// Radial cut-off: 1 on `[0, tau R]`, 0 beyond `R`, a quintic in between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffSpec {
    pub tau: f64,
    pub radius: f64,
}

impl Default for CutoffSpec {
    fn default() -> Self {
        Self { tau: 0.125, radius: 1.8 }
    }
}

impl CutoffSpec {
    pub fn new(tau: f64, radius: f64) -> Result<Self, SingularError> {
        let spec = Self { tau, radius };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SingularError> {
        if !(self.tau > 0.0 && self.tau < 1.0 && self.radius > 0.0 && self.radius.is_finite()) {
            return Err(SingularError::InvalidCutoff { tau: self.tau, radius: self.radius });
        }
        Ok(())
    }

    pub fn inner_radius(&self) -> f64 {
        self.tau * self.radius
    }

    /// Checks that the disc of radius `R` about vertex `j`, cut to the
    /// interior cone, lies inside the domain.
    pub fn validate_for(&self, domain: &PolygonDomain, j: usize) -> Result<(), SingularError> {
        self.validate()?;
        let limit = max_cutoff_radius(domain, j);
        if self.radius > limit * (1.0 + 1e-12) {
            return Err(SingularError::CutoffTooLarge { radius: self.radius, limit });
        }
        Ok(())
    }
}

/// Largest admissible cut-off radius at vertex `j`: the two adjacent edges
/// must be at least `R` long and every other edge at least `R` away.
pub fn max_cutoff_radius(domain: &PolygonDomain, j: usize) -> f64 {
    let n = domain.num_vertices();
    let q = domain.vertices()[j];
    let incoming = (j + n - 1) % n;
    let mut limit = domain.edge_length(j).min(domain.edge_length(incoming));
    for (k, e) in domain.edges().iter().enumerate() {
        if k != j && k != incoming {
            let d = point_segment_distance(q, domain.vertices()[e.start], domain.vertices()[e.end]);
            limit = limit.min(d);
        }
    }
    limit
}

#[inline]
fn cutoff_t(r: f64, spec: &CutoffSpec) -> f64 {
    let (tau, big_r) = (spec.tau, spec.radius);
    2.0 * r / (big_r * (1.0 - tau)) - (1.0 + tau) / (1.0 - tau)
}

pub fn chi(r: f64, spec: &CutoffSpec) -> f64 {
    if r <= spec.inner_radius() {
        1.0
    } else if r >= spec.radius {
        0.0
    } else {
        let t = cutoff_t(r, spec);
        let t2 = t * t;
        ((-3.0 / 16.0 * t2 + 5.0 / 8.0) * t2 - 15.0 / 16.0) * t + 0.5
    }
}

/// `(chi, chi', chi'')` with derivatives in `r`.
pub fn chi_derivs(r: f64, spec: &CutoffSpec) -> (f64, f64, f64) {
    if r <= spec.inner_radius() {
        return (1.0, 0.0, 0.0);
    }
    if r >= spec.radius {
        return (0.0, 0.0, 0.0);
    }
    let t = cutoff_t(r, spec);
    let dt = 2.0 / (spec.radius * (1.0 - spec.tau));
    let t2 = t * t;
    let value = ((-3.0 / 16.0 * t2 + 5.0 / 8.0) * t2 - 15.0 / 16.0) * t + 0.5;
    let d1 = -15.0 / 16.0 * (t2 - 1.0) * (t2 - 1.0);
    let d2 = 15.0 / 4.0 * t * (1.0 - t2);
    (value, d1 * dt, d2 * dt * dt)
}

/// One singular function `s = r^{-beta} trig(beta theta)` in the frame of its
/// vertex, together with the cut-off that localises it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularBasis {
    pub exponent: SingularExponent,
    pub frame: LocalFrame,
    pub cutoff: CutoffSpec,
}

impl SingularBasis {
    pub fn new(exponent: SingularExponent, frame: LocalFrame, cutoff: CutoffSpec) -> Self {
        Self { exponent, frame, cutoff }
    }

    /// All basis functions attached to a singular vertex.
    pub fn from_spec(spec: &SingularSpec, cutoff: CutoffSpec) -> Vec<SingularBasis> {
        spec.exponents.iter().map(|&e| SingularBasis::new(e, spec.frame, cutoff)).collect()
    }

    pub fn beta(&self) -> f64 {
        self.exponent.beta
    }

    #[inline]
    fn angular(&self, theta: f64) -> f64 {
        self.exponent.trig.eval(self.exponent.beta * theta)
    }

    /// `s(p)`; undefined at the vertex itself.
    pub fn eval_s(&self, p: Point) -> Result<f64, SingularError> {
        let (r, theta) = self.frame.polar(p);
        if r == 0.0 {
            return Err(SingularError::EvaluationAtVertex);
        }
        Ok(r.powf(-self.exponent.beta) * self.angular(theta))
    }

    /// `chi(r) s(p)`.
    pub fn eval_chi_s(&self, p: Point) -> Result<f64, SingularError> {
        let (r, theta) = self.frame.polar(p);
        if r == 0.0 {
            return Err(SingularError::EvaluationAtVertex);
        }
        Ok(chi(r, &self.cutoff) * r.powf(-self.exponent.beta) * self.angular(theta))
    }

    /// `Delta(chi s) = [chi'' + (1 - 2 beta) chi' / r] r^{-beta} Phi(theta)`,
    /// using that `s` is harmonic. Vanishes off the annulus `tau R < r < R`.
    pub fn laplacian_chi_s(&self, p: Point) -> f64 {
        let (r, theta) = self.frame.polar(p);
        let (_, d1, d2) = chi_derivs(r, &self.cutoff);
        if d1 == 0.0 && d2 == 0.0 {
            return 0.0;
        }
        let beta = self.exponent.beta;
        (d2 + (1.0 - 2.0 * beta) * d1 / r) * r.powf(-beta) * self.angular(theta)
    }

    /// `chi s`, infinite at the vertex.
    #[inline]
    fn chi_s(&self, p: Point) -> f64 {
        let (r, theta) = self.frame.polar(p);
        chi(r, &self.cutoff) * r.powf(-self.exponent.beta) * self.angular(theta)
    }
}

/// A discrete function stored as a P1 nodal part plus analytic singular
/// parts: `nodal + sum_m coefficients[m] chi s_m`, with `m` indexing the bases
/// of the [`SingularIntegrals`] it is used with. The analytic part is never
/// sampled at nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridField {
    pub nodal: Vec<f64>,
    pub coefficients: Vec<f64>,
}

impl HybridField {
    pub fn nodal_only(nodal: Vec<f64>, num_bases: usize) -> Self {
        Self { nodal, coefficients: vec![0.0; num_bases] }
    }
}

/// Polar rules reused across triangles.
struct PolarRules {
    legendre: Rule1d,
    /// Rule for `int_0^1 x^{1 - gamma} g(x) dx`.
    jacobi: Rule1d,
    gamma: f64,
}

impl PolarRules {
    fn new(n: usize, gamma: f64) -> Self {
        Self { legendre: gauss_legendre(n), jacobi: gauss_jacobi_left(n, 1.0 - gamma), gamma }
    }
}

/// How the integrand behaves inside the inner circle `r < tau R`.
#[derive(Clone, Copy, PartialEq)]
enum Inner {
    /// Behaves like `r^{-gamma}` times a smooth function.
    Singular,
    /// Identically zero.
    Zero,
}

#[inline]
fn sub(a: Point, b: Point) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Barycentric coordinates with respect to a triangle.
struct Barycentric {
    origin: Point,
    inv: [[f64; 2]; 2],
}

impl Barycentric {
    fn new(p: &[Point; 3]) -> Self {
        let e1 = sub(p[1], p[0]);
        let e2 = sub(p[2], p[0]);
        let det = cross(e1, e2);
        Self { origin: p[0], inv: [[e2[1] / det, -e2[0] / det], [-e1[1] / det, e1[0] / det]] }
    }

    #[inline]
    fn eval(&self, x: Point) -> [f64; 3] {
        let d = sub(x, self.origin);
        let l1 = self.inv[0][0] * d[0] + self.inv[0][1] * d[1];
        let l2 = self.inv[1][0] * d[0] + self.inv[1][1] * d[1];
        [1.0 - l1 - l2, l1, l2]
    }
}

/// Integrates `f` and `f lambda_k` over one triangle in polar coordinates
/// about `q`, returning `[int f l0, int f l1, int f l2, int f]`. `q` must be
/// a vertex of the triangle or lie outside it. `f` is zero for `r >= R`.
fn polar_triangle<F>(p: &[Point; 3], q: Point, cutoff: &CutoffSpec, inner: Inner, rules: &PolarRules, f: &F) -> [f64; 4]
where
    F: Fn(Point) -> f64,
{
    let scale = (0..3).map(|k| sub(p[k], q)).map(|d| d[0].hypot(d[1])).fold(0.0, f64::max);
    let q_vertex = (0..3).find(|&k| {
        let d = sub(p[k], q);
        d[0].hypot(d[1]) <= 1e-12 * scale
    });
    let centroid = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
    let c = sub(centroid, q);
    let cl = c[0].hypot(c[1]);
    let e0 = [c[0] / cl, c[1] / cl];
    let e1 = [-e0[1], e0[0]];
    let angle_of = |x: Point| {
        let d = sub(x, q);
        (d[0] * e1[0] + d[1] * e1[1]).atan2(d[0] * e0[0] + d[1] * e0[1])
    };
    let dir = |psi: f64| {
        let (s, c) = psi.sin_cos();
        [c * e0[0] + s * e1[0], c * e0[1] + s * e1[1]]
    };

    let radii = [cutoff.inner_radius(), cutoff.radius];
    let mut breaks: Vec<f64> = Vec::with_capacity(12);
    for k in 0..3 {
        if Some(k) != q_vertex {
            breaks.push(angle_of(p[k]));
        }
        // Circle crossings of edge k -> k+1.
        let a = p[k];
        let b = p[(k + 1) % 3];
        let ab = sub(b, a);
        let aq = sub(a, q);
        let qa = ab[0] * ab[0] + ab[1] * ab[1];
        let qb = 2.0 * (aq[0] * ab[0] + aq[1] * ab[1]);
        for &rho in &radii {
            let qc = aq[0] * aq[0] + aq[1] * aq[1] - rho * rho;
            let disc = qb * qb - 4.0 * qa * qc;
            if disc <= 0.0 {
                continue;
            }
            let sq = disc.sqrt();
            for t in [(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)] {
                if t > 0.0 && t < 1.0 {
                    breaks.push(angle_of([a[0] + t * ab[0], a[1] + t * ab[1]]));
                }
            }
        }
    }
    breaks.sort_by(f64::total_cmp);

    // Edge k as the line n . x = c.
    let lines: Vec<([f64; 2], f64)> = (0..3)
        .map(|k| {
            let a = p[k];
            let b = p[(k + 1) % 3];
            let n = [b[1] - a[1], a[0] - b[0]];
            (n, n[0] * a[0] + n[1] * a[1])
        })
        .collect();
    let ray_hit = |line: usize, d: [f64; 2]| {
        let (n, c) = lines[line];
        (c - n[0] * q[0] - n[1] * q[1]) / (n[0] * d[0] + n[1] * d[1])
    };

    let bary = Barycentric::new(p);
    let mut out = [0.0; 4];
    let mut add = |x: Point, w: f64| {
        let v = w * f(x);
        if v != 0.0 {
            let l = bary.eval(x);
            out[0] += v * l[0];
            out[1] += v * l[1];
            out[2] += v * l[2];
            out[3] += v;
        }
    };

    let span = breaks.last().unwrap() - breaks.first().unwrap();
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a <= 1e-13 * span.max(1e-300) {
            continue;
        }
        // Identify the entry and exit edges at the middle of the sector.
        let dm = dir(0.5 * (a + b));
        let (near, far) = match q_vertex {
            Some(k) => (None, (k + 1) % 3),
            None => {
                let mut hits: Vec<(f64, usize)> = Vec::with_capacity(3);
                for line in 0..3 {
                    let r = ray_hit(line, dm);
                    let x = [q[0] + r * dm[0], q[1] + r * dm[1]];
                    let s = lines[line].0;
                    let a = p[line];
                    let b = p[(line + 1) % 3];
                    // Parameter along the edge, via projection.
                    let ab = sub(b, a);
                    let t = ((x[0] - a[0]) * ab[0] + (x[1] - a[1]) * ab[1]) / (ab[0] * ab[0] + ab[1] * ab[1]);
                    if r.is_finite() && r > 0.0 && (-1e-9..=1.0 + 1e-9).contains(&t) && (s[0] != 0.0 || s[1] != 0.0) {
                        hits.push((r, line));
                    }
                }
                if hits.len() < 2 {
                    continue;
                }
                hits.sort_by(|x, y| x.0.total_cmp(&y.0));
                (Some(hits[0].1), hits[hits.len() - 1].1)
            }
        };
        let half = 0.5 * (b - a);
        for (tn, tw) in rules.legendre.nodes.iter().zip(&rules.legendre.weights) {
            let psi = a + (b - a) * tn;
            let wpsi = 2.0 * half * tw;
            let d = dir(psi);
            let r_in = near.map_or(0.0, |l| ray_hit(l, d));
            let r_out = ray_hit(far, d);
            // Shell [0, tau R].
            let hi = r_out.min(radii[0]);
            if inner == Inner::Singular && hi > r_in {
                if q_vertex.is_some() {
                    let alpha = 1.0 - rules.gamma;
                    let scale = hi.powf(alpha + 1.0);
                    for (x, wx) in rules.jacobi.nodes.iter().zip(&rules.jacobi.weights) {
                        let r = hi * x;
                        add([q[0] + r * d[0], q[1] + r * d[1]], wpsi * scale * wx * r.powf(rules.gamma));
                    }
                } else {
                    let len = hi - r_in;
                    for (x, wx) in rules.legendre.nodes.iter().zip(&rules.legendre.weights) {
                        let r = r_in + len * x;
                        add([q[0] + r * d[0], q[1] + r * d[1]], wpsi * len * wx * r);
                    }
                }
            }
            // Shell [tau R, R].
            let lo = r_in.max(radii[0]);
            let hi = r_out.min(radii[1]);
            if hi > lo {
                let len = hi - lo;
                for (x, wx) in rules.legendre.nodes.iter().zip(&rules.legendre.weights) {
                    let r = lo + len * x;
                    add([q[0] + r * d[0], q[1] + r * d[1]], wpsi * len * wx * r);
                }
            }
        }
    }
    out
}

/// Distance range `[min, max]` from `q` to a triangle, with `min = 0` when
/// `q` is one of its vertices.
fn distance_range(p: &[Point; 3], q: Point) -> (f64, f64) {
    let mut dmax: f64 = 0.0;
    let mut dmin = f64::INFINITY;
    for k in 0..3 {
        let d = sub(p[k], q);
        dmax = dmax.max(d[0].hypot(d[1]));
        dmin = dmin.min(point_segment_distance(q, p[k], p[(k + 1) % 3]));
    }
    (dmin, dmax)
}

fn diameter(p: &[Point; 3]) -> f64 {
    (0..3).map(|k| sub(p[k], p[(k + 1) % 3])).map(|d| d[0].hypot(d[1])).fold(0.0, f64::max)
}

/// Per-triangle integration of `f` (and `f lambda_k`) over the part of the
/// triangle inside the cut-off disc.
struct CornerIntegrator {
    q: Point,
    cutoff: CutoffSpec,
    inner: Inner,
    rules: PolarRules,
    smooth: TriangleRule,
}

impl CornerIntegrator {
    fn new(q: Point, cutoff: CutoffSpec, inner: Inner, gamma: f64, points: usize) -> Self {
        Self { q, cutoff, inner, rules: PolarRules::new(points, gamma), smooth: TriangleRule::conical(5) }
    }

    fn triangle<F: Fn(Point) -> f64>(&self, p: &[Point; 3], f: &F) -> [f64; 4] {
        let (dmin, dmax) = distance_range(p, self.q);
        let inner_r = self.cutoff.inner_radius();
        if dmin >= self.cutoff.radius || (self.inner == Inner::Zero && dmax <= inner_r) {
            return [0.0; 4];
        }
        let straddles = |rho: f64| dmin < rho && rho < dmax;
        let near = dmin < NEAR_FACTOR * diameter(p);
        if near || straddles(inner_r) || straddles(self.cutoff.radius) {
            return polar_triangle(p, self.q, &self.cutoff, self.inner, &self.rules, f);
        }
        let area = triangle_area(*p);
        let mut out = [0.0; 4];
        for k in 0..self.smooth.len() {
            let x = self.smooth.point(k, p);
            let v = self.smooth.weights[k] * area * f(x);
            let l = self.smooth.bary[k];
            out[0] += v * l[0];
            out[1] += v * l[1];
            out[2] += v * l[2];
            out[3] += v;
        }
        out
    }

    fn load<F: Fn(Point) -> f64 + Sync>(&self, mesh: &TriMesh, f: F) -> Vec<f64> {
        assemble_local_vectors(mesh, |_, p| {
            let r = self.triangle(p, &f);
            [r[0], r[1], r[2]]
        })
    }

    fn total<F: Fn(Point) -> f64 + Sync>(&self, mesh: &TriMesh, f: F) -> f64 {
        let parts: Vec<f64> =
            (0..mesh.num_triangles()).into_par_iter().map(|t| self.triangle(&mesh.triangle_points(t), &f)[3]).collect();
        parts.iter().sum()
    }
}

/// `G_i = int Delta(chi s) phi_i`.
pub fn load_singular(mesh: &TriMesh, basis: &SingularBasis) -> Vec<f64> {
    let integrator = CornerIntegrator::new(basis.frame.origin, basis.cutoff, Inner::Zero, 0.0, POLAR_POINTS);
    integrator.load(mesh, |x| basis.laplacian_chi_s(x))
}

/// `L_i = int chi s phi_i`.
pub fn singular_mass_load(mesh: &TriMesh, basis: &SingularBasis) -> Vec<f64> {
    let gamma = basis.beta();
    let integrator = CornerIntegrator::new(basis.frame.origin, basis.cutoff, Inner::Singular, gamma, POLAR_POINTS);
    integrator.load(mesh, |x| basis.chi_s(x))
}

/// `int v chi s` for a P1 nodal field `v`.
pub fn inner_singular(mesh: &TriMesh, nodal: &[f64], basis: &SingularBasis) -> f64 {
    dot(nodal, &singular_mass_load(mesh, basis))
}

fn pair_integral(mesh: &TriMesh, a: &SingularBasis, b: &SingularBasis, points: usize, absolute: bool) -> f64 {
    let gamma = a.beta() + b.beta();
    let integrator = CornerIntegrator::new(a.frame.origin, a.cutoff, Inner::Singular, gamma, points);
    if absolute {
        integrator.total(mesh, |x| (a.chi_s(x) * b.chi_s(x)).abs())
    } else {
        integrator.total(mesh, |x| a.chi_s(x) * b.chi_s(x))
    }
}

/// `int (chi s_a)(chi s_b)`. Both bases must share their vertex and cut-off.
/// The result is checked against a lower-order evaluation, relative to
/// `int |chi s_a chi s_b|` since cross terms may vanish.
pub fn inner_singular_pair(mesh: &TriMesh, a: &SingularBasis, b: &SingularBasis) -> Result<f64, SingularError> {
    let gamma = a.beta() + b.beta();
    if gamma >= 2.0 {
        return Err(SingularError::NotIntegrable(gamma));
    }
    let (a, b) = if a.beta() <= b.beta() { (a, b) } else { (b, a) };
    let fine = pair_integral(mesh, a, b, PAIR_POINTS, false);
    let coarse = pair_integral(mesh, a, b, POLAR_POINTS, false);
    let scale = pair_integral(mesh, a, b, POLAR_POINTS, true);
    let estimate = (fine - coarse).abs() / scale.max(f64::MIN_POSITIVE);
    if estimate > PAIR_TOLERANCE {
        return Err(SingularError::QuadratureInaccurate { estimate });
    }
    Ok(fine)
}

/// All singular integrals needed on one mesh: `G_m`, `L_m` and the pair
/// products `P_{mm'}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularIntegrals {
    pub bases: Vec<SingularBasis>,
    /// `(Delta(chi s_m), phi_i)`.
    pub laplacian_loads: Vec<Vec<f64>>,
    /// `(chi s_m, phi_i)`.
    pub mass_loads: Vec<Vec<f64>>,
    /// `(chi s_m, chi s_m')`.
    pub pairs: Vec<Vec<f64>>,
}

impl SingularIntegrals {
    pub fn compute(mesh: &TriMesh, bases: &[SingularBasis]) -> Result<Self, SingularError> {
        let laplacian_loads = bases.iter().map(|b| load_singular(mesh, b)).collect();
        let mass_loads = bases.iter().map(|b| singular_mass_load(mesh, b)).collect();
        let d = bases.len();
        let mut pairs = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in i..d {
                let v = inner_singular_pair(mesh, &bases[i], &bases[j])?;
                pairs[i][j] = v;
                pairs[j][i] = v;
            }
        }
        Ok(Self { bases: bases.to_vec(), laplacian_loads, mass_loads, pairs })
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    /// `(v, chi s_m)` for a nodal field.
    pub fn inner_nodal(&self, nodal: &[f64], m: usize) -> f64 {
        dot(nodal, &self.mass_loads[m])
    }

    /// `L^2` inner product of two hybrid fields.
    pub fn inner(&self, mass: &SparseSymmetric, a: &HybridField, b: &HybridField) -> f64 {
        let mut s = mass.bilinear(&a.nodal, &b.nodal);
        for m in 0..self.len() {
            s += b.coefficients[m] * self.inner_nodal(&a.nodal, m);
            s += a.coefficients[m] * self.inner_nodal(&b.nodal, m);
            for k in 0..self.len() {
                s += a.coefficients[m] * b.coefficients[k] * self.pairs[m][k];
            }
        }
        s
    }

    /// `int` of a hybrid field over the domain.
    pub fn integral(&self, mass: &SparseSymmetric, a: &HybridField) -> f64 {
        let mut s = dot(&mass.row_sums(), &a.nodal);
        for m in 0..self.len() {
            s += a.coefficients[m] * self.mass_loads[m].iter().sum::<f64>();
        }
        s
    }
}
