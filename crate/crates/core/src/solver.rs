//! Naive and modified mixed formulations of the biharmonic problem.
//!
//! Both write `Delta^2 u = f` as two Poisson problems `-Delta w = f`,
//! `-Delta u = w` with the boundary conditions of the domain. The modified
//! method removes from `w` its component along the dual singular functions
//! `xi_m = chi s_m + zeta_m` before the second solve.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::fem::{
    assemble_load, assemble_mass, assemble_stiffness, dot, solve_mean_zero, solve_spd, DirichletReduction, FemError,
    LinearSolveOptions, SolveError, SolveStats, SparseSymmetric,
};
use crate::geometry::{GeometryError, PolygonDomain, VertexClass};
use crate::mesh::TriMesh;
use crate::singular::{CutoffSpec, HybridField, SingularBasis, SingularError, SingularIntegrals};
use crate::source::SourceTerm;

/// Relative tolerance for the compatibility of right-hand sides built from
/// singular quadrature.
const QUADRATURE_COMPATIBILITY: f64 = 1e-8;
/// Relative tolerance for the compatibility of the source term.
const SOURCE_COMPATIBILITY: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Singular(#[from] SingularError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error("linear solve failed in {step}: {source}")]
    Linear {
        step: &'static str,
        #[source]
        source: SolveError,
    },
    #[error(
        "source term is incompatible with pure Neumann conditions: its integral is {integral:e}, allowed {allowed:e}"
    )]
    IncompatibleSource { integral: f64, allowed: f64 },
    #[error("{what} violates the Neumann compatibility condition: sum {sum:e}, allowed {allowed:e} (singular quadrature failure)")]
    IncompatibleCorrection { what: &'static str, sum: f64, allowed: f64 },
    #[error("Gram matrix is numerically singular: determinant {determinant:e}, scale {scale:e}")]
    SingularGram { determinant: f64, scale: f64 },
    #[error("the Neumann variant needs Neumann conditions on the whole boundary")]
    NotPureNeumann,
    #[error("the Neumann variant needs exactly one singular function (found {0})")]
    NeumannBasis(usize),
    #[error("mesh has {got} nodes but the vector has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

impl SolverError {
    fn linear(step: &'static str) -> impl FnOnce(SolveError) -> SolverError {
        move |source| SolverError::Linear { step, source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolverOptions {
    pub linear: LinearSolveOptions,
    pub cutoff: CutoffSpec,
    /// Keep only the first singular function even when `d_perp = 2`.
    pub truncate_basis: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveSolveResult {
    pub w_h: Vec<f64>,
    pub u_h: Vec<f64>,
    pub stats: Vec<(&'static str, SolveStats)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    /// Number of singular functions actually used.
    pub d_perp: usize,
    pub singular_vertex: Option<usize>,
    pub vertex_class: Option<VertexClass>,
    /// `Xi_{mm'} = (xi_m, xi_m')`.
    pub gram: Vec<Vec<f64>>,
    /// `W_m = (w_h, xi_m)`.
    pub gram_rhs: Vec<f64>,
    pub determinant: f64,
    /// `|Xi c - W| / |W|`.
    pub gram_residual: f64,
    /// `max_m |(w_h - sum c xi, xi_m)| / (|w_h| |xi_m|)`.
    pub orthogonality_residual: f64,
    pub solves: Vec<(&'static str, SolveStats)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModifiedSolveResult {
    pub w_h: Vec<f64>,
    pub zeta_h: Vec<Vec<f64>>,
    /// `xi_m = zeta_m + chi s_m`, one unit coefficient per field.
    pub xi_h: Vec<HybridField>,
    pub coefficients: Vec<f64>,
    pub u_h: Vec<f64>,
    pub diagnostics: Diagnostics,
}

/// Assembled operators and the Poisson solve for one mesh.
struct Poisson<'a> {
    mesh: &'a TriMesh,
    stiffness: SparseSymmetric,
    mass: SparseSymmetric,
    dirichlet: Option<(DirichletReduction, SparseSymmetric)>,
    /// Every node is constrained, so the discrete space is `{0}`.
    trivial: bool,
    options: LinearSolveOptions,
}

impl<'a> Poisson<'a> {
    fn new(mesh: &'a TriMesh, options: &LinearSolveOptions) -> Result<Self, SolverError> {
        options.validate().map_err(SolverError::linear("setup"))?;
        let stiffness = assemble_stiffness(mesh)?;
        let mass = assemble_mass(mesh)?;
        let constrained = mesh.dirichlet_nodes();
        let trivial = constrained.iter().all(|&d| d);
        let dirichlet = if constrained.iter().any(|&d| d) && !trivial {
            let reduction = DirichletReduction::new(constrained).map_err(SolverError::linear("setup"))?;
            let matrix = reduction.reduce_matrix(&stiffness);
            Some((reduction, matrix))
        } else {
            None
        };
        Ok(Self { mesh, stiffness, mass, dirichlet, trivial, options: *options })
    }

    fn pure_neumann(&self) -> bool {
        self.dirichlet.is_none() && !self.trivial
    }

    /// Solves `A v = rhs` in `V_h` (zero on Dirichlet nodes) or, without
    /// Dirichlet nodes, in the mean-zero subspace.
    fn solve(&self, rhs: &[f64], step: &'static str) -> Result<(Vec<f64>, SolveStats), SolverError> {
        if self.trivial {
            return Ok((vec![0.0; rhs.len()], SolveStats { iterations: 0, relative_residual: 0.0 }));
        }
        match &self.dirichlet {
            Some((reduction, matrix)) => {
                let (x, stats) =
                    solve_spd(matrix, &reduction.restrict(rhs), &self.options).map_err(SolverError::linear(step))?;
                Ok((reduction.extend(&x), stats))
            }
            None => solve_mean_zero(&self.stiffness, &self.mass, rhs, &self.options).map_err(SolverError::linear(step)),
        }
    }

    fn num_nodes(&self) -> usize {
        self.mesh.num_nodes()
    }
}

/// `int f` as seen by the discrete load, i.e. `sum_i (f, phi_i)`.
pub fn check_compatibility(mesh: &TriMesh, f: &SourceTerm) -> f64 {
    assemble_load(mesh, f).iter().sum()
}

fn check_source(load: &[f64]) -> Result<(), SolverError> {
    let integral: f64 = load.iter().sum();
    let allowed = SOURCE_COMPATIBILITY * load.iter().map(|x| x.abs()).sum::<f64>();
    if integral.abs() > allowed {
        return Err(SolverError::IncompatibleSource { integral, allowed });
    }
    Ok(())
}

/// Projects `v` onto `1^T v = 0` after checking that it is already close.
fn project_compatible(v: &mut [f64], what: &'static str) -> Result<(), SolverError> {
    let sum: f64 = v.iter().sum();
    let allowed = QUADRATURE_COMPATIBILITY * v.iter().map(|x| x.abs()).sum::<f64>();
    if sum.abs() > allowed {
        return Err(SolverError::IncompatibleCorrection { what, sum, allowed });
    }
    let shift = sum / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= shift);
    Ok(())
}

fn naive_with(poisson: &Poisson, f: &SourceTerm) -> Result<NaiveSolveResult, SolverError> {
    let b = assemble_load(poisson.mesh, f);
    if poisson.pure_neumann() {
        check_source(&b)?;
    }
    let (w_h, s1) = poisson.solve(&b, "naive w")?;
    let (u_h, s2) = poisson.solve(&poisson.mass.mul(&w_h), "naive u")?;
    Ok(NaiveSolveResult { w_h, u_h, stats: vec![("naive w", s1), ("naive u", s2)] })
}

/// Two chained Poisson solves, `A w = (f, .)` and `A u = M w`. Without
/// Dirichlet conditions both solves are taken in the mean-zero space.
pub fn solve_naive(mesh: &TriMesh, f: &SourceTerm, options: &SolverOptions) -> Result<NaiveSolveResult, SolverError> {
    let poisson = Poisson::new(mesh, &options.linear)?;
    naive_with(&poisson, f)
}

/// The modified mixed method. Dispatches to [`solve_modified_neumann`] when
/// the whole boundary is Neumann; with no singular vertex it reduces to the
/// naive method.
pub fn solve_modified(
    mesh: &TriMesh,
    domain: &PolygonDomain,
    f: &SourceTerm,
    options: &SolverOptions,
) -> Result<ModifiedSolveResult, SolverError> {
    if domain.is_pure_neumann() {
        return solve_modified_neumann(mesh, domain, f, options);
    }
    let poisson = Poisson::new(mesh, &options.linear)?;
    modified_with(&poisson, domain, f, options)
}

/// Pure-Neumann variant: every solve is in the mean-zero space, `f` must
/// integrate to zero and the single singular function uses the cosine.
pub fn solve_modified_neumann(
    mesh: &TriMesh,
    domain: &PolygonDomain,
    f: &SourceTerm,
    options: &SolverOptions,
) -> Result<ModifiedSolveResult, SolverError> {
    if !domain.is_pure_neumann() {
        return Err(SolverError::NotPureNeumann);
    }
    let poisson = Poisson::new(mesh, &options.linear)?;
    if !poisson.pure_neumann() {
        return Err(SolverError::NotPureNeumann);
    }
    if let Some(spec) = domain.singular_spec()? {
        if spec.exponents.len() != 1 {
            return Err(SolverError::NeumannBasis(spec.exponents.len()));
        }
    }
    modified_with(&poisson, domain, f, options)
}

fn modified_with(
    poisson: &Poisson,
    domain: &PolygonDomain,
    f: &SourceTerm,
    options: &SolverOptions,
) -> Result<ModifiedSolveResult, SolverError> {
    let mesh = poisson.mesh;
    let n = poisson.num_nodes();
    let neumann = poisson.pure_neumann();
    let spec = domain.singular_spec()?;

    // Step 1.
    let b = assemble_load(mesh, f);
    if neumann {
        check_source(&b)?;
    }
    let (w_h, s1) = poisson.solve(&b, "step 1 (w)")?;
    let mut diagnostics = Diagnostics { solves: vec![("step 1 (w)", s1)], ..Default::default() };

    let Some(spec) = spec else {
        let (u_h, s4) = poisson.solve(&poisson.mass.mul(&w_h), "step 4 (u)")?;
        diagnostics.solves.push(("step 4 (u)", s4));
        return Ok(ModifiedSolveResult {
            w_h,
            zeta_h: Vec::new(),
            xi_h: Vec::new(),
            coefficients: Vec::new(),
            u_h,
            diagnostics,
        });
    };
    options.cutoff.validate_for(domain, spec.vertex_index)?;
    let mut bases = SingularBasis::from_spec(&spec, options.cutoff);
    if options.truncate_basis {
        bases.truncate(1);
    }
    let d = bases.len();
    diagnostics.d_perp = d;
    diagnostics.singular_vertex = Some(spec.vertex_index);
    diagnostics.vertex_class = Some(spec.class);
    let integrals = SingularIntegrals::compute(mesh, &bases)?;

    // Step 2: A zeta_m = (Delta(chi s_m), .).
    let zeta: Vec<(Vec<f64>, SolveStats)> = integrals
        .laplacian_loads
        .par_iter()
        .map(|g| {
            let mut g = g.clone();
            if neumann {
                project_compatible(&mut g, "singular load")?;
            }
            poisson.solve(&g, "step 2 (zeta)")
        })
        .collect::<Result<_, _>>()?;
    let (zeta_h, stats): (Vec<Vec<f64>>, Vec<SolveStats>) = zeta.into_iter().unzip();
    diagnostics.solves.extend(stats.into_iter().map(|s| ("step 2 (zeta)", s)));
    let xi_h: Vec<HybridField> = zeta_h
        .iter()
        .enumerate()
        .map(|(m, z)| {
            let mut coefficients = vec![0.0; d];
            coefficients[m] = 1.0;
            HybridField { nodal: z.clone(), coefficients }
        })
        .collect();

    // Step 3: Xi c = W.
    let mass = &poisson.mass;
    let w_field = HybridField::nodal_only(w_h.clone(), d);
    let gram = DMatrix::from_fn(d, d, |i, j| integrals.inner(mass, &xi_h[i], &xi_h[j]));
    let gram = (&gram + gram.transpose()) * 0.5;
    let rhs = DVector::from_fn(d, |m, _| integrals.inner(mass, &w_field, &xi_h[m]));
    let determinant = gram.determinant();
    let scale: f64 = (0..d).map(|i| gram[(i, i)]).product();
    if !(determinant > 1e-14 * scale) {
        return Err(SolverError::SingularGram { determinant, scale });
    }
    let c = gram.clone().cholesky().ok_or(SolverError::SingularGram { determinant, scale })?.solve(&rhs);
    let coefficients: Vec<f64> = c.iter().copied().collect();
    diagnostics.gram_residual = (&gram * &c - &rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE);
    diagnostics.gram = (0..d).map(|i| (0..d).map(|j| gram[(i, j)]).collect()).collect();
    diagnostics.gram_rhs = rhs.iter().copied().collect();
    diagnostics.determinant = determinant;

    // w_S = w - sum c xi, kept in hybrid form.
    let mut w_s = w_field.clone();
    for m in 0..d {
        for (x, z) in w_s.nodal.iter_mut().zip(&zeta_h[m]) {
            *x -= coefficients[m] * z;
        }
        w_s.coefficients[m] = -coefficients[m];
    }
    let w_norm = integrals.inner(mass, &w_field, &w_field).max(0.0).sqrt();
    diagnostics.orthogonality_residual = (0..d)
        .map(|m| {
            let xi_norm = gram[(m, m)].sqrt();
            integrals.inner(mass, &w_s, &xi_h[m]).abs() / (w_norm * xi_norm).max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max);

    // Step 4: A u = M (w - sum c zeta) - sum c (chi s_m, .).
    let mut rhs4 = mass.mul(&w_s.nodal);
    for (c, load) in coefficients.iter().zip(&integrals.mass_loads) {
        for (r, l) in rhs4.iter_mut().zip(load) {
            *r -= c * l;
        }
    }
    if neumann {
        project_compatible(&mut rhs4, "corrected right-hand side")?;
    }
    if rhs4.len() != n {
        return Err(SolverError::DimensionMismatch { expected: n, got: rhs4.len() });
    }
    let (u_h, s4) = poisson.solve(&rhs4, "step 4 (u)")?;
    diagnostics.solves.push(("step 4 (u)", s4));

    Ok(ModifiedSolveResult { w_h, zeta_h, xi_h, coefficients, u_h, diagnostics })
}

/// Runs the naive and the modified method on the same assembled operators.
pub fn solve_both(
    mesh: &TriMesh,
    domain: &PolygonDomain,
    f: &SourceTerm,
    options: &SolverOptions,
) -> Result<(NaiveSolveResult, ModifiedSolveResult), SolverError> {
    let poisson = Poisson::new(mesh, &options.linear)?;
    let naive = naive_with(&poisson, f)?;
    let modified = if domain.is_pure_neumann() {
        solve_modified_neumann(mesh, domain, f, options)?
    } else {
        modified_with(&poisson, domain, f, options)?
    };
    Ok((naive, modified))
}

/// Discrete `int xi_m = 1^T M zeta_m + sum_i (chi s_m, phi_i)`.
pub fn xi_integral(
    mesh: &TriMesh,
    result: &ModifiedSolveResult,
    cutoff: CutoffSpec,
    domain: &PolygonDomain,
    m: usize,
) -> Result<f64, SolverError> {
    let spec = match domain.singular_spec()? {
        Some(s) => s,
        None => return Ok(0.0),
    };
    let basis = SingularBasis::from_spec(&spec, cutoff)[m];
    let mass = assemble_mass(mesh)?;
    let l = crate::singular::singular_mass_load(mesh, &basis);
    Ok(dot(&mass.row_sums(), &result.zeta_h[m]) + l.iter().sum::<f64>())
}
