//! Preconditioned conjugate gradients, zero-fill incomplete Cholesky and
//! homogeneous Dirichlet elimination.

use thiserror::Error;

use super::sparse::{dot, norm2, SparseSymmetric};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("conjugate gradients stopped after {iterations} iterations at relative residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("right-hand side is incompatible with the constant kernel: sum {sum:e} (allowed {allowed:e})")]
    Incompatible { sum: f64, allowed: f64 },
    #[error("every node is constrained; no unknowns left")]
    AllConstrained,
    #[error("vector has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("incomplete factorization broke down at row {0}")]
    FactorizationBreakdown(usize),
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    IncompleteCholesky,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSolveOptions {
    /// Relative residual target `|b - Ax| / |b|`.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub preconditioner: Preconditioner,
}

impl Default for LinearSolveOptions {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_iterations: 20000, preconditioner: Preconditioner::IncompleteCholesky }
    }
}

impl LinearSolveOptions {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.tolerance > 0.0) {
            return Err(SolveError::InvalidOptions(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(SolveError::InvalidOptions("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Zero-fill incomplete Cholesky factor `L` (lower triangle, row storage).
#[derive(Debug, Clone)]
pub struct IncompleteCholesky {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl IncompleteCholesky {
    /// Factors `a`; on breakdown the diagonal is shifted (Manteuffel) and
    /// the factorization retried.
    pub fn new(a: &SparseSymmetric) -> Result<Self, SolveError> {
        let mut shift = 0.0;
        for _ in 0..12 {
            match Self::try_factor(a, shift) {
                Ok(f) => return Ok(f),
                Err(_) => shift = if shift == 0.0 { 1e-3 } else { shift * 4.0 },
            }
        }
        Self::try_factor(a, shift)
    }

    fn try_factor(a: &SparseSymmetric, shift: f64) -> Result<Self, SolveError> {
        let n = a.dim();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    col_idx.push(j);
                    values.push(if j == i { v * (1.0 + shift) } else { v });
                }
            }
            row_ptr.push(col_idx.len());
        }
        for i in 0..n {
            let (ri0, ri1) = (row_ptr[i], row_ptr[i + 1]);
            for p in ri0..ri1 {
                let k = col_idx[p];
                // Sparse dot of rows i and k over columns < k.
                let (rk0, rk1) = (row_ptr[k], row_ptr[k + 1]);
                let mut s = values[p];
                let (mut pi, mut pk) = (ri0, rk0);
                while pi < p && pk < rk1 - 1 {
                    let (ci, ck) = (col_idx[pi], col_idx[pk]);
                    if ci == ck {
                        s -= values[pi] * values[pk];
                        pi += 1;
                        pk += 1;
                    } else if ci < ck {
                        pi += 1;
                    } else {
                        pk += 1;
                    }
                }
                if k == i {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(SolveError::FactorizationBreakdown(i));
                    }
                    values[p] = s.sqrt();
                } else {
                    values[p] = s / values[rk1 - 1];
                }
            }
        }
        Ok(Self { row_ptr, col_idx, values })
    }

    /// Solves `L L^T z = r`.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = r.len();
        z.copy_from_slice(r);
        for i in 0..n {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut acc = z[i];
            for p in s..e - 1 {
                acc -= self.values[p] * z[self.col_idx[p]];
            }
            z[i] = acc / self.values[e - 1];
        }
        for i in (0..n).rev() {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            z[i] /= self.values[e - 1];
            let zi = z[i];
            for p in s..e - 1 {
                z[self.col_idx[p]] -= self.values[p] * zi;
            }
        }
    }
}

enum Precond {
    Identity,
    Ic(IncompleteCholesky),
}

impl Precond {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Precond::Identity => z.copy_from_slice(r),
            Precond::Ic(f) => f.apply(r, z),
        }
    }
}

/// Preconditioned CG. `project` is applied to residuals and preconditioned
/// residuals; it lets the same loop run on a semidefinite system.
fn pcg(
    a: &SparseSymmetric,
    b: &[f64],
    precond: &Precond,
    options: &LinearSolveOptions,
    project: &dyn Fn(&mut [f64]),
) -> Result<(Vec<f64>, SolveStats), SolveError> {
    let n = a.dim();
    let mut x = vec![0.0; n];
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok((x, SolveStats::default()));
    }
    let mut r = b.to_vec();
    project(&mut r);
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    project(&mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = norm2(&r) / bnorm;
    let mut it = 0;
    while res > options.tolerance {
        if it >= options.max_iterations {
            return Err(SolveError::NotConverged { iterations: it, residual: res });
        }
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(SolveError::NotConverged { iterations: it, residual: res });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        project(&mut r);
        precond.apply(&r, &mut z);
        project(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        it += 1;
        res = norm2(&r) / bnorm;
    }
    // Report the true residual rather than the recursively updated one.
    a.matvec(&x, &mut ap);
    let mut true_r: Vec<f64> = b.iter().zip(&ap).map(|(bi, ai)| bi - ai).collect();
    project(&mut true_r);
    Ok((x, SolveStats { iterations: it, relative_residual: norm2(&true_r) / bnorm }))
}

fn build_precond(a: &SparseSymmetric, options: &LinearSolveOptions) -> Result<Precond, SolveError> {
    Ok(match options.preconditioner {
        Preconditioner::None => Precond::Identity,
        Preconditioner::IncompleteCholesky => Precond::Ic(IncompleteCholesky::new(a)?),
    })
}

/// Solves an SPD system.
pub fn solve_spd(
    a: &SparseSymmetric,
    b: &[f64],
    options: &LinearSolveOptions,
) -> Result<(Vec<f64>, SolveStats), SolveError> {
    options.validate()?;
    if b.len() != a.dim() {
        return Err(SolveError::DimensionMismatch { expected: a.dim(), got: b.len() });
    }
    let precond = build_precond(a, options)?;
    pcg(a, b, &precond, options, &|_| {})
}

/// Solves `A v = b` for a stiffness matrix whose kernel is the constants,
/// returning the solution with zero mean `1^T M v = 0`.
///
/// `b` must satisfy `|1^T b| <= 1e-10 |b|_1`. Residuals are kept orthogonal
/// to the constants and preconditioned residuals are shifted to zero mean,
/// which leaves the CG recurrences unchanged on the range of `A`.
pub fn solve_mean_zero(
    a: &SparseSymmetric,
    mass: &SparseSymmetric,
    b: &[f64],
    options: &LinearSolveOptions,
) -> Result<(Vec<f64>, SolveStats), SolveError> {
    options.validate()?;
    let n = a.dim();
    if b.len() != n {
        return Err(SolveError::DimensionMismatch { expected: n, got: b.len() });
    }
    let sum: f64 = b.iter().sum();
    let allowed = 1e-10 * b.iter().map(|x| x.abs()).sum::<f64>();
    if sum.abs() > allowed {
        return Err(SolveError::Incompatible { sum, allowed });
    }
    // Mean functional v -> 1^T M v.
    let m1 = mass.row_sums();
    let total: f64 = m1.iter().sum();
    let precond = match options.preconditioner {
        Preconditioner::None => Precond::Identity,
        Preconditioner::IncompleteCholesky => {
            // Regularize the singular operator for the factorization only.
            let shifted = a.add_scaled(0.1 / total, mass);
            Precond::Ic(IncompleteCholesky::new(&shifted)?)
        }
    };
    let nf = n as f64;
    let project = |v: &mut [f64]| {
        let s: f64 = v.iter().sum::<f64>() / nf;
        v.iter_mut().for_each(|x| *x -= s);
    };
    let mean_free = |v: &mut [f64]| {
        let s = dot(&m1, v) / total;
        v.iter_mut().for_each(|x| *x -= s);
    };
    let mut b = b.to_vec();
    project(&mut b);
    // Shifting z by a constant changes neither A p nor r^T z since 1^T r = 0.
    let (mut x, stats) = pcg(a, &b, &precond, options, &project)?;
    mean_free(&mut x);
    Ok((x, stats))
}

/// Elimination of homogeneous Dirichlet nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletReduction {
    free: Vec<usize>,
    map: Vec<Option<usize>>,
}

impl DirichletReduction {
    pub fn new(constrained: &[bool]) -> Result<Self, SolveError> {
        let free: Vec<usize> = (0..constrained.len()).filter(|&i| !constrained[i]).collect();
        if free.is_empty() {
            return Err(SolveError::AllConstrained);
        }
        let mut map = vec![None; constrained.len()];
        for (k, &i) in free.iter().enumerate() {
            map[i] = Some(k);
        }
        Ok(Self { free, map })
    }

    pub fn num_free(&self) -> usize {
        self.free.len()
    }

    pub fn free_nodes(&self) -> &[usize] {
        &self.free
    }

    pub fn reduce_matrix(&self, a: &SparseSymmetric) -> SparseSymmetric {
        a.submatrix(&self.free, &self.map)
    }

    pub fn restrict(&self, v: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&i| v[i]).collect()
    }

    /// Full-length vector with zeros on constrained nodes.
    pub fn extend(&self, reduced: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.map.len()];
        for (k, &i) in self.free.iter().enumerate() {
            out[i] = reduced[k];
        }
        out
    }
}

/// Reduced system after eliminating constrained rows and columns.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub matrix: SparseSymmetric,
    pub rhs: Vec<f64>,
    pub reduction: DirichletReduction,
}

pub fn apply_dirichlet(a: &SparseSymmetric, rhs: &[f64], constrained: &[bool]) -> Result<ReducedSystem, SolveError> {
    if rhs.len() != a.dim() || constrained.len() != a.dim() {
        return Err(SolveError::DimensionMismatch { expected: a.dim(), got: rhs.len().min(constrained.len()) });
    }
    let reduction = DirichletReduction::new(constrained)?;
    Ok(ReducedSystem { matrix: reduction.reduce_matrix(a), rhs: reduction.restrict(rhs), reduction })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, seed: u64) -> (SparseSymmetric, DMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = DMatrix::<f64>::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let dense = &b * b.transpose() + DMatrix::<f64>::identity(n, n) * (n as f64);
        let mut trip = Vec::new();
        for i in 0..n {
            for j in 0..n {
                trip.push((i, j, dense[(i, j)]));
            }
        }
        (SparseSymmetric::from_triplets(n, &trip), dense)
    }

    #[test]
    fn one_by_one() {
        let a = SparseSymmetric::identity(1);
        let (x, _) = solve_spd(&a, &[3.0], &LinearSolveOptions::default()).unwrap();
        assert!((x[0] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn random_spd_matches_dense_factorization() {
        for precond in [Preconditioner::None, Preconditioner::IncompleteCholesky] {
            let (a, dense) = random_spd(10, 7);
            let b: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
            let opts = LinearSolveOptions { preconditioner: precond, tolerance: 1e-13, ..Default::default() };
            let (x, stats) = solve_spd(&a, &b, &opts).unwrap();
            let exact = dense.cholesky().unwrap().solve(&nalgebra::DVector::from_vec(b.clone()));
            for i in 0..10 {
                assert!((x[i] - exact[i]).abs() < 1e-9, "{precond:?}");
            }
            assert!(stats.relative_residual <= 1e-12);
        }
    }

    #[test]
    fn ic0_is_exact_for_tridiagonal() {
        // No fill for a tridiagonal matrix, so IC(0) is the Cholesky factor.
        let n = 20;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, 2.0));
            if i + 1 < n {
                trip.push((i, i + 1, -1.0));
                trip.push((i + 1, i, -1.0));
            }
        }
        let a = SparseSymmetric::from_triplets(n, &trip);
        let f = IncompleteCholesky::new(&a).unwrap();
        let b: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let mut z = vec![0.0; n];
        f.apply(&b, &mut z);
        let back = a.mul(&z);
        for i in 0..n {
            assert!((back[i] - b[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn not_converged_reports_residual() {
        let (a, _) = random_spd(30, 3);
        let b = vec![1.0; 30];
        let opts = LinearSolveOptions { max_iterations: 1, preconditioner: Preconditioner::None, ..Default::default() };
        match solve_spd(&a, &b, &opts) {
            Err(SolveError::NotConverged { iterations, residual }) => {
                assert_eq!(iterations, 1);
                assert!(residual > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_options() {
        let a = SparseSymmetric::identity(2);
        let opts = LinearSolveOptions { tolerance: 0.0, ..Default::default() };
        assert!(matches!(solve_spd(&a, &[1.0, 1.0], &opts), Err(SolveError::InvalidOptions(_))));
    }

    #[test]
    fn dirichlet_reduction_bookkeeping() {
        let (a, _) = random_spd(4, 1);
        let sys = apply_dirichlet(&a, &[1.0, 2.0, 3.0, 4.0], &[false; 4]).unwrap();
        assert_eq!(sys.matrix, a);
        let sys = apply_dirichlet(&a, &[1.0, 2.0, 3.0, 4.0], &[true, false, true, false]).unwrap();
        assert_eq!(sys.rhs, vec![2.0, 4.0]);
        assert_eq!(sys.matrix.get(0, 1), a.get(1, 3));
        assert_eq!(sys.reduction.extend(&[5.0, 6.0]), vec![0.0, 5.0, 0.0, 6.0]);
        assert!(matches!(apply_dirichlet(&a, &[0.0; 4], &[true; 4]), Err(SolveError::AllConstrained)));
    }
}
