//! Compressed sparse row storage for symmetric matrices.

use crate::mesh::TriMesh;

/// Symmetric matrix stored in full CSR form (both triangles) with sorted
/// column indices in every row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetric {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymmetric {
    /// Zero matrix with the node-adjacency pattern of `mesh`.
    pub fn with_mesh_pattern(mesh: &TriMesh) -> Self {
        let n = mesh.num_nodes();
        let mut adj: Vec<Vec<usize>> = vec![Vec::with_capacity(7); n];
        for (i, row) in adj.iter_mut().enumerate() {
            row.push(i);
        }
        for t in mesh.triangles() {
            for a in 0..3 {
                for b in 0..3 {
                    if a != b {
                        adj[t[a]].push(t[b]);
                    }
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut row in adj {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(&row);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        Self { n, row_ptr, col_idx, values: vec![0.0; nnz] }
    }

    /// Builds from `(row, col, value)` triplets, summing duplicates. The
    /// caller supplies both `(i, j)` and `(j, i)` for off-diagonal entries.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut t = triplets.to_vec();
        t.sort_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in t {
            assert!(i < n && j < n, "triplet index out of range");
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { n, row_ptr, col_idx, values }
    }

    pub fn identity(n: usize) -> Self {
        Self { n, row_ptr: (0..=n).collect(), col_idx: (0..n).collect(), values: vec![1.0; n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    #[inline]
    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_ptr[i];
        self.col_idx[start..self.row_ptr[i + 1]].binary_search(&j).ok().map(|k| start + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Adds `v` to an entry already in the pattern.
    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        let k = self.position(i, j).expect("entry outside sparsity pattern");
        self.values[k] += v;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &a)| a * x[j]).sum();
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| {
                let (cols, vals) = self.row(i);
                x[i] * cols.iter().zip(vals).map(|(&j, &a)| a * y[j]).sum::<f64>()
            })
            .sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).1.iter().sum()).collect()
    }

    pub fn total_sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `self + alpha * other`, assuming `other`'s pattern is contained in `self`'s.
    pub fn add_scaled(&self, alpha: f64, other: &SparseSymmetric) -> SparseSymmetric {
        assert_eq!(self.n, other.n);
        let mut out = self.clone();
        for i in 0..other.n {
            let (cols, vals) = other.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out.add_to(i, j, alpha * v);
            }
        }
        out
    }

    /// Principal submatrix on `keep`, with `map[old] = Some(new)`.
    pub fn submatrix(&self, keep: &[usize], map: &[Option<usize>]) -> SparseSymmetric {
        let mut row_ptr = Vec::with_capacity(keep.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for &i in keep {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if let Some(jj) = map[j] {
                    col_idx.push(jj);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        SparseSymmetric { n: keep.len(), row_ptr, col_idx, values }
    }

    /// `P^T A P` for a permutation with `perm[new] = old`.
    pub fn permuted(&self, perm: &[usize]) -> SparseSymmetric {
        let mut inv = vec![0; self.n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                triplets.push((inv[i], inv[j], v));
            }
        }
        SparseSymmetric::from_triplets(self.n, &triplets)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m[(i, j)] += v;
            }
        }
        m
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).all(|(&j, &v)| (v - self.get(j, i)).abs() <= tol * v.abs().max(1.0))
        })
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
