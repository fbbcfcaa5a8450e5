//! Dense symmetric matrices and their spectra.

mod eigen;

use crate::prelude::*;
use core::fmt;

use crate::error::{Error, Result};

pub(crate) use eigen::{lu_solve, singular_values};

/// Band matrices narrower than `n / BAND_RATIO` use the band reduction.
const BAND_RATIO: usize = 6;

/// A real symmetric matrix stored densely in row-major order.
///
/// Construction symmetrizes the input, so `entries[i][j] == entries[j][i]`
/// holds exactly for every value of this type.
#[derive(Clone, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl fmt::Debug for SymmetricMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut list = f.debug_list();
        for i in 0..self.dim {
            list.entry(&self.row(i));
        }
        list.finish()
    }
}

impl SymmetricMatrix {
    /// Builds a matrix from `dim * dim` row-major entries, replacing the
    /// input by its symmetric part `(A + A^T) / 2`.
    pub fn new(dim: usize, mut entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("matrix dimension must be positive".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: entries.len() });
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                let s = 0.5 * (entries[i * dim + j] + entries[j * dim + i]);
                entries[i * dim + j] = s;
                entries[j * dim + i] = s;
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: r.len() });
            }
            entries.extend_from_slice(r);
        }
        Self::new(dim, entries)
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                entries[i * dim + j] = f(i, j);
            }
        }
        Self::new(dim, entries)
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "matrix dimension must be positive");
        Self { dim, entries: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.entries[i * dim + i] = 1.0;
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        Self::from_fn(n, |i, j| if i == j { diag[i] } else { 0.0 })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.row(i).to_vec()).collect()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Largest absolute entry difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.dim != other.dim {
            return f64::INFINITY;
        }
        self.entries
            .iter()
            .zip(&other.entries)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(|x| s * x).collect() }
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &Self, s: f64) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a + s * b).collect();
        Ok(Self { dim: self.dim, entries })
    }

    /// `(1 - t) * a + t * b`.
    pub fn lerp(a: &Self, b: &Self, t: f64) -> Result<Self> {
        if a.dim != b.dim {
            return Err(Error::DimensionMismatch { expected: a.dim, found: b.dim });
        }
        let entries = a.entries.iter().zip(&b.entries).map(|(x, y)| (1.0 - t) * x + t * y).collect();
        Ok(Self { dim: a.dim, entries })
    }

    /// Cogredient transform `M^T A M` for a row-major square `m`.
    pub fn congruence(&self, m: &[f64]) -> Result<Self> {
        let n = self.dim;
        if m.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: m.len() });
        }
        let mut am = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let aik = self.entries[i * n + k];
                if aik != 0.0 {
                    for j in 0..n {
                        am[i * n + j] += aik * m[k * n + j];
                    }
                }
            }
        }
        let mut out = vec![0.0; n * n];
        for k in 0..n {
            for i in 0..n {
                let mki = m[k * n + i];
                if mki != 0.0 {
                    for j in 0..n {
                        out[i * n + j] += mki * am[k * n + j];
                    }
                }
            }
        }
        Self::new(n, out)
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Principal submatrix on the leading `k` indices.
    pub fn leading(&self, k: usize) -> Self {
        let mut m = Self::zeros(k);
        for i in 0..k {
            for j in 0..k {
                m.entries[i * k + j] = self.get(i, j);
            }
        }
        m
    }

    /// Block-diagonal extension `self ⊕ diag(extra)`.
    pub fn extended(&self, extra: &[f64]) -> Self {
        let n = self.dim + extra.len();
        let mut m = Self::zeros(n);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.entries[i * n + j] = self.get(i, j);
            }
        }
        for (k, &x) in extra.iter().enumerate() {
            let i = self.dim + k;
            m.entries[i * n + i] = x;
        }
        m
    }

    /// Largest `|i - j|` with a nonzero entry.
    pub fn half_bandwidth(&self) -> usize {
        let n = self.dim;
        let mut b = 0;
        for i in 0..n {
            for j in (i + b + 1)..n {
                if self.entries[i * n + j] != 0.0 {
                    b = j - i;
                }
            }
        }
        b
    }

    /// Ascending eigenvalues without eigenvectors.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let n = self.dim;
        let mut work = self.entries.clone();
        let b = self.half_bandwidth();
        let (mut d, mut e) = if b * BAND_RATIO < n {
            eigen::band_to_tridiagonal(n, &mut work, b.max(1))
        } else {
            eigen::tridiagonalize(n, &mut work, false)
        };
        eigen::tridiagonal_ql(&mut d, &mut e, None)?;
        Ok(d)
    }

    /// Smallest eigenvalue modulus; the invertibility margin.
    pub fn margin(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.iter().fold(f64::INFINITY, |acc, x| acc.min(x.abs())))
    }
}

/// Eigendecomposition of a [`SymmetricMatrix`].
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    dim: usize,
    eigenvalues: Vec<f64>,
    /// column `k` of the row-major eigenvector matrix, stored contiguously
    vectors: Vec<f64>,
    residual: f64,
}

impl Spectrum {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvector(&self, k: usize) -> &[f64] {
        &self.vectors[k * self.dim..(k + 1) * self.dim]
    }

    /// Largest `||A v_k - lambda_k v_k||` over all pairs.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Eigenvectors (flattened, each of length `dim`) whose eigenvalue satisfies `keep`.
    pub fn subspace(&self, keep: impl Fn(f64) -> bool) -> Vec<f64> {
        let mut out = Vec::new();
        for (k, &l) in self.eigenvalues.iter().enumerate() {
            if keep(l) {
                out.extend_from_slice(self.eigenvector(k));
            }
        }
        out
    }

    /// Rebuilds `Q diag(lambda) Q^T`.
    pub fn reconstruct(&self) -> SymmetricMatrix {
        let n = self.dim;
        let mut m = vec![0.0; n * n];
        for (k, &l) in self.eigenvalues.iter().enumerate() {
            let v = self.eigenvector(k);
            for i in 0..n {
                for j in 0..n {
                    m[i * n + j] += l * v[i] * v[j];
                }
            }
        }
        SymmetricMatrix { dim: n, entries: m }
    }
}

/// Full eigendecomposition with a residual certificate.
///
/// Eigenvalues are ascending. Each eigenvector is normalized and signed so
/// that its first component of largest magnitude is positive. Fails with
/// [`Error::NoConvergence`] when the QL iteration stalls or the achieved
/// residual exceeds `tol * ||A||`.
pub fn eigendecompose(a: &SymmetricMatrix, tol: f64) -> Result<Spectrum> {
    if !(tol > 0.0) {
        return Err(Error::Invalid("eigensolver tolerance must be positive".into()));
    }
    let n = a.dim;
    let mut v = a.entries.clone();
    let (mut d, mut e) = eigen::tridiagonalize(n, &mut v, true);
    eigen::tridiagonal_ql(&mut d, &mut e, Some(&mut v))?;

    let mut vectors = vec![0.0; n * n];
    for k in 0..n {
        let col = &mut vectors[k * n..(k + 1) * n];
        for i in 0..n {
            col[i] = v[i * n + k];
        }
        let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        let big = col.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        // ties within rounding go to the earliest index
        let lead = col.iter().position(|x| x.abs() >= big * (1.0 - 1e-10)).unwrap_or(0);
        let sign = if col[lead] < 0.0 { -1.0 } else { 1.0 };
        for x in col.iter_mut() {
            *x *= sign / norm;
        }
    }

    let mut residual = 0.0f64;
    for k in 0..n {
        let vk = &vectors[k * n..(k + 1) * n];
        let av = a.mul_vec(vk);
        let r = av.iter().zip(vk).map(|(x, y)| (x - d[k] * y).powi(2)).sum::<f64>().sqrt();
        residual = residual.max(r);
    }
    if residual > tol * a.norm() {
        return Err(Error::NoConvergence { residual });
    }
    Ok(Spectrum { dim: n, eigenvalues: d, vectors, residual })
}
