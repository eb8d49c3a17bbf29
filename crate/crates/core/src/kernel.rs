//! Truncated Christoffel–Darboux kernels and their tensor products.
//!
//! The one-dimensional kernel is `K_n(x, z) = sum_{k <= n} p_k(x) p_k(z)`,
//! always evaluated by direct summation. The `d`-variate kernel is the
//! product of `d` univariate kernels, one per coordinate.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rayon::prelude::*;

use crate::datasets::Dataset;
use crate::error::{OrcaError, Result};
use crate::orthopoly::{JacobiParams, OrthonormalBasis};

/// A tensor-product kernel `K_n^{(d)}` over `[-1, 1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    basis: OrthonormalBasis,
    d: usize,
}

impl KernelSpec {
    pub fn new(basis: OrthonormalBasis, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(OrcaError::InvalidConfig(
                "input dimension must be positive".into(),
            ));
        }
        Ok(Self { basis, d })
    }

    pub fn jacobi(params: JacobiParams, n: usize, d: usize) -> Result<Self> {
        Self::new(OrthonormalBasis::new(params, n)?, d)
    }

    pub fn basis(&self) -> &OrthonormalBasis {
        &self.basis
    }

    pub fn params(&self) -> JacobiParams {
        self.basis.params()
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `(n + 1)^d`, or `None` if it does not fit in `usize`.
    pub fn feature_dim(&self) -> Option<usize> {
        (self.basis.len()).checked_pow(self.d as u32)
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.d {
            return Err(OrcaError::DimensionMismatch {
                expected: self.d,
                actual: len,
            });
        }
        Ok(())
    }
}

/// `K_n(x, z)` by direct summation.
pub fn kernel_1d(basis: &OrthonormalBasis, x: f64, z: f64) -> Result<f64> {
    let px = basis.evaluate_all(x)?;
    let pz = basis.evaluate_all(z)?;
    Ok(dot(&px, &pz))
}

/// `K_n^{(d)}(x, z) = prod_j K_n(x_j, z_j)`.
pub fn kernel_nd(spec: &KernelSpec, x: &[f64], z: &[f64]) -> Result<f64> {
    spec.check_dim(x.len())?;
    spec.check_dim(z.len())?;
    let mut acc = 1.0;
    for (&xj, &zj) in x.iter().zip(z) {
        acc *= kernel_1d(&spec.basis, xj, zj)?;
    }
    Ok(acc)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cached `p_k(x_{i,j})` for every sample `i`, coordinate `j` and degree
/// `k`, laid out as `[i][j][k]`.
#[derive(Debug, Clone)]
pub struct UnivariateTable {
    m: usize,
    d: usize,
    width: usize,
    values: Vec<f64>,
}

impl UnivariateTable {
    pub fn new(spec: &KernelSpec, rows: &[Vec<f64>]) -> Result<Self> {
        let width = spec.basis.len();
        let d = spec.d;
        let mut values = vec![0.0; rows.len() * d * width];
        for (i, row) in rows.iter().enumerate() {
            spec.check_dim(row.len())?;
            for (j, &x) in row.iter().enumerate() {
                let x = OrthonormalBasis::check_domain(x)?;
                let start = (i * d + j) * width;
                spec.basis.fill(x, &mut values[start..start + width]);
            }
        }
        Ok(Self {
            m: rows.len(),
            d,
            width,
            values,
        })
    }

    pub fn samples(&self) -> usize {
        self.m
    }

    /// `[p_0(x_{i,j}), ..., p_n(x_{i,j})]`.
    pub fn features(&self, i: usize, j: usize) -> &[f64] {
        let start = (i * self.d + j) * self.width;
        &self.values[start..start + self.width]
    }

    /// Kernel value between cached samples `i` and `l`.
    pub fn kernel(&self, i: usize, l: usize) -> f64 {
        let mut acc = 1.0;
        for j in 0..self.d {
            acc *= dot(self.features(i, j), self.features(l, j));
        }
        acc
    }

    /// Kernel value between cached sample `i` and an external point whose
    /// per-coordinate features are given in `other` (`d` slices).
    pub fn kernel_with(&self, i: usize, other: &[Vec<f64>]) -> f64 {
        let mut acc = 1.0;
        for (j, phi) in other.iter().enumerate() {
            acc *= dot(self.features(i, j), phi);
        }
        acc
    }
}

/// Symmetric kernel matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    m: usize,
    entries: Vec<f64>,
    digest: u64,
}

impl GramMatrix {
    pub fn size(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.m + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.m..(i + 1) * self.m]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Identifies the kernel and the inputs the matrix was built from.
    pub fn digest(&self) -> u64 {
        self.digest
    }

    /// Smallest and largest eigenvalue.
    pub fn eigen_range(&self) -> (f64, f64) {
        let mat = nalgebra::DMatrix::from_row_slice(self.m, self.m, &self.entries);
        let eig = nalgebra::SymmetricEigen::new(mat);
        let min = eig
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let max = eig
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        (min, max)
    }

    /// Numerical PSD check: every eigenvalue at least `-1e-8 * lambda_max`.
    pub fn is_numerically_psd(&self) -> bool {
        let (min, max) = self.eigen_range();
        min >= -1e-8 * max.abs()
    }
}

pub(crate) fn digest_of(spec: &KernelSpec, rows: &[Vec<f64>]) -> u64 {
    let mut h = DefaultHasher::new();
    spec.params().alpha.to_bits().hash(&mut h);
    spec.params().beta.to_bits().hash(&mut h);
    spec.degree().hash(&mut h);
    spec.dim().hash(&mut h);
    rows.len().hash(&mut h);
    for row in rows {
        for x in row {
            x.to_bits().hash(&mut h);
        }
    }
    h.finish()
}

/// Gram matrix of the rescaled rows of `data`.
pub fn gram(spec: &KernelSpec, data: &Dataset) -> Result<GramMatrix> {
    gram_from_rows(spec, data.rescaled())
}

/// Gram matrix of points already in `[-1, 1]^d`.
pub fn gram_from_rows(spec: &KernelSpec, rows: &[Vec<f64>]) -> Result<GramMatrix> {
    let table = UnivariateTable::new(spec, rows)?;
    let m = rows.len();
    let upper: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| (i..m).map(|l| table.kernel(i, l)).collect())
        .collect();
    let mut entries = vec![0.0; m * m];
    for (i, row) in upper.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let l = i + off;
            entries[i * m + l] = v;
            entries[l * m + i] = v;
        }
    }
    Ok(GramMatrix {
        m,
        entries,
        digest: digest_of(spec, rows),
    })
}
