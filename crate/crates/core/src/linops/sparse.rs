//! Compressed sparse row storage and the symmetric operator built on it.

use ndarray::{Array1, Array2, ArrayView1};

use super::{check_dim, ApplyCounter, LinearOperator};
use crate::error::{Error, Result};

/// General rectangular CSR matrix. Raw storage shared by the symmetric
/// operator and the sparse data-matrix path; does no application counting
/// itself.
///
/// Invariants: `row_ptr` has `nrows + 1` nondecreasing entries ending at
/// `values.len()`, and column indices are strictly increasing within each
/// row (duplicates are summed at construction).
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(i, j, v) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::InvalidConfig(format!(
                    "triplet index ({i}, {j}) outside {nrows}x{ncols}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidConfig(format!("non-finite value at ({i}, {j})")));
            }
            entries.push((i, j, v));
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            col_idx.push(j);
            values.push(v);
            row_ptr[i + 1] += 1;
            last = Some((i, j));
        }
        for r in 1..=nrows {
            row_ptr[r] += row_ptr[r - 1];
        }
        Ok(CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// y = M x. Raw kernel; panics on shape misuse (callers check).
    pub fn apply(&self, x: ArrayView1<f64>) -> Array1<f64> {
        assert_eq!(x.len(), self.ncols, "csr apply: wrong input length");
        let mut y = Array1::zeros(self.nrows);
        for i in 0..self.nrows {
            let mut acc = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[p] * x[self.col_idx[p]];
            }
            y[i] = acc;
        }
        y
    }

    /// y = Mᵀ x. Raw kernel; panics on shape misuse.
    pub fn apply_transpose(&self, x: ArrayView1<f64>) -> Array1<f64> {
        assert_eq!(x.len(), self.nrows, "csr apply_transpose: wrong input length");
        let mut y = Array1::zeros(self.ncols);
        for i in 0..self.nrows {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[p]] += self.values[p] * xi;
            }
        }
        y
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.nrows, self.ncols));
        for i in 0..self.nrows {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[[i, self.col_idx[p]]] = self.values[p];
            }
        }
        m
    }

    fn get(&self, i: usize, j: usize) -> Option<f64> {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        match self.col_idx[lo..hi].binary_search(&j) {
            Ok(p) => Some(self.values[lo + p]),
            Err(_) => None,
        }
    }
}

/// Symmetric sparse matrix in CSR form with both triangles stored.
///
/// Construction validates bit-exact structural symmetry: every stored
/// (i, j, v) must have (j, i) present with an identical value.
#[derive(Debug)]
pub struct SparseSymmetricMatrix {
    csr: CsrMatrix,
    counter: ApplyCounter,
}

impl SparseSymmetricMatrix {
    /// Builds from triplets that already contain both triangles.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let csr = CsrMatrix::from_triplets(dim, dim, triplets)?;
        for i in 0..dim {
            for p in csr.row_ptr[i]..csr.row_ptr[i + 1] {
                let j = csr.col_idx[p];
                let v = csr.values[p];
                match csr.get(j, i) {
                    Some(w) if w.to_bits() == v.to_bits() => {}
                    _ => {
                        return Err(Error::InvalidConfig(format!(
                            "asymmetric sparse data: entry ({i}, {j}) has no bit-identical mirror"
                        )))
                    }
                }
            }
        }
        Ok(SparseSymmetricMatrix {
            csr,
            counter: ApplyCounter::default(),
        })
    }

    /// Converts a dense symmetric matrix, dropping exact zeros.
    pub fn from_dense(m: &Array2<f64>) -> Result<Self> {
        let (r, c) = m.dim();
        if r != c {
            return Err(Error::DimensionMismatch { expected: r, found: c });
        }
        let scale = m.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        for i in 0..r {
            for j in (i + 1)..r {
                if (m[[i, j]] - m[[j, i]]).abs() > 1e-10 * scale.max(1e-300) {
                    return Err(Error::InvalidConfig(format!(
                        "dense matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let mut trip = Vec::new();
        for i in 0..r {
            trip.push((i, i, m[[i, i]]));
            for j in (i + 1)..r {
                // Store one representative in both triangles so the mirror
                // is bit-identical even when the input had rounding skew.
                let v = m[[i, j]];
                if v != 0.0 {
                    trip.push((i, j, v));
                    trip.push((j, i, v));
                }
            }
        }
        let trip: Vec<_> = trip.into_iter().filter(|&(_, _, v)| v != 0.0).collect();
        Self::from_triplets(r, &trip)
    }

    pub fn identity(dim: usize) -> Self {
        let trip: Vec<_> = (0..dim).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(dim, &trip).expect("identity triplets are symmetric")
    }

    pub fn csr(&self) -> &CsrMatrix {
        &self.csr
    }
}

impl LinearOperator for SparseSymmetricMatrix {
    fn dim(&self) -> usize {
        self.csr.nrows
    }

    fn nnz(&self) -> usize {
        self.csr.nnz()
    }

    fn apply_count(&self) -> u64 {
        self.counter.get()
    }

    fn apply(&self, v: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_dim(self.csr.ncols, v.len())?;
        self.counter.bump();
        Ok(self.csr.apply(v))
    }
}
