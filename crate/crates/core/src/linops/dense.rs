//! Dense and implicit operators used by the synthetic generators, the CCA
//! reduction, and tests.

use ndarray::{Array1, Array2, ArrayView1};

use super::{check_dim, ApplyCounter, LinearOperator};
use crate::error::{Error, Result};

/// Explicit dense symmetric matrix. Cost weight is d².
pub struct DenseSymmetricOperator {
    m: Array2<f64>,
    counter: ApplyCounter,
}

impl DenseSymmetricOperator {
    pub fn new(m: Array2<f64>) -> Result<Self> {
        let (r, c) = m.dim();
        if r != c {
            return Err(Error::DimensionMismatch { expected: r, found: c });
        }
        let scale = m.iter().fold(0.0f64, |a, &x| a.max(x.abs())).max(1e-300);
        for i in 0..r {
            for j in (i + 1)..r {
                if (m[[i, j]] - m[[j, i]]).abs() > 1e-10 * scale {
                    return Err(Error::InvalidConfig(format!(
                        "dense operator is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(DenseSymmetricOperator {
            m,
            counter: ApplyCounter::default(),
        })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.m
    }
}

impl LinearOperator for DenseSymmetricOperator {
    fn dim(&self) -> usize {
        self.m.nrows()
    }

    fn nnz(&self) -> usize {
        self.m.nrows() * self.m.ncols()
    }

    fn apply_count(&self) -> u64 {
        self.counter.get()
    }

    fn apply(&self, v: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_dim(self.m.ncols(), v.len())?;
        self.counter.bump();
        Ok(self.m.dot(&v))
    }
}

/// Diagonal operator; cost weight is d.
pub struct DiagonalOperator {
    diag: Array1<f64>,
    counter: ApplyCounter,
}

impl DiagonalOperator {
    pub fn new(diag: Array1<f64>) -> Self {
        DiagonalOperator {
            diag,
            counter: ApplyCounter::default(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        DiagonalOperator::new(Array1::ones(dim))
    }

    pub fn diag(&self) -> &Array1<f64> {
        &self.diag
    }
}

impl LinearOperator for DiagonalOperator {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn nnz(&self) -> usize {
        self.diag.len()
    }

    fn apply_count(&self) -> u64 {
        self.counter.get()
    }

    fn apply(&self, v: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_dim(self.diag.len(), v.len())?;
        self.counter.bump();
        Ok(&self.diag * &v)
    }
}

/// Implicit rank-one operator m mᵀ, applied as m (mᵀ v) without ever
/// materializing the outer product. Cost weight 2d (two length-d passes).
pub struct Rank1Operator {
    factor: Array1<f64>,
    counter: ApplyCounter,
}

impl Rank1Operator {
    pub fn new(factor: Array1<f64>) -> Self {
        Rank1Operator {
            factor,
            counter: ApplyCounter::default(),
        }
    }

    pub fn factor(&self) -> &Array1<f64> {
        &self.factor
    }
}

impl LinearOperator for Rank1Operator {
    fn dim(&self) -> usize {
        self.factor.len()
    }

    fn nnz(&self) -> usize {
        2 * self.factor.len()
    }

    fn apply_count(&self) -> u64 {
        self.counter.get()
    }

    fn apply(&self, v: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_dim(self.factor.len(), v.len())?;
        self.counter.bump();
        let c = self.factor.dot(&v);
        Ok(&self.factor * c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn dense_rejects_asymmetry() {
        let m = array![[1.0, 2.0], [2.5, 1.0]];
        assert!(DenseSymmetricOperator::new(m).is_err());
    }

    #[test]
    fn rank1_matches_outer_product() {
        let m = array![1.0, -2.0, 3.0];
        let op = Rank1Operator::new(m.clone());
        let v = array![0.5, 1.0, 2.0];
        let y = op.apply(v.view()).unwrap();
        let c = m.dot(&v);
        assert_eq!(y, &m * c);
        assert_eq!(op.nnz(), 6);
    }

    #[test]
    fn apply_is_linear_probe() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let m = Array2::from_shape_fn((5, 5), |(i, j)| ((i * 5 + j) as f64).sin());
        let sym = (&m + &m.t()) * 0.5;
        let op = DenseSymmetricOperator::new(sym).unwrap();
        for _ in 0..8 {
            let u = Array1::from_shape_fn(5, |_| rng.random::<f64>() - 0.5);
            let v = Array1::from_shape_fn(5, |_| rng.random::<f64>() - 0.5);
            let a: f64 = rng.random::<f64>() * 2.0 - 1.0;
            let lhs = op.apply((&u * a + &v).view()).unwrap();
            let rhs = op.apply(u.view()).unwrap() * a + op.apply(v.view()).unwrap();
            for i in 0..5 {
                assert!((lhs[i] - rhs[i]).abs() < 1e-12);
            }
        }
    }
}
