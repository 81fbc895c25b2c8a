use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{MatMut, Side};

use super::sparse::SparseSym;
use crate::error::{Error, Result};

/// Sparse Cholesky factor with a fill-reducing ordering.
pub struct SparseCholesky {
    n: usize,
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl std::fmt::Debug for SparseCholesky {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseCholesky").field("n", &self.n).finish_non_exhaustive()
    }
}

impl SparseCholesky {
    pub fn factor(a: &SparseSym) -> Result<Self> {
        let n = a.n();
        let triplets: Vec<Triplet<usize, usize, f64>> =
            (0..n).flat_map(|i| a.row_lower(i).map(move |(j, v)| Triplet::new(i, j, v))).collect();
        let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| Error::InvalidArgument(format!("sparse pattern: {e:?}")))?;
        let llt = m
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::NotPositiveDefinite(format!("sparse Cholesky: {e:?}")))?;
        Ok(Self { n, llt })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch(format!("rhs has {} entries, factor is {}", b.len(), self.n)));
        }
        let mut x = b.to_vec();
        self.llt.solve_in_place(MatMut::from_column_major_slice_mut(&mut x, self.n, 1));
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite("sparse Cholesky produced non-finite values".into()));
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sparse::TripletBuilder;

    #[test]
    fn solves_laplacian_and_rejects_indefinite() {
        let n = 30;
        let mut t = TripletBuilder::new(n);
        for i in 0..n {
            t.add(i, i, 2.0);
            if i > 0 {
                t.add(i, i - 1, -1.0);
            }
        }
        let a = t.build();
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).cos()).collect();
        let b = a.matvec(&x_true);
        let x = SparseCholesky::factor(&a).unwrap().solve(&b).unwrap();
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-12);
        }
        let mut t = TripletBuilder::new(2);
        t.add(0, 0, 1.0);
        t.add(1, 0, 2.0);
        t.add(1, 1, 1.0);
        assert!(SparseCholesky::factor(&t.build()).is_err());
    }
}
