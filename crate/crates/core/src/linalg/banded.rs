use nalgebra::DMatrix;

use super::sparse::SparseSym;
use crate::error::{Error, Result};

/// Cholesky factor of a banded SPD matrix, `A = L L^T`.
///
/// Used for the many small Dirichlet problems on coarse regions, whose
/// lexicographic numbering keeps the bandwidth at about two grid rows.
#[derive(Clone, Debug)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    /// row-major band: entry (i, j), i - bw <= j <= i, at `i * (bw + 1) + (j + bw - i)`
    band: Vec<f64>,
}

impl BandedCholesky {
    pub fn factor(a: &SparseSym) -> Result<Self> {
        let n = a.n();
        let bw = a.bandwidth();
        let w = bw + 1;
        let mut band = vec![0.0; n * w];
        for i in 0..n {
            for (j, v) in a.row_lower(i) {
                band[i * w + (j + bw - i)] = v;
            }
        }
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = band[i * w + (j + bw - i)];
                for k in k0..j {
                    s -= band[i * w + (k + bw - i)] * band[j * w + (k + bw - j)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::NotPositiveDefinite(format!("banded Cholesky pivot {s:e} at row {i}")));
                    }
                    band[i * w + bw] = s.sqrt();
                } else {
                    band[i * w + (j + bw - i)] = s / band[j * w + bw];
                }
            }
        }
        Ok(Self { n, bw, band })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        for i in 0..n {
            let mut s = x[i];
            let lo = i.saturating_sub(bw);
            for (k, xk) in x.iter().enumerate().take(i).skip(lo) {
                s -= self.band[i * w + (k + bw - i)] * xk;
            }
            x[i] = s / self.band[i * w + bw];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for (k, xk) in x.iter().enumerate().take((i + bw + 1).min(n)).skip(i + 1) {
                s -= self.band[k * w + (i + bw - k)] * xk;
            }
            x[i] = s / self.band[i * w + bw];
        }
    }

    /// Solves for every column of `rhs` in place.
    pub fn solve_columns(&self, rhs: &mut DMatrix<f64>) {
        assert_eq!(rhs.nrows(), self.n);
        for mut col in rhs.column_iter_mut() {
            self.solve_in_place(col.as_mut_slice());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sparse::TripletBuilder;

    #[test]
    fn solves_tridiagonal_and_wider_bands() {
        for (n, bw) in [(1, 0), (10, 1), (25, 4), (40, 39)] {
            let mut t = TripletBuilder::new(n);
            for i in 0..n {
                t.add(i, i, 2.0 * bw as f64 + 3.0);
                for d in 1..=bw.min(i) {
                    t.add(i, i - d, -1.0 / d as f64);
                }
            }
            let a = t.build();
            let f = BandedCholesky::factor(&a).unwrap();
            let x_true: Vec<f64> = (0..n).map(|k| (k as f64 * 0.7).sin()).collect();
            let mut b = a.matvec(&x_true);
            f.solve_in_place(&mut b);
            for (x, y) in b.iter().zip(&x_true) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_indefinite() {
        let mut t = TripletBuilder::new(2);
        t.add(0, 0, 1.0);
        t.add(1, 0, 2.0);
        t.add(1, 1, 1.0);
        assert!(BandedCholesky::factor(&t.build()).is_err());
    }
}
