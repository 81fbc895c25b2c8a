use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Accumulates entries of a symmetric matrix; only the lower triangle is kept.
#[derive(Clone, Debug, Default)]
pub struct TripletBuilder {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        Self { n, entries: Vec::new() }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        Self { n, entries: Vec::with_capacity(cap) }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Adds `v` to `A[i][j]` for `i >= j`; upper-triangle entries are ignored so a
    /// full symmetric element matrix can be scattered directly.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if i >= j && v != 0.0 {
            self.entries.push((i, j, v));
        }
    }

    /// Adds the symmetric pair `A[i][j] += v`, `A[j][i] += v` (so `2v` on the diagonal).
    #[inline]
    pub fn add_pair(&mut self, i: usize, j: usize, v: f64) {
        if v == 0.0 {
            return;
        }
        if i == j {
            self.entries.push((i, i, 2.0 * v));
        } else {
            self.entries.push((i.max(j), i.min(j), v));
        }
    }

    /// Scatters a dense symmetric local matrix through a local-to-global map.
    pub fn add_dense(&mut self, map: &[usize], local: &DMatrix<f64>) {
        for (a, &ga) in map.iter().enumerate() {
            for (b, &gb) in map.iter().enumerate() {
                if ga >= gb {
                    self.add(ga, gb, local[(a, b)]);
                }
            }
        }
    }

    pub fn build(mut self) -> SparseSym {
        self.entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in &self.entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut m = SparseSym { n: self.n, row_ptr, col_idx, values };
        m.prune();
        m
    }
}

/// Symmetric sparse matrix stored as CSR of its lower triangle (diagonal included).
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSym {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSym {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz_lower(&self) -> usize {
        self.values.len()
    }

    /// Drops explicit zeros produced by cancellation.
    fn prune(&mut self) {
        if self.values.iter().all(|&v| v != 0.0) {
            return;
        }
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut col_idx = Vec::with_capacity(self.col_idx.len());
        let mut values = Vec::with_capacity(self.values.len());
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.values[k] != 0.0 {
                    col_idx.push(self.col_idx[k]);
                    values.push(self.values[k]);
                }
            }
            row_ptr[i + 1] = col_idx.len();
        }
        self.row_ptr = row_ptr;
        self.col_idx = col_idx;
        self.values = values;
    }

    /// Lower-triangle entries of row `i` as `(column, value)`.
    pub fn row_lower(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = (i.max(j), i.min(j));
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let xi = x[i];
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                let a = self.values[k];
                acc += a * x[j];
                if j != i {
                    y[j] += a * xi;
                }
            }
            y[i] += acc;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    /// `x^T A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.matvec(y))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row_lower(i) {
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    /// Replaces masked rows and columns by the identity (homogeneous Dirichlet elimination).
    pub fn with_dirichlet(&self, mask: &[bool]) -> SparseSym {
        assert_eq!(mask.len(), self.n);
        let mut t = TripletBuilder::with_capacity(self.n, self.values.len());
        for i in 0..self.n {
            if mask[i] {
                t.add(i, i, 1.0);
                continue;
            }
            for (j, v) in self.row_lower(i) {
                if !mask[j] {
                    t.add(i, j, v);
                }
            }
        }
        t.build()
    }

    /// Principal submatrix on `dofs` (in the given order).
    pub fn submatrix(&self, dofs: &[usize]) -> Result<SparseSym> {
        let mut pos = vec![usize::MAX; self.n];
        for (k, &d) in dofs.iter().enumerate() {
            if d >= self.n {
                return Err(Error::OutOfRange { index: d, len: self.n });
            }
            if pos[d] != usize::MAX {
                return Err(Error::InvalidArgument(format!("duplicate dof {d} in submatrix")));
            }
            pos[d] = k;
        }
        let mut t = TripletBuilder::new(dofs.len());
        for (k, &d) in dofs.iter().enumerate() {
            for (j, v) in self.row_lower(d) {
                if pos[j] != usize::MAX {
                    t.add_pair(k, pos[j], if j == d { 0.5 * v } else { v });
                }
            }
        }
        Ok(t.build())
    }

    /// Largest lower bandwidth `max(i - j)` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n).filter_map(|i| self.row_lower(i).next().map(|(j, _)| i - j)).max().unwrap_or(0)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Outcome of a preconditioned conjugate-gradient solve.
#[derive(Clone, Debug)]
pub struct PcgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `||b - A x|| / ||b||` for the returned iterate.
    pub rel_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients with a relative residual stop.
///
/// The returned iterate always satisfies `||A x - b|| <= tol ||b||` measured on the
/// true residual; a non-positive curvature `p^T A p <= 0` is reported as
/// [`Error::NotPositiveDefinite`].
pub fn pcg(a: &SparseSym, b: &[f64], tol: f64, maxit: usize) -> Result<PcgOutcome> {
    let n = a.n();
    if b.len() != n {
        return Err(Error::DimensionMismatch(format!("rhs has {} entries, matrix is {n}x{n}", b.len())));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidArgument(format!("tolerance must lie in (0,1), got {tol}")));
    }
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(PcgOutcome { x, iterations: 0, rel_residual: 0.0 });
    }
    let inv_diag: Vec<f64> = a
        .diag()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let target = tol * bnorm;
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut it = 0;
    while it < maxit {
        a.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotPositiveDefinite(format!(
                "non-positive curvature {pap:e} at CG iteration {it}"
            )));
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        it += 1;
        if norm2(&r) <= target {
            // confirm on the true residual; restart from it if recurrence drifted
            a.matvec_into(&x, &mut ap);
            for k in 0..n {
                r[k] = b[k] - ap[k];
            }
            let true_res = norm2(&r);
            if true_res <= target {
                return Ok(PcgOutcome { x, iterations: it, rel_residual: true_res / bnorm });
            }
            for k in 0..n {
                z[k] = r[k] * inv_diag[k];
            }
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }
        for k in 0..n {
            z[k] = r[k] * inv_diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    a.matvec_into(&x, &mut ap);
    let res = b.iter().zip(&ap).map(|(b, ax)| (b - ax) * (b - ax)).sum::<f64>().sqrt();
    Err(Error::NotConverged { iterations: it, residual: res / bnorm })
}

/// Solves `A x = b` for symmetric positive definite `A` by Jacobi-preconditioned CG.
pub fn solve_spd(a: &SparseSym, b: &[f64], tol: f64, maxit: usize) -> Result<Vec<f64>> {
    pcg(a, b, tol, maxit).map(|o| o.x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn from_dense(m: &DMatrix<f64>) -> SparseSym {
        let mut t = TripletBuilder::new(m.nrows());
        for i in 0..m.nrows() {
            for j in 0..=i {
                t.add(i, j, m[(i, j)]);
            }
        }
        t.build()
    }

    /// Dense Cholesky used as an independent oracle.
    fn cholesky_solve(a: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
        let n = a.nrows();
        let mut l = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = a[(i, j)] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
                l[i][j] = if i == j { s.sqrt() } else { s / l[j][j] };
            }
        }
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[i] = (b[i] - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            x[i] = (y[i] - (i + 1..n).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
        }
        x
    }

    #[test]
    fn identity_one_iteration() {
        let a = from_dense(&DMatrix::identity(7, 7));
        let b: Vec<f64> = (0..7).map(|k| k as f64 - 2.5).collect();
        let out = pcg(&a, &b, 1e-12, 10).unwrap();
        assert!(out.iterations <= 1);
        assert_eq!(out.x, b);
    }

    #[test]
    fn diagonal_system() {
        let a = from_dense(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 4.0])));
        let x = solve_spd(&a, &[1.0, 4.0], 1e-12, 10).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_spd_matches_cholesky() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 50;
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let a = &g * g.transpose() + DMatrix::identity(n, n) * 0.5;
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let oracle = cholesky_solve(&a, &b);
        let out = pcg(&from_dense(&a), &b, 1e-13, 10_000).unwrap();
        for (x, y) in out.x.iter().zip(&oracle) {
            assert!((x - y).abs() <= 1e-8, "{x} vs {y}");
        }
        let r = a.clone() * nalgebra::DVector::from_vec(out.x.clone()) - nalgebra::DVector::from_vec(b.clone());
        assert!(r.norm() <= 1e-13 * norm2(&b));
    }

    #[test]
    fn reports_non_convergence_and_indefiniteness() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 30;
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let a = from_dense(&(&g * g.transpose() + DMatrix::identity(n, n) * 1e-3));
        let b = vec![1.0; n];
        match pcg(&a, &b, 1e-12, 2) {
            Err(Error::NotConverged { iterations, residual }) => {
                assert_eq!(iterations, 2);
                assert!(residual > 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
        let neg = from_dense(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0])));
        assert!(matches!(pcg(&neg, &[1.0, 1.0], 1e-10, 10), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn builder_sums_duplicates_and_drops_zeros() {
        let mut t = TripletBuilder::new(3);
        t.add(1, 0, 2.0);
        t.add(1, 0, -2.0);
        t.add_pair(0, 2, 1.5);
        t.add_pair(1, 1, 1.0);
        t.add(0, 1, 9.0); // upper, ignored
        let a = t.build();
        assert_eq!(a.nnz_lower(), 2);
        assert_eq!(a.get(0, 2), 1.5);
        assert_eq!(a.get(2, 0), 1.5);
        assert_eq!(a.get(1, 1), 2.0);
        assert_eq!(a.get(1, 0), 0.0);
    }

    #[test]
    fn submatrix_and_dirichlet() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 8;
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let d = &g * g.transpose();
        let a = from_dense(&d);
        let idx = [5, 1, 7];
        let s = a.submatrix(&idx).unwrap().to_dense();
        for (p, &i) in idx.iter().enumerate() {
            for (q, &j) in idx.iter().enumerate() {
                assert!((s[(p, q)] - d[(i, j)]).abs() < 1e-15);
            }
        }
        assert!(matches!(a.submatrix(&[0, 9]), Err(Error::OutOfRange { .. })));
        assert!(a.submatrix(&[1, 1]).is_err());

        let mut mask = vec![false; n];
        mask[2] = true;
        let bc = a.with_dirichlet(&mask).to_dense();
        assert_eq!(bc[(2, 2)], 1.0);
        assert!((0..n).filter(|&j| j != 2).all(|j| bc[(2, j)] == 0.0 && bc[(j, 2)] == 0.0));
    }
}
