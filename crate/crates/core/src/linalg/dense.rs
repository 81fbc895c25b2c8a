use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use super::sparse::SparseSym;
use crate::error::{Error, Result};

/// Relative symmetry tolerance accepted on construction.
const SYM_TOL: f64 = 1e-12;
/// Reversed-pencil eigenvalues `eta` below this fraction of the largest are infinite modes.
const INFINITE_ETA: f64 = 1e-12;
/// Shift of the reversed pencil relative to `trace(A) / trace(B)`.
const SHIFT_SCALE: f64 = 1e-8;

/// Dense symmetric matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseSym(DMatrix<f64>);

impl DenseSym {
    /// Wraps `m` after checking `max|A - A^T| <= 1e-12 max|A|`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(m, SYM_TOL)
    }

    pub fn with_tolerance(m: DMatrix<f64>, tol: f64) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
        }
        let scale = m.amax();
        let asym = (&m - m.transpose()).amax();
        if asym > tol * scale {
            return Err(Error::NotSymmetric(format!("asymmetry {asym:e} vs scale {scale:e}")));
        }
        Ok(Self(m))
    }

    /// Averages `m` with its transpose.
    pub fn symmetrized(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        Self((m + t) * 0.5)
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

/// Eigen-decomposition of a symmetric-definite pencil `A v = xi B v`.
#[derive(Clone, Debug)]
pub struct GenEigen {
    /// Finite eigenvalues, ascending.
    pub values: Vec<f64>,
    /// B-orthonormal eigenvectors (columns) matching `values`.
    pub vectors: DMatrix<f64>,
    /// Modes with infinite eigenvalue (null space of `B`), as columns normalised
    /// in the shifted `A + sigma B` inner product. Empty for definite `B`.
    pub infinite: DMatrix<f64>,
}

impl GenEigen {
    pub fn n_finite(&self) -> usize {
        self.values.len()
    }
    pub fn n_total(&self) -> usize {
        self.values.len() + self.infinite.ncols()
    }
}

fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// `L^{-T} Q` for a lower Cholesky factor `L`.
fn back_transform(l: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    l.transpose()
        .solve_upper_triangular(q)
        .expect("Cholesky factor has a positive diagonal")
}

/// Solves `A v = xi B v` for symmetric positive semidefinite `A`.
///
/// With `b_semidefinite_ok == false`, `B` must be positive definite and is
/// factored directly. Otherwise the reversed pencil `B v = eta (A + sigma B) v`
/// is solved, `xi = (1 - eta sigma) / eta` is reported for the finite modes and
/// the modes with `eta ~ 0` are returned separately as infinite.
pub fn eig_gen_sym(a: &DenseSym, b: &DenseSym, b_semidefinite_ok: bool) -> Result<GenEigen> {
    let n = a.n();
    if b.n() != n {
        return Err(Error::DimensionMismatch(format!("pencil sizes {n} and {}", b.n())));
    }
    if n == 0 {
        return Ok(GenEigen { values: vec![], vectors: DMatrix::zeros(0, 0), infinite: DMatrix::zeros(0, 0) });
    }
    if !b_semidefinite_ok {
        let chol = Cholesky::new(b.matrix().clone())
            .ok_or_else(|| Error::NotPositiveDefinite("right-hand pencil matrix is not positive definite".into()))?;
        let l = chol.l();
        let linv_a = l.solve_lower_triangular(a.matrix()).expect("nonsingular factor");
        let c = l.solve_lower_triangular(&linv_a.transpose()).expect("nonsingular factor");
        let (values, q) = sorted_eigen(c);
        let vectors = back_transform(&l, &q);
        return Ok(GenEigen { values, vectors, infinite: DMatrix::zeros(n, 0) });
    }

    let tr_a = a.matrix().trace();
    let tr_b = b.matrix().trace();
    if !(tr_b > 0.0) {
        return Err(Error::NotPositiveDefinite(format!("right-hand pencil matrix has trace {tr_b:e}")));
    }
    let sigma = if tr_a > 0.0 { SHIFT_SCALE * tr_a / tr_b } else { 1.0 };
    let shifted = a.matrix() + b.matrix() * sigma;
    let chol = Cholesky::new(shifted).ok_or_else(|| {
        Error::NotPositiveDefinite("A + sigma B is singular: the pencil has a common null space".into())
    })?;
    let l = chol.l();
    let linv_b = l.solve_lower_triangular(b.matrix()).expect("nonsingular factor");
    let w = l.solve_lower_triangular(&linv_b.transpose()).expect("nonsingular factor");
    let (etas, q) = sorted_eigen(w);
    let v = back_transform(&l, &q);
    let eta_max = etas.last().copied().unwrap_or(0.0);
    if eta_max < 0.0 || etas[0] < -1e-8 * eta_max.max(f64::MIN_POSITIVE) {
        return Err(Error::NotPositiveDefinite(format!("right-hand pencil matrix is indefinite (eta min {:e})", etas[0])));
    }
    let cut = INFINITE_ETA * eta_max;
    let n_inf = etas.iter().take_while(|&&e| e <= cut).count();
    let n_fin = n - n_inf;
    // ascending eta among finite modes is descending xi; reverse it
    let mut values = Vec::with_capacity(n_fin);
    let mut vectors = DMatrix::zeros(n, n_fin);
    for (col, k) in (n_inf..n).rev().enumerate() {
        let eta = etas[k];
        values.push(1.0 / eta - sigma);
        vectors.set_column(col, &(v.column(k) / eta.sqrt()));
    }
    let infinite = v.columns(0, n_inf).into_owned();
    Ok(GenEigen { values, vectors, infinite })
}

/// `R^T A R` for dense columns `R`, symmetrized.
pub fn triple_product(r: &DMatrix<f64>, a: &SparseSym) -> Result<DenseSym> {
    if r.nrows() != a.n() {
        return Err(Error::DimensionMismatch(format!("R has {} rows, A is {}x{}", r.nrows(), a.n(), a.n())));
    }
    let mut ar = DMatrix::zeros(r.nrows(), r.ncols());
    for (k, col) in r.column_iter().enumerate() {
        let y = a.matvec(col.as_slice());
        ar.set_column(k, &DVector::from_vec(y));
    }
    Ok(DenseSym::symmetrized(r.transpose() * ar))
}

/// `R^T M R` for a dense symmetric `M`, symmetrized.
pub fn triple_product_dense(r: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<DenseSym> {
    if r.nrows() != m.nrows() {
        return Err(Error::DimensionMismatch(format!("R has {} rows, M is {}x{}", r.nrows(), m.nrows(), m.ncols())));
    }
    Ok(DenseSym::symmetrized(r.transpose() * (m * r)))
}

/// Rank-revealing solve of a symmetric positive semidefinite system.
#[derive(Clone, Debug)]
pub struct PivotedSolve {
    pub x: Vec<f64>,
    /// Unknowns dropped as numerically dependent (their coefficient is zero).
    pub dropped: Vec<usize>,
}

/// Solves `K x = f` by Cholesky with diagonal pivoting, stopping once every
/// remaining Schur-complement pivot is below `rel_tol * max(diag K)`.
///
/// For a consistent semidefinite system the result is a solution supported on
/// the retained unknowns; for a Galerkin matrix this yields the unique Galerkin
/// solution in the span of the basis.
pub fn solve_psd_pivoted(k: &DMatrix<f64>, f: &[f64], rel_tol: f64) -> Result<PivotedSolve> {
    let n = k.nrows();
    if k.ncols() != n || f.len() != n {
        return Err(Error::DimensionMismatch(format!("system {}x{} with rhs {}", n, k.ncols(), f.len())));
    }
    let mut d: Vec<f64> = (0..n).map(|i| k[(i, i)]).collect();
    let dmax = d.iter().cloned().fold(0.0f64, f64::max);
    if let Some(i) = d.iter().position(|&v| v < -rel_tol * dmax) {
        return Err(Error::NotPositiveDefinite(format!("negative diagonal {:e} at {i}", d[i])));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    // l[i] holds row i (original index) of the factor, in pivot order
    let mut l: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut rank = 0;
    let cut = rel_tol * dmax;
    while rank < n {
        let (p, &dp) = perm[rank..]
            .iter()
            .map(|&i| (i, &d[i]))
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty");
        if !(dp > cut) {
            break;
        }
        let pos = perm[rank..].iter().position(|&i| i == p).unwrap() + rank;
        perm.swap(rank, pos);
        let lpp = dp.sqrt();
        let lp = l[p].clone();
        l[p].push(lpp);
        for &i in &perm[rank + 1..] {
            let s: f64 = k[(i, p)] - l[i].iter().zip(&lp).map(|(a, b)| a * b).sum::<f64>();
            let v = s / lpp;
            l[i].push(v);
            d[i] -= v * v;
        }
        rank += 1;
    }
    // forward solve L y = f_perm, then back solve L^T x = y on the retained set
    let kept = &perm[..rank];
    let mut y = vec![0.0; rank];
    for (c, &i) in kept.iter().enumerate() {
        let s: f64 = f[i] - (0..c).map(|q| l[i][q] * y[q]).sum::<f64>();
        y[c] = s / l[i][c];
    }
    let mut xk = vec![0.0; rank];
    for c in (0..rank).rev() {
        let s: f64 = y[c] - (c + 1..rank).map(|q| l[kept[q]][c] * xk[q]).sum::<f64>();
        xk[c] = s / l[kept[c]][c];
    }
    let mut x = vec![0.0; n];
    for (c, &i) in kept.iter().enumerate() {
        x[i] = xk[c];
    }
    let mut dropped = perm[rank..].to_vec();
    dropped.sort_unstable();
    Ok(PivotedSolve { x, dropped })
}
