//! Coarse-space plumbing shared by both couplings: sparse basis columns,
//! Galerkin projection of a fine operator, and the multiscale solution.

use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::coeff::Raster;
use crate::error::{Error, Result};
use crate::fem::{for_each_cell, NormMode};
use crate::grid::{BlockRect, GridHierarchy};
use crate::linalg::{solve_psd_pivoted, SparseSym};

/// Relative pivot cut of the coarse solve; columns below it are reported as dropped.
pub const COARSE_PIVOT_TOL: f64 = 1e-13;

/// Where a basis column came from: the owning region and the mode number within it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ColumnLabel {
    pub owner: usize,
    pub mode: usize,
}

/// One basis function as global fine dofs and values.
#[derive(Clone, Debug)]
pub struct SparseColumn {
    pub label: ColumnLabel,
    pub rect: BlockRect,
    pub dofs: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseColumn {
    fn scatter(&self, out: &mut [f64], scale: f64) {
        for (&d, &v) in self.dofs.iter().zip(&self.values) {
            out[d] += scale * v;
        }
    }

    fn gather_dot(&self, y: &[f64]) -> f64 {
        self.dofs.iter().zip(&self.values).map(|(&d, &v)| v * y[d]).sum()
    }
}

/// Rectangles that share a cell (`touch = false`) or at least a point (`touch = true`).
fn overlaps(a: &BlockRect, b: &BlockRect, touch: bool) -> bool {
    if touch {
        a.x0 <= b.x1 && b.x0 <= a.x1 && a.y0 <= b.y1 && b.y0 <= a.y1
    } else {
        a.x0 < b.x1 && b.x0 < a.x1 && a.y0 < b.y1 && b.y0 < a.y1
    }
}

/// `R^T A R` for sparse columns. Pairs whose rectangles do not interact are skipped.
pub(crate) fn galerkin_matrix(a: &SparseSym, cols: &[SparseColumn], touch: bool) -> Result<DMatrix<f64>> {
    let n = cols.len();
    let entries: Vec<Vec<(usize, f64)>> = cols
        .par_iter()
        .map(|cj| {
            let mut x = vec![0.0; a.n()];
            cj.scatter(&mut x, 1.0);
            let y = a.matvec(&x);
            cols.iter()
                .enumerate()
                .filter(|(_, ci)| overlaps(&ci.rect, &cj.rect, touch))
                .map(|(i, ci)| (i, ci.gather_dot(&y)))
                .collect()
        })
        .collect();
    let mut k = DMatrix::zeros(n, n);
    for (j, col) in entries.into_iter().enumerate() {
        for (i, v) in col {
            k[(i, j)] = v;
        }
    }
    let scale = k.amax();
    let asym = (&k - k.transpose()).amax();
    if asym > 1e-10 * scale {
        return Err(Error::NotSymmetric(format!("coarse matrix asymmetry {asym:e} (scale {scale:e})")));
    }
    Ok((&k + k.transpose()) * 0.5)
}

pub(crate) fn project_rhs(cols: &[SparseColumn], f: &[f64]) -> Vec<f64> {
    cols.iter().map(|c| c.gather_dot(f)).collect()
}

pub(crate) fn prolongate(cols: &[SparseColumn], coeffs: &[f64], n_fine: usize) -> Vec<f64> {
    let mut u = vec![0.0; n_fine];
    for (c, &x) in cols.iter().zip(coeffs) {
        if x != 0.0 {
            c.scatter(&mut u, x);
        }
    }
    u
}

/// Coarse solve with rank-revealing pivoting; returns coefficients and dropped column indices.
pub(crate) fn solve_coarse(k: &DMatrix<f64>, f: &[f64], cols: &[SparseColumn]) -> Result<(Vec<f64>, Vec<usize>)> {
    let s = solve_psd_pivoted(k, f, COARSE_PIVOT_TOL).map_err(|e| e.context("coarse solve"))?;
    if s.dropped.len() == cols.len() {
        return Err(Error::Basis("coarse matrix is numerically zero".into()));
    }
    Ok((s.x, s.dropped))
}

/// Multiscale solution in coarse coefficients and on the fine grid.
#[derive(Clone, Debug)]
pub struct MsSolution {
    pub mode: NormMode,
    pub coefficients: Vec<f64>,
    /// Prolongated field (conforming or broken layout according to `mode`).
    pub fine: Vec<f64>,
    pub dimension: usize,
    /// Basis columns dropped as numerically dependent.
    pub dropped: Vec<ColumnLabel>,
}

impl MsSolution {
    /// Nodal displacement raster with two layers; broken fields are averaged over the blocks sharing a node.
    pub fn to_raster(&self, g: &GridHierarchy) -> Result<Raster> {
        displacement_raster(g, &self.fine, self.mode)
    }

    pub fn save_raster(&self, g: &GridHierarchy, path: &Path) -> Result<()> {
        self.to_raster(g)?.save(path)
    }
}

/// Two-layer nodal raster of a fine displacement field.
pub fn displacement_raster(g: &GridHierarchy, u: &[f64], mode: NormMode) -> Result<Raster> {
    let n = mode.n_dofs(g);
    if u.len() != n {
        return Err(Error::DimensionMismatch(format!("field has {} entries, expected {n}", u.len())));
    }
    let nn = g.n_fine_nodes();
    let mut sum = vec![[0.0; 2]; nn];
    let mut count = vec![0u32; nn];
    match mode {
        NormMode::Cg => {
            for (k, s) in sum.iter_mut().enumerate() {
                *s = [u[2 * k], u[2 * k + 1]];
            }
            count.iter_mut().for_each(|c| *c = 1);
        }
        NormMode::Dg => {
            // visit each block node once through its block's cells
            let mut seen = vec![false; g.n_broken_dofs() / 2];
            for_each_cell(g, mode, |cell, dofs| {
                let corners = cell_nodes(g, cell);
                for (a, &node) in corners.iter().enumerate() {
                    let bn = dofs[2 * a] / 2;
                    if !seen[bn] {
                        seen[bn] = true;
                        sum[node][0] += u[dofs[2 * a]];
                        sum[node][1] += u[dofs[2 * a + 1]];
                        count[node] += 1;
                    }
                }
            });
        }
    }
    let layer = |comp: usize| -> Vec<f64> { (0..nn).map(|k| sum[k][comp] / f64::from(count[k])).collect() };
    Ok(Raster { rows: g.fine_ny() + 1, cols: g.fine_nx() + 1, layers: vec![layer(0), layer(1)] })
}

/// Global corner nodes of a fine cell, ordered (0,0), (1,0), (0,1), (1,1).
fn cell_nodes(g: &GridHierarchy, cell: usize) -> [usize; 4] {
    let (i, j) = g.cell_ij(cell);
    [g.fine_node(i, j), g.fine_node(i + 1, j), g.fine_node(i, j + 1), g.fine_node(i + 1, j + 1)]
}
