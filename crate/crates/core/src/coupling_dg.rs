//! Interior-penalty coupling of per-block offline bases.

use std::collections::HashSet;

use nalgebra::DMatrix;

use crate::coarse::{galerkin_matrix, project_rhs, prolongate, solve_coarse, ColumnLabel, MsSolution, SparseColumn};
use crate::error::{Error, Result};
use crate::fem::{block_offset, DgOperator, NormMode};
use crate::grid::{GridHierarchy, RegionKind};
use crate::spectral::OfflineSpace;

/// Broken coarse basis: every column lives in one block of the broken layout.
#[derive(Clone, Debug)]
pub struct GlobalBasisDG {
    columns: Vec<SparseColumn>,
    n_fine: usize,
}

impl GlobalBasisDG {
    pub fn dimension(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[SparseColumn] {
        &self.columns
    }

    pub fn labels(&self) -> impl Iterator<Item = ColumnLabel> + '_ {
        self.columns.iter().map(|c| c.label)
    }

    pub fn prolongate(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() != self.columns.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for {} columns",
                coeffs.len(),
                self.columns.len()
            )));
        }
        Ok(prolongate(&self.columns, coeffs, self.n_fine))
    }
}

/// Gathers one offline space per block.
pub fn assemble_global_dg(g: &GridHierarchy, spaces: &[OfflineSpace]) -> Result<GlobalBasisDG> {
    let mut seen = HashSet::new();
    let mut columns = Vec::new();
    for s in spaces {
        if s.region.kind() != RegionKind::Block {
            return Err(Error::Basis(format!("broken basis needs block regions, got {:?}", s.region.kind())));
        }
        let b = s.region.owner();
        if !seen.insert(b) {
            return Err(Error::Basis(format!("block {b} included twice")));
        }
        let off = block_offset(g, b);
        for (l, col) in s.columns.column_iter().enumerate() {
            let (dofs, values): (Vec<usize>, Vec<f64>) =
                col.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(k, &v)| (off + k, v)).unzip();
            if dofs.is_empty() {
                return Err(Error::Basis(format!("column {l} of block {b} has empty support")));
            }
            columns.push(SparseColumn { label: ColumnLabel { owner: b, mode: l }, rect: s.region.rect(), dofs, values });
        }
    }
    if seen.len() != g.n_blocks() {
        return Err(Error::Basis(format!("{} of {} blocks have offline spaces", seen.len(), g.n_blocks())));
    }
    if columns.is_empty() {
        return Err(Error::Basis("broken basis is empty".into()));
    }
    Ok(GlobalBasisDG { columns, n_fine: g.n_broken_dofs() })
}

/// Coarse IPDG matrix and right-hand side for a broken load vector.
pub fn coarse_dg_system(g: &GridHierarchy, op: &DgOperator, f: &[f64], basis: &GlobalBasisDG) -> Result<(DMatrix<f64>, Vec<f64>)> {
    if basis.n_fine != op.matrix().n() {
        return Err(Error::DimensionMismatch(format!(
            "basis on {} dofs, operator on {}",
            basis.n_fine,
            op.matrix().n()
        )));
    }
    let k = galerkin_matrix(op.matrix(), &basis.columns, true)?;
    if let Some(j) = (0..k.nrows()).find(|&j| k[(j, j)] <= 0.0) {
        return Err(Error::Coercivity(format!(
            "gamma = {}: coarse diagonal {:e} at column {:?}",
            op.options().gamma,
            k[(j, j)],
            basis.columns[j].label
        )));
    }
    let rhs = project_rhs(&basis.columns, &op.rhs(g, f)?);
    Ok((k, rhs))
}

/// Galerkin solve of the IPDG problem over the basis span.
pub fn solve_dg_gmsfem(g: &GridHierarchy, op: &DgOperator, f: &[f64], basis: &GlobalBasisDG) -> Result<MsSolution> {
    let (k, rhs) = coarse_dg_system(g, op, f, basis)?;
    let (coefficients, dropped) = solve_coarse(&k, &rhs, &basis.columns)?;
    let fine = prolongate(&basis.columns, &coefficients, basis.n_fine);
    Ok(MsSolution {
        mode: NormMode::Dg,
        coefficients,
        fine,
        dimension: basis.dimension(),
        dropped: dropped.into_iter().map(|j| basis.columns[j].label).collect(),
    })
}
