//! Continuous Galerkin coupling of per-neighborhood offline bases.

use std::collections::HashSet;

use crate::coarse::{galerkin_matrix, project_rhs, prolongate, solve_coarse, ColumnLabel, MsSolution, SparseColumn};
use crate::error::{Error, Result};
use crate::fem::{FineOperator, NormMode};
use crate::grid::{GridHierarchy, RegionKind};
use crate::spectral::OfflineSpace;

/// Conforming coarse basis: columns `chi_i psi_l` with their domain-boundary dofs zeroed.
#[derive(Clone, Debug)]
pub struct GlobalBasisCG {
    columns: Vec<SparseColumn>,
    n_fine: usize,
}

impl GlobalBasisCG {
    pub fn dimension(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[SparseColumn] {
        &self.columns
    }

    pub fn labels(&self) -> impl Iterator<Item = ColumnLabel> + '_ {
        self.columns.iter().map(|c| c.label)
    }

    /// Column `j` as a dense fine vector.
    pub fn dense_column(&self, j: usize) -> Vec<f64> {
        let mut coeffs = vec![0.0; self.columns.len()];
        coeffs[j] = 1.0;
        prolongate(&self.columns, &coeffs, self.n_fine)
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

/// Gathers neighborhood offline spaces (already multiplied by their partition functions).
pub fn assemble_global_cg(g: &GridHierarchy, spaces: &[OfflineSpace]) -> Result<GlobalBasisCG> {
    let mask = g.dirichlet_mask();
    let mut seen = HashSet::new();
    let mut columns = Vec::new();
    for s in spaces {
        if s.region.kind() != RegionKind::Neighborhood {
            return Err(Error::Basis(format!("continuous basis needs neighborhood regions, got {:?}", s.region.kind())));
        }
        let owner = s.region.owner();
        if !seen.insert(owner) {
            return Err(Error::Basis(format!("coarse node {owner} included twice")));
        }
        let map = s.region.dof_map();
        for (l, col) in s.columns.column_iter().enumerate() {
            let (dofs, values): (Vec<usize>, Vec<f64>) = map
                .iter()
                .zip(col.iter())
                .filter(|(&d, &v)| !mask[d] && v != 0.0)
                .map(|(&d, &v)| (d, v))
                .unzip();
            if dofs.is_empty() {
                return Err(Error::Basis(format!("column {l} of coarse node {owner} has empty support")));
            }
            columns.push(SparseColumn { label: ColumnLabel { owner, mode: l }, rect: s.region.rect(), dofs, values });
        }
    }
    if columns.is_empty() {
        return Err(Error::Basis("continuous basis is empty".into()));
    }
    Ok(GlobalBasisCG { columns, n_fine: g.n_fine_dofs() })
}

/// Galerkin solve `a(u_H, v) = (f, v)` over the basis span.
pub fn solve_cg_gmsfem(op: &FineOperator, f: &[f64], basis: &GlobalBasisCG) -> Result<MsSolution> {
    let a = op.stiffness();
    if f.len() != a.n() || basis.n_fine != a.n() {
        return Err(Error::DimensionMismatch(format!(
            "load {} / basis {} / operator {}",
            f.len(),
            basis.n_fine,
            a.n()
        )));
    }
    let k = galerkin_matrix(a, &basis.columns, false)?;
    let rhs = project_rhs(&basis.columns, f);
    let (coefficients, dropped) = solve_coarse(&k, &rhs, &basis.columns)?;
    let fine = prolongate(&basis.columns, &coefficients, basis.n_fine);
    Ok(MsSolution {
        mode: NormMode::Cg,
        coefficients,
        fine,
        dimension: basis.dimension(),
        dropped: dropped.into_iter().map(|j| basis.columns[j].label).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::CoeffField;
    use crate::fem::{assemble_domain, domain_load};
    use crate::snapshot::snapshots_type2;
    use crate::spectral::{pou_bilinear, solve_pencil, spectral_cg, weight_kappa_tilde};

    fn spaces(g: &GridHierarchy, c: &CoeffField, l: usize) -> Vec<OfflineSpace> {
        let pou = pou_bilinear(g);
        let kappa = weight_kappa_tilde(g, c, &pou).unwrap();
        (0..g.n_coarse_nodes())
            .map(|i| {
                let snap = snapshots_type2(g, c, pou.region(i)).unwrap();
                let p = spectral_cg(g, c, &snap, &kappa).unwrap();
                solve_pencil(&p, &snap, None).unwrap().offline(l, Some(pou.values(i))).unwrap()
            })
            .collect()
    }

    #[test]
    fn rejects_empty_and_duplicates() {
        let g = GridHierarchy::new(1.0, 1.0, 2, 2, 2).unwrap();
        let c = CoeffField::constant(&g, 1.0, 1.0).unwrap();
        let s = spaces(&g, &c, 0);
        assert!(matches!(assemble_global_cg(&g, &s), Err(Error::Basis(_))));
        let mut s = spaces(&g, &c, 3);
        s.push(s[4].clone());
        assert!(matches!(assemble_global_cg(&g, &s), Err(Error::Basis(_))));
    }

    #[test]
    fn columns_vanish_on_domain_boundary_and_solution_is_galerkin() {
        let g = GridHierarchy::new(1.0, 1.0, 3, 3, 4).unwrap();
        let c = crate::coeff::gen_model1_like(&g, 1.0, 100.0, 2).unwrap();
        let basis = assemble_global_cg(&g, &spaces(&g, &c, 4)).unwrap();
        assert_eq!(basis.dimension(), 4 * 16);
        let mask = g.dirichlet_mask();
        for col in basis.columns() {
            assert!(col.dofs.iter().all(|&d| !mask[d]));
        }
        let op = assemble_domain(&g, &c).unwrap();
        let f = domain_load(&g, |x, y| [x.sin(), 1.0 + y]);
        let sol = solve_cg_gmsfem(&op, &f, &basis).unwrap();
        let au = op.stiffness().matvec(&sol.fine);
        for j in 0..basis.dimension() {
            let v = basis.dense_column(j);
            let r: f64 = au.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>()
                - f.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
            assert!(r.abs() < 1e-10, "column {j}: residual {r:e}");
        }
    }
}
