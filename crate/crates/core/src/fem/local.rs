use nalgebra::DMatrix;

use super::assembly::FineOperator;
use crate::error::Result;
use crate::linalg::{BandedCholesky, SparseSym};

/// Factored interior block of a region stiffness, for Dirichlet problems
/// and discrete harmonic extensions on that region.
#[derive(Clone, Debug)]
pub struct LocalDirichlet {
    stiffness: SparseSym,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    factor: Option<BandedCholesky>,
}

impl LocalDirichlet {
    pub fn new(op: &FineOperator) -> Result<Self> {
        let region = op.region();
        let interior: Vec<usize> = region.interior_local().iter().flat_map(|&n| [2 * n, 2 * n + 1]).collect();
        let boundary: Vec<usize> = region.boundary_local().iter().flat_map(|&n| [2 * n, 2 * n + 1]).collect();
        let factor = if interior.is_empty() {
            None
        } else {
            Some(BandedCholesky::factor(&op.stiffness().submatrix(&interior)?)?)
        };
        Ok(Self { stiffness: op.stiffness().clone(), interior, boundary, factor })
    }

    pub fn n_dofs(&self) -> usize {
        self.stiffness.n()
    }

    /// Local boundary dofs, ordered by boundary node then component.
    pub fn boundary_dofs(&self) -> &[usize] {
        &self.boundary
    }

    pub fn interior_dofs(&self) -> &[usize] {
        &self.interior
    }

    pub fn stiffness(&self) -> &SparseSym {
        &self.stiffness
    }

    /// Solves `A_ii x_i = rhs_i - A_ib x_b` in place, keeping the boundary entries of `x`.
    pub fn solve_with_boundary(&self, x: &mut [f64], rhs: Option<&[f64]>) {
        let Some(factor) = &self.factor else { return };
        let mut xb = vec![0.0; x.len()];
        for &d in &self.boundary {
            xb[d] = x[d];
        }
        let ab = self.stiffness.matvec(&xb);
        let mut xi: Vec<f64> = self.interior.iter().map(|&d| rhs.map_or(0.0, |r| r[d]) - ab[d]).collect();
        factor.solve_in_place(&mut xi);
        for (&d, v) in self.interior.iter().zip(xi) {
            x[d] = v;
        }
    }

    /// Discrete harmonic extension of boundary values (one column per extension).
    pub fn extend(&self, boundary_values: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(boundary_values.nrows(), self.boundary.len());
        let n = self.n_dofs();
        let mut out = DMatrix::zeros(n, boundary_values.ncols());
        for (k, col) in boundary_values.column_iter().enumerate() {
            let mut x = vec![0.0; n];
            for (&d, &v) in self.boundary.iter().zip(col.iter()) {
                x[d] = v;
            }
            self.solve_with_boundary(&mut x, None);
            out.column_mut(k).copy_from_slice(&x);
        }
        out
    }

    /// Harmonic extension of one trace given on the boundary dofs.
    pub fn extend_vec(&self, trace: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n_dofs()];
        for (&d, &v) in self.boundary.iter().zip(trace) {
            x[d] = v;
        }
        self.solve_with_boundary(&mut x, None);
        x
    }

    /// Harmonic extensions of every boundary unit vector, in boundary-dof order.
    pub fn extend_all(&self) -> DMatrix<f64> {
        self.extend(&DMatrix::identity(self.boundary.len(), self.boundary.len()))
    }

    /// Schur complement `A_bb - A_bi A_ii^-1 A_ib` on the boundary dofs.
    pub fn schur(&self) -> DMatrix<f64> {
        let ext = self.extend_all();
        let nb = self.boundary.len();
        let mut s = DMatrix::zeros(nb, nb);
        for k in 0..nb {
            let y = self.stiffness.matvec(ext.column(k).as_slice());
            for (r, &d) in self.boundary.iter().enumerate() {
                s[(r, k)] = y[d];
            }
        }
        (&s + s.transpose()) * 0.5
    }
}
