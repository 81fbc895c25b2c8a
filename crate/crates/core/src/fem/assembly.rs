use super::element::{shape, Mat8, Q1Element, GAUSS3};
use crate::coeff::CoeffField;
use crate::error::{Error, Result};
use crate::grid::{GridHierarchy, Region, RegionKind};
use crate::linalg::{pcg, SparseCholesky, SparseSym, TripletBuilder};

/// Elasticity stiffness on a region together with its essential-boundary mask.
#[derive(Clone, Debug)]
pub struct FineOperator {
    region: Region,
    stiffness: SparseSym,
    dirichlet: Vec<bool>,
}

impl FineOperator {
    pub fn region(&self) -> &Region {
        &self.region
    }

    /// Stiffness without boundary conditions (region-local numbering).
    pub fn stiffness(&self) -> &SparseSym {
        &self.stiffness
    }

    pub fn dirichlet_mask(&self) -> &[bool] {
        &self.dirichlet
    }

    pub fn has_dirichlet(&self) -> bool {
        self.dirichlet.iter().any(|&d| d)
    }

    /// Stiffness with constrained rows and columns replaced by identity.
    pub fn constrained(&self) -> SparseSym {
        if self.has_dirichlet() {
            self.stiffness.with_dirichlet(&self.dirichlet)
        } else {
            self.stiffness.clone()
        }
    }

    /// Vector mass on the same region weighted by a per-cell scalar.
    pub fn weighted_mass(&self, g: &GridHierarchy, weight: &[f64]) -> Result<SparseSym> {
        if weight.len() != g.n_fine_cells() {
            return Err(Error::DimensionMismatch(format!(
                "cell weight has {} entries, grid has {} cells",
                weight.len(),
                g.n_fine_cells()
            )));
        }
        Ok(weighted_mass(g, &self.region, |cell| weight[cell]))
    }

    pub fn energy(&self, u: &[f64]) -> f64 {
        self.stiffness.bilinear(u, u)
    }
}

/// Element-level assembly over the cells of a region in local numbering.
pub fn assemble_region(g: &GridHierarchy, region: &Region, mut local: impl FnMut(usize) -> Mat8) -> SparseSym {
    let (cx, cy) = region.cells_per_axis();
    let mut t = TripletBuilder::with_capacity(region.n_dofs(), 36 * cx * cy);
    for (cell, corners) in region.cells(g) {
        let k = local(cell);
        let dofs = corner_dofs(corners);
        for a in 0..8 {
            for b in 0..=a {
                let v = k[(a, b)];
                if v != 0.0 {
                    t.add(dofs[a].max(dofs[b]), dofs[a].min(dofs[b]), v);
                }
            }
        }
    }
    t.build()
}

#[inline]
pub(crate) fn corner_dofs(corners: [usize; 4]) -> [usize; 8] {
    let mut d = [0; 8];
    for (a, &n) in corners.iter().enumerate() {
        d[2 * a] = 2 * n;
        d[2 * a + 1] = 2 * n + 1;
    }
    d
}

/// Stiffness on `region` with natural boundary conditions.
pub fn assemble_stiffness(g: &GridHierarchy, c: &CoeffField, region: &Region) -> Result<FineOperator> {
    c.check_grid(g)?;
    let el = Q1Element::new(g.hx(), g.hy());
    let stiffness = assemble_region(g, region, |cell| el.stiffness(c.lambda()[cell], c.mu()[cell]));
    let dirichlet = if region.kind() == RegionKind::Domain {
        g.dirichlet_mask()
    } else {
        vec![false; region.n_dofs()]
    };
    Ok(FineOperator { region: region.clone(), stiffness, dirichlet })
}

/// Whole-domain stiffness with the homogeneous Dirichlet mask on the outer boundary.
pub fn assemble_domain(g: &GridHierarchy, c: &CoeffField) -> Result<FineOperator> {
    assemble_stiffness(g, c, &g.domain_region())
}

pub fn weighted_mass(g: &GridHierarchy, region: &Region, weight: impl Fn(usize) -> f64) -> SparseSym {
    let el = Q1Element::new(g.hx(), g.hy());
    assemble_region(g, region, |cell| el.vector_mass(weight(cell)))
}

/// Load vector `(f, v)` on a region for a body force given pointwise (3x3 Gauss per cell).
pub fn load_vector(g: &GridHierarchy, region: &Region, f: impl Fn(f64, f64) -> [f64; 2]) -> Vec<f64> {
    let (pts, wts) = GAUSS3;
    let (hx, hy) = (g.hx(), g.hy());
    let mut out = vec![0.0; region.n_dofs()];
    for (cell, corners) in region.cells(g) {
        let [x0, y0] = g.cell_origin(cell);
        for (qx, wx) in pts.iter().zip(wts) {
            for (qy, wy) in pts.iter().zip(wts) {
                let fv = f(x0 + qx * hx, y0 + qy * hy);
                let w = wx * wy * hx * hy;
                let n = shape(*qx, *qy);
                for a in 0..4 {
                    out[2 * corners[a]] += w * fv[0] * n[a];
                    out[2 * corners[a] + 1] += w * fv[1] * n[a];
                }
            }
        }
    }
    out
}

/// Global conforming load vector.
pub fn domain_load(g: &GridHierarchy, f: impl Fn(f64, f64) -> [f64; 2]) -> Vec<f64> {
    load_vector(g, &g.domain_region(), f)
}

/// Load vector in the broken (block-by-block) layout.
pub fn broken_load(g: &GridHierarchy, f: impl Fn(f64, f64) -> [f64; 2]) -> Vec<f64> {
    let mut out = Vec::with_capacity(g.n_broken_dofs());
    for b in 0..g.n_blocks() {
        let k = g.block_region(b).expect("block index in range");
        out.extend(load_vector(g, &k, &f));
    }
    out
}

/// Copies a conforming global vector into the broken layout.
pub fn conforming_to_broken(g: &GridHierarchy, u: &[f64]) -> Result<Vec<f64>> {
    if u.len() != g.n_fine_dofs() {
        return Err(Error::DimensionMismatch(format!(
            "expected {} conforming dofs, got {}",
            g.n_fine_dofs(),
            u.len()
        )));
    }
    let mut out = Vec::with_capacity(g.n_broken_dofs());
    for b in 0..g.n_blocks() {
        let k = g.block_region(b)?;
        out.extend(k.dof_map().iter().map(|&d| u[d]));
    }
    Ok(out)
}

/// How fine systems are solved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    /// Sparse Cholesky.
    #[default]
    Direct,
    /// Jacobi-preconditioned conjugate gradients.
    Pcg,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Relative residual target of PCG.
    pub tol: f64,
    pub maxit: usize,
    pub method: SolveMethod,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, maxit: 200_000, method: SolveMethod::Direct }
    }
}

pub(crate) fn solve_spd_system(a: &SparseSym, b: &[f64], opts: SolverOptions) -> Result<Vec<f64>> {
    match opts.method {
        SolveMethod::Direct => SparseCholesky::factor(a)?.solve(b),
        SolveMethod::Pcg => Ok(pcg(a, b, opts.tol, opts.maxit)?.x),
    }
}

/// Conforming fine-grid solution with homogeneous Dirichlet data.
pub fn solve_fine_cg(g: &GridHierarchy, c: &CoeffField, f: &[f64], opts: SolverOptions) -> Result<Vec<f64>> {
    let op = assemble_domain(g, c)?;
    solve_with_operator(&op, f, opts)
}

/// Same as [`solve_fine_cg`] for an already assembled domain operator.
pub fn solve_with_operator(op: &FineOperator, f: &[f64], opts: SolverOptions) -> Result<Vec<f64>> {
    if f.len() != op.region.n_dofs() {
        return Err(Error::DimensionMismatch(format!(
            "load has {} entries, operator has {} dofs",
            f.len(),
            op.region.n_dofs()
        )));
    }
    let mut rhs = f.to_vec();
    for (r, &d) in rhs.iter_mut().zip(&op.dirichlet) {
        if d {
            *r = 0.0;
        }
    }
    if rhs.iter().all(|&v| v == 0.0) {
        return Ok(rhs);
    }
    let a = op.constrained();
    solve_spd_system(&a, &rhs, opts).map_err(|e| e.context("conforming fine solve"))
}

#[cfg(test)]
mod tests {
    use super::super::element::{GAUSS2, Q1Element};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rigid_kernel_has_dimension_three() {
        let g = GridHierarchy::new(1.0, 1.0, 1, 1, 3).unwrap();
        let c = CoeffField::constant(&g, 1.3, 0.4).unwrap();
        let op = assemble_stiffness(&g, &c, &g.block_region(0).unwrap()).unwrap();
        let k = op.stiffness().to_dense();
        let eig = k.symmetric_eigenvalues();
        let tol = 1e-10 * eig.amax();
        assert_eq!(eig.iter().filter(|&&e| e.abs() < tol).count(), 3);
        assert!(!op.has_dirichlet());
        let dom = assemble_domain(&g, &c).unwrap();
        assert!(dom.constrained().to_dense().cholesky().is_some());
    }

    #[test]
    fn rotation_energy_vanishes_on_heterogeneous_region() {
        let g = GridHierarchy::new(2.0, 1.0, 2, 2, 3).unwrap();
        let c = crate::coeff::gen_model1_like(&g, 1.0, 100.0, 3).unwrap();
        let w = g.neighborhood(g.coarse_node(1, 1)).unwrap();
        let op = assemble_stiffness(&g, &c, &w).unwrap();
        let u: Vec<f64> = w
            .nodes()
            .iter()
            .flat_map(|&n| {
                let [x, y] = g.node_coords(n);
                [-y, x]
            })
            .collect();
        assert!(op.energy(&u).abs() < 1e-12);
    }

    /// Direct per-Gauss-point strain energy, independent of the element matrices.
    fn quadrature_energy(g: &GridHierarchy, c: &CoeffField, region: &Region, u: &[f64]) -> f64 {
        let mut e = 0.0;
        for (cell, corners) in region.cells(g) {
            let (lam, mu) = (c.lambda()[cell], c.mu()[cell]);
            for &xi in &GAUSS2 {
                for &eta in &GAUSS2 {
                    let dn = [
                        [-(1.0 - eta) / g.hx(), -(1.0 - xi) / g.hy()],
                        [(1.0 - eta) / g.hx(), -xi / g.hy()],
                        [-eta / g.hx(), (1.0 - xi) / g.hy()],
                        [eta / g.hx(), xi / g.hy()],
                    ];
                    let mut grad = [[0.0; 2]; 2];
                    for a in 0..4 {
                        for comp in 0..2 {
                            for d in 0..2 {
                                grad[comp][d] += u[2 * corners[a] + comp] * dn[a][d];
                            }
                        }
                    }
                    let e11 = grad[0][0];
                    let e22 = grad[1][1];
                    let e12 = 0.5 * (grad[0][1] + grad[1][0]);
                    let div = e11 + e22;
                    e += 0.25 * g.hx() * g.hy() * (2.0 * mu * (e11 * e11 + e22 * e22 + 2.0 * e12 * e12) + lam * div * div);
                }
            }
        }
        e
    }

    #[test]
    fn energy_matches_quadrature_oracle() {
        let g = GridHierarchy::new(1.0, 1.0, 1, 1, 3).unwrap();
        let c = crate::coeff::gen_model1_like(&g, 1.0, 50.0, 11).unwrap();
        let r = g.domain_region();
        let op = assemble_stiffness(&g, &c, &r).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u: Vec<f64> = (0..r.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = op.energy(&u);
        let b = quadrature_energy(&g, &c, &r, &u);
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }

    #[test]
    fn zero_load_gives_zero() {
        let g = GridHierarchy::new(1.0, 1.0, 2, 2, 2).unwrap();
        let c = CoeffField::constant(&g, 1.0, 1.0).unwrap();
        let u = solve_fine_cg(&g, &c, &vec![0.0; g.n_fine_dofs()], SolverOptions::default()).unwrap();
        assert!(u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn element_mass_total() {
        let g = GridHierarchy::new(1.0, 2.0, 2, 1, 2).unwrap();
        let m = weighted_mass(&g, &g.domain_region(), |_| 3.0);
        let ones: Vec<f64> = (0..g.n_fine_nodes()).flat_map(|_| [1.0, 0.0]).collect();
        assert!((m.bilinear(&ones, &ones) - 6.0).abs() < 1e-12);
        let _ = Q1Element::new(0.5, 1.0);
    }
}
