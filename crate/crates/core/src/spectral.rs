//! Local spectral problems in snapshot coordinates and the offline bases
//! they produce.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::coeff::CoeffField;
use crate::error::{Error, Result};
use crate::fem::element::{shape_grad_ref, GAUSS2};
use crate::fem::{
    assemble_stiffness, boundary_mass, segment_pmod_average, weighted_mass, LocalDirichlet,
};
use crate::grid::{GridHierarchy, Region};
use crate::linalg::{eig_gen_sym, triple_product, triple_product_dense, DenseSym};
use crate::snapshot::SnapshotSpace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PouKind {
    /// Coarse bilinear hats.
    Bilinear,
    /// Blockwise elasticity-harmonic extensions of the hats.
    Multiscale,
}

/// One scalar function per coarse node, stored on that node's neighborhood.
#[derive(Clone, Debug)]
pub struct PartitionOfUnity {
    kind: PouKind,
    regions: Vec<Region>,
    values: Vec<Vec<f64>>,
}

impl PartitionOfUnity {
    pub fn kind(&self) -> PouKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn region(&self, i: usize) -> &Region {
        &self.regions[i]
    }

    /// Values of the `i`-th function at the nodes of its neighborhood.
    pub fn values(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    /// Value of the `i`-th function at a global fine node (zero outside its neighborhood).
    pub fn value_at(&self, g: &GridHierarchy, i: usize, node: usize) -> f64 {
        self.regions[i].local_of(g, node).map_or(0.0, |k| self.values[i][k])
    }

    /// Sum of all functions at every fine node.
    pub fn sum(&self, g: &GridHierarchy) -> Vec<f64> {
        let mut s = vec![0.0; g.n_fine_nodes()];
        for (r, v) in self.regions.iter().zip(&self.values) {
            for (&n, &x) in r.nodes().iter().zip(v) {
                s[n] += x;
            }
        }
        s
    }
}

pub fn pou_bilinear(g: &GridHierarchy) -> PartitionOfUnity {
    let mut regions = Vec::with_capacity(g.n_coarse_nodes());
    let mut values = Vec::with_capacity(g.n_coarse_nodes());
    for i in 0..g.n_coarse_nodes() {
        let w = g.neighborhood(i).expect("coarse node in range");
        let (ix, iy) = g.coarse_node_ij(i);
        let nf = g.nf() as isize;
        let v = w
            .nodes()
            .iter()
            .map(|&n| {
                // integer arithmetic keeps the coarse-node values exact
                let (fi, fj) = g.fine_node_ij(n);
                let dx = (fi as isize - ix as isize * nf).unsigned_abs() as f64 / nf as f64;
                let dy = (fj as isize - iy as isize * nf).unsigned_abs() as f64 / nf as f64;
                (1.0 - dx).max(0.0) * (1.0 - dy).max(0.0)
            })
            .collect();
        regions.push(w);
        values.push(v);
    }
    PartitionOfUnity { kind: PouKind::Bilinear, regions, values }
}

/// Per block, the first displacement component of the elasticity-harmonic
/// extension of `(hat_i, 0)` from the block boundary, glued over `omega_i`.
pub fn pou_multiscale(g: &GridHierarchy, c: &CoeffField) -> Result<PartitionOfUnity> {
    let hats = pou_bilinear(g);
    let mut values: Vec<Vec<f64>> = hats.regions.iter().map(|r| vec![0.0; r.n_nodes()]).collect();
    for b in 0..g.n_blocks() {
        let k = g.block_region(b)?;
        let op = assemble_stiffness(g, c, &k)?;
        let local = LocalDirichlet::new(&op)?;
        let vertices = g.block_vertices(b);
        let ext: Vec<Vec<f64>> = vertices
            .iter()
            .map(|&i| {
                let trace: Vec<f64> = k
                    .boundary_nodes()
                    .iter()
                    .flat_map(|&n| [hats.value_at(g, i, n), 0.0])
                    .collect();
                local.extend_vec(&trace).into_iter().step_by(2).collect()
            })
            .collect();
        // the four extensions sum to one up to solver rounding; remove that rounding
        let sum: Vec<f64> = (0..k.n_nodes()).map(|a| ext.iter().map(|e| e[a]).sum()).collect();
        for (&i, e) in vertices.iter().zip(&ext) {
            let w = &hats.regions[i];
            for (a, &n) in k.nodes().iter().enumerate() {
                let p = w.local_of(g, n).expect("block lies in the vertex neighborhood");
                values[i][p] = e[a] / sum[a];
            }
        }
    }
    Ok(PartitionOfUnity { kind: PouKind::Multiscale, regions: hats.regions, values })
}

pub fn build_pou(g: &GridHierarchy, c: &CoeffField, kind: PouKind) -> Result<PartitionOfUnity> {
    match kind {
        PouKind::Bilinear => Ok(pou_bilinear(g)),
        PouKind::Multiscale => pou_multiscale(g, c),
    }
}

/// Per-cell `sum_i (lambda + 2 mu) |grad chi_i|^2`, the gradient term averaged over 2x2 Gauss points.
pub fn weight_kappa_tilde(g: &GridHierarchy, c: &CoeffField, pou: &PartitionOfUnity) -> Result<Vec<f64>> {
    c.check_grid(g)?;
    let (hx, hy) = (g.hx(), g.hy());
    let mut kappa = vec![0.0; g.n_fine_cells()];
    for (r, v) in pou.regions.iter().zip(&pou.values) {
        for (cell, corners) in r.cells(g) {
            let chi = corners.map(|n| v[n]);
            let mut acc = 0.0;
            for &xi in &GAUSS2 {
                for &eta in &GAUSS2 {
                    let dn = shape_grad_ref(xi, eta);
                    let (mut gx, mut gy) = (0.0, 0.0);
                    for a in 0..4 {
                        gx += chi[a] * dn[a][0] / hx;
                        gy += chi[a] * dn[a][1] / hy;
                    }
                    acc += 0.25 * (gx * gx + gy * gy);
                }
            }
            kappa[cell] += c.pmod(cell) * acc;
        }
    }
    Ok(kappa)
}

/// Which local eigenproblem produced a spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PencilKind {
    /// Neighborhood stiffness against the `kappa~`-weighted mass.
    Cg,
    /// Block stiffness against the scaled boundary mass.
    Dg,
    /// Stiffness of restricted snapshots against the mass on the enlarged neighborhood.
    CgMixed,
    /// Stiffness and mass both on the enlarged neighborhood.
    CgExtended,
    /// Enlarged-block stiffness against the `(lambda + 2 mu)`-weighted volume mass.
    DgVolume,
    /// Enlarged-block stiffness against the averaged-coefficient boundary mass.
    DgBoundary,
}

impl PencilKind {
    pub fn is_cg(self) -> bool {
        matches!(self, PencilKind::Cg | PencilKind::CgMixed | PencilKind::CgExtended)
    }

    pub fn is_oversampled(self) -> bool {
        !matches!(self, PencilKind::Cg | PencilKind::Dg)
    }
}

/// A symmetric pencil `A v = xi M v` in snapshot coordinates.
#[derive(Clone, Debug)]
pub struct Pencil {
    pub kind: PencilKind,
    pub stiffness: DenseSym,
    pub mass: DenseSym,
    /// The mass may be singular on the snapshot space.
    pub semidefinite: bool,
}

fn region_stiffness(g: &GridHierarchy, c: &CoeffField, r: &Region) -> Result<crate::linalg::SparseSym> {
    Ok(assemble_stiffness(g, c, r)?.stiffness().clone())
}

fn check_kappa(g: &GridHierarchy, kappa: &[f64]) -> Result<()> {
    if kappa.len() != g.n_fine_cells() {
        return Err(Error::DimensionMismatch(format!(
            "weight has {} cells, grid has {}",
            kappa.len(),
            g.n_fine_cells()
        )));
    }
    Ok(())
}

fn check_rows(snap_rows: usize, r: &Region) -> Result<()> {
    if snap_rows != r.n_dofs() {
        return Err(Error::DimensionMismatch(format!(
            "snapshot columns have {snap_rows} rows, region has {} dofs",
            r.n_dofs()
        )));
    }
    Ok(())
}

pub fn spectral_cg(g: &GridHierarchy, c: &CoeffField, snap: &SnapshotSpace, kappa: &[f64]) -> Result<Pencil> {
    check_kappa(g, kappa)?;
    let r = snap.region();
    check_rows(snap.columns().nrows(), r)?;
    let a = triple_product(snap.columns(), &region_stiffness(g, c, r)?)?;
    let m = triple_product(snap.columns(), &weighted_mass(g, r, |cell| kappa[cell]))?;
    Ok(Pencil { kind: PencilKind::Cg, stiffness: a, mass: m, semidefinite: false })
}

/// Boundary mass of `r` applied to columns given on all of `r`'s dofs.
fn boundary_gram(
    g: &GridHierarchy,
    r: &Region,
    cols: &DMatrix<f64>,
    weight: impl Fn(&crate::grid::PerimeterSegment) -> f64,
) -> Result<DenseSym> {
    let rows: Vec<usize> = r.boundary_local().iter().flat_map(|&n| [2 * n, 2 * n + 1]).collect();
    let sb = cols.select_rows(rows.iter());
    triple_product_dense(&sb, &boundary_mass(g, r, weight))
}

pub fn spectral_dg(g: &GridHierarchy, c: &CoeffField, snap: &SnapshotSpace) -> Result<Pencil> {
    let r = snap.region();
    check_rows(snap.columns().nrows(), r)?;
    let a = triple_product(snap.columns(), &region_stiffness(g, c, r)?)?;
    let kmax = r
        .perimeter_segments(g)
        .iter()
        .map(|s| segment_pmod_average(g, c, s))
        .fold(0.0, f64::max);
    let scale = kmax / g.coarse_h();
    let m = boundary_gram(g, r, snap.columns(), |_| scale)?;
    Ok(Pencil { kind: PencilKind::Dg, stiffness: a, mass: m, semidefinite: true })
}

/// Pencils of the oversampled constructions; `snap` must carry extended columns.
pub fn spectral_oversampled(
    kind: PencilKind,
    g: &GridHierarchy,
    c: &CoeffField,
    snap: &SnapshotSpace,
    kappa: Option<&[f64]>,
) -> Result<Pencil> {
    let ext = snap
        .extended()
        .ok_or_else(|| Error::InvalidArgument("oversampled pencil needs extended snapshot columns".into()))?;
    let (rp, rplus) = (&ext.region, &ext.columns);
    check_rows(rplus.nrows(), rp)?;
    let kappa_or = || -> Result<&[f64]> {
        let k = kappa.ok_or_else(|| Error::InvalidArgument("continuous pencils need the kappa~ weight".into()))?;
        check_kappa(g, k)?;
        Ok(k)
    };
    let inv_h = 1.0 / g.coarse_h();
    let (a, m, semidefinite) = match kind {
        PencilKind::CgMixed => {
            let k = kappa_or()?;
            let a = triple_product(snap.columns(), &region_stiffness(g, c, snap.region())?)?;
            let m = triple_product(rplus, &weighted_mass(g, rp, |cell| k[cell]))?;
            (a, m, false)
        }
        PencilKind::CgExtended => {
            let k = kappa_or()?;
            let a = triple_product(rplus, &region_stiffness(g, c, rp)?)?;
            let m = triple_product(rplus, &weighted_mass(g, rp, |cell| k[cell]))?;
            (a, m, false)
        }
        PencilKind::DgVolume => {
            let a = triple_product(rplus, &region_stiffness(g, c, rp)?)?;
            let m = triple_product(rplus, &weighted_mass(g, rp, |cell| c.pmod(cell) * inv_h))?;
            (a, m, false)
        }
        PencilKind::DgBoundary => {
            let a = triple_product(rplus, &region_stiffness(g, c, rp)?)?;
            let m = boundary_gram(g, rp, rplus, |s| segment_pmod_average(g, c, s) * inv_h)?;
            (a, m, true)
        }
        PencilKind::Cg | PencilKind::Dg => {
            return Err(Error::InvalidArgument(format!("{kind:?} is not an oversampled pencil")));
        }
    };
    Ok(Pencil { kind, stiffness: a, mass: m, semidefinite })
}

/// Solved local spectrum with its modes mapped to fine coordinates on the base region.
#[derive(Clone, Debug)]
pub struct LocalSpectrum {
    kind: PencilKind,
    region: Region,
    /// Finite eigenvalues, ascending.
    values: Vec<f64>,
    n_total: usize,
    /// Fine-coordinate modes: finite ones in eigenvalue order, then infinite ones.
    modes: DMatrix<f64>,
}

/// Solves the pencil and keeps at most `keep` leading modes (all when `None`).
pub fn solve_pencil(pencil: &Pencil, snap: &SnapshotSpace, keep: Option<usize>) -> Result<LocalSpectrum> {
    let s = snap.columns();
    if s.ncols() != pencil.stiffness.n() {
        return Err(Error::DimensionMismatch(format!(
            "pencil has size {}, snapshot space {}",
            pencil.stiffness.n(),
            s.ncols()
        )));
    }
    let eig = eig_gen_sym(&pencil.stiffness, &pencil.mass, pencil.semidefinite)?;
    let n_total = eig.n_total();
    let n_keep = keep.map_or(n_total, |k| k.min(n_total));
    let n_fin = n_keep.min(eig.n_finite());
    let mut coeffs = DMatrix::zeros(s.ncols(), n_keep);
    coeffs.columns_mut(0, n_fin).copy_from(&eig.vectors.columns(0, n_fin));
    if n_keep > n_fin {
        coeffs.columns_mut(n_fin, n_keep - n_fin).copy_from(&eig.infinite.columns(0, n_keep - n_fin));
    }
    Ok(LocalSpectrum {
        kind: pencil.kind,
        region: snap.region().clone(),
        values: eig.values,
        n_total,
        modes: s * coeffs,
    })
}

impl LocalSpectrum {
    pub fn kind(&self) -> PencilKind {
        self.kind
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_finite(&self) -> usize {
        self.values.len()
    }

    /// Dimension of the snapshot space.
    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn modes(&self) -> &DMatrix<f64> {
        &self.modes
    }

    /// Number of eigenvalues strictly below `tau`.
    pub fn count_below(&self, tau: f64) -> usize {
        self.values.iter().take_while(|&&x| x < tau).count()
    }

    /// Smallest discarded eigenvalue when keeping `l` modes.
    pub fn lambda_star(&self, l: usize) -> f64 {
        self.values.get(l).copied().unwrap_or(f64::INFINITY)
    }

    /// The first `l` modes; with `chi`, each is multiplied nodewise by the
    /// partition-of-unity function given on the region's nodes.
    pub fn offline(&self, l: usize, chi: Option<&[f64]>) -> Result<OfflineSpace> {
        if l > self.n_finite() && l != self.n_total {
            return Err(Error::Basis(format!(
                "{l} modes requested but only {} finite eigenvalues (of {})",
                self.n_finite(),
                self.n_total
            )));
        }
        if l > self.modes.ncols() {
            return Err(Error::Basis(format!("{l} modes requested but only {} were retained", self.modes.ncols())));
        }
        let mut columns = self.modes.columns(0, l).into_owned();
        if let Some(chi) = chi {
            if chi.len() != self.region.n_nodes() {
                return Err(Error::DimensionMismatch(format!(
                    "partition function has {} values, region has {} nodes",
                    chi.len(),
                    self.region.n_nodes()
                )));
            }
            for mut col in columns.column_iter_mut() {
                for (n, &x) in chi.iter().enumerate() {
                    col[2 * n] *= x;
                    col[2 * n + 1] *= x;
                }
            }
        }
        Ok(OfflineSpace {
            kind: self.kind,
            region: self.region.clone(),
            eigenvalues: self.values.clone(),
            columns,
            lambda_star: self.lambda_star(l),
        })
    }
}

/// Reduced basis of one region.
#[derive(Clone, Debug)]
pub struct OfflineSpace {
    pub kind: PencilKind,
    pub region: Region,
    /// All finite eigenvalues of the local pencil, ascending.
    pub eigenvalues: Vec<f64>,
    /// Basis functions as columns in region-local fine dofs.
    pub columns: DMatrix<f64>,
    /// Smallest discarded eigenvalue (`+inf` when nothing finite is discarded).
    pub lambda_star: f64,
}

impl OfflineSpace {
    pub fn len(&self) -> usize {
        self.columns.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.ncols() == 0
    }
}

/// Solves a pencil and extracts `l` offline functions.
pub fn build_offline(pencil: &Pencil, snap: &SnapshotSpace, l: usize, chi: Option<&[f64]>) -> Result<OfflineSpace> {
    solve_pencil(pencil, snap, Some(l))?.offline(l, chi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::gen_model1_like;
    use crate::snapshot::{snapshots_type1, snapshots_type2};

    #[test]
    fn bilinear_hats() {
        let g = GridHierarchy::new(1.0, 1.0, 3, 2, 4).unwrap();
        let pou = pou_bilinear(&g);
        for i in 0..g.n_coarse_nodes() {
            for j in 0..g.n_coarse_nodes() {
                let v = pou.value_at(&g, i, g.coarse_node_fine(j));
                assert_eq!(v, if i == j { 1.0 } else { 0.0 });
            }
        }
        let center = g.fine_node(6, 2);
        let b = g.block(1, 0);
        for i in g.block_vertices(b) {
            assert_eq!(pou.value_at(&g, i, center), 0.25);
        }
        assert!(pou.sum(&g).iter().all(|s| (s - 1.0).abs() < 1e-14));
    }

    #[test]
    fn multiscale_partition_and_difference() {
        let g = GridHierarchy::new(1.0, 1.0, 3, 3, 6).unwrap();
        let c = gen_model1_like(&g, 1.0, 1e4, 3).unwrap();
        let ms = pou_multiscale(&g, &c).unwrap();
        assert!(ms.sum(&g).iter().all(|s| (s - 1.0).abs() < 1e-12));
        let bl = pou_bilinear(&g);
        let diff = (0..ms.len())
            .flat_map(|i| ms.values(i).iter().zip(bl.values(i)).map(|(a, b)| (a - b).abs()).collect::<Vec<_>>())
            .fold(0.0, f64::max);
        assert!(diff > 1e-3);
    }

    #[test]
    fn kappa_tilde_scales_linearly() {
        let g = GridHierarchy::new(1.0, 1.0, 2, 2, 3).unwrap();
        let c = gen_model1_like(&g, 1.0, 10.0, 1).unwrap();
        let pou = pou_bilinear(&g);
        let k1 = weight_kappa_tilde(&g, &c, &pou).unwrap();
        let k10 = weight_kappa_tilde(&g, &c.scaled(10.0).unwrap(), &pou).unwrap();
        for (a, b) in k1.iter().zip(&k10) {
            assert!(*a > 0.0);
            assert!((b - 10.0 * a).abs() <= 1e-12 * b);
        }
    }

    #[test]
    fn kappa_tilde_closed_form_on_homogeneous_cell() {
        // unit coarse blocks, one fine cell each: hats are the cell's own shape functions
        let g = GridHierarchy::new(2.0, 2.0, 2, 2, 1).unwrap();
        let c = CoeffField::constant(&g, 1.0 - 2.0 * 0.25, 0.25).unwrap();
        let k = weight_kappa_tilde(&g, &c, &pou_bilinear(&g)).unwrap();
        // sum over corners of the Gauss-averaged |grad N_a|^2 on the unit square is 4 * (1/3 + 1/3) = 8/3
        for v in k {
            assert!((v - 8.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rigid_modes_in_both_pencils() {
        let g = GridHierarchy::new(1.0, 1.0, 3, 3, 3).unwrap();
        let c = gen_model1_like(&g, 1.0, 1e3, 5).unwrap();
        let kappa = weight_kappa_tilde(&g, &c, &pou_bilinear(&g)).unwrap();
        let w = g.neighborhood(g.coarse_node(1, 1)).unwrap();
        let p = spectral_cg(&g, &c, &snapshots_type1(&g, &c, &w).unwrap(), &kappa).unwrap();
        let e = eig_gen_sym(&p.stiffness, &p.mass, p.semidefinite).unwrap();
        let xmax = e.values.last().unwrap();
        assert_eq!(e.values.iter().filter(|&&x| x.abs() <= 1e-10 * xmax).count(), 3);

        let k = g.block_region(g.block(1, 1)).unwrap();
        let p = spectral_dg(&g, &c, &snapshots_type1(&g, &c, &k).unwrap()).unwrap();
        let e = eig_gen_sym(&p.stiffness, &p.mass, p.semidefinite).unwrap();
        let xmax = e.values.last().unwrap();
        assert_eq!(e.values.iter().filter(|&&x| x.abs() <= 1e-10 * xmax).count(), 3);
        assert_eq!(e.n_finite(), 2 * k.boundary_nodes().len());
    }

    #[test]
    fn offline_truncation_and_lambda_star() {
        let g = GridHierarchy::new(1.0, 1.0, 3, 3, 4).unwrap();
        let c = gen_model1_like(&g, 1.0, 1e3, 8).unwrap();
        let k = g.block_region(4).unwrap();
        let snap = snapshots_type2(&g, &c, &k).unwrap();
        let p = spectral_dg(&g, &c, &snap).unwrap();
        let spec = solve_pencil(&p, &snap, None).unwrap();
        let mut last = f64::INFINITY;
        for l in 3..10 {
            let off = spec.offline(l, None).unwrap();
            assert_eq!(off.lambda_star, spec.values()[l]);
            assert!(1.0 / off.lambda_star <= 1.0 / last || l == 3);
            last = off.lambda_star;
        }
        let three = spec.offline(3, None).unwrap();
        let a = assemble_stiffness(&g, &c, &k).unwrap();
        for col in three.columns.column_iter() {
            assert!(a.energy(col.as_slice()) < 1e-9);
        }
        let all = spec.offline(spec.n_total(), None).unwrap();
        assert_eq!(all.lambda_star, f64::INFINITY);
        assert!(spec.offline(spec.n_total() + 1, None).is_err());
        let built = build_offline(&p, &snap, 5, None).unwrap();
        assert_eq!(built.lambda_star, spec.values()[5]);
    }
}
