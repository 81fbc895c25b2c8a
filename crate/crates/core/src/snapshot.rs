//! Local snapshot spaces: every fine function on a region, or the discrete
//! harmonic extensions of fine boundary deltas, optionally computed on an
//! oversampled region and restricted back.

use nalgebra::DMatrix;

use crate::coeff::CoeffField;
use crate::error::{Error, Result};
use crate::fem::{assemble_stiffness, LocalDirichlet};
use crate::grid::{GridHierarchy, Region};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotKind {
    /// Every fine-grid function on the region.
    AllFine,
    /// Harmonic extensions of fine boundary deltas.
    Harmonic,
}

/// Columns computed on an enlarged region, with the subset surviving the rank filter.
#[derive(Clone, Debug)]
pub struct Extended {
    pub region: Region,
    pub columns: DMatrix<f64>,
    /// Indices of the original extended columns kept after filtering.
    pub kept: Vec<usize>,
}

/// Snapshot vectors of one region, stored as columns in region-local dofs.
#[derive(Clone, Debug)]
pub struct SnapshotSpace {
    region: Region,
    kind: SnapshotKind,
    columns: DMatrix<f64>,
    extended: Option<Extended>,
}

impl SnapshotSpace {
    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn kind(&self) -> SnapshotKind {
        self.kind
    }

    /// Snapshot columns on the base region (restricted ones when oversampled).
    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn extended(&self) -> Option<&Extended> {
        self.extended.as_ref()
    }

    pub fn len(&self) -> usize {
        self.columns.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.ncols() == 0
    }
}

pub fn snapshots_type1(g: &GridHierarchy, c: &CoeffField, r: &Region) -> Result<SnapshotSpace> {
    c.check_grid(g)?;
    let n = r.n_dofs();
    Ok(SnapshotSpace {
        region: r.clone(),
        kind: SnapshotKind::AllFine,
        columns: DMatrix::identity(n, n),
        extended: None,
    })
}

pub fn snapshots_type2(g: &GridHierarchy, c: &CoeffField, r: &Region) -> Result<SnapshotSpace> {
    let op = assemble_stiffness(g, c, r)?;
    let local = LocalDirichlet::new(&op)?;
    Ok(SnapshotSpace {
        region: r.clone(),
        kind: SnapshotKind::Harmonic,
        columns: local.extend_all(),
        extended: None,
    })
}

pub fn snapshots(g: &GridHierarchy, c: &CoeffField, r: &Region, kind: SnapshotKind) -> Result<SnapshotSpace> {
    match kind {
        SnapshotKind::AllFine => snapshots_type1(g, c, r),
        SnapshotKind::Harmonic => snapshots_type2(g, c, r),
    }
}

/// Relative drop tolerance of the rank filter on restricted snapshots.
pub const RANK_DROP_TOL: f64 = 1e-10;

/// Snapshots computed on `r` grown by `layers` coarse rings and restricted to `r`.
///
/// Restricted columns that are numerically dependent on earlier kept ones are
/// removed from both the restricted and the extended sets.
pub fn snapshots_oversampled(
    g: &GridHierarchy,
    c: &CoeffField,
    r: &Region,
    layers: usize,
    kind: SnapshotKind,
) -> Result<SnapshotSpace> {
    let rp = g.oversample(r, layers);
    let ext = snapshots(g, c, &rp, kind)?;
    let rows: Vec<usize> = rp
        .restriction_map(g, r)?
        .into_iter()
        .flat_map(|n| [2 * n, 2 * n + 1])
        .collect();
    let full = ext.columns;
    let restricted = full.select_rows(rows.iter());
    let kept = independent_columns(&restricted, RANK_DROP_TOL);
    if kept.is_empty() {
        return Err(Error::Basis("all restricted snapshots vanish".into()));
    }
    Ok(SnapshotSpace {
        region: r.clone(),
        kind,
        columns: restricted.select_columns(kept.iter()),
        extended: Some(Extended { region: rp, columns: full.select_columns(kept.iter()), kept }),
    })
}

/// Column-pivoted modified Gram-Schmidt; returns the kept column indices in
/// increasing order. A column is dropped when its remaining norm falls below
/// `tol` times the largest original column norm.
pub fn independent_columns(m: &DMatrix<f64>, tol: f64) -> Vec<usize> {
    let ncols = m.ncols();
    let mut work = m.clone();
    let mut norms: Vec<f64> = (0..ncols).map(|j| work.column(j).norm_squared()).collect();
    let scale = norms.iter().cloned().fold(0.0, f64::max);
    if scale == 0.0 {
        return Vec::new();
    }
    let thresh = tol * tol * scale;
    let mut active: Vec<bool> = vec![true; ncols];
    let mut kept = Vec::new();
    loop {
        let next = (0..ncols)
            .filter(|&j| active[j])
            .max_by(|&a, &b| norms[a].total_cmp(&norms[b]).then(b.cmp(&a)));
        let Some(p) = next else { break };
        // recompute to avoid cancellation in the running norms
        let np = work.column(p).norm_squared();
        active[p] = false;
        if np <= thresh {
            break;
        }
        kept.push(p);
        let q = work.column(p) / np.sqrt();
        for j in 0..ncols {
            if active[j] {
                let d = q.dot(&work.column(j));
                let mut col = work.column_mut(j);
                col.axpy(-d, &q, 1.0);
                norms[j] = col.norm_squared();
            }
        }
    }
    kept.sort_unstable();
    kept
}
