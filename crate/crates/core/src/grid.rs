//! Structured coarse grid with a conforming tensor-product fine refinement.
//!
//! Fine nodes, fine cells, coarse nodes and coarse blocks are all numbered
//! lexicographically with x running fastest. Vector degrees of freedom are
//! interleaved: node `n` owns dofs `2n` (x component) and `2n + 1`.

use crate::error::{Error, Result};

/// Half-open rectangle of coarse blocks `[x0, x1) x [y0, y1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BlockRect {
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
}

impl BlockRect {
    pub fn n_blocks(&self) -> usize {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn contains(&self, other: &BlockRect) -> bool {
        self.x0 <= other.x0 && self.y0 <= other.y0 && self.x1 >= other.x1 && self.y1 >= other.y1
    }

    pub fn contains_block(&self, bx: usize, by: usize) -> bool {
        bx >= self.x0 && bx < self.x1 && by >= self.y0 && by < self.y1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RegionKind {
    Neighborhood,
    Block,
    OversampledNeighborhood,
    OversampledBlock,
    /// The whole domain, used for global assembly through the region API.
    Domain,
}

/// A rectangular union of coarse blocks together with its fine-node index sets.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    kind: RegionKind,
    owner: usize,
    rect: BlockRect,
    /// first fine node column/row of the region
    i0: usize,
    j0: usize,
    /// fine cells per axis
    cx: usize,
    cy: usize,
    nodes: Vec<usize>,
    boundary_local: Vec<usize>,
    boundary_nodes: Vec<usize>,
    dof_map: Vec<usize>,
}

impl Region {
    pub fn kind(&self) -> RegionKind {
        self.kind
    }

    /// Coarse node index for neighborhoods, block index for blocks.
    pub fn owner(&self) -> usize {
        self.owner
    }

    pub fn rect(&self) -> BlockRect {
        self.rect
    }

    /// Global fine node ids, lexicographic.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Global fine node ids on the region boundary, lexicographic.
    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    /// Positions of the boundary nodes within [`Region::nodes`].
    pub fn boundary_local(&self) -> &[usize] {
        &self.boundary_local
    }

    /// Positions of the interior nodes within [`Region::nodes`].
    pub fn interior_local(&self) -> Vec<usize> {
        let mut is_bnd = vec![false; self.nodes.len()];
        for &b in &self.boundary_local {
            is_bnd[b] = true;
        }
        (0..self.nodes.len()).filter(|&k| !is_bnd[k]).collect()
    }

    /// Local dof -> global dof.
    pub fn dof_map(&self) -> &[usize] {
        &self.dof_map
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_map.len()
    }

    /// Fine cells per axis.
    pub fn cells_per_axis(&self) -> (usize, usize) {
        (self.cx, self.cy)
    }

    /// Global fine-grid (column, row) of the region's lower-left node.
    pub fn origin(&self) -> (usize, usize) {
        (self.i0, self.j0)
    }

    pub fn local_node(&self, a: usize, b: usize) -> usize {
        b * (self.cx + 1) + a
    }

    /// Local node index of a global fine node, if it lies in the region.
    pub fn local_of(&self, g: &GridHierarchy, node: usize) -> Option<usize> {
        let (i, j) = g.fine_node_ij(node);
        if i < self.i0 || j < self.j0 || i > self.i0 + self.cx || j > self.j0 + self.cy {
            return None;
        }
        Some(self.local_node(i - self.i0, j - self.j0))
    }

    /// Iterates the fine cells of the region as `(global cell, local corner nodes)`.
    /// Corners are ordered (0,0), (1,0), (0,1), (1,1).
    pub fn cells<'a>(&'a self, g: &'a GridHierarchy) -> impl Iterator<Item = (usize, [usize; 4])> + 'a {
        (0..self.cy).flat_map(move |b| {
            (0..self.cx).map(move |a| {
                let cell = g.cell(self.i0 + a, self.j0 + b);
                let n00 = self.local_node(a, b);
                let n01 = self.local_node(a, b + 1);
                (cell, [n00, n00 + 1, n01, n01 + 1])
            })
        })
    }

    /// Positions of `inner`'s nodes inside `self` (which must contain it).
    pub fn restriction_map(&self, g: &GridHierarchy, inner: &Region) -> Result<Vec<usize>> {
        inner
            .nodes
            .iter()
            .map(|&n| {
                self.local_of(g, n).ok_or_else(|| {
                    Error::InvalidArgument("inner region is not contained in outer region".into())
                })
            })
            .collect()
    }

    /// Fine perimeter segments as pairs of local node indices, plus the
    /// fine cell on the inside of each segment.
    pub fn perimeter_segments(&self, g: &GridHierarchy) -> Vec<PerimeterSegment> {
        let mut segs = Vec::with_capacity(2 * (self.cx + self.cy));
        let (cx, cy) = (self.cx, self.cy);
        for a in 0..cx {
            segs.push(PerimeterSegment {
                nodes: [self.local_node(a, 0), self.local_node(a + 1, 0)],
                inner_cell: g.cell(self.i0 + a, self.j0),
                side: Side::South,
            });
            segs.push(PerimeterSegment {
                nodes: [self.local_node(a, cy), self.local_node(a + 1, cy)],
                inner_cell: g.cell(self.i0 + a, self.j0 + cy - 1),
                side: Side::North,
            });
        }
        for b in 0..cy {
            segs.push(PerimeterSegment {
                nodes: [self.local_node(0, b), self.local_node(0, b + 1)],
                inner_cell: g.cell(self.i0, self.j0 + b),
                side: Side::West,
            });
            segs.push(PerimeterSegment {
                nodes: [self.local_node(cx, b), self.local_node(cx, b + 1)],
                inner_cell: g.cell(self.i0 + cx - 1, self.j0 + b),
                side: Side::East,
            });
        }
        segs
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    South,
    North,
    West,
    East,
}

/// One fine edge on a region's perimeter.
#[derive(Clone, Copy, Debug)]
pub struct PerimeterSegment {
    pub nodes: [usize; 2],
    pub inner_cell: usize,
    pub side: Side,
}

/// Orientation of a coarse edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeDir {
    /// x = const, normal (1, 0)
    Vertical,
    /// y = const, normal (0, 1)
    Horizontal,
}

/// A coarse edge with the blocks on either side.
///
/// `plus` lies on the side opposite to the normal (left/below), `minus` on
/// the side the normal points into. On the domain boundary exactly one of
/// them is set and the normal points outward.
#[derive(Clone, Debug)]
pub struct CoarseEdge {
    pub id: usize,
    pub dir: EdgeDir,
    pub plus: Option<usize>,
    pub minus: Option<usize>,
    /// Global fine nodes along the edge, increasing coordinate.
    pub nodes: Vec<usize>,
    pub normal: [f64; 2],
}

impl CoarseEdge {
    pub fn is_boundary(&self) -> bool {
        self.plus.is_none() || self.minus.is_none()
    }

    /// The block whose trace plays the role of `G+` (the only block on a boundary edge).
    pub fn primary_block(&self) -> usize {
        self.plus.or(self.minus).expect("edge has at least one block")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridHierarchy {
    lx: f64,
    ly: f64,
    ncx: usize,
    ncy: usize,
    nf: usize,
}

impl GridHierarchy {
    /// `ncx x ncy` coarse blocks over `[0, lx] x [0, ly]`, each refined into `nf x nf` fine cells.
    pub fn new(lx: f64, ly: f64, ncx: usize, ncy: usize, nf: usize) -> Result<Self> {
        if !(lx > 0.0 && lx.is_finite()) || !(ly > 0.0 && ly.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "domain extents must be positive, got ({lx}, {ly})"
            )));
        }
        if ncx == 0 || ncy == 0 || nf == 0 {
            return Err(Error::InvalidArgument(format!(
                "cell counts must be >= 1, got ncx={ncx} ncy={ncy} nf={nf}"
            )));
        }
        Ok(Self { lx, ly, ncx, ncy, nf })
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn ncx(&self) -> usize {
        self.ncx
    }
    pub fn ncy(&self) -> usize {
        self.ncy
    }
    pub fn nf(&self) -> usize {
        self.nf
    }

    pub fn fine_nx(&self) -> usize {
        self.ncx * self.nf
    }
    pub fn fine_ny(&self) -> usize {
        self.ncy * self.nf
    }
    pub fn hx(&self) -> f64 {
        self.lx / self.fine_nx() as f64
    }
    pub fn hy(&self) -> f64 {
        self.ly / self.fine_ny() as f64
    }
    /// Fine mesh size (the smaller side for non-square cells).
    pub fn h(&self) -> f64 {
        self.hx().min(self.hy())
    }
    pub fn coarse_hx(&self) -> f64 {
        self.lx / self.ncx as f64
    }
    pub fn coarse_hy(&self) -> f64 {
        self.ly / self.ncy as f64
    }
    /// Coarse mesh size (the larger side for non-square blocks).
    pub fn coarse_h(&self) -> f64 {
        self.coarse_hx().max(self.coarse_hy())
    }

    pub fn n_fine_nodes(&self) -> usize {
        (self.fine_nx() + 1) * (self.fine_ny() + 1)
    }
    pub fn n_fine_dofs(&self) -> usize {
        2 * self.n_fine_nodes()
    }
    pub fn n_fine_cells(&self) -> usize {
        self.fine_nx() * self.fine_ny()
    }
    pub fn n_coarse_nodes(&self) -> usize {
        (self.ncx + 1) * (self.ncy + 1)
    }
    pub fn n_blocks(&self) -> usize {
        self.ncx * self.ncy
    }
    /// Nodes of one coarse block.
    pub fn block_nodes(&self) -> usize {
        (self.nf + 1) * (self.nf + 1)
    }
    /// Dofs of the broken (blockwise discontinuous) fine space.
    pub fn n_broken_dofs(&self) -> usize {
        self.n_blocks() * 2 * self.block_nodes()
    }

    pub fn fine_node(&self, i: usize, j: usize) -> usize {
        j * (self.fine_nx() + 1) + i
    }
    pub fn fine_node_ij(&self, n: usize) -> (usize, usize) {
        let w = self.fine_nx() + 1;
        (n % w, n / w)
    }
    pub fn node_coords(&self, n: usize) -> [f64; 2] {
        let (i, j) = self.fine_node_ij(n);
        [i as f64 * self.hx(), j as f64 * self.hy()]
    }
    pub fn is_boundary_node(&self, n: usize) -> bool {
        let (i, j) = self.fine_node_ij(n);
        i == 0 || j == 0 || i == self.fine_nx() || j == self.fine_ny()
    }

    pub fn cell(&self, i: usize, j: usize) -> usize {
        j * self.fine_nx() + i
    }
    pub fn cell_ij(&self, c: usize) -> (usize, usize) {
        (c % self.fine_nx(), c / self.fine_nx())
    }
    /// Lower-left corner of a fine cell.
    pub fn cell_origin(&self, c: usize) -> [f64; 2] {
        let (i, j) = self.cell_ij(c);
        [i as f64 * self.hx(), j as f64 * self.hy()]
    }
    pub fn cell_block(&self, c: usize) -> usize {
        let (i, j) = self.cell_ij(c);
        self.block(i / self.nf, j / self.nf)
    }

    pub fn coarse_node(&self, ix: usize, iy: usize) -> usize {
        iy * (self.ncx + 1) + ix
    }
    pub fn coarse_node_ij(&self, i: usize) -> (usize, usize) {
        (i % (self.ncx + 1), i / (self.ncx + 1))
    }
    pub fn coarse_node_coords(&self, i: usize) -> [f64; 2] {
        let (ix, iy) = self.coarse_node_ij(i);
        [ix as f64 * self.coarse_hx(), iy as f64 * self.coarse_hy()]
    }
    /// Fine node sitting on coarse node `i`.
    pub fn coarse_node_fine(&self, i: usize) -> usize {
        let (ix, iy) = self.coarse_node_ij(i);
        self.fine_node(ix * self.nf, iy * self.nf)
    }
    pub fn is_boundary_coarse_node(&self, i: usize) -> bool {
        let (ix, iy) = self.coarse_node_ij(i);
        ix == 0 || iy == 0 || ix == self.ncx || iy == self.ncy
    }

    pub fn block(&self, bx: usize, by: usize) -> usize {
        by * self.ncx + bx
    }
    pub fn block_ij(&self, b: usize) -> (usize, usize) {
        (b % self.ncx, b / self.ncx)
    }
    /// Coarse nodes at the corners of block `b`, ordered (0,0), (1,0), (0,1), (1,1).
    pub fn block_vertices(&self, b: usize) -> [usize; 4] {
        let (bx, by) = self.block_ij(b);
        [
            self.coarse_node(bx, by),
            self.coarse_node(bx + 1, by),
            self.coarse_node(bx, by + 1),
            self.coarse_node(bx + 1, by + 1),
        ]
    }

    /// Mask over global dofs that lie on the domain boundary.
    pub fn dirichlet_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n_fine_dofs()];
        for n in 0..self.n_fine_nodes() {
            if self.is_boundary_node(n) {
                mask[2 * n] = true;
                mask[2 * n + 1] = true;
            }
        }
        mask
    }

    fn check_rect(&self, r: &BlockRect) -> Result<()> {
        if r.x0 >= r.x1 || r.y0 >= r.y1 || r.x1 > self.ncx || r.y1 > self.ncy {
            return Err(Error::InvalidArgument(format!("invalid block rectangle {r:?}")));
        }
        Ok(())
    }

    /// Builds the region covering a rectangle of coarse blocks.
    pub fn region(&self, kind: RegionKind, owner: usize, rect: BlockRect) -> Result<Region> {
        self.check_rect(&rect)?;
        let nf = self.nf;
        let (i0, j0) = (rect.x0 * nf, rect.y0 * nf);
        let (cx, cy) = ((rect.x1 - rect.x0) * nf, (rect.y1 - rect.y0) * nf);
        let mut nodes = Vec::with_capacity((cx + 1) * (cy + 1));
        let mut boundary_local = Vec::with_capacity(2 * (cx + cy));
        let mut boundary_nodes = Vec::with_capacity(2 * (cx + cy));
        for b in 0..=cy {
            for a in 0..=cx {
                let g = self.fine_node(i0 + a, j0 + b);
                if a == 0 || b == 0 || a == cx || b == cy {
                    boundary_local.push(nodes.len());
                    boundary_nodes.push(g);
                }
                nodes.push(g);
            }
        }
        let dof_map = nodes.iter().flat_map(|&n| [2 * n, 2 * n + 1]).collect();
        Ok(Region {
            kind,
            owner,
            rect,
            i0,
            j0,
            cx,
            cy,
            nodes,
            boundary_local,
            boundary_nodes,
            dof_map,
        })
    }

    pub fn domain_region(&self) -> Region {
        self.region(
            RegionKind::Domain,
            0,
            BlockRect { x0: 0, x1: self.ncx, y0: 0, y1: self.ncy },
        )
        .expect("whole-domain rectangle is valid")
    }

    /// Coarse neighborhood of coarse node `i`: the blocks sharing that vertex.
    pub fn neighborhood(&self, i: usize) -> Result<Region> {
        if i >= self.n_coarse_nodes() {
            return Err(Error::OutOfRange { index: i, len: self.n_coarse_nodes() });
        }
        let (ix, iy) = self.coarse_node_ij(i);
        let rect = BlockRect {
            x0: ix.saturating_sub(1),
            x1: (ix + 1).min(self.ncx),
            y0: iy.saturating_sub(1),
            y1: (iy + 1).min(self.ncy),
        };
        self.region(RegionKind::Neighborhood, i, rect)
    }

    /// Single coarse block `b`.
    pub fn block_region(&self, b: usize) -> Result<Region> {
        if b >= self.n_blocks() {
            return Err(Error::OutOfRange { index: b, len: self.n_blocks() });
        }
        let (bx, by) = self.block_ij(b);
        self.region(RegionKind::Block, b, BlockRect { x0: bx, x1: bx + 1, y0: by, y1: by + 1 })
    }

    /// Extends `r` by `layers` rings of coarse blocks, clipped at the domain boundary.
    pub fn oversample(&self, r: &Region, layers: usize) -> Region {
        if layers == 0 {
            return r.clone();
        }
        let rect = BlockRect {
            x0: r.rect.x0.saturating_sub(layers),
            x1: (r.rect.x1 + layers).min(self.ncx),
            y0: r.rect.y0.saturating_sub(layers),
            y1: (r.rect.y1 + layers).min(self.ncy),
        };
        let kind = match r.kind {
            RegionKind::Neighborhood | RegionKind::OversampledNeighborhood => {
                RegionKind::OversampledNeighborhood
            }
            RegionKind::Block | RegionKind::OversampledBlock => RegionKind::OversampledBlock,
            RegionKind::Domain => RegionKind::Domain,
        };
        self.region(kind, r.owner, rect).expect("clipped rectangle is valid")
    }

    /// All coarse edges: vertical edges first (row by row), then horizontal ones.
    pub fn coarse_edges(&self) -> Vec<CoarseEdge> {
        let nf = self.nf;
        let mut edges = Vec::with_capacity((self.ncx + 1) * self.ncy + self.ncx * (self.ncy + 1));
        for iy in 0..self.ncy {
            for ix in 0..=self.ncx {
                let plus = (ix > 0).then(|| self.block(ix - 1, iy));
                let minus = (ix < self.ncx).then(|| self.block(ix, iy));
                let normal = if ix == 0 { [-1.0, 0.0] } else { [1.0, 0.0] };
                let nodes = (0..=nf).map(|k| self.fine_node(ix * nf, iy * nf + k)).collect();
                let (plus, minus) = if ix == 0 { (minus, None) } else { (plus, minus) };
                edges.push(CoarseEdge { id: edges.len(), dir: EdgeDir::Vertical, plus, minus, nodes, normal });
            }
        }
        for iy in 0..=self.ncy {
            for ix in 0..self.ncx {
                let plus = (iy > 0).then(|| self.block(ix, iy - 1));
                let minus = (iy < self.ncy).then(|| self.block(ix, iy));
                let normal = if iy == 0 { [0.0, -1.0] } else { [0.0, 1.0] };
                let nodes = (0..=nf).map(|k| self.fine_node(ix * nf + k, iy * nf)).collect();
                let (plus, minus) = if iy == 0 { (minus, None) } else { (plus, minus) };
                edges.push(CoarseEdge { id: edges.len(), dir: EdgeDir::Horizontal, plus, minus, nodes, normal });
            }
        }
        edges
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_grid_dof_counts() {
        let g = GridHierarchy::new(1.0, 1.0, 10, 10, 10).unwrap();
        assert_eq!((g.fine_nx(), g.fine_ny()), (100, 100));
        assert_eq!(g.n_fine_dofs(), 20402);
        let g = GridHierarchy::new(6000.0, 6000.0, 30, 30, 20).unwrap();
        assert_eq!((g.fine_nx(), g.fine_ny()), (600, 600));
        assert_eq!(g.n_fine_dofs(), 722402);
        let g = GridHierarchy::new(1.0, 1.0, 1, 1, 1).unwrap();
        assert_eq!(g.n_blocks(), 1);
        assert_eq!(g.n_fine_nodes(), 4);
        assert_eq!(g.n_fine_dofs(), 8);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(GridHierarchy::new(1.0, 1.0, 0, 1, 1).is_err());
        assert!(GridHierarchy::new(1.0, 1.0, 1, 1, 0).is_err());
        assert!(GridHierarchy::new(-1.0, 1.0, 1, 1, 1).is_err());
        assert!(GridHierarchy::new(1.0, 0.0, 1, 1, 1).is_err());
    }

    #[test]
    fn neighborhood_sizes() {
        let g = GridHierarchy::new(1.0, 1.0, 10, 10, 10).unwrap();
        let w = g.neighborhood(g.coarse_node(5, 5)).unwrap();
        assert_eq!(w.rect().n_blocks(), 4);
        assert_eq!(w.n_nodes(), 441);
        assert_eq!(w.boundary_nodes().len(), 80);

        let c = g.neighborhood(0).unwrap();
        assert_eq!(c.rect().n_blocks(), 1);
        assert_eq!(c.n_nodes(), 121);

        let e = g.neighborhood(g.coarse_node(3, 0)).unwrap();
        assert_eq!(e.rect().n_blocks(), 2);

        assert!(matches!(g.neighborhood(121), Err(Error::OutOfRange { .. })));

        let g1 = GridHierarchy::new(1.0, 1.0, 1, 1, 3).unwrap();
        let whole = g1.neighborhood(0).unwrap();
        assert_eq!(whole.nodes(), g1.domain_region().nodes());
    }

    #[test]
    fn oversampling() {
        let g = GridHierarchy::new(1.0, 1.0, 10, 10, 10).unwrap();
        let k = g.block_region(g.block(4, 4)).unwrap();
        assert_eq!(g.oversample(&k, 0), k);
        let kp = g.oversample(&k, 1);
        assert_eq!(kp.rect().n_blocks(), 9);
        assert_eq!(kp.n_nodes(), 31 * 31);
        assert_eq!(kp.boundary_nodes().len(), 120);
        assert_eq!(kp.kind(), RegionKind::OversampledBlock);

        let corner = g.block_region(0).unwrap();
        assert_eq!(g.oversample(&corner, 1).rect().n_blocks(), 4);
    }

    #[test]
    fn block_count_identity() {
        for (ncx, ncy) in [(1, 1), (3, 2), (4, 7), (10, 10)] {
            let g = GridHierarchy::new(2.0, 1.0, ncx, ncy, 2).unwrap();
            let total: usize = (0..g.n_coarse_nodes())
                .map(|i| g.neighborhood(i).unwrap().rect().n_blocks())
                .sum();
            assert_eq!(total, 4 * g.n_blocks());
        }
    }

    #[test]
    fn every_fine_cell_in_one_block() {
        let g = GridHierarchy::new(1.0, 1.0, 3, 2, 4).unwrap();
        let mut count = vec![0usize; g.n_fine_cells()];
        for b in 0..g.n_blocks() {
            let r = g.block_region(b).unwrap();
            for (cell, _) in r.cells(&g) {
                assert_eq!(g.cell_block(cell), b);
                count[cell] += 1;
            }
        }
        assert!(count.iter().all(|&c| c == 1));
    }

    #[test]
    fn coarse_edges_are_conforming() {
        let g = GridHierarchy::new(1.0, 1.0, 3, 2, 4).unwrap();
        let edges = g.coarse_edges();
        assert_eq!(edges.len(), 4 * 2 + 3 * 3);
        for e in &edges {
            assert_eq!(e.nodes.len(), g.nf() + 1);
            // interior edges have both sides, normal points from plus to minus
            if let (Some(p), Some(m)) = (e.plus, e.minus) {
                let (px, py) = g.block_ij(p);
                let (mx, my) = g.block_ij(m);
                assert_eq!((mx as f64 - px as f64, my as f64 - py as f64), (e.normal[0], e.normal[1]));
            }
        }
        assert_eq!(edges.iter().filter(|e| e.is_boundary()).count(), 2 * (3 + 2));
    }
}
