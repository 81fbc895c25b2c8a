use super::assembly::corner_dofs;
use super::dg::block_offset;
use super::element::{shape, Q1Element, GAUSS3};
use crate::coeff::CoeffField;
use crate::error::{Error, Result};
use crate::grid::GridHierarchy;

/// Which fine space a vector lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NormMode {
    /// Conforming global Q1 space.
    Cg,
    /// Broken blockwise space.
    Dg,
}

impl NormMode {
    pub fn n_dofs(self, g: &GridHierarchy) -> usize {
        match self {
            NormMode::Cg => g.n_fine_dofs(),
            NormMode::Dg => g.n_broken_dofs(),
        }
    }
}

/// Calls `f(cell, dofs)` for every fine cell with its 8 dofs in the given layout.
pub fn for_each_cell(g: &GridHierarchy, mode: NormMode, mut f: impl FnMut(usize, [usize; 8])) {
    match mode {
        NormMode::Cg => {
            for (cell, corners) in g.domain_region().cells(g) {
                f(cell, corner_dofs(corners));
            }
        }
        NormMode::Dg => {
            for b in 0..g.n_blocks() {
                let off = block_offset(g, b);
                let k = g.block_region(b).expect("block in range");
                for (cell, corners) in k.cells(g) {
                    f(cell, corner_dofs(corners).map(|d| d + off));
                }
            }
        }
    }
}

fn check_len(g: &GridHierarchy, mode: NormMode, u: &[f64]) -> Result<()> {
    let n = mode.n_dofs(g);
    if u.len() != n {
        return Err(Error::DimensionMismatch(format!("{mode:?} vector has {} entries, expected {n}", u.len())));
    }
    Ok(())
}

/// `int w(cell) |u|^2` and `a_H(u, u)` accumulated over fine cells.
fn weighted_sq_and_energy(g: &GridHierarchy, c: &CoeffField, u: &[f64], mode: NormMode, square_weight: bool) -> (f64, f64) {
    let el = Q1Element::new(g.hx(), g.hy());
    let (mut l2, mut en) = (0.0, 0.0);
    for_each_cell(g, mode, |cell, dofs| {
        let x = nalgebra::SVector::<f64, 8>::from_fn(|a, _| u[dofs[a]]);
        let k = c.pmod(cell);
        let w = if square_weight { k * k } else { k };
        l2 += (x.transpose() * el.vector_mass(w) * x)[(0, 0)];
        en += (x.transpose() * el.stiffness(c.lambda()[cell], c.mu()[cell]) * x)[(0, 0)];
    });
    (l2, en)
}

/// Relative weighted errors `(e_L2, e_H1)` of `u_ms` against the reference `u_ref`.
///
/// Conforming mode weights the L2 integrand by `(lambda + 2 mu)^2`, broken mode
/// by `(lambda + 2 mu)`; both use the elasticity energy for `e_H1`.
pub fn error_norms(g: &GridHierarchy, c: &CoeffField, u_ms: &[f64], u_ref: &[f64], mode: NormMode) -> Result<(f64, f64)> {
    c.check_grid(g)?;
    check_len(g, mode, u_ms)?;
    check_len(g, mode, u_ref)?;
    let d: Vec<f64> = u_ms.iter().zip(u_ref).map(|(a, b)| a - b).collect();
    let square = mode == NormMode::Cg;
    let (l2_ref, en_ref) = weighted_sq_and_energy(g, c, u_ref, mode, square);
    if l2_ref == 0.0 || en_ref == 0.0 {
        return Err(Error::InvalidArgument("reference solution is zero; relative errors undefined".into()));
    }
    let (l2_d, en_d) = weighted_sq_and_energy(g, c, &d, mode, square);
    Ok(((l2_d / l2_ref).sqrt(), (en_d.max(0.0) / en_ref).sqrt()))
}

/// Blockwise elasticity energy `a_H(u, u)`.
pub fn energy(g: &GridHierarchy, c: &CoeffField, u: &[f64], mode: NormMode) -> Result<f64> {
    check_len(g, mode, u)?;
    Ok(weighted_sq_and_energy(g, c, u, mode, false).1)
}

/// Absolute `L2` and `H1`-seminorm errors against an analytic field (3x3 Gauss per cell).
pub fn analytic_errors(
    g: &GridHierarchy,
    u: &[f64],
    mode: NormMode,
    exact: impl Fn(f64, f64) -> [f64; 2],
    grad: impl Fn(f64, f64) -> [[f64; 2]; 2],
) -> Result<(f64, f64)> {
    check_len(g, mode, u)?;
    let (pts, wts) = GAUSS3;
    let (hx, hy) = (g.hx(), g.hy());
    let el = Q1Element::new(hx, hy);
    let (mut l2, mut h1) = (0.0, 0.0);
    for_each_cell(g, mode, |cell, dofs| {
        let [x0, y0] = g.cell_origin(cell);
        for (qx, wx) in pts.iter().zip(wts) {
            for (qy, wy) in pts.iter().zip(wts) {
                let (x, y) = (x0 + qx * hx, y0 + qy * hy);
                let n = shape(*qx, *qy);
                let dn = el.grads(*qx, *qy);
                let ue = exact(x, y);
                let ge = grad(x, y);
                let w = wx * wy * hx * hy;
                for comp in 0..2 {
                    let mut uh = 0.0;
                    let mut gh = [0.0; 2];
                    for a in 0..4 {
                        let v = u[dofs[2 * a + comp]];
                        uh += v * n[a];
                        gh[0] += v * dn[a][0];
                        gh[1] += v * dn[a][1];
                    }
                    l2 += w * (uh - ue[comp]).powi(2);
                    h1 += w * ((gh[0] - ge[comp][0]).powi(2) + (gh[1] - ge[comp][1]).powi(2));
                }
            }
        }
    });
    Ok((l2.sqrt(), h1.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (GridHierarchy, CoeffField, Vec<f64>) {
        let g = GridHierarchy::new(1.0, 1.0, 2, 2, 3).unwrap();
        let c = crate::coeff::gen_model1_like(&g, 1.0, 100.0, 9).unwrap();
        let u: Vec<f64> = (0..g.n_fine_dofs()).map(|k| ((k * 7 % 13) as f64 - 6.0) / 3.0).collect();
        (g, c, u)
    }

    #[test]
    fn trivial_cases() {
        let (g, c, u) = setup();
        assert_eq!(error_norms(&g, &c, &u, &u, NormMode::Cg).unwrap(), (0.0, 0.0));
        let z = vec![0.0; u.len()];
        let (a, b) = error_norms(&g, &c, &z, &u, NormMode::Cg).unwrap();
        assert!((a - 1.0).abs() < 1e-14 && (b - 1.0).abs() < 1e-14);
        assert!(error_norms(&g, &c, &u, &z, NormMode::Cg).is_err());
        assert!(error_norms(&g, &c, &u, &u, NormMode::Dg).is_err());
    }

    #[test]
    fn constant_difference_cancels_weight() {
        let g = GridHierarchy::new(1.0, 1.0, 2, 2, 2).unwrap();
        let c = crate::coeff::gen_model1_like(&g, 1.0, 100.0, 9).unwrap();
        let uh: Vec<f64> = (0..g.n_fine_nodes()).flat_map(|_| [2.0, 0.0]).collect();
        let um: Vec<f64> = (0..g.n_fine_nodes()).flat_map(|_| [2.5, 0.0]).collect();
        for mode in [NormMode::Cg, NormMode::Dg] {
            let (uh, um) = match mode {
                NormMode::Cg => (uh.clone(), um.clone()),
                NormMode::Dg => (
                    crate::fem::conforming_to_broken(&g, &uh).unwrap(),
                    crate::fem::conforming_to_broken(&g, &um).unwrap(),
                ),
            };
            let (e, _) = weighted_sq_and_energy(&g, &c, &uh, mode, true);
            assert!(e > 0.0);
            let l2 = {
                let d: Vec<f64> = um.iter().zip(&uh).map(|(a, b)| a - b).collect();
                let sq = mode == NormMode::Cg;
                (weighted_sq_and_energy(&g, &c, &d, mode, sq).0 / weighted_sq_and_energy(&g, &c, &uh, mode, sq).0).sqrt()
            };
            assert!((l2 - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn analytic_error_of_interpolated_linear_field_vanishes() {
        let g = GridHierarchy::new(1.0, 2.0, 2, 2, 2).unwrap();
        let u: Vec<f64> = (0..g.n_fine_nodes())
            .flat_map(|n| {
                let [x, y] = g.node_coords(n);
                [1.0 + 2.0 * x - y, 3.0 * y]
            })
            .collect();
        let (l2, h1) = analytic_errors(&g, &u, NormMode::Cg, |x, y| [1.0 + 2.0 * x - y, 3.0 * y], |_, _| [[2.0, -1.0], [0.0, 3.0]]).unwrap();
        assert!(l2 < 1e-13 && h1 < 1e-13);
    }
}
