//! Cellwise-constant Lamé coefficient fields and raster I/O.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::GridHierarchy;

/// Poisson ratio used by the synthetic media generators.
pub const DEFAULT_POISSON: f64 = 0.22;

/// Per-fine-cell Lamé coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffField {
    nx: usize,
    ny: usize,
    lambda: Vec<f64>,
    mu: Vec<f64>,
    contrast: f64,
}

impl CoeffField {
    /// Builds a field from per-cell arrays, rejecting non-positive entries.
    pub fn new(nx: usize, ny: usize, lambda: Vec<f64>, mu: Vec<f64>) -> Result<Self> {
        if lambda.len() != nx * ny || mu.len() != nx * ny {
            return Err(Error::DimensionMismatch(format!(
                "coefficient arrays have {} / {} entries, grid has {} cells",
                lambda.len(),
                mu.len(),
                nx * ny
            )));
        }
        for (cell, (&l, &m)) in lambda.iter().zip(&mu).enumerate() {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::NonPositiveCoefficient { cell, value: l });
            }
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::NonPositiveCoefficient { cell, value: m });
            }
        }
        let (lo, hi) = lambda
            .iter()
            .zip(&mu)
            .map(|(l, m)| l + 2.0 * m)
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), k| (lo.min(k), hi.max(k)));
        Ok(Self { nx, ny, lambda, mu, contrast: hi / lo })
    }

    pub fn constant(g: &GridHierarchy, lambda: f64, mu: f64) -> Result<Self> {
        let n = g.n_fine_cells();
        Self::new(g.fine_nx(), g.fine_ny(), vec![lambda; n], vec![mu; n])
    }

    /// Converts a Young's modulus field at fixed Poisson ratio.
    pub fn from_young(nx: usize, ny: usize, young: &[f64], nu: f64) -> Result<Self> {
        let (lambda, mu) = lame_from_young(young, nu)?;
        Self::new(nx, ny, lambda, mu)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }
    /// max / min of `lambda + 2 mu`.
    pub fn contrast(&self) -> f64 {
        self.contrast
    }
    /// P-wave modulus `lambda + 2 mu` of one cell.
    pub fn pmod(&self, cell: usize) -> f64 {
        self.lambda[cell] + 2.0 * self.mu[cell]
    }

    pub fn check_grid(&self, g: &GridHierarchy) -> Result<()> {
        if (self.nx, self.ny) != (g.fine_nx(), g.fine_ny()) {
            return Err(Error::DimensionMismatch(format!(
                "coefficient field is {}x{}, fine grid is {}x{}",
                self.nx,
                self.ny,
                g.fine_nx(),
                g.fine_ny()
            )));
        }
        Ok(())
    }

    /// Same field with both coefficients multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(
            self.nx,
            self.ny,
            self.lambda.iter().map(|v| v * s).collect(),
            self.mu.iter().map(|v| v * s).collect(),
        )
    }

    /// Writes a two-layer raster (`lambda` then `mu`).
    pub fn save_raster(&self, path: &Path) -> Result<()> {
        Raster { rows: self.ny, cols: self.nx, layers: vec![self.lambda.clone(), self.mu.clone()] }
            .save(path)
    }

    /// Reads a coefficient raster for grid `g`. Two layers are read as
    /// (`lambda`, `mu`); a single layer is read as Young's modulus at the
    /// default Poisson ratio.
    pub fn load_raster(path: &Path, g: &GridHierarchy) -> Result<Self> {
        let r = Raster::load(path)?;
        if (r.rows, r.cols) != (g.fine_ny(), g.fine_nx()) {
            return Err(Error::DimensionMismatch(format!(
                "raster {} is {}x{}, fine grid is {}x{}",
                path.display(),
                r.rows,
                r.cols,
                g.fine_ny(),
                g.fine_nx()
            )));
        }
        let mut layers = r.layers.into_iter();
        match (layers.next(), layers.next()) {
            (Some(lambda), Some(mu)) => Self::new(g.fine_nx(), g.fine_ny(), lambda, mu),
            (Some(young), None) => Self::from_young(g.fine_nx(), g.fine_ny(), &young, DEFAULT_POISSON),
            _ => unreachable!("raster has at least one layer"),
        }
    }

    /// Stable byte representation, used for cache keys.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 16 * self.lambda.len());
        out.extend_from_slice(&(self.nx as u64).to_le_bytes());
        out.extend_from_slice(&(self.ny as u64).to_le_bytes());
        for v in self.lambda.iter().chain(&self.mu) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }
}

/// `lambda = nu E / ((1 + nu)(1 - 2 nu))`, `mu = E / (2 (1 + nu))`, elementwise.
pub fn lame_from_young(young: &[f64], nu: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(0.0..0.5).contains(&nu) {
        return Err(Error::InvalidArgument(format!("Poisson ratio must lie in [0, 0.5), got {nu}")));
    }
    if nu == 0.0 {
        return Err(Error::InvalidArgument("Poisson ratio 0 gives lambda = 0".into()));
    }
    if let Some((cell, &e)) = young.iter().enumerate().find(|(_, e)| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::NonPositiveCoefficient { cell, value: e });
    }
    let lf = nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let mf = 1.0 / (2.0 * (1.0 + nu));
    Ok((young.iter().map(|e| lf * e).collect(), young.iter().map(|e| mf * e).collect()))
}

/// Young's modulus field with a `background` matrix plus high-modulus channels
/// and isolated inclusions at `background * contrast`.
///
/// Two to three horizontal and vertical channels (two fine cells wide, spanning
/// most of the domain) and a few dozen square inclusions are placed at
/// seed-dependent positions. Converted to Lamé parameters with `nu = 0.22`.
pub fn gen_model1_like(g: &GridHierarchy, background: f64, contrast: f64, seed: u64) -> Result<CoeffField> {
    if !(contrast >= 1.0) {
        return Err(Error::InvalidArgument(format!("contrast must be >= 1, got {contrast}")));
    }
    if !(background > 0.0) {
        return Err(Error::InvalidArgument(format!("background must be positive, got {background}")));
    }
    let (nx, ny) = (g.fine_nx(), g.fine_ny());
    let mut young = vec![background; nx * ny];
    let high = background * contrast;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = (nx.min(ny) / 50).max(1) * 2;
    let width = width.min(nx.min(ny));

    let n_h = rng.random_range(2..=3);
    for _ in 0..n_h {
        let j0 = rng.random_range(0..=ny - width);
        let start = rng.random_range(0..=nx / 5);
        let end = nx - rng.random_range(0..=nx / 5);
        for j in j0..j0 + width {
            for i in start..end {
                young[j * nx + i] = high;
            }
        }
    }
    let n_v = rng.random_range(2..=3);
    for _ in 0..n_v {
        let i0 = rng.random_range(0..=nx - width);
        let start = rng.random_range(0..=ny / 5);
        let end = ny - rng.random_range(0..=ny / 5);
        for j in start..end {
            for i in i0..i0 + width {
                young[j * nx + i] = high;
            }
        }
    }
    let n_inc = (nx * ny / 400).clamp(1, 60);
    let side = (nx.min(ny) / 25).max(1).min(nx.min(ny));
    for _ in 0..n_inc {
        let i0 = rng.random_range(0..=nx - side);
        let j0 = rng.random_range(0..=ny - side);
        for j in j0..j0 + side {
            for i in i0..i0 + side {
                young[j * nx + i] = high;
            }
        }
    }
    // keep the background value present so the stated contrast is attained
    if contrast > 1.0 && young.iter().all(|&e| e == high) {
        young[0] = background;
    }
    CoeffField::from_young(nx, ny, &young, DEFAULT_POISSON)
}

/// Horizontally layered medium with mild contrast: `n_layers` bands whose
/// Young's modulus ranges log-uniformly over `[background, background * contrast]`.
pub fn gen_layered(g: &GridHierarchy, background: f64, contrast: f64, n_layers: usize, seed: u64) -> Result<CoeffField> {
    if !(contrast >= 1.0) || n_layers == 0 || !(background > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "layered field needs contrast >= 1, layers >= 1, background > 0 (got {contrast}, {n_layers}, {background})"
        )));
    }
    let (nx, ny) = (g.fine_nx(), g.fine_ny());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values: Vec<f64> = (0..n_layers)
        .map(|_| background * contrast.powf(rng.random_range(0.0..=1.0)))
        .collect();
    if n_layers > 1 {
        values[0] = background;
        values[n_layers - 1] = background * contrast;
    }
    // depth-dependent bands with a gentle slope so interfaces cut across blocks
    let slope: f64 = rng.random_range(-0.15..0.15);
    let mut young = vec![0.0; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let y = (j as f64 + 0.5) / ny as f64 + slope * ((i as f64 + 0.5) / nx as f64 - 0.5);
            let k = ((y.clamp(0.0, 0.999_999) * n_layers as f64) as usize).min(n_layers - 1);
            young[j * nx + i] = values[k];
        }
    }
    CoeffField::from_young(nx, ny, &young, DEFAULT_POISSON)
}

/// Multi-layer row-major raster: header `rows cols [layers]`, then
/// whitespace-separated values, layer after layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    pub rows: usize,
    pub cols: usize,
    pub layers: Vec<Vec<f64>>,
}

impl Raster {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        if self.layers.len() == 1 {
            writeln!(w, "{} {}", self.rows, self.cols)?;
        } else {
            writeln!(w, "{} {} {}", self.rows, self.cols, self.layers.len())?;
        }
        for layer in &self.layers {
            for row in layer.chunks(self.cols.max(1)) {
                let mut first = true;
                for v in row {
                    if !first {
                        w.write_all(b" ")?;
                    }
                    first = false;
                    // Display for f64 is the shortest representation that round-trips
                    write!(w, "{v}")?;
                }
                w.write_all(b"\n")?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let bad = |reason: String| Error::MalformedRaster { path: path.to_path_buf(), reason };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| bad(format!("bad header token `{t}`"))))
            .collect::<Result<_>>()?;
        let (rows, cols, n_layers) = match dims.as_slice() {
            [r, c] => (*r, *c, 1),
            [r, c, l] => (*r, *c, *l),
            _ => return Err(bad(format!("header must be `rows cols [layers]`, got `{header}`"))),
        };
        if rows == 0 || cols == 0 || n_layers == 0 {
            return Err(bad("zero dimension in header".into()));
        }
        let values: Vec<f64> = lines
            .flat_map(str::split_whitespace)
            .map(|t| t.parse::<f64>().map_err(|_| bad(format!("bad value `{t}`"))))
            .collect::<Result<_>>()?;
        let per = rows * cols;
        if values.len() != per * n_layers {
            return Err(bad(format!("expected {} values, found {}", per * n_layers, values.len())));
        }
        let layers = values.chunks(per).map(<[f64]>::to_vec).collect();
        Ok(Self { rows, cols, layers })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn young_conversion() {
        let (l, m) = lame_from_young(&[1.0], 0.22).unwrap();
        assert!((l[0] - 0.22 / (1.22 * 0.56)).abs() < 1e-15);
        assert!((l[0] - 0.322014).abs() < 1e-6);
        assert!((m[0] - 0.409836).abs() < 1e-6);

        let (l2, m2) = lame_from_young(&[2.0], 0.22).unwrap();
        assert_eq!(l2[0], 2.0 * l[0]);
        assert_eq!(m2[0], 2.0 * m[0]);

        assert!(lame_from_young(&[1.0], 0.0).is_err());
        assert!(lame_from_young(&[1.0], 0.5).is_err());
        assert!(lame_from_young(&[-1.0], 0.3).is_err());
    }

    #[test]
    fn inversion_recovers_young() {
        let young: Vec<f64> = (1..50).map(|k| 0.37 * k as f64 * k as f64).collect();
        let nu = 0.22;
        let (_, mu) = lame_from_young(&young, nu).unwrap();
        for (e, m) in young.iter().zip(&mu) {
            assert!((m * 2.0 * (1.0 + nu) - e).abs() <= 1e-14 * e);
        }
    }

    #[test]
    fn generator_contrast_and_determinism() {
        let g = GridHierarchy::new(1.0, 1.0, 10, 10, 10).unwrap();
        let flat = gen_model1_like(&g, 1.0, 1.0, 3).unwrap();
        assert_eq!(flat.contrast(), 1.0);

        let a = gen_model1_like(&g, 1.0, 1e4, 7).unwrap();
        assert!((a.contrast() - 1e4).abs() <= 1e-12 * 1e4);
        let b = gen_model1_like(&g, 1.0, 1e4, 7).unwrap();
        assert_eq!(a, b);
        let c = gen_model1_like(&g, 1.0, 1e4, 8).unwrap();
        assert_ne!(a, c);

        // exactly two distinct P-wave moduli: no smearing between cells
        let mut vals: Vec<f64> = (0..g.n_fine_cells()).map(|c| a.pmod(c)).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        assert_eq!(vals.len(), 2);
    }

    #[test]
    fn layered_field() {
        let g = GridHierarchy::new(6000.0, 6000.0, 6, 6, 4).unwrap();
        let f = gen_layered(&g, 1.0, 20.0, 8, 1).unwrap();
        assert!((f.contrast() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn raster_round_trip() {
        let g = GridHierarchy::new(1.0, 1.0, 3, 2, 3).unwrap();
        let f = gen_model1_like(&g, 3.3, 1234.5, 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("field.txt");
        f.save_raster(&p).unwrap();
        let back = CoeffField::load_raster(&p, &g).unwrap();
        assert_eq!(back, f);
        for (a, b) in f.lambda().iter().zip(back.lambda()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn raster_errors() {
        let dir = tempfile::tempdir().unwrap();
        let small = GridHierarchy::new(1.0, 1.0, 10, 10, 10).unwrap();
        let big = GridHierarchy::new(1.0, 1.0, 30, 30, 20).unwrap();
        let p = dir.path().join("f.txt");
        CoeffField::constant(&small, 1.0, 1.0).unwrap().save_raster(&p).unwrap();
        assert!(matches!(CoeffField::load_raster(&p, &big), Err(Error::DimensionMismatch(_))));

        let g = GridHierarchy::new(1.0, 1.0, 1, 1, 2).unwrap();
        fs::write(&p, "2 2 2\n1 1\n1 1\n1 0\n1 1\n").unwrap();
        match CoeffField::load_raster(&p, &g) {
            Err(Error::NonPositiveCoefficient { cell, value }) => {
                assert_eq!(cell, 1);
                assert_eq!(value, 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
        fs::write(&p, "2 x\n1 1 1 1\n").unwrap();
        assert!(matches!(CoeffField::load_raster(&p, &g), Err(Error::MalformedRaster { .. })));
        fs::write(&p, "2 2\n1 1 1\n").unwrap();
        assert!(matches!(CoeffField::load_raster(&p, &g), Err(Error::MalformedRaster { .. })));
    }
}
