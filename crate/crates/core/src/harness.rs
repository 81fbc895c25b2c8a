//! Experiment driver: TOML configs, the offline/online pipeline over a sweep of
//! basis sizes, fine-reference caching and table output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coarse::MsSolution;
use crate::coeff::{gen_layered, gen_model1_like, CoeffField};
use crate::coupling_cg::{assemble_global_cg, solve_cg_gmsfem};
use crate::coupling_dg::{assemble_global_dg, solve_dg_gmsfem};
use crate::error::{Error, Result};
use crate::fem::{
    assemble_domain, broken_load, domain_load, error_norms, solve_with_operator, DgOperator, DgOptions, FineOperator,
    FluxMass, NormMode, PenaltyLength, SolveMethod, SolverOptions,
};
use crate::grid::{GridHierarchy, Region};
use crate::snapshot::{snapshots, snapshots_oversampled, SnapshotKind};
use crate::spectral::{
    build_pou, solve_pencil, spectral_cg, spectral_dg, spectral_oversampled, weight_kappa_tilde, LocalSpectrum,
    OfflineSpace, PartitionOfUnity, PencilKind, PouKind,
};

/// Directory for cached fine reference solutions; caching is off when unset.
pub const CACHE_ENV: &str = "GMSFEM_CACHE_DIR";

/// Header of every result CSV.
pub const CSV_HEADER: &str = "dimension,inv_lambda_star,e_L2,e_H1";

fn cfg_err(field: &str, reason: impl Into<String>) -> Error {
    Error::Config { field: field.into(), reason: reason.into() }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    /// Worker threads for the per-region offline stage; 0 uses all cores.
    #[serde(default)]
    pub threads: usize,
    pub grid: GridConfig,
    pub coefficient: CoefficientConfig,
    pub method: MethodConfig,
    #[serde(default)]
    pub oversampling: Option<OversamplingConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lx: f64,
    pub ly: f64,
    pub ncx: usize,
    pub ncy: usize,
    /// Fine cells per coarse block along each axis.
    pub nf: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientSource {
    Generated,
    Raster,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    #[default]
    Channels,
    Layered,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientConfig {
    pub source: CoefficientSource,
    #[serde(default)]
    pub generator: Generator,
    #[serde(default = "one")]
    pub background: f64,
    #[serde(default = "default_contrast")]
    pub contrast: f64,
    #[serde(default = "default_layers")]
    pub layers: usize,
    /// Two-layer Lamé raster; relative paths resolve against the config file.
    #[serde(default)]
    pub path: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    Cg,
    Dg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// The same number of modes in every region, one row per entry of `basis_counts`.
    #[default]
    Count,
    /// All modes with eigenvalue below each entry of `thresholds`.
    Threshold,
    /// Every snapshot mode; a single row.
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub coupling: Coupling,
    #[serde(default = "default_snapshots")]
    pub snapshots: SnapshotKind,
    #[serde(default = "default_pou")]
    pub pou: PouKind,
    #[serde(default)]
    pub selection: Selection,
    #[serde(default)]
    pub basis_counts: Vec<usize>,
    #[serde(default)]
    pub thresholds: Vec<f64>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub penalty_length: PenaltyLength,
    #[serde(default)]
    pub flux_mass: FluxMass,
    #[serde(default = "yes")]
    pub load_flux: bool,
    /// Constant body force.
    #[serde(default = "default_force")]
    pub force: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OversamplingConfig {
    /// Coarse-block rings added around each region.
    pub layers: usize,
    pub variant: PencilKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub method: SolveMethod,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_maxit")]
    pub maxit: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { method: SolveMethod::default(), tol: default_tol(), maxit: default_maxit() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Where tables are written; nothing is written when absent.
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default = "default_name")]
    pub name: String,
    /// Also write a displacement raster per row.
    #[serde(default)]
    pub rasters: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: None, name: default_name(), rasters: false }
    }
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_contrast() -> f64 {
    1e4
}
fn default_layers() -> usize {
    5
}
fn default_snapshots() -> SnapshotKind {
    SnapshotKind::Harmonic
}
fn default_pou() -> PouKind {
    PouKind::Multiscale
}
fn default_gamma() -> f64 {
    8.0
}
fn default_force() -> [f64; 2] {
    [1.0, 1.0]
}
fn default_tol() -> f64 {
    1e-10
}
fn default_maxit() -> usize {
    200_000
}
fn default_name() -> String {
    "results".into()
}

fn strictly_ascending<T: PartialOrd>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| cfg_err("toml", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| cfg_err("file", format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(p) = cfg.coefficient.path.as_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(d) = cfg.output.dir.as_mut() {
            if d.is_relative() {
                *d = base.join(&*d);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let gr = &self.grid;
        if !(gr.lx > 0.0 && gr.lx.is_finite()) {
            return Err(cfg_err("grid.lx", "must be positive"));
        }
        if !(gr.ly > 0.0 && gr.ly.is_finite()) {
            return Err(cfg_err("grid.ly", "must be positive"));
        }
        for (name, v) in [("grid.ncx", gr.ncx), ("grid.ncy", gr.ncy), ("grid.nf", gr.nf)] {
            if v == 0 {
                return Err(cfg_err(name, "must be at least 1"));
            }
        }

        let co = &self.coefficient;
        match co.source {
            CoefficientSource::Raster if co.path.is_none() => {
                return Err(cfg_err("coefficient.path", "required when source = \"raster\""));
            }
            CoefficientSource::Generated => {
                if !(co.background > 0.0 && co.background.is_finite()) {
                    return Err(cfg_err("coefficient.background", "must be positive"));
                }
                if !(co.contrast >= 1.0 && co.contrast.is_finite()) {
                    return Err(cfg_err("coefficient.contrast", "must be at least 1"));
                }
                if co.generator == Generator::Layered && co.layers == 0 {
                    return Err(cfg_err("coefficient.layers", "must be at least 1"));
                }
            }
            CoefficientSource::Raster => {}
        }

        let m = &self.method;
        match m.selection {
            Selection::Count => {
                if m.basis_counts.is_empty() {
                    return Err(cfg_err("method.basis_counts", "must not be empty"));
                }
                if m.basis_counts[0] == 0 {
                    return Err(cfg_err("method.basis_counts", "entries must be at least 1"));
                }
                if !strictly_ascending(&m.basis_counts) {
                    return Err(cfg_err("method.basis_counts", "must be strictly ascending"));
                }
            }
            Selection::Threshold => {
                if m.thresholds.is_empty() {
                    return Err(cfg_err("method.thresholds", "must not be empty"));
                }
                if !m.thresholds.iter().all(|t| *t > 0.0 && t.is_finite()) {
                    return Err(cfg_err("method.thresholds", "entries must be positive"));
                }
                if !strictly_ascending(&m.thresholds) {
                    return Err(cfg_err("method.thresholds", "must be strictly ascending"));
                }
            }
            Selection::All => {}
        }
        if !(m.gamma > 0.0 && m.gamma.is_finite()) {
            return Err(cfg_err("method.gamma", "must be positive"));
        }
        if !m.force.iter().all(|f| f.is_finite()) {
            return Err(cfg_err("method.force", "must be finite"));
        }

        if let Some(o) = &self.oversampling {
            if o.layers == 0 {
                return Err(cfg_err("oversampling.layers", "must be at least 1; omit the table to disable"));
            }
            if !o.variant.is_oversampled() {
                return Err(cfg_err("oversampling.variant", format!("{:?} is not an oversampled construction", o.variant)));
            }
            if o.variant.is_cg() != (m.coupling == Coupling::Cg) {
                return Err(cfg_err(
                    "oversampling.variant",
                    format!("{:?} does not match coupling {:?}", o.variant, m.coupling),
                ));
            }
        }

        if !(self.solver.tol > 0.0) {
            return Err(cfg_err("solver.tol", "must be positive"));
        }
        if self.solver.maxit == 0 {
            return Err(cfg_err("solver.maxit", "must be at least 1"));
        }
        if self.output.name.is_empty() || self.output.name.contains(['/', '\\']) {
            return Err(cfg_err("output.name", "must be a plain file stem"));
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<GridHierarchy> {
        let gr = &self.grid;
        GridHierarchy::new(gr.lx, gr.ly, gr.ncx, gr.ncy, gr.nf).map_err(|e| cfg_err("grid", e.to_string()))
    }

    pub fn build_coefficients(&self, g: &GridHierarchy) -> Result<CoeffField> {
        let co = &self.coefficient;
        match co.source {
            CoefficientSource::Generated => match co.generator {
                Generator::Channels => gen_model1_like(g, co.background, co.contrast, self.seed),
                Generator::Layered => gen_layered(g, co.background, co.contrast, co.layers, self.seed),
            },
            CoefficientSource::Raster => {
                let path = co.path.as_deref().ok_or_else(|| cfg_err("coefficient.path", "missing"))?;
                CoeffField::load_raster(path, g)
            }
        }
    }

    pub fn dg_options(&self) -> DgOptions {
        let m = &self.method;
        DgOptions { gamma: m.gamma, penalty_length: m.penalty_length, flux_mass: m.flux_mass, load_flux: m.load_flux }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions { tol: self.solver.tol, maxit: self.solver.maxit, method: self.solver.method }
    }
}

/// Which basis size a row was computed with.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Selector {
    Count(usize),
    Threshold(f64),
    All,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Timings {
    /// Snapshots plus local eigenproblems, shared by every row.
    pub offline: Duration,
    pub coarse_solve: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub selector: Selector,
    pub dimension: usize,
    /// `1 / Lambda*`; zero when no finite eigenvalue was discarded.
    pub inv_lambda_star: f64,
    pub e_l2: f64,
    pub e_h1: f64,
    /// Columns dropped by the coarse solve as numerically dependent.
    pub dropped: usize,
    pub timings: Timings,
}

/// The fine problem an experiment is measured against.
enum FineProblem {
    Cg { op: FineOperator, load: Vec<f64> },
    Dg { op: DgOperator, load: Vec<f64> },
}

impl FineProblem {
    fn new(cfg: &ExperimentConfig, g: &GridHierarchy, c: &CoeffField) -> Result<Self> {
        let [fx, fy] = cfg.method.force;
        Ok(match cfg.method.coupling {
            Coupling::Cg => Self::Cg { op: assemble_domain(g, c)?, load: domain_load(g, |_, _| [fx, fy]) },
            Coupling::Dg => Self::Dg {
                op: DgOperator::assemble(g, c, cfg.dg_options())?,
                load: broken_load(g, |_, _| [fx, fy]),
            },
        })
    }

    fn mode(&self) -> NormMode {
        match self {
            Self::Cg { .. } => NormMode::Cg,
            Self::Dg { .. } => NormMode::Dg,
        }
    }

    fn solve(&self, g: &GridHierarchy, opts: SolverOptions) -> Result<Vec<f64>> {
        match self {
            Self::Cg { op, load } => solve_with_operator(op, load, opts),
            Self::Dg { op, load } => op.solve(&op.rhs(g, load)?, opts),
        }
    }
}

/// Hex digest identifying a fine reference: grid, coefficients, discretisation and load.
pub fn reference_key(cfg: &ExperimentConfig, c: &CoeffField) -> String {
    let mut h = Sha256::new();
    let gr = &cfg.grid;
    h.update(format!("grid {:?} {:?} {} {} {}\n", gr.lx, gr.ly, gr.ncx, gr.ncy, gr.nf));
    h.update(format!("coupling {:?} force {:?}\n", cfg.method.coupling, cfg.method.force));
    if cfg.method.coupling == Coupling::Dg {
        h.update(format!("dg {:?}\n", cfg.dg_options()));
    }
    h.update(format!("solver {:?}\n", cfg.solver_options()));
    h.update(c.to_le_bytes());
    h.finalize().iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn read_cached(path: &Path, n: usize) -> Option<Vec<f64>> {
    let bytes = fs::read(path).ok()?;
    if bytes.len() != 8 * n {
        return None;
    }
    Some(bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect())
}

fn write_cached(path: &Path, u: &[f64]) -> Result<()> {
    let bytes: Vec<u8> = u.iter().flat_map(|v| v.to_le_bytes()).collect();
    // write-then-rename so concurrent runs never see a partial file
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn reference_solution(
    cfg: &ExperimentConfig,
    g: &GridHierarchy,
    c: &CoeffField,
    fine: &FineProblem,
) -> Result<Vec<f64>> {
    let n = fine.mode().n_dofs(g);
    let cache = std::env::var_os(CACHE_ENV).map(PathBuf::from);
    let path = cache.as_ref().map(|d| d.join(format!("{}.bin", reference_key(cfg, c))));
    if let Some(u) = path.as_deref().and_then(|p| read_cached(p, n)) {
        return Ok(u);
    }
    let u = fine.solve(g, cfg.solver_options()).map_err(|e| e.context("fine reference"))?;
    if let (Some(dir), Some(p)) = (cache, path) {
        fs::create_dir_all(&dir)?;
        write_cached(&p, &u)?;
    }
    Ok(u)
}

/// Fine reference alone, through the cache when enabled.
pub fn run_reference(cfg: &ExperimentConfig) -> Result<(GridHierarchy, Vec<f64>, NormMode)> {
    let g = cfg.build_grid()?;
    let c = cfg.build_coefficients(&g)?;
    let fine = FineProblem::new(cfg, &g, &c)?;
    let u = reference_solution(cfg, &g, &c, &fine)?;
    Ok((g, u, fine.mode()))
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

/// Modes each region keeps: enough for the largest requested count, otherwise all.
fn retained_modes(cfg: &ExperimentConfig) -> Option<usize> {
    match cfg.method.selection {
        Selection::Count => cfg.method.basis_counts.last().copied(),
        _ => None,
    }
}

struct Offline {
    spectra: Vec<LocalSpectrum>,
    pou: Option<PartitionOfUnity>,
}

fn local_spectrum(
    cfg: &ExperimentConfig,
    g: &GridHierarchy,
    c: &CoeffField,
    region: &Region,
    kappa: Option<&[f64]>,
) -> Result<LocalSpectrum> {
    let kind = cfg.method.snapshots;
    let keep = retained_modes(cfg);
    match &cfg.oversampling {
        Some(o) => {
            let snap = snapshots_oversampled(g, c, region, o.layers, kind)?;
            solve_pencil(&spectral_oversampled(o.variant, g, c, &snap, kappa)?, &snap, keep)
        }
        None => {
            let snap = snapshots(g, c, region, kind)?;
            let pencil = match kappa {
                Some(k) => spectral_cg(g, c, &snap, k)?,
                None => spectral_dg(g, c, &snap)?,
            };
            solve_pencil(&pencil, &snap, keep)
        }
    }
}

fn offline_stage(cfg: &ExperimentConfig, g: &GridHierarchy, c: &CoeffField) -> Result<Offline> {
    let (regions, pou, kappa) = match cfg.method.coupling {
        Coupling::Cg => {
            let pou = build_pou(g, c, cfg.method.pou)?;
            let kappa = weight_kappa_tilde(g, c, &pou)?;
            let regions: Vec<Region> = (0..pou.len()).map(|i| pou.region(i).clone()).collect();
            (regions, Some(pou), Some(kappa))
        }
        Coupling::Dg => ((0..g.n_blocks()).map(|b| g.block_region(b)).collect::<Result<_>>()?, None, None),
    };
    let spectra = thread_pool(cfg.threads)?.install(|| {
        regions
            .par_iter()
            .map(|r| {
                local_spectrum(cfg, g, c, r, kappa.as_deref())
                    .map_err(|e| e.context(format!("{:?} region {}", r.kind(), r.owner())))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(Offline { spectra, pou })
}

/// Offline spaces for one row and the resulting `Lambda*`.
fn select_spaces(off: &Offline, selector: Selector) -> Result<(Vec<OfflineSpace>, f64)> {
    let mut lambda_star = f64::INFINITY;
    let mut spaces = Vec::with_capacity(off.spectra.len());
    for (i, s) in off.spectra.iter().enumerate() {
        let l = match selector {
            Selector::Count(l) => l,
            Selector::Threshold(tau) => s.count_below(tau).max(1),
            Selector::All => s.n_total(),
        };
        let chi = off.pou.as_ref().map(|p| p.values(i));
        let space = s.offline(l, chi).map_err(|e| e.context(format!("region {}", s.region().owner())))?;
        lambda_star = lambda_star.min(space.lambda_star);
        spaces.push(space);
    }
    Ok((spaces, lambda_star))
}

fn selectors(cfg: &ExperimentConfig) -> Vec<Selector> {
    match cfg.method.selection {
        Selection::Count => cfg.method.basis_counts.iter().map(|&l| Selector::Count(l)).collect(),
        Selection::Threshold => cfg.method.thresholds.iter().map(|&t| Selector::Threshold(t)).collect(),
        Selection::All => vec![Selector::All],
    }
}

fn selector_tag(s: Selector) -> String {
    match s {
        Selector::Count(l) => format!("L{l}"),
        Selector::Threshold(t) => format!("tau{t:e}"),
        Selector::All => "all".into(),
    }
}

/// Runs the sweep and, when an output directory is configured, writes the
/// CSV, the aligned table, the plot data and optional rasters.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let g = cfg.build_grid()?;
    let c = cfg.build_coefficients(&g)?;
    let fine = FineProblem::new(cfg, &g, &c)?;

    let t = Instant::now();
    let u_ref = reference_solution(cfg, &g, &c, &fine)?;
    eprintln!("fine reference: {} dofs in {:.2?}", u_ref.len(), t.elapsed());

    let t = Instant::now();
    let off = offline_stage(cfg, &g, &c)?;
    let offline_time = t.elapsed();
    eprintln!("offline stage: {} regions in {offline_time:.2?}", off.spectra.len());

    let pool = thread_pool(cfg.threads)?;
    let mut rows = Vec::new();
    let mut solutions = Vec::new();
    for sel in selectors(cfg) {
        let t = Instant::now();
        let ctx = |e: Error| e.context(format!("basis {}", selector_tag(sel)));
        let (spaces, lambda_star) = select_spaces(&off, sel).map_err(ctx)?;
        let sol: MsSolution = pool
            .install(|| match &fine {
                FineProblem::Cg { op, load } => solve_cg_gmsfem(op, load, &assemble_global_cg(&g, &spaces)?),
                FineProblem::Dg { op, load } => solve_dg_gmsfem(&g, op, load, &assemble_global_dg(&g, &spaces)?),
            })
            .map_err(ctx)?;
        let (e_l2, e_h1) = error_norms(&g, &c, &sol.fine, &u_ref, fine.mode()).map_err(ctx)?;
        let row = ResultRow {
            selector: sel,
            dimension: sol.dimension,
            inv_lambda_star: if lambda_star.is_finite() { 1.0 / lambda_star } else { 0.0 },
            e_l2,
            e_h1,
            dropped: sol.dropped.len(),
            timings: Timings { offline: offline_time, coarse_solve: t.elapsed() },
        };
        eprintln!(
            "{}: dimension {} (dropped {}), e_L2 {:.3e}, e_H1 {:.3e}, solve {:.2?}",
            selector_tag(sel),
            row.dimension,
            row.dropped,
            row.e_l2,
            row.e_h1,
            row.timings.coarse_solve
        );
        rows.push(row);
        if cfg.output.rasters {
            solutions.push((sel, sol));
        }
    }

    if let Some(dir) = &cfg.output.dir {
        fs::create_dir_all(dir)?;
        let name = &cfg.output.name;
        let (csv, text) = emit_table(&rows)?;
        fs::write(dir.join(format!("{name}.csv")), csv)?;
        fs::write(dir.join(format!("{name}.txt")), text)?;
        fs::write(dir.join(format!("{name}.plot")), emit_plotdata(&rows)?)?;
        for (sel, sol) in &solutions {
            sol.save_raster(&g, &dir.join(format!("{name}_{}.raster", selector_tag(*sel))))?;
        }
    }
    Ok(rows)
}

/// CSV text of the rows; the format is fixed so identical runs give identical bytes.
pub fn to_csv(rows: &[ResultRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no result rows".into()));
    }
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{},{:.6e},{:.6e},{:.6e}", r.dimension, r.inv_lambda_star, r.e_l2, r.e_h1);
    }
    Ok(s)
}

/// CSV plus an aligned text table with the same columns.
pub fn emit_table(rows: &[ResultRow]) -> Result<(String, String)> {
    let csv = to_csv(rows)?;
    let mut t = format!("{:>10}  {:>10}  {:>8}  {:>8}\n", "Dimension", "1/Lambda*", "e_L2", "e_H1");
    for r in rows {
        let _ = writeln!(t, "{:>10}  {:>10.1e}  {:>8.3}  {:>8.3}", r.dimension, r.inv_lambda_star, r.e_l2, r.e_h1);
    }
    Ok((csv, t))
}

/// Runs without and with oversampling side by side; rows are paired in order.
pub fn emit_paired_table(without: &[ResultRow], with: &[ResultRow]) -> Result<String> {
    if without.is_empty() || with.is_empty() {
        return Err(Error::InvalidArgument("no result rows".into()));
    }
    if without.len() != with.len() {
        return Err(Error::DimensionMismatch(format!("{} rows against {}", without.len(), with.len())));
    }
    let mut t = format!(
        "{:>10}  {:>21}  {:>17}  {:>17}\n{:>10}  {:>10} {:>10}  {:>8} {:>8}  {:>8} {:>8}\n",
        "", "1/Lambda*", "e_L2", "e_H1", "Dimension", "without", "with", "without", "with", "without", "with"
    );
    for (a, b) in without.iter().zip(with) {
        let dim = if a.dimension == b.dimension { a.dimension.to_string() } else { format!("{}/{}", a.dimension, b.dimension) };
        let _ = writeln!(
            t,
            "{:>10}  {:>10.1e} {:>10.1e}  {:>8.3} {:>8.3}  {:>8.3} {:>8.3}",
            dim, a.inv_lambda_star, b.inv_lambda_star, a.e_l2, b.e_l2, a.e_h1, b.e_h1
        );
    }
    Ok(t)
}

/// Whitespace-separated series: basis size, dimension and both errors per row.
pub fn emit_plotdata(rows: &[ResultRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no result rows".into()));
    }
    let mut s = String::from("# basis dimension e_L2 e_H1\n");
    for r in rows {
        let basis = match r.selector {
            Selector::Count(l) => l.to_string(),
            Selector::Threshold(t) => format!("{t:e}"),
            Selector::All => "all".into(),
        };
        let _ = writeln!(s, "{basis} {} {:.6e} {:.6e}", r.dimension, r.e_l2, r.e_h1);
    }
    Ok(s)
}

/// Parses a result CSV back into rows (timings and selectors are not stored).
pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CSV_HEADER) {
        return Err(cfg_err("csv", format!("expected header `{CSV_HEADER}`")));
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = || cfg_err("csv", format!("malformed row {}: `{line}`", k + 1));
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let [d, inv, l2, h1] = f.as_slice() else { return Err(bad()) };
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        rows.push(ResultRow {
            selector: Selector::All,
            dimension: d.parse().map_err(|_| bad())?,
            inv_lambda_star: num(inv)?,
            e_l2: num(l2)?,
            e_h1: num(h1)?,
            dropped: 0,
            timings: Timings::default(),
        });
    }
    if rows.is_empty() {
        return Err(cfg_err("csv", "no rows"));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
seed = 3
[grid]
lx = 1.0
ly = 1.0
ncx = 2
ncy = 2
nf = 2
[coefficient]
source = "generated"
contrast = 1.0
[method]
coupling = "cg"
basis_counts = [2, 4]
"#;

    fn row(dimension: usize, e: f64) -> ResultRow {
        ResultRow {
            selector: Selector::Count(dimension),
            dimension,
            inv_lambda_star: 0.5,
            e_l2: e,
            e_h1: 2.0 * e,
            dropped: 0,
            timings: Timings::default(),
        }
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = ExperimentConfig::from_toml_str(BASE).unwrap();
        assert_eq!(cfg.method.snapshots, SnapshotKind::Harmonic);
        assert_eq!(cfg.method.pou, PouKind::Multiscale);
        assert_eq!(cfg.method.gamma, 8.0);
        assert_eq!(cfg.method.force, [1.0, 1.0]);
        assert!(cfg.oversampling.is_none());
        assert!(cfg.output.dir.is_none());
    }

    #[test]
    fn variant_must_match_coupling() {
        let text = format!("{BASE}[oversampling]\nlayers = 1\nvariant = \"dg_volume\"\n");
        match ExperimentConfig::from_toml_str(&text) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "oversampling.variant"),
            other => panic!("{other:?}"),
        }
        let text = format!("{BASE}[oversampling]\nlayers = 1\nvariant = \"cg\"\n");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
        let text = format!("{BASE}[oversampling]\nlayers = 1\nvariant = \"cg_extended\"\n");
        assert!(ExperimentConfig::from_toml_str(&text).is_ok());
    }

    #[test]
    fn basis_list_rules() {
        for (list, ok) in [("[]", false), ("[4, 4]", false), ("[5, 4]", false), ("[0, 2]", false), ("[1, 3, 8]", true)] {
            let text = BASE.replace("[2, 4]", list);
            assert_eq!(ExperimentConfig::from_toml_str(&text).is_ok(), ok, "{list}");
        }
        let text = BASE.replace("basis_counts = [2, 4]", "basis_count = [2]");
        assert!(matches!(ExperimentConfig::from_toml_str(&text), Err(Error::Config { .. })));
    }

    #[test]
    fn tables() {
        assert!(emit_table(&[]).is_err());
        assert!(emit_plotdata(&[]).is_err());
        let (csv, text) = emit_table(&[row(12, 0.25)]).unwrap();
        assert_eq!(csv, "dimension,inv_lambda_star,e_L2,e_H1\n12,5.000000e-1,2.500000e-1,5.000000e-1\n");
        assert_eq!(text.lines().count(), 2);
        let back = parse_csv(&csv).unwrap();
        assert_eq!((back[0].dimension, back[0].e_l2), (12, 0.25));
        let paired = emit_paired_table(&[row(12, 0.25), row(20, 0.1)], &[row(12, 0.2), row(20, 0.01)]).unwrap();
        let last: Vec<&str> = paired.lines().last().unwrap().split_whitespace().collect();
        assert_eq!(last.len(), 7);
        assert!(emit_paired_table(&[row(1, 0.1)], &[]).is_err());
    }

    #[test]
    fn reference_key_tracks_inputs() {
        let cfg = ExperimentConfig::from_toml_str(BASE).unwrap();
        let g = cfg.build_grid().unwrap();
        let c = cfg.build_coefficients(&g).unwrap();
        let k0 = reference_key(&cfg, &c);
        let mut other = cfg.clone();
        other.method.force = [0.0, 1.0];
        assert_ne!(k0, reference_key(&other, &c));
        other = cfg.clone();
        other.method.basis_counts = vec![7];
        assert_eq!(k0, reference_key(&other, &c));
        assert_ne!(k0, reference_key(&cfg, &c.scaled(2.0).unwrap()));
    }
}
