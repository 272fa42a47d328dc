//! Batch driver behind the command-line interface.
//!
//! Processes a list of STL inputs through the whole pipeline (parse, weld,
//! grid, cut, metrics), one model at a time so phase timings stay clean,
//! and collects one report row per input. A perturbation sweep mode reruns
//! each model on a family of translated or rotated grids and reports metric
//! drift against the unperturbed baseline. Failures are recorded in the
//! row's status instead of aborting the batch.

use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::cut::{cut_mesh, CutMesh};
use crate::error::{Error, Result};
use crate::grid::{background_grid, CartesianGrid, GridConfig};
use crate::halfspace::Tolerances;
use crate::measures::{error_metrics, MetricsReport, PhaseTimings};
use crate::models;
use crate::stl::{parse_stl, weld, SurfaceMesh};
use crate::vtk::export_vtk;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PerturbKind {
    Translate,
    Rotate,
}

impl PerturbKind {
    fn label(self) -> &'static str {
        match self {
            PerturbKind::Translate => "translate",
            PerturbKind::Rotate => "rotate",
        }
    }
}

/// Everything one batch invocation needs. The defaults reproduce the
/// reference setup: 100 cells along the longest axis, at least 10 along the
/// shortest, box enlarged by 1.4, snap and coplanarity tolerances at 1e2
/// and 1e3 times machine epsilon of the model extent.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    pub n_max: usize,
    pub n_min: usize,
    pub scale: f64,
    pub snap_factor: f64,
    pub hs_factor: f64,
    pub perturb: Option<PerturbKind>,
    pub alpha_range: (i32, i32),
    pub report: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub vtk: Option<PathBuf>,
    pub exteriors: bool,
    pub weld_tol: f64,
    /// Pipeline passes per model; timings keep the per-phase minimum.
    pub timing_repeats: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            n_max: 100,
            n_min: 10,
            scale: 1.4,
            snap_factor: 1e2,
            hs_factor: 1e3,
            perturb: None,
            alpha_range: (1, 17),
            report: None,
            csv: None,
            vtk: None,
            exteriors: false,
            weld_tol: 0.0,
            timing_repeats: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowStatus {
    Ok,
    ParseError,
    NonManifold,
}

impl RowStatus {
    fn as_str(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::ParseError => "parse-error",
            RowStatus::NonManifold => "non-manifold",
        }
    }
}

/// One processed (model, grid variant) combination.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BatchRow {
    pub model: String,
    pub status: RowStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub n_faces: usize,
    pub n_verts: usize,
    pub box_size: [f64; 3],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturb_kind: Option<PerturbKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<i32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsReport>,
    /// Volume drift against the unperturbed baseline, sweep rows only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_v0: Option<f64>,
    /// Surface drift against the unperturbed baseline, sweep rows only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_gamma0: Option<f64>,
}

impl BatchRow {
    fn failed(model: &str, err: &Error) -> Self {
        let status = match err {
            Error::NotClosedManifold(_) => RowStatus::NonManifold,
            _ => RowStatus::ParseError,
        };
        BatchRow {
            model: model.to_string(),
            status,
            message: Some(err.to_string()),
            n_faces: 0,
            n_verts: 0,
            box_size: [0.0; 3],
            perturb_kind: None,
            alpha: None,
            metrics: None,
            eps_v0: None,
            eps_gamma0: None,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct BatchReport {
    pub rows: Vec<BatchRow>,
}

impl BatchReport {
    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(|r| r.status == RowStatus::Ok)
    }
}

/// Model source resolved from one `--stl` argument: an STL file on disk, or
/// the name of a builtin sample model.
fn read_input(path: &Path) -> Result<(String, Vec<[Point3<f64>; 3]>)> {
    let display = path.display().to_string();
    if path.exists() {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let soup = parse_stl(&bytes)?;
        if soup.is_empty() {
            return Err(Error::MalformedStl(format!("{display} contains no triangles")));
        }
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or(display);
        return Ok((name, soup));
    }
    if let Some(soup) = path.to_str().and_then(models::by_name) {
        return Ok((path.to_str().unwrap().to_string(), soup));
    }
    Err(Error::MalformedStl(format!(
        "{display}: no such file, and not a builtin model ({})",
        models::MODEL_NAMES.join(", ")
    )))
}

struct PreparedModel {
    name: String,
    mesh: SurfaceMesh,
    bbox: (Point3<f64>, Point3<f64>),
    tol: Tolerances,
    timings: PhaseTimings,
}

/// Parse and weld one input, timing both phases.
fn prepare_model(path: &Path, cfg: &RunConfig) -> Result<PreparedModel> {
    let t0 = Instant::now();
    let (name, soup) = read_input(path)?;
    let parse = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let mesh = weld(&soup, cfg.weld_tol);
    mesh.check_closed_manifold()?;
    mesh.check_nondegenerate()?;
    let weld_t = t0.elapsed().as_secs_f64();

    let bbox = mesh.bbox();
    let extent = (bbox.1 - bbox.0).amax();
    let tol = Tolerances::with_factors(extent, cfg.snap_factor, cfg.hs_factor);
    Ok(PreparedModel {
        name,
        mesh,
        bbox,
        tol,
        timings: PhaseTimings { parse, weld: weld_t, ..Default::default() },
    })
}

fn make_grid(m: &PreparedModel, cfg: &RunConfig) -> Result<CartesianGrid> {
    background_grid(
        m.bbox.0,
        m.bbox.1,
        &GridConfig { n_max: cfg.n_max, n_min: cfg.n_min, scale: cfg.scale },
    )
}

/// Grid construction, cut, and metrics for one prepared model on one grid
/// variant. `perturb` is applied to the freshly built grid.
fn cut_once(
    m: &PreparedModel,
    cfg: &RunConfig,
    perturb: Option<(PerturbKind, i32)>,
) -> Result<(CutMesh, MetricsReport)> {
    let t0 = Instant::now();
    let mut grid = make_grid(m, cfg)?;
    if let Some((kind, alpha)) = perturb {
        match kind {
            PerturbKind::Translate => grid.perturb_translate(alpha),
            PerturbKind::Rotate => grid.perturb_rotate(alpha),
        }
    }
    let grid_t = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let cm = cut_mesh(&m.mesh, &grid, m.tol)?;
    let cut_t = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let mut metrics = error_metrics(&cm);
    metrics.timings = PhaseTimings {
        grid: grid_t,
        cut: cut_t,
        metrics: t0.elapsed().as_secs_f64(),
        ..m.timings
    };
    Ok((cm, metrics))
}

fn min_timings(a: PhaseTimings, b: PhaseTimings) -> PhaseTimings {
    PhaseTimings {
        parse: a.parse.min(b.parse),
        weld: a.weld.min(b.weld),
        grid: a.grid.min(b.grid),
        cut: a.cut.min(b.cut),
        metrics: a.metrics.min(b.metrics),
    }
}

fn ok_row(m: &PreparedModel, metrics: MetricsReport) -> BatchRow {
    BatchRow {
        model: m.name.clone(),
        status: RowStatus::Ok,
        message: None,
        n_faces: m.mesh.tris.len(),
        n_verts: m.mesh.verts.len(),
        box_size: (m.bbox.1 - m.bbox.0).into(),
        perturb_kind: None,
        alpha: None,
        metrics: Some(metrics),
        eps_v0: None,
        eps_gamma0: None,
    }
}

/// Processes every input on its unperturbed grid. Extra pipeline passes
/// (`timing_repeats`) refine the timings without changing any metric value.
pub fn run_batch(cfg: &RunConfig) -> Result<BatchReport> {
    let mut report = BatchReport::default();
    for path in &cfg.inputs {
        let row = match process_plain(path, cfg) {
            Ok(row) => row,
            Err(e) => BatchRow::failed(&path.display().to_string(), &e),
        };
        report.rows.push(row);
    }
    write_outputs(cfg, &report)?;
    Ok(report)
}

fn process_plain(path: &Path, cfg: &RunConfig) -> Result<BatchRow> {
    let repeats = cfg.timing_repeats.max(1);
    let mut last: Option<(PreparedModel, CutMesh, MetricsReport)> = None;
    for _ in 0..repeats {
        let m = prepare_model(path, cfg)?;
        let (cm, mut metrics) = cut_once(&m, cfg, None)?;
        if let Some((_, _, prev)) = &last {
            metrics.timings = min_timings(prev.timings, metrics.timings);
        }
        last = Some((m, cm, metrics));
    }
    let (m, cm, metrics) = last.expect("at least one pass");
    if let Some(dir) = &cfg.vtk {
        export_vtk(&cm, dir, &sanitize(&m.name), cfg.exteriors)?;
    }
    Ok(ok_row(&m, metrics))
}

/// Robustness sweep: one baseline row per model, then one row per
/// (perturbation kind, alpha) with drift columns relative to the baseline's
/// interior volume and cut surface area.
pub fn run_robustness(cfg: &RunConfig) -> Result<BatchReport> {
    let kinds: Vec<PerturbKind> = match cfg.perturb {
        Some(k) => vec![k],
        None => vec![PerturbKind::Translate, PerturbKind::Rotate],
    };
    let (a_lo, a_hi) = cfg.alpha_range;
    let mut report = BatchReport::default();
    for path in &cfg.inputs {
        match process_sweep(path, cfg, &kinds, a_lo, a_hi, &mut report) {
            Ok(()) => {}
            Err(e) => report
                .rows
                .push(BatchRow::failed(&path.display().to_string(), &e)),
        }
    }
    write_outputs(cfg, &report)?;
    Ok(report)
}

fn process_sweep(
    path: &Path,
    cfg: &RunConfig,
    kinds: &[PerturbKind],
    a_lo: i32,
    a_hi: i32,
    report: &mut BatchReport,
) -> Result<()> {
    let m = prepare_model(path, cfg)?;
    let (_, base) = cut_once(&m, cfg, None)?;
    report.rows.push(ok_row(&m, base));
    let (v0, gamma0) = (base.v_in, base.area_cut);
    for &kind in kinds {
        for alpha in a_lo..=a_hi {
            let (_, metrics) = cut_once(&m, cfg, Some((kind, alpha)))?;
            let mut row = ok_row(&m, metrics);
            row.perturb_kind = Some(kind);
            row.alpha = Some(alpha);
            row.eps_v0 = Some((metrics.v_in - v0).abs() / v0.abs().max(f64::MIN_POSITIVE));
            row.eps_gamma0 =
                Some((metrics.area_cut - gamma0).abs() / gamma0.abs().max(f64::MIN_POSITIVE));
            report.rows.push(row);
        }
    }
    Ok(())
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn write_outputs(cfg: &RunConfig, report: &BatchReport) -> Result<()> {
    if let Some(path) = &cfg.report {
        std::fs::write(path, serde_json::to_string_pretty(report)?)?;
    }
    if let Some(path) = &cfg.csv {
        std::fs::write(path, csv_string(report))?;
    }
    Ok(())
}

const CSV_HEADER: &str = "model,status,perturb,alpha,n_faces,n_verts,box_x,box_y,box_z,\
v_in,v_out,v_box,area_stl,area_cut,eps_v,eps_gamma,eps_v0,eps_gamma0,\
t_parse,t_weld,t_grid,t_cut,t_metrics,message";

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt_num<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Flat CSV mirror of the JSON report, one line per row.
pub fn csv_string(report: &BatchReport) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in &report.rows {
        let m = r.metrics;
        let t = m.map(|m| m.timings).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            csv_field(&r.model),
            r.status.as_str(),
            r.perturb_kind.map(|k| k.label()).unwrap_or(""),
            opt_num(r.alpha),
            r.n_faces,
            r.n_verts,
            r.box_size[0],
            r.box_size[1],
            r.box_size[2],
            opt_num(m.map(|m| m.v_in)),
            opt_num(m.map(|m| m.v_out)),
            opt_num(m.map(|m| m.v_box)),
            opt_num(m.map(|m| m.area_stl)),
            opt_num(m.map(|m| m.area_cut)),
            opt_num(m.map(|m| m.eps_v)),
            opt_num(m.map(|m| m.eps_gamma)),
            opt_num(r.eps_v0),
            opt_num(r.eps_gamma0),
            t.parse,
            t.weld,
            t.grid,
            t.cut,
            t.metrics,
            csv_field(r.message.as_deref().unwrap_or("")),
        );
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

fn parse_alpha_range(s: &str) -> std::result::Result<(i32, i32), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected A:B, got {s}"))?;
    let lo: i32 = a.trim().parse().map_err(|e| format!("bad lower bound: {e}"))?;
    let hi: i32 = b.trim().parse().map_err(|e| format!("bad upper bound: {e}"))?;
    if lo < 1 || hi > 17 || lo > hi {
        return Err(format!("alpha range must satisfy 1 <= A <= B <= 17, got {lo}:{hi}"));
    }
    Ok((lo, hi))
}

/// Cuts STL surfaces against Cartesian background grids and reports volume
/// and surface accuracy per model.
#[derive(Parser, Debug)]
#[command(name = "cutcell", version)]
struct Cli {
    /// STL files, or builtin sample names: cube, torus, blob, staircase, hollow
    #[arg(long = "stl", required = true, num_args = 1..)]
    stl: Vec<PathBuf>,
    /// Cells along the longest bounding-box axis
    #[arg(long, default_value_t = 100)]
    nmax: usize,
    /// Minimum cells along the shortest bounding-box axis
    #[arg(long, default_value_t = 10)]
    nmin: usize,
    /// Bounding-box enlargement factor for the grid
    #[arg(long, default_value_t = 1.4)]
    scale: f64,
    /// Snap tolerance as a multiple of machine epsilon times the model extent
    #[arg(long = "snap-factor", default_value_t = 1e2)]
    snap_factor: f64,
    /// Coplanarity tolerance as a multiple of machine epsilon times the model extent
    #[arg(long = "hs-factor", default_value_t = 1e3)]
    hs_factor: f64,
    /// Run the perturbation sweep with this grid transformation
    #[arg(long, value_enum)]
    perturb: Option<PerturbKind>,
    /// Perturbation exponents A:B, grid moved by 10^-alpha for each alpha
    #[arg(long = "alpha-range", default_value = "1:17", value_parser = parse_alpha_range)]
    alpha_range: (i32, i32),
    /// Write the JSON report here
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the CSV mirror of the report here
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write VTK files per model into this directory
    #[arg(long)]
    vtk: Option<PathBuf>,
    /// Worker threads for the cell-parallel cut phase
    #[arg(long)]
    workers: Option<usize>,
    /// Also export exterior volume pieces to VTK
    #[arg(long, value_enum, default_value_t = Switch::Off)]
    exteriors: Switch,
    /// Vertex welding tolerance; 0 welds only bitwise-equal coordinates
    #[arg(long = "weld-tol", default_value_t = 0.0)]
    weld_tol: f64,
}

/// Entry point of the `cutcell` binary; returns the process exit code.
pub fn cli_main() -> i32 {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: could not configure {n} workers: {e}");
            return 1;
        }
    }
    let cfg = RunConfig {
        inputs: cli.stl,
        n_max: cli.nmax,
        n_min: cli.nmin,
        scale: cli.scale,
        snap_factor: cli.snap_factor,
        hs_factor: cli.hs_factor,
        perturb: cli.perturb,
        alpha_range: cli.alpha_range,
        report: cli.report,
        csv: cli.csv,
        vtk: cli.vtk,
        exteriors: cli.exteriors == Switch::On,
        weld_tol: cli.weld_tol,
        ..Default::default()
    };
    let run = if cfg.perturb.is_some() { run_robustness(&cfg) } else { run_batch(&cfg) };
    match run {
        Ok(report) => {
            print_summary(&report);
            i32::from(!report.all_ok())
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn print_summary(report: &BatchReport) {
    for r in &report.rows {
        let tag = match (r.perturb_kind, r.alpha) {
            (Some(k), Some(a)) => format!(" {} alpha={a}", k.label()),
            _ => String::new(),
        };
        match (&r.metrics, &r.message) {
            (Some(m), _) => println!(
                "{:<12} {}{}  eps_v={:.3e}  eps_gamma={:.3e}",
                r.model,
                r.status.as_str(),
                tag,
                m.eps_v,
                m.eps_gamma
            ),
            (None, msg) => println!(
                "{:<12} {}{}  {}",
                r.model,
                r.status.as_str(),
                tag,
                msg.as_deref().unwrap_or("")
            ),
        }
    }
}
