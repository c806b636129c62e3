//! Grids of the maximized CH value over efficiency and mode matching,
//! efficiency thresholds, and deterministic export.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bell::{CHResult, DisplacementSettings, SetupParams};
use crate::error::{check_unit, domain, Error, Result};
use crate::optimize::{derive_seed, maximize_ch, maximize_ch_with_starts, ParamVector, SimplexConfig};
use crate::states::StateFamily;

/// Offset above zero at which a CH value counts as a violation in exported
/// masks and threshold searches.
pub const CONTOUR_OFFSET: f64 = 1e-3;

/// Imaginary parts larger than this mark an optimum as genuinely complex.
pub const COMPLEX_SETTINGS_TOL: f64 = 1e-3;

/// Closed interval `[lo, hi]` sampled at `n` equally spaced points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl AxisRange {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        let r = AxisRange { lo, hi, n };
        r.validate()?;
        Ok(r)
    }

    /// `n` points ending at one, `1/n, 2/n, ..., 1`.
    pub fn unit(n: usize) -> Self {
        AxisRange { lo: 1.0 / n as f64, hi: 1.0, n }
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("range start", self.lo)?;
        check_unit("range end", self.hi)?;
        if self.n < 2 {
            return Err(domain(format!("resolution {} must be at least 2", self.n)));
        }
        if self.hi <= self.lo {
            return Err(domain(format!("range [{}, {}] is empty", self.lo, self.hi)));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        let step = (self.hi - self.lo) / (self.n - 1) as f64;
        (0..self.n).map(|k| if k + 1 == self.n { self.hi } else { self.lo + step * k as f64 }).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub family: StateFamily,
    pub eta: AxisRange,
    pub xi: AxisRange,
    pub p_dark: f64,
    /// Seed each cell additionally from its lower-efficiency neighbour's optimum.
    #[serde(default)]
    pub warm_start: bool,
    /// Worker threads; `None` uses the global pool.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl SweepSpec {
    pub fn new(family: StateFamily, eta: AxisRange, xi: AxisRange, p_dark: f64) -> Self {
        SweepSpec { family, eta, xi, p_dark, warm_start: false, workers: None }
    }

    pub fn validate(&self) -> Result<()> {
        self.eta.validate()?;
        self.xi.validate()?;
        check_unit("p_dark", self.p_dark)?;
        if self.workers == Some(0) {
            return Err(domain("worker count must be positive"));
        }
        Ok(())
    }
}

/// Maximized CH values on an efficiency x mode-matching grid; `cells[i][j]`
/// belongs to `eta_axis[i]` and `xi_axis[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub family: StateFamily,
    pub p_dark: f64,
    pub eta_axis: Vec<f64>,
    pub xi_axis: Vec<f64>,
    pub cells: Vec<Vec<CHResult>>,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        let increasing = |a: &[f64]| a.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&self.eta_axis) || !increasing(&self.xi_axis) {
            return Err(domain("grid axes must be strictly increasing"));
        }
        if self.cells.len() != self.eta_axis.len() || self.cells.iter().any(|row| row.len() != self.xi_axis.len()) {
            return Err(domain("grid cells do not match the axis lengths"));
        }
        Ok(())
    }

    pub fn ch_values(&self) -> Vec<Vec<f64>> {
        self.map_cells(|c| c.value)
    }

    pub fn settings(&self) -> Vec<Vec<DisplacementSettings>> {
        self.map_cells(|c| c.settings)
    }

    pub fn r_values(&self) -> Option<Vec<Vec<f64>>> {
        self.family.has_squeezing().then(|| self.map_cells(|c| c.settings.r.unwrap_or(0.0)))
    }

    /// Cells whose value exceeds `offset`.
    pub fn violation_mask(&self, offset: f64) -> Vec<Vec<bool>> {
        self.map_cells(|c| c.value > offset)
    }

    /// Cells whose optimal settings have a non-negligible imaginary part.
    pub fn complex_region(&self) -> Vec<Vec<bool>> {
        self.map_cells(|c| c.settings.max_imag() > COMPLEX_SETTINGS_TOL)
    }

    fn map_cells<T>(&self, f: impl Fn(&CHResult) -> T) -> Vec<Vec<T>> {
        self.cells.iter().map(|row| row.iter().map(&f).collect()).collect()
    }
}

/// Optimizer configuration used for cell `(i, j)` of a sweep.
pub fn cell_config(cfg: &SimplexConfig, i: usize, j: usize) -> SimplexConfig {
    SimplexConfig { rng_seed: derive_seed(cfg.rng_seed, &[i as u64, j as u64]), ..*cfg }
}

fn with_workers<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| domain(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

/// Maximizes CH at every grid point. Each cell uses its own seed derived
/// from the base seed and its indices, so results do not depend on the
/// worker count or on evaluation order.
pub fn sweep_ch(spec: &SweepSpec, cfg: &SimplexConfig) -> Result<SweepGrid> {
    spec.validate()?;
    cfg.validate()?;
    let eta_axis = spec.eta.points();
    let xi_axis = spec.xi.points();
    let family = spec.family;

    let columns: Vec<Result<Vec<CHResult>>> = with_workers(spec.workers, || {
        xi_axis
            .par_iter()
            .enumerate()
            .map(|(j, &xi)| {
                let mut column: Vec<CHResult> = Vec::with_capacity(eta_axis.len());
                for (i, &eta) in eta_axis.iter().enumerate() {
                    let p = SetupParams::new(eta, xi, spec.p_dark)?;
                    let cell_cfg = cell_config(cfg, i, j);
                    let res = match column.last().filter(|_| spec.warm_start) {
                        Some(prev) => {
                            let seed = ParamVector::from_settings(&prev.settings, family)?;
                            maximize_ch_with_starts(family, &p, &cell_cfg, &[seed])?
                        }
                        None => maximize_ch(family, &p, &cell_cfg)?,
                    };
                    column.push(res);
                }
                Ok(column)
            })
            .collect()
    })?;

    let columns = columns.into_iter().collect::<Result<Vec<_>>>()?;
    let cells = (0..eta_axis.len()).map(|i| columns.iter().map(|col| col[i].clone()).collect()).collect();
    Ok(SweepGrid { family, p_dark: spec.p_dark, eta_axis, xi_axis, cells })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub family: StateFamily,
    pub eta_threshold: f64,
    pub xi: f64,
    pub p_dark: f64,
    /// `ch_max(lo) <= level < ch_max(hi)`.
    pub bracket: (f64, f64),
    pub tol: f64,
    pub level: f64,
}

/// Maximized CH value at one parameter point.
pub fn ch_max(family: StateFamily, eta: f64, xi: f64, p_dark: f64, cfg: &SimplexConfig) -> Result<f64> {
    Ok(maximize_ch(family, &SetupParams::new(eta, xi, p_dark)?, cfg)?.value)
}

/// Smallest efficiency at which the maximized CH value exceeds `level`,
/// located by a coarse downward scan from `eta = 1` followed by bisection
/// to a bracket no wider than `tol`.
pub fn find_eta_threshold(
    family: StateFamily,
    xi: f64,
    p_dark: f64,
    tol: f64,
    level: f64,
    cfg: &SimplexConfig,
) -> Result<ThresholdResult> {
    check_unit("xi", xi)?;
    check_unit("p_dark", p_dark)?;
    if !(tol.is_finite() && tol >= 1e-5) {
        return Err(domain(format!("threshold tolerance {tol} must be at least 1e-5")));
    }
    if !(level.is_finite() && level >= 0.0) {
        return Err(domain(format!("threshold level {level} must be non-negative")));
    }
    let no_change = || Error::NoSignChange { level, xi, p_dark };
    let above = |eta: f64| ch_max(family, eta, xi, p_dark, cfg).map(|v| v > level);

    if !above(1.0)? {
        return Err(no_change());
    }
    const SCAN_STEP: f64 = 0.05;
    let mut hi = 1.0;
    let mut lo = None;
    for k in 1..20 {
        let eta = 1.0 - SCAN_STEP * k as f64;
        if above(eta)? {
            hi = eta;
        } else {
            lo = Some(eta);
            break;
        }
    }
    let mut lo = lo.ok_or_else(no_change)?;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if above(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(ThresholdResult {
        family,
        eta_threshold: 0.5 * (lo + hi),
        xi,
        p_dark,
        bracket: (lo, hi),
        tol,
        level,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            other => Err(Error::Parse(format!("unknown export format '{other}'"))),
        }
    }
}

/// Every float carries 17 significant digits.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// JSON formatter writing floats with 17 significant digits.
pub(crate) struct FixedDigits;

impl serde_json::ser::Formatter for FixedDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }
}

/// Serializes `value` as JSON with fixed-precision floats.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedDigits);
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct GridDocument {
    contour_offset: f64,
    #[serde(flatten)]
    grid: SweepGrid,
    mask: Vec<Vec<u8>>,
    complex_region: Vec<Vec<u8>>,
}

fn as_bits(m: Vec<Vec<bool>>) -> Vec<Vec<u8>> {
    m.into_iter().map(|row| row.into_iter().map(u8::from).collect()).collect()
}

/// Writes the grid as CSV (one row per cell, `eta` outermost) or JSON.
/// The `mask` entry is 1 iff the cell's value exceeds `contour_offset`.
pub fn export_grid<W: Write>(grid: &SweepGrid, format: ExportFormat, contour_offset: f64, out: &mut W) -> Result<()> {
    grid.validate()?;
    match format {
        ExportFormat::Csv => {
            let with_r = grid.family.has_squeezing();
            let mut header = String::from("eta,xi,ch,re_a1,re_a2,im_a2,re_b1,im_b1,re_b2,im_b2");
            if with_r {
                header.push_str(",r");
            }
            header.push_str(",mask\n");
            out.write_all(header.as_bytes())?;
            for (i, row) in grid.cells.iter().enumerate() {
                for (j, cell) in row.iter().enumerate() {
                    let d = &cell.settings;
                    let mut fields: Vec<String> = [
                        grid.eta_axis[i],
                        grid.xi_axis[j],
                        cell.value,
                        d.a1.re,
                        d.a2.re,
                        d.a2.im,
                        d.b1.re,
                        d.b1.im,
                        d.b2.re,
                        d.b2.im,
                    ]
                    .into_iter()
                    .map(fmt_f64)
                    .collect();
                    if with_r {
                        fields.push(fmt_f64(d.r.unwrap_or(0.0)));
                    }
                    fields.push(u8::from(cell.value > contour_offset).to_string());
                    out.write_all(fields.join(",").as_bytes())?;
                    out.write_all(b"\n")?;
                }
            }
        }
        ExportFormat::Json => {
            let doc = GridDocument {
                contour_offset,
                mask: as_bits(grid.violation_mask(contour_offset)),
                complex_region: as_bits(grid.complex_region()),
                grid: grid.clone(),
            };
            out.write_all(&to_json_bytes(&doc)?)?;
        }
    }
    Ok(())
}

/// Reads a grid written by [`export_grid`] in JSON form, returning it with
/// the contour offset it was exported with.
pub fn read_grid_json(bytes: &[u8]) -> Result<(SweepGrid, f64)> {
    let doc: GridDocument = serde_json::from_slice(bytes)?;
    doc.grid.validate()?;
    Ok((doc.grid, doc.contour_offset))
}
