//! Cartesian grid enumeration, per-point reachability classification,
//! deterministic parallel sweeps and architecture comparison.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{GeometryParams, JointLimits};
use crate::error::{Error, ReasonCode, Result};
use crate::kinematics::{ik, Arch, Branch, ChainVariant, JointVector, RootChoice, SolveOptions};
use crate::rcm::{tip_to_pose, TipPoint};

pub mod export;

pub use export::{
    export, read_csv, read_json, write_csv, write_json, write_plot_data, write_ply, ExportFormat,
};

/// Closed range `[min, max]` along one grid axis, mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub min: f64,
    pub max: f64,
}

impl AxisRange {
    pub const fn new(min: f64, max: f64) -> Self {
        AxisRange { min, max }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_range: AxisRange,
    pub y_range: AxisRange,
    pub z_range: AxisRange,
    pub increment: f64,
}

impl Default for GridSpec {
    /// `X ∈ [0, 300]`, `Y ∈ [-500, 500]`, `Z ∈ [-350, 0]` mm, 2 mm step.
    fn default() -> Self {
        GridSpec {
            x_range: AxisRange::new(0.0, 300.0),
            y_range: AxisRange::new(-500.0, 500.0),
            z_range: AxisRange::new(-350.0, 0.0),
            increment: 2.0,
        }
    }
}

impl GridSpec {
    pub fn with_increment(mut self, increment: f64) -> Self {
        self.increment = increment;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.increment.is_finite() && self.increment > 0.0) {
            return Err(Error::Parse(format!(
                "grid increment must be positive, got {}",
                self.increment
            )));
        }
        for (name, r) in [
            ("x", self.x_range),
            ("y", self.y_range),
            ("z", self.z_range),
        ] {
            if !(r.min.is_finite() && r.max.is_finite() && r.min <= r.max) {
                return Err(Error::Parse(format!(
                    "grid {name} range [{}, {}] is empty",
                    r.min, r.max
                )));
            }
        }
        Ok(())
    }

    /// `floor(span / increment) + 1`, with a relative slack of 1e-12 so that
    /// spans that are exact multiples survive decimal round-off.
    pub fn axis_count(&self, r: AxisRange) -> usize {
        let n = ((r.max - r.min) / self.increment * (1.0 + 1e-12)).floor();
        n as usize + 1
    }

    pub fn counts(&self) -> [usize; 3] {
        [
            self.axis_count(self.x_range),
            self.axis_count(self.y_range),
            self.axis_count(self.z_range),
        ]
    }

    pub fn total(&self) -> usize {
        self.counts().iter().product()
    }

    /// Index-based coordinate `min + i * increment` (no accumulation).
    #[inline]
    pub fn coord(&self, r: AxisRange, i: usize) -> f64 {
        r.min + i as f64 * self.increment
    }
}

/// Grid points in order: x outermost, then y, then z innermost.
pub fn enumerate_grid(spec: &GridSpec) -> impl Iterator<Item = TipPoint> + '_ {
    let [nx, ny, nz] = spec.counts();
    (0..nx).flat_map(move |i| {
        let x = spec.coord(spec.x_range, i);
        (0..ny).flat_map(move |j| {
            let y = spec.coord(spec.y_range, j);
            (0..nz).map(move |k| TipPoint::new(x, y, spec.coord(spec.z_range, k)))
        })
    })
}

/// Frame in which grid coordinates are expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridFrame {
    /// Grid points are tip coordinates about the RCM.
    #[default]
    Rcm,
    /// Grid points are in the robot base frame; the RCM-frame tip is the
    /// grid point shifted by `(l01, l02, l03)`.
    Base,
}

impl FromStr for GridFrame {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "rcm" => Ok(GridFrame::Rcm),
            "base" => Ok(GridFrame::Base),
            _ => Err(format!("unknown frame `{s}`")),
        }
    }
}

impl GridFrame {
    pub fn to_rcm(self, p: TipPoint, geom: &GeometryParams) -> TipPoint {
        match self {
            GridFrame::Rcm => p,
            GridFrame::Base => TipPoint::new(p.x + geom.l01, p.y + geom.l02, p.z + geom.l03),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassifyOptions {
    pub variant: ChainVariant,
    pub branch: Branch,
    pub root: RootChoice,
    pub frame: GridFrame,
}

impl ClassifyOptions {
    fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            variant: self.variant,
            branch: self.branch,
            root: self.root,
            check_limits: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityRecord {
    /// Tip coordinates in the RCM frame.
    pub tip: TipPoint,
    pub arch: Arch,
    pub valid: bool,
    pub reason: ReasonCode,
    pub joints: Option<JointVector>,
}

impl ValidityRecord {
    fn rejected(tip: TipPoint, arch: Arch, reason: ReasonCode) -> Self {
        ValidityRecord {
            tip,
            arch,
            valid: false,
            reason,
            joints: None,
        }
    }
}

/// Classifies one RCM-frame tip point with the roll angle fixed to zero.
///
/// Constraints are applied in [`ReasonCode`] order: degenerate tip,
/// insertion range, real solvability, then joint limits `q1..q4`.
pub fn classify_point(
    tip: &TipPoint,
    arch: Arch,
    geom: &GeometryParams,
    limits: &JointLimits,
    opts: &ClassifyOptions,
) -> ValidityRecord {
    classify_inner(tip, arch, geom, limits, opts).0
}

/// Classification plus a flag raised when the ATHENA-2 root check failed.
fn classify_inner(
    tip: &TipPoint,
    arch: Arch,
    geom: &GeometryParams,
    limits: &JointLimits,
    opts: &ClassifyOptions,
) -> (ValidityRecord, bool) {
    let pose = match tip_to_pose(tip, 0.0, geom, limits) {
        Ok(p) => p.pose,
        Err(e) => {
            let reason = e.reason().unwrap_or(ReasonCode::DegenerateTip);
            return (ValidityRecord::rejected(*tip, arch, reason), false);
        }
    };
    match ik(arch, &pose, geom, limits, &opts.solve_options()) {
        Ok(sol) => match sol.violations.first() {
            Some(v) => (ValidityRecord::rejected(*tip, arch, v.reason()), false),
            None => (
                ValidityRecord {
                    tip: *tip,
                    arch,
                    valid: true,
                    reason: ReasonCode::Ok,
                    joints: Some(sol.joints),
                },
                false,
            ),
        },
        Err(e) => {
            let check_failed = matches!(e, Error::RootVerification { .. });
            (
                ValidityRecord::rejected(*tip, arch, ReasonCode::NoRealSolution),
                check_failed,
            )
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Storage {
    /// Histogram and counts only.
    CountOnly,
    /// Keep valid records.
    #[default]
    ValidOnly,
    /// Keep every record (13.3M records on the default grid).
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SweepOptions {
    pub classify: ClassifyOptions,
    pub storage: Storage,
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceResult {
    pub arch: Arch,
    pub grid: GridSpec,
    pub total_candidates: usize,
    pub valid_count: usize,
    pub reason_histogram: BTreeMap<ReasonCode, usize>,
    pub records: Vec<ValidityRecord>,
    /// Points where the analytic crank root disagreed with its numeric check.
    #[serde(default)]
    pub root_check_failures: usize,
}

impl WorkspaceResult {
    /// A result carrying counts only, e.g. for comparing published totals.
    pub fn from_counts(arch: Arch, grid: GridSpec, valid_count: usize) -> Self {
        let total = grid.total();
        let mut hist = empty_histogram();
        hist.insert(ReasonCode::Ok, valid_count);
        WorkspaceResult {
            arch,
            grid,
            total_candidates: total,
            valid_count,
            reason_histogram: hist,
            records: Vec::new(),
            root_check_failures: 0,
        }
    }

    pub fn valid_records(&self) -> impl Iterator<Item = &ValidityRecord> {
        self.records.iter().filter(|r| r.valid)
    }

    /// Approximate workspace volume, `valid_count * increment^3`, mm³.
    pub fn volume_mm3(&self) -> f64 {
        self.valid_count as f64 * self.grid.increment.powi(3)
    }

    /// Appends a partial result over other slices of the same grid.
    pub fn merge(mut self, other: WorkspaceResult) -> Result<Self> {
        if self.arch != other.arch || self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        self.total_candidates += other.total_candidates;
        self.valid_count += other.valid_count;
        for (k, v) in other.reason_histogram {
            *self.reason_histogram.entry(k).or_insert(0) += v;
        }
        self.records.extend(other.records);
        self.root_check_failures += other.root_check_failures;
        Ok(self)
    }

    pub fn rejected_count(&self) -> usize {
        self.reason_histogram
            .iter()
            .filter(|(k, _)| **k != ReasonCode::Ok)
            .map(|(_, v)| v)
            .sum()
    }
}

pub(crate) fn empty_histogram() -> BTreeMap<ReasonCode, usize> {
    ReasonCode::ALL.iter().map(|r| (*r, 0)).collect()
}

#[derive(Default)]
struct SlicePartial {
    hist: [usize; 8],
    records: Vec<ValidityRecord>,
    root_failures: usize,
}

fn sweep_slice(
    i: usize,
    arch: Arch,
    spec: &GridSpec,
    geom: &GeometryParams,
    limits: &JointLimits,
    opts: &SweepOptions,
) -> SlicePartial {
    let [_, ny, nz] = spec.counts();
    let x = spec.coord(spec.x_range, i);
    let mut part = SlicePartial::default();
    for j in 0..ny {
        let y = spec.coord(spec.y_range, j);
        for k in 0..nz {
            let grid_point = TipPoint::new(x, y, spec.coord(spec.z_range, k));
            let tip = opts.classify.frame.to_rcm(grid_point, geom);
            let (rec, check_failed) = classify_inner(&tip, arch, geom, limits, &opts.classify);
            part.hist[rec.reason.index()] += 1;
            part.root_failures += usize::from(check_failed);
            let keep = match opts.storage {
                Storage::CountOnly => false,
                Storage::ValidOnly => rec.valid,
                Storage::All => true,
            };
            if keep {
                part.records.push(rec);
            }
        }
    }
    part
}

/// Classifies every grid point.
///
/// Work is split into x-slices evaluated in parallel and merged in slice
/// order, so records, counts and histogram are identical for any worker count.
pub fn sweep(
    arch: Arch,
    spec: &GridSpec,
    geom: &GeometryParams,
    limits: &JointLimits,
    opts: &SweepOptions,
) -> Result<WorkspaceResult> {
    spec.validate()?;
    sweep_slices(arch, spec, 0..spec.counts()[0], geom, limits, opts)
}

/// Classifies the x-slices `slices` of the grid only.
///
/// `total_candidates` counts the covered points; [`WorkspaceResult::merge`]
/// reassembles a partition of the slices into the full result.
pub fn sweep_slices(
    arch: Arch,
    spec: &GridSpec,
    slices: Range<usize>,
    geom: &GeometryParams,
    limits: &JointLimits,
    opts: &SweepOptions,
) -> Result<WorkspaceResult> {
    spec.validate()?;
    let [nx, ny, nz] = spec.counts();
    let slices = slices.start.min(nx)..slices.end.min(nx);
    let covered = slices.len() * ny * nz;
    let run = || -> Vec<SlicePartial> {
        slices
            .clone()
            .into_par_iter()
            .map(|i| sweep_slice(i, arch, spec, geom, limits, opts))
            .collect()
    };
    let parts = match opts.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Parse(format!("cannot start worker pool: {e}")))?
            .install(run),
        None => run(),
    };

    let mut hist = [0usize; 8];
    let mut records = Vec::new();
    let mut root_failures = 0;
    for p in parts {
        for (h, v) in hist.iter_mut().zip(p.hist) {
            *h += v;
        }
        records.extend(p.records);
        root_failures += p.root_failures;
    }
    let reason_histogram: BTreeMap<ReasonCode, usize> = ReasonCode::ALL
        .iter()
        .map(|r| (*r, hist[r.index()]))
        .collect();
    Ok(WorkspaceResult {
        arch,
        grid: *spec,
        total_candidates: covered,
        valid_count: hist[ReasonCode::Ok.index()],
        reason_histogram,
        records,
        root_check_failures: root_failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchSummary {
    pub arch: Arch,
    pub valid_count: usize,
    pub total_candidates: usize,
    pub volume_mm3: f64,
    pub reason_histogram: BTreeMap<ReasonCode, usize>,
}

impl From<&WorkspaceResult> for ArchSummary {
    fn from(r: &WorkspaceResult) -> Self {
        ArchSummary {
            arch: r.arch,
            valid_count: r.valid_count,
            total_candidates: r.total_candidates,
            volume_mm3: r.volume_mm3(),
            reason_histogram: r.reason_histogram.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub grid: GridSpec,
    pub a: ArchSummary,
    pub b: ArchSummary,
    /// `(b / a - 1) * 100`; `None` when `a` has no valid points.
    pub ratio_percent: Option<f64>,
}

pub fn compare(a: &WorkspaceResult, b: &WorkspaceResult) -> Result<ComparisonReport> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    let ratio_percent =
        (a.valid_count > 0).then(|| (b.valid_count as f64 / a.valid_count as f64 - 1.0) * 100.0);
    Ok(ComparisonReport {
        grid: a.grid,
        a: a.into(),
        b: b.into(),
        ratio_percent,
    })
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<10} {:>12} {:>12} {:>16}",
            "arch", "valid", "total", "volume_cm3"
        )?;
        for s in [&self.a, &self.b] {
            writeln!(
                f,
                "{:<10} {:>12} {:>12} {:>16.3}",
                s.arch.label(),
                s.valid_count,
                s.total_candidates,
                s.volume_mm3 / 1000.0
            )?;
        }
        match self.ratio_percent {
            Some(r) => writeln!(
                f,
                "difference ({} vs {}): {:+.2}%",
                self.b.arch.label(),
                self.a.arch.label(),
                r
            )?,
            None => writeln!(
                f,
                "difference: undefined (no valid points in {})",
                self.a.arch.label()
            )?,
        }
        writeln!(
            f,
            "{:<18} {:>12} {:>12}",
            "reason",
            self.a.arch.label(),
            self.b.arch.label()
        )?;
        for code in ReasonCode::ALL {
            let ca = self.a.reason_histogram.get(&code).copied().unwrap_or(0);
            let cb = self.b.reason_histogram.get(&code).copied().unwrap_or(0);
            writeln!(f, "{:<18} {:>12} {:>12}", code.as_str(), ca, cb)?;
        }
        Ok(())
    }
}
