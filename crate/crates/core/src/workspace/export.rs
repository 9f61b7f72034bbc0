//! CSV / PLY / JSON export of sweep results, plus plotting slices.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{empty_histogram, GridSpec, ValidityRecord, WorkspaceResult};
use crate::error::{Error, ReasonCode, Result};
use crate::kinematics::{Arch, JointVector};
use crate::rcm::TipPoint;

pub const CSV_HEADER: &str = "x_mm,y_mm,z_mm,arch,valid,reason,q1,q2,q3,q4";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Ply,
    Json,
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ExportFormat::Csv),
            "ply" => Ok(ExportFormat::Ply),
            "json" => Ok(ExportFormat::Json),
            other => Err(Error::Parse(format!("unsupported export format `{other}`"))),
        }
    }
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Csv => "csv",
            ExportFormat::Ply => "ply",
            ExportFormat::Json => "json",
        }
    }
}

/// Writes `result` to `path` in `format`.
pub fn export(result: &WorkspaceResult, format: ExportFormat, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        ExportFormat::Csv => write_csv(result, &mut w)?,
        ExportFormat::Ply => write_ply(result, &mut w)?,
        ExportFormat::Json => write_json(result, true, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

/// One row per stored record; joint columns are empty for rejected points.
/// Lengths in mm and angles in rad, six fractional digits.
pub fn write_csv<W: Write>(result: &WorkspaceResult, w: &mut W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in &result.records {
        write!(
            w,
            "{:.6},{:.6},{:.6},{},{},{}",
            r.tip.x, r.tip.y, r.tip.z, r.arch, r.valid, r.reason
        )?;
        match r.joints {
            Some(q) => writeln!(w, ",{:.6},{:.6},{:.6},{:.6}", q.q1, q.q2, q.q3, q.q4)?,
            None => writeln!(w, ",,,,")?,
        }
    }
    Ok(())
}

fn field<T: FromStr>(cols: &[&str], i: usize, line: usize) -> Result<T> {
    cols.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parse(format!("csv line {line}: bad column {}", i + 1)))
}

/// Parses records written by [`write_csv`].
pub fn read_csv<R: Read>(r: R) -> Result<Vec<ValidityRecord>> {
    let mut lines = BufReader::new(r).lines();
    let header = lines.next().transpose()?;
    if header.as_deref().map(str::trim_end) != Some(CSV_HEADER) {
        return Err(Error::Parse("csv header missing or unexpected".into()));
    }
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let ln = n + 2;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 10 {
            return Err(Error::Parse(format!(
                "csv line {ln}: expected 10 columns, got {}",
                cols.len()
            )));
        }
        let tip = TipPoint::new(
            field(&cols, 0, ln)?,
            field(&cols, 1, ln)?,
            field(&cols, 2, ln)?,
        );
        let arch: Arch = cols[3].parse().map_err(Error::Parse)?;
        let valid: bool = field(&cols, 4, ln)?;
        let reason: ReasonCode = cols[5].parse().map_err(Error::Parse)?;
        let joints = if cols[6].is_empty() {
            None
        } else {
            Some(JointVector::new(
                arch,
                field(&cols, 6, ln)?,
                field(&cols, 7, ln)?,
                field(&cols, 8, ln)?,
                field(&cols, 9, ln)?,
            ))
        };
        if valid != (reason == ReasonCode::Ok) || valid != joints.is_some() {
            return Err(Error::Parse(format!(
                "csv line {ln}: inconsistent valid/reason/joints"
            )));
        }
        out.push(ValidityRecord {
            tip,
            arch,
            valid,
            reason,
            joints,
        });
    }
    Ok(out)
}

/// ASCII PLY 1.0 with the valid points as vertices.
pub fn write_ply<W: Write>(result: &WorkspaceResult, w: &mut W) -> Result<()> {
    let n = result.valid_records().count();
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(
        w,
        "comment {} workspace, valid points, mm",
        result.arch.label()
    )?;
    writeln!(w, "element vertex {n}")?;
    writeln!(w, "property float x")?;
    writeln!(w, "property float y")?;
    writeln!(w, "property float z")?;
    writeln!(w, "end_header")?;
    for r in result.valid_records() {
        writeln!(
            w,
            "{} {} {}",
            r.tip.x as f32, r.tip.y as f32, r.tip.z as f32
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct JsonPoint {
    x: f64,
    y: f64,
    z: f64,
    q: [f64; 4],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct JsonResult {
    spec: GridSpec,
    arch: Arch,
    valid_count: usize,
    total_candidates: usize,
    reason_histogram: BTreeMap<ReasonCode, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points: Option<Vec<JsonPoint>>,
}

/// JSON summary; with `with_points` the valid points and their joints are included.
pub fn write_json<W: Write>(result: &WorkspaceResult, with_points: bool, w: &mut W) -> Result<()> {
    let doc = JsonResult {
        spec: result.grid,
        arch: result.arch,
        valid_count: result.valid_count,
        total_candidates: result.total_candidates,
        reason_histogram: result.reason_histogram.clone(),
        points: with_points.then(|| {
            result
                .valid_records()
                .filter_map(|r| {
                    r.joints.map(|q| JsonPoint {
                        x: r.tip.x,
                        y: r.tip.y,
                        z: r.tip.z,
                        q: q.to_array(),
                    })
                })
                .collect()
        }),
    };
    serde_json::to_writer_pretty(&mut *w, &doc)?;
    writeln!(w)?;
    Ok(())
}

/// Reads a JSON export back; stored points become valid records.
pub fn read_json<R: Read>(r: R) -> Result<WorkspaceResult> {
    let doc: JsonResult = serde_json::from_reader(r)?;
    let mut hist = empty_histogram();
    hist.extend(doc.reason_histogram);
    let records = doc
        .points
        .unwrap_or_default()
        .into_iter()
        .map(|p| ValidityRecord {
            tip: TipPoint::new(p.x, p.y, p.z),
            arch: doc.arch,
            valid: true,
            reason: ReasonCode::Ok,
            joints: Some(JointVector::new(doc.arch, p.q[0], p.q[1], p.q[2], p.q[3])),
        })
        .collect();
    Ok(WorkspaceResult {
        arch: doc.arch,
        grid: doc.spec,
        total_candidates: doc.total_candidates,
        valid_count: doc.valid_count,
        reason_histogram: hist,
        records,
        root_check_failures: 0,
    })
}

/// Writes one `slice_z<z>.csv` (columns `x_mm,y_mm`) per z level holding
/// valid points, and `points.dat` with whitespace-separated `x y z` rows.
/// Returns the number of slice files written.
pub fn write_plot_data(result: &WorkspaceResult, dir: &Path) -> Result<usize> {
    fs::create_dir_all(dir)?;
    let mut slices: BTreeMap<i64, Vec<(f64, f64)>> = BTreeMap::new();
    let mut dat = BufWriter::new(File::create(dir.join("points.dat"))?);
    writeln!(
        dat,
        "# {} valid points: x_mm y_mm z_mm",
        result.arch.label()
    )?;
    for r in result.valid_records() {
        writeln!(dat, "{:.6} {:.6} {:.6}", r.tip.x, r.tip.y, r.tip.z)?;
        // z levels keyed in micrometres
        slices
            .entry((r.tip.z * 1000.0).round() as i64)
            .or_default()
            .push((r.tip.x, r.tip.y));
    }
    dat.flush()?;
    for (key, pts) in &slices {
        let name = format!("slice_z{:+.3}.csv", *key as f64 / 1000.0);
        let mut w = BufWriter::new(File::create(dir.join(name))?);
        writeln!(w, "x_mm,y_mm")?;
        for (x, y) in pts {
            writeln!(w, "{x:.6},{y:.6}")?;
        }
        w.flush()?;
    }
    Ok(slices.len())
}
