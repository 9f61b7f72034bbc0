//! Command-line front end. Angles are degrees here and radians in the library.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use athena_kin::config::{default_geometry, load_config, Config, Strictness, DEFAULT_CONFIG_JSON};
use athena_kin::jacobian::{
    singularity_scan, ScanOptions, ScanReport, DEFAULT_SINGULARITY_THRESHOLD,
};
use athena_kin::kinematics::newton::default_seed;
use athena_kin::kinematics::{
    fk, ik, residuals, solve_q4, Arch, Branch, ChainVariant, FkSettings, JointVector, RootChoice,
    SolveOptions,
};
use athena_kin::rcm::{pose_to_tip, TaskPose};
use athena_kin::stiffness::{
    lumped_tip_stiffness, matched_pose, published_rows, stiffness_from_deflection,
    stiffness_report, JointStiffness,
};
use athena_kin::workspace::export::{
    read_csv, read_json, write_csv, write_json, write_plot_data, write_ply,
};
use athena_kin::workspace::{
    compare, sweep, AxisRange, ClassifyOptions, ExportFormat, GridFrame, GridSpec, Storage,
    SweepOptions, WorkspaceResult,
};
use athena_kin::Error;

/// Stdout writes; a closed pipe (e.g. `| head`) ends the process quietly.
macro_rules! out {
    ($($arg:tt)*) => {
        emit(format_args!($($arg)*))
    };
}

macro_rules! outln {
    () => {
        emit(format_args!("\n"))
    };
    ($($arg:tt)*) => {
        emit(format_args!("{}\n", format_args!($($arg)*)))
    };
}

fn emit(args: std::fmt::Arguments<'_>) {
    if let Err(e) = std::io::stdout().lock().write_fmt(args) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: {e}");
        std::process::exit(4);
    }
}

#[derive(Parser, Debug, Serialize)]
#[command(
    name = "athena-kin",
    version,
    about = "ATHENA-1 / ATHENA-2 kinematics and workspace toolkit"
)]
#[command(allow_negative_numbers = true)]
struct Cli {
    /// Configuration file (JSON); built-in defaults when absent.
    #[arg(long, global = true, env = "ATHENA_KIN_CONFIG")]
    config: Option<PathBuf>,
    /// Drop unknown configuration keys instead of rejecting them.
    #[arg(long, global = true)]
    lenient: bool,
    #[arg(long, global = true, value_enum, default_value_t = ArchArg::Athena1)]
    arch: ArchArg,
    #[arg(long, global = true, value_enum, default_value_t = VariantArg::Literal)]
    variant: VariantArg,
    /// Sign of the chain coordinate: + or -.
    #[arg(long, global = true, default_value = "+", allow_hyphen_values = true, value_parser = parse_branch)]
    branch: BranchArg,
    /// Which in-range ATHENA-2 crank root to return.
    #[arg(long, global = true, value_enum, default_value_t = RootArg::MinAbs)]
    root: RootArg,
    /// Worker threads for sweeps and scans.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    workers: Option<u32>,
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,
    /// Print a run manifest (JSON) to stderr.
    #[arg(long, global = true)]
    manifest: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
enum ArchArg {
    Athena1,
    Athena2,
}

impl From<ArchArg> for Arch {
    fn from(a: ArchArg) -> Arch {
        match a {
            ArchArg::Athena1 => Arch::Athena1,
            ArchArg::Athena2 => Arch::Athena2,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
enum VariantArg {
    Literal,
    Symmetrized,
}

#[derive(Clone, Copy, Debug, Serialize)]
enum BranchArg {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

fn parse_branch(s: &str) -> Result<BranchArg, String> {
    match s.parse::<Branch>()? {
        Branch::Plus => Ok(BranchArg::Plus),
        Branch::Minus => Ok(BranchArg::Minus),
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum RootArg {
    MinAbs,
    Other,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq)]
#[serde(rename_all = "lowercase")]
enum FormatArg {
    Csv,
    Ply,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, Default)]
#[serde(rename_all = "lowercase")]
enum FrameArg {
    #[default]
    Rcm,
    Base,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
enum Command {
    /// Joint values for a task pose.
    #[command(allow_negative_numbers = true)]
    Ik(IkArgs),
    /// Task pose for joint values.
    #[command(allow_negative_numbers = true)]
    Fk(FkArgs),
    /// Grid sweep of the reachable workspace.
    #[command(allow_negative_numbers = true)]
    Workspace(WorkspaceArgs),
    /// Compare two workspace results.
    #[command(allow_negative_numbers = true)]
    Compare(CompareArgs),
    /// Jacobian singularity scan over a workspace result.
    #[command(allow_negative_numbers = true)]
    Singularity(SingularityArgs),
    /// Stiffness table, or K = F / delta for a single measurement.
    #[command(allow_negative_numbers = true)]
    Stiffness(StiffnessArgs),
}

#[derive(Args, Debug, Serialize)]
struct IkArgs {
    /// Azimuth psi, deg.
    #[arg(long)]
    psi: f64,
    /// Polar angle theta, deg.
    #[arg(long)]
    theta: f64,
    /// Tip roll phi, deg.
    #[arg(long, default_value_t = 0.0)]
    phi: f64,
    /// Insertion length, mm.
    #[arg(long = "l-ins")]
    l_ins: f64,
    /// Print the scaled residuals of the returned joints.
    #[arg(long)]
    verify: bool,
    /// Treat joint-limit violations as failures (exit 2).
    #[arg(long)]
    check_limits: bool,
}

#[derive(Args, Debug, Serialize)]
struct FkArgs {
    /// mm
    #[arg(long)]
    q1: Option<f64>,
    /// mm
    #[arg(long)]
    q2: Option<f64>,
    /// mm on ATHENA-1, deg on ATHENA-2.
    #[arg(long)]
    q3: Option<f64>,
    /// deg
    #[arg(long)]
    q4: Option<f64>,
    /// Starting pose: psi theta phi (deg) and l_ins (mm).
    #[arg(long, num_args = 4, value_names = ["PSI", "THETA", "PHI", "L_INS"])]
    seed: Option<Vec<f64>>,
}

#[derive(Args, Debug, Serialize, Clone)]
struct GridArgs {
    #[arg(long, default_value_t = 0.0)]
    x_min: f64,
    #[arg(long, default_value_t = 300.0)]
    x_max: f64,
    #[arg(long, default_value_t = -500.0)]
    y_min: f64,
    #[arg(long, default_value_t = 500.0)]
    y_max: f64,
    #[arg(long, default_value_t = -350.0)]
    z_min: f64,
    #[arg(long, default_value_t = 0.0)]
    z_max: f64,
    /// Grid increment, mm.
    #[arg(long)]
    step: Option<f64>,
    /// Frame of the grid coordinates.
    #[arg(long, value_enum, default_value_t = FrameArg::Rcm)]
    frame: FrameArg,
}

impl GridArgs {
    fn spec(&self, default_step: f64) -> GridSpec {
        GridSpec {
            x_range: AxisRange::new(self.x_min, self.x_max),
            y_range: AxisRange::new(self.y_min, self.y_max),
            z_range: AxisRange::new(self.z_min, self.z_max),
            increment: self.step.unwrap_or(default_step),
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct WorkspaceArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Count only; nothing is stored or exported.
    #[arg(long)]
    count_only: bool,
    /// Export formats (repeatable).
    #[arg(long, value_enum)]
    format: Vec<FormatArg>,
    /// Store and export only valid points (default).
    #[arg(long, conflicts_with = "all_records")]
    valid_only: bool,
    /// Store every classified point, including rejected ones.
    #[arg(long)]
    all_records: bool,
    /// Output path; the extension is replaced per format.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Directory for per-slice plotting files.
    #[arg(long)]
    plot_data: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct CompareArgs {
    /// Two workspace JSON exports: first, second.
    #[arg(num_args = 0..=2)]
    files: Vec<PathBuf>,
    /// Valid counts of the first and second architecture.
    #[arg(long, num_args = 2, value_names = ["A", "B"], conflicts_with_all = ["files", "both"])]
    counts: Option<Vec<usize>>,
    /// Sweep both architectures now.
    #[arg(long, conflicts_with = "files")]
    both: bool,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args, Debug, Serialize)]
struct SingularityArgs {
    /// Workspace export (.json with points, or .csv); otherwise a sweep is run.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SINGULARITY_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    stride: u64,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args, Debug, Serialize)]
struct StiffnessArgs {
    /// Force (N) and deflection (mm).
    #[arg(long, num_args = 2, value_names = ["F", "DELTA"])]
    from_deflection: Option<Vec<f64>>,
    /// Pose for the lumped estimates: psi theta phi (deg) and l_ins (mm).
    #[arg(long, num_args = 4, value_names = ["PSI", "THETA", "PHI", "L_INS"])]
    pose: Option<Vec<f64>>,
}

/// Exit status for each error class.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Parse(_)
        | Error::Json(_)
        | Error::Domain { .. }
        | Error::NonPositiveDeflection(_)
        | Error::NegativeForce(_)
        | Error::NonPositiveStiffness => 1,
        Error::DegenerateTip
        | Error::InsertionOutOfRange { .. }
        | Error::Unreachable { .. }
        | Error::NoRootInRange { .. }
        | Error::JointLimit { .. }
        | Error::RootVerification { .. } => 2,
        Error::NoConvergence { .. } | Error::SingularJacobian { .. } => 3,
        Error::Io(_) => 4,
        Error::GridMismatch => 5,
    }
}

struct Ctx {
    cfg: Config,
    config_path: Option<PathBuf>,
    config_hash: String,
    arch: Arch,
    solve: SolveOptions,
    workers: Option<usize>,
    json: bool,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn context(cli: &Cli) -> Result<Ctx, Error> {
    let strictness = if cli.lenient {
        Strictness::Lenient
    } else {
        Strictness::Strict
    };
    let (text, path) = match &cli.config {
        Some(p) => {
            let t = std::fs::read_to_string(p).map_err(|source| {
                athena_kin::error::ConfigError::Io {
                    path: p.display().to_string(),
                    source,
                }
            })?;
            (t, Some(p.clone()))
        }
        None => (DEFAULT_CONFIG_JSON.to_string(), None),
    };
    let cfg = if path.is_none() {
        default_geometry()
    } else {
        load_config(&text, strictness)?
    };
    Ok(Ctx {
        cfg,
        config_path: path,
        config_hash: sha256_hex(text.as_bytes()),
        arch: cli.arch.into(),
        solve: SolveOptions {
            variant: match cli.variant {
                VariantArg::Literal => ChainVariant::Literal,
                VariantArg::Symmetrized => ChainVariant::Symmetrized,
            },
            branch: match cli.branch {
                BranchArg::Plus => Branch::Plus,
                BranchArg::Minus => Branch::Minus,
            },
            root: match cli.root {
                RootArg::MinAbs => RootChoice::MinAbs,
                RootArg::Other => RootChoice::Other,
            },
            check_limits: false,
        },
        workers: cli.workers.map(|w| w as usize),
        json: cli.json,
    })
}

fn print_json(v: &impl Serialize) -> Result<(), Error> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

/// Display value and unit of `q3`.
fn q3_display(arch: Arch, q3: f64) -> (f64, &'static str) {
    if arch.q3_is_angle() {
        (q3.to_degrees(), "deg")
    } else {
        (q3, "mm")
    }
}

fn cmd_ik(ctx: &Ctx, a: &IkArgs) -> Result<(), Error> {
    let pose = TaskPose::new(
        a.psi.to_radians(),
        a.theta.to_radians(),
        a.phi.to_radians(),
        a.l_ins,
    );
    let lins_max = ctx.cfg.limits.lins_max;
    if !(pose.l_ins >= 0.0 && pose.l_ins < lins_max) {
        return Err(Error::InsertionOutOfRange {
            l_ins: pose.l_ins,
            lins_max,
        });
    }
    let opts = SolveOptions {
        check_limits: a.check_limits,
        ..ctx.solve
    };
    let sol = ik(ctx.arch, &pose, &ctx.cfg.geometry, &ctx.cfg.limits, &opts)?;
    let q = sol.joints;
    let res = if a.verify {
        Some(residuals(&q, &pose, &ctx.cfg.geometry, ctx.solve.variant)?)
    } else {
        None
    };
    let (q3, q3_unit) = q3_display(ctx.arch, q.q3);
    if ctx.json {
        return print_json(&json!({
            "arch": ctx.arch,
            "q1_mm": q.q1,
            "q2_mm": q.q2,
            "q3": q3,
            "q3_unit": q3_unit,
            "q4_deg": q.q4.to_degrees(),
            "within_limits": sol.violations.is_empty(),
            "violations": sol.violations.iter().map(|v| json!({"joint": format!("{:?}", v.joint), "reason": v.reason(), "value": v.value})).collect::<Vec<_>>(),
            "scaled_residuals": res.map(|r| r.scaled()),
        }));
    }
    outln!("arch = {}", ctx.arch);
    outln!("q1 = {:.12} mm", q.q1);
    outln!("q2 = {:.12} mm", q.q2);
    outln!("q3 = {q3:.12} {q3_unit}");
    outln!("q4 = {:.12} deg", q.q4.to_degrees());
    for v in &sol.violations {
        outln!("limit: {} ({v})", v.reason());
    }
    if let Some(r) = res {
        let s = r.scaled();
        outln!(
            "scaled residuals: f1 = {:.3e}  f2 = {:.3e}  f3 = {:.3e}  f4 = {:.3e}",
            s[0],
            s[1],
            s[2],
            s[3]
        );
        outln!("max scaled residual = {:.3e}", r.max_scaled());
    }
    Ok(())
}

fn cmd_fk(ctx: &Ctx, a: &FkArgs) -> Result<(), Error> {
    let Some(q4_deg) = a.q4 else {
        return Err(Error::Parse("missing --q4".into()));
    };
    let q4 = q4_deg.to_radians();
    if a.q1.is_none() && a.q2.is_none() && a.q3.is_none() {
        // roll is decoupled; nothing else is needed
        let phi = solve_q4(q4).to_degrees();
        if ctx.json {
            return print_json(&json!({ "phi_deg": phi }));
        }
        outln!("phi = {phi:.12} deg");
        return Ok(());
    }
    let need =
        |v: Option<f64>, name: &str| v.ok_or_else(|| Error::Parse(format!("missing --{name}")));
    let q3_raw = need(a.q3, "q3")?;
    let q3 = if ctx.arch.q3_is_angle() {
        q3_raw.to_radians()
    } else {
        q3_raw
    };
    let q = JointVector::new(ctx.arch, need(a.q1, "q1")?, need(a.q2, "q2")?, q3, q4);
    let seed = match &a.seed {
        Some(s) => TaskPose::new(
            s[0].to_radians(),
            s[1].to_radians(),
            s[2].to_radians(),
            s[3],
        ),
        None => default_seed(&ctx.cfg.limits),
    };
    let settings = FkSettings {
        variant: ctx.solve.variant,
        root: ctx.solve.root,
        ..Default::default()
    };
    let sol = fk(&q, &ctx.cfg.geometry, &ctx.cfg.limits, &seed, &settings)?;
    let p = sol.pose;
    let tip = pose_to_tip(&p, &ctx.cfg.geometry);
    if ctx.json {
        return print_json(&json!({
            "arch": ctx.arch,
            "psi_deg": p.psi.to_degrees(),
            "theta_deg": p.theta.to_degrees(),
            "phi_deg": p.phi.to_degrees(),
            "l_ins_mm": p.l_ins,
            "tip_mm": [tip.x, tip.y, tip.z],
            "iterations": sol.iterations,
            "residual": sol.residual,
        }));
    }
    outln!("arch = {}", ctx.arch);
    outln!("psi = {:.12} deg", p.psi.to_degrees());
    outln!("theta = {:.12} deg", p.theta.to_degrees());
    outln!("phi = {:.12} deg", p.phi.to_degrees());
    outln!("l_ins = {:.12} mm", p.l_ins);
    outln!("tip = ({:.6}, {:.6}, {:.6}) mm", tip.x, tip.y, tip.z);
    outln!(
        "iterations = {}  max scaled residual = {:.3e}",
        sol.iterations,
        sol.residual
    );
    Ok(())
}

fn sweep_opts(ctx: &Ctx, grid: &GridArgs, storage: Storage) -> SweepOptions {
    SweepOptions {
        classify: ClassifyOptions {
            variant: ctx.solve.variant,
            branch: ctx.solve.branch,
            root: ctx.solve.root,
            frame: match grid.frame {
                FrameArg::Rcm => GridFrame::Rcm,
                FrameArg::Base => GridFrame::Base,
            },
        },
        storage,
        workers: ctx.workers,
    }
}

fn run_sweep(
    ctx: &Ctx,
    arch: Arch,
    grid: &GridArgs,
    default_step: f64,
    storage: Storage,
) -> Result<WorkspaceResult, Error> {
    sweep(
        arch,
        &grid.spec(default_step),
        &ctx.cfg.geometry,
        &ctx.cfg.limits,
        &sweep_opts(ctx, grid, storage),
    )
}

fn with_path(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    }
}

fn open(path: &Path) -> Result<BufReader<File>, Error> {
    Ok(BufReader::new(File::open(path).map_err(with_path(path))?))
}

fn export_to(result: &WorkspaceResult, format: FormatArg, path: &Path) -> Result<(), Error> {
    let mut w = std::io::BufWriter::new(File::create(path).map_err(with_path(path))?);
    match format {
        FormatArg::Csv => write_csv(result, &mut w)?,
        FormatArg::Ply => write_ply(result, &mut w)?,
        FormatArg::Json => write_json(result, true, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

fn cmd_workspace(ctx: &Ctx, a: &WorkspaceArgs) -> Result<(), Error> {
    let storage = if a.count_only {
        Storage::CountOnly
    } else if a.all_records {
        Storage::All
    } else {
        Storage::ValidOnly
    };
    if a.count_only && (!a.format.is_empty() || a.plot_data.is_some()) {
        return Err(Error::Parse(
            "--count-only cannot be combined with exports".into(),
        ));
    }
    let result = run_sweep(ctx, ctx.arch, &a.grid, 2.0, storage)?;

    let mut written = Vec::new();
    for &f in &a.format {
        let ext = match f {
            FormatArg::Csv => ExportFormat::Csv,
            FormatArg::Ply => ExportFormat::Ply,
            FormatArg::Json => ExportFormat::Json,
        }
        .extension();
        let path = match &a.output {
            Some(p) if a.format.len() == 1 => p.clone(),
            Some(p) => p.with_extension(ext),
            None => PathBuf::from(format!("workspace_{}.{ext}", ctx.arch)),
        };
        export_to(&result, f, &path)?;
        written.push(path.display().to_string());
    }
    if let Some(dir) = &a.plot_data {
        std::fs::create_dir_all(dir).map_err(with_path(dir))?;
        write_plot_data(&result, dir)?;
        written.push(dir.display().to_string());
    }

    let ratio = 100.0 * result.valid_count as f64 / result.total_candidates as f64;
    if ctx.json {
        return print_json(&json!({
            "arch": result.arch,
            "spec": result.grid,
            "total_candidates": result.total_candidates,
            "valid_count": result.valid_count,
            "ratio_percent": ratio,
            "reason_histogram": result.reason_histogram,
            "root_check_failures": result.root_check_failures,
            "outputs": written,
        }));
    }
    outln!(
        "arch={} total={} valid={} ratio={:.3}%",
        result.arch,
        result.total_candidates,
        result.valid_count,
        ratio
    );
    for (code, n) in &result.reason_histogram {
        outln!("  {:<18} {n}", code.as_str());
    }
    if result.root_check_failures > 0 {
        outln!("  root check failures: {}", result.root_check_failures);
    }
    for w in written {
        outln!("wrote {w}");
    }
    Ok(())
}

fn read_result(path: &Path) -> Result<WorkspaceResult, Error> {
    read_json(open(path)?)
}

fn cmd_compare(ctx: &Ctx, a: &CompareArgs) -> Result<(), Error> {
    let (ra, rb) = if let Some(c) = &a.counts {
        let spec = a.grid.spec(2.0);
        (
            WorkspaceResult::from_counts(Arch::Athena1, spec, c[0]),
            WorkspaceResult::from_counts(Arch::Athena2, spec, c[1]),
        )
    } else if a.both {
        (
            run_sweep(ctx, Arch::Athena1, &a.grid, 2.0, Storage::CountOnly)?,
            run_sweep(ctx, Arch::Athena2, &a.grid, 2.0, Storage::CountOnly)?,
        )
    } else if a.files.len() == 2 {
        (read_result(&a.files[0])?, read_result(&a.files[1])?)
    } else {
        return Err(Error::Parse(
            "compare needs two result files, --counts A B, or --both".into(),
        ));
    };
    let report = compare(&ra, &rb)?;
    if ctx.json {
        return print_json(&report);
    }
    out!("{report}");
    Ok(())
}

fn cmd_singularity(ctx: &Ctx, a: &SingularityArgs) -> Result<(), Error> {
    let result = match &a.input {
        Some(p) if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) => {
            let records = read_csv(open(p)?)?;
            let arch = records.first().map_or(ctx.arch, |r| r.arch);
            let mut r = WorkspaceResult::from_counts(arch, GridSpec::default(), 0);
            r.valid_count = records.iter().filter(|x| x.valid).count();
            r.records = records;
            r
        }
        Some(p) => read_result(p)?,
        None => run_sweep(ctx, ctx.arch, &a.grid, 20.0, Storage::ValidOnly)?,
    };
    let opts = ScanOptions {
        threshold: a.threshold,
        stride: a.stride as usize,
        variant: ctx.solve.variant,
    };
    let report = match ctx.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Parse(format!("cannot start worker pool: {e}")))?
            .install(|| singularity_scan(&result, &ctx.cfg.geometry, &opts)),
        None => singularity_scan(&result, &ctx.cfg.geometry, &opts),
    };
    if ctx.json {
        return print_json(&report);
    }
    print_scan(&report);
    Ok(())
}

fn print_scan(r: &ScanReport) {
    outln!(
        "arch={} evaluated={} flagged={} failed={} threshold={:e} stride={}",
        r.arch,
        r.evaluated_count,
        r.flagged_count,
        r.failed_count,
        r.threshold,
        r.stride
    );
    let at = |p: Option<athena_kin::TipPoint>| {
        p.map_or("-".to_string(), |t| {
            format!("({}, {}, {}) mm", t.x, t.y, t.z)
        })
    };
    match r.min_abs_det_q {
        Some(v) => outln!(
            "min normalized |det Jq| = {v:.6e} at {}",
            at(r.argmin_point)
        ),
        None => outln!("min normalized |det Jq| = - (no points evaluated)"),
    }
    if let Some(v) = r.min_raw_abs_det_q {
        outln!("min raw |det Jq| = {v:.6e}");
    }
    if let Some(v) = r.min_normalized_det_x {
        outln!(
            "min normalized |det Jx| = {v:.6e} at {}",
            at(r.argmin_x_point)
        );
    }
}

fn cmd_stiffness(ctx: &Ctx, a: &StiffnessArgs) -> Result<(), Error> {
    if let Some(fd) = &a.from_deflection {
        let k = stiffness_from_deflection(fd[0], fd[1])?;
        if ctx.json {
            return print_json(
                &json!({ "force_n": fd[0], "deflection_mm": fd[1], "stiffness_n_per_mm": k }),
            );
        }
        outln!("K = {k:.2} N/mm");
        return Ok(());
    }
    let g = &ctx.cfg.geometry;
    let (pose, joints) = match &a.pose {
        Some(p) => {
            let pose = TaskPose::new(
                p[0].to_radians(),
                p[1].to_radians(),
                p[2].to_radians(),
                p[3],
            );
            let mut joints = Vec::new();
            for arch in Arch::BOTH {
                joints.push(ik(arch, &pose, g, &ctx.cfg.limits, &ctx.solve)?.joints);
            }
            (Some(pose), joints)
        }
        None => match matched_pose(g, &ctx.cfg.limits) {
            Some((p, a1, a2)) => (Some(p), vec![a1, a2]),
            None => (None, Vec::new()),
        },
    };
    let mut estimates = Vec::new();
    if let Some(pose) = &pose {
        for q in &joints {
            let ks = JointStiffness::from_config(q.arch, &ctx.cfg.stiffness);
            estimates.push(lumped_tip_stiffness(pose, q, g, &ks, ctx.solve.variant)?);
        }
    }
    let report = stiffness_report(&published_rows(), &estimates);
    let label = ctx.cfg.stiffness.label.clone();
    if ctx.json {
        return print_json(&json!({
            "report": report,
            "estimates": estimates,
            "joint_stiffness_label": label,
        }));
    }
    out!("{report}");
    if let Some(p) = pose {
        let tip = pose_to_tip(&p, g);
        outln!(
            "lumped pose: psi = {:.3} deg, theta = {:.3} deg, l_ins = {:.3} mm, tip = ({:.1}, {:.1}, {:.1}) mm; joint stiffness: {label}",
            p.psi.to_degrees(),
            p.theta.to_degrees(),
            p.l_ins,
            tip.x,
            tip.y,
            tip.z
        );
    }
    Ok(())
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Ik(_) => "ik",
        Command::Fk(_) => "fk",
        Command::Workspace(_) => "workspace",
        Command::Compare(_) => "compare",
        Command::Singularity(_) => "singularity",
        Command::Stiffness(_) => "stiffness",
    }
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'static str,
    config_path: Option<String>,
    config_sha256: &'a str,
    flags: &'a Cli,
    duration_ms: f64,
}

fn run(cli: &Cli) -> Result<(), Error> {
    let start = Instant::now();
    let ctx = context(cli)?;
    let out = match &cli.command {
        Command::Ik(a) => cmd_ik(&ctx, a),
        Command::Fk(a) => cmd_fk(&ctx, a),
        Command::Workspace(a) => cmd_workspace(&ctx, a),
        Command::Compare(a) => cmd_compare(&ctx, a),
        Command::Singularity(a) => cmd_singularity(&ctx, a),
        Command::Stiffness(a) => cmd_stiffness(&ctx, a),
    };
    if cli.manifest {
        let m = RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            subcommand: subcommand_name(&cli.command),
            config_path: ctx.config_path.as_ref().map(|p| p.display().to_string()),
            config_sha256: &ctx.config_hash,
            flags: cli,
            duration_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        if let Ok(s) = serde_json::to_string(&m) {
            eprintln!("{s}");
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(r) = e.reason() {
                eprintln!("reason={}", r.as_str());
                if cli.json {
                    outln!("{}", json!({ "error": e.to_string(), "reason": r }));
                }
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
