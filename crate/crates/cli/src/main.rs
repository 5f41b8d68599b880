//! `lenslab`: experiment harness over the lenslab library.
//!
//! Every subcommand reads a spec (a preset name, or a section of a `--config`
//! file), runs one operation and writes CSV or JSON to `--out` or stdout.
//! Exit codes: 0 on success, 1 on errors, 2 when `selftest` finds a
//! tolerance breach.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use lenslab::geodesic::StepControl;
use lenslab::integralgeom::{flat_trapped_tail, santalo_volume, trapped_fraction, Horofunction, GRADIENT_STEP};
use lenslab::manifold::config::{self, ExperimentConfig};
use lenslab::manifold::{BoundaryVector, BumpProfile, ManifoldSpec};
use lenslab::revolution::{family_invariance_scan, non_isometry_witness, ScanPath};
use lenslab::sampling::Sampling;
use lenslab::scattering::{compare, lens_table, record_for, LensPath, LensTable};
use lenslab::selftest::{midpoint_angles, run_criterion, Scale, SelftestOptions, SelftestReport, CRITERIA};
use lenslab::{Error, Result};

#[derive(Parser)]
#[command(name = "lenslab", version, about = "Geodesic scattering and lens-data experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Preset name, or a section name inside `--config`.
    #[arg(long, global = true)]
    spec: Option<String>,
    /// Key-value experiment file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true)]
    budget: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum PathArg {
    Ode,
    Quadrature,
    FlatOracle,
}

impl From<PathArg> for LensPath {
    fn from(p: PathArg) -> Self {
        match p {
            PathArg::Ode => LensPath::Ode,
            PathArg::Quadrature => LensPath::Quadrature,
            PathArg::FlatOracle => LensPath::FlatOracle,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Trace one boundary vector to its exit.
    Scatter {
        /// Boundary point: `u1,..,un,theta` or `end,alpha` (end = ±1).
        #[arg(long, allow_hyphen_values = true)]
        entry: String,
        /// Direction in canonical boundary components.
        #[arg(long, allow_hyphen_values = true)]
        dir: String,
        #[arg(long, value_enum, default_value = "ode")]
        path: PathArg,
    },
    /// Lens table over a grid or a Monte Carlo sample.
    Lens {
        /// Node counts per axis, comma separated; overrides `--samples`.
        #[arg(long)]
        grid: Option<String>,
        /// Include interval endpoints on the grid.
        #[arg(long)]
        endpoints: bool,
        #[arg(long, value_enum, default_value = "ode")]
        path: PathArg,
    },
    /// Compare two lens tables, or scan a bump family across shifts.
    Compare {
        /// Two lens-table CSVs, each with its `.json` sidecar next to it.
        #[arg(long, num_args = 2, value_names = ["A", "B"])]
        tables: Option<Vec<PathBuf>>,
        /// Metric family to scan (only `bump`).
        #[arg(long)]
        family: Option<String>,
        #[arg(long, allow_hyphen_values = true, default_value = "-0.5,0,0.5")]
        shifts: String,
        /// Number of equally spaced entry angles in (-π/2, π/2).
        #[arg(long, default_value_t = 30)]
        angles: usize,
        #[arg(long, value_enum, default_value = "ode")]
        path: PathArg,
    },
    /// Clairaut quadrature across bump shifts, with a curvature witness.
    ClairautFamily {
        #[arg(long, allow_hyphen_values = true, default_value = "-0.5,-0.25,0,0.25,0.5")]
        shifts: String,
        #[arg(long, default_value_t = 30)]
        angles: usize,
    },
    /// Santaló volume estimate.
    Volume {
        #[arg(long, value_enum, default_value = "ode")]
        path: PathArg,
    },
    /// Trapped fraction along a budget ladder.
    Trapped {
        /// Comma-separated budgets; `--budget` gives a single rung.
        #[arg(long)]
        budgets: Option<String>,
    },
    /// Approximate Busemann function values and gradient norms.
    Busemann {
        #[arg(long, allow_hyphen_values = true)]
        base: String,
        #[arg(long, allow_hyphen_values = true)]
        dir: String,
        /// Probe point; repeatable.
        #[arg(long = "point", allow_hyphen_values = true, required = true)]
        points: Vec<String>,
        #[arg(long, default_value_t = 1e3)]
        t: f64,
    },
    /// Run the acceptance checks and write a report.
    Selftest {
        /// Reduced sample counts.
        #[arg(long)]
        quick: bool,
        /// Subset of criteria, comma separated.
        #[arg(long)]
        criteria: Option<String>,
    },
}

struct Ctx {
    common: Common,
    config: ExperimentConfig,
}

impl Ctx {
    fn new(common: Common) -> Result<Self> {
        let config = match &common.config {
            Some(p) => config::parse(&fs::read_to_string(p)?)?,
            None => ExperimentConfig::default(),
        };
        Ok(Ctx { common, config })
    }

    fn spec(&self) -> Result<ManifoldSpec> {
        match &self.common.spec {
            Some(name) => match self.config.spec(name) {
                Some(s) => Ok(s.clone()),
                None => ManifoldSpec::preset(name),
            },
            None => self.config.primary().cloned().ok_or_else(|| {
                Error::InvalidParameter("no spec: pass --spec or a --config with a spec".into())
            }),
        }
    }

    fn seed(&self) -> u64 {
        self.common.seed.or(self.config.seed).unwrap_or(0)
    }

    fn samples(&self, default: usize) -> usize {
        self.common.samples.or(self.config.samples).unwrap_or(default)
    }

    fn budget(&self) -> Option<f64> {
        self.common.budget.or(self.config.budget)
    }

    fn workers(&self) -> usize {
        self.common.workers.or(self.config.workers).unwrap_or(0)
    }

    fn format(&self, default: Format) -> Format {
        self.common.format.unwrap_or(default)
    }

    fn out(&self) -> Option<PathBuf> {
        self.common
            .out
            .clone()
            .or_else(|| self.config.out.as_ref().map(PathBuf::from))
    }

    fn emit(&self, bytes: &[u8]) -> Result<()> {
        match self.out() {
            Some(p) => fs::write(p, bytes)?,
            None => std::io::stdout().write_all(bytes)?,
        }
        Ok(())
    }

    fn emit_json(&self, v: &Value) -> Result<()> {
        let mut s = serde_json::to_string_pretty(v)?;
        s.push('\n');
        self.emit(s.as_bytes())
    }
}

fn numbers(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidParameter(format!("bad number '{x}': {e}")))
        })
        .collect()
}

fn counts(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<usize>()
                .map_err(|e| Error::InvalidParameter(format!("bad count '{x}': {e}")))
        })
        .collect()
}

fn csv_line(fields: &[String]) -> String {
    let mut s = fields.join(",");
    s.push('\n');
    s
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn scatter(ctx: &Ctx, entry: &str, dir: &str, path: PathArg) -> Result<()> {
    let spec = ctx.spec()?;
    let ty = spec.boundary_type();
    let b = BoundaryVector::new(ty.point_from_coords(&numbers(entry)?)?, numbers(dir)?)?;
    let r = record_for(&spec, &b, path.into(), &StepControl::default())?;
    match ctx.format(Format::Json) {
        Format::Json => ctx.emit_json(&json!({
            "spec": spec.describe(),
            "fingerprint": spec.fingerprint(),
            "status": r.status.label(),
            "travel_time": r.travel_time,
            "entry": { "point": b.point_coords(), "direction": b.direction() },
            "exit": r.exit.as_ref().map(|e| json!({ "point": e.point_coords(), "direction": e.direction() })),
        })),
        Format::Csv => {
            let mut head: Vec<String> = vec!["status".into(), "travel_time".into()];
            head.extend(ty.point_labels().into_iter().map(|l| format!("exit_{l}")));
            head.extend(ty.direction_labels().into_iter().map(|l| format!("exit_{l}")));
            let mut row = vec![r.status.label().to_string(), num(r.travel_time)];
            match &r.exit {
                Some(e) => {
                    row.extend(e.point_coords().into_iter().map(num));
                    row.extend(e.direction().iter().map(|x| num(*x)));
                }
                None => row.extend(std::iter::repeat_n(String::new(), head.len() - 2)),
            }
            ctx.emit((csv_line(&head) + &csv_line(&row)).as_bytes())
        }
    }
}

fn sidecar_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn lens(ctx: &Ctx, grid: Option<&str>, endpoints: bool, path: PathArg) -> Result<()> {
    let mut spec = ctx.spec()?;
    if let Some(b) = ctx.budget() {
        spec = spec.with_budget(b)?;
    }
    let grid = match grid {
        Some(g) => Some(counts(g)?),
        None => ctx.config.grid.clone(),
    };
    let sampling = match grid {
        Some(counts) => Sampling::Grid {
            counts,
            include_endpoints: endpoints,
        },
        None => Sampling::MonteCarlo {
            samples: ctx.samples(1000),
            seed: ctx.seed(),
        },
    };
    let table = lens_table(&spec, &sampling, path.into(), &StepControl::default(), ctx.workers())?;
    match ctx.format(Format::Csv) {
        Format::Json => ctx.emit_json(&serde_json::to_value(&table)?),
        Format::Csv => {
            let mut buf = Vec::new();
            table.write_csv(&mut buf)?;
            ctx.emit(&buf)?;
            if let Some(out) = ctx.out() {
                table.write_sidecar(fs::File::create(sidecar_path(&out))?)?;
            }
            Ok(())
        }
    }
}

fn read_table(p: &Path) -> Result<LensTable> {
    LensTable::read(fs::File::open(p)?, fs::File::open(sidecar_path(p))?)
}

fn family_profile(ctx: &Ctx) -> Result<BumpProfile> {
    let spec = match (&ctx.common.spec, ctx.config.primary()) {
        (None, None) => ManifoldSpec::preset("bump")?,
        _ => ctx.spec()?,
    };
    spec.profile()
        .copied()
        .filter(|p| !p.is_flat())
        .ok_or_else(|| Error::InvalidParameter("family scans need a bump surface of revolution".into()))
}

fn scan_path(p: PathArg) -> Result<ScanPath> {
    match p {
        PathArg::Ode => Ok(ScanPath::Ode),
        PathArg::Quadrature => Ok(ScanPath::Quadrature),
        PathArg::FlatOracle => Err(Error::InvalidParameter("family scans run on the ode or quadrature path".into())),
    }
}

fn emit_scan(ctx: &Ctx, report: &lenslab::revolution::ScanReport, extra: Value) -> Result<()> {
    match ctx.format(Format::Json) {
        Format::Csv => {
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            ctx.emit(&buf)
        }
        Format::Json => {
            let mut v = serde_json::to_value(report)?;
            if let (Value::Object(m), Value::Object(e)) = (&mut v, extra) {
                m.extend(e);
            }
            ctx.emit_json(&v)
        }
    }
}

fn compare_cmd(
    ctx: &Ctx,
    tables: Option<&[PathBuf]>,
    family: Option<&str>,
    shifts: &str,
    angles: usize,
    path: PathArg,
) -> Result<()> {
    match (tables, family) {
        (Some([a, b]), None) => {
            let report = compare(&read_table(a)?, &read_table(b)?)?;
            match ctx.format(Format::Json) {
                Format::Json => ctx.emit_json(&serde_json::to_value(&report)?),
                Format::Csv => {
                    let mut buf = Vec::new();
                    report.write_csv(&mut buf)?;
                    ctx.emit(&buf)
                }
            }
        }
        (None, Some("bump")) => {
            let p = family_profile(ctx)?;
            let report = family_invariance_scan(
                p.epsilon,
                p.amplitude,
                &numbers(shifts)?,
                &midpoint_angles(angles),
                scan_path(path)?,
                &StepControl::default(),
            )?;
            emit_scan(ctx, &report, json!({}))
        }
        (None, Some(other)) => Err(Error::InvalidParameter(format!("unknown family '{other}' (known: bump)"))),
        _ => Err(Error::InvalidParameter("pass either --tables A B or --family bump".into())),
    }
}

fn clairaut_family(ctx: &Ctx, shifts: &str, angles: usize) -> Result<()> {
    let p = family_profile(ctx)?;
    let shifts = numbers(shifts)?;
    let report = family_invariance_scan(
        p.epsilon,
        p.amplitude,
        &shifts,
        &midpoint_angles(angles),
        ScanPath::Quadrature,
        &StepControl::default(),
    )?;
    let mut witness = Vec::new();
    for &s in &shifts[1..] {
        let (a, b) = (p.with_shift(shifts[0])?, p.with_shift(s)?);
        witness.push(json!({ "shifts": [shifts[0], s], "curvature_gap": non_isometry_witness(&a, &b, 2001) }));
    }
    emit_scan(ctx, &report, json!({ "non_isometry": witness }))
}

fn volume(ctx: &Ctx, path: PathArg) -> Result<()> {
    let spec = ctx.spec()?;
    let est = santalo_volume(
        &spec,
        ctx.samples(100_000),
        ctx.budget().unwrap_or(1e4),
        ctx.seed(),
        path.into(),
        &StepControl::default(),
        ctx.workers(),
    )?;
    let reference = spec.volume();
    let reference = reference.is_finite().then_some(reference);
    let rel = reference.map(|r| (est.volume - r) / r);
    match ctx.format(Format::Json) {
        Format::Json => ctx.emit_json(&json!({
            "spec": spec.describe(),
            "fingerprint": spec.fingerprint(),
            "estimate": est,
            "manifold_volume": reference,
            "relative_error": rel,
        })),
        Format::Csv => {
            let head = ["volume", "std_error", "samples", "budget", "censored_fraction", "seed", "manifold_volume"];
            let row = [
                num(est.volume),
                num(est.std_error),
                est.samples.to_string(),
                num(est.budget),
                num(est.censored_fraction),
                est.seed.to_string(),
                reference.map(num).unwrap_or_default(),
            ];
            ctx.emit((csv_line(&head.map(String::from)) + &csv_line(&row)).as_bytes())
        }
    }
}

fn trapped(ctx: &Ctx, budgets: Option<&str>) -> Result<()> {
    let spec = ctx.spec()?;
    let ladder = match (budgets, ctx.budget()) {
        (Some(b), _) => numbers(b)?,
        (None, Some(b)) => vec![b],
        (None, None) => vec![1e2, 1e3, 1e4],
    };
    let samples = ctx.samples(100_000);
    let mut rows = Vec::new();
    for &b in &ladder {
        let f = trapped_fraction(&spec, b, samples, ctx.seed(), &StepControl::default(), ctx.workers())?;
        rows.push((f, flat_trapped_tail(&spec, b).ok()));
    }
    match ctx.format(Format::Json) {
        Format::Json => {
            let rungs: Vec<Value> = rows
                .iter()
                .map(|(f, exact)| json!({ "estimate": f, "exact_tail": exact }))
                .collect();
            ctx.emit_json(&json!({ "spec": spec.describe(), "fingerprint": spec.fingerprint(), "rungs": rungs }))
        }
        Format::Csv => {
            let head = ["budget", "samples", "grazing_excluded", "trapped", "fraction", "std_error", "ci_low", "ci_high", "exact_tail"];
            let mut s = csv_line(&head.map(String::from));
            for (f, exact) in &rows {
                s += &csv_line(&[
                    num(f.budget),
                    f.samples.to_string(),
                    f.grazing_excluded.to_string(),
                    f.trapped.to_string(),
                    num(f.fraction),
                    num(f.std_error),
                    num(f.ci_low),
                    num(f.ci_high),
                    exact.map(num).unwrap_or_default(),
                ]);
            }
            ctx.emit(s.as_bytes())
        }
    }
}

fn busemann(ctx: &Ctx, base: &str, dir: &str, points: &[String], t: f64) -> Result<()> {
    let spec = ctx.spec()?;
    let h = Horofunction::new(&spec, &numbers(base)?, &numbers(dir)?, t)?;
    let mut rows = Vec::new();
    for p in points {
        let p = numbers(p)?;
        rows.push((h.value(&p)?, h.gradient_norm(&p, GRADIENT_STEP)?, p));
    }
    match ctx.format(Format::Json) {
        Format::Json => {
            let probes: Vec<Value> = rows
                .iter()
                .map(|(v, g, p)| json!({ "point": p, "value": v, "gradient_norm": g }))
                .collect();
            ctx.emit_json(&json!({ "spec": spec.describe(), "t": t, "target": h.target(), "probes": probes }))
        }
        Format::Csv => {
            let dim = rows.first().map_or(0, |r| r.2.len());
            let mut head: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
            head.extend(["value".into(), "gradient_norm".into()]);
            let mut s = csv_line(&head);
            for (v, g, p) in &rows {
                let mut row: Vec<String> = p.iter().map(|x| num(*x)).collect();
                row.extend([num(*v), num(*g)]);
                s += &csv_line(&row);
            }
            ctx.emit(s.as_bytes())
        }
    }
}

fn selftest(ctx: &Ctx, quick: bool, criteria: Option<&str>) -> Result<bool> {
    let opts = SelftestOptions {
        seed: ctx.common.seed.or(ctx.config.seed).unwrap_or(20_240_611),
        workers: ctx.workers(),
        scale: if quick { Scale::Quick } else { Scale::Full },
    };
    let ids: Vec<u32> = match criteria {
        Some(c) => counts(c)?.into_iter().map(|i| i as u32).collect(),
        None => CRITERIA.to_vec(),
    };
    let mut results = Vec::new();
    for id in ids {
        let (r, elapsed) = run_criterion(id, &opts)?;
        eprintln!("{}  ({:.1} s)", r.line(), elapsed.as_secs_f64());
        results.push(r);
    }
    let report = SelftestReport::new(opts.seed, opts.scale, results);
    let mut s = report.to_json()?;
    s.push('\n');
    ctx.emit(s.as_bytes())?;
    Ok(report.passed)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let ctx = Ctx::new(cli.common)?;
    match &cli.command {
        Command::Scatter { entry, dir, path } => scatter(&ctx, entry, dir, *path)?,
        Command::Lens { grid, endpoints, path } => lens(&ctx, grid.as_deref(), *endpoints, *path)?,
        Command::Compare {
            tables,
            family,
            shifts,
            angles,
            path,
        } => compare_cmd(&ctx, tables.as_deref(), family.as_deref(), shifts, *angles, *path)?,
        Command::ClairautFamily { shifts, angles } => clairaut_family(&ctx, shifts, *angles)?,
        Command::Volume { path } => volume(&ctx, *path)?,
        Command::Trapped { budgets } => trapped(&ctx, budgets.as_deref())?,
        Command::Busemann { base, dir, points, t } => busemann(&ctx, base, dir, points, *t)?,
        Command::Selftest { quick, criteria } => {
            if !selftest(&ctx, *quick, criteria.as_deref())? {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
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
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
