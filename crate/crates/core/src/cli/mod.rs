//! Command-line front end.
//!
//! Exit codes: 0 pass, 1 fail verdict, 2 input error, 3 numeric failure.

pub mod output;
pub mod scene_file;

use crate::certify::{build_profile, check_morse_smale, find_elements, verify_convex_form, Verdict};
use crate::contact::Foliation;
use crate::dynamics::{Check, CriticalElement};
use crate::mori::{self, PerturbationSpec};
use crate::numeric::{NumericPolicy, Profile};
use clap::{Args, Parser, Subcommand};
use output::{to_json, Csv};
use rayon::prelude::*;
use scene_file::LoadedScene;
use serde::Serialize;
use std::path::{Path, PathBuf};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Clone)]
pub enum CliError {
    Input(String),
    Numeric(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        use crate::Error as E;
        match &e {
            E::Parse { .. } | E::UnknownIdentifier(_) | E::ChartMismatch(_) | E::InvalidChart(_) | E::Degree(_) | E::Invalid(_) => {
                CliError::Input(e.to_string())
            }
            E::ContactViolation(_) => CliError::Input(e.to_string()),
            E::Integration { last_point, .. } => {
                CliError::Numeric(format!("{e}; last good state {:?}", last_point.iter().map(|x| output::float(*x)).collect::<Vec<_>>()))
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "charfol", version, about = "Characteristic foliations of hypersurfaces in contact manifolds")]
pub struct Cli {
    #[command(flatten)]
    pub flags: Flags,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Flags {
    /// Seed for every sampled quantity.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Points per axis (foliation) or profile grid size (convexify).
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    pub json: Option<PathBuf>,
    /// Directory for CSV series.
    #[arg(long = "csv-dir", global = true)]
    pub csv_dir: Option<PathBuf>,
    /// Numeric tolerances: strict, default or fast.
    #[arg(long = "tolerance-profile", global = true, default_value = "default", value_parser = parse_profile)]
    pub tolerance_profile: Profile,
}

fn parse_profile(s: &str) -> Result<Profile, String> {
    s.parse()
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate X on a grid of Σ (CSV).
    Foliation { scene: PathBuf },
    /// Find and classify zeros and closed orbits (JSON).
    Classify { scene: PathBuf },
    /// Morse-Smale certificate (JSON).
    Certify {
        scene: PathBuf,
        /// Certify the time-reversed foliation.
        #[arg(long)]
        reverse: bool,
    },
    /// Build the collar convexity profile over Γ and verify it (JSON, CSV).
    Convexify { scene: PathBuf },
    /// The built-in Σ₀ analyses.
    #[command(subcommand)]
    Mori(MoriCommand),
}

#[derive(Debug, Subcommand)]
pub enum MoriCommand {
    /// Elements, degenerate torus and certificate of Σ₀.
    Reproduce {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
    },
    /// The convexifying perturbation in the column model.
    Perturb {
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 0.5)]
        kappa: f64,
        #[arg(long, default_value_t = 1.0)]
        window: f64,
        #[arg(long, default_value_t = 16)]
        budget: usize,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct SceneInfo {
    pub name: String,
    pub path: String,
    pub digest: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualSummary {
    pub checks: usize,
    pub failed: usize,
    /// Largest value / tolerance over all checks.
    pub worst_ratio: f64,
    pub worst: Option<String>,
}

impl ResidualSummary {
    pub fn of<'a>(checks: impl IntoIterator<Item = &'a Check>) -> Self {
        let mut s = ResidualSummary { checks: 0, failed: 0, worst_ratio: 0.0, worst: None };
        for c in checks {
            s.checks += 1;
            if !c.passed {
                s.failed += 1;
            }
            let r = if c.tolerance > 0.0 { c.value.abs() / c.tolerance } else { 0.0 };
            if r > s.worst_ratio || s.worst.is_none() {
                s.worst_ratio = r;
                s.worst = Some(c.name.clone());
            }
        }
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report<T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub scene: Option<SceneInfo>,
    pub seed: u64,
    pub policy: NumericPolicy,
    pub orientation: Option<String>,
    pub residual_summary: ResidualSummary,
    pub result: T,
}

/// Compact row of the element table.
#[derive(Debug, Clone, Serialize)]
pub struct ElementRow {
    pub kind: String,
    pub location: Vec<f64>,
    pub eigenvalues: Vec<[f64; 2]>,
    pub sign: i8,
    pub stable_index: usize,
    pub c: Option<f64>,
    pub hyperbolic: bool,
}

pub fn element_table(elements: &[CriticalElement]) -> Vec<ElementRow> {
    elements
        .iter()
        .map(|e| ElementRow {
            kind: format!("{:?}", e.kind).to_lowercase(),
            location: e.location.clone(),
            eigenvalues: e.eigenvalues.clone(),
            sign: e.sign,
            stable_index: e.stable_index,
            c: e.c,
            hyperbolic: e.hyperbolic,
        })
        .collect()
}

struct Ctx<'a> {
    flags: &'a Flags,
    policy: NumericPolicy,
}

impl Ctx<'_> {
    fn report<T: Serialize>(&self, command: &str, scene: Option<&LoadedScene>, orientation: Option<String>, checks: &[Check], result: T) -> Report<T> {
        Report {
            tool: "charfol",
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            scene: scene.map(|s| SceneInfo { name: s.name(), path: s.path.clone(), digest: s.digest.clone() }),
            seed: self.flags.seed,
            policy: self.policy,
            orientation,
            residual_summary: ResidualSummary::of(checks),
            result,
        }
    }

    fn emit_json<T: Serialize>(&self, report: &Report<T>) -> Result<(), CliError> {
        let s = to_json(report);
        match &self.flags.json {
            Some(p) => write_file(p, &s),
            None => {
                print!("{s}");
                Ok(())
            }
        }
    }

    /// CSV goes to the CSV directory, or to stdout when neither it nor a
    /// JSON path is set and `fallback_stdout` is true.
    fn emit_csv(&self, name: &str, body: &str, fallback_stdout: bool) -> Result<(), CliError> {
        match &self.flags.csv_dir {
            Some(d) => {
                std::fs::create_dir_all(d).map_err(|e| CliError::Input(format!("{}: {e}", d.display())))?;
                write_file(&d.join(name), body)
            }
            None => {
                if fallback_stdout {
                    print!("{body}");
                }
                Ok(())
            }
        }
    }
}

fn write_file(p: &Path, body: &str) -> Result<(), CliError> {
    std::fs::write(p, body).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))
}

fn init_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("CHARFOL_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| CliError::Input(format!("CHARFOL_THREADS must be a positive integer, got `{v}`")))?;
        if n == 0 {
            return Err(CliError::Input("CHARFOL_THREADS must be positive".into()));
        }
        // A pool may already exist when called more than once in-process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("charfol: {e}");
            e.code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<i32, CliError> {
    init_threads()?;
    let ctx = Ctx { flags: &cli.flags, policy: NumericPolicy::new(cli.flags.tolerance_profile) };
    match &cli.command {
        Command::Foliation { scene } => foliation(&ctx, &LoadedScene::read(scene)?),
        Command::Classify { scene } => classify(&ctx, &LoadedScene::read(scene)?),
        Command::Certify { scene, reverse } => certify(&ctx, &LoadedScene::read(scene)?, *reverse),
        Command::Convexify { scene } => convexify(&ctx, &LoadedScene::read(scene)?),
        Command::Mori(MoriCommand::Reproduce { n, eps }) => reproduce(&ctx, *n, *eps),
        Command::Mori(MoriCommand::Perturb { delta, kappa, window, budget }) => {
            let spec = PerturbationSpec { delta: *delta, kappa: *kappa, window: *window, ..PerturbationSpec::default() };
            perturb(&ctx, spec, *budget)
        }
    }
}

fn foliation_of(ctx: &Ctx, s: &LoadedScene) -> Result<Foliation, CliError> {
    Ok(Foliation::new(s.contact()?, s.surface()?, ctx.policy)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct FoliationSummary {
    pub grid: usize,
    pub points: usize,
    pub evaluated: usize,
    pub skipped: usize,
    /// Largest relative difference of the two divergence routes.
    pub divergence_cross_check: f64,
}

fn foliation(ctx: &Ctx, s: &LoadedScene) -> Result<i32, CliError> {
    let fol = foliation_of(ctx, s)?;
    let region = s.region()?.ok_or_else(|| CliError::Input(format!("{}: foliation needs analysis.region", s.path)))?;
    let k = ctx.flags.grid.or(s.file.analysis.grid).unwrap_or(5).max(1);
    let d = fol.dim();
    let total = (k as f64).powi(d as i32);
    if total > 2e6 {
        return Err(CliError::Input(format!("grid {k}^{d} has too many points")));
    }
    let total = total as usize;
    let lattice: Vec<Vec<f64>> = (0..total)
        .map(|mut i| {
            (0..d)
                .map(|j| {
                    let a = i % k;
                    i /= k;
                    let (lo, hi) = (region.lower[j], region.upper[j]);
                    if k == 1 {
                        0.5 * (lo + hi)
                    } else {
                        lo + (hi - lo) * a as f64 / (k - 1) as f64
                    }
                })
                .collect()
        })
        .collect();
    let rows: Vec<Option<(Vec<f64>, Vec<f64>, f64, f64, f64)>> = lattice
        .par_iter()
        .map(|p| {
            let q = fol.surface.project(p, fol.policy.projection_tol, fol.policy.projection_max_iter).ok()?;
            let smp = fol.sample(&q, true).ok()?;
            let tr = fol.divergence_trace(&q).ok()?;
            let rel = (smp.div - tr).abs() / smp.div.abs().max(tr.abs()).max(1.0);
            Some((q, smp.x, smp.div, smp.g, rel))
        })
        .collect();
    let names: Vec<String> = s.chart.coords.iter().map(|c| c.name.clone()).collect();
    let mut header = vec!["index".to_string()];
    header.extend(names.iter().cloned());
    header.extend(names.iter().map(|n| format!("X_{n}")));
    header.extend(["divergence".to_string(), "conformal_rate".to_string()]);
    let mut csv = Csv::new(&header);
    let mut worst = 0.0f64;
    let mut evaluated = 0;
    for (i, r) in rows.iter().enumerate() {
        if let Some((q, x, div, g, rel)) = r {
            evaluated += 1;
            worst = worst.max(*rel);
            let mut cells = q.clone();
            cells.extend(x.iter());
            cells.extend([*div, *g]);
            csv.row_indexed(&[i], &cells);
        }
    }
    ctx.emit_csv("foliation.csv", &csv.finish(), ctx.flags.json.is_none())?;
    let check = Check::below("divergence routes", worst, fol.policy.fd_cross_check);
    let summary = FoliationSummary { grid: k, points: total, evaluated, skipped: total - evaluated, divergence_cross_check: worst };
    if ctx.flags.json.is_some() {
        let rep = ctx.report("foliation", Some(s), Some(fol.surface.orientation.describe().into()), std::slice::from_ref(&check), summary);
        ctx.emit_json(&rep)?;
    }
    if evaluated == 0 {
        return Err(CliError::Numeric("no grid point could be evaluated on Σ".into()));
    }
    Ok(if check.passed { EXIT_PASS } else { EXIT_FAIL })
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyResult {
    pub element_table: Vec<ElementRow>,
    pub elements: Vec<CriticalElement>,
    pub seed_failures: Vec<String>,
}

fn classify(ctx: &Ctx, s: &LoadedScene) -> Result<i32, CliError> {
    let fol = foliation_of(ctx, s)?;
    let seeds = s.seeds()?;
    let (elements, seed_failures) = find_elements(&fol, &seeds);
    let checks: Vec<Check> = elements.iter().flat_map(|e| e.checks.iter().cloned()).collect();
    let ok = checks.iter().all(|c| c.passed);
    let res = ClassifyResult { element_table: element_table(&elements), elements, seed_failures };
    ctx.emit_json(&ctx.report("classify", Some(s), Some(fol.surface.orientation.describe().into()), &checks, res))?;
    Ok(if ok { EXIT_PASS } else { EXIT_FAIL })
}

fn certify(ctx: &Ctx, s: &LoadedScene, reverse: bool) -> Result<i32, CliError> {
    let fol = foliation_of(ctx, s)?;
    let fol = if reverse { fol.reversed() } else { fol };
    let seeds = s.seeds()?;
    let opts = s.certify_options(ctx.flags.seed)?;
    let cert = check_morse_smale(&fol, &seeds, &opts)?;
    let checks: Vec<Check> = cert.elements.iter().flat_map(|e| e.checks.iter().cloned()).collect();
    let code = if cert.verdict == Verdict::Pass { EXIT_PASS } else { EXIT_FAIL };
    if cert.verdict != Verdict::Pass {
        for r in &cert.reasons {
            eprintln!("charfol: {r}");
        }
    }
    let command = if reverse { "certify --reverse" } else { "certify" };
    #[derive(Serialize)]
    struct CertifyResult {
        element_table: Vec<ElementRow>,
        certificate: crate::certify::MorseSmaleCertificate,
    }
    let res = CertifyResult { element_table: element_table(&cert.elements), certificate: cert };
    ctx.emit_json(&ctx.report(command, Some(s), Some(fol.surface.orientation.describe().into()), &checks, res))?;
    Ok(code)
}

fn convexify(ctx: &Ctx, s: &LoadedScene) -> Result<i32, CliError> {
    let (hm, hp, gamma, mut sweep, samples) = s.profile_inputs()?;
    if let Some(g) = ctx.flags.grid {
        sweep.grid = g;
    }
    let n = gamma.n();
    let profile = build_profile(hm, hp, n, &sweep)?;
    let form = verify_convex_form(&profile, &gamma, samples, ctx.flags.seed)?;
    let mut csv = Csv::new(&["s".into(), "u".into(), "h1".into(), "residual".into()]);
    for r in profile.rows() {
        csv.row(&[r.s, r.u, r.h1, r.residual]);
    }
    ctx.emit_csv("profile.csv", &csv.finish(), false)?;
    let mut checks = vec![
        Check::below("direct vs closed form", form.max_relative_difference, form.tolerance),
        Check::flag("written form positive on the grid", profile.grid_residuals > 0.0),
        Check::flag("direct form positive at samples", form.positivity_failures == 0),
    ];
    if let Some(m) = profile.flatness_margin {
        checks.push(Check::flag("flatness inequality", m > 0.0));
    }
    let ok = form.passed && checks.iter().all(|c| c.passed);
    #[derive(Serialize)]
    struct ConvexifyResult {
        profile: crate::certify::ConvexityProfile,
        dividing_set_simple: bool,
        form: crate::certify::ConvexFormReport,
    }
    let res = ConvexifyResult { dividing_set_simple: profile.dividing_set_simple(), profile, form };
    ctx.emit_json(&ctx.report("convexify", Some(s), None, &checks, res))?;
    Ok(if ok { EXIT_PASS } else { EXIT_FAIL })
}

fn reproduce(ctx: &Ctx, n: usize, eps: f64) -> Result<i32, CliError> {
    let (d, rows) = mori::reproduce(n, eps, ctx.policy, ctx.flags.seed)?;
    let mut csv = Csv::new(&["line".into(), "t".into(), "z".into(), "r".into(), "rho".into()]);
    for r in &rows {
        csv.row_indexed(&[r.line], &[r.t, r.z, r.r, r.rho]);
    }
    ctx.emit_csv("portrait.csv", &csv.finish(), false)?;
    let code = if d.passed { EXIT_PASS } else { EXIT_FAIL };
    let checks = d.checks.clone();
    let orientation = Some(d.certificate.orientation.clone());
    ctx.emit_json(&ctx.report("mori reproduce", None, orientation, &checks, d))?;
    Ok(code)
}

fn perturb(ctx: &Ctx, spec: PerturbationSpec, budget: usize) -> Result<i32, CliError> {
    let d = mori::perturb(spec, ctx.policy, ctx.flags.seed, budget)?;
    let mut csv = Csv::new(&["orbit".into(), "phi".into(), "measured".into(), "predicted".into()]);
    for m in &d.moduli {
        for (a, b) in m.measured.iter().zip(&m.predicted) {
            csv.row_indexed(&[m.orbit], &[m.phi, *a, *b]);
        }
    }
    ctx.emit_csv("multipliers.csv", &csv.finish(), false)?;
    let code = if d.passed { EXIT_PASS } else { EXIT_FAIL };
    let checks = d.checks.clone();
    let orientation = Some(d.certificate.orientation.clone());
    ctx.emit_json(&ctx.report("mori perturb", None, orientation, &checks, d))?;
    Ok(code)
}
