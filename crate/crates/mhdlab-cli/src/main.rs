//! Command-line front end: dataset generation, the localization /
//! dissipation / criterion diagnostics, and a `pipeline` command chaining
//! them into one master JSON report.
//!
//! Exit codes: 0 success, 2 validation error (bad flags, bad config, bad
//! geometry), 3 numerical-tolerance failure under --strict.

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use mhdlab::cutoff::{build_cutoff, CutoffRadii, ProfileKind};
use mhdlab::cylinder::ParabolicCylinder;
use mhdlab::dissipation::{
    energy_balance_defect, lambda_assemble, pressure_defect_limit, DefectTable, LambdaReport,
    PressureLimitReport, TestBank,
};
use mhdlab::elsasser::{from_elsasser, solve_pressure, to_elsasser};
use mhdlab::grid::{FieldSnapshot, Grid};
use mhdlab::io::{read_fsnap, write_fsnap};
use mhdlab::localization::{build_companion, verify_companion, LocalizationReport};
use mhdlab::mollify::{BumpKind, MollifierLadder};
use mhdlab::norms::{holder_seminorm, morrey_norm, HolderParams, HolderReport, MorreyParams, MorreyReport};
use mhdlab::scan::{
    gradient_density_scan, serrin_hypothesis_check, singular_set_boxcount, CriterionParams,
    PointVerdict, SerrinExponents, SerrinReport, SingularSetReport, Verdict,
};
use mhdlab::sim::{manufactured_solution, mhd_residual, record, ManufacturedName, SimConfig};
use mhdlab::spectral::{max_divergence, SpectralWorkspace};

const VERSION: &str = env!("CARGO_PKG_VERSION");

// ---------------------------------------------------------------------------
// Error-to-exit-code plumbing.
// ---------------------------------------------------------------------------

enum AppError {
    /// Invalid input, config, or geometry: exit 2.
    Validation(String),
    /// A --strict numerical tolerance was not met: exit 3.
    Tolerance(String),
}

impl From<mhdlab::Error> for AppError {
    fn from(e: mhdlab::Error) -> Self {
        AppError::Validation(e.to_string())
    }
}
impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Validation(format!("io error: {e}"))
    }
}
impl From<serde_json::Error> for AppError {
    fn from(e: serde_json::Error) -> Self {
        AppError::Validation(format!("json error: {e}"))
    }
}

type AppResult<T> = Result<T, AppError>;

fn main() {
    let cli = Cli::parse();
    let threads = cli
        .threads
        .or_else(|| std::env::var("MHDLAB_THREADS").ok().and_then(|s| s.parse().ok()));
    if let Some(n) = threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            std::process::exit(2);
        }
        mhdlab::par::set_threads(n);
    }
    match run(&cli) {
        Ok(()) => {}
        Err(AppError::Validation(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(2);
        }
        Err(AppError::Tolerance(msg)) => {
            eprintln!("tolerance failure: {msg}");
            std::process::exit(3);
        }
    }
}

// ---------------------------------------------------------------------------
// CLI surface.
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(name = "mhdlab", version, about = "Numerical laboratory for localized MHD energy-balance diagnostics")]
struct Cli {
    /// Worker threads (fallback: env MHDLAB_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory for reports and snapshots.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Turn numerical-tolerance violations into exit code 3.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a manufactured exact solution tuple (u, b, P, f, g) as snapshots.
    Synth(SynthArgs),
    /// Run the mini pseudo-spectral stepper and record snapshots.
    Simulate(SimulateArgs),
    /// Convert between original and Elsasser variables.
    Elsasser(ElsasserArgs),
    /// Build the localized harmonic correction and its companion system.
    Correct(CorrectArgs),
    /// Parabolic Morrey / Hoelder norms of a snapshot.
    Norms(NormsArgs),
    /// Regularized energy-balance defect table and pressure limit.
    Dissipation(DissipationArgs),
    /// Small-gradient criterion scan and singular-set box counting.
    Criterion(CriterionArgs),
    /// Local integrability (Serrin-type) hypothesis check.
    Serrin(SerrinArgs),
    /// All steps chained on one dataset, emitting a master report.
    Pipeline(PipelineArgs),
}

fn run(cli: &Cli) -> AppResult<()> {
    std::fs::create_dir_all(&cli.out)?;
    match &cli.command {
        Command::Synth(a) => cmd_synth(cli, a),
        Command::Simulate(a) => cmd_simulate(cli, a),
        Command::Elsasser(a) => cmd_elsasser(cli, a),
        Command::Correct(a) => cmd_correct(cli, a),
        Command::Norms(a) => cmd_norms(cli, a),
        Command::Dissipation(a) => cmd_dissipation(cli, a),
        Command::Criterion(a) => cmd_criterion(cli, a),
        Command::Serrin(a) => cmd_serrin(cli, a),
        Command::Pipeline(a) => cmd_pipeline(cli, a),
    }
}

// ---------------------------------------------------------------------------
// Shared helpers.
// ---------------------------------------------------------------------------

fn write_json<T: Serialize>(path: &Path, value: &T) -> AppResult<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

fn read_field(path: &Path) -> AppResult<FieldSnapshot> {
    Ok(read_fsnap(path)?.0)
}

fn parse_x0(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    if parts.len() != 3 {
        return Err("expected three comma-separated coordinates".into());
    }
    Ok([parts[0], parts[1], parts[2]])
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect()
}

/// "t,x,y,z" -> (t, [x, y, z]).
fn parse_point(s: &str) -> Result<(f64, [f64; 3]), String> {
    let v = parse_list(s)?;
    if v.len() != 4 {
        return Err("expected t,x,y,z".into());
    }
    Ok((v[0], [v[1], v[2], v[3]]))
}

fn parse_profile(s: &str) -> Result<ProfileKind, String> {
    s.parse::<ProfileKind>().map_err(|e| e.to_string())
}

fn parse_bump(s: &str) -> Result<BumpKind, String> {
    s.parse::<BumpKind>().map_err(|e| e.to_string())
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

#[derive(Args, Serialize)]
struct SynthArgs {
    /// taylor-green, abc-drift, or product-modes.
    #[arg(long, default_value = "taylor-green")]
    name: String,
    /// Cubic spatial resolution (2*pi box).
    #[arg(long, default_value_t = 24)]
    n: usize,
    #[arg(long, default_value_t = 12)]
    nt: usize,
    #[arg(long, default_value_t = 0.25)]
    dt: f64,
    #[arg(long, default_value_t = 0.0)]
    t_start: f64,
    /// Basename prefix for the snapshot files.
    #[arg(long, default_value = "synth")]
    prefix: String,
}

#[derive(Serialize)]
struct SynthReport<'a> {
    version: &'static str,
    config: &'a SynthArgs,
    residual_u: f64,
    residual_b: f64,
    max_div_u: f64,
    max_div_b: f64,
    files: Vec<String>,
}

fn cmd_synth(cli: &Cli, a: &SynthArgs) -> AppResult<()> {
    let name: ManufacturedName = a.name.parse()?;
    let grid = Grid::cubic(a.n, std::f64::consts::TAU, a.nt, a.dt, a.t_start)?;
    let ws = SpectralWorkspace::new(&grid);
    let (u, b, p, f, g) = manufactured_solution(name, grid)?;
    let (ru, rb) = mhd_residual(&ws, &u, &b, &p, &f, &g)?;
    let mut files = Vec::new();
    for (field, tag) in [(&u, "u"), (&b, "b"), (&p, "p"), (&f, "f"), (&g, "g")] {
        let file = format!("{}_{tag}.fsnap", a.prefix);
        write_fsnap(&cli.out.join(&file), field, tag)?;
        files.push(file);
    }
    let report = SynthReport {
        version: VERSION,
        config: a,
        residual_u: ru,
        residual_b: rb,
        max_div_u: max_divergence(&ws, &u)?,
        max_div_b: max_divergence(&ws, &b)?,
        files,
    };
    write_json(&cli.out.join(format!("{}_report.json", a.prefix)), &report)?;
    println!("residuals: u {ru:.3e}, b {rb:.3e}");
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Args)]
struct SimulateArgs {
    /// JSON file with the simulation configuration.
    #[arg(long)]
    config: PathBuf,
    /// Integrator substeps per recorded slice.
    #[arg(long, default_value_t = 4)]
    stride: usize,
    #[arg(long, default_value = "sim")]
    prefix: String,
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    version: &'static str,
    config: &'a SimConfig,
    stride: usize,
    max_div_u: f64,
    max_div_b: f64,
    files: Vec<String>,
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs) -> AppResult<()> {
    let config: SimConfig = serde_json::from_str(&std::fs::read_to_string(&a.config)?)?;
    let ws = SpectralWorkspace::new(&config.grid);
    let (u, b, p) = record(&ws, &config, a.stride)?;
    let mut files = Vec::new();
    for (field, tag) in [(&u, "u"), (&b, "b"), (&p, "p")] {
        let file = format!("{}_{tag}.fsnap", a.prefix);
        write_fsnap(&cli.out.join(&file), field, tag)?;
        files.push(file);
    }
    let report = SimulateReport {
        version: VERSION,
        config: &config,
        stride: a.stride,
        max_div_u: max_divergence(&ws, &u)?,
        max_div_b: max_divergence(&ws, &b)?,
        files,
    };
    write_json(&cli.out.join(format!("{}_report.json", a.prefix)), &report)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// elsasser
// ---------------------------------------------------------------------------

#[derive(Args, Serialize)]
struct ElsasserArgs {
    /// First field (U, or u with --inverse).
    #[arg(long)]
    input_u: PathBuf,
    /// Second field (B, or b with --inverse).
    #[arg(long)]
    input_b: PathBuf,
    /// First forcing (F, or f with --inverse).
    #[arg(long)]
    input_f: PathBuf,
    /// Second forcing (G, or g with --inverse).
    #[arg(long)]
    input_g: PathBuf,
    /// Map Elsasser variables back to the original pair.
    #[arg(long)]
    inverse: bool,
    /// Also solve and write the pressure of the output pair.
    #[arg(long)]
    pressure: bool,
    #[arg(long, default_value = "elsasser")]
    prefix: String,
}

#[derive(Serialize)]
struct ElsasserReport<'a> {
    version: &'static str,
    config: &'a ElsasserArgs,
    max_div_first: f64,
    max_div_second: f64,
    files: Vec<String>,
}

fn cmd_elsasser(cli: &Cli, a: &ElsasserArgs) -> AppResult<()> {
    let u = read_field(&a.input_u)?;
    let b = read_field(&a.input_b)?;
    let f = read_field(&a.input_f)?;
    let g = read_field(&a.input_g)?;
    let (ou, ob, of, og) = if a.inverse {
        from_elsasser(&u, &b, &f, &g)?
    } else {
        to_elsasser(&u, &b, &f, &g)?
    };
    let ws = SpectralWorkspace::new(&ou.grid);
    let tags: [&str; 4] = if a.inverse {
        ["U", "B", "F", "G"]
    } else {
        ["u", "b", "f", "g"]
    };
    let mut files = Vec::new();
    for (field, tag) in [(&ou, tags[0]), (&ob, tags[1]), (&of, tags[2]), (&og, tags[3])] {
        let file = format!("{}_{tag}.fsnap", a.prefix);
        write_fsnap(&cli.out.join(&file), field, tag)?;
        files.push(file);
    }
    if a.pressure {
        let p = solve_pressure(&ws, &ou, &ob)?;
        let file = format!("{}_p.fsnap", a.prefix);
        write_fsnap(&cli.out.join(&file), &p, "p")?;
        files.push(file);
    }
    let report = ElsasserReport {
        version: VERSION,
        config: a,
        max_div_first: max_divergence(&ws, &ou)?,
        max_div_second: max_divergence(&ws, &ob)?,
        files,
    };
    write_json(&cli.out.join(format!("{}_report.json", a.prefix)), &report)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// correct
// ---------------------------------------------------------------------------

#[derive(Args, Serialize)]
struct CorrectArgs {
    #[arg(long)]
    input_u: PathBuf,
    #[arg(long)]
    input_b: PathBuf,
    #[arg(long)]
    input_f: PathBuf,
    #[arg(long)]
    input_g: PathBuf,
    /// Cylinder center time.
    #[arg(long)]
    t0: f64,
    /// Cylinder center "x,y,z".
    #[arg(long, value_parser = parse_x0)]
    x0: [f64; 3],
    /// Outer cut-off radius; the ladder defaults to (0.5..1.0) * rho.
    #[arg(long)]
    rho: f64,
    /// Explicit radii "rho0,rho3,rho2,rho1,rho" overriding the default ladder.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    radii: Option<Vec<f64>>,
    /// Cut-off profile: gauss, smooth-exp, or quintic.
    #[arg(long, default_value = "gauss", value_parser = parse_profile)]
    profile: ProfileKind,
    /// Write the corrected fields v, h alongside the report.
    #[arg(long)]
    write_fields: bool,
    #[arg(long, default_value = "correct")]
    prefix: String,
    /// Max allowed companion residual sup-norm on the inner cylinder
    /// (enforced under --strict).
    #[arg(long, default_value_t = 1e-2)]
    tol_residual: f64,
}

#[derive(Serialize)]
struct CorrectReport<'a> {
    version: &'static str,
    config: &'a CorrectArgs,
    localization: LocalizationReport,
    files: Vec<String>,
}

fn cmd_correct(cli: &Cli, a: &CorrectArgs) -> AppResult<()> {
    let u = read_field(&a.input_u)?;
    let b = read_field(&a.input_b)?;
    let f = read_field(&a.input_f)?;
    let g = read_field(&a.input_g)?;
    let radii = match &a.radii {
        None => CutoffRadii::default_for(a.rho),
        Some(r) => {
            if r.len() != 5 {
                return Err(AppError::Validation(
                    "--radii expects rho0,rho3,rho2,rho1,rho".into(),
                ));
            }
            CutoffRadii {
                rho0: r[0],
                rho3: r[1],
                rho2: r[2],
                rho1: r[3],
                rho: r[4],
            }
        }
    };
    let ladder = build_cutoff(u.grid, a.t0, a.x0, radii, a.profile)?;
    let ws = SpectralWorkspace::new(&u.grid);
    let cs = build_companion(&ws, &u, &b, &f, &g, &ladder, false)?;
    let localization = verify_companion(&ws, &u, &b, &cs, &ladder)?;
    let mut files = Vec::new();
    if a.write_fields {
        for (field, tag) in [(&cs.v, "v"), (&cs.h, "h"), (&cs.q, "q"), (&cs.r, "r")] {
            let file = format!("{}_{tag}.fsnap", a.prefix);
            write_fsnap(&cli.out.join(&file), field, tag)?;
            files.push(file);
        }
    }
    let worst = localization.residual_v.max(localization.residual_h);
    let report = CorrectReport {
        version: VERSION,
        config: a,
        localization,
        files,
    };
    write_json(&cli.out.join(format!("{}_report.json", a.prefix)), &report)?;
    if cli.strict && worst > a.tol_residual {
        return Err(AppError::Tolerance(format!(
            "companion residual {worst:.3e} exceeds {:.3e}",
            a.tol_residual
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// norms
// ---------------------------------------------------------------------------

#[derive(Args, Serialize)]
struct NormsArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 3.0)]
    p: f64,
    #[arg(long, default_value_t = 6.0)]
    q: f64,
    /// Decreasing Morrey scan radii "r1,r2,...".
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    radii: Vec<f64>,
    #[arg(long, default_value_t = 2)]
    stride: usize,
    /// Also compute the parabolic Hoelder seminorm with this exponent.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 20000)]
    pair_budget: usize,
    #[arg(long, default_value = "norms")]
    prefix: String,
}

#[derive(Serialize)]
struct NormsReport<'a> {
    version: &'static str,
    config: &'a NormsArgs,
    morrey: MorreyReport,
    holder: Option<HolderReport>,
}

fn cmd_norms(cli: &Cli, a: &NormsArgs) -> AppResult<()> {
    let x = read_field(&a.input)?;
    let ws = SpectralWorkspace::new(&x.grid);
    let params = MorreyParams {
        p: a.p,
        q: a.q,
        scan_radii: a.radii.clone(),
        center_stride: a.stride,
    };
    let morrey = morrey_norm(&ws, &x, &params, None)?;
    let holder = match a.alpha {
        None => None,
        Some(alpha) => Some(holder_seminorm(
            &x,
            &HolderParams {
                alpha,
                pair_budget: a.pair_budget,
            },
        )?),
    };
    println!("morrey M^{{{},{}}} = {:.6e}", a.p, a.q, morrey.value);
    let report = NormsReport {
        version: VERSION,
        config: a,
        morrey,
        holder,
    };
    write_json(&cli.out.join(format!("{}_report.json", a.prefix)), &report)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// dissipation
// ---------------------------------------------------------------------------

#[derive(Args, Serialize)]
struct DissipationArgs {
    #[arg(long)]
    input_u: PathBuf,
    #[arg(long)]
    input_b: PathBuf,
    #[arg(long)]
    input_p: PathBuf,
    #[arg(long)]
    input_f: PathBuf,
    #[arg(long)]
    input_g: PathBuf,
    /// Ratio-2 mollifier ladder rungs.
    #[arg(long, default_value_t = 2)]
    rungs: usize,
    /// Time-mollifier profile: exponential or polynomial.
    #[arg(long, default_value = "exponential", value_parser = parse_bump)]
    theta: BumpKind,
    /// Space-mollifier profile.
    #[arg(long, default_value = "exponential", value_parser = parse_bump)]
    phi: BumpKind,
    /// Test-bank cylinder center time.
    #[arg(long)]
    t0: f64,
    /// Test-bank cylinder center "x,y,z".
    #[arg(long, value_parser = parse_x0)]
    x0: [f64; 3],
    /// Test-bank cylinder radius.
    #[arg(long)]
    r: f64,
    #[arg(long, default_value_t = 1)]
    per_axis: usize,
    #[arg(long)]
    t_halfwidth: f64,
    #[arg(long)]
    x_halfwidth: f64,
    /// Max allowed |residual pairing| under --strict.
    #[arg(long, default_value_t = 1e-2)]
    tol_residual: f64,
    #[arg(long, default_value = "dissipation")]
    prefix: String,
}

#[derive(Serialize)]
struct DissipationReport<'a> {
    version: &'static str,
    config: &'a DissipationArgs,
    ladder: MollifierLadder,
    defects: DefectTable,
    pressure_limit: PressureLimitReport,
}

fn cmd_dissipation(cli: &Cli, a: &DissipationArgs) -> AppResult<()> {
    let u = read_field(&a.input_u)?;
    let b = read_field(&a.input_b)?;
    let p = read_field(&a.input_p)?;
    let f = read_field(&a.input_f)?;
    let g = read_field(&a.input_g)?;
    let ws = SpectralWorkspace::new(&u.grid);
    let mut ladder = MollifierLadder::ratio2(&u.grid, a.rungs);
    ladder.theta_profile = a.theta;
    ladder.phi_profile = a.phi;
    ladder.validate(&u.grid)?;
    let q = ParabolicCylinder::new(a.t0, a.x0, a.r)?;
    let bank = TestBank::lattice(&u.grid, &q, a.per_axis, a.t_halfwidth, a.x_halfwidth)?;
    let defects = energy_balance_defect(&ws, &u, &b, &p, &f, &g, &ladder, &bank)?;
    let pressure_limit = pressure_defect_limit(&ws, &u, &b, &p, &ladder, &bank)?;

    // CSV side table: one row per (alpha, epsilon, test function).
    let mut csv = String::from("alpha,epsilon,test,residual,div_pressure\n");
    for e in &defects.entries {
        for (t, (res, dp)) in e.residual.iter().zip(&e.div_pressure).enumerate() {
            csv.push_str(&format!("{},{},{},{:.17e},{:.17e}\n", e.alpha, e.epsilon, t, res, dp));
        }
    }
    std::fs::write(cli.out.join(format!("{}_defects.csv", a.prefix)), csv)?;

    let worst = defects
        .entries
        .iter()
        .flat_map(|e| e.residual.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let report = DissipationReport {
        version: VERSION,
        config: a,
        ladder,
        defects,
        pressure_limit,
    };
    write_json(&cli.out.join(format!("{}_report.json", a.prefix)), &report)?;
    println!("worst residual pairing: {worst:.3e}");
    if cli.strict && worst > a.tol_residual {
        return Err(AppError::Tolerance(format!(
            "residual pairing {worst:.3e} exceeds {:.3e}",
            a.tol_residual
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// criterion
// ---------------------------------------------------------------------------

#[derive(Args, Serialize)]
struct CriterionArgs {
    #[arg(long)]
    input_u: PathBuf,
    #[arg(long)]
    input_b: PathBuf,
    #[arg(long, default_value_t = mhdlab::scan::DEFAULT_EPSILON_STAR)]
    eps_star: f64,
    /// Decreasing G(r) radii ladder "r1,r2,...".
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    radii: Vec<f64>,
    #[arg(long, default_value_t = 3)]
    window: usize,
    /// Scan points "t,x,y,z" (repeatable).
    #[arg(long = "point", value_parser = parse_point)]
    points: Vec<(f64, [f64; 3])>,
    /// Also run the full-grid candidate scan and box counting.
    #[arg(long)]
    boxcount: bool,
    #[arg(long, default_value = "criterion")]
    prefix: String,
}

#[derive(Serialize)]
struct CriterionReport<'a> {
    version: &'static str,
    config: &'a CriterionArgs,
    verdicts: Vec<PointVerdict>,
    singular_set: Option<SingularSetReport>,
}

fn criterion_csv(verdicts: &[PointVerdict]) -> String {
    let mut csv = String::from("t0,x,y,z,r,g\n");
    for v in verdicts {
        for &(r, g) in &v.g_table {
            csv.push_str(&format!(
                "{},{},{},{},{},{:.17e}\n",
                v.t0, v.x0[0], v.x0[1], v.x0[2], r, g
            ));
        }
    }
    csv
}

fn cmd_criterion(cli: &Cli, a: &CriterionArgs) -> AppResult<()> {
    let u = read_field(&a.input_u)?;
    let b = read_field(&a.input_b)?;
    let ws = SpectralWorkspace::new(&u.grid);
    let params = CriterionParams {
        epsilon_star: a.eps_star,
        scan_radii: a.radii.clone(),
        window: a.window,
    };
    if a.points.is_empty() {
        return Err(AppError::Validation("at least one --point is required".into()));
    }
    let verdicts = gradient_density_scan(&ws, &u, &b, &a.points, &params)?;
    let singular_set = if a.boxcount {
        Some(singular_set_boxcount(&ws, &u, &b, &params)?)
    } else {
        None
    };
    std::fs::write(
        cli.out.join(format!("{}_g.csv", a.prefix)),
        criterion_csv(&verdicts),
    )?;
    let any_irregular = verdicts.iter().any(|v| v.verdict == Verdict::IrregularCandidate);
    let report = CriterionReport {
        version: VERSION,
        config: a,
        verdicts,
        singular_set,
    };
    write_json(&cli.out.join(format!("{}_report.json", a.prefix)), &report)?;
    if cli.strict && any_irregular {
        return Err(AppError::Tolerance(
            "irregular-candidate point detected".into(),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// serrin
// ---------------------------------------------------------------------------

#[derive(Args, Serialize)]
struct SerrinArgs {
    /// First field (U).
    #[arg(long)]
    input_u: PathBuf,
    /// Second field (B).
    #[arg(long)]
    input_b: PathBuf,
    #[arg(long)]
    t0: f64,
    #[arg(long, value_parser = parse_x0)]
    x0: [f64; 3],
    /// Region cylinder radius.
    #[arg(long)]
    r: f64,
    #[arg(long, default_value_t = 3.0)]
    p0: f64,
    #[arg(long, default_value_t = 6.0)]
    q0: f64,
    #[arg(long, default_value_t = 3.0)]
    p1: f64,
    #[arg(long, default_value_t = 6.0)]
    q1: f64,
    /// Decreasing Morrey scan radii.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    radii: Vec<f64>,
    #[arg(long, default_value_t = 2)]
    stride: usize,
    #[arg(long, default_value = "serrin")]
    prefix: String,
}

#[derive(Serialize)]
struct SerrinCliReport<'a> {
    version: &'static str,
    config: &'a SerrinArgs,
    serrin: SerrinReport,
}

fn cmd_serrin(cli: &Cli, a: &SerrinArgs) -> AppResult<()> {
    let u = read_field(&a.input_u)?;
    let b = read_field(&a.input_b)?;
    let ws = SpectralWorkspace::new(&u.grid);
    let region = ParabolicCylinder::new(a.t0, a.x0, a.r)?;
    let exps = SerrinExponents {
        p0: a.p0,
        q0: a.q0,
        p1: a.p1,
        q1: a.q1,
    };
    let serrin = serrin_hypothesis_check(&ws, &u, &b, &region, &exps, &a.radii, a.stride)?;
    let satisfied = serrin.hypotheses_satisfied;
    let report = SerrinCliReport {
        version: VERSION,
        config: a,
        serrin,
    };
    write_json(&cli.out.join(format!("{}_report.json", a.prefix)), &report)?;
    if cli.strict && !satisfied {
        return Err(AppError::Tolerance("local hypotheses not satisfied".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// pipeline
// ---------------------------------------------------------------------------

#[derive(Args)]
struct PipelineArgs {
    /// JSON pipeline configuration; omit for the bundled demo defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "pipeline")]
    prefix: String,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(default)]
struct PipelineConfig {
    /// Manufactured dataset name.
    dataset: String,
    n: usize,
    nt: usize,
    dt: f64,
    t_start: f64,
    /// Localization cylinder center and outer radius.
    t0: f64,
    x0: [f64; 3],
    rho: f64,
    cutoff_profile: String,
    /// Mollifier ladder rungs (ratio 2).
    rungs: usize,
    theta_profile: String,
    phi_profile: String,
    /// Test bank geometry (cylinder radius bank_r around (t0, x0)).
    bank_r: f64,
    bank_per_axis: usize,
    bank_t_halfwidth: f64,
    bank_x_halfwidth: f64,
    /// Sign tolerance for the dissipative verdict.
    tol_sign: f64,
    /// Criterion parameters.
    epsilon_star: f64,
    criterion_radii: Vec<f64>,
    criterion_window: usize,
    /// Serrin check region radius and exponents.
    serrin_r: f64,
    serrin_exponents: [f64; 4],
    serrin_radii: Vec<f64>,
    serrin_stride: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let pi = std::f64::consts::PI;
        PipelineConfig {
            dataset: "taylor-green".into(),
            n: 24,
            nt: 12,
            dt: 0.25,
            t_start: 0.0,
            t0: 1.375,
            x0: [pi, pi, pi],
            rho: 1.0,
            cutoff_profile: "gauss".into(),
            rungs: 2,
            theta_profile: "exponential".into(),
            phi_profile: "exponential".into(),
            bank_r: 1.0,
            bank_per_axis: 1,
            bank_t_halfwidth: 0.75,
            bank_x_halfwidth: 0.5,
            tol_sign: 2e-2,
            epsilon_star: mhdlab::scan::DEFAULT_EPSILON_STAR,
            criterion_radii: vec![0.9, 0.7, 0.55],
            criterion_window: 3,
            serrin_r: 0.8,
            serrin_exponents: [3.0, 6.0, 3.0, 6.0],
            serrin_radii: vec![0.85, 0.7],
            serrin_stride: 2,
        }
    }
}

#[derive(Serialize)]
struct MasterReport {
    version: &'static str,
    config: PipelineConfig,
    synth_residual_u: f64,
    synth_residual_b: f64,
    localization: LocalizationReport,
    lambda: LambdaReport,
    criterion: Vec<PointVerdict>,
    singular_set: SingularSetReport,
    serrin: SerrinReport,
    dissipative: bool,
    singular_candidates: usize,
}

fn cmd_pipeline(cli: &Cli, a: &PipelineArgs) -> AppResult<()> {
    let cfg: PipelineConfig = match &a.config {
        None => PipelineConfig::default(),
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
    };
    let grid = Grid::cubic(cfg.n, std::f64::consts::TAU, cfg.nt, cfg.dt, cfg.t_start)?;
    let ws = SpectralWorkspace::new(&grid);

    // Data generation.
    let name: ManufacturedName = cfg.dataset.parse()?;
    let (u, b, p, f, g) = manufactured_solution(name, grid)?;
    let (ru, rb) = mhd_residual(&ws, &u, &b, &p, &f, &g)?;

    // Step 1: localization and companion system.
    let profile: ProfileKind = cfg.cutoff_profile.parse()?;
    let cutoff = build_cutoff(
        grid,
        cfg.t0,
        cfg.x0,
        CutoffRadii::default_for(cfg.rho),
        profile,
    )?;
    let cs = build_companion(&ws, &u, &b, &f, &g, &cutoff, false)?;
    let localization = verify_companion(&ws, &u, &b, &cs, &cutoff)?;

    // Step 2: dissipation distribution over the test bank.
    let mut ladder = MollifierLadder::ratio2(&grid, cfg.rungs);
    ladder.theta_profile = cfg.theta_profile.parse()?;
    ladder.phi_profile = cfg.phi_profile.parse()?;
    let bank_q = ParabolicCylinder::new(cfg.t0, cfg.x0, cfg.bank_r)?;
    let bank = TestBank::lattice(
        &grid,
        &bank_q,
        cfg.bank_per_axis,
        cfg.bank_t_halfwidth,
        cfg.bank_x_halfwidth,
    )?;
    let lambda = lambda_assemble(
        &ws, &u, &b, &cs.v, &cs.h, &p, &f, &g, &ladder, &bank, cfg.tol_sign,
    )?;

    // Steps 3-4: small-gradient criterion and singular-set box counting.
    let crit = CriterionParams {
        epsilon_star: cfg.epsilon_star,
        scan_radii: cfg.criterion_radii.clone(),
        window: cfg.criterion_window,
    };
    let criterion = gradient_density_scan(&ws, &u, &b, &[(cfg.t0, cfg.x0)], &crit)?;
    let singular_set = singular_set_boxcount(&ws, &u, &b, &crit)?;

    // Step 5: Serrin-type hypothesis check on the original pair.
    let zf = FieldSnapshot::zeros(grid, 3);
    let (cap_u, cap_b, _, _) = from_elsasser(&u, &b, &zf, &zf)?;
    let region = ParabolicCylinder::new(cfg.t0, cfg.x0, cfg.serrin_r)?;
    let [p0, q0, p1, q1] = cfg.serrin_exponents;
    let serrin = serrin_hypothesis_check(
        &ws,
        &cap_u,
        &cap_b,
        &region,
        &SerrinExponents { p0, q0, p1, q1 },
        &cfg.serrin_radii,
        cfg.serrin_stride,
    )?;

    std::fs::write(
        cli.out.join(format!("{}_g.csv", a.prefix)),
        criterion_csv(&criterion),
    )?;
    let dissipative = lambda.dissipative;
    let candidates = singular_set.candidates.len();
    let report = MasterReport {
        version: VERSION,
        config: cfg,
        synth_residual_u: ru,
        synth_residual_b: rb,
        localization,
        lambda,
        criterion,
        singular_set,
        serrin,
        dissipative,
        singular_candidates: candidates,
    };
    write_json(&cli.out.join(format!("{}_report.json", a.prefix)), &report)?;
    println!("dissipative: {dissipative}, singular candidates: {candidates}");
    if cli.strict && (!dissipative || candidates > 0) {
        return Err(AppError::Tolerance(format!(
            "dissipative = {dissipative}, singular candidates = {candidates}"
        )));
    }
    Ok(())
}
