use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use guderley::collapse::{
    collapse_trajectory, find_lambda_std, LambdaResult, ShootOptions, Terminal,
};
use guderley::continuation::{continue_through_origin, maximal_extension};
use guderley::fields::{solve, BranchId, FieldState, GlobalSolution, SolveOptions};
use guderley::phase_plane::{branch_vf_plus, branch_vg, branch_vg_plus, critical_points, Params};
use guderley::polycert::{run_suite, SuiteReport};
use guderley::reflected::{default_c_start, jump_locus, pinfty_trajectory};
use guderley::{Error, Triple};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "guderley",
    version,
    about = "Converging and reflected shock similarity solutions"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Similarity exponent of the converging shock.
    Lambda(Common),
    /// Full pipeline; prints a summary, `--out` stores the full solution.
    Solve(Common),
    /// Phase-plane curves as tagged CSV rows.
    Phase {
        #[command(flatten)]
        common: Common,
        /// Use this exponent instead of solving for it (trajectory curves are
        /// then omitted).
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Physical fields on a (t, r) grid.
    Fields(FieldsArgs),
    /// Exact certification report.
    Certify {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, allow_hyphen_values = true)]
    gamma: f64,
    #[arg(long)]
    m: u32,
    /// Shooting tolerance on z; `GUDERLEY_TOL` overrides the default.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct FieldsArgs {
    /// Solution file written by `solve --out`.
    #[arg(long, conflicts_with_all = ["gamma", "m"])]
    solution: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    tol: Option<f64>,
    /// Comma-separated times.
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
    t: Vec<f64>,
    /// Comma-separated radii, or `lo:hi:n` for a geometric grid.
    #[arg(long)]
    r: String,
    /// CSV destination (standard output when absent).
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Core(Error),
    Io(String),
    Parse(String),
    Certification(usize),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Core(e) => e.exit_code() as u8,
            CliError::Io(_) | CliError::Parse(_) => 2,
            CliError::Certification(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::Parse(e) => write!(f, "parse error: {e}"),
            CliError::Certification(n) => write!(f, "{n} certification item(s) failed"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn shoot_options(tol: Option<f64>) -> CliResult<ShootOptions> {
    let env = std::env::var("GUDERLEY_TOL").ok();
    let tol = match (tol, env) {
        (Some(t), _) => Some(t),
        (None, Some(s)) => Some(
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Parse(format!("GUDERLEY_TOL = {s:?}: {e}")))?,
        ),
        (None, None) => None,
    };
    let base = ShootOptions::default();
    match tol {
        None => Ok(base),
        Some(t) if t > 0.0 && t.is_finite() => Ok(base.with_tol(t)),
        Some(t) => Err(Error::Domain(format!("tolerance {t} must be positive")).into()),
    }
}

fn solve_options(tol: Option<f64>) -> CliResult<SolveOptions> {
    Ok(SolveOptions {
        shoot: shoot_options(tol)?,
        ..SolveOptions::default()
    })
}

fn writer(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(
            File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(io::BufWriter::new(io::stdout())),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> CliResult<()> {
    let mut w = writer(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct LambdaOut {
    schema_version: u32,
    gamma: f64,
    m: u32,
    lambda: f64,
    z: f64,
    triple_point: Triple,
    miss_residual: f64,
    z_interval: [f64; 2],
}

impl From<&LambdaResult> for LambdaOut {
    fn from(r: &LambdaResult) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            gamma: r.gamma,
            m: r.m,
            lambda: r.lambda,
            z: r.z,
            triple_point: r.triple,
            miss_residual: r.miss_residual,
            z_interval: [r.z_interval.lo, r.z_interval.hi],
        }
    }
}

#[derive(Serialize, Deserialize)]
#[allow(non_snake_case)]
struct Summary {
    schema_version: u32,
    gamma: f64,
    m: u32,
    lambda: f64,
    z: f64,
    triple_point: Triple,
    x_H: f64,
    V_H: f64,
    C_H: f64,
    V_s: f64,
    C_s: f64,
    x_s: f64,
    terminal: Terminal,
    intersection_count: usize,
    entropy_ok: bool,
}

impl From<&GlobalSolution> for Summary {
    fn from(s: &GlobalSolution) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            gamma: s.params.gamma,
            m: s.params.m,
            lambda: s.params.lambda,
            z: s.params.z,
            triple_point: s.triple,
            x_H: s.x_h,
            V_H: s.p_h.v,
            C_H: s.p_h.c,
            V_s: s.vs,
            C_s: s.cs,
            x_s: s.xs,
            terminal: s.terminal,
            intersection_count: s.intersection_count,
            entropy_ok: s.entropy_ok,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SolutionFile {
    schema_version: u32,
    summary: Summary,
    solution: GlobalSolution,
}

fn cmd_lambda(a: &Common) -> CliResult<()> {
    let r = find_lambda_std(a.gamma, a.m, &shoot_options(a.tol)?).map_err(|e| e.at("lambda"))?;
    write_json(a.out.as_deref(), &LambdaOut::from(&r))
}

#[derive(Serialize)]
struct BranchRow {
    branch_id: &'static str,
    x: f64,
    #[serde(rename = "V")]
    v: f64,
    #[serde(rename = "C")]
    c: f64,
    #[serde(rename = "R")]
    r: f64,
}

fn branch_rows(sol: &GlobalSolution) -> Vec<BranchRow> {
    let mut rows = Vec::new();
    let knots = |b: &guderley::fields::Branch, rows: &mut Vec<BranchRow>| {
        for k in &b.knots {
            rows.push(BranchRow {
                branch_id: b.id.as_str(),
                x: b.x_sign * k[0].exp(),
                v: k[1],
                c: k[2],
                r: k[3].exp(),
            });
        }
    };
    let mut col = sol.collapse.clone();
    col.knots.reverse();
    knots(&col, &mut rows);
    let patch = &sol.patch;
    for i in 0..=40 {
        let c = patch.delta * (1.0 - i as f64 / 20.0);
        let (x, v, r) = if c == 0.0 {
            (0.0, 0.0, patch.q0.exp())
        } else {
            (patch.x(c), patch.v(c), patch.ln_r(c).exp())
        };
        rows.push(BranchRow {
            branch_id: BranchId::Origin.as_str(),
            x,
            v,
            c,
            r,
        });
    }
    knots(&sol.extension, &mut rows);
    knots(&sol.downstream, &mut rows);
    rows
}

fn cmd_solve(a: &Common) -> CliResult<()> {
    let sol = solve(a.gamma, a.m, &solve_options(a.tol)?)?;
    let summary = Summary::from(&sol);
    if let Some(p) = &a.csv {
        let mut w = csv::Writer::from_writer(writer(Some(p))?);
        for row in branch_rows(&sol) {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    if let Some(p) = &a.out {
        let file = SolutionFile {
            schema_version: SCHEMA_VERSION,
            summary: Summary::from(&sol),
            solution: sol,
        };
        write_json(Some(p), &file)?;
    }
    write_json(None, &summary)
}

#[derive(Serialize)]
struct CurveRow {
    curve_id: String,
    #[serde(rename = "V")]
    v: f64,
    #[serde(rename = "C")]
    c: f64,
}

fn phase_rows(p: &Params, lambda: Option<&LambdaResult>) -> CliResult<Vec<CurveRow>> {
    let mut rows = Vec::new();
    let mut push = |id: &str, v: f64, c: f64| {
        rows.push(CurveRow {
            curve_id: id.to_string(),
            v,
            c,
        })
    };
    let cp = critical_points(p)?;
    let named = [
        ("P0", Some(cp.p0)),
        ("P1", Some(cp.p1)),
        ("P2", Some(cp.p2)),
        ("P3", Some(cp.p3)),
        ("P4", cp.p4),
        ("P5", cp.p5),
        ("P6", Some(cp.p6)),
        ("P7", Some(cp.p7)),
        ("P8", Some(cp.p8)),
        ("P9", Some(cp.p9)),
    ];
    for (name, pt) in named {
        if let Some(q) = pt {
            push(&format!("critical:{name}"), q.v, q.c);
        }
    }
    let n = 200;
    for i in 0..=n {
        let v = -1.0 + 3.0 * i as f64 / n as f64;
        push("sonic_upper", v, 1.0 + v);
        push("sonic_lower", v, -(1.0 + v));
    }
    let c_lo = -((1.0 + p.mf() * p.gamma * p.z) / (1.0 + p.mf() * p.z)).sqrt();
    for i in 0..n {
        let c = c_lo + (cp.p9.c - c_lo) * i as f64 / n as f64;
        if let Ok(v) = branch_vf_plus(p, c) {
            push("f_zero_plus", v, c);
        }
    }
    for i in 1..=n {
        let c = -3.0 * i as f64 / n as f64;
        if let Ok(v) = branch_vg(p, c) {
            push("g_zero", v, c);
        }
        if let Ok(v) = branch_vg_plus(p, c) {
            push("g_zero_plus", v, c);
        }
    }
    let integ = SolveOptions::default().integ;
    let pinf = pinfty_trajectory(p, default_c_start(p)?, &integ)?;
    for s in &pinf.traj.samples {
        push("v_infinity", s[0], s[1]);
    }
    if let Some(lam) = lambda {
        let cb = collapse_trajectory(p, lam.triple, &integ)?;
        for s in &cb.traj.samples {
            push("trajectory", s[0], s[1]);
        }
        let cont = continue_through_origin(&cb, &integ)?;
        let ext = maximal_extension(p, &cont, lam.triple, &integ)?;
        for s in &ext.traj.samples {
            push("extension", s[0], s[1]);
        }
        for lp in jump_locus(p.gamma, &cont.patch, &ext) {
            push("jump_locus", lp.post.v, lp.post.c);
        }
    }
    Ok(rows)
}

fn cmd_phase(a: &Common, lambda: Option<f64>) -> CliResult<()> {
    let (p, lam) = match lambda {
        Some(l) => (Params::new(a.gamma, a.m, l)?, None),
        None => {
            let r = find_lambda_std(a.gamma, a.m, &shoot_options(a.tol)?)
                .map_err(|e| e.at("lambda"))?;
            (r.params(), Some(r))
        }
    };
    let rows = phase_rows(&p, lam.as_ref()).map_err(|e| match e {
        CliError::Core(e) => CliError::Core(e.at("phase")),
        other => other,
    })?;
    let dest = a.csv.as_deref().or(a.out.as_deref());
    let mut w = csv::Writer::from_writer(writer(dest)?);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_r_grid(s: &str) -> CliResult<Vec<f64>> {
    let bad = |what: &str| CliError::Parse(format!("--r {s:?}: {what}"));
    let parts: Vec<&str> = s.split(':').collect();
    let values = if parts.len() == 3 {
        let lo: f64 = parts[0]
            .trim()
            .parse()
            .map_err(|_| bad("bad lower bound"))?;
        let hi: f64 = parts[1]
            .trim()
            .parse()
            .map_err(|_| bad("bad upper bound"))?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad("bad count"))?;
        if !(lo > 0.0 && hi > lo && n >= 2) {
            return Err(bad("need 0 < lo < hi and n >= 2"));
        }
        (0..n)
            .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
            .collect()
    } else {
        s.split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad("bad radius")))
            .collect::<CliResult<Vec<_>>>()?
    };
    Ok(values)
}

fn load_solution(path: &Path) -> CliResult<GlobalSolution> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let file: SolutionFile = serde_json::from_str(&text).map_err(|e| {
        CliError::Parse(format!(
            "{}: line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(CliError::Parse(format!(
            "{}: schema version {} (expected {SCHEMA_VERSION})",
            path.display(),
            file.schema_version
        )));
    }
    Ok(file.solution)
}

#[derive(Serialize)]
struct FieldRow {
    t: f64,
    r: f64,
    x: f64,
    branch: &'static str,
    side: &'static str,
    rho: f64,
    u: f64,
    c: f64,
    p: f64,
}

fn cmd_fields(a: &FieldsArgs) -> CliResult<()> {
    let sol = match (&a.solution, a.gamma, a.m) {
        (Some(path), _, _) => load_solution(path)?,
        (None, Some(g), Some(m)) => solve(g, m, &solve_options(a.tol)?)?,
        _ => {
            return Err(CliError::Parse(
                "give either --solution or both --gamma and --m".into(),
            ))
        }
    };
    if a.t.is_empty() {
        return Err(CliError::Parse("--t needs at least one time".into()));
    }
    let rs = parse_r_grid(&a.r)?;
    let dest = a.csv.as_deref().or(a.out.as_deref());
    let mut w = csv::Writer::from_writer(writer(dest)?);
    let row =
        |t: f64, r: f64, x: f64, branch: BranchId, side: &'static str, s: &FieldState| FieldRow {
            t,
            r,
            x,
            branch: branch.as_str(),
            side,
            rho: s.rho,
            u: s.u,
            c: s.c,
            p: s.p,
        };
    for &t in &a.t {
        for &r in &rs {
            let fv = sol.evaluate(t, r)?;
            match &fv.other {
                None => w.serialize(row(t, r, fv.x, fv.branch, "", &fv.state))?,
                Some(behind) => {
                    w.serialize(row(t, r, fv.x, fv.branch, "ahead", &fv.state))?;
                    w.serialize(row(t, r, fv.x, fv.branch, "behind", behind))?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_certify(out: Option<&Path>) -> CliResult<()> {
    let report: SuiteReport = run_suite();
    #[derive(Serialize)]
    struct Out<'a> {
        schema_version: u32,
        #[serde(flatten)]
        report: &'a SuiteReport,
    }
    write_json(
        out,
        &Out {
            schema_version: SCHEMA_VERSION,
            report: &report,
        },
    )?;
    if report.all_passed() {
        Ok(())
    } else {
        Err(CliError::Certification(report.failed))
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match &cli.cmd {
        Cmd::Lambda(a) => cmd_lambda(a),
        Cmd::Solve(a) => cmd_solve(a),
        Cmd::Phase { common, lambda } => cmd_phase(common, *lambda),
        Cmd::Fields(a) => cmd_fields(a),
        Cmd::Certify { out } => cmd_certify(out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
