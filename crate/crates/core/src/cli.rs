//! Command-line front end: `eval`, `check`, `mesh` and `csv`.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::export::{self, ExportError};
use crate::expr::{parse, Expr};
use crate::skgeom::{eval_point, lemma_residuals, metric_bundle, nondegeneracy, volume_check, MetricBundle, PointData};
use crate::verify::{run_suite, ChartWindow, OracleConfig, Sampling, SuiteConfig, Tolerances, VerifyError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAIL: i32 = 2;
pub const EXIT_ALL_DEGENERATE: i32 = 3;
pub const EXIT_DOMAIN: i32 = 4;
pub const EXIT_IO: i32 = 5;
pub const EXIT_INTERNAL: i32 = 6;

#[derive(Debug, Parser)]
#[command(name = "parasphere", version, about = "Parabolic affine hyperspheres from a holomorphic function")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Inspect the immersion at a single chart point.
    Eval(EvalArgs),
    /// Certify the geometric identities over a chart window.
    Check(CheckArgs),
    /// Write the immersed surface (n = 1) as a Wavefront OBJ mesh.
    Mesh(MeshArgs),
    /// Write immersion points, det g and min singular value as CSV.
    Csv(CsvArgs),
}

#[derive(Debug, Args)]
struct ExprArgs {
    /// Number of complex variables.
    #[arg(short = 'n', long = "arity")]
    n: usize,
    /// Expression in z1..zn.
    #[arg(short = 'F', long = "expr", allow_hyphen_values = true, required_unless_present = "expr_file", conflicts_with = "expr_file")]
    expr: Option<String>,
    /// UTF-8 file holding the expression.
    #[arg(long)]
    expr_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct WindowArgs {
    /// Bounds as `lo hi` for every axis, or one `lo hi` pair per axis in the
    /// order Re z1..Re zn, Im z1..Im zn.
    #[arg(long, num_args = 2.., allow_negative_numbers = true, value_name = "LO HI")]
    window: Option<Vec<f64>>,
    /// Grid points per axis (one value for all axes, or one per axis).
    #[arg(long, num_args = 1.., conflicts_with = "samples")]
    grid: Option<Vec<usize>>,
    /// Quasi-random sample count instead of a grid.
    #[arg(long)]
    samples: Option<usize>,
    /// Skip offset of the quasi-random sequence.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    expr: ExprArgs,
    /// Chart point as `re im` per variable.
    #[arg(long, num_args = 2.., allow_negative_numbers = true, required = true)]
    at: Vec<f64>,
    /// Also print the metric bundle.
    #[arg(long)]
    metric: bool,
    /// JSON instead of aligned text.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[command(flatten)]
    expr: ExprArgs,
    #[command(flatten)]
    window: WindowArgs,
    /// Sets both tolerances.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = Tolerances::default().algebraic)]
    tol_algebraic: f64,
    #[arg(long, default_value_t = Tolerances::default().oracle)]
    tol_oracle: f64,
    /// Primary finite-difference step.
    #[arg(long, default_value_t = OracleConfig::default().steps[0])]
    h: f64,
    /// Secondary step (default h/2).
    #[arg(long)]
    h2: Option<f64>,
    /// Size of the finite-difference subsample.
    #[arg(long, default_value_t = OracleConfig::default().points)]
    oracle_points: usize,
    /// Also check jets against finite differences of F.
    #[arg(long)]
    oracle: bool,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Human-readable summary instead of JSON on stdout.
    #[arg(long)]
    plain: bool,
}

#[derive(Debug, Args)]
struct MeshArgs {
    #[command(flatten)]
    expr: ExprArgs,
    #[command(flatten)]
    window: WindowArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CsvArgs {
    #[command(flatten)]
    expr: ExprArgs,
    #[command(flatten)]
    window: WindowArgs,
    #[arg(long)]
    out: PathBuf,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl ToString) -> Self {
        Failure {
            code,
            message: message.to_string(),
        }
    }
}

type CmdResult = Result<i32, Failure>;

pub fn main() -> i32 {
    run(std::env::args_os())
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Eval(a) => cmd_eval(a),
        Command::Check(a) => cmd_check(a),
        Command::Mesh(a) => cmd_mesh(a),
        Command::Csv(a) => cmd_csv(a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn load_expr(a: &ExprArgs) -> Result<(Expr, String), Failure> {
    let text = match (&a.expr, &a.expr_file) {
        (Some(s), _) => s.clone(),
        (None, Some(path)) => std::fs::read_to_string(path)
            .map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display())))?
            .trim()
            .to_string(),
        (None, None) => return Err(Failure::new(EXIT_USAGE, "no expression given")),
    };
    let e = parse(&text, a.n).map_err(|e| Failure::new(EXIT_USAGE, e))?;
    Ok((e, text))
}

fn build_window(n: usize, a: &WindowArgs) -> Result<ChartWindow, Failure> {
    let d = 2 * n;
    let bounds = a.window.clone().unwrap_or_else(|| vec![-1.0, 1.0]);
    let (lo, hi): (Vec<f64>, Vec<f64>) = if bounds.len() == 2 {
        (vec![bounds[0]; d], vec![bounds[1]; d])
    } else if bounds.len() == 2 * d {
        bounds.chunks(2).map(|p| (p[0], p[1])).unzip()
    } else {
        return Err(Failure::new(
            EXIT_USAGE,
            format!("--window takes 2 or {} values for arity {n}", 2 * d),
        ));
    };
    let sampling = match a.samples {
        Some(count) => Sampling::QuasiRandom { count, seed: a.seed },
        None => Sampling::UniformGrid {
            per_axis: a.grid.clone().unwrap_or_else(|| vec![11]),
        },
    };
    let w = ChartWindow { n, lo, hi, sampling };
    w.validate().map_err(|e| Failure::new(EXIT_USAGE, e))?;
    Ok(w)
}

fn verify_failure(e: VerifyError) -> Failure {
    let code = match e {
        VerifyError::InvalidWindow(_) | VerifyError::ArityMismatch { .. } => EXIT_USAGE,
        VerifyError::AllPointsDegenerate { .. } => EXIT_ALL_DEGENERATE,
        VerifyError::Domain { .. } => EXIT_DOMAIN,
        VerifyError::Geometry { .. } => EXIT_INTERNAL,
    };
    Failure::new(code, e)
}

fn export_failure(e: ExportError) -> Failure {
    let code = match e {
        ExportError::Arity(_) | ExportError::NotAGrid => EXIT_USAGE,
        ExportError::Window(v) => return verify_failure(v),
        ExportError::Eval(_) => EXIT_DOMAIN,
        ExportError::AllPointsDegenerate { .. } => EXIT_ALL_DEGENERATE,
        ExportError::Io(_) | ExportError::Csv(_) => EXIT_IO,
    };
    Failure::new(code, e)
}

fn with_path(mut f: Failure, path: &std::path::Path) -> Failure {
    f.message = format!("{}: {}", path.display(), f.message);
    f
}

fn complex_json(c: &Complex64) -> Value {
    json!([c.re, c.im])
}

fn matrix_json(m: &nalgebra::DMatrix<f64>) -> Value {
    Value::Array(
        m.row_iter()
            .map(|r| Value::Array(r.iter().map(|&x| json!(x)).collect()))
            .collect(),
    )
}

fn point_json(p: &PointData) -> Value {
    json!({
        "z": p.z.iter().map(complex_json).collect::<Vec<_>>(),
        "w": p.w.iter().map(complex_json).collect::<Vec<_>>(),
        "value": complex_json(&p.value),
        "x": p.x, "u": p.u, "y": p.y, "v": p.v,
        "f": p.f,
        "imm": p.imm,
    })
}

fn bundle_json(b: &MetricBundle) -> Value {
    json!({
        "g_xu": matrix_json(&b.g_xu),
        "g_xy": matrix_json(&b.g_xy),
        "gv_xy": matrix_json(&b.gv_xy),
        "ginv_xy": matrix_json(&b.ginv_xy),
        "omega_xy": matrix_json(&b.omega_xy),
        "jac": matrix_json(&b.jac),
        "sig": [b.sig.0, b.sig.1],
    })
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.12}")).collect();
    format!("({})", parts.join(", "))
}

fn cmd_eval(a: EvalArgs) -> CmdResult {
    let (e, _) = load_expr(&a.expr)?;
    let n = e.arity();
    if a.at.len() != 2 * n {
        return Err(Failure::new(EXIT_USAGE, format!("--at takes {} values (re im per variable)", 2 * n)));
    }
    let z: Vec<Complex64> = a.at.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
    let p = eval_point(&e, &z).map_err(|err| Failure::new(EXIT_DOMAIN, err))?;
    let nd = nondegeneracy(&p.tau);
    let mut doc = point_json(&p);
    doc["nondegeneracy"] = json!({
        "ok": nd.ok, "min_sv": nd.min_sv, "threshold": nd.threshold,
        "sig_imtau": [nd.sig_imtau.0, nd.sig_imtau.1],
    });
    let mut text = String::new();
    let _ = writeln!(text, "z        {}", a.at.chunks(2).map(|c| format!("{}{:+}i", c[0], c[1])).collect::<Vec<_>>().join(", "));
    let _ = writeln!(text, "w        {}", p.w.iter().map(|c| format!("{:.12}{:+.12}i", c.re, c.im)).collect::<Vec<_>>().join(", "));
    let _ = writeln!(text, "imm      {}", fmt_vec(&p.imm));
    if !nd.ok {
        let _ = writeln!(
            text,
            "degenerate: Im F_zz is singular here (min singular value {:e}, threshold {:e})",
            nd.min_sv, nd.threshold
        );
        if a.json {
            println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
        } else {
            print!("{text}");
        }
        eprintln!("degenerate point: no metric is defined");
        return Ok(EXIT_FAIL);
    }
    let vol = volume_check(&p).map_err(|err| Failure::new(EXIT_INTERNAL, err))?;
    let lemma = lemma_residuals(&p).map_err(|err| Failure::new(EXIT_INTERNAL, err))?;
    let bundle = metric_bundle(&p).map_err(|err| Failure::new(EXIT_INTERNAL, err))?;
    doc["det_gxy"] = json!(vol.det_gxy);
    doc["signature"] = json!([bundle.sig.0, bundle.sig.1]);
    doc["lemma_residuals"] = json!(lemma.as_array());
    if a.metric {
        doc["metric"] = bundle_json(&bundle);
    }
    let _ = writeln!(text, "det g    {:.12}", vol.det_gxy);
    let _ = writeln!(text, "sig g    ({}, {})", bundle.sig.0, bundle.sig.1);
    let _ = writeln!(text, "lemma    {}", lemma.as_array().map(|r| format!("{r:.3e}")).join(" "));
    if a.metric {
        for (name, m) in [
            ("g_xu", &bundle.g_xu),
            ("g_xy", &bundle.g_xy),
            ("gv_xy", &bundle.gv_xy),
            ("ginv_xy", &bundle.ginv_xy),
            ("omega_xy", &bundle.omega_xy),
            ("jac", &bundle.jac),
        ] {
            let _ = write!(text, "{name}{m}");
        }
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
    } else {
        print!("{text}");
    }
    Ok(EXIT_OK)
}

fn cmd_check(a: CheckArgs) -> CmdResult {
    let (e, _) = load_expr(&a.expr)?;
    let w = build_window(e.arity(), &a.window)?;
    let tolerances = match a.tol {
        Some(t) => Tolerances { algebraic: t, oracle: t },
        None => Tolerances {
            algebraic: a.tol_algebraic,
            oracle: a.tol_oracle,
        },
    };
    let h2 = a.h2.unwrap_or(a.h / 2.0);
    if !(a.h > 0.0 && h2 > 0.0 && h2 < a.h) {
        return Err(Failure::new(EXIT_USAGE, "need 0 < h2 < h"));
    }
    let cfg = SuiteConfig {
        tolerances,
        oracle: OracleConfig {
            steps: [a.h, h2],
            points: a.oracle_points,
            jet: a.oracle,
        },
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.threads)
        .build()
        .map_err(|err| Failure::new(EXIT_INTERNAL, err))?;
    let report = pool
        .install(|| run_suite(&e, &w, &cfg))
        .map_err(verify_failure)?;
    let json = report.to_json();
    if let Some(path) = &a.out {
        std::fs::write(path, format!("{json}\n"))
            .map_err(|err| Failure::new(EXIT_IO, format!("{}: {err}", path.display())))?;
    }
    if a.plain {
        println!("{}  points={} degenerate={}", report.expr_text, report.n_points, report.n_degenerate);
        for c in &report.checks {
            println!(
                "  {:<26} max={:<12.3e} mean={:<12.3e} tol={:<8.1e} {}",
                c.name,
                c.max_residual,
                c.mean_residual,
                c.tolerance,
                if c.pass { "pass" } else { "FAIL" }
            );
        }
        println!("{}", if report.pass { "PASS" } else { "FAIL" });
    } else if a.out.is_none() {
        println!("{json}");
    }
    Ok(if report.pass { EXIT_OK } else { EXIT_FAIL })
}

fn cmd_mesh(a: MeshArgs) -> CmdResult {
    let (e, _) = load_expr(&a.expr)?;
    if e.arity() != 1 {
        return Err(export_failure(ExportError::Arity(e.arity())));
    }
    let w = build_window(1, &a.window)?;
    let mesh = export::build_mesh(&e, &w).map_err(export_failure)?;
    export::write_obj(&mesh, &a.out).map_err(|e| with_path(export_failure(e), &a.out))?;
    eprintln!(
        "wrote {}: {} vertices, {} faces, {} degenerate cells dropped",
        a.out.display(),
        mesh.vertices.len(),
        mesh.faces.len(),
        mesh.dropped_cells
    );
    Ok(EXIT_OK)
}

fn cmd_csv(a: CsvArgs) -> CmdResult {
    let (e, _) = load_expr(&a.expr)?;
    let w = build_window(e.arity(), &a.window)?;
    let points = export::sample_points(&e, &w).map_err(export_failure)?;
    let rows = export::write_csv(&points, e.arity(), &a.out).map_err(|e| with_path(export_failure(e), &a.out))?;
    eprintln!(
        "wrote {}: {} rows, {} degenerate samples omitted",
        a.out.display(),
        rows,
        points.len() - rows
    );
    Ok(EXIT_OK)
}
