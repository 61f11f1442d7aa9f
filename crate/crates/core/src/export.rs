//! Mesh and point-cloud output.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::skgeom::{eval_point, nondegeneracy, volume_check, PointData};
use crate::verify::{sample, ChartWindow, VerifyError};

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("meshes need a function of one variable, got arity {0}")]
    Arity(usize),
    #[error("meshes need a uniform grid with at least 2 points per axis")]
    NotAGrid,
    #[error(transparent)]
    Window(#[from] VerifyError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("all {n_points} sample points lie in the degenerate locus")]
    AllPointsDegenerate { n_points: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexAttributes {
    /// `| |det g_xy| - 4 |`, absent at degenerate vertices.
    pub det_residual: Option<f64>,
    pub min_sv: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeshData {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
    pub attributes: Vec<VertexAttributes>,
    /// Grid cells omitted because a corner is degenerate.
    pub dropped_cells: usize,
}

/// Triangulates the immersed surface of a one-variable `F` over a grid.
///
/// Vertex `(i, j)` (real index `i`, imaginary index `j`) is the image of the
/// grid point; each quad is split along its `(i, j)-(i+1, j+1)` diagonal.
pub fn build_mesh(e: &Expr, w: &ChartWindow) -> Result<MeshData, ExportError> {
    if e.arity() != 1 || w.n != 1 {
        return Err(ExportError::Arity(e.arity().max(w.n)));
    }
    w.validate()?;
    let shape = w.grid_shape().ok_or(ExportError::NotAGrid)?;
    let (ni, nj) = (shape[0], shape[1]);
    if ni < 2 || nj < 2 {
        return Err(ExportError::NotAGrid);
    }
    let mut mesh = MeshData::default();
    for z in sample(w) {
        let p = eval_point(e, &z)?;
        let nd = nondegeneracy(&p.tau);
        let det_residual = if nd.ok {
            volume_check(&p).ok().map(|v| v.residual)
        } else {
            None
        };
        mesh.vertices.push([p.imm[0], p.imm[1], p.imm[2]]);
        mesh.attributes.push(VertexAttributes {
            det_residual,
            min_sv: nd.min_sv,
            degenerate: det_residual.is_none(),
        });
    }
    if mesh.attributes.iter().all(|a| a.degenerate) {
        return Err(ExportError::AllPointsDegenerate {
            n_points: mesh.vertices.len(),
        });
    }
    for i in 0..ni - 1 {
        for j in 0..nj - 1 {
            let k00 = i * nj + j;
            let k10 = (i + 1) * nj + j;
            let k01 = k00 + 1;
            let k11 = k10 + 1;
            if [k00, k10, k01, k11].iter().any(|&k| mesh.attributes[k].degenerate) {
                mesh.dropped_cells += 1;
                continue;
            }
            mesh.faces.push([k00, k10, k11]);
            mesh.faces.push([k00, k11, k01]);
        }
    }
    Ok(mesh)
}

/// `%.9g`-style formatting: nine significant digits, trailing zeros trimmed,
/// dot decimal separator regardless of locale.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa.to_string()), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Wavefront OBJ text: `v` lines in vertex order, then 1-based `f` lines.
pub fn obj_string(m: &MeshData) -> String {
    let mut out = String::new();
    for v in &m.vertices {
        let _ = writeln!(out, "v {} {} {}", format_sig9(v[0]), format_sig9(v[1]), format_sig9(v[2]));
    }
    for f in &m.faces {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

pub fn write_obj(m: &MeshData, path: &Path) -> Result<(), ExportError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(obj_string(m).as_bytes())?;
    w.flush()?;
    Ok(())
}

/// Header: `x1..xn, y1..yn, f, det_gxy, min_sv`.
pub fn csv_header(n: usize) -> Vec<String> {
    let mut h: Vec<String> = (1..=n).map(|k| format!("x{k}")).collect();
    h.extend((1..=n).map(|k| format!("y{k}")));
    h.extend(["f", "det_gxy", "min_sv"].map(String::from));
    h
}

/// Writes one row per nondegenerate point; returns the number of rows.
pub fn write_csv_to<W: Write>(points: &[PointData], n: usize, out: W) -> Result<usize, ExportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(n))?;
    let mut rows = 0;
    for p in points {
        let nd = nondegeneracy(&p.tau);
        if !nd.ok {
            continue;
        }
        let Ok(vol) = volume_check(p) else {
            continue;
        };
        let mut rec: Vec<String> = p.imm.iter().map(|&v| format_sig9(v)).collect();
        rec.push(format_sig9(vol.det_gxy));
        rec.push(format_sig9(nd.min_sv));
        w.write_record(rec)?;
        rows += 1;
    }
    w.flush()?;
    Ok(rows)
}

pub fn write_csv(points: &[PointData], n: usize, path: &Path) -> Result<usize, ExportError> {
    write_csv_to(points, n, BufWriter::new(File::create(path)?))
}

/// Evaluates every sample of the window; degenerate points are kept here and
/// filtered by the writers.
pub fn sample_points(e: &Expr, w: &ChartWindow) -> Result<Vec<PointData>, ExportError> {
    w.validate()?;
    if e.arity() != w.n {
        return Err(VerifyError::ArityMismatch {
            expr: e.arity(),
            window: w.n,
        }
        .into());
    }
    sample(w)
        .iter()
        .map(|z| eval_point(e, z).map_err(ExportError::from))
        .collect()
}
