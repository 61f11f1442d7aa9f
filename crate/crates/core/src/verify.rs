//! Sampling over a chart window and certification reports.
//!
//! Every sample point goes through the nondegeneracy gate; surviving points
//! get the algebraic identity checks, and an evenly strided subsample of
//! them gets the finite-difference oracles. Work is spread over the current
//! rayon pool, results are keyed by sample index and reduced in index order,
//! so the report does not depend on scheduling.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cjet::{fd_oracle, jet_eval, jet_gap, CJet};
use crate::expr::{EvalError, Expr};
use crate::skgeom::{
    self, eval_point, lemma_residuals_from, max_abs, max_abs_diff, metric_bundle, nondegeneracy,
    oracle::fd_immersion_hessians, standard_symplectic, GeomError,
};

type C = Complex64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "kebab-case")]
pub enum Sampling {
    /// Points per axis; a single entry applies to every axis.
    UniformGrid { per_axis: Vec<usize> },
    /// Halton sequence starting after `seed` skipped terms.
    QuasiRandom { count: usize, seed: u64 },
}

/// Box in `(Re z1 .. Re zn, Im z1 .. Im zn)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartWindow {
    pub n: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub sampling: Sampling,
}

impl ChartWindow {
    pub fn grid(n: usize, lo: Vec<f64>, hi: Vec<f64>, per_axis: usize) -> Self {
        ChartWindow {
            n,
            lo,
            hi,
            sampling: Sampling::UniformGrid {
                per_axis: vec![per_axis],
            },
        }
    }

    /// The same `[lo, hi]` on every real axis.
    pub fn square(n: usize, lo: f64, hi: f64, per_axis: usize) -> Self {
        Self::grid(n, vec![lo; 2 * n], vec![hi; 2 * n], per_axis)
    }

    pub fn validate(&self) -> Result<(), VerifyError> {
        let bad = |msg: String| Err(VerifyError::InvalidWindow(msg));
        if self.n == 0 {
            return bad("arity must be at least 1".into());
        }
        if self.lo.len() != 2 * self.n || self.hi.len() != 2 * self.n {
            return bad(format!("expected {} bounds per side", 2 * self.n));
        }
        for (k, (a, b)) in self.lo.iter().zip(&self.hi).enumerate() {
            if !(a < b) || !a.is_finite() || !b.is_finite() {
                return bad(format!("axis {k}: need finite lo < hi, got [{a}, {b}]"));
            }
        }
        match &self.sampling {
            Sampling::UniformGrid { per_axis } => {
                if per_axis.len() != 1 && per_axis.len() != 2 * self.n {
                    return bad(format!("grid needs 1 or {} counts", 2 * self.n));
                }
                if per_axis.contains(&0) {
                    return bad("grid counts must be positive".into());
                }
            }
            Sampling::QuasiRandom { count, .. } => {
                if *count == 0 {
                    return bad("sample count must be positive".into());
                }
            }
        }
        Ok(())
    }

    /// Per-axis grid counts, or `None` for quasi-random sampling.
    pub fn grid_shape(&self) -> Option<Vec<usize>> {
        match &self.sampling {
            Sampling::UniformGrid { per_axis } if per_axis.len() == 1 => Some(vec![per_axis[0]; 2 * self.n]),
            Sampling::UniformGrid { per_axis } => Some(per_axis.clone()),
            Sampling::QuasiRandom { .. } => None,
        }
    }

    fn to_point(&self, reals: &[f64]) -> Vec<C> {
        (0..self.n).map(|k| C::new(reals[k], reals[self.n + k])).collect()
    }
}

/// Deterministic sample sequence. Grids are row-major with the first axis
/// slowest; an axis with a single grid point sits at its midpoint.
pub fn sample(w: &ChartWindow) -> Vec<Vec<C>> {
    let d = 2 * w.n;
    match &w.sampling {
        Sampling::UniformGrid { .. } => {
            let shape = w.grid_shape().expect("grid");
            let total: usize = shape.iter().product();
            let mut out = Vec::with_capacity(total);
            let mut idx = vec![0usize; d];
            for _ in 0..total {
                let reals: Vec<f64> = (0..d)
                    .map(|a| {
                        if shape[a] == 1 {
                            0.5 * (w.lo[a] + w.hi[a])
                        } else {
                            let t = idx[a] as f64 / (shape[a] - 1) as f64;
                            w.lo[a] + (w.hi[a] - w.lo[a]) * t
                        }
                    })
                    .collect();
                out.push(w.to_point(&reals));
                for a in (0..d).rev() {
                    idx[a] += 1;
                    if idx[a] < shape[a] {
                        break;
                    }
                    idx[a] = 0;
                }
            }
            out
        }
        Sampling::QuasiRandom { count, seed } => {
            let primes = first_primes(d);
            (0..*count as u64)
                .map(|k| {
                    let reals: Vec<f64> = (0..d)
                        .map(|a| {
                            let t = radical_inverse(seed + k + 1, primes[a]);
                            w.lo[a] + (w.hi[a] - w.lo[a]) * t
                        })
                        .collect();
                    w.to_point(&reals)
                })
                .collect()
        }
    }
}

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut acc = 0.0;
    while k > 0 {
        acc += (k % base) as f64 * scale;
        k /= base;
        scale *= inv;
    }
    acc
}

fn first_primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut candidate = 2u64;
    while out.len() < count {
        if out.iter().all(|p| !candidate.is_multiple_of(*p)) {
            out.push(candidate);
        }
        candidate += 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Roundoff-level identities.
    pub algebraic: f64,
    /// Finite-difference oracle checks.
    pub oracle: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            algebraic: 1e-9,
            oracle: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Primary and secondary stencil steps.
    pub steps: [f64; 2],
    /// Size of the oracle subsample; 0 disables the oracle checks.
    pub points: usize,
    /// Also compare jets against finite differences of `F`.
    pub jet: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            steps: [1e-3, 5e-4],
            points: 25,
            jet: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub tolerances: Tolerances,
    pub oracle: OracleConfig,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("expression arity {expr} does not match window arity {window}")]
    ArityMismatch { expr: usize, window: usize },
    #[error("all {n_points} sample points lie in the degenerate locus")]
    AllPointsDegenerate { n_points: usize },
    #[error("at z = {point:?}: {source}")]
    Domain {
        point: Vec<[f64; 2]>,
        #[source]
        source: EvalError,
    },
    #[error("at z = {point:?}: {source}")]
    Geometry {
        point: Vec<[f64; 2]>,
        #[source]
        source: GeomError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub name: String,
    pub tolerance: f64,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub worst_index: Option<usize>,
    /// `[re, im]` per coordinate.
    pub worst_point: Option<Vec<[f64; 2]>>,
    pub n_evaluated: usize,
    /// Oracle checks only: unextrapolated maxima at both steps.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub raw_max_at_steps: Option<[f64; 2]>,
    /// Oracle checks only: `log(raw_h1 / raw_h2) / log(h1 / h2)`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub observed_order: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub omega: String,
    pub volume_form: String,
    pub degeneracy_rtol: f64,
    pub oracle_estimate: String,
    pub residuals: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub expr_text: String,
    pub window: ChartWindow,
    pub n_points: usize,
    pub n_degenerate: usize,
    pub n_oracle_failures: usize,
    pub checks: Vec<CheckSummary>,
    pub tolerances: Tolerances,
    pub oracle: OracleConfig,
    pub conventions: Conventions,
    pub pass: bool,
}

impl VerificationReport {
    pub fn check(&self, name: &str) -> Option<&CheckSummary> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub const ALGEBRAIC_CHECKS: [&str; 11] = [
    "metric_equality",
    "lagrangian_1",
    "lagrangian_2",
    "lagrangian_3",
    "lagrangian_4",
    "lagrangian_5",
    "lagrangian_6",
    "inverse_metric",
    "kahler_form",
    "monge_ampere",
    "signature",
];

const RESIDUAL_DOCS: [(&str, &str); 15] = [
    ("metric_equality", "max|g_xy - gv_xy| / (1 + max|g_xy|), g from the pullback metric, gv from the closed-form Hessian of f"),
    ("lagrangian_k", "max-abs defect of identity family k of the u/v partials, divided by 1 + max|(Im tau)^-1|"),
    ("inverse_metric", "max|ginv_xy * gv_xy - I|"),
    ("kahler_form", "max|omega_xy - 2 [[0, I], [-I, 0]]|"),
    ("monge_ampere", "| |det g_xy| - 4^n | / 4^n"),
    ("signature", "|p - 2a| + |q - 2b| for sig(g) = (p, q), sig(Im tau) = (a, b); tolerance fixed at 0"),
    ("oracle_graph_hessian", "max|H_fd - gv_xy|, H_fd the finite-difference Hessian of f over (x, y)"),
    ("oracle_gauss_weingarten", "max over immersion components of |D2 phi^k| (k <= 2n) and |D2 f - g_xy|"),
    ("oracle_jet", "max|jet - fd| over gradient, Hessian and third derivatives of F"),
    ("lagrangian_1", "sum_k (u^k_{x^i} v_{k,y_j} - u^k_{y_j} v_{k,x^i}) - delta_ij"),
    ("lagrangian_2", "asymmetry of sum_k u^k_{x^i} v_{k,x^j}"),
    ("lagrangian_3", "asymmetry of sum_k u^k_{y_i} v_{k,y_j}"),
    ("lagrangian_4", "u^i_{x^j} + v_{j,y_i}"),
    ("lagrangian_5", "asymmetry of u^i_{y_j}"),
    ("lagrangian_6", "asymmetry of v_{i,x^j}"),
];

fn conventions() -> Conventions {
    Conventions {
        omega: skgeom::OMEGA_CONVENTION.to_string(),
        volume_form: "vol = 2^n det on R^(2n+1); affine normal e_(2n+1); orientation not asserted, |det g| and signature checked separately".into(),
        degeneracy_rtol: skgeom::DEGENERACY_RTOL,
        oracle_estimate: "Richardson extrapolation (r^2 D(h2) - D(h1)) / (r^2 - 1), r = h1/h2, of second-order central differences".into(),
        residuals: RESIDUAL_DOCS
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
    }
}

fn coords(z: &[C]) -> Vec<[f64; 2]> {
    z.iter().map(|c| [c.re, c.im]).collect()
}

/// Per-point residuals of the algebraic checks, `None` when degenerate.
pub fn algebraic_residuals(e: &Expr, z: &[C]) -> Result<Option<[f64; 11]>, VerifyError> {
    let p = eval_point(e, z).map_err(|source| VerifyError::Domain {
        point: coords(z),
        source,
    })?;
    let nd = nondegeneracy(&p.tau);
    if !nd.ok {
        return Ok(None);
    }
    let b = match metric_bundle(&p) {
        Ok(b) => b,
        Err(GeomError::DegenerateMetric { .. }) => return Ok(None),
        Err(source) => {
            return Err(VerifyError::Geometry {
                point: coords(z),
                source,
            })
        }
    };
    let n = p.arity();
    let id = DMatrix::identity(2 * n, 2 * n);
    let lemma_scale = 1.0 + max_abs(&b.uv.u_y);
    let lemma = lemma_residuals_from(&b.uv).as_array();
    let target = 4f64.powi(n as i32);
    let (a, q) = nd.sig_imtau;
    let sig_defect = b.sig.0.abs_diff(2 * a) + b.sig.1.abs_diff(2 * q);
    let mut r = [0.0; 11];
    r[0] = max_abs_diff(&b.g_xy, &b.gv_xy) / (1.0 + max_abs(&b.g_xy));
    for k in 0..6 {
        r[1 + k] = lemma[k] / lemma_scale;
    }
    r[7] = max_abs_diff(&(&b.ginv_xy * &b.gv_xy), &id);
    r[8] = max_abs_diff(&b.omega_xy, &(standard_symplectic(n) * 2.0));
    r[9] = (b.g_xy.determinant().abs() - target).abs() / target;
    r[10] = sig_defect as f64;
    Ok(Some(r.map(nan_to_inf)))
}

fn nan_to_inf(x: f64) -> f64 {
    if x.is_nan() {
        f64::INFINITY
    } else {
        x
    }
}

fn extrapolate(h1: &DMatrix<f64>, h2: &DMatrix<f64>, r2: f64) -> DMatrix<f64> {
    (h2 * r2 - h1) / (r2 - 1.0)
}

/// `[raw at h1, raw at h2, extrapolated]` for one oracle check.
type OracleTriple = [f64; 3];

struct OracleOutcome {
    graph_hessian: OracleTriple,
    gauss_weingarten: OracleTriple,
    jet: Option<OracleTriple>,
    failed: bool,
}

fn oracle_residuals(e: &Expr, z: &[C], cfg: &OracleConfig) -> OracleOutcome {
    let failed = || OracleOutcome {
        graph_hessian: [f64::INFINITY; 3],
        gauss_weingarten: [f64::INFINITY; 3],
        jet: cfg.jet.then_some([f64::INFINITY; 3]),
        failed: true,
    };
    let Ok(p) = eval_point(e, z) else {
        return failed();
    };
    let [h1, h2] = cfg.steps;
    let r2 = (h1 / h2).powi(2);
    let (Ok(b), Ok(hs1), Ok(hs2)) = (
        metric_bundle(&p),
        fd_immersion_hessians(e, &p, h1),
        fd_immersion_hessians(e, &p, h2),
    ) else {
        return failed();
    };
    let m = hs1.len();
    let gw = |hs: &[DMatrix<f64>]| {
        let tangential = hs[..m - 1].iter().map(max_abs).fold(0.0, f64::max);
        nan_to_inf(tangential.max(max_abs_diff(&hs[m - 1], &b.g_xy)))
    };
    let ex: Vec<DMatrix<f64>> = hs1.iter().zip(&hs2).map(|(a, c)| extrapolate(a, c, r2)).collect();
    let gh = |h: &DMatrix<f64>| nan_to_inf(max_abs_diff(h, &b.gv_xy));
    let jet = if cfg.jet {
        match (jet_eval(e, z), fd_oracle(e, z, h1), fd_oracle(e, z, h2)) {
            (Ok(j), Ok(o1), Ok(o2)) => {
                let gap = |o: &CJet| nan_to_inf(jet_gap(&j, o).into_iter().fold(0.0, f64::max));
                let ex = extrapolate_jet(&o1, &o2, r2);
                Some([gap(&o1), gap(&o2), gap(&ex)])
            }
            _ => return failed(),
        }
    } else {
        None
    };
    OracleOutcome {
        graph_hessian: [gh(&hs1[m - 1]), gh(&hs2[m - 1]), gh(&ex[m - 1])],
        gauss_weingarten: [gw(&hs1), gw(&hs2), gw(&ex)],
        jet,
        failed: false,
    }
}

fn extrapolate_jet(o1: &CJet, o2: &CJet, r2: f64) -> CJet {
    let n = o1.arity();
    let mix = |a: C, b: C| (b * r2 - a) / (r2 - 1.0);
    let mut out = o2.clone();
    for k in 0..n {
        out.grad[k] = mix(o1.grad[k], o2.grad[k]);
    }
    let hess: Vec<C> = o1.hess_slice().iter().zip(o2.hess_slice()).map(|(&a, &b)| mix(a, b)).collect();
    let third: Vec<C> = o1.third_slice().iter().zip(o2.third_slice()).map(|(&a, &b)| mix(a, b)).collect();
    out.set_tensors(hess, third);
    out
}

#[derive(Default)]
struct Accumulator {
    max: f64,
    sum: f64,
    count: usize,
    worst: Option<usize>,
}

impl Accumulator {
    fn push(&mut self, index: usize, r: f64) {
        if self.worst.is_none() || r > self.max {
            self.max = r;
            self.worst = Some(index);
        }
        self.sum += r;
        self.count += 1;
    }

    fn finish(self, name: &str, tolerance: f64, samples: &[Vec<C>]) -> CheckSummary {
        let mean = if self.count > 0 {
            self.sum / self.count as f64
        } else {
            0.0
        };
        CheckSummary {
            name: name.to_string(),
            tolerance,
            max_residual: self.max,
            mean_residual: nan_to_inf(mean),
            worst_index: self.worst,
            worst_point: self.worst.map(|i| coords(&samples[i])),
            n_evaluated: self.count,
            raw_max_at_steps: None,
            observed_order: None,
            pass: self.max <= tolerance,
        }
    }
}

/// Runs every check over the window and assembles the report.
pub fn run_suite(e: &Expr, w: &ChartWindow, cfg: &SuiteConfig) -> Result<VerificationReport, VerifyError> {
    w.validate()?;
    if e.arity() != w.n {
        return Err(VerifyError::ArityMismatch {
            expr: e.arity(),
            window: w.n,
        });
    }
    let samples = sample(w);
    let algebraic: Vec<Result<Option<[f64; 11]>, VerifyError>> =
        samples.par_iter().map(|z| algebraic_residuals(e, z)).collect();
    let mut rows = Vec::with_capacity(samples.len());
    for r in algebraic {
        rows.push(r?);
    }
    let live: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].is_some()).collect();
    let n_degenerate = rows.len() - live.len();
    if live.is_empty() {
        return Err(VerifyError::AllPointsDegenerate {
            n_points: samples.len(),
        });
    }

    let tol = cfg.tolerances;
    let mut checks = Vec::new();
    for (k, name) in ALGEBRAIC_CHECKS.iter().enumerate() {
        let mut acc = Accumulator::default();
        for &i in &live {
            acc.push(i, rows[i].expect("live")[k]);
        }
        let t = if *name == "signature" { 0.0 } else { tol.algebraic };
        checks.push(acc.finish(name, t, &samples));
    }

    let k = cfg.oracle.points.min(live.len());
    let chosen: Vec<usize> = (0..k).map(|j| live[j * live.len() / k]).collect();
    let outcomes: Vec<OracleOutcome> = chosen
        .par_iter()
        .map(|&i| oracle_residuals(e, &samples[i], &cfg.oracle))
        .collect();
    let n_oracle_failures = outcomes.iter().filter(|o| o.failed).count();
    let mut oracle_check = |name: &str, pick: &dyn Fn(&OracleOutcome) -> Option<OracleTriple>| {
        let mut acc = Accumulator::default();
        let mut raw = [0.0_f64; 2];
        for (o, &i) in outcomes.iter().zip(&chosen) {
            if let Some(t) = pick(o) {
                acc.push(i, t[2]);
                raw[0] = raw[0].max(t[0]);
                raw[1] = raw[1].max(t[1]);
            }
        }
        let mut s = acc.finish(name, tol.oracle, &samples);
        if s.n_evaluated > 0 {
            let [h1, h2] = cfg.oracle.steps;
            let order = (raw[0] / raw[1]).ln() / (h1 / h2).ln();
            s.raw_max_at_steps = Some(raw);
            s.observed_order = order.is_finite().then_some(order);
        }
        checks.push(s);
    };
    oracle_check("oracle_graph_hessian", &|o| Some(o.graph_hessian));
    oracle_check("oracle_gauss_weingarten", &|o| Some(o.gauss_weingarten));
    if cfg.oracle.jet {
        oracle_check("oracle_jet", &|o| o.jet);
    }

    let pass = checks.iter().all(|c| c.pass);
    Ok(VerificationReport {
        expr_text: e.to_string(),
        window: w.clone(),
        n_points: samples.len(),
        n_degenerate,
        n_oracle_failures,
        checks,
        tolerances: tol,
        oracle: cfg.oracle.clone(),
        conventions: conventions(),
        pass,
    })
}
