//! Pointwise geometry of the hypersphere immersion.
//!
//! For a holomorphic `F` on a chart `z = x + iu`, put `w = F_z = y + iv` and
//! `tau = F_zz = A + iB`. Where `B` is invertible, `(x, y)` are affine
//! coordinates, and the immersion is
//!
//! ```text
//! phi(z) = (x, y, f),    f = 2 Im F - 2 <y, u>.
//! ```
//!
//! Metric data is built in two frames: the chart frame `(x, u)` and the affine
//! frame `(x, y)`. The Jacobian `d(x, y)/d(x, u)` is `[[I, 0], [A, -B]]`.
//!
//! Conventions used throughout: the Kaehler form is `omega(X, Y) = g(X, JY)`,
//! with `J` multiplication by `i` in the chart, which makes
//! `omega = 2 sum dx^i ^ dy_i` in the affine frame.

mod linalg;
pub mod oracle;

pub use linalg::{max_abs, max_abs_diff, signature, smallest_singular_value, standard_symplectic, symmetry_defect};

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::cjet::jet_eval;
use crate::expr::{EvalError, Expr};
use linalg::blocks;

type C = Complex64;

/// Relative cutoff on the smallest singular value of `Im tau`.
pub const DEGENERACY_RTOL: f64 = 1e-8;

/// Largest tolerated relative asymmetry of the assembled graph Hessian.
pub const ASYMMETRY_TOL: f64 = 1e-8;

/// Description of the Kaehler form sign convention, for reports.
pub const OMEGA_CONVENTION: &str = "omega(X,Y) = g(X, J Y), J = multiplication by i in the chart; omega = 2 sum dx^i ^ dy_i";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("degenerate metric: smallest singular value of Im tau is {min_sv:e} (threshold {threshold:e})")]
    DegenerateMetric { min_sv: f64, threshold: f64 },
    #[error("graph Hessian asymmetric beyond tolerance (defect {defect:e})")]
    Asymmetry { defect: f64 },
    #[error("chart inversion did not converge for affine target {target:?}")]
    NewtonDivergence { target: Vec<f64> },
}

/// Everything known about the immersion at one chart point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointData {
    pub z: Vec<C>,
    /// `w = F_z`.
    pub w: Vec<C>,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub v: Vec<f64>,
    /// Value of `F`.
    pub value: C,
    /// Holomorphic Hessian `F_zz`.
    pub tau: DMatrix<C>,
    /// Third derivatives, row-major `n x n x n`.
    pub sigma: Vec<C>,
    /// Height `2 Im F - 2 <y, u>`.
    pub f: f64,
    /// `(x, y, f)`.
    pub imm: Vec<f64>,
}

impl PointData {
    pub fn arity(&self) -> usize {
        self.z.len()
    }

    pub fn re_tau(&self) -> DMatrix<f64> {
        self.tau.map(|c| c.re)
    }

    pub fn im_tau(&self) -> DMatrix<f64> {
        self.tau.map(|c| c.im)
    }
}

/// Evaluates `F` and its jet at `z` and assembles the immersion point.
pub fn eval_point(e: &Expr, z: &[C]) -> Result<PointData, EvalError> {
    let jet = jet_eval(e, z)?;
    let n = z.len();
    let w = jet.grad.clone();
    let x: Vec<f64> = z.iter().map(|c| c.re).collect();
    let u: Vec<f64> = z.iter().map(|c| c.im).collect();
    let y: Vec<f64> = w.iter().map(|c| c.re).collect();
    let v: Vec<f64> = w.iter().map(|c| c.im).collect();
    let f = 2.0 * jet.val.im - 2.0 * y.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>();
    let mut imm = Vec::with_capacity(2 * n + 1);
    imm.extend_from_slice(&x);
    imm.extend_from_slice(&y);
    imm.push(f);
    Ok(PointData {
        z: z.to_vec(),
        w,
        x,
        u,
        y,
        v,
        value: jet.val,
        tau: DMatrix::from_row_slice(n, n, jet.hess_slice()),
        sigma: jet.third_slice().to_vec(),
        f,
        imm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nondegeneracy {
    pub ok: bool,
    pub min_sv: f64,
    pub threshold: f64,
    /// `(positive, negative)` eigenvalue counts of `Im tau`.
    pub sig_imtau: (usize, usize),
}

/// Gate on invertibility of `Im tau`: the smallest singular value must exceed
/// `DEGENERACY_RTOL * |tau|_F`.
pub fn nondegeneracy(tau: &DMatrix<C>) -> Nondegeneracy {
    let im = tau.map(|c| c.im);
    let norm = tau.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let min_sv = smallest_singular_value(&im);
    let threshold = DEGENERACY_RTOL * norm;
    Nondegeneracy {
        ok: min_sv > threshold && min_sv.is_finite(),
        min_sv,
        threshold,
        sig_imtau: signature(&im),
    }
}

/// Real and imaginary parts of `tau` plus `(Im tau)^-1`, available only at
/// nondegenerate points.
struct Blocks {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    b_inv: DMatrix<f64>,
}

impl Blocks {
    fn new(p: &PointData) -> Result<Self, GeomError> {
        let nd = nondegeneracy(&p.tau);
        let degenerate = GeomError::DegenerateMetric {
            min_sv: nd.min_sv,
            threshold: nd.threshold,
        };
        if !nd.ok {
            return Err(degenerate);
        }
        let b = p.im_tau();
        let b_inv = b.clone().lu().try_inverse().ok_or(degenerate)?;
        Ok(Blocks {
            a: p.re_tau(),
            b,
            b_inv,
        })
    }
}

/// `d(x, y)/d(x, u) = [[I, 0], [Re tau, -Im tau]]`.
pub fn affine_jacobian(p: &PointData) -> DMatrix<f64> {
    let n = p.arity();
    blocks(
        &DMatrix::identity(n, n),
        &DMatrix::zeros(n, n),
        &p.re_tau(),
        &(-p.im_tau()),
    )
}

/// Metric `g = Re(2 zeta1^T (Im tau) conj(zeta2))` in the chart frame
/// `(d/dx, d/du)`, i.e. `2 diag(Im tau, Im tau)`.
pub fn metric_g(p: &PointData) -> Result<DMatrix<f64>, GeomError> {
    let bl = Blocks::new(p)?;
    let n = p.arity();
    let zero = DMatrix::zeros(n, n);
    let two_b = &bl.b * 2.0;
    Ok(blocks(&two_b, &zero, &zero, &two_b))
}

/// Re-expresses a bilinear form given in the `(x, u)` frame in the affine
/// `(x, y)` frame: `m -> jac^-T m jac^-1`.
pub fn frame_change_to_affine(p: &PointData, m: &DMatrix<f64>) -> Result<DMatrix<f64>, GeomError> {
    let nd = nondegeneracy(&p.tau);
    let degenerate = GeomError::DegenerateMetric {
        min_sv: nd.min_sv,
        threshold: nd.threshold,
    };
    if !nd.ok {
        return Err(degenerate);
    }
    let jinv = affine_jacobian(p).lu().try_inverse().ok_or(degenerate)?;
    Ok(jinv.transpose() * m * jinv)
}

/// Partial derivatives of `u = Im z` and `v = Im w` with respect to the
/// affine coordinates. Entry `(i, j)` of `u_x` is `du^i/dx^j`, and so on.
#[derive(Debug, Clone, PartialEq)]
pub struct UvPartials {
    pub u_x: DMatrix<f64>,
    pub u_y: DMatrix<f64>,
    pub v_x: DMatrix<f64>,
    pub v_y: DMatrix<f64>,
}

impl UvPartials {
    /// `[[u_x, u_y], [v_x, v_y]]`.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        blocks(&self.u_x, &self.u_y, &self.v_x, &self.v_y)
    }
}

/// Chain rule through `dy = A dx - B du`, `dv = B dx + A du`:
///
/// ```text
/// u_x = B^-1 A,   u_y = -B^-1,   v_x = B + A B^-1 A,   v_y = -A B^-1.
/// ```
pub fn uv_partials(p: &PointData) -> Result<UvPartials, GeomError> {
    let Blocks { a, b, b_inv } = Blocks::new(p)?;
    Ok(UvPartials {
        u_x: &b_inv * &a,
        u_y: -b_inv.clone(),
        v_x: &b + &a * &b_inv * &a,
        v_y: -(&a * &b_inv),
    })
}

/// Max-abs residuals of the six identity families satisfied by the
/// partials of `u` and `v` (from the Lagrangian condition), in order:
///
/// 1. `sum_k (u^k_{x^i} v_{k,y_j} - u^k_{y_j} v_{k,x^i}) = delta_ij`
/// 2. `sum_k u^k_{x^i} v_{k,x^j}` symmetric in `i, j`
/// 3. `sum_k u^k_{y_i} v_{k,y_j}` symmetric in `i, j`
/// 4. `u^i_{x^j} = -v_{j,y_i}`
/// 5. `u^i_{y_j}` symmetric
/// 6. `v_{i,x^j}` symmetric
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaResiduals {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
    pub r5: f64,
    pub r6: f64,
}

impl LemmaResiduals {
    pub fn as_array(&self) -> [f64; 6] {
        [self.r1, self.r2, self.r3, self.r4, self.r5, self.r6]
    }

    pub fn max(&self) -> f64 {
        self.as_array().into_iter().fold(0.0, f64::max)
    }
}

pub fn lemma_residuals_from(d: &UvPartials) -> LemmaResiduals {
    let n = d.u_x.nrows();
    let asym = |m: &DMatrix<f64>| max_abs_diff(m, &m.transpose());
    let first = d.u_x.transpose() * &d.v_y - d.v_x.transpose() * &d.u_y;
    let m2 = d.u_x.transpose() * &d.v_x;
    let m3 = d.u_y.transpose() * &d.v_y;
    LemmaResiduals {
        r1: max_abs_diff(&first, &DMatrix::identity(n, n)),
        r2: asym(&m2),
        r3: asym(&m3),
        r4: max_abs_diff(&d.u_x, &(-d.v_y.transpose())),
        r5: asym(&d.u_y),
        r6: asym(&d.v_x),
    }
}

pub fn lemma_residuals(p: &PointData) -> Result<LemmaResiduals, GeomError> {
    Ok(lemma_residuals_from(&uv_partials(p)?))
}

/// Hessian of the height `f` in affine coordinates, from the closed forms
/// `f_{x^i x^j} = 2 v_{i,x^j}`, `f_{x^i y_j} = -2 u^j_{x^i}`,
/// `f_{y_i y_j} = -2 u^i_{y_j}`.
pub fn graph_hessian(p: &PointData) -> Result<DMatrix<f64>, GeomError> {
    let d = uv_partials(p)?;
    let m = blocks(
        &(&d.v_x * 2.0),
        &(d.u_x.transpose() * -2.0),
        &(&d.u_x * -2.0),
        &(&d.u_y * -2.0),
    );
    let defect = symmetry_defect(&m);
    if !(defect <= ASYMMETRY_TOL) {
        return Err(GeomError::Asymmetry { defect });
    }
    Ok((&m + m.transpose()) * 0.5)
}

/// Inverse metric on the affine coframe `(dx, dy)`:
/// `g^-1(dx^i, dx^j) = -u^i_{y_j} / 2`, `g^-1(dx^i, dy_j) = u^i_{x^j} / 2`,
/// `g^-1(dy_i, dy_j) = v_{i,x^j} / 2`.
pub fn inverse_metric(p: &PointData) -> Result<DMatrix<f64>, GeomError> {
    let d = uv_partials(p)?;
    let xy = &d.u_x * 0.5;
    let m = blocks(&(&d.u_y * -0.5), &xy, &xy.transpose(), &(&d.v_x * 0.5));
    Ok((&m + m.transpose()) * 0.5)
}

/// Kaehler form in the affine frame, computed as `g(., J .)` in the chart
/// frame and then transported.
pub fn kahler_form(p: &PointData) -> Result<DMatrix<f64>, GeomError> {
    let g = metric_g(p)?;
    let n = p.arity();
    // J on coordinate vectors (a, b) of (d/dx, d/du): (a, b) -> (-b, a)
    let j = -standard_symplectic(n);
    frame_change_to_affine(p, &(g * j))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeCheck {
    pub det_gxy: f64,
    /// `| |det g_xy| - 4^n |`.
    pub residual: f64,
}

/// Monge-Ampere condition `|det g| = 4^n` in affine coordinates.
pub fn volume_check(p: &PointData) -> Result<VolumeCheck, GeomError> {
    let g = frame_change_to_affine(p, &metric_g(p)?)?;
    let det_gxy = g.determinant();
    let target = 4f64.powi(p.arity() as i32);
    Ok(VolumeCheck {
        det_gxy,
        residual: linalg::nan_inf((det_gxy.abs() - target).abs()),
    })
}

/// All metric data at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricBundle {
    pub g_xu: DMatrix<f64>,
    pub g_xy: DMatrix<f64>,
    pub gv_xy: DMatrix<f64>,
    pub ginv_xy: DMatrix<f64>,
    pub omega_xy: DMatrix<f64>,
    pub jac: DMatrix<f64>,
    pub sig: (usize, usize),
    pub uv: UvPartials,
}

pub fn metric_bundle(p: &PointData) -> Result<MetricBundle, GeomError> {
    let g_xu = metric_g(p)?;
    let g_xy = frame_change_to_affine(p, &g_xu)?;
    Ok(MetricBundle {
        gv_xy: graph_hessian(p)?,
        ginv_xy: inverse_metric(p)?,
        omega_xy: kahler_form(p)?,
        jac: affine_jacobian(p),
        sig: signature(&g_xy),
        uv: uv_partials(p)?,
        g_xu,
        g_xy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn point(src: &str, z: &[C]) -> PointData {
        eval_point(&parse(src, z.len()).unwrap(), z).unwrap()
    }

    fn assert_mat(m: &DMatrix<f64>, expected: &[f64], tol: f64) {
        let e = DMatrix::from_row_slice(m.nrows(), m.ncols(), expected);
        assert!(max_abs_diff(m, &e) <= tol, "{m} vs {e}");
    }

    #[test]
    fn paraboloid_point() {
        let p = point("i*z1^2/2", &[c(1.0, 2.0)]);
        assert_eq!(p.x, vec![1.0]);
        assert_eq!(p.u, vec![2.0]);
        assert_eq!(p.w, vec![c(-2.0, 1.0)]);
        assert_eq!(p.y, vec![-2.0]);
        assert_eq!(p.v, vec![1.0]);
        assert!((p.f - 5.0).abs() < 1e-14);
        assert!((p.imm[2] - 5.0).abs() < 1e-14);
        assert_eq!(&p.imm[..2], &[1.0, -2.0]);
        let p = point("i*z1^2/2", &[c(0.0, 0.0)]);
        assert_eq!(p.imm, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn cubic_point_at_i() {
        // F = z^3/6 at z = i: F = -i/6, w = -1/2, tau = i, f = -1/3 + 1 = 2/3
        let p = point("z1^3/6", &[c(0.0, 1.0)]);
        assert!((p.w[0] - c(-0.5, 0.0)).norm() < 1e-15);
        assert_eq!(p.y, vec![-0.5]);
        assert!(p.v[0].abs() < 1e-15);
        assert!((p.tau[(0, 0)] - c(0.0, 1.0)).norm() < 1e-15);
        assert!((p.f - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn nondegeneracy_gate() {
        let nd = nondegeneracy(&point("z1^2/2", &[c(0.3, 0.2)]).tau);
        assert!(!nd.ok);
        assert_eq!(nd.min_sv, 0.0);
        let nd = nondegeneracy(&point("i*z1^2/2", &[c(0.3, 0.2)]).tau);
        assert!(nd.ok);
        assert_eq!(nd.sig_imtau, (1, 0));
        let nd = nondegeneracy(&point("z1^3/6", &[c(0.7, 0.0)]).tau);
        assert!(!nd.ok);
        let nd = nondegeneracy(&point("z1^3/6", &[c(0.7, -0.5)]).tau);
        assert!(nd.ok);
        assert_eq!(nd.sig_imtau, (0, 1));
    }

    #[test]
    fn degenerate_points_refuse_geometry() {
        let p = point("z1^2/2", &[c(0.1, 0.1)]);
        assert!(matches!(metric_g(&p), Err(GeomError::DegenerateMetric { .. })));
        assert!(matches!(uv_partials(&p), Err(GeomError::DegenerateMetric { .. })));
        assert!(matches!(graph_hessian(&p), Err(GeomError::DegenerateMetric { .. })));
        assert!(matches!(volume_check(&p), Err(GeomError::DegenerateMetric { .. })));
        assert!(matches!(
            frame_change_to_affine(&p, &DMatrix::identity(2, 2)),
            Err(GeomError::DegenerateMetric { .. })
        ));
    }

    #[test]
    fn paraboloid_metrics() {
        let p = point("i*z1^2/2", &[c(0.4, -0.3)]);
        assert_mat(&metric_g(&p).unwrap(), &[2.0, 0.0, 0.0, 2.0], 0.0);
        assert_mat(&affine_jacobian(&p), &[1.0, 0.0, 0.0, -1.0], 0.0);
        let g = frame_change_to_affine(&p, &metric_g(&p).unwrap()).unwrap();
        assert_mat(&g, &[2.0, 0.0, 0.0, 2.0], 1e-15);
        let d = uv_partials(&p).unwrap();
        assert_mat(&d.to_matrix(), &[0.0, -1.0, 1.0, 0.0], 1e-15);
        assert_mat(&graph_hessian(&p).unwrap(), &[2.0, 0.0, 0.0, 2.0], 1e-15);
        assert_mat(&inverse_metric(&p).unwrap(), &[0.5, 0.0, 0.0, 0.5], 1e-15);
        assert_mat(&kahler_form(&p).unwrap(), &[0.0, 2.0, -2.0, 0.0], 1e-15);
        let vol = volume_check(&p).unwrap();
        assert!((vol.det_gxy - 4.0).abs() < 1e-14 && vol.residual < 1e-14);
        assert!(lemma_residuals(&p).unwrap().max() < 1e-13);
    }

    #[test]
    fn cubic_metric_tracks_imaginary_part() {
        for (u, sig) in [(0.5, (2, 0)), (-0.25, (0, 2))] {
            let p = point("z1^3/6", &[c(0.3, u)]);
            assert_mat(&metric_g(&p).unwrap(), &[2.0 * u, 0.0, 0.0, 2.0 * u], 1e-15);
            assert_eq!(metric_bundle(&p).unwrap().sig, sig);
        }
        // tau = i again at z = i
        let p = point("z1^3/6", &[c(0.0, 1.0)]);
        assert_mat(&uv_partials(&p).unwrap().to_matrix(), &[0.0, -1.0, 1.0, 0.0], 1e-15);
    }

    #[test]
    fn frame_change_inverts_its_jacobian() {
        let p = point("z1^3/6 + i*z1*z2 + z2^2", &[c(0.3, 0.7), c(-0.2, 0.4)]);
        let jac = affine_jacobian(&p);
        let m = jac.transpose() * &jac;
        let back = frame_change_to_affine(&p, &m).unwrap();
        assert!(max_abs_diff(&back, &DMatrix::identity(4, 4)) < 1e-12);
    }

    #[test]
    fn identities_hold_on_cubic_and_two_variable_cases() {
        let p = point("z1^3/6", &[c(0.3, 0.7)]);
        assert!(lemma_residuals(&p).unwrap().max() <= 1e-12);
        let p = point("i*(z1^2 + z2^2)/2 + z1*z2", &[c(0.3, 0.7), c(-0.5, 0.1)]);
        assert!(lemma_residuals(&p).unwrap().max() <= 1e-12);
        let b = metric_bundle(&p).unwrap();
        assert!(max_abs_diff(&b.g_xy, &b.gv_xy) <= 1e-12);
        assert!(max_abs_diff(&(&b.ginv_xy * &b.gv_xy), &DMatrix::identity(4, 4)) <= 1e-12);
        assert_eq!(b.sig, (4, 0));
        let vol = volume_check(&p).unwrap();
        assert!((vol.det_gxy - 16.0).abs() <= 1e-12);
    }

    #[test]
    fn uv_consistency_with_chain_rule() {
        // [v_x, v_y] = B [dx/d(x,y)] + A [du/d(x,y)]
        let p = point("exp(z1)*z2 - i*z2^2", &[c(0.2, 0.3), c(0.1, -0.6)]);
        let d = uv_partials(&p).unwrap();
        let (a, b) = (p.re_tau(), p.im_tau());
        assert!(max_abs_diff(&d.v_x, &(&b + &a * &d.u_x)) < 1e-13);
        assert!(max_abs_diff(&d.v_y, &(&a * &d.u_y)) < 1e-13);
    }

    #[test]
    fn omega_is_antisymmetric() {
        let p = point("sin(z1) + i*z1^2", &[c(0.2, 0.1)]);
        let w = kahler_form(&p).unwrap();
        for x in [[1.0, 0.3], [-0.7, 2.0]] {
            let v = nalgebra::DVector::from_row_slice(&x);
            assert!((v.transpose() * &w * &v)[(0, 0)].abs() < 1e-14);
        }
    }
}
