//! Finite-difference oracles over the affine coordinates `(x, y)`.
//!
//! Every stencil point is pulled back to the chart by Newton iteration on
//! `Re F_z(x* + iu) = y*` in the unknown `u`, seeded at the sample's own `u`.
//! None of these routines use the closed-form partials, so they check them
//! independently.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{eval_point, frame_change_to_affine, max_abs, metric_g, GeomError, PointData, UvPartials};
use crate::expr::Expr;

pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;

/// Solves for the chart point with `Re z = target[..n]` and
/// `Re F_z = target[n..]`, starting from `seed.u`.
pub fn invert_chart(e: &Expr, seed: &PointData, target: &[f64]) -> Result<PointData, GeomError> {
    let n = seed.arity();
    assert_eq!(target.len(), 2 * n);
    let (tx, ty) = target.split_at(n);
    let diverged = || GeomError::NewtonDivergence {
        target: target.to_vec(),
    };
    let at = |u: &DVector<f64>| -> Vec<Complex64> {
        tx.iter().zip(u.iter()).map(|(&x, &u)| Complex64::new(x, u)).collect()
    };
    let mut u = DVector::from_row_slice(&seed.u);
    for _ in 0..NEWTON_MAX_ITER {
        let p = eval_point(e, &at(&u)).map_err(|_| diverged())?;
        let r = DVector::from_iterator(n, p.y.iter().zip(ty).map(|(a, b)| a - b));
        // y(u + s) ~ y(u) - B s
        let step = p.im_tau().lu().solve(&r).ok_or_else(diverged)?;
        u += &step;
        if !step.iter().all(|s| s.is_finite()) {
            return Err(diverged());
        }
        if step.amax() <= NEWTON_TOL * (1.0 + u.amax()) {
            let p = eval_point(e, &at(&u)).map_err(|_| diverged())?;
            let resid = p.y.iter().zip(ty).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            let scale = 1.0 + ty.iter().fold(0.0_f64, |m, b| m.max(b.abs()));
            if resid <= 1e3 * NEWTON_TOL * scale {
                return Ok(p);
            }
            return Err(diverged());
        }
    }
    Err(diverged())
}

/// Second-order central-difference Hessians of every component of a map on
/// `R^d`: `(g(c + h e_i) - 2 g(c) + g(c - h e_i)) / h^2` on the diagonal and
/// the four-point rule off it.
fn fd_hessians<G>(center: &[f64], h: f64, map: G) -> Result<Vec<DMatrix<f64>>, GeomError>
where
    G: Fn(&[f64]) -> Result<Vec<f64>, GeomError>,
{
    let d = center.len();
    let shifted = |moves: &[(usize, f64)]| {
        let mut q = center.to_vec();
        for &(axis, s) in moves {
            q[axis] += s * h;
        }
        map(&q)
    };
    let mid = map(center)?;
    let m = mid.len();
    let mut out = vec![DMatrix::zeros(d, d); m];
    let h2 = h * h;
    for i in 0..d {
        let plus = shifted(&[(i, 1.0)])?;
        let minus = shifted(&[(i, -1.0)])?;
        for c in 0..m {
            out[c][(i, i)] = (plus[c] - 2.0 * mid[c] + minus[c]) / h2;
        }
        for j in (i + 1)..d {
            let pp = shifted(&[(i, 1.0), (j, 1.0)])?;
            let pm = shifted(&[(i, 1.0), (j, -1.0)])?;
            let mp = shifted(&[(i, -1.0), (j, 1.0)])?;
            let mm = shifted(&[(i, -1.0), (j, -1.0)])?;
            for c in 0..m {
                let v = (pp[c] - pm[c] - mp[c] + mm[c]) / (4.0 * h2);
                out[c][(i, j)] = v;
                out[c][(j, i)] = v;
            }
        }
    }
    Ok(out)
}

fn affine_center(p: &PointData) -> Vec<f64> {
    p.x.iter().chain(&p.y).copied().collect()
}

/// Second derivatives of all `2n + 1` immersion components with respect to
/// the affine coordinates. Components are recomputed from the resolved chart
/// point, not copied from the stencil targets.
pub fn fd_immersion_hessians(e: &Expr, p: &PointData, h: f64) -> Result<Vec<DMatrix<f64>>, GeomError> {
    fd_hessians(&affine_center(p), h, |q| Ok(invert_chart(e, p, q)?.imm))
}

/// Finite-difference Hessian of the height `f` over `(x, y)`.
pub fn fd_graph_hessian(e: &Expr, p: &PointData, h: f64) -> Result<DMatrix<f64>, GeomError> {
    let center = affine_center(p);
    let mut hs = fd_hessians(&center, h, |q| Ok(vec![invert_chart(e, p, q)?.f]))?;
    Ok(hs.pop().expect("one component"))
}

/// Gauss-Weingarten residual for the vertical transversal field.
///
/// The ambient second derivatives of the immersion in affine coordinates
/// must have zero tangential part (first `2n` components) and a transversal
/// part equal to the metric. Returns the largest deviation over all
/// components.
pub fn gauss_weingarten_residual(e: &Expr, p: &PointData, h: f64) -> Result<f64, GeomError> {
    let g = frame_change_to_affine(p, &metric_g(p)?)?;
    let hs = fd_immersion_hessians(e, p, h)?;
    let (normal, tangential) = hs.split_last().expect("2n + 1 components");
    let tangential = tangential.iter().map(max_abs).fold(0.0, f64::max);
    let normal = super::max_abs_diff(normal, &g);
    Ok(tangential.max(normal))
}

/// Central first differences of `(u, v)` over `(x, y)`.
pub fn fd_uv_partials(e: &Expr, p: &PointData, h: f64) -> Result<UvPartials, GeomError> {
    let n = p.arity();
    let center = affine_center(p);
    let mut jac = DMatrix::zeros(2 * n, 2 * n);
    for col in 0..2 * n {
        let mut plus = center.clone();
        let mut minus = center.clone();
        plus[col] += h;
        minus[col] -= h;
        let a = invert_chart(e, p, &plus)?;
        let b = invert_chart(e, p, &minus)?;
        for i in 0..n {
            jac[(i, col)] = (a.u[i] - b.u[i]) / (2.0 * h);
            jac[(n + i, col)] = (a.v[i] - b.v[i]) / (2.0 * h);
        }
    }
    Ok(UvPartials {
        u_x: jac.view((0, 0), (n, n)).into_owned(),
        u_y: jac.view((0, n), (n, n)).into_owned(),
        v_x: jac.view((n, 0), (n, n)).into_owned(),
        v_y: jac.view((n, n), (n, n)).into_owned(),
    })
}
