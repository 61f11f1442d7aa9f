//! Chart-frame metric and Kaehler form against finite differences of
//! `w = F_z` along real chart directions.

use nalgebra::DMatrix;
use num_complex::Complex64 as C;

use parasphere::skgeom::{affine_jacobian, kahler_form, max_abs_diff, metric_g};
use parasphere::{eval_point, parse, Expr};

/// `d w / d s` along chart axis `axis` (`x1..xn, u1..un`), by central differences.
fn dw(e: &Expr, z: &[C], axis: usize, h: f64) -> Vec<C> {
    let n = z.len();
    let step = if axis < n { C::new(h, 0.0) } else { C::new(0.0, h) };
    let k = axis % n;
    let shifted = |s: f64| {
        let mut q = z.to_vec();
        q[k] += step * s;
        eval_point(e, &q).unwrap().w
    };
    let (p, m) = (shifted(1.0), shifted(-1.0));
    p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect()
}

fn cases() -> Vec<(&'static str, Vec<C>)> {
    vec![
        ("z1^3/6", vec![C::new(0.3, 0.7)]),
        ("i*(z1^2 - z2^2)/2 + z1^2*z2/6", vec![C::new(0.1, -0.2), C::new(0.3, 0.25)]),
        ("i*(z1^2 + z2^2) + exp(z1 + z2)/4", vec![C::new(-0.3, 0.4), C::new(0.2, 0.1)]),
        ("i*(z1^2 + z2^2 + z3^2)/2 + sin(z3)/(z1 + 4)", vec![C::new(0.1, 0.2), C::new(-0.2, 0.3), C::new(0.4, -0.1)]),
    ]
}

#[test]
fn metric_is_twice_im_tau_on_both_blocks() {
    for (src, z) in cases() {
        let n = z.len();
        let e = parse(src, n).unwrap();
        let p = eval_point(&e, &z).unwrap();
        // Im(dw/dx_j)_i = B_ij
        let mut b = DMatrix::zeros(n, n);
        for j in 0..n {
            for (i, d) in dw(&e, &z, j, 1e-5).iter().enumerate() {
                b[(i, j)] = d.im;
            }
        }
        let mut want = DMatrix::zeros(2 * n, 2 * n);
        want.view_mut((0, 0), (n, n)).copy_from(&(&b * 2.0));
        want.view_mut((n, n), (n, n)).copy_from(&(&b * 2.0));
        let g = metric_g(&p).unwrap();
        assert!(max_abs_diff(&g, &want) < 1e-8, "{src}");
    }
}

#[test]
fn kahler_form_is_twice_dx_wedge_dy() {
    for (src, z) in cases() {
        let n = z.len();
        let e = parse(src, n).unwrap();
        let p = eval_point(&e, &z).unwrap();
        // rows of dy over the chart frame
        let mut dy = DMatrix::zeros(n, 2 * n);
        for a in 0..2 * n {
            for (i, d) in dw(&e, &z, a, 1e-5).iter().enumerate() {
                dy[(i, a)] = d.re;
            }
        }
        let mut dx = DMatrix::zeros(n, 2 * n);
        for i in 0..n {
            dx[(i, i)] = 1.0;
        }
        let omega_fd = (dx.transpose() * &dy - dy.transpose() * &dx) * 2.0;
        // omega_xy pulled back to the chart frame
        let jac = affine_jacobian(&p);
        let omega = jac.transpose() * kahler_form(&p).unwrap() * &jac;
        assert!(max_abs_diff(&omega, &omega_fd) < 1e-8, "{src}");
        // and omega(X, Y) = g(X, JY) with J e_x = e_u, J e_u = -e_x
        let mut jm = DMatrix::zeros(2 * n, 2 * n);
        for k in 0..n {
            jm[(n + k, k)] = 1.0;
            jm[(k, n + k)] = -1.0;
        }
        let g = metric_g(&p).unwrap();
        assert!(max_abs_diff(&(&g * &jm), &omega_fd) < 1e-8, "{src}");
    }
}
