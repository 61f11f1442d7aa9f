//! Third-order complex jets: forward-mode differentiation of an [`Expr`].
//!
//! A jet carries the value, gradient, Hessian and third-derivative tensor of
//! a holomorphic function at a point. Higher tensors are stored densely, but
//! only the entries with sorted indices are computed; the rest are mirrored,
//! so symmetry holds exactly.

use num_complex::Complex64;

use crate::expr::{EvalError, Expr, Node};

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct CJet {
    n: usize,
    pub val: C,
    pub grad: Vec<C>,
    hess: Vec<C>,
    third: Vec<C>,
}

impl CJet {
    pub fn constant(n: usize, c: C) -> Self {
        CJet {
            n,
            val: c,
            grad: vec![ZERO; n],
            hess: vec![ZERO; n * n],
            third: vec![ZERO; n * n * n],
        }
    }

    /// The coordinate function `z_k` evaluated at `at`.
    pub fn variable(n: usize, k: usize, at: C) -> Self {
        let mut j = CJet::constant(n, at);
        j.grad[k] = ONE;
        j
    }

    pub fn arity(&self) -> usize {
        self.n
    }

    pub fn hess(&self, i: usize, j: usize) -> C {
        self.hess[i * self.n + j]
    }

    pub fn third(&self, i: usize, j: usize, k: usize) -> C {
        self.third[(i * self.n + j) * self.n + k]
    }

    /// Row-major `n x n` Hessian.
    pub fn hess_slice(&self) -> &[C] {
        &self.hess
    }

    /// Row-major `n x n x n` third-derivative tensor.
    pub fn third_slice(&self) -> &[C] {
        &self.third
    }

    pub(crate) fn set_tensors(&mut self, hess: Vec<C>, third: Vec<C>) {
        assert_eq!(hess.len(), self.n * self.n);
        assert_eq!(third.len(), self.n * self.n * self.n);
        self.hess = hess;
        self.third = third;
    }

    fn set_hess(&mut self, i: usize, j: usize, v: C) {
        let n = self.n;
        self.hess[i * n + j] = v;
        self.hess[j * n + i] = v;
    }

    fn set_third(&mut self, i: usize, j: usize, k: usize, v: C) {
        let n = self.n;
        for (a, b, c) in [
            (i, j, k),
            (i, k, j),
            (j, i, k),
            (j, k, i),
            (k, i, j),
            (k, j, i),
        ] {
            self.third[(a * n + b) * n + c] = v;
        }
    }

    fn zip(&self, other: &CJet, op: impl Fn(C, C) -> C) -> CJet {
        CJet {
            n: self.n,
            val: op(self.val, other.val),
            grad: zip_vec(&self.grad, &other.grad, &op),
            hess: zip_vec(&self.hess, &other.hess, &op),
            third: zip_vec(&self.third, &other.third, &op),
        }
    }

    pub fn add(&self, other: &CJet) -> CJet {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &CJet) -> CJet {
        self.zip(other, |a, b| a - b)
    }

    pub fn neg(&self) -> CJet {
        CJet {
            n: self.n,
            val: -self.val,
            grad: self.grad.iter().map(|&a| -a).collect(),
            hess: self.hess.iter().map(|&a| -a).collect(),
            third: self.third.iter().map(|&a| -a).collect(),
        }
    }

    /// Leibniz rule through third order.
    pub fn mul(&self, g: &CJet) -> CJet {
        let f = self;
        let n = self.n;
        let mut out = CJet::constant(n, f.val * g.val);
        for i in 0..n {
            out.grad[i] = f.grad[i] * g.val + f.val * g.grad[i];
        }
        for i in 0..n {
            for j in i..n {
                let v = f.hess(i, j) * g.val
                    + f.grad[i] * g.grad[j]
                    + f.grad[j] * g.grad[i]
                    + f.val * g.hess(i, j);
                out.set_hess(i, j, v);
            }
        }
        for i in 0..n {
            for j in i..n {
                for k in j..n {
                    let v = f.third(i, j, k) * g.val
                        + f.hess(i, j) * g.grad[k]
                        + f.hess(i, k) * g.grad[j]
                        + f.hess(j, k) * g.grad[i]
                        + f.grad[i] * g.hess(j, k)
                        + f.grad[j] * g.hess(i, k)
                        + f.grad[k] * g.hess(i, j)
                        + f.val * g.third(i, j, k);
                    out.set_third(i, j, k, v);
                }
            }
        }
        out
    }

    /// Chain rule for `phi(self)` given `d = [phi, phi', phi'', phi''']` at `self.val`.
    pub fn compose(&self, d: [C; 4]) -> CJet {
        let f = self;
        let n = self.n;
        let mut out = CJet::constant(n, d[0]);
        for i in 0..n {
            out.grad[i] = d[1] * f.grad[i];
        }
        for i in 0..n {
            for j in i..n {
                out.set_hess(i, j, d[2] * f.grad[i] * f.grad[j] + d[1] * f.hess(i, j));
            }
        }
        for i in 0..n {
            for j in i..n {
                for k in j..n {
                    let v = d[3] * f.grad[i] * f.grad[j] * f.grad[k]
                        + d[2]
                            * (f.hess(i, j) * f.grad[k]
                                + f.hess(i, k) * f.grad[j]
                                + f.hess(j, k) * f.grad[i])
                        + d[1] * f.third(i, j, k);
                    out.set_third(i, j, k, v);
                }
            }
        }
        out
    }

    fn is_finite(&self) -> bool {
        let ok = |c: &C| c.re.is_finite() && c.im.is_finite();
        ok(&self.val)
            && self.grad.iter().all(ok)
            && self.hess.iter().all(ok)
            && self.third.iter().all(ok)
    }
}

fn zip_vec(a: &[C], b: &[C], op: &impl Fn(C, C) -> C) -> Vec<C> {
    a.iter().zip(b).map(|(&x, &y)| op(x, y)).collect()
}

/// `t^k` and its first three derivatives; falling-factorial coefficients that
/// vanish are not multiplied by (possibly infinite) negative powers.
fn powi_derivatives(t: C, k: i32) -> [C; 4] {
    let mut d = [ZERO; 4];
    let mut coeff = 1.0;
    for (order, slot) in d.iter_mut().enumerate() {
        if coeff != 0.0 {
            *slot = coeff * t.powi(k - order as i32);
        }
        coeff *= f64::from(k) - order as f64;
    }
    d
}

/// Propagates third-order jets through `e` at `point`.
pub fn jet_eval(e: &Expr, point: &[C]) -> Result<CJet, EvalError> {
    e.check_point(point)?;
    let n = e.arity();
    let mut jets: Vec<CJet> = Vec::with_capacity(e.nodes().len());
    for (id, node) in e.nodes().iter().enumerate() {
        let jet = match *node {
            Node::Real(r) => CJet::constant(n, C::new(r, 0.0)),
            Node::ImagUnit => CJet::constant(n, C::i()),
            Node::Var(k) => CJet::variable(n, k, point[k]),
            Node::Neg(a) => jets[a].neg(),
            Node::Add(a, b) => jets[a].add(&jets[b]),
            Node::Sub(a, b) => jets[a].sub(&jets[b]),
            Node::Mul(a, b) => jets[a].mul(&jets[b]),
            Node::Div(a, b) => {
                let t = jets[b].val;
                if t == ZERO {
                    return Err(e.domain(id, "division by zero"));
                }
                let r = t.inv();
                let recip = jets[b].compose([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r]);
                jets[a].mul(&recip)
            }
            Node::Pow(a, k) => {
                let t = jets[a].val;
                if t == ZERO && k < 0 {
                    return Err(e.domain(id, "negative power of zero"));
                }
                jets[a].compose(powi_derivatives(t, k))
            }
            Node::Call(f, a) => {
                let d = f
                    .derivatives(jets[a].val)
                    .map_err(|r| e.domain(id, r))?;
                jets[a].compose(d)
            }
        };
        if !jet.is_finite() {
            return Err(e.domain(id, "non-finite derivative"));
        }
        jets.push(jet);
    }
    Ok(jets.pop().expect("expression has at least one node"))
}

/// One-dimensional central stencils, all second-order accurate:
/// `(offset, weight * h^order)`.
fn central_stencil(order: usize) -> &'static [(i32, f64)] {
    match order {
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        3 => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
        _ => unreachable!("jets stop at order 3"),
    }
}

/// Mixed partial derivative of `F` for the multi-index given as a list of
/// coordinate directions (with repetition), by a tensor product of central
/// stencils with real step `h`.
fn fd_partial(e: &Expr, point: &[C], h: f64, dirs: &[usize]) -> Result<C, EvalError> {
    let mut axes: Vec<(usize, usize)> = Vec::new();
    for &d in dirs {
        match axes.iter_mut().find(|(a, _)| *a == d) {
            Some((_, m)) => *m += 1,
            None => axes.push((d, 1)),
        }
    }
    // expand the tensor-product stencil
    let mut terms: Vec<(Vec<C>, f64)> = vec![(point.to_vec(), 1.0)];
    for &(axis, mult) in &axes {
        let mut next = Vec::with_capacity(terms.len() * 4);
        for (p, w) in &terms {
            for &(off, wt) in central_stencil(mult) {
                let mut q = p.clone();
                q[axis] += C::new(f64::from(off) * h, 0.0);
                next.push((q, w * wt));
            }
        }
        terms = next;
    }
    let mut acc = ZERO;
    for (p, w) in terms {
        acc += w * e.eval_complex(&p)?;
    }
    Ok(acc / h.powi(dirs.len() as i32))
}

/// Central finite-difference estimate of the jet; an oracle independent of
/// [`jet_eval`]. Errors are `O(h^2)` plus roundoff of order `eps / h^3` on
/// the third derivatives.
pub fn fd_oracle(e: &Expr, point: &[C], h: f64) -> Result<CJet, EvalError> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let n = e.arity();
    let mut out = CJet::constant(n, e.eval_complex(point)?);
    for i in 0..n {
        out.grad[i] = fd_partial(e, point, h, &[i])?;
    }
    for i in 0..n {
        for j in i..n {
            let v = fd_partial(e, point, h, &[i, j])?;
            out.set_hess(i, j, v);
        }
    }
    for i in 0..n {
        for j in i..n {
            for k in j..n {
                let v = fd_partial(e, point, h, &[i, j, k])?;
                out.set_third(i, j, k, v);
            }
        }
    }
    Ok(out)
}

/// Largest absolute componentwise gap per order: `[grad, hess, third]`.
pub fn jet_gap(a: &CJet, b: &CJet) -> [f64; 3] {
    let gap = |x: &[C], y: &[C]| {
        x.iter()
            .zip(y)
            .map(|(p, q)| (p - q).norm())
            .fold(0.0, f64::max)
    };
    [
        gap(&a.grad, &b.grad),
        gap(&a.hess, &b.hess),
        gap(&a.third, &b.third),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn close(a: C, b: C, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn quadratic_jet() {
        let e = parse("i*z1^2/2", 1).unwrap();
        let j = jet_eval(&e, &[c(1.0, 2.0)]).unwrap();
        assert!(close(j.val, c(-2.0, -1.5), 1e-15));
        assert!(close(j.grad[0], c(-2.0, 1.0), 1e-15));
        assert!(close(j.hess(0, 0), c(0.0, 1.0), 1e-15));
        assert!(close(j.third(0, 0, 0), ZERO, 1e-15));
    }

    #[test]
    fn cubic_jet() {
        let e = parse("z1^3/6", 1).unwrap();
        for z in [c(0.3, 0.7), c(-2.0, 1.0), c(0.0, 0.0)] {
            let j = jet_eval(&e, &[z]).unwrap();
            assert!(close(j.grad[0], z * z / 2.0, 1e-14));
            assert!(close(j.hess(0, 0), z, 1e-14));
            assert!(close(j.third(0, 0, 0), ONE, 1e-14));
        }
    }

    #[test]
    fn constant_jet() {
        let e = parse("5", 2).unwrap();
        let j = jet_eval(&e, &[c(1.0, 1.0), c(-3.0, 0.5)]).unwrap();
        assert_eq!(j.val, c(5.0, 0.0));
        assert!(j.grad.iter().chain(j.hess_slice()).chain(j.third_slice()).all(|&x| x == ZERO));
    }

    #[test]
    fn mixed_partials_of_product() {
        // F = z1^2 z2 z3: F_123 = 2 z1, F_112 = 2 z2 z3 ... check a few
        let e = parse("z1^2*z2*z3", 3).unwrap();
        let z = [c(0.5, 1.0), c(-1.0, 0.25), c(2.0, -0.5)];
        let j = jet_eval(&e, &z).unwrap();
        assert!(close(j.third(0, 1, 2), 2.0 * z[0], 1e-14));
        assert!(close(j.third(2, 0, 1), 2.0 * z[0], 1e-14));
        assert!(close(j.third(0, 0, 1), 2.0 * z[2], 1e-14));
        assert!(close(j.third(1, 1, 0), ZERO, 1e-14));
        assert!(close(j.hess(0, 0), 2.0 * z[1] * z[2], 1e-14));
    }

    #[test]
    fn symmetry_is_exact() {
        let e = parse("exp(z1*z2)/(z3 + 2) + sin(z1)*z2^3", 3).unwrap();
        let j = jet_eval(&e, &[c(0.1, 0.2), c(-0.3, 0.4), c(0.5, -0.6)]).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(j.hess(a, b), j.hess(b, a));
                for d in 0..3 {
                    let v = j.third(a, b, d);
                    assert_eq!(v, j.third(b, a, d));
                    assert_eq!(v, j.third(d, b, a));
                    assert_eq!(v, j.third(a, d, b));
                }
            }
        }
    }

    #[test]
    fn primitive_derivative_tables_match_identities() {
        // each primitive checked against the oracle at a generic point
        let z = [c(0.7, -0.4)];
        for f in crate::expr::Func::ALL {
            let e = parse(&format!("{}(z1)", f.name()), 1).unwrap();
            let j = jet_eval(&e, &z).unwrap();
            let o = fd_oracle(&e, &z, 1e-3).unwrap();
            let g = jet_gap(&j, &o);
            assert!(g[0] < 1e-5 && g[1] < 1e-5 && g[2] < 1e-4, "{} {g:?}", f.name());
        }
    }

    #[test]
    fn negative_powers_and_zero() {
        let e = parse("z1^-2", 1).unwrap();
        let z = c(0.5, 0.5);
        let j = jet_eval(&e, &[z]).unwrap();
        assert!(close(j.third(0, 0, 0), -24.0 * z.powi(-5), 1e-12));
        assert!(jet_eval(&e, &[ZERO]).is_err());
        // nonnegative powers stay finite at zero
        let e = parse("z1^2", 1).unwrap();
        let j = jet_eval(&e, &[ZERO]).unwrap();
        assert_eq!(j.hess(0, 0), c(2.0, 0.0));
        assert_eq!(j.third(0, 0, 0), ZERO);
        let e = parse("z1^0", 1).unwrap();
        assert_eq!(jet_eval(&e, &[ZERO]).unwrap().val, ONE);
    }

    #[test]
    fn branch_points_are_domain_errors() {
        let e = parse("sqrt(z1)", 1).unwrap();
        assert!(matches!(jet_eval(&e, &[ZERO]), Err(EvalError::Domain { .. })));
        let e = parse("log(z1 - 1)", 1).unwrap();
        assert!(matches!(jet_eval(&e, &[ONE]), Err(EvalError::Domain { .. })));
        let e = parse("1/(z1 - 1)", 1).unwrap();
        assert!(matches!(jet_eval(&e, &[ONE]), Err(EvalError::Domain { .. })));
    }

    #[test]
    fn oracle_on_quadratic() {
        let e = parse("i*z1^2/2", 1).unwrap();
        let z = [c(1.0, 2.0)];
        let g = jet_gap(&jet_eval(&e, &z).unwrap(), &fd_oracle(&e, &z, 1e-4).unwrap());
        assert!(g[0] <= 1e-8 && g[1] <= 1e-8, "{g:?}");
    }

    #[test]
    fn oracle_on_linear() {
        let e = parse("z1", 1).unwrap();
        let o = fd_oracle(&e, &[c(3.0, -1.0)], 0.01).unwrap();
        assert!(close(o.grad[0], ONE, 1e-13));
        assert!(o.hess(0, 0).norm() < 1e-10);
    }

    #[test]
    fn oracle_on_exp_at_origin() {
        let e = parse("exp(z1)", 1).unwrap();
        let o = fd_oracle(&e, &[ZERO], 1e-3).unwrap();
        assert!(close(o.grad[0], ONE, 1e-5));
        assert!(close(o.hess(0, 0), ONE, 1e-5));
        assert!(close(o.third(0, 0, 0), ONE, 1e-5));
    }

    #[test]
    fn cauchy_riemann_sanity() {
        let e = parse("exp(z1)*z2 + z1/z2", 2).unwrap();
        let z = [c(0.2, 0.1), c(1.0, -0.5)];
        let j = jet_eval(&e, &z).unwrap();
        let eps = 1e-6;
        for dir in [c(eps, 0.0), c(0.0, eps)] {
            for k in 0..2 {
                let mut p = z;
                p[k] += dir;
                let dv = e.eval_complex(&p).unwrap() - j.val;
                assert!((dv - j.grad[k] * dir).norm() < 1e-10, "{k} {dir}");
            }
        }
    }
}
