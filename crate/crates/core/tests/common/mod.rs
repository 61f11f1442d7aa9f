#![allow(dead_code)]

use num_complex::Complex64 as C;
use rand::Rng;

/// Test-side expression tree, rendered to source text and evaluated by plain
/// recursion, independently of the crate's arena evaluator.
#[derive(Debug, Clone)]
pub enum Gen {
    Var(usize),
    Const(f64, f64),
    Neg(Box<Gen>),
    Add(Box<Gen>, Box<Gen>),
    Sub(Box<Gen>, Box<Gen>),
    Mul(Box<Gen>, Box<Gen>),
    Div(Box<Gen>, Box<Gen>),
    Pow(Box<Gen>, i32),
    Call(&'static str, Box<Gen>),
}

pub const FUNCS: [&str; 7] = ["exp", "log", "sin", "cos", "sinh", "cosh", "sqrt"];

impl Gen {
    pub fn source(&self) -> String {
        match self {
            Gen::Var(k) => format!("z{}", k + 1),
            Gen::Const(re, im) => format!("({re} + {im}*i)"),
            Gen::Neg(a) => format!("-({})", a.source()),
            Gen::Add(a, b) => format!("({} + {})", a.source(), b.source()),
            Gen::Sub(a, b) => format!("({} - {})", a.source(), b.source()),
            Gen::Mul(a, b) => format!("({} * {})", a.source(), b.source()),
            Gen::Div(a, b) => format!("({} / {})", a.source(), b.source()),
            Gen::Pow(a, k) => format!("({})^({k})", a.source()),
            Gen::Call(f, a) => format!("{f}({})", a.source()),
        }
    }

    /// Plain evaluation; `None` on a division by zero or a zero log argument.
    pub fn eval(&self, z: &[C]) -> Option<C> {
        Some(match self {
            Gen::Var(k) => z[*k],
            Gen::Const(re, im) => C::new(*re, *im),
            Gen::Neg(a) => -a.eval(z)?,
            Gen::Add(a, b) => a.eval(z)? + b.eval(z)?,
            Gen::Sub(a, b) => a.eval(z)? - b.eval(z)?,
            Gen::Mul(a, b) => a.eval(z)? * b.eval(z)?,
            Gen::Div(a, b) => {
                let d = b.eval(z)?;
                if d == C::new(0.0, 0.0) {
                    return None;
                }
                a.eval(z)? / d
            }
            Gen::Pow(a, k) => {
                let t = a.eval(z)?;
                if *k < 0 && t == C::new(0.0, 0.0) {
                    return None;
                }
                t.powi(*k)
            }
            Gen::Call(f, a) => {
                let t = a.eval(z)?;
                match *f {
                    "exp" => t.exp(),
                    "log" if t == C::new(0.0, 0.0) => return None,
                    "log" => t.ln(),
                    "sin" => t.sin(),
                    "cos" => t.cos(),
                    "sinh" => t.sinh(),
                    "cosh" => t.cosh(),
                    "sqrt" => t.sqrt(),
                    _ => unreachable!(),
                }
            }
        })
    }

    /// Like [`Gen::eval`], but rejects points near branch cuts, poles and
    /// overflow, where finite differences say nothing useful.
    pub fn eval_tame(&self, z: &[C]) -> Option<C> {
        let v = match self {
            Gen::Var(_) | Gen::Const(..) => self.eval(z)?,
            Gen::Neg(a) => -a.eval_tame(z)?,
            Gen::Add(a, b) => a.eval_tame(z)? + b.eval_tame(z)?,
            Gen::Sub(a, b) => a.eval_tame(z)? - b.eval_tame(z)?,
            Gen::Mul(a, b) => a.eval_tame(z)? * b.eval_tame(z)?,
            Gen::Div(a, b) => {
                let d = b.eval_tame(z)?;
                if d.norm() < 0.5 {
                    return None;
                }
                a.eval_tame(z)? / d
            }
            Gen::Pow(a, k) => {
                let t = a.eval_tame(z)?;
                if *k < 0 && t.norm() < 0.5 {
                    return None;
                }
                t.powi(*k)
            }
            Gen::Call(f, a) => {
                let t = a.eval_tame(z)?;
                let ok = match *f {
                    "log" | "sqrt" => t.norm() > 0.5 && t.arg().abs() < 2.5,
                    "exp" => t.re.abs() < 3.0,
                    _ => t.re.abs() < 3.0 && t.im.abs() < 3.0,
                };
                if !ok {
                    return None;
                }
                Gen::Call(f, Box::new(Gen::Const(t.re, t.im))).eval(z)?
            }
        };
        (v.is_finite() && v.norm() < 1e3).then_some(v)
    }
}

pub fn random_gen<R: Rng>(rng: &mut R, n: usize, depth: u32) -> Gen {
    if depth == 0 || rng.random_bool(0.25) {
        return if rng.random_bool(0.7) {
            Gen::Var(rng.random_range(0..n))
        } else {
            let q = |rng: &mut R| rng.random_range(-8..=8) as f64 / 4.0;
            Gen::Const(q(rng), q(rng))
        };
    }
    let sub = |rng: &mut R| Box::new(random_gen(rng, n, depth - 1));
    match rng.random_range(0..8) {
        0 => Gen::Neg(sub(rng)),
        1 => Gen::Add(sub(rng), sub(rng)),
        2 => Gen::Sub(sub(rng), sub(rng)),
        3 => Gen::Mul(sub(rng), sub(rng)),
        4 => Gen::Div(sub(rng), sub(rng)),
        5 => Gen::Pow(sub(rng), rng.random_range(-3..=4)),
        _ => Gen::Call(FUNCS[rng.random_range(0..FUNCS.len())], sub(rng)),
    }
}

pub fn random_point<R: Rng>(rng: &mut R, n: usize) -> Vec<C> {
    (0..n)
        .map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

/// Draws an expression/point pair whose whole finite-difference stencil
/// (radius `reach` per coordinate) stays in the tame region.
pub fn tame_pair<R: Rng>(rng: &mut R, reach: f64) -> (Gen, Vec<C>) {
    loop {
        let n = rng.random_range(1..=3);
        let g = random_gen(rng, n, 4);
        let z = random_point(rng, n);
        let corners_ok = [-1.0, 1.0].iter().all(|&s| {
            let moved: Vec<C> = z.iter().map(|c| c + C::new(s * reach, s * reach)).collect();
            g.eval_tame(&moved).is_some()
        });
        if g.eval_tame(&z).is_some() && corners_ok {
            return (g, z);
        }
    }
}
