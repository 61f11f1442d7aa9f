//! Holomorphic expression language.
//!
//! An [`Expr`] is an arena of nodes in which every child precedes its parent,
//! so a single forward sweep over the arena evaluates the whole expression.
//! Only holomorphic primitives can be represented; `conj`, `re`, `im` and
//! `abs` are rejected by the parser.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

/// Unary primitives admitted by the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sinh,
    Cosh,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 7] = [
        Func::Exp,
        Func::Log,
        Func::Sin,
        Func::Cos,
        Func::Sinh,
        Func::Cosh,
        Func::Sqrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Principal-branch value.
    pub fn value(self, t: Complex64) -> Result<Complex64, &'static str> {
        Ok(match self {
            Func::Exp => t.exp(),
            Func::Log => {
                if t == Complex64::new(0.0, 0.0) {
                    return Err("logarithm of zero");
                }
                t.ln()
            }
            Func::Sin => t.sin(),
            Func::Cos => t.cos(),
            Func::Sinh => t.sinh(),
            Func::Cosh => t.cosh(),
            Func::Sqrt => t.sqrt(),
        })
    }

    /// Value and first three derivatives at `t`.
    pub fn derivatives(self, t: Complex64) -> Result<[Complex64; 4], &'static str> {
        let zero = Complex64::new(0.0, 0.0);
        Ok(match self {
            Func::Exp => {
                let e = t.exp();
                [e, e, e, e]
            }
            Func::Log => {
                if t == zero {
                    return Err("logarithm of zero");
                }
                let r = t.inv();
                [t.ln(), r, -r * r, 2.0 * r * r * r]
            }
            Func::Sin => {
                let (s, c) = (t.sin(), t.cos());
                [s, c, -s, -c]
            }
            Func::Cos => {
                let (s, c) = (t.sin(), t.cos());
                [c, -s, -c, s]
            }
            Func::Sinh => {
                let (s, c) = (t.sinh(), t.cosh());
                [s, c, s, c]
            }
            Func::Cosh => {
                let (s, c) = (t.sinh(), t.cosh());
                [c, s, c, s]
            }
            Func::Sqrt => {
                if t == zero {
                    return Err("square root at its branch point");
                }
                let s = t.sqrt();
                let r = s.inv();
                // d^k/dt^k t^(1/2) = s * (1/2)(-1/2)(-3/2).. / t^k
                let r3 = r * r * r;
                [s, 0.5 * r, -0.25 * r3, 0.375 * r3 * r * r]
            }
        })
    }
}

/// Index of a node inside an [`Expr`] arena.
pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Non-negative real literal.
    Real(f64),
    /// The imaginary unit `i`.
    ImagUnit,
    /// Zero-based variable index (`z1` is `Var(0)`).
    Var(usize),
    Neg(NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    Pow(NodeId, i32),
    Call(Func, NodeId),
}

/// A parsed holomorphic function of `arity` complex variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    nodes: Vec<Node>,
    arity: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at column {}: found {found}, expected {}", .pos + 1, .expected.join(" | "))]
    Syntax {
        pos: usize,
        found: String,
        expected: Vec<&'static str>,
    },
    #[error("unknown identifier `{name}` at column {}{hint}", .pos + 1)]
    UnknownIdentifier {
        name: String,
        pos: usize,
        hint: &'static str,
    },
    #[error("variable `{name}` at column {} is out of range for arity {arity}", .pos + 1)]
    VariableOutOfRange {
        name: String,
        pos: usize,
        arity: usize,
    },
    #[error("exponent at column {} must be an integer literal", .pos + 1)]
    NonIntegerExponent { pos: usize },
    #[error("arity must be at least 1")]
    ZeroArity,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error in `{subexpr}`: {reason}")]
    Domain { subexpr: String, reason: String },
    #[error("point has {got} coordinates, expression expects {expected}")]
    PointArity { expected: usize, got: usize },
}

/// Parses `source` as a function of `z1..zn`.
pub fn parse(source: &str, n: usize) -> Result<Expr, ParseError> {
    if n == 0 {
        return Err(ParseError::ZeroArity);
    }
    let tokens = lex(source)?;
    let mut p = Parser {
        tokens,
        at: 0,
        arity: n,
        nodes: Vec::new(),
    };
    p.expr()?;
    p.expect_end()?;
    Ok(Expr {
        nodes: p.nodes,
        arity: n,
    })
}

impl Expr {
    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> NodeId {
        self.nodes.len() - 1
    }

    /// Value of the expression at `point` (principal branches for `log` and `sqrt`).
    pub fn eval_complex(&self, point: &[Complex64]) -> Result<Complex64, EvalError> {
        self.check_point(point)?;
        let mut vals: Vec<Complex64> = Vec::with_capacity(self.nodes.len());
        for (id, node) in self.nodes.iter().enumerate() {
            let v = match *node {
                Node::Real(r) => Complex64::new(r, 0.0),
                Node::ImagUnit => Complex64::i(),
                Node::Var(k) => point[k],
                Node::Neg(a) => -vals[a],
                Node::Add(a, b) => vals[a] + vals[b],
                Node::Sub(a, b) => vals[a] - vals[b],
                Node::Mul(a, b) => vals[a] * vals[b],
                Node::Div(a, b) => {
                    if vals[b] == Complex64::new(0.0, 0.0) {
                        return Err(self.domain(id, "division by zero"));
                    }
                    vals[a] / vals[b]
                }
                Node::Pow(a, k) => {
                    if k < 0 && vals[a] == Complex64::new(0.0, 0.0) {
                        return Err(self.domain(id, "negative power of zero"));
                    }
                    vals[a].powi(k)
                }
                Node::Call(f, a) => f.value(vals[a]).map_err(|r| self.domain(id, r))?,
            };
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(self.domain(id, "non-finite value"));
            }
            vals.push(v);
        }
        Ok(vals[self.root()])
    }

    pub(crate) fn check_point(&self, point: &[Complex64]) -> Result<(), EvalError> {
        if point.len() != self.arity {
            return Err(EvalError::PointArity {
                expected: self.arity,
                got: point.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn domain(&self, id: NodeId, reason: &str) -> EvalError {
        EvalError::Domain {
            subexpr: self.display_node(id),
            reason: reason.to_string(),
        }
    }

    /// Renders the subtree rooted at `id`.
    pub fn display_node(&self, id: NodeId) -> String {
        let mut s = String::new();
        self.write_node(&mut s, id, 0);
        s
    }

    fn write_node(&self, out: &mut String, id: NodeId, min_prec: u8) {
        let prec = precedence(&self.nodes[id]);
        let paren = prec < min_prec;
        if paren {
            out.push('(');
        }
        match self.nodes[id] {
            Node::Real(r) => out.push_str(&r.to_string()),
            Node::ImagUnit => out.push('i'),
            Node::Var(k) => {
                out.push('z');
                out.push_str(&(k + 1).to_string());
            }
            Node::Neg(a) => {
                out.push('-');
                self.write_node(out, a, PREC_UNARY);
            }
            Node::Add(a, b) | Node::Sub(a, b) => {
                self.write_node(out, a, PREC_ADD);
                out.push_str(if matches!(self.nodes[id], Node::Add(..)) {
                    " + "
                } else {
                    " - "
                });
                self.write_node(out, b, PREC_MUL);
            }
            Node::Mul(a, b) | Node::Div(a, b) => {
                self.write_node(out, a, PREC_MUL);
                out.push(if matches!(self.nodes[id], Node::Mul(..)) {
                    '*'
                } else {
                    '/'
                });
                self.write_node(out, b, PREC_UNARY);
            }
            Node::Pow(a, k) => {
                self.write_node(out, a, PREC_ATOM);
                out.push('^');
                out.push_str(&k.to_string());
            }
            Node::Call(f, a) => {
                out.push_str(f.name());
                out.push('(');
                self.write_node(out, a, 0);
                out.push(')');
            }
        }
        if paren {
            out.push(')');
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_node(self.root()))
    }
}

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(node: &Node) -> u8 {
    match node {
        Node::Add(..) | Node::Sub(..) => PREC_ADD,
        Node::Mul(..) | Node::Div(..) => PREC_MUL,
        Node::Neg(_) => PREC_UNARY,
        Node::Pow(..) => PREC_POW,
        _ => PREC_ATOM,
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, String),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(_, s) => format!("number `{s}`"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

/// Token positions are character columns (0-based).
fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            c if c.is_ascii_digit() || c == '.' => {
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                // optional exponent part: e[+-]digits
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let value = text.parse::<f64>().map_err(|_| ParseError::Syntax {
                    pos: start,
                    found: format!("malformed number `{text}`"),
                    expected: vec!["number"],
                })?;
                out.push((Tok::Num(value, text), start));
                continue;
            }
            c if c.is_alphabetic() || c == '_' => {
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push((Tok::Ident(chars[start..i].iter().collect()), start));
                continue;
            }
            other => {
                return Err(ParseError::Syntax {
                    pos: start,
                    found: format!("character `{other}`"),
                    expected: vec!["operator", "operand"],
                })
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, chars.len()));
    Ok(out)
}

struct Parser {
    tokens: Vec<(Tok, usize)>,
    at: usize,
    arity: usize,
    nodes: Vec<Node>,
}

const OPERAND: [&str; 5] = ["number", "`i`", "variable", "function", "`(`"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.at].0
    }

    fn pos(&self) -> usize {
        self.tokens[self.at].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.tokens[self.at].clone();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        t
    }

    fn push(&mut self, node: Node) -> NodeId {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    fn syntax(&self, expected: &[&'static str]) -> ParseError {
        ParseError::Syntax {
            pos: self.pos(),
            found: self.peek().describe(),
            expected: expected.to_vec(),
        }
    }

    fn expect_end(&mut self) -> Result<(), ParseError> {
        if *self.peek() == Tok::End {
            Ok(())
        } else {
            Err(self.syntax(&["operator", "end of input"]))
        }
    }

    fn expr(&mut self) -> Result<NodeId, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = self.peek().clone();
            if op != Tok::Plus && op != Tok::Minus {
                return Ok(lhs);
            }
            self.bump();
            let rhs = self.term()?;
            lhs = self.push(if op == Tok::Plus {
                Node::Add(lhs, rhs)
            } else {
                Node::Sub(lhs, rhs)
            });
        }
    }

    fn term(&mut self) -> Result<NodeId, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = self.peek().clone();
            if op != Tok::Star && op != Tok::Slash {
                return Ok(lhs);
            }
            self.bump();
            let rhs = self.unary()?;
            lhs = self.push(if op == Tok::Star {
                Node::Mul(lhs, rhs)
            } else {
                Node::Div(lhs, rhs)
            });
        }
    }

    fn unary(&mut self) -> Result<NodeId, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            let inner = self.unary()?;
            return Ok(self.push(Node::Neg(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<NodeId, ParseError> {
        let mut base = self.primary()?;
        while *self.peek() == Tok::Caret {
            self.bump();
            let k = self.exponent()?;
            base = self.push(Node::Pow(base, k));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<i32, ParseError> {
        let pos = self.pos();
        let parenthesized = *self.peek() == Tok::LParen;
        if parenthesized {
            self.bump();
        }
        let sign = match self.peek() {
            Tok::Minus => {
                self.bump();
                -1.0
            }
            Tok::Plus => {
                self.bump();
                1.0
            }
            _ => 1.0,
        };
        let value = match self.peek().clone() {
            Tok::Num(v, _) => {
                self.bump();
                v
            }
            _ => return Err(ParseError::NonIntegerExponent { pos }),
        };
        if parenthesized {
            if *self.peek() != Tok::RParen {
                return Err(ParseError::NonIntegerExponent { pos });
            }
            self.bump();
        }
        let k = sign * value;
        if k.fract() != 0.0 || k.abs() > i32::MAX as f64 {
            return Err(ParseError::NonIntegerExponent { pos });
        }
        Ok(k as i32)
    }

    fn primary(&mut self) -> Result<NodeId, ParseError> {
        let (tok, pos) = self.bump();
        match tok {
            Tok::Num(v, _) => Ok(self.push(Node::Real(v))),
            Tok::LParen => {
                let inner = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.syntax(&["`)`", "operator"]));
                }
                self.bump();
                Ok(inner)
            }
            Tok::Ident(name) => self.identifier(name, pos),
            _ => {
                self.at -= usize::from(tok != Tok::End);
                Err(self.syntax(&OPERAND))
            }
        }
    }

    fn identifier(&mut self, name: String, pos: usize) -> Result<NodeId, ParseError> {
        if name == "i" {
            return Ok(self.push(Node::ImagUnit));
        }
        if let Some(f) = Func::from_name(&name) {
            if *self.peek() != Tok::LParen {
                return Err(self.syntax(&["`(`"]));
            }
            self.bump();
            let arg = self.expr()?;
            if *self.peek() != Tok::RParen {
                return Err(self.syntax(&["`)`", "operator"]));
            }
            self.bump();
            return Ok(self.push(Node::Call(f, arg)));
        }
        if let Some(digits) = name.strip_prefix('z') {
            if !digits.is_empty() && digits.chars().all(|c| c.is_ascii_digit()) {
                return match digits.parse::<usize>() {
                    Ok(k) if (1..=self.arity).contains(&k) => Ok(self.push(Node::Var(k - 1))),
                    _ => Err(ParseError::VariableOutOfRange {
                        name,
                        pos,
                        arity: self.arity,
                    }),
                };
            }
        }
        let hint = match name.as_str() {
            "conj" | "re" | "im" | "abs" | "Re" | "Im" | "arg" => {
                " (not holomorphic; only exp, log, sin, cos, sinh, cosh, sqrt are allowed)"
            }
            _ => "",
        };
        Err(ParseError::UnknownIdentifier { name, pos, hint })
    }
}
