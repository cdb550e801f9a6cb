//! Field expression language.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?
//! atom    := number | variable | 'pi' | func '(' args ')' | '(' expr ')'
//! ```
//!
//! Variables are `xi`, `x`, `t`, `chi`. Functions: `sin cos exp ln abs frac
//! step` take one argument, `min max` take two. `step(a)` is 1 for `a >= 0`.

use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    Xi,
    X,
    T,
    Chi,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::Xi => "xi",
            Var::X => "x",
            Var::T => "t",
            Var::Chi => "chi",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        match s {
            "xi" => Some(Var::Xi),
            "x" => Some(Var::X),
            "t" => Some(Var::T),
            "chi" => Some(Var::Chi),
            _ => None,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Abs,
    Frac,
    Step,
    Min,
    Max,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Abs => "abs",
            Func::Frac => "frac",
            Func::Step => "step",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "abs" => Func::Abs,
            "frac" => Func::Frac,
            "step" => Func::Step,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DslError {
    #[error("syntax error at {line}:{col}: found {found}, expected one of [{}]", expected.join(", "))]
    Syntax {
        line: usize,
        col: usize,
        found: String,
        expected: Vec<String>,
    },
    #[error("unknown identifier '{name}' at {line}:{col}")]
    UnknownIdentifier { name: String, line: usize, col: usize },
    #[error("unbound variable '{0}'")]
    UnboundVariable(Var),
    #[error("non-finite result from {0}")]
    NonfiniteResult(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertificateError {
    #[error("breakpoint {0} outside (0,1)")]
    OutOfCell(f64),
    #[error("breakpoints must be strictly increasing")]
    NotIncreasing,
}

/// ξ-locations where a two-scale profile may jump; continuous elsewhere.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PiecewiseCertificate {
    breakpoints: Vec<f64>,
}

impl PiecewiseCertificate {
    pub fn new(breakpoints: Vec<f64>) -> Result<Self, CertificateError> {
        for &b in &breakpoints {
            if !(b > 0.0 && b < 1.0) {
                return Err(CertificateError::OutOfCell(b));
            }
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CertificateError::NotIncreasing);
        }
        Ok(Self { breakpoints })
    }

    pub fn continuous() -> Self {
        Self::default()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }
}

/// Values for the free variables; unset entries are unbound.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Bindings {
    pub xi: Option<f64>,
    pub x: Option<f64>,
    pub t: Option<f64>,
    pub chi: Option<f64>,
}

impl Bindings {
    pub fn xt(x: f64, t: f64) -> Self {
        Self { x: Some(x), t: Some(t), ..Self::default() }
    }

    pub fn with_xi(mut self, xi: f64) -> Self {
        self.xi = Some(xi);
        self
    }

    pub fn with_chi(mut self, chi: f64) -> Self {
        self.chi = Some(chi);
        self
    }

    fn get(&self, v: Var) -> Option<f64> {
        match v {
            Var::Xi => self.xi,
            Var::X => self.x,
            Var::T => self.t,
            Var::Chi => self.chi,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    text: String,
    line: usize,
    col: usize,
}

impl Token {
    fn describe(&self) -> String {
        match &self.tok {
            Tok::Eof => "end of input".to_string(),
            Tok::Num(_) => format!("number '{}'", self.text),
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::Sym(c) => format!("'{c}'"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<Token>, DslError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let (l0, c0, start) = (line, col, i);
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut k = i + 1;
                if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    while k < chars.len() && chars[k].is_ascii_digit() {
                        k += 1;
                    }
                    i = k;
                } else {
                    let found = chars.get(k).map_or("end of input".to_string(), |c| format!("'{c}'"));
                    return Err(DslError::Syntax {
                        line,
                        col: col + (k - start),
                        found,
                        expected: vec!["exponent digits".to_string()],
                    });
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v: f64 = text.parse().expect("lexer accepted a valid float literal");
            col += i - start;
            out.push(Token { tok: Tok::Num(v), text, line: l0, col: c0 });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            col += i - start;
            out.push(Token { tok: Tok::Ident(text.clone()), text, line: l0, col: c0 });
            continue;
        }
        if "+-*/^(),".contains(c) {
            i += 1;
            col += 1;
            out.push(Token { tok: Tok::Sym(c), text: c.to_string(), line: l0, col: c0 });
            continue;
        }
        return Err(DslError::Syntax {
            line,
            col,
            found: format!("'{c}'"),
            expected: vec!["number".into(), "identifier".into(), "operator".into(), "'('".into(), "')'".into(), "','".into()],
        });
    }
    out.push(Token { tok: Tok::Eof, text: String::new(), line, col });
    Ok(out)
}

const OPERAND: [&str; 4] = ["number", "identifier", "'('", "'-'"];
const OPERATORS: [&str; 5] = ["'+'", "'-'", "'*'", "'/'", "'^'"];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_sym(&self, c: char) -> bool {
        self.peek().tok == Tok::Sym(c)
    }

    fn error(&self, expected: &[&str]) -> DslError {
        let t = self.peek();
        DslError::Syntax {
            line: t.line,
            col: t.col,
            found: t.describe(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn expect_after_operand(&mut self, closer: &str) -> DslError {
        let mut exp: Vec<&str> = OPERATORS.to_vec();
        exp.push(closer);
        self.error(&exp)
    }

    fn expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.is_sym('+') {
                BinOp::Add
            } else if self.is_sym('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.is_sym('*') {
                BinOp::Mul
            } else if self.is_sym('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, DslError> {
        if self.is_sym('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, DslError> {
        let base = self.atom()?;
        if self.is_sym('^') {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, DslError> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(*v))
            }
            Tok::Sym('(') => {
                self.bump();
                let e = self.expr()?;
                if !self.is_sym(')') {
                    return Err(self.expect_after_operand("')'"));
                }
                self.bump();
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                if let Some(v) = Var::from_name(name) {
                    return Ok(Expr::Var(v));
                }
                if name == "pi" {
                    return Ok(Expr::Num(std::f64::consts::PI));
                }
                let Some(f) = Func::from_name(name) else {
                    return Err(DslError::UnknownIdentifier { name: name.clone(), line: t.line, col: t.col });
                };
                if !self.is_sym('(') {
                    return Err(self.error(&["'('"]));
                }
                self.bump();
                let mut args = vec![self.expr()?];
                while args.len() < f.arity() {
                    if !self.is_sym(',') {
                        return Err(self.expect_after_operand("','"));
                    }
                    self.bump();
                    args.push(self.expr()?);
                }
                if !self.is_sym(')') {
                    return Err(self.expect_after_operand("')'"));
                }
                self.bump();
                Ok(Expr::Call(f, args))
            }
            _ => Err(self.error(&OPERAND)),
        }
    }
}

/// Parses source text into an expression tree.
pub fn parse(src: &str) -> Result<Expr, DslError> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let e = p.expr()?;
    if p.peek().tok != Tok::Eof {
        return Err(p.expect_after_operand("end of input"));
    }
    Ok(e)
}

fn finite(v: f64, what: &str) -> Result<f64, DslError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(DslError::NonfiniteResult(what.to_string()))
    }
}

impl Expr {
    pub fn num(v: f64) -> Self {
        Expr::Num(v)
    }

    pub fn var(v: Var) -> Self {
        Expr::Var(v)
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Self {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn call(f: Func, args: Vec<Expr>) -> Self {
        assert_eq!(args.len(), f.arity(), "wrong arity for {}", f.name());
        Expr::Call(f, args)
    }

    pub fn eval(&self, b: &Bindings) -> Result<f64, DslError> {
        match self {
            Expr::Num(v) => finite(*v, "literal"),
            Expr::Var(v) => b.get(*v).ok_or(DslError::UnboundVariable(*v)),
            Expr::Neg(a) => Ok(-a.eval(b)?),
            Expr::Bin(op, l, r) => {
                let (x, y) = (l.eval(b)?, r.eval(b)?);
                let v = match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => x / y,
                    BinOp::Pow => x.powf(y),
                };
                finite(v, op.symbol())
            }
            Expr::Call(f, args) => {
                let a = args[0].eval(b)?;
                let v = match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Ln => a.ln(),
                    Func::Abs => a.abs(),
                    Func::Frac => a - a.floor(),
                    Func::Step => {
                        if a >= 0.0 {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    Func::Min => a.min(args[1].eval(b)?),
                    Func::Max => a.max(args[1].eval(b)?),
                };
                finite(v, f.name())
            }
        }
    }

    /// Evaluates with `x` and `t` bound; convenience for data fields.
    pub fn eval_xt(&self, x: f64, t: f64) -> Result<f64, DslError> {
        self.eval(&Bindings::xt(x, t))
    }

    pub fn uses(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(a) => a.uses(var),
            Expr::Bin(_, l, r) => l.uses(var) || r.uses(var),
            Expr::Call(_, args) => args.iter().any(|a| a.uses(var)),
        }
    }

    /// Replaces every occurrence of `var` by `with`.
    pub fn substitute(&self, var: Var, with: &Expr) -> Expr {
        match self {
            Expr::Var(v) if *v == var => with.clone(),
            Expr::Num(_) | Expr::Var(_) => self.clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(var, with))),
            Expr::Bin(op, l, r) => Expr::bin(*op, l.substitute(var, with), r.substitute(var, with)),
            Expr::Call(f, args) => Expr::Call(*f, args.iter().map(|a| a.substitute(var, with)).collect()),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }

    fn prec(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Bin(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        let wrap = self.prec() < min_prec;
        if wrap {
            f.write_str("(")?;
        }
        match self {
            Expr::Num(v) => write!(f, "{v:?}")?,
            Expr::Var(v) => f.write_str(v.name())?,
            Expr::Neg(a) => {
                f.write_str("-")?;
                a.write_at(f, 3)?;
            }
            Expr::Bin(op, l, r) => {
                let (lp, rp) = match op {
                    BinOp::Add | BinOp::Sub => (1, 2),
                    BinOp::Mul | BinOp::Div => (2, 3),
                    BinOp::Pow => (5, 3),
                };
                l.write_at(f, lp)?;
                write!(f, " {} ", op.symbol())?;
                r.write_at(f, rp)?;
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        f.write_str(", ")?;
                    }
                    a.write_at(f, 0)?;
                }
                f.write_str(")")?;
            }
        }
        if wrap {
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Pretty-printing re-parses to the same tree for parser-produced input.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}

impl std::str::FromStr for Expr {
    type Err = DslError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, b: Bindings) -> Result<f64, DslError> {
        parse(src)?.eval(&b)
    }

    #[test]
    fn precedence_and_shape() {
        let e = parse("1 + 2*x").unwrap();
        assert_eq!(
            e,
            Expr::bin(BinOp::Add, Expr::Num(1.0), Expr::bin(BinOp::Mul, Expr::Num(2.0), Expr::Var(Var::X)))
        );
        assert_eq!(e.eval(&Bindings::xt(0.5, 0.0)).unwrap(), 2.0);
        assert_eq!(ev("-2^2", Bindings::default()).unwrap(), -4.0);
        assert_eq!(ev("2^3^2", Bindings::default()).unwrap(), 512.0);
        assert_eq!(ev("2^-1", Bindings::default()).unwrap(), 0.5);
        assert_eq!(ev("8/4/2", Bindings::default()).unwrap(), 1.0);
        assert_eq!(ev("1 - 2 - 3", Bindings::default()).unwrap(), -4.0);
    }

    #[test]
    fn variables_and_functions() {
        assert!(parse("sin(2*3.141592653589793*xi)").unwrap().uses(Var::Xi));
        let b = Bindings::default().with_xi(0.6);
        assert_eq!(ev("step(xi - 0.5)", b).unwrap(), 1.0);
        assert_eq!(ev("step(xi - 0.6)", b).unwrap(), 1.0);
        assert_eq!(ev("step(xi - 0.7)", b).unwrap(), 0.0);
        assert_eq!(ev("exp(0)", b).unwrap(), 1.0);
        assert_eq!(ev("frac(3.25)", b).unwrap(), 0.25);
        assert_eq!(ev("frac(-0.25)", b).unwrap(), 0.75);
        assert_eq!(ev("min(1, max(2, 3))", b).unwrap(), 1.0);
        assert_eq!(ev("abs(-3) + chi", b.with_chi(1.0)).unwrap(), 4.0);
    }

    #[test]
    fn errors() {
        match parse("x + * 2") {
            Err(DslError::Syntax { line: 1, col: 5, found, .. }) => assert_eq!(found, "'*'"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("y + 1"), Err(DslError::UnknownIdentifier { .. })));
        assert_eq!(ev("ln(0 - 1)", Bindings::default()), Err(DslError::NonfiniteResult("ln".into())));
        assert_eq!(ev("1/0", Bindings::default()), Err(DslError::NonfiniteResult("/".into())));
        assert_eq!(ev("x", Bindings::default()), Err(DslError::UnboundVariable(Var::X)));
    }

    #[test]
    fn pretty_round_trip() {
        for src in ["-x^2", "(-x)^2", "2^-x", "a", "1 - (2 - 3)", "(1 + 2)*3", "x/(t*chi)", "--x", "min(x, -t) ^ 2 ^ 3"] {
            let Ok(e) = parse(src) else { continue };
            let printed = e.to_string();
            assert_eq!(parse(&printed).unwrap(), e, "{src} -> {printed}");
        }
    }

    #[test]
    fn certificate() {
        assert!(PiecewiseCertificate::new(vec![0.25, 0.5]).is_ok());
        assert_eq!(PiecewiseCertificate::new(vec![0.5, 0.5]), Err(CertificateError::NotIncreasing));
        assert_eq!(PiecewiseCertificate::new(vec![1.0]), Err(CertificateError::OutOfCell(1.0)));
    }

    #[test]
    fn substitution() {
        let e = parse("sin(xi) + x").unwrap();
        let s = e.substitute(Var::Xi, &parse("frac(x/0.25)").unwrap());
        assert!(!s.uses(Var::Xi));
        assert_eq!(s.eval(&Bindings::xt(0.125, 0.0)).unwrap(), 0.5f64.sin() + 0.125);
    }
}
