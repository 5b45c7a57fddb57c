//! Arithmetic expressions over `x`, `y`, `t` used for initial and boundary data.
//!
//! Grammar (usual precedence, `^` right-associative and binding tighter than
//! unary minus):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | 'x' | 'y' | 't' | 'pi' | func '(' expr ')' | '(' expr ')'
//! func  := sin | cos | exp | tanh
//! ```

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("expression error at byte {pos}: {msg}")]
pub struct ExprError {
    pub pos: usize,
    pub msg: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Tanh,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Tanh => "tanh",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Tanh => v.tanh(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ExprError> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0, len: src.len() };
        let e = p.expr()?;
        if let Some((tok, at)) = p.tokens.get(p.pos) {
            return Err(ExprError { pos: *at, msg: format!("unexpected token {tok:?}") });
        }
        Ok(e)
    }

    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::X) => x,
            Expr::Var(Var::Y) => y,
            Expr::Var(Var::T) => t,
            Expr::Neg(a) => -a.eval(x, y, t),
            Expr::Add(a, b) => a.eval(x, y, t) + b.eval(x, y, t),
            Expr::Sub(a, b) => a.eval(x, y, t) - b.eval(x, y, t),
            Expr::Mul(a, b) => a.eval(x, y, t) * b.eval(x, y, t),
            Expr::Div(a, b) => a.eval(x, y, t) / b.eval(x, y, t),
            Expr::Pow(a, b) => {
                let base = a.eval(x, y, t);
                match **b {
                    Expr::Num(e) if e.fract() == 0.0 && e.abs() <= 64.0 => base.powi(e as i32),
                    _ => base.powf(b.eval(x, y, t)),
                }
            }
            Expr::Call(f, a) => f.apply(a.eval(x, y, t)),
        }
    }

    pub fn depends_on(&self, v: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(w) => *w == v,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(v),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.depends_on(v) || b.depends_on(v)
            }
        }
    }

    /// Constant value if the expression has no free variables.
    pub fn as_constant(&self) -> Option<f64> {
        if self.depends_on(Var::X) || self.depends_on(Var::Y) || self.depends_on(Var::T) {
            None
        } else {
            Some(self.eval(0.0, 0.0, 0.0))
        }
    }

    /// Symbolic partial derivative.
    pub fn diff(&self, v: Var) -> Expr {
        use Expr::*;
        if !self.depends_on(v) {
            return Num(0.0);
        }
        match self {
            Num(_) => Num(0.0),
            Var(w) => Num(if *w == v { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.diff(v)),
            Add(a, b) => add(a.diff(v), b.diff(v)),
            Sub(a, b) => sub(a.diff(v), b.diff(v)),
            Mul(a, b) => add(mul(a.diff(v), (**b).clone()), mul((**a).clone(), b.diff(v))),
            Div(a, b) => div(
                sub(mul(a.diff(v), (**b).clone()), mul((**a).clone(), b.diff(v))),
                mul((**b).clone(), (**b).clone()),
            ),
            Pow(a, b) => {
                if !b.depends_on(v) {
                    // d(a^c) = c a^(c-1) a'
                    let c = (**b).clone();
                    let cm1 = match c {
                        Num(k) => Num(k - 1.0),
                        _ => sub(c.clone(), Num(1.0)),
                    };
                    mul(mul(c, pow((**a).clone(), cm1)), a.diff(v))
                } else {
                    // The grammar has no `ln`, so a variable exponent is only
                    // differentiable for exp(u)^b = exp(u b).
                    let ln_a = match &**a {
                        Call(Func::Exp, u) => (**u).clone(),
                        _ => return Num(f64::NAN),
                    };
                    mul(self.clone(), add(mul(b.diff(v), ln_a.clone()), mul((**b).clone(), ln_a.diff(v))))
                }
            }
            Call(f, a) => {
                let inner = a.diff(v);
                let outer = match f {
                    Func::Sin => Call(Func::Cos, a.clone()),
                    Func::Cos => neg(Call(Func::Sin, a.clone())),
                    Func::Exp => Call(Func::Exp, a.clone()),
                    Func::Tanh => {
                        let th = Call(Func::Tanh, a.clone());
                        sub(Num(1.0), mul(th.clone(), th))
                    }
                };
                mul(outer, inner)
            }
        }
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(v) => Expr::Num(-v),
        other => Expr::Neg(Box::new(other)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x + y),
        (Expr::Num(z), e) | (e, Expr::Num(z)) if z == 0.0 => e,
        (a, b) => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x - y),
        (e, Expr::Num(z)) if z == 0.0 => e,
        (Expr::Num(z), e) if z == 0.0 => neg(e),
        (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x * y),
        (Expr::Num(z), _) | (_, Expr::Num(z)) if z == 0.0 => Expr::Num(0.0),
        (Expr::Num(o), e) | (e, Expr::Num(o)) if o == 1.0 => e,
        (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(z), _) if z == 0.0 => Expr::Num(0.0),
        (e, Expr::Num(o)) if o == 1.0 => e,
        (a, b) => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    match b {
        Expr::Num(o) if o == 1.0 => a,
        Expr::Num(z) if z == 0.0 => Expr::Num(1.0),
        b => Expr::Pow(Box::new(a), Box::new(b)),
    }
}

impl FromStr for Expr {
    type Err = ExprError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expr::parse(s)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if *v < 0.0 {
                    write!(f, "({v:?})")
                } else {
                    write!(f, "{v:?}")
                }
            }
            Expr::Var(Var::X) => f.write_str("x"),
            Expr::Var(Var::Y) => f.write_str("y"),
            Expr::Var(Var::T) => f.write_str("t"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
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
            _ if c.is_ascii_digit() || c == '.' => {
                while i < bytes.len() && ((bytes[i] as char).is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let v = text
                    .parse::<f64>()
                    .map_err(|_| ExprError { pos: start, msg: format!("bad number '{text}'") })?;
                out.push((Tok::Num(v), start));
                continue;
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
                continue;
            }
            _ => return Err(ExprError { pos: i, msg: format!("unexpected character '{c}'") }),
        };
        out.push((tok, start));
        i += 1;
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.tokens.get(self.pos).map(|(_, p)| *p).unwrap_or(self.len)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), ExprError> {
        let at = self.here();
        match self.bump() {
            Some(t) if t == want => Ok(()),
            Some(t) => Err(ExprError { pos: at, msg: format!("expected {want:?}, found {t:?}") }),
            None => Err(ExprError { pos: at, msg: format!("expected {want:?}, found end of input") }),
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(Tok::Slash) => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if let Some(Tok::Minus) = self.peek() {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if let Some(Tok::Plus) = self.peek() {
            self.bump();
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if let Some(Tok::Caret) = self.peek() {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let at = self.here();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Expr::Num(v)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                let func = match name.as_str() {
                    "x" => return Ok(Expr::Var(Var::X)),
                    "y" => return Ok(Expr::Var(Var::Y)),
                    "t" => return Ok(Expr::Var(Var::T)),
                    "pi" => return Ok(Expr::Num(std::f64::consts::PI)),
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    "tanh" => Func::Tanh,
                    other => return Err(ExprError { pos: at, msg: format!("unknown identifier '{other}'") }),
                };
                self.expect(Tok::LParen)?;
                let arg = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(Expr::Call(func, Box::new(arg)))
            }
            Some(t) => Err(ExprError { pos: at, msg: format!("unexpected token {t:?}") }),
            None => Err(ExprError { pos: at, msg: "unexpected end of input".into() }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ev(s: &str, x: f64, y: f64, t: f64) -> f64 {
        Expr::parse(s).unwrap().eval(x, y, t)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", 0.0, 0.0, 0.0), 7.0);
        assert_eq!(ev("(1 + 2) * 3", 0.0, 0.0, 0.0), 9.0);
        assert_eq!(ev("2 ^ 3 ^ 2", 0.0, 0.0, 0.0), 512.0);
        assert_eq!(ev("-2 ^ 2", 0.0, 0.0, 0.0), -4.0);
        assert_eq!(ev("8 / 4 / 2", 0.0, 0.0, 0.0), 1.0);
        assert_eq!(ev("1 - 2 - 3", 0.0, 0.0, 0.0), -4.0);
        assert_eq!(ev("2e-3 * 1E3", 0.0, 0.0, 0.0), 2.0);
    }

    #[test]
    fn variables_and_functions() {
        let v = ev("sin(pi*x) * exp(-t) + y", 0.5, 2.0, 0.0);
        assert!((v - 3.0).abs() < 1e-15);
        assert!((ev("tanh(x)", 0.3, 0.0, 0.0) - 0.3f64.tanh()).abs() < 1e-15);
        assert!((ev("cos(2*pi*t)", 0.0, 0.0, 0.25)).abs() < 1e-15);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("sqrt(x)").is_err());
        assert!(Expr::parse("x $ 2").is_err());
        assert!(Expr::parse("(x").is_err());
        assert!(Expr::parse("x y").is_err());
        let e = Expr::parse("foo").unwrap_err();
        assert_eq!(e.pos, 0);
    }

    #[test]
    fn symbolic_time_derivative_matches_finite_difference() {
        let srcs = [
            "1 + 0.1*sin(2*pi*t)",
            "x^2 * exp(-3*t) + tanh(t*x)",
            "cos(t)^3 / (2 + t)",
            "exp(x)^t",
        ];
        for s in srcs {
            let e = Expr::parse(s).unwrap();
            let d = e.diff(Var::T);
            for &(x, t) in &[(0.3, 0.2), (0.9, 1.1)] {
                let dt = 1e-6;
                let fd = (e.eval(x, 0.0, t + dt) - e.eval(x, 0.0, t - dt)) / (2.0 * dt);
                let an = d.eval(x, 0.0, t);
                assert!((fd - an).abs() < 1e-7 * (1.0 + an.abs()), "{s}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn constants_are_detected() {
        assert_eq!(Expr::parse("2*pi - pi").unwrap().as_constant(), Some(PI));
        assert_eq!(Expr::parse("x").unwrap().as_constant(), None);
        assert_eq!(Expr::parse("1 + t").unwrap().diff(Var::X), Expr::Num(0.0));
    }

    #[test]
    fn display_round_trips() {
        for s in ["-1 + 1.8*sin(pi*x)^8", "exp(-t)*(x - 0.5)/3", "-(x^-2)"] {
            let e = Expr::parse(s).unwrap();
            let back = Expr::parse(&e.to_string()).unwrap();
            for &x in &[0.1, 0.4, 0.77] {
                assert_eq!(e.eval(x, 0.2, 0.3).to_bits(), back.eval(x, 0.2, 0.3).to_bits());
            }
        }
    }
}
