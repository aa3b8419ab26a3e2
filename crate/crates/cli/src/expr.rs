//! Infix expressions over named state variables.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | name | name '(' expr ')' | '(' expr ')'
//! ```
//!
//! Functions: `sin`, `cos`, `sqrt`. Constants: `pi`. `^` is right associative.

use std::fmt;

use geopid::scalar::{lit, Scalar};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("syntax error at column {column}: {message}")]
    Syntax { column: usize, message: String },
    #[error("unknown function '{name}' at column {column}")]
    UnknownFunction { name: String, column: usize },
    #[error("unknown variable '{name}' at column {column}")]
    UnknownVariable { name: String, column: usize },
}

impl ExprError {
    pub fn column(&self) -> usize {
        match self {
            ExprError::Syntax { column, .. }
            | ExprError::UnknownFunction { column, .. }
            | ExprError::UnknownVariable { column, .. } => *column,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    fn lookup(name: &str) -> Option<Self> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
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

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression together with its source text.
#[derive(Clone)]
pub struct Expr {
    source: String,
    root: Node,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Expr {
    /// Parses `source`; `vars` are the names a variable reference may use,
    /// resolved to their index.
    pub fn parse(source: &str, vars: &[String]) -> Result<Self, ExprError> {
        let tokens = lex(source)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            vars,
        };
        let root = p.expr()?;
        if let Some(t) = p.peek() {
            return Err(ExprError::Syntax {
                column: t.column,
                message: format!("unexpected {}", t.kind.describe()),
            });
        }
        Ok(Self {
            source: source.trim().to_string(),
            root,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// True when no variable occurs.
    pub fn is_constant(&self) -> bool {
        fn walk(n: &Node) -> bool {
            match n {
                Node::Num(_) => true,
                Node::Var(_) => false,
                Node::Neg(a) | Node::Call(_, a) => walk(a),
                Node::Bin(_, a, b) => walk(a) && walk(b),
            }
        }
        walk(&self.root)
    }

    pub fn eval<T: Scalar>(&self, vars: &[T]) -> T {
        fn go<T: Scalar>(n: &Node, v: &[T]) -> T {
            match n {
                Node::Num(x) => lit(*x),
                Node::Var(i) => v[*i],
                Node::Neg(a) => -go(a, v),
                Node::Bin(op, a, b) => {
                    let (a, b) = (go(a, v), go(b, v));
                    match op {
                        BinOp::Add => a + b,
                        BinOp::Sub => a - b,
                        BinOp::Mul => a * b,
                        BinOp::Div => a / b,
                        BinOp::Pow => a.powf(b),
                    }
                }
                Node::Call(f, a) => {
                    let a = go(a, v);
                    match f {
                        Func::Sin => a.sin(),
                        Func::Cos => a.cos(),
                        Func::Sqrt => a.sqrt(),
                    }
                }
            }
        }
        go(&self.root, vars)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            TokenKind::Num(x) => format!("number {x}"),
            TokenKind::Ident(s) => format!("'{s}'"),
            TokenKind::Op(c) => format!("'{c}'"),
            TokenKind::LParen => "'('".into(),
            TokenKind::RParen => "')'".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    /// 1-based character column.
    column: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value = text.parse::<f64>().map_err(|_| ExprError::Syntax {
                column,
                message: format!("malformed number '{text}'"),
            })?;
            out.push(Token {
                kind: TokenKind::Num(value),
                column,
            });
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                kind: TokenKind::Ident(chars[start..i].iter().collect()),
                column,
            });
        } else {
            let kind = match c {
                '+' | '-' | '*' | '/' | '^' => TokenKind::Op(c),
                '(' => TokenKind::LParen,
                ')' => TokenKind::RParen,
                _ => {
                    return Err(ExprError::Syntax {
                        column,
                        message: format!("unexpected character '{c}'"),
                    })
                }
            };
            out.push(Token { kind, column });
            i += 1;
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    vars: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn end_column(&self) -> usize {
        self.tokens.last().map_or(1, |t| t.column + 1)
    }

    fn eat_op(&mut self, ops: &[char]) -> Option<char> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Op(c),
                ..
            }) if ops.contains(c) => {
                let c = *c;
                self.pos += 1;
                Some(c)
            }
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        while let Some(c) = self.eat_op(&['+', '-']) {
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(c) = self.eat_op(&['*', '/']) {
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat_op(&['-']).is_some() {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if self.eat_op(&['^']).is_some() {
            let exp = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn expect_rparen(&mut self, open_column: usize) -> Result<(), ExprError> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::RParen,
                ..
            }) => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(ExprError::Syntax {
                column: t.column,
                message: format!(
                    "expected ')' to close '(' at column {open_column}, found {}",
                    t.kind.describe()
                ),
            }),
            None => Err(ExprError::Syntax {
                column: self.end_column(),
                message: format!("unclosed '(' at column {open_column}"),
            }),
        }
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(ExprError::Syntax {
                column: self.end_column(),
                message: "unexpected end of expression".into(),
            });
        };
        self.pos += 1;
        match tok.kind {
            TokenKind::Num(x) => Ok(Node::Num(x)),
            TokenKind::LParen => {
                let inner = self.expr()?;
                self.expect_rparen(tok.column)?;
                Ok(inner)
            }
            TokenKind::Ident(name) => {
                if matches!(
                    self.peek(),
                    Some(Token {
                        kind: TokenKind::LParen,
                        ..
                    })
                ) {
                    let open = self.peek().map_or(tok.column, |t| t.column);
                    let func = Func::lookup(&name).ok_or(ExprError::UnknownFunction {
                        name: name.clone(),
                        column: tok.column,
                    })?;
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect_rparen(open)?;
                    return Ok(Node::Call(func, Box::new(arg)));
                }
                if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    return Ok(Node::Var(i));
                }
                if name == "pi" {
                    return Ok(Node::Num(std::f64::consts::PI));
                }
                Err(ExprError::UnknownVariable {
                    name,
                    column: tok.column,
                })
            }
            other => Err(ExprError::Syntax {
                column: tok.column,
                message: format!("unexpected {}", other.describe()),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars() -> Vec<String> {
        vec!["x".into(), "theta".into()]
    }

    fn eval(src: &str, x: f64, th: f64) -> f64 {
        Expr::parse(src, &vars()).unwrap().eval(&[x, th])
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("1 + 2 * 3", 0.0, 0.0), 7.0);
        assert_eq!(eval("(1 + 2) * 3", 0.0, 0.0), 9.0);
        assert_eq!(eval("2 ^ 3 ^ 2", 0.0, 0.0), 512.0);
        assert_eq!(eval("-2 ^ 2", 0.0, 0.0), -4.0);
        assert_eq!(eval("2 ^ -1", 0.0, 0.0), 0.5);
        assert_eq!(eval("8 / 4 / 2", 0.0, 0.0), 1.0);
        assert_eq!(eval("1 - 2 - 3", 0.0, 0.0), -4.0);
        assert_eq!(eval("1.5e1 + 2E-1", 0.0, 0.0), 15.2);
    }

    #[test]
    fn functions_and_variables() {
        let th = 0.3f64;
        assert!((eval("0.5*x^2 + 1 - cos(theta)", 2.0, th) - (2.0 + 1.0 - th.cos())).abs() < 1e-15);
        assert!((eval("sqrt(x) * sin(pi / 2)", 9.0, 0.0) - 3.0).abs() < 1e-15);
        assert!(
            Expr::parse("sin(theta)", &vars())
                .unwrap()
                .eval(&[0.0f32, 0.5f32])
                > 0.47
        );
    }

    #[test]
    fn errors_carry_positions() {
        let e = Expr::parse("sin(", &vars()).unwrap_err();
        assert!(matches!(e, ExprError::Syntax { column: 5, .. }), "{e:?}");
        let e = Expr::parse("1 + tan(x)", &vars()).unwrap_err();
        assert_eq!(
            e,
            ExprError::UnknownFunction {
                name: "tan".into(),
                column: 5
            }
        );
        let e = Expr::parse("x + y", &vars()).unwrap_err();
        assert_eq!(
            e,
            ExprError::UnknownVariable {
                name: "y".into(),
                column: 5
            }
        );
        let e = Expr::parse("x $ 2", &vars()).unwrap_err();
        assert_eq!(e.column(), 3);
        assert!(matches!(
            Expr::parse("(x", &vars()),
            Err(ExprError::Syntax { .. })
        ));
        assert!(matches!(
            Expr::parse("x 2", &vars()),
            Err(ExprError::Syntax { column: 3, .. })
        ));
        assert!(matches!(
            Expr::parse("", &vars()),
            Err(ExprError::Syntax { .. })
        ));
        assert!(matches!(
            Expr::parse("1..2", &vars()),
            Err(ExprError::Syntax { column: 1, .. })
        ));
    }

    #[test]
    fn constants_detected() {
        assert!(Expr::parse("2 * pi", &vars()).unwrap().is_constant());
        assert!(!Expr::parse("x", &vars()).unwrap().is_constant());
    }
}
