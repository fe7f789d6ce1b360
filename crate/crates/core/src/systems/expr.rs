//! A small arithmetic-expression language for user-supplied maps.
//!
//! Grammar (usual precedence, `^` right-associative and binding tighter than
//! unary minus, so `-x^2 = -(x^2)`):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | ident | 'exp' '(' expr ')' | '(' expr ')'
//! ```
//!
//! Identifiers: `x`, `y`, `z` (components 0, 1, 2), `x0`, `x1`, … and the
//! constants `e` and `pi`.

use std::fmt;

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("column {column}: {message}")]
pub struct ParseError {
    /// 1-based column within the expression string.
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    PowInt(Box<Expr>, i32),
    Pow(Box<Expr>, Box<Expr>),
    Exp(Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ParseError> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        match p.peek() {
            None => Ok(e),
            Some(t) => Err(ParseError {
                column: t.column,
                message: format!("unexpected {}", t.kind),
            }),
        }
    }

    /// Highest variable index referenced, if any.
    pub fn max_variable(&self) -> Option<usize> {
        match self {
            Expr::Num(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Exp(a) | Expr::PowInt(a, _) => a.max_variable(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.max_variable().max(b.max_variable()),
        }
    }

    /// Evaluates with `vars[i]` bound to variable `i`.
    ///
    /// Panics if the expression references a variable beyond `vars`; systems
    /// check this at construction.
    pub fn eval<S: Scalar>(&self, vars: &[S]) -> S {
        match self {
            Expr::Num(c) => vars[0].lift(*c),
            Expr::Var(i) => vars[*i].clone(),
            Expr::Neg(a) => -a.eval(vars),
            Expr::Add(a, b) => a.eval(vars) + b.eval(vars),
            Expr::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Expr::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Expr::Div(a, b) => a.eval(vars) / b.eval(vars),
            Expr::PowInt(a, n) => a.eval(vars).powi(*n),
            Expr::Pow(a, b) => {
                let base = a.eval(vars);
                let e = b.eval(vars).value();
                base.powf(e)
            }
            Expr::Exp(a) => a.eval(vars).exp(),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(c) => write!(f, "{c}"),
            Expr::Var(i) => write!(f, "x{i}"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::PowInt(a, n) => write!(f, "({a} ^ {n})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
        }
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

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Num(c) => write!(f, "number {c}"),
            TokenKind::Ident(s) => write!(f, "identifier '{s}'"),
            TokenKind::Op(c) => write!(f, "'{c}'"),
            TokenKind::LParen => write!(f, "'('"),
            TokenKind::RParen => write!(f, "')'"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    column: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
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
            // exponent part: 1e-3, 2.5E+4
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
            let value = text.parse::<f64>().map_err(|_| ParseError {
                column,
                message: format!("malformed number '{text}'"),
            })?;
            out.push(Token {
                kind: TokenKind::Num(value),
                column,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
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
                    return Err(ParseError {
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

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
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

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(op) = self.eat_op(&['+', '-']) {
            let rhs = self.term()?;
            lhs = match op {
                '+' => Expr::Add(Box::new(lhs), Box::new(rhs)),
                _ => Expr::Sub(Box::new(lhs), Box::new(rhs)),
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.eat_op(&['*', '/']) {
            let rhs = self.unary()?;
            lhs = match op {
                '*' => Expr::Mul(Box::new(lhs), Box::new(rhs)),
                _ => Expr::Div(Box::new(lhs), Box::new(rhs)),
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat_op(&['-']).is_some() {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat_op(&['+']).is_some() {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.eat_op(&['^']).is_none() {
            return Ok(base);
        }
        let exponent = self.unary()?;
        let int_exponent = match &exponent {
            Expr::Num(c) => Some(*c),
            Expr::Neg(inner) => match inner.as_ref() {
                Expr::Num(c) => Some(-*c),
                _ => None,
            },
            _ => None,
        }
        .filter(|c| c.fract() == 0.0 && c.abs() <= 1024.0);
        Ok(match int_exponent {
            Some(n) => Expr::PowInt(Box::new(base), n as i32),
            None => Expr::Pow(Box::new(base), Box::new(exponent)),
        })
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(ParseError {
                column: self.end_column(),
                message: "unexpected end of expression".into(),
            });
        };
        self.pos += 1;
        match tok.kind {
            TokenKind::Num(c) => Ok(Expr::Num(c)),
            TokenKind::LParen => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            TokenKind::Ident(name) => match name.as_str() {
                "exp" => {
                    match self.peek() {
                        Some(Token {
                            kind: TokenKind::LParen,
                            ..
                        }) => self.pos += 1,
                        _ => {
                            return Err(ParseError {
                                column: tok.column,
                                message: "expected '(' after exp".into(),
                            })
                        }
                    }
                    let e = self.expr()?;
                    self.expect_rparen()?;
                    Ok(Expr::Exp(Box::new(e)))
                }
                "e" => Ok(Expr::Num(std::f64::consts::E)),
                "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                "x" => Ok(Expr::Var(0)),
                "y" => Ok(Expr::Var(1)),
                "z" => Ok(Expr::Var(2)),
                other => match other
                    .strip_prefix('x')
                    .and_then(|d| d.parse::<usize>().ok())
                {
                    Some(i) => Ok(Expr::Var(i)),
                    None => Err(ParseError {
                        column: tok.column,
                        message: format!("unknown identifier '{other}'"),
                    }),
                },
            },
            other => Err(ParseError {
                column: tok.column,
                message: format!("unexpected {other}"),
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::RParen,
                ..
            }) => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(ParseError {
                column: t.column,
                message: format!("expected ')', found {}", t.kind),
            }),
            None => Err(ParseError {
                column: self.end_column(),
                message: "missing ')'".into(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, vars: &[f64]) -> f64 {
        Expr::parse(src).unwrap().eval(vars)
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("1 + 2 * 3", &[0.0]), 7.0);
        assert_eq!(ev("-x^2", &[3.0]), -9.0);
        assert_eq!(ev("2^3^2", &[0.0]), 512.0);
        assert_eq!(ev("(1 + 2) * 3", &[0.0]), 9.0);
        assert_eq!(ev("x / 2 / 2", &[8.0]), 2.0);
        assert_eq!(ev("x^-1", &[4.0]), 0.25);
    }

    #[test]
    fn variables_and_constants() {
        assert_eq!(ev("x + 10*y + 100*z", &[1.0, 2.0, 3.0]), 321.0);
        assert_eq!(ev("x0 - x1", &[5.0, 2.0]), 3.0);
        assert!((ev("exp(1) - e", &[0.0])).abs() < 1e-15);
        assert!((ev("pi", &[0.0]) - std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(ev("1.5e1", &[0.0]), 15.0);
    }

    #[test]
    fn integer_powers_are_specialised() {
        assert!(matches!(Expr::parse("x^2").unwrap(), Expr::PowInt(_, 2)));
        assert!(matches!(Expr::parse("x^0.5").unwrap(), Expr::Pow(_, _)));
        assert_eq!(ev("x^3", &[-2.0]), -8.0);
    }

    #[test]
    fn errors_carry_columns() {
        let e = Expr::parse("x + * 2").unwrap_err();
        assert_eq!(e.column, 5);
        let e = Expr::parse("(x + 1").unwrap_err();
        assert!(e.message.contains("')'"));
        let e = Expr::parse("foo(x)").unwrap_err();
        assert_eq!(e.column, 1);
        let e = Expr::parse("x # 1").unwrap_err();
        assert_eq!(e.column, 3);
    }

    #[test]
    fn max_variable() {
        assert_eq!(Expr::parse("3").unwrap().max_variable(), None);
        assert_eq!(Expr::parse("x*y + x4").unwrap().max_variable(), Some(4));
    }
}
