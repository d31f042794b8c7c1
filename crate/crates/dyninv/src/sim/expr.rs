//! Tiny arithmetic-expression evaluator for custom plant maps.
//!
//! Variables: `u` (the input) and `x1`..`xN` (state components). Operators:
//! `+ - * / ^` with the usual precedence, unary minus, parentheses, and the
//! functions `tanh sin cos exp abs sqrt atan`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Tanh,
    Sin,
    Cos,
    Exp,
    Abs,
    Sqrt,
    Atan,
}

impl Func {
    fn eval(self, v: f64) -> f64 {
        match self {
            Func::Tanh => v.tanh(),
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Abs => v.abs(),
            Func::Sqrt => v.sqrt(),
            Func::Atan => v.atan(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Zero-based state component.
    State(usize),
    Input,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr> {
        let tokens = tokenize(text)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            src: text,
        };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Expr(format!(
                "unexpected trailing input at token {} in '{text}'",
                p.pos
            )));
        }
        Ok(e)
    }

    pub fn eval(&self, x: &[f64], u: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::State(i) => x.get(*i).copied().unwrap_or(f64::NAN),
            Expr::Input => u,
            Expr::Neg(e) => -e.eval(x, u),
            Expr::Add(a, b) => a.eval(x, u) + b.eval(x, u),
            Expr::Sub(a, b) => a.eval(x, u) - b.eval(x, u),
            Expr::Mul(a, b) => a.eval(x, u) * b.eval(x, u),
            Expr::Div(a, b) => a.eval(x, u) / b.eval(x, u),
            Expr::Pow(a, b) => a.eval(x, u).powf(b.eval(x, u)),
            Expr::Call(f, e) => f.eval(e.eval(x, u)),
        }
    }

    /// Largest zero-based state index referenced, if any.
    pub fn max_state_index(&self) -> Option<usize> {
        match self {
            Expr::Const(_) | Expr::Input => None,
            Expr::State(i) => Some(*i),
            Expr::Neg(e) | Expr::Call(_, e) => e.max_state_index(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => match (a.max_state_index(), b.max_state_index()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
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

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let bytes: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                out.push(Token::Plus);
                i += 1;
            }
            '-' => {
                out.push(Token::Minus);
                i += 1;
            }
            '*' => {
                out.push(Token::Star);
                i += 1;
            }
            '/' => {
                out.push(Token::Slash);
                i += 1;
            }
            '^' => {
                out.push(Token::Caret);
                i += 1;
            }
            '(' => {
                out.push(Token::LParen);
                i += 1;
            }
            ')' => {
                out.push(Token::RParen);
                i += 1;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_digit()
                        || bytes[i] == '.'
                        || bytes[i] == 'e'
                        || bytes[i] == 'E'
                        || ((bytes[i] == '+' || bytes[i] == '-')
                            && i > start
                            && (bytes[i - 1] == 'e' || bytes[i - 1] == 'E')))
                {
                    i += 1;
                }
                let s: String = bytes[start..i].iter().collect();
                let v = s
                    .parse::<f64>()
                    .map_err(|_| Error::Expr(format!("invalid number '{s}'")))?;
                out.push(Token::Num(v));
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                    i += 1;
                }
                out.push(Token::Ident(bytes[start..i].iter().collect()));
            }
            other => return Err(Error::Expr(format!("unexpected character '{other}'"))),
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(tok) = self.peek() {
            match tok {
                Token::Plus => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Token::Minus => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(tok) = self.peek() {
            match tok {
                Token::Star => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Token::Slash => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if matches!(self.peek(), Some(Token::Minus)) {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Token::Caret)) {
            self.pos += 1;
            let exp = self.unary()?; // right associative
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.bump() {
            Some(Token::Num(v)) => Ok(Expr::Const(v)),
            Some(Token::LParen) => {
                let e = self.expr()?;
                match self.bump() {
                    Some(Token::RParen) => Ok(e),
                    _ => Err(Error::Expr(format!("missing ')' in '{}'", self.src))),
                }
            }
            Some(Token::Ident(name)) => {
                if matches!(self.peek(), Some(Token::LParen)) {
                    self.pos += 1;
                    let arg = self.expr()?;
                    if !matches!(self.bump(), Some(Token::RParen)) {
                        return Err(Error::Expr(format!("missing ')' after {name}(...)")));
                    }
                    let f = match name.as_str() {
                        "tanh" => Func::Tanh,
                        "sin" => Func::Sin,
                        "cos" => Func::Cos,
                        "exp" => Func::Exp,
                        "abs" => Func::Abs,
                        "sqrt" => Func::Sqrt,
                        "atan" => Func::Atan,
                        other => return Err(Error::Expr(format!("unknown function '{other}'"))),
                    };
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                if name == "u" {
                    return Ok(Expr::Input);
                }
                if let Some(idx) = name.strip_prefix('x').and_then(|s| s.parse::<usize>().ok()) {
                    if idx == 0 {
                        return Err(Error::Expr("state components start at x1".into()));
                    }
                    return Ok(Expr::State(idx - 1));
                }
                Err(Error::Expr(format!("unknown identifier '{name}'")))
            }
            other => Err(Error::Expr(format!(
                "unexpected token {other:?} in '{}'",
                self.src
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_and_precedence() {
        let e = Expr::parse("1 + 2 * 3 - 4 / 2").unwrap();
        assert_eq!(e.eval(&[], 0.0), 5.0);
        let e = Expr::parse("(1 + 2) * 3").unwrap();
        assert_eq!(e.eval(&[], 0.0), 9.0);
        let e = Expr::parse("2 ^ 3 ^ 2").unwrap(); // right associative
        assert_eq!(e.eval(&[], 0.0), 512.0);
        let e = Expr::parse("-x1 ^ 2").unwrap(); // -(x1^2)
        assert_eq!(e.eval(&[3.0], 0.0), -9.0);
    }

    #[test]
    fn variables_and_functions() {
        let e = Expr::parse("0.5*x1 + tanh(u) - 0.1*x2").unwrap();
        let v = e.eval(&[2.0, 1.0], 0.3);
        assert!((v - (1.0 + 0.3_f64.tanh() - 0.1)).abs() < 1e-15);
        assert_eq!(e.max_state_index(), Some(1));
    }

    #[test]
    fn scientific_notation() {
        let e = Expr::parse("1.5e-2 * u").unwrap();
        assert!((e.eval(&[], 2.0) - 0.03).abs() < 1e-15);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Expr::parse("x0").is_err());
        assert!(Expr::parse("foo(1)").is_err());
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("(1").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("y + 1").is_err());
    }
}
