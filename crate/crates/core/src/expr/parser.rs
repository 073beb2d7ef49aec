//! Pratt parser for loss expressions.
//!
//! Precedence, loosest to tightest: `+ -`, `* /`, unary `-`, `^`.
//! Binary operators are left-associative except `^`, which is
//! right-associative. Calls: `log exp tanh abs sqrt` take one argument,
//! `max min` take two. Variables are `x1`, `x2`, ….

use super::ast::{BinaryOp, Expr, UnaryOp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    offset: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let lit = &text[start..i];
                let v: f64 = lit.parse().map_err(|_| Error::Syntax {
                    offset: start,
                    message: format!("malformed number `{lit}`"),
                })?;
                out.push(Token {
                    tok: Tok::Num(v),
                    offset: start,
                });
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(text[start..i].to_string()),
                    offset: start,
                });
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                out.push(Token {
                    tok: Tok::Op(b as char),
                    offset: i,
                });
                i += 1;
            }
            b'(' | b')' | b',' => {
                let tok = match b {
                    b'(' => Tok::LParen,
                    b')' => Tok::RParen,
                    _ => Tok::Comma,
                };
                out.push(Token { tok, offset: i });
                i += 1;
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(Error::Syntax {
                    offset: i,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        offset: text.len(),
    });
    Ok(out)
}

const NEG_BP: u8 = 5;

fn infix_bp(op: char) -> Option<(u8, u8)> {
    match op {
        '+' | '-' => Some((1, 2)),
        '*' | '/' => Some((3, 4)),
        '^' => Some((7, 6)),
        _ => None,
    }
}

fn function(name: &str) -> Option<(usize, fn(Vec<Expr>) -> Expr)> {
    fn un(op: UnaryOp) -> impl Fn(Vec<Expr>) -> Expr {
        move |mut a| Expr::unary(op, a.remove(0))
    }
    Some(match name {
        "log" => (1, |a| un(UnaryOp::Log)(a)),
        "exp" => (1, |a| un(UnaryOp::Exp)(a)),
        "tanh" => (1, |a| un(UnaryOp::Tanh)(a)),
        "abs" => (1, |a| un(UnaryOp::Abs)(a)),
        "sqrt" => (1, |a| un(UnaryOp::Sqrt)(a)),
        "max" => (2, |mut a| {
            let b = a.pop().expect("arity checked");
            Expr::binary(BinaryOp::Max, a.pop().expect("arity checked"), b)
        }),
        "min" => (2, |mut a| {
            let b = a.pop().expect("arity checked");
            Expr::binary(BinaryOp::Min, a.pop().expect("arity checked"), b)
        }),
        _ => return None,
    })
}

fn variable_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('x')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
        return None;
    }
    digits.parse::<usize>().ok().map(|n| n - 1)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        let t = self.next();
        if t.tok == want {
            Ok(())
        } else {
            Err(Error::Syntax {
                offset: t.offset,
                message: format!("expected {what}"),
            })
        }
    }

    fn expr(&mut self, min_bp: u8) -> Result<Expr> {
        let mut lhs = self.prefix()?;
        while let Tok::Op(op) = self.peek().tok {
            let (lbp, rbp) = infix_bp(op).expect("tokenizer only emits known operators");
            if lbp < min_bp {
                break;
            }
            self.next();
            let rhs = self.expr(rbp)?;
            let bop = match op {
                '+' => BinaryOp::Add,
                '-' => BinaryOp::Sub,
                '*' => BinaryOp::Mul,
                '/' => BinaryOp::Div,
                _ => BinaryOp::Pow,
            };
            lhs = Expr::binary(bop, lhs, rhs);
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> Result<Expr> {
        let t = self.next();
        match t.tok {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::Op('-') => Ok(Expr::unary(UnaryOp::Neg, self.expr(NEG_BP)?)),
            Tok::LParen => {
                let e = self.expr(0)?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(i) = variable_index(&name) {
                    return Ok(Expr::Var(i));
                }
                let Some((arity, build)) = function(&name) else {
                    return Err(Error::UnknownIdentifier { name, offset: t.offset });
                };
                self.expect(Tok::LParen, &format!("`(` after `{name}`"))?;
                let mut args = vec![self.expr(0)?];
                while self.peek().tok == Tok::Comma {
                    self.next();
                    args.push(self.expr(0)?);
                }
                self.expect(Tok::RParen, "`)` or `,`")?;
                if args.len() != arity {
                    return Err(Error::Arity {
                        function: name,
                        expected: arity,
                        found: args.len(),
                        offset: t.offset,
                    });
                }
                Ok(build(args))
            }
            Tok::Eof => Err(Error::Syntax {
                offset: t.offset,
                message: "unexpected end of expression".into(),
            }),
            _ => Err(Error::Syntax {
                offset: t.offset,
                message: "expected a number, variable, function call or `(`".into(),
            }),
        }
    }
}

/// Parses an expression string into a tree.
pub fn parse(text: &str) -> Result<Expr> {
    let mut p = Parser {
        tokens: tokenize(text)?,
        pos: 0,
    };
    let e = p.expr(0)?;
    let t = p.peek();
    if t.tok != Tok::Eof {
        return Err(Error::Syntax {
            offset: t.offset,
            message: "unexpected trailing input".into(),
        });
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use BinaryOp::*;

    fn c(v: f64) -> Expr {
        Expr::Const(v)
    }
    fn x(i: usize) -> Expr {
        Expr::Var(i - 1)
    }
    fn b(op: BinaryOp, l: Expr, r: Expr) -> Expr {
        Expr::binary(op, l, r)
    }
    fn u(op: UnaryOp, e: Expr) -> Expr {
        Expr::unary(op, e)
    }

    #[test]
    fn simple_polynomial() {
        assert_eq!(parse("x1*x1 + 2").unwrap(), b(Add, b(Mul, x(1), x(1)), c(2.0)));
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(parse("-x1^2").unwrap(), u(UnaryOp::Neg, b(Pow, x(1), c(2.0))));
        assert_eq!(parse("x1^2^3").unwrap(), b(Pow, x(1), b(Pow, c(2.0), c(3.0))));
        assert_eq!(parse("x1-x2-x3").unwrap(), b(Sub, b(Sub, x(1), x(2)), x(3)));
        assert_eq!(parse("x1/x2*x3").unwrap(), b(Mul, b(Div, x(1), x(2)), x(3)));
        assert_eq!(parse("-x1*x2").unwrap(), b(Mul, u(UnaryOp::Neg, x(1)), x(2)));
        assert_eq!(parse("2^-x1").unwrap(), b(Pow, c(2.0), u(UnaryOp::Neg, x(1))));
        assert_eq!(parse("1e-3 + 2.5E2").unwrap(), b(Add, c(1e-3), c(250.0)));
    }

    #[test]
    fn toy_subfunction() {
        let e = parse("log(max(abs(0.5*(-x1-7) - tanh(-x2)), 0.000005)) + 6").unwrap();
        let inner = b(
            Sub,
            b(Mul, c(0.5), b(Sub, u(UnaryOp::Neg, x(1)), c(7.0))),
            u(UnaryOp::Tanh, u(UnaryOp::Neg, x(2))),
        );
        let expect = b(
            Add,
            u(UnaryOp::Log, b(Max, u(UnaryOp::Abs, inner), c(0.000005))),
            c(6.0),
        );
        assert_eq!(e, expect);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            parse("max(x1)"),
            Err(Error::Arity {
                expected: 2,
                found: 1,
                ..
            })
        ));
        assert!(matches!(
            parse("foo(x1)"),
            Err(Error::UnknownIdentifier { offset: 0, .. })
        ));
        assert!(matches!(parse("x0"), Err(Error::UnknownIdentifier { .. })));
        assert!(matches!(parse(""), Err(Error::Syntax { offset: 0, .. })));
        assert!(matches!(parse("x1 +"), Err(Error::Syntax { offset: 4, .. })));
        assert!(matches!(parse("(x1"), Err(Error::Syntax { .. })));
        assert!(matches!(parse("x1 x2"), Err(Error::Syntax { offset: 3, .. })));
        assert!(matches!(parse("x1 $ 2"), Err(Error::Syntax { offset: 3, .. })));
        assert!(matches!(parse("log x1"), Err(Error::Syntax { .. })));
    }

    #[test]
    fn print_round_trip() {
        for s in [
            "x1*x1 + 2",
            "-x1^2",
            "max(tanh(0.5*x2), 0) * (log(max(abs(0.5*(-x1+3) - tanh(-x2) + 2), 0.000005)) + 6)",
            "min(x1, x2) / sqrt(exp(x3)) - 5e-6",
        ] {
            let e = parse(s).unwrap();
            assert_eq!(parse(&e.to_string()).unwrap(), e, "{s}");
        }
    }
}
