use super::{BinaryOp, Func, Node};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Admit `exp(...)`, which leaves the polynomial-growth class.
    pub allow_exp: bool,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
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
            let value: f64 = lit.parse().map_err(|_| Error::Syntax {
                pos: start,
                msg: format!("bad number `{lit}`"),
            })?;
            out.push((start, Tok::Num(value)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(text[start..i].to_string())));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                _ => {
                    return Err(Error::Syntax {
                        pos: start,
                        msg: format!("unexpected character `{c}`"),
                    })
                }
            };
            out.push((start, tok));
            i += c.len_utf8();
        }
    }
    out.push((text.len(), Tok::End));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    at: usize,
    options: &'a ParseOptions,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn pos(&self) -> usize {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].1.clone();
        if t != Tok::End {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(Error::Syntax {
                pos: self.pos(),
                msg: format!("expected {what}"),
            })
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinaryOp::Add,
                Tok::Op('-') => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinaryOp::Mul,
                Tok::Op('/') => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.primary()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let n = self.exponent()?;
            return Ok(Node::Pow(Box::new(base), n));
        }
        Ok(base)
    }

    /// Non-negative integer literal, optionally signed so that `-2` reports a
    /// negative exponent rather than a syntax error.
    fn exponent(&mut self) -> Result<u32> {
        let pos = self.pos();
        let negative = if *self.peek() == Tok::Op('-') {
            self.bump();
            true
        } else {
            false
        };
        match self.bump() {
            Tok::Num(v) if v.fract() == 0.0 && v <= u32::MAX as f64 => {
                if negative && v != 0.0 {
                    Err(Error::NegativeExponent {
                        pos,
                        exponent: -(v as i64),
                    })
                } else {
                    Ok(v as u32)
                }
            }
            _ => Err(Error::Syntax {
                pos,
                msg: "exponent must be a non-negative integer literal".into(),
            }),
        }
    }

    fn primary(&mut self) -> Result<Node> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(v) => Ok(Node::Const(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => self.identifier(pos, name),
            Tok::End => Err(Error::Syntax {
                pos,
                msg: "unexpected end of input".into(),
            }),
            t => Err(Error::Syntax {
                pos,
                msg: format!("unexpected token {t:?}"),
            }),
        }
    }

    fn identifier(&mut self, pos: usize, name: String) -> Result<Node> {
        if let Some(index) = name.strip_prefix('x') {
            if !index.is_empty() && index.bytes().all(|b| b.is_ascii_digit()) {
                return match index.parse::<usize>() {
                    Ok(i) if i >= 1 => Ok(Node::Var(i)),
                    _ => Err(Error::UnknownIdentifier { pos, name }),
                };
            }
        }
        let func = match name.as_str() {
            "abs" => Func::Abs,
            "max" => Func::Max,
            "min" => Func::Min,
            "exp" if self.options.allow_exp => Func::Exp,
            "pow" => return self.pow_call(),
            _ => return Err(Error::UnknownIdentifier { pos, name }),
        };
        if *self.peek() != Tok::LParen {
            return Err(Error::Syntax {
                pos: self.pos(),
                msg: format!("expected `(` after `{name}`"),
            });
        }
        self.bump();
        let mut args = vec![self.expr()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            args.push(self.expr()?);
        }
        self.expect(Tok::RParen, "`)`")?;
        let arity_ok = match func {
            Func::Abs | Func::Exp => args.len() == 1,
            Func::Max | Func::Min => args.len() >= 2,
        };
        if !arity_ok {
            return Err(Error::Syntax {
                pos,
                msg: format!("wrong number of arguments to `{name}`"),
            });
        }
        Ok(Node::Call(func, args))
    }

    fn pow_call(&mut self) -> Result<Node> {
        self.expect(Tok::LParen, "`(` after `pow`")?;
        let base = self.expr()?;
        self.expect(Tok::Comma, "`,` in pow(base, n)")?;
        let n = self.exponent()?;
        self.expect(Tok::RParen, "`)`")?;
        Ok(Node::Pow(Box::new(base), n))
    }
}

pub(super) fn parse(text: &str, options: &ParseOptions) -> Result<Node> {
    if text.trim().is_empty() {
        return Err(Error::Syntax {
            pos: 0,
            msg: "empty expression".into(),
        });
    }
    let mut p = Parser {
        toks: lex(text)?,
        at: 0,
        options,
    };
    let node = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(Error::Syntax {
            pos: p.pos(),
            msg: "trailing input".into(),
        });
    }
    Ok(node)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err(text: &str) -> Error {
        parse(text, &ParseOptions::default()).unwrap_err()
    }

    #[test]
    fn syntax_errors_carry_position() {
        assert_eq!(
            err("x1 + * 2"),
            Error::Syntax {
                pos: 5,
                msg: "unexpected token Op('*')".into()
            }
        );
        assert!(matches!(err("(x1 + 2"), Error::Syntax { pos: 7, .. }));
        assert!(matches!(err("x1 2"), Error::Syntax { pos: 3, .. }));
        assert!(matches!(err(""), Error::Syntax { pos: 0, .. }));
        assert!(matches!(err("x1 # 2"), Error::Syntax { pos: 3, .. }));
        assert!(matches!(err("x1^2.5"), Error::Syntax { pos: 3, .. }));
    }

    #[test]
    fn unknown_identifiers() {
        assert_eq!(
            err("y + 1"),
            Error::UnknownIdentifier {
                pos: 0,
                name: "y".into()
            }
        );
        assert!(matches!(err("x0"), Error::UnknownIdentifier { .. }));
        assert!(matches!(err("sin(x1)"), Error::UnknownIdentifier { .. }));
        assert!(matches!(err("exp(x1)"), Error::UnknownIdentifier { .. }));
    }

    #[test]
    fn negative_exponents_rejected() {
        assert_eq!(
            err("x1^-2"),
            Error::NegativeExponent {
                pos: 3,
                exponent: -2
            }
        );
        assert!(matches!(err("pow(x1, -1)"), Error::NegativeExponent { .. }));
    }

    #[test]
    fn exp_behind_flag() {
        let opts = ParseOptions { allow_exp: true };
        let node = parse("exp(x1)", &opts).unwrap();
        assert_eq!(node, Node::Call(Func::Exp, vec![Node::Var(1)]));
    }

    #[test]
    fn call_arity_checked() {
        assert!(matches!(err("max(x1)"), Error::Syntax { .. }));
        assert!(matches!(err("abs(x1, x2)"), Error::Syntax { .. }));
    }
}
