//! Tiny call-expression syntax shared by law and grid specifications:
//! `name`, `name(1.0, 2)`, `eta_eq_xi(exp(1))`.

use crate::error::{Error, Result};

const MAX_DEPTH: usize = 8;
const MAX_ARGS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum Arg {
    Number(f64),
    Call(Call),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Call {
    pub name: String,
    pub args: Vec<Arg>,
    /// Byte offset of the name in the source text.
    pub pos: usize,
}

impl Call {
    /// All arguments as numbers, or an error naming the offending call.
    pub fn numbers(&self) -> Result<Vec<f64>> {
        self.args
            .iter()
            .map(|a| match a {
                Arg::Number(x) => Ok(*x),
                Arg::Call(c) => Err(Error::Parse {
                    pos: c.pos,
                    msg: format!("`{}` expects numeric arguments", self.name),
                }),
            })
            .collect()
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

pub fn parse_call(src: &str) -> Result<Call> {
    let mut p = Parser { src, pos: 0 };
    p.skip_ws();
    let call = p.call(0)?;
    p.skip_ws();
    if p.pos != src.len() {
        return Err(p.err("trailing input"));
    }
    Ok(call)
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t')) {
            self.pos += 1;
        }
    }

    fn ident(&mut self) -> Result<String> {
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {}
            _ => return Err(self.err("expected a name")),
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
            self.pos += 1;
        }
        Ok(self.src[start..self.pos].to_string())
    }

    fn number(&mut self) -> Result<f64> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit() || matches!(c, b'+' | b'-' | b'.' | b'e' | b'E'))
        {
            self.pos += 1;
        }
        let text = &self.src[start..self.pos];
        let value: f64 = text.parse().map_err(|_| Error::Parse {
            pos: start,
            msg: format!("malformed number `{text}`"),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                pos: start,
                msg: format!("non-finite number `{text}`"),
            });
        }
        Ok(value)
    }

    fn call(&mut self, depth: usize) -> Result<Call> {
        if depth > MAX_DEPTH {
            return Err(self.err("nesting too deep"));
        }
        let pos = self.pos;
        let name = self.ident()?;
        self.skip_ws();
        let mut args = Vec::new();
        if self.peek() == Some(b'(') {
            self.pos += 1;
            self.skip_ws();
            if self.peek() == Some(b')') {
                self.pos += 1;
                return Ok(Call { name, args, pos });
            }
            loop {
                self.skip_ws();
                let arg = match self.peek() {
                    Some(c) if c.is_ascii_alphabetic() || c == b'_' => Arg::Call(self.call(depth + 1)?),
                    Some(_) => Arg::Number(self.number()?),
                    None => return Err(self.err("unexpected end of input")),
                };
                args.push(arg);
                if args.len() > MAX_ARGS {
                    return Err(self.err("too many arguments"));
                }
                self.skip_ws();
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(self.err("expected `,` or `)`")),
                }
            }
        }
        Ok(Call { name, args, pos })
    }
}

/// Shortest round-trip rendering used in canonical strings.
pub fn fmt_number(x: f64) -> String {
    format!("{x:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_nested_calls() {
        let c = parse_call(" eta_eq_xi( exp(1) ) ").unwrap();
        assert_eq!(c.name, "eta_eq_xi");
        match &c.args[0] {
            Arg::Call(inner) => {
                assert_eq!(inner.name, "exp");
                assert_eq!(inner.numbers().unwrap(), vec![1.0]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bare_name_and_empty_args() {
        assert!(parse_call("proof_grid").unwrap().args.is_empty());
        assert!(parse_call("proof_grid()").unwrap().args.is_empty());
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "(", "exp(", "exp(1,", "exp(1 2)", "exp(1))", "1(2)", "exp(nan)", "exp(inf)", "exp(--1)"] {
            assert!(parse_call(bad).and_then(|c| c.numbers()).is_err(), "{bad:?} accepted");
        }
        let deep = format!("{}1{}", "a(".repeat(50), ")".repeat(50));
        assert!(parse_call(&deep).is_err());
    }
}
