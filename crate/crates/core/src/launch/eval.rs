// Copyright 2026 The mrctl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! The `$(eval …)` expression language.
//!
//! Integers, strings and booleans; `arg('x')`, `env('x')`, `str(x)`,
//! `int(x)`; unary minus, `* /`, `+ -`, comparisons, `not`, `and`, `or`,
//! from tightest to loosest. Comparisons do not chain. Division truncates
//! toward zero.
//!
//! Values read through `arg()` and `env()` are coerced: text that parses as
//! an integer becomes an integer, `true`/`false` become booleans, anything
//! else stays a string. Without this `arg('num') - 1` could never work,
//! since every launch argument is text.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalValue {
    Int(i64),
    Str(String),
    Bool(bool),
}

impl EvalValue {
    fn kind(&self) -> &'static str {
        match self {
            EvalValue::Int(_) => "int",
            EvalValue::Str(_) => "string",
            EvalValue::Bool(_) => "bool",
        }
    }

    /// The coercion applied to `arg()` and `env()` results.
    pub fn coerce(text: &str) -> EvalValue {
        if let Ok(i) = text.trim().parse::<i64>() {
            return EvalValue::Int(i);
        }
        match text {
            "true" | "True" => EvalValue::Bool(true),
            "false" | "False" => EvalValue::Bool(false),
            _ => EvalValue::Str(text.to_string()),
        }
    }
}

impl fmt::Display for EvalValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalValue::Int(i) => write!(f, "{i}"),
            EvalValue::Str(s) => f.write_str(s),
            EvalValue::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("eval parse error at offset {pos}: {message}")]
    Parse { pos: usize, message: String },
    #[error("eval type error: {0}")]
    Type(String),
    #[error("eval arithmetic error: {0}")]
    Arithmetic(String),
    #[error("argument {0:?} is not set")]
    UnboundArg(String),
    #[error("environment variable {0:?} is not set")]
    UnboundEnv(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(i64),
    Str(String),
    Ident(String),
    Op(&'static str),
    LParen,
    RParen,
    Comma,
}

const OPS: [&str; 10] = [">=", "<=", "==", "!=", ">", "<", "+", "-", "*", "/"];

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, EvalError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |pos, m: &str| EvalError::Parse {
        pos,
        message: m.to_string(),
    };
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let n = text[start..i]
                .parse()
                .map_err(|_| err(start, "integer literal out of range"))?;
            out.push((start, Tok::Int(n)));
            continue;
        }
        if c == b'\'' || c == b'"' {
            let close = text[i + 1..]
                .find(c as char)
                .ok_or_else(|| err(start, "unterminated string"))?;
            out.push((start, Tok::Str(text[i + 1..i + 1 + close].to_string())));
            i += close + 2;
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(text[start..i].to_string())));
            continue;
        }
        let tok = match c {
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(t) = tok {
            out.push((start, t));
            i += 1;
            continue;
        }
        match OPS.iter().find(|op| text[i..].starts_with(*op)) {
            Some(op) => {
                out.push((start, Tok::Op(op)));
                i += op.len();
            }
            None => return Err(err(start, &format!("unexpected character {:?}", c as char))),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
enum Expr {
    Lit(EvalValue),
    Neg(Box<Expr>),
    Not(Box<Expr>),
    Bin(&'static str, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
}

const PREFIX_NOT: u8 = 5;
const PREFIX_NEG: u8 = 13;

fn infix(tok: &Tok) -> Option<(&'static str, u8, u8)> {
    let op = match tok {
        Tok::Op(op) => *op,
        Tok::Ident(w) if w == "or" => "or",
        Tok::Ident(w) if w == "and" => "and",
        _ => return None,
    };
    let (l, r) = match op {
        "or" => (1, 2),
        "and" => (3, 4),
        "+" | "-" => (9, 10),
        "*" | "/" => (11, 12),
        _ => (7, 8),
    };
    Some((op, l, r))
}

fn is_cmp(op: &str) -> bool {
    matches!(op, ">" | "<" | ">=" | "<=" | "==" | "!=")
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T, EvalError> {
        Err(EvalError::Parse {
            pos: self.offset(),
            message: message.into(),
        })
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), EvalError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            self.fail(format!("expected {what}"))
        }
    }

    fn expr(&mut self, min_bp: u8) -> Result<Expr, EvalError> {
        let mut lhs = self.prefix()?;
        let mut bare_cmp = false;
        while let Some((op, l, r)) = self.peek().and_then(infix) {
            if l < min_bp {
                break;
            }
            if is_cmp(op) && bare_cmp {
                return self.fail("comparisons cannot be chained");
            }
            self.pos += 1;
            let rhs = self.expr(r)?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
            bare_cmp = is_cmp(op);
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> Result<Expr, EvalError> {
        let start = self.offset();
        match self.next() {
            Some(Tok::Int(i)) => Ok(Expr::Lit(EvalValue::Int(i))),
            Some(Tok::Str(s)) => Ok(Expr::Lit(EvalValue::Str(s))),
            Some(Tok::Op("-")) => Ok(Expr::Neg(Box::new(self.expr(PREFIX_NEG)?))),
            Some(Tok::LParen) => {
                let e = self.expr(0)?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some(Tok::Ident(w)) => match w.as_str() {
                "true" | "True" => Ok(Expr::Lit(EvalValue::Bool(true))),
                "false" | "False" => Ok(Expr::Lit(EvalValue::Bool(false))),
                "not" => Ok(Expr::Not(Box::new(self.expr(PREFIX_NOT)?))),
                "arg" | "env" | "str" | "int" => {
                    self.expect(Tok::LParen, "`(` after function name")?;
                    let mut args = Vec::new();
                    if self.peek() != Some(&Tok::RParen) {
                        loop {
                            args.push(self.expr(0)?);
                            if self.peek() == Some(&Tok::Comma) {
                                self.pos += 1;
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(Tok::RParen, "`)`")?;
                    if args.len() != 1 {
                        return Err(EvalError::Parse {
                            pos: start,
                            message: format!("{w}() takes exactly one argument"),
                        });
                    }
                    Ok(Expr::Call(w, args))
                }
                _ => Err(EvalError::Parse {
                    pos: start,
                    message: format!("unknown name {w:?}"),
                }),
            },
            Some(t) => Err(EvalError::Parse {
                pos: start,
                message: format!("unexpected token {t:?}"),
            }),
            None => self.fail("unexpected end of expression"),
        }
    }
}

fn parse(text: &str) -> Result<Expr, EvalError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        end: text.len(),
    };
    let e = p.expr(0)?;
    if p.pos < p.toks.len() {
        return p.fail("trailing input");
    }
    Ok(e)
}

type Lookup<'a> = &'a dyn Fn(&str) -> Option<String>;

struct Evaluator<'a> {
    arg: Lookup<'a>,
    env: Lookup<'a>,
}

fn type_err<T>(msg: String) -> Result<T, EvalError> {
    Err(EvalError::Type(msg))
}

impl Evaluator<'_> {
    fn eval(&self, e: &Expr) -> Result<EvalValue, EvalError> {
        use EvalValue::*;
        match e {
            Expr::Lit(v) => Ok(v.clone()),
            Expr::Neg(x) => match self.eval(x)? {
                Int(i) => i
                    .checked_neg()
                    .map(Int)
                    .ok_or_else(|| EvalError::Arithmetic("integer overflow".into())),
                v => type_err(format!("cannot negate a {}", v.kind())),
            },
            Expr::Not(x) => match self.eval(x)? {
                Bool(b) => Ok(Bool(!b)),
                v => type_err(format!("`not` needs a bool, got {}", v.kind())),
            },
            Expr::Bin(op @ ("and" | "or"), l, r) => {
                let Bool(a) = self.eval(l)? else {
                    return type_err(format!("`{op}` needs bool operands"));
                };
                if (*op == "and" && !a) || (*op == "or" && a) {
                    return Ok(Bool(a));
                }
                match self.eval(r)? {
                    Bool(b) => Ok(Bool(b)),
                    _ => type_err(format!("`{op}` needs bool operands")),
                }
            }
            Expr::Bin(op, l, r) => {
                let (a, b) = (self.eval(l)?, self.eval(r)?);
                binary(op, a, b)
            }
            Expr::Call(f, args) => {
                let v = self.eval(&args[0])?;
                match (f.as_str(), v) {
                    ("arg", Str(name)) => (self.arg)(&name)
                        .map(|s| EvalValue::coerce(&s))
                        .ok_or(EvalError::UnboundArg(name)),
                    ("env", Str(name)) => (self.env)(&name)
                        .map(|s| EvalValue::coerce(&s))
                        .ok_or(EvalError::UnboundEnv(name)),
                    ("str", v) => Ok(Str(v.to_string())),
                    ("int", Int(i)) => Ok(Int(i)),
                    ("int", Bool(b)) => Ok(Int(b as i64)),
                    ("int", Str(s)) => s
                        .trim()
                        .parse()
                        .map(Int)
                        .map_err(|_| EvalError::Type(format!("int() cannot parse {s:?}"))),
                    (f, v) => type_err(format!("{f}() does not accept a {}", v.kind())),
                }
            }
        }
    }
}

fn binary(op: &str, a: EvalValue, b: EvalValue) -> Result<EvalValue, EvalError> {
    use EvalValue::*;
    let overflow = || EvalError::Arithmetic("integer overflow".into());
    match (op, a, b) {
        ("+", Int(x), Int(y)) => x.checked_add(y).map(Int).ok_or_else(overflow),
        ("+", Str(x), Str(y)) => Ok(Str(x + &y)),
        ("-", Int(x), Int(y)) => x.checked_sub(y).map(Int).ok_or_else(overflow),
        ("*", Int(x), Int(y)) => x.checked_mul(y).map(Int).ok_or_else(overflow),
        ("/", Int(_), Int(0)) => Err(EvalError::Arithmetic("division by zero".into())),
        ("/", Int(x), Int(y)) => x.checked_div(y).map(Int).ok_or_else(overflow),
        ("==", x, y) if x.kind() == y.kind() => Ok(Bool(x == y)),
        ("!=", x, y) if x.kind() == y.kind() => Ok(Bool(x != y)),
        (op @ (">" | "<" | ">=" | "<="), x, y) => {
            let ord = match (&x, &y) {
                (Int(a), Int(b)) => a.cmp(b),
                (Str(a), Str(b)) => a.cmp(b),
                _ => return type_err(format!("cannot compare {} {op} {}", x.kind(), y.kind())),
            };
            Ok(Bool(match op {
                ">" => ord.is_gt(),
                "<" => ord.is_lt(),
                ">=" => ord.is_ge(),
                _ => ord.is_le(),
            }))
        }
        (op, x, y) => type_err(format!("unsupported operands {} {op} {}", x.kind(), y.kind())),
    }
}

pub fn eval_expr(
    text: &str,
    arg_lookup: &dyn Fn(&str) -> Option<String>,
    env_lookup: &dyn Fn(&str) -> Option<String>,
) -> Result<EvalValue, EvalError> {
    let ast = parse(text)?;
    Evaluator {
        arg: arg_lookup,
        env: env_lookup,
    }
    .eval(&ast)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn none(_: &str) -> Option<String> {
        None
    }

    fn ev(text: &str) -> Result<EvalValue, EvalError> {
        eval_expr(text, &none, &none)
    }

    fn with_num(text: &str, num: &str) -> Result<EvalValue, EvalError> {
        let n = num.to_string();
        eval_expr(text, &move |k| (k == "num").then(|| n.clone()), &none)
    }

    #[test]
    fn recursive_launch_expressions() {
        assert_eq!(
            with_num("str(arg('num') - 1)", "3").unwrap(),
            EvalValue::Str("2".into())
        );
        assert_eq!(
            with_num("arg('num') - 1 > 0", "1").unwrap(),
            EvalValue::Bool(false)
        );
        assert_eq!(with_num("arg('num') - 1", "5").unwrap(), EvalValue::Int(4));
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("2+3*4").unwrap(), EvalValue::Int(14));
        assert_eq!(ev("-2*3").unwrap(), EvalValue::Int(-6));
        assert_eq!(ev("7/2").unwrap(), EvalValue::Int(3));
        assert_eq!(ev("-7/2").unwrap(), EvalValue::Int(-3));
        assert_eq!(ev("not 1 > 2 and true").unwrap(), EvalValue::Bool(true));
        assert_eq!(ev("true or false and false").unwrap(), EvalValue::Bool(true));
        assert_eq!(ev("10 - 4 - 3").unwrap(), EvalValue::Int(3));
    }

    #[test]
    fn type_errors() {
        assert!(matches!(ev("'a' + 1"), Err(EvalError::Type(_))));
        assert!(matches!(ev("not 1"), Err(EvalError::Type(_))));
        assert!(matches!(ev("1 == 'a'"), Err(EvalError::Type(_))));
        assert!(matches!(ev("int('x')"), Err(EvalError::Type(_))));
    }

    #[test]
    fn parse_errors() {
        for bad in ["", "1 +", "(1", "1 < 2 < 3", "foo(1)", "1 2", "'abc", "str(1, 2)", "1 $ 2"] {
            assert!(matches!(ev(bad), Err(EvalError::Parse { .. })), "{bad}");
        }
    }

    #[test]
    fn unbound_and_arith() {
        assert_eq!(ev("arg('x')"), Err(EvalError::UnboundArg("x".into())));
        assert_eq!(ev("env('HOME_X')"), Err(EvalError::UnboundEnv("HOME_X".into())));
        assert!(matches!(ev("1/0"), Err(EvalError::Arithmetic(_))));
        assert!(matches!(ev("9223372036854775807 + 1"), Err(EvalError::Arithmetic(_))));
    }

    #[test]
    fn strings_and_builtins() {
        assert_eq!(ev("'tb3_' + str(2)").unwrap(), EvalValue::Str("tb3_2".into()));
        assert_eq!(ev("int('42') + 1").unwrap(), EvalValue::Int(43));
        assert_eq!(ev("\"b\" > 'a'").unwrap(), EvalValue::Bool(true));
        assert_eq!(ev("str(true)").unwrap(), EvalValue::Str("true".into()));
        assert_eq!(with_num("arg('num')", "burger").unwrap(), EvalValue::Str("burger".into()));
        assert_eq!(with_num("arg('num')", "true").unwrap(), EvalValue::Bool(true));
    }

    #[test]
    fn and_short_circuits() {
        assert_eq!(ev("false and arg('missing')").unwrap(), EvalValue::Bool(false));
    }

    #[derive(Debug, Clone)]
    enum Tree {
        Leaf(i64),
        Neg(Box<Tree>),
        Op(char, Box<Tree>, Box<Tree>),
    }

    fn tree() -> impl Strategy<Value = Tree> {
        (0i64..1000).prop_map(Tree::Leaf).prop_recursive(5, 32, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|t| Tree::Neg(Box::new(t))),
                (prop::sample::select(vec!['+', '-', '*', '/']), inner.clone(), inner)
                    .prop_map(|(o, a, b)| Tree::Op(o, Box::new(a), Box::new(b))),
            ]
        })
    }

    // Fully parenthesized rendering; the evaluator must agree with direct
    // i128 arithmetic on the tree.
    fn render(t: &Tree) -> String {
        match t {
            Tree::Leaf(v) => v.to_string(),
            Tree::Neg(x) => format!("-({})", render(x)),
            Tree::Op(o, a, b) => format!("({} {o} {})", render(a), render(b)),
        }
    }

    fn oracle(t: &Tree) -> Option<i128> {
        let v = match t {
            Tree::Leaf(v) => *v as i128,
            Tree::Neg(x) => -oracle(x)?,
            Tree::Op(o, a, b) => {
                let (a, b) = (oracle(a)?, oracle(b)?);
                match o {
                    '+' => a + b,
                    '-' => a - b,
                    '*' => a * b,
                    _ if b == 0 => return None,
                    _ => a / b,
                }
            }
        };
        (i64::MIN as i128..=i64::MAX as i128).contains(&v).then_some(v)
    }

    proptest! {
        #[test]
        fn arithmetic_matches_oracle(t in tree()) {
            let got = ev(&render(&t));
            match oracle(&t) {
                Some(v) => prop_assert_eq!(got, Ok(EvalValue::Int(v as i64))),
                None => prop_assert!(matches!(got, Err(EvalError::Arithmetic(_)))),
            }
        }

        #[test]
        fn sum_and_product_precedence(a in -50i64..50, b in -50i64..50, c in -50i64..50) {
            prop_assert_eq!(ev(&format!("{a} + {b} * {c}")), Ok(EvalValue::Int(a + b * c)));
            prop_assert_eq!(ev(&format!("{a} * {b} - {c}")), Ok(EvalValue::Int(a * b - c)));
            prop_assert_eq!(ev(&format!("{a} - {b} > {c}")), Ok(EvalValue::Bool(a - b > c)));
        }
    }
}
