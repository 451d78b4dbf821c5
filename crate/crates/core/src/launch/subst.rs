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

//! `$(arg …)`, `$(env …)`, `$(find …)` and `$(eval …)` substitution.

use std::collections::BTreeMap;

use super::eval::eval_expr;
use super::pkgindex::PackageIndex;
use super::{LaunchError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubstPart {
    Literal(String),
    Arg(String),
    Env(String),
    Find(String),
    Eval(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubstExpr {
    pub parts: Vec<SubstPart>,
}

fn bad(text: &str, message: impl Into<String>) -> LaunchError {
    LaunchError::BadSubstitution {
        text: text.to_string(),
        message: message.into(),
    }
}

/// Byte offset of the `)` closing the `$(` whose body starts at `from`.
fn closing_paren(text: &str, from: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut quote: Option<char> = None;
    for (i, c) in text[from..].char_indices() {
        match (quote, c) {
            (Some(q), c) if c == q => quote = None,
            (Some(_), _) => {}
            (None, '\'' | '"') => quote = Some(c),
            (None, '(') => depth += 1,
            (None, ')') if depth == 0 => return Some(from + i),
            (None, ')') => depth -= 1,
            _ => {}
        }
    }
    None
}

impl SubstExpr {
    pub fn parse(text: &str) -> Result<Self> {
        let mut parts = Vec::new();
        let mut lit = String::new();
        let mut rest = 0;
        while let Some(off) = text[rest..].find("$(") {
            let start = rest + off;
            lit.push_str(&text[rest..start]);
            let body_start = start + 2;
            let end = closing_paren(text, body_start).ok_or_else(|| bad(text, "unclosed `$(`"))?;
            let body = text[body_start..end].trim();
            let (directive, arg) = body.split_once(char::is_whitespace).unwrap_or((body, ""));
            let arg = arg.trim();
            let part = match directive {
                "eval" => SubstPart::Eval(arg.to_string()),
                "arg" | "env" | "find" => {
                    if arg.is_empty() || arg.contains(char::is_whitespace) {
                        return Err(bad(text, format!("$({directive} …) takes one word")));
                    }
                    match directive {
                        "arg" => SubstPart::Arg(arg.to_string()),
                        "env" => SubstPart::Env(arg.to_string()),
                        _ => SubstPart::Find(arg.to_string()),
                    }
                }
                other => return Err(bad(text, format!("unknown substitution {other:?}"))),
            };
            if !lit.is_empty() {
                parts.push(SubstPart::Literal(std::mem::take(&mut lit)));
            }
            parts.push(part);
            rest = end + 1;
        }
        lit.push_str(&text[rest..]);
        if !lit.is_empty() {
            parts.push(SubstPart::Literal(lit));
        }
        let has_eval = parts.iter().any(|p| matches!(p, SubstPart::Eval(_)));
        if has_eval && parts.len() != 1 {
            return Err(bad(text, "$(eval …) must be the entire value"));
        }
        Ok(SubstExpr { parts })
    }
}

/// What substitutions can see.
#[derive(Debug, Clone, Copy)]
pub struct Scope<'a> {
    pub args: &'a BTreeMap<String, String>,
    pub env: &'a BTreeMap<String, String>,
    pub packages: &'a PackageIndex,
}

impl Scope<'_> {
    fn arg(&self, name: &str) -> Result<String> {
        self.args
            .get(name)
            .cloned()
            .ok_or_else(|| LaunchError::UnboundArg(name.to_string()))
    }

    /// Parses and substitutes in one step.
    pub fn subst(&self, text: &str) -> Result<String> {
        substitute(&SubstExpr::parse(text)?, self)
    }
}

pub fn substitute(expr: &SubstExpr, scope: &Scope) -> Result<String> {
    let mut out = String::new();
    for part in &expr.parts {
        match part {
            SubstPart::Literal(s) => out.push_str(s),
            SubstPart::Arg(name) => out.push_str(&scope.arg(name)?),
            SubstPart::Env(name) => out.push_str(
                scope
                    .env
                    .get(name)
                    .ok_or_else(|| LaunchError::UnboundEnv(name.clone()))?,
            ),
            SubstPart::Find(pkg) => out.push_str(&scope.packages.find(pkg)?.display().to_string()),
            SubstPart::Eval(text) => {
                let v = eval_expr(
                    text,
                    &|k| scope.args.get(k).cloned(),
                    &|k| scope.env.get(k).cloned(),
                )?;
                out.push_str(&v.to_string());
            }
        }
    }
    Ok(out)
}

/// Interprets a substituted `if`/`unless` value.
pub fn parse_condition(text: &str) -> Result<bool> {
    match text.trim() {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(LaunchError::BadCondition(text.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn env_find_and_literals() {
        let args = map(&[("first_tb3", "tb3_0")]);
        let env = map(&[("TURTLEBOT3_MODEL", "burger")]);
        let pkgs = PackageIndex::new().with("turtlebot3_gazebo", "/root/turtlebot3_gazebo");
        let s = Scope {
            args: &args,
            env: &env,
            packages: &pkgs,
        };
        assert_eq!(s.subst("$(env TURTLEBOT3_MODEL)").unwrap(), "burger");
        assert_eq!(
            s.subst("$(find turtlebot3_gazebo)/worlds/x.world").unwrap(),
            "/root/turtlebot3_gazebo/worlds/x.world"
        );
        assert_eq!(s.subst("plain text").unwrap(), "plain text");
        assert_eq!(s.subst("").unwrap(), "");
        assert_eq!(s.subst("-model $(arg first_tb3) -x 1").unwrap(), "-model tb3_0 -x 1");
        assert_eq!(s.subst("$(arg first_tb3)/$(arg first_tb3)").unwrap(), "tb3_0/tb3_0");
        assert_eq!(s.subst("cost $5").unwrap(), "cost $5");
    }

    #[test]
    fn errors() {
        let empty = BTreeMap::new();
        let pkgs = PackageIndex::new();
        let s = Scope {
            args: &empty,
            env: &empty,
            packages: &pkgs,
        };
        assert!(matches!(s.subst("$(arg x)"), Err(LaunchError::UnboundArg(n)) if n == "x"));
        assert!(matches!(s.subst("$(env X)"), Err(LaunchError::UnboundEnv(_))));
        assert!(matches!(s.subst("$(find p)"), Err(LaunchError::UnknownPackage(_))));
        assert!(matches!(s.subst("$(arg x"), Err(LaunchError::BadSubstitution { .. })));
        assert!(matches!(s.subst("$(optenv X)"), Err(LaunchError::BadSubstitution { .. })));
        assert!(matches!(s.subst("a$(eval 1)"), Err(LaunchError::BadSubstitution { .. })));
        assert!(matches!(s.subst("$(arg a b)"), Err(LaunchError::BadSubstitution { .. })));
    }

    #[test]
    fn eval_parts() {
        let args = map(&[("num", "3")]);
        let empty = BTreeMap::new();
        let pkgs = PackageIndex::new();
        let s = Scope {
            args: &args,
            env: &empty,
            packages: &pkgs,
        };
        assert_eq!(
            SubstExpr::parse("$(eval str(arg('num') - 1))").unwrap().parts,
            vec![SubstPart::Eval("str(arg('num') - 1)".into())]
        );
        assert_eq!(s.subst("$(eval str(arg('num') - 1))").unwrap(), "2");
        assert_eq!(s.subst("$(eval arg('num') - 1 > 0)").unwrap(), "true");
        assert_eq!(s.subst("$(eval ')' + '(')").unwrap(), ")(");
    }

    #[test]
    fn conditions() {
        assert!(parse_condition("true").unwrap());
        assert!(parse_condition("1").unwrap());
        assert!(!parse_condition("false").unwrap());
        assert!(!parse_condition(" 0 ").unwrap());
        assert!(parse_condition("yes").is_err());
    }
}
