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

//! Expansion of a launch file tree into a flat, fully resolved plan.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::parse::{parse_launch_file, Condition, Item, LaunchDoc, NodeElem, OutputMode, ParamElem};
use super::pkgindex::PackageIndex;
use super::subst::{parse_condition, Scope};
use super::{LaunchError, Location, Result};
use crate::namegraph::{resolve_name, GraphName, NamespaceCtx, RemapRule};

pub const DEFAULT_INCLUDE_LIMIT: usize = 64;

/// Machine name used by nodes without a `machine` attribute.
pub const LOCAL_MACHINE: &str = "local";

/// Everything expansion reads besides the files themselves.
#[derive(Debug, Clone)]
pub struct LaunchContext {
    pub env: BTreeMap<String, String>,
    pub packages: PackageIndex,
    pub include_limit: usize,
}

impl LaunchContext {
    pub fn new(packages: PackageIndex) -> Self {
        LaunchContext {
            env: BTreeMap::new(),
            packages,
            include_limit: DEFAULT_INCLUDE_LIMIT,
        }
    }

    /// Snapshot of the current process environment.
    pub fn from_process_env(packages: PackageIndex) -> Self {
        LaunchContext {
            env: std::env::vars().collect(),
            ..Self::new(packages)
        }
    }

    pub fn with_env(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.env.insert(key.into(), value.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamSource {
    Value,
    /// The text of a `command` attribute. It is recorded, not executed.
    Command,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamWrite {
    pub key: GraphName,
    pub value: Value,
    pub source: ParamSource,
    pub at: Location,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineDef {
    pub name: String,
    pub address: String,
    pub env_loader: String,
    pub user: String,
    pub at: Location,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedNode {
    pub pkg: String,
    pub node_type: String,
    pub name: GraphName,
    pub ns: GraphName,
    pub args: String,
    /// Globally resolved, highest precedence first.
    pub remaps: Vec<RemapRule>,
    /// Private parameters, keyed by full name.
    pub params: BTreeMap<GraphName, Value>,
    pub machine: String,
    pub env: BTreeMap<String, String>,
    pub output: OutputMode,
    pub respawn: bool,
    pub at: Location,
}

impl ResolvedNode {
    /// Command-line arguments for the node process: its `args` split on
    /// whitespace, then `from:=to` remaps, then name and namespace.
    pub fn command_args(&self) -> Vec<String> {
        let mut out: Vec<String> = self.args.split_whitespace().map(str::to_string).collect();
        out.extend(self.remaps.iter().map(|r| format!("{}:={}", r.from, r.to)));
        out.push(format!("__name:={}", self.name.base_name()));
        out.push(format!("__ns:={}", self.ns));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlanItem {
    Node(ResolvedNode),
    Param(ParamWrite),
    Machine(MachineDef),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LaunchPlan {
    pub nodes: Vec<ResolvedNode>,
    /// In document order; later writes to the same key win.
    pub params: Vec<ParamWrite>,
    pub machines: Vec<MachineDef>,
}

impl LaunchPlan {
    pub fn node(&self, name: &str) -> Option<&ResolvedNode> {
        self.nodes.iter().find(|n| n.name.as_str() == name)
    }

    /// Final value of every parameter after all writes.
    pub fn param_values(&self) -> BTreeMap<&GraphName, &Value> {
        self.params.iter().map(|p| (&p.key, &p.value)).collect()
    }

    pub fn machine(&self, name: &str) -> Option<&MachineDef> {
        self.machines.iter().find(|m| m.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

struct Frame<'a> {
    args: &'a BTreeMap<String, String>,
    ns: GraphName,
    remaps: Vec<RemapRule>,
    dir: &'a Path,
}

struct Expander<'c> {
    ctx: &'c LaunchContext,
    out: Vec<PlanItem>,
}

fn bad_attr(at: &Location, message: String) -> LaunchError {
    LaunchError::BadAttribute {
        message,
        at: at.clone(),
    }
}

fn scope<'f>(ctx: &'f LaunchContext, args: &'f BTreeMap<String, String>) -> Scope<'f> {
    Scope {
        args,
        env: &ctx.env,
        packages: &ctx.packages,
    }
}

impl<'c> Expander<'c> {
    fn scope<'f>(&self, args: &'f BTreeMap<String, String>) -> Scope<'f>
    where
        'c: 'f,
    {
        scope(self.ctx, args)
    }

    fn bind_args(&self, doc: &LaunchDoc, passed: &BTreeMap<String, String>) -> Result<BTreeMap<String, String>> {
        for name in passed.keys() {
            match doc.arg(name) {
                None => {
                    return Err(LaunchError::UndeclaredArg {
                        name: name.clone(),
                        file: doc.file.clone(),
                    })
                }
                Some(d) if d.value.is_some() => {
                    return Err(bad_attr(&d.at, format!("arg {name:?} has a fixed value")))
                }
                Some(_) => {}
            }
        }
        let mut bound = BTreeMap::new();
        for decl in &doc.args {
            let v = if let Some(v) = &decl.value {
                Some(self.scope(&bound).subst(v)?)
            } else if let Some(v) = passed.get(&decl.name) {
                Some(v.clone())
            } else if let Some(d) = &decl.default {
                Some(self.scope(&bound).subst(d)?)
            } else {
                None
            };
            if let Some(v) = v {
                bound.insert(decl.name.clone(), v);
            }
        }
        Ok(bound)
    }

    fn enabled(&self, cond: &Condition, args: &BTreeMap<String, String>) -> Result<bool> {
        let s = self.scope(args);
        Ok(match (&cond.if_, &cond.unless) {
            (Some(c), _) => parse_condition(&s.subst(c)?)?,
            (None, Some(c)) => !parse_condition(&s.subst(c)?)?,
            (None, None) => true,
        })
    }

    fn push_ns(&self, base: &GraphName, raw: Option<&str>, args: &BTreeMap<String, String>) -> Result<GraphName> {
        let Some(raw) = raw else { return Ok(base.clone()) };
        let ns = self.scope(args).subst(raw)?;
        if ns.starts_with('/') && ns.trim_matches('/').is_empty() {
            return Ok(GraphName::root());
        }
        let ns = ns.trim_end_matches('/');
        if ns.is_empty() {
            return Ok(base.clone());
        }
        Ok(resolve_name(ns, &NamespaceCtx::in_ns(base.clone()))?)
    }

    fn file(
        &mut self,
        path: &Path,
        passed: &BTreeMap<String, String>,
        ns: GraphName,
        remaps: Vec<RemapRule>,
        depth: usize,
    ) -> Result<()> {
        let doc = parse_launch_file(path)?;
        let args = self.bind_args(&doc, passed)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let frame = Frame {
            args: &args,
            ns,
            remaps,
            dir,
        };
        self.items(&doc.items, &frame, depth)
    }

    fn items(&mut self, items: &[Item], frame: &Frame, depth: usize) -> Result<()> {
        let mut remaps = frame.remaps.clone();
        for item in items {
            match item {
                Item::Remap(r) => {
                    let s = self.scope(frame.args);
                    remaps.insert(0, RemapRule::new(s.subst(&r.from)?, s.subst(&r.to)?));
                }
                Item::Param(p) => {
                    let key = resolve_name(
                        &self.scope(frame.args).subst(&p.name)?,
                        &NamespaceCtx::in_ns(frame.ns.clone()),
                    )?;
                    let w = self.param(p, key, frame.args)?;
                    self.out.push(PlanItem::Param(w));
                }
                Item::Machine(m) => {
                    let s = self.scope(frame.args);
                    let opt = |v: &Option<String>| v.as_deref().map_or(Ok(String::new()), |v| s.subst(v));
                    self.out.push(PlanItem::Machine(MachineDef {
                        name: s.subst(&m.name)?,
                        address: s.subst(&m.address)?,
                        env_loader: opt(&m.env_loader)?,
                        user: opt(&m.user)?,
                        at: m.at.clone(),
                    }));
                }
                Item::Group(g) => {
                    if !self.enabled(&g.cond, frame.args)? {
                        continue;
                    }
                    let inner = Frame {
                        args: frame.args,
                        ns: self.push_ns(&frame.ns, g.ns.as_deref(), frame.args)?,
                        remaps: remaps.clone(),
                        dir: frame.dir,
                    };
                    self.items(&g.items, &inner, depth)?;
                }
                Item::Include(inc) => {
                    if !self.enabled(&inc.cond, frame.args)? {
                        continue;
                    }
                    if depth + 1 > self.ctx.include_limit {
                        return Err(LaunchError::IncludeDepthExceeded {
                            limit: self.ctx.include_limit,
                            at: inc.at.clone(),
                        });
                    }
                    let s = self.scope(frame.args);
                    let target = PathBuf::from(s.subst(&inc.file)?);
                    let target = if target.is_absolute() { target } else { frame.dir.join(target) };
                    let mut passed = BTreeMap::new();
                    for a in &inc.args {
                        passed.insert(a.name.clone(), s.subst(&a.value)?);
                    }
                    let ns = self.push_ns(&frame.ns, inc.ns.as_deref(), frame.args)?;
                    self.file(&target, &passed, ns, remaps.clone(), depth + 1)?;
                }
                Item::Node(n) => {
                    if !self.enabled(&n.cond, frame.args)? {
                        continue;
                    }
                    self.node(n, frame, &remaps)?;
                }
            }
        }
        Ok(())
    }

    fn param(&self, p: &ParamElem, key: GraphName, args: &BTreeMap<String, String>) -> Result<ParamWrite> {
        let s = self.scope(args);
        if let Some(cmd) = &p.command {
            return Ok(ParamWrite {
                key,
                value: Value::String(s.subst(cmd)?),
                source: ParamSource::Command,
                at: p.at.clone(),
            });
        }
        let raw = s.subst(p.value.as_deref().unwrap_or_default())?;
        let ty = match &p.ty {
            Some(t) => s.subst(t)?,
            None => "str".to_string(),
        };
        let invalid = || LaunchError::BadParamValue {
            name: key.to_string(),
            ty: ty.clone(),
            value: raw.clone(),
            at: p.at.clone(),
        };
        let value = match ty.as_str() {
            "str" | "string" => Value::String(raw.clone()),
            "double" => {
                let f: f64 = raw.trim().parse().map_err(|_| invalid())?;
                serde_json::Number::from_f64(f).map(Value::Number).ok_or_else(invalid)?
            }
            "int" => Value::from(raw.trim().parse::<i64>().map_err(|_| invalid())?),
            "bool" => match raw.trim().to_ascii_lowercase().as_str() {
                "true" | "1" => Value::Bool(true),
                "false" | "0" => Value::Bool(false),
                _ => return Err(invalid()),
            },
            other => return Err(bad_attr(&p.at, format!("unknown param type {other:?}"))),
        };
        Ok(ParamWrite {
            key,
            value,
            source: ParamSource::Value,
            at: p.at.clone(),
        })
    }

    fn node(&mut self, n: &NodeElem, frame: &Frame, scope_remaps: &[RemapRule]) -> Result<()> {
        let s = self.scope(frame.args);
        let ns = self.push_ns(&frame.ns, n.ns.as_deref(), frame.args)?;
        let raw_name = s.subst(&n.name)?;
        let name = resolve_name(&raw_name, &NamespaceCtx::in_ns(ns.clone()))?;
        let ns = name.parent();
        let ctx = NamespaceCtx::new(ns.clone(), name.clone());
        let mut rules: Vec<RemapRule> = Vec::new();
        for r in n.remaps.iter().rev() {
            rules.push(RemapRule::new(s.subst(&r.from)?, s.subst(&r.to)?));
        }
        rules.extend(scope_remaps.iter().cloned());
        let mut remaps = Vec::with_capacity(rules.len());
        let mut seen = BTreeSet::new();
        for rule in &rules {
            let (from, to) = rule.resolve(&ctx)?;
            if seen.insert(from.clone()) {
                remaps.push(RemapRule::new(from.to_string(), to.to_string()));
            }
        }
        let mut params = BTreeMap::new();
        for p in &n.params {
            let pname = s.subst(&p.name)?;
            let key = if pname.starts_with('/') {
                GraphName::parse(&pname)?
            } else {
                name.join(pname.trim_start_matches('~'))?
            };
            let w = self.param(p, key, frame.args)?;
            params.insert(w.key.clone(), w.value.clone());
            self.out.push(PlanItem::Param(w));
        }
        let output = match n.output.as_deref().map(|o| s.subst(o)).transpose()?.as_deref() {
            None | Some("log") => OutputMode::Log,
            Some("screen") => OutputMode::Screen,
            Some(other) => return Err(bad_attr(&n.at, format!("output must be screen or log, got {other:?}"))),
        };
        let respawn = match &n.respawn {
            None => false,
            Some(r) => parse_condition(&s.subst(r)?)
                .map_err(|_| bad_attr(&n.at, format!("respawn must be true or false, got {r:?}")))?,
        };
        let machine = match &n.machine {
            Some(m) => s.subst(m)?,
            None => LOCAL_MACHINE.to_string(),
        };
        let mut env = BTreeMap::new();
        env.insert("ROS_NAMESPACE".to_string(), ns.to_string());
        self.out.push(PlanItem::Node(ResolvedNode {
            pkg: s.subst(&n.pkg)?,
            node_type: s.subst(&n.node_type)?,
            name,
            ns,
            args: n.args.as_deref().map(|a| s.subst(a)).transpose()?.unwrap_or_default(),
            remaps,
            params,
            machine,
            env,
            output,
            respawn,
            at: n.at.clone(),
        }));
        Ok(())
    }
}

/// Expands `entry` and everything it includes, in document order.
pub fn expand_file(entry: &Path, args: &BTreeMap<String, String>, ctx: &LaunchContext) -> Result<Vec<PlanItem>> {
    let mut ex = Expander { ctx, out: Vec::new() };
    ex.file(entry, args, GraphName::root(), Vec::new(), 0)?;
    Ok(ex.out)
}

pub fn plan_launch(entry: &Path, cli_args: &BTreeMap<String, String>, ctx: &LaunchContext) -> Result<LaunchPlan> {
    let mut plan = LaunchPlan::default();
    for item in expand_file(entry, cli_args, ctx)? {
        match item {
            PlanItem::Node(n) => plan.nodes.push(n),
            PlanItem::Param(p) => plan.params.push(p),
            PlanItem::Machine(m) => plan.machines.push(m),
        }
    }
    let mut machines = BTreeSet::new();
    for m in &plan.machines {
        if m.name == LOCAL_MACHINE || !machines.insert(m.name.as_str()) {
            return Err(LaunchError::DuplicateMachine {
                name: m.name.clone(),
                at: m.at.clone(),
            });
        }
    }
    let mut names: BTreeMap<&GraphName, &Location> = BTreeMap::new();
    for n in &plan.nodes {
        if let Some(first) = names.insert(&n.name, &n.at) {
            return Err(LaunchError::DuplicateNodeName {
                name: n.name.to_string(),
                first: first.clone(),
                second: n.at.clone(),
            });
        }
        if n.machine != LOCAL_MACHINE && !machines.contains(n.machine.as_str()) {
            return Err(LaunchError::UnknownMachine {
                node: n.name.to_string(),
                machine: n.machine.clone(),
            });
        }
    }
    Ok(plan)
}
