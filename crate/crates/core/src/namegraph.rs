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

//! Graph name algebra.
//!
//! Every node, topic, service and parameter is addressed by a [`GraphName`]:
//! a slash-delimited absolute path such as `/tb3_0/amcl`. Raw names written
//! by users may be global (`/map`), relative (`scan`) or private (`~pose`);
//! [`resolve_name`] turns them into canonical names against a
//! [`NamespaceCtx`].

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NameError {
    #[error("malformed name {name:?}: {reason}")]
    MalformedName { name: String, reason: &'static str },
}

fn malformed(name: &str, reason: &'static str) -> NameError {
    NameError::MalformedName {
        name: name.to_string(),
        reason,
    }
}

fn valid_segment(seg: &str) -> bool {
    let mut chars = seg.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Checks a relative path (no leading slash) and returns its segments.
fn relative_segments<'a>(full: &str, rel: &'a str) -> Result<Vec<&'a str>, NameError> {
    let rel = rel.strip_suffix('/').unwrap_or(rel);
    if rel.is_empty() {
        return Ok(Vec::new());
    }
    rel.split('/')
        .map(|seg| {
            if seg.is_empty() {
                Err(malformed(full, "empty segment"))
            } else if !valid_segment(seg) {
                Err(malformed(full, "illegal characters"))
            } else {
                Ok(seg)
            }
        })
        .collect()
}

/// A canonical absolute name: `/` or `(/segment)+`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct GraphName(String);

impl GraphName {
    pub fn root() -> Self {
        GraphName("/".to_string())
    }

    /// Parses an absolute name. A single trailing slash is dropped.
    pub fn parse(text: &str) -> Result<Self, NameError> {
        let rest = text
            .strip_prefix('/')
            .ok_or_else(|| malformed(text, "not a global name"))?;
        if rest.is_empty() {
            return Ok(Self::root());
        }
        let segs = relative_segments(text, rest)?;
        Ok(Self::from_segments(&segs))
    }

    fn from_segments(segs: &[&str]) -> Self {
        if segs.is_empty() {
            return Self::root();
        }
        let mut s = String::new();
        for seg in segs {
            s.push('/');
            s.push_str(seg);
        }
        GraphName(s)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_root(&self) -> bool {
        self.0 == "/"
    }

    pub fn segments(&self) -> impl Iterator<Item = &str> {
        self.0.split('/').filter(|s| !s.is_empty())
    }

    /// The last segment, or `""` for the root.
    pub fn base_name(&self) -> &str {
        self.segments().last().unwrap_or("")
    }

    /// The enclosing namespace (`/a/b` → `/a`, `/a` → `/`).
    pub fn parent(&self) -> GraphName {
        match self.0.rfind('/') {
            Some(0) | None => Self::root(),
            Some(i) => GraphName(self.0[..i].to_string()),
        }
    }

    /// Appends a relative path.
    pub fn join(&self, rel: &str) -> Result<GraphName, NameError> {
        let segs = relative_segments(rel, rel)?;
        let mut all: Vec<&str> = self.segments().collect();
        all.extend(segs);
        Ok(Self::from_segments(&all))
    }

    /// True when `self` equals `ns` or lies strictly beneath it.
    pub fn starts_with_ns(&self, ns: &GraphName) -> bool {
        if ns.is_root() {
            return true;
        }
        self.0 == ns.0 || (self.0.starts_with(&ns.0) && self.0.as_bytes()[ns.0.len()] == b'/')
    }
}

impl fmt::Display for GraphName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for GraphName {
    type Error = NameError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        GraphName::parse(&value)
    }
}

impl From<GraphName> for String {
    fn from(value: GraphName) -> Self {
        value.0
    }
}

impl std::str::FromStr for GraphName {
    type Err = NameError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GraphName::parse(s)
    }
}

/// Resolution context: the enclosing namespace and the owning node's name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamespaceCtx {
    pub ns: GraphName,
    pub node_name: GraphName,
}

impl NamespaceCtx {
    pub fn root() -> Self {
        NamespaceCtx {
            ns: GraphName::root(),
            node_name: GraphName::root(),
        }
    }

    pub fn new(ns: GraphName, node_name: GraphName) -> Self {
        debug_assert!(node_name.starts_with_ns(&ns));
        NamespaceCtx { ns, node_name }
    }

    /// Context for a node whose full name is `node_name`; its namespace is
    /// the name's parent.
    pub fn for_node(node_name: GraphName) -> Self {
        NamespaceCtx {
            ns: node_name.parent(),
            node_name,
        }
    }

    pub fn in_ns(ns: GraphName) -> Self {
        NamespaceCtx {
            node_name: ns.clone(),
            ns,
        }
    }
}

impl Default for NamespaceCtx {
    fn default() -> Self {
        Self::root()
    }
}

/// Resolves a raw name: `/x` is global, `~x` is private to the node,
/// anything else is relative to the namespace.
pub fn resolve_name(raw: &str, ctx: &NamespaceCtx) -> Result<GraphName, NameError> {
    if raw.is_empty() {
        return Err(malformed(raw, "empty name"));
    }
    if raw.starts_with('/') {
        return GraphName::parse(raw);
    }
    if let Some(private) = raw.strip_prefix('~') {
        let private = private.strip_prefix('/').unwrap_or(private);
        return ctx.node_name.join(private).map_err(|_| malformed(raw, "illegal private name"));
    }
    if raw.ends_with('/') && raw.len() == 1 {
        return Err(malformed(raw, "empty segment"));
    }
    let segs = relative_segments(raw, raw)?;
    if segs.is_empty() {
        return Err(malformed(raw, "empty name"));
    }
    ctx.ns.join(raw)
}

/// A single `from → to` rewrite, both sides in raw (unresolved) form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemapRule {
    pub from: String,
    pub to: String,
}

impl RemapRule {
    pub fn new(from: impl Into<String>, to: impl Into<String>) -> Self {
        RemapRule {
            from: from.into(),
            to: to.into(),
        }
    }

    /// Parses the command-line `from:=to` form.
    pub fn parse_arg(arg: &str) -> Option<Self> {
        let (from, to) = arg.split_once(":=")?;
        if from.is_empty() || to.is_empty() || from.starts_with("__") {
            return None;
        }
        Some(Self::new(from, to))
    }

    /// Resolves both sides under `ctx`.
    pub fn resolve(&self, ctx: &NamespaceCtx) -> Result<(GraphName, GraphName), NameError> {
        Ok((resolve_name(&self.from, ctx)?, resolve_name(&self.to, ctx)?))
    }
}

/// Applies the first rule whose resolved `from` equals `resolved`. Rules are
/// applied once; the output is never fed back through the rule set.
pub fn apply_remaps(
    resolved: &GraphName,
    rules: &[RemapRule],
    ctx: &NamespaceCtx,
) -> Result<GraphName, NameError> {
    for rule in rules {
        let (from, to) = rule.resolve(ctx)?;
        if &from == resolved {
            return Ok(to);
        }
    }
    Ok(resolved.clone())
}

/// Prefixes a TF frame id. The global `map` frame must not be passed here.
pub fn apply_tf_prefix(frame: &str, prefix: &str) -> String {
    if prefix.is_empty() {
        frame.to_string()
    } else {
        format!("{prefix}/{frame}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gn(s: &str) -> GraphName {
        GraphName::parse(s).unwrap()
    }

    #[test]
    fn relative_name_gets_namespace() {
        let ctx = NamespaceCtx::in_ns(gn("/robot3"));
        assert_eq!(
            resolve_name("camera_publisher", &ctx).unwrap().as_str(),
            "/robot3/camera_publisher"
        );
    }

    #[test]
    fn global_name_is_kept() {
        let ctx = NamespaceCtx::in_ns(gn("/tb3_0"));
        assert_eq!(resolve_name("/map", &ctx).unwrap().as_str(), "/map");
    }

    #[test]
    fn root_namespace_is_identity_prefix() {
        assert_eq!(resolve_name("scan", &NamespaceCtx::root()).unwrap().as_str(), "/scan");
    }

    #[test]
    fn private_name_expands_against_node() {
        let ctx = NamespaceCtx::new(gn("/tb3_0"), gn("/tb3_0/amcl"));
        assert_eq!(resolve_name("~pose", &ctx).unwrap().as_str(), "/tb3_0/amcl/pose");
        assert_eq!(resolve_name("~/pose", &ctx).unwrap().as_str(), "/tb3_0/amcl/pose");
    }

    #[test]
    fn malformed_names() {
        let ctx = NamespaceCtx::root();
        for bad in ["", "a//b", "//a", "1abc", "a-b", "/a b", "/", "~1x"] {
            if bad == "/" {
                assert!(resolve_name(bad, &ctx).unwrap().is_root());
                continue;
            }
            assert!(resolve_name(bad, &ctx).is_err(), "{bad:?} should fail");
        }
    }

    #[test]
    fn trailing_slash_is_canonicalized() {
        assert_eq!(gn("/a/b/").as_str(), "/a/b");
        assert!(GraphName::parse("/a//").is_err());
    }

    #[test]
    fn parent_and_base() {
        let n = gn("/tb3_0/amcl");
        assert_eq!(n.parent().as_str(), "/tb3_0");
        assert_eq!(n.base_name(), "amcl");
        assert!(gn("/a").parent().is_root());
        assert!(n.starts_with_ns(&gn("/tb3_0")));
        assert!(!gn("/tb3_01/x").starts_with_ns(&gn("/tb3_0")));
    }

    #[test]
    fn remap_listing_rule() {
        let ctx = NamespaceCtx::in_ns(gn("/tb3_0"));
        let rules = vec![RemapRule::new("scan", "tb3_0/scan")];
        // "tb3_0/scan" resolved in /tb3_0 is /tb3_0/tb3_0/scan; the rule keys on
        // the resolved `from` which is /tb3_0/scan.
        let out = apply_remaps(&gn("/tb3_0/scan"), &rules, &ctx).unwrap();
        assert_eq!(out.as_str(), "/tb3_0/tb3_0/scan");
        let rules = vec![RemapRule::new("scan", "/tb3_0/scan")];
        let out = apply_remaps(&gn("/tb3_0/scan"), &rules, &ctx).unwrap();
        assert_eq!(out.as_str(), "/tb3_0/scan");
    }

    #[test]
    fn remap_empty_rules_is_identity() {
        let out = apply_remaps(&gn("/odom"), &[], &NamespaceCtx::in_ns(gn("/x"))).unwrap();
        assert_eq!(out.as_str(), "/odom");
    }

    #[test]
    fn remap_first_match_wins_single_pass() {
        let rules = vec![
            RemapRule::new("a", "b"),
            RemapRule::new("a", "c"),
            RemapRule::new("b", "d"),
        ];
        let out = apply_remaps(&gn("/a"), &rules, &NamespaceCtx::root()).unwrap();
        assert_eq!(out.as_str(), "/b");
    }

    #[test]
    fn tf_prefix() {
        assert_eq!(apply_tf_prefix("base_scan", "tb3_0"), "tb3_0/base_scan");
        assert_eq!(apply_tf_prefix("odom", ""), "odom");
        assert_eq!(apply_tf_prefix("base_footprint", "tb3_2"), "tb3_2/base_footprint");
    }

    #[test]
    fn remap_arg_parsing() {
        assert_eq!(RemapRule::parse_arg("scan:=/s"), Some(RemapRule::new("scan", "/s")));
        assert_eq!(RemapRule::parse_arg("__name:=x"), None);
        assert_eq!(RemapRule::parse_arg("plain"), None);
    }

    /// Reference expansion written independently: string concatenation on the
    /// namespace text.
    fn hand_expand(raw: &str, ns: &str, node: &str) -> String {
        let join = |base: &str, rel: &str| {
            if base == "/" {
                format!("/{rel}")
            } else {
                format!("{base}/{rel}")
            }
        };
        if raw.starts_with('/') {
            raw.to_string()
        } else if let Some(p) = raw.strip_prefix('~') {
            join(node, p)
        } else {
            join(ns, raw)
        }
    }

    fn seg() -> impl Strategy<Value = String> {
        "[ab][ab0_]{0,2}"
    }

    fn rel() -> impl Strategy<Value = String> {
        prop::collection::vec(seg(), 1..4).prop_map(|v| v.join("/"))
    }

    fn ns() -> impl Strategy<Value = String> {
        prop::collection::vec(seg(), 0..3).prop_map(|v| {
            if v.is_empty() {
                "/".to_string()
            } else {
                format!("/{}", v.join("/"))
            }
        })
    }

    fn raw() -> impl Strategy<Value = String> {
        (0..3u8, rel()).prop_map(|(k, r)| match k {
            0 => r,
            1 => format!("/{r}"),
            _ => format!("~{r}"),
        })
    }

    proptest! {
        #[test]
        fn matches_hand_expansion(raw in raw(), ns in ns(), leaf in seg()) {
            let ns_name = gn(&ns);
            let node = ns_name.join(&leaf).unwrap();
            let ctx = NamespaceCtx::new(ns_name, node.clone());
            let got = resolve_name(&raw, &ctx).unwrap();
            prop_assert_eq!(got.as_str(), hand_expand(&raw, &ns, node.as_str()));
        }

        #[test]
        fn resolution_is_idempotent(raw in raw(), ns in ns()) {
            let ctx = NamespaceCtx::in_ns(gn(&ns));
            let once = resolve_name(&raw, &ctx).unwrap();
            let twice = resolve_name(once.as_str(), &ctx).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn relative_names_stay_in_namespace(r in rel(), ns in ns()) {
            let ns_name = gn(&ns);
            let got = resolve_name(&r, &NamespaceCtx::in_ns(ns_name.clone())).unwrap();
            prop_assert!(got.starts_with_ns(&ns_name));
            prop_assert_ne!(got, ns_name);
        }

        #[test]
        fn distinct_namespaces_never_collide(r in rel(), a in ns(), b in ns()) {
            prop_assume!(a != b);
            let ra = resolve_name(&r, &NamespaceCtx::in_ns(gn(&a))).unwrap();
            let rb = resolve_name(&r, &NamespaceCtx::in_ns(gn(&b))).unwrap();
            prop_assert_ne!(ra, rb);
        }

        #[test]
        fn remap_matches_ordered_scan(
            target in rel(),
            rules in prop::collection::vec((rel(), rel()), 0..5),
        ) {
            let ctx = NamespaceCtx::root();
            let rules: Vec<RemapRule> = rules.into_iter().map(|(f, t)| RemapRule::new(f, t)).collect();
            let resolved = gn(&format!("/{target}"));
            let expected = rules
                .iter()
                .find(|r| format!("/{}", r.from) == resolved.as_str())
                .map(|r| format!("/{}", r.to))
                .unwrap_or_else(|| resolved.to_string());
            let got = apply_remaps(&resolved, &rules, &ctx).unwrap();
            prop_assert_eq!(got.as_str(), expected);
        }
    }
}
