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

//! XML → [`LaunchDoc`]. Attribute values are kept raw; substitution happens
//! during expansion.

use std::collections::BTreeMap;
use std::path::Path;

use roxmltree::{Document, Node};
use serde::{Deserialize, Serialize};

use super::{LaunchError, Location, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgDecl {
    pub name: String,
    /// Overridable by the caller.
    pub default: Option<String>,
    /// Fixed; the caller may not override it.
    pub value: Option<String>,
    pub doc: Option<String>,
    pub at: Location,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub if_: Option<String>,
    pub unless: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    #[default]
    Log,
    Screen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemapElem {
    pub from: String,
    pub to: String,
    pub at: Location,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamElem {
    pub name: String,
    pub value: Option<String>,
    pub command: Option<String>,
    pub ty: Option<String>,
    pub at: Location,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeElem {
    pub pkg: String,
    pub node_type: String,
    pub name: String,
    pub ns: Option<String>,
    pub args: Option<String>,
    pub output: Option<String>,
    pub respawn: Option<String>,
    pub machine: Option<String>,
    pub cond: Condition,
    pub remaps: Vec<RemapElem>,
    pub params: Vec<ParamElem>,
    pub at: Location,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncludeArg {
    pub name: String,
    pub value: String,
    pub at: Location,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncludeElem {
    pub file: String,
    pub ns: Option<String>,
    pub cond: Condition,
    pub args: Vec<IncludeArg>,
    pub at: Location,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupElem {
    pub ns: Option<String>,
    pub cond: Condition,
    pub items: Vec<Item>,
    pub at: Location,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineElem {
    pub name: String,
    pub address: String,
    pub env_loader: Option<String>,
    pub user: Option<String>,
    pub at: Location,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Item {
    Node(NodeElem),
    Param(ParamElem),
    Remap(RemapElem),
    Include(IncludeElem),
    Group(GroupElem),
    Machine(MachineElem),
}

/// One parsed launch file.
///
/// `<arg>` declarations must be direct children of `<launch>` and are bound
/// in document order before any item is expanded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaunchDoc {
    pub file: String,
    pub args: Vec<ArgDecl>,
    pub items: Vec<Item>,
}

impl LaunchDoc {
    pub fn arg(&self, name: &str) -> Option<&ArgDecl> {
        self.args.iter().find(|a| a.name == name)
    }
}

pub fn parse_launch(text: &str) -> Result<LaunchDoc> {
    parse_named(text, "<string>")
}

pub fn parse_launch_file(path: &Path) -> Result<LaunchDoc> {
    let text = std::fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            LaunchError::FileNotFound(path.to_path_buf())
        } else {
            LaunchError::Io {
                path: path.to_path_buf(),
                source: e,
            }
        }
    })?;
    let label = path.display().to_string();
    let text = String::from_utf8(text).map_err(|e| LaunchError::Xml {
        file: label.clone(),
        line: 1,
        col: 1,
        message: format!("not UTF-8: {e}"),
    })?;
    parse_named(&text, &label)
}

pub(crate) fn parse_named(text: &str, label: &str) -> Result<LaunchDoc> {
    let doc = Document::parse(text).map_err(|e| LaunchError::Xml {
        file: label.to_string(),
        line: e.pos().row,
        col: e.pos().col,
        message: e.to_string(),
    })?;
    let p = Parser { doc: &doc, file: label };
    let root = doc.root_element();
    if root.tag_name().name() != "launch" {
        return Err(p.unknown(root));
    }
    let mut args: Vec<ArgDecl> = Vec::new();
    let mut seen: BTreeMap<String, Location> = BTreeMap::new();
    let mut items = Vec::new();
    for child in root.children().filter(Node::is_element) {
        if child.tag_name().name() == "arg" {
            let decl = p.arg_decl(child)?;
            if let Some(first) = seen.get(&decl.name) {
                return Err(LaunchError::DuplicateArgDecl {
                    name: decl.name,
                    first: first.clone(),
                    at: decl.at,
                });
            }
            seen.insert(decl.name.clone(), decl.at.clone());
            args.push(decl);
        } else {
            items.push(p.item(child, "launch")?);
        }
    }
    Ok(LaunchDoc {
        file: label.to_string(),
        args,
        items,
    })
}

struct Parser<'a, 'i> {
    doc: &'a Document<'i>,
    file: &'a str,
}

impl Parser<'_, '_> {
    fn loc(&self, n: Node) -> Location {
        let pos = self.doc.text_pos_at(n.range().start);
        Location {
            file: self.file.to_string(),
            line: pos.row,
            col: pos.col,
        }
    }

    fn unknown(&self, n: Node) -> LaunchError {
        LaunchError::UnknownElement {
            element: n.tag_name().name().to_string(),
            at: self.loc(n),
        }
    }

    fn misplaced(&self, n: Node, parent: &str) -> LaunchError {
        LaunchError::Misplaced {
            element: n.tag_name().name().to_string(),
            parent: parent.to_string(),
            at: self.loc(n),
        }
    }

    fn req(&self, n: Node, attr: &str) -> Result<String> {
        n.attribute(attr)
            .map(str::to_string)
            .ok_or_else(|| LaunchError::MissingAttribute {
                element: n.tag_name().name().to_string(),
                attr: attr.to_string(),
                at: self.loc(n),
            })
    }

    fn cond(&self, n: Node) -> Result<Condition> {
        let c = Condition {
            if_: opt(n, "if"),
            unless: opt(n, "unless"),
        };
        if c.if_.is_some() && c.unless.is_some() {
            return Err(LaunchError::BadAttribute {
                message: "`if` and `unless` are mutually exclusive".into(),
                at: self.loc(n),
            });
        }
        Ok(c)
    }

    fn no_cond(&self, n: Node) -> Result<()> {
        if n.attribute("if").is_some() || n.attribute("unless").is_some() {
            return Err(LaunchError::BadAttribute {
                message: format!("<{}> does not take `if`/`unless`", n.tag_name().name()),
                at: self.loc(n),
            });
        }
        Ok(())
    }

    fn no_children(&self, n: Node) -> Result<()> {
        match n.children().find(Node::is_element) {
            Some(c) => Err(self.misplaced(c, n.tag_name().name())),
            None => Ok(()),
        }
    }

    fn arg_decl(&self, n: Node) -> Result<ArgDecl> {
        self.no_cond(n)?;
        self.no_children(n)?;
        let decl = ArgDecl {
            name: self.req(n, "name")?,
            default: opt(n, "default"),
            value: opt(n, "value"),
            doc: opt(n, "doc"),
            at: self.loc(n),
        };
        if decl.default.is_some() && decl.value.is_some() {
            return Err(LaunchError::BadAttribute {
                message: format!("arg {:?} has both `default` and `value`", decl.name),
                at: decl.at,
            });
        }
        Ok(decl)
    }

    fn remap(&self, n: Node) -> Result<RemapElem> {
        self.no_cond(n)?;
        self.no_children(n)?;
        Ok(RemapElem {
            from: self.req(n, "from")?,
            to: self.req(n, "to")?,
            at: self.loc(n),
        })
    }

    fn param(&self, n: Node) -> Result<ParamElem> {
        self.no_cond(n)?;
        self.no_children(n)?;
        let p = ParamElem {
            name: self.req(n, "name")?,
            value: opt(n, "value"),
            command: opt(n, "command"),
            ty: opt(n, "type"),
            at: self.loc(n),
        };
        if p.value.is_some() == p.command.is_some() {
            return Err(LaunchError::BadAttribute {
                message: format!("param {:?} needs exactly one of `value` or `command`", p.name),
                at: p.at,
            });
        }
        Ok(p)
    }

    fn item(&self, n: Node, parent: &str) -> Result<Item> {
        let at = self.loc(n);
        Ok(match n.tag_name().name() {
            "node" => {
                let mut remaps = Vec::new();
                let mut params = Vec::new();
                for c in n.children().filter(Node::is_element) {
                    match c.tag_name().name() {
                        "remap" => remaps.push(self.remap(c)?),
                        "param" => params.push(self.param(c)?),
                        "launch" | "arg" | "node" | "include" | "group" | "machine" => {
                            return Err(self.misplaced(c, "node"))
                        }
                        _ => return Err(self.unknown(c)),
                    }
                }
                Item::Node(NodeElem {
                    pkg: self.req(n, "pkg")?,
                    node_type: self.req(n, "type")?,
                    name: self.req(n, "name")?,
                    ns: opt(n, "ns"),
                    args: opt(n, "args"),
                    output: opt(n, "output"),
                    respawn: opt(n, "respawn"),
                    machine: opt(n, "machine"),
                    cond: self.cond(n)?,
                    remaps,
                    params,
                    at,
                })
            }
            "param" => Item::Param(self.param(n)?),
            "remap" => Item::Remap(self.remap(n)?),
            "include" => {
                let mut args = Vec::new();
                for c in n.children().filter(Node::is_element) {
                    match c.tag_name().name() {
                        "arg" => {
                            self.no_children(c)?;
                            args.push(IncludeArg {
                                name: self.req(c, "name")?,
                                value: self.req(c, "value")?,
                                at: self.loc(c),
                            });
                        }
                        "launch" | "node" | "param" | "remap" | "include" | "group"
                        | "machine" => return Err(self.misplaced(c, "include")),
                        _ => return Err(self.unknown(c)),
                    }
                }
                Item::Include(IncludeElem {
                    file: self.req(n, "file")?,
                    ns: opt(n, "ns"),
                    cond: self.cond(n)?,
                    args,
                    at,
                })
            }
            "group" => {
                let mut items = Vec::new();
                for c in n.children().filter(Node::is_element) {
                    items.push(self.item(c, "group")?);
                }
                Item::Group(GroupElem {
                    ns: opt(n, "ns"),
                    cond: self.cond(n)?,
                    items,
                    at,
                })
            }
            "machine" => {
                self.no_cond(n)?;
                self.no_children(n)?;
                Item::Machine(MachineElem {
                    name: self.req(n, "name")?,
                    address: self.req(n, "address")?,
                    env_loader: opt(n, "env-loader"),
                    user: opt(n, "user"),
                    at,
                })
            }
            "launch" | "arg" => return Err(self.misplaced(n, parent)),
            _ => return Err(self.unknown(n)),
        })
    }
}

fn opt(n: Node, attr: &str) -> Option<String> {
    n.attribute(attr).map(str::to_string)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIRST_TB3: &str = r#"<launch>
  <arg name="model" default="$(env TURTLEBOT3_MODEL)" doc="model type [burger, waffle, waffle_pi]"/>
  <arg name="first_tb3"		default="tb3_0"/>
  <arg name="second_tb3"	default="tb3_1"/>
  <arg name="third_tb3"		default="tb3_2"/>

  <arg name="first_tb3_x_pos"	default="-7.0"/>
  <arg name="first_tb3_y_pos"	default="-1.0"/>
  <arg name="first_tb3_z_pos"	default=" 0.0"/>
  <arg name="first_tb3_yaw"   default=" 1.57"/>
</launch>"#;

    #[test]
    fn turtlebot_arg_block() {
        let doc = parse_launch(FIRST_TB3).unwrap();
        assert_eq!(doc.args.len(), 8);
        assert!(doc.items.is_empty());
        assert_eq!(doc.arg("first_tb3_x_pos").unwrap().default.as_deref(), Some("-7.0"));
        assert_eq!(doc.arg("first_tb3_yaw").unwrap().default.as_deref(), Some(" 1.57"));
        let model = doc.arg("model").unwrap();
        assert_eq!(model.default.as_deref(), Some("$(env TURTLEBOT3_MODEL)"));
        assert_eq!(model.doc.as_deref(), Some("model type [burger, waffle, waffle_pi]"));
        assert_eq!(model.at.line, 2);
    }

    #[test]
    fn empty_launch() {
        let doc = parse_launch("<launch/>").unwrap();
        assert!(doc.args.is_empty() && doc.items.is_empty());
    }

    #[test]
    fn unknown_element_has_location() {
        let err = parse_launch("<launch>\n  <foo/>\n</launch>").unwrap_err();
        match err {
            LaunchError::UnknownElement { element, at } => {
                assert_eq!(element, "foo");
                assert_eq!((at.line, at.col), (2, 3));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_arg() {
        let err = parse_launch(r#"<launch><arg name="a"/><arg name="a" default="1"/></launch>"#)
            .unwrap_err();
        assert!(matches!(err, LaunchError::DuplicateArgDecl { name, .. } if name == "a"));
    }

    #[test]
    fn xml_error_position() {
        let err = parse_launch("<launch>\n<node pkg=\"a\"\n</launch>").unwrap_err();
        match err {
            LaunchError::Xml { line, .. } => assert!(line >= 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_root() {
        assert!(matches!(
            parse_launch("<robot/>").unwrap_err(),
            LaunchError::UnknownElement { .. }
        ));
    }

    #[test]
    fn nested_structure() {
        let doc = parse_launch(
            r#"<launch>
  <machine name="ws" address="10.0.0.2" env-loader="/opt/ros/melodic/env.sh" user="me"/>
  <group ns = "$(arg first_tb3)" if="true">
    <param name="robot_description" command="xacro x.urdf"/>
    <node pkg="robot_state_publisher" type="robot_state_publisher" name="robot_state_publisher" output="screen">
      <param name="publish_frequency" type="double" value="50.0" />
      <remap from="scan" to="/scan"/>
    </node>
  </group>
  <include file="x.launch"><arg name="num" value="3"/></include>
</launch>"#,
        )
        .unwrap();
        assert_eq!(doc.items.len(), 3);
        let Item::Group(g) = &doc.items[1] else { panic!() };
        assert_eq!(g.ns.as_deref(), Some("$(arg first_tb3)"));
        assert_eq!(g.cond.if_.as_deref(), Some("true"));
        let Item::Node(n) = &g.items[1] else { panic!() };
        assert_eq!(n.params[0].ty.as_deref(), Some("double"));
        assert_eq!(n.remaps[0].to, "/scan");
        let Item::Machine(m) = &doc.items[0] else { panic!() };
        assert_eq!(m.env_loader.as_deref(), Some("/opt/ros/melodic/env.sh"));
        let Item::Include(i) = &doc.items[2] else { panic!() };
        assert_eq!(i.args[0].value, "3");
    }

    #[test]
    fn arg_outside_launch_is_misplaced() {
        let err = parse_launch(r#"<launch><group><arg name="x"/></group></launch>"#).unwrap_err();
        assert!(matches!(err, LaunchError::Misplaced { .. }));
    }

    #[test]
    fn param_needs_one_source() {
        let err = parse_launch(r#"<launch><param name="x"/></launch>"#).unwrap_err();
        assert!(matches!(err, LaunchError::BadAttribute { .. }));
    }
}
