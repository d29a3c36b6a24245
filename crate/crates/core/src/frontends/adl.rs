//! A strict subset of the XML-based Fractal ADL.
//!
//! Supported elements: `definition` (root), `component` (nestable),
//! `interface`, `attributes`/`attribute` and `binding`. A component's
//! `definition` attribute names its component type; the `interface`
//! children of the component declare that type's ports. Nested components
//! become containment records. Attribute kinds are inferred from the
//! literal: `true`/`false` is boolean, a decimal integer is integer, and
//! anything else is a string.

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

use roxmltree::{Document, Node, ParsingOptions};

use super::{DiagnosticCode, LocationMap, ParseDiagnostic, ParseResult};
use crate::model::{
    Binding, ComponentType, Configuration, Containment, Direction, ElementRef, Instance, Literal,
    PortDecl,
};

const ELEMENTS: [&str; 6] = [
    "definition",
    "component",
    "interface",
    "attributes",
    "attribute",
    "binding",
];

fn infer_literal(value: &str) -> Literal {
    match value {
        "true" => Literal::Boolean(true),
        "false" => Literal::Boolean(false),
        v => match v.parse::<i64>() {
            Ok(i) if !v.starts_with('+') => Literal::Integer(i),
            _ => Literal::String(v.to_string()),
        },
    }
}

struct AdlReader<'a, 'input> {
    doc: &'a Document<'input>,
    locations: LocationMap,
    config: Configuration,
    diagnostics: Vec<ParseDiagnostic>,
    /// Instances whose interface list defined the ports of their type.
    type_origin: BTreeMap<String, String>,
}

impl<'a, 'input> AdlReader<'a, 'input> {
    fn pos(&self, node: Node) -> (usize, usize) {
        let p = self.doc.text_pos_at(node.range().start);
        (p.row as usize, p.col as usize)
    }

    fn report(&mut self, node: Node, code: DiagnosticCode, message: String) {
        let (line, column) = self.pos(node);
        self.diagnostics.push(ParseDiagnostic {
            location: self.locations.at(line, column),
            code,
            message,
        });
    }

    /// Checks the element's attribute names and returns the required ones.
    fn attrs<const N: usize>(
        &mut self,
        node: Node<'a, 'input>,
        required: [&str; N],
    ) -> Option<[&'a str; N]> {
        let mut ok = true;
        for attr in node.attributes() {
            if !required.contains(&attr.name()) || attr.namespace().is_some() {
                self.report(
                    node,
                    DiagnosticCode::Syntax,
                    format!(
                        "unexpected attribute '{}' on <{}>",
                        attr.name(),
                        node.tag_name().name()
                    ),
                );
                ok = false;
            }
        }
        let mut values = [""; N];
        for (slot, name) in values.iter_mut().zip(required) {
            match node.attribute(name) {
                Some(v) => *slot = v,
                None => {
                    self.report(
                        node,
                        DiagnosticCode::Syntax,
                        format!("<{}> requires attribute '{name}'", node.tag_name().name()),
                    );
                    ok = false;
                }
            }
        }
        ok.then_some(values)
    }

    /// Element children, reporting stray text and unsupported elements.
    fn children(&mut self, node: Node<'a, 'input>) -> Vec<Node<'a, 'input>> {
        let mut out = Vec::new();
        for child in node.children() {
            if child.is_text() {
                if !child.text().unwrap_or("").trim().is_empty() {
                    self.report(
                        child,
                        DiagnosticCode::Syntax,
                        "unexpected text content".into(),
                    );
                }
            } else if child.is_element() {
                let name = child.tag_name().name();
                if !ELEMENTS.contains(&name) || child.tag_name().namespace().is_some() {
                    self.report(
                        child,
                        DiagnosticCode::UnsupportedElement,
                        format!("element <{name}> is not supported"),
                    );
                } else {
                    out.push(child);
                }
            }
        }
        out
    }

    fn definition(&mut self, root: Node<'a, 'input>) {
        self.attrs(root, ["name"]);
        for child in self.children(root) {
            match child.tag_name().name() {
                "component" => self.component(child, None),
                "binding" => self.binding(child),
                other => self.report(
                    child,
                    DiagnosticCode::Syntax,
                    format!("<{other}> is not allowed directly inside <definition>"),
                ),
            }
        }
    }

    fn component(&mut self, node: Node<'a, 'input>, parent: Option<&str>) {
        let Some([id, type_name]) = self.attrs(node, ["name", "definition"]) else {
            return;
        };
        let (line, column) = self.pos(node);
        if self.config.instance(id).is_some() {
            self.report(
                node,
                DiagnosticCode::Duplicate,
                format!("component '{id}' declared more than once"),
            );
            return;
        }
        self.locations
            .record(ElementRef::Instance(id.to_string()), line, column);
        if let Some(parent) = parent {
            self.locations.record(
                ElementRef::Containment {
                    parent: parent.to_string(),
                    child: id.to_string(),
                },
                line,
                column,
            );
            self.config
                .containments
                .push(Containment::new(parent, id, id));
        }

        let mut ports: Vec<PortDecl> = Vec::new();
        let mut values = BTreeMap::new();
        let mut nested = Vec::new();
        for child in self.children(node) {
            match child.tag_name().name() {
                "interface" => {
                    if let Some(port) = self.interface(child, type_name) {
                        if ports.iter().any(|p| p.name == port.name) {
                            self.report(
                                child,
                                DiagnosticCode::Duplicate,
                                format!(
                                    "interface '{}' declared more than once on '{id}'",
                                    port.name
                                ),
                            );
                        } else {
                            ports.push(port);
                        }
                    }
                }
                "attributes" => self.attributes(child, id, &mut values),
                "component" => nested.push(child),
                "binding" => self.binding(child),
                other => self.report(
                    child,
                    DiagnosticCode::Syntax,
                    format!("<{other}> is not allowed inside <component>"),
                ),
            }
        }

        self.merge_type(node, id, type_name, ports, &values);
        let mut instance = Instance::new(id, type_name);
        instance.attribute_values = values;
        self.config.instances.push(instance);

        for child in nested {
            self.component(child, Some(id));
        }
    }

    fn interface(&mut self, node: Node<'a, 'input>, type_name: &str) -> Option<PortDecl> {
        let [name, role, signature] = self.attrs(node, ["name", "role", "signature"])?;
        let direction = match role {
            "server" => Direction::Provided,
            "client" => Direction::Required,
            other => {
                self.report(
                    node,
                    DiagnosticCode::Syntax,
                    format!("interface role must be 'server' or 'client', found '{other}'"),
                );
                return None;
            }
        };
        let (line, column) = self.pos(node);
        self.config.declare_interface(signature);
        self.locations
            .record(ElementRef::Interface(signature.to_string()), line, column);
        self.locations.record(
            ElementRef::Port {
                type_name: type_name.to_string(),
                port: name.to_string(),
            },
            line,
            column,
        );
        Some(PortDecl {
            name: name.to_string(),
            direction,
            interface: signature.to_string(),
        })
    }

    fn attributes(
        &mut self,
        node: Node<'a, 'input>,
        instance: &str,
        values: &mut BTreeMap<String, Literal>,
    ) {
        self.attrs(node, []);
        for child in self.children(node) {
            if child.tag_name().name() != "attribute" {
                self.report(
                    child,
                    DiagnosticCode::Syntax,
                    format!(
                        "<{}> is not allowed inside <attributes>",
                        child.tag_name().name()
                    ),
                );
                continue;
            }
            let Some([name, value]) = self.attrs(child, ["name", "value"]) else {
                continue;
            };
            if !self.children(child).is_empty() {
                self.report(
                    child,
                    DiagnosticCode::Syntax,
                    "<attribute> must be empty".into(),
                );
            }
            if values.contains_key(name) {
                self.report(
                    child,
                    DiagnosticCode::Duplicate,
                    format!("attribute '{name}' assigned more than once on '{instance}'"),
                );
                continue;
            }
            let (line, column) = self.pos(child);
            self.locations.record(
                ElementRef::AttributeValue {
                    instance: instance.to_string(),
                    name: name.to_string(),
                },
                line,
                column,
            );
            values.insert(name.to_string(), infer_literal(value));
        }
    }

    /// Folds one component's view of its type into the configuration.
    fn merge_type(
        &mut self,
        node: Node<'a, 'input>,
        id: &str,
        type_name: &str,
        mut ports: Vec<PortDecl>,
        values: &BTreeMap<String, Literal>,
    ) {
        ports.sort();
        let (line, column) = self.pos(node);
        let existing = self.config.types.iter().position(|t| t.name == type_name);
        let index = match existing {
            Some(i) => {
                let mut known = self.config.types[i].ports.clone();
                known.sort();
                if known != ports {
                    let origin = self.type_origin[type_name].clone();
                    self.report(
                        node,
                        DiagnosticCode::Invalid,
                        format!(
                            "component '{id}' declares interfaces of type '{type_name}' differently from '{origin}'"
                        ),
                    );
                }
                i
            }
            None => {
                self.locations
                    .record(ElementRef::Type(type_name.to_string()), line, column);
                self.type_origin
                    .insert(type_name.to_string(), id.to_string());
                let mut ty = ComponentType::new(type_name);
                ty.ports = ports;
                self.config.types.push(ty);
                self.config.types.len() - 1
            }
        };
        let mut conflicts = Vec::new();
        let ty = &mut self.config.types[index];
        for (name, value) in values {
            let kind = value.kind();
            match ty.attributes.get(name) {
                Some(k) if *k != kind => conflicts.push(format!(
                    "attribute '{name}' of type '{type_name}' is {k} elsewhere but {kind} on '{id}'"
                )),
                Some(_) => {}
                None => {
                    ty.attributes.insert(name.clone(), kind);
                }
            }
        }
        for message in conflicts {
            self.report(node, DiagnosticCode::Invalid, message);
        }
    }

    fn binding(&mut self, node: Node<'a, 'input>) {
        let Some([client, server]) = self.attrs(node, ["client", "server"]) else {
            return;
        };
        let endpoint = |this: &mut Self, value: &str| -> Option<(String, String)> {
            match value.split_once('.') {
                Some((c, p)) if !c.is_empty() && !p.is_empty() && !p.contains('.') => {
                    Some((c.to_string(), p.to_string()))
                }
                _ => {
                    this.report(
                        node,
                        DiagnosticCode::Syntax,
                        format!(
                            "binding endpoint '{value}' must have the form component.interface"
                        ),
                    );
                    None
                }
            }
        };
        let (Some((ci, cp)), Some((si, sp))) = (endpoint(self, client), endpoint(self, server))
        else {
            return;
        };
        let (line, column) = self.pos(node);
        self.locations.record(
            ElementRef::Binding {
                client: ci.clone(),
                port: cp.clone(),
            },
            line,
            column,
        );
        self.config.bindings.push(Binding {
            client_instance: ci,
            client_port: cp,
            server_instance: si,
            server_port: sp,
        });
    }
}

/// Parses ADL text. Diagnostics refer to the file `<input>`.
pub fn parse_adl(xml: &str) -> ParseResult {
    parse_adl_from("<input>", xml)
}

/// Parses ADL text read from `file`.
pub fn parse_adl_from(file: impl Into<PathBuf>, xml: &str) -> ParseResult {
    let locations = LocationMap::new(file.into());
    let options = ParsingOptions {
        allow_dtd: true,
        ..ParsingOptions::default()
    };
    let doc = match Document::parse_with_options(xml, options) {
        Ok(doc) => doc,
        Err(e) => {
            let p = e.pos();
            return Err(vec![ParseDiagnostic {
                location: locations.at(p.row as usize, p.col as usize),
                code: DiagnosticCode::Syntax,
                message: e.to_string(),
            }]);
        }
    };
    let mut reader = AdlReader {
        doc: &doc,
        locations,
        config: Configuration::default(),
        diagnostics: Vec::new(),
        type_origin: BTreeMap::new(),
    };
    let root = doc.root_element();
    match root.tag_name().name() {
        "definition" if root.tag_name().namespace().is_none() => reader.definition(root),
        name if ELEMENTS.contains(&name) => reader.report(
            root,
            DiagnosticCode::Syntax,
            format!("root element must be <definition>, found <{name}>"),
        ),
        name => reader.report(
            root,
            DiagnosticCode::UnsupportedElement,
            format!("element <{name}> is not supported"),
        ),
    }
    if !reader.diagnostics.is_empty() {
        let mut seen = HashSet::new();
        reader
            .diagnostics
            .retain(|d| seen.insert((d.location.clone(), d.message.clone())));
        return Err(reader.diagnostics);
    }
    reader.locations.check(reader.config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontends::parse_native;

    pub(crate) const CLIENT_SERVER: &str = r#"<?xml version="1.0"?>
<definition name="ClientServer">
  <component name="srv" definition="Server">
    <interface name="s" role="server" signature="IService"/>
    <attributes>
      <attribute name="nom" value="the-server"/>
    </attributes>
  </component>
  <component name="cli" definition="Client">
    <interface name="s" role="client" signature="IService"/>
    <attributes>
      <attribute name="nom" value="the-client"/>
    </attributes>
  </component>
  <binding client="cli.s" server="srv.s"/>
</definition>
"#;

    #[test]
    fn parses_client_server() {
        let config = parse_adl(CLIENT_SERVER).unwrap();
        assert_eq!(config.instances.len(), 2);
        assert_eq!(config.bindings, vec![Binding::new("cli", "s", "srv", "s")]);
        assert_eq!(
            config.canonical(),
            crate::model::client_server().canonical()
        );
    }

    #[test]
    fn nesting_produces_containment() {
        let xml = r#"<definition name="App">
  <component name="outer" definition="Composite">
    <component name="inner" definition="Leaf"/>
  </component>
</definition>"#;
        let config = parse_adl(xml).unwrap();
        assert_eq!(
            config.containments,
            vec![Containment::new("outer", "inner", "inner")]
        );
        assert!(parse_native(&crate::frontends::emit_native(&config)).is_ok());
    }

    #[test]
    fn unsupported_element_has_location() {
        let xml = "<definition name=\"App\">\n  <content class=\"x.Impl\"/>\n</definition>";
        let diags = parse_adl(xml).unwrap_err();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].code, DiagnosticCode::UnsupportedElement);
        assert_eq!((diags[0].location.line, diags[0].location.column), (2, 3));
    }

    #[test]
    fn malformed_xml() {
        let diags = parse_adl("<definition name=\"x\">\n<component").unwrap_err();
        assert_eq!(diags[0].code, DiagnosticCode::Syntax);
        assert!(diags[0].location.line >= 1);
    }

    #[test]
    fn unresolved_and_duplicate() {
        let xml = CLIENT_SERVER.replace("server=\"srv.s\"", "server=\"srv.t\"");
        let diags = parse_adl(&xml).unwrap_err();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].code, DiagnosticCode::Unresolved);
        assert_eq!(diags[0].location.line, 15);

        let xml = CLIENT_SERVER.replace("name=\"cli\"", "name=\"srv\"");
        let diags = parse_adl(&xml).unwrap_err();
        assert_eq!(diags[0].code, DiagnosticCode::Duplicate);
    }

    #[test]
    fn structural_errors() {
        let diags =
            parse_adl("<definition name=\"a\"><component name=\"x\"/></definition>").unwrap_err();
        assert_eq!(diags[0].code, DiagnosticCode::Syntax);

        let diags = parse_adl(
            "<definition name=\"a\"><component name=\"x\" definition=\"X\"><interface name=\"p\" role=\"both\" signature=\"I\"/></component></definition>",
        )
        .unwrap_err();
        assert_eq!(diags[0].code, DiagnosticCode::Syntax);

        let diags =
            parse_adl("<definition name=\"a\"><binding client=\"x\" server=\"y.p\"/></definition>")
                .unwrap_err();
        assert_eq!(diags[0].code, DiagnosticCode::Syntax);

        let diags = parse_adl("<component name=\"a\" definition=\"A\"/>").unwrap_err();
        assert_eq!(diags[0].code, DiagnosticCode::Syntax);
    }

    #[test]
    fn literal_inference() {
        assert_eq!(infer_literal("true"), Literal::Boolean(true));
        assert_eq!(infer_literal("-7"), Literal::Integer(-7));
        assert_eq!(infer_literal("+7"), Literal::String("+7".into()));
        assert_eq!(infer_literal("seven"), Literal::String("seven".into()));
    }

    #[test]
    fn conflicting_type_views() {
        let xml = r#"<definition name="a">
  <component name="x" definition="T"><interface name="p" role="server" signature="I"/></component>
  <component name="y" definition="T"/>
</definition>"#;
        let diags = parse_adl(xml).unwrap_err();
        assert_eq!(diags[0].code, DiagnosticCode::Invalid);
    }
}
