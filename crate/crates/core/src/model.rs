//! Platform-independent configuration model.
//!
//! Every language frontend produces a [`Configuration`] and the planner
//! consumes one. Nothing here knows about concrete syntax or runtimes.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

pub const DEFAULT_SITE: &str = "local";

/// Returns true if `s` is a well-formed identifier: `[A-Za-z_][A-Za-z0-9_-]*`.
///
/// Identifiers end up inside task ids, which use `/`, `@` and `.` as
/// separators, so those characters are excluded.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Provided,
    Required,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ValueKind {
    String,
    Integer,
    Boolean,
}

impl ValueKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ValueKind::String => "string",
            ValueKind::Integer => "integer",
            ValueKind::Boolean => "boolean",
        }
    }

    pub fn parse(s: &str) -> Option<ValueKind> {
        match s {
            "string" => Some(ValueKind::String),
            "integer" => Some(ValueKind::Integer),
            "boolean" => Some(ValueKind::Boolean),
            _ => None,
        }
    }
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A scalar attribute value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Literal {
    String(String),
    Integer(i64),
    Boolean(bool),
}

impl Literal {
    pub fn kind(&self) -> ValueKind {
        match self {
            Literal::String(_) => ValueKind::String,
            Literal::Integer(_) => ValueKind::Integer,
            Literal::Boolean(_) => ValueKind::Boolean,
        }
    }
}

/// Renders the literal in native-format syntax (strings quoted and escaped).
impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::String(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\t' => f.write_str("\\t")?,
                        '\r' => f.write_str("\\r")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
            Literal::Integer(i) => write!(f, "{i}"),
            Literal::Boolean(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InterfaceSignature {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PortDecl {
    pub name: String,
    pub direction: Direction,
    pub interface: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentType {
    pub name: String,
    pub ports: Vec<PortDecl>,
    pub attributes: BTreeMap<String, ValueKind>,
    pub artifact: String,
}

impl ComponentType {
    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        ComponentType {
            artifact: name.clone(),
            name,
            ports: Vec::new(),
            attributes: BTreeMap::new(),
        }
    }

    pub fn provides(mut self, port: &str, interface: &str) -> Self {
        self.ports.push(PortDecl {
            name: port.to_string(),
            direction: Direction::Provided,
            interface: interface.to_string(),
        });
        self
    }

    pub fn requires(mut self, port: &str, interface: &str) -> Self {
        self.ports.push(PortDecl {
            name: port.to_string(),
            direction: Direction::Required,
            interface: interface.to_string(),
        });
        self
    }

    pub fn attribute(mut self, name: &str, kind: ValueKind) -> Self {
        self.attributes.insert(name.to_string(), kind);
        self
    }

    pub fn artifact(mut self, artifact: &str) -> Self {
        self.artifact = artifact.to_string();
        self
    }

    pub fn port(&self, name: &str) -> Option<&PortDecl> {
        self.ports.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub id: String,
    pub type_name: String,
    pub site: String,
    pub attribute_values: BTreeMap<String, Literal>,
}

impl Instance {
    pub fn new(id: impl Into<String>, type_name: impl Into<String>) -> Self {
        Instance {
            id: id.into(),
            type_name: type_name.into(),
            site: DEFAULT_SITE.to_string(),
            attribute_values: BTreeMap::new(),
        }
    }

    pub fn at(mut self, site: &str) -> Self {
        self.site = site.to_string();
        self
    }

    pub fn with(mut self, name: &str, value: Literal) -> Self {
        self.attribute_values.insert(name.to_string(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Binding {
    pub client_instance: String,
    pub client_port: String,
    pub server_instance: String,
    pub server_port: String,
}

impl Binding {
    pub fn new(client: &str, client_port: &str, server: &str, server_port: &str) -> Self {
        Binding {
            client_instance: client.to_string(),
            client_port: client_port.to_string(),
            server_instance: server.to_string(),
            server_port: server_port.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Containment {
    pub parent: String,
    pub child: String,
    pub child_name: String,
}

impl Containment {
    pub fn new(parent: &str, child: &str, child_name: &str) -> Self {
        Containment {
            parent: parent.to_string(),
            child: child.to_string(),
            child_name: child_name.to_string(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Configuration {
    pub interfaces: Vec<InterfaceSignature>,
    pub types: Vec<ComponentType>,
    pub instances: Vec<Instance>,
    pub bindings: Vec<Binding>,
    pub containments: Vec<Containment>,
}

impl Configuration {
    pub fn is_empty(&self) -> bool {
        self.interfaces.is_empty()
            && self.types.is_empty()
            && self.instances.is_empty()
            && self.bindings.is_empty()
            && self.containments.is_empty()
    }

    pub fn component_type(&self, name: &str) -> Option<&ComponentType> {
        self.types.iter().find(|t| t.name == name)
    }

    pub fn instance(&self, id: &str) -> Option<&Instance> {
        self.instances.iter().find(|i| i.id == id)
    }

    /// Declares an interface signature unless one with that name exists.
    pub fn declare_interface(&mut self, name: &str) {
        if !self.interfaces.iter().any(|i| i.name == name) {
            self.interfaces.push(InterfaceSignature {
                name: name.to_string(),
            });
        }
    }

    /// Sorts every list by identifier so that two configurations describing
    /// the same architecture compare equal.
    pub fn canonicalize(&mut self) {
        self.interfaces.sort();
        self.types.sort_by(|a, b| a.name.cmp(&b.name));
        for t in &mut self.types {
            t.ports.sort();
        }
        self.instances.sort_by(|a, b| a.id.cmp(&b.id));
        self.bindings.sort();
        self.containments.sort();
    }

    pub fn canonical(&self) -> Configuration {
        let mut c = self.clone();
        c.canonicalize();
        c
    }

    /// The set of distinct (type, site) pairs used by at least one instance.
    pub fn deployment_sites(&self) -> BTreeSet<(String, String)> {
        self.instances
            .iter()
            .map(|i| (i.type_name.clone(), i.site.clone()))
            .collect()
    }
}

/// Identifies the model element a violation is about.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ElementRef {
    Interface(String),
    Type(String),
    Port {
        type_name: String,
        port: String,
    },
    TypeAttribute {
        type_name: String,
        name: String,
    },
    Instance(String),
    AttributeValue {
        instance: String,
        name: String,
    },
    Binding {
        client: String,
        port: String,
    },
    Containment {
        parent: String,
        child: String,
    },
    /// A set of instances, used for containment cycles.
    Instances(Vec<String>),
}

impl fmt::Display for ElementRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElementRef::Interface(n) => write!(f, "interface {n}"),
            ElementRef::Type(n) => write!(f, "type {n}"),
            ElementRef::Port { type_name, port } => write!(f, "port {type_name}.{port}"),
            ElementRef::TypeAttribute { type_name, name } => {
                write!(f, "attribute {type_name}.{name}")
            }
            ElementRef::Instance(n) => write!(f, "instance {n}"),
            ElementRef::AttributeValue { instance, name } => {
                write!(f, "attribute value {instance}.{name}")
            }
            ElementRef::Binding { client, port } => write!(f, "binding {client}.{port}"),
            ElementRef::Containment { parent, child } => {
                write!(f, "containment {parent}/{child}")
            }
            ElementRef::Instances(ids) => write!(f, "instances {{{}}}", ids.join(", ")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViolationCode {
    InvalidIdentifier,
    DuplicateInterface,
    DuplicateType,
    DuplicatePort,
    DuplicateInstance,
    UnknownInterface,
    UnknownType,
    UnknownAttribute,
    AttributeKindMismatch,
    UnknownInstance,
    UnknownPort,
    BindingDirection,
    InterfaceMismatch,
    AmbiguousBinding,
    ContainmentSelf,
    ContainmentCycle,
    MultipleParents,
    DuplicateChildName,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::InvalidIdentifier => "INVALID_IDENTIFIER",
            ViolationCode::DuplicateInterface => "DUPLICATE_INTERFACE",
            ViolationCode::DuplicateType => "DUPLICATE_TYPE",
            ViolationCode::DuplicatePort => "DUPLICATE_PORT",
            ViolationCode::DuplicateInstance => "DUPLICATE_INSTANCE",
            ViolationCode::UnknownInterface => "UNKNOWN_INTERFACE",
            ViolationCode::UnknownType => "UNKNOWN_TYPE",
            ViolationCode::UnknownAttribute => "UNKNOWN_ATTRIBUTE",
            ViolationCode::AttributeKindMismatch => "ATTRIBUTE_KIND_MISMATCH",
            ViolationCode::UnknownInstance => "UNKNOWN_INSTANCE",
            ViolationCode::UnknownPort => "UNKNOWN_PORT",
            ViolationCode::BindingDirection => "BINDING_DIRECTION",
            ViolationCode::InterfaceMismatch => "INTERFACE_MISMATCH",
            ViolationCode::AmbiguousBinding => "AMBIGUOUS_BINDING",
            ViolationCode::ContainmentSelf => "CONTAINMENT_SELF",
            ViolationCode::ContainmentCycle => "CONTAINMENT_CYCLE",
            ViolationCode::MultipleParents => "MULTIPLE_PARENTS",
            ViolationCode::DuplicateChildName => "DUPLICATE_CHILD_NAME",
        }
    }

    /// True for codes describing a reference that does not resolve.
    pub fn is_unresolved(self) -> bool {
        matches!(
            self,
            ViolationCode::UnknownInterface
                | ViolationCode::UnknownType
                | ViolationCode::UnknownAttribute
                | ViolationCode::UnknownInstance
                | ViolationCode::UnknownPort
        )
    }

    pub fn is_duplicate(self) -> bool {
        matches!(
            self,
            ViolationCode::DuplicateInterface
                | ViolationCode::DuplicateType
                | ViolationCode::DuplicatePort
                | ViolationCode::DuplicateInstance
                | ViolationCode::DuplicateChildName
        )
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Violation {
    pub code: ViolationCode,
    pub element: ElementRef,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({}): {}", self.code, self.element, self.message)
    }
}

/// Checks every model invariant and returns all violations found.
///
/// The report is deterministic: violations come out in the order the checks
/// walk the model. An empty report means the configuration is well-formed.
pub fn validate(config: &Configuration) -> Vec<Violation> {
    let mut report = Vec::new();
    let mut push = |code, element, message: String| {
        report.push(Violation {
            code,
            element,
            message,
        })
    };

    // interfaces
    let mut interfaces = HashSet::new();
    for sig in &config.interfaces {
        if !is_identifier(&sig.name) {
            push(
                ViolationCode::InvalidIdentifier,
                ElementRef::Interface(sig.name.clone()),
                format!("'{}' is not a valid interface name", sig.name),
            );
        }
        if !interfaces.insert(sig.name.as_str()) {
            push(
                ViolationCode::DuplicateInterface,
                ElementRef::Interface(sig.name.clone()),
                format!("interface '{}' declared more than once", sig.name),
            );
        }
    }

    // component types
    let mut types: HashMap<&str, &ComponentType> = HashMap::new();
    for ty in &config.types {
        if !is_identifier(&ty.name) {
            push(
                ViolationCode::InvalidIdentifier,
                ElementRef::Type(ty.name.clone()),
                format!("'{}' is not a valid type name", ty.name),
            );
        }
        if types.insert(ty.name.as_str(), ty).is_some() {
            push(
                ViolationCode::DuplicateType,
                ElementRef::Type(ty.name.clone()),
                format!("type '{}' declared more than once", ty.name),
            );
        }
        let mut ports = HashSet::new();
        for port in &ty.ports {
            let element = ElementRef::Port {
                type_name: ty.name.clone(),
                port: port.name.clone(),
            };
            if !is_identifier(&port.name) {
                push(
                    ViolationCode::InvalidIdentifier,
                    element.clone(),
                    format!("'{}' is not a valid port name", port.name),
                );
            }
            if !ports.insert(port.name.as_str()) {
                push(
                    ViolationCode::DuplicatePort,
                    element.clone(),
                    format!(
                        "port '{}' declared more than once on '{}'",
                        port.name, ty.name
                    ),
                );
            }
            if !interfaces.contains(port.interface.as_str()) {
                push(
                    ViolationCode::UnknownInterface,
                    element,
                    format!(
                        "port '{}' uses undeclared interface '{}'",
                        port.name, port.interface
                    ),
                );
            }
        }
        for name in ty.attributes.keys() {
            if !is_identifier(name) {
                push(
                    ViolationCode::InvalidIdentifier,
                    ElementRef::TypeAttribute {
                        type_name: ty.name.clone(),
                        name: name.clone(),
                    },
                    format!("'{name}' is not a valid attribute name"),
                );
            }
        }
    }

    // instances
    let mut instances: HashMap<&str, &Instance> = HashMap::new();
    for inst in &config.instances {
        let element = ElementRef::Instance(inst.id.clone());
        if !is_identifier(&inst.id) {
            push(
                ViolationCode::InvalidIdentifier,
                element.clone(),
                format!("'{}' is not a valid instance id", inst.id),
            );
        }
        if !is_identifier(&inst.site) {
            push(
                ViolationCode::InvalidIdentifier,
                element.clone(),
                format!("'{}' is not a valid site label", inst.site),
            );
        }
        if instances.insert(inst.id.as_str(), inst).is_some() {
            push(
                ViolationCode::DuplicateInstance,
                element.clone(),
                format!("instance '{}' declared more than once", inst.id),
            );
        }
        let Some(ty) = types.get(inst.type_name.as_str()) else {
            push(
                ViolationCode::UnknownType,
                element,
                format!(
                    "instance '{}' has undeclared type '{}'",
                    inst.id, inst.type_name
                ),
            );
            continue;
        };
        for (name, value) in &inst.attribute_values {
            let element = ElementRef::AttributeValue {
                instance: inst.id.clone(),
                name: name.clone(),
            };
            match ty.attributes.get(name) {
                None => push(
                    ViolationCode::UnknownAttribute,
                    element,
                    format!("type '{}' declares no attribute '{name}'", ty.name),
                ),
                Some(kind) if *kind != value.kind() => push(
                    ViolationCode::AttributeKindMismatch,
                    element,
                    format!("attribute '{name}' expects {kind}, got {}", value.kind()),
                ),
                Some(_) => {}
            }
        }
    }

    let port_of = |instance: &str, port: &str| -> Option<&PortDecl> {
        let inst = instances.get(instance)?;
        types.get(inst.type_name.as_str())?.port(port)
    };

    // bindings
    let mut bound = HashSet::new();
    for b in &config.bindings {
        let element = ElementRef::Binding {
            client: b.client_instance.clone(),
            port: b.client_port.clone(),
        };
        let mut resolved = true;
        for id in [&b.client_instance, &b.server_instance] {
            if !instances.contains_key(id.as_str()) {
                push(
                    ViolationCode::UnknownInstance,
                    element.clone(),
                    format!("binding references undeclared instance '{id}'"),
                );
                resolved = false;
            }
        }
        if !resolved {
            continue;
        }
        let client = port_of(&b.client_instance, &b.client_port);
        let server = port_of(&b.server_instance, &b.server_port);
        if client.is_none() {
            push(
                ViolationCode::UnknownPort,
                element.clone(),
                format!("'{}' has no port '{}'", b.client_instance, b.client_port),
            );
        }
        if server.is_none() {
            push(
                ViolationCode::UnknownPort,
                element.clone(),
                format!("'{}' has no port '{}'", b.server_instance, b.server_port),
            );
        }
        let (Some(client), Some(server)) = (client, server) else {
            continue;
        };
        if client.direction != Direction::Required || server.direction != Direction::Provided {
            push(
                ViolationCode::BindingDirection,
                element.clone(),
                format!(
                    "binding must go from a required port to a provided port ({}.{} -> {}.{})",
                    b.client_instance, b.client_port, b.server_instance, b.server_port
                ),
            );
        } else if client.interface != server.interface {
            push(
                ViolationCode::InterfaceMismatch,
                element.clone(),
                format!(
                    "required interface '{}' does not match provided interface '{}'",
                    client.interface, server.interface
                ),
            );
        }
        if !bound.insert((b.client_instance.as_str(), b.client_port.as_str())) {
            push(
                ViolationCode::AmbiguousBinding,
                element,
                format!(
                    "'{}.{}' is bound more than once",
                    b.client_instance, b.client_port
                ),
            );
        }
    }

    // containments
    let mut parent_of: BTreeMap<&str, &str> = BTreeMap::new();
    let mut child_names = HashSet::new();
    let mut edges = Vec::new();
    for c in &config.containments {
        let element = ElementRef::Containment {
            parent: c.parent.clone(),
            child: c.child.clone(),
        };
        if !is_identifier(&c.child_name) {
            push(
                ViolationCode::InvalidIdentifier,
                element.clone(),
                format!("'{}' is not a valid child name", c.child_name),
            );
        }
        let mut resolved = true;
        for id in [&c.parent, &c.child] {
            if !instances.contains_key(id.as_str()) {
                push(
                    ViolationCode::UnknownInstance,
                    element.clone(),
                    format!("containment references undeclared instance '{id}'"),
                );
                resolved = false;
            }
        }
        if !resolved {
            continue;
        }
        if c.parent == c.child {
            push(
                ViolationCode::ContainmentSelf,
                element,
                format!("'{}' cannot contain itself", c.parent),
            );
            continue;
        }
        if let Some(prev) = parent_of.insert(&c.child, &c.parent) {
            push(
                ViolationCode::MultipleParents,
                element.clone(),
                format!("'{}' already has parent '{prev}'", c.child),
            );
        }
        if !child_names.insert((c.parent.as_str(), c.child_name.as_str())) {
            push(
                ViolationCode::DuplicateChildName,
                element,
                format!(
                    "'{}' already has a child named '{}'",
                    c.parent, c.child_name
                ),
            );
        }
        edges.push((c.parent.as_str(), c.child.as_str()));
    }
    for cycle in containment_cycles(&edges) {
        push(
            ViolationCode::ContainmentCycle,
            ElementRef::Instances(cycle.clone()),
            format!("containment cycle through {}", cycle.join(", ")),
        );
    }

    report
}

/// Strongly connected components with more than one member, each sorted,
/// in a deterministic order.
fn containment_cycles(edges: &[(&str, &str)]) -> Vec<Vec<String>> {
    use petgraph::graphmap::DiGraphMap;
    let mut graph: DiGraphMap<&str, ()> = DiGraphMap::new();
    for &(p, c) in edges {
        graph.add_edge(p, c, ());
    }
    let mut cycles: Vec<Vec<String>> = petgraph::algo::tarjan_scc(&graph)
        .into_iter()
        .filter(|scc| scc.len() > 1)
        .map(|scc| {
            let mut ids: Vec<String> = scc.into_iter().map(str::to_string).collect();
            ids.sort();
            ids
        })
        .collect();
    cycles.sort();
    cycles
}

/// The client/server application used throughout the docs and tests.
pub fn client_server() -> Configuration {
    let mut config = Configuration::default();
    config.declare_interface("IService");
    config.types.push(
        ComponentType::new("Server")
            .provides("s", "IService")
            .attribute("nom", ValueKind::String),
    );
    config.types.push(
        ComponentType::new("Client")
            .requires("s", "IService")
            .attribute("nom", ValueKind::String),
    );
    config
        .instances
        .push(Instance::new("srv", "Server").with("nom", Literal::String("the-server".into())));
    config
        .instances
        .push(Instance::new("cli", "Client").with("nom", Literal::String("the-client".into())));
    config.bindings.push(Binding::new("cli", "s", "srv", "s"));
    config
}
