//! Compiles a [`Configuration`] into a graph of elementary deployment tasks.
//!
//! Seven task kinds are wired together through four interface kinds. A task
//! that offers an interface feeds every consumer task bound to it, and the
//! engine uses those edges as scheduling dependencies.
//!
//! Task ids follow `<Kind>/<target>[/<name>]`, where an installation's target
//! is `<type>@<site>`. Binding getters carry one more segment naming the
//! client endpoint (`BindingGetter/srv/s/cli.s`) because every binding gets
//! its own getter.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::model::{validate, Configuration, Literal, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TaskKind {
    Installation,
    Instantiation,
    AttributeSetter,
    BindingGetter,
    BindingSetter,
    AddComponent,
    Initialization,
}

impl TaskKind {
    pub const ALL: [TaskKind; 7] = [
        TaskKind::Installation,
        TaskKind::Instantiation,
        TaskKind::AttributeSetter,
        TaskKind::BindingGetter,
        TaskKind::BindingSetter,
        TaskKind::AddComponent,
        TaskKind::Initialization,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Installation => "Installation",
            TaskKind::Instantiation => "Instantiation",
            TaskKind::AttributeSetter => "AttributeSetter",
            TaskKind::BindingGetter => "BindingGetter",
            TaskKind::BindingSetter => "BindingSetter",
            TaskKind::AddComponent => "AddComponent",
            TaskKind::Initialization => "Initialization",
        }
    }

    /// Interfaces a task of this kind offers to its consumers.
    pub fn offers(self) -> &'static [InterfaceKind] {
        use InterfaceKind::*;
        match self {
            TaskKind::Installation => &[FactoryProvider],
            TaskKind::Instantiation => &[InstanceProvider],
            TaskKind::AttributeSetter => &[InstanceConfiguration],
            TaskKind::BindingGetter => &[BindingProvider, InstanceConfiguration],
            TaskKind::BindingSetter => &[InstanceConfiguration],
            TaskKind::AddComponent => &[InstanceConfiguration],
            TaskKind::Initialization => &[],
        }
    }

    /// Interfaces a task of this kind consumes.
    pub fn requires(self) -> &'static [InterfaceKind] {
        use InterfaceKind::*;
        match self {
            TaskKind::Installation => &[],
            TaskKind::Instantiation => &[FactoryProvider],
            TaskKind::AttributeSetter | TaskKind::BindingGetter | TaskKind::AddComponent => {
                &[InstanceProvider]
            }
            TaskKind::BindingSetter => &[InstanceProvider, BindingProvider],
            TaskKind::Initialization => &[InstanceProvider, InstanceConfiguration],
        }
    }

    /// Whether nodes of this kind carry a name parameter.
    pub fn has_name(self) -> bool {
        matches!(
            self,
            TaskKind::AttributeSetter
                | TaskKind::BindingGetter
                | TaskKind::BindingSetter
                | TaskKind::AddComponent
        )
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum InterfaceKind {
    FactoryProvider,
    InstanceProvider,
    BindingProvider,
    InstanceConfiguration,
}

impl InterfaceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            InterfaceKind::FactoryProvider => "FactoryProvider",
            InterfaceKind::InstanceProvider => "InstanceProvider",
            InterfaceKind::BindingProvider => "BindingProvider",
            InterfaceKind::InstanceConfiguration => "InstanceConfiguration",
        }
    }
}

impl fmt::Display for InterfaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Distinguishes the two instance inputs of an add-component task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeRole {
    Parent,
    Child,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaskId(String);

impl TaskId {
    pub fn new(id: impl Into<String>) -> Self {
        TaskId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TaskId {
    fn from(s: &str) -> Self {
        TaskId(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TaskTarget {
    /// Where a factory is installed.
    Site {
        component_type: String,
        site: String,
    },
    Instance(String),
}

impl fmt::Display for TaskTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskTarget::Site {
                component_type,
                site,
            } => write!(f, "{component_type}@{site}"),
            TaskTarget::Instance(id) => f.write_str(id),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaskNode {
    pub id: TaskId,
    pub kind: TaskKind,
    pub target: TaskTarget,
    pub name_param: Option<String>,
    pub value_param: Option<Literal>,
}

impl TaskNode {
    fn new(kind: TaskKind, target: TaskTarget, name: Option<&str>) -> Self {
        let mut id = format!("{kind}/{target}");
        if let Some(name) = name {
            id.push('/');
            id.push_str(name);
        }
        TaskNode {
            id: TaskId(id),
            kind,
            target,
            name_param: name.map(str::to_string),
            value_param: None,
        }
    }

    pub fn installation(component_type: &str, site: &str) -> Self {
        Self::new(
            TaskKind::Installation,
            TaskTarget::Site {
                component_type: component_type.to_string(),
                site: site.to_string(),
            },
            None,
        )
    }

    pub fn instantiation(instance: &str) -> Self {
        Self::new(
            TaskKind::Instantiation,
            TaskTarget::Instance(instance.to_string()),
            None,
        )
    }

    pub fn attribute_setter(instance: &str, name: &str, value: Literal) -> Self {
        let mut node = Self::new(
            TaskKind::AttributeSetter,
            TaskTarget::Instance(instance.to_string()),
            Some(name),
        );
        node.value_param = Some(value);
        node
    }

    /// `client` is the `instance.port` endpoint the obtained reference is for.
    pub fn binding_getter(server: &str, port: &str, client: &str) -> Self {
        let mut node = Self::new(
            TaskKind::BindingGetter,
            TaskTarget::Instance(server.to_string()),
            Some(port),
        );
        node.id = TaskId(format!("{}/{client}", node.id));
        node
    }

    pub fn binding_setter(client: &str, port: &str) -> Self {
        Self::new(
            TaskKind::BindingSetter,
            TaskTarget::Instance(client.to_string()),
            Some(port),
        )
    }

    pub fn add_component(parent: &str, child_name: &str) -> Self {
        Self::new(
            TaskKind::AddComponent,
            TaskTarget::Instance(parent.to_string()),
            Some(child_name),
        )
    }

    pub fn initialization(instance: &str) -> Self {
        Self::new(
            TaskKind::Initialization,
            TaskTarget::Instance(instance.to_string()),
            None,
        )
    }

    /// Arbitrary node for hand-built graphs.
    pub fn custom(id: &str, kind: TaskKind, target: TaskTarget) -> Self {
        TaskNode {
            id: TaskId::new(id),
            kind,
            target,
            name_param: kind.has_name().then(|| "x".to_string()),
            value_param: (kind == TaskKind::AttributeSetter).then_some(Literal::Integer(0)),
        }
    }

    /// `kind:target[:name]`
    pub fn label(&self) -> String {
        match &self.name_param {
            Some(name) => format!("{}:{}:{name}", self.kind, self.target),
            None => format!("{}:{}", self.kind, self.target),
        }
    }

    pub fn instance(&self) -> Option<&str> {
        match &self.target {
            TaskTarget::Instance(id) => Some(id),
            TaskTarget::Site { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DependencyEdge {
    pub from: TaskId,
    pub to: TaskId,
    pub interface: InterfaceKind,
    pub role: Option<EdgeRole>,
}

impl DependencyEdge {
    pub fn new(from: &TaskId, to: &TaskId, interface: InterfaceKind) -> Self {
        DependencyEdge {
            from: from.clone(),
            to: to.clone(),
            interface,
            role: None,
        }
    }

    fn with_role(mut self, role: EdgeRole) -> Self {
        self.role = Some(role);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("task id '{0}' appears more than once")]
    DuplicateTask(TaskId),
    #[error("edge references unknown task '{0}'")]
    UnknownTask(TaskId),
    #[error("edge from '{0}' to itself")]
    SelfLoop(TaskId),
    #[error("task '{0}' has parameters inconsistent with its kind")]
    BadParameters(TaskId),
}

/// A typed task graph. Graphs produced by [`compile`] are acyclic; graphs
/// assembled by hand through [`TaskGraph::from_parts`] need not be.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TaskGraph {
    nodes: BTreeMap<TaskId, TaskNode>,
    edges: BTreeSet<DependencyEdge>,
}

impl TaskGraph {
    /// Assembles a graph, checking referential integrity only.
    pub fn from_parts(
        nodes: impl IntoIterator<Item = TaskNode>,
        edges: impl IntoIterator<Item = DependencyEdge>,
    ) -> Result<TaskGraph, GraphError> {
        let mut graph = TaskGraph::default();
        for node in nodes {
            let params_ok = node.name_param.is_some() == node.kind.has_name()
                && node.value_param.is_some() == (node.kind == TaskKind::AttributeSetter);
            if !params_ok {
                return Err(GraphError::BadParameters(node.id));
            }
            if graph.nodes.contains_key(&node.id) {
                return Err(GraphError::DuplicateTask(node.id));
            }
            graph.nodes.insert(node.id.clone(), node);
        }
        for edge in edges {
            graph.add_edge(edge)?;
        }
        Ok(graph)
    }

    /// Adds one edge, checking that both endpoints exist.
    pub fn add_edge(&mut self, edge: DependencyEdge) -> Result<(), GraphError> {
        for id in [&edge.from, &edge.to] {
            if !self.nodes.contains_key(id) {
                return Err(GraphError::UnknownTask(id.clone()));
            }
        }
        if edge.from == edge.to {
            return Err(GraphError::SelfLoop(edge.from));
        }
        self.edges.insert(edge);
        Ok(())
    }

    pub fn nodes(&self) -> impl Iterator<Item = &TaskNode> {
        self.nodes.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = &DependencyEdge> {
        self.edges.iter()
    }

    pub fn node(&self, id: &TaskId) -> Option<&TaskNode> {
        self.nodes.get(id)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn count_kind(&self, kind: TaskKind) -> usize {
        self.nodes.values().filter(|n| n.kind == kind).count()
    }

    /// Edges whose interface is not offered by the provider or not required
    /// by the consumer.
    pub fn untyped_edges(&self) -> Vec<&DependencyEdge> {
        self.edges
            .iter()
            .filter(|e| {
                let from = self.nodes[&e.from].kind;
                let to = self.nodes[&e.to].kind;
                !from.offers().contains(&e.interface) || !to.requires().contains(&e.interface)
            })
            .collect()
    }

    /// Structural isomorphism, matching nodes on kind and parameters and
    /// edges on interface kind and role. Identifiers are ignored.
    pub fn is_isomorphic(&self, other: &TaskGraph) -> bool {
        use petgraph::graph::DiGraph;
        type Label = (TaskKind, Option<String>, Option<Literal>);
        fn to_petgraph(g: &TaskGraph) -> DiGraph<Label, (InterfaceKind, Option<EdgeRole>)> {
            let mut pg = DiGraph::new();
            let mut index = HashMap::new();
            for node in g.nodes.values() {
                let i = pg.add_node((node.kind, node.name_param.clone(), node.value_param.clone()));
                index.insert(&node.id, i);
            }
            for e in &g.edges {
                pg.add_edge(index[&e.from], index[&e.to], (e.interface, e.role));
            }
            pg
        }
        if self.node_count() != other.node_count() || self.edge_count() != other.edge_count() {
            return false;
        }
        petgraph::algo::is_isomorphic_matching(
            &to_petgraph(self),
            &to_petgraph(other),
            |a, b| a == b,
            |a, b| a == b,
        )
    }

    /// Line-oriented plan listing: one `task` line per node and one `edge`
    /// line per dependency, both sorted.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for node in self.nodes.values() {
            write!(
                out,
                "task {} kind={} target={}",
                node.id, node.kind, node.target
            )
            .unwrap();
            if let Some(name) = &node.name_param {
                write!(out, " name={name}").unwrap();
            }
            if let Some(value) = &node.value_param {
                write!(out, " value={value}").unwrap();
            }
            out.push('\n');
        }
        for e in &self.edges {
            write!(out, "edge {} -> {} {}", e.from, e.to, e.interface).unwrap();
            match e.role {
                Some(EdgeRole::Parent) => out.push_str(" role=parent"),
                Some(EdgeRole::Child) => out.push_str(" role=child"),
                None => {}
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendCapabilities {
    pub backend_name: String,
    pub supports_hierarchy: bool,
}

impl BackendCapabilities {
    pub fn new(backend_name: &str, supports_hierarchy: bool) -> Self {
        BackendCapabilities {
            backend_name: backend_name.to_string(),
            supports_hierarchy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("backend '{backend}' does not support component hierarchy")]
    HierarchyUnsupported { backend: String },
    #[error("configuration is invalid ({} violation(s))", .0.len())]
    InvalidConfig(Vec<Violation>),
}

impl PlanError {
    pub fn code(&self) -> &'static str {
        match self {
            PlanError::HierarchyUnsupported { .. } => "HIERARCHY_UNSUPPORTED",
            PlanError::InvalidConfig(_) => "INVALID_CONFIG",
        }
    }
}

struct Builder {
    nodes: Vec<TaskNode>,
    edges: Vec<DependencyEdge>,
}

impl Builder {
    fn add(&mut self, node: TaskNode) -> TaskId {
        let id = node.id.clone();
        self.nodes.push(node);
        id
    }

    fn wire(&mut self, from: &TaskId, to: &TaskId, interface: InterfaceKind) {
        self.edges.push(DependencyEdge::new(from, to, interface));
    }
}

/// Builds the deployment task graph for `config`.
///
/// Capabilities only decide admissibility: a configuration with containment
/// is rejected by a backend without hierarchy, and otherwise the graph does
/// not depend on `caps`.
pub fn compile(config: &Configuration, caps: &BackendCapabilities) -> Result<TaskGraph, PlanError> {
    let violations = validate(config);
    if !violations.is_empty() {
        return Err(PlanError::InvalidConfig(violations));
    }
    if !config.containments.is_empty() && !caps.supports_hierarchy {
        return Err(PlanError::HierarchyUnsupported {
            backend: caps.backend_name.clone(),
        });
    }

    let mut b = Builder {
        nodes: Vec::new(),
        edges: Vec::new(),
    };

    let mut factories = BTreeMap::new();
    for (ty, site) in config.deployment_sites() {
        let id = b.add(TaskNode::installation(&ty, &site));
        factories.insert((ty, site), id);
    }

    let mut instantiations = BTreeMap::new();
    for inst in &config.instances {
        let id = b.add(TaskNode::instantiation(&inst.id));
        let factory = &factories[&(inst.type_name.clone(), inst.site.clone())];
        b.wire(factory, &id, InterfaceKind::FactoryProvider);
        instantiations.insert(inst.id.as_str(), id);
    }

    // Tasks that must complete before an instance is started.
    let mut configurators: BTreeMap<&str, Vec<TaskId>> = BTreeMap::new();

    for inst in &config.instances {
        for (name, value) in &inst.attribute_values {
            let id = b.add(TaskNode::attribute_setter(&inst.id, name, value.clone()));
            b.wire(
                &instantiations[inst.id.as_str()],
                &id,
                InterfaceKind::InstanceProvider,
            );
            configurators.entry(&inst.id).or_default().push(id);
        }
    }

    for binding in &config.bindings {
        let client = format!("{}.{}", binding.client_instance, binding.client_port);
        let getter = b.add(TaskNode::binding_getter(
            &binding.server_instance,
            &binding.server_port,
            &client,
        ));
        b.wire(
            &instantiations[binding.server_instance.as_str()],
            &getter,
            InterfaceKind::InstanceProvider,
        );
        let setter = b.add(TaskNode::binding_setter(
            &binding.client_instance,
            &binding.client_port,
        ));
        b.wire(
            &instantiations[binding.client_instance.as_str()],
            &setter,
            InterfaceKind::InstanceProvider,
        );
        b.wire(&getter, &setter, InterfaceKind::BindingProvider);
        configurators
            .entry(&binding.server_instance)
            .or_default()
            .push(getter);
        configurators
            .entry(&binding.client_instance)
            .or_default()
            .push(setter);
    }

    for c in &config.containments {
        let id = b.add(TaskNode::add_component(&c.parent, &c.child_name));
        b.edges.push(
            DependencyEdge::new(
                &instantiations[c.parent.as_str()],
                &id,
                InterfaceKind::InstanceProvider,
            )
            .with_role(EdgeRole::Parent),
        );
        b.edges.push(
            DependencyEdge::new(
                &instantiations[c.child.as_str()],
                &id,
                InterfaceKind::InstanceProvider,
            )
            .with_role(EdgeRole::Child),
        );
        configurators.entry(&c.parent).or_default().push(id.clone());
        configurators.entry(&c.child).or_default().push(id);
    }

    for inst in &config.instances {
        let id = b.add(TaskNode::initialization(&inst.id));
        b.wire(
            &instantiations[inst.id.as_str()],
            &id,
            InterfaceKind::InstanceProvider,
        );
        for from in configurators.get(inst.id.as_str()).into_iter().flatten() {
            b.wire(from, &id, InterfaceKind::InstanceConfiguration);
        }
    }

    // Identifiers are unique and every edge endpoint was created above, so
    // assembly cannot fail on a validated configuration.
    Ok(TaskGraph::from_parts(b.nodes, b.edges).expect("compiled graph is well-formed"))
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Renders the graph as a DOT digraph. Node statements come sorted by task
/// id and edge statements by (from, to, interface), so the output is
/// byte-reproducible.
pub fn graph_to_dot(graph: &TaskGraph) -> String {
    let mut out = String::from("digraph plan {\n");
    for node in graph.nodes() {
        writeln!(
            out,
            "  \"{}\" [label=\"{}\"];",
            dot_escape(node.id.as_str()),
            dot_escape(&node.label())
        )
        .unwrap();
    }
    for e in graph.edges() {
        writeln!(
            out,
            "  \"{}\" -> \"{}\" [label=\"{}\"];",
            dot_escape(e.from.as_str()),
            dot_escape(e.to.as_str()),
            e.interface
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}
