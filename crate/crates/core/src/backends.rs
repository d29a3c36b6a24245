//! Platform personalities.
//!
//! [`MockRuntime`] implements the abstract deployment API that task kinds
//! drive. It comes in two flavours: a flat runtime without component
//! hierarchy, shaped like a CORBA component container, and a hierarchical
//! runtime that also supports sub-components, shaped like Fractal. Both
//! refuse to start an instance whose required ports are not all bound.
//!
//! | task kind       | API call              |
//! |-----------------|-----------------------|
//! | Installation    | [`MockRuntime::install`] |
//! | Instantiation   | [`MockRuntime::instantiate`] |
//! | AttributeSetter | [`MockRuntime::set_attribute`] |
//! | BindingGetter   | [`MockRuntime::get_binding`] |
//! | BindingSetter   | [`MockRuntime::bind`] |
//! | AddComponent    | [`MockRuntime::add_sub_component`] |
//! | Initialization  | [`MockRuntime::start`] |

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use thiserror::Error;

use crate::engine::{self, EngineConfig, ExecutionTrace, TaskExecutor, TaskInputs};
use crate::model::{ComponentType, Configuration, Direction, Literal};
use crate::planner::{
    BackendCapabilities, EdgeRole, InterfaceKind, TaskGraph, TaskId, TaskKind, TaskNode, TaskTarget,
};

static NEXT_RUNTIME: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FactoryRef {
    runtime: u64,
    handle: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InstanceRef {
    runtime: u64,
    handle: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BindingRef {
    runtime: u64,
    handle: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("unknown component type '{0}'")]
    UnknownType(String),
    #[error("handle does not belong to this runtime or is not live")]
    StaleHandle,
    #[error("instance '{instance}' has no attribute '{name}'")]
    UnknownAttribute { instance: String, name: String },
    #[error("attribute '{name}' expects {expected}")]
    TypeMismatch { name: String, expected: String },
    #[error("instance '{0}' is already started")]
    AlreadyStarted(String),
    #[error("instance '{instance}' has no {direction} port '{port}'")]
    UnknownPort {
        instance: String,
        port: String,
        direction: &'static str,
    },
    #[error("port '{instance}.{port}' is already bound")]
    AlreadyBound { instance: String, port: String },
    #[error("port '{instance}.{port}' requires {required} but the target provides {provided}")]
    InterfaceMismatch {
        instance: String,
        port: String,
        required: String,
        provided: String,
    },
    #[error("runtime '{0}' does not support sub-components")]
    Unsupported(String),
    #[error("adding '{child}' under '{parent}' would create a containment cycle")]
    Cycle { parent: String, child: String },
    #[error("instance '{instance}' cannot start: port '{port}' is unbound")]
    UnboundPort { instance: String, port: String },
    #[error("an instance labelled '{0}' already exists")]
    DuplicateLabel(String),
}

impl RuntimeError {
    pub fn code(&self) -> &'static str {
        match self {
            RuntimeError::UnknownType(_) => "UNKNOWN_TYPE",
            RuntimeError::StaleHandle => "STALE_HANDLE",
            RuntimeError::UnknownAttribute { .. } => "UNKNOWN_ATTRIBUTE",
            RuntimeError::TypeMismatch { .. } => "TYPE_MISMATCH",
            RuntimeError::AlreadyStarted(_) => "ALREADY_STARTED",
            RuntimeError::UnknownPort { .. } => "UNKNOWN_PORT",
            RuntimeError::AlreadyBound { .. } => "ALREADY_BOUND",
            RuntimeError::InterfaceMismatch { .. } => "INTERFACE_MISMATCH",
            RuntimeError::Unsupported(_) => "UNSUPPORTED",
            RuntimeError::Cycle { .. } => "CYCLE",
            RuntimeError::UnboundPort { .. } => "UNBOUND_PORT",
            RuntimeError::DuplicateLabel(_) => "DUPLICATE_LABEL",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuntimeKind {
    /// No hierarchy.
    Flat,
    /// Supports sub-components.
    Hierarchical,
}

impl RuntimeKind {
    pub fn name(self) -> &'static str {
        match self {
            RuntimeKind::Flat => "flat",
            RuntimeKind::Hierarchical => "hier",
        }
    }

    pub fn capabilities(self) -> BackendCapabilities {
        BackendCapabilities::new(self.name(), self == RuntimeKind::Hierarchical)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InstanceState {
    pub type_name: String,
    pub site: String,
    pub attributes: BTreeMap<String, Literal>,
    /// required port → (server instance label, provided port)
    pub links: BTreeMap<String, (String, String)>,
    pub started: bool,
}

/// Observable end-state of a runtime. Instances are keyed by the label
/// given at instantiation, so snapshots taken after different schedules
/// compare equal whenever the deployed state is the same.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RuntimeSnapshot {
    pub instances: BTreeMap<String, InstanceState>,
    /// (parent, child, child name)
    pub containment: BTreeSet<(String, String, String)>,
    /// (type, site)
    pub factories: BTreeSet<(String, String)>,
}

impl RuntimeSnapshot {
    pub fn without_containment(&self) -> RuntimeSnapshot {
        RuntimeSnapshot {
            containment: BTreeSet::new(),
            ..self.clone()
        }
    }

    /// One line per fact, sorted.
    pub fn to_text(&self) -> String {
        let mut lines = Vec::new();
        for (ty, site) in &self.factories {
            lines.push(format!("factory {ty}@{site}"));
        }
        for (label, inst) in &self.instances {
            lines.push(format!(
                "instance {label} type={} site={}",
                inst.type_name, inst.site
            ));
            for (name, value) in &inst.attributes {
                lines.push(format!("attribute {label}.{name} = {value}"));
            }
            for (port, (server, server_port)) in &inst.links {
                lines.push(format!("link {label}.{port} -> {server}.{server_port}"));
            }
            if inst.started {
                lines.push(format!("started {label}"));
            }
        }
        for (parent, child, name) in &self.containment {
            lines.push(format!("contain {parent} {child} as {name}"));
        }
        lines.sort();
        let mut out = String::new();
        for line in lines {
            writeln!(out, "{line}").unwrap();
        }
        out
    }
}

#[derive(Debug, Clone)]
struct InstanceRecord {
    label: String,
    type_name: String,
    site: String,
    attributes: BTreeMap<String, Literal>,
    links: BTreeMap<String, (u64, String)>,
    started: bool,
}

#[derive(Debug, Default)]
struct Registry {
    next_handle: u64,
    factories: BTreeMap<(String, String), u64>,
    factory_info: HashMap<u64, (String, String)>,
    instances: HashMap<u64, InstanceRecord>,
    labels: HashMap<String, u64>,
    bindings: HashMap<(u64, String), u64>,
    binding_info: HashMap<u64, (u64, String)>,
    containment: BTreeSet<(u64, u64, String)>,
    parents: HashMap<u64, Vec<u64>>,
}

impl Registry {
    fn fresh(&mut self) -> u64 {
        self.next_handle += 1;
        self.next_handle
    }

    fn is_ancestor(&self, ancestor: u64, of: u64) -> bool {
        let mut stack = vec![of];
        let mut seen = BTreeSet::new();
        while let Some(x) = stack.pop() {
            if x == ancestor {
                return true;
            }
            if seen.insert(x) {
                stack.extend(self.parents.get(&x).into_iter().flatten().copied());
            }
        }
        false
    }
}

/// A simulated component platform. All operations are internally
/// synchronized and may be called from any thread.
#[derive(Debug)]
pub struct MockRuntime {
    id: u64,
    kind: RuntimeKind,
    types: BTreeMap<String, ComponentType>,
    state: Mutex<Registry>,
}

impl MockRuntime {
    pub fn new(kind: RuntimeKind, types: impl IntoIterator<Item = ComponentType>) -> Self {
        MockRuntime {
            id: NEXT_RUNTIME.fetch_add(1, Ordering::Relaxed),
            kind,
            types: types.into_iter().map(|t| (t.name.clone(), t)).collect(),
            state: Mutex::new(Registry::default()),
        }
    }

    /// A runtime knowing every component type of `config`.
    pub fn for_config(kind: RuntimeKind, config: &Configuration) -> Self {
        Self::new(kind, config.types.iter().cloned())
    }

    pub fn flat(config: &Configuration) -> Self {
        Self::for_config(RuntimeKind::Flat, config)
    }

    pub fn hierarchical(config: &Configuration) -> Self {
        Self::for_config(RuntimeKind::Hierarchical, config)
    }

    pub fn kind(&self) -> RuntimeKind {
        self.kind
    }

    pub fn capabilities(&self) -> BackendCapabilities {
        self.kind.capabilities()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Registry> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn own(&self, runtime: u64) -> Result<(), RuntimeError> {
        if runtime == self.id {
            Ok(())
        } else {
            Err(RuntimeError::StaleHandle)
        }
    }

    /// Installs a factory for `type_name` on `site`. Idempotent.
    pub fn install(&self, type_name: &str, site: &str) -> Result<FactoryRef, RuntimeError> {
        if !self.types.contains_key(type_name) {
            return Err(RuntimeError::UnknownType(type_name.to_string()));
        }
        let mut reg = self.lock();
        let key = (type_name.to_string(), site.to_string());
        let handle = match reg.factories.get(&key) {
            Some(&h) => h,
            None => {
                let h = reg.fresh();
                reg.factories.insert(key.clone(), h);
                reg.factory_info.insert(h, key);
                h
            }
        };
        Ok(FactoryRef {
            runtime: self.id,
            handle,
        })
    }

    /// Creates an unstarted instance. `label` names the instance in
    /// snapshots and must be unique within the runtime.
    pub fn instantiate(
        &self,
        factory: FactoryRef,
        label: &str,
    ) -> Result<InstanceRef, RuntimeError> {
        self.own(factory.runtime)?;
        let mut reg = self.lock();
        let (type_name, site) = reg
            .factory_info
            .get(&factory.handle)
            .cloned()
            .ok_or(RuntimeError::StaleHandle)?;
        if reg.labels.contains_key(label) {
            return Err(RuntimeError::DuplicateLabel(label.to_string()));
        }
        let handle = reg.fresh();
        reg.labels.insert(label.to_string(), handle);
        reg.instances.insert(
            handle,
            InstanceRecord {
                label: label.to_string(),
                type_name,
                site,
                attributes: BTreeMap::new(),
                links: BTreeMap::new(),
                started: false,
            },
        );
        Ok(InstanceRef {
            runtime: self.id,
            handle,
        })
    }

    fn instance_type(&self, record: &InstanceRecord) -> &ComponentType {
        &self.types[&record.type_name]
    }

    pub fn set_attribute(
        &self,
        instance: InstanceRef,
        name: &str,
        value: Literal,
    ) -> Result<(), RuntimeError> {
        self.own(instance.runtime)?;
        let mut reg = self.lock();
        let record = reg
            .instances
            .get_mut(&instance.handle)
            .ok_or(RuntimeError::StaleHandle)?;
        if record.started {
            return Err(RuntimeError::AlreadyStarted(record.label.clone()));
        }
        let ty = &self.types[&record.type_name];
        let Some(kind) = ty.attributes.get(name) else {
            return Err(RuntimeError::UnknownAttribute {
                instance: record.label.clone(),
                name: name.to_string(),
            });
        };
        if *kind != value.kind() {
            return Err(RuntimeError::TypeMismatch {
                name: name.to_string(),
                expected: kind.to_string(),
            });
        }
        record.attributes.insert(name.to_string(), value);
        Ok(())
    }

    /// Returns a reference to a provided port. Repeated calls for the same
    /// (instance, port) return the same handle.
    pub fn get_binding(
        &self,
        instance: InstanceRef,
        provided_port: &str,
    ) -> Result<BindingRef, RuntimeError> {
        self.own(instance.runtime)?;
        let mut reg = self.lock();
        let record = reg
            .instances
            .get(&instance.handle)
            .ok_or(RuntimeError::StaleHandle)?;
        let provided = self
            .instance_type(record)
            .port(provided_port)
            .is_some_and(|p| p.direction == Direction::Provided);
        if !provided {
            return Err(RuntimeError::UnknownPort {
                instance: record.label.clone(),
                port: provided_port.to_string(),
                direction: "provided",
            });
        }
        let key = (instance.handle, provided_port.to_string());
        let handle = match reg.bindings.get(&key) {
            Some(&h) => h,
            None => {
                let h = reg.fresh();
                reg.bindings.insert(key.clone(), h);
                reg.binding_info.insert(h, key);
                h
            }
        };
        Ok(BindingRef {
            runtime: self.id,
            handle,
        })
    }

    pub fn bind(
        &self,
        instance: InstanceRef,
        required_port: &str,
        target: BindingRef,
    ) -> Result<(), RuntimeError> {
        self.own(instance.runtime)?;
        self.own(target.runtime)?;
        let mut reg = self.lock();
        let (server, server_port) = reg
            .binding_info
            .get(&target.handle)
            .cloned()
            .ok_or(RuntimeError::StaleHandle)?;
        let server_type = reg.instances[&server].type_name.clone();
        let record = reg
            .instances
            .get_mut(&instance.handle)
            .ok_or(RuntimeError::StaleHandle)?;
        if record.started {
            return Err(RuntimeError::AlreadyStarted(record.label.clone()));
        }
        let required = self.types[&record.type_name]
            .port(required_port)
            .filter(|p| p.direction == Direction::Required);
        let Some(required) = required else {
            return Err(RuntimeError::UnknownPort {
                instance: record.label.clone(),
                port: required_port.to_string(),
                direction: "required",
            });
        };
        if record.links.contains_key(required_port) {
            return Err(RuntimeError::AlreadyBound {
                instance: record.label.clone(),
                port: required_port.to_string(),
            });
        }
        let provided = self.types[&server_type]
            .port(&server_port)
            .expect("binding refs point at declared ports");
        if provided.interface != required.interface {
            return Err(RuntimeError::InterfaceMismatch {
                instance: record.label.clone(),
                port: required_port.to_string(),
                required: required.interface.clone(),
                provided: provided.interface.clone(),
            });
        }
        record
            .links
            .insert(required_port.to_string(), (server, server_port));
        Ok(())
    }

    pub fn add_sub_component(
        &self,
        parent: InstanceRef,
        child: InstanceRef,
        name: &str,
    ) -> Result<(), RuntimeError> {
        if self.kind == RuntimeKind::Flat {
            return Err(RuntimeError::Unsupported(self.kind.name().to_string()));
        }
        self.own(parent.runtime)?;
        self.own(child.runtime)?;
        let mut reg = self.lock();
        let (Some(p), Some(c)) = (
            reg.instances.get(&parent.handle),
            reg.instances.get(&child.handle),
        ) else {
            return Err(RuntimeError::StaleHandle);
        };
        for record in [p, c] {
            if record.started {
                return Err(RuntimeError::AlreadyStarted(record.label.clone()));
            }
        }
        if reg.is_ancestor(child.handle, parent.handle) {
            return Err(RuntimeError::Cycle {
                parent: p.label.clone(),
                child: c.label.clone(),
            });
        }
        reg.containment
            .insert((parent.handle, child.handle, name.to_string()));
        reg.parents
            .entry(child.handle)
            .or_default()
            .push(parent.handle);
        Ok(())
    }

    /// Starts an instance once all of its required ports are bound.
    pub fn start(&self, instance: InstanceRef) -> Result<(), RuntimeError> {
        self.own(instance.runtime)?;
        let mut reg = self.lock();
        let record = reg
            .instances
            .get_mut(&instance.handle)
            .ok_or(RuntimeError::StaleHandle)?;
        if record.started {
            return Err(RuntimeError::AlreadyStarted(record.label.clone()));
        }
        let unbound = self.types[&record.type_name]
            .ports
            .iter()
            .filter(|p| p.direction == Direction::Required)
            .find(|p| !record.links.contains_key(&p.name));
        if let Some(port) = unbound {
            return Err(RuntimeError::UnboundPort {
                instance: record.label.clone(),
                port: port.name.clone(),
            });
        }
        record.started = true;
        Ok(())
    }

    pub fn snapshot(&self) -> RuntimeSnapshot {
        let reg = self.lock();
        let label = |h: &u64| reg.instances[h].label.clone();
        RuntimeSnapshot {
            instances: reg
                .instances
                .values()
                .map(|r| {
                    (
                        r.label.clone(),
                        InstanceState {
                            type_name: r.type_name.clone(),
                            site: r.site.clone(),
                            attributes: r.attributes.clone(),
                            links: r
                                .links
                                .iter()
                                .map(|(port, (server, sp))| {
                                    (port.clone(), (label(server), sp.clone()))
                                })
                                .collect(),
                            started: r.started,
                        },
                    )
                })
                .collect(),
            containment: reg
                .containment
                .iter()
                .map(|(p, c, n)| (label(p), label(c), n.clone()))
                .collect(),
            factories: reg.factories.keys().cloned().collect(),
        }
    }
}

/// Value passed between deployment tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeployValue {
    Factory(FactoryRef),
    Instance(InstanceRef),
    Binding(BindingRef),
    /// Configuration and initialization tasks produce nothing.
    Done,
}

/// Drives a [`MockRuntime`] from deployment tasks.
pub struct Deployer<'r> {
    runtime: &'r MockRuntime,
    fail_task: Option<TaskId>,
}

impl<'r> Deployer<'r> {
    pub fn new(runtime: &'r MockRuntime) -> Self {
        Deployer {
            runtime,
            fail_task: None,
        }
    }

    /// Makes the given task fail instead of running. Test hook.
    pub fn failing_on(mut self, task: Option<TaskId>) -> Self {
        self.fail_task = task;
        self
    }
}

fn instance_input(
    inputs: &TaskInputs<DeployValue>,
    role: Option<EdgeRole>,
) -> Result<InstanceRef, String> {
    let value = match role {
        Some(role) => inputs.by_role(role),
        None => inputs.get(InterfaceKind::InstanceProvider),
    };
    match value {
        Some(DeployValue::Instance(i)) => Ok(*i),
        _ => Err("missing InstanceProvider input".to_string()),
    }
}

fn name_param(task: &TaskNode) -> Result<&str, String> {
    task.name_param
        .as_deref()
        .ok_or_else(|| format!("task '{}' has no name parameter", task.id))
}

impl TaskExecutor<DeployValue> for Deployer<'_> {
    fn execute(
        &self,
        task: &TaskNode,
        inputs: &TaskInputs<DeployValue>,
    ) -> Result<DeployValue, String> {
        if self.fail_task.as_ref() == Some(&task.id) {
            return Err("injected failure".to_string());
        }
        let rt = self.runtime;
        let err = |e: RuntimeError| format!("{}: {e}", e.code());
        match task.kind {
            TaskKind::Installation => {
                let TaskTarget::Site {
                    component_type,
                    site,
                } = &task.target
                else {
                    return Err("installation needs a (type, site) target".into());
                };
                rt.install(component_type, site)
                    .map(DeployValue::Factory)
                    .map_err(err)
            }
            TaskKind::Instantiation => {
                let Some(DeployValue::Factory(factory)) =
                    inputs.get(InterfaceKind::FactoryProvider)
                else {
                    return Err("missing FactoryProvider input".into());
                };
                let label = task
                    .instance()
                    .ok_or("instantiation needs an instance target")?;
                rt.instantiate(*factory, label)
                    .map(DeployValue::Instance)
                    .map_err(err)
            }
            TaskKind::AttributeSetter => {
                let instance = instance_input(inputs, None)?;
                let value = task
                    .value_param
                    .clone()
                    .ok_or("attribute setter has no value")?;
                rt.set_attribute(instance, name_param(task)?, value)
                    .map(|_| DeployValue::Done)
                    .map_err(err)
            }
            TaskKind::BindingGetter => {
                let instance = instance_input(inputs, None)?;
                rt.get_binding(instance, name_param(task)?)
                    .map(DeployValue::Binding)
                    .map_err(err)
            }
            TaskKind::BindingSetter => {
                let instance = instance_input(inputs, None)?;
                let Some(DeployValue::Binding(target)) = inputs.get(InterfaceKind::BindingProvider)
                else {
                    return Err("missing BindingProvider input".into());
                };
                rt.bind(instance, name_param(task)?, *target)
                    .map(|_| DeployValue::Done)
                    .map_err(err)
            }
            TaskKind::AddComponent => {
                let parent = instance_input(inputs, Some(EdgeRole::Parent))?;
                let child = instance_input(inputs, Some(EdgeRole::Child))?;
                rt.add_sub_component(parent, child, name_param(task)?)
                    .map(|_| DeployValue::Done)
                    .map_err(err)
            }
            TaskKind::Initialization => {
                let instance = instance_input(inputs, None)?;
                rt.start(instance).map(|_| DeployValue::Done).map_err(err)
            }
        }
    }
}

/// Runs `graph` against `runtime`.
pub fn deploy(graph: &TaskGraph, runtime: &MockRuntime, cfg: &EngineConfig) -> ExecutionTrace {
    engine::execute(graph, &Deployer::new(runtime), cfg)
}
