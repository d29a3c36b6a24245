//! Reference model of the simulated runtime, used to predict the result of
//! random API calls and the snapshot after each one.

use std::collections::{BTreeMap, BTreeSet};

use polydeploy::backends::{
    BindingRef, FactoryRef, InstanceRef, InstanceState, MockRuntime, RuntimeError, RuntimeKind,
    RuntimeSnapshot,
};
use polydeploy::model::{
    client_server, ComponentType, Configuration, Direction, Literal, ValueKind,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct ModelInstance {
    handle: InstanceRef,
    label: String,
    state: InstanceState,
}

struct Model {
    kind: RuntimeKind,
    types: BTreeMap<String, ComponentType>,
    factories: Vec<(FactoryRef, String, String)>,
    instances: Vec<ModelInstance>,
    refs: Vec<(BindingRef, usize, String)>,
    containment: BTreeSet<(String, String, String)>,
    parents: BTreeMap<String, BTreeSet<String>>,
}

impl Model {
    fn snapshot(&self) -> RuntimeSnapshot {
        RuntimeSnapshot {
            instances: self
                .instances
                .iter()
                .map(|i| (i.label.clone(), i.state.clone()))
                .collect(),
            containment: self.containment.clone(),
            factories: self
                .factories
                .iter()
                .map(|(_, t, s)| (t.clone(), s.clone()))
                .collect(),
        }
    }

    fn port(&self, inst: usize, port: &str) -> Option<(Direction, String)> {
        self.types[&self.instances[inst].state.type_name]
            .port(port)
            .map(|p| (p.direction, p.interface.clone()))
    }

    /// Whether `ancestor` is `of` or one of its transitive parents.
    fn is_ancestor(&self, ancestor: &str, of: &str) -> bool {
        let mut stack = vec![of.to_string()];
        let mut seen = BTreeSet::new();
        while let Some(x) = stack.pop() {
            if x == ancestor {
                return true;
            }
            if seen.insert(x.clone()) {
                stack.extend(self.parents.get(&x).into_iter().flatten().cloned());
            }
        }
        false
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct DriveStats {
    pub calls: usize,
    pub started_mutations_rejected: usize,
}

fn check(expected_ok: bool, result: Result<(), RuntimeError>, what: &str) -> Result<(), String> {
    match (expected_ok, result) {
        (true, Ok(())) | (false, Err(_)) => Ok(()),
        (true, Err(e)) => Err(format!("{what}: unexpected {}: {e}", e.code())),
        (false, Ok(())) => Err(format!("{what}: accepted but should fail")),
    }
}

fn literal(rng: &mut ChaCha8Rng) -> Literal {
    match rng.gen_range(0..3) {
        0 => Literal::String(format!("s{}", rng.gen_range(0..100))),
        1 => Literal::Integer(rng.gen_range(-50..50)),
        _ => Literal::Boolean(rng.gen()),
    }
}

/// Issues `calls` random API calls against a fresh runtime built from the
/// types of `config`, checking each outcome and the snapshot after every
/// call against the reference model.
pub fn drive(
    seed: u64,
    kind: RuntimeKind,
    config: &Configuration,
    calls: usize,
) -> Result<DriveStats, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rt = MockRuntime::for_config(kind, config);
    let other = MockRuntime::for_config(kind, config);
    let type_names: Vec<String> = config.types.iter().map(|t| t.name.clone()).collect();
    if type_names.is_empty() {
        return Err("configuration has no types".into());
    }
    let foreign_factory = other
        .install(&type_names[0], "local")
        .map_err(|e| e.to_string())?;
    let foreign_instance = other
        .instantiate(foreign_factory, "x")
        .map_err(|e| e.to_string())?;
    let mut m = Model {
        kind,
        types: config
            .types
            .iter()
            .map(|t| (t.name.clone(), t.clone()))
            .collect(),
        factories: Vec::new(),
        instances: Vec::new(),
        refs: Vec::new(),
        containment: BTreeSet::new(),
        parents: BTreeMap::new(),
    };
    let mut stats = DriveStats::default();
    let sites = ["local", "far"];

    for step in 0..calls {
        let op = rng.gen_range(0..100);
        let n = m.instances.len();
        let result: Result<(), String> = if op < 8 || m.factories.is_empty() {
            let ty = if rng.gen_bool(0.1) {
                "Missing".to_string()
            } else {
                type_names.choose(&mut rng).unwrap().clone()
            };
            let site = *sites.choose(&mut rng).unwrap();
            let ok = m.types.contains_key(&ty);
            match rt.install(&ty, site) {
                Ok(f) => match m.factories.iter().find(|(_, t, s)| *t == ty && s == site) {
                    Some((existing, _, _)) if *existing != f => {
                        Err("install not idempotent".into())
                    }
                    Some(_) => Ok(()),
                    None => {
                        m.factories.push((f, ty.clone(), site.to_string()));
                        Ok(())
                    }
                }
                .and(check(ok, Ok(()), "install")),
                Err(e) => check(ok, Err(e), "install"),
            }
        } else if op < 25 || n == 0 {
            let (factory, fresh) = if rng.gen_bool(0.05) {
                (foreign_factory, false)
            } else {
                (m.factories.choose(&mut rng).unwrap().0, true)
            };
            let label = if n > 0 && rng.gen_bool(0.1) {
                m.instances.choose(&mut rng).unwrap().label.clone()
            } else {
                format!("i{step}")
            };
            let ok = fresh && !m.instances.iter().any(|i| i.label == label);
            match rt.instantiate(factory, &label) {
                Ok(handle) => {
                    let (_, ty, site) = m
                        .factories
                        .iter()
                        .find(|(f, _, _)| *f == factory)
                        .unwrap()
                        .clone();
                    m.instances.push(ModelInstance {
                        handle,
                        label,
                        state: InstanceState {
                            type_name: ty,
                            site,
                            ..Default::default()
                        },
                    });
                    check(ok, Ok(()), "instantiate")
                }
                Err(e) => check(ok, Err(e), "instantiate"),
            }
        } else if op < 40 {
            let i = rng.gen_range(0..n);
            let ty = &m.types[&m.instances[i].state.type_name];
            let name = match ty.attributes.keys().collect::<Vec<_>>().choose(&mut rng) {
                Some(a) if rng.gen_bool(0.9) => (*a).clone(),
                _ => "zz".to_string(),
            };
            let value = match ty.attributes.get(&name) {
                Some(ValueKind::Integer) if rng.gen_bool(0.8) => {
                    Literal::Integer(rng.gen_range(-9..9))
                }
                Some(ValueKind::Boolean) if rng.gen_bool(0.8) => Literal::Boolean(rng.gen()),
                Some(ValueKind::String) if rng.gen_bool(0.8) => Literal::String("v".into()),
                _ => literal(&mut rng),
            };
            let inst = &m.instances[i];
            let ok = !inst.state.started && ty.attributes.get(&name) == Some(&value.kind());
            if inst.state.started {
                stats.started_mutations_rejected += 1;
            }
            let r = rt.set_attribute(inst.handle, &name, value.clone());
            if r.is_ok() {
                m.instances[i].state.attributes.insert(name, value);
            }
            check(ok, r, "set_attribute")
        } else if op < 55 {
            let i = rng.gen_range(0..n);
            let ports: Vec<String> = m.types[&m.instances[i].state.type_name]
                .ports
                .iter()
                .map(|p| p.name.clone())
                .collect();
            let port = match ports.choose(&mut rng) {
                Some(p) if rng.gen_bool(0.9) => p.clone(),
                _ => "zz".to_string(),
            };
            let ok = matches!(m.port(i, &port), Some((Direction::Provided, _)));
            match rt.get_binding(m.instances[i].handle, &port) {
                Ok(b) => {
                    let known = m
                        .refs
                        .iter()
                        .find(|(_, inst, p)| *inst == i && *p == port)
                        .map(|r| r.0);
                    match known {
                        Some(existing) if existing != b => Err("get_binding handle changed".into()),
                        Some(_) => Ok(()),
                        None => {
                            m.refs.push((b, i, port));
                            Ok(())
                        }
                    }
                    .and(check(ok, Ok(()), "get_binding"))
                }
                Err(e) => check(ok, Err(e), "get_binding"),
            }
        } else if op < 72 && !m.refs.is_empty() {
            let i = rng.gen_range(0..n);
            let required: Vec<String> = m.types[&m.instances[i].state.type_name]
                .ports
                .iter()
                .filter(|p| p.direction == Direction::Required)
                .map(|p| p.name.clone())
                .collect();
            let port = match required.choose(&mut rng) {
                Some(p) if rng.gen_bool(0.9) => p.clone(),
                _ => "zz".to_string(),
            };
            let (target, server, server_port) = m.refs.choose(&mut rng).unwrap().clone();
            let inst = &m.instances[i];
            let provided_iface = m.port(server, &server_port).map(|p| p.1);
            let ok = !inst.state.started
                && matches!(m.port(i, &port), Some((Direction::Required, ref iface)) if Some(iface) == provided_iface.as_ref())
                && !inst.state.links.contains_key(&port);
            if inst.state.started {
                stats.started_mutations_rejected += 1;
            }
            let r = rt.bind(inst.handle, &port, target);
            if r.is_ok() {
                let server_label = m.instances[server].label.clone();
                m.instances[i]
                    .state
                    .links
                    .insert(port, (server_label, server_port));
            }
            check(ok, r, "bind")
        } else if op < 82 {
            let p = rng.gen_range(0..n);
            let c = rng.gen_range(0..n);
            let name = format!("n{}", rng.gen_range(0..3));
            let (pl, cl) = (m.instances[p].label.clone(), m.instances[c].label.clone());
            let started = m.instances[p].state.started || m.instances[c].state.started;
            let ok = m.kind == RuntimeKind::Hierarchical && !started && !m.is_ancestor(&cl, &pl);
            let r = rt.add_sub_component(m.instances[p].handle, m.instances[c].handle, &name);
            if r.is_ok() {
                m.containment.insert((pl.clone(), cl.clone(), name));
                m.parents.entry(cl).or_default().insert(pl);
            }
            check(ok, r, "add_sub_component")
        } else if op < 90 {
            let i = rng.gen_range(0..n);
            let inst = &m.instances[i];
            let all_bound = m.types[&inst.state.type_name]
                .ports
                .iter()
                .filter(|p| p.direction == Direction::Required)
                .all(|p| inst.state.links.contains_key(&p.name));
            let ok = !inst.state.started && all_bound;
            let r = rt.start(inst.handle);
            if r.is_ok() {
                m.instances[i].state.started = true;
            }
            check(ok, r, "start")
        } else {
            let r = match rng.gen_range(0..3) {
                0 => rt.start(foreign_instance),
                1 => rt.set_attribute(foreign_instance, "nom", Literal::Integer(0)),
                _ => rt.get_binding(foreign_instance, "s").map(|_| ()),
            };
            match r {
                Err(RuntimeError::StaleHandle) => Ok(()),
                other => Err(format!("foreign handle gave {other:?}")),
            }
        };
        stats.calls += 1;
        result.map_err(|e| format!("seed {seed} step {step}: {e}"))?;
        let (got, want) = (rt.snapshot(), m.snapshot());
        if got != want {
            return Err(format!(
                "seed {seed} step {step}: snapshot diverged\n--- runtime\n{}--- model\n{}",
                got.to_text(),
                want.to_text()
            ));
        }
    }
    Ok(stats)
}

/// Types used by the random drivers: the client/server pair plus a type
/// that both provides and requires the same interface.
pub fn driver_types() -> Configuration {
    let mut config = client_server();
    config.declare_interface("IOther");
    config.types.push(
        ComponentType::new("Relay")
            .provides("out", "IService")
            .requires("in", "IService")
            .requires("aux", "IOther")
            .attribute("hops", ValueKind::Integer)
            .attribute("on", ValueKind::Boolean),
    );
    config
        .types
        .push(ComponentType::new("Other").provides("o", "IOther"));
    config.instances.clear();
    config.bindings.clear();
    config
}

/// Runs one directed scenario per documented runtime error and returns the
/// codes observed.
pub fn directed_error_codes() -> BTreeSet<&'static str> {
    let mut codes = BTreeSet::new();
    let mut note = |r: Result<(), RuntimeError>| {
        if let Err(e) = r {
            codes.insert(e.code());
        }
    };
    let types = driver_types();
    let hier = MockRuntime::hierarchical(&types);
    let flat = MockRuntime::flat(&types);

    note(hier.install("Nope", "local").map(|_| ()));

    let fs = hier.install("Server", "local").unwrap();
    let fc = hier.install("Client", "local").unwrap();
    let fo = hier.install("Other", "local").unwrap();
    let srv = hier.instantiate(fs, "srv").unwrap();
    let cli = hier.instantiate(fc, "cli").unwrap();
    let oth = hier.instantiate(fo, "oth").unwrap();
    note(hier.instantiate(fs, "srv").map(|_| ()));

    let foreign = flat
        .instantiate(flat.install("Server", "local").unwrap(), "srv")
        .unwrap();
    note(hier.start(foreign));

    note(hier.set_attribute(srv, "missing", Literal::Integer(1)));
    note(hier.set_attribute(srv, "nom", Literal::Integer(1)));

    note(hier.get_binding(cli, "s").map(|_| ()));
    let s_ref = hier.get_binding(srv, "s").unwrap();
    let o_ref = hier.get_binding(oth, "o").unwrap();
    note(hier.bind(cli, "s", o_ref));

    note(hier.start(cli));
    hier.bind(cli, "s", s_ref).unwrap();
    note(hier.bind(cli, "s", s_ref));

    hier.add_sub_component(srv, cli, "cli").unwrap();
    note(hier.add_sub_component(cli, srv, "srv"));
    note(hier.add_sub_component(srv, srv, "me"));

    let flat_srv = flat
        .instantiate(flat.install("Server", "local").unwrap(), "srv2")
        .unwrap();
    note(flat.add_sub_component(foreign, flat_srv, "x"));

    hier.start(srv).unwrap();
    note(hier.start(srv));
    note(hier.set_attribute(srv, "nom", Literal::String("late".into())));

    codes
}

pub const DOCUMENTED_ERROR_CODES: [&str; 12] = [
    "UNKNOWN_TYPE",
    "STALE_HANDLE",
    "UNKNOWN_ATTRIBUTE",
    "TYPE_MISMATCH",
    "ALREADY_STARTED",
    "UNKNOWN_PORT",
    "ALREADY_BOUND",
    "INTERFACE_MISMATCH",
    "UNSUPPORTED",
    "CYCLE",
    "UNBOUND_PORT",
    "DUPLICATE_LABEL",
];
