//! Shared helpers for integration tests: a seeded configuration generator
//! and oracles that do not rely on the library's own graph code.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use polydeploy::engine::{ExecutionTrace, Phase};
use polydeploy::model::{
    Binding, ComponentType, Configuration, Containment, Direction, Instance, Literal, ValueKind,
};
use polydeploy::planner::{TaskGraph, TaskId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub mod runtime_model;

pub const MAX_INSTANCES: usize = 20;
pub const MAX_BINDINGS: usize = 30;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).expect("fixture readable")
}

#[derive(Debug, Clone, Copy)]
pub struct GenOptions {
    pub hierarchy: bool,
}

const SITES: [&str; 3] = ["local", "node-a", "node_b"];

fn random_string(rng: &mut ChaCha8Rng) -> String {
    const ALPHABET: &[char] = &[
        'a', 'b', 'Z', '0', '9', ' ', '-', '_', '/', '.', '"', '\\', '\n', '\t', '\r', 'é', '→',
        '#', '{', '}', '<', '&',
    ];
    let len = rng.gen_range(0..12);
    (0..len).map(|_| *ALPHABET.choose(rng).unwrap()).collect()
}

fn random_literal(rng: &mut ChaCha8Rng, kind: ValueKind) -> Literal {
    match kind {
        ValueKind::String => Literal::String(random_string(rng)),
        ValueKind::Integer => Literal::Integer(match rng.gen_range(0..4) {
            0 => i64::MIN,
            1 => i64::MAX,
            _ => rng.gen_range(-1_000_000..1_000_000),
        }),
        ValueKind::Boolean => Literal::Boolean(rng.gen()),
    }
}

/// Builds a valid, fully bound configuration from `seed`.
///
/// Type `T0` provides one port per interface and requires nothing, and the
/// first instance is always of type `T0`, so every required port has a
/// provider and every interface is used by some port.
pub fn generate(seed: u64, opts: GenOptions) -> Configuration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut config = Configuration::default();

    let n_ifaces = rng.gen_range(1..=4);
    let ifaces: Vec<String> = (0..n_ifaces).map(|i| format!("I{i}")).collect();
    for i in &ifaces {
        config.declare_interface(i);
    }

    let kinds = [ValueKind::String, ValueKind::Integer, ValueKind::Boolean];
    let n_types = rng.gen_range(1..=5);
    for t in 0..n_types {
        let mut ty = ComponentType::new(format!("T{t}"));
        if t == 0 {
            for (i, iface) in ifaces.iter().enumerate() {
                ty = ty.provides(&format!("p{i}"), iface);
            }
        } else {
            for p in 0..rng.gen_range(0..=2) {
                ty = ty.provides(&format!("p{p}"), ifaces.choose(&mut rng).unwrap());
            }
            for r in 0..rng.gen_range(0..=2) {
                ty = ty.requires(&format!("r{r}"), ifaces.choose(&mut rng).unwrap());
            }
        }
        for a in 0..rng.gen_range(0..=3) {
            ty = ty.attribute(&format!("a{a}"), *kinds.choose(&mut rng).unwrap());
        }
        if rng.gen_bool(0.3) {
            ty = ty.artifact(&format!("lib/t{t}.so"));
        }
        config.types.push(ty);
    }

    let n_instances = rng.gen_range(0..=MAX_INSTANCES);
    let mut bindings_left = MAX_BINDINGS;
    for i in 0..n_instances {
        let mut ty_idx = if i == 0 { 0 } else { rng.gen_range(0..n_types) };
        let required = |idx: usize| {
            config.types[idx]
                .ports
                .iter()
                .filter(|p| p.direction == Direction::Required)
                .count()
        };
        if required(ty_idx) > bindings_left {
            ty_idx = 0;
        }
        bindings_left -= required(ty_idx);
        let ty = &config.types[ty_idx];
        let name = if rng.gen_bool(0.5) {
            format!("c{i}")
        } else {
            format!("comp-{i}")
        };
        let mut inst = Instance::new(name, ty.name.clone()).at(SITES.choose(&mut rng).unwrap());
        for (attr, kind) in &ty.attributes {
            if rng.gen_bool(0.7) {
                inst = inst.with(attr, random_literal(&mut rng, *kind));
            }
        }
        config.instances.push(inst);
    }

    let mut providers: BTreeMap<&str, Vec<(&str, &str)>> = BTreeMap::new();
    for inst in &config.instances {
        let ty = config.component_type(&inst.type_name).unwrap();
        for p in ty
            .ports
            .iter()
            .filter(|p| p.direction == Direction::Provided)
        {
            providers
                .entry(p.interface.as_str())
                .or_default()
                .push((inst.id.as_str(), p.name.as_str()));
        }
    }
    let mut bindings = Vec::new();
    for inst in &config.instances {
        let ty = config.component_type(&inst.type_name).unwrap();
        for p in ty
            .ports
            .iter()
            .filter(|p| p.direction == Direction::Required)
        {
            let (server, port) = *providers[p.interface.as_str()].choose(&mut rng).unwrap();
            bindings.push(Binding::new(&inst.id, &p.name, server, port));
        }
    }
    config.bindings = bindings;

    if opts.hierarchy {
        let ids: Vec<String> = config.instances.iter().map(|i| i.id.clone()).collect();
        for (c, child) in ids.iter().enumerate().skip(1) {
            if rng.gen_bool(0.4) {
                let parent = &ids[rng.gen_range(0..c)];
                config
                    .containments
                    .push(Containment::new(parent, child, child));
            }
        }
    }

    config.instances.shuffle(&mut rng);
    config.bindings.shuffle(&mut rng);
    config
}

/// Generates with hierarchy on for roughly half the seeds.
pub fn generate_mixed(seed: u64) -> Configuration {
    generate(
        seed,
        GenOptions {
            hierarchy: seed % 2 == 1,
        },
    )
}

/// Depth-first acyclicity check over raw edge pairs.
pub fn is_acyclic(nodes: &BTreeSet<String>, edges: &[(String, String)]) -> bool {
    let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (a, b) in edges {
        adj.entry(a.as_str()).or_default().push(b.as_str());
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut color: BTreeMap<&str, u8> = nodes.iter().map(|n| (n.as_str(), 0)).collect();
    for start in nodes {
        if color[start.as_str()] != 0 {
            continue;
        }
        let mut stack: Vec<(&str, usize)> = vec![(start.as_str(), 0)];
        color.insert(start.as_str(), 1);
        while let Some((node, idx)) = stack.pop() {
            let next = adj.get(node).and_then(|v| v.get(idx)).copied();
            match next {
                Some(succ) => {
                    stack.push((node, idx + 1));
                    match color[succ] {
                        1 => return false,
                        0 => {
                            color.insert(succ, 1);
                            stack.push((succ, 0));
                        }
                        _ => {}
                    }
                }
                None => {
                    color.insert(node, 2);
                }
            }
        }
    }
    true
}

pub fn edge_pairs(graph: &TaskGraph) -> Vec<(String, String)> {
    graph
        .edges()
        .map(|e| (e.from.to_string(), e.to.to_string()))
        .collect()
}

pub fn node_ids(graph: &TaskGraph) -> BTreeSet<String> {
    graph.nodes().map(|n| n.id.to_string()).collect()
}

/// Returns a description of every way `trace` fails to be a complete,
/// dependency-respecting execution of `graph`.
pub fn linear_extension_violations(graph: &TaskGraph, trace: &ExecutionTrace) -> Vec<String> {
    let mut problems = Vec::new();
    let mut starts: BTreeMap<&TaskId, u64> = BTreeMap::new();
    let mut ends: BTreeMap<&TaskId, u64> = BTreeMap::new();
    let mut last_seq = 0;
    for e in &trace.events {
        if e.seq != last_seq + 1 {
            problems.push(format!("sequence gap before {}", e.seq));
        }
        last_seq = e.seq;
        let map = match e.phase {
            Phase::Start => &mut starts,
            Phase::End => &mut ends,
        };
        if map.insert(&e.task, e.seq).is_some() {
            problems.push(format!("{} {:?} twice", e.task, e.phase));
        }
    }
    for node in graph.nodes() {
        match (starts.get(&node.id), ends.get(&node.id)) {
            (Some(s), Some(e)) if s < e => {}
            other => problems.push(format!("{} has start/end {other:?}", node.id)),
        }
    }
    for edge in graph.edges() {
        if let (Some(end), Some(start)) = (ends.get(&edge.from), starts.get(&edge.to)) {
            if end > start {
                problems.push(format!("{} started before {} ended", edge.to, edge.from));
            }
        }
    }
    problems
}

/// Every topological order of the graph, by exhaustive recursive search.
pub fn all_linear_extensions(
    nodes: &BTreeSet<String>,
    edges: &[(String, String)],
) -> Vec<Vec<String>> {
    fn extend(
        placed: &mut Vec<String>,
        remaining: &mut BTreeSet<String>,
        edges: &[(String, String)],
        out: &mut Vec<Vec<String>>,
    ) {
        if remaining.is_empty() {
            out.push(placed.clone());
            return;
        }
        let candidates: Vec<String> = remaining
            .iter()
            .filter(|n| !edges.iter().any(|(a, b)| b == *n && remaining.contains(a)))
            .cloned()
            .collect();
        for n in candidates {
            remaining.remove(&n);
            placed.push(n.clone());
            extend(placed, remaining, edges, out);
            placed.pop();
            remaining.insert(n);
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::new(), &mut nodes.clone(), edges, &mut out);
    out
}

/// Tasks reachable from `from` along edges, including `from` itself.
pub fn reachable(from: &BTreeSet<String>, edges: &[(String, String)]) -> BTreeSet<String> {
    let mut seen = from.clone();
    let mut frontier: Vec<String> = from.iter().cloned().collect();
    while let Some(n) = frontier.pop() {
        for (a, b) in edges {
            if *a == n && seen.insert(b.clone()) {
                frontier.push(b.clone());
            }
        }
    }
    seen
}

/// A graph with a `k`-cycle fed by an upstream task, two downstream tasks
/// hanging off the cycle and an unrelated chain. Returns the graph and the
/// cycle's task ids.
pub fn graph_with_cycle(k: usize) -> (TaskGraph, BTreeSet<String>) {
    use polydeploy::planner::{DependencyEdge, InterfaceKind, TaskKind, TaskNode, TaskTarget};
    let node = |id: &str| {
        TaskNode::custom(
            id,
            TaskKind::Initialization,
            TaskTarget::Instance(id.to_string()),
        )
    };
    let cycle: Vec<String> = (0..k).map(|i| format!("cycle-{i}")).collect();
    let mut ids: Vec<String> = vec![
        "up".into(),
        "down-a".into(),
        "down-b".into(),
        "side-a".into(),
        "side-b".into(),
    ];
    ids.extend(cycle.iter().cloned());
    let mut pairs: Vec<(String, String)> = vec![
        ("up".into(), cycle[0].clone()),
        (cycle[k - 1].clone(), "down-a".into()),
        ("down-a".into(), "down-b".into()),
        ("up".into(), "side-a".into()),
        ("side-a".into(), "side-b".into()),
    ];
    for i in 0..k {
        pairs.push((cycle[i].clone(), cycle[(i + 1) % k].clone()));
    }
    let edges = pairs.iter().map(|(a, b)| {
        DependencyEdge::new(
            &TaskId::new(a.as_str()),
            &TaskId::new(b.as_str()),
            InterfaceKind::InstanceConfiguration,
        )
    });
    let graph = TaskGraph::from_parts(ids.iter().map(|id| node(id)), edges).expect("well-formed");
    (graph, cycle.into_iter().collect())
}
