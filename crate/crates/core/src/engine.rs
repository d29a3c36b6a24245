//! Generic task orchestration.
//!
//! For every task the engine keeps the set of tasks it depends on
//! (predecessors) and the set of tasks depending on it (successors). Tasks
//! with no remaining predecessors are ready; when a task ends it is removed
//! from the predecessor set of each of its successors. If the ready set
//! empties while tasks remain, those tasks are reported as a cycle.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::{self, Write as _};
use std::panic::{self, AssertUnwindSafe};
use std::sync::{Condvar, Mutex};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::planner::{EdgeRole, InterfaceKind, TaskGraph, TaskId, TaskNode};

/// Predecessor and successor sets for every task of a graph.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DependencyLists {
    pub predecessors: BTreeMap<TaskId, BTreeSet<TaskId>>,
    pub successors: BTreeMap<TaskId, BTreeSet<TaskId>>,
}

pub fn build_dependency_lists(graph: &TaskGraph) -> DependencyLists {
    let mut lists = DependencyLists::default();
    for node in graph.nodes() {
        lists.predecessors.insert(node.id.clone(), BTreeSet::new());
        lists.successors.insert(node.id.clone(), BTreeSet::new());
    }
    for e in graph.edges() {
        lists
            .predecessors
            .get_mut(&e.to)
            .expect("edge target in graph")
            .insert(e.from.clone());
        lists
            .successors
            .get_mut(&e.from)
            .expect("edge source in graph")
            .insert(e.to.clone());
    }
    lists
}

/// Order in which simultaneously ready tasks are claimed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    /// Smallest task id first.
    #[default]
    Lexicographic,
    /// A fixed pseudo-random priority per task, derived from the seed.
    Shuffled(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineConfig {
    pub workers: usize,
    pub tie_break: TieBreak,
    pub fail_fast: bool,
}

impl EngineConfig {
    /// # Panics
    /// If `workers` is zero.
    pub fn new(workers: usize) -> Self {
        assert!(workers >= 1, "an engine needs at least one worker");
        EngineConfig {
            workers,
            tie_break: TieBreak::Lexicographic,
            fail_fast: true,
        }
    }

    pub fn with_tie_break(mut self, tie_break: TieBreak) -> Self {
        self.tie_break = tie_break;
        self
    }

    pub fn with_fail_fast(mut self, fail_fast: bool) -> Self {
        self.fail_fast = fail_fast;
        self
    }
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig::new(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskInput<O> {
    pub provider: TaskId,
    pub interface: InterfaceKind,
    pub role: Option<EdgeRole>,
    pub value: O,
}

/// Outputs of a task's predecessors, one entry per incoming edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskInputs<O> {
    entries: Vec<TaskInput<O>>,
}

impl<O> TaskInputs<O> {
    pub fn iter(&self) -> impl Iterator<Item = &TaskInput<O>> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The first input received through `interface`.
    pub fn get(&self, interface: InterfaceKind) -> Option<&O> {
        self.entries
            .iter()
            .find(|i| i.interface == interface)
            .map(|i| &i.value)
    }

    pub fn by_role(&self, role: EdgeRole) -> Option<&O> {
        self.entries
            .iter()
            .find(|i| i.role == Some(role))
            .map(|i| &i.value)
    }
}

/// Runs one task. Implementations must tolerate concurrent calls on
/// distinct tasks; the engine never calls it twice for the same task.
pub trait TaskExecutor<O>: Sync {
    fn execute(&self, task: &TaskNode, inputs: &TaskInputs<O>) -> Result<O, String>;
}

impl<O, F> TaskExecutor<O> for F
where
    F: Fn(&TaskNode, &TaskInputs<O>) -> Result<O, String> + Sync,
{
    fn execute(&self, task: &TaskNode, inputs: &TaskInputs<O>) -> Result<O, String> {
        self(task, inputs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Start,
    End,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub seq: u64,
    pub phase: Phase,
    pub task: TaskId,
    pub worker: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Completed,
    CycleDetected { remaining: BTreeSet<TaskId> },
    TaskFailed { task: TaskId, reason: String },
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Completed => f.write_str("completed"),
            Outcome::CycleDetected { remaining } => {
                f.write_str("cycle_detected:")?;
                for (i, id) in remaining.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    f.write_str(id.as_str())?;
                }
                Ok(())
            }
            Outcome::TaskFailed { task, .. } => write!(f, "task_failed:{task}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionTrace {
    pub events: Vec<TraceEvent>,
    pub outcome: Outcome,
}

impl ExecutionTrace {
    /// Task ids in the order they started.
    pub fn start_order(&self) -> Vec<&TaskId> {
        self.events
            .iter()
            .filter(|e| e.phase == Phase::Start)
            .map(|e| &e.task)
            .collect()
    }

    pub fn seq_of(&self, task: &TaskId, phase: Phase) -> Option<u64> {
        self.events
            .iter()
            .find(|e| e.phase == phase && &e.task == task)
            .map(|e| e.seq)
    }

    /// Newline-delimited `EVT` records followed by one `OUTCOME` line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            let phase = match e.phase {
                Phase::Start => "START",
                Phase::End => "END",
            };
            writeln!(out, "EVT {} {phase} {} worker={}", e.seq, e.task, e.worker).unwrap();
        }
        writeln!(out, "OUTCOME {}", self.outcome).unwrap();
        out
    }
}

struct State<O> {
    /// Working copy of the predecessor lists, consumed as tasks end.
    waiting_on: Vec<HashSet<usize>>,
    ready: BTreeSet<(usize, usize)>,
    outputs: Vec<Option<O>>,
    ended: Vec<bool>,
    events: Vec<TraceEvent>,
    running: usize,
    failure: Option<(usize, String)>,
}

impl<O> State<O> {
    fn record(&mut self, phase: Phase, task: &TaskId, worker: usize) {
        let seq = self.events.len() as u64 + 1;
        self.events.push(TraceEvent {
            seq,
            phase,
            task: task.clone(),
            worker,
        });
    }
}

struct Run<'a, O, E: ?Sized> {
    nodes: Vec<&'a TaskNode>,
    successors: Vec<Vec<usize>>,
    incoming: Vec<Vec<(usize, InterfaceKind, Option<EdgeRole>)>>,
    priority: Vec<usize>,
    executor: &'a E,
    fail_fast: bool,
    state: Mutex<State<O>>,
    wake: Condvar,
}

impl<'a, O: Clone + Send, E: TaskExecutor<O> + ?Sized> Run<'a, O, E> {
    fn worker(&self, worker: usize) {
        let mut st = self.state.lock().unwrap();
        loop {
            let halted = self.fail_fast && st.failure.is_some();
            let next = if halted { None } else { st.ready.pop_first() };
            if let Some((_, task)) = next {
                let node = self.nodes[task];
                st.record(Phase::Start, &node.id, worker);
                st.running += 1;
                let inputs = TaskInputs {
                    entries: self.incoming[task]
                        .iter()
                        .map(|&(from, interface, role)| TaskInput {
                            provider: self.nodes[from].id.clone(),
                            interface,
                            role,
                            value: st.outputs[from].clone().expect("predecessor ended"),
                        })
                        .collect(),
                };
                drop(st);

                let result =
                    panic::catch_unwind(AssertUnwindSafe(|| self.executor.execute(node, &inputs)))
                        .unwrap_or_else(|_| Err("executor panicked".to_string()));

                st = self.state.lock().unwrap();
                st.record(Phase::End, &node.id, worker);
                st.running -= 1;
                st.ended[task] = true;
                match result {
                    Ok(output) => {
                        st.outputs[task] = Some(output);
                        for &succ in &self.successors[task] {
                            st.waiting_on[succ].remove(&task);
                            if st.waiting_on[succ].is_empty() {
                                let p = self.priority[succ];
                                st.ready.insert((p, succ));
                            }
                        }
                    }
                    Err(reason) => {
                        if st.failure.is_none() {
                            st.failure = Some((task, reason));
                        }
                    }
                }
                self.wake.notify_all();
                continue;
            }
            if st.running == 0 {
                self.wake.notify_all();
                return;
            }
            st = self.wake.wait(st).unwrap();
        }
    }
}

/// Executes every task of `graph` in a dependency-respecting order.
///
/// With one worker and the lexicographic tie-break the schedule is fully
/// determined: the smallest ready task id always runs next. Failures,
/// panics included, and cycles are reported through the trace outcome.
pub fn execute<O, E>(graph: &TaskGraph, executor: &E, cfg: &EngineConfig) -> ExecutionTrace
where
    O: Clone + Send,
    E: TaskExecutor<O> + ?Sized,
{
    let lists = build_dependency_lists(graph);
    let nodes: Vec<&TaskNode> = graph.nodes().collect();
    let index: BTreeMap<&TaskId, usize> =
        nodes.iter().enumerate().map(|(i, n)| (&n.id, i)).collect();

    let priority: Vec<usize> = match cfg.tie_break {
        TieBreak::Lexicographic => (0..nodes.len()).collect(),
        TieBreak::Shuffled(seed) => {
            let mut order: Vec<usize> = (0..nodes.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let mut priority = vec![0; nodes.len()];
            for (rank, task) in order.into_iter().enumerate() {
                priority[task] = rank;
            }
            priority
        }
    };

    let waiting_on: Vec<HashSet<usize>> = nodes
        .iter()
        .map(|n| lists.predecessors[&n.id].iter().map(|p| index[p]).collect())
        .collect();
    let successors: Vec<Vec<usize>> = nodes
        .iter()
        .map(|n| lists.successors[&n.id].iter().map(|s| index[s]).collect())
        .collect();
    let mut incoming = vec![Vec::new(); nodes.len()];
    for e in graph.edges() {
        incoming[index[&e.to]].push((index[&e.from], e.interface, e.role));
    }
    let ready = waiting_on
        .iter()
        .enumerate()
        .filter(|(_, preds)| preds.is_empty())
        .map(|(i, _)| (priority[i], i))
        .collect();

    let n = nodes.len();
    let run = Run {
        nodes,
        successors,
        incoming,
        priority,
        executor,
        fail_fast: cfg.fail_fast,
        state: Mutex::new(State {
            waiting_on,
            ready,
            outputs: vec![None; n],
            ended: vec![false; n],
            events: Vec::new(),
            running: 0,
            failure: None,
        }),
        wake: Condvar::new(),
    };

    let workers = cfg.workers.max(1);
    if workers == 1 {
        run.worker(0);
    } else {
        std::thread::scope(|scope| {
            for w in 0..workers {
                let run = &run;
                scope.spawn(move || run.worker(w));
            }
        });
    }

    let state = run.state.into_inner().unwrap();
    let outcome = if let Some((task, reason)) = state.failure {
        Outcome::TaskFailed {
            task: run.nodes[task].id.clone(),
            reason,
        }
    } else if state.ended.iter().all(|&e| e) {
        Outcome::Completed
    } else {
        Outcome::CycleDetected {
            remaining: state
                .ended
                .iter()
                .enumerate()
                .filter(|(_, &e)| !e)
                .map(|(i, _)| run.nodes[i].id.clone())
                .collect(),
        }
    };
    ExecutionTrace {
        events: state.events,
        outcome,
    }
}
