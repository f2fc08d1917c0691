//! The lifecycle state machine.
//!
//! Rules, in scheduler priority order:
//!
//! | rule       | premise                                                    | effect                                   |
//! |------------|------------------------------------------------------------|------------------------------------------|
//! | EXECUTE    | slice launched, deps executed, all children executed       | log `executed`                           |
//! | LAUNCH     | slice mapped, deps executed                                | log `launched`                           |
//! | MAP        | slice in an M queue, sibling deps mapped                   | log `mapped`, leave the queue            |
//! | LOCAL      | head of an E queue maps to one processor                   | move to that node's M queue              |
//! | DISTRIBUTE | head of an E queue maps to several processors              | split off the minimum processor's points |
//! | ENQUEUE    | parent launched, earlier siblings enqueued                 | log `enqueued`, push on the parent's node|
//!
//! A task that was distributed reaches a stage when all of its leaf slices
//! have; at that moment an entry for the task itself is logged with its
//! home processor, the minimum processor among its points.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{IndexTask, TaskGraph};
use crate::dsl::{BindingTable, EvalError, MappingFunction};
use crate::procspace::{MachineShape, ProcessorRef, Tuple};

/// Per-point placement, the combined SHARD and MAP decision.
pub trait PointMapper {
    fn map_point(&self, task: &str, ipoint: &Tuple, ispace: &Tuple) -> Result<ProcessorRef, EvalError>;
}

impl PointMapper for MappingFunction {
    fn map_point(&self, _task: &str, ipoint: &Tuple, ispace: &Tuple) -> Result<ProcessorRef, EvalError> {
        self.call(ipoint, ispace)
    }
}

impl PointMapper for BindingTable {
    fn map_point(&self, task: &str, ipoint: &Tuple, ispace: &Tuple) -> Result<ProcessorRef, EvalError> {
        self.get(task).ok_or_else(|| EvalError::NoBinding(task.to_string()))?.call(ipoint, ispace)
    }
}

/// Adapts a closure.
pub struct FnMapper<F>(pub F);

impl<F> PointMapper for FnMapper<F>
where
    F: Fn(&str, &Tuple, &Tuple) -> Result<ProcessorRef, EvalError>,
{
    fn map_point(&self, task: &str, ipoint: &Tuple, ispace: &Tuple) -> Result<ProcessorRef, EvalError> {
        (self.0)(task, ipoint, ispace)
    }
}

/// Every point of every non-root task, mapped once. Also a mapper itself,
/// so repeated simulations and checks of one graph skip re-evaluation.
#[derive(Clone, Debug, Default)]
pub struct PointTable {
    table: HashMap<String, HashMap<Tuple, ProcessorRef>>,
}

impl PointTable {
    pub fn build(graph: &TaskGraph, mapper: &dyn PointMapper, machine: MachineShape) -> Result<Self, SimError> {
        let mut table = HashMap::with_capacity(graph.len());
        for (i, task) in graph.tasks().iter().enumerate() {
            if i == graph.root() {
                continue;
            }
            let mut per_task = HashMap::with_capacity(task.points.len());
            for pt in &task.points {
                per_task.insert(pt.clone(), map_checked(mapper, task, pt, machine)?);
            }
            table.insert(task.id.clone(), per_task);
        }
        Ok(PointTable { table })
    }
}

impl PointMapper for PointTable {
    fn map_point(&self, task: &str, ipoint: &Tuple, _ispace: &Tuple) -> Result<ProcessorRef, EvalError> {
        self.table
            .get(task)
            .and_then(|t| t.get(ipoint))
            .copied()
            .ok_or_else(|| EvalError::NoBinding(format!("{task} at {ipoint}")))
    }
}

fn map_checked(mapper: &dyn PointMapper, task: &IndexTask, pt: &Tuple, machine: MachineShape) -> Result<ProcessorRef, SimError> {
    let p = mapper
        .map_point(&task.id, pt, &task.ispace)
        .map_err(|source| SimError::Mapping { task: task.id.clone(), point: pt.clone(), source })?;
    if p.node >= machine.nodes || p.proc >= machine.procs_per_node {
        return Err(SimError::ProcessorOutOfRange { task: task.id.clone(), point: pt.clone(), proc: p });
    }
    Ok(p)
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("mapping task `{task}` at {point}: {source}")]
    Mapping { task: String, point: Tuple, source: EvalError },
    #[error("task `{task}` maps {point} to {proc}, outside the machine")]
    ProcessorOutOfRange { task: String, point: Tuple, proc: ProcessorRef },
    #[error("task `{0}` has no points")]
    EmptyTask(String),
    #[error("no rule applies but `{task}` has not executed: {premise}")]
    Stuck { task: String, premise: String },
    #[error("exceeded {0} steps")]
    StepLimit(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Enqueued,
    Mapped,
    Launched,
    Executed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub stage: Stage,
    pub task: String,
    /// For `enqueued`, the node whose queue received the task.
    pub node: u32,
    /// Absent for `enqueued`.
    pub proc: Option<u32>,
    pub step: u64,
}

impl LogEntry {
    pub fn processor(&self) -> Option<ProcessorRef> {
        self.proc.map(|proc| ProcessorRef { node: self.node, proc })
    }
}

/// A slice that was mapped to a single processor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceRecord {
    pub id: String,
    pub origin: String,
    pub points: Vec<Tuple>,
    pub proc: ProcessorRef,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistributionRecord {
    pub step: u64,
    pub task: String,
    pub left: String,
    pub right: String,
    pub p_left: ProcessorRef,
    pub p_right: ProcessorRef,
    pub left_points: Vec<Tuple>,
    pub right_points: Vec<Tuple>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcStats {
    pub node: u32,
    pub proc: u32,
    pub tasks: u64,
    pub points: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub entries: Vec<LogEntry>,
    pub slices: Vec<SliceRecord>,
    pub distributions: Vec<DistributionRecord>,
    pub stats: Vec<ProcStats>,
    pub steps: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Rule {
    Execute,
    Launch,
    Map,
    Local,
    Distribute,
    Enqueue,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheduler {
    /// Highest-priority rule first, ties to the smallest task id.
    Priority,
    /// Uniform over all applicable (rule, task) pairs.
    Random(u64),
}

/// What SHARD decides for a task.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Shard {
    Local { node: u32, proc: ProcessorRef },
    /// `left` holds the points of the minimum processor, `right` the rest.
    Distribute { left: IndexTask, right: IndexTask, p_left: ProcessorRef, p_right: ProcessorRef },
}

/// SHARD for a stand-alone task. Sub-task ids extend the task id.
pub fn shard_policy(task: &IndexTask, mapper: &dyn PointMapper, ispace: &Tuple) -> Result<Shard, SimError> {
    if task.points.is_empty() {
        return Err(SimError::EmptyTask(task.id.clone()));
    }
    let procs = task
        .points
        .iter()
        .map(|pt| {
            mapper
                .map_point(&task.id, pt, ispace)
                .map_err(|source| SimError::Mapping { task: task.id.clone(), point: pt.clone(), source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let p_left = *procs.iter().min().expect("non-empty");
    if procs.iter().all(|&p| p == p_left) {
        return Ok(Shard::Local { node: p_left.node, proc: p_left });
    }
    let (mut left, mut right) = (Vec::new(), Vec::new());
    let mut p_right = None::<ProcessorRef>;
    for (pt, &p) in task.points.iter().zip(&procs) {
        if p == p_left {
            left.push(pt.clone());
        } else {
            right.push(pt.clone());
            p_right = Some(p_right.map_or(p, |q| q.min(p)));
        }
    }
    Ok(Shard::Distribute {
        left: IndexTask { id: format!("{}@{}.{}", task.id, p_left.node, p_left.proc), points: left, ispace: task.ispace.clone() },
        right: IndexTask { id: format!("{}~1", task.id), points: right, ispace: task.ispace.clone() },
        p_left,
        p_right: p_right.expect("right side is non-empty"),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum SliceState {
    /// In an E queue, or already split by DISTRIBUTE.
    Pending,
    /// In the M queue of this node.
    Queued(u32),
    Mapped,
    Launched,
    Executed,
}

struct Slice {
    id: String,
    origin: usize,
    points: Vec<usize>,
    distinct: usize,
    proc: Option<ProcessorRef>,
    state: SliceState,
}

/// Indices with O(1) insert, remove and positional access, so the random
/// scheduler can draw uniformly without rescanning live slices.
#[derive(Default)]
struct ReadySet {
    items: Vec<usize>,
    pos: HashMap<usize, usize>,
}

impl ReadySet {
    fn insert(&mut self, x: usize) {
        if !self.pos.contains_key(&x) {
            self.pos.insert(x, self.items.len());
            self.items.push(x);
        }
    }

    fn remove(&mut self, x: usize) {
        if let Some(i) = self.pos.remove(&x) {
            self.items.swap_remove(i);
            if let Some(&moved) = self.items.get(i) {
                self.pos.insert(moved, i);
            }
        }
    }

    fn len(&self) -> usize {
        self.items.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Candidate {
    rule: Rule,
    slice_or_task: usize,
    node: u32,
}

/// Simulation state for one graph under one scheduler.
pub struct Simulation<'g> {
    graph: &'g TaskGraph,
    machine: MachineShape,
    scheduler: Scheduler,
    rng: ChaCha8Rng,
    assign: Vec<Vec<ProcessorRef>>,
    classes: Vec<usize>,
    home: Vec<ProcessorRef>,
    splits: Vec<usize>,
    slices: Vec<Slice>,
    slices_of: Vec<Vec<usize>>,
    ids: HashSet<String>,
    e_queues: Vec<VecDeque<usize>>,
    // Slices and parents whose rule premises currently hold.
    exec_ready: ReadySet,
    launch_ready: ReadySet,
    map_ready: ReadySet,
    enqueue_ready: ReadySet,
    next_child: Vec<usize>,
    reached: [Vec<usize>; 3],
    unmapped_sib_deps: Vec<usize>,
    unexecuted_deps: Vec<usize>,
    unexecuted_children: Vec<usize>,
    sib_dependents: Vec<Vec<usize>>,
    dependents: Vec<Vec<usize>>,
    log: Vec<LogEntry>,
    distributions: Vec<DistributionRecord>,
    step: u64,
}

const MAPPED: usize = 0;
const LAUNCHED: usize = 1;
const EXECUTED: usize = 2;

impl<'g> Simulation<'g> {
    pub fn new(graph: &'g TaskGraph, mapper: &dyn PointMapper, machine: MachineShape, scheduler: Scheduler) -> Result<Self, SimError> {
        let n = graph.len();
        let root = graph.root();
        let mut assign = vec![Vec::new(); n];
        let mut classes = vec![1; n];
        let mut home = vec![ProcessorRef::new(0, 0); n];
        for (i, task) in graph.tasks().iter().enumerate() {
            if i == root {
                continue;
            }
            if task.points.is_empty() {
                return Err(SimError::EmptyTask(task.id.clone()));
            }
            assign[i] = task.points.iter().map(|pt| map_checked(mapper, task, pt, machine)).collect::<Result<_, _>>()?;
            let distinct: BTreeSet<ProcessorRef> = assign[i].iter().copied().collect();
            classes[i] = distinct.len();
            home[i] = *distinct.iter().next().expect("non-empty");
        }

        let mut sib_dependents = vec![Vec::new(); n];
        let mut dependents = vec![Vec::new(); n];
        let mut unmapped_sib_deps = vec![0; n];
        let mut unexecuted_deps = vec![0; n];
        for t in 0..n {
            for b in graph.sibling_deps(t) {
                sib_dependents[b].push(t);
                unmapped_sib_deps[t] += 1;
            }
            for &b in graph.deps(t) {
                dependents[b].push(t);
                unexecuted_deps[t] += 1;
            }
        }
        let unexecuted_children = (0..n).map(|t| graph.children(t).len()).collect();

        let nodes = machine.nodes as usize;
        let mut sim = Simulation {
            graph,
            machine,
            scheduler,
            rng: ChaCha8Rng::seed_from_u64(match scheduler {
                Scheduler::Random(seed) => seed,
                Scheduler::Priority => 0,
            }),
            assign,
            classes,
            home,
            splits: vec![0; n],
            slices: Vec::new(),
            slices_of: vec![Vec::new(); n],
            ids: graph.tasks().iter().map(|t| t.id.clone()).collect(),
            e_queues: vec![VecDeque::new(); nodes],
            exec_ready: ReadySet::default(),
            launch_ready: ReadySet::default(),
            map_ready: ReadySet::default(),
            enqueue_ready: ReadySet::default(),
            next_child: vec![0; n],
            reached: [vec![0; n], vec![0; n], vec![0; n]],
            unmapped_sib_deps,
            unexecuted_deps,
            unexecuted_children,
            sib_dependents,
            dependents,
            log: Vec::new(),
            distributions: Vec::new(),
            step: 0,
        };

        // The root is live before anything else: launched on (0, 0), with
        // its mapping implicit.
        let origin = ProcessorRef::new(0, 0);
        sim.add_slice(Slice {
            id: graph.id(root).to_string(),
            origin: root,
            points: Vec::new(),
            distinct: 1,
            proc: Some(origin),
            state: SliceState::Launched,
        });
        sim.reached[MAPPED][root] = 1;
        sim.reached[LAUNCHED][root] = 1;
        sim.log.push(LogEntry { stage: Stage::Launched, task: graph.id(root).to_string(), node: 0, proc: Some(0), step: 0 });
        if graph.children(root).is_empty() {
            sim.exec_ready.insert(0);
        } else {
            sim.enqueue_ready.insert(root);
        }
        Ok(sim)
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn is_done(&self) -> bool {
        self.reached[EXECUTED][self.graph.root()] == 1
    }

    fn e_head(&self, node: usize) -> Option<Candidate> {
        let &s = self.e_queues[node].front()?;
        let rule = if self.slices[s].distinct == 1 { Rule::Local } else { Rule::Distribute };
        Some(Candidate { rule, slice_or_task: s, node: node as u32 })
    }

    fn slice_candidate(&self, rule: Rule, s: usize) -> Candidate {
        let node = match self.slices[s].state {
            SliceState::Queued(n) => n,
            _ => 0,
        };
        Candidate { rule, slice_or_task: s, node }
    }

    fn enqueue_candidate(&self, p: usize) -> Candidate {
        let child = self.graph.children(p)[self.next_child[p]];
        Candidate { rule: Rule::Enqueue, slice_or_task: child, node: self.home[p].node }
    }

    fn candidate_id(&self, c: &Candidate) -> &str {
        match c.rule {
            Rule::Enqueue => self.graph.id(c.slice_or_task),
            _ => &self.slices[c.slice_or_task].id,
        }
    }

    /// Highest-priority rule, ties to the smallest task id.
    fn pick_priority(&self) -> Option<Candidate> {
        let by_id = |a: &Candidate, b: &Candidate| self.candidate_id(a).cmp(self.candidate_id(b));
        let slice_sets = [(Rule::Execute, &self.exec_ready), (Rule::Launch, &self.launch_ready), (Rule::Map, &self.map_ready)];
        for (rule, set) in slice_sets {
            if let Some(c) = set.items.iter().map(|&s| self.slice_candidate(rule, s)).min_by(by_id) {
                return Some(c);
            }
        }
        let heads: Vec<Candidate> = (0..self.e_queues.len()).filter_map(|n| self.e_head(n)).collect();
        for rule in [Rule::Local, Rule::Distribute] {
            if let Some(&c) = heads.iter().filter(|c| c.rule == rule).min_by(|a, b| by_id(a, b)) {
                return Some(c);
            }
        }
        self.enqueue_ready.items.iter().map(|&p| self.enqueue_candidate(p)).min_by(by_id)
    }

    /// Uniform over all applicable (rule, task) pairs.
    fn pick_random(&mut self) -> Option<Candidate> {
        let heads: Vec<usize> = (0..self.e_queues.len()).filter(|&n| !self.e_queues[n].is_empty()).collect();
        let sizes = [self.exec_ready.len(), self.launch_ready.len(), self.map_ready.len(), heads.len(), self.enqueue_ready.len()];
        let total: usize = sizes.iter().sum();
        if total == 0 {
            return None;
        }
        let mut k = self.rng.gen_range(0..total);
        let mut group = 0;
        while k >= sizes[group] {
            k -= sizes[group];
            group += 1;
        }
        Some(match group {
            0 => self.slice_candidate(Rule::Execute, self.exec_ready.items[k]),
            1 => self.slice_candidate(Rule::Launch, self.launch_ready.items[k]),
            2 => self.slice_candidate(Rule::Map, self.map_ready.items[k]),
            3 => self.e_head(heads[k]).expect("queue is non-empty"),
            _ => self.enqueue_candidate(self.enqueue_ready.items[k]),
        })
    }

    /// Applies one rule. Returns the rule applied, or `None` at quiescence.
    pub fn step(&mut self) -> Result<Option<Rule>, SimError> {
        let pick = match self.scheduler {
            Scheduler::Priority => self.pick_priority(),
            Scheduler::Random(_) => self.pick_random(),
        };
        let Some(pick) = pick else { return Ok(None) };
        self.step += 1;
        match pick.rule {
            Rule::Enqueue => self.enqueue(pick.slice_or_task, pick.node),
            Rule::Distribute => self.distribute(pick.node),
            Rule::Local => self.local(pick.node),
            Rule::Map => self.map(pick.slice_or_task),
            Rule::Launch => self.launch(pick.slice_or_task),
            Rule::Execute => self.execute(pick.slice_or_task),
        }
        Ok(Some(pick.rule))
    }

    fn add_slice(&mut self, slice: Slice) -> usize {
        let s = self.slices.len();
        self.slices_of[slice.origin].push(s);
        self.slices.push(slice);
        s
    }

    fn push_log(&mut self, stage: Stage, task: String, p: ProcessorRef) {
        self.log.push(LogEntry { stage, task, node: p.node, proc: Some(p.proc), step: self.step });
    }

    fn fresh(&mut self, base: String) -> String {
        let mut id = base;
        while self.ids.contains(&id) {
            id.push('\'');
        }
        self.ids.insert(id.clone());
        id
    }

    fn enqueue(&mut self, t: usize, node: u32) {
        let p = self.graph.parent(t).expect("root is never enqueued");
        self.next_child[p] += 1;
        if self.next_child[p] == self.graph.children(p).len() {
            self.enqueue_ready.remove(p);
        }
        let s = self.add_slice(Slice {
            id: self.graph.id(t).to_string(),
            origin: t,
            points: (0..self.graph.task(t).points.len()).collect(),
            distinct: self.classes[t],
            proc: None,
            state: SliceState::Pending,
        });
        self.e_queues[node as usize].push_back(s);
        self.log.push(LogEntry { stage: Stage::Enqueued, task: self.graph.id(t).to_string(), node, proc: None, step: self.step });
    }

    fn distribute(&mut self, node: u32) {
        let s = self.e_queues[node as usize].pop_front().expect("candidate queue is non-empty");
        let t = self.slices[s].origin;
        let assign = &self.assign[t];
        let points = std::mem::take(&mut self.slices[s].points);
        let p_left = points.iter().map(|&i| assign[i]).min().expect("non-empty slice");
        let (left, right): (Vec<usize>, Vec<usize>) = points.iter().partition(|&&i| assign[i] == p_left);
        let p_right = right.iter().map(|&i| assign[i]).min().expect("distributed slices span two processors");

        self.splits[t] += 1;
        let origin_id = self.graph.id(t).to_string();
        let left_id = self.fresh(format!("{origin_id}@{}.{}", p_left.node, p_left.proc));
        let right_id = self.fresh(format!("{origin_id}~{}", self.splits[t]));
        let pts = |v: &[usize]| v.iter().map(|&i| self.graph.task(t).points[i].clone()).collect::<Vec<_>>();
        self.distributions.push(DistributionRecord {
            step: self.step,
            task: self.slices[s].id.clone(),
            left: left_id.clone(),
            right: right_id.clone(),
            p_left,
            p_right,
            left_points: pts(&left),
            right_points: pts(&right),
        });
        let distinct = self.slices[s].distinct - 1;
        let pending = SliceState::Pending;
        let l = self.add_slice(Slice { id: left_id, origin: t, points: left, distinct: 1, proc: None, state: pending });
        let r = self.add_slice(Slice { id: right_id, origin: t, points: right, distinct, proc: None, state: pending });
        self.e_queues[p_left.node as usize].push_back(l);
        self.e_queues[p_right.node as usize].push_back(r);
    }

    fn local(&mut self, node: u32) {
        let s = self.e_queues[node as usize].pop_front().expect("candidate queue is non-empty");
        let t = self.slices[s].origin;
        let p = self.assign[t][self.slices[s].points[0]];
        self.slices[s].state = SliceState::Queued(p.node);
        if self.unmapped_sib_deps[t] == 0 {
            self.map_ready.insert(s);
        }
    }

    fn reach(&mut self, s: usize, stage: Stage, which: usize) {
        let t = self.slices[s].origin;
        let p = self.slices[s].proc.expect("slice is placed");
        self.push_log(stage, self.slices[s].id.clone(), p);
        self.reached[which][t] += 1;
        if self.reached[which][t] == self.classes[t] {
            if self.classes[t] > 1 {
                self.push_log(stage, self.graph.id(t).to_string(), self.home[t]);
            }
            self.task_reached(t, which);
        }
    }

    fn task_reached(&mut self, t: usize, which: usize) {
        match which {
            MAPPED => {
                for i in 0..self.sib_dependents[t].len() {
                    let a = self.sib_dependents[t][i];
                    self.unmapped_sib_deps[a] -= 1;
                    if self.unmapped_sib_deps[a] == 0 {
                        self.wake(a);
                    }
                }
            }
            LAUNCHED => {
                if !self.graph.children(t).is_empty() {
                    self.enqueue_ready.insert(t);
                }
            }
            _ => {
                for i in 0..self.dependents[t].len() {
                    let a = self.dependents[t][i];
                    self.unexecuted_deps[a] -= 1;
                    if self.unexecuted_deps[a] == 0 {
                        self.wake(a);
                    }
                }
                if let Some(p) = self.graph.parent(t) {
                    self.unexecuted_children[p] -= 1;
                    if self.unexecuted_children[p] == 0 {
                        self.wake(p);
                    }
                }
            }
        }
    }

    /// Re-examines the slices of `t` after one of its counters changed.
    fn wake(&mut self, t: usize) {
        for i in 0..self.slices_of[t].len() {
            let s = self.slices_of[t][i];
            self.classify(s);
        }
    }

    /// Puts `s` in the ready set its state and premises call for.
    fn classify(&mut self, s: usize) {
        let t = self.slices[s].origin;
        match self.slices[s].state {
            SliceState::Queued(_) if self.unmapped_sib_deps[t] == 0 => self.map_ready.insert(s),
            SliceState::Mapped if self.unexecuted_deps[t] == 0 => self.launch_ready.insert(s),
            SliceState::Launched if self.unexecuted_deps[t] == 0 && self.unexecuted_children[t] == 0 => {
                self.exec_ready.insert(s)
            }
            _ => {}
        }
    }

    fn map(&mut self, s: usize) {
        self.map_ready.remove(s);
        let t = self.slices[s].origin;
        self.slices[s].proc = Some(self.assign[t][self.slices[s].points[0]]);
        self.slices[s].state = SliceState::Mapped;
        self.classify(s);
        self.reach(s, Stage::Mapped, MAPPED);
    }

    fn launch(&mut self, s: usize) {
        self.launch_ready.remove(s);
        self.slices[s].state = SliceState::Launched;
        self.classify(s);
        self.reach(s, Stage::Launched, LAUNCHED);
    }

    fn execute(&mut self, s: usize) {
        self.exec_ready.remove(s);
        self.slices[s].state = SliceState::Executed;
        self.reach(s, Stage::Executed, EXECUTED);
    }

    fn stuck(&self) -> SimError {
        let waiting = |state: fn(SliceState) -> bool| self.slices.iter().find(|s| state(s.state)).map(|s| s.id.clone());
        if let Some(task) = waiting(|s| s == SliceState::Launched) {
            return SimError::Stuck { task, premise: "executed for all children and dependence predecessors".into() };
        }
        if let Some(task) = waiting(|s| s == SliceState::Mapped) {
            return SimError::Stuck { task, premise: "executed for all dependence predecessors".into() };
        }
        if let Some(task) = waiting(|s| matches!(s, SliceState::Queued(_))) {
            return SimError::Stuck { task, premise: "mapped for all sibling dependence predecessors".into() };
        }
        let root = self.graph.root();
        SimError::Stuck { task: self.graph.id(root).to_string(), premise: "launched parent for the next sibling".into() }
    }

    /// Runs until no rule applies.
    pub fn run(mut self) -> Result<Trace, SimError> {
        let total_points: usize = self.graph.tasks().iter().map(|t| t.points.len()).sum();
        let limit = 8 * (self.graph.len() + total_points) as u64 + 64;
        while self.step()?.is_some() {
            if self.step > limit {
                return Err(SimError::StepLimit(limit));
            }
        }
        if !self.is_done() {
            return Err(self.stuck());
        }
        Ok(self.into_trace())
    }

    fn into_trace(self) -> Trace {
        let mut stats: BTreeMap<ProcessorRef, ProcStats> = BTreeMap::new();
        for node in 0..self.machine.nodes {
            for proc in 0..self.machine.procs_per_node {
                stats.insert(ProcessorRef::new(node, proc), ProcStats { node, proc, tasks: 0, points: 0 });
            }
        }
        let root = self.graph.root();
        let mut leaves = Vec::new();
        for slice in &self.slices {
            if slice.origin == root {
                continue;
            }
            let Some(p) = slice.proc else { continue };
            let entry = stats.get_mut(&p).expect("processors are range-checked");
            entry.tasks += 1;
            entry.points += slice.points.len() as u64;
            leaves.push(SliceRecord {
                id: slice.id.clone(),
                origin: self.graph.id(slice.origin).to_string(),
                points: slice.points.iter().map(|&i| self.graph.task(slice.origin).points[i].clone()).collect(),
                proc: p,
            });
        }
        Trace { entries: self.log, slices: leaves, distributions: self.distributions, stats: stats.into_values().collect(), steps: self.step }
    }
}

/// Deterministic run under the priority scheduler.
pub fn run_to_quiescence(graph: &TaskGraph, mapper: &dyn PointMapper, machine: MachineShape) -> Result<Trace, SimError> {
    run_with(graph, mapper, machine, Scheduler::Priority)
}

pub fn run_with(graph: &TaskGraph, mapper: &dyn PointMapper, machine: MachineShape, scheduler: Scheduler) -> Result<Trace, SimError> {
    Simulation::new(graph, mapper, machine, scheduler)?.run()
}
