//! Replays a trace against the rule premises without reusing any simulator
//! state, so traces from other producers can be checked too.

use std::collections::HashMap;

use serde::Serialize;

use super::graph::TaskGraph;
use super::sim::{LogEntry, PointMapper, SliceRecord, Stage, Trace};
use crate::procspace::{ProcessorRef, Tuple};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum CheckKind {
    PremiseViolation,
    MappingMismatch,
    LifecycleViolation,
    PointConservation,
    Incomplete,
    UnknownTask,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckDiagnostic {
    pub kind: CheckKind,
    /// Index of the offending log entry, when there is one.
    pub entry: Option<usize>,
    pub task: String,
    pub message: String,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    Root(usize),
    /// A graph task mapped as a single slice under its own id.
    Whole(usize),
    /// A graph task whose slices carry other ids.
    Aggregate(usize),
    Slice(usize),
}

/// Names are interned: graph tasks take `0..n` in graph order, slice ids
/// that are not task ids follow.
struct Checker<'a> {
    graph: &'a TaskGraph,
    names: HashMap<&'a str, usize>,
    /// Graph task each name belongs to, if known.
    origin: Vec<Option<usize>>,
    leaf: Vec<Option<&'a SliceRecord>>,
    leaves_of: Vec<Vec<usize>>,
    aggregate: Vec<bool>,
    home: Vec<ProcessorRef>,
    stage: Vec<Option<Stage>>,
    placed: Vec<Option<ProcessorRef>>,
    out: Vec<CheckDiagnostic>,
}

fn sequence(role: Role) -> &'static [Stage] {
    match role {
        Role::Root(_) => &[Stage::Launched, Stage::Executed],
        Role::Slice(_) => &[Stage::Mapped, Stage::Launched, Stage::Executed],
        Role::Whole(_) | Role::Aggregate(_) => &[Stage::Enqueued, Stage::Mapped, Stage::Launched, Stage::Executed],
    }
}

impl<'a> Checker<'a> {
    fn new(trace: &'a Trace, graph: &'a TaskGraph) -> Self {
        let n = graph.len();
        let mut names: HashMap<&str, usize> = graph.tasks().iter().enumerate().map(|(i, t)| (t.id.as_str(), i)).collect();
        let mut origin: Vec<Option<usize>> = (0..n).map(Some).collect();
        let mut leaf = vec![None; n];
        let mut leaves_of = vec![Vec::new(); n];
        let mut out = Vec::new();
        for record in &trace.slices {
            let next = names.len();
            let k = *names.entry(record.id.as_str()).or_insert(next);
            if k == next {
                origin.push(None);
                leaf.push(None);
            }
            leaf[k] = Some(record);
            match graph.index_of(&record.origin) {
                Some(t) if k >= n || k == t => {
                    origin[k] = Some(t);
                    leaves_of[t].push(k);
                }
                _ => out.push(CheckDiagnostic {
                    kind: CheckKind::UnknownTask,
                    entry: None,
                    task: record.id.clone(),
                    message: format!("slice of unknown task `{}`", record.origin),
                }),
            }
        }
        let aggregate = (0..n).map(|t| t != graph.root() && !leaves_of[t].is_empty() && !leaves_of[t].contains(&t)).collect();
        let home = (0..n)
            .map(|t| {
                let procs = leaves_of[t].iter().filter_map(|&k| leaf[k].map(|l: &SliceRecord| l.proc));
                if t == graph.root() { None } else { procs.min() }.unwrap_or(ProcessorRef::new(0, 0))
            })
            .collect();
        let total = names.len();
        Checker {
            graph,
            names,
            origin,
            leaf,
            leaves_of,
            aggregate,
            home,
            stage: vec![None; total],
            placed: vec![None; total],
            out,
        }
    }

    fn report(&mut self, kind: CheckKind, entry: Option<usize>, task: &str, message: String) {
        self.out.push(CheckDiagnostic { kind, entry, task: task.to_string(), message });
    }

    fn at_least(&self, k: usize, s: Stage) -> bool {
        self.stage[k].is_some_and(|have| have >= s)
    }

    fn role(&self, k: usize) -> Option<Role> {
        let n = self.graph.len();
        if k < n {
            return Some(if k == self.graph.root() {
                Role::Root(k)
            } else if self.aggregate[k] {
                Role::Aggregate(k)
            } else {
                Role::Whole(k)
            });
        }
        self.origin[k].map(Role::Slice)
    }

    fn entry(&mut self, i: usize, e: &LogEntry) {
        let role = self.names.get(e.task.as_str()).and_then(|&k| Some((k, self.role(k)?)));
        let Some((k, role)) = role else {
            self.report(CheckKind::UnknownTask, Some(i), &e.task, "entry names no task or slice".into());
            return;
        };

        let seq = sequence(role);
        let expected = match self.stage[k] {
            None => seq.first(),
            Some(cur) => seq.iter().position(|&s| s == cur).and_then(|j| seq.get(j + 1)),
        };
        if expected != Some(&e.stage) {
            let msg = format!("{:?} out of order (expected {:?})", e.stage, expected);
            self.report(CheckKind::LifecycleViolation, Some(i), &e.task, msg);
        }

        if let Some(why) = self.premise(i, k, e, role) {
            self.report(CheckKind::PremiseViolation, Some(i), &e.task, why);
        }

        if self.stage[k].is_none_or(|cur| cur < e.stage) {
            self.stage[k] = Some(e.stage);
        }
        if e.stage == Stage::Mapped {
            self.placed[k] = e.processor();
        }
    }

    /// The first unmet premise of the rule that emits `e`, if any.
    fn premise(&self, i: usize, k: usize, e: &LogEntry, role: Role) -> Option<String> {
        let g = self.graph;
        let t = match role {
            Role::Root(t) | Role::Whole(t) | Role::Aggregate(t) | Role::Slice(t) => t,
        };
        let deps_executed = || g.deps(t).iter().find(|&&b| !self.at_least(b, Stage::Executed));
        let children_executed = || g.children(t).iter().find(|&&c| !self.at_least(c, Stage::Executed));

        if let (Role::Aggregate(_), true) = (role, e.stage != Stage::Enqueued) {
            if let Some(&l) = self.leaves_of[t].iter().find(|&&l| !self.at_least(l, e.stage)) {
                let id = self.leaf[l].map_or("?", |r| r.id.as_str());
                return Some(format!("slice `{id}` has not reached {:?}", e.stage));
            }
            return (e.processor() != Some(self.home[t]))
                .then(|| format!("logged on {:?}, home processor is {}", e.processor(), self.home[t]));
        }

        match (e.stage, role) {
            (Stage::Launched, Role::Root(_)) => {
                (i != 0 || e.step != 0 || e.processor() != Some(ProcessorRef::new(0, 0)))
                    .then(|| "the root is launched on (0, 0) at step 0, before anything else".into())
            }
            (Stage::Executed, Role::Root(_)) => {
                children_executed().map(|&c| format!("child `{}` has not executed", g.id(c)))
            }
            (Stage::Enqueued, _) => {
                let p = g.parent(t)?;
                if !self.at_least(p, Stage::Launched) {
                    return Some(format!("parent `{}` has not launched", g.id(p)));
                }
                if let Some(&s) = g.earlier_siblings(t).iter().find(|&&s| !self.at_least(s, Stage::Enqueued)) {
                    return Some(format!("earlier sibling `{}` is not enqueued", g.id(s)));
                }
                let node = self.home[p].node;
                (e.node != node).then(|| format!("enqueued on node {}, parent lives on node {node}", e.node))
            }
            (Stage::Mapped, _) => {
                if !self.at_least(t, Stage::Enqueued) {
                    return Some(format!("`{}` is not enqueued", g.id(t)));
                }
                if let Some(b) = g.sibling_deps(t).find(|&b| !self.at_least(b, Stage::Mapped)) {
                    return Some(format!("sibling predecessor `{}` is not mapped", g.id(b)));
                }
                None
            }
            (Stage::Launched, _) => {
                if let Some(&b) = deps_executed() {
                    return Some(format!("predecessor `{}` has not executed", g.id(b)));
                }
                let mapped_on = self.placed[k];
                (mapped_on.is_some() && mapped_on != e.processor())
                    .then(|| format!("launched on {:?} but mapped on {:?}", e.processor(), mapped_on))
            }
            (Stage::Executed, _) => {
                if let Some(&b) = deps_executed() {
                    return Some(format!("predecessor `{}` has not executed", g.id(b)));
                }
                if let Some(&c) = children_executed() {
                    return Some(format!("child `{}` has not executed", g.id(c)));
                }
                None
            }
        }
    }

    fn mapping(&mut self, mapper: &dyn PointMapper, i: usize, e: &LogEntry) {
        if e.stage != Stage::Mapped {
            return;
        }
        let Some(&k) = self.names.get(e.task.as_str()) else { return };
        let (Some(leaf), Some(t)) = (self.leaf[k], self.origin[k]) else { return };
        let task = self.graph.task(t);
        let claimed = e.processor();
        for pt in &leaf.points {
            let want = mapper.map_point(&task.id, pt, &task.ispace).ok();
            if want != claimed {
                let msg = format!("{pt} maps to {want:?}, logged on {claimed:?}");
                self.report(CheckKind::MappingMismatch, Some(i), &e.task, msg);
                return;
            }
        }
        if Some(leaf.proc) != claimed {
            let msg = format!("slice record says {}, log says {claimed:?}", leaf.proc);
            self.report(CheckKind::MappingMismatch, Some(i), &e.task, msg);
        }
    }
}

fn sorted<'t>(points: impl IntoIterator<Item = &'t Tuple>) -> Vec<&'t Tuple> {
    let mut v: Vec<&Tuple> = points.into_iter().collect();
    v.sort_unstable();
    v
}

/// Every violated premise, mapping disagreement, out-of-order stage, lost
/// or duplicated point and unfinished task. Empty means the trace is valid.
pub fn check_trace(trace: &Trace, graph: &TaskGraph, mapper: &dyn PointMapper) -> Vec<CheckDiagnostic> {
    let mut c = Checker::new(trace, graph);
    for (i, e) in trace.entries.iter().enumerate() {
        c.entry(i, e);
        c.mapping(mapper, i, e);
    }

    // Point conservation, per task and per split.
    for t in 0..graph.len() {
        if t == graph.root() || c.leaves_of[t].is_empty() {
            continue;
        }
        let task = graph.task(t);
        let have = sorted(c.leaves_of[t].iter().filter_map(|&l| c.leaf[l]).flat_map(|l| &l.points));
        if have != sorted(&task.points) {
            let msg = format!("slices hold {} points, task has {}", have.len(), task.points.len());
            c.report(CheckKind::PointConservation, None, &task.id, msg);
        }
    }
    let mut slice_points: HashMap<&str, Vec<&Tuple>> =
        graph.tasks().iter().map(|t| (t.id.as_str(), sorted(&t.points))).collect();
    for d in &trace.distributions {
        let parts = sorted(d.left_points.iter().chain(&d.right_points));
        let ok = !d.left_points.is_empty()
            && !d.right_points.is_empty()
            && slice_points.get(d.task.as_str()).is_some_and(|whole| *whole == parts);
        if !ok {
            let msg = format!("split into `{}` and `{}` does not partition it", d.left, d.right);
            c.report(CheckKind::PointConservation, None, &d.task, msg);
        }
        slice_points.insert(d.left.as_str(), sorted(&d.left_points));
        slice_points.insert(d.right.as_str(), sorted(&d.right_points));
    }

    for t in 0..graph.len() {
        if !c.at_least(t, Stage::Executed) {
            c.report(CheckKind::Incomplete, None, graph.id(t), "never executed".into());
        }
    }
    for leaf in &trace.slices {
        let k = c.names[leaf.id.as_str()];
        if !c.at_least(k, Stage::Executed) {
            c.report(CheckKind::Incomplete, None, &leaf.id, "slice never executed".into());
        }
    }
    c.out
}
