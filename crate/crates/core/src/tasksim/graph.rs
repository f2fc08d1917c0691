//! Task trees with dependence and sibling-order relations.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::procspace::Tuple;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("malformed task graph: {0}")]
    Schema(String),
    #[error("task `{0}` is declared more than once")]
    DuplicateTask(String),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("task `{0}` has no points")]
    EmptyTask(String),
    #[error("more than one root task: {0:?}")]
    MultipleRoots(Vec<String>),
    #[error("task `{0}` has more than one parent")]
    MultipleParents(String),
    #[error("every task has a parent; no root")]
    NoRoot,
    #[error("dependences can never be satisfied; cycle through {0:?}")]
    CyclicDependence(Vec<String>),
    #[error("dependence `{before}` <= `{after}` contradicts their sibling order")]
    SiblingOrder { before: String, after: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IndexTask {
    pub id: String,
    pub points: Vec<Tuple>,
    /// Iteration space the points live in; mapping functions receive it.
    pub ispace: Tuple,
}

impl IndexTask {
    /// Every point of a rectangular `ispace`.
    pub fn dense(id: &str, ispace: Tuple) -> Self {
        IndexTask { id: id.to_string(), points: Tuple::points_of(&ispace).collect(), ispace }
    }

    /// Explicit points; the space is their bounding box from the origin.
    pub fn sparse(id: &str, points: Vec<Tuple>) -> Self {
        let rank = points.first().map_or(0, |p| p.len());
        let ispace = (0..rank).map(|d| points.iter().map(|p| p[d] + 1).max().unwrap_or(1)).collect::<Vec<_>>();
        IndexTask { id: id.to_string(), points, ispace: ispace.into() }
    }
}

#[derive(Clone, Debug)]
pub struct TaskGraph {
    tasks: Vec<IndexTask>,
    index: HashMap<String, usize>,
    parent: Vec<Option<usize>>,
    /// Children in sibling order.
    children: Vec<Vec<usize>>,
    /// `deps[t]` holds every `t'` with `t' <= t`.
    deps: Vec<Vec<usize>>,
    root: usize,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct TaskDoc {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points: Option<Vec<Vec<i64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ispace: Option<Vec<i64>>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ParentDoc {
    parent: String,
    child: String,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct DepDoc {
    before: String,
    after: String,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct GraphDoc {
    tasks: Vec<TaskDoc>,
    #[serde(default)]
    parent: Vec<ParentDoc>,
    #[serde(default)]
    deps: Vec<DepDoc>,
    #[serde(default)]
    siblings: BTreeMap<String, Vec<String>>,
}

/// Parses and validates a task-graph JSON document.
pub fn load_taskgraph(document: &str) -> Result<TaskGraph, GraphError> {
    let doc: GraphDoc = serde_json::from_str(document).map_err(|e| GraphError::Schema(e.to_string()))?;
    let mut tasks = Vec::with_capacity(doc.tasks.len());
    for t in doc.tasks {
        let task = match (t.points, t.ispace) {
            (None, None) => return Err(GraphError::Schema(format!("task `{}` needs `points` or `ispace`", t.id))),
            (None, Some(ispace)) => {
                if ispace.iter().any(|&e| e <= 0) {
                    return Err(GraphError::EmptyTask(t.id));
                }
                IndexTask::dense(&t.id, ispace.into())
            }
            (Some(points), ispace) => {
                let points: Vec<Tuple> = points.into_iter().map(Tuple::from).collect();
                let mut task = IndexTask::sparse(&t.id, points);
                if let Some(ispace) = ispace {
                    task.ispace = ispace.into();
                }
                task
            }
        };
        tasks.push(task);
    }
    let parent = doc.parent.into_iter().map(|p| (p.parent, p.child)).collect();
    let deps = doc.deps.into_iter().map(|d| (d.before, d.after)).collect();
    TaskGraph::new(tasks, parent, deps, doc.siblings)
}

impl TaskGraph {
    /// `parent` holds `(parent, child)` pairs, `deps` holds `(before, after)`
    /// pairs. Children without an explicit sibling list keep the order of
    /// their `parent` pairs.
    pub fn new(
        tasks: Vec<IndexTask>,
        parent: Vec<(String, String)>,
        deps: Vec<(String, String)>,
        siblings: BTreeMap<String, Vec<String>>,
    ) -> Result<Self, GraphError> {
        let mut index = HashMap::with_capacity(tasks.len());
        for (i, t) in tasks.iter().enumerate() {
            if index.insert(t.id.clone(), i).is_some() {
                return Err(GraphError::DuplicateTask(t.id.clone()));
            }
            validate_points(t)?;
        }
        let lookup = |id: &str| index.get(id).copied().ok_or_else(|| GraphError::UnknownTask(id.to_string()));

        let n = tasks.len();
        let mut parent_of = vec![None; n];
        let mut children = vec![Vec::new(); n];
        for (p, c) in &parent {
            let (p, c) = (lookup(p)?, lookup(c)?);
            if parent_of[c].replace(p).is_some() {
                return Err(GraphError::MultipleParents(tasks[c].id.clone()));
            }
            children[p].push(c);
        }
        for (p, order) in &siblings {
            let p = lookup(p)?;
            let listed = order.iter().map(|id| lookup(id)).collect::<Result<Vec<_>, _>>()?;
            let mut a = listed.clone();
            let mut b = children[p].clone();
            a.sort_unstable();
            b.sort_unstable();
            if a != b {
                return Err(GraphError::Schema(format!(
                    "sibling order of `{}` must list exactly its children",
                    tasks[p].id
                )));
            }
            children[p] = listed;
        }

        let roots: Vec<usize> = (0..n).filter(|&i| parent_of[i].is_none()).collect();
        let root = match roots.as_slice() {
            [r] => *r,
            [] => return Err(GraphError::NoRoot),
            _ => return Err(GraphError::MultipleRoots(roots.iter().map(|&r| tasks[r].id.clone()).collect())),
        };
        let mut reached = 0;
        let mut stack = vec![root];
        while let Some(t) = stack.pop() {
            reached += 1;
            stack.extend(&children[t]);
        }
        if reached != n {
            return Err(GraphError::Schema("parent relation contains a cycle".into()));
        }

        let mut dep_lists = vec![Vec::new(); n];
        for (before, after) in &deps {
            let (b, a) = (lookup(before)?, lookup(after)?);
            if !dep_lists[a].contains(&b) {
                dep_lists[a].push(b);
            }
        }

        let graph = TaskGraph { tasks, index, parent: parent_of, children, deps: dep_lists, root };
        graph.check_cycles()?;
        graph.check_sibling_order()?;
        Ok(graph)
    }

    /// Launch and completion events form a DAG exactly when some schedule
    /// executes every task: a dependence orders `executed(before)` before
    /// `launched(after)`, a parent launches before its children, and
    /// children execute before their parent.
    fn check_cycles(&self) -> Result<(), GraphError> {
        let n = self.tasks.len();
        let launch = |t: usize| t;
        let exec = |t: usize| n + t;
        let mut edges = vec![Vec::new(); 2 * n];
        for t in 0..n {
            edges[launch(t)].push(exec(t));
            for &b in &self.deps[t] {
                edges[exec(b)].push(launch(t));
            }
            for &c in &self.children[t] {
                edges[launch(t)].push(launch(c));
                edges[exec(c)].push(exec(t));
            }
        }
        // Iterative three-colour DFS.
        let mut colour = vec![0u8; 2 * n];
        for start in 0..2 * n {
            if colour[start] != 0 {
                continue;
            }
            let mut stack = vec![(start, 0usize)];
            colour[start] = 1;
            while let Some(&mut (v, ref mut next)) = stack.last_mut() {
                if let Some(&w) = edges[v].get(*next) {
                    *next += 1;
                    match colour[w] {
                        0 => {
                            colour[w] = 1;
                            stack.push((w, 0));
                        }
                        1 => {
                            let from = stack.iter().position(|&(u, _)| u == w).unwrap_or(0);
                            let mut cycle: Vec<String> = stack[from..].iter().map(|&(u, _)| self.tasks[u % n].id.clone()).collect();
                            cycle.dedup();
                            return Err(GraphError::CyclicDependence(cycle));
                        }
                        _ => {}
                    }
                } else {
                    colour[v] = 2;
                    stack.pop();
                }
            }
        }
        Ok(())
    }

    fn check_sibling_order(&self) -> Result<(), GraphError> {
        for t in 0..self.tasks.len() {
            for &b in &self.deps[t] {
                if self.parent[b].is_some() && self.parent[b] == self.parent[t] {
                    let order = &self.children[self.parent[t].expect("checked above")];
                    let pos = |x| order.iter().position(|&c| c == x);
                    if pos(b) > pos(t) {
                        return Err(GraphError::SiblingOrder {
                            before: self.tasks[b].id.clone(),
                            after: self.tasks[t].id.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn tasks(&self) -> &[IndexTask] {
        &self.tasks
    }

    pub fn task(&self, i: usize) -> &IndexTask {
        &self.tasks[i]
    }

    pub fn id(&self, i: usize) -> &str {
        &self.tasks[i].id
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parent[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn deps(&self, i: usize) -> &[usize] {
        &self.deps[i]
    }

    /// Dependence predecessors that share `i`'s parent.
    pub fn sibling_deps(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let p = self.parent[i];
        self.deps[i].iter().copied().filter(move |&b| p.is_some() && self.parent[b] == p)
    }

    /// Siblings ordered before `i`.
    pub fn earlier_siblings(&self, i: usize) -> &[usize] {
        match self.parent[i] {
            None => &[],
            Some(p) => {
                let order = &self.children[p];
                let pos = order.iter().position(|&c| c == i).expect("child listed under its parent");
                &order[..pos]
            }
        }
    }

    /// Serializes back to the JSON document format.
    pub fn to_json(&self) -> String {
        let doc = GraphDoc {
            tasks: self
                .tasks
                .iter()
                .map(|t| TaskDoc { id: t.id.clone(), points: Some(t.points.iter().map(|p| p.to_vec()).collect()), ispace: Some(t.ispace.to_vec()) })
                .collect(),
            parent: (0..self.len())
                .filter_map(|c| self.parent[c].map(|p| ParentDoc { parent: self.id(p).into(), child: self.id(c).into() }))
                .collect(),
            deps: (0..self.len())
                .flat_map(|a| self.deps[a].iter().map(move |&b| (b, a)))
                .map(|(b, a)| DepDoc { before: self.id(b).into(), after: self.id(a).into() })
                .collect(),
            siblings: (0..self.len())
                .filter(|&p| !self.children[p].is_empty())
                .map(|p| (self.id(p).to_string(), self.children[p].iter().map(|&c| self.id(c).to_string()).collect()))
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("graph documents always serialize")
    }
}

fn validate_points(t: &IndexTask) -> Result<(), GraphError> {
    if t.points.is_empty() {
        return Err(GraphError::EmptyTask(t.id.clone()));
    }
    let mut seen = HashSet::with_capacity(t.points.len());
    for p in &t.points {
        if p.len() != t.ispace.len() {
            return Err(GraphError::Schema(format!("task `{}` mixes point ranks", t.id)));
        }
        if !p.in_bounds(&t.ispace) {
            return Err(GraphError::Schema(format!("point {p} of task `{}` lies outside {}", t.id, t.ispace)));
        }
        if !seen.insert(p) {
            return Err(GraphError::Schema(format!("point {p} repeated in task `{}`", t.id)));
        }
    }
    Ok(())
}

/// A random acyclic graph of at most `max_tasks` tasks: a random tree with
/// sibling order equal to creation order, dependences from earlier to later
/// siblings, and 2D point sets that are dense or a random subset of a small
/// iteration space.
pub fn random_graph<R: Rng>(rng: &mut R, max_tasks: usize) -> TaskGraph {
    let n = rng.gen_range(1..=max_tasks.max(1));
    let mut tasks = Vec::with_capacity(n);
    let mut parent = Vec::new();
    let mut kids: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let ispace: Tuple = vec![rng.gen_range(1..=6), rng.gen_range(1..=6)].into();
        let mut task = IndexTask::dense(&format!("t{i}"), ispace);
        if rng.gen_bool(0.3) && task.points.len() > 1 {
            task.points.shuffle(rng);
            let keep = rng.gen_range(1..=task.points.len());
            task.points.truncate(keep);
            task.points.sort();
        }
        tasks.push(task);
        if i > 0 {
            // Bias towards recent tasks so trees get some depth.
            let lo = i.saturating_sub(8);
            let p = if rng.gen_bool(0.5) { rng.gen_range(lo..i) } else { rng.gen_range(0..i) };
            parent.push((format!("t{p}"), format!("t{i}")));
            kids[p].push(i);
        }
    }
    let mut deps = Vec::new();
    for group in &kids {
        for (j, &after) in group.iter().enumerate() {
            for &before in &group[..j] {
                if rng.gen_bool(0.25) {
                    deps.push((format!("t{before}"), format!("t{after}")));
                }
            }
        }
    }
    TaskGraph::new(tasks, parent, deps, BTreeMap::new()).expect("generated graphs are valid by construction")
}
