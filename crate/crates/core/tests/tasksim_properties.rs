use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use procmap_core::corpus;
use procmap_core::dsl::{parse, BindingTable, EvalError, MappingFunction};
use procmap_core::tasksim::{
    check_trace, load_taskgraph, random_graph, run_to_quiescence, run_with, FnMapper, LogEntry, PointMapper, Scheduler,
    Stage, TaskGraph, Trace,
};
use procmap_core::{MachineShape, ProcessorRef, Tuple};

fn cyclic(machine: MachineShape) -> impl PointMapper {
    FnMapper(move |_: &str, pt: &Tuple, _: &Tuple| -> Result<ProcessorRef, EvalError> {
        let lin = pt.as_slice().iter().fold(0i64, |acc, &x| acc * 7 + x);
        let p = lin.rem_euclid(machine.processor_count() as i64) as u32;
        Ok(ProcessorRef::new(p / machine.procs_per_node, p % machine.procs_per_node))
    })
}

fn block2d(machine: MachineShape) -> BindingTable {
    let program = Arc::new(parse(corpus::BLOCK2D).unwrap());
    let f = MappingFunction::for_function(program, "block2D", machine).unwrap();
    BindingTable::new().with_fallback(f)
}

fn sorted_entries(trace: &Trace) -> Vec<(Stage, String, u32, Option<u32>)> {
    let mut v: Vec<_> = trace.entries.iter().map(|e| (e.stage, e.task.clone(), e.node, e.proc)).collect();
    v.sort();
    v
}

fn position(entries: &[LogEntry], stage: Stage, task: &str) -> usize {
    entries.iter().position(|e| e.stage == stage && e.task == task).unwrap()
}

/// Invariants restated directly on the log, independent of the checker.
fn assert_invariants(graph: &TaskGraph, trace: &Trace) {
    let e = &trace.entries;
    for (t, task) in graph.tasks().iter().enumerate() {
        let stages: Vec<Stage> = e.iter().filter(|x| x.task == task.id).map(|x| x.stage).collect();
        let expected: &[Stage] = if t == graph.root() {
            &[Stage::Launched, Stage::Executed]
        } else {
            &[Stage::Enqueued, Stage::Mapped, Stage::Launched, Stage::Executed]
        };
        assert_eq!(stages, expected, "lifecycle of {}", task.id);
        for &b in graph.deps(t) {
            assert!(position(e, Stage::Executed, graph.id(b)) < position(e, Stage::Launched, &task.id));
        }
        for &c in graph.children(t) {
            assert!(position(e, Stage::Executed, graph.id(c)) < position(e, Stage::Executed, &task.id));
        }
        if t != graph.root() {
            let mut have: Vec<Tuple> =
                trace.slices.iter().filter(|s| s.origin == task.id).flat_map(|s| s.points.clone()).collect();
            let mut want = task.points.clone();
            have.sort();
            want.sort();
            assert_eq!(have, want, "points of {}", task.id);
        }
    }
}

#[test]
fn loop0_spreads_nine_points_per_processor() {
    let m = MachineShape::gpu(2, 2);
    let g = load_taskgraph(corpus::LOOP0).unwrap();
    let mapper = block2d(m);
    let trace = run_to_quiescence(&g, &mapper, m).unwrap();
    assert_eq!(check_trace(&trace, &g, &mapper), []);
    assert!(trace.stats.iter().all(|s| s.points == 9 && s.tasks == 1), "{:?}", trace.stats);
    assert_invariants(&g, &trace);
}

#[test]
fn nested_tasks_are_sound_under_every_seed() {
    let m = MachineShape::gpu(2, 2);
    let g = load_taskgraph(corpus::NESTED_TASKS).unwrap();
    let mapper = block2d(m);
    let golden = run_to_quiescence(&g, &mapper, m).unwrap();
    assert_eq!(check_trace(&golden, &g, &mapper), []);
    assert_invariants(&g, &golden);
    for seed in 0..100 {
        let trace = run_with(&g, &mapper, m, Scheduler::Random(seed)).unwrap();
        assert_eq!(check_trace(&trace, &g, &mapper), [], "seed {seed}");
        assert_invariants(&g, &trace);
        assert_eq!(sorted_entries(&trace), sorted_entries(&golden), "seed {seed}");
    }
}

#[test]
fn single_task_graph_has_two_entries() {
    let g = load_taskgraph(r#"{"tasks": [{"id": "only", "ispace": [3]}]}"#).unwrap();
    let m = MachineShape::gpu(1, 1);
    let trace = run_to_quiescence(&g, &cyclic(m), m).unwrap();
    assert_eq!(trace.entries.len(), 2);
}

#[test]
fn deterministic_runs_repeat_exactly() {
    let m = MachineShape::gpu(2, 3);
    let g = random_graph(&mut ChaCha8Rng::seed_from_u64(7), 40);
    let a = run_with(&g, &cyclic(m), m, Scheduler::Random(3)).unwrap();
    let b = run_with(&g, &cyclic(m), m, Scheduler::Random(3)).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_graphs_are_sound(graph_seed in any::<u64>(), sched_seed in any::<u64>(), nodes in 1u32..=3, procs in 1u32..=3) {
        let m = MachineShape::gpu(nodes, procs);
        let g = random_graph(&mut ChaCha8Rng::seed_from_u64(graph_seed), 30);
        let mapper = cyclic(m);
        let golden = run_to_quiescence(&g, &mapper, m).unwrap();
        let trace = run_with(&g, &mapper, m, Scheduler::Random(sched_seed)).unwrap();
        prop_assert_eq!(check_trace(&golden, &g, &mapper), vec![]);
        prop_assert_eq!(check_trace(&trace, &g, &mapper), vec![]);
        assert_invariants(&g, &trace);
        prop_assert_eq!(sorted_entries(&trace), sorted_entries(&golden));
    }
}
