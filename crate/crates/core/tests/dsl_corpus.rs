//! Bundled mappers: parse, validate, evaluate, and compare against
//! assignment tables written out independently of the evaluator.

use procmap_core::corpus;
use procmap_core::dsl::{self, compile_mapper, eval_mapping, has_errors, parse, validate, Severity, StatementKind};
use procmap_core::{MachineShape, ProcessorRef, Tuple};

fn t(v: &[i64]) -> Tuple {
    v.to_vec().into()
}

fn p(node: i64, proc: i64) -> ProcessorRef {
    ProcessorRef::new(node as u32, proc as u32)
}

fn check_table(src: &str, func: &str, ispace: &[i64], machine: MachineShape, expected: impl Fn(&[i64]) -> ProcessorRef) {
    let program = parse(src).unwrap();
    let ispace = t(ispace);
    for pt in Tuple::points_of(&ispace) {
        let got = eval_mapping(&program, func, &pt, &ispace, machine).unwrap();
        assert_eq!(got, expected(&pt), "{func} at {pt}");
    }
}

#[test]
fn block2d_reference_point() {
    let program = parse(corpus::BLOCK2D).unwrap();
    let got = eval_mapping(&program, "block2D", &t(&[2, 3]), &t(&[6, 6]), MachineShape::gpu(2, 2)).unwrap();
    assert_eq!(got, p(0, 1));
}

#[test]
fn quickstart_structure() {
    let program = parse(corpus::QUICKSTART).unwrap();
    let kinds: Vec<&str> = program.statements().map(|s| s.kind.keyword()).collect();
    assert_eq!(kinds, ["def", "IndexTaskMap", "Region", "Layout", "GarbageCollect", "Backpressure"]);
    assert!(validate(&program).is_empty());
    assert!(matches!(
        program.statements().nth(5).map(|s| &s.kind),
        Some(StatementKind::Backpressure { depth: 1, .. })
    ));
}

#[test]
fn linear_cyclic_origin_goes_to_first_processor() {
    let src = corpus::LINEAR_CYCLIC;
    check_table(src, "linearCyclic", &[4, 4], MachineShape::gpu(2, 2), |x| {
        let lin = (x[0] * 4 + x[1]) % 4;
        p(lin % 2, lin / 2)
    });
}

#[test]
fn distribution_catalog() {
    let m = MachineShape::gpu(2, 2);
    let src = corpus::DISTRIBUTIONS;
    check_table(src, "block2D", &[4, 4], m, |x| p(x[0] / 2, x[1] / 2));
    check_table(src, "block1D_x", &[4, 4], m, |x| p(x[1] % 2, x[1] / 2));
    check_table(src, "block1D_y", &[4, 4], m, |x| p(x[0] % 2, x[0] / 2));
    check_table(src, "cyclic2D", &[4, 4], m, |x| p(x[0] % 2, x[1] % 2));
    check_table(src, "cyclic1D_x", &[4, 4], m, |x| p(x[1] % 2, x[1] / 2));
    check_table(src, "cyclic1D_y", &[4, 4], m, |x| p(x[0] % 2, x[0] / 2));
    check_table(src, "blockcyclic", &[4, 4], m, |x| p((x[0] / 2) % 2, (x[1] / 2) % 2));
}

#[test]
fn hierarchical_split_on_two_by_four() {
    check_table(corpus::HIERARCHICAL_SPLIT, "node_x_gpu_yz", &[4, 4, 4], MachineShape::gpu(2, 4), |x| {
        p(x[0] / 2, x[1] / 2 + 2 * (x[2] / 2))
    });
}

#[test]
fn matmul_functions() {
    let m = MachineShape::gpu(2, 2);
    let src = corpus::MATMUL;
    // decompose(0, (4,4)) of 2 nodes ties and keeps (1, 2); the GPU
    // dimension then splits along the node's (4, 2) sub-space as (2, 1).
    check_table(src, "hierarchical_block2D", &[4, 4], m, |x| p(x[1] / 2, x[0] % 2));
    check_table(src, "hierarchical_block3D", &[2, 2, 2], m, |x| p(x[2], x[1]));
    check_table(src, "linearize_cyclic", &[2, 2, 2], m, |x| {
        let lin = x[0] + 2 * x[1] + 4 * x[2];
        p(lin % 2, (lin / 2) % 2)
    });
    check_table(src, "special_linearize3D", &[2, 2, 2], m, |x| p(x[0] % 2, 0));
    check_table(src, "conditional_linearize3D", &[2, 1, 3], m, |x| {
        let grid = 3;
        p((x[0] + x[1] * grid + x[2] * grid * grid) % 2, 0)
    });
}

#[test]
fn hierarchical_block2d_load_is_even() {
    let program = parse(corpus::MATMUL).unwrap();
    let f = compile_mapper(&program, "summa", MachineShape::gpu(2, 2)).unwrap();
    let ispace = t(&[4, 4]);
    let mut counts = std::collections::BTreeMap::new();
    for pt in Tuple::points_of(&ispace) {
        *counts.entry(f.call(&pt, &ispace).unwrap()).or_insert(0) += 1;
    }
    assert_eq!(counts.len(), 4);
    assert!(counts.values().all(|&c| c == 4));
}

fn small_spaces(rank: usize) -> Vec<Tuple> {
    match rank {
        2 => vec![t(&[4, 4]), t(&[6, 6]), t(&[3, 5]), t(&[8, 2])],
        _ => vec![t(&[2, 2, 2]), t(&[4, 2, 3]), t(&[2, 1, 3])],
    }
}

#[test]
fn corpus_is_total_and_in_range() {
    for (name, src) in corpus::ALL {
        let program = parse(src).unwrap_or_else(|e| panic!("{name}: {e}"));
        let diags = validate(&program);
        assert!(!has_errors(&diags), "{name}: {diags:?}");
        assert!(diags.iter().all(|d| d.severity == Severity::Warning));
        let machine = if *name == "hierarchical_split" { MachineShape::gpu(2, 4) } else { MachineShape::gpu(2, 2) };
        for def in program.functions().filter(|f| f.params.len() == 2) {
            let rank = if *name == "hierarchical_split" || def.name.contains("3D") || def.name.contains("linearize") { 3 } else { 2 };
            for ispace in small_spaces(rank) {
                for pt in Tuple::points_of(&ispace) {
                    let r = eval_mapping(&program, &def.name, &pt, &ispace, machine)
                        .unwrap_or_else(|e| panic!("{name}::{} at {pt} in {ispace}: {e}", def.name));
                    assert!(r.node < machine.nodes && r.proc < machine.procs_per_node);
                }
            }
        }
    }
}

#[test]
fn extensions_are_flagged_only_where_used() {
    let warned = |src: &str| validate(&parse(src).unwrap()).iter().any(|d| d.kind == dsl::DiagnosticKind::Extension);
    assert!(warned(corpus::MATMUL));
    assert!(warned(corpus::HIERARCHICAL_SPLIT));
    assert!(!warned(corpus::QUICKSTART));
    assert!(!warned(corpus::DISTRIBUTIONS));
}

#[test]
fn corpus_round_trips_through_the_printer() {
    for (name, src) in corpus::ALL {
        let program = parse(src).unwrap();
        let printed = program.to_string();
        assert_eq!(parse(&printed).unwrap(), program, "{name}:\n{printed}");
    }
}
