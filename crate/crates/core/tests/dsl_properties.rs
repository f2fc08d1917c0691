use proptest::prelude::*;

use procmap_core::dsl::parser::parse_expr;
use procmap_core::dsl::{eval_mapping, parse, BinOp, Expr, Primitive};
use procmap_core::{MachineShape, Tuple};

fn var() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["a", "b", "m", "ipoint", "x_1"]).prop_map(String::from)
}

fn binop() -> impl Strategy<Value = BinOp> {
    prop::sample::select(vec![
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Div,
        BinOp::Mod,
        BinOp::Gt,
        BinOp::Lt,
        BinOp::Eq,
    ])
}

fn prim() -> impl Strategy<Value = Primitive> {
    prop::sample::select(vec![
        Primitive::Split,
        Primitive::Merge,
        Primitive::Swap,
        Primitive::Reorder,
        Primitive::Slice,
        Primitive::Decompose,
    ])
}

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        var().prop_map(Expr::Var),
        (0i64..1000).prop_map(Expr::Int),
        prop::sample::select(vec!["GPU", "CPU", "OMP"]).prop_map(|k| Expr::Machine(k.into())),
    ];
    leaf.prop_recursive(4, 48, 4, |inner| {
        let boxed = inner.clone().prop_map(Box::new);
        let index_item = prop_oneof![
            3 => inner.clone(),
            1 => inner.clone().prop_map(|e| Expr::Splat(Box::new(e))),
        ];
        prop_oneof![
            boxed.clone().prop_map(Expr::Neg),
            (prop::sample::select(vec!["f", "g"]), prop::collection::vec(inner.clone(), 1..4))
                .prop_map(|(c, args)| Expr::Call { callee: c.into(), args }),
            boxed.clone().prop_map(|t| Expr::Member { target: t, name: "size".into() }),
            (binop(), inner.clone(), inner.clone()).prop_map(|(op, l, r)| Expr::binary(op, l, r)),
            (boxed.clone(), prop::collection::vec(index_item, 1..4))
                .prop_map(|(t, indices)| Expr::Index { target: t, indices }),
            (boxed.clone(), prop::option::of(boxed.clone()), prop::option::of(boxed.clone()))
                .prop_map(|(t, lo, hi)| Expr::TupleSlice { target: t, lo, hi }),
            (boxed.clone(), boxed.clone(), boxed.clone())
                .prop_map(|(c, a, b)| Expr::Ternary { cond: c, then: a, otherwise: b }),
            (boxed.clone(), prim(), prop::collection::vec(inner.clone(), 0..4))
                .prop_map(|(t, p, args)| Expr::Primitive { target: t, prim: p, args }),
            (boxed.clone(), var(), prop::collection::vec(-5i64..10, 0..4))
                .prop_map(|(b, v, range)| Expr::Comprehension { body: b, var: v, range }),
            prop::collection::vec(inner, 0..4).prop_map(Expr::TupleLit),
        ]
    })
}

proptest! {
    #[test]
    fn printed_expressions_reparse(e in expr()) {
        let printed = e.to_string();
        let reparsed = parse_expr(&printed).map_err(|err| TestCaseError::fail(format!("{printed}: {err}")))?;
        prop_assert_eq!(reparsed, e);
    }

    #[test]
    fn printed_functions_reparse(e1 in expr(), e2 in expr()) {
        let src = format!("def f(Tuple a, b):\n    x = {e1}\n    return {e2}\nIndexTaskMap t f\n");
        let program = parse(&src).unwrap();
        prop_assert_eq!(parse(&program.to_string()).unwrap(), program);
    }

    #[test]
    fn splat_equals_explicit_indices(nodes in 1u32..5, procs in 1u32..5, x in 0i64..40, y in 0i64..40) {
        let src = "m = Machine(GPU)\n\
                   def s(Tuple ipoint, Tuple ispace):\n    idx = ipoint % m.size\n    return m[*idx]\n\
                   def e(Tuple ipoint, Tuple ispace):\n    idx = ipoint % m.size\n    return m[idx[0], idx[1]]\n\
                   def l(Tuple ipoint, Tuple ispace):\n    idx = ipoint % m.size\n    return m[idx]\n";
        let program = parse(src).unwrap();
        let machine = MachineShape::gpu(nodes, procs);
        let (pt, sp): (Tuple, Tuple) = (vec![x, y].into(), vec![40, 40].into());
        let splat = eval_mapping(&program, "s", &pt, &sp, machine).unwrap();
        prop_assert_eq!(eval_mapping(&program, "e", &pt, &sp, machine).unwrap(), splat);
        prop_assert_eq!(eval_mapping(&program, "l", &pt, &sp, machine).unwrap(), splat);
    }

    #[test]
    fn block_mapping_is_deterministic_and_in_range(
        nodes in 1u32..6, procs in 1u32..6, sx in 1i64..20, sy in 1i64..20, fx in 0.0f64..1.0, fy in 0.0f64..1.0,
    ) {
        let program = parse(procmap_core::corpus::BLOCK2D).unwrap();
        let machine = MachineShape::gpu(nodes, procs);
        let pt: Tuple = vec![(fx * sx as f64) as i64, (fy * sy as f64) as i64].into();
        let sp: Tuple = vec![sx, sy].into();
        let first = eval_mapping(&program, "block2D", &pt, &sp, machine).unwrap();
        prop_assert_eq!(eval_mapping(&program, "block2D", &pt, &sp, machine).unwrap(), first);
        prop_assert!(first.node < nodes && first.proc < procs);
        prop_assert_eq!(first.node as i64, pt[0] * nodes as i64 / sx);
        prop_assert_eq!(first.proc as i64, pt[1] * procs as i64 / sy);
    }
}
