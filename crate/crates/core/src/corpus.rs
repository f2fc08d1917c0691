//! Bundled example mappers and task graphs, used by tests and the CLI.

pub const QUICKSTART: &str = include_str!("../corpus/quickstart.mpl");
pub const BLOCK2D: &str = include_str!("../corpus/block2d.mpl");
pub const LINEAR_CYCLIC: &str = include_str!("../corpus/linear_cyclic.mpl");
/// Written for a 2x4 machine.
pub const HIERARCHICAL_SPLIT: &str = include_str!("../corpus/hierarchical_split.mpl");
pub const DISTRIBUTIONS: &str = include_str!("../corpus/distributions.mpl");
pub const MATMUL: &str = include_str!("../corpus/matmul.mpl");

/// `(file stem, source)` for every bundled mapper.
pub const ALL: &[(&str, &str)] = &[
    ("quickstart", QUICKSTART),
    ("block2d", BLOCK2D),
    ("linear_cyclic", LINEAR_CYCLIC),
    ("hierarchical_split", HIERARCHICAL_SPLIT),
    ("distributions", DISTRIBUTIONS),
    ("matmul", MATMUL),
];

/// Root `f` with children `g`, `h`, `k` over `(4, 4)`; `k` waits on both
/// of its siblings.
pub const NESTED_TASKS: &str = include_str!("../corpus/nested_tasks.json");
/// Root `main` launching the 36-point `loop0` index task.
pub const LOOP0: &str = include_str!("../corpus/loop0.json");

/// `(file stem, document)` for every bundled task graph.
pub const GRAPHS: &[(&str, &str)] = &[("nested_tasks", NESTED_TASKS), ("loop0", LOOP0)];
