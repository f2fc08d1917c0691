use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use serde_json::{json, Value};

use procmap_core::commvol::{
    halo_volume, interface_area, oracle_boundary_count, surface_volume, transpose_volume, BlockGrid, HaloSpec,
};
use procmap_core::decompose::{
    amgm_lower_bound, greedy_grid, score, search_optimal_with, to_f64, Objective, Rational, SearchOptions,
};
use procmap_core::dsl::{
    compile_mapper, has_errors, parse, validate, BindingTable, Diagnostic, MapperProgram, MappingFunction,
    StatementKind,
};
use procmap_core::tasksim::{check_trace, load_taskgraph, run_with, PointMapper, PointTable, Scheduler};
use procmap_core::{MachineShape, ProcessorRef, Tuple};

use crate::args::{Cli, Command, ObjectiveKind};
use crate::report::{Report, Table};
use crate::sweep::{group_by, run_sweep, SweepGrid};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Flags that parse but do not make sense together.
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Domain(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
        }
    }
}

/// A finished report. `failed` means the command found problems (invalid
/// mapper, checker violations) that still belong in the report.
pub struct Outcome {
    pub report: Report,
    pub failed: bool,
    /// Lines for stderr.
    pub notes: Vec<String>,
}

fn ok(report: Report) -> Result<Outcome, CliError> {
    Ok(Outcome { report, failed: false, notes: Vec::new() })
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Parse { file } => cmd_parse(file),
        Command::Map { file, task, func, ispace, machine } => {
            cmd_map(file, task, func.as_deref(), ispace, machine.shape())
        }
        Command::Decompose { procs, extents, objective, halo, transpose, strict_divisible } => {
            cmd_decompose(*procs, extents, *objective, halo, transpose, *strict_divisible)
        }
        Command::Commvol { extents, grid, halo, transpose, oracle } => cmd_commvol(extents, grid, halo, transpose, *oracle),
        Command::Simulate { mapper, graph, func, seed, machine } => {
            cmd_simulate(mapper, graph, func.as_deref(), *seed, machine.shape())
        }
        Command::Sweep { ratios, areas, gpus, gpus_per_node } => cmd_sweep(&SweepGrid {
            ratios: ratios.clone(),
            areas: areas.iter().map(|a| a.0).collect(),
            gpus: gpus.clone(),
            gpus_per_node: *gpus_per_node,
        }),
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn exact(r: &Rational) -> Value {
    Value::String(r.to_string())
}

fn diagnostics_table(diags: &[Diagnostic]) -> Table {
    let mut t = Table::new("diagnostics");
    for d in diags {
        t.push(json!({"severity": d.severity, "kind": d.kind, "line": d.line, "col": d.col, "message": d.message}));
    }
    t
}

/// Parses and validates, failing on syntax errors or error diagnostics.
fn load_mapper(path: &Path) -> Result<(MapperProgram, Vec<Diagnostic>), CliError> {
    let source = read(path)?;
    let program = parse(&source).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    let diags = validate(&program);
    if has_errors(&diags) {
        let lines: Vec<String> = diags.iter().map(|d| format!("{}:{d}", path.display())).collect();
        return Err(anyhow!("mapper has errors:\n{}", lines.join("\n")).into());
    }
    Ok((program, diags))
}

fn statement_detail(kind: &StatementKind) -> Value {
    match kind {
        StatementKind::IndexTaskMap { task, func } => json!({"task": task, "function": func}),
        StatementKind::TaskMap { task, procs } => json!({"task": task, "procs": procs}),
        StatementKind::DataMap { task, region, proc, memories } => {
            json!({"task": task, "region": region, "proc": proc, "memories": memories})
        }
        StatementKind::DataLayout { task, region, proc, constraints } => {
            let cs: Vec<String> = constraints.iter().map(ToString::to_string).collect();
            json!({"task": task, "region": region, "proc": proc, "constraints": cs})
        }
        StatementKind::GarbageCollect { task, arg } => json!({"task": task, "region": arg}),
        StatementKind::Backpressure { task, depth } => json!({"task": task, "depth": depth}),
        StatementKind::FuncDef(f) => json!({"function": f.name}),
    }
}

pub fn cmd_parse(file: &Path) -> Result<Outcome, CliError> {
    let source = read(file)?;
    let program = parse(&source).map_err(|e| anyhow!("{}: {e}", file.display()))?;
    let diags = validate(&program);

    let mut statements = Table::new("statements");
    for s in program.statements() {
        let task = match &s.kind {
            StatementKind::FuncDef(_) => Value::Null,
            StatementKind::IndexTaskMap { task, .. }
            | StatementKind::TaskMap { task, .. }
            | StatementKind::DataMap { task, .. }
            | StatementKind::DataLayout { task, .. }
            | StatementKind::GarbageCollect { task, .. }
            | StatementKind::Backpressure { task, .. } => Value::String(task.clone()),
        };
        statements.push(json!({
            "line": s.pos.line,
            "keyword": s.kind.keyword(),
            "task": task,
            "detail": statement_detail(&s.kind),
        }));
    }
    let mut globals = Table::new("globals");
    for g in program.globals() {
        globals.push(json!({"line": g.pos.line, "name": g.name, "value": g.value.to_string()}));
    }
    let mut functions = Table::new("functions");
    for f in program.functions() {
        let params: Vec<&str> = f.params.iter().map(|p| p.name.as_str()).collect();
        functions.push(json!({"line": f.pos.line, "name": f.name, "params": params}));
    }

    let failed = has_errors(&diags);
    let notes = diags.iter().map(|d| format!("{}:{d}", file.display())).collect();
    let mut report = Report::new("parse");
    report.tables = vec![diagnostics_table(&diags), statements, globals, functions];
    Ok(Outcome { report, failed, notes })
}

fn processors(machine: MachineShape) -> impl Iterator<Item = ProcessorRef> {
    (0..machine.nodes).flat_map(move |n| (0..machine.procs_per_node).map(move |p| ProcessorRef::new(n, p)))
}

pub fn cmd_map(file: &Path, task: &str, func: Option<&str>, ispace: &[i64], machine: MachineShape) -> Result<Outcome, CliError> {
    if ispace.is_empty() || ispace.iter().any(|&e| e <= 0) {
        return Err(usage("--ispace extents must be positive"));
    }
    let (program, diags) = load_mapper(file)?;
    let program = Arc::new(program);
    let f = match func {
        Some(name) => MappingFunction::for_function(program.clone(), name, machine),
        None => compile_mapper(&program, task, machine),
    }
    .map_err(|e| anyhow!("{e}"))?;

    let ispace: Tuple = ispace.to_vec().into();
    let mut points = Table::new("points");
    let mut counts = std::collections::BTreeMap::new();
    for pt in Tuple::points_of(&ispace) {
        let p = f.call(&pt, &ispace).map_err(|e| anyhow!("{task} at {pt}: {e}"))?;
        if p.node >= machine.nodes || p.proc >= machine.procs_per_node {
            return Err(anyhow!("{task} maps {pt} to {p}, outside the {}x{} machine", machine.nodes, machine.procs_per_node).into());
        }
        *counts.entry(p).or_insert(0u64) += 1;
        points.push(json!({"point": pt, "node": p.node, "proc": p.proc}));
    }
    let mut per_proc = Table::new("counts");
    for p in processors(machine) {
        per_proc.push(json!({"node": p.node, "proc": p.proc, "points": counts.get(&p).copied().unwrap_or(0)}));
    }
    let mut report = Report::new("map");
    report.tables = vec![points, per_proc];
    let notes = diags.iter().map(|d| format!("{}:{d}", file.display())).collect();
    Ok(Outcome { report, failed: false, notes })
}

fn halo_or_unit(halo: &[u64], k: usize) -> Result<Vec<u64>, CliError> {
    match halo.len() {
        0 => Ok(vec![1; k]),
        n if n == k => Ok(halo.to_vec()),
        n => Err(usage(format!("--halo has {n} widths for {k} dimensions"))),
    }
}

pub fn cmd_decompose(
    procs: u64,
    extents: &[u64],
    objective: ObjectiveKind,
    halo: &[u64],
    transpose: &[usize],
    strict_divisible: bool,
) -> Result<Outcome, CliError> {
    if procs == 0 || extents.is_empty() || extents.contains(&0) {
        return Err(usage("--procs and every --extents value must be positive"));
    }
    let k = extents.len();
    let halo = halo_or_unit(halo, k)?;
    if let Some(&n) = transpose.iter().find(|&&n| n >= k) {
        return Err(usage(format!("--transpose dimension {n} out of range for {k} dimensions")));
    }
    let obj = match objective {
        ObjectiveKind::Isotropic => Objective::Isotropic,
        ObjectiveKind::Halo => Objective::AnisotropicHalo { halo },
        ObjectiveKind::Transpose => {
            Objective::WithTranspose { halo, transposed: transpose.iter().copied().collect::<BTreeSet<_>>() }
        }
    };
    let options = SearchOptions { strict_divisible };
    let best = search_optimal_with(procs, extents, &obj, options).map_err(|e| anyhow!("{e}"))?;
    let greedy = greedy_grid(procs, k);
    let greedy_score = score(&greedy, extents, &obj).map_err(|e| anyhow!("{e}"))?;
    let ratio = if best.score == Rational::from_integer(0.into()) {
        Rational::from_integer(1.into())
    } else {
        &greedy_score / &best.score
    };
    let bound = (objective == ObjectiveKind::Isotropic).then(|| amgm_lower_bound(procs, extents));

    let mut t = Table::new("decompose");
    t.push(json!({
        "procs": procs,
        "extents": extents,
        "objective": obj.name(),
        "optimal": best.factorization,
        "score": exact(&best.score),
        "score_value": to_f64(&best.score),
        "greedy": greedy,
        "greedy_score": exact(&greedy_score),
        "greedy_score_value": to_f64(&greedy_score),
        "amgm_bound": bound,
        "ratio": exact(&ratio),
        "ratio_value": to_f64(&ratio),
    }));
    let mut report = Report::new("decompose");
    report.tables.push(t);
    ok(report)
}

pub fn cmd_commvol(extents: &[u64], grid: &[u64], halo: &[u64], transpose: &[usize], oracle: bool) -> Result<Outcome, CliError> {
    let g = BlockGrid::new(extents.to_vec(), grid.to_vec()).map_err(|e| usage(e.to_string()))?;
    let halo = HaloSpec::new(halo_or_unit(halo, g.rank())?);
    let mut t = Table::new("commvol");
    let sv = surface_volume(&g);
    let hv = halo_volume(&g, &halo).map_err(|e| anyhow!("{e}"))?;
    let mut tv = Rational::from_integer(0.into());
    for &n in transpose {
        tv += transpose_volume(&g, n).map_err(|e| usage(e.to_string()))?;
    }
    let counted = if oracle {
        Some(oracle_boundary_count(&g, &halo).map_err(|e| anyhow!("{e}"))?)
    } else {
        None
    };
    t.push(json!({
        "extents": extents,
        "grid": grid,
        "divisible": g.is_divisible(),
        "surface_volume": exact(&sv),
        "interface_area": exact(&interface_area(&g)),
        "halo": halo.widths,
        "halo_volume": exact(&hv),
        "transpose": transpose,
        "transpose_volume": exact(&tv),
        "oracle_boundary_count": counted,
    }));
    let mut report = Report::new("commvol");
    report.tables.push(t);
    ok(report)
}

pub fn cmd_simulate(
    mapper: &Path,
    graph: &Path,
    func: Option<&str>,
    seed: Option<u64>,
    machine: MachineShape,
) -> Result<Outcome, CliError> {
    let (program, _) = load_mapper(mapper)?;
    let g = load_taskgraph(&read(graph)?).map_err(|e| anyhow!("{}: {e}", graph.display()))?;
    let mut table = BindingTable::from_program(&program, machine).map_err(|e| anyhow!("{e}"))?;
    if let Some(name) = func {
        let f = MappingFunction::for_function(Arc::new(program), name, machine).map_err(|e| anyhow!("{e}"))?;
        table = table.with_fallback(f);
    }
    // Evaluate every point once; the simulator and checker share the table.
    let points = PointTable::build(&g, &table, machine).map_err(|e| anyhow!("{e}"))?;
    let scheduler = seed.map_or(Scheduler::Priority, Scheduler::Random);
    let trace = run_with(&g, &points, machine, scheduler).map_err(|e| anyhow!("{e}"))?;
    let diags = check_trace(&trace, &g, &points as &dyn PointMapper);

    let mut entries = Table::new("trace");
    for e in &trace.entries {
        entries.push(json!({"stage": e.stage, "task": e.task, "node": e.node, "proc": e.proc, "step": e.step}));
    }
    let mut slices = Table::new("slices");
    for s in &trace.slices {
        slices.push(json!({"id": s.id, "origin": s.origin, "node": s.proc.node, "proc": s.proc.proc, "points": s.points.len()}));
    }
    let mut stats = Table::new("stats");
    for s in &trace.stats {
        stats.push(json!({"node": s.node, "proc": s.proc, "tasks": s.tasks, "points": s.points}));
    }
    let mut problems = Table::new("diagnostics");
    for d in &diags {
        problems.push(json!({"kind": d.kind, "entry": d.entry, "task": d.task, "message": d.message}));
    }
    let mut summary = Table::new("summary");
    summary.push(json!({
        "tasks": g.len(),
        "entries": trace.entries.len(),
        "steps": trace.steps,
        "scheduler": seed.map_or("priority".to_string(), |s| format!("random:{s}")),
        "violations": diags.len(),
    }));

    let failed = !diags.is_empty();
    let notes = diags.iter().map(|d| format!("{:?} at {}: {}", d.kind, d.task, d.message)).collect();
    let mut report = Report::new("simulate");
    report.tables = vec![summary, entries, slices, stats, problems];
    Ok(Outcome { report, failed, notes })
}

pub fn cmd_sweep(grid: &SweepGrid) -> Result<Outcome, CliError> {
    let records = run_sweep(grid).map_err(|e| usage(e.to_string()))?;
    let pct = |x: f64| (x * 1e6).round() / 1e4;

    let mut configs = Table::new("configs");
    for r in &records {
        configs.push(json!({
            "ratio": format!("1:{}", r.ratio),
            "area_per_node": r.area,
            "gpus": r.gpus,
            "nodes": r.nodes,
            "extents": r.extents,
            "greedy": r.greedy,
            "optimal": r.optimal,
            "greedy_volume": exact(&r.greedy_volume),
            "optimal_volume": exact(&r.optimal_volume),
            "model_improvement_pct": pct(to_f64(&r.improvement)),
        }));
    }
    let mut report = Report::new("sweep");
    report.tables.push(configs);
    let groups: [(&str, &str, fn(&crate::sweep::SweepRecord) -> u64); 3] = [
        ("by_ratio", "ratio", |r| r.ratio),
        ("by_area", "area_per_node", |r| r.area),
        ("by_gpus", "gpus", |r| r.gpus),
    ];
    for (name, field, key) in groups {
        let mut t = Table::new(name);
        for (k, n, g) in group_by(&records, key) {
            let label = if field == "ratio" { json!(format!("1:{k}")) } else { json!(k) };
            let mut rec = serde_json::Map::new();
            rec.insert(field.into(), label);
            rec.insert("configs".into(), json!(n));
            rec.insert("model_geomean_improvement_pct".into(), json!(pct(g)));
            t.records.push(rec);
        }
        report.tables.push(t);
    }
    let mut overall = Table::new("overall");
    let all = group_by(&records, |_| 0);
    overall.push(json!({
        "configs": records.len(),
        "model_geomean_improvement_pct": pct(all.first().map_or(0.0, |g| g.2)),
        "basis": "analytic halo-exchange volume; not a runtime measurement",
    }));
    report.tables.push(overall);
    ok(report)
}
