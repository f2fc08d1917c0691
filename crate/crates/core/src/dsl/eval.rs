//! Tree-walking evaluator for mapping functions.
//!
//! Integer `/` is floor division and `%` takes the sign of the divisor.
//! Scalar/tuple operands broadcast; tuple/tuple operands must share a rank.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use num_integer::Integer;

use super::ast::*;
use crate::decompose::{search_optimal, DecomposeError, Objective};
use crate::procspace::{MachineShape, ProcKind, ProcSpace, ProcessorRef, SpaceError, Tuple};

const MAX_CALL_DEPTH: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Int(i64),
    Tuple(Tuple),
    Space(Arc<ProcSpace>),
    Proc(ProcessorRef),
}

impl Value {
    pub fn kind(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Tuple(_) => "tuple",
            Value::Space(_) => "processor space",
            Value::Proc(_) => "processor",
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Tuple(t) => write!(f, "{t}"),
            Value::Space(s) => write!(f, "space{}", s.shape()),
            Value::Proc(p) => write!(f, "{p}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("undefined variable `{0}`")]
    UndefinedVariable(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("no IndexTaskMap binds task `{0}`")]
    NoBinding(String),
    #[error("`{func}` takes {expected} arguments, got {got}")]
    Arity { func: String, expected: usize, got: usize },
    #[error("type mismatch in {context}: expected {expected}, found {found}")]
    TypeMismatch { context: String, expected: &'static str, found: &'static str },
    #[error("rank mismatch in {context}: {left} vs {right}")]
    RankMismatch { context: String, left: usize, right: usize },
    #[error("index {index} out of range for length {len}")]
    TupleIndexOutOfRange { index: i64, len: usize },
    #[error("division by zero")]
    DivisionByZero,
    #[error("integer overflow")]
    Overflow,
    #[error("unknown processor kind `{0}`")]
    UnknownProcKind(String),
    #[error("Machine({requested}) requested but the configured machine is {configured}")]
    MachineKind { requested: ProcKind, configured: ProcKind },
    #[error("unknown member `{0}`")]
    UnknownMember(String),
    #[error("invalid argument to {prim}: {detail}")]
    InvalidArgument { prim: &'static str, detail: String },
    #[error("function `{0}` finished without returning")]
    MissingReturn(String),
    #[error("call depth exceeded {MAX_CALL_DEPTH}")]
    RecursionLimit,
    #[error("point {ipoint} lies outside iteration space {ispace}")]
    PointOutOfSpace { ipoint: Tuple, ispace: Tuple },
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Decompose(#[from] DecomposeError),
}

type PrimCache = Mutex<HashMap<(ProcSpace, Primitive, Vec<Vec<i64>>), Arc<ProcSpace>>>;

struct Evaluator<'a> {
    program: &'a MapperProgram,
    machine: MachineShape,
    globals: &'a HashMap<String, Value>,
    cache: &'a PrimCache,
    depth: usize,
}

fn mismatch(context: &str, expected: &'static str, found: &Value) -> EvalError {
    EvalError::TypeMismatch { context: context.to_string(), expected, found: found.kind() }
}

fn arith(op: BinOp, a: i64, b: i64) -> Result<i64, EvalError> {
    let r = match op {
        BinOp::Add => a.checked_add(b),
        BinOp::Sub => a.checked_sub(b),
        BinOp::Mul => a.checked_mul(b),
        BinOp::Div | BinOp::Mod => {
            if b == 0 {
                return Err(EvalError::DivisionByZero);
            }
            if a == i64::MIN && b == -1 {
                None
            } else if op == BinOp::Div {
                Some(Integer::div_floor(&a, &b))
            } else {
                Some(a.mod_floor(&b))
            }
        }
        BinOp::Gt => Some((a > b) as i64),
        BinOp::Lt => Some((a < b) as i64),
        BinOp::Eq => Some((a == b) as i64),
    };
    r.ok_or(EvalError::Overflow)
}

fn binary(op: BinOp, lhs: Value, rhs: Value) -> Result<Value, EvalError> {
    let ctx = format!("`{}`", op.symbol());
    let elementwise = |l: &[i64], r: &[i64]| -> Result<Value, EvalError> {
        l.iter().zip(r).map(|(&a, &b)| arith(op, a, b)).collect::<Result<Vec<_>, _>>().map(|v| Value::Tuple(v.into()))
    };
    match (op, &lhs, &rhs) {
        (_, Value::Int(a), Value::Int(b)) => Ok(Value::Int(arith(op, *a, *b)?)),
        (BinOp::Eq, Value::Tuple(a), Value::Tuple(b)) => Ok(Value::Int((a == b) as i64)),
        (BinOp::Gt | BinOp::Lt | BinOp::Eq, _, _) => Err(mismatch(&ctx, "int", if matches!(lhs, Value::Int(_)) { &rhs } else { &lhs })),
        (_, Value::Tuple(a), Value::Tuple(b)) => {
            if a.len() != b.len() {
                return Err(EvalError::RankMismatch { context: ctx, left: a.len(), right: b.len() });
            }
            elementwise(a, b)
        }
        (_, Value::Tuple(a), Value::Int(b)) => elementwise(a, &vec![*b; a.len()]),
        (_, Value::Int(a), Value::Tuple(b)) => elementwise(&vec![*a; b.len()], b),
        (_, Value::Int(_) | Value::Tuple(_), other) | (_, other, _) => Err(mismatch(&ctx, "int or tuple", other)),
    }
}

/// Python-style slice bounds: negative values count from the end and
/// out-of-range values clamp.
fn slice_bounds(len: usize, lo: Option<i64>, hi: Option<i64>) -> (usize, usize) {
    let clamp = |v: i64| -> usize {
        let v = if v < 0 { v + len as i64 } else { v };
        v.clamp(0, len as i64) as usize
    };
    let lo = lo.map_or(0, clamp);
    let hi = hi.map_or(len, clamp);
    (lo, hi.max(lo))
}

fn as_usize(prim: &'static str, v: i64) -> Result<usize, EvalError> {
    usize::try_from(v).map_err(|_| EvalError::InvalidArgument { prim, detail: format!("negative dimension {v}") })
}

impl Evaluator<'_> {
    fn lookup(&self, locals: &HashMap<String, Value>, name: &str) -> Result<Value, EvalError> {
        locals
            .get(name)
            .or_else(|| self.globals.get(name))
            .cloned()
            .ok_or_else(|| EvalError::UndefinedVariable(name.to_string()))
    }

    fn int(&mut self, locals: &mut HashMap<String, Value>, e: &Expr, context: &str) -> Result<i64, EvalError> {
        match self.expr(locals, e)? {
            Value::Int(v) => Ok(v),
            other => Err(mismatch(context, "int", &other)),
        }
    }

    fn expr(&mut self, locals: &mut HashMap<String, Value>, e: &Expr) -> Result<Value, EvalError> {
        match e {
            Expr::Var(name) => self.lookup(locals, name),
            Expr::Int(v) => Ok(Value::Int(*v)),
            Expr::Neg(inner) => binary(BinOp::Sub, Value::Int(0), self.expr(locals, inner)?),
            Expr::Call { callee, args } => {
                let values = args.iter().map(|a| self.expr(locals, a)).collect::<Result<Vec<_>, _>>()?;
                self.call(callee, values)
            }
            Expr::Machine(kind) => {
                let requested: ProcKind =
                    kind.parse().map_err(|_| EvalError::UnknownProcKind(kind.clone()))?;
                if requested != self.machine.kind {
                    return Err(EvalError::MachineKind { requested, configured: self.machine.kind });
                }
                Ok(Value::Space(Arc::new(ProcSpace::machine(self.machine))))
            }
            Expr::Member { target, name } => match (self.expr(locals, target)?, name.as_str()) {
                (Value::Space(s), "size") => Ok(Value::Tuple(s.shape().clone())),
                (Value::Space(_), _) => Err(EvalError::UnknownMember(name.clone())),
                (other, _) => Err(mismatch(&format!("`.{name}`"), "processor space", &other)),
            },
            Expr::Binary { op, lhs, rhs } => {
                let l = self.expr(locals, lhs)?;
                let r = self.expr(locals, rhs)?;
                binary(*op, l, r)
            }
            Expr::Index { target, indices } => {
                let target = self.expr(locals, target)?;
                self.index(locals, target, indices)
            }
            Expr::TupleSlice { target, lo, hi } => {
                let elems = match self.expr(locals, target)? {
                    Value::Tuple(t) => t,
                    Value::Space(s) => s.shape().clone(),
                    other => return Err(mismatch("tuple slice", "tuple or processor space", &other)),
                };
                let lo = lo.as_ref().map(|e| self.int(locals, e, "slice bound")).transpose()?;
                let hi = hi.as_ref().map(|e| self.int(locals, e, "slice bound")).transpose()?;
                let (lo, hi) = slice_bounds(elems.len(), lo, hi);
                Ok(Value::Tuple(elems[lo..hi].to_vec().into()))
            }
            Expr::Splat(_) => Err(EvalError::TypeMismatch {
                context: "splat outside an index list".into(),
                expected: "index list",
                found: "expression",
            }),
            Expr::Ternary { cond, then, otherwise } => {
                if self.int(locals, cond, "condition")? != 0 {
                    self.expr(locals, then)
                } else {
                    self.expr(locals, otherwise)
                }
            }
            Expr::Primitive { target, prim, args } => {
                let space = match self.expr(locals, target)? {
                    Value::Space(s) => s,
                    other => return Err(mismatch(prim.name(), "processor space", &other)),
                };
                if args.len() != prim.arity() {
                    return Err(EvalError::Arity { func: prim.name().into(), expected: prim.arity(), got: args.len() });
                }
                let mut raw = Vec::with_capacity(args.len());
                for a in args {
                    raw.push(match self.expr(locals, a)? {
                        Value::Int(v) => vec![v],
                        Value::Tuple(t) if *prim == Primitive::Decompose && raw.len() == 1 => t.into_vec(),
                        other => return Err(mismatch(prim.name(), "int", &other)),
                    });
                }
                self.primitive(space, *prim, raw).map(Value::Space)
            }
            Expr::Comprehension { body, var, range } => {
                let saved = locals.remove(var);
                let mut out = Vec::with_capacity(range.len());
                let mut result = Ok(());
                for &v in range {
                    locals.insert(var.clone(), Value::Int(v));
                    match self.int(locals, body, "tuple comprehension") {
                        Ok(x) => out.push(x),
                        Err(e) => {
                            result = Err(e);
                            break;
                        }
                    }
                }
                locals.remove(var);
                if let Some(old) = saved {
                    locals.insert(var.clone(), old);
                }
                result.map(|_| Value::Tuple(out.into()))
            }
            Expr::TupleLit(items) => {
                let elems = items
                    .iter()
                    .map(|i| self.int(locals, i, "tuple literal"))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Value::Tuple(elems.into()))
            }
        }
    }

    fn index(&mut self, locals: &mut HashMap<String, Value>, target: Value, indices: &[Expr]) -> Result<Value, EvalError> {
        match target {
            Value::Tuple(t) => {
                let [single] = indices else {
                    return Err(EvalError::RankMismatch { context: "tuple index".into(), left: 1, right: indices.len() });
                };
                if matches!(single, Expr::Splat(_)) {
                    return Err(EvalError::TypeMismatch { context: "tuple index".into(), expected: "int", found: "splat" });
                }
                let i = self.int(locals, single, "tuple index")?;
                let j = if i < 0 { i + t.len() as i64 } else { i };
                if j < 0 || j >= t.len() as i64 {
                    return Err(EvalError::TupleIndexOutOfRange { index: i, len: t.len() });
                }
                Ok(Value::Int(t[j as usize]))
            }
            Value::Space(space) => {
                let mut idx = Vec::new();
                for item in indices {
                    match item {
                        Expr::Splat(inner) => match self.expr(locals, inner)? {
                            Value::Tuple(t) => idx.extend_from_slice(&t),
                            other => return Err(mismatch("splat", "tuple", &other)),
                        },
                        e => match self.expr(locals, e)? {
                            Value::Int(v) => idx.push(v),
                            // A lone tuple index means the same as its splat.
                            Value::Tuple(t) if indices.len() == 1 => idx.extend_from_slice(&t),
                            other => return Err(mismatch("processor index", "int", &other)),
                        },
                    }
                }
                if idx.len() != space.rank() {
                    return Err(EvalError::RankMismatch {
                        context: "processor index".into(),
                        left: space.rank(),
                        right: idx.len(),
                    });
                }
                Ok(Value::Proc(space.resolve(&idx.into())?))
            }
            other => Err(mismatch("index", "tuple or processor space", &other)),
        }
    }

    fn primitive(&mut self, space: Arc<ProcSpace>, prim: Primitive, args: Vec<Vec<i64>>) -> Result<Arc<ProcSpace>, EvalError> {
        let key = (ProcSpace::clone(&space), prim, args);
        if let Some(hit) = self.cache.lock().expect("cache lock poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let args = &key.2;
        let name = prim.name();
        let result = match prim {
            Primitive::Split => space.split(as_usize(name, args[0][0])?, args[1][0])?,
            Primitive::Merge => space.merge(as_usize(name, args[0][0])?, as_usize(name, args[1][0])?)?,
            Primitive::Swap | Primitive::Reorder => {
                space.swap(as_usize(name, args[0][0])?, as_usize(name, args[1][0])?)?
            }
            Primitive::Slice => space.slice(as_usize(name, args[0][0])?, args[1][0], args[2][0])?,
            Primitive::Decompose => {
                let dim = as_usize(name, args[0][0])?;
                let extent = *space.shape().get(dim).ok_or(SpaceError::DimOutOfRange { dim, rank: space.rank() })?;
                let extents = args[1]
                    .iter()
                    .map(|&l| u64::try_from(l).ok().filter(|&l| l > 0))
                    .collect::<Option<Vec<u64>>>()
                    .ok_or_else(|| EvalError::InvalidArgument {
                        prim: name,
                        detail: format!("extents {:?} must be positive", args[1]),
                    })?;
                let best = search_optimal(extent as u64, &extents, &Objective::Isotropic)?;
                space.desugar_decompose(dim, &best.factorization.as_i64())?
            }
        };
        let result = Arc::new(result);
        self.cache.lock().expect("cache lock poisoned").insert(key, result.clone());
        Ok(result)
    }

    fn call(&mut self, name: &str, args: Vec<Value>) -> Result<Value, EvalError> {
        let def = self.program.function(name).ok_or_else(|| EvalError::UnknownFunction(name.to_string()))?;
        if def.params.len() != args.len() {
            return Err(EvalError::Arity { func: name.to_string(), expected: def.params.len(), got: args.len() });
        }
        if self.depth >= MAX_CALL_DEPTH {
            return Err(EvalError::RecursionLimit);
        }
        let mut locals = HashMap::new();
        for (param, arg) in def.params.iter().zip(args) {
            let ctx = || format!("parameter `{}` of `{name}`", param.name);
            let value = match (param.ty.as_deref(), arg) {
                (Some("Tuple"), Value::Space(s)) => Value::Tuple(s.shape().clone()),
                (Some("Tuple"), v @ Value::Tuple(_)) => v,
                (Some("Tuple"), v) => return Err(mismatch(&ctx(), "tuple", &v)),
                (Some("int"), v @ Value::Int(_)) => v,
                (Some("int"), v) => return Err(mismatch(&ctx(), "int", &v)),
                (_, v) => v,
            };
            locals.insert(param.name.clone(), value);
        }
        self.depth += 1;
        let result = self.body(def, &mut locals);
        self.depth -= 1;
        result
    }

    fn body(&mut self, def: &FuncDef, locals: &mut HashMap<String, Value>) -> Result<Value, EvalError> {
        for stmt in &def.body {
            match stmt {
                FuncStmt::Assign(a) => {
                    let v = self.expr(locals, &a.value)?;
                    locals.insert(a.name.clone(), v);
                }
                FuncStmt::Return { value, .. } => return self.expr(locals, value),
            }
        }
        Err(EvalError::MissingReturn(def.name.clone()))
    }
}

fn eval_globals(program: &MapperProgram, machine: MachineShape, cache: &PrimCache) -> Result<HashMap<String, Value>, EvalError> {
    let mut globals = HashMap::new();
    for assign in program.globals() {
        let snapshot = globals.clone();
        let mut ev = Evaluator { program, machine, globals: &snapshot, cache, depth: 0 };
        let v = ev.expr(&mut HashMap::new(), &assign.value)?;
        globals.insert(assign.name.clone(), v);
    }
    Ok(globals)
}

fn apply(
    program: &MapperProgram,
    machine: MachineShape,
    globals: &HashMap<String, Value>,
    cache: &PrimCache,
    func: &str,
    ipoint: &Tuple,
    ispace: &Tuple,
) -> Result<ProcessorRef, EvalError> {
    if !ipoint.in_bounds(ispace) {
        return Err(EvalError::PointOutOfSpace { ipoint: ipoint.clone(), ispace: ispace.clone() });
    }
    let mut ev = Evaluator { program, machine, globals, cache, depth: 0 };
    match ev.call(func, vec![Value::Tuple(ipoint.clone()), Value::Tuple(ispace.clone())])? {
        Value::Proc(p) => Ok(p),
        other => Err(mismatch(&format!("result of `{func}`"), "processor", &other)),
    }
}

/// Evaluates `func(ipoint, ispace)` against `machine` and returns the base
/// processor it selects.
pub fn eval_mapping(
    program: &MapperProgram,
    func: &str,
    ipoint: &Tuple,
    ispace: &Tuple,
    machine: MachineShape,
) -> Result<ProcessorRef, EvalError> {
    let cache = PrimCache::default();
    let globals = eval_globals(program, machine, &cache)?;
    apply(program, machine, &globals, &cache, func, ipoint, ispace)
}

/// A mapping function bound to a machine. Globals are evaluated once;
/// transformed spaces are memoized across calls and shared between clones.
#[derive(Clone)]
pub struct MappingFunction {
    program: Arc<MapperProgram>,
    func: String,
    machine: MachineShape,
    globals: Arc<HashMap<String, Value>>,
    cache: Arc<PrimCache>,
}

impl fmt::Debug for MappingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MappingFunction").field("func", &self.func).field("machine", &self.machine).finish()
    }
}

impl MappingFunction {
    /// Binds a named function directly, without an IndexTaskMap statement.
    pub fn for_function(program: Arc<MapperProgram>, func: &str, machine: MachineShape) -> Result<Self, EvalError> {
        let def = program.function(func).ok_or_else(|| EvalError::UnknownFunction(func.to_string()))?;
        if def.params.len() != 2 {
            return Err(EvalError::Arity { func: func.to_string(), expected: 2, got: def.params.len() });
        }
        let cache = Arc::new(PrimCache::default());
        let globals = Arc::new(eval_globals(&program, machine, &cache)?);
        Ok(MappingFunction { program, func: func.to_string(), machine, globals, cache })
    }

    pub fn function_name(&self) -> &str {
        &self.func
    }

    pub fn machine(&self) -> MachineShape {
        self.machine
    }

    pub fn call(&self, ipoint: &Tuple, ispace: &Tuple) -> Result<ProcessorRef, EvalError> {
        apply(&self.program, self.machine, &self.globals, &self.cache, &self.func, ipoint, ispace)
    }

    /// Number of memoized primitive applications.
    pub fn cached_spaces(&self) -> usize {
        self.cache.lock().expect("cache lock poisoned").len()
    }
}

/// Compiles the function that `task` is bound to by an IndexTaskMap.
pub fn compile_mapper(program: &MapperProgram, task: &str, machine: MachineShape) -> Result<MappingFunction, EvalError> {
    let func = program.index_binding(task).ok_or_else(|| EvalError::NoBinding(task.to_string()))?;
    MappingFunction::for_function(Arc::new(program.clone()), func, machine)
}

/// Task name to mapping function, with an optional catch-all.
#[derive(Clone, Debug, Default)]
pub struct BindingTable {
    bindings: HashMap<String, MappingFunction>,
    fallback: Option<MappingFunction>,
}

impl BindingTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Compiles every IndexTaskMap statement of `program`.
    pub fn from_program(program: &MapperProgram, machine: MachineShape) -> Result<Self, EvalError> {
        let shared = Arc::new(program.clone());
        let mut table = BindingTable::new();
        for s in program.statements() {
            if let StatementKind::IndexTaskMap { task, func } = &s.kind {
                table.bind(task, MappingFunction::for_function(shared.clone(), func, machine)?);
            }
        }
        Ok(table)
    }

    pub fn bind(&mut self, task: &str, f: MappingFunction) {
        self.bindings.insert(task.to_string(), f);
    }

    pub fn with_fallback(mut self, f: MappingFunction) -> Self {
        self.fallback = Some(f);
        self
    }

    pub fn get(&self, task: &str) -> Option<&MappingFunction> {
        self.bindings.get(task).or(self.fallback.as_ref())
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty() && self.fallback.is_none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    const BLOCK2D: &str = "\
m = Machine(GPU)
def block2d(Tuple ipoint, Tuple ispace):
    node_idx = ipoint[0] * m.size[0] / ispace[0]
    gpu_idx = ipoint[1] * m.size[1] / ispace[1]
    return m[node_idx, gpu_idx]
IndexTaskMap loop0 block2d
";

    fn t(v: &[i64]) -> Tuple {
        v.to_vec().into()
    }

    #[test]
    fn block2d_example_point() {
        let p = parse(BLOCK2D).unwrap();
        let r = eval_mapping(&p, "block2d", &t(&[2, 3]), &t(&[6, 6]), MachineShape::gpu(2, 2)).unwrap();
        assert_eq!(r, ProcessorRef::new(0, 1));
    }

    #[test]
    fn identity_when_ispace_matches_machine() {
        let p = parse(BLOCK2D).unwrap();
        let m = MachineShape::gpu(3, 4);
        for pt in Tuple::points_of(&t(&[3, 4])) {
            let r = eval_mapping(&p, "block2d", &pt, &t(&[3, 4]), m).unwrap();
            assert_eq!(r, ProcessorRef::new(pt[0] as u32, pt[1] as u32));
        }
    }

    #[test]
    fn floor_division_and_modulo() {
        assert_eq!(arith(BinOp::Div, -7, 2), Ok(-4));
        assert_eq!(arith(BinOp::Mod, -7, 2), Ok(1));
        assert_eq!(arith(BinOp::Div, 1, 0), Err(EvalError::DivisionByZero));
        assert_eq!(arith(BinOp::Mul, i64::MAX, 2), Err(EvalError::Overflow));
        assert_eq!(arith(BinOp::Div, i64::MIN, -1), Err(EvalError::Overflow));
    }

    #[test]
    fn broadcasting_and_rank_checks() {
        let a = Value::Tuple(t(&[4, 6]));
        assert_eq!(binary(BinOp::Mul, a.clone(), Value::Int(2)), Ok(Value::Tuple(t(&[8, 12]))));
        assert_eq!(binary(BinOp::Sub, Value::Int(10), a.clone()), Ok(Value::Tuple(t(&[6, 4]))));
        assert!(matches!(binary(BinOp::Add, a, Value::Tuple(t(&[1]))), Err(EvalError::RankMismatch { .. })));
    }

    #[test]
    fn slices_follow_python_bounds() {
        assert_eq!(slice_bounds(3, None, Some(-1)), (0, 2));
        assert_eq!(slice_bounds(3, Some(1), None), (1, 3));
        assert_eq!(slice_bounds(3, Some(5), Some(1)), (3, 3));
    }

    #[test]
    fn compiled_mapper_matches_eval() {
        let p = parse(BLOCK2D).unwrap();
        let m = MachineShape::gpu(2, 2);
        let f = compile_mapper(&p, "loop0", m).unwrap();
        let ispace = t(&[6, 6]);
        for pt in Tuple::points_of(&ispace) {
            assert_eq!(f.call(&pt, &ispace), eval_mapping(&p, "block2d", &pt, &ispace, m));
        }
        assert!(matches!(compile_mapper(&p, "other", m), Err(EvalError::NoBinding(_))));
    }

    #[test]
    fn primitives_are_cached() {
        let src = "\
m = Machine(GPU)
def f(Tuple ipoint, Tuple ispace):
    m3 = m.decompose(0, ispace)
    return m3[0, 0, 0]
IndexTaskMap t f
";
        let p = parse(src).unwrap();
        let f = compile_mapper(&p, "t", MachineShape::gpu(4, 2)).unwrap();
        for _ in 0..5 {
            f.call(&t(&[0, 0]), &t(&[8, 8])).unwrap();
        }
        assert_eq!(f.cached_spaces(), 1);
    }

    #[test]
    fn machine_kind_must_match() {
        let p = parse("m = Machine(CPU)\ndef f(a, b):\n    return m[0, 0]\n").unwrap();
        let err = eval_mapping(&p, "f", &t(&[0]), &t(&[1]), MachineShape::gpu(1, 1)).unwrap_err();
        assert!(matches!(err, EvalError::MachineKind { .. }));
    }

    #[test]
    fn errors_are_reported_not_panicked() {
        let p = parse("m = Machine(GPU)\ndef f(a, b):\n    return m[a[0] / 0, 0]\ndef g(a, b):\n    return a\ndef h(a, b):\n    return m[9, 9]\ndef r(a, b):\n    return r(a, b)\n").unwrap();
        let m = MachineShape::gpu(2, 2);
        let (pt, sp) = (t(&[0]), t(&[1]));
        assert_eq!(eval_mapping(&p, "f", &pt, &sp, m), Err(EvalError::DivisionByZero));
        assert!(matches!(eval_mapping(&p, "g", &pt, &sp, m), Err(EvalError::TypeMismatch { .. })));
        assert!(matches!(eval_mapping(&p, "h", &pt, &sp, m), Err(EvalError::Space(SpaceError::IndexOutOfRange { .. }))));
        assert_eq!(eval_mapping(&p, "r", &pt, &sp, m), Err(EvalError::RecursionLimit));
        assert!(matches!(eval_mapping(&p, "g", &t(&[3]), &sp, m), Err(EvalError::PointOutOfSpace { .. })));
    }

    #[test]
    fn mapping_function_is_shareable() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<MappingFunction>();
        assert_send_sync::<BindingTable>();
    }
}
