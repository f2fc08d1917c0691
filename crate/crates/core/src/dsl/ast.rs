//! Syntax tree for mapper sources, and a printer that emits canonical
//! source text for it.

use std::fmt;

/// Source position. Ignored by `==` so that trees compare structurally.
#[derive(Clone, Copy, Debug, Default, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl PartialEq for Pos {
    fn eq(&self, _: &Pos) -> bool {
        true
    }
}

impl Pos {
    pub fn new(line: usize, col: usize) -> Self {
        Pos { line, col }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MapperProgram {
    pub items: Vec<Item>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Item {
    /// Top-level `name = expr`, e.g. a machine space.
    Global(Assign),
    Statement(Statement),
}

impl MapperProgram {
    /// Everything except top-level assignments, in source order.
    pub fn statements(&self) -> impl Iterator<Item = &Statement> {
        self.items.iter().filter_map(|i| match i {
            Item::Statement(s) => Some(s),
            Item::Global(_) => None,
        })
    }

    pub fn globals(&self) -> impl Iterator<Item = &Assign> {
        self.items.iter().filter_map(|i| match i {
            Item::Global(a) => Some(a),
            Item::Statement(_) => None,
        })
    }

    pub fn functions(&self) -> impl Iterator<Item = &FuncDef> {
        self.statements().filter_map(|s| match &s.kind {
            StatementKind::FuncDef(f) => Some(f),
            _ => None,
        })
    }

    pub fn function(&self, name: &str) -> Option<&FuncDef> {
        self.functions().find(|f| f.name == name)
    }

    /// The function bound to `task` by an `IndexTaskMap` statement.
    pub fn index_binding(&self, task: &str) -> Option<&str> {
        self.statements().find_map(|s| match &s.kind {
            StatementKind::IndexTaskMap { task: t, func } if t == task => Some(func.as_str()),
            _ => None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Statement {
    pub pos: Pos,
    pub kind: StatementKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StatementKind {
    IndexTaskMap { task: String, func: String },
    TaskMap { task: String, procs: Vec<String> },
    DataMap { task: String, region: String, proc: String, memories: Vec<String> },
    DataLayout { task: String, region: String, proc: String, constraints: Vec<Constraint> },
    GarbageCollect { task: String, arg: String },
    Backpressure { task: String, depth: i64 },
    FuncDef(FuncDef),
}

impl StatementKind {
    pub fn keyword(&self) -> &'static str {
        match self {
            StatementKind::IndexTaskMap { .. } => "IndexTaskMap",
            StatementKind::TaskMap { .. } => "Task",
            StatementKind::DataMap { .. } => "Region",
            StatementKind::DataLayout { .. } => "Layout",
            StatementKind::GarbageCollect { .. } => "GarbageCollect",
            StatementKind::Backpressure { .. } => "Backpressure",
            StatementKind::FuncDef(_) => "def",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Constraint {
    Named(String),
    Align(i64),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FuncDef {
    pub pos: Pos,
    pub name: String,
    pub params: Vec<Param>,
    pub body: Vec<FuncStmt>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Param {
    pub ty: Option<String>,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FuncStmt {
    Assign(Assign),
    Return { pos: Pos, value: Expr },
}

impl FuncStmt {
    pub fn pos(&self) -> Pos {
        match self {
            FuncStmt::Assign(a) => a.pos,
            FuncStmt::Return { pos, .. } => *pos,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assign {
    pub pos: Pos,
    pub name: String,
    pub value: Expr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Gt,
    Lt,
    Eq,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Gt => ">",
            BinOp::Lt => "<",
            BinOp::Eq => "==",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Gt | BinOp::Lt | BinOp::Eq => PREC_CMP,
            BinOp::Add | BinOp::Sub => PREC_ADD,
            BinOp::Mul | BinOp::Div | BinOp::Mod => PREC_MUL,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Primitive {
    Split,
    Merge,
    Swap,
    /// Spelled `reorder`; resolves like `swap`.
    Reorder,
    Slice,
    Decompose,
}

impl Primitive {
    pub fn from_name(name: &str) -> Option<Primitive> {
        Some(match name {
            "split" => Primitive::Split,
            "merge" => Primitive::Merge,
            "swap" => Primitive::Swap,
            "reorder" => Primitive::Reorder,
            "slice" => Primitive::Slice,
            "decompose" => Primitive::Decompose,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Primitive::Split => "split",
            Primitive::Merge => "merge",
            Primitive::Swap => "swap",
            Primitive::Reorder => "reorder",
            Primitive::Slice => "slice",
            Primitive::Decompose => "decompose",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Primitive::Slice => 3,
            _ => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Var(String),
    Int(i64),
    Neg(Box<Expr>),
    Call { callee: String, args: Vec<Expr> },
    /// `Machine(GPU)`; the kind is kept verbatim for validation.
    Machine(String),
    Member { target: Box<Expr>, name: String },
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Index { target: Box<Expr>, indices: Vec<Expr> },
    TupleSlice { target: Box<Expr>, lo: Option<Box<Expr>>, hi: Option<Box<Expr>> },
    /// `*e`, only inside index lists.
    Splat(Box<Expr>),
    Ternary { cond: Box<Expr>, then: Box<Expr>, otherwise: Box<Expr> },
    Primitive { target: Box<Expr>, prim: Primitive, args: Vec<Expr> },
    /// `tuple(body for var in (i, j, ..))`.
    Comprehension { body: Box<Expr>, var: String, range: Vec<i64> },
    TupleLit(Vec<Expr>),
}

impl Expr {
    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Ternary { .. } => PREC_TERNARY,
            Expr::Binary { op, .. } => op.precedence(),
            Expr::Neg(_) | Expr::Splat(_) => PREC_UNARY,
            _ => PREC_ATOM,
        }
    }
}

const PREC_TERNARY: u8 = 1;
const PREC_CMP: u8 = 2;
const PREC_ADD: u8 = 3;
const PREC_MUL: u8 = 4;
const PREC_UNARY: u8 = 5;
const PREC_ATOM: u8 = 6;

struct Prec<'a>(&'a Expr, u8);

impl fmt::Display for Prec<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.precedence() < self.1 {
            write!(f, "({})", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

fn comma_list(f: &mut fmt::Formatter<'_>, items: &[Expr]) -> fmt::Result {
    for (i, e) in items.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{e}")?;
    }
    Ok(())
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Var(name) => f.write_str(name),
            Expr::Int(v) => write!(f, "{v}"),
            Expr::Neg(e) => write!(f, "-{}", Prec(e, PREC_UNARY)),
            Expr::Call { callee, args } => {
                write!(f, "{callee}(")?;
                comma_list(f, args)?;
                write!(f, ")")
            }
            Expr::Machine(kind) => write!(f, "Machine({kind})"),
            Expr::Member { target, name } => write!(f, "{}.{name}", Prec(target, PREC_ATOM)),
            Expr::Binary { op, lhs, rhs } => {
                let p = op.precedence();
                write!(f, "{} {} {}", Prec(lhs, p), op.symbol(), Prec(rhs, p + 1))
            }
            Expr::Index { target, indices } => {
                write!(f, "{}[", Prec(target, PREC_ATOM))?;
                comma_list(f, indices)?;
                write!(f, "]")
            }
            Expr::TupleSlice { target, lo, hi } => {
                write!(f, "{}[", Prec(target, PREC_ATOM))?;
                if let Some(lo) = lo {
                    write!(f, "{lo}")?;
                }
                write!(f, ":")?;
                if let Some(hi) = hi {
                    write!(f, "{hi}")?;
                }
                write!(f, "]")
            }
            Expr::Splat(e) => write!(f, "*{}", Prec(e, PREC_UNARY)),
            Expr::Ternary { cond, then, otherwise } => {
                write!(f, "{} ? {} : {}", Prec(cond, PREC_CMP), then, otherwise)
            }
            Expr::Primitive { target, prim, args } => {
                write!(f, "{}.{}(", Prec(target, PREC_ATOM), prim.name())?;
                comma_list(f, args)?;
                write!(f, ")")
            }
            Expr::Comprehension { body, var, range } => {
                let items: Vec<String> = range.iter().map(i64::to_string).collect();
                let trailing = if items.len() == 1 { "," } else { "" };
                write!(f, "tuple({body} for {var} in ({}{trailing}))", items.join(", "))
            }
            Expr::TupleLit(items) => {
                write!(f, "(")?;
                comma_list(f, items)?;
                if items.len() == 1 {
                    write!(f, ",")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Named(n) => f.write_str(n),
            Constraint::Align(v) => write!(f, "Align=={v}"),
        }
    }
}

impl fmt::Display for Assign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.name, self.value)
    }
}

impl fmt::Display for FuncDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let params: Vec<String> = self
            .params
            .iter()
            .map(|p| match &p.ty {
                Some(ty) => format!("{ty} {}", p.name),
                None => p.name.clone(),
            })
            .collect();
        writeln!(f, "def {}({}):", self.name, params.join(", "))?;
        for stmt in &self.body {
            match stmt {
                FuncStmt::Assign(a) => writeln!(f, "    {a}")?,
                FuncStmt::Return { value, .. } => writeln!(f, "    return {value}")?,
            }
        }
        Ok(())
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            StatementKind::IndexTaskMap { task, func } => writeln!(f, "IndexTaskMap {task} {func}"),
            StatementKind::TaskMap { task, procs } => writeln!(f, "Task {task} {}", procs.join(" ")),
            StatementKind::DataMap { task, region, proc, memories } => {
                writeln!(f, "Region {task} {region} {proc} {}", memories.join(" "))
            }
            StatementKind::DataLayout { task, region, proc, constraints } => {
                let cs: Vec<String> = constraints.iter().map(Constraint::to_string).collect();
                writeln!(f, "Layout {task} {region} {proc} {}", cs.join(" "))
            }
            StatementKind::GarbageCollect { task, arg } => writeln!(f, "GarbageCollect {task} {arg}"),
            StatementKind::Backpressure { task, depth } => writeln!(f, "Backpressure {task} {depth}"),
            StatementKind::FuncDef(def) => write!(f, "{def}"),
        }
    }
}

impl fmt::Display for MapperProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for item in &self.items {
            match item {
                Item::Global(a) => writeln!(f, "{a}")?,
                Item::Statement(s) => write!(f, "{s}")?,
            }
        }
        Ok(())
    }
}
