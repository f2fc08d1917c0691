//! Static checks. An empty error list means every bound function can be
//! evaluated without name, arity or terminal-set failures; value-level
//! errors (ranks, ranges) are only found by evaluation.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::ast::*;
use super::{CONSTRAINTS, MEMORIES, PROC_KINDS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum DiagnosticKind {
    UnknownProc,
    UnknownMemory,
    UnknownConstraint,
    InvalidValue,
    UnknownFunction,
    UndefinedVariable,
    UnknownMember,
    Arity,
    UnknownType,
    MissingReturn,
    /// Syntax beyond the core grammar: tuple slices, comprehensions and
    /// tuple literals.
    Extension,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub kind: DiagnosticKind,
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {sev} [{:?}] {}", self.line, self.col, self.kind, self.message)
    }
}

pub fn validate(program: &MapperProgram) -> Vec<Diagnostic> {
    let mut v = Validator {
        out: Vec::new(),
        arities: program.functions().map(|f| (f.name.as_str(), f.params.len())).collect(),
        globals: program.globals().map(|g| g.name.as_str()).collect(),
    };
    let mut defined_globals: HashSet<&str> = HashSet::new();
    for item in &program.items {
        match item {
            Item::Global(a) => {
                v.expr(&a.value, a.pos, &Scope { locals: &defined_globals, include_globals: false });
                defined_globals.insert(a.name.as_str());
            }
            Item::Statement(s) => v.statement(s),
        }
    }
    v.out
}

pub fn has_errors(diagnostics: &[Diagnostic]) -> bool {
    diagnostics.iter().any(|d| d.severity == Severity::Error)
}

struct Scope<'a> {
    locals: &'a HashSet<&'a str>,
    include_globals: bool,
}

struct Validator<'p> {
    out: Vec<Diagnostic>,
    arities: HashMap<&'p str, usize>,
    globals: HashSet<&'p str>,
}

impl<'p> Validator<'p> {
    fn report(&mut self, kind: DiagnosticKind, pos: Pos, message: String) {
        let severity = if kind == DiagnosticKind::Extension { Severity::Warning } else { Severity::Error };
        self.out.push(Diagnostic { severity, kind, line: pos.line, col: pos.col, message });
    }

    fn proc(&mut self, name: &str, pos: Pos) {
        if !PROC_KINDS.contains(&name) {
            self.report(DiagnosticKind::UnknownProc, pos, format!("unknown processor kind `{name}`"));
        }
    }

    fn statement(&mut self, s: &'p Statement) {
        let pos = s.pos;
        match &s.kind {
            StatementKind::IndexTaskMap { task, func } => match self.arities.get(func.as_str()) {
                None => self.report(
                    DiagnosticKind::UnknownFunction,
                    pos,
                    format!("task `{task}` is bound to undefined function `{func}`"),
                ),
                Some(&n) if n != 2 => self.report(
                    DiagnosticKind::Arity,
                    pos,
                    format!("mapping function `{func}` must take (ipoint, ispace), found {n} parameters"),
                ),
                Some(_) => {}
            },
            StatementKind::TaskMap { procs, .. } => {
                for p in procs {
                    self.proc(p, pos);
                }
            }
            StatementKind::DataMap { proc, memories, .. } => {
                self.proc(proc, pos);
                for m in memories {
                    if !MEMORIES.contains(&m.as_str()) {
                        self.report(DiagnosticKind::UnknownMemory, pos, format!("unknown memory kind `{m}`"));
                    }
                }
            }
            StatementKind::DataLayout { proc, constraints, .. } => {
                self.proc(proc, pos);
                for c in constraints {
                    match c {
                        Constraint::Named(n) if !CONSTRAINTS.contains(&n.as_str()) => {
                            self.report(DiagnosticKind::UnknownConstraint, pos, format!("unknown layout constraint `{n}`"))
                        }
                        Constraint::Align(a) if *a <= 0 => {
                            self.report(DiagnosticKind::InvalidValue, pos, format!("alignment must be positive, got {a}"))
                        }
                        _ => {}
                    }
                }
            }
            StatementKind::GarbageCollect { .. } => {}
            StatementKind::Backpressure { depth, .. } => {
                if *depth < 0 {
                    self.report(DiagnosticKind::InvalidValue, pos, format!("backpressure depth must be non-negative, got {depth}"));
                }
            }
            StatementKind::FuncDef(def) => self.funcdef(def),
        }
    }

    fn funcdef(&mut self, def: &'p FuncDef) {
        let mut locals: HashSet<&str> = HashSet::new();
        for p in &def.params {
            if let Some(ty) = &p.ty {
                if ty != "Tuple" && ty != "int" {
                    self.report(DiagnosticKind::UnknownType, def.pos, format!("unknown parameter type `{ty}`"));
                }
            }
            locals.insert(p.name.as_str());
        }
        let mut returns = false;
        for stmt in &def.body {
            match stmt {
                FuncStmt::Assign(a) => {
                    self.expr(&a.value, a.pos, &Scope { locals: &locals, include_globals: true });
                    locals.insert(a.name.as_str());
                }
                FuncStmt::Return { pos, value } => {
                    self.expr(value, *pos, &Scope { locals: &locals, include_globals: true });
                    returns = true;
                }
            }
        }
        if !returns {
            self.report(DiagnosticKind::MissingReturn, def.pos, format!("function `{}` has no return statement", def.name));
        }
    }

    fn expr(&mut self, e: &Expr, pos: Pos, scope: &Scope<'_>) {
        match e {
            Expr::Var(name) => {
                let known = scope.locals.contains(name.as_str()) || (scope.include_globals && self.globals.contains(name.as_str()));
                if !known {
                    self.report(DiagnosticKind::UndefinedVariable, pos, format!("undefined variable `{name}`"));
                }
            }
            Expr::Int(_) => {}
            Expr::Neg(inner) | Expr::Splat(inner) => self.expr(inner, pos, scope),
            Expr::Call { callee, args } => {
                match self.arities.get(callee.as_str()) {
                    None => self.report(DiagnosticKind::UnknownFunction, pos, format!("call to undefined function `{callee}`")),
                    Some(&n) if n != args.len() => self.report(
                        DiagnosticKind::Arity,
                        pos,
                        format!("`{callee}` takes {n} arguments, got {}", args.len()),
                    ),
                    Some(_) => {}
                }
                for a in args {
                    self.expr(a, pos, scope);
                }
            }
            Expr::Machine(kind) => self.proc(kind, pos),
            Expr::Member { target, name } => {
                if name != "size" {
                    self.report(DiagnosticKind::UnknownMember, pos, format!("unknown member `.{name}`"));
                }
                self.expr(target, pos, scope);
            }
            Expr::Binary { lhs, rhs, .. } => {
                self.expr(lhs, pos, scope);
                self.expr(rhs, pos, scope);
            }
            Expr::Index { target, indices } => {
                self.expr(target, pos, scope);
                for i in indices {
                    self.expr(i, pos, scope);
                }
            }
            Expr::TupleSlice { target, lo, hi } => {
                self.report(DiagnosticKind::Extension, pos, "tuple slice".into());
                self.expr(target, pos, scope);
                for bound in [lo, hi].into_iter().flatten() {
                    self.expr(bound, pos, scope);
                }
            }
            Expr::Ternary { cond, then, otherwise } => {
                self.expr(cond, pos, scope);
                self.expr(then, pos, scope);
                self.expr(otherwise, pos, scope);
            }
            Expr::Primitive { target, prim, args } => {
                if args.len() != prim.arity() {
                    self.report(
                        DiagnosticKind::Arity,
                        pos,
                        format!("`{}` takes {} arguments, got {}", prim.name(), prim.arity(), args.len()),
                    );
                }
                self.expr(target, pos, scope);
                for a in args {
                    self.expr(a, pos, scope);
                }
            }
            Expr::Comprehension { body, var, .. } => {
                self.report(DiagnosticKind::Extension, pos, "tuple comprehension".into());
                let mut inner: HashSet<&str> = scope.locals.clone();
                inner.insert(var.as_str());
                self.expr(body, pos, &Scope { locals: &inner, include_globals: scope.include_globals });
            }
            Expr::TupleLit(items) => {
                self.report(DiagnosticKind::Extension, pos, "tuple literal".into());
                for i in items {
                    self.expr(i, pos, scope);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    fn errors(src: &str) -> Vec<DiagnosticKind> {
        validate(&parse(src).unwrap())
            .into_iter()
            .filter(|d| d.severity == Severity::Error)
            .map(|d| d.kind)
            .collect()
    }

    #[test]
    fn unbound_index_task() {
        assert_eq!(errors("IndexTaskMap loop0 missing_fn\n"), [DiagnosticKind::UnknownFunction]);
    }

    #[test]
    fn unknown_memory() {
        assert_eq!(errors("Region t r0 GPU BADMEM\n"), [DiagnosticKind::UnknownMemory]);
    }

    #[test]
    fn terminal_sets() {
        assert_eq!(errors("Task t TPU\n"), [DiagnosticKind::UnknownProc]);
        assert_eq!(errors("Layout t r CPU SOA ZIGZAG\n"), [DiagnosticKind::UnknownConstraint]);
        assert_eq!(errors("Layout t r CPU Align == 0\n"), [DiagnosticKind::InvalidValue]);
        assert!(errors("Layout t r CPU SOA AOS C_order F_order Align == 64\n").is_empty());
    }

    #[test]
    fn scoping() {
        let src = "def f(Tuple a, Tuple b):\n    x = y + 1\n    return m[x]\n";
        assert_eq!(errors(src), [DiagnosticKind::UndefinedVariable, DiagnosticKind::UndefinedVariable]);
        // Functions see every global, wherever it is defined.
        assert!(errors("def f(a, b):\n    return m[a]\nm = Machine(GPU)\n").is_empty());
        // Globals only see earlier globals.
        assert_eq!(errors("a = b\nb = 1\n"), [DiagnosticKind::UndefinedVariable]);
    }

    #[test]
    fn arity_and_types() {
        let src = "def g(int a):\n    return a\ndef f(Tuple p, Shape s):\n    return g(p, s)\nIndexTaskMap t g\n";
        let got = errors(src);
        assert!(got.contains(&DiagnosticKind::UnknownType));
        assert_eq!(got.iter().filter(|k| **k == DiagnosticKind::Arity).count(), 2);
    }

    #[test]
    fn missing_return_and_members() {
        assert_eq!(errors("def f(a, b):\n    x = a\n"), [DiagnosticKind::MissingReturn]);
        assert_eq!(errors("m = Machine(GPU).shape\n"), [DiagnosticKind::UnknownMember]);
    }

    #[test]
    fn extensions_are_warnings() {
        let src = "m = Machine(GPU)\ndef f(a, b):\n    s = m.size[:-1]\n    t = tuple(i for i in (0, 1))\n    return m[*(s + t)]\n";
        let diags = validate(&parse(src).unwrap());
        assert!(!has_errors(&diags));
        assert_eq!(diags.iter().filter(|d| d.kind == DiagnosticKind::Extension).count(), 2);
    }
}
