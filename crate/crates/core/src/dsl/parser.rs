//! Recursive-descent parser.
//!
//! Expression precedence, loosest first: ternary, comparison, additive,
//! multiplicative, unary minus, postfix (`.name`, `.prim(..)`, `[..]`).

use std::collections::HashSet;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::{ParseError, KEYWORDS};

pub fn parse(source: &str) -> Result<MapperProgram, ParseError> {
    let tokens = tokenize(source)?;
    let mut p = Parser { tokens, at: 0 };
    let program = p.program()?;

    let mut seen = HashSet::new();
    for def in program.functions() {
        if !seen.insert(def.name.as_str()) {
            return Err(ParseError::DuplicateFunction {
                name: def.name.clone(),
                line: def.pos.line,
                col: def.pos.col,
            });
        }
    }
    Ok(program)
}

/// Parses a single expression, e.g. for tooling and tests.
pub fn parse_expr(source: &str) -> Result<Expr, ParseError> {
    let tokens = tokenize(source)?;
    let mut p = Parser { tokens, at: 0 };
    let e = p.expr()?;
    p.skip(&Tok::Newline);
    p.expect(&Tok::Eof, "end of expression")?;
    Ok(e)
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.at].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.at + offset).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn pos(&self) -> Pos {
        let t = &self.tokens[self.at];
        Pos::new(t.line, t.col)
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.at].tok.clone();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> Result<T, ParseError> {
        let t = &self.tokens[self.at];
        Err(ParseError::Syntax {
            line: t.line,
            col: t.col,
            expected: expected.to_string(),
            found: t.tok.to_string(),
        })
    }

    fn skip(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &Tok, expected: &str) -> Result<(), ParseError> {
        if self.skip(tok) {
            Ok(())
        } else {
            self.error(expected)
        }
    }

    fn ident(&mut self, expected: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok(name)
            }
            _ => self.error(expected),
        }
    }

    /// An identifier that is not a statement keyword.
    fn name(&mut self, expected: &str) -> Result<String, ParseError> {
        if let Tok::Ident(name) = self.peek() {
            if KEYWORDS.contains(&name.as_str()) {
                return self.error(expected);
            }
        }
        self.ident(expected)
    }

    fn int(&mut self, expected: &str) -> Result<i64, ParseError> {
        let negative = self.skip(&Tok::Minus);
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(if negative { -v } else { v })
            }
            _ => self.error(expected),
        }
    }

    fn end_of_line(&mut self) -> Result<(), ParseError> {
        self.skip(&Tok::Semi);
        if self.peek() == &Tok::Eof || self.peek() == &Tok::Dedent {
            return Ok(());
        }
        self.expect(&Tok::Newline, "end of line")
    }

    fn program(&mut self) -> Result<MapperProgram, ParseError> {
        let mut items = Vec::new();
        loop {
            match self.peek() {
                Tok::Eof => break,
                Tok::Newline => {
                    self.bump();
                }
                Tok::Indent => return self.error("a statement at column 1"),
                _ => items.push(self.item()?),
            }
        }
        Ok(MapperProgram { items })
    }

    fn item(&mut self) -> Result<Item, ParseError> {
        let pos = self.pos();
        let keyword = match self.peek() {
            Tok::Ident(k) => k.clone(),
            _ => return self.error("a statement"),
        };
        let kind = match keyword.as_str() {
            "IndexTaskMap" => {
                self.bump();
                let task = self.ident("task name")?;
                let func = self.name("function name")?;
                StatementKind::IndexTaskMap { task, func }
            }
            "Task" => {
                self.bump();
                let task = self.ident("task name")?;
                let mut procs = vec![self.ident("processor kind")?];
                while let Tok::Ident(_) = self.peek() {
                    procs.push(self.ident("processor kind")?);
                }
                StatementKind::TaskMap { task, procs }
            }
            "Region" => {
                self.bump();
                let task = self.ident("task name")?;
                let region = self.ident("region name")?;
                let proc = self.ident("processor kind")?;
                let mut memories = vec![self.ident("memory kind")?];
                while let Tok::Ident(_) = self.peek() {
                    memories.push(self.ident("memory kind")?);
                }
                StatementKind::DataMap { task, region, proc, memories }
            }
            "Layout" => {
                self.bump();
                let task = self.ident("task name")?;
                let region = self.ident("region name")?;
                let proc = self.ident("processor kind")?;
                let mut constraints = vec![self.constraint()?];
                while let Tok::Ident(_) = self.peek() {
                    constraints.push(self.constraint()?);
                }
                StatementKind::DataLayout { task, region, proc, constraints }
            }
            "GarbageCollect" => {
                self.bump();
                let task = self.ident("task name")?;
                let arg = self.ident("region argument")?;
                StatementKind::GarbageCollect { task, arg }
            }
            "Backpressure" => {
                self.bump();
                let task = self.ident("task name")?;
                let depth = self.int("integer depth")?;
                StatementKind::Backpressure { task, depth }
            }
            "def" => {
                let def = self.funcdef()?;
                return Ok(Item::Statement(Statement { pos, kind: StatementKind::FuncDef(def) }));
            }
            _ => {
                let assign = self.assign()?;
                self.end_of_line()?;
                return Ok(Item::Global(assign));
            }
        };
        self.end_of_line()?;
        Ok(Item::Statement(Statement { pos, kind }))
    }

    fn constraint(&mut self) -> Result<Constraint, ParseError> {
        let name = self.ident("layout constraint")?;
        if name == "Align" && self.peek() == &Tok::EqEq {
            self.bump();
            return Ok(Constraint::Align(self.int("alignment")?));
        }
        Ok(Constraint::Named(name))
    }

    fn assign(&mut self) -> Result<Assign, ParseError> {
        let pos = self.pos();
        let name = self.name("a statement or assignment")?;
        self.expect(&Tok::Assign, "`=`")?;
        let value = self.expr()?;
        Ok(Assign { pos, name, value })
    }

    fn funcdef(&mut self) -> Result<FuncDef, ParseError> {
        let pos = self.pos();
        self.bump();
        let name = self.name("function name")?;
        self.expect(&Tok::LParen, "`(`")?;
        let mut params = Vec::new();
        if self.peek() != &Tok::RParen {
            loop {
                let first = self.name("parameter")?;
                let param = if let Tok::Ident(_) = self.peek() {
                    Param { ty: Some(first), name: self.name("parameter name")? }
                } else {
                    Param { ty: None, name: first }
                };
                params.push(param);
                if !self.skip(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(&Tok::RParen, "`)` or `,`")?;
        self.expect(&Tok::Colon, "`:`")?;

        let mut body = Vec::new();
        if self.skip(&Tok::Newline) {
            self.expect(&Tok::Indent, "an indented function body")?;
            while !matches!(self.peek(), Tok::Dedent | Tok::Eof) {
                if self.skip(&Tok::Newline) {
                    continue;
                }
                body.push(self.func_stmt()?);
                self.end_of_line()?;
            }
            self.skip(&Tok::Dedent);
        } else {
            loop {
                body.push(self.func_stmt()?);
                if self.peek() == &Tok::Semi && !matches!(self.peek_at(1), Tok::Newline | Tok::Eof) {
                    self.bump();
                    continue;
                }
                break;
            }
            self.end_of_line()?;
        }
        Ok(FuncDef { pos, name, params, body })
    }

    fn func_stmt(&mut self) -> Result<FuncStmt, ParseError> {
        let pos = self.pos();
        if self.peek() == &Tok::Ident("return".into()) {
            self.bump();
            let value = self.expr()?;
            return Ok(FuncStmt::Return { pos, value });
        }
        Ok(FuncStmt::Assign(self.assign()?))
    }

    pub(crate) fn expr(&mut self) -> Result<Expr, ParseError> {
        let cond = self.comparison()?;
        if self.skip(&Tok::Question) {
            let then = self.expr()?;
            self.expect(&Tok::Colon, "`:` of a conditional expression")?;
            let otherwise = self.expr()?;
            return Ok(Expr::Ternary {
                cond: Box::new(cond),
                then: Box::new(then),
                otherwise: Box::new(otherwise),
            });
        }
        Ok(cond)
    }

    fn comparison(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.additive()?;
        loop {
            let op = match self.peek() {
                Tok::Gt => BinOp::Gt,
                Tok::Lt => BinOp::Lt,
                Tok::EqEq => BinOp::Eq,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::binary(op, lhs, self.additive()?);
        }
    }

    fn additive(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::binary(op, lhs, self.multiplicative()?);
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::Percent => BinOp::Mod,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::binary(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.skip(&Tok::Minus) {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.peek() == &Tok::Star {
            return self.error("an expression (`*` splats only inside an index list)");
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.primary()?;
        loop {
            match self.peek() {
                Tok::Dot => {
                    self.bump();
                    let name = self.ident("member or primitive name")?;
                    if self.peek() == &Tok::LParen {
                        let Some(prim) = Primitive::from_name(&name) else {
                            return self.error("a transformation primitive before `(`");
                        };
                        self.bump();
                        let args = self.args(&Tok::RParen)?;
                        e = Expr::Primitive { target: Box::new(e), prim, args };
                    } else {
                        e = Expr::Member { target: Box::new(e), name };
                    }
                }
                Tok::LBracket => {
                    self.bump();
                    e = self.index_suffix(e)?;
                }
                _ => return Ok(e),
            }
        }
    }

    fn index_suffix(&mut self, target: Expr) -> Result<Expr, ParseError> {
        let target = Box::new(target);
        if self.skip(&Tok::Colon) {
            let hi = if self.peek() == &Tok::RBracket { None } else { Some(Box::new(self.expr()?)) };
            self.expect(&Tok::RBracket, "`]`")?;
            return Ok(Expr::TupleSlice { target, lo: None, hi });
        }
        let first = self.index_item()?;
        if !matches!(first, Expr::Splat(_)) && self.skip(&Tok::Colon) {
            let hi = if self.peek() == &Tok::RBracket { None } else { Some(Box::new(self.expr()?)) };
            self.expect(&Tok::RBracket, "`]`")?;
            return Ok(Expr::TupleSlice { target, lo: Some(Box::new(first)), hi });
        }
        let mut indices = vec![first];
        while self.skip(&Tok::Comma) {
            indices.push(self.index_item()?);
        }
        self.expect(&Tok::RBracket, "`]` or `,`")?;
        Ok(Expr::Index { target, indices })
    }

    fn index_item(&mut self) -> Result<Expr, ParseError> {
        if self.skip(&Tok::Star) {
            return Ok(Expr::Splat(Box::new(self.unary()?)));
        }
        self.expr()
    }

    fn args(&mut self, close: &Tok) -> Result<Vec<Expr>, ParseError> {
        let mut args = Vec::new();
        if !self.skip(close) {
            loop {
                args.push(self.expr()?);
                if !self.skip(&Tok::Comma) {
                    break;
                }
            }
            self.expect(close, "`)` or `,`")?;
        }
        Ok(args)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Int(v))
            }
            Tok::LParen => {
                self.bump();
                if self.skip(&Tok::RParen) {
                    return Ok(Expr::TupleLit(Vec::new()));
                }
                let first = self.expr()?;
                if self.skip(&Tok::RParen) {
                    return Ok(first);
                }
                self.expect(&Tok::Comma, "`)` or `,`")?;
                let mut items = vec![first];
                while self.peek() != &Tok::RParen {
                    items.push(self.expr()?);
                    if !self.skip(&Tok::Comma) {
                        break;
                    }
                }
                self.expect(&Tok::RParen, "`)`")?;
                Ok(Expr::TupleLit(items))
            }
            Tok::Ident(name) => {
                if KEYWORDS.contains(&name.as_str()) {
                    return self.error("an expression");
                }
                self.bump();
                if self.peek() != &Tok::LParen {
                    return Ok(Expr::Var(name));
                }
                self.bump();
                if name == "Machine" {
                    let kind = self.ident("processor kind")?;
                    self.expect(&Tok::RParen, "`)`")?;
                    return Ok(Expr::Machine(kind));
                }
                if name == "tuple" {
                    let body = self.expr()?;
                    if self.peek() == &Tok::Ident("for".into()) {
                        return self.comprehension(body);
                    }
                    let mut args = vec![body];
                    while self.skip(&Tok::Comma) {
                        args.push(self.expr()?);
                    }
                    self.expect(&Tok::RParen, "`)` or `for`")?;
                    return Ok(Expr::Call { callee: name, args });
                }
                let args = self.args(&Tok::RParen)?;
                Ok(Expr::Call { callee: name, args })
            }
            _ => self.error("an expression"),
        }
    }

    fn comprehension(&mut self, body: Expr) -> Result<Expr, ParseError> {
        self.bump();
        let var = self.name("loop variable")?;
        if self.peek() != &Tok::Ident("in".into()) {
            return self.error("`in`");
        }
        self.bump();
        self.expect(&Tok::LParen, "`(` starting an integer sequence")?;
        let mut range = Vec::new();
        while self.peek() != &Tok::RParen {
            range.push(self.int("integer literal")?);
            if !self.skip(&Tok::Comma) {
                break;
            }
        }
        self.expect(&Tok::RParen, "`)`")?;
        self.expect(&Tok::RParen, "`)` closing `tuple(`")?;
        Ok(Expr::Comprehension { body: Box::new(body), var, range })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG1A: &str = "\
m = Machine(GPU)

def block2d(Tuple point, Tuple space):
    idx = point * m.size / space
    return m[*idx]

IndexTaskMap loop0 block2d
Region task_init arg0 GPU FBMEM
Layout task_finish arg1 CPU C_order
GarbageCollect systolic arg2
Backpressure systolic 1
";

    #[test]
    fn fig1a_shape() {
        let p = parse(FIG1A).unwrap();
        let kinds: Vec<&str> = p.statements().map(|s| s.kind.keyword()).collect();
        assert_eq!(kinds, ["def", "IndexTaskMap", "Region", "Layout", "GarbageCollect", "Backpressure"]);
        assert_eq!(p.globals().count(), 1);
        assert_eq!(p.index_binding("loop0"), Some("block2d"));
    }

    #[test]
    fn empty_input() {
        assert_eq!(parse("").unwrap(), MapperProgram::default());
        assert_eq!(parse("\n# nothing\n\n").unwrap(), MapperProgram::default());
    }

    #[test]
    fn precedence_is_left_to_right_within_a_level() {
        let e = parse_expr("a * b / c").unwrap();
        let expected = Expr::binary(
            BinOp::Div,
            Expr::binary(BinOp::Mul, Expr::Var("a".into()), Expr::Var("b".into())),
            Expr::Var("c".into()),
        );
        assert_eq!(e, expected);
        let e = parse_expr("a + b * c > d").unwrap();
        assert!(matches!(e, Expr::Binary { op: BinOp::Gt, .. }));
    }

    #[test]
    fn ternary_and_slices() {
        let e = parse_expr("s[0] > s[2] ? s[0] : s[2]").unwrap();
        assert!(matches!(e, Expr::Ternary { .. }));
        assert!(matches!(parse_expr("m[:-1]").unwrap(), Expr::TupleSlice { lo: None, hi: Some(_), .. }));
        assert!(matches!(parse_expr("m[1:]").unwrap(), Expr::TupleSlice { lo: Some(_), hi: None, .. }));
    }

    #[test]
    fn splats_and_comprehensions() {
        let e = parse_expr("m[*upper, *lower]").unwrap();
        let Expr::Index { indices, .. } = e else { panic!("not an index") };
        assert!(indices.iter().all(|i| matches!(i, Expr::Splat(_))));
        let e = parse_expr("tuple(f(p, i, i + 3) for i in (0, 1, 2))").unwrap();
        assert!(matches!(e, Expr::Comprehension { ref range, .. } if range == &[0, 1, 2]));
        assert!(parse_expr("*x").is_err());
    }

    #[test]
    fn tuple_literals() {
        assert_eq!(parse_expr("(1, 1, 1)").unwrap(), Expr::TupleLit(vec![Expr::Int(1); 3]));
        assert_eq!(parse_expr("(1,)").unwrap(), Expr::TupleLit(vec![Expr::Int(1)]));
        assert_eq!(parse_expr("(1)").unwrap(), Expr::Int(1));
    }

    #[test]
    fn layout_alignment() {
        let p = parse("Layout t r GPU SOA Align == 128\n").unwrap();
        let s = p.statements().next().unwrap();
        let StatementKind::DataLayout { constraints, .. } = &s.kind else { panic!() };
        assert_eq!(constraints, &[Constraint::Named("SOA".into()), Constraint::Align(128)]);
    }

    #[test]
    fn semicolons_and_one_line_bodies() {
        let p = parse("def f(x): y = x + 1; return y\nm = Machine(CPU);\n").unwrap();
        assert_eq!(p.function("f").unwrap().body.len(), 2);
        assert_eq!(p.globals().count(), 1);
    }

    #[test]
    fn duplicate_function_is_an_error() {
        let src = "def f(x):\n    return x\ndef f(y):\n    return y\n";
        assert!(matches!(parse(src), Err(ParseError::DuplicateFunction { line: 3, .. })));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse("def f(x):\n    return x +\n").unwrap_err();
        assert_eq!(err.position().0, 2);
        let err = parse("m = Machine(GPU).frobnicate(1)\n").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 1, .. }));
    }

    #[test]
    fn printed_program_reparses() {
        let p = parse(FIG1A).unwrap();
        let again = parse(&p.to_string()).unwrap();
        assert_eq!(p, again);
    }
}
