//! Recursive-descent parser for the workflow subset.
//!
//! Anything outside the subset that is still valid in the object language
//! is reported as [`ParseError::Unsupported`] naming the construct, so that
//! coverage gaps stay distinguishable from plain syntax errors.

use std::sync::Arc;

use thiserror::Error;

use super::ast::*;
use super::lexer::{decode_escapes, tokenize, Pos, StrToken, Tok, Token};

/// Method names callable on values. Any other attribute is rejected.
pub const METHOD_WHITELIST: &[&str] = &[
    "split",
    "join",
    "strip",
    "lower",
    "upper",
    "startswith",
    "endswith",
    "replace",
    "format",
    "append",
    "extend",
    "get",
    "keys",
    "items",
];

const MAX_NESTING: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("unsupported construct at {pos}: {construct}")]
    Unsupported { pos: Pos, construct: String },
}

impl ParseError {
    pub fn kind(&self) -> &'static str {
        match self {
            ParseError::Syntax { .. } => "SyntaxError",
            ParseError::Unsupported { .. } => "UnsupportedConstruct",
        }
    }

    pub fn pos(&self) -> Pos {
        match self {
            ParseError::Syntax { pos, .. } | ParseError::Unsupported { pos, .. } => *pos,
        }
    }
}

type PResult<T> = Result<T, ParseError>;

pub fn parse_workflow(source: &str) -> PResult<WorkflowProgram> {
    if source.trim().is_empty() {
        return Err(ParseError::Syntax { pos: Pos { line: 1, col: 1 }, message: "empty program".into() });
    }
    let tokens = tokenize(source).map_err(|e| ParseError::Syntax { pos: e.pos, message: e.message })?;
    let mut parser = Parser::new(tokens);
    let body = parser.program()?;
    Ok(WorkflowProgram { body })
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    nesting: usize,
    function_depth: usize,
    loop_depth: usize,
}

fn is_keyword(name: &str) -> bool {
    matches!(
        name,
        "False"
            | "None"
            | "True"
            | "and"
            | "as"
            | "assert"
            | "async"
            | "await"
            | "break"
            | "class"
            | "continue"
            | "def"
            | "del"
            | "elif"
            | "else"
            | "except"
            | "finally"
            | "for"
            | "from"
            | "global"
            | "if"
            | "import"
            | "in"
            | "is"
            | "lambda"
            | "nonlocal"
            | "not"
            | "or"
            | "pass"
            | "raise"
            | "return"
            | "try"
            | "while"
            | "with"
            | "yield"
    )
}

impl Parser {
    fn new(tokens: Vec<Token>) -> Self {
        let tokens = tokens.into_iter().filter(|t| !matches!(t.tok, Tok::Comment(_))).collect();
        Parser { tokens, pos: 0, nesting: 0, function_depth: 0, loop_depth: 0 }
    }

    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_nth(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn here(&self) -> Pos {
        self.tokens[self.pos].pos
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn syntax<T>(&self, message: impl Into<String>) -> PResult<T> {
        Err(ParseError::Syntax { pos: self.here(), message: message.into() })
    }

    fn unsupported<T>(&self, construct: impl Into<String>) -> PResult<T> {
        Err(ParseError::Unsupported { pos: self.here(), construct: construct.into() })
    }

    fn is_op(&self, op: &str) -> bool {
        matches!(self.peek(), Tok::Op(o) if *o == op)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Name(n) if n == kw)
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.is_op(op) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: &str) -> PResult<()> {
        if self.eat_op(op) {
            Ok(())
        } else {
            self.syntax(format!("expected '{op}', found {}", describe(self.peek())))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.syntax(format!("expected '{kw}', found {}", describe(self.peek())))
        }
    }

    fn expect_name(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Name(n) if !is_keyword(&n) => {
                self.advance();
                Ok(n)
            }
            other => self.syntax(format!("expected a name, found {}", describe(&other))),
        }
    }

    fn enter(&mut self) -> PResult<()> {
        self.nesting += 1;
        if self.nesting > MAX_NESTING {
            return self.syntax("program is nested too deeply");
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.nesting -= 1;
    }

    // ---- statements -------------------------------------------------------

    fn program(&mut self) -> PResult<Vec<Stmt>> {
        let mut body = Vec::new();
        while !matches!(self.peek(), Tok::Eof) {
            match self.peek() {
                Tok::Newline => {
                    self.advance();
                }
                Tok::Indent => return self.syntax("unexpected indent"),
                _ => body.extend(self.statement()?),
            }
        }
        Ok(body)
    }

    fn statement(&mut self) -> PResult<Vec<Stmt>> {
        let pos = self.here();
        let Tok::Name(word) = self.peek().clone() else {
            if self.is_op("@") {
                return self.unsupported("decorator");
            }
            return self.simple_statements();
        };
        let stmt = match word.as_str() {
            "def" => self.function_def()?,
            "if" => self.if_stmt()?,
            "while" => self.while_stmt()?,
            "for" => self.for_stmt()?,
            "try" => self.try_stmt()?,
            "import" | "from" => return self.unsupported("import"),
            "class" => return self.unsupported("class definition"),
            "with" => return self.unsupported("with statement"),
            "async" => return self.unsupported("async"),
            "global" => return self.unsupported("global declaration"),
            "nonlocal" => return self.unsupported("nonlocal declaration"),
            "elif" | "else" | "except" | "finally" => return self.syntax(format!("'{word}' without a matching block")),
            _ => return self.simple_statements(),
        };
        Ok(vec![Stmt { kind: stmt, pos }])
    }

    fn simple_statements(&mut self) -> PResult<Vec<Stmt>> {
        let mut out = vec![self.simple_statement()?];
        while self.eat_op(";") {
            if matches!(self.peek(), Tok::Newline | Tok::Eof) {
                break;
            }
            out.push(self.simple_statement()?);
        }
        match self.peek() {
            Tok::Newline => {
                self.advance();
                Ok(out)
            }
            Tok::Eof | Tok::Dedent => Ok(out),
            other => {
                let d = describe(other);
                self.syntax(format!("unexpected {d}"))
            }
        }
    }

    fn simple_statement(&mut self) -> PResult<Stmt> {
        let pos = self.here();
        if let Tok::Name(word) = self.peek().clone() {
            match word.as_str() {
                "pass" => {
                    self.advance();
                    return Ok(Stmt { kind: StmtKind::Pass, pos });
                }
                "break" | "continue" => {
                    if self.loop_depth == 0 {
                        return self.syntax(format!("'{word}' outside loop"));
                    }
                    self.advance();
                    let kind = if word == "break" { StmtKind::Break } else { StmtKind::Continue };
                    return Ok(Stmt { kind, pos });
                }
                "return" => {
                    if self.function_depth == 0 {
                        return self.syntax("'return' outside function");
                    }
                    self.advance();
                    let value = if matches!(self.peek(), Tok::Newline | Tok::Eof | Tok::Dedent) || self.is_op(";") {
                        None
                    } else {
                        Some(self.expr_list()?)
                    };
                    return Ok(Stmt { kind: StmtKind::Return(value), pos });
                }
                "import" | "from" => return self.unsupported("import"),
                "raise" => return self.unsupported("raise statement"),
                "assert" => return self.unsupported("assert statement"),
                "del" => return self.unsupported("del statement"),
                "global" => return self.unsupported("global declaration"),
                "nonlocal" => return self.unsupported("nonlocal declaration"),
                "yield" => return self.unsupported("yield"),
                _ => {}
            }
        }

        let first = self.expr_list()?;
        if self.is_op("=") {
            let mut targets = vec![self.to_target(first)?];
            let mut value;
            loop {
                self.expect_op("=")?;
                value = self.expr_list()?;
                if self.is_op("=") {
                    targets.push(self.to_target(value)?);
                } else {
                    break;
                }
            }
            return Ok(Stmt { kind: StmtKind::Assign { targets, value }, pos });
        }
        if let Tok::Op(op) = self.peek().clone() {
            let aug = match op {
                "+=" => Some(BinOp::Add),
                "-=" => Some(BinOp::Sub),
                "*=" => Some(BinOp::Mul),
                "/=" => Some(BinOp::Div),
                "//=" => Some(BinOp::FloorDiv),
                "%=" => Some(BinOp::Mod),
                "**=" => Some(BinOp::Pow),
                "&=" | "|=" | "^=" | "<<=" | ">>=" | "@=" => {
                    return self.unsupported(format!("augmented operator '{op}'"))
                }
                _ => None,
            };
            if let Some(op) = aug {
                self.advance();
                let target = self.to_target(first)?;
                if matches!(target, Target::Tuple(_)) {
                    return self.syntax("illegal target for augmented assignment");
                }
                let value = self.expr_list()?;
                return Ok(Stmt { kind: StmtKind::AugAssign { target, op, value }, pos });
            }
            if op == ":" {
                // Annotated assignment; the annotation is parsed and dropped.
                self.advance();
                let target = self.to_target(first)?;
                if !matches!(target, Target::Name(_) | Target::Subscript { .. }) {
                    return self.syntax("only single targets can be annotated");
                }
                self.test()?;
                if self.eat_op("=") {
                    let value = self.expr_list()?;
                    return Ok(Stmt { kind: StmtKind::Assign { targets: vec![target], value }, pos });
                }
                return Ok(Stmt { kind: StmtKind::Pass, pos });
            }
        }
        Ok(Stmt { kind: StmtKind::Expr(first), pos })
    }

    fn to_target(&self, expr: Expr) -> PResult<Target> {
        match expr.kind {
            ExprKind::Name(n) => Ok(Target::Name(n)),
            ExprKind::Subscript { object, index } => Ok(Target::Subscript { object, index }),
            ExprKind::Tuple(items) | ExprKind::List(items) => {
                if items.is_empty() {
                    return Err(ParseError::Syntax {
                        pos: expr.pos,
                        message: "cannot assign to empty sequence".into(),
                    });
                }
                Ok(Target::Tuple(items.into_iter().map(|e| self.to_target(e)).collect::<PResult<_>>()?))
            }
            ExprKind::Slice { .. } => {
                Err(ParseError::Unsupported { pos: expr.pos, construct: "slice assignment".into() })
            }
            _ => Err(ParseError::Syntax { pos: expr.pos, message: "cannot assign to expression".into() }),
        }
    }

    /// Parses `: NEWLINE INDENT stmts DEDENT` or `: simple_stmts`.
    fn suite(&mut self) -> PResult<Vec<Stmt>> {
        self.expect_op(":")?;
        self.enter()?;
        let body = if matches!(self.peek(), Tok::Newline) {
            self.advance();
            if !matches!(self.peek(), Tok::Indent) {
                return self.syntax("expected an indented block");
            }
            self.advance();
            let mut body = Vec::new();
            loop {
                match self.peek() {
                    Tok::Dedent => {
                        self.advance();
                        break;
                    }
                    Tok::Eof => break,
                    Tok::Newline => {
                        self.advance();
                    }
                    _ => body.extend(self.statement()?),
                }
            }
            body
        } else {
            self.simple_statements()?
        };
        self.leave();
        Ok(body)
    }

    fn function_def(&mut self) -> PResult<StmtKind> {
        self.expect_kw("def")?;
        let name = self.expect_name()?;
        self.expect_op("(")?;
        let mut params: Vec<Param> = Vec::new();
        while !self.is_op(")") {
            if self.is_op("*") || self.is_op("**") || self.is_op("/") {
                return self.unsupported("variadic or positional-only parameters");
            }
            let pname = self.expect_name()?;
            if params.iter().any(|p| p.name == pname) {
                return self.syntax(format!("duplicate argument '{pname}' in function definition"));
            }
            if self.eat_op(":") {
                self.test()?;
            }
            let default = if self.eat_op("=") { Some(self.test()?) } else { None };
            if default.is_none() && params.iter().any(|p| p.default.is_some()) {
                return self.syntax("non-default argument follows default argument");
            }
            params.push(Param { name: pname, default });
            if !self.eat_op(",") {
                break;
            }
        }
        self.expect_op(")")?;
        if self.eat_op("->") {
            self.test()?;
        }
        let saved_loops = std::mem::replace(&mut self.loop_depth, 0);
        self.function_depth += 1;
        let body = self.suite();
        self.function_depth -= 1;
        self.loop_depth = saved_loops;
        Ok(StmtKind::FunctionDef(Arc::new(FunctionDef { name, params, body: body? })))
    }

    fn if_stmt(&mut self) -> PResult<StmtKind> {
        self.expect_kw("if")?;
        let cond = self.named_test()?;
        let body = self.suite()?;
        let mut branches = vec![(cond, body)];
        let mut orelse = Vec::new();
        loop {
            if self.eat_kw("elif") {
                let cond = self.named_test()?;
                let body = self.suite()?;
                branches.push((cond, body));
            } else if self.eat_kw("else") {
                orelse = self.suite()?;
                break;
            } else {
                break;
            }
        }
        Ok(StmtKind::If { branches, orelse })
    }

    fn loop_body(&mut self) -> PResult<Vec<Stmt>> {
        self.loop_depth += 1;
        let body = self.suite();
        self.loop_depth -= 1;
        let body = body?;
        if self.is_kw("else") {
            return self.unsupported("loop else clause");
        }
        Ok(body)
    }

    fn while_stmt(&mut self) -> PResult<StmtKind> {
        self.expect_kw("while")?;
        let cond = self.named_test()?;
        let body = self.loop_body()?;
        Ok(StmtKind::While { cond, body })
    }

    fn for_stmt(&mut self) -> PResult<StmtKind> {
        self.expect_kw("for")?;
        let target = self.target_list()?;
        self.expect_kw("in")?;
        let iter = self.expr_list()?;
        let body = self.loop_body()?;
        Ok(StmtKind::For { target, iter, body })
    }

    fn target_list(&mut self) -> PResult<Target> {
        let pos = self.here();
        let mut items = vec![self.or_expr()?];
        let mut tuple = false;
        while self.eat_op(",") {
            tuple = true;
            if self.is_kw("in") {
                break;
            }
            items.push(self.or_expr()?);
        }
        let expr =
            if tuple || items.len() > 1 { Expr { kind: ExprKind::Tuple(items), pos } } else { items.pop().unwrap() };
        self.to_target(expr)
    }

    fn try_stmt(&mut self) -> PResult<StmtKind> {
        self.expect_kw("try")?;
        let body = self.suite()?;
        let mut handlers = Vec::new();
        while self.is_kw("except") {
            self.advance();
            if self.is_op("*") {
                return self.unsupported("except* clause");
            }
            let mut types = Vec::new();
            let mut binding = None;
            if !self.is_op(":") {
                let pos = self.here();
                let ty = self.test()?;
                match ty.kind {
                    ExprKind::Name(n) => types.push(n),
                    ExprKind::Tuple(items) => {
                        for item in items {
                            match item.kind {
                                ExprKind::Name(n) => types.push(n),
                                _ => {
                                    return Err(ParseError::Syntax {
                                        pos: item.pos,
                                        message: "exception types must be names".into(),
                                    })
                                }
                            }
                        }
                    }
                    _ => return Err(ParseError::Syntax { pos, message: "exception types must be names".into() }),
                }
                if self.eat_kw("as") {
                    binding = Some(self.expect_name()?);
                }
            }
            let hbody = self.suite()?;
            handlers.push(Handler { types, binding, body: hbody });
        }
        let orelse = if !handlers.is_empty() && self.eat_kw("else") { self.suite()? } else { Vec::new() };
        let finally = if self.eat_kw("finally") { self.suite()? } else { Vec::new() };
        if handlers.is_empty() && finally.is_empty() {
            return self.syntax("expected 'except' or 'finally' block");
        }
        Ok(StmtKind::Try { body, handlers, orelse, finally })
    }

    // ---- expressions ------------------------------------------------------

    /// Comma-separated expressions; more than one (or a trailing comma) forms a tuple.
    fn expr_list(&mut self) -> PResult<Expr> {
        let pos = self.here();
        let first = self.test()?;
        if !self.is_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.at_expr_end() {
                break;
            }
            items.push(self.test()?);
        }
        Ok(Expr { kind: ExprKind::Tuple(items), pos })
    }

    fn at_expr_end(&self) -> bool {
        matches!(self.peek(), Tok::Newline | Tok::Eof | Tok::Dedent)
            || ["=", ")", "]", "}", ":", ";"].iter().any(|op| self.is_op(op))
            || ["+=", "-=", "*=", "/=", "//=", "%=", "**="].iter().any(|op| self.is_op(op))
    }

    fn named_test(&mut self) -> PResult<Expr> {
        let e = self.test()?;
        if self.is_op(":=") {
            return self.unsupported("assignment expression");
        }
        Ok(e)
    }

    fn test(&mut self) -> PResult<Expr> {
        self.enter()?;
        let result = self.test_inner();
        self.leave();
        result
    }

    fn test_inner(&mut self) -> PResult<Expr> {
        if self.is_kw("lambda") {
            return self.unsupported("lambda");
        }
        let pos = self.here();
        let body = self.or_test()?;
        if self.is_kw("if") && !self.in_comprehension_condition() {
            self.advance();
            let test = self.or_test()?;
            self.expect_kw("else")?;
            let orelse = self.test()?;
            return Ok(Expr {
                kind: ExprKind::IfExp { test: Box::new(test), body: Box::new(body), orelse: Box::new(orelse) },
                pos,
            });
        }
        if self.is_op(":=") {
            return self.unsupported("assignment expression");
        }
        Ok(body)
    }

    // An `if` directly after a comprehension's iterable is a filter, which
    // `or_test` callers handle themselves; ternaries never start there.
    fn in_comprehension_condition(&self) -> bool {
        false
    }

    fn or_test(&mut self) -> PResult<Expr> {
        let pos = self.here();
        let first = self.and_test()?;
        if !self.is_kw("or") {
            return Ok(first);
        }
        let mut values = vec![first];
        while self.eat_kw("or") {
            values.push(self.and_test()?);
        }
        Ok(Expr { kind: ExprKind::BoolOp { op: BoolOp::Or, values }, pos })
    }

    fn and_test(&mut self) -> PResult<Expr> {
        let pos = self.here();
        let first = self.not_test()?;
        if !self.is_kw("and") {
            return Ok(first);
        }
        let mut values = vec![first];
        while self.eat_kw("and") {
            values.push(self.not_test()?);
        }
        Ok(Expr { kind: ExprKind::BoolOp { op: BoolOp::And, values }, pos })
    }

    fn not_test(&mut self) -> PResult<Expr> {
        let pos = self.here();
        if self.eat_kw("not") {
            self.enter()?;
            let operand = self.not_test();
            self.leave();
            return Ok(Expr { kind: ExprKind::Unary { op: UnaryOp::Not, operand: Box::new(operand?) }, pos });
        }
        self.comparison()
    }

    fn comparison(&mut self) -> PResult<Expr> {
        let pos = self.here();
        let first = self.or_expr()?;
        let mut rest = Vec::new();
        loop {
            let op = match self.peek() {
                Tok::Op("==") => CmpOp::Eq,
                Tok::Op("!=") => CmpOp::NotEq,
                Tok::Op("<") => CmpOp::Lt,
                Tok::Op("<=") => CmpOp::LtE,
                Tok::Op(">") => CmpOp::Gt,
                Tok::Op(">=") => CmpOp::GtE,
                Tok::Name(n) if n == "in" => CmpOp::In,
                Tok::Name(n) if n == "is" => {
                    if matches!(self.peek_nth(1), Tok::Name(m) if m == "not") {
                        self.advance();
                        CmpOp::IsNot
                    } else {
                        CmpOp::Is
                    }
                }
                Tok::Name(n) if n == "not" && matches!(self.peek_nth(1), Tok::Name(m) if m == "in") => {
                    self.advance();
                    CmpOp::NotIn
                }
                _ => break,
            };
            self.advance();
            rest.push((op, self.or_expr()?));
        }
        if rest.is_empty() {
            Ok(first)
        } else {
            Ok(Expr { kind: ExprKind::Compare { first: Box::new(first), rest }, pos })
        }
    }

    fn or_expr(&mut self) -> PResult<Expr> {
        let e = self.arith()?;
        if ["|", "^", "&", "<<", ">>"].iter().any(|op| self.is_op(op)) {
            return self.unsupported("bitwise operator");
        }
        Ok(e)
    }

    fn arith(&mut self) -> PResult<Expr> {
        let pos = self.here();
        let mut left = self.term()?;
        loop {
            let op = if self.is_op("+") {
                BinOp::Add
            } else if self.is_op("-") {
                BinOp::Sub
            } else {
                break;
            };
            self.advance();
            let right = self.term()?;
            left = Expr { kind: ExprKind::Binary { op, left: Box::new(left), right: Box::new(right) }, pos };
        }
        Ok(left)
    }

    fn term(&mut self) -> PResult<Expr> {
        let pos = self.here();
        let mut left = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Op("*") => BinOp::Mul,
                Tok::Op("/") => BinOp::Div,
                Tok::Op("//") => BinOp::FloorDiv,
                Tok::Op("%") => BinOp::Mod,
                Tok::Op("@") => return self.unsupported("matrix multiplication"),
                _ => break,
            };
            self.advance();
            let right = self.factor()?;
            left = Expr { kind: ExprKind::Binary { op, left: Box::new(left), right: Box::new(right) }, pos };
        }
        Ok(left)
    }

    fn factor(&mut self) -> PResult<Expr> {
        let pos = self.here();
        let op = match self.peek() {
            Tok::Op("-") => Some(UnaryOp::Neg),
            Tok::Op("+") => Some(UnaryOp::Pos),
            Tok::Op("~") => return self.unsupported("bitwise operator"),
            _ => None,
        };
        if let Some(op) = op {
            self.advance();
            self.enter()?;
            let operand = self.factor();
            self.leave();
            return Ok(Expr { kind: ExprKind::Unary { op, operand: Box::new(operand?) }, pos });
        }
        self.power()
    }

    fn power(&mut self) -> PResult<Expr> {
        let pos = self.here();
        if self.is_kw("await") {
            return self.unsupported("await");
        }
        let base = self.atom_expr()?;
        if self.eat_op("**") {
            self.enter()?;
            let exp = self.factor();
            self.leave();
            return Ok(Expr {
                kind: ExprKind::Binary { op: BinOp::Pow, left: Box::new(base), right: Box::new(exp?) },
                pos,
            });
        }
        Ok(base)
    }

    fn atom_expr(&mut self) -> PResult<Expr> {
        let pos = self.here();
        let mut expr = self.atom()?;
        loop {
            if self.is_op("(") {
                let ExprKind::Name(func) = &expr.kind else {
                    return self.unsupported("computed call target");
                };
                let func = func.clone();
                self.advance();
                let (args, kwargs) = self.call_args()?;
                expr = Expr { kind: ExprKind::Call { func, args, kwargs }, pos };
            } else if self.is_op("[") {
                self.advance();
                expr = self.subscript(expr, pos)?;
            } else if self.is_op(".") {
                self.advance();
                let attr_pos = self.here();
                let Tok::Name(attr) = self.peek().clone() else {
                    return self.syntax("expected attribute name");
                };
                if !METHOD_WHITELIST.contains(&attr.as_str()) {
                    return Err(ParseError::Unsupported {
                        pos: attr_pos,
                        construct: format!("attribute access `.{attr}`"),
                    });
                }
                self.advance();
                if !self.is_op("(") {
                    return Err(ParseError::Unsupported {
                        pos: attr_pos,
                        construct: format!("method reference `.{attr}` without a call"),
                    });
                }
                self.advance();
                let (args, kwargs) = self.call_args()?;
                expr =
                    Expr { kind: ExprKind::MethodCall { receiver: Box::new(expr), method: attr, args, kwargs }, pos };
            } else {
                break;
            }
        }
        Ok(expr)
    }

    fn call_args(&mut self) -> PResult<(Vec<Expr>, Vec<(String, Expr)>)> {
        let mut args = Vec::new();
        let mut kwargs: Vec<(String, Expr)> = Vec::new();
        while !self.is_op(")") {
            if self.is_op("*") || self.is_op("**") {
                return self.unsupported("argument unpacking");
            }
            let is_kw =
                matches!(self.peek(), Tok::Name(n) if !is_keyword(n)) && matches!(self.peek_nth(1), Tok::Op("="));
            if is_kw {
                let name = self.expect_name()?;
                self.advance();
                if kwargs.iter().any(|(k, _)| *k == name) {
                    return self.syntax(format!("keyword argument repeated: {name}"));
                }
                kwargs.push((name, self.test()?));
            } else {
                if !kwargs.is_empty() {
                    return self.syntax("positional argument follows keyword argument");
                }
                let arg = self.test()?;
                if self.is_kw("for") {
                    return self.unsupported("generator expression");
                }
                args.push(arg);
            }
            if !self.eat_op(",") {
                break;
            }
        }
        self.expect_op(")")?;
        Ok((args, kwargs))
    }

    fn subscript(&mut self, object: Expr, pos: Pos) -> PResult<Expr> {
        let mut parts: [Option<Box<Expr>>; 3] = [None, None, None];
        let mut colons = 0;
        let mut first: Option<Expr> = None;
        loop {
            if self.is_op("]") {
                break;
            }
            if self.eat_op(":") {
                colons += 1;
                if colons > 2 {
                    return self.syntax("invalid slice");
                }
                continue;
            }
            let e = if colons == 0 { self.expr_list()? } else { self.test()? };
            if colons == 0 {
                first = Some(e);
            } else {
                parts[colons] = Some(Box::new(e));
            }
            if !self.is_op(":") && !self.is_op("]") {
                return self.syntax(format!("unexpected {} in subscript", describe(self.peek())));
            }
        }
        self.expect_op("]")?;
        if colons == 0 {
            let Some(index) = first else {
                return self.syntax("empty subscript");
            };
            return Ok(Expr { kind: ExprKind::Subscript { object: Box::new(object), index: Box::new(index) }, pos });
        }
        let [_, upper, step] = parts;
        Ok(Expr { kind: ExprKind::Slice { object: Box::new(object), lower: first.map(Box::new), upper, step }, pos })
    }

    fn atom(&mut self) -> PResult<Expr> {
        let pos = self.here();
        match self.peek().clone() {
            Tok::Int(i) => {
                self.advance();
                Ok(Expr { kind: ExprKind::Literal(Literal::Int(i)), pos })
            }
            Tok::Float(f) => {
                self.advance();
                Ok(Expr { kind: ExprKind::Literal(Literal::Float(f)), pos })
            }
            Tok::Imaginary => self.unsupported("complex number literal"),
            Tok::Str(_) => self.strings(),
            Tok::Name(n) => match n.as_str() {
                "None" => {
                    self.advance();
                    Ok(Expr { kind: ExprKind::Literal(Literal::None), pos })
                }
                "True" | "False" => {
                    self.advance();
                    Ok(Expr { kind: ExprKind::Literal(Literal::Bool(n == "True")), pos })
                }
                "lambda" => self.unsupported("lambda"),
                "yield" => self.unsupported("yield"),
                "await" => self.unsupported("await"),
                "import" => self.unsupported("import"),
                _ if is_keyword(&n) => self.syntax(format!("unexpected keyword '{n}'")),
                _ => {
                    self.advance();
                    Ok(Expr { kind: ExprKind::Name(n), pos })
                }
            },
            Tok::Op("(") => {
                self.advance();
                self.enter()?;
                let result = self.paren_body(pos);
                self.leave();
                result
            }
            Tok::Op("[") => {
                self.advance();
                self.enter()?;
                let result = self.list_body(pos);
                self.leave();
                result
            }
            Tok::Op("{") => {
                self.advance();
                self.enter()?;
                let result = self.brace_body(pos);
                self.leave();
                result
            }
            Tok::Op("...") => self.unsupported("ellipsis"),
            other => self.syntax(format!("unexpected {}", describe(&other))),
        }
    }

    fn paren_body(&mut self, pos: Pos) -> PResult<Expr> {
        if self.eat_op(")") {
            return Ok(Expr { kind: ExprKind::Tuple(Vec::new()), pos });
        }
        if self.is_kw("yield") {
            return self.unsupported("yield");
        }
        let first = self.test()?;
        if self.is_kw("for") {
            return self.unsupported("generator expression");
        }
        if self.eat_op(")") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.is_op(")") {
                break;
            }
            items.push(self.test()?);
        }
        self.expect_op(")")?;
        Ok(Expr { kind: ExprKind::Tuple(items), pos })
    }

    fn list_body(&mut self, pos: Pos) -> PResult<Expr> {
        if self.eat_op("]") {
            return Ok(Expr { kind: ExprKind::List(Vec::new()), pos });
        }
        if self.is_op("*") {
            return self.unsupported("iterable unpacking");
        }
        let first = self.test()?;
        if self.eat_kw("for") {
            let target = self.target_list()?;
            self.expect_kw("in")?;
            let iter = self.or_test()?;
            let mut conds = Vec::new();
            loop {
                if self.eat_kw("if") {
                    conds.push(self.or_test()?);
                } else if self.is_kw("for") {
                    return self.unsupported("comprehension with more than one for clause");
                } else {
                    break;
                }
            }
            self.expect_op("]")?;
            return Ok(Expr {
                kind: ExprKind::ListComp { element: Box::new(first), target, iter: Box::new(iter), conds },
                pos,
            });
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.is_op("]") {
                break;
            }
            if self.is_op("*") {
                return self.unsupported("iterable unpacking");
            }
            items.push(self.test()?);
        }
        self.expect_op("]")?;
        Ok(Expr { kind: ExprKind::List(items), pos })
    }

    fn brace_body(&mut self, pos: Pos) -> PResult<Expr> {
        if self.eat_op("}") {
            return Ok(Expr { kind: ExprKind::Dict(Vec::new()), pos });
        }
        if self.is_op("**") {
            return self.unsupported("dictionary unpacking");
        }
        let key = self.test()?;
        if !self.is_op(":") {
            if self.is_kw("for") {
                return self.unsupported("set comprehension");
            }
            return self.unsupported("set display");
        }
        self.advance();
        let value = self.test()?;
        if self.is_kw("for") {
            return self.unsupported("dict comprehension");
        }
        let mut entries = vec![(key, value)];
        while self.eat_op(",") {
            if self.is_op("}") {
                break;
            }
            if self.is_op("**") {
                return self.unsupported("dictionary unpacking");
            }
            let k = self.test()?;
            self.expect_op(":")?;
            let v = self.test()?;
            entries.push((k, v));
        }
        self.expect_op("}")?;
        Ok(Expr { kind: ExprKind::Dict(entries), pos })
    }

    /// Adjacent string literals concatenate; any f-string makes the whole
    /// run an interpolated string.
    fn strings(&mut self) -> PResult<Expr> {
        let pos = self.here();
        let mut parts: Vec<FStringPart> = Vec::new();
        let mut any_f = false;
        while let Tok::Str(s) = self.peek().clone() {
            if s.bytes {
                return self.unsupported("bytes literal");
            }
            let tok_pos = self.here();
            self.advance();
            if s.fstring {
                any_f = true;
                parts.extend(parse_fstring(&s, tok_pos)?);
            } else {
                push_text(&mut parts, &s.value);
            }
        }
        if !any_f {
            let text: String = parts
                .into_iter()
                .map(|p| match p {
                    FStringPart::Text(t) => t,
                    FStringPart::Expr(_) => unreachable!(),
                })
                .collect();
            return Ok(Expr { kind: ExprKind::Literal(Literal::Str(Arc::from(text))), pos });
        }
        Ok(Expr { kind: ExprKind::FString(parts), pos })
    }
}

fn push_text(parts: &mut Vec<FStringPart>, text: &str) {
    if let Some(FStringPart::Text(last)) = parts.last_mut() {
        last.push_str(text);
    } else {
        parts.push(FStringPart::Text(text.to_string()));
    }
}

fn parse_fstring(tok: &StrToken, pos: Pos) -> PResult<Vec<FStringPart>> {
    let body = &tok.value;
    let decode = |s: &str| -> PResult<String> {
        if tok.raw {
            Ok(s.to_string())
        } else {
            decode_escapes(s).map_err(|message| ParseError::Syntax { pos, message })
        }
    };
    let mut parts = Vec::new();
    let mut literal = String::new();
    let chars: Vec<char> = body.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '{' {
            if chars.get(i + 1) == Some(&'{') {
                literal.push('{');
                i += 2;
                continue;
            }
            // Scan to the matching close brace, skipping nested brackets and strings.
            let start = i + 1;
            let mut depth = 0usize;
            let mut j = start;
            let mut quote: Option<char> = None;
            let mut top_level_marker = None;
            while j < chars.len() {
                let d = chars[j];
                if let Some(q) = quote {
                    if d == q {
                        quote = None;
                    }
                } else {
                    match d {
                        '\'' | '"' => quote = Some(d),
                        '(' | '[' | '{' => depth += 1,
                        ')' | ']' => depth = depth.saturating_sub(1),
                        '}' if depth == 0 => break,
                        '}' => depth -= 1,
                        '!' if depth == 0 && chars.get(j + 1) != Some(&'=') => {
                            top_level_marker.get_or_insert("conversion");
                        }
                        ':' if depth == 0 => {
                            top_level_marker.get_or_insert("format spec");
                        }
                        '=' if depth == 0
                            && chars.get(j + 1).is_none_or(|n| *n == '}' || n.is_whitespace())
                            && j > start
                            && !matches!(chars[j - 1], '=' | '!' | '<' | '>') =>
                        {
                            top_level_marker.get_or_insert("self-documenting expression");
                        }
                        _ => {}
                    }
                }
                j += 1;
            }
            if j >= chars.len() {
                return Err(ParseError::Syntax { pos, message: "f-string: expecting '}'".into() });
            }
            if let Some(marker) = top_level_marker {
                return Err(ParseError::Unsupported { pos, construct: format!("f-string {marker}") });
            }
            let inner: String = chars[start..j].iter().collect();
            if inner.trim().is_empty() {
                return Err(ParseError::Syntax { pos, message: "f-string: empty expression not allowed".into() });
            }
            if !literal.is_empty() {
                parts.push(FStringPart::Text(decode(&literal)?));
                literal.clear();
            }
            parts.push(FStringPart::Expr(parse_embedded_expr(&inner, pos)?));
            i = j + 1;
        } else if c == '}' {
            if chars.get(i + 1) == Some(&'}') {
                literal.push('}');
                i += 2;
            } else {
                return Err(ParseError::Syntax { pos, message: "f-string: single '}' is not allowed".into() });
            }
        } else {
            literal.push(c);
            i += 1;
        }
    }
    if !literal.is_empty() {
        parts.push(FStringPart::Text(decode(&literal)?));
    }
    Ok(parts)
}

fn parse_embedded_expr(text: &str, pos: Pos) -> PResult<Expr> {
    let relocate = |e: ParseError| match e {
        ParseError::Syntax { message, .. } => ParseError::Syntax { pos, message: format!("in f-string: {message}") },
        ParseError::Unsupported { construct, .. } => ParseError::Unsupported { pos, construct },
    };
    let tokens = tokenize(&format!("({})", text.trim()))
        .map_err(|e| ParseError::Syntax { pos, message: format!("in f-string: {}", e.message) })?;
    let mut parser = Parser::new(tokens);
    let mut expr = parser.expr_list().map_err(relocate)?;
    if !matches!(parser.peek(), Tok::Newline | Tok::Eof) {
        return Err(ParseError::Syntax { pos, message: "in f-string: unexpected trailing input".into() });
    }
    fix_positions(&mut expr, pos);
    Ok(expr)
}

fn fix_positions(expr: &mut Expr, pos: Pos) {
    // Embedded expressions report the position of their string literal.
    expr.pos = pos;
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Name(n) => format!("'{n}'"),
        Tok::Int(i) => format!("number {i}"),
        Tok::Float(f) => format!("number {f}"),
        Tok::Imaginary => "imaginary number".into(),
        Tok::Str(_) => "string".into(),
        Tok::Op(o) => format!("'{o}'"),
        Tok::Comment(_) => "comment".into(),
        Tok::Newline => "end of line".into(),
        Tok::Indent => "indent".into(),
        Tok::Dedent => "dedent".into(),
        Tok::Eof => "end of input".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unsupported(src: &str) -> String {
        match parse_workflow(src) {
            Err(ParseError::Unsupported { construct, .. }) => construct,
            other => panic!("expected unsupported for {src:?}, got {other:?}"),
        }
    }

    fn syntax(src: &str) {
        match parse_workflow(src) {
            Err(ParseError::Syntax { .. }) => {}
            other => panic!("expected syntax error for {src:?}, got {other:?}"),
        }
    }

    #[test]
    fn single_call_statement() {
        let p = parse_workflow("sleep(5)").unwrap();
        assert_eq!(p.body.len(), 1);
        match &p.body[0].kind {
            StmtKind::Expr(Expr { kind: ExprKind::Call { func, args, kwargs }, .. }) => {
                assert_eq!(func, "sleep");
                assert_eq!(args.len(), 1);
                assert!(matches!(args[0].kind, ExprKind::Literal(Literal::Int(5))));
                assert!(kwargs.is_empty());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn definition_and_call_match_hand_built_tree() {
        let p = parse_workflow("def f():\n    print('x')\nf()").unwrap();
        let pos = |line, col| Pos { line, col };
        let expected = WorkflowProgram {
            body: vec![
                Stmt {
                    kind: StmtKind::FunctionDef(Arc::new(FunctionDef {
                        name: "f".into(),
                        params: vec![],
                        body: vec![Stmt {
                            kind: StmtKind::Expr(Expr {
                                kind: ExprKind::Call {
                                    func: "print".into(),
                                    args: vec![Expr {
                                        kind: ExprKind::Literal(Literal::Str(Arc::from("x"))),
                                        pos: pos(2, 11),
                                    }],
                                    kwargs: vec![],
                                },
                                pos: pos(2, 5),
                            }),
                            pos: pos(2, 5),
                        }],
                    })),
                    pos: pos(1, 1),
                },
                Stmt {
                    kind: StmtKind::Expr(Expr {
                        kind: ExprKind::Call { func: "f".into(), args: vec![], kwargs: vec![] },
                        pos: pos(3, 1),
                    }),
                    pos: pos(3, 1),
                },
            ],
        };
        assert_eq!(p, expected);
    }

    #[test]
    fn sandbox_rejections() {
        assert_eq!(unsupported("import os"), "import");
        assert_eq!(unsupported("from os import path"), "import");
        assert_eq!(unsupported("x = 1\nimport subprocess\n"), "import");
        assert_eq!(unsupported("x = ().__class__"), "attribute access `.__class__`");
        assert_eq!(unsupported("os.system('ls')"), "attribute access `.system`");
        assert_eq!(unsupported("f = 'a'.split"), "method reference `.split` without a call");
        assert_eq!(unsupported("g()()"), "computed call target");
        assert_eq!(unsupported("[print][0]('x')"), "computed call target");
        assert_eq!(unsupported("with open('f') as fh:\n    pass"), "with statement");
        assert_eq!(unsupported("class A:\n    pass"), "class definition");
        assert_eq!(unsupported("f = lambda x: x"), "lambda");
        assert_eq!(unsupported("def f():\n    global x\n"), "global declaration");
        assert_eq!(unsupported("@dec\ndef f():\n    pass"), "decorator");
        assert_eq!(unsupported("x = [a for a in b for c in a]"), "comprehension with more than one for clause");
        assert_eq!(unsupported("x = {a: 1 for a in b}"), "dict comprehension");
        assert_eq!(unsupported("x = sum(a for a in b)"), "generator expression");
        assert_eq!(unsupported("raise ValueError('x')"), "raise statement");
        assert_eq!(unsupported("x = f'{y:.2f}'"), "f-string format spec");
        assert_eq!(unsupported("x = f'{y!r}'"), "f-string conversion");
        assert_eq!(unsupported("x = 1 | 2"), "bitwise operator");
        assert_eq!(unsupported("while x:\n    pass\nelse:\n    pass"), "loop else clause");
        assert_eq!(unsupported("def f(*args):\n    pass"), "variadic or positional-only parameters");
        assert_eq!(unsupported("x = b'abc'"), "bytes literal");
    }

    #[test]
    fn syntax_errors() {
        syntax("");
        syntax("x = ");
        syntax("def f(:\n    pass");
        syntax("return 5");
        syntax("break");
        syntax("if x:\nprint(1)");
        syntax("x = (1, 2");
        syntax("1 = x");
        syntax("f(a=1, 2)");
        syntax("try:\n    pass\n");
        syntax("x = f'{'");
        syntax(&format!("x = {}1{}", "(".repeat(500), ")".repeat(500)));
        syntax(&format!("x = {}1", "not ".repeat(500)));
        syntax(&format!("x = {}1", "-".repeat(500)));
    }

    #[test]
    fn supported_statement_forms() {
        let src = r#"
total = 0
for i in range(10):
    if i % 2 == 0:
        continue
    elif i > 7:
        break
    else:
        total += i
while total > 0:
    total -= 1
try:
    x = 1 // 0
except ZeroDivisionError as e:
    print(str(e))
except (ValueError, KeyError):
    pass
else:
    pass
finally:
    done = True
a, b = 1, 2
d = {'k': [1, 2, 3]}
d['k'][0] = 5
n: int = 3
s = f"{a} and {b + 1} {{literal}}"
sq = [v * v for v in range(4) if v != 2]
t = 'yes' if a < b <= 3 else 'no'
words = "a b".split()
def g(x, y=2) -> int:
    return x + y
r = g(1, y=3)
m = d.get('k')[1:2]
"#;
        let p = parse_workflow(src).unwrap();
        assert_eq!(p.defined_functions(), vec!["g"]);
    }

    #[test]
    fn comments_and_docstrings_are_discarded_or_kept_as_expressions() {
        let p = parse_workflow("# hello\nx = 1  # trailing\n\n\n").unwrap();
        assert_eq!(p.body.len(), 1);
    }
}
