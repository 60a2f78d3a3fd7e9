//! Random well-typed pure programs in the workflow subset, with a
//! self-contained reference evaluator.
//!
//! Values are integers, booleans, strings and integer lists. Lists are only
//! ever created from literals, slices or comprehensions, so no two names
//! alias the same list and the evaluator can treat every value by copy.
//! Integer arithmetic is checked 64-bit; an overflow stops the program with
//! an error after the outputs produced so far.

use std::collections::HashMap;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Ty {
    Int,
    Str,
    List,
}

#[derive(Debug, Clone)]
enum E {
    Int(i64),
    Bool(bool),
    Str(String),
    Var(String),
    Bin(&'static str, Box<E>, Box<E>),
    Neg(Box<E>),
    Not(Box<E>),
    BoolOp(&'static str, Box<E>, Box<E>),
    Cmp(Box<E>, Vec<(&'static str, E)>),
    IfExp(Box<E>, Box<E>, Box<E>),
    Call(String, Vec<E>),
    Len(Box<E>),
    StrOf(Box<E>),
    Upper(Box<E>),
    FStr(String, Box<E>),
    ListLit(Vec<E>),
    Index(Box<E>, Box<E>),
    Slice(Box<E>, i64, i64),
    Comp(String, Box<E>, Box<E>, Option<Box<E>>),
}

#[derive(Debug, Clone)]
enum S {
    Assign(String, E),
    Aug(String, &'static str, E),
    Append(String, E),
    Print(Vec<E>),
    If(Vec<(E, Vec<S>)>, Vec<S>),
    ForRange(String, i64, Vec<S>),
    ForList(String, String, Vec<S>),
    While(String, i64, Vec<S>),
    Break,
    Continue,
    Def(String, Vec<String>, Vec<S>),
    Return(E),
}

#[derive(Clone)]
struct Scope {
    vars: Vec<(String, Ty)>,
}

impl Scope {
    fn of(&self, ty: Ty) -> Vec<String> {
        self.vars.iter().filter(|(_, t)| *t == ty).map(|(n, _)| n.clone()).collect()
    }

    /// Integer names that may be rebound; `while` counters are excluded.
    fn assignable(&self) -> Vec<String> {
        self.of(Ty::Int).into_iter().filter(|n| !n.starts_with('w')).collect()
    }

    fn add(&mut self, name: &str, ty: Ty) {
        if !self.vars.iter().any(|(n, _)| n == name) {
            self.vars.push((name.to_string(), ty));
        }
    }
}

struct Gen {
    rng: StdRng,
    counter: usize,
    funcs: Vec<(String, usize)>,
    loop_depth: usize,
    in_func: bool,
    /// Set while iterating a list, so the body cannot grow it.
    no_append: bool,
}

impl Gen {
    fn fresh(&mut self, prefix: &str) -> String {
        self.counter += 1;
        format!("{prefix}{}", self.counter)
    }

    fn pick<T: Clone>(&mut self, items: &[T]) -> T {
        items[self.rng.gen_range(0..items.len())].clone()
    }

    fn small(&mut self) -> i64 {
        self.rng.gen_range(-12..=12)
    }

    fn nonzero(&mut self) -> i64 {
        let v = self.rng.gen_range(1..=9);
        if self.rng.gen_bool(0.3) {
            -v
        } else {
            v
        }
    }

    fn word(&mut self) -> String {
        let words = ["alpha", "Beta", "x", "hello world", "", "q#1", "a'b", "tab\tsep", "Zz"];
        self.pick(&words).to_string()
    }

    fn int(&mut self, sc: &Scope, depth: u32) -> E {
        let vars = sc.of(Ty::Int);
        let lists = sc.of(Ty::List);
        let strs = sc.of(Ty::Str);
        if depth == 0 {
            return if !vars.is_empty() && self.rng.gen_bool(0.6) {
                E::Var(self.pick(&vars))
            } else {
                E::Int(self.small())
            };
        }
        match self.rng.gen_range(0..12) {
            0 | 1 => E::Int(self.small()),
            2 | 3 if !vars.is_empty() => E::Var(self.pick(&vars)),
            4 => {
                let op = self.pick(&["+", "-", "*"]);
                E::Bin(op, Box::new(self.int(sc, depth - 1)), Box::new(self.int(sc, depth - 1)))
            }
            5 => {
                let op = self.pick(&["//", "%"]);
                E::Bin(op, Box::new(self.int(sc, depth - 1)), Box::new(E::Int(self.nonzero())))
            }
            6 => E::Neg(Box::new(self.int(sc, depth - 1))),
            7 => E::Bin("**", Box::new(self.int(sc, depth - 1)), Box::new(E::Int(self.rng.gen_range(0..=3)))),
            8 if !lists.is_empty() => {
                let l = E::Var(self.pick(&lists));
                if self.rng.gen_bool(0.5) {
                    E::Len(Box::new(l))
                } else {
                    let idx = E::Bin("%", Box::new(self.int(sc, depth - 1)), Box::new(E::Len(Box::new(l.clone()))));
                    E::Index(Box::new(l), Box::new(idx))
                }
            }
            9 if !strs.is_empty() => E::Len(Box::new(E::Var(self.pick(&strs)))),
            10 => E::IfExp(
                Box::new(self.int(sc, depth - 1)),
                Box::new(self.boolean(sc, depth - 1)),
                Box::new(self.int(sc, depth - 1)),
            ),
            11 if !self.funcs.is_empty() => {
                let (name, arity) = self.pick(&self.funcs.clone());
                let args = (0..arity).map(|_| self.int(sc, depth - 1)).collect();
                E::Call(name, args)
            }
            _ => E::Bin("+", Box::new(self.int(sc, depth - 1)), Box::new(E::Int(self.small()))),
        }
    }

    fn boolean(&mut self, sc: &Scope, depth: u32) -> E {
        if depth == 0 {
            return E::Bool(self.rng.gen_bool(0.5));
        }
        match self.rng.gen_range(0..7) {
            0 => E::Bool(self.rng.gen_bool(0.5)),
            1 | 2 => {
                let ops = ["<", "<=", ">", ">=", "==", "!="];
                let mut rest = vec![(self.pick(&ops), self.int(sc, depth - 1))];
                if self.rng.gen_bool(0.3) {
                    rest.push((self.pick(&ops), self.int(sc, depth - 1)));
                }
                E::Cmp(Box::new(self.int(sc, depth - 1)), rest)
            }
            3 => E::Not(Box::new(self.boolean(sc, depth - 1))),
            4 => {
                let op = self.pick(&["and", "or"]);
                E::BoolOp(op, Box::new(self.boolean(sc, depth - 1)), Box::new(self.boolean(sc, depth - 1)))
            }
            5 => {
                let op = self.pick(&["==", "!="]);
                E::Cmp(Box::new(self.string(sc, depth - 1)), vec![(op, self.string(sc, depth - 1))])
            }
            _ => E::Cmp(Box::new(self.int(sc, depth - 1)), vec![("==", E::Int(0))]),
        }
    }

    fn string(&mut self, sc: &Scope, depth: u32) -> E {
        let strs = sc.of(Ty::Str);
        if depth == 0 {
            return if !strs.is_empty() && self.rng.gen_bool(0.5) {
                E::Var(self.pick(&strs))
            } else {
                E::Str(self.word())
            };
        }
        match self.rng.gen_range(0..6) {
            0 => E::Str(self.word()),
            1 if !strs.is_empty() => E::Var(self.pick(&strs)),
            2 => E::Bin("+", Box::new(self.string(sc, depth - 1)), Box::new(self.string(sc, depth - 1))),
            3 => E::StrOf(Box::new(self.int(sc, depth - 1))),
            4 => E::Upper(Box::new(self.string(sc, depth - 1))),
            _ => {
                let prefix = self.pick(&["n=", "v ", "", "{x}"]).to_string();
                E::FStr(prefix, Box::new(self.int(sc, depth - 1)))
            }
        }
    }

    fn list(&mut self, sc: &Scope, depth: u32) -> E {
        let lists = sc.of(Ty::List);
        match self.rng.gen_range(0..4) {
            1 if !lists.is_empty() => {
                let lo = self.rng.gen_range(-3..=3);
                let hi = self.rng.gen_range(-3..=5);
                E::Slice(Box::new(E::Var(self.pick(&lists))), lo, hi)
            }
            2 if !lists.is_empty() => {
                let v = self.fresh("c");
                let mut inner = sc.clone();
                inner.add(&v, Ty::Int);
                let elem = self.int(&inner, depth.saturating_sub(1));
                let cond = if self.rng.gen_bool(0.5) { Some(Box::new(self.boolean(&inner, 1))) } else { None };
                E::Comp(v, Box::new(elem), Box::new(E::Var(self.pick(&lists))), cond)
            }
            _ => {
                let n = self.rng.gen_range(1..=4);
                E::ListLit((0..n).map(|_| self.int(sc, depth.saturating_sub(1))).collect())
            }
        }
    }

    fn printable(&mut self, sc: &Scope) -> E {
        match self.rng.gen_range(0..4) {
            0 => self.int(sc, 2),
            1 => self.boolean(sc, 2),
            2 => self.string(sc, 2),
            _ => {
                let lists = sc.of(Ty::List);
                if lists.is_empty() {
                    self.int(sc, 1)
                } else {
                    E::Var(self.pick(&lists))
                }
            }
        }
    }

    fn block(&mut self, sc: &mut Scope, len: usize, nest: u32) -> Vec<S> {
        let mut out = Vec::new();
        for _ in 0..len {
            out.push(self.stmt(sc, nest));
        }
        out
    }

    fn stmt(&mut self, sc: &mut Scope, nest: u32) -> S {
        let roll = self.rng.gen_range(0..14);
        match roll {
            0 | 1 => {
                let ints = sc.assignable();
                let name = if !ints.is_empty() && self.rng.gen_bool(0.4) { self.pick(&ints) } else { self.fresh("a") };
                let e = self.int(sc, 3);
                sc.add(&name, Ty::Int);
                S::Assign(name, e)
            }
            2 => {
                let name = self.fresh("s");
                let e = self.string(sc, 2);
                sc.add(&name, Ty::Str);
                S::Assign(name, e)
            }
            3 => {
                let name = self.fresh("l");
                let e = self.list(sc, 2);
                sc.add(&name, Ty::List);
                S::Assign(name, e)
            }
            4 => {
                let ints = sc.assignable();
                if ints.is_empty() {
                    return S::Print(vec![self.printable(sc)]);
                }
                let name = self.pick(&ints);
                let op = self.pick(&["+=", "-=", "*="]);
                S::Aug(name, op, self.int(sc, 1))
            }
            5 if !self.no_append && !sc.of(Ty::List).is_empty() => {
                let lists = sc.of(Ty::List);
                let name = self.pick(&lists);
                S::Append(name, self.int(sc, 2))
            }
            6 | 7 => {
                let n = if self.rng.gen_bool(0.3) { 2 } else { 1 };
                S::Print((0..n).map(|_| self.printable(sc)).collect())
            }
            8 | 9 if nest > 0 => {
                let mut branches = Vec::new();
                for _ in 0..self.rng.gen_range(1..=2) {
                    let cond = self.boolean(sc, 2);
                    let mut inner = sc.clone();
                    let len = self.rng.gen_range(1..=3);
                    branches.push((cond, self.block(&mut inner, len, nest - 1)));
                }
                let orelse = if self.rng.gen_bool(0.5) {
                    let mut inner = sc.clone();
                    let len = self.rng.gen_range(1..=2);
                    self.block(&mut inner, len, nest - 1)
                } else {
                    Vec::new()
                };
                S::If(branches, orelse)
            }
            10 if nest > 0 && self.loop_depth < 2 => {
                let v = self.fresh("i");
                let n = self.rng.gen_range(0..=4);
                let mut inner = sc.clone();
                inner.add(&v, Ty::Int);
                self.loop_depth += 1;
                let len = self.rng.gen_range(1..=3);
                let body = self.block(&mut inner, len, nest - 1);
                self.loop_depth -= 1;
                S::ForRange(v, n, body)
            }
            11 if nest > 0 && self.loop_depth < 2 && !sc.of(Ty::List).is_empty() => {
                let lists = sc.of(Ty::List);
                let l = self.pick(&lists);
                let v = self.fresh("e");
                let mut inner = sc.clone();
                inner.add(&v, Ty::Int);
                self.loop_depth += 1;
                let saved = self.no_append;
                self.no_append = true;
                let len = self.rng.gen_range(1..=2);
                let body = self.block(&mut inner, len, nest - 1);
                self.no_append = saved;
                self.loop_depth -= 1;
                S::ForList(v, l, body)
            }
            12 if nest > 0 && self.loop_depth < 2 => {
                let w = self.fresh("w");
                let n = self.rng.gen_range(0..=4);
                let mut inner = sc.clone();
                inner.add(&w, Ty::Int);
                self.loop_depth += 1;
                let len = self.rng.gen_range(1..=3);
                let body = self.block(&mut inner, len, nest - 1);
                self.loop_depth -= 1;
                sc.add(&w, Ty::Int);
                S::While(w, n, body)
            }
            13 if self.loop_depth > 0 && nest > 0 => {
                let cond = self.boolean(sc, 1);
                let jump = if self.rng.gen_bool(0.5) { S::Break } else { S::Continue };
                S::If(vec![(cond, vec![jump])], Vec::new())
            }
            13 if self.in_func && nest > 0 => {
                let cond = self.boolean(sc, 1);
                S::If(vec![(cond, vec![S::Return(self.int(sc, 2))])], Vec::new())
            }
            _ => S::Print(vec![self.printable(sc)]),
        }
    }

    fn function(&mut self) -> S {
        let name = self.fresh("f");
        let arity = self.rng.gen_range(0..=2);
        let params: Vec<String> = (0..arity).map(|_| self.fresh("p")).collect();
        let mut sc = Scope { vars: Vec::new() };
        for p in &params {
            sc.add(p, Ty::Int);
        }
        self.in_func = true;
        let len = self.rng.gen_range(1..=3);
        let mut body = self.block(&mut sc, len, 2);
        body.push(S::Return(self.int(&sc, 2)));
        self.in_func = false;
        self.funcs.push((name.clone(), arity));
        S::Def(name, params, body)
    }
}

/// Generates one program from `seed`.
pub fn generate(seed: u64) -> Program {
    let mut g = Gen {
        rng: StdRng::seed_from_u64(seed),
        counter: 0,
        funcs: Vec::new(),
        loop_depth: 0,
        in_func: false,
        no_append: false,
    };
    let mut body = Vec::new();
    for _ in 0..g.rng.gen_range(0..=2) {
        body.push(g.function());
    }
    let mut sc = Scope { vars: Vec::new() };
    let len = g.rng.gen_range(3..=9);
    body.extend(g.block(&mut sc, len, 2));
    body.push(S::Print(vec![g.printable(&sc)]));
    Program { body }
}

pub struct Program {
    body: Vec<S>,
}

impl Program {
    pub fn source(&self) -> String {
        let mut out = String::new();
        render_block(&self.body, 0, &mut out);
        out
    }

    /// Expected output lines and whether execution stops with an error.
    pub fn evaluate(&self) -> (Vec<String>, bool) {
        let mut ev = Eval { globals: HashMap::new(), funcs: HashMap::new(), output: Vec::new() };
        let mut frame = None;
        let failed = ev.block(&self.body, &mut frame).is_err();
        (ev.output, failed)
    }
}

fn quote(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '{' => out.push_str("{{"),
            '}' => out.push_str("}}"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn render_expr(e: &E) -> String {
    match e {
        E::Int(v) if *v < 0 => format!("({v})"),
        E::Int(v) => v.to_string(),
        E::Bool(b) => if *b { "True" } else { "False" }.to_string(),
        E::Str(s) => quote(s).replace("{{", "{").replace("}}", "}"),
        E::Var(n) => n.clone(),
        E::Bin(op, l, r) => format!("({} {op} {})", render_expr(l), render_expr(r)),
        E::Neg(x) => format!("(-{})", render_expr(x)),
        E::Not(x) => format!("(not {})", render_expr(x)),
        E::BoolOp(op, l, r) => format!("({} {op} {})", render_expr(l), render_expr(r)),
        E::Cmp(first, rest) => {
            let mut s = format!("({}", render_expr(first));
            for (op, x) in rest {
                s.push_str(&format!(" {op} {}", render_expr(x)));
            }
            s.push(')');
            s
        }
        E::IfExp(a, c, b) => format!("({} if {} else {})", render_expr(a), render_expr(c), render_expr(b)),
        E::Call(f, args) => format!("{f}({})", args.iter().map(render_expr).collect::<Vec<_>>().join(", ")),
        E::Len(x) => format!("len({})", render_expr(x)),
        E::StrOf(x) => format!("str({})", render_expr(x)),
        E::Upper(x) => format!("{}.upper()", render_expr(x)),
        E::FStr(prefix, x) => {
            let q = quote(prefix);
            format!("f{}{{{}}}\"", &q[..q.len() - 1], render_expr(x))
        }
        E::ListLit(items) => format!("[{}]", items.iter().map(render_expr).collect::<Vec<_>>().join(", ")),
        E::Index(l, i) => format!("{}[{}]", render_expr(l), render_expr(i)),
        E::Slice(l, lo, hi) => format!("{}[{lo}:{hi}]", render_expr(l)),
        E::Comp(v, elem, src, cond) => {
            let mut s = format!("[{} for {v} in {}", render_expr(elem), render_expr(src));
            if let Some(c) = cond {
                s.push_str(&format!(" if {}", render_expr(c)));
            }
            s.push(']');
            s
        }
    }
}

fn render_block(stmts: &[S], indent: usize, out: &mut String) {
    let pad = "    ".repeat(indent);
    for s in stmts {
        match s {
            S::Assign(n, e) => out.push_str(&format!("{pad}{n} = {}\n", render_expr(e))),
            S::Aug(n, op, e) => out.push_str(&format!("{pad}{n} {op} {}\n", render_expr(e))),
            S::Append(n, e) => out.push_str(&format!("{pad}{n}.append({})\n", render_expr(e))),
            S::Print(args) => {
                let a: Vec<_> = args.iter().map(render_expr).collect();
                out.push_str(&format!("{pad}print({})\n", a.join(", ")));
            }
            S::If(branches, orelse) => {
                for (i, (c, body)) in branches.iter().enumerate() {
                    let kw = if i == 0 { "if" } else { "elif" };
                    out.push_str(&format!("{pad}{kw} {}:\n", render_expr(c)));
                    render_block(body, indent + 1, out);
                }
                if !orelse.is_empty() {
                    out.push_str(&format!("{pad}else:\n"));
                    render_block(orelse, indent + 1, out);
                }
            }
            S::ForRange(v, n, body) => {
                out.push_str(&format!("{pad}for {v} in range({n}):\n"));
                render_block(body, indent + 1, out);
            }
            S::ForList(v, l, body) => {
                out.push_str(&format!("{pad}for {v} in {l}:\n"));
                render_block(body, indent + 1, out);
            }
            S::While(w, n, body) => {
                out.push_str(&format!("{pad}{w} = 0\n{pad}while {w} < {n}:\n{pad}    {w} += 1\n"));
                render_block(body, indent + 1, out);
            }
            S::Break => out.push_str(&format!("{pad}break\n")),
            S::Continue => out.push_str(&format!("{pad}continue\n")),
            S::Def(name, params, body) => {
                out.push_str(&format!("{pad}def {name}({}):\n", params.join(", ")));
                render_block(body, indent + 1, out);
            }
            S::Return(e) => out.push_str(&format!("{pad}return {}\n", render_expr(e))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum V {
    Int(i64),
    Bool(bool),
    Str(String),
    List(Vec<i64>),
}

impl V {
    fn int(&self) -> i64 {
        match self {
            V::Int(v) => *v,
            other => panic!("expected int, got {other:?}"),
        }
    }

    fn truthy(&self) -> bool {
        match self {
            V::Int(v) => *v != 0,
            V::Bool(b) => *b,
            V::Str(s) => !s.is_empty(),
            V::List(l) => !l.is_empty(),
        }
    }

    fn display(&self) -> String {
        match self {
            V::Int(v) => v.to_string(),
            V::Bool(b) => if *b { "True" } else { "False" }.to_string(),
            V::Str(s) => s.clone(),
            V::List(l) => format!("[{}]", l.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")),
        }
    }
}

#[derive(Debug)]
enum Flow {
    Overflow,
    Break,
    Continue,
    Return(V),
}

struct Eval {
    globals: HashMap<String, V>,
    funcs: HashMap<String, (Vec<String>, Vec<S>)>,
    output: Vec<String>,
}

type Frame = Option<HashMap<String, V>>;

fn floor_div(a: i64, b: i64) -> Option<i64> {
    let q = a.checked_div(b)?;
    if a % b != 0 && ((a < 0) != (b < 0)) {
        q.checked_sub(1)
    } else {
        Some(q)
    }
}

fn floor_mod(a: i64, b: i64) -> Option<i64> {
    let q = floor_div(a, b)?;
    a.checked_sub(b.checked_mul(q)?)
}

fn slice_bound(i: i64, len: i64) -> usize {
    let i = if i < 0 { i + len } else { i };
    i.clamp(0, len) as usize
}

impl Eval {
    fn get(&self, frame: &Frame, name: &str) -> V {
        if let Some(f) = frame {
            if let Some(v) = f.get(name) {
                return v.clone();
            }
        }
        self.globals.get(name).cloned().unwrap_or_else(|| panic!("unbound {name}"))
    }

    fn set(&mut self, frame: &mut Frame, name: &str, v: V) {
        match frame {
            Some(f) => {
                f.insert(name.to_string(), v);
            }
            None => {
                self.globals.insert(name.to_string(), v);
            }
        }
    }

    fn arith(op: &str, a: i64, b: i64) -> Result<i64, Flow> {
        let r = match op {
            "+" => a.checked_add(b),
            "-" => a.checked_sub(b),
            "*" => a.checked_mul(b),
            "//" => floor_div(a, b),
            "%" => floor_mod(a, b),
            "**" => a.checked_pow(b as u32),
            _ => unreachable!(),
        };
        r.ok_or(Flow::Overflow)
    }

    fn expr(&mut self, e: &E, frame: &mut Frame) -> Result<V, Flow> {
        Ok(match e {
            E::Int(v) => V::Int(*v),
            E::Bool(b) => V::Bool(*b),
            E::Str(s) => V::Str(s.clone()),
            E::Var(n) => self.get(frame, n),
            E::Bin(op, l, r) => {
                let a = self.expr(l, frame)?;
                let b = self.expr(r, frame)?;
                match (a, b) {
                    (V::Str(x), V::Str(y)) => V::Str(x + &y),
                    (a, b) => V::Int(Self::arith(op, a.int(), b.int())?),
                }
            }
            E::Neg(x) => V::Int(self.expr(x, frame)?.int().checked_neg().ok_or(Flow::Overflow)?),
            E::Not(x) => V::Bool(!self.expr(x, frame)?.truthy()),
            E::BoolOp(op, l, r) => {
                let a = self.expr(l, frame)?;
                match (*op, a.truthy()) {
                    ("and", false) | ("or", true) => a,
                    _ => self.expr(r, frame)?,
                }
            }
            E::Cmp(first, rest) => {
                let mut left = self.expr(first, frame)?;
                for (op, x) in rest {
                    let right = self.expr(x, frame)?;
                    let ok = match (&left, &right) {
                        (V::Str(a), V::Str(b)) => match *op {
                            "==" => a == b,
                            _ => a != b,
                        },
                        (a, b) => {
                            let (a, b) = (a.int(), b.int());
                            match *op {
                                "<" => a < b,
                                "<=" => a <= b,
                                ">" => a > b,
                                ">=" => a >= b,
                                "==" => a == b,
                                _ => a != b,
                            }
                        }
                    };
                    if !ok {
                        return Ok(V::Bool(false));
                    }
                    left = right;
                }
                V::Bool(true)
            }
            E::IfExp(a, c, b) => {
                if self.expr(c, frame)?.truthy() {
                    self.expr(a, frame)?
                } else {
                    self.expr(b, frame)?
                }
            }
            E::Call(f, args) => {
                let mut vals = Vec::new();
                for a in args {
                    vals.push(self.expr(a, frame)?);
                }
                let (params, body) = self.funcs.get(f).cloned().expect("defined function");
                let mut local: Frame = Some(params.iter().cloned().zip(vals).collect());
                match self.block(&body, &mut local) {
                    Err(Flow::Return(v)) => v,
                    Err(Flow::Overflow) => return Err(Flow::Overflow),
                    other => panic!("function fell through: {other:?}"),
                }
            }
            E::Len(x) => match self.expr(x, frame)? {
                V::Str(s) => V::Int(s.chars().count() as i64),
                V::List(l) => V::Int(l.len() as i64),
                other => panic!("len of {other:?}"),
            },
            E::StrOf(x) => V::Str(self.expr(x, frame)?.display()),
            E::Upper(x) => match self.expr(x, frame)? {
                V::Str(s) => V::Str(s.to_uppercase()),
                other => panic!("upper of {other:?}"),
            },
            E::FStr(prefix, x) => V::Str(format!("{prefix}{}", self.expr(x, frame)?.display())),
            E::ListLit(items) => {
                let mut out = Vec::new();
                for i in items {
                    out.push(self.expr(i, frame)?.int());
                }
                V::List(out)
            }
            E::Index(l, i) => {
                let list = match self.expr(l, frame)? {
                    V::List(l) => l,
                    other => panic!("index into {other:?}"),
                };
                let i = self.expr(i, frame)?.int();
                let i = if i < 0 { i + list.len() as i64 } else { i };
                V::Int(list[i as usize])
            }
            E::Slice(l, lo, hi) => {
                let list = match self.expr(l, frame)? {
                    V::List(l) => l,
                    other => panic!("slice of {other:?}"),
                };
                let n = list.len() as i64;
                let (a, b) = (slice_bound(*lo, n), slice_bound(*hi, n));
                V::List(if a < b { list[a..b].to_vec() } else { Vec::new() })
            }
            E::Comp(v, elem, src, cond) => {
                let list = match self.expr(src, frame)? {
                    V::List(l) => l,
                    other => panic!("comprehension over {other:?}"),
                };
                let mut out = Vec::new();
                for item in list {
                    self.set(frame, v, V::Int(item));
                    if let Some(c) = cond {
                        if !self.expr(c, frame)?.truthy() {
                            continue;
                        }
                    }
                    out.push(self.expr(elem, frame)?.int());
                }
                V::List(out)
            }
        })
    }

    fn block(&mut self, stmts: &[S], frame: &mut Frame) -> Result<(), Flow> {
        for s in stmts {
            self.stmt(s, frame)?;
        }
        Ok(())
    }

    fn stmt(&mut self, s: &S, frame: &mut Frame) -> Result<(), Flow> {
        match s {
            S::Assign(n, e) => {
                let v = self.expr(e, frame)?;
                self.set(frame, n, v);
            }
            S::Aug(n, op, e) => {
                let cur = self.get(frame, n).int();
                let rhs = self.expr(e, frame)?.int();
                let v = Self::arith(&op[..1], cur, rhs)?;
                self.set(frame, n, V::Int(v));
            }
            S::Append(n, e) => {
                let v = self.expr(e, frame)?.int();
                let mut list = match self.get(frame, n) {
                    V::List(l) => l,
                    other => panic!("append to {other:?}"),
                };
                list.push(v);
                self.set(frame, n, V::List(list));
            }
            S::Print(args) => {
                let mut parts = Vec::new();
                for a in args {
                    parts.push(self.expr(a, frame)?.display());
                }
                self.output.push(parts.join(" "));
            }
            S::If(branches, orelse) => {
                for (c, body) in branches {
                    if self.expr(c, frame)?.truthy() {
                        return self.block(body, frame);
                    }
                }
                self.block(orelse, frame)?;
            }
            S::ForRange(v, n, body) => {
                for i in 0..*n {
                    self.set(frame, v, V::Int(i));
                    match self.block(body, frame) {
                        Err(Flow::Break) => break,
                        Err(Flow::Continue) | Ok(()) => {}
                        Err(other) => return Err(other),
                    }
                }
            }
            S::ForList(v, l, body) => {
                let list = match self.get(frame, l) {
                    V::List(l) => l,
                    other => panic!("iterate {other:?}"),
                };
                for item in list {
                    self.set(frame, v, V::Int(item));
                    match self.block(body, frame) {
                        Err(Flow::Break) => break,
                        Err(Flow::Continue) | Ok(()) => {}
                        Err(other) => return Err(other),
                    }
                }
            }
            S::While(w, n, body) => {
                self.set(frame, w, V::Int(0));
                while self.get(frame, w).int() < *n {
                    let next = self.get(frame, w).int() + 1;
                    self.set(frame, w, V::Int(next));
                    match self.block(body, frame) {
                        Err(Flow::Break) => break,
                        Err(Flow::Continue) | Ok(()) => {}
                        Err(other) => return Err(other),
                    }
                }
            }
            S::Break => return Err(Flow::Break),
            S::Continue => return Err(Flow::Continue),
            S::Def(name, params, body) => {
                self.funcs.insert(name.clone(), (params.clone(), body.clone()));
            }
            S::Return(e) => {
                let v = self.expr(e, frame)?;
                return Err(Flow::Return(v));
            }
        }
        Ok(())
    }
}
