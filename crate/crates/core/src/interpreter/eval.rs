//! Tree-walking evaluator.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::rc::Rc;
use std::sync::Arc;
use std::time::Instant;

use indexmap::IndexMap;

use super::ast::*;
use super::trace::{CallFailure, CallResult, TraceEvent};
use super::value::*;
use super::ExecLimits;
use crate::function_table::{FunctionTable, HostValue, InvokeError};
use crate::host::HostEnvironment;

/// Nesting bound when converting values for host calls.
const MAX_HOST_DEPTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Limit {
    Steps,
    Depth,
    Time,
}

#[derive(Debug)]
pub(crate) enum Unwind {
    Raise(Exc),
    Limit(Limit),
}

impl From<Exc> for Unwind {
    fn from(e: Exc) -> Self {
        Unwind::Raise(e)
    }
}

pub(crate) type EResult<T> = Result<T, Unwind>;

pub(crate) enum Flow {
    Normal,
    Break,
    Continue,
    Return(Value),
}

struct Scope {
    vars: HashMap<String, Value>,
    parent: Option<ScopeId>,
    captured: bool,
}

pub(crate) enum Iter {
    Seq { id: ObjId, idx: usize },
    Items(std::vec::IntoIter<Value>),
    Chars { s: Arc<str>, pos: usize },
    Range { r: RangeVal, idx: usize, len: usize },
}

pub(crate) struct Interp<'a> {
    pub(crate) table: &'a FunctionTable,
    pub(crate) env: &'a mut HostEnvironment,
    limits: &'a ExecLimits,
    pub(crate) heap: Heap,
    scopes: Vec<Scope>,
    scope: ScopeId,
    pub(crate) steps: u64,
    depth: usize,
    started: Instant,
    pub(crate) line: usize,
    pub(crate) events: Vec<TraceEvent>,
}

pub(crate) fn name_error<T>(name: &str) -> EResult<T> {
    Err(Exc::new(ErrorKind::Name, format!("name '{name}' is not defined")).into())
}

impl<'a> Interp<'a> {
    pub(crate) fn new(table: &'a FunctionTable, env: &'a mut HostEnvironment, limits: &'a ExecLimits) -> Self {
        Interp {
            table,
            env,
            limits,
            heap: Heap::default(),
            scopes: vec![Scope { vars: HashMap::new(), parent: None, captured: true }],
            scope: 0,
            steps: 0,
            depth: 0,
            started: Instant::now(),
            line: 0,
            events: Vec::new(),
        }
    }

    pub(crate) fn now_ms(&self) -> u64 {
        self.env.elapsed().as_millis() as u64
    }

    fn tick(&mut self) -> EResult<()> {
        self.steps += 1;
        if self.steps > self.limits.max_steps() {
            return Err(Unwind::Limit(Limit::Steps));
        }
        if self.steps.is_multiple_of(64) && self.started.elapsed() > self.limits.max_wall() {
            return Err(Unwind::Limit(Limit::Time));
        }
        Ok(())
    }

    // ---- statements -------------------------------------------------------

    pub(crate) fn exec_block(&mut self, stmts: &[Stmt]) -> EResult<Flow> {
        for stmt in stmts {
            match self.exec_stmt(stmt)? {
                Flow::Normal => {}
                other => return Ok(other),
            }
        }
        Ok(Flow::Normal)
    }

    fn exec_stmt(&mut self, stmt: &Stmt) -> EResult<Flow> {
        self.tick()?;
        self.line = stmt.pos.line;
        match &stmt.kind {
            StmtKind::Expr(e) => {
                self.eval(e)?;
            }
            StmtKind::Assign { targets, value } => {
                let v = self.eval(value)?;
                for t in targets {
                    self.assign(t, v.clone())?;
                }
            }
            StmtKind::AugAssign { target, op, value } => self.aug_assign(target, *op, value)?,
            StmtKind::FunctionDef(def) => {
                let mut defaults = Vec::with_capacity(def.params.len());
                for p in &def.params {
                    defaults.push(match &p.default {
                        Some(d) => Some(self.eval(d)?),
                        None => None,
                    });
                }
                let closure = Closure {
                    def: def.clone(),
                    scope: self.scope,
                    defaults: defaults.into_iter().map(|d| d.unwrap_or(Value::None)).collect(),
                };
                self.scopes[self.scope].captured = true;
                self.set_var(&def.name, Value::Function(Rc::new(closure)));
            }
            StmtKind::Return(value) => {
                let v = match value {
                    Some(e) => self.eval(e)?,
                    None => Value::None,
                };
                return Ok(Flow::Return(v));
            }
            StmtKind::If { branches, orelse } => {
                for (cond, body) in branches {
                    let c = self.eval(cond)?;
                    if self.heap.truthy(&c) {
                        return self.exec_block(body);
                    }
                }
                return self.exec_block(orelse);
            }
            StmtKind::While { cond, body } => loop {
                let c = self.eval(cond)?;
                if !self.heap.truthy(&c) {
                    break;
                }
                match self.exec_block(body)? {
                    Flow::Break => break,
                    Flow::Normal | Flow::Continue => {}
                    ret @ Flow::Return(_) => return Ok(ret),
                }
            },
            StmtKind::For { target, iter, body } => {
                let iterable = self.eval(iter)?;
                let mut it = self.make_iter(&iterable)?;
                while let Some(item) = self.iter_next(&mut it) {
                    self.assign(target, item)?;
                    match self.exec_block(body)? {
                        Flow::Break => break,
                        Flow::Normal | Flow::Continue => {}
                        ret @ Flow::Return(_) => return Ok(ret),
                    }
                }
            }
            StmtKind::Try { body, handlers, orelse, finally } => return self.exec_try(body, handlers, orelse, finally),
            StmtKind::Pass => {}
            StmtKind::Break => return Ok(Flow::Break),
            StmtKind::Continue => return Ok(Flow::Continue),
        }
        Ok(Flow::Normal)
    }

    fn exec_try(&mut self, body: &[Stmt], handlers: &[Handler], orelse: &[Stmt], finally: &[Stmt]) -> EResult<Flow> {
        let result = match self.exec_block(body) {
            Err(Unwind::Raise(exc)) => {
                let mut outcome = Err(Unwind::Raise(exc.clone()));
                for handler in handlers {
                    match self.handler_matches(handler, &exc) {
                        Err(e) => {
                            outcome = Err(e);
                            break;
                        }
                        Ok(true) => {
                            if let Some(name) = &handler.binding {
                                self.set_var(name, Value::Exception(Rc::new(exc.clone())));
                            }
                            outcome = self.exec_block(&handler.body);
                            break;
                        }
                        Ok(false) => {}
                    }
                }
                outcome
            }
            Ok(Flow::Normal) => self.exec_block(orelse),
            other => other,
        };
        if matches!(result, Err(Unwind::Limit(_))) || finally.is_empty() {
            return result;
        }
        match self.exec_block(finally)? {
            Flow::Normal => result,
            other => Ok(other),
        }
    }

    fn handler_matches(&mut self, handler: &Handler, exc: &Exc) -> EResult<bool> {
        if handler.types.is_empty() {
            return Ok(true);
        }
        for name in &handler.types {
            match exc.kind.caught_by(name) {
                Some(true) => return Ok(true),
                Some(false) => {}
                None => {
                    if self.lookup(name).is_ok() {
                        return Err(type_error::<()>(
                            "catching classes that do not inherit from BaseException is not allowed",
                        )
                        .unwrap_err()
                        .into());
                    }
                    return name_error(name);
                }
            }
        }
        Ok(false)
    }

    fn set_var(&mut self, name: &str, v: Value) {
        self.scopes[self.scope].vars.insert(name.to_string(), v);
    }

    pub(crate) fn lookup(&self, name: &str) -> EResult<Value> {
        let mut cursor = Some(self.scope);
        while let Some(id) = cursor {
            if let Some(v) = self.scopes[id].vars.get(name) {
                return Ok(v.clone());
            }
            cursor = self.scopes[id].parent;
        }
        if self.table.contains(name) {
            return Ok(Value::Host(Arc::from(name)));
        }
        if let Some(b) = Builtin::lookup(name) {
            return Ok(Value::Builtin(b));
        }
        name_error(name)
    }

    fn assign(&mut self, target: &Target, v: Value) -> EResult<()> {
        match target {
            Target::Name(n) => {
                self.set_var(n, v);
                Ok(())
            }
            Target::Subscript { object, index } => {
                let o = self.eval(object)?;
                let i = self.eval(index)?;
                self.set_item(&o, &i, v)
            }
            Target::Tuple(targets) => {
                let items = self.unpack(&v, targets.len())?;
                for (t, item) in targets.iter().zip(items) {
                    self.assign(t, item)?;
                }
                Ok(())
            }
        }
    }

    fn aug_assign(&mut self, target: &Target, op: BinOp, value: &Expr) -> EResult<()> {
        match target {
            Target::Name(n) => {
                let current = self.lookup(n)?;
                let rhs = self.eval(value)?;
                let result = self.binop_inplace(op, current, rhs)?;
                self.set_var(n, result);
            }
            Target::Subscript { object, index } => {
                let o = self.eval(object)?;
                let i = self.eval(index)?;
                let current = self.get_item(&o, &i)?;
                let rhs = self.eval(value)?;
                let result = self.binop_inplace(op, current, rhs)?;
                self.set_item(&o, &i, result)?;
            }
            Target::Tuple(_) => unreachable!("parser rejects tuple targets in augmented assignment"),
        }
        Ok(())
    }

    fn binop_inplace(&mut self, op: BinOp, current: Value, rhs: Value) -> EResult<Value> {
        if let (BinOp::Add, Value::List(id)) = (op, &current) {
            self.extend_list(*id, &rhs)?;
            return Ok(current);
        }
        self.binop(op, current, rhs)
    }

    pub(crate) fn extend_list(&mut self, id: ObjId, source: &Value) -> EResult<()> {
        let items = self.collect(source)?;
        let new_len = self.heap.list(id).len() + items.len();
        self.heap.check_len(new_len)?;
        self.heap.charge_cells(items.len())?;
        self.heap.list_mut(id).extend(items);
        Ok(())
    }

    fn unpack(&mut self, v: &Value, n: usize) -> EResult<Vec<Value>> {
        let mut it = self.make_iter(v).map_err(|e| match e {
            Unwind::Raise(exc) if exc.kind == ErrorKind::Type => {
                Unwind::Raise(Exc::new(ErrorKind::Type, format!("cannot unpack non-iterable {} object", v.type_name())))
            }
            other => other,
        })?;
        let mut items = Vec::with_capacity(n);
        while let Some(item) = self.iter_next(&mut it) {
            if items.len() == n {
                return Err(Exc::new(ErrorKind::Value, format!("too many values to unpack (expected {n})")).into());
            }
            items.push(item);
        }
        if items.len() < n {
            return Err(Exc::new(
                ErrorKind::Value,
                format!("not enough values to unpack (expected {n}, got {})", items.len()),
            )
            .into());
        }
        Ok(items)
    }

    // ---- iteration --------------------------------------------------------

    pub(crate) fn make_iter(&mut self, v: &Value) -> EResult<Iter> {
        Ok(match v {
            Value::List(id) | Value::Tuple(id) => Iter::Seq { id: *id, idx: 0 },
            Value::Str(s) => Iter::Chars { s: s.clone(), pos: 0 },
            Value::Dict(id) => {
                Iter::Items(self.heap.dict(*id).values().map(|(k, _)| k.clone()).collect::<Vec<_>>().into_iter())
            }
            Value::Range(r) => Iter::Range { r: *r, idx: 0, len: r.len() },
            other => {
                return Err(Exc::new(ErrorKind::Type, format!("'{}' object is not iterable", other.type_name())).into())
            }
        })
    }

    pub(crate) fn iter_next(&self, it: &mut Iter) -> Option<Value> {
        match it {
            Iter::Seq { id, idx } => {
                let item = self.heap.list(*id).get(*idx).cloned();
                *idx += 1;
                item
            }
            Iter::Items(items) => items.next(),
            Iter::Chars { s, pos } => {
                let c = s[*pos..].chars().next()?;
                *pos += c.len_utf8();
                Some(Value::str(c.to_string()))
            }
            Iter::Range { r, idx, len } => {
                if *idx >= *len {
                    return None;
                }
                let v = r.get(*idx);
                *idx += 1;
                Some(Value::Int(v))
            }
        }
    }

    /// Materializes an iterable, bounded by the sequence length cap.
    pub(crate) fn collect(&mut self, v: &Value) -> EResult<Vec<Value>> {
        if let Value::Range(r) = v {
            self.heap.check_len(r.len())?;
        }
        let mut it = self.make_iter(v)?;
        let mut out = Vec::new();
        while let Some(item) = self.iter_next(&mut it) {
            out.push(item);
            if out.len() > MAX_SEQ_LEN {
                self.heap.check_len(out.len())?;
            }
        }
        Ok(out)
    }

    // ---- expressions ------------------------------------------------------

    pub(crate) fn eval(&mut self, e: &Expr) -> EResult<Value> {
        self.tick()?;
        match &e.kind {
            ExprKind::Literal(lit) => Ok(match lit {
                Literal::None => Value::None,
                Literal::Bool(b) => Value::Bool(*b),
                Literal::Int(i) => Value::Int(*i),
                Literal::Float(f) => Value::Float(*f),
                Literal::Str(s) => Value::Str(s.clone()),
            }),
            ExprKind::Name(n) => self.lookup(n),
            ExprKind::Call { func, args, kwargs } => {
                let f = self.lookup(func)?;
                let (args, kwargs) = self.eval_args(args, kwargs)?;
                self.call_value(f, args, kwargs)
            }
            ExprKind::MethodCall { receiver, method, args, kwargs } => {
                let r = self.eval(receiver)?;
                let (args, kwargs) = self.eval_args(args, kwargs)?;
                self.call_method(r, method, args, kwargs)
            }
            ExprKind::Binary { op, left, right } => {
                let l = self.eval(left)?;
                let r = self.eval(right)?;
                self.binop(*op, l, r)
            }
            ExprKind::Unary { op, operand } => {
                let v = self.eval(operand)?;
                self.unary(*op, v)
            }
            ExprKind::Compare { first, rest } => {
                let mut left = self.eval(first)?;
                for (op, expr) in rest {
                    let right = self.eval(expr)?;
                    if !self.compare(*op, &left, &right)? {
                        return Ok(Value::Bool(false));
                    }
                    left = right;
                }
                Ok(Value::Bool(true))
            }
            ExprKind::BoolOp { op, values } => {
                let mut last = Value::None;
                for (i, expr) in values.iter().enumerate() {
                    last = self.eval(expr)?;
                    let t = self.heap.truthy(&last);
                    let stop = match op {
                        BoolOp::And => !t,
                        BoolOp::Or => t,
                    };
                    if stop || i == values.len() - 1 {
                        break;
                    }
                }
                Ok(last)
            }
            ExprKind::Subscript { object, index } => {
                let o = self.eval(object)?;
                let i = self.eval(index)?;
                self.get_item(&o, &i)
            }
            ExprKind::Slice { object, lower, upper, step } => {
                let o = self.eval(object)?;
                let bound = |this: &mut Self, b: &Option<Box<Expr>>| -> EResult<Option<i64>> {
                    match b {
                        None => Ok(None),
                        Some(expr) => match this.eval(expr)? {
                            Value::None => Ok(None),
                            v => v.as_index().map(Some).ok_or_else(|| {
                                Exc::new(ErrorKind::Type, "slice indices must be integers or None").into()
                            }),
                        },
                    }
                };
                let lo = bound(self, lower)?;
                let hi = bound(self, upper)?;
                let st = bound(self, step)?;
                self.slice(&o, lo, hi, st)
            }
            ExprKind::List(items) => {
                let vals = self.eval_all(items)?;
                Ok(self.heap.new_list(vals)?)
            }
            ExprKind::Tuple(items) => {
                let vals = self.eval_all(items)?;
                Ok(self.heap.new_tuple(vals)?)
            }
            ExprKind::Dict(entries) => {
                let mut map = IndexMap::new();
                for (k, v) in entries {
                    let key = self.eval(k)?;
                    let val = self.eval(v)?;
                    let hk = self.heap.key(&key)?;
                    match map.get_mut(&hk) {
                        Some(slot) => {
                            let (_, old): &mut (Value, Value) = slot;
                            *old = val;
                        }
                        None => {
                            map.insert(hk, (key, val));
                        }
                    }
                }
                Ok(self.heap.new_dict(map)?)
            }
            ExprKind::IfExp { test, body, orelse } => {
                let t = self.eval(test)?;
                if self.heap.truthy(&t) {
                    self.eval(body)
                } else {
                    self.eval(orelse)
                }
            }
            ExprKind::FString(parts) => {
                let mut out = String::new();
                for part in parts {
                    match part {
                        FStringPart::Text(t) => out.push_str(t),
                        FStringPart::Expr(expr) => {
                            let v = self.eval(expr)?;
                            out.push_str(&self.heap.to_str(&v)?);
                        }
                    }
                    if out.len() > MAX_STR_LEN {
                        self.heap.charge_str(out.len())?;
                    }
                }
                Ok(self.heap.new_str(out)?)
            }
            ExprKind::ListComp { element, target, iter, conds } => {
                let iterable = self.eval(iter)?;
                let mut it = self.make_iter(&iterable)?;
                let saved = self.scope;
                self.scopes.push(Scope { vars: HashMap::new(), parent: Some(saved), captured: false });
                self.scope = self.scopes.len() - 1;
                let result = self.run_comprehension(&mut it, element, target, conds);
                self.leave_scope(saved);
                let items = result?;
                Ok(self.heap.new_list(items)?)
            }
        }
    }

    fn run_comprehension(
        &mut self,
        it: &mut Iter,
        element: &Expr,
        target: &Target,
        conds: &[Expr],
    ) -> EResult<Vec<Value>> {
        let mut out = Vec::new();
        'items: while let Some(item) = self.iter_next(it) {
            self.assign(target, item)?;
            for cond in conds {
                let c = self.eval(cond)?;
                if !self.heap.truthy(&c) {
                    continue 'items;
                }
            }
            out.push(self.eval(element)?);
            self.heap.check_len(out.len())?;
        }
        Ok(out)
    }

    /// Restores `saved` as the current scope, discarding the scope being
    /// left when nothing can still reach it.
    fn leave_scope(&mut self, saved: ScopeId) {
        let current = self.scope;
        self.scope = saved;
        if current == self.scopes.len() - 1 && !self.scopes[current].captured {
            self.scopes.pop();
        }
    }

    fn eval_all(&mut self, items: &[Expr]) -> EResult<Vec<Value>> {
        let mut out = Vec::with_capacity(items.len());
        for item in items {
            out.push(self.eval(item)?);
        }
        Ok(out)
    }

    fn eval_args(&mut self, args: &[Expr], kwargs: &[(String, Expr)]) -> EResult<(Vec<Value>, Vec<(String, Value)>)> {
        let a = self.eval_all(args)?;
        let mut k = Vec::with_capacity(kwargs.len());
        for (name, expr) in kwargs {
            k.push((name.clone(), self.eval(expr)?));
        }
        Ok((a, k))
    }

    // ---- calls ------------------------------------------------------------

    fn call_value(&mut self, f: Value, args: Vec<Value>, kwargs: Vec<(String, Value)>) -> EResult<Value> {
        match f {
            Value::Function(c) => self.call_closure(c, args, kwargs),
            Value::Host(name) => self.call_host(&name, args, kwargs),
            Value::Builtin(b) => self.call_builtin(b, args, kwargs),
            other => Err(Exc::new(ErrorKind::Type, format!("'{}' object is not callable", other.type_name())).into()),
        }
    }

    fn call_closure(&mut self, c: Rc<Closure>, args: Vec<Value>, kwargs: Vec<(String, Value)>) -> EResult<Value> {
        let def = &c.def;
        let n = def.params.len();
        let fname = &def.name;
        if args.len() > n {
            let noun = if n == 1 { "argument" } else { "arguments" };
            let verb = if args.len() == 1 { "was" } else { "were" };
            return Err(Exc::new(
                ErrorKind::Type,
                format!("{fname}() takes {n} positional {noun} but {} {verb} given", args.len()),
            )
            .into());
        }
        let mut slots: Vec<Option<Value>> = args.into_iter().map(Some).collect();
        slots.resize(n, None);
        for (k, v) in kwargs {
            let Some(idx) = def.params.iter().position(|p| p.name == k) else {
                return Err(
                    Exc::new(ErrorKind::Type, format!("{fname}() got an unexpected keyword argument '{k}'")).into()
                );
            };
            if slots[idx].is_some() {
                return Err(
                    Exc::new(ErrorKind::Type, format!("{fname}() got multiple values for argument '{k}'")).into()
                );
            }
            slots[idx] = Some(v);
        }
        let mut missing = Vec::new();
        for (i, slot) in slots.iter_mut().enumerate() {
            if slot.is_none() {
                if def.params[i].default.is_some() {
                    *slot = Some(c.defaults[i].clone());
                } else {
                    missing.push(format!("'{}'", def.params[i].name));
                }
            }
        }
        if !missing.is_empty() {
            let noun = if missing.len() == 1 { "argument" } else { "arguments" };
            return Err(Exc::new(
                ErrorKind::Type,
                format!("{fname}() missing {} required positional {noun}: {}", missing.len(), missing.join(", ")),
            )
            .into());
        }

        self.depth += 1;
        if self.depth > self.limits.max_depth() {
            self.depth -= 1;
            return Err(Unwind::Limit(Limit::Depth));
        }
        let vars = def.params.iter().map(|p| p.name.clone()).zip(slots.into_iter().map(Option::unwrap)).collect();
        let saved = self.scope;
        self.scopes.push(Scope { vars, parent: Some(c.scope), captured: false });
        self.scope = self.scopes.len() - 1;
        let result = self.exec_block(&def.body);
        self.leave_scope(saved);
        self.depth -= 1;
        match result? {
            Flow::Return(v) => Ok(v),
            _ => Ok(Value::None),
        }
    }

    fn call_host(&mut self, name: &str, args: Vec<Value>, kwargs: Vec<(String, Value)>) -> EResult<Value> {
        let spec = self.table.lookup(name).expect("host values only name table entries");
        let host_args = if name == "print" {
            vec![HostValue::Text(self.print_text(args, kwargs)?)]
        } else {
            let arity = spec.params.len();
            if args.len() > arity {
                return Err(Exc::new(
                    ErrorKind::Type,
                    format!("{name}() takes {arity} argument(s) but {} were given", args.len()),
                )
                .into());
            }
            let mut slots: Vec<Option<Value>> = args.into_iter().map(Some).collect();
            slots.resize(arity, None);
            for (k, v) in kwargs {
                let Some(idx) = spec.params.iter().position(|p| p.name == k) else {
                    return Err(Exc::new(
                        ErrorKind::Type,
                        format!("{name}() got an unexpected keyword argument '{k}'"),
                    )
                    .into());
                };
                if slots[idx].is_some() {
                    return Err(
                        Exc::new(ErrorKind::Type, format!("{name}() got multiple values for argument '{k}'")).into()
                    );
                }
                slots[idx] = Some(v);
            }
            let mut out = Vec::with_capacity(arity);
            for (i, slot) in slots.into_iter().enumerate() {
                let Some(v) = slot else {
                    return Err(Exc::new(
                        ErrorKind::Type,
                        format!("{name}() missing required argument: '{}'", spec.params[i].name),
                    )
                    .into());
                };
                out.push(self.to_host(&v, 0)?);
            }
            out
        };

        let t_ms = self.now_ms();
        match self.table.invoke(name, &host_args, self.env) {
            Ok(result) => {
                self.events.push(TraceEvent::Call {
                    t_ms,
                    name: name.to_string(),
                    args: host_args,
                    result: CallResult::Value(result.clone()),
                });
                self.drain_output();
                Ok(self.from_host(result)?)
            }
            Err(InvokeError::Host(err)) => {
                self.events.push(TraceEvent::Call {
                    t_ms,
                    name: name.to_string(),
                    args: host_args,
                    result: CallResult::Error(CallFailure {
                        message: err.to_string(),
                        status: err.status,
                        fixture_miss: err.fixture_miss,
                    }),
                });
                self.drain_output();
                Err(Exc::new(ErrorKind::Host, err.to_string()).into())
            }
            Err(err @ InvokeError::ReturnTypeMismatch { .. }) => {
                self.events.push(TraceEvent::Call {
                    t_ms,
                    name: name.to_string(),
                    args: host_args,
                    result: CallResult::Error(CallFailure {
                        message: err.to_string(),
                        status: None,
                        fixture_miss: false,
                    }),
                });
                self.drain_output();
                Err(Exc::new(ErrorKind::Type, err.to_string()).into())
            }
            Err(err) => Err(Exc::new(ErrorKind::Type, err.to_string()).into()),
        }
    }

    /// `print(*values, sep=' ', end='\n')` collapsed into the single text
    /// argument of the catalog's `print`.
    fn print_text(&mut self, args: Vec<Value>, kwargs: Vec<(String, Value)>) -> EResult<String> {
        let mut sep = " ".to_string();
        for (k, v) in kwargs {
            match (k.as_str(), v) {
                ("sep", Value::Str(s)) => sep = s.to_string(),
                ("sep" | "end", Value::None) | ("end", Value::Str(_)) => {}
                ("sep" | "end", other) => {
                    return Err(Exc::new(
                        ErrorKind::Type,
                        format!("{k} must be None or a string, not {}", other.type_name()),
                    )
                    .into())
                }
                _ => {
                    return Err(
                        Exc::new(ErrorKind::Type, format!("'{k}' is an invalid keyword argument for print()")).into()
                    )
                }
            }
        }
        let mut parts = Vec::with_capacity(args.len());
        for a in &args {
            parts.push(self.heap.to_str(a)?);
        }
        let text = parts.join(&sep);
        self.heap.charge_str(text.len())?;
        Ok(text)
    }

    fn drain_output(&mut self) {
        let t_ms = self.now_ms();
        for text in self.env.take_output() {
            self.events.push(TraceEvent::Output { t_ms, text });
        }
    }

    fn to_host(&self, v: &Value, depth: usize) -> VResult<HostValue> {
        if depth > MAX_HOST_DEPTH {
            return Err(Exc::new(ErrorKind::Recursion, "value nested too deeply for a host call"));
        }
        Ok(match v {
            Value::None => HostValue::Null,
            Value::Bool(b) => HostValue::Boolean(*b),
            Value::Int(i) => HostValue::Integer(*i),
            Value::Float(f) => HostValue::Float(*f),
            Value::Str(s) => HostValue::Text(s.to_string()),
            Value::List(id) | Value::Tuple(id) => {
                HostValue::List(self.heap.list(*id).iter().map(|x| self.to_host(x, depth + 1)).collect::<VResult<_>>()?)
            }
            Value::Dict(id) => {
                let mut map = IndexMap::new();
                for (k, val) in self.heap.dict(*id).values() {
                    let Value::Str(key) = k else {
                        return type_error("host functions only accept text keys in dictionaries");
                    };
                    map.insert(key.to_string(), self.to_host(val, depth + 1)?);
                }
                HostValue::Map(map)
            }
            other => return type_error(format!("cannot pass a {} value to a host function", other.type_name())),
        })
    }

    fn from_host(&mut self, h: HostValue) -> VResult<Value> {
        Ok(match h {
            HostValue::Null => Value::None,
            HostValue::Boolean(b) => Value::Bool(b),
            HostValue::Integer(i) => Value::Int(i),
            HostValue::Float(f) => Value::Float(f),
            HostValue::Text(s) => self.heap.new_str(s)?,
            HostValue::List(items) => {
                let vals = items.into_iter().map(|x| self.from_host(x)).collect::<VResult<Vec<_>>>()?;
                self.heap.new_list(vals)?
            }
            HostValue::Map(map) => {
                let mut out = IndexMap::new();
                for (k, v) in map {
                    let key: Arc<str> = k.into();
                    let val = self.from_host(v)?;
                    out.insert(DictKey::Str(key.clone()), (Value::Str(key), val));
                }
                self.heap.new_dict(out)?
            }
        })
    }

    // ---- operators --------------------------------------------------------

    pub(crate) fn binop(&mut self, op: BinOp, a: Value, b: Value) -> EResult<Value> {
        if let Some(v) = arith(op, &a, &b) {
            return Ok(v?);
        }
        let unsupported = || -> EResult<Value> {
            if op == BinOp::Add {
                if let Value::Str(_) = a {
                    return Err(Exc::new(
                        ErrorKind::Type,
                        format!("can only concatenate str (not \"{}\") to str", b.type_name()),
                    )
                    .into());
                }
            }
            Err(Exc::new(
                ErrorKind::Type,
                format!("unsupported operand type(s) for {}: '{}' and '{}'", op.symbol(), a.type_name(), b.type_name()),
            )
            .into())
        };
        match (op, &a, &b) {
            (BinOp::Add, Value::Str(x), Value::Str(y)) => {
                let mut s = String::with_capacity(x.len() + y.len());
                self.heap.charge_str(x.len() + y.len())?;
                s.push_str(x);
                s.push_str(y);
                Ok(Value::str(s))
            }
            (BinOp::Add, Value::List(x), Value::List(y)) => {
                let mut items = self.heap.list(*x).clone();
                items.extend(self.heap.list(*y).iter().cloned());
                Ok(self.heap.new_list(items)?)
            }
            (BinOp::Add, Value::Tuple(x), Value::Tuple(y)) => {
                let mut items = self.heap.list(*x).clone();
                items.extend(self.heap.list(*y).iter().cloned());
                Ok(self.heap.new_tuple(items)?)
            }
            (BinOp::Mul, Value::Str(_) | Value::List(_) | Value::Tuple(_), n) if n.as_index().is_some() => {
                self.repeat(&a, n.as_index().unwrap())
            }
            (BinOp::Mul, n, Value::Str(_) | Value::List(_) | Value::Tuple(_)) if n.as_index().is_some() => {
                self.repeat(&b, n.as_index().unwrap())
            }
            (BinOp::Mod, Value::Str(_), _) => {
                Err(Exc::new(ErrorKind::Type, "printf-style string formatting is not supported").into())
            }
            _ => unsupported(),
        }
    }

    fn repeat(&mut self, seq: &Value, n: i64) -> EResult<Value> {
        let n = n.max(0) as usize;
        match seq {
            Value::Str(s) => {
                let total = s.len().saturating_mul(n);
                self.heap.charge_str(total)?;
                Ok(Value::str(s.repeat(n)))
            }
            Value::List(id) | Value::Tuple(id) => {
                let items = self.heap.list(*id);
                let total = items.len().saturating_mul(n);
                self.heap.check_len(total)?;
                let mut out = Vec::with_capacity(total);
                for _ in 0..n {
                    out.extend(items.iter().cloned());
                }
                if matches!(seq, Value::List(_)) {
                    Ok(self.heap.new_list(out)?)
                } else {
                    Ok(self.heap.new_tuple(out)?)
                }
            }
            _ => unreachable!(),
        }
    }

    fn unary(&mut self, op: UnaryOp, v: Value) -> EResult<Value> {
        Ok(match (op, &v) {
            (UnaryOp::Not, _) => Value::Bool(!self.heap.truthy(&v)),
            (UnaryOp::Neg, Value::Int(i)) => Value::Int(i.checked_neg().ok_or_else(|| overflow::<()>().unwrap_err())?),
            (UnaryOp::Neg, Value::Bool(b)) => Value::Int(-(*b as i64)),
            (UnaryOp::Neg, Value::Float(f)) => Value::Float(-f),
            (UnaryOp::Pos, Value::Int(_) | Value::Float(_)) => v,
            (UnaryOp::Pos, Value::Bool(b)) => Value::Int(*b as i64),
            _ => {
                let sym = if op == UnaryOp::Neg { "-" } else { "+" };
                return Err(Exc::new(
                    ErrorKind::Type,
                    format!("bad operand type for unary {sym}: '{}'", v.type_name()),
                )
                .into());
            }
        })
    }

    fn compare(&mut self, op: CmpOp, a: &Value, b: &Value) -> EResult<bool> {
        Ok(match op {
            CmpOp::Eq => self.heap.eq(a, b)?,
            CmpOp::NotEq => !self.heap.eq(a, b)?,
            CmpOp::Lt => self.heap.cmp(a, b, "<")? == Some(Ordering::Less),
            CmpOp::LtE => matches!(self.heap.cmp(a, b, "<=")?, Some(Ordering::Less | Ordering::Equal)),
            CmpOp::Gt => self.heap.cmp(a, b, ">")? == Some(Ordering::Greater),
            CmpOp::GtE => matches!(self.heap.cmp(a, b, ">=")?, Some(Ordering::Greater | Ordering::Equal)),
            CmpOp::In => self.contains(b, a)?,
            CmpOp::NotIn => !self.contains(b, a)?,
            CmpOp::Is => identical(a, b),
            CmpOp::IsNot => !identical(a, b),
        })
    }

    fn contains(&mut self, container: &Value, item: &Value) -> EResult<bool> {
        match container {
            Value::Str(s) => match item {
                Value::Str(needle) => Ok(s.contains(needle.as_ref())),
                other => Err(Exc::new(
                    ErrorKind::Type,
                    format!("'in <string>' requires string as left operand, not {}", other.type_name()),
                )
                .into()),
            },
            Value::List(id) | Value::Tuple(id) => {
                let items = self.heap.list(*id).clone();
                for x in &items {
                    if self.heap.eq(x, item)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Value::Dict(id) => {
                let key = self.heap.key(item)?;
                Ok(self.heap.dict(*id).contains_key(&key))
            }
            Value::Range(r) => {
                let i = match item {
                    Value::Int(i) => *i,
                    Value::Bool(b) => *b as i64,
                    Value::Float(f) if f.fract() == 0.0 && f.abs() < 9.2e18 => *f as i64,
                    _ => return Ok(false),
                };
                let (start, stop, step) = (r.start as i128, r.stop as i128, r.step as i128);
                let i = i as i128;
                let inside = if step > 0 { start <= i && i < stop } else { stop < i && i <= start };
                Ok(inside && (i - start) % step == 0)
            }
            other => {
                Err(Exc::new(ErrorKind::Type, format!("argument of type '{}' is not iterable", other.type_name()))
                    .into())
            }
        }
    }

    // ---- subscripts -------------------------------------------------------

    fn get_item(&mut self, o: &Value, i: &Value) -> EResult<Value> {
        match o {
            Value::List(id) | Value::Tuple(id) => {
                let what = if matches!(o, Value::List(_)) { "list" } else { "tuple" };
                let idx = seq_index(i, what)?;
                let items = self.heap.list(*id);
                match normalize_index(idx, items.len()) {
                    Some(k) => Ok(items[k].clone()),
                    None => Err(Exc::new(ErrorKind::Index, format!("{what} index out of range")).into()),
                }
            }
            Value::Str(s) => {
                let idx = seq_index(i, "string")?;
                let n = s.chars().count();
                match normalize_index(idx, n) {
                    Some(k) => Ok(Value::str(s.chars().nth(k).unwrap().to_string())),
                    None => Err(Exc::new(ErrorKind::Index, "string index out of range").into()),
                }
            }
            Value::Dict(id) => {
                let key = self.heap.key(i)?;
                match self.heap.dict(*id).get(&key) {
                    Some((_, v)) => Ok(v.clone()),
                    None => Err(Exc::new(ErrorKind::Key, self.heap.repr(i)?).into()),
                }
            }
            Value::Range(r) => {
                let idx = seq_index(i, "range")?;
                match normalize_index(idx, r.len()) {
                    Some(k) => Ok(Value::Int(r.get(k))),
                    None => Err(Exc::new(ErrorKind::Index, "range object index out of range").into()),
                }
            }
            other => {
                Err(Exc::new(ErrorKind::Type, format!("'{}' object is not subscriptable", other.type_name())).into())
            }
        }
    }

    fn set_item(&mut self, o: &Value, i: &Value, v: Value) -> EResult<()> {
        match o {
            Value::List(id) => {
                let idx = seq_index(i, "list")?;
                let len = self.heap.list(*id).len();
                match normalize_index(idx, len) {
                    Some(k) => {
                        self.heap.list_mut(*id)[k] = v;
                        Ok(())
                    }
                    None => Err(Exc::new(ErrorKind::Index, "list assignment index out of range").into()),
                }
            }
            Value::Dict(id) => {
                let key = self.heap.key(i)?;
                let map = self.heap.dict_mut(*id);
                if let Some(slot) = map.get_mut(&key) {
                    slot.1 = v;
                    return Ok(());
                }
                let n = map.len() + 1;
                self.heap.check_len(n)?;
                self.heap.charge_cells(1)?;
                self.heap.dict_mut(*id).insert(key, (i.clone(), v));
                Ok(())
            }
            other => Err(Exc::new(
                ErrorKind::Type,
                format!("'{}' object does not support item assignment", other.type_name()),
            )
            .into()),
        }
    }

    fn slice(&mut self, o: &Value, lo: Option<i64>, hi: Option<i64>, step: Option<i64>) -> EResult<Value> {
        let step = step.unwrap_or(1);
        if step == 0 {
            return Err(Exc::new(ErrorKind::Value, "slice step cannot be zero").into());
        }
        match o {
            Value::List(id) | Value::Tuple(id) => {
                let items = self.heap.list(*id);
                let picked: Vec<Value> =
                    slice_indices(items.len(), lo, hi, step).into_iter().map(|k| items[k].clone()).collect();
                if matches!(o, Value::List(_)) {
                    Ok(self.heap.new_list(picked)?)
                } else {
                    Ok(self.heap.new_tuple(picked)?)
                }
            }
            Value::Str(s) => {
                let chars: Vec<char> = s.chars().collect();
                let out: String = slice_indices(chars.len(), lo, hi, step).into_iter().map(|k| chars[k]).collect();
                Ok(self.heap.new_str(out)?)
            }
            Value::Range(r) => {
                let (start, stop) = adjust_slice(r.len() as i128, lo, hi, step);
                let base = r.start as i128;
                let rs = r.step as i128;
                let conv = |x: i128| i64::try_from(x).map_err(|_| overflow::<()>().unwrap_err());
                Ok(Value::Range(RangeVal {
                    start: conv(base + start * rs)?,
                    stop: conv(base + stop * rs)?,
                    step: conv(rs * step as i128)?,
                }))
            }
            other => {
                Err(Exc::new(ErrorKind::Type, format!("'{}' object is not subscriptable", other.type_name())).into())
            }
        }
    }
}

fn identical(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::None, Value::None) => true,
        (Value::Bool(x), Value::Bool(y)) => x == y,
        (Value::Int(x), Value::Int(y)) => x == y,
        (Value::Float(x), Value::Float(y)) => x.to_bits() == y.to_bits(),
        (Value::Str(x), Value::Str(y)) => x == y,
        (Value::List(x), Value::List(y)) | (Value::Tuple(x), Value::Tuple(y)) | (Value::Dict(x), Value::Dict(y)) => {
            x == y
        }
        (Value::Function(x), Value::Function(y)) => Rc::ptr_eq(x, y),
        (Value::Builtin(x), Value::Builtin(y)) => x == y,
        (Value::Host(x), Value::Host(y)) => x == y,
        (Value::Exception(x), Value::Exception(y)) => Rc::ptr_eq(x, y),
        (Value::Range(x), Value::Range(y)) => x == y,
        _ => false,
    }
}

fn seq_index(i: &Value, what: &str) -> VResult<i64> {
    i.as_index().ok_or_else(|| {
        Exc::new(ErrorKind::Type, format!("{what} indices must be integers or slices, not {}", i.type_name()))
    })
}

fn normalize_index(idx: i64, len: usize) -> Option<usize> {
    let len = len as i128;
    let k = if idx < 0 { idx as i128 + len } else { idx as i128 };
    (0..len).contains(&k).then_some(k as usize)
}

/// Start and stop after clamping, following the object language's slice rules.
fn adjust_slice(len: i128, lo: Option<i64>, hi: Option<i64>, step: i64) -> (i128, i128) {
    let clamp = |v: Option<i64>, default: i128| -> i128 {
        let Some(v) = v else { return default };
        let mut v = v as i128;
        if v < 0 {
            v += len;
            if v < 0 {
                v = if step < 0 { -1 } else { 0 };
            }
        } else if v >= len {
            v = if step < 0 { len - 1 } else { len };
        }
        v
    };
    if step > 0 {
        (clamp(lo, 0), clamp(hi, len))
    } else {
        (clamp(lo, len - 1), clamp(hi, -1))
    }
}

fn slice_indices(len: usize, lo: Option<i64>, hi: Option<i64>, step: i64) -> Vec<usize> {
    let (start, stop) = adjust_slice(len as i128, lo, hi, step);
    let mut out = Vec::new();
    let mut i = start;
    let step = step as i128;
    while (step > 0 && i < stop) || (step < 0 && i > stop) {
        out.push(i as usize);
        i += step;
    }
    out
}

enum Num {
    I(i64, i64),
    F(f64, f64),
}

fn num_pair(a: &Value, b: &Value) -> Option<Num> {
    let as_num = |v: &Value| match v {
        Value::Int(i) => Some(Err(*i)),
        Value::Bool(b) => Some(Err(*b as i64)),
        Value::Float(f) => Some(Ok(*f)),
        _ => None,
    };
    Some(match (as_num(a)?, as_num(b)?) {
        (Err(x), Err(y)) => Num::I(x, y),
        (Ok(x), Ok(y)) => Num::F(x, y),
        (Err(x), Ok(y)) => Num::F(x as f64, y),
        (Ok(x), Err(y)) => Num::F(x, y as f64),
    })
}

fn zero_div<T>(message: &str) -> VResult<T> {
    Err(Exc::new(ErrorKind::ZeroDivision, message))
}

/// Numeric binary operations; `None` when either operand is not a number.
fn arith(op: BinOp, a: &Value, b: &Value) -> Option<VResult<Value>> {
    let pair = num_pair(a, b)?;
    Some(match pair {
        Num::I(x, y) => int_arith(op, x, y),
        Num::F(x, y) => float_arith(op, x, y).map(Value::Float),
    })
}

fn int_arith(op: BinOp, x: i64, y: i64) -> VResult<Value> {
    let checked = |r: Option<i64>| r.map(Value::Int).ok_or_else(|| overflow::<()>().unwrap_err());
    match op {
        BinOp::Add => checked(x.checked_add(y)),
        BinOp::Sub => checked(x.checked_sub(y)),
        BinOp::Mul => checked(x.checked_mul(y)),
        BinOp::Div => {
            if y == 0 {
                return zero_div("division by zero");
            }
            Ok(Value::Float(int_true_div(x, y)))
        }
        BinOp::FloorDiv => {
            if y == 0 {
                return zero_div("integer division or modulo by zero");
            }
            let q = x.checked_div(y).ok_or_else(|| overflow::<()>().unwrap_err())?;
            let adjust = x % y != 0 && ((x < 0) != (y < 0));
            Ok(Value::Int(if adjust { q - 1 } else { q }))
        }
        BinOp::Mod => {
            if y == 0 {
                return zero_div("integer modulo by zero");
            }
            if y == -1 {
                return Ok(Value::Int(0));
            }
            let r = x % y;
            Ok(Value::Int(if r != 0 && ((r < 0) != (y < 0)) { r + y } else { r }))
        }
        BinOp::Pow => {
            if y < 0 {
                if x == 0 {
                    return zero_div("0.0 cannot be raised to a negative power");
                }
                return float_arith(BinOp::Pow, x as f64, y as f64).map(Value::Float);
            }
            match x {
                0 | 1 => Ok(Value::Int(if y == 0 { 1 } else { x })),
                -1 => Ok(Value::Int(if y % 2 == 0 { 1 } else { -1 })),
                _ => {
                    let e = u32::try_from(y).map_err(|_| overflow::<()>().unwrap_err())?;
                    checked(x.checked_pow(e))
                }
            }
        }
    }
}

fn int_true_div(x: i64, y: i64) -> f64 {
    x as f64 / y as f64
}

fn float_arith(op: BinOp, x: f64, y: f64) -> VResult<f64> {
    match op {
        BinOp::Add => Ok(x + y),
        BinOp::Sub => Ok(x - y),
        BinOp::Mul => Ok(x * y),
        BinOp::Div => {
            if y == 0.0 {
                return zero_div("float division by zero");
            }
            Ok(x / y)
        }
        BinOp::FloorDiv | BinOp::Mod => {
            if y == 0.0 {
                return zero_div(if op == BinOp::Mod {
                    "float modulo by zero"
                } else {
                    "float floor division by zero"
                });
            }
            let (div, m) = float_divmod(x, y);
            Ok(if op == BinOp::Mod { m } else { div })
        }
        BinOp::Pow => {
            if x == 0.0 && y < 0.0 {
                return zero_div("0.0 cannot be raised to a negative power");
            }
            if x < 0.0 && y.is_finite() && y.fract() != 0.0 {
                return Err(Exc::new(ErrorKind::Value, "complex results are not supported"));
            }
            let r = x.powf(y);
            if r.is_infinite() && x.is_finite() && y.is_finite() {
                return Err(Exc::new(ErrorKind::Overflow, "(34, 'Numerical result out of range')"));
            }
            Ok(r)
        }
    }
}

fn float_divmod(vx: f64, wx: f64) -> (f64, f64) {
    let mut m = vx % wx;
    let mut div = (vx - m) / wx;
    if m != 0.0 {
        if (wx < 0.0) != (m < 0.0) {
            m += wx;
            div -= 1.0;
        }
    } else {
        m = 0.0f64.copysign(wx);
    }
    let floordiv = if div != 0.0 {
        let mut f = div.floor();
        if div - f > 0.5 {
            f += 1.0;
        }
        f
    } else {
        0.0f64.copysign(vx / wx)
    };
    (floordiv, m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_semantics() {
        assert!(matches!(int_arith(BinOp::FloorDiv, -7, 2), Ok(Value::Int(-4))));
        assert!(matches!(int_arith(BinOp::Mod, -7, 2), Ok(Value::Int(1))));
        assert!(matches!(int_arith(BinOp::Mod, 7, -2), Ok(Value::Int(-1))));
        assert!(int_arith(BinOp::FloorDiv, i64::MIN, -1).is_err());
        assert_eq!(float_divmod(-7.5, 2.0), (-4.0, 0.5));
        assert_eq!(float_divmod(7.5, -2.0), (-4.0, -0.5));
    }

    #[test]
    fn slices_follow_object_language() {
        assert_eq!(slice_indices(5, None, None, -1), vec![4, 3, 2, 1, 0]);
        assert_eq!(slice_indices(5, Some(-2), None, 1), vec![3, 4]);
        assert_eq!(slice_indices(5, Some(1), Some(100), 2), vec![1, 3]);
        assert_eq!(slice_indices(5, Some(10), Some(-10), -2), vec![4, 2, 0]);
        assert!(slice_indices(5, Some(3), Some(1), 1).is_empty());
    }
}
