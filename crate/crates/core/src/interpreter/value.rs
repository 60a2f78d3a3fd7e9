//! Runtime values, the object arena and value formatting.

use std::cmp::Ordering;
use std::rc::Rc;
use std::sync::Arc;

use indexmap::IndexMap;

use super::ast::FunctionDef;

pub(crate) type ObjId = usize;
pub(crate) type ScopeId = usize;

/// Longest string a single operation may produce, in bytes.
pub(crate) const MAX_STR_LEN: usize = 1 << 22;
/// Longest list or tuple.
pub(crate) const MAX_SEQ_LEN: usize = 1 << 20;
/// Total container cells a run may allocate.
pub(crate) const CELL_BUDGET: usize = 1 << 22;
/// Total string bytes a run may allocate.
pub(crate) const STR_BUDGET: usize = 1 << 27;
/// Nesting bound for formatting, comparison and conversion of containers.
pub(crate) const MAX_VALUE_DEPTH: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ErrorKind {
    Name,
    Type,
    Attribute,
    Host,
    ZeroDivision,
    Index,
    Key,
    Value,
    Overflow,
    Memory,
    Recursion,
}

impl ErrorKind {
    /// Kind reported in the trace when the error is not caught.
    pub(crate) fn trace_kind(self) -> &'static str {
        match self {
            ErrorKind::Name => "RuntimeNameError",
            ErrorKind::Type => "RuntimeTypeError",
            ErrorKind::Attribute => "AttributeError",
            ErrorKind::Host => "UncaughtHostError",
            ErrorKind::ZeroDivision => "ZeroDivisionError",
            ErrorKind::Index => "IndexError",
            ErrorKind::Key => "KeyError",
            ErrorKind::Value => "ValueError",
            ErrorKind::Overflow => "OverflowError",
            ErrorKind::Memory => "MemoryError",
            ErrorKind::Recursion => "RecursionError",
        }
    }

    /// Whether an `except <name>` clause catches this kind. `None` when the
    /// name is not an exception class at all.
    pub(crate) fn caught_by(self, name: &str) -> Option<bool> {
        use ErrorKind::*;
        let hit = match name {
            "BaseException" | "Exception" => true,
            "ArithmeticError" => matches!(self, ZeroDivision | Overflow),
            "LookupError" => matches!(self, Index | Key),
            "RuntimeError" => matches!(self, Host | Recursion),
            "HostError" | "OSError" | "IOError" | "ConnectionError" => self == Host,
            "NameError" => self == Name,
            "TypeError" => self == Type,
            "AttributeError" => self == Attribute,
            "ZeroDivisionError" => self == ZeroDivision,
            "IndexError" => self == Index,
            "KeyError" => self == Key,
            "ValueError" => self == Value,
            "OverflowError" => self == Overflow,
            "MemoryError" => self == Memory,
            "RecursionError" => self == Recursion,
            "TimeoutError"
            | "FileNotFoundError"
            | "PermissionError"
            | "StopIteration"
            | "UnicodeError"
            | "UnicodeDecodeError"
            | "ImportError"
            | "ModuleNotFoundError"
            | "NotImplementedError"
            | "AssertionError"
            | "KeyboardInterrupt"
            | "SystemExit"
            | "UnboundLocalError"
            | "FloatingPointError"
            | "EOFError" => false,
            _ => return None,
        };
        Some(hit)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Exc {
    pub kind: ErrorKind,
    pub message: String,
}

impl Exc {
    pub(crate) fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Exc { kind, message: message.into() }
    }
}

pub(crate) type VResult<T> = Result<T, Exc>;

pub(crate) fn type_error<T>(message: impl Into<String>) -> VResult<T> {
    Err(Exc::new(ErrorKind::Type, message))
}

pub(crate) fn value_error<T>(message: impl Into<String>) -> VResult<T> {
    Err(Exc::new(ErrorKind::Value, message))
}

pub(crate) fn overflow<T>() -> VResult<T> {
    Err(Exc::new(ErrorKind::Overflow, "integer result out of range"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Builtin {
    Len,
    Range,
    Str,
    Int,
    Float,
}

impl Builtin {
    pub(crate) fn lookup(name: &str) -> Option<Builtin> {
        Some(match name {
            "len" => Builtin::Len,
            "range" => Builtin::Range,
            "str" => Builtin::Str,
            "int" => Builtin::Int,
            "float" => Builtin::Float,
            _ => return None,
        })
    }

    pub(crate) fn name(self) -> &'static str {
        match self {
            Builtin::Len => "len",
            Builtin::Range => "range",
            Builtin::Str => "str",
            Builtin::Int => "int",
            Builtin::Float => "float",
        }
    }
}

#[derive(Debug)]
pub(crate) struct Closure {
    pub def: Arc<FunctionDef>,
    pub scope: ScopeId,
    pub defaults: Vec<Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct RangeVal {
    pub start: i64,
    pub stop: i64,
    pub step: i64,
}

impl RangeVal {
    pub(crate) fn len(&self) -> usize {
        let (start, stop, step) = (self.start as i128, self.stop as i128, self.step as i128);
        let n = if step > 0 {
            if stop > start {
                (stop - start + step - 1) / step
            } else {
                0
            }
        } else if start > stop {
            (start - stop - step - 1) / (-step)
        } else {
            0
        };
        n.min(usize::MAX as i128) as usize
    }

    pub(crate) fn get(&self, i: usize) -> i64 {
        (self.start as i128 + self.step as i128 * i as i128) as i64
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Value {
    None,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(Arc<str>),
    List(ObjId),
    Tuple(ObjId),
    Dict(ObjId),
    Range(RangeVal),
    Function(Rc<Closure>),
    Builtin(Builtin),
    /// A catalog function, referenced by name.
    Host(Arc<str>),
    Exception(Rc<Exc>),
}

impl Value {
    pub(crate) fn str(s: impl Into<Arc<str>>) -> Value {
        Value::Str(s.into())
    }

    pub(crate) fn type_name(&self) -> &'static str {
        match self {
            Value::None => "NoneType",
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Str(_) => "str",
            Value::List(_) => "list",
            Value::Tuple(_) => "tuple",
            Value::Dict(_) => "dict",
            Value::Range(_) => "range",
            Value::Function(_) => "function",
            Value::Builtin(_) | Value::Host(_) => "builtin_function_or_method",
            Value::Exception(_) => "Exception",
        }
    }

    /// Integer view of ints and bools.
    pub(crate) fn as_index(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            Value::Bool(b) => Some(*b as i64),
            _ => None,
        }
    }
}

/// Hashable projection used as a dictionary key. Numerically equal keys
/// (`1`, `1.0`, `True`) collapse onto the same entry.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) enum DictKey {
    None,
    Int(i64),
    Float(u64),
    Str(Arc<str>),
    Tuple(Vec<DictKey>),
}

#[derive(Debug)]
pub(crate) enum Obj {
    List(Vec<Value>),
    Tuple(Vec<Value>),
    Dict(IndexMap<DictKey, (Value, Value)>),
}

#[derive(Debug, Default)]
pub(crate) struct Heap {
    objs: Vec<Obj>,
    cells: usize,
    str_bytes: usize,
}

fn memory_error<T>() -> VResult<T> {
    Err(Exc::new(ErrorKind::Memory, "out of memory"))
}

impl Heap {
    pub(crate) fn charge_cells(&mut self, n: usize) -> VResult<()> {
        self.cells = self.cells.saturating_add(n);
        if self.cells > CELL_BUDGET {
            return memory_error();
        }
        Ok(())
    }

    pub(crate) fn charge_str(&mut self, n: usize) -> VResult<()> {
        if n > MAX_STR_LEN {
            return memory_error();
        }
        self.str_bytes = self.str_bytes.saturating_add(n);
        if self.str_bytes > STR_BUDGET {
            return memory_error();
        }
        Ok(())
    }

    pub(crate) fn check_len(&self, n: usize) -> VResult<()> {
        if n > MAX_SEQ_LEN {
            return memory_error();
        }
        Ok(())
    }

    pub(crate) fn new_str(&mut self, s: String) -> VResult<Value> {
        self.charge_str(s.len())?;
        Ok(Value::Str(s.into()))
    }

    fn alloc(&mut self, obj: Obj, cells: usize) -> VResult<ObjId> {
        self.check_len(cells)?;
        self.charge_cells(cells.max(1))?;
        self.objs.push(obj);
        Ok(self.objs.len() - 1)
    }

    pub(crate) fn new_list(&mut self, items: Vec<Value>) -> VResult<Value> {
        let n = items.len();
        Ok(Value::List(self.alloc(Obj::List(items), n)?))
    }

    pub(crate) fn new_tuple(&mut self, items: Vec<Value>) -> VResult<Value> {
        let n = items.len();
        Ok(Value::Tuple(self.alloc(Obj::Tuple(items), n)?))
    }

    pub(crate) fn new_dict(&mut self, map: IndexMap<DictKey, (Value, Value)>) -> VResult<Value> {
        let n = map.len();
        Ok(Value::Dict(self.alloc(Obj::Dict(map), n)?))
    }

    pub(crate) fn get(&self, id: ObjId) -> &Obj {
        &self.objs[id]
    }

    pub(crate) fn list(&self, id: ObjId) -> &Vec<Value> {
        match &self.objs[id] {
            Obj::List(v) | Obj::Tuple(v) => v,
            Obj::Dict(_) => unreachable!("sequence id refers to a dict"),
        }
    }

    pub(crate) fn list_mut(&mut self, id: ObjId) -> &mut Vec<Value> {
        match &mut self.objs[id] {
            Obj::List(v) | Obj::Tuple(v) => v,
            Obj::Dict(_) => unreachable!("sequence id refers to a dict"),
        }
    }

    pub(crate) fn dict(&self, id: ObjId) -> &IndexMap<DictKey, (Value, Value)> {
        match &self.objs[id] {
            Obj::Dict(d) => d,
            _ => unreachable!("dict id refers to a sequence"),
        }
    }

    pub(crate) fn dict_mut(&mut self, id: ObjId) -> &mut IndexMap<DictKey, (Value, Value)> {
        match &mut self.objs[id] {
            Obj::Dict(d) => d,
            _ => unreachable!("dict id refers to a sequence"),
        }
    }

    pub(crate) fn key(&self, v: &Value) -> VResult<DictKey> {
        self.key_at(v, 0)
    }

    fn key_at(&self, v: &Value, depth: usize) -> VResult<DictKey> {
        if depth > MAX_VALUE_DEPTH {
            return Err(Exc::new(ErrorKind::Recursion, "maximum recursion depth exceeded"));
        }
        Ok(match v {
            Value::None => DictKey::None,
            Value::Bool(b) => DictKey::Int(*b as i64),
            Value::Int(i) => DictKey::Int(*i),
            Value::Float(f) => {
                if f.fract() == 0.0 && f.abs() < 9.2e18 {
                    DictKey::Int(*f as i64)
                } else {
                    DictKey::Float(f.to_bits())
                }
            }
            Value::Str(s) => DictKey::Str(s.clone()),
            Value::Tuple(id) => {
                DictKey::Tuple(self.list(*id).iter().map(|x| self.key_at(x, depth + 1)).collect::<VResult<_>>()?)
            }
            other => return type_error(format!("unhashable type: '{}'", other.type_name())),
        })
    }

    pub(crate) fn truthy(&self, v: &Value) -> bool {
        match v {
            Value::None => false,
            Value::Bool(b) => *b,
            Value::Int(i) => *i != 0,
            Value::Float(f) => *f != 0.0,
            Value::Str(s) => !s.is_empty(),
            Value::List(id) | Value::Tuple(id) => !self.list(*id).is_empty(),
            Value::Dict(id) => !self.dict(*id).is_empty(),
            Value::Range(r) => r.len() > 0,
            _ => true,
        }
    }

    // ---- formatting -------------------------------------------------------

    pub(crate) fn to_str(&self, v: &Value) -> VResult<String> {
        match v {
            Value::Str(s) => Ok(s.to_string()),
            Value::Exception(e) => Ok(e.message.clone()),
            _ => self.repr(v),
        }
    }

    pub(crate) fn repr(&self, v: &Value) -> VResult<String> {
        let mut out = String::new();
        let mut stack = Vec::new();
        self.repr_into(v, &mut out, &mut stack)?;
        Ok(out)
    }

    fn repr_into(&self, v: &Value, out: &mut String, stack: &mut Vec<ObjId>) -> VResult<()> {
        if out.len() > MAX_STR_LEN {
            return memory_error();
        }
        match v {
            Value::None => out.push_str("None"),
            Value::Bool(true) => out.push_str("True"),
            Value::Bool(false) => out.push_str("False"),
            Value::Int(i) => out.push_str(&i.to_string()),
            Value::Float(f) => out.push_str(&float_repr(*f)),
            Value::Str(s) => out.push_str(&str_repr(s)),
            Value::Range(r) => {
                if r.step == 1 {
                    out.push_str(&format!("range({}, {})", r.start, r.stop));
                } else {
                    out.push_str(&format!("range({}, {}, {})", r.start, r.stop, r.step));
                }
            }
            Value::Function(c) => out.push_str(&format!("<function {}>", c.def.name)),
            Value::Builtin(b) => out.push_str(&format!("<built-in function {}>", b.name())),
            Value::Host(name) => out.push_str(&format!("<built-in function {name}>")),
            Value::Exception(e) => out.push_str(&format!("{}({})", exception_class(e.kind), str_repr(&e.message))),
            Value::List(id) | Value::Tuple(id) | Value::Dict(id) => {
                let (open, close) = match v {
                    Value::List(_) => ("[", "]"),
                    Value::Tuple(_) => ("(", ")"),
                    _ => ("{", "}"),
                };
                if stack.contains(id) {
                    out.push_str(open);
                    out.push_str("...");
                    out.push_str(close);
                    return Ok(());
                }
                if stack.len() >= MAX_VALUE_DEPTH {
                    return Err(Exc::new(
                        ErrorKind::Recursion,
                        "maximum recursion depth exceeded while getting the repr of an object",
                    ));
                }
                stack.push(*id);
                out.push_str(open);
                match self.get(*id) {
                    Obj::List(items) | Obj::Tuple(items) => {
                        for (i, item) in items.iter().enumerate() {
                            if i > 0 {
                                out.push_str(", ");
                            }
                            self.repr_into(item, out, stack)?;
                        }
                        if matches!(v, Value::Tuple(_)) && items.len() == 1 {
                            out.push(',');
                        }
                    }
                    Obj::Dict(map) => {
                        for (i, (k, val)) in map.values().enumerate() {
                            if i > 0 {
                                out.push_str(", ");
                            }
                            self.repr_into(k, out, stack)?;
                            out.push_str(": ");
                            self.repr_into(val, out, stack)?;
                        }
                    }
                }
                out.push_str(close);
                stack.pop();
            }
        }
        Ok(())
    }

    // ---- comparison -------------------------------------------------------

    pub(crate) fn eq(&self, a: &Value, b: &Value) -> VResult<bool> {
        self.eq_at(a, b, 0)
    }

    fn eq_at(&self, a: &Value, b: &Value, depth: usize) -> VResult<bool> {
        if depth > MAX_VALUE_DEPTH {
            return Err(Exc::new(ErrorKind::Recursion, "maximum recursion depth exceeded in comparison"));
        }
        Ok(match (a, b) {
            (Value::None, Value::None) => true,
            (Value::Str(x), Value::Str(y)) => x == y,
            (Value::List(x), Value::List(y)) | (Value::Tuple(x), Value::Tuple(y)) => {
                if x == y {
                    return Ok(true);
                }
                let (xs, ys) = (self.list(*x), self.list(*y));
                if xs.len() != ys.len() {
                    return Ok(false);
                }
                for (p, q) in xs.iter().zip(ys) {
                    if !self.eq_at(p, q, depth + 1)? {
                        return Ok(false);
                    }
                }
                true
            }
            (Value::Dict(x), Value::Dict(y)) => {
                if x == y {
                    return Ok(true);
                }
                let (xs, ys) = (self.dict(*x), self.dict(*y));
                if xs.len() != ys.len() {
                    return Ok(false);
                }
                for (k, (_, v)) in xs {
                    match ys.get(k) {
                        Some((_, w)) if self.eq_at(v, w, depth + 1)? => {}
                        _ => return Ok(false),
                    }
                }
                true
            }
            (Value::Range(x), Value::Range(y)) => {
                let (n, m) = (x.len(), y.len());
                n == m && (n == 0 || (x.start == y.start && (n == 1 || x.step == y.step)))
            }
            (Value::Function(x), Value::Function(y)) => Rc::ptr_eq(x, y),
            (Value::Builtin(x), Value::Builtin(y)) => x == y,
            (Value::Host(x), Value::Host(y)) => x == y,
            (Value::Exception(x), Value::Exception(y)) => Rc::ptr_eq(x, y),
            _ => matches!(num_cmp(a, b), Some(Some(Ordering::Equal))),
        })
    }

    /// Ordering for `<`-style operators; `None` when unordered (NaN).
    pub(crate) fn cmp(&self, a: &Value, b: &Value, op: &str) -> VResult<Option<Ordering>> {
        self.cmp_at(a, b, op, 0)
    }

    fn cmp_at(&self, a: &Value, b: &Value, op: &str, depth: usize) -> VResult<Option<Ordering>> {
        if depth > MAX_VALUE_DEPTH {
            return Err(Exc::new(ErrorKind::Recursion, "maximum recursion depth exceeded in comparison"));
        }
        if let Some(ord) = num_cmp(a, b) {
            return Ok(ord);
        }
        match (a, b) {
            (Value::Str(x), Value::Str(y)) => Ok(Some(x.as_ref().cmp(y.as_ref()))),
            (Value::List(x), Value::List(y)) | (Value::Tuple(x), Value::Tuple(y)) => {
                let (xs, ys) = (self.list(*x), self.list(*y));
                for (p, q) in xs.iter().zip(ys) {
                    if !self.eq_at(p, q, depth + 1)? {
                        return self.cmp_at(p, q, op, depth + 1);
                    }
                }
                Ok(Some(xs.len().cmp(&ys.len())))
            }
            _ => type_error(format!(
                "'{op}' not supported between instances of '{}' and '{}'",
                a.type_name(),
                b.type_name()
            )),
        }
    }
}

fn exception_class(kind: ErrorKind) -> &'static str {
    match kind {
        ErrorKind::Name => "NameError",
        ErrorKind::Type => "TypeError",
        ErrorKind::Attribute => "AttributeError",
        ErrorKind::Host => "HostError",
        ErrorKind::ZeroDivision => "ZeroDivisionError",
        ErrorKind::Index => "IndexError",
        ErrorKind::Key => "KeyError",
        ErrorKind::Value => "ValueError",
        ErrorKind::Overflow => "OverflowError",
        ErrorKind::Memory => "MemoryError",
        ErrorKind::Recursion => "RecursionError",
    }
}

/// Numeric comparison across bool, int and float. Outer `None` means the
/// operands are not both numeric; inner `None` means unordered.
pub(crate) fn num_cmp(a: &Value, b: &Value) -> Option<Option<Ordering>> {
    let num = |v: &Value| match v {
        Value::Bool(x) => Some(Err(*x as i64)),
        Value::Int(x) => Some(Err(*x)),
        Value::Float(f) => Some(Ok(*f)),
        _ => None,
    };
    Some(match (num(a)?, num(b)?) {
        (Err(x), Err(y)) => Some(x.cmp(&y)),
        (Ok(x), Ok(y)) => x.partial_cmp(&y),
        (Err(x), Ok(y)) => int_float_cmp(x, y),
        (Ok(x), Err(y)) => int_float_cmp(y, x).map(Ordering::reverse),
    })
}

/// Exact comparison of an integer with a float.
fn int_float_cmp(i: i64, f: f64) -> Option<Ordering> {
    if f.is_nan() {
        return None;
    }
    if f >= 9.3e18 {
        return Some(Ordering::Less);
    }
    if f < -9.3e18 {
        return Some(Ordering::Greater);
    }
    let fl = f.floor();
    let fi = fl as i64;
    Some(match i.cmp(&fi) {
        Ordering::Equal if f > fl => Ordering::Less,
        other => other,
    })
}

/// Shortest round-trip float formatting in the object language's style:
/// `1.0`, `0.1`, `1e+16`, `1.5e-05`.
pub fn float_repr(f: f64) -> String {
    if f.is_nan() {
        return "nan".into();
    }
    if f.is_infinite() {
        return if f > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if f == 0.0 {
        return if f.is_sign_negative() { "-0.0".into() } else { "0.0".into() };
    }
    let sci = format!("{:e}", f.abs());
    let (mantissa, exp) = sci.split_once('e').expect("LowerExp output has an exponent");
    let exp: i32 = exp.parse().expect("LowerExp exponent is an integer");
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let decpt = exp + 1;
    let body = if decpt <= -4 || decpt > 16 {
        let mut m = digits[..1].to_string();
        if digits.len() > 1 {
            m.push('.');
            m.push_str(&digits[1..]);
        }
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    } else if decpt <= 0 {
        format!("0.{}{}", "0".repeat((-decpt) as usize), digits)
    } else if decpt as usize >= digits.len() {
        format!("{}{}.0", digits, "0".repeat(decpt as usize - digits.len()))
    } else {
        format!("{}.{}", &digits[..decpt as usize], &digits[decpt as usize..])
    };
    if f < 0.0 {
        format!("-{body}")
    } else {
        body
    }
}

/// Quoted representation of a string, choosing quotes the way the object
/// language does.
pub fn str_repr(s: &str) -> String {
    let quote = if s.contains('\'') && !s.contains('"') { '"' } else { '\'' };
    let mut out = String::with_capacity(s.len() + 2);
    out.push(quote);
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if c == quote => {
                out.push('\\');
                out.push(c);
            }
            c if (c as u32) < 0x20 || (0x7f..0xa0).contains(&(c as u32)) => {
                out.push_str(&format!("\\x{:02x}", c as u32))
            }
            c => out.push(c),
        }
    }
    out.push(quote);
    out
}
