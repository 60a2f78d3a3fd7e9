//! Whitelisted builtin functions and value methods.

use super::eval::{EResult, Interp};
use super::value::*;

fn arg_error<T>(message: String) -> EResult<T> {
    Err(Exc::new(ErrorKind::Type, message).into())
}

/// Binds positional and keyword arguments onto named parameters.
/// `kw_ok` lists the parameters that may be passed by keyword.
fn bind(
    fname: &str,
    params: &[&str],
    required: usize,
    kw_ok: &[&str],
    args: Vec<Value>,
    kwargs: Vec<(String, Value)>,
) -> EResult<Vec<Option<Value>>> {
    if args.len() > params.len() {
        return arg_error(format!(
            "{fname}() takes at most {} argument{} ({} given)",
            params.len(),
            if params.len() == 1 { "" } else { "s" },
            args.len()
        ));
    }
    let mut slots: Vec<Option<Value>> = args.into_iter().map(Some).collect();
    slots.resize(params.len(), None);
    for (k, v) in kwargs {
        if !kw_ok.contains(&k.as_str()) {
            if kw_ok.is_empty() {
                return arg_error(format!("{fname}() takes no keyword arguments"));
            }
            return arg_error(format!("{fname}() got an unexpected keyword argument '{k}'"));
        }
        let idx = params.iter().position(|p| *p == k).expect("keyword names are parameters");
        if slots[idx].is_some() {
            return arg_error(format!("{fname}() got multiple values for argument '{k}'"));
        }
        slots[idx] = Some(v);
    }
    if let Some(i) = slots[..required].iter().position(Option::is_none) {
        return arg_error(format!("{fname}() missing required argument '{}' (pos {})", params[i], i + 1));
    }
    Ok(slots)
}

fn expect_str<'v>(fname: &str, v: &'v Value) -> EResult<&'v str> {
    match v {
        Value::Str(s) => Ok(s),
        other => arg_error(format!("{fname}() argument must be str, not {}", other.type_name())),
    }
}

fn optional_str<'v>(fname: &str, v: &'v Option<Value>) -> EResult<Option<&'v str>> {
    match v {
        None | Some(Value::None) => Ok(None),
        Some(v) => expect_str(fname, v).map(Some),
    }
}

fn optional_int(fname: &str, v: &Option<Value>, default: i64) -> EResult<i64> {
    match v {
        None => Ok(default),
        Some(v) => v.as_index().ok_or_else(|| {
            Exc::new(
                ErrorKind::Type,
                format!("{fname}(): '{}' object cannot be interpreted as an integer", v.type_name()),
            )
            .into()
        }),
    }
}

impl Interp<'_> {
    pub(crate) fn call_builtin(
        &mut self,
        b: Builtin,
        args: Vec<Value>,
        kwargs: Vec<(String, Value)>,
    ) -> EResult<Value> {
        let name = b.name();
        if !kwargs.is_empty() {
            return arg_error(format!("{name}() takes no keyword arguments"));
        }
        match b {
            Builtin::Len => {
                if args.len() != 1 {
                    return arg_error(format!("len() takes exactly one argument ({} given)", args.len()));
                }
                let n = match &args[0] {
                    Value::Str(s) => s.chars().count(),
                    Value::List(id) | Value::Tuple(id) => self.heap.list(*id).len(),
                    Value::Dict(id) => self.heap.dict(*id).len(),
                    Value::Range(r) => r.len(),
                    other => return arg_error(format!("object of type '{}' has no len()", other.type_name())),
                };
                i64::try_from(n).map(Value::Int).map_err(|_| overflow::<()>().unwrap_err().into())
            }
            Builtin::Range => {
                if args.is_empty() || args.len() > 3 {
                    let bound = if args.is_empty() { "at least 1" } else { "at most 3" };
                    return arg_error(format!("range expected {bound} arguments, got {}", args.len()));
                }
                let mut ints = Vec::with_capacity(3);
                for a in &args {
                    match a.as_index() {
                        Some(i) => ints.push(i),
                        None => {
                            return arg_error(format!("'{}' object cannot be interpreted as an integer", a.type_name()))
                        }
                    }
                }
                let (start, stop, step) = match ints[..] {
                    [stop] => (0, stop, 1),
                    [start, stop] => (start, stop, 1),
                    [start, stop, step] => (start, stop, step),
                    _ => unreachable!(),
                };
                if step == 0 {
                    return Err(Exc::new(ErrorKind::Value, "range() arg 3 must not be zero").into());
                }
                Ok(Value::Range(RangeVal { start, stop, step }))
            }
            Builtin::Str => match args.len() {
                0 => Ok(Value::str("")),
                1 => {
                    let s = self.heap.to_str(&args[0])?;
                    Ok(self.heap.new_str(s)?)
                }
                n => arg_error(format!("str() takes at most 1 argument ({n} given)")),
            },
            Builtin::Int => match args.len() {
                0 => Ok(Value::Int(0)),
                1 => Ok(Value::Int(to_int(&args[0])?)),
                2 => {
                    let Value::Str(s) = &args[0] else {
                        return arg_error("int() can't convert non-string with explicit base".into());
                    };
                    let base =
                        args[1].as_index().ok_or_else(|| Exc::new(ErrorKind::Type, "'base' must be an integer"))?;
                    if !(base == 0 || (2..=36).contains(&base)) {
                        return Err(Exc::new(ErrorKind::Value, "int() base must be >= 2 and <= 36, or 0").into());
                    }
                    Ok(Value::Int(parse_int(s, base as u32)?))
                }
                n => arg_error(format!("int() takes at most 2 arguments ({n} given)")),
            },
            Builtin::Float => match args.len() {
                0 => Ok(Value::Float(0.0)),
                1 => Ok(Value::Float(to_float(&args[0])?)),
                n => arg_error(format!("float expected at most 1 argument, got {n}")),
            },
        }
    }

    pub(crate) fn call_method(
        &mut self,
        receiver: Value,
        method: &str,
        args: Vec<Value>,
        kwargs: Vec<(String, Value)>,
    ) -> EResult<Value> {
        match (&receiver, method) {
            (Value::Str(s), _) => self.str_method(s.clone(), method, args, kwargs),
            (Value::List(id), "append") => {
                let [item] = take::<1>(bind("append", &["object"], 1, &[], args, kwargs)?);
                let len = self.heap.list(*id).len() + 1;
                self.heap.check_len(len)?;
                self.heap.charge_cells(1)?;
                self.heap.list_mut(*id).push(item.unwrap());
                Ok(Value::None)
            }
            (Value::List(id), "extend") => {
                let [source] = take::<1>(bind("extend", &["iterable"], 1, &[], args, kwargs)?);
                self.extend_list(*id, &source.unwrap())?;
                Ok(Value::None)
            }
            (Value::Dict(id), "get") => {
                let [key, default] = take::<2>(bind("get", &["key", "default"], 1, &[], args, kwargs)?);
                let hk = self.heap.key(&key.unwrap())?;
                Ok(match self.heap.dict(*id).get(&hk) {
                    Some((_, v)) => v.clone(),
                    None => default.unwrap_or(Value::None),
                })
            }
            (Value::Dict(id), "keys") => {
                bind("keys", &[], 0, &[], args, kwargs)?;
                let keys: Vec<Value> = self.heap.dict(*id).values().map(|(k, _)| k.clone()).collect();
                Ok(self.heap.new_list(keys)?)
            }
            (Value::Dict(id), "items") => {
                bind("items", &[], 0, &[], args, kwargs)?;
                let pairs: Vec<(Value, Value)> = self.heap.dict(*id).values().cloned().collect();
                let mut out = Vec::with_capacity(pairs.len());
                for (k, v) in pairs {
                    out.push(self.heap.new_tuple(vec![k, v])?);
                }
                Ok(self.heap.new_list(out)?)
            }
            _ => Err(Exc::new(
                ErrorKind::Attribute,
                format!("'{}' object has no attribute '{method}'", receiver.type_name()),
            )
            .into()),
        }
    }

    fn str_method(
        &mut self,
        s: std::sync::Arc<str>,
        method: &str,
        args: Vec<Value>,
        kwargs: Vec<(String, Value)>,
    ) -> EResult<Value> {
        match method {
            "split" => {
                let [sep, maxsplit] =
                    take::<2>(bind("split", &["sep", "maxsplit"], 0, &["sep", "maxsplit"], args, kwargs)?);
                let sep = optional_str("split", &sep)?;
                let maxsplit = optional_int("split", &maxsplit, -1)?;
                let parts = py_split(&s, sep, maxsplit)?;
                let items = parts.into_iter().map(Value::str).collect();
                Ok(self.heap.new_list(items)?)
            }
            "join" => {
                let [iterable] = take::<1>(bind("join", &["iterable"], 1, &[], args, kwargs)?);
                let items = self.collect(&iterable.unwrap())?;
                let mut pieces = Vec::with_capacity(items.len());
                for (i, item) in items.iter().enumerate() {
                    match item {
                        Value::Str(p) => pieces.push(p.clone()),
                        other => {
                            return arg_error(format!(
                                "sequence item {i}: expected str instance, {} found",
                                other.type_name()
                            ))
                        }
                    }
                }
                let total = pieces.iter().map(|p| p.len()).sum::<usize>()
                    + s.len().saturating_mul(pieces.len().saturating_sub(1));
                self.heap.charge_str(total)?;
                let refs: Vec<&str> = pieces.iter().map(|p| p.as_ref()).collect();
                Ok(Value::str(refs.join(&s)))
            }
            "strip" => {
                let [chars] = take::<1>(bind("strip", &["chars"], 0, &[], args, kwargs)?);
                let out = match optional_str("strip", &chars)? {
                    None => s.trim_matches(char::is_whitespace),
                    Some(set) => s.trim_matches(|c| set.contains(c)),
                };
                Ok(Value::str(out))
            }
            "lower" | "upper" => {
                bind(method, &[], 0, &[], args, kwargs)?;
                let out = if method == "lower" { s.to_lowercase() } else { s.to_uppercase() };
                Ok(self.heap.new_str(out)?)
            }
            "startswith" | "endswith" => {
                let [prefix] = take::<1>(bind(method, &["prefix"], 1, &[], args, kwargs)?);
                let prefix = prefix.unwrap();
                let candidates: Vec<Value> = match &prefix {
                    Value::Str(_) => vec![prefix.clone()],
                    Value::Tuple(id) => self.heap.list(*id).clone(),
                    other => {
                        return arg_error(format!(
                            "{method} first arg must be str or a tuple of str, not {}",
                            other.type_name()
                        ))
                    }
                };
                for c in &candidates {
                    let Value::Str(p) = c else {
                        return arg_error(format!("tuple for {method} must only contain str, not {}", c.type_name()));
                    };
                    let hit = if method == "startswith" { s.starts_with(p.as_ref()) } else { s.ends_with(p.as_ref()) };
                    if hit {
                        return Ok(Value::Bool(true));
                    }
                }
                Ok(Value::Bool(false))
            }
            "replace" => {
                let [old, new, count] =
                    take::<3>(bind("replace", &["old", "new", "count"], 2, &["count"], args, kwargs)?);
                let old = expect_str("replace", old.as_ref().unwrap())?.to_string();
                let new = expect_str("replace", new.as_ref().unwrap())?.to_string();
                let count = optional_int("replace", &count, -1)?;
                let occurrences = if old.is_empty() { s.chars().count() + 1 } else { s.matches(old.as_str()).count() };
                let n = if count < 0 { occurrences } else { occurrences.min(count as usize) };
                let estimate = s.len() + n.saturating_mul(new.len());
                self.heap.charge_str(estimate)?;
                let out = if count < 0 { s.replace(old.as_str(), &new) } else { s.replacen(old.as_str(), &new, n) };
                Ok(Value::str(out))
            }
            "format" => {
                let out = self.format_string(&s, &args, &kwargs)?;
                Ok(self.heap.new_str(out)?)
            }
            _ => Err(Exc::new(ErrorKind::Attribute, format!("'str' object has no attribute '{method}'")).into()),
        }
    }

    fn format_string(&mut self, template: &str, args: &[Value], kwargs: &[(String, Value)]) -> EResult<String> {
        let mut out = String::new();
        let mut chars = template.chars().peekable();
        let mut auto = 0usize;
        let mut manual = false;
        let mut automatic = false;
        while let Some(c) = chars.next() {
            match c {
                '{' if chars.peek() == Some(&'{') => {
                    chars.next();
                    out.push('{');
                }
                '}' if chars.peek() == Some(&'}') => {
                    chars.next();
                    out.push('}');
                }
                '}' => return Err(Exc::new(ErrorKind::Value, "Single '}' encountered in format string").into()),
                '{' => {
                    let mut field = String::new();
                    loop {
                        match chars.next() {
                            Some('}') => break,
                            Some('{') | None => {
                                return Err(Exc::new(ErrorKind::Value, "Single '{' encountered in format string").into())
                            }
                            Some(ch) => field.push(ch),
                        }
                    }
                    if field.contains([':', '!', '.', '[']) {
                        return Err(Exc::new(ErrorKind::Value, "format specifications are not supported").into());
                    }
                    let value = if field.is_empty() {
                        if manual {
                            return Err(Exc::new(
                                ErrorKind::Value,
                                "cannot switch from manual field specification to automatic field numbering",
                            )
                            .into());
                        }
                        automatic = true;
                        let v = args.get(auto).cloned();
                        auto += 1;
                        v.ok_or_else(|| {
                            Exc::new(
                                ErrorKind::Index,
                                format!("Replacement index {} out of range for positional args tuple", auto - 1),
                            )
                        })?
                    } else if let Ok(idx) = field.parse::<usize>() {
                        if automatic {
                            return Err(Exc::new(
                                ErrorKind::Value,
                                "cannot switch from automatic field numbering to manual field specification",
                            )
                            .into());
                        }
                        manual = true;
                        args.get(idx).cloned().ok_or_else(|| {
                            Exc::new(
                                ErrorKind::Index,
                                format!("Replacement index {idx} out of range for positional args tuple"),
                            )
                        })?
                    } else {
                        kwargs
                            .iter()
                            .find(|(k, _)| *k == field)
                            .map(|(_, v)| v.clone())
                            .ok_or_else(|| Exc::new(ErrorKind::Key, format!("'{field}'")))?
                    };
                    out.push_str(&self.heap.to_str(&value)?);
                    if out.len() > MAX_STR_LEN {
                        self.heap.charge_str(out.len())?;
                    }
                }
                other => out.push(other),
            }
        }
        Ok(out)
    }
}

fn take<const N: usize>(slots: Vec<Option<Value>>) -> [Option<Value>; N] {
    slots.try_into().unwrap_or_else(|_| unreachable!("bind returns one slot per parameter"))
}

pub(crate) fn py_split(s: &str, sep: Option<&str>, maxsplit: i64) -> VResult<Vec<String>> {
    match sep {
        Some("") => value_error("empty separator"),
        Some(sep) => Ok(if maxsplit < 0 {
            s.split(sep).map(str::to_string).collect()
        } else {
            s.splitn(maxsplit.saturating_add(1) as usize, sep).map(str::to_string).collect()
        }),
        None => {
            let mut out = Vec::new();
            let mut rest = s.trim_start_matches(char::is_whitespace);
            let mut remaining = maxsplit;
            while !rest.is_empty() {
                if remaining == 0 {
                    out.push(rest.to_string());
                    break;
                }
                let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
                out.push(rest[..end].to_string());
                rest = rest[end..].trim_start_matches(char::is_whitespace);
                remaining -= 1;
            }
            Ok(out)
        }
    }
}

pub(crate) fn to_int(v: &Value) -> VResult<i64> {
    match v {
        Value::Int(i) => Ok(*i),
        Value::Bool(b) => Ok(*b as i64),
        Value::Float(f) => {
            if f.is_nan() {
                return value_error("cannot convert float NaN to integer");
            }
            if f.is_infinite() {
                return Err(Exc::new(ErrorKind::Overflow, "cannot convert float infinity to integer"));
            }
            let t = f.trunc();
            if !(-9.223_372_036_854_776e18..9.223_372_036_854_776e18).contains(&t) {
                return overflow();
            }
            Ok(t as i64)
        }
        Value::Str(s) => parse_int(s, 10),
        other => type_error(format!(
            "int() argument must be a string, a bytes-like object or a real number, not '{}'",
            other.type_name()
        )),
    }
}

fn parse_int(text: &str, base: u32) -> VResult<i64> {
    let invalid =
        || Exc::new(ErrorKind::Value, format!("invalid literal for int() with base {base}: {}", str_repr(text)));
    let t = text.trim();
    let (neg, body) = match t.as_bytes().first() {
        Some(b'-') => (true, &t[1..]),
        Some(b'+') => (false, &t[1..]),
        _ => (false, t),
    };
    let lower = body.to_ascii_lowercase();
    let (base, digits) = match (base, lower.get(..2)) {
        (16 | 0, Some("0x")) => (16, &body[2..]),
        (8 | 0, Some("0o")) => (8, &body[2..]),
        (2 | 0, Some("0b")) => (2, &body[2..]),
        (0, _) => (10, body),
        (b, _) => (b, body),
    };
    let digits = digits.strip_prefix('_').filter(|_| base != 10).unwrap_or(digits);
    if digits.is_empty()
        || digits.starts_with('_')
        || digits.ends_with('_')
        || digits.contains("__")
        || !digits.chars().all(|c| c == '_' || c.is_ascii_alphanumeric())
    {
        return Err(invalid());
    }
    let clean: String = digits.chars().filter(|c| *c != '_').collect();
    let magnitude = u64::from_str_radix(&clean, base).map_err(|e| match e.kind() {
        std::num::IntErrorKind::PosOverflow => Exc::new(ErrorKind::Overflow, "integer result out of range"),
        _ => invalid(),
    })?;
    if neg {
        if magnitude == 1 << 63 {
            return Ok(i64::MIN);
        }
        i64::try_from(magnitude).map(|m| -m).map_err(|_| overflow::<()>().unwrap_err())
    } else {
        i64::try_from(magnitude).map_err(|_| overflow::<()>().unwrap_err())
    }
}

pub(crate) fn to_float(v: &Value) -> VResult<f64> {
    match v {
        Value::Int(i) => Ok(*i as f64),
        Value::Bool(b) => Ok(*b as i64 as f64),
        Value::Float(f) => Ok(*f),
        Value::Str(s) => {
            let t = s.trim();
            let ok_chars = t.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '+' | '-' | '_'));
            let clean: String = t.chars().filter(|c| *c != '_').collect();
            let underscores_ok = !t.contains('_')
                || t.split('_').all(|part| part.chars().last().is_some_and(|c| c.is_ascii_digit()) || part.is_empty())
                    && !t.starts_with('_')
                    && !t.ends_with('_')
                    && !t.contains("__");
            match (ok_chars && underscores_ok).then(|| clean.parse::<f64>()) {
                Some(Ok(f)) => Ok(f),
                _ => value_error(format!("could not convert string to float: {}", str_repr(s))),
            }
        }
        other => type_error(format!("float() argument must be a string or a real number, not '{}'", other.type_name())),
    }
}
