//! List built-ins: `matching`, `between`, `sort`, `sum`, `average`, `count`.
//!
//! Every function here is handed the receiver elements together with the
//! already-extracted field value ("key") of each element. An unset optional
//! field has key `Void`: it never matches, never lies between bounds, sorts
//! last in either direction and is skipped by `sum`/`average`.

use std::cmp::Ordering;

use serde::Serialize;

use super::EvalError;
use crate::dsl::SourceSpan;
use crate::registry::normalize;
use crate::types::TypeRef;
use crate::value::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Builtin {
    Matching,
    Between,
    Sort,
    Sum,
    Average,
    Count,
}

pub const BUILTIN_NAMES: [&str; 6] = ["matching", "between", "sort", "sum", "average", "count"];

impl Builtin {
    pub const ALL: [Builtin; 6] = [
        Builtin::Matching,
        Builtin::Between,
        Builtin::Sort,
        Builtin::Sum,
        Builtin::Average,
        Builtin::Count,
    ];

    pub fn from_name(name: &str) -> Option<Builtin> {
        let wanted = normalize(name);
        Builtin::ALL.into_iter().find(|b| b.name() == wanted)
    }

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Matching => "matching",
            Builtin::Between => "between",
            Builtin::Sort => "sort",
            Builtin::Sum => "sum",
            Builtin::Average => "average",
            Builtin::Count => "count",
        }
    }

    /// Parameter names in binding order.
    pub fn params(self) -> &'static [&'static str] {
        match self {
            Builtin::Matching => &["field", "value"],
            Builtin::Between => &["field", "from", "to"],
            Builtin::Sort => &["field", "ascending"],
            Builtin::Sum | Builtin::Average => &["field"],
            Builtin::Count => &[],
        }
    }

    /// Swift-like signature for element type `T`, as shown in prompts.
    pub fn signature(self) -> &'static str {
        match self {
            Builtin::Matching => "func matching(field: FieldPath<T>, value: Any) -> [T]",
            Builtin::Between => "func between(field: FieldPath<T>, from: Any, to: Any) -> [T]",
            Builtin::Sort => "func sort(field: FieldPath<T>, ascending: Bool = true) -> [T]",
            Builtin::Sum => "func sum(field: FieldPath<T>) -> Float",
            Builtin::Average => "func average(field: FieldPath<T>) -> Float",
            Builtin::Count => "func count() -> Int",
        }
    }

    pub fn exemplar(self) -> &'static str {
        match self {
            Builtin::Matching => "items whose field equals a value: matching(field: .cuisine, value: \"Mexican\")",
            Builtin::Between => "items with a field in a range, bounds included: between(field: .price, from: 0, to: 5)",
            Builtin::Sort => "order items by a field: sort(field: .price, ascending: false)",
            Builtin::Sum => "total of a numeric field: sum(field: .price)",
            Builtin::Average => "mean of a numeric field: average(field: .price)",
            Builtin::Count => "how many items: count()",
        }
    }
}

fn overflow(span: SourceSpan) -> EvalError {
    EvalError::Execution {
        step: "sum".into(),
        code: "Overflow".into(),
        message: "integer sum overflows".into(),
        span,
    }
}

pub fn matching(items: Vec<Value>, keys: &[Value], value: &Value) -> Vec<Value> {
    items
        .into_iter()
        .zip(keys)
        .filter(|(_, k)| !k.is_void() && k.loosely_equals(value))
        .map(|(item, _)| item)
        .collect()
}

pub fn between(items: Vec<Value>, keys: &[Value], from: &Value, to: &Value) -> Vec<Value> {
    items
        .into_iter()
        .zip(keys)
        .filter(|(_, k)| {
            matches!(k.compare(from), Some(Ordering::Greater | Ordering::Equal))
                && matches!(k.compare(to), Some(Ordering::Less | Ordering::Equal))
        })
        .map(|(item, _)| item)
        .collect()
}

pub fn sort(items: Vec<Value>, keys: &[Value], ascending: bool) -> Vec<Value> {
    let mut paired: Vec<(Value, &Value)> = items.into_iter().zip(keys).collect();
    paired.sort_by(|(_, a), (_, b)| match (a.is_void(), b.is_void()) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Greater,
        (false, true) => Ordering::Less,
        (false, false) => {
            let ord = a.compare(b).unwrap_or(Ordering::Equal);
            if ascending {
                ord
            } else {
                ord.reverse()
            }
        }
    });
    paired.into_iter().map(|(item, _)| item).collect()
}

/// Sum of the keys; `ty` is the field type, which fixes the type of an empty
/// sum.
pub fn sum(keys: &[Value], ty: &TypeRef, span: SourceSpan) -> Result<Value, EvalError> {
    if *ty == TypeRef::Integer {
        let mut total: i64 = 0;
        for k in keys {
            if let Value::Int(v) = k {
                total = total.checked_add(*v).ok_or_else(|| overflow(span))?;
            }
        }
        Ok(Value::Int(total))
    } else {
        Ok(Value::Float(keys.iter().filter_map(Value::as_f64).sum()))
    }
}

pub fn average(keys: &[Value], span: SourceSpan) -> Result<Value, EvalError> {
    let present: Vec<f64> = keys.iter().filter_map(Value::as_f64).collect();
    if present.is_empty() {
        return Err(EvalError::EmptyAggregate { span });
    }
    let total: f64 = present.iter().sum();
    Ok(Value::Float(total / present.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(v: &[i64]) -> Vec<Value> {
        v.iter().map(|i| Value::Int(*i)).collect()
    }

    #[test]
    fn names_resolve() {
        for name in BUILTIN_NAMES {
            assert_eq!(Builtin::from_name(name).unwrap().name(), name);
        }
        assert_eq!(Builtin::from_name("Count"), Some(Builtin::Count));
        assert_eq!(Builtin::from_name("filter"), None);
    }

    #[test]
    fn between_is_inclusive() {
        let keys = vec![Value::Float(2.0), Value::Float(6.0), Value::Float(5.0)];
        let items = ints(&[0, 1, 2]);
        assert_eq!(
            between(items, &keys, &Value::Int(0), &Value::Int(5)),
            ints(&[0, 2])
        );
    }

    #[test]
    fn sort_is_stable_both_ways() {
        let keys = ints(&[2, 1, 2, 1]);
        let items = ints(&[10, 11, 12, 13]);
        assert_eq!(sort(items.clone(), &keys, true), ints(&[11, 13, 10, 12]));
        assert_eq!(sort(items, &keys, false), ints(&[10, 12, 11, 13]));
    }

    #[test]
    fn void_keys() {
        let keys = vec![Value::Void, Value::Int(1)];
        let items = ints(&[0, 1]);
        assert_eq!(sort(items.clone(), &keys, true), ints(&[1, 0]));
        assert_eq!(sort(items.clone(), &keys, false), ints(&[1, 0]));
        assert_eq!(matching(items, &keys, &Value::Void), Vec::<Value>::new());
        assert_eq!(average(&keys, SourceSpan::default()), Ok(Value::Float(1.0)));
    }

    #[test]
    fn empty_aggregates() {
        let span = SourceSpan::default();
        assert_eq!(sum(&[], &TypeRef::Float, span), Ok(Value::Float(0.0)));
        assert_eq!(sum(&[], &TypeRef::Integer, span), Ok(Value::Int(0)));
        assert_eq!(average(&[], span), Err(EvalError::EmptyAggregate { span }));
        assert!(sum(&ints(&[i64::MAX, 1]), &TypeRef::Integer, span).is_err());
    }

    #[test]
    fn matching_ignores_case() {
        let keys = vec![Value::Str("Taco Bell".into()), Value::Str("Subway".into())];
        assert_eq!(
            matching(ints(&[0, 1]), &keys, &Value::Str("taco bell".into())),
            ints(&[0])
        );
    }
}
