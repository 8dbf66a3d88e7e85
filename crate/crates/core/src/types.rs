use std::fmt;

use serde::{Deserialize, Serialize};

use crate::value::Value;

/// Static type of a property, parameter or expression.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TypeRef {
    Boolean,
    Integer,
    Float,
    String,
    Void,
    Class(String),
    ListOf(Box<TypeRef>),
    /// A leading-dot accessor rooted at the named class.
    FieldPath(String),
}

impl TypeRef {
    pub fn class(name: impl Into<String>) -> Self {
        TypeRef::Class(name.into())
    }

    pub fn list_of(inner: TypeRef) -> Self {
        TypeRef::ListOf(Box::new(inner))
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, TypeRef::Integer | TypeRef::Float)
    }

    pub fn element(&self) -> Option<&TypeRef> {
        match self {
            TypeRef::ListOf(inner) => Some(inner),
            _ => None,
        }
    }

    pub fn class_name(&self) -> Option<&str> {
        match self {
            TypeRef::Class(name) => Some(name),
            _ => None,
        }
    }

    /// Whether a value of type `self` may be passed where `target` is
    /// expected. Integers widen to floats, element-wise through lists.
    pub fn assignable_to(&self, target: &TypeRef) -> bool {
        match (self, target) {
            (a, b) if a == b => true,
            (TypeRef::Integer, TypeRef::Float) => true,
            (TypeRef::ListOf(a), TypeRef::ListOf(b)) => a.assignable_to(b),
            _ => false,
        }
    }

    /// Least common type of two array elements, if any.
    pub fn unify(&self, other: &TypeRef) -> Option<TypeRef> {
        if self.assignable_to(other) {
            Some(other.clone())
        } else if other.assignable_to(self) {
            Some(self.clone())
        } else {
            None
        }
    }

    /// Check `value` against this type, widening integers where a float is
    /// expected. Returns the value to store.
    pub fn coerce(&self, value: &Value) -> Option<Value> {
        match (self, value) {
            (TypeRef::Boolean, Value::Bool(_))
            | (TypeRef::Integer, Value::Int(_))
            | (TypeRef::Float, Value::Float(_))
            | (TypeRef::String, Value::Str(_))
            | (TypeRef::Void, Value::Void) => Some(value.clone()),
            (TypeRef::Float, Value::Int(v)) => Some(Value::Float(*v as f64)),
            (TypeRef::Class(c), Value::Instance(r)) if *c == r.class => Some(value.clone()),
            (TypeRef::Class(c), Value::DateTime(_)) if c == crate::datetime::CLASS => {
                Some(value.clone())
            }
            (TypeRef::FieldPath(_), Value::FieldPath(_)) => Some(value.clone()),
            (TypeRef::ListOf(inner), Value::Array(items)) => items
                .iter()
                .map(|item| inner.coerce(item))
                .collect::<Option<Vec<_>>>()
                .map(Value::Array),
            _ => None,
        }
    }

    /// Class names this type mentions.
    pub fn referenced_class(&self) -> Option<&str> {
        match self {
            TypeRef::Class(name) | TypeRef::FieldPath(name) => Some(name),
            TypeRef::ListOf(inner) => inner.referenced_class(),
            _ => None,
        }
    }
}

/// Swift-like spelling used in prompts and error messages.
impl fmt::Display for TypeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeRef::Boolean => f.write_str("Bool"),
            TypeRef::Integer => f.write_str("Int"),
            TypeRef::Float => f.write_str("Float"),
            TypeRef::String => f.write_str("String"),
            TypeRef::Void => f.write_str("Void"),
            TypeRef::Class(name) => f.write_str(name),
            TypeRef::ListOf(inner) => write!(f, "[{inner}]"),
            TypeRef::FieldPath(class) => write!(f, "FieldPath<{class}>"),
        }
    }
}
