//! Type checking and evaluation of commands.

mod builtins;
mod eval;
mod typeck;

use std::fmt;

use serde::Serialize;

use crate::dsl::SourceSpan;
use crate::registry::FunctionDescriptor;
use crate::types::TypeRef;
use crate::value::Value;

pub use builtins::{Builtin, BUILTIN_NAMES};
pub use eval::{evaluate, EvalContext};
pub use typeck::type_check;

#[derive(Clone, Debug)]
pub struct TypedExpr {
    pub kind: TypedKind,
    pub ty: TypeRef,
    pub span: SourceSpan,
}

#[derive(Clone, Debug)]
pub enum TypedKind {
    Literal(Value),
    Array(Vec<TypedExpr>),
    /// Accessor bound to `root`; evaluates to a field path value.
    FieldPath { root: String, path: Vec<String> },
    /// A chain; the leading class name (if any) is folded into the first op.
    Chain(Vec<TypedStep>),
}

#[derive(Clone, Debug)]
pub struct TypedStep {
    pub op: StepOp,
    pub ty: TypeRef,
    pub span: SourceSpan,
    /// Canonical text of the chain up to and including this step.
    pub label: String,
}

#[derive(Clone, Debug)]
pub enum StepOp {
    /// Static function on `class`, including synthesized `Get` and `Current`.
    Static {
        class: String,
        function: Box<FunctionDescriptor>,
        args: Vec<TypedArg>,
    },
    Method {
        class: String,
        function: Box<FunctionDescriptor>,
        args: Vec<TypedArg>,
    },
    Property { class: String, property: String },
    Builtin { builtin: Builtin, args: Vec<TypedArg> },
    Index(i64),
}

/// One declared parameter and what fills it.
#[derive(Clone, Debug)]
pub struct TypedArg {
    pub param: String,
    pub ty: TypeRef,
    pub value: ArgValue,
}

#[derive(Clone, Debug)]
pub enum ArgValue {
    Given(TypedExpr),
    Default(Value),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceEntry {
    pub step: String,
    pub value: Value,
    pub ty: TypeRef,
}

/// What each evaluated chain step returned; the last entry is the result.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ExecutionTrace {
    entries: Vec<TraceEntry>,
}

impl ExecutionTrace {
    pub fn from_entries(entries: Vec<TraceEntry>) -> Self {
        ExecutionTrace { entries }
    }

    pub fn entries(&self) -> &[TraceEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last(&self) -> Option<&TraceEntry> {
        self.entries.last()
    }

    pub(crate) fn push(&mut self, step: &str, value: Value, ty: &TypeRef) {
        self.entries.push(TraceEntry {
            step: step.to_string(),
            value,
            ty: ty.clone(),
        });
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TypeErrorKind {
    UnknownClass(String),
    UnknownMember { owner: String, member: String },
    ParamNameMismatch {
        function: String,
        name: String,
        expected: Vec<String>,
    },
    MissingParam { function: String, param: String },
    TypeMismatch {
        expected: String,
        found: String,
        context: String,
    },
    IndexOnNonList(String),
    FieldNotOnClass { class: String, field: String },
    NonNumericAggregate { builtin: String, field_type: String },
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{kind} at {span}")]
pub struct TypeError {
    pub kind: TypeErrorKind,
    pub span: SourceSpan,
}

impl TypeError {
    pub fn new(kind: TypeErrorKind, span: SourceSpan) -> Self {
        TypeError { kind, span }
    }

    pub fn code(&self) -> &'static str {
        match self.kind {
            TypeErrorKind::UnknownClass(_) => "UnknownClass",
            TypeErrorKind::UnknownMember { .. } => "UnknownMember",
            TypeErrorKind::ParamNameMismatch { .. } => "ParamNameMismatch",
            TypeErrorKind::MissingParam { .. } => "MissingParam",
            TypeErrorKind::TypeMismatch { .. } => "TypeMismatch",
            TypeErrorKind::IndexOnNonList(_) => "IndexOnNonList",
            TypeErrorKind::FieldNotOnClass { .. } => "FieldNotOnClass",
            TypeErrorKind::NonNumericAggregate { .. } => "NonNumericAggregate",
        }
    }

    /// The member or field name the model asked for but the app lacks.
    pub fn missing_member(&self) -> Option<&str> {
        match &self.kind {
            TypeErrorKind::UnknownMember { member, .. } => Some(member),
            TypeErrorKind::FieldNotOnClass { field, .. } => Some(field),
            TypeErrorKind::UnknownClass(class) => Some(class),
            _ => None,
        }
    }
}

impl fmt::Display for TypeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeErrorKind::UnknownClass(c) => write!(f, "unknown class `{c}`"),
            TypeErrorKind::UnknownMember { owner, member } => {
                write!(f, "`{owner}` has no member `{member}`")
            }
            TypeErrorKind::ParamNameMismatch {
                function,
                name,
                expected,
            } => write!(
                f,
                "`{function}` has no parameter `{name}` (parameters: {})",
                if expected.is_empty() {
                    "none".to_string()
                } else {
                    expected.join(", ")
                }
            ),
            TypeErrorKind::MissingParam { function, param } => {
                write!(f, "`{function}` needs argument `{param}`")
            }
            TypeErrorKind::TypeMismatch {
                expected,
                found,
                context,
            } => write!(f, "{context}: expected {expected}, found {found}"),
            TypeErrorKind::IndexOnNonList(ty) => write!(f, "cannot index into {ty}"),
            TypeErrorKind::FieldNotOnClass { class, field } => {
                write!(f, "`{class}` has no field `{field}`")
            }
            TypeErrorKind::NonNumericAggregate {
                builtin,
                field_type,
            } => write!(f, "`{builtin}` needs a numeric field, found {field_type}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("index {index} out of bounds for length {len} at {span}")]
    IndexOutOfBounds {
        index: i64,
        len: usize,
        span: SourceSpan,
    },
    #[error("nothing on screen is a `{class}` at {span}")]
    CurrentUnresolved { class: String, span: SourceSpan },
    #[error("average of an empty list at {span}")]
    EmptyAggregate { span: SourceSpan },
    #[error("`{step}` failed ({code}): {message}")]
    Execution {
        step: String,
        code: String,
        message: String,
        span: SourceSpan,
    },
}

impl EvalError {
    pub fn code(&self) -> &str {
        match self {
            EvalError::IndexOutOfBounds { .. } => "IndexOutOfBounds",
            EvalError::CurrentUnresolved { .. } => "CurrentUnresolved",
            EvalError::EmptyAggregate { .. } => "EmptyAggregate",
            EvalError::Execution { .. } => "ExecutionError",
        }
    }

    pub fn span(&self) -> SourceSpan {
        match self {
            EvalError::IndexOutOfBounds { span, .. }
            | EvalError::CurrentUnresolved { span, .. }
            | EvalError::EmptyAggregate { span }
            | EvalError::Execution { span, .. } => *span,
        }
    }
}
