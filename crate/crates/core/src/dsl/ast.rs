use std::fmt;

/// Character offsets into the source string (not bytes).
#[derive(Clone, Copy, Debug, Default, Eq, PartialEq, Hash)]
pub struct SourceSpan {
    pub start: usize,
    pub end: usize,
}

impl SourceSpan {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        SourceSpan { start, end }
    }

    pub fn join(self, other: SourceSpan) -> SourceSpan {
        SourceSpan {
            start: self.start.min(other.start),
            end: self.end.max(other.end),
        }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Literal {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

/// A single command. Equality is structural and ignores spans.
#[derive(Clone, Debug)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    /// `Restaurant.All()[0].name`; never empty.
    Chain(Vec<Step>),
    Literal(Literal),
    /// `[a, b]`; the grammar requires at least one element.
    Array(Vec<Expr>),
    /// Leading-dot field path such as `.price`. The payload is a chain.
    Accessor(Vec<Step>),
}

#[derive(Clone, Debug)]
pub struct Step {
    pub kind: StepKind,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StepKind {
    Member(String),
    Call { name: String, args: Vec<NamedArg> },
    /// Applies to the preceding step.
    Index(i64),
}

#[derive(Clone, Debug)]
pub struct NamedArg {
    pub name: String,
    pub value: Expr,
    pub span: SourceSpan,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl PartialEq for Step {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl PartialEq for NamedArg {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.value == other.value
    }
}

impl Expr {
    pub fn new(kind: ExprKind) -> Self {
        Expr {
            kind,
            span: SourceSpan::default(),
        }
    }

    pub fn chain(steps: Vec<Step>) -> Self {
        Expr::new(ExprKind::Chain(steps))
    }

    pub fn literal(lit: Literal) -> Self {
        Expr::new(ExprKind::Literal(lit))
    }
}

impl Step {
    pub fn new(kind: StepKind) -> Self {
        Step {
            kind,
            span: SourceSpan::default(),
        }
    }

    pub fn member(name: impl Into<String>) -> Self {
        Step::new(StepKind::Member(name.into()))
    }

    pub fn call(name: impl Into<String>, args: Vec<NamedArg>) -> Self {
        Step::new(StepKind::Call {
            name: name.into(),
            args,
        })
    }

    pub fn index(position: i64) -> Self {
        Step::new(StepKind::Index(position))
    }

    /// Name of a member or call step.
    pub fn name(&self) -> Option<&str> {
        match &self.kind {
            StepKind::Member(name) | StepKind::Call { name, .. } => Some(name),
            StepKind::Index(_) => None,
        }
    }
}

impl NamedArg {
    pub fn new(name: impl Into<String>, value: Expr) -> Self {
        NamedArg {
            name: name.into(),
            value,
            span: SourceSpan::default(),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::print(self))
    }
}
