//! The command language: AST, lexer, parser and canonical printer.

mod ast;
mod lexer;
mod parser;
mod printer;

use std::fmt;

pub use ast::{Expr, ExprKind, Literal, NamedArg, SourceSpan, Step, StepKind};
pub use parser::{parse, MAX_DEPTH};
pub use printer::{format_float, print};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct SyntaxError {
    pub message: String,
    pub span: SourceSpan,
    pub expected: Vec<String>,
    pub found: Option<String>,
}

impl SyntaxError {
    pub fn new(message: impl Into<String>, span: SourceSpan) -> Self {
        SyntaxError {
            message: message.into(),
            span,
            expected: Vec::new(),
            found: None,
        }
    }

    pub fn expecting<I, S>(mut self, expected: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.expected = expected.into_iter().map(Into::into).collect();
        self
    }

    pub fn found(mut self, found: impl Into<String>) -> Self {
        self.found = Some(found.into());
        self
    }
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "syntax error at {}: {}", self.span, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

/// Parse then print; the canonical spelling of a command.
pub fn canonicalize(source: &str) -> Result<String, SyntaxError> {
    parse(source).map(|e| print(&e))
}
