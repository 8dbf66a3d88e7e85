//! Natural language to command: prompt construction, completion backends,
//! validation with one repair round, and response text.

mod backend;
mod prompt;

use serde::{Deserialize, Serialize};

use crate::dsl::{self, Expr};
use crate::interp::{type_check, TypeError, TypedExpr};
use crate::registry::Registry;

pub use backend::{BackendError, CompletionBackend, HttpBackend, MockBackend, Slot, Unmatched};
pub use prompt::{exposed_member_names, schema_member_names, PromptBuilder};

pub const PARSE_MAX_TOKENS: usize = 256;
pub const RESPONSE_MAX_TOKENS: usize = 120;

/// A few-shot example shown to the parser.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleParse {
    pub utterance: String,
    pub dsl: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_class: Option<String>,
}

#[derive(Clone, Debug)]
pub struct ParseOutcome {
    pub raw: String,
    /// Canonical spelling of the accepted command.
    pub dsl: String,
    pub expr: Expr,
    pub typed: TypedExpr,
    /// Why the first completion was rejected, if it was.
    pub repair: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum NlError {
    #[error("empty command")]
    EmptyUtterance,
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("could not understand `{completion}`: {detail}")]
    UnparseableCompletion { completion: String, detail: String },
    #[error("`{member}` is not supported: {detail}")]
    UnsupportedFeature {
        member: String,
        completion: String,
        detail: String,
    },
}

impl NlError {
    pub fn code(&self) -> &'static str {
        match self {
            NlError::EmptyUtterance => "ValidationError",
            NlError::Backend(_) => "BackendError",
            NlError::UnparseableCompletion { .. } => "UnparseableCompletion",
            NlError::UnsupportedFeature { .. } => "UnsupportedFeature",
        }
    }
}

enum Rejection {
    Syntax(dsl::SyntaxError),
    Types(TypeError),
}

impl Rejection {
    fn message(&self) -> String {
        match self {
            Rejection::Syntax(e) => e.to_string(),
            Rejection::Types(e) => e.to_string(),
        }
    }
}

/// Take the first line of a completion and drop a repeated `DSL:` label.
fn first_line(completion: &str) -> String {
    let line = completion.trim_start().lines().next().unwrap_or("").trim();
    line.strip_prefix("DSL:").unwrap_or(line).trim().to_string()
}

/// Parse, print, re-parse and type-check one candidate command.
pub fn validate(candidate: &str, registry: &Registry) -> Result<(String, Expr, TypedExpr), String> {
    validate_inner(candidate, registry).map_err(|r| r.message())
}

fn validate_inner(candidate: &str, registry: &Registry) -> Result<(String, Expr, TypedExpr), Rejection> {
    let expr = dsl::parse(candidate).map_err(Rejection::Syntax)?;
    let canonical = dsl::print(&expr);
    let reparsed = dsl::parse(&canonical).map_err(Rejection::Syntax)?;
    if reparsed != expr {
        return Err(Rejection::Syntax(dsl::SyntaxError::new(
            format!("`{canonical}` does not round-trip"),
            expr.span,
        )));
    }
    let typed = type_check(&reparsed, registry).map_err(Rejection::Types)?;
    Ok((canonical, reparsed, typed))
}

/// Ask the backend for a command, allowing one repair round.
pub fn parse_utterance(
    utterance: &str,
    prompts: &PromptBuilder<'_>,
    registry: &Registry,
    backend: &dyn CompletionBackend,
) -> Result<ParseOutcome, NlError> {
    parse_utterance_in(utterance, None, prompts, registry, backend)
}

/// As [`parse_utterance`], telling the parser which class is on screen.
pub fn parse_utterance_in(
    utterance: &str,
    context: Option<&str>,
    prompts: &PromptBuilder<'_>,
    registry: &Registry,
    backend: &dyn CompletionBackend,
) -> Result<ParseOutcome, NlError> {
    let utterance = utterance.trim();
    if utterance.is_empty() {
        return Err(NlError::EmptyUtterance);
    }
    let raw = backend.complete(&prompts.parser_prompt_in(utterance, context), &["\n"], PARSE_MAX_TOKENS)?;
    let candidate = first_line(&raw);
    let first_error = match validate_inner(&candidate, registry) {
        Ok((dsl, expr, typed)) => {
            return Ok(ParseOutcome {
                raw,
                dsl,
                expr,
                typed,
                repair: None,
            })
        }
        Err(e) => e,
    };

    let note = first_error.message();
    log::info!("rejected completion `{candidate}`: {note}");
    let repair_prompt = prompts.repair_prompt_in(utterance, context, &candidate, &note);
    let raw = backend.complete(&repair_prompt, &["\n"], PARSE_MAX_TOKENS)?;
    let retried = first_line(&raw);
    match validate_inner(&retried, registry) {
        Ok((dsl, expr, typed)) => Ok(ParseOutcome {
            raw,
            dsl,
            expr,
            typed,
            repair: Some(note),
        }),
        Err(Rejection::Types(e)) if e.missing_member().is_some() => Err(NlError::UnsupportedFeature {
            member: e.missing_member().unwrap_or_default().to_string(),
            completion: retried,
            detail: e.to_string(),
        }),
        Err(e) => Err(NlError::UnparseableCompletion {
            completion: retried,
            detail: e.message(),
        }),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Response {
    pub text: String,
    /// The backend failed and the fixed template was used instead.
    pub degraded: bool,
}

pub fn template_response(dsl: &str, description: Option<&str>) -> String {
    match description {
        Some(d) => format!("Done: {dsl} → {d}"),
        None => format!("Done: {dsl}"),
    }
}

/// Confirmation text for a finished command. `description` is `None` for a
/// `Void` result.
pub fn generate_response(
    utterance: &str,
    dsl: &str,
    description: Option<&str>,
    prompts: &PromptBuilder<'_>,
    backend: &dyn CompletionBackend,
) -> Response {
    let prompt = prompts.response_prompt(utterance, dsl, description.unwrap_or("Void"));
    match backend.complete(&prompt, &["\n\n"], RESPONSE_MAX_TOKENS) {
        Ok(text) if !text.trim().is_empty() => Response {
            text: text.trim().to_string(),
            degraded: false,
        },
        Ok(_) => Response {
            text: template_response(dsl, description),
            degraded: true,
        },
        Err(e) => {
            log::warn!("responder failed, using template: {e}");
            Response {
                text: template_response(dsl, description),
                degraded: true,
            }
        }
    }
}
