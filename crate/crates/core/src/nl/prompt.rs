use std::fmt::Write as _;

use super::ExampleParse;
use crate::interp::Builtin;
use crate::registry::{ClassDescriptor, ClassKind, FunctionDescriptor, ParamDescriptor, Registry};
use crate::value::Value;

/// Renders the registry and examples into parser and responder prompts.
/// Output is a pure function of its inputs.
pub struct PromptBuilder<'a> {
    registry: &'a Registry,
    examples: &'a [ExampleParse],
}

const INSTRUCTIONS: &str = "// Translate each user command into one expression over the classes above.\n\
// Arguments are always named. Use Current() for the thing the user points at or sees.\n";

fn param_text(p: &ParamDescriptor) -> String {
    match &p.default {
        None => format!("{}: {}", p.name, p.ty),
        Some(Value::Void) => format!("{}: {}? = nil", p.name, p.ty),
        Some(v) => format!("{}: {} = {}", p.name, p.ty, v),
    }
}

fn function_line(f: &FunctionDescriptor) -> String {
    let params: Vec<String> = f.params.iter().map(param_text).collect();
    format!(
        "{}func {}({}) -> {}",
        if f.is_static { "static " } else { "" },
        f.name,
        params.join(", "),
        f.return_type
    )
}

fn push_member(out: &mut String, exemplar: Option<&str>, line: &str) {
    if let Some(text) = exemplar {
        let _ = writeln!(out, "    // {text}");
    }
    let _ = writeln!(out, "    {line}");
}

impl<'a> PromptBuilder<'a> {
    pub fn new(registry: &'a Registry, examples: &'a [ExampleParse]) -> Self {
        PromptBuilder { registry, examples }
    }

    fn class_block(out: &mut String, class: &ClassDescriptor) {
        let keyword = match class.kind {
            ClassKind::Data => "class",
            ClassKind::Helper => "struct",
        };
        let _ = writeln!(out, "{keyword} {} {{", class.name);
        for p in class.properties.iter().filter(|p| p.genie_exposed) {
            let optional = if p.required || p.getter.is_some() { "" } else { "?" };
            push_member(
                out,
                p.exemplar.as_deref(),
                &format!("var {}: {}{optional}", p.name, p.value_type),
            );
        }
        for f in class.functions.iter().filter(|f| f.genie_exposed) {
            push_member(out, f.exemplar.as_deref(), &function_line(f));
        }
        out.push_str("}\n\n");
    }

    /// Class definitions plus the list built-ins: the first part of the
    /// parser prompt.
    pub fn schema(&self) -> String {
        let mut out = String::new();
        for class in self.registry.classes() {
            Self::class_block(&mut out, class);
        }
        out.push_str("extension Array<T> {\n");
        for b in Builtin::ALL {
            push_member(&mut out, Some(b.exemplar()), b.signature());
        }
        out.push_str("}\n");
        out
    }

    fn example_block(out: &mut String, ex: &ExampleParse) {
        if let Some(class) = &ex.context_class {
            let _ = writeln!(out, "// On screen: a {class}");
        }
        let _ = writeln!(out, "User: {}", ex.utterance);
        let _ = writeln!(out, "DSL: {}\n", ex.dsl);
    }

    pub fn parser_prompt(&self, utterance: &str) -> String {
        self.parser_prompt_in(utterance, None)
    }

    /// `context` names the class of the on-screen item the user pointed at.
    pub fn parser_prompt_in(&self, utterance: &str, context: Option<&str>) -> String {
        let mut out = self.schema();
        out.push('\n');
        out.push_str(INSTRUCTIONS);
        out.push('\n');
        for ex in self.examples {
            Self::example_block(&mut out, ex);
        }
        if let Some(class) = context {
            let _ = writeln!(out, "// On screen: a {class}");
        }
        let _ = write!(out, "User: {}\nDSL:", one_line(utterance));
        out
    }

    /// The parser prompt followed by the rejected attempt and why.
    pub fn repair_prompt(&self, utterance: &str, completion: &str, error: &str) -> String {
        self.repair_prompt_in(utterance, None, completion, error)
    }

    pub fn repair_prompt_in(&self, utterance: &str, context: Option<&str>, completion: &str, error: &str) -> String {
        let mut out = self.parser_prompt_in(utterance, context);
        let _ = write!(
            out,
            " {}\n// That command is invalid: {}. Write a corrected command.\nDSL:",
            one_line(completion),
            one_line(error)
        );
        out
    }

    pub fn response_prompt(&self, utterance: &str, dsl: &str, description: &str) -> String {
        let mut out = self.parser_prompt(utterance);
        let _ = write!(
            out,
            " {dsl}\nResult: {}\n// Reply to the user in one or two short sentences describing what happened.\nResponse:",
            one_line(description)
        );
        out
    }
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Member names mentioned by a schema, in order, for completeness checks.
pub fn schema_member_names(schema: &str) -> Vec<String> {
    schema
        .lines()
        .map(str::trim)
        .filter_map(|line| {
            let rest = line
                .strip_prefix("static func ")
                .or_else(|| line.strip_prefix("func "))
                .or_else(|| line.strip_prefix("var "))?;
            let end = rest.find(['(', ':']).unwrap_or(rest.len());
            Some(rest[..end].to_string())
        })
        .collect()
}

/// Exposed member names per class, built-ins last.
pub fn exposed_member_names(registry: &Registry) -> Vec<String> {
    let mut names = Vec::new();
    for class in registry.classes() {
        names.extend(class.properties.iter().filter(|p| p.genie_exposed).map(|p| p.name.clone()));
        names.extend(class.functions.iter().filter(|f| f.genie_exposed).map(|f| f.name.clone()));
    }
    names.extend(Builtin::ALL.iter().map(|b| b.name().to_string()));
    names
}
