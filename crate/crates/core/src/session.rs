//! One user's runtime: parse, execute, respond, render.

use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value as Json};

use crate::app::AppBundle;
use crate::datetime::Clock;
use crate::dsl;
use crate::interp::{evaluate, type_check, EvalContext, EvalError, ExecutionTrace, TypedExpr};
use crate::nl::{
    generate_response, parse_utterance_in, CompletionBackend, NlError, PromptBuilder,
};
use crate::registry::{value_from_json, Args, FunctionImpl, HostCtx, StateStore, StoreError};
use crate::ui::{select_output, tapped_class, NoRenderReason, RenderDecision, ScreenSnapshot, TapPoint};
use crate::value::{InstanceRef, Value};

/// The parser and responder slots.
#[derive(Clone)]
pub struct Backends {
    pub parser: Arc<dyn CompletionBackend>,
    pub responder: Arc<dyn CompletionBackend>,
}

impl Backends {
    pub fn same(backend: Arc<dyn CompletionBackend>) -> Self {
        Backends {
            parser: Arc::clone(&backend),
            responder: backend,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CommandError {
    pub code: String,
    pub message: String,
    /// The capability the app lacks, for unsupported-feature errors.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub member: Option<String>,
    /// Host-level cause of an execution error, such as `NoPriorOrder`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl CommandError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        CommandError {
            code: code.to_string(),
            message: message.into(),
            member: None,
            reason: None,
        }
    }
}

impl From<&NlError> for CommandError {
    fn from(e: &NlError) -> Self {
        let message = match e {
            NlError::EmptyUtterance => "Say or type a command first.".to_string(),
            NlError::Backend(b) => format!("The language service is unavailable ({b})."),
            NlError::UnparseableCompletion { .. } => {
                "Sorry, I couldn't turn that into a command.".to_string()
            }
            NlError::UnsupportedFeature { member, .. } => {
                format!("Sorry, this app doesn't support `{member}` yet.")
            }
        };
        CommandError {
            code: e.code().to_string(),
            message,
            member: match e {
                NlError::UnsupportedFeature { member, .. } => Some(member.clone()),
                _ => None,
            },
            reason: None,
        }
    }
}

impl From<&EvalError> for CommandError {
    fn from(e: &EvalError) -> Self {
        let message = match e {
            EvalError::CurrentUnresolved { class, .. } => {
                format!("I couldn't tell which {class} you mean. Tap it while you speak.")
            }
            EvalError::IndexOutOfBounds { len, .. } => {
                format!("There are only {len} results.")
            }
            EvalError::EmptyAggregate { .. } => "There is nothing to average.".to_string(),
            EvalError::Execution { message, .. } => message.clone(),
        };
        let mut err = CommandError::new(e.code(), message);
        if let EvalError::Execution { code, .. } = e {
            err.reason = Some(code.clone());
        }
        err
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CommandResult {
    pub dsl: Option<String>,
    pub feedback: String,
    /// Present exactly when the command succeeded.
    pub render: Option<RenderDecision>,
    pub value: Option<Value>,
    pub error: Option<CommandError>,
    /// The responder failed and a fixed template was used.
    pub degraded: bool,
}

impl CommandResult {
    fn failed(dsl: Option<String>, error: CommandError) -> Self {
        CommandResult {
            dsl,
            feedback: error.message.clone(),
            render: None,
            value: None,
            error: Some(error),
            degraded: false,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    /// The service wire form.
    pub fn to_wire(&self) -> Json {
        let (render, no_render) = match &self.render {
            Some(RenderDecision::Render { template, instance }) => (
                json!({"template": template, "class": instance.class, "instance_id": instance.id}),
                Json::Null,
            ),
            Some(RenderDecision::RenderList {
                template,
                class,
                instances,
            }) => (
                json!({
                    "template": template,
                    "class": class,
                    "instance_id": Json::Null,
                    "instance_ids": instances.iter().map(|i| i.id.clone()).collect::<Vec<_>>(),
                }),
                Json::Null,
            ),
            Some(RenderDecision::NoRender(reason)) => (
                Json::Null,
                json!(match reason {
                    NoRenderReason::AlreadyVisible => "already-visible",
                    NoRenderReason::NothingRenderable => "nothing-renderable",
                }),
            ),
            None => (Json::Null, Json::Null),
        };
        json!({
            "dsl": self.dsl,
            "feedback": self.feedback,
            "render": render,
            "no_render": no_render,
            "error": self.error.as_ref().map(|e| {
                let mut v = json!({"code": e.code, "message": e.message});
                if let Some(m) = &e.member {
                    v["member"] = json!(m);
                }
                if let Some(r) = &e.reason {
                    v["reason"] = json!(r);
                }
                v
            }),
            "degraded": self.degraded,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HistoryEntry {
    pub utterance: String,
    pub dsl: Option<String>,
    pub trace: Option<ExecutionTrace>,
    pub feedback: String,
    pub error: Option<CommandError>,
}

pub struct Session {
    pub id: String,
    pub store: StateStore,
    pub screen: ScreenSnapshot,
    pub history: Vec<HistoryEntry>,
}

impl Session {
    pub fn update_screen(&mut self, mut snapshot: ScreenSnapshot) {
        snapshot.session_id = self.id.clone();
        self.screen = snapshot;
    }
}

/// Shared, read-only parts of the runtime.
#[derive(Clone)]
pub struct Runtime {
    pub app: AppBundle,
    pub backends: Backends,
    pub clock: Arc<dyn Clock>,
}

impl Runtime {
    pub fn new(app: AppBundle, backends: Backends, clock: Arc<dyn Clock>) -> Self {
        Runtime {
            app,
            backends,
            clock,
        }
    }

    pub fn prompts(&self) -> PromptBuilder<'_> {
        PromptBuilder::new(&self.app.registry, &self.app.examples)
    }

    pub fn new_session(&self, id: impl Into<String>) -> Result<Session, StoreError> {
        let id = id.into();
        Ok(Session {
            store: self.app.fresh_store()?,
            screen: ScreenSnapshot::new(id.clone(), Vec::new()),
            history: Vec::new(),
            id,
        })
    }

    /// Utterance in, feedback and render decision out. The store changes
    /// only if every step succeeds.
    pub fn handle_command(&self, session: &mut Session, text: &str, taps: &[TapPoint]) -> CommandResult {
        let screen = session.screen.live(&session.store);
        let context = tapped_class(taps, &screen);
        let outcome = parse_utterance_in(
            text,
            context,
            &self.prompts(),
            &self.app.registry,
            self.backends.parser.as_ref(),
        );
        let result = match outcome {
            Err(e) => CommandResult::failed(None, CommandError::from(&e)),
            Ok(outcome) => self.run(session, text, outcome.dsl, &outcome.typed, taps, true),
        };
        self.record(session, text, &result);
        result
    }

    /// Execute a literal command; no backend is consulted.
    pub fn execute_dsl(&self, session: &mut Session, source: &str, taps: &[TapPoint]) -> CommandResult {
        let result = match dsl::parse(source) {
            Err(e) => CommandResult::failed(None, CommandError::new("SyntaxError", e.to_string())),
            Ok(expr) => {
                let canonical = dsl::print(&expr);
                match type_check(&expr, &self.app.registry) {
                    Err(e) => {
                        let mut err = CommandError::new(e.code(), e.to_string());
                        err.member = e.missing_member().map(str::to_string);
                        CommandResult::failed(Some(canonical), err)
                    }
                    Ok(typed) => self.run(session, source, canonical, &typed, taps, false),
                }
            }
        };
        self.record(session, source, &result);
        result
    }

    fn run(
        &self,
        session: &mut Session,
        utterance: &str,
        dsl: String,
        typed: &TypedExpr,
        taps: &[TapPoint],
        respond: bool,
    ) -> CommandResult {
        let ctx = EvalContext {
            clock: self.clock.as_ref(),
            screen: &session.screen,
            taps,
        };
        let (value, trace) = match evaluate(typed, &mut session.store, &ctx) {
            Ok(done) => done,
            Err(e) => return CommandResult::failed(Some(dsl), CommandError::from(&e)),
        };
        let description = (!value.is_void()).then(|| session.store.describe_value(&value));
        let response = if respond {
            generate_response(
                utterance,
                &dsl,
                description.as_deref(),
                &self.prompts(),
                self.backends.responder.as_ref(),
            )
        } else {
            crate::nl::Response {
                text: crate::nl::template_response(&dsl, description.as_deref()),
                degraded: false,
            }
        };
        let screen = session.screen.live(&session.store);
        let render = select_output(&trace, &screen, &self.app.bindings);
        session.history.push(HistoryEntry {
            utterance: utterance.to_string(),
            dsl: Some(dsl.clone()),
            trace: Some(trace),
            feedback: response.text.clone(),
            error: None,
        });
        CommandResult {
            dsl: Some(dsl),
            feedback: response.text,
            render: Some(render),
            value: Some(value),
            error: None,
            degraded: response.degraded,
        }
    }

    /// A direct GUI action: call any registered host function, exposed or
    /// not, with JSON arguments. Atomic like a command.
    pub fn invoke_action(
        &self,
        session: &mut Session,
        class: &str,
        instance_id: Option<&str>,
        function: &str,
        args: &serde_json::Map<String, Json>,
    ) -> Result<Value, CommandError> {
        let desc = self
            .app
            .registry
            .class(class)
            .ok_or_else(|| CommandError::new("UnknownClass", format!("no class `{class}`")))?;
        let f = desc.find_function(function).ok_or_else(|| {
            CommandError::new("UnknownMember", format!("`{class}` has no function `{function}`"))
        })?;
        let FunctionImpl::Host(host) = &f.implementation else {
            return Err(CommandError::new(
                "UnsupportedAction",
                format!("`{class}.{function}` is not a host function"),
            ));
        };
        let receiver = match (f.is_static, instance_id) {
            (true, _) => Value::Void,
            (false, Some(id)) => {
                let r = InstanceRef::new(class, id);
                if !session.store.exists(&r) {
                    return Err(CommandError::new("UnknownInstance", format!("no instance {r}")));
                }
                Value::Instance(r)
            }
            (false, None) => {
                return Err(CommandError::new(
                    "ValidationError",
                    format!("`{class}.{function}` needs an instance id"),
                ))
            }
        };
        let mut values = Vec::with_capacity(f.params.len());
        for p in &f.params {
            let v = match (args.get(&p.name), &p.default) {
                (Some(j), _) => value_from_json(j, &p.ty)
                    .map_err(|e| CommandError::new("ValidationError", format!("{}: {e}", p.name)))?,
                (None, Some(d)) => d.clone(),
                (None, None) => {
                    return Err(CommandError::new(
                        "ValidationError",
                        format!("missing argument `{}`", p.name),
                    ))
                }
            };
            values.push(v);
        }
        let clock = self.clock.as_ref();
        session
            .store
            .transaction(|store| {
                let mut ctx = HostCtx { store, clock };
                host(&mut ctx, &receiver, &Args::new(&f.params, values))
            })
            .map_err(|e| {
                let mut err = CommandError::new("ExecutionError", e.message);
                err.reason = Some(e.code);
                err
            })
    }

    fn record(&self, session: &mut Session, utterance: &str, result: &CommandResult) {
        if result.error.is_some() {
            session.history.push(HistoryEntry {
                utterance: utterance.to_string(),
                dsl: result.dsl.clone(),
                trace: None,
                feedback: result.feedback.clone(),
                error: result.error.clone(),
            });
        }
    }
}
