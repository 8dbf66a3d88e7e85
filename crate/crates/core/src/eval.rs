//! Parser accuracy over a labelled dataset: exact match on canonical text
//! and execution match on a fresh seed store.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::app::AppBundle;
use crate::datetime::FixedClock;
use crate::dsl;
use crate::interp::{evaluate, type_check, EvalContext, TypedExpr};
use crate::nl::{parse_utterance_in, CompletionBackend, NlError, ParseOutcome};
use crate::registry::{value_to_json, StateStore};
use crate::ui::{BBox, ScreenSnapshot, VisibleComponent};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub utterance: String,
    #[serde(alias = "gold")]
    pub dsl: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_class: Option<String>,
    /// Description of the gold command's result on the seed store.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {detail}")]
    Io { path: String, detail: String },
    #[error("malformed dataset: {0}")]
    Json(String),
    #[error("record {index} (\"{utterance}\"): {detail}")]
    Gold {
        index: usize,
        utterance: String,
        detail: String,
    },
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<EvalRecord>, DatasetError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    parse_dataset(&text)
}

pub fn parse_dataset(text: &str) -> Result<Vec<EvalRecord>, DatasetError> {
    serde_json::from_str(text).map_err(|e| DatasetError::Json(e.to_string()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FailureDiagnostic {
    pub index: usize,
    pub utterance: String,
    pub gold: String,
    pub hypothesis: Option<String>,
    pub error_class: String,
    pub detail: String,
    pub execution_match: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AccuracyReport {
    pub app: String,
    pub total: usize,
    pub exact_matches: usize,
    pub execution_matches: usize,
    pub exact_rate: f64,
    pub execution_rate: f64,
    pub failures: Vec<FailureDiagnostic>,
}

impl AccuracyReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "app: {}", self.app);
        let _ = writeln!(out, "records: {}", self.total);
        let _ = writeln!(
            out,
            "exact match: {}/{} ({:.1}%)",
            self.exact_matches,
            self.total,
            self.exact_rate * 100.0
        );
        let _ = writeln!(
            out,
            "execution match: {}/{} ({:.1}%)",
            self.execution_matches,
            self.total,
            self.execution_rate * 100.0
        );
        for f in &self.failures {
            let _ = writeln!(out, "\n#{} {} [{}]", f.index, f.utterance, f.error_class);
            let _ = writeln!(out, "  gold: {}", f.gold);
            let _ = writeln!(out, "  got:  {}", f.hypothesis.as_deref().unwrap_or("-"));
            if !f.detail.is_empty() {
                let _ = writeln!(out, "  {}", f.detail);
            }
        }
        out
    }
}

/// One record's simulated screen: a single component showing the first
/// instance of the context class.
fn context_screen(app: &AppBundle, store: &StateStore, class: Option<&str>) -> ScreenSnapshot {
    let Some(class) = class else {
        return ScreenSnapshot::default();
    };
    let Some(first) = store.all(class).ok().and_then(|all| all.into_iter().next()) else {
        return ScreenSnapshot::default();
    };
    let template = app
        .bindings
        .top_binding(class)
        .map_or_else(|| class.to_string(), |b| b.template.clone());
    ScreenSnapshot::new(
        "eval",
        vec![VisibleComponent::new(&template, class, &first.id, BBox::new(0.0, 0.0, 100.0, 100.0))],
    )
}

/// Final value and store after running `typed` on a fresh seed, or the
/// error code.
fn execute(app: &AppBundle, typed: &TypedExpr, context: Option<&str>) -> Result<(serde_json::Value, StateStore), String> {
    let mut store = app.fresh_store().map_err(|e| e.to_string())?;
    let screen = context_screen(app, &store, context);
    let clock = FixedClock(app.reference_time);
    let ctx = EvalContext {
        clock: &clock,
        screen: &screen,
        taps: &[],
    };
    match evaluate(typed, &mut store, &ctx) {
        Ok((value, _)) => Ok((value_to_json(&value), store)),
        Err(e) => Err(match &e {
            crate::interp::EvalError::Execution { code, .. } => code.clone(),
            other => other.code().to_string(),
        }),
    }
}

fn check_gold(app: &AppBundle, index: usize, record: &EvalRecord) -> Result<(String, TypedExpr), DatasetError> {
    let gold_err = |detail: String| DatasetError::Gold {
        index,
        utterance: record.utterance.clone(),
        detail,
    };
    let expr = dsl::parse(&record.dsl).map_err(|e| gold_err(e.to_string()))?;
    let typed = type_check(&expr, &app.registry).map_err(|e| gold_err(e.to_string()))?;
    if let Some(class) = &record.context_class {
        if !app.registry.contains(class) {
            return Err(gold_err(format!("unknown context class `{class}`")));
        }
    }
    if let Some(expected) = &record.expected {
        let mut store = app.fresh_store().map_err(|e| gold_err(e.to_string()))?;
        let screen = context_screen(app, &store, record.context_class.as_deref());
        let clock = FixedClock(app.reference_time);
        let ctx = EvalContext {
            clock: &clock,
            screen: &screen,
            taps: &[],
        };
        let (value, _) = evaluate(&typed, &mut store, &ctx).map_err(|e| gold_err(e.to_string()))?;
        let found = store.describe_value(&value);
        if &found != expected {
            return Err(gold_err(format!("expected `{expected}`, gold yields `{found}`")));
        }
    }
    Ok((dsl::print(&expr), typed))
}

fn parse_all(
    app: &AppBundle,
    records: &[EvalRecord],
    backend: &dyn CompletionBackend,
    parallel: usize,
) -> Vec<Result<ParseOutcome, NlError>> {
    let prompts = crate::nl::PromptBuilder::new(&app.registry, &app.examples);
    let one = |r: &EvalRecord| {
        parse_utterance_in(&r.utterance, r.context_class.as_deref(), &prompts, &app.registry, backend)
    };
    if parallel <= 1 || records.len() <= 1 {
        return records.iter().map(one).collect();
    }
    let chunk = records.len().div_ceil(parallel);
    std::thread::scope(|scope| {
        let handles: Vec<_> = records
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(one).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("parser thread panicked"))
            .collect()
    })
}

/// Score `backend` on `records`. `parallel` > 1 spreads backend queries over
/// that many threads; execution is always sequential.
pub fn run_eval(
    app: &AppBundle,
    records: &[EvalRecord],
    backend: &dyn CompletionBackend,
    parallel: usize,
) -> Result<AccuracyReport, DatasetError> {
    let golds = records
        .iter()
        .enumerate()
        .map(|(i, r)| check_gold(app, i, r))
        .collect::<Result<Vec<_>, _>>()?;
    let parses = parse_all(app, records, backend, parallel);

    let mut exact_matches = 0;
    let mut execution_matches = 0;
    let mut failures = Vec::new();
    for (index, ((record, (gold_canonical, gold)), parsed)) in records.iter().zip(&golds).zip(parses).enumerate() {
        let context = record.context_class.as_deref();
        let diagnostic = |hypothesis: Option<String>, error_class: &str, detail: String, execution_match| {
            FailureDiagnostic {
                index,
                utterance: record.utterance.clone(),
                gold: gold_canonical.clone(),
                hypothesis,
                error_class: error_class.to_string(),
                detail,
                execution_match,
            }
        };
        let outcome = match parsed {
            Ok(o) => o,
            Err(e) => {
                let hypothesis = match &e {
                    NlError::UnparseableCompletion { completion, .. }
                    | NlError::UnsupportedFeature { completion, .. } => Some(completion.clone()),
                    _ => None,
                };
                failures.push(diagnostic(hypothesis, e.code(), e.to_string(), false));
                continue;
            }
        };
        let exact = &outcome.dsl == gold_canonical;
        let execution = exact || {
            match (execute(app, gold, context), execute(app, &outcome.typed, context)) {
                (Ok((gv, gs)), Ok((hv, hs))) => gv == hv && gs.same_contents(&hs),
                (Err(g), Err(h)) => g == h,
                _ => false,
            }
        };
        exact_matches += usize::from(exact);
        execution_matches += usize::from(execution);
        if !exact {
            let class = if execution { "ExactMismatch" } else { "ExecutionMismatch" };
            failures.push(diagnostic(Some(outcome.dsl), class, String::new(), execution));
        }
    }

    let rate = |n: usize| if records.is_empty() { 0.0 } else { n as f64 / records.len() as f64 };
    Ok(AccuracyReport {
        app: app.name.clone(),
        total: records.len(),
        exact_matches,
        execution_matches,
        exact_rate: rate(exact_matches),
        execution_rate: rate(execution_matches),
        failures,
    })
}
