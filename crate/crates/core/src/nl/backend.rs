use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

/// A text-completion service.
pub trait CompletionBackend: Send + Sync {
    fn complete(&self, prompt: &str, stop: &[&str], max_tokens: usize) -> Result<String, BackendError>;
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("backend not configured: {0}")]
    Config(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed backend response: {0}")]
    BadResponse(String),
    #[error("no fixture entry for \"{0}\"")]
    Unmatched(String),
}

fn cut_at_stop(text: &str, stop: &[&str]) -> String {
    let end = stop
        .iter()
        .filter(|s| !s.is_empty())
        .filter_map(|s| text.find(s))
        .min()
        .unwrap_or(text.len());
    text[..end].to_string()
}

/// What the mock does with an utterance missing from its fixture.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Unmatched {
    #[default]
    Error,
    /// Return the utterance itself as the completion.
    Echo,
}

/// Deterministic offline backend.
///
/// Parser prompts are answered from a fixture keyed by the last `User:` line.
/// Responder prompts (ending in `Response:`) get `Done: <dsl> → <result>`,
/// or `Done: <dsl>` when the result is `Void`.
#[derive(Debug, Default)]
pub struct MockBackend {
    fixture: HashMap<String, String>,
    unmatched: Unmatched,
    calls: AtomicUsize,
}

impl MockBackend {
    pub fn new(fixture: HashMap<String, String>) -> Self {
        MockBackend {
            fixture,
            unmatched: Unmatched::Error,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self, BackendError> {
        serde_json::from_str(text)
            .map(Self::new)
            .map_err(|e| BackendError::Config(format!("fixture: {e}")))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn with_unmatched(mut self, unmatched: Unmatched) -> Self {
        self.unmatched = unmatched;
        self
    }

    pub fn insert(&mut self, utterance: impl Into<String>, completion: impl Into<String>) {
        self.fixture.insert(utterance.into(), completion.into());
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    fn last_field<'p>(prompt: &'p str, prefix: &str) -> Option<&'p str> {
        prompt
            .lines()
            .rev()
            .find_map(|l| l.strip_prefix(prefix))
            .map(str::trim)
    }

    fn respond(prompt: &str) -> String {
        let dsl = Self::last_field(prompt, "DSL: ").unwrap_or_default();
        match Self::last_field(prompt, "Result: ") {
            None | Some("Void") | Some("") => format!("Done: {dsl}"),
            Some(result) => format!("Done: {dsl} → {result}"),
        }
    }
}

impl CompletionBackend for MockBackend {
    fn complete(&self, prompt: &str, stop: &[&str], _max_tokens: usize) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        if prompt.trim_end().ends_with("Response:") {
            return Ok(Self::respond(prompt));
        }
        let utterance = Self::last_field(prompt, "User: ").unwrap_or_default();
        let completion = match self.fixture.get(utterance) {
            Some(c) => c.clone(),
            None => match self.unmatched {
                Unmatched::Error => return Err(BackendError::Unmatched(utterance.to_string())),
                Unmatched::Echo => utterance.to_string(),
            },
        };
        // Completions continue the open `DSL:` line.
        Ok(cut_at_stop(&format!(" {completion}\n"), stop))
    }
}

/// Which model an HTTP backend talks to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Parser,
    Responder,
}

/// OpenAI-compatible `/completions` client.
pub struct HttpBackend {
    base_url: String,
    api_key: Option<String>,
    model: String,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(base_url: &str, api_key: Option<String>, model: &str, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpBackend {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key,
            model: model.to_string(),
            agent,
        }
    }

    /// Reads `GENIE_LLM_BASE_URL`, `GENIE_LLM_API_KEY` and
    /// `GENIE_PARSER_MODEL` / `GENIE_RESPONDER_MODEL`.
    pub fn from_env(slot: Slot) -> Result<Self, BackendError> {
        let var = |name: &str| std::env::var(name).ok().filter(|v| !v.is_empty());
        let base = var("GENIE_LLM_BASE_URL")
            .ok_or_else(|| BackendError::Config("GENIE_LLM_BASE_URL is not set".into()))?;
        let model_var = match slot {
            Slot::Parser => "GENIE_PARSER_MODEL",
            Slot::Responder => "GENIE_RESPONDER_MODEL",
        };
        let model = var(model_var).ok_or_else(|| BackendError::Config(format!("{model_var} is not set")))?;
        Ok(Self::new(&base, var("GENIE_LLM_API_KEY"), &model, Duration::from_secs(60)))
    }

    pub fn request_body(&self, prompt: &str, stop: &[&str], max_tokens: usize) -> serde_json::Value {
        serde_json::json!({
            "model": self.model,
            "prompt": prompt,
            "max_tokens": max_tokens,
            "stop": stop,
            "temperature": 0,
        })
    }
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, prompt: &str, stop: &[&str], max_tokens: usize) -> Result<String, BackendError> {
        let url = format!("{}/completions", self.base_url);
        let mut request = self.agent.post(&url);
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request
            .send_json(self.request_body(prompt, stop, max_tokens))
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status();
        let body: serde_json::Value = response
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::BadResponse(e.to_string()))?;
        if !status.is_success() {
            return Err(BackendError::Transport(format!("HTTP {status}: {body}")));
        }
        body.pointer("/choices/0/text")
            .and_then(serde_json::Value::as_str)
            .map(|t| cut_at_stop(t, stop))
            .ok_or_else(|| BackendError::BadResponse(format!("no choices[0].text in {body}")))
    }
}
