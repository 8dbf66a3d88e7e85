//! App bundles: a registry, its UI bindings, seed data and example parses.

pub mod foodordering;

use std::path::Path;
use std::sync::Arc;

use crate::datetime::DateTime;
use crate::dsl;
use crate::interp::type_check;
use crate::nl::ExampleParse;
use crate::registry::{Registry, StateStore, StoreError};
use crate::ui::UiBindings;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("unknown app `{0}`")]
    UnknownApp(String),
    #[error("cannot read {path}: {detail}")]
    Io { path: String, detail: String },
    #[error("bad seed data: {0}")]
    Seed(#[from] StoreError),
    #[error("example {index} (`{dsl}`) is invalid: {detail}")]
    Example {
        index: usize,
        dsl: String,
        detail: String,
    },
}

#[derive(Clone)]
pub struct AppBundle {
    pub name: String,
    pub registry: Arc<Registry>,
    pub bindings: Arc<UiBindings>,
    pub seed: serde_json::Value,
    pub examples: Vec<ExampleParse>,
    /// Default "now" for commands run against the seed data.
    pub reference_time: DateTime,
}

impl AppBundle {
    pub fn new(
        name: &str,
        registry: Registry,
        bindings: UiBindings,
        seed: serde_json::Value,
        examples: Vec<ExampleParse>,
        reference_time: DateTime,
    ) -> Self {
        AppBundle {
            name: name.to_string(),
            registry: Arc::new(registry),
            bindings: Arc::new(bindings),
            seed,
            examples,
            reference_time,
        }
    }

    /// A bundled app by name, or a directory holding `seed.json` and/or
    /// `examples.json` that override the food ordering defaults.
    pub fn load(spec: &str) -> Result<AppBundle, AppError> {
        let path = Path::new(spec);
        let bundle = if spec == foodordering::NAME {
            foodordering::bundle()
        } else if path.is_dir() {
            let mut bundle = foodordering::bundle();
            if let Some(seed) = read_json(&path.join("seed.json"))? {
                bundle.seed = seed;
            }
            if let Some(examples) = read_json(&path.join("examples.json"))? {
                bundle.examples = serde_json::from_value(examples).map_err(|e| AppError::Io {
                    path: path.join("examples.json").display().to_string(),
                    detail: e.to_string(),
                })?;
            }
            bundle
        } else {
            return Err(AppError::UnknownApp(spec.to_string()));
        };
        bundle.validate()?;
        Ok(bundle)
    }

    /// A store holding the seed data.
    pub fn fresh_store(&self) -> Result<StateStore, StoreError> {
        let mut store = StateStore::new(Arc::clone(&self.registry));
        store.load_json(&self.seed)?;
        Ok(store)
    }

    /// Seed loads and every example parses and type-checks.
    pub fn validate(&self) -> Result<(), AppError> {
        self.fresh_store()?;
        for (index, ex) in self.examples.iter().enumerate() {
            let invalid = |detail: String| AppError::Example {
                index,
                dsl: ex.dsl.clone(),
                detail,
            };
            let expr = dsl::parse(&ex.dsl).map_err(|e| invalid(e.to_string()))?;
            type_check(&expr, &self.registry).map_err(|e| invalid(e.to_string()))?;
            if let Some(class) = &ex.context_class {
                if !self.registry.contains(class) {
                    return Err(invalid(format!("unknown context class `{class}`")));
                }
            }
        }
        Ok(())
    }
}

fn read_json(path: &Path) -> Result<Option<serde_json::Value>, AppError> {
    if !path.exists() {
        return Ok(None);
    }
    let io = |detail: String| AppError::Io {
        path: path.display().to_string(),
        detail,
    };
    let text = std::fs::read_to_string(path).map_err(|e| io(e.to_string()))?;
    serde_json::from_str(&text).map(Some).map_err(|e| io(e.to_string()))
}
