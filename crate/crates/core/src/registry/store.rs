use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use indexmap::IndexMap;

use super::{ClassDescriptor, ClassKind, Registry};
use crate::value::{InstanceRef, Value};

pub(super) type Props = BTreeMap<String, Value>;
pub(super) type Instances = IndexMap<String, IndexMap<String, Props>>;

#[derive(Clone, Debug, PartialEq)]
pub enum Change {
    Created(Props),
    Set { property: String, value: Value },
    Deleted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChangeEvent {
    pub class: String,
    pub id: String,
    pub change: Change,
    pub revision: u64,
}

impl ChangeEvent {
    pub fn property(&self) -> Option<&str> {
        match &self.change {
            Change::Set { property, .. } => Some(property),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum StoreError {
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("no instance {0}")]
    UnknownInstance(InstanceRef),
    #[error("`{class}` has no stored property `{property}`")]
    UnknownProperty { class: String, property: String },
    #[error("`{class}.{property}` expects {expected}, got {got}")]
    TypeMismatch {
        class: String,
        property: String,
        expected: String,
        got: String,
    },
    #[error("`{class}` already has an instance with id `{id}`")]
    DuplicateId { class: String, id: String },
    #[error("`{class}` requires `{property}`")]
    MissingField { class: String, property: String },
    #[error("snapshot I/O failed: {0}")]
    Io(String),
    #[error("malformed snapshot: {0}")]
    MalformedSnapshot(String),
    #[error("{0}")]
    Host(String),
}

impl StoreError {
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::UnknownClass(_) => "UnknownClass",
            StoreError::UnknownInstance(_) => "UnknownInstance",
            StoreError::UnknownProperty { .. } => "UnknownProperty",
            StoreError::TypeMismatch { .. } => "TypeMismatch",
            StoreError::DuplicateId { .. } => "DuplicateId",
            StoreError::MissingField { .. } => "MissingField",
            StoreError::Io(_) => "IoError",
            StoreError::MalformedSnapshot(_) => "MalformedSnapshot",
            StoreError::Host(_) => "HostError",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SubscriptionId(u64);

type Subscriber = Box<dyn FnMut(&ChangeEvent) + Send>;

struct Txn {
    instances: Instances,
    revision: u64,
    pending: Vec<ChangeEvent>,
}

/// In-memory instances of every registered class. Single writer; change
/// events are delivered synchronously in write order, or at commit time
/// while a transaction is open.
pub struct StateStore {
    registry: Arc<Registry>,
    pub(super) instances: Instances,
    revision: u64,
    subscribers: Vec<(SubscriptionId, Subscriber)>,
    next_subscription: u64,
    /// Highest generated id suffix per class; never reused after a delete.
    issued: std::collections::HashMap<String, usize>,
    txn: Option<Txn>,
}

impl StateStore {
    pub fn new(registry: Arc<Registry>) -> Self {
        StateStore {
            registry,
            instances: IndexMap::new(),
            revision: 0,
            subscribers: Vec::new(),
            next_subscription: 0,
            issued: Default::default(),
            txn: None,
        }
    }

    /// Same contents and revision, no subscribers.
    pub fn fork(&self) -> StateStore {
        StateStore {
            registry: self.registry.clone(),
            instances: self.instances.clone(),
            revision: self.revision,
            subscribers: Vec::new(),
            next_subscription: 0,
            issued: self.issued.clone(),
            txn: None,
        }
    }

    pub fn registry(&self) -> &Arc<Registry> {
        &self.registry
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub(super) fn reset_revision(&mut self) {
        self.revision = 0;
    }

    pub fn subscribe(&mut self, f: impl FnMut(&ChangeEvent) + Send + 'static) -> SubscriptionId {
        let id = SubscriptionId(self.next_subscription);
        self.next_subscription += 1;
        self.subscribers.push((id, Box::new(f)));
        id
    }

    pub fn unsubscribe(&mut self, id: SubscriptionId) {
        self.subscribers.retain(|(sid, _)| *sid != id);
    }

    fn class_desc(&self, class: &str) -> Result<&ClassDescriptor, StoreError> {
        self.registry
            .class(class)
            .ok_or_else(|| StoreError::UnknownClass(class.to_string()))
    }

    fn emit(&mut self, class: &str, id: &str, change: Change) {
        self.revision += 1;
        let event = ChangeEvent {
            class: class.to_string(),
            id: id.to_string(),
            change,
            revision: self.revision,
        };
        match &mut self.txn {
            Some(txn) => txn.pending.push(event),
            None => self.deliver(&event),
        }
    }

    fn deliver(&mut self, event: &ChangeEvent) {
        for (_, subscriber) in &mut self.subscribers {
            subscriber(event);
        }
    }

    /// Run `f` atomically: on `Err` every write it made is undone and no
    /// events are delivered. Nested calls join the outer transaction.
    pub fn transaction<T, E>(
        &mut self,
        f: impl FnOnce(&mut StateStore) -> Result<T, E>,
    ) -> Result<T, E> {
        if self.txn.is_some() {
            return f(self);
        }
        self.txn = Some(Txn {
            instances: self.instances.clone(),
            revision: self.revision,
            pending: Vec::new(),
        });
        let result = f(self);
        let txn = self.txn.take().expect("transaction still open");
        match result {
            Ok(value) => {
                for event in &txn.pending {
                    self.deliver(event);
                }
                Ok(value)
            }
            Err(err) => {
                self.instances = txn.instances;
                self.revision = txn.revision;
                Err(err)
            }
        }
    }

    /// Id generator: `<class>-<n>`, skipping ids already in use.
    pub fn fresh_id(&mut self, class: &str) -> String {
        let prefix = class.to_lowercase();
        let existing = self.instances.get(class);
        let floor = existing.map_or(0, IndexMap::len);
        let mut n = self.issued.get(class).copied().unwrap_or(0).max(floor) + 1;
        while existing.is_some_and(|m| m.contains_key(&format!("{prefix}-{n}"))) {
            n += 1;
        }
        self.issued.insert(class.to_string(), n);
        format!("{prefix}-{n}")
    }

    /// Store a new instance. A missing `id` is generated.
    pub fn create_instance(
        &mut self,
        class: &str,
        mut fields: BTreeMap<String, Value>,
    ) -> Result<InstanceRef, StoreError> {
        let registry = Arc::clone(&self.registry);
        let desc = registry
            .class(class)
            .ok_or_else(|| StoreError::UnknownClass(class.to_string()))?;
        let id = match fields.remove("id") {
            Some(Value::Str(id)) => id,
            Some(other) => {
                return Err(StoreError::TypeMismatch {
                    class: class.to_string(),
                    property: "id".into(),
                    expected: "String".into(),
                    got: other.to_string(),
                })
            }
            None => self.fresh_id(class),
        };
        let props = self.validate_fields(desc, fields)?;
        if self
            .instances
            .get(class)
            .is_some_and(|m| m.contains_key(&id))
        {
            return Err(StoreError::DuplicateId {
                class: class.to_string(),
                id,
            });
        }
        self.instances
            .entry(class.to_string())
            .or_default()
            .insert(id.clone(), props.clone());
        self.emit(class, &id, Change::Created(props));
        Ok(InstanceRef::new(class, id))
    }

    fn validate_fields(
        &self,
        desc: &ClassDescriptor,
        fields: BTreeMap<String, Value>,
    ) -> Result<Props, StoreError> {
        let mut props = Props::new();
        for (name, value) in fields {
            let coerced = self.check_value(desc, &name, &value)?;
            props.insert(name, coerced);
        }
        for p in desc.stored_properties() {
            if p.name != "id" && p.required && !props.contains_key(&p.name) {
                return Err(StoreError::MissingField {
                    class: desc.name.clone(),
                    property: p.name.clone(),
                });
            }
        }
        Ok(props)
    }

    fn check_value(
        &self,
        desc: &ClassDescriptor,
        property: &str,
        value: &Value,
    ) -> Result<Value, StoreError> {
        let prop = desc
            .stored_properties()
            .find(|p| p.name == property && p.name != "id")
            .ok_or_else(|| StoreError::UnknownProperty {
                class: desc.name.clone(),
                property: property.to_string(),
            })?;
        if value.is_void() && !prop.required {
            return Ok(Value::Void);
        }
        let coerced = prop
            .value_type
            .coerce(value)
            .ok_or_else(|| StoreError::TypeMismatch {
                class: desc.name.clone(),
                property: property.to_string(),
                expected: prop.value_type.to_string(),
                got: value.to_string(),
            })?;
        self.check_refs(&coerced)?;
        Ok(coerced)
    }

    fn check_refs(&self, value: &Value) -> Result<(), StoreError> {
        match value {
            Value::Instance(r) if !self.exists(r) => Err(StoreError::UnknownInstance(r.clone())),
            Value::Array(items) => items.iter().try_for_each(|v| self.check_refs(v)),
            _ => Ok(()),
        }
    }

    pub fn exists(&self, r: &InstanceRef) -> bool {
        self.instances
            .get(&r.class)
            .is_some_and(|m| m.contains_key(&r.id))
    }

    fn props(&self, r: &InstanceRef) -> Result<&Props, StoreError> {
        self.instances
            .get(&r.class)
            .and_then(|m| m.get(&r.id))
            .ok_or_else(|| StoreError::UnknownInstance(r.clone()))
    }

    /// Current value of a stored or computed property. Unset optional
    /// properties read as `Void`.
    pub fn get_property(&self, r: &InstanceRef, name: &str) -> Result<Value, StoreError> {
        let props = self.props(r)?;
        let desc = self.class_desc(&r.class)?;
        if name == "id" {
            return Ok(Value::Str(r.id.clone()));
        }
        let prop = desc
            .properties
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| StoreError::UnknownProperty {
                class: r.class.clone(),
                property: name.to_string(),
            })?;
        match &prop.getter {
            Some(getter) => getter(self, &Value::Instance(r.clone()))
                .map_err(|e| StoreError::Host(e.to_string())),
            None => Ok(props.get(name).cloned().unwrap_or(Value::Void)),
        }
    }

    /// Write a property; emits one event iff the stored value changed.
    pub fn set_property(
        &mut self,
        r: &InstanceRef,
        name: &str,
        value: Value,
    ) -> Result<(), StoreError> {
        self.props(r)?;
        let desc = self.class_desc(&r.class)?;
        let coerced = self.check_value(desc, name, &value)?;
        let props = self
            .instances
            .get_mut(&r.class)
            .and_then(|m| m.get_mut(&r.id))
            .expect("instance checked above");
        let old = props.get(name).cloned().unwrap_or(Value::Void);
        if old == coerced {
            return Ok(());
        }
        if coerced.is_void() {
            props.remove(name);
        } else {
            props.insert(name.to_string(), coerced.clone());
        }
        self.emit(
            &r.class,
            &r.id,
            Change::Set {
                property: name.to_string(),
                value: coerced,
            },
        );
        Ok(())
    }

    pub fn delete_instance(&mut self, r: &InstanceRef) -> Result<(), StoreError> {
        self.props(r)?;
        self.instances
            .get_mut(&r.class)
            .expect("class checked above")
            .shift_remove(&r.id);
        self.emit(&r.class, &r.id, Change::Deleted);
        Ok(())
    }

    /// Every instance of a data class, in creation order. Helper classes
    /// have no `All`, so this is empty for them.
    pub fn all(&self, class: &str) -> Result<Vec<InstanceRef>, StoreError> {
        let desc = self.class_desc(class)?;
        if desc.kind == ClassKind::Helper {
            return Ok(Vec::new());
        }
        Ok(self.ids(class).map(|id| InstanceRef::new(class, id)).collect())
    }

    /// Ids of every stored instance of `class`, helpers included.
    pub fn ids<'a>(&'a self, class: &str) -> impl Iterator<Item = &'a str> + 'a {
        self.instances
            .get(class)
            .into_iter()
            .flat_map(|m| m.keys().map(String::as_str))
    }

    pub fn instance_count(&self) -> usize {
        self.instances.values().map(IndexMap::len).sum()
    }

    /// Re-apply a recorded event (used to rebuild a store from its log).
    pub fn apply(&mut self, event: &ChangeEvent) -> Result<(), StoreError> {
        let r = InstanceRef::new(&event.class, &event.id);
        match &event.change {
            Change::Created(props) => {
                let mut fields = props.clone();
                fields.insert("id".into(), Value::Str(event.id.clone()));
                self.create_instance(&event.class, fields).map(|_| ())
            }
            Change::Set { property, value } => self.set_property(&r, property, value.clone()),
            Change::Deleted => self.delete_instance(&r),
        }
    }

    /// Text used for response generation: the class's custom renderer, or
    /// `Class { id: "...", prop: value, ... }` with nested instances shown as
    /// `Class(id)`.
    pub fn describe(&self, r: &InstanceRef) -> Result<String, StoreError> {
        let props = self.props(r)?;
        let desc = self.class_desc(&r.class)?;
        if let Some(render) = &desc.description_renderer {
            return Ok(render(self, r));
        }
        let mut parts = Vec::new();
        if desc.kind == ClassKind::Data {
            parts.push(format!("id: {}", Value::Str(r.id.clone())));
        }
        for p in desc.stored_properties().filter(|p| p.name != "id") {
            if let Some(v) = props.get(&p.name) {
                parts.push(format!("{}: {}", p.name, v));
            }
        }
        if parts.is_empty() {
            Ok(format!("{} {{}}", r.class))
        } else {
            Ok(format!("{} {{ {} }}", r.class, parts.join(", ")))
        }
    }

    /// Describe any runtime value; instances use [`StateStore::describe`].
    pub fn describe_value(&self, value: &Value) -> String {
        match value {
            Value::Instance(r) => self.describe(r).unwrap_or_else(|_| r.to_string()),
            Value::Array(items) => {
                let inner: Vec<String> = items.iter().map(|v| self.describe_value(v)).collect();
                format!("[{}]", inner.join(", "))
            }
            Value::DateTime(dt) => dt.to_iso(),
            other => other.to_string(),
        }
    }

    /// Structural equality of contents (ignores revision and subscribers).
    pub fn same_contents(&self, other: &StateStore) -> bool {
        let classes: HashSet<&String> = self
            .instances
            .iter()
            .chain(other.instances.iter())
            .filter(|(_, m)| !m.is_empty())
            .map(|(c, _)| c)
            .collect();
        classes.into_iter().all(|c| {
            let a = self.instances.get(c);
            let b = other.instances.get(c);
            match (a, b) {
                (Some(a), Some(b)) => a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| x == y),
                _ => false,
            }
        })
    }
}

impl std::fmt::Debug for StateStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StateStore")
            .field("revision", &self.revision)
            .field("instances", &self.instances)
            .finish_non_exhaustive()
    }
}
