//! JSON snapshots: `{"Class": [{"id": "...", "prop": value, ...}, ...]}`.
//! Instance references are written as `{"$ref": {"class": "...", "id": "..."}}`
//! and DateTime values as ISO-8601 strings.

use std::path::Path;

use indexmap::IndexMap;
use serde_json::{json, Map, Value as Json};

use super::store::{Instances, Props, StateStore, StoreError};
use crate::datetime::{self, DateTime};
use crate::types::TypeRef;
use crate::value::{InstanceRef, Value};

pub fn value_to_json(value: &Value) -> Json {
    match value {
        Value::Bool(b) => Json::Bool(*b),
        Value::Int(v) => json!(v),
        Value::Float(v) => json!(v),
        Value::Str(s) => Json::String(s.clone()),
        Value::FieldPath(path) => Json::String(format!(".{}", path.join("."))),
        Value::Instance(r) => json!({"$ref": {"class": r.class, "id": r.id}}),
        Value::DateTime(dt) => Json::String(dt.to_iso()),
        Value::Array(items) => Json::Array(items.iter().map(value_to_json).collect()),
        Value::Void => Json::Null,
    }
}

fn malformed(msg: impl Into<String>) -> StoreError {
    StoreError::MalformedSnapshot(msg.into())
}

pub fn value_from_json(json: &Json, ty: &TypeRef) -> Result<Value, StoreError> {
    let mismatch = || malformed(format!("expected {ty}, found {json}"));
    match ty {
        TypeRef::Boolean => json.as_bool().map(Value::Bool).ok_or_else(mismatch),
        TypeRef::Integer => json.as_i64().map(Value::Int).ok_or_else(mismatch),
        TypeRef::Float => json.as_f64().map(Value::Float).ok_or_else(mismatch),
        TypeRef::String => json
            .as_str()
            .map(|s| Value::Str(s.to_string()))
            .ok_or_else(mismatch),
        TypeRef::Void => json.is_null().then_some(Value::Void).ok_or_else(mismatch),
        TypeRef::Class(c) if c == datetime::CLASS => json
            .as_str()
            .ok_or_else(mismatch)?
            .parse::<DateTime>()
            .map(Value::DateTime)
            .map_err(|e| malformed(e.to_string())),
        TypeRef::Class(c) => {
            let target = json.get("$ref").ok_or_else(mismatch)?;
            let class = target.get("class").and_then(Json::as_str).ok_or_else(mismatch)?;
            let id = target.get("id").and_then(Json::as_str).ok_or_else(mismatch)?;
            if class != c {
                return Err(malformed(format!("reference to {class} where {c} expected")));
            }
            Ok(Value::instance(class, id))
        }
        TypeRef::ListOf(inner) => json
            .as_array()
            .ok_or_else(mismatch)?
            .iter()
            .map(|item| value_from_json(item, inner))
            .collect::<Result<Vec<_>, _>>()
            .map(Value::Array),
        TypeRef::FieldPath(_) => json
            .as_str()
            .and_then(|s| s.strip_prefix('.'))
            .map(|s| Value::FieldPath(s.split('.').map(str::to_string).collect()))
            .ok_or_else(mismatch),
    }
}

impl StateStore {
    /// Stored properties of one instance (plus `id`), optionally with
    /// computed properties.
    pub fn instance_json(&self, r: &InstanceRef, computed: bool) -> Result<Json, StoreError> {
        let desc = self
            .registry()
            .class(&r.class)
            .ok_or_else(|| StoreError::UnknownClass(r.class.clone()))?;
        let props = self
            .instances
            .get(&r.class)
            .and_then(|m| m.get(&r.id))
            .ok_or_else(|| StoreError::UnknownInstance(r.clone()))?;
        let mut out = Map::new();
        out.insert("id".into(), Json::String(r.id.clone()));
        for p in &desc.properties {
            if p.name == "id" {
                continue;
            }
            if p.is_stored() {
                if let Some(v) = props.get(&p.name) {
                    out.insert(p.name.clone(), value_to_json(v));
                }
            } else if computed && p.genie_exposed {
                if let Ok(v) = self.get_property(r, &p.name) {
                    out.insert(p.name.clone(), value_to_json(&v));
                }
            }
        }
        Ok(Json::Object(out))
    }

    pub fn to_json(&self) -> Json {
        let mut out = Map::new();
        for class in self.registry().classes() {
            let Some(instances) = self.instances.get(&class.name) else {
                continue;
            };
            if instances.is_empty() {
                continue;
            }
            let records = instances
                .keys()
                .map(|id| {
                    self.instance_json(&InstanceRef::new(&class.name, id), false)
                        .expect("stored instance")
                })
                .collect();
            out.insert(class.name.clone(), Json::Array(records));
        }
        Json::Object(out)
    }

    /// Replace the contents with a snapshot and reset the revision. On
    /// error the store is left untouched.
    pub fn load_json(&mut self, json: &Json) -> Result<(), StoreError> {
        let object = json
            .as_object()
            .ok_or_else(|| malformed("top level must be an object"))?;
        let mut instances: Instances = IndexMap::new();
        for (class, records) in object {
            let desc = self
                .registry()
                .class(class)
                .ok_or_else(|| malformed(format!("unknown class `{class}`")))?;
            let records = records
                .as_array()
                .ok_or_else(|| malformed(format!("`{class}` must map to an array")))?;
            let slot = instances.entry(class.clone()).or_default();
            for record in records {
                let fields = record
                    .as_object()
                    .ok_or_else(|| malformed(format!("`{class}` records must be objects")))?;
                let id = fields
                    .get("id")
                    .and_then(Json::as_str)
                    .ok_or_else(|| malformed(format!("`{class}` record without string id")))?;
                let mut props = Props::new();
                for (name, raw) in fields {
                    if name == "id" || raw.is_null() {
                        continue;
                    }
                    let p = desc
                        .stored_properties()
                        .find(|p| &p.name == name)
                        .ok_or_else(|| malformed(format!("`{class}` has no property `{name}`")))?;
                    let value = value_from_json(raw, &p.value_type)
                        .map_err(|e| malformed(format!("{class}.{name}: {e}")))?;
                    props.insert(name.clone(), value);
                }
                for p in desc.stored_properties() {
                    if p.name != "id" && p.required && !props.contains_key(&p.name) {
                        return Err(malformed(format!("{class} `{id}` lacks `{}`", p.name)));
                    }
                }
                if slot.insert(id.to_string(), props).is_some() {
                    return Err(malformed(format!("duplicate {class} id `{id}`")));
                }
            }
        }
        check_references(&instances)?;
        self.instances = instances;
        self.reset_revision();
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        let text = serde_json::to_string_pretty(&self.to_json())
            .map_err(|e| StoreError::Io(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| StoreError::Io(e.to_string()))
    }

    pub fn load(&mut self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        let text = std::fs::read_to_string(path).map_err(|e| StoreError::Io(e.to_string()))?;
        let json: Json = serde_json::from_str(&text).map_err(|e| malformed(e.to_string()))?;
        self.load_json(&json)
    }
}

fn check_references(instances: &Instances) -> Result<(), StoreError> {
    fn walk(instances: &Instances, v: &Value) -> Result<(), StoreError> {
        match v {
            Value::Instance(r) => {
                if instances.get(&r.class).is_some_and(|m| m.contains_key(&r.id)) {
                    Ok(())
                } else {
                    Err(malformed(format!("dangling reference {r}")))
                }
            }
            Value::Array(items) => items.iter().try_for_each(|i| walk(instances, i)),
            _ => Ok(()),
        }
    }
    instances
        .values()
        .flat_map(IndexMap::values)
        .flat_map(|props| props.values())
        .try_for_each(|v| walk(instances, v))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;
    use std::sync::Arc;

    use super::*;
    use crate::registry::{ClassDescriptor, FunctionDescriptor, PropertyDescriptor, Registry};

    fn registry() -> Arc<Registry> {
        let mut r = Registry::new();
        r.register_class(
            ClassDescriptor::data("Order")
                .property(PropertyDescriptor::new("orderPlaced", TypeRef::Boolean))
                .property(PropertyDescriptor::new("placedAt", TypeRef::class("DateTime")).optional())
                .property(
                    PropertyDescriptor::new("items", TypeRef::list_of(TypeRef::class("Item")))
                        .optional(),
                )
                .function(FunctionDescriptor::all("Order"))
                .function(FunctionDescriptor::field_constructor("Order", &[])),
        )
        .unwrap();
        r.register_class(
            ClassDescriptor::helper("Item").property(PropertyDescriptor::new("qty", TypeRef::Integer)),
        )
        .unwrap();
        Arc::new(r)
    }

    fn populated() -> StateStore {
        let mut store = StateStore::new(registry());
        let item = store
            .create_instance("Item", BTreeMap::from([("qty".to_string(), Value::Int(2))]))
            .unwrap();
        store
            .create_instance(
                "Order",
                BTreeMap::from([
                    ("id".to_string(), Value::Str("o1".into())),
                    ("orderPlaced".to_string(), Value::Bool(true)),
                    (
                        "placedAt".to_string(),
                        Value::DateTime("2023-03-03T18:30:00".parse().unwrap()),
                    ),
                    ("items".to_string(), Value::Array(vec![Value::Instance(item)])),
                ]),
            )
            .unwrap();
        store
    }

    #[test]
    fn save_load_round_trip() {
        let store = populated();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.json");
        store.save(&path).unwrap();
        let mut loaded = StateStore::new(registry());
        loaded.load(&path).unwrap();
        assert!(loaded.same_contents(&store));
        assert_eq!(loaded.revision(), 0);
        assert_eq!(loaded.all("Order").unwrap(), store.all("Order").unwrap());
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"$ref\""));
        assert!(text.contains("2023-03-03T18:30:00"));
    }

    #[test]
    fn malformed_leaves_store_unchanged() {
        let mut store = populated();
        let before = store.to_json();
        for bad in [
            json!([]),
            json!({"Nope": []}),
            json!({"Order": [{"id": "x"}]}),
            json!({"Order": [{"id": "x", "orderPlaced": "yes"}]}),
            json!({"Order": [{"id": "x", "orderPlaced": true, "items": [{"$ref": {"class": "Item", "id": "gone"}}]}]}),
        ] {
            let err = store.load_json(&bad).unwrap_err();
            assert!(matches!(err, StoreError::MalformedSnapshot(_)), "{bad}");
            assert_eq!(store.to_json(), before);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, "{ not json").unwrap();
        assert!(matches!(store.load(&path), Err(StoreError::MalformedSnapshot(_))));
        assert!(matches!(
            store.load(dir.path().join("missing.json")),
            Err(StoreError::Io(_))
        ));
    }

    #[test]
    fn empty_round_trip() {
        let store = StateStore::new(registry());
        assert_eq!(store.to_json(), json!({}));
        let mut other = populated();
        other.load_json(&store.to_json()).unwrap();
        assert_eq!(other.instance_count(), 0);
    }
}
