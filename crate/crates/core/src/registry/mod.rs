//! Class descriptors and the instance store.
//!
//! A [`Registry`] holds every registered class. Data classes must expose an
//! `id` property, a constructor and a static `All`; registration adds a static
//! `Get(id:)` to data classes and a static `Current()` to every class that
//! does not define its own.
//!
//! Member lookup is exact first, then by normalized name (first letter
//! lower-cased), then by declared alias, so `current()` and `Current` resolve
//! to the same member.

mod snapshot;
mod store;

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;

use crate::datetime::{self, Clock};
use crate::types::TypeRef;
use crate::value::{InstanceRef, Value};

pub use snapshot::{value_from_json, value_to_json};
pub use store::{Change, ChangeEvent, StateStore, StoreError, SubscriptionId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassKind {
    Data,
    Helper,
}

/// Error raised by a host callable; surfaces as an execution error.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{code}: {message}")]
pub struct HostError {
    pub code: String,
    pub message: String,
}

impl HostError {
    pub fn new(code: impl Into<String>, message: impl Into<String>) -> Self {
        HostError {
            code: code.into(),
            message: message.into(),
        }
    }
}

impl From<StoreError> for HostError {
    fn from(err: StoreError) -> Self {
        HostError::new(err.code(), err.to_string())
    }
}

/// What a host function can touch while it runs.
pub struct HostCtx<'a> {
    pub store: &'a mut StateStore,
    pub clock: &'a dyn Clock,
}

/// Bound arguments, in declared parameter order with defaults filled.
pub struct Args<'a> {
    params: &'a [ParamDescriptor],
    values: Vec<Value>,
}

impl<'a> Args<'a> {
    pub fn new(params: &'a [ParamDescriptor], values: Vec<Value>) -> Self {
        debug_assert_eq!(params.len(), values.len());
        Args { params, values }
    }

    pub fn get(&self, name: &str) -> Result<&Value, HostError> {
        self.params
            .iter()
            .position(|p| p.name == name)
            .map(|i| &self.values[i])
            .ok_or_else(|| HostError::new("ArgumentError", format!("no parameter `{name}`")))
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }

    pub fn int(&self, name: &str) -> Result<i64, HostError> {
        match self.get(name)? {
            Value::Int(v) => Ok(*v),
            other => Err(mistyped(name, "Int", other)),
        }
    }

    /// `None` when the argument was omitted (bound to a `Void` default).
    pub fn opt_int(&self, name: &str) -> Result<Option<i64>, HostError> {
        match self.get(name)? {
            Value::Void => Ok(None),
            Value::Int(v) => Ok(Some(*v)),
            other => Err(mistyped(name, "Int", other)),
        }
    }

    pub fn str(&self, name: &str) -> Result<&str, HostError> {
        match self.get(name)? {
            Value::Str(s) => Ok(s),
            other => Err(mistyped(name, "String", other)),
        }
    }

    pub fn instance(&self, name: &str) -> Result<&InstanceRef, HostError> {
        match self.get(name)? {
            Value::Instance(r) => Ok(r),
            other => Err(mistyped(name, "instance", other)),
        }
    }

    pub fn instances(&self, name: &str) -> Result<Vec<InstanceRef>, HostError> {
        match self.get(name)? {
            Value::Array(items) => items
                .iter()
                .map(|v| v.as_instance().cloned().ok_or_else(|| mistyped(name, "[instance]", v)))
                .collect(),
            other => Err(mistyped(name, "[instance]", other)),
        }
    }
}

fn mistyped(name: &str, expected: &str, got: &Value) -> HostError {
    HostError::new(
        "ArgumentError",
        format!("argument `{name}` should be {expected}, got {got}"),
    )
}

pub type HostFn =
    Arc<dyn Fn(&mut HostCtx<'_>, &Value, &Args<'_>) -> Result<Value, HostError> + Send + Sync>;
pub type PropertyGetter = Arc<dyn Fn(&StateStore, &Value) -> Result<Value, HostError> + Send + Sync>;
pub type DescribeFn = Arc<dyn Fn(&StateStore, &InstanceRef) -> String + Send + Sync>;

#[derive(Clone)]
pub enum FunctionImpl {
    Host(HostFn),
    /// Synthesized primary-key lookup.
    Get,
    /// Synthesized screen reference, resolved by UI mapping.
    Current,
    Unimplemented,
}

impl fmt::Debug for FunctionImpl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionImpl::Host(_) => f.write_str("Host(..)"),
            FunctionImpl::Get => f.write_str("Get"),
            FunctionImpl::Current => f.write_str("Current"),
            FunctionImpl::Unimplemented => f.write_str("Unimplemented"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParamDescriptor {
    pub name: String,
    pub ty: TypeRef,
    /// `Some(Value::Void)` marks an optional parameter with no value.
    pub default: Option<Value>,
}

#[derive(Clone)]
pub struct PropertyDescriptor {
    pub name: String,
    pub value_type: TypeRef,
    pub genie_exposed: bool,
    pub exemplar: Option<String>,
    pub is_static: bool,
    pub required: bool,
    pub getter: Option<PropertyGetter>,
}

impl fmt::Debug for PropertyDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PropertyDescriptor")
            .field("name", &self.name)
            .field("value_type", &self.value_type)
            .field("genie_exposed", &self.genie_exposed)
            .field("computed", &self.getter.is_some())
            .finish()
    }
}

impl PropertyDescriptor {
    pub fn new(name: impl Into<String>, value_type: TypeRef) -> Self {
        PropertyDescriptor {
            name: name.into(),
            value_type,
            genie_exposed: true,
            exemplar: None,
            is_static: false,
            required: true,
            getter: None,
        }
    }

    pub fn exemplar(mut self, text: impl Into<String>) -> Self {
        self.exemplar = Some(text.into());
        self
    }

    pub fn hidden(mut self) -> Self {
        self.genie_exposed = false;
        self
    }

    pub fn optional(mut self) -> Self {
        self.required = false;
        self
    }

    /// Static properties become zero-argument static functions at
    /// registration. They must be computed.
    pub fn static_property(mut self) -> Self {
        self.is_static = true;
        self
    }

    pub fn computed(mut self, getter: PropertyGetter) -> Self {
        self.getter = Some(getter);
        self.required = false;
        self
    }

    pub fn is_stored(&self) -> bool {
        self.getter.is_none() && !self.is_static
    }
}

#[derive(Clone, Debug)]
pub struct FunctionDescriptor {
    pub name: String,
    pub aliases: Vec<String>,
    pub params: Vec<ParamDescriptor>,
    pub return_type: TypeRef,
    pub is_static: bool,
    pub genie_exposed: bool,
    pub exemplar: Option<String>,
    pub constructor: bool,
    pub implementation: FunctionImpl,
}

impl FunctionDescriptor {
    fn new(name: impl Into<String>, return_type: TypeRef, is_static: bool) -> Self {
        FunctionDescriptor {
            name: name.into(),
            aliases: Vec::new(),
            params: Vec::new(),
            return_type,
            is_static,
            genie_exposed: true,
            exemplar: None,
            constructor: false,
            implementation: FunctionImpl::Unimplemented,
        }
    }

    pub fn static_fn(name: impl Into<String>, return_type: TypeRef) -> Self {
        Self::new(name, return_type, true)
    }

    pub fn method(name: impl Into<String>, return_type: TypeRef) -> Self {
        Self::new(name, return_type, false)
    }

    /// Static `All()` returning every stored instance in creation order.
    pub fn all(class: &str) -> Self {
        let owned = class.to_string();
        Self::static_fn("All", TypeRef::list_of(TypeRef::class(class)))
            .exemplar(format!("all {}s", class.to_lowercase()))
            .implement(move |ctx, _recv, _args| {
                Ok(Value::Array(
                    ctx.store.all(&owned)?.into_iter().map(Value::Instance).collect(),
                ))
            })
    }

    /// A constructor that stores one instance whose fields are the arguments.
    pub fn field_constructor(class: &str, params: &[(&str, TypeRef)]) -> Self {
        let owned = class.to_string();
        let mut f = Self::static_fn("Create", TypeRef::class(class)).as_constructor();
        for (name, ty) in params {
            f = f.param(*name, ty.clone());
        }
        f.implement(move |ctx, _recv, args| {
            let fields = args
                .params
                .iter()
                .zip(args.values())
                .filter(|(_, v)| !v.is_void())
                .map(|(p, v)| (p.name.clone(), v.clone()))
                .collect();
            Ok(Value::Instance(ctx.store.create_instance(&owned, fields)?))
        })
    }

    pub fn param(mut self, name: impl Into<String>, ty: TypeRef) -> Self {
        self.params.push(ParamDescriptor {
            name: name.into(),
            ty,
            default: None,
        });
        self
    }

    pub fn param_default(mut self, name: impl Into<String>, ty: TypeRef, default: Value) -> Self {
        self.params.push(ParamDescriptor {
            name: name.into(),
            ty,
            default: Some(default),
        });
        self
    }

    pub fn exemplar(mut self, text: impl Into<String>) -> Self {
        self.exemplar = Some(text.into());
        self
    }

    pub fn alias(mut self, name: impl Into<String>) -> Self {
        self.aliases.push(name.into());
        self
    }

    pub fn hidden(mut self) -> Self {
        self.genie_exposed = false;
        self
    }

    pub fn as_constructor(mut self) -> Self {
        self.constructor = true;
        self
    }

    pub fn implement<F>(mut self, f: F) -> Self
    where
        F: Fn(&mut HostCtx<'_>, &Value, &Args<'_>) -> Result<Value, HostError>
            + Send
            + Sync
            + 'static,
    {
        self.implementation = FunctionImpl::Host(Arc::new(f));
        self
    }
}

#[derive(Clone)]
pub struct ClassDescriptor {
    pub name: String,
    pub kind: ClassKind,
    pub properties: Vec<PropertyDescriptor>,
    pub functions: Vec<FunctionDescriptor>,
    pub description_renderer: Option<DescribeFn>,
}

impl fmt::Debug for ClassDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClassDescriptor")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("properties", &self.properties)
            .field("functions", &self.functions)
            .finish_non_exhaustive()
    }
}

impl ClassDescriptor {
    pub fn new(name: impl Into<String>, kind: ClassKind) -> Self {
        ClassDescriptor {
            name: name.into(),
            kind,
            properties: Vec::new(),
            functions: Vec::new(),
            description_renderer: None,
        }
    }

    pub fn data(name: impl Into<String>) -> Self {
        Self::new(name, ClassKind::Data).property(
            PropertyDescriptor::new("id", TypeRef::String).exemplar("unique identifier"),
        )
    }

    pub fn helper(name: impl Into<String>) -> Self {
        Self::new(name, ClassKind::Helper)
    }

    pub fn property(mut self, p: PropertyDescriptor) -> Self {
        self.properties.push(p);
        self
    }

    pub fn function(mut self, f: FunctionDescriptor) -> Self {
        self.functions.push(f);
        self
    }

    pub fn describe_with<F>(mut self, f: F) -> Self
    where
        F: Fn(&StateStore, &InstanceRef) -> String + Send + Sync + 'static,
    {
        self.description_renderer = Some(Arc::new(f));
        self
    }

    pub fn find_property(&self, name: &str) -> Option<&PropertyDescriptor> {
        self.properties
            .iter()
            .find(|p| p.name == name)
            .or_else(|| {
                let wanted = normalize(name);
                self.properties.iter().find(|p| normalize(&p.name) == wanted)
            })
    }

    /// Resolve a function by exact name, normalized name, then alias.
    pub fn find_function(&self, name: &str) -> Option<&FunctionDescriptor> {
        if let Some(f) = self.functions.iter().find(|f| f.name == name) {
            return Some(f);
        }
        let wanted = normalize(name);
        self.functions.iter().find(|f| {
            normalize(&f.name) == wanted || f.aliases.iter().any(|a| normalize(a) == wanted)
        })
    }

    pub fn stored_properties(&self) -> impl Iterator<Item = &PropertyDescriptor> {
        self.properties.iter().filter(|p| p.is_stored())
    }

    fn member_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.properties.iter().map(|p| p.name.clone()).collect();
        for f in &self.functions {
            names.push(f.name.clone());
            names.extend(f.aliases.iter().cloned());
        }
        names
    }
}

/// Lower-case the first character: `Current` and `current` are one name.
pub fn normalize(name: &str) -> String {
    let mut chars = name.chars();
    match chars.next() {
        Some(first) => first.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum RegistryError {
    #[error("class `{0}` is already registered")]
    DuplicateClass(String),
    #[error("class `{class}` violates its contract: {detail}")]
    ContractViolation { class: String, detail: String },
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("`{owner}` refers to unregistered type `{missing}`")]
    UnresolvedType { owner: String, missing: String },
}

#[derive(Clone, Debug, Default)]
pub struct Registry {
    classes: IndexMap<String, Arc<ClassDescriptor>>,
}

impl Registry {
    /// A registry preloaded with the `DateTime` helper.
    pub fn new() -> Self {
        let mut registry = Registry::empty();
        registry
            .register_class(datetime::class_descriptor())
            .expect("DateTime descriptor satisfies the helper contract");
        registry
    }

    pub fn empty() -> Self {
        Registry::default()
    }

    pub fn register_class(&mut self, desc: ClassDescriptor) -> Result<(), RegistryError> {
        if self.classes.contains_key(&desc.name) {
            return Err(RegistryError::DuplicateClass(desc.name));
        }
        let desc = lower_static_properties(desc)?;
        check_contract(&desc)?;
        let name = desc.name.clone();
        self.classes.insert(name.clone(), Arc::new(desc));
        self.synthesize_members(&name)
    }

    /// Add `Get(id:)` to data classes and `Current()` to every class that
    /// lacks one. Idempotent.
    pub fn synthesize_members(&mut self, class: &str) -> Result<(), RegistryError> {
        let entry = self
            .classes
            .get_mut(class)
            .ok_or_else(|| RegistryError::UnknownClass(class.to_string()))?;
        let desc = Arc::make_mut(entry);
        let this = TypeRef::class(&desc.name);
        if desc.kind == ClassKind::Data && desc.find_function("Get").is_none() {
            let mut get = FunctionDescriptor::static_fn("Get", this.clone())
                .param("id", TypeRef::String)
                .exemplar(format!("the {} with a given id", desc.name.to_lowercase()));
            get.implementation = FunctionImpl::Get;
            desc.functions.push(get);
        }
        if desc.find_function("Current").is_none() {
            let mut current = FunctionDescriptor::static_fn("Current", this).exemplar(format!(
                "this {} (the one the user is pointing at or looking at)",
                desc.name.to_lowercase()
            ));
            current.implementation = FunctionImpl::Current;
            desc.functions.push(current);
        }
        Ok(())
    }

    pub fn class(&self, name: &str) -> Option<&ClassDescriptor> {
        self.classes.get(name).map(Arc::as_ref)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.classes.contains_key(name)
    }

    /// Classes in registration order.
    pub fn classes(&self) -> impl Iterator<Item = &ClassDescriptor> {
        self.classes.values().map(Arc::as_ref)
    }

    /// Every type mentioned by a member must name a registered class.
    pub fn check_types(&self) -> Result<(), RegistryError> {
        for class in self.classes() {
            let mut types: Vec<(String, &TypeRef)> = class
                .properties
                .iter()
                .map(|p| (format!("{}.{}", class.name, p.name), &p.value_type))
                .collect();
            for f in &class.functions {
                let owner = format!("{}.{}", class.name, f.name);
                types.push((owner.clone(), &f.return_type));
                types.extend(f.params.iter().map(|p| (owner.clone(), &p.ty)));
            }
            for (owner, ty) in types {
                if let Some(missing) = ty.referenced_class() {
                    if !self.contains(missing) {
                        return Err(RegistryError::UnresolvedType {
                            owner,
                            missing: missing.to_string(),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

fn lower_static_properties(mut desc: ClassDescriptor) -> Result<ClassDescriptor, RegistryError> {
    let (statics, instance): (Vec<_>, Vec<_>) =
        desc.properties.drain(..).partition(|p| p.is_static);
    desc.properties = instance;
    for p in statics {
        let Some(getter) = p.getter.clone() else {
            return Err(RegistryError::ContractViolation {
                class: desc.name.clone(),
                detail: format!("static property `{}` needs a getter", p.name),
            });
        };
        let mut f = FunctionDescriptor::static_fn(p.name.clone(), p.value_type.clone())
            .implement(move |ctx, recv, _args| getter(ctx.store, recv));
        f.genie_exposed = p.genie_exposed;
        f.exemplar = p.exemplar.clone();
        desc.functions.push(f);
    }
    Ok(desc)
}

fn check_contract(desc: &ClassDescriptor) -> Result<(), RegistryError> {
    let violation = |detail: String| RegistryError::ContractViolation {
        class: desc.name.clone(),
        detail,
    };

    let mut seen = HashSet::new();
    for name in desc.member_names() {
        if !seen.insert(normalize(&name)) {
            return Err(violation(format!("member name `{name}` is not unique")));
        }
    }
    for f in &desc.functions {
        let mut params = HashSet::new();
        if let Some(dup) = f.params.iter().find(|p| !params.insert(p.name.as_str())) {
            return Err(violation(format!(
                "function `{}` repeats parameter `{}`",
                f.name, dup.name
            )));
        }
        if matches!(f.implementation, FunctionImpl::Unimplemented) {
            return Err(violation(format!("function `{}` has no implementation", f.name)));
        }
    }

    if desc.kind == ClassKind::Data {
        let this = TypeRef::class(&desc.name);
        match desc.properties.iter().find(|p| p.name == "id") {
            Some(p) if p.value_type == TypeRef::String && p.is_stored() => {}
            Some(_) => return Err(violation("`id` must be a stored String property".into())),
            None => return Err(violation("missing `id` property".into())),
        }
        let has_all = desc.functions.iter().any(|f| {
            f.name == "All" && f.is_static && f.return_type == TypeRef::list_of(this.clone())
        });
        if !has_all {
            return Err(violation(format!("missing static `All() -> [{}]`", desc.name)));
        }
        let has_ctor = desc
            .functions
            .iter()
            .any(|f| f.constructor && f.is_static && f.return_type == this);
        if !has_ctor {
            return Err(violation("missing constructor".into()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn order_class() -> ClassDescriptor {
        ClassDescriptor::data("Order")
            .property(PropertyDescriptor::new("orderPlaced", TypeRef::Boolean))
            .function(FunctionDescriptor::all("Order"))
            .function(FunctionDescriptor::field_constructor(
                "Order",
                &[("orderPlaced", TypeRef::Boolean)],
            ))
    }

    #[test]
    fn data_class_gets_get_and_current() {
        let mut r = Registry::new();
        r.register_class(order_class()).unwrap();
        let order = r.class("Order").unwrap();
        assert!(matches!(
            order.find_function("Get").unwrap().implementation,
            FunctionImpl::Get
        ));
        let current = order.find_function("current").unwrap();
        assert!(matches!(current.implementation, FunctionImpl::Current));
        assert_eq!(current.name, "Current");
        assert!(order.find_function("Current").is_some());
    }

    #[test]
    fn helper_without_all_is_fine() {
        let mut r = Registry::new();
        r.register_class(
            ClassDescriptor::helper("OrderItem")
                .property(PropertyDescriptor::new("quantity", TypeRef::Integer)),
        )
        .unwrap();
        let item = r.class("OrderItem").unwrap();
        assert!(item.find_function("Current").is_some());
        assert!(item.find_function("Get").is_none());
    }

    #[test]
    fn duplicate_class() {
        let mut r = Registry::new();
        r.register_class(order_class()).unwrap();
        assert_eq!(
            r.register_class(order_class()),
            Err(RegistryError::DuplicateClass("Order".into()))
        );
    }

    #[test]
    fn data_contract_violations() {
        let mut r = Registry::new();
        let no_all = ClassDescriptor::data("A").function(FunctionDescriptor::field_constructor("A", &[]));
        assert!(matches!(
            r.register_class(no_all),
            Err(RegistryError::ContractViolation { .. })
        ));
        let no_ctor = ClassDescriptor::data("B").function(FunctionDescriptor::all("B"));
        assert!(matches!(
            r.register_class(no_ctor),
            Err(RegistryError::ContractViolation { .. })
        ));
        let no_id = ClassDescriptor::new("C", ClassKind::Data)
            .function(FunctionDescriptor::all("C"))
            .function(FunctionDescriptor::field_constructor("C", &[]));
        assert!(matches!(
            r.register_class(no_id),
            Err(RegistryError::ContractViolation { .. })
        ));
    }

    #[test]
    fn names_unique_after_normalization() {
        let mut r = Registry::new();
        let clash = order_class()
            .property(PropertyDescriptor::new("total", TypeRef::Float))
            .function(
                FunctionDescriptor::method("Total", TypeRef::Float)
                    .implement(|_, _, _| Ok(Value::Float(0.0))),
            );
        assert!(matches!(
            r.register_class(clash),
            Err(RegistryError::ContractViolation { .. })
        ));
    }

    #[test]
    fn static_property_becomes_function() {
        let mut r = Registry::empty();
        r.register_class(ClassDescriptor::helper("Config").property(
            PropertyDescriptor::new("Version", TypeRef::Integer)
                .static_property()
                .computed(Arc::new(|_, _| Ok(Value::Int(3)))),
        ))
        .unwrap();
        let class = r.class("Config").unwrap();
        assert!(class.find_property("Version").is_none());
        let f = class.find_function("Version").unwrap();
        assert!(f.is_static && f.params.is_empty());
    }

    #[test]
    fn unresolved_types_are_reported() {
        let mut r = Registry::new();
        r.register_class(
            ClassDescriptor::helper("Box").property(PropertyDescriptor::new(
                "thing",
                TypeRef::class("Missing"),
            )),
        )
        .unwrap();
        assert!(matches!(
            r.check_types(),
            Err(RegistryError::UnresolvedType { .. })
        ));
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize("Current"), "current");
        assert_eq!(normalize("addItems"), "addItems");
        assert_eq!(normalize(""), "");
    }
}
