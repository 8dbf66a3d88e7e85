//! Input and output UI mapping.
//!
//! Input: a `Current()` reference resolves to the smallest on-screen
//! component of the requested class under an unconsumed tap, falling back to
//! the largest visible component of that class.
//!
//! Output: a command's final value renders with the highest-priority template
//! bound to its class. Unrenderable results fall back to the last renderable
//! value in the execution trace, unless that instance is already on screen.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::interp::ExecutionTrace;
use crate::registry::{Registry, StateStore};
use crate::types::TypeRef;
use crate::value::{InstanceRef, Value};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        BBox { x, y, w, h }
    }

    /// Edges are inclusive.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x && x <= self.x + self.w && y >= self.y && y <= self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn is_valid(&self) -> bool {
        self.w >= 0.0 && self.h >= 0.0 && [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibleComponent {
    pub template: String,
    pub class: String,
    pub instance_id: String,
    pub bbox: BBox,
}

impl VisibleComponent {
    pub fn new(template: &str, class: &str, instance_id: &str, bbox: BBox) -> Self {
        VisibleComponent {
            template: template.to_string(),
            class: class.to_string(),
            instance_id: instance_id.to_string(),
            bbox,
        }
    }

    pub fn instance(&self) -> InstanceRef {
        InstanceRef::new(&self.class, &self.instance_id)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScreenSnapshot {
    #[serde(default)]
    pub session_id: String,
    pub components: Vec<VisibleComponent>,
}

impl ScreenSnapshot {
    pub fn new(session_id: impl Into<String>, components: Vec<VisibleComponent>) -> Self {
        ScreenSnapshot {
            session_id: session_id.into(),
            components,
        }
    }

    /// Drop components whose instance no longer exists (or whose box is
    /// invalid), logging each.
    pub fn live(&self, store: &StateStore) -> ScreenSnapshot {
        let components = self
            .components
            .iter()
            .filter(|c| {
                let ok = c.bbox.is_valid() && store.exists(&c.instance());
                if !ok {
                    log::warn!(
                        "dropping stale component {} for {}({})",
                        c.template,
                        c.class,
                        c.instance_id
                    );
                }
                ok
            })
            .cloned()
            .collect();
        ScreenSnapshot {
            session_id: self.session_id.clone(),
            components,
        }
    }

    pub fn shows(&self, r: &InstanceRef) -> bool {
        self.components
            .iter()
            .any(|c| c.class == r.class && c.instance_id == r.id)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TapPoint {
    pub x: f64,
    pub y: f64,
    /// Capture order; taps are consumed in this order.
    #[serde(default)]
    pub order: usize,
}

impl TapPoint {
    pub fn new(x: f64, y: f64, order: usize) -> Self {
        TapPoint { x, y, order }
    }
}

/// Which taps earlier `Current()` occurrences have claimed.
#[derive(Clone, Debug, Default)]
pub struct TapCursor {
    consumed: HashSet<usize>,
}

impl TapCursor {
    pub fn new() -> Self {
        TapCursor::default()
    }

    pub fn consumed(&self) -> usize {
        self.consumed.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum UiError {
    #[error("nothing on screen is a `{0}`")]
    CurrentUnresolved(String),
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("template `{0}` is already bound")]
    DuplicateTemplate(String),
}

/// Class of the innermost component under the first tap that hits
/// anything. Used as parser context.
pub fn tapped_class<'s>(taps: &[TapPoint], screen: &'s ScreenSnapshot) -> Option<&'s str> {
    let mut ordered: Vec<(usize, &TapPoint)> = taps.iter().enumerate().collect();
    ordered.sort_by_key(|(i, t)| (t.order, *i));
    ordered.into_iter().find_map(|(_, tap)| {
        screen
            .components
            .iter()
            .filter(|c| c.bbox.contains(tap.x, tap.y))
            .fold(None::<&VisibleComponent>, |best, c| match best {
                Some(b) if b.bbox.area() <= c.bbox.area() => Some(b),
                _ => Some(c),
            })
            .map(|c| c.class.as_str())
    })
}

/// Resolve one `Current()` occurrence for `class`.
///
/// Taps are scanned in capture order; the first unconsumed tap that lies
/// inside at least one component of `class` is consumed and the smallest such
/// component wins. With no matching tap, the largest visible component of the
/// class is used. Ties go to the earlier component in the snapshot.
pub fn resolve_current(
    class: &str,
    taps: &[TapPoint],
    screen: &ScreenSnapshot,
    cursor: &mut TapCursor,
) -> Result<InstanceRef, UiError> {
    let of_class: Vec<&VisibleComponent> =
        screen.components.iter().filter(|c| c.class == class).collect();

    let mut ordered: Vec<(usize, &TapPoint)> = taps.iter().enumerate().collect();
    ordered.sort_by_key(|(i, t)| (t.order, *i));
    for (i, tap) in ordered {
        if cursor.consumed.contains(&i) {
            continue;
        }
        let hit = of_class
            .iter()
            .filter(|c| c.bbox.contains(tap.x, tap.y))
            .fold(None::<&&VisibleComponent>, |best, c| match best {
                Some(b) if b.bbox.area() <= c.bbox.area() => Some(b),
                _ => Some(c),
            });
        if let Some(component) = hit {
            cursor.consumed.insert(i);
            return Ok(component.instance());
        }
    }

    of_class
        .iter()
        .fold(None::<&&VisibleComponent>, |best, c| match best {
            Some(b) if b.bbox.area() >= c.bbox.area() => Some(b),
            _ => Some(c),
        })
        .map(|c| c.instance())
        .ok_or_else(|| UiError::CurrentUnresolved(class.to_string()))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentBinding {
    pub template: String,
    pub class: String,
    /// Higher wins; ties go to the earlier registration.
    pub priority: i64,
    pub title: Option<String>,
    pub order: usize,
}

#[derive(Clone, Debug, Default)]
pub struct UiBindings {
    bindings: Vec<ComponentBinding>,
}

impl UiBindings {
    pub fn new() -> Self {
        UiBindings::default()
    }

    pub fn register_binding(
        &mut self,
        registry: &Registry,
        template: &str,
        class: &str,
        priority: i64,
        title: Option<&str>,
    ) -> Result<(), UiError> {
        if !registry.contains(class) {
            return Err(UiError::UnknownClass(class.to_string()));
        }
        if self.bindings.iter().any(|b| b.template == template) {
            return Err(UiError::DuplicateTemplate(template.to_string()));
        }
        self.bindings.push(ComponentBinding {
            template: template.to_string(),
            class: class.to_string(),
            priority,
            title: title.map(str::to_string),
            order: self.bindings.len(),
        });
        Ok(())
    }

    pub fn all(&self) -> &[ComponentBinding] {
        &self.bindings
    }

    pub fn for_class<'a>(&'a self, class: &'a str) -> impl Iterator<Item = &'a ComponentBinding> {
        self.bindings.iter().filter(move |b| b.class == class)
    }

    pub fn top_binding(&self, class: &str) -> Option<&ComponentBinding> {
        self.bindings
            .iter()
            .filter(|b| b.class == class)
            .fold(None, |best: Option<&ComponentBinding>, b| match best {
                Some(top) if top.priority >= b.priority => Some(top),
                _ => Some(b),
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoRenderReason {
    AlreadyVisible,
    NothingRenderable,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RenderDecision {
    Render {
        template: String,
        instance: InstanceRef,
    },
    /// A list result, rendered with the element class's top binding.
    RenderList {
        template: String,
        class: String,
        instances: Vec<InstanceRef>,
    },
    NoRender(NoRenderReason),
}

enum Renderable {
    One(String, InstanceRef),
    Many(String, String, Vec<InstanceRef>),
}

fn renderable(value: &Value, ty: &TypeRef, bindings: &UiBindings) -> Option<Renderable> {
    match value {
        Value::Instance(r) => bindings
            .top_binding(&r.class)
            .map(|b| Renderable::One(b.template.clone(), r.clone())),
        Value::Array(items) => {
            let class = ty.element().and_then(TypeRef::class_name)?;
            let binding = bindings.top_binding(class)?;
            let instances = items
                .iter()
                .map(|v| v.as_instance().cloned())
                .collect::<Option<Vec<_>>>()?;
            Some(Renderable::Many(
                binding.template.clone(),
                class.to_string(),
                instances,
            ))
        }
        _ => None,
    }
}

/// Decide what to show for a finished command.
pub fn select_output(
    trace: &ExecutionTrace,
    screen: &ScreenSnapshot,
    bindings: &UiBindings,
) -> RenderDecision {
    let entries = trace.entries();
    let Some(last) = entries.last() else {
        return RenderDecision::NoRender(NoRenderReason::NothingRenderable);
    };
    let into_decision = |r: Renderable| match r {
        Renderable::One(template, instance) => RenderDecision::Render { template, instance },
        Renderable::Many(template, class, instances) => RenderDecision::RenderList {
            template,
            class,
            instances,
        },
    };

    if let Some(direct) = renderable(&last.value, &last.ty, bindings) {
        return into_decision(direct);
    }

    let fallback = entries
        .iter()
        .rev()
        .skip(1)
        .find_map(|e| renderable(&e.value, &e.ty, bindings));
    match fallback {
        None => RenderDecision::NoRender(NoRenderReason::NothingRenderable),
        Some(r) => {
            let visible = match &r {
                Renderable::One(_, instance) => screen.shows(instance),
                Renderable::Many(_, _, instances) => {
                    !instances.is_empty() && instances.iter().all(|i| screen.shows(i))
                }
            };
            if visible {
                RenderDecision::NoRender(NoRenderReason::AlreadyVisible)
            } else {
                into_decision(r)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::TraceEntry;

    fn comp(template: &str, class: &str, id: &str, x: f64, y: f64, w: f64, h: f64) -> VisibleComponent {
        VisibleComponent::new(template, class, id, BBox::new(x, y, w, h))
    }

    #[test]
    fn voice_class_filters_nested_components() {
        let screen = ScreenSnapshot::new(
            "s",
            vec![
                comp("OrderItemView", "OrderItem", "oi-1", 0.0, 0.0, 300.0, 80.0),
                comp("FoodThumbnail", "FoodItem", "f1", 10.0, 10.0, 60.0, 60.0),
            ],
        );
        let taps = [TapPoint::new(30.0, 30.0, 0)];
        let food = resolve_current("FoodItem", &taps, &screen, &mut TapCursor::new()).unwrap();
        assert_eq!(food, InstanceRef::new("FoodItem", "f1"));
        let item = resolve_current("OrderItem", &taps, &screen, &mut TapCursor::new()).unwrap();
        assert_eq!(item, InstanceRef::new("OrderItem", "oi-1"));
    }

    #[test]
    fn tapped_class_picks_innermost_hit() {
        let screen = ScreenSnapshot::new(
            "s",
            vec![
                comp("OrderItemView", "OrderItem", "oi-1", 0.0, 0.0, 300.0, 80.0),
                comp("FoodThumbnail", "FoodItem", "f1", 10.0, 10.0, 60.0, 60.0),
            ],
        );
        let miss = TapPoint::new(500.0, 500.0, 0);
        assert_eq!(tapped_class(&[miss, TapPoint::new(30.0, 30.0, 1)], &screen), Some("FoodItem"));
        assert_eq!(tapped_class(&[TapPoint::new(200.0, 30.0, 0)], &screen), Some("OrderItem"));
        assert_eq!(tapped_class(&[miss], &screen), None);
    }

    #[test]
    fn smallest_box_wins_among_same_class() {
        let screen = ScreenSnapshot::new(
            "s",
            vec![
                comp("RestaurantPage", "Restaurant", "big", 0.0, 0.0, 400.0, 800.0),
                comp("RestaurantCard", "Restaurant", "small", 0.0, 0.0, 100.0, 100.0),
            ],
        );
        let taps = [TapPoint::new(50.0, 50.0, 0)];
        let r = resolve_current("Restaurant", &taps, &screen, &mut TapCursor::new()).unwrap();
        assert_eq!(r.id, "small");
    }

    #[test]
    fn largest_visible_fallback() {
        let screen = ScreenSnapshot::new(
            "s",
            vec![
                comp("RestaurantCard", "Restaurant", "r2", 0.0, 0.0, 100.0, 100.0),
                comp("RestaurantPage", "Restaurant", "r1", 0.0, 200.0, 400.0, 600.0),
            ],
        );
        let r = resolve_current("Restaurant", &[], &screen, &mut TapCursor::new()).unwrap();
        assert_eq!(r.id, "r1");
        // A tap that misses every Restaurant also falls back.
        let taps = [TapPoint::new(900.0, 900.0, 0)];
        let r = resolve_current("Restaurant", &taps, &screen, &mut TapCursor::new()).unwrap();
        assert_eq!(r.id, "r1");
        assert_eq!(
            resolve_current("FoodItem", &taps, &screen, &mut TapCursor::new()),
            Err(UiError::CurrentUnresolved("FoodItem".into()))
        );
    }

    #[test]
    fn taps_are_consumed_once() {
        let screen = ScreenSnapshot::new(
            "s",
            vec![
                comp("FoodThumbnail", "FoodItem", "a", 0.0, 0.0, 50.0, 50.0),
                comp("FoodThumbnail", "FoodItem", "b", 100.0, 0.0, 50.0, 50.0),
                comp("FoodCard", "FoodItem", "c", 0.0, 100.0, 400.0, 400.0),
            ],
        );
        let taps = [TapPoint::new(120.0, 10.0, 1), TapPoint::new(10.0, 10.0, 0)];
        let mut cursor = TapCursor::new();
        let first = resolve_current("FoodItem", &taps, &screen, &mut cursor).unwrap();
        let second = resolve_current("FoodItem", &taps, &screen, &mut cursor).unwrap();
        let third = resolve_current("FoodItem", &taps, &screen, &mut cursor).unwrap();
        assert_eq!(first.id, "a");
        assert_eq!(second.id, "b");
        assert_eq!(third.id, "c");
        assert_eq!(cursor.consumed(), 2);
    }

    fn bindings() -> UiBindings {
        let mut registry = Registry::new();
        for class in ["Order", "Restaurant"] {
            registry
                .register_class(
                    crate::registry::ClassDescriptor::data(class)
                        .function(crate::registry::FunctionDescriptor::all(class))
                        .function(crate::registry::FunctionDescriptor::field_constructor(class, &[])),
                )
                .unwrap();
        }
        let mut b = UiBindings::new();
        b.register_binding(&registry, "CartCounter", "Order", 1, None).unwrap();
        b.register_binding(&registry, "OrderView", "Order", 5, Some("Order")).unwrap();
        b.register_binding(&registry, "RestaurantCard", "Restaurant", 1, None).unwrap();
        b.register_binding(&registry, "RestaurantTile", "Restaurant", 1, None).unwrap();
        assert_eq!(
            b.register_binding(&registry, "X", "Nope", 1, None),
            Err(UiError::UnknownClass("Nope".into()))
        );
        assert_eq!(
            b.register_binding(&registry, "OrderView", "Order", 1, None),
            Err(UiError::DuplicateTemplate("OrderView".into()))
        );
        b
    }

    fn trace(entries: Vec<(Value, TypeRef)>) -> ExecutionTrace {
        ExecutionTrace::from_entries(
            entries
                .into_iter()
                .enumerate()
                .map(|(i, (value, ty))| TraceEntry {
                    step: format!("step{i}"),
                    value,
                    ty,
                })
                .collect(),
        )
    }

    #[test]
    fn direct_result_uses_highest_priority() {
        let b = bindings();
        let t = trace(vec![(Value::instance("Order", "o1"), TypeRef::class("Order"))]);
        let screen = ScreenSnapshot::new(
            "s",
            vec![comp("OrderView", "Order", "o1", 0.0, 0.0, 1.0, 1.0)],
        );
        assert_eq!(
            select_output(&t, &screen, &b),
            RenderDecision::Render {
                template: "OrderView".into(),
                instance: InstanceRef::new("Order", "o1")
            }
        );
    }

    #[test]
    fn priority_ties_go_to_first_registration() {
        let b = bindings();
        assert_eq!(b.top_binding("Restaurant").unwrap().template, "RestaurantCard");
    }

    #[test]
    fn void_result_walks_back() {
        let b = bindings();
        let t = trace(vec![
            (Value::instance("Order", "cart"), TypeRef::class("Order")),
            (Value::Void, TypeRef::Void),
        ]);
        let with_counter = ScreenSnapshot::new(
            "s",
            vec![comp("CartCounter", "Order", "cart", 0.0, 0.0, 20.0, 20.0)],
        );
        assert_eq!(
            select_output(&t, &with_counter, &b),
            RenderDecision::NoRender(NoRenderReason::AlreadyVisible)
        );
        assert_eq!(
            select_output(&t, &ScreenSnapshot::default(), &b),
            RenderDecision::Render {
                template: "OrderView".into(),
                instance: InstanceRef::new("Order", "cart")
            }
        );
    }

    #[test]
    fn lists_and_nothing() {
        let b = bindings();
        let t = trace(vec![(
            Value::Array(vec![Value::instance("Restaurant", "r1")]),
            TypeRef::list_of(TypeRef::class("Restaurant")),
        )]);
        assert_eq!(
            select_output(&t, &ScreenSnapshot::default(), &b),
            RenderDecision::RenderList {
                template: "RestaurantCard".into(),
                class: "Restaurant".into(),
                instances: vec![InstanceRef::new("Restaurant", "r1")]
            }
        );
        let t = trace(vec![(Value::Int(3), TypeRef::Integer)]);
        assert_eq!(
            select_output(&t, &ScreenSnapshot::default(), &b),
            RenderDecision::NoRender(NoRenderReason::NothingRenderable)
        );
    }
}
