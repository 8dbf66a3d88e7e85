//! The food ordering demo: restaurants, their menus, a cart and past orders.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::AppBundle;
use crate::datetime::{self, DateTime};
use crate::registry::{
    ClassDescriptor, FunctionDescriptor, HostError, PropertyDescriptor, Registry, StateStore,
};
use crate::types::TypeRef;
use crate::ui::UiBindings;
use crate::value::{InstanceRef, Value};

pub const NAME: &str = "foodordering";
/// "Now" for the seed data: the placed orders fall in the week before it.
pub const REFERENCE_TIME: &str = "2023-03-15T12:00:00";

pub const SEED: &str = include_str!("../../apps/foodordering/seed.json");
pub const EXAMPLES: &str = include_str!("../../apps/foodordering/examples.json");
pub const DATASET: &str = include_str!("../../apps/foodordering/dataset.json");
pub const FIXTURE: &str = include_str!("../../apps/foodordering/fixture.json");

fn restaurant_t() -> TypeRef {
    TypeRef::class("Restaurant")
}
fn food_t() -> TypeRef {
    TypeRef::class("FoodItem")
}
fn order_t() -> TypeRef {
    TypeRef::class("Order")
}
fn order_item_t() -> TypeRef {
    TypeRef::class("OrderItem")
}

fn receiver(recv: &Value) -> Result<&InstanceRef, HostError> {
    recv.as_instance()
        .ok_or_else(|| HostError::new("TypeError", format!("{recv} is not an instance")))
}

fn refs(value: Value) -> Vec<InstanceRef> {
    match value {
        Value::Array(items) => items.iter().filter_map(|v| v.as_instance().cloned()).collect(),
        _ => Vec::new(),
    }
}

fn is_placed(store: &StateStore, order: &InstanceRef) -> bool {
    matches!(store.get_property(order, "orderPlaced"), Ok(Value::Bool(true)))
}

fn placed_at(store: &StateStore, order: &InstanceRef) -> Option<DateTime> {
    match store.get_property(order, "placedAt") {
        Ok(Value::DateTime(dt)) => Some(dt),
        _ => None,
    }
}

fn active_cart(store: &StateStore) -> Option<InstanceRef> {
    store
        .all("Order")
        .ok()?
        .into_iter()
        .find(|o| !is_placed(store, o))
}

/// Placed orders, newest first.
fn placed_orders(store: &StateStore) -> Result<Vec<InstanceRef>, HostError> {
    let mut orders: Vec<InstanceRef> = store
        .all("Order")?
        .into_iter()
        .filter(|o| is_placed(store, o))
        .collect();
    orders.sort_by_key(|o| std::cmp::Reverse(placed_at(store, o)));
    Ok(orders)
}

/// Replace any active cart with a fresh empty one.
fn new_cart(store: &mut StateStore, restaurant: Option<Value>) -> Result<InstanceRef, HostError> {
    if let Some(old) = active_cart(store) {
        for item in refs(store.get_property(&old, "items")?) {
            store.delete_instance(&item)?;
        }
        store.delete_instance(&old)?;
    }
    let mut fields = BTreeMap::from([
        ("orderPlaced".to_string(), Value::Bool(false)),
        ("items".to_string(), Value::Array(Vec::new())),
    ]);
    if let Some(r) = restaurant {
        fields.insert("restaurant".into(), r);
    }
    Ok(store.create_instance("Order", fields)?)
}

fn add_food(
    store: &mut StateStore,
    order: &InstanceRef,
    food: &InstanceRef,
    quantity: i64,
) -> Result<(), HostError> {
    if is_placed(store, order) {
        return Err(HostError::new("OrderAlreadyPlaced", "cannot change a placed order"));
    }
    let food_restaurant = store.get_property(food, "restaurant")?;
    match store.get_property(order, "restaurant")? {
        Value::Void => store.set_property(order, "restaurant", food_restaurant)?,
        current if current == food_restaurant => {}
        current => {
            return Err(HostError::new(
                "DifferentRestaurant",
                format!(
                    "{} is from {}, but the order is from {}",
                    store.describe_value(&Value::Instance(food.clone())),
                    store.describe_value(&food_restaurant),
                    store.describe_value(&current)
                ),
            ))
        }
    }
    let items = refs(store.get_property(order, "items")?);
    for item in &items {
        if store.get_property(item, "food")? == Value::Instance(food.clone()) {
            let q = match store.get_property(item, "quantity")? {
                Value::Int(q) => q,
                _ => 0,
            };
            store.set_property(item, "quantity", Value::Int(q + quantity))?;
            return Ok(());
        }
    }
    let item = store.create_instance(
        "OrderItem",
        BTreeMap::from([
            ("food".to_string(), Value::Instance(food.clone())),
            ("quantity".to_string(), Value::Int(quantity)),
        ]),
    )?;
    let mut values: Vec<Value> = items.into_iter().map(Value::Instance).collect();
    values.push(Value::Instance(item));
    store.set_property(order, "items", Value::Array(values))?;
    Ok(())
}

fn first_word(name: &str) -> &str {
    name.split_whitespace().next().unwrap_or(name)
}

fn describe_order(store: &StateStore, order: &InstanceRef) -> String {
    let restaurant = match store.get_property(order, "restaurant") {
        Ok(Value::Instance(r)) => match store.get_property(&r, "name") {
            Ok(Value::Str(name)) => Some(first_word(&name).to_string()),
            _ => None,
        },
        _ => None,
    };
    let items: Vec<String> = refs(store.get_property(order, "items").unwrap_or(Value::Void))
        .iter()
        .map(|i| describe_item(store, i))
        .collect();
    let items = if items.is_empty() {
        "empty".to_string()
    } else {
        items.join(", ")
    };
    match (placed_at(store, order), restaurant) {
        (Some(at), Some(r)) => format!("{r} {}/{} ({items})", at.month(), at.day()),
        (Some(at), None) => format!("Order {}/{} ({items})", at.month(), at.day()),
        (None, Some(r)) => format!("New {r} ({items})"),
        (None, None) => format!("New order ({items})"),
    }
}

fn describe_item(store: &StateStore, item: &InstanceRef) -> String {
    let name = match store.get_property(item, "food") {
        Ok(Value::Instance(f)) => match store.get_property(&f, "name") {
            Ok(Value::Str(s)) => s,
            _ => f.id,
        },
        _ => "?".into(),
    };
    match store.get_property(item, "quantity") {
        Ok(Value::Int(q)) => format!("{q} x {name}"),
        _ => name,
    }
}

fn describe_restaurant(store: &StateStore, r: &InstanceRef) -> String {
    match store.get_property(r, "name") {
        Ok(Value::Str(name)) => name,
        _ => r.id.clone(),
    }
}

fn describe_food(store: &StateStore, f: &InstanceRef) -> String {
    let name = match store.get_property(f, "name") {
        Ok(Value::Str(name)) => name,
        _ => f.id.clone(),
    };
    match store.get_property(f, "price") {
        Ok(Value::Float(p)) => format!("{name} (${p:.2})"),
        _ => name,
    }
}

fn restaurant_class() -> ClassDescriptor {
    ClassDescriptor::data("Restaurant")
        .property(PropertyDescriptor::new("name", TypeRef::String).exemplar("the restaurant's name"))
        .property(
            PropertyDescriptor::new("deliveryFee", TypeRef::Float)
                .exemplar("delivery fee in US dollars"),
        )
        .property(
            PropertyDescriptor::new("cuisine", TypeRef::String)
                .exemplar("kind of food, like \"Mexican\""),
        )
        .function(FunctionDescriptor::all("Restaurant").exemplar("all restaurants"))
        .function(
            FunctionDescriptor::field_constructor(
                "Restaurant",
                &[
                    ("name", TypeRef::String),
                    ("deliveryFee", TypeRef::Float),
                    ("cuisine", TypeRef::String),
                ],
            )
            .hidden(),
        )
        .function(
            FunctionDescriptor::static_fn("GetRestaurant", restaurant_t())
                .param("name", TypeRef::String)
                .exemplar("the restaurant called Pizza Hut: GetRestaurant(name: \"pizza hut\")")
                .implement(|ctx, _recv, args| {
                    let wanted = args.str("name")?.to_lowercase();
                    for r in ctx.store.all("Restaurant")? {
                        if let Value::Str(name) = ctx.store.get_property(&r, "name")? {
                            if name.to_lowercase() == wanted {
                                return Ok(Value::Instance(r));
                            }
                        }
                    }
                    Err(HostError::new(
                        "UnknownRestaurant",
                        format!("no restaurant named \"{}\"", args.str("name")?),
                    ))
                }),
        )
        .function(
            FunctionDescriptor::method("getFoodItems", TypeRef::list_of(food_t()))
                .exemplar("the menu of this restaurant")
                .implement(|ctx, recv, _args| {
                    let this = Value::Instance(receiver(recv)?.clone());
                    let mut menu = Vec::new();
                    for f in ctx.store.all("FoodItem")? {
                        if ctx.store.get_property(&f, "restaurant")? == this {
                            menu.push(Value::Instance(f));
                        }
                    }
                    Ok(Value::Array(menu))
                }),
        )
        .function(
            FunctionDescriptor::method("lastOrder", order_t())
                .exemplar("my most recent placed order from this restaurant")
                .implement(|ctx, recv, _args| {
                    let this = Value::Instance(receiver(recv)?.clone());
                    for o in placed_orders(ctx.store)? {
                        if ctx.store.get_property(&o, "restaurant")? == this {
                            return Ok(Value::Instance(o));
                        }
                    }
                    Err(HostError::new(
                        "NoPriorOrder",
                        format!(
                            "no placed order from {}",
                            ctx.store.describe_value(&this)
                        ),
                    ))
                }),
        )
        .describe_with(describe_restaurant)
}

fn food_item_class() -> ClassDescriptor {
    ClassDescriptor::data("FoodItem")
        .property(PropertyDescriptor::new("name", TypeRef::String).exemplar("name of the dish"))
        .property(PropertyDescriptor::new("price", TypeRef::Float).exemplar("price in US dollars"))
        .property(
            PropertyDescriptor::new("restaurant", restaurant_t())
                .exemplar("the restaurant that sells it"),
        )
        .function(FunctionDescriptor::all("FoodItem").exemplar("every dish from every restaurant"))
        .function(
            FunctionDescriptor::field_constructor(
                "FoodItem",
                &[
                    ("name", TypeRef::String),
                    ("price", TypeRef::Float),
                    ("restaurant", restaurant_t()),
                ],
            )
            .hidden(),
        )
        .describe_with(describe_food)
}

fn order_item_class() -> ClassDescriptor {
    ClassDescriptor::helper("OrderItem")
        .property(PropertyDescriptor::new("food", food_t()).exemplar("the dish ordered"))
        .property(PropertyDescriptor::new("quantity", TypeRef::Integer).exemplar("how many"))
        .describe_with(describe_item)
}

fn order_class() -> ClassDescriptor {
    let total = PropertyDescriptor::new("total", TypeRef::Float)
        .exemplar("total price including the delivery fee")
        .computed(Arc::new(|store, recv| {
            let order = receiver(recv)?;
            let mut sum = 0.0;
            for item in refs(store.get_property(order, "items")?) {
                let q = store.get_property(&item, "quantity")?.as_f64().unwrap_or(0.0);
                if let Value::Instance(food) = store.get_property(&item, "food")? {
                    sum += q * store.get_property(&food, "price")?.as_f64().unwrap_or(0.0);
                }
            }
            if let Value::Instance(r) = store.get_property(order, "restaurant")? {
                sum += store.get_property(&r, "deliveryFee")?.as_f64().unwrap_or(0.0);
            }
            Ok(Value::Float((sum * 100.0).round() / 100.0))
        }));

    ClassDescriptor::data("Order")
        .property(
            PropertyDescriptor::new("restaurant", restaurant_t())
                .optional()
                .exemplar("where the order is from"),
        )
        .property(
            PropertyDescriptor::new("items", TypeRef::list_of(order_item_t()))
                .optional()
                .exemplar("the dishes and quantities"),
        )
        .property(
            PropertyDescriptor::new("orderPlaced", TypeRef::Boolean)
                .exemplar("false while the order is still the cart"),
        )
        .property(
            PropertyDescriptor::new("placedAt", TypeRef::class(datetime::CLASS))
                .optional()
                .exemplar("when the order was placed"),
        )
        .property(total)
        .function(FunctionDescriptor::all("Order").exemplar("all orders, including the cart"))
        .function(
            FunctionDescriptor::static_fn("CreateOrder", order_t())
                .as_constructor()
                .exemplar("start a new empty order (replaces the cart)")
                .implement(|ctx, _recv, _args| Ok(Value::Instance(new_cart(ctx.store, None)?))),
        )
        .function(
            FunctionDescriptor::static_fn("GetActiveCart", order_t())
                .exemplar("my cart, the order not placed yet")
                .implement(|ctx, _recv, _args| {
                    let cart = match active_cart(ctx.store) {
                        Some(cart) => cart,
                        None => new_cart(ctx.store, None)?,
                    };
                    Ok(Value::Instance(cart))
                }),
        )
        .function(
            FunctionDescriptor::static_fn("placedOrders", TypeRef::list_of(order_t()))
                .exemplar("my past orders, newest first")
                .implement(|ctx, _recv, _args| {
                    Ok(Value::Array(
                        placed_orders(ctx.store)?.into_iter().map(Value::Instance).collect(),
                    ))
                }),
        )
        .function(
            FunctionDescriptor::method("addItems", TypeRef::Void)
                .param("foodItems", TypeRef::list_of(food_t()))
                .exemplar("add these dishes: addItems(foodItems: [FoodItem.Current()])")
                .implement(|ctx, recv, args| {
                    let order = receiver(recv)?.clone();
                    for food in args.instances("foodItems")? {
                        add_food(ctx.store, &order, &food, 1)?;
                    }
                    Ok(Value::Void)
                }),
        )
        .function(
            FunctionDescriptor::method("addItem", TypeRef::Void)
                .param("foodItem", food_t())
                .param_default("quantity", TypeRef::Integer, Value::Int(1))
                .exemplar("add one dish: addItem(foodItem: FoodItem.Current())")
                .implement(|ctx, recv, args| {
                    let order = receiver(recv)?.clone();
                    let quantity = args.int("quantity")?;
                    if quantity < 1 {
                        return Err(HostError::new("InvalidQuantity", "quantity must be at least 1"));
                    }
                    add_food(ctx.store, &order, args.instance("foodItem")?, quantity)?;
                    Ok(Value::Void)
                }),
        )
        .function(
            FunctionDescriptor::method("reorder", order_t())
                .exemplar("put the same dishes from this past order into a new cart")
                .implement(|ctx, recv, _args| {
                    let source = receiver(recv)?.clone();
                    if !is_placed(ctx.store, &source) {
                        return Err(HostError::new(
                            "NotPlaced",
                            "only a placed order can be reordered",
                        ));
                    }
                    let restaurant = ctx.store.get_property(&source, "restaurant")?;
                    let restaurant = (!restaurant.is_void()).then_some(restaurant);
                    let cart = new_cart(ctx.store, restaurant)?;
                    for item in refs(ctx.store.get_property(&source, "items")?) {
                        let food = ctx.store.get_property(&item, "food")?;
                        let quantity = match ctx.store.get_property(&item, "quantity")? {
                            Value::Int(q) => q,
                            _ => 1,
                        };
                        if let Value::Instance(food) = food {
                            add_food(ctx.store, &cart, &food, quantity)?;
                        }
                    }
                    Ok(Value::Instance(cart))
                }),
        )
        .function(
            FunctionDescriptor::method("placeOrder", TypeRef::Void)
                .hidden()
                .implement(|ctx, recv, _args| {
                    let order = receiver(recv)?.clone();
                    if is_placed(ctx.store, &order) {
                        return Err(HostError::new("OrderAlreadyPlaced", "already placed"));
                    }
                    if refs(ctx.store.get_property(&order, "items")?).is_empty() {
                        return Err(HostError::new("EmptyOrder", "the order has no items"));
                    }
                    let now = ctx.clock.now();
                    ctx.store.set_property(&order, "placedAt", Value::DateTime(now))?;
                    ctx.store.set_property(&order, "orderPlaced", Value::Bool(true))?;
                    Ok(Value::Void)
                }),
        )
        .describe_with(describe_order)
}

pub fn registry() -> Registry {
    let mut registry = Registry::new();
    for class in [
        restaurant_class(),
        food_item_class(),
        order_item_class(),
        order_class(),
    ] {
        registry
            .register_class(class)
            .expect("demo classes satisfy the registry contract");
    }
    registry.check_types().expect("demo types resolve");
    registry
}

pub fn bindings(registry: &Registry) -> UiBindings {
    let mut b = UiBindings::new();
    for (template, class, priority, title) in [
        ("RestaurantCard", "Restaurant", 1, None),
        ("RestaurantPage", "Restaurant", 5, Some("Restaurant")),
        ("FoodThumbnail", "FoodItem", 1, None),
        ("FoodCard", "FoodItem", 5, Some("Dish")),
        ("OrderItemView", "OrderItem", 1, None),
        ("CartCounter", "Order", 1, None),
        ("OrderView", "Order", 5, Some("Order")),
    ] {
        b.register_binding(registry, template, class, priority, title)
            .expect("demo bindings name registered classes");
    }
    b
}

pub fn bundle() -> AppBundle {
    let registry = registry();
    let bindings = bindings(&registry);
    AppBundle::new(
        NAME,
        registry,
        bindings,
        serde_json::from_str(SEED).expect("bundled seed is JSON"),
        serde_json::from_str(EXAMPLES).expect("bundled examples are JSON"),
        REFERENCE_TIME.parse().expect("reference time is ISO"),
    )
}
