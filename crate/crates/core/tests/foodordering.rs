use std::collections::BTreeMap;

use genie_core::app::{foodordering, AppBundle};
use genie_core::datetime::FixedClock;
use genie_core::dsl::parse;
use genie_core::interp::{evaluate, type_check, EvalContext, EvalError};
use genie_core::nl::ExampleParse;
use genie_core::registry::{ClassKind, StateStore};
use genie_core::ui::{BBox, ScreenSnapshot, TapPoint, VisibleComponent};
use genie_core::value::{InstanceRef, Value};

fn setup() -> (AppBundle, StateStore) {
    let app = foodordering::bundle();
    let store = app.fresh_store().unwrap();
    (app, store)
}

fn run_on(store: &mut StateStore, src: &str, screen: &ScreenSnapshot, taps: &[TapPoint]) -> Result<Value, EvalError> {
    let registry = store.registry().clone();
    let typed = type_check(&parse(src).unwrap(), &registry).unwrap();
    let clock = FixedClock(foodordering::REFERENCE_TIME.parse().unwrap());
    evaluate(&typed, store, &EvalContext { clock: &clock, screen, taps }).map(|(v, _)| v)
}

fn run(store: &mut StateStore, src: &str) -> Result<Value, EvalError> {
    run_on(store, src, &ScreenSnapshot::default(), &[])
}

/// food id -> total quantity, read straight from the stored records.
fn multiset(store: &StateStore, order: &InstanceRef) -> BTreeMap<String, i64> {
    let mut out = BTreeMap::new();
    let items = store.get_property(order, "items").unwrap();
    for item in items.as_array().unwrap() {
        let item = item.as_instance().unwrap();
        let food = store.get_property(item, "food").unwrap();
        let Value::Int(q) = store.get_property(item, "quantity").unwrap() else {
            panic!("quantity")
        };
        *out.entry(food.as_instance().unwrap().id.clone()).or_insert(0) += q;
    }
    out
}

#[test]
fn registry_shape() {
    let (app, _) = setup();
    let kinds: Vec<ClassKind> = app
        .registry
        .classes()
        .filter(|c| c.name != "DateTime")
        .map(|c| c.kind)
        .collect();
    assert_eq!(kinds.iter().filter(|k| **k == ClassKind::Data).count(), 3);
    assert_eq!(kinds.iter().filter(|k| **k == ClassKind::Helper).count(), 1);
}

#[test]
fn seed_integrity() {
    let (_, store) = setup();
    assert_eq!(store.all("Restaurant").unwrap().len(), 5);
    assert_eq!(store.all("FoodItem").unwrap().len(), 30);
    let orders = store.all("Order").unwrap();
    assert_eq!(orders.len(), 4);
    for f in store.all("FoodItem").unwrap() {
        let r = store.get_property(&f, "restaurant").unwrap();
        assert!(store.exists(r.as_instance().unwrap()));
        assert!(store.get_property(&f, "price").unwrap().as_f64().unwrap() >= 0.0);
    }
    for o in &orders {
        let placed = store.get_property(o, "orderPlaced").unwrap() == Value::Bool(true);
        let at = store.get_property(o, "placedAt").unwrap();
        assert_eq!(placed, !at.is_void());
        for item in store.get_property(o, "items").unwrap().as_array().unwrap() {
            let item = item.as_instance().unwrap();
            let food = store.get_property(item, "food").unwrap();
            assert!(store.exists(food.as_instance().unwrap()));
            assert!(matches!(store.get_property(item, "quantity").unwrap(), Value::Int(q) if q >= 1));
        }
    }
    let names: std::collections::HashSet<String> = store
        .all("Restaurant")
        .unwrap()
        .iter()
        .map(|r| store.get_property(r, "name").unwrap().as_str().unwrap().to_string())
        .collect();
    assert_eq!(names.len(), 5);
}

#[test]
fn reorder_copies_latest_order_of_tapped_restaurant() {
    let (_, mut store) = setup();
    let screen = ScreenSnapshot::new(
        "s",
        vec![
            VisibleComponent::new("RestaurantCard", "Restaurant", "r1", BBox::new(0.0, 0.0, 300.0, 100.0)),
            VisibleComponent::new("RestaurantCard", "Restaurant", "r2", BBox::new(0.0, 110.0, 300.0, 100.0)),
        ],
    );
    let taps = [TapPoint::new(20.0, 50.0, 0)];
    let v = run_on(&mut store, "Restaurant.Current().lastOrder().reorder()", &screen, &taps).unwrap();
    let new_order = v.as_instance().unwrap().clone();

    // Oracle: the placed Taco Bell order with the latest placedAt.
    let latest = store
        .all("Order")
        .unwrap()
        .into_iter()
        .filter(|o| store.get_property(o, "orderPlaced").unwrap() == Value::Bool(true))
        .filter(|o| store.get_property(o, "restaurant").unwrap() == Value::instance("Restaurant", "r1"))
        .max_by_key(|o| store.get_property(o, "placedAt").unwrap().to_string())
        .unwrap();
    assert_eq!(latest.id, "o3");
    assert_eq!(multiset(&store, &new_order), multiset(&store, &latest));
    assert_eq!(store.get_property(&new_order, "orderPlaced").unwrap(), Value::Bool(false));
    assert_eq!(
        store.get_property(&new_order, "restaurant").unwrap(),
        Value::instance("Restaurant", "r1")
    );
    assert!(store.describe(&new_order).unwrap().starts_with("New Taco"));
    assert!(store.describe(&latest).unwrap().starts_with("Taco 3/13"));
}

#[test]
fn active_cart_is_idempotent_and_unique() {
    let (_, mut store) = setup();
    let a = run(&mut store, "Order.GetActiveCart()").unwrap();
    let b = run(&mut store, "Order.GetActiveCart()").unwrap();
    assert_eq!(a, b);
    run(&mut store, "Order.CreateOrder()").unwrap();
    let c = run(&mut store, "Order.GetActiveCart()").unwrap();
    assert_ne!(a, c);
    let carts = store
        .all("Order")
        .unwrap()
        .into_iter()
        .filter(|o| store.get_property(o, "orderPlaced").unwrap() == Value::Bool(false))
        .count();
    assert_eq!(carts, 1);
}

#[test]
fn add_item_quantities_and_restaurant_guard() {
    let (_, mut store) = setup();
    run(&mut store, "Order.GetActiveCart().addItem(foodItem: FoodItem.Get(id: \"f1\"), quantity: 2)").unwrap();
    run(&mut store, "Order.GetActiveCart().addItems(foodItems: [FoodItem.Get(id: \"f1\"), FoodItem.Get(id: \"f2\")])").unwrap();
    let cart = run(&mut store, "Order.GetActiveCart()").unwrap();
    let cart = cart.as_instance().unwrap().clone();
    assert_eq!(
        multiset(&store, &cart),
        BTreeMap::from([("f1".to_string(), 3), ("f2".to_string(), 1)])
    );
    let total = run(&mut store, "Order.GetActiveCart().total").unwrap();
    assert_eq!(total, Value::Float(((3.0 * 1.79 + 4.99 + 2.99) * 100.0_f64).round() / 100.0));
    let rev = store.revision();
    let err = run(&mut store, "Order.GetActiveCart().addItem(foodItem: FoodItem.Get(id: \"f7\"))").unwrap_err();
    assert!(matches!(err, EvalError::Execution { code, .. } if code == "DifferentRestaurant"));
    assert_eq!(store.revision(), rev);
    let err = run(&mut store, "Order.GetActiveCart().addItem(foodItem: FoodItem.Get(id: \"f1\"), quantity: 0)").unwrap_err();
    assert!(matches!(err, EvalError::Execution { code, .. } if code == "InvalidQuantity"));
}

#[test]
fn lookup_errors() {
    let (_, mut store) = setup();
    assert!(matches!(
        run(&mut store, r#"Restaurant.GetRestaurant(name: "Burger King")"#),
        Err(EvalError::Execution { code, .. }) if code == "UnknownRestaurant"
    ));
    assert!(matches!(
        run(&mut store, r#"Restaurant.GetRestaurant(name: "subway").lastOrder()"#),
        Err(EvalError::Execution { code, .. }) if code == "NoPriorOrder"
    ));
    assert_eq!(
        run(&mut store, r#"Restaurant.GetRestaurant(name: "PIZZA HUT").id"#).unwrap(),
        Value::Str("r2".into())
    );
}

#[test]
fn placed_orders_newest_first() {
    let (_, mut store) = setup();
    let v = run(&mut store, "Order.placedOrders()").unwrap();
    let ids: Vec<&str> = v.as_array().unwrap().iter().map(|o| o.as_instance().unwrap().id.as_str()).collect();
    assert_eq!(ids, ["o4", "o3", "o2", "o1"]);
}

#[test]
fn gui_checkout_places_the_cart() {
    let (app, mut store) = setup();
    run(&mut store, "Order.GetActiveCart().addItem(foodItem: FoodItem.Get(id: \"f8\"))").unwrap();
    let cart = run(&mut store, "Order.GetActiveCart()").unwrap();
    let desc = app.registry.class("Order").unwrap().find_function("placeOrder").unwrap().clone();
    assert!(!desc.genie_exposed);
    let genie_core::registry::FunctionImpl::Host(f) = &desc.implementation else {
        panic!("host function")
    };
    let clock = FixedClock(foodordering::REFERENCE_TIME.parse().unwrap());
    let mut ctx = genie_core::registry::HostCtx { store: &mut store, clock: &clock };
    f(&mut ctx, &cart, &genie_core::registry::Args::new(&desc.params, vec![])).unwrap();
    let placed = run(&mut store, "Order.placedOrders()[0]").unwrap();
    assert_eq!(placed, cart);
    assert!(store.describe(cart.as_instance().unwrap()).unwrap().starts_with("Pizza 3/15"));
}

fn load(text: &str) -> Vec<ExampleParse> {
    serde_json::from_str(text).unwrap()
}

#[test]
fn bundled_examples_and_dataset_check() {
    let (app, _) = setup();
    app.validate().unwrap();
    assert!(app.examples.len() >= 11);
    let dataset = load(foodordering::DATASET);
    assert!(dataset.len() >= 20);
    for rec in &dataset {
        type_check(&parse(&rec.dsl).unwrap(), &app.registry).unwrap_or_else(|e| panic!("{}: {e}", rec.dsl));
    }
    let fixture: BTreeMap<String, String> = serde_json::from_str(foodordering::FIXTURE).unwrap();
    for rec in &dataset {
        assert_eq!(fixture.get(&rec.utterance), Some(&rec.dsl));
    }
}

#[test]
fn quoted_commands_type_check() {
    let (app, _) = setup();
    for src in [
        "Order.CreateOrder().addItem(foodItem: FoodItem.Current())",
        "Order.GetActiveCart()",
        r#"Restaurant.GetRestaurant(name: "pizza hut").getFoodItems()"#,
        r#"Restaurant.GetRestaurant(name: "pizza hut").getFoodItems().between(field: .price, from: 0, to: 5)"#,
        "Order.GetActiveCart().addItems(foodItems: [FoodItem.Current()])",
        "Restaurant.current().lastOrder().reorder()",
        "DateTime.Current().offset(week: -1).set(weekOfTheDay: 4)",
    ] {
        type_check(&parse(src).unwrap(), &app.registry).unwrap_or_else(|e| panic!("{src}: {e}"));
    }
}

#[test]
fn bundle_from_directory_overrides() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("examples.json"),
        r#"[{"utterance": "all", "dsl": "Restaurant.All()"}]"#,
    )
    .unwrap();
    let app = AppBundle::load(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(app.examples.len(), 1);
    std::fs::write(
        dir.path().join("examples.json"),
        r#"[{"utterance": "x", "dsl": "Restaurant.openingTime"}]"#,
    )
    .unwrap();
    assert!(AppBundle::load(dir.path().to_str().unwrap()).is_err());
    assert!(AppBundle::load("nope").is_err());
    assert!(AppBundle::load("foodordering").is_ok());
}
