#![allow(dead_code)]

use ascsim_core::model::{EntityId, Grams};
use ascsim_core::scenario::DEFAULT_SCENARIO_JSON;
use ascsim_core::{load_scenario, Event, EventBody, Scenario, Simulation, World};
use serde_json::{json, Value};

pub fn id(s: &str) -> EntityId {
    EntityId::new(s)
}

pub fn default_doc() -> Value {
    serde_json::from_str(DEFAULT_SCENARIO_JSON).unwrap()
}

pub fn scenario(doc: &Value) -> Scenario {
    load_scenario(&doc.to_string()).unwrap()
}

/// The case study with no scripted orders and no reorder policy.
pub fn quiet_doc() -> Value {
    let mut doc = default_doc();
    doc["script"] = json!([]);
    doc["reorder"] = json!({ "enabled": false, "points_kg": {} });
    doc
}

pub fn set_stock(doc: &mut Value, entity: &str, product: &str, kg: f64) {
    let e = doc["entities"]
        .as_array_mut()
        .unwrap()
        .iter_mut()
        .find(|e| e["id"] == entity)
        .unwrap();
    for offer in e["catalog"].as_array_mut().unwrap() {
        if offer["product"] == product {
            offer["stock_kg"] = json!(kg);
        }
    }
}

pub fn on_hand(world: &World, owner: &str, product: &str) -> Grams {
    world.ledgers.get(&id(owner)).map_or(0, |l| l.on_hand(product))
}

pub fn run_default() -> Simulation {
    let mut sim = Simulation::new(Scenario::default_case_study());
    sim.run_to_quiescence();
    sim
}

/// Grams held in ledgers plus grams on vehicles that have not arrived.
pub fn grams_in_system(world: &World) -> Grams {
    let moving: Grams = world
        .shipments
        .values()
        .filter(|s| s.delivered_at.is_none())
        .flat_map(|s| s.dispatch.lines.iter().map(|l| l.quantity_g))
        .sum();
    world.total_grams() + moving
}

pub fn is_telemetry(e: &Event) -> bool {
    matches!(
        e.body,
        EventBody::SensorReading(_) | EventBody::AmbientAlert(_) | EventBody::DeliveryAssessed(_)
    )
}
