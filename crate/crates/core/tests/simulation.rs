mod common;

use std::time::Instant;

use ascsim_core::agents::grammar::order_follows_grammar;
use ascsim_core::event::{InventoryReason, Trigger};
use ascsim_core::model::{OrderLine, OrderStatus};
use ascsim_core::sim::route::VehicleStatus;
use ascsim_core::{EventBody, EventLog, Scenario, SimError, SimTime, Simulation, World};
use common::*;
use proptest::prelude::*;
use serde_json::json;

const KG: u64 = 1000;

#[test]
fn default_replenishment_adds_fifty_kg_of_each_product() {
    let started = Instant::now();
    let mut sim = Simulation::new(Scenario::default_case_study());
    let before: Vec<u64> = ["chicken", "beef", "lamb"]
        .iter()
        .map(|p| on_hand(sim.world(), "CMC", p))
        .collect();
    sim.advance(SimTime::ZERO);
    let status = sim.run_until_settled("ORD-0001").unwrap();
    assert_eq!(status, OrderStatus::Delivered);
    for (p, b) in ["chicken", "beef", "lamb"].iter().zip(before) {
        assert_eq!(on_hand(sim.world(), "CMC", p), b + 50 * KG, "{p}");
    }
    assert!(order_follows_grammar(sim.log().events(), "ORD-0001"));
    sim.run_to_quiescence();
    assert!(started.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn every_order_of_the_default_run_follows_the_stage_grammar() {
    let sim = run_default();
    assert_eq!(sim.world().orders.len(), 2);
    for (id, order) in &sim.world().orders {
        assert_eq!(order.status, OrderStatus::Delivered, "{id}");
        assert!(order_follows_grammar(sim.log().events(), id), "{id}");
    }
}

#[test]
fn chained_flow_moves_product_source_to_cmc_to_retailer() {
    let sim = run_default();
    let w = sim.world();
    let s2_initial = 600 * KG;
    assert_eq!(on_hand(w, "S2", "beef"), s2_initial - 50 * KG);
    assert_eq!(on_hand(w, "CMC", "beef"), 140 * KG);
    assert_eq!(on_hand(w, "CMC", "chicken"), 150 * KG);
    assert_eq!(on_hand(w, "R1", "beef"), 10 * KG);
    assert_eq!(sim.world().orders["ORD-0002"].seller, Some(id("CMC")));
}

#[test]
fn grams_are_conserved_at_every_instant() {
    let sim = run_default();
    let events = sim.log().events();
    let mut world = World::default();
    let mut total = None;
    for (i, e) in events.iter().enumerate() {
        world.apply(e).unwrap();
        let genesis = matches!(&e.body, EventBody::InventoryUpdated(u) if u.reason == InventoryReason::Initial);
        let instant_closed = events.get(i + 1).is_none_or(|n| n.sim_time != e.sim_time);
        if genesis || !instant_closed {
            continue;
        }
        let now = grams_in_system(&world);
        assert_eq!(*total.get_or_insert(now), now, "seq {}", e.seq);
    }
    let initial: u64 = sim
        .scenario()
        .initial_stock
        .values()
        .flat_map(|m| m.values())
        .sum();
    assert_eq!(world.total_grams(), initial);
}

#[test]
fn identical_seed_gives_identical_log() {
    let a = run_default().log().to_ndjson();
    let b = run_default().log().to_ndjson();
    assert_eq!(a, b);
}

#[test]
fn seeds_differ_only_in_telemetry() {
    let mut doc = default_doc();
    let base = {
        let mut s = Simulation::new(scenario(&doc));
        s.run_to_quiescence();
        s
    };
    doc["seed"] = json!(7);
    let mut other = Simulation::new(scenario(&doc));
    other.run_to_quiescence();

    let strip = |log: &EventLog| -> Vec<String> {
        log.events()
            .iter()
            .filter(|e| !is_telemetry(e))
            .map(|e| format!("{} {}", e.sim_time, serde_json::to_string(&e.body).unwrap()))
            .collect()
    };
    assert_ne!(base.log().to_ndjson(), other.log().to_ndjson());
    assert_eq!(strip(base.log()), strip(other.log()));
}

#[test]
fn mid_delivery_snapshot_shows_vehicle_en_route() {
    let mut sim = Simulation::new(Scenario::default_case_study());
    sim.advance(SimTime::from_secs(1200));
    let snap = sim.snapshot();
    assert_eq!(snap.vehicles.len(), 1);
    let v = snap.vehicles.values().next().unwrap();
    assert_eq!(v.status, VehicleStatus::EnRoute);
    assert!(v.progress > 0.0 && v.progress < 1.0, "{}", v.progress);
    let replayed = World::fold(sim.log().events()).unwrap().snapshot();
    assert_eq!(replayed, snap);
}

#[test]
fn arrival_marks_vehicle_arrived_and_updates_ledgers() {
    let mut sim = Simulation::new(Scenario::default_case_study());
    sim.advance(SimTime::from_secs(3000));
    let v = sim.world().vehicles.values().next().unwrap();
    assert_eq!(v.status, VehicleStatus::Arrived);
    assert_eq!(v.progress, 1.0);
    assert_eq!(on_hand(sim.world(), "CMC", "lamb"), 150 * KG);
}

#[test]
fn all_suppliers_refusing_fails_without_touching_ledgers() {
    let mut sim = Simulation::new(scenario(&quiet_doc()));
    let before = sim.world().ledgers.clone();
    let order = sim.place_order(&id("R1"), vec![OrderLine::kg("beef", 1000)]).unwrap();
    assert_eq!(sim.run_until_settled(&order).unwrap(), OrderStatus::Failed);
    assert_eq!(sim.world().ledgers, before);
    assert!(sim
        .log()
        .events()
        .iter()
        .any(|e| matches!(&e.body, EventBody::ProcessFailed(f) if f.order_id == order)));
}

#[test]
fn stock_shortfall_at_dispatch_fails_second_order_atomically() {
    let mut sim = Simulation::new(scenario(&quiet_doc()));
    let first = sim.place_order(&id("R1"), vec![OrderLine::kg("beef", 80)]).unwrap();
    let second = sim.place_order(&id("R2"), vec![OrderLine::kg("beef", 80)]).unwrap();
    sim.run_to_quiescence();
    let w = sim.world();
    assert_eq!(w.orders[&first].status, OrderStatus::Delivered);
    assert_eq!(w.orders[&second].status, OrderStatus::Failed);
    assert_eq!(on_hand(w, "CMC", "beef"), 20 * KG);
    assert_eq!(on_hand(w, "R1", "beef"), 80 * KG);
    assert_eq!(on_hand(w, "R2", "beef"), 0);
    assert!(!w.shipments.values().any(|s| s.dispatch.order_id == second));
    let conversations_left_open = w
        .conversations_of(&second)
        .filter(|(_, c)| !c.conversation.phase.is_terminal())
        .count();
    assert_eq!(conversations_left_open, 0);
}

#[test]
fn no_willing_carrier_fails_the_order_without_dispatch() {
    let mut doc = quiet_doc();
    for e in doc["entities"].as_array_mut().unwrap() {
        if e["role"] == "third-party-logistics" {
            e["carrier"]["max_load_kg"] = json!(1);
        }
    }
    let mut sim = Simulation::new(scenario(&doc));
    let before = sim.world().ledgers.clone();
    let order = sim.place_order(&id("CMC"), sim.scenario().default_lines()).unwrap();
    assert_eq!(sim.run_until_settled(&order).unwrap(), OrderStatus::Failed);
    assert_eq!(sim.world().ledgers, before);
    assert!(sim.world().shipments.is_empty());
    let failed_stage = sim.log().events().iter().find_map(|e| match &e.body {
        EventBody::ProcessFailed(f) => Some(f.stage.clone()),
        _ => None,
    });
    assert_eq!(failed_stage.as_deref(), Some("carrier"));
}

#[test]
fn dispatch_below_reorder_point_triggers_replenishment() {
    let mut doc = quiet_doc();
    doc["reorder"] = json!({ "enabled": true, "points_kg": { "beef": 40 } });
    set_stock(&mut doc, "CMC", "beef", 45.0);
    let mut sim = Simulation::new(scenario(&doc));
    sim.place_order(&id("R1"), vec![OrderLine::kg("beef", 10)]).unwrap();
    sim.run_to_quiescence();
    let reorders: Vec<_> = sim
        .log()
        .events()
        .iter()
        .filter_map(|e| match &e.body {
            EventBody::OrderPlaced(p) if p.trigger == Trigger::Reorder => Some(p.clone()),
            _ => None,
        })
        .collect();
    assert_eq!(reorders.len(), 1);
    assert_eq!(reorders[0].buyer, id("CMC"));
    assert_eq!(reorders[0].lines, vec![OrderLine::kg("beef", 50)]);
    assert_eq!(on_hand(sim.world(), "CMC", "beef"), 85 * KG);
}

#[test]
fn reorder_now_without_shortfall_is_an_error() {
    let mut sim = Simulation::new(Scenario::default_case_study());
    assert!(matches!(sim.reorder_now(), Err(SimError::NothingToReorder)));
}

#[test]
fn unknown_buyer_and_bad_lines_are_rejected_before_any_event() {
    let mut sim = Simulation::new(scenario(&quiet_doc()));
    let len = sim.log().len();
    assert!(matches!(
        sim.place_order(&id("GHOST"), vec![OrderLine::kg("beef", 1)]),
        Err(SimError::UnknownBuyer(_))
    ));
    assert!(sim.place_order(&id("R1"), vec![OrderLine::kg("tofu", 1)]).is_err());
    assert!(sim.place_order(&id("R1"), vec![]).is_err());
    assert_eq!(sim.log().len(), len);
}

#[test]
fn restore_regenerates_a_manual_run() {
    let mut sim = Simulation::new(scenario(&quiet_doc()));
    sim.advance(SimTime::from_secs(30));
    sim.place_order(&id("R2"), vec![OrderLine::kg("lamb", 5)]).unwrap();
    sim.advance(SimTime::from_secs(400));
    let restored = Simulation::restore(scenario(&quiet_doc()), sim.log()).unwrap();
    assert_eq!(restored.log(), sim.log());
    assert_eq!(restored.snapshot(), sim.snapshot());
}

#[test]
fn restore_reports_divergence_from_a_tampered_log() {
    let sim = run_default();
    let text = sim.log().to_ndjson();
    let target = text
        .lines()
        .find(|l| l.contains("\"SensorReading\""))
        .unwrap()
        .to_string();
    let v: serde_json::Value = serde_json::from_str(&target).unwrap();
    let mut tampered = v.clone();
    tampered["payload"]["value"] = json!(99.5);
    let text = text.replacen(&target, &tampered.to_string(), 1);
    let log = EventLog::from_ndjson(&text).unwrap();
    let Err(err) = Simulation::restore(Scenario::default_case_study(), &log) else {
        panic!("tampered log restored cleanly");
    };
    assert!(matches!(err, SimError::Divergence(seq) if seq == v["seq"].as_u64().unwrap()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn advancing_in_pieces_matches_one_advance(cuts in prop::collection::vec(0u64..9_000, 0..6)) {
        let end = SimTime::from_secs(9_000);
        let mut whole = Simulation::new(Scenario::default_case_study());
        whole.advance(end);
        let mut pieces = Simulation::new(Scenario::default_case_study());
        let mut cuts = cuts;
        cuts.sort_unstable();
        for c in cuts {
            pieces.advance(SimTime::from_secs(c));
        }
        pieces.advance(end);
        prop_assert_eq!(whole.log(), pieces.log());
    }
}

#[test]
fn ndjson_round_trip_is_exact() {
    let sim = run_default();
    let text = sim.log().to_ndjson();
    let back = EventLog::from_ndjson(&text).unwrap();
    assert_eq!(&back, sim.log());
    assert_eq!(back.to_ndjson(), text);
}
