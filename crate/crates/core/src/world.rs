//! State as a pure fold over the event log, and the snapshot view of it.
//!
//! The live engine applies every event it emits through [`World::apply`], so
//! the running state and a replay of the log are the same computation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contract_net::{
    AwardOutcome, AwardPolicy, ContractNetError, Conversation, Performative, Phase,
    ProtocolMessage, Response,
};
use crate::event::{
    EventBody, Event, EventLog, InventoryReason, SimTime, Stage, ShipmentDispatched,
};
use crate::model::{
    EntityId, InventoryLedger, ModelError, Order, OrderStatus, ProcessKind,
};
use crate::sim::route::{VehicleState, VehicleStatus};
use crate::sim::sensor::SensorKind;

#[derive(Debug, Error)]
pub enum FoldError {
    #[error("seq {found} does not follow {last}")]
    Sequence { last: u64, found: u64 },
    #[error("seq {0}: sim time went backwards")]
    TimeReversal(u64),
    #[error("seq {seq}: unknown {what} {id}")]
    Unknown {
        seq: u64,
        what: &'static str,
        id: String,
    },
    #[error("seq {seq}: {source}")]
    Model {
        seq: u64,
        #[source]
        source: ModelError,
    },
    #[error("seq {seq}: {source}")]
    Protocol {
        seq: u64,
        #[source]
        source: ContractNetError,
    },
    #[error("seq {seq}: inconsistent event: {reason}")]
    Inconsistent { seq: u64, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationRecord {
    pub order_id: String,
    pub stage: Stage,
    pub parent: Option<String>,
    pub conversation: Conversation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShipmentRecord {
    pub dispatch: ShipmentDispatched,
    pub dispatched_at: SimTime,
    pub readings: u64,
    pub violations: u64,
    pub delivered_at: Option<SimTime>,
    pub on_time: Option<bool>,
    pub assessed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub sim_time: SimTime,
    pub last_seq: u64,
    pub policy: AwardPolicy,
    pub ledgers: BTreeMap<EntityId, InventoryLedger>,
    pub orders: BTreeMap<String, Order>,
    pub conversations: BTreeMap<String, ConversationRecord>,
    pub shipments: BTreeMap<String, ShipmentRecord>,
    pub vehicles: BTreeMap<String, VehicleState>,
    pub last_readings: BTreeMap<String, BTreeMap<SensorKind, f64>>,
}

impl Default for World {
    fn default() -> Self {
        World::new(AwardPolicy::default())
    }
}

/// Point-in-time view served to clients and written at the end of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    /// Time of the last applied event.
    pub sim_time: SimTime,
    pub last_seq: u64,
    pub ledgers: BTreeMap<EntityId, InventoryLedger>,
    pub orders: BTreeMap<String, Order>,
    /// Conversations that have not reached a terminal phase.
    pub conversations: BTreeMap<String, ConversationView>,
    pub vehicles: BTreeMap<String, VehicleState>,
    pub last_readings: BTreeMap<String, BTreeMap<SensorKind, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationView {
    pub order_id: String,
    pub stage: Stage,
    pub initiator: EntityId,
    pub phase: Phase,
    pub deadline: SimTime,
    pub responses: BTreeMap<EntityId, Response>,
    pub winner: Option<EntityId>,
}

impl World {
    pub fn new(policy: AwardPolicy) -> Self {
        World {
            sim_time: SimTime::ZERO,
            last_seq: 0,
            policy,
            ledgers: BTreeMap::new(),
            orders: BTreeMap::new(),
            conversations: BTreeMap::new(),
            shipments: BTreeMap::new(),
            vehicles: BTreeMap::new(),
            last_readings: BTreeMap::new(),
        }
    }

    pub fn fold(events: &[Event]) -> Result<World, FoldError> {
        let mut w = World::default();
        for e in events {
            w.apply(e)?;
        }
        Ok(w)
    }

    pub fn fold_log(log: &EventLog) -> Result<World, FoldError> {
        World::fold(log.events())
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            sim_time: self.sim_time,
            last_seq: self.last_seq,
            ledgers: self.ledgers.clone(),
            orders: self.orders.clone(),
            conversations: self
                .conversations
                .iter()
                .filter(|(_, r)| !r.conversation.phase.is_terminal())
                .map(|(id, r)| {
                    let c = &r.conversation;
                    (
                        id.clone(),
                        ConversationView {
                            order_id: r.order_id.clone(),
                            stage: r.stage,
                            initiator: c.initiator.clone(),
                            phase: c.phase,
                            deadline: c.deadline,
                            responses: c.responses.clone(),
                            winner: c.winner.clone(),
                        },
                    )
                })
                .collect(),
            vehicles: self.vehicles.clone(),
            last_readings: self.last_readings.clone(),
        }
    }

    pub fn total_grams(&self) -> u64 {
        self.ledgers.values().map(|l| l.total()).sum()
    }

    pub fn conversation(&self, conv_id: &str) -> Option<&ConversationRecord> {
        self.conversations.get(conv_id)
    }

    /// Conversations of an order, oldest first.
    pub fn conversations_of<'a>(
        &'a self,
        order_id: &'a str,
    ) -> impl Iterator<Item = (&'a String, &'a ConversationRecord)> + 'a {
        self.conversations
            .iter()
            .filter(move |(_, r)| r.order_id == order_id)
    }

    pub fn open_replenishment_for(&self, buyer: &EntityId) -> bool {
        self.orders.values().any(|o| {
            o.process == ProcessKind::Replenishment && &o.buyer == buyer && !o.status.is_terminal()
        })
    }

    fn order_mut(&mut self, seq: u64, id: &str) -> Result<&mut Order, FoldError> {
        self.orders.get_mut(id).ok_or_else(|| FoldError::Unknown {
            seq,
            what: "order",
            id: id.to_string(),
        })
    }

    fn conv_mut(&mut self, seq: u64, id: &str) -> Result<&mut ConversationRecord, FoldError> {
        self.conversations.get_mut(id).ok_or_else(|| FoldError::Unknown {
            seq,
            what: "conversation",
            id: id.to_string(),
        })
    }

    fn shipment_mut(&mut self, seq: u64, id: &str) -> Result<&mut ShipmentRecord, FoldError> {
        self.shipments.get_mut(id).ok_or_else(|| FoldError::Unknown {
            seq,
            what: "shipment",
            id: id.to_string(),
        })
    }

    fn transition(&mut self, seq: u64, order_id: &str, to: OrderStatus) -> Result<(), FoldError> {
        self.order_mut(seq, order_id)?
            .transition(to)
            .map_err(|source| FoldError::Model { seq, source })
    }

    pub fn apply(&mut self, e: &Event) -> Result<(), FoldError> {
        let seq = e.seq;
        if seq != self.last_seq + 1 {
            return Err(FoldError::Sequence {
                last: self.last_seq,
                found: seq,
            });
        }
        if e.sim_time < self.sim_time {
            return Err(FoldError::TimeReversal(seq));
        }
        let t = e.sim_time;
        let proto = |source| FoldError::Protocol { seq, source };
        let inconsistent = |reason: String| FoldError::Inconsistent { seq, reason };

        match &e.body {
            EventBody::OrderPlaced(p) => {
                if self.orders.contains_key(&p.order_id) {
                    return Err(inconsistent(format!("order {} placed twice", p.order_id)));
                }
                let order = Order::new(
                    p.order_id.clone(),
                    p.buyer.clone(),
                    p.lines.clone(),
                    p.process,
                    t,
                )
                .map_err(|source| FoldError::Model { seq, source })?;
                self.orders.insert(p.order_id.clone(), order);
            }
            EventBody::CfpIssued(p) => {
                if self.conversations.contains_key(&p.conv_id) {
                    return Err(inconsistent(format!("conversation {} reopened", p.conv_id)));
                }
                let (conv, _) = crate::contract_net::issue_cfp(
                    &p.conv_id,
                    &p.initiator,
                    p.task.clone(),
                    p.participants.clone(),
                    p.deadline,
                    t,
                )
                .map_err(proto)?;
                if p.stage == Stage::Supply {
                    self.transition(seq, &p.order_id, OrderStatus::Negotiating)?;
                } else {
                    self.order_mut(seq, &p.order_id)?;
                }
                self.conversations.insert(
                    p.conv_id.clone(),
                    ConversationRecord {
                        order_id: p.order_id.clone(),
                        stage: p.stage,
                        parent: p.parent.clone(),
                        conversation: conv,
                    },
                );
            }
            EventBody::ProposalSubmitted(p) => {
                let rec = self.conv_mut(seq, &p.conv_id)?;
                let receiver = rec.conversation.initiator.clone();
                rec.conversation
                    .receive_response(&ProtocolMessage::propose(
                        &p.conv_id, &p.sender, &receiver, p.bid, t,
                    ))
                    .map_err(proto)?;
            }
            EventBody::ProposalRefused(p) => {
                let rec = self.conv_mut(seq, &p.conv_id)?;
                let receiver = rec.conversation.initiator.clone();
                rec.conversation
                    .receive_response(&ProtocolMessage::refuse(
                        &p.conv_id, &p.sender, &receiver, &p.reason, t,
                    ))
                    .map_err(proto)?;
            }
            EventBody::ProposalAccepted(p) => {
                let policy = self.policy;
                let rec = self.conv_mut(seq, &p.conv_id)?;
                let stage = rec.stage;
                match rec.conversation.award(policy, t).map_err(proto)? {
                    AwardOutcome::Awarded {
                        winner,
                        amount,
                        expired,
                        ..
                    } => {
                        if winner != p.winner || amount != p.amount || expired != p.expired {
                            return Err(inconsistent(format!(
                                "award in {} does not match the recorded bids",
                                p.conv_id
                            )));
                        }
                    }
                    AwardOutcome::NoBids { .. } => {
                        return Err(inconsistent(format!("{} has no bids to accept", p.conv_id)))
                    }
                }
                if stage == Stage::Supply {
                    self.transition(seq, &p.order_id, OrderStatus::Awarded)?;
                    self.order_mut(seq, &p.order_id)?.seller = Some(p.winner.clone());
                }
            }
            EventBody::ProposalRejected(p) => {
                let rec = self.conv_mut(seq, &p.conv_id)?;
                let c = &rec.conversation;
                let proposed = matches!(c.responses.get(&p.receiver), Some(Response::Proposed { .. }));
                if c.phase != Phase::Awarded || !proposed || c.winner.as_ref() == Some(&p.receiver) {
                    return Err(inconsistent(format!("stray REJECT to {}", p.receiver)));
                }
            }
            EventBody::ShipmentDispatched(p) => {
                self.transition(seq, &p.order_id, OrderStatus::InTransit)?;
                let origin = *p
                    .route
                    .first()
                    .ok_or_else(|| inconsistent("empty route".into()))?;
                self.vehicles.insert(
                    p.shipment_id.clone(),
                    VehicleState {
                        tracking_number: p.tracking_number.clone(),
                        shipment_id: p.shipment_id.clone(),
                        position: origin,
                        progress: 0.0,
                        status: VehicleStatus::EnRoute,
                    },
                );
                self.shipments.insert(
                    p.shipment_id.clone(),
                    ShipmentRecord {
                        dispatch: p.clone(),
                        dispatched_at: t,
                        readings: 0,
                        violations: 0,
                        delivered_at: None,
                        on_time: None,
                        assessed: false,
                    },
                );
            }
            EventBody::VehicleMoved(p) => {
                let v = self.vehicles.get_mut(&p.shipment_id).ok_or_else(|| FoldError::Unknown {
                    seq,
                    what: "vehicle",
                    id: p.shipment_id.clone(),
                })?;
                if v.status == VehicleStatus::Arrived
                    || p.progress < v.progress
                    || !(0.0..=1.0).contains(&p.progress)
                    || (p.status == VehicleStatus::Arrived) != (p.progress == 1.0)
                {
                    return Err(inconsistent(format!("bad vehicle move for {}", p.shipment_id)));
                }
                v.position = p.position;
                v.progress = p.progress;
                v.status = p.status;
            }
            EventBody::SensorReading(p) => {
                let en_route = self
                    .vehicles
                    .get(&p.shipment_id)
                    .is_some_and(|v| v.status == VehicleStatus::EnRoute);
                if !en_route {
                    return Err(inconsistent(format!("reading for idle shipment {}", p.shipment_id)));
                }
                self.shipment_mut(seq, &p.shipment_id)?.readings += 1;
                self.last_readings
                    .entry(p.shipment_id.clone())
                    .or_default()
                    .insert(p.sensor, p.value);
            }
            EventBody::AmbientAlert(p) => {
                self.shipment_mut(seq, &p.shipment_id)?.violations += 1;
            }
            EventBody::ShipmentDelivered(p) => {
                let arrived = self
                    .vehicles
                    .get(&p.shipment_id)
                    .is_some_and(|v| v.status == VehicleStatus::Arrived);
                if !arrived {
                    return Err(inconsistent(format!("{} delivered before arrival", p.shipment_id)));
                }
                let s = self.shipment_mut(seq, &p.shipment_id)?;
                s.delivered_at = Some(t);
                s.on_time = Some(p.on_time);
                self.transition(seq, &p.order_id, OrderStatus::Delivered)?;
            }
            EventBody::InventoryUpdated(p) => {
                if p.reason == InventoryReason::Initial {
                    let ledger = self
                        .ledgers
                        .entry(p.owner.clone())
                        .or_insert_with(|| InventoryLedger::new(p.owner.clone()));
                    if ledger.balances.contains_key(&p.product)
                        || p.delta_g < 0
                        || p.delta_g as u64 != p.on_hand_g
                    {
                        return Err(inconsistent(format!(
                            "bad opening balance for {}/{}",
                            p.owner, p.product
                        )));
                    }
                    ledger.balances.insert(p.product.clone(), p.on_hand_g);
                    if let Some(point) = p.reorder_point_g {
                        ledger.reorder_points.insert(p.product.clone(), point);
                    }
                } else {
                    let ledger = self.ledgers.get(&p.owner).ok_or_else(|| FoldError::Unknown {
                        seq,
                        what: "ledger",
                        id: p.owner.0.clone(),
                    })?;
                    let (next, change) = ledger
                        .apply_inventory_delta(&p.product, p.delta_g)
                        .map_err(|source| FoldError::Model { seq, source })?;
                    if change.on_hand_g != p.on_hand_g {
                        return Err(inconsistent(format!(
                            "{}/{} balance {} but event says {}",
                            p.owner, p.product, change.on_hand_g, p.on_hand_g
                        )));
                    }
                    self.ledgers.insert(p.owner.clone(), next);
                }
            }
            EventBody::DeliveryAssessed(p) => {
                let s = self.shipment_mut(seq, &p.shipment_id)?;
                if s.delivered_at.is_none() || s.assessed {
                    return Err(inconsistent(format!("unexpected assessment of {}", p.shipment_id)));
                }
                s.assessed = true;
            }
            EventBody::ChatMessage(p) => {
                if matches!(p.performative, Performative::InformDone | Performative::Failure) {
                    let rec = self.conv_mut(seq, &p.conv_id)?;
                    rec.conversation
                        .complete(&ProtocolMessage::report(
                            &p.conv_id,
                            p.performative,
                            &p.sender,
                            &p.receiver,
                            p.body.clone(),
                            t,
                        ))
                        .map_err(proto)?;
                }
            }
            EventBody::ProcessFailed(p) => {
                if let Some(conv_id) = &p.conv_id {
                    let policy = self.policy;
                    let rec = self.conv_mut(seq, conv_id)?;
                    if rec.conversation.phase == Phase::Collecting {
                        match rec.conversation.award(policy, t).map_err(proto)? {
                            AwardOutcome::NoBids { expired } if expired == p.expired => {}
                            _ => {
                                return Err(inconsistent(format!(
                                    "{conv_id} failed although it had bids"
                                )))
                            }
                        }
                    }
                }
                self.transition(seq, &p.order_id, OrderStatus::Failed)?;
                for rec in self.conversations.values_mut() {
                    if rec.order_id == p.order_id && !rec.conversation.phase.is_terminal() {
                        rec.conversation.abort().map_err(proto)?;
                    }
                }
            }
        }
        self.last_seq = seq;
        self.sim_time = t;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{InventoryUpdated, OrderPlaced, Trigger};
    use crate::model::OrderLine;

    fn opening(owner: &str, product: &str, g: u64) -> EventBody {
        EventBody::InventoryUpdated(InventoryUpdated {
            owner: owner.into(),
            product: product.into(),
            delta_g: g as i64,
            on_hand_g: g,
            reason: InventoryReason::Initial,
            order_id: None,
            reorder_point_g: Some(40_000),
        })
    }

    #[test]
    fn rejects_gaps_and_negative_balances() {
        let mut log = EventLog::new();
        log.append(SimTime::ZERO, opening("CMC", "beef", 10_000));
        log.append(
            SimTime::ZERO,
            EventBody::InventoryUpdated(InventoryUpdated {
                owner: "CMC".into(),
                product: "beef".into(),
                delta_g: -20_000,
                on_hand_g: 0,
                reason: InventoryReason::Dispatch,
                order_id: None,
                reorder_point_g: None,
            }),
        );
        let err = World::fold_log(&log).unwrap_err();
        assert!(matches!(err, FoldError::Model { seq: 2, .. }));

        let mut w = World::default();
        let mut e = log.events()[0].clone();
        e.seq = 2;
        assert!(matches!(w.apply(&e), Err(FoldError::Sequence { last: 0, found: 2 })));
    }

    #[test]
    fn startup_snapshot_is_empty_with_opening_ledgers() {
        let mut log = EventLog::new();
        log.append(SimTime::ZERO, opening("CMC", "beef", 100_000));
        let w = World::fold_log(&log).unwrap();
        let s = w.snapshot();
        assert!(s.orders.is_empty() && s.vehicles.is_empty() && s.conversations.is_empty());
        assert_eq!(s.ledgers[&EntityId::from("CMC")].on_hand("beef"), 100_000);
        assert_eq!(s.sim_time, SimTime::ZERO);
        assert_eq!(s.last_seq, 1);
    }

    #[test]
    fn order_must_negotiate_before_dispatch() {
        let mut log = EventLog::new();
        log.append(
            SimTime::ZERO,
            EventBody::OrderPlaced(OrderPlaced {
                order_id: "ORD-0001".into(),
                buyer: "CMC".into(),
                lines: vec![OrderLine::kg("beef", 1)],
                process: ProcessKind::Replenishment,
                trigger: Trigger::Manual,
            }),
        );
        log.append(
            SimTime::ZERO,
            EventBody::ShipmentDelivered(crate::event::ShipmentDelivered {
                shipment_id: "SHP-0001".into(),
                order_id: "ORD-0001".into(),
                on_time: true,
            }),
        );
        assert!(World::fold_log(&log).is_err());
    }
}
