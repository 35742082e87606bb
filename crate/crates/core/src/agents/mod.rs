//! Role behaviours of the structural-entity agents and the delivery
//! assessment. All decisions are simple predefined rules; none learn.

pub mod grammar;
pub mod process;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::contract_net::{
    issue_cfp, AwardOutcome, AwardPolicy, ContractNetError, Conversation, Performative,
    ProtocolMessage,
};
use crate::event::{DeliveryQuote, Event, EventBody, SimTime, ShipmentRequest, Task};
use crate::model::{
    grams_to_kg, total_grams, EntityId, InventoryLedger, Network, Order, OrderStatus, Role,
    StructuralEntity,
};
use crate::sim::route::travel_time;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("no proposals to choose from")]
    NoProposals,
    #[error("no reachable {role}: {context}")]
    MissingRole { role: Role, context: String },
    #[error("order {0} has not been awarded")]
    NotAwarded(String),
    #[error(transparent)]
    Negotiation(#[from] ContractNetError),
}

/// What one agent knows when it decides.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentState {
    pub entity: StructuralEntity,
    pub ledger: Option<InventoryLedger>,
    pub pending_conversations: BTreeSet<String>,
    pub behavior_params: serde_json::Value,
}

impl AgentState {
    pub fn new(entity: StructuralEntity, ledger: Option<InventoryLedger>) -> Self {
        AgentState {
            entity,
            ledger,
            pending_conversations: BTreeSet::new(),
            behavior_params: json!({}),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefuseReason {
    InsufficientStock,
    NotOffered,
    NoCarrier,
    OverCapacity,
    NotAShipment,
    MalformedTask,
}

impl RefuseReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RefuseReason::InsufficientStock => "insufficient-stock",
            RefuseReason::NotOffered => "not-offered",
            RefuseReason::NoCarrier => "no-carrier",
            RefuseReason::OverCapacity => "over-capacity",
            RefuseReason::NotAShipment => "not-a-shipment",
            RefuseReason::MalformedTask => "malformed-task",
        }
    }
}

/// A participant's answer to a CFP.
#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    Propose {
        bid: f64,
        quote: Option<DeliveryQuote>,
    },
    Refuse(RefuseReason),
}

impl Decision {
    pub fn into_message(self, cfp: &ProtocolMessage, now: SimTime) -> ProtocolMessage {
        let (performative, body) = match self {
            Decision::Propose { bid, quote: None } => (Performative::Propose, json!({ "bid": bid })),
            Decision::Propose {
                bid,
                quote: Some(q),
            } => (
                Performative::Propose,
                json!({ "bid": bid, "quoted_speed_kmh": q.quoted_speed_kmh, "eta": q.eta }),
            ),
            Decision::Refuse(r) => (Performative::Refuse, json!({ "reason": r.as_str() })),
        };
        ProtocolMessage {
            conv_id: cfp.conv_id.clone(),
            performative,
            sender: cfp.receiver.clone(),
            receiver: cfp.sender.clone(),
            body,
            sim_time: now,
        }
    }
}

fn task_of(cfp: &ProtocolMessage) -> Option<Task> {
    serde_json::from_value(cfp.body.clone()).ok()
}

/// Seller rule: bid the catalog price of every line if stock covers all of
/// them, otherwise refuse.
pub fn supplier_handle_cfp(state: &AgentState, cfp: &ProtocolMessage) -> Decision {
    let Some(task) = task_of(cfp) else {
        return Decision::Refuse(RefuseReason::MalformedTask);
    };
    if task.lines.is_empty() {
        return Decision::Refuse(RefuseReason::MalformedTask);
    }
    let mut bid = 0.0;
    for line in &task.lines {
        let Some(offer) = state.entity.offer(&line.product) else {
            return Decision::Refuse(RefuseReason::NotOffered);
        };
        bid += offer.unit_price * grams_to_kg(line.quantity_g);
    }
    let covered = task.lines.iter().all(|l| {
        state
            .ledger
            .as_ref()
            .is_some_and(|ledger| ledger.on_hand(&l.product) >= l.quantity_g)
    });
    if !covered {
        return Decision::Refuse(RefuseReason::InsufficientStock);
    }
    Decision::Propose { bid, quote: None }
}

/// Logistics rule: quote base fee plus distance rate, provided at least one
/// 3PL is available to subcontract.
pub fn logistics_handle_cfp(
    state: &AgentState,
    cfp: &ProtocolMessage,
    carriers: &[EntityId],
) -> Decision {
    let Some(shipment) = task_of(cfp).and_then(|t| t.shipment) else {
        return Decision::Refuse(RefuseReason::NotAShipment);
    };
    let Some(terms) = &state.entity.carrier else {
        return Decision::Refuse(RefuseReason::NoCarrier);
    };
    if carriers.is_empty() {
        return Decision::Refuse(RefuseReason::NoCarrier);
    }
    if !terms.accepts_load(shipment.load_g) {
        return Decision::Refuse(RefuseReason::OverCapacity);
    }
    Decision::Propose {
        bid: terms.quote(shipment.route_km),
        quote: None,
    }
}

/// 3PL rule: price by distance, promise an ETA at the quoted speed.
pub fn carrier_handle_cfp(state: &AgentState, cfp: &ProtocolMessage) -> Decision {
    let Some(shipment) = task_of(cfp).and_then(|t| t.shipment) else {
        return Decision::Refuse(RefuseReason::NotAShipment);
    };
    let Some(terms) = &state.entity.carrier else {
        return Decision::Refuse(RefuseReason::NoCarrier);
    };
    if !terms.accepts_load(shipment.load_g) {
        return Decision::Refuse(RefuseReason::OverCapacity);
    }
    Decision::Propose {
        bid: terms.quote(shipment.route_km),
        quote: Some(DeliveryQuote {
            quoted_speed_kmh: terms.quoted_speed_kmh,
            eta: travel_time(shipment.route_km, terms.quoted_speed_kmh),
        }),
    }
}

/// Picks the cheapest proposal by running a one-shot award over it.
pub fn buyer_select_supplier(proposals: &[(EntityId, f64)]) -> Result<EntityId, AgentError> {
    if proposals.is_empty() {
        return Err(AgentError::NoProposals);
    }
    let buyer = EntityId::new("buyer");
    let task = Task {
        lines: vec![],
        shipment: None,
    };
    let (mut conv, _) = issue_cfp(
        "selection",
        &buyer,
        task,
        proposals.iter().map(|(id, _)| id.clone()).collect(),
        SimTime::from_millis(1),
        SimTime::ZERO,
    )?;
    for (id, bid) in proposals {
        conv.receive_response(&ProtocolMessage::propose(
            "selection",
            id,
            &buyer,
            *bid,
            SimTime::ZERO,
        ))?;
    }
    match conv.award(AwardPolicy::default(), SimTime::ZERO)? {
        AwardOutcome::Awarded { winner, .. } => Ok(winner),
        AwardOutcome::NoBids { .. } => Err(AgentError::NoProposals),
    }
}

/// Parameters of a delivery negotiation, fixed by the caller.
#[derive(Debug, Clone)]
pub struct DeliveryRequest<'a> {
    pub conv_id: String,
    pub now: SimTime,
    pub deadline: SimTime,
    pub route_km: f64,
    /// Restricts which 3PLs may be subcontracted.
    pub allowed_carriers: Option<&'a [EntityId]>,
}

/// 3PLs behind a logistics company, restricted to `allowed` when given.
pub fn carriers_of(
    network: &Network,
    logistics: &EntityId,
    allowed: Option<&[EntityId]>,
) -> Vec<EntityId> {
    network
        .connected(logistics, Role::ThirdPartyLogistics)
        .into_iter()
        .filter(|c| allowed.is_none_or(|a| a.contains(c)))
        .collect()
}

/// Seller side of an awarded order: a CFP to every logistics company it is
/// connected to that has a 3PL to subcontract.
pub fn seller_arrange_delivery(
    order: &Order,
    network: &Network,
    req: &DeliveryRequest<'_>,
) -> Result<(Conversation, Vec<ProtocolMessage>), AgentError> {
    let seller = match (&order.seller, order.status) {
        (Some(s), OrderStatus::Awarded) => s.clone(),
        _ => return Err(AgentError::NotAwarded(order.order_id.clone())),
    };
    let logistics = network.connected(&seller, Role::Logistics);
    if logistics.is_empty() {
        return Err(AgentError::MissingRole {
            role: Role::Logistics,
            context: format!("connected to {seller}"),
        });
    }
    let usable: Vec<EntityId> = logistics
        .into_iter()
        .filter(|l| !carriers_of(network, l, req.allowed_carriers).is_empty())
        .collect();
    if usable.is_empty() {
        return Err(AgentError::MissingRole {
            role: Role::ThirdPartyLogistics,
            context: format!("behind the logistics companies of {seller}"),
        });
    }
    let task = Task {
        lines: order.lines.clone(),
        shipment: Some(ShipmentRequest {
            from: seller.clone(),
            to: order.buyer.clone(),
            route_km: req.route_km,
            load_g: total_grams(&order.lines),
        }),
    };
    Ok(issue_cfp(&req.conv_id, &seller, task, usable, req.deadline, req.now)?)
}

/// The awarded logistics company re-announces the shipment to its 3PLs.
pub fn logistics_subcontract(
    logistics: &EntityId,
    task: &Task,
    network: &Network,
    req: &DeliveryRequest<'_>,
) -> Result<(Conversation, Vec<ProtocolMessage>), AgentError> {
    let carriers = carriers_of(network, logistics, req.allowed_carriers);
    if carriers.is_empty() {
        return Err(AgentError::MissingRole {
            role: Role::ThirdPartyLogistics,
            context: format!("connected to {logistics}"),
        });
    }
    Ok(issue_cfp(
        &req.conv_id,
        logistics,
        task.clone(),
        carriers,
        req.deadline,
        req.now,
    )?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssessmentWeights {
    pub late: f64,
    pub violation: f64,
}

impl Default for AssessmentWeights {
    fn default() -> Self {
        AssessmentWeights {
            late: 0.5,
            violation: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("weights must be non-negative and sum to 1")]
pub struct WeightsError;

impl AssessmentWeights {
    pub fn validate(&self) -> Result<(), WeightsError> {
        let ok = self.late >= 0.0
            && self.violation >= 0.0
            && (self.late + self.violation - 1.0).abs() <= 1e-9;
        if ok {
            Ok(())
        } else {
            Err(WeightsError)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryAssessment {
    pub shipment_id: String,
    pub on_time: bool,
    pub readings: u64,
    pub violations: u64,
    pub violation_fraction: f64,
    pub score: f64,
    /// Set when no reading was taken; the fraction is then 0.
    pub no_telemetry: bool,
}

impl DeliveryAssessment {
    pub fn from_counts(
        shipment_id: &str,
        on_time: bool,
        readings: u64,
        violations: u64,
        weights: AssessmentWeights,
    ) -> Self {
        let violation_fraction = if readings == 0 {
            0.0
        } else {
            violations.min(readings) as f64 / readings as f64
        };
        let late = if on_time { 0.0 } else { 1.0 };
        let score = (1.0 - weights.late * late - weights.violation * violation_fraction).clamp(0.0, 1.0);
        DeliveryAssessment {
            shipment_id: shipment_id.to_string(),
            on_time,
            readings,
            violations,
            violation_fraction,
            score,
            no_telemetry: readings == 0,
        }
    }
}

/// Scores a delivered shipment from its events. Returns `None` if the
/// shipment has not been delivered in `events`.
pub fn assess_delivery(
    events: &[Event],
    shipment_id: &str,
    weights: AssessmentWeights,
) -> Option<DeliveryAssessment> {
    let mut readings = 0;
    let mut violations = 0;
    let mut on_time = None;
    for e in events.iter().filter(|e| e.body.shipment_id() == Some(shipment_id)) {
        match &e.body {
            EventBody::SensorReading(_) => readings += 1,
            EventBody::AmbientAlert(_) => violations += 1,
            EventBody::ShipmentDelivered(d) => on_time = Some(d.on_time),
            _ => {}
        }
    }
    on_time.map(|on_time| {
        DeliveryAssessment::from_counts(shipment_id, on_time, readings, violations, weights)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contract_net::Phase;
    use crate::model::{
        CarrierTerms, Connection, ConnectionKind, GeoPoint, Lifecycle, OrderLine, ProcessKind,
        ProductOffer,
    };

    fn supplier(price: f64, stock_kg: u64) -> AgentState {
        let entity = StructuralEntity {
            id: "S1".into(),
            role: Role::Supplier,
            name: "S1".into(),
            catalog: vec![ProductOffer {
                product: "beef".into(),
                unit_price: price,
                stock_g: stock_kg * 1000,
            }],
            location: GeoPoint::new(0.0, 0.0),
            units: vec![],
            carrier: None,
        };
        let mut ledger = InventoryLedger::new("S1".into());
        ledger.balances.insert("beef".into(), stock_kg * 1000);
        AgentState::new(entity, Some(ledger))
    }

    fn cfp(lines: Vec<OrderLine>, shipment: Option<ShipmentRequest>) -> ProtocolMessage {
        ProtocolMessage {
            conv_id: "CNV-1".into(),
            performative: Performative::Cfp,
            sender: "CMC".into(),
            receiver: "S1".into(),
            body: serde_json::to_value(Task { lines, shipment }).unwrap(),
            sim_time: SimTime::ZERO,
        }
    }

    #[test]
    fn supplier_bids_catalog_price() {
        let d = supplier_handle_cfp(&supplier(4.5, 200), &cfp(vec![OrderLine::kg("beef", 50)], None));
        // 4.50 * 50 = 225.0
        assert_eq!(d, Decision::Propose { bid: 225.0, quote: None });
        let msg = d.into_message(&cfp(vec![], None), SimTime::from_secs(2));
        assert_eq!(msg.performative, Performative::Propose);
        assert_eq!(msg.sender, EntityId::from("S1"));
        assert_eq!(msg.bid(), Some(225.0));
    }

    #[test]
    fn supplier_refusals() {
        assert_eq!(
            supplier_handle_cfp(&supplier(4.5, 20), &cfp(vec![OrderLine::kg("beef", 50)], None)),
            Decision::Refuse(RefuseReason::InsufficientStock)
        );
        assert_eq!(
            supplier_handle_cfp(&supplier(4.5, 200), &cfp(vec![OrderLine::kg("pork", 5)], None)),
            Decision::Refuse(RefuseReason::NotOffered)
        );
        let mut bad = cfp(vec![], None);
        bad.body = json!({"nonsense": true});
        assert_eq!(
            supplier_handle_cfp(&supplier(4.5, 200), &bad),
            Decision::Refuse(RefuseReason::MalformedTask)
        );
    }

    #[test]
    fn buyer_selection() {
        let p = |v: &[(&str, f64)]| v.iter().map(|(i, b)| (EntityId::from(*i), *b)).collect::<Vec<_>>();
        assert_eq!(
            buyer_select_supplier(&p(&[("S1", 250.0), ("S2", 225.0), ("S3", 300.0)])).unwrap(),
            EntityId::from("S2")
        );
        assert_eq!(
            buyer_select_supplier(&p(&[("S2", 225.0), ("S1", 225.0)])).unwrap(),
            EntityId::from("S1")
        );
        assert_eq!(buyer_select_supplier(&[]), Err(AgentError::NoProposals));
    }

    fn carrier_entity(id: &str, role: Role, base_fee: f64) -> StructuralEntity {
        StructuralEntity {
            id: id.into(),
            role,
            name: id.into(),
            catalog: vec![],
            location: GeoPoint::new(0.0, 0.0),
            units: vec![],
            carrier: Some(CarrierTerms {
                base_fee,
                rate_per_km: 0.0,
                quoted_speed_kmh: 50.0,
                speed_factor: 1.0,
                max_load_kg: Some(100.0),
            }),
        }
    }

    fn link(a: &str, b: &str) -> Connection {
        Connection::external(a, b, ConnectionKind::LooseExternal, Lifecycle::Established)
    }

    fn awarded_order() -> Order {
        let mut o = Order::new(
            "ORD-0001".into(),
            "CMC".into(),
            vec![OrderLine::kg("beef", 50)],
            ProcessKind::Replenishment,
            SimTime::ZERO,
        )
        .unwrap();
        o.transition(OrderStatus::Negotiating).unwrap();
        o.transition(OrderStatus::Awarded).unwrap();
        o.seller = Some("S1".into());
        o
    }

    fn req(allowed: Option<&[EntityId]>) -> DeliveryRequest<'_> {
        DeliveryRequest {
            conv_id: "CNV-2".into(),
            now: SimTime::from_secs(10),
            deadline: SimTime::from_secs(610),
            route_km: 20.0,
            allowed_carriers: allowed,
        }
    }

    #[test]
    fn delivery_is_two_nested_auctions() {
        let s1 = supplier(4.5, 100).entity;
        let net = Network::unchecked(
            vec![
                s1,
                carrier_entity("L1", Role::Logistics, 30.0),
                carrier_entity("T1", Role::ThirdPartyLogistics, 10.0),
                carrier_entity("T2", Role::ThirdPartyLogistics, 12.0),
            ],
            vec![link("S1", "L1"), link("L1", "T1"), link("L1", "T2")],
        );
        let (outer, msgs) = seller_arrange_delivery(&awarded_order(), &net, &req(None)).unwrap();
        assert_eq!(outer.participants, vec![EntityId::from("L1")]);
        assert_eq!(msgs.len(), 1);
        assert_eq!(outer.initiator, EntityId::from("S1"));
        let shipment = outer.task.shipment.as_ref().unwrap();
        assert_eq!(shipment.load_g, 50_000);

        let (inner, msgs) = logistics_subcontract(&"L1".into(), &outer.task, &net, &req(None)).unwrap();
        assert_eq!(inner.participants, vec![EntityId::from("T1"), "T2".into()]);
        assert_eq!(msgs.len(), 2);

        let only_t2 = [EntityId::from("T2")];
        let (inner, _) = logistics_subcontract(&"L1".into(), &outer.task, &net, &req(Some(&only_t2))).unwrap();
        assert_eq!(inner.participants, vec![EntityId::from("T2")]);
    }

    #[test]
    fn delivery_without_3pl_is_missing_role() {
        let net = Network::unchecked(
            vec![supplier(4.5, 100).entity, carrier_entity("L1", Role::Logistics, 30.0)],
            vec![link("S1", "L1")],
        );
        assert!(matches!(
            seller_arrange_delivery(&awarded_order(), &net, &req(None)),
            Err(AgentError::MissingRole { role: Role::ThirdPartyLogistics, .. })
        ));
        let net = Network::unchecked(vec![supplier(4.5, 100).entity], vec![]);
        assert!(matches!(
            seller_arrange_delivery(&awarded_order(), &net, &req(None)),
            Err(AgentError::MissingRole { role: Role::Logistics, .. })
        ));
    }

    #[test]
    fn cheaper_logistics_company_wins() {
        let net = Network::unchecked(
            vec![
                supplier(4.5, 100).entity,
                carrier_entity("L1", Role::Logistics, 30.0),
                carrier_entity("L2", Role::Logistics, 28.0),
                carrier_entity("T1", Role::ThirdPartyLogistics, 10.0),
            ],
            vec![link("S1", "L1"), link("S1", "L2"), link("L1", "T1"), link("L2", "T1")],
        );
        let (mut conv, msgs) = seller_arrange_delivery(&awarded_order(), &net, &req(None)).unwrap();
        let carriers = [EntityId::from("T1")];
        for m in &msgs {
            let state = AgentState::new(net.entity(&m.receiver).unwrap().clone(), None);
            let reply = logistics_handle_cfp(&state, m, &carriers).into_message(m, SimTime::from_secs(12));
            conv.receive_response(&reply).unwrap();
        }
        let bids: Vec<_> = conv.proposals().map(|(id, b)| (id.clone(), b)).collect();
        assert_eq!(bids, vec![(EntityId::from("L1"), 30.0), ("L2".into(), 28.0)]);
        // argmin oracle
        let oracle = bids.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0.clone();
        let out = conv.award(AwardPolicy::default(), SimTime::from_secs(12)).unwrap();
        assert!(matches!(out, AwardOutcome::Awarded { winner, .. } if winner == oracle));
        assert_eq!(conv.phase, Phase::Awarded);
    }

    #[test]
    fn carrier_quotes_eta_and_checks_capacity() {
        let state = AgentState::new(carrier_entity("T1", Role::ThirdPartyLogistics, 10.0), None);
        let ship = |load_g| {
            cfp(
                vec![],
                Some(ShipmentRequest {
                    from: "S1".into(),
                    to: "CMC".into(),
                    route_km: 25.0,
                    load_g,
                }),
            )
        };
        let Decision::Propose { bid, quote: Some(q) } = carrier_handle_cfp(&state, &ship(50_000)) else {
            panic!("expected a proposal");
        };
        assert_eq!(bid, 10.0);
        // 25 km at 50 km/h is half an hour
        assert_eq!(q.eta, SimTime::from_secs(1800));
        assert_eq!(
            carrier_handle_cfp(&state, &ship(150_000)),
            Decision::Refuse(RefuseReason::OverCapacity)
        );
        assert_eq!(
            carrier_handle_cfp(&state, &cfp(vec![], None)),
            Decision::Refuse(RefuseReason::NotAShipment)
        );
        assert_eq!(
            logistics_handle_cfp(&state, &ship(1), &[]),
            Decision::Refuse(RefuseReason::NoCarrier)
        );
    }

    #[test]
    fn assessment_examples() {
        let w = AssessmentWeights::default();
        assert_eq!(DeliveryAssessment::from_counts("s", true, 10, 0, w).score, 1.0);
        // 1 - 0.5*1 - 0.5*0
        assert_eq!(DeliveryAssessment::from_counts("s", false, 10, 0, w).score, 0.5);
        // clamp(1 - 0.5 - 0.5)
        assert_eq!(DeliveryAssessment::from_counts("s", false, 10, 10, w).score, 0.0);
        let none = DeliveryAssessment::from_counts("s", true, 0, 0, w);
        assert!(none.no_telemetry);
        assert_eq!((none.violation_fraction, none.score), (0.0, 1.0));
    }

    #[test]
    fn weights_must_sum_to_one() {
        assert!(AssessmentWeights::default().validate().is_ok());
        assert!(AssessmentWeights { late: 0.7, violation: 0.3 }.validate().is_ok());
        assert!(AssessmentWeights { late: 0.7, violation: 0.7 }.validate().is_err());
        assert!(AssessmentWeights { late: -0.5, violation: 1.5 }.validate().is_err());
    }
}
