//! The simulation driver. Every state change goes through [`Simulation::emit`],
//! which appends an event to the log and folds it into the world, so the log
//! alone reproduces the run.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use serde_json::json;
use thiserror::Error;

use crate::agents::{
    self, carriers_of, AgentError, AgentState, DeliveryAssessment, DeliveryRequest,
};
use crate::contract_net::{
    issue_cfp, AwardOutcome, Conversation, Performative, Phase, ProtocolMessage, Response,
};
use crate::event::{
    AmbientAlert, CfpIssued, ChatMessage, DeliveryAssessed, Event, EventBody, EventLog,
    InventoryReason, InventoryUpdated, Invoice, OrderPlaced, ProcessFailed, ProposalAccepted,
    ProposalRefused, ProposalRejected, ProposalSubmitted, SensorReadingEvent, ShipmentDelivered,
    ShipmentDispatched, SimTime, Stage, Task, Trigger, VehicleMoved,
};
use crate::model::{EntityId, OrderLine, OrderStatus, ProcessKind, Role};
use crate::scenario::Scenario;
use crate::sim::route::{tracking_number, travel_time, vehicle_position, Route, VehicleStatus};
use crate::sim::sensor::{detect_violation, next_sensor_reading};
use crate::sim::{stream_rng, SimClock};
use crate::world::{FoldError, Snapshot, World};

/// Upper bound on how far [`Simulation::run_to_quiescence`] looks ahead.
pub const QUIESCENCE_HORIZON: SimTime = SimTime::from_millis(365 * 24 * 3600 * 1000);

#[derive(Debug, Error)]
pub enum SimError {
    #[error("unknown buyer {0}")]
    UnknownBuyer(EntityId),
    #[error("{0} is a {1} and cannot place orders")]
    NotABuyer(EntityId, Role),
    #[error("invalid order: {0}")]
    InvalidOrder(String),
    #[error("nothing is below its reorder point")]
    NothingToReorder,
    #[error("order {0} is unknown")]
    UnknownOrder(String),
    #[error("restored run diverges from the recorded log at seq {0}")]
    Divergence(u64),
    #[error(transparent)]
    Fold(#[from] FoldError),
}

#[derive(Debug, Clone)]
enum Action {
    Scripted(usize),
    Respond { conv_id: String, participant: EntityId },
    Deadline { conv_id: String },
    VehicleTick { shipment_id: String },
    Sample { shipment_id: String, sensor: usize },
    Arrive { shipment_id: String },
}

pub struct Simulation {
    scenario: Scenario,
    world: World,
    log: EventLog,
    clock: SimClock<Action>,
    streams: BTreeMap<String, ChaCha8Rng>,
    routes: BTreeMap<String, Route>,
}

impl Simulation {
    /// Opens the log with one opening-balance event per stock-holding
    /// entity and product, then queues the scripted orders.
    pub fn new(scenario: Scenario) -> Self {
        let mut sim = Simulation {
            world: World::default(),
            log: EventLog::new(),
            clock: SimClock::new(),
            streams: BTreeMap::new(),
            routes: BTreeMap::new(),
            scenario,
        };
        let holders: Vec<EntityId> = sim
            .scenario
            .network
            .entities()
            .filter(|e| e.role.holds_stock())
            .map(|e| e.id.clone())
            .collect();
        for owner in holders {
            let points = sim
                .scenario
                .reorder
                .as_ref()
                .filter(|r| r.owner == owner)
                .map(|r| r.points.clone())
                .unwrap_or_default();
            for product in sim.scenario.products.clone() {
                let g = sim
                    .scenario
                    .initial_stock
                    .get(&owner)
                    .and_then(|s| s.get(&product))
                    .copied()
                    .unwrap_or(0);
                sim.emit(EventBody::InventoryUpdated(InventoryUpdated {
                    owner: owner.clone(),
                    reorder_point_g: points.get(&product).copied(),
                    product,
                    delta_g: g as i64,
                    on_hand_g: g,
                    reason: InventoryReason::Initial,
                    order_id: None,
                }));
            }
        }
        for (i, s) in sim.scenario.script.iter().enumerate() {
            sim.clock.schedule(s.at, Action::Scripted(i));
        }
        sim
    }

    /// Rebuilds a run from its recorded log by replaying the manual commands
    /// it contains, and checks the regenerated log matches event for event.
    pub fn restore(scenario: Scenario, recorded: &EventLog) -> Result<Self, SimError> {
        let mut sim = Simulation::new(scenario);
        for e in recorded.events() {
            if let EventBody::OrderPlaced(p) = &e.body {
                if p.trigger == Trigger::Manual {
                    sim.advance(e.sim_time);
                    sim.place_order(&p.buyer, p.lines.clone())?;
                }
            }
        }
        if let Some(last) = recorded.events().last() {
            sim.advance(last.sim_time);
        }
        let ours = sim.log.events();
        let theirs = recorded.events();
        if let Some(i) = (0..ours.len().max(theirs.len())).find(|&i| ours.get(i) != theirs.get(i)) {
            return Err(SimError::Divergence(i as u64 + 1));
        }
        Ok(sim)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn now(&self) -> SimTime {
        self.clock.now()
    }

    pub fn snapshot(&self) -> Snapshot {
        self.world.snapshot()
    }

    pub fn next_fire_time(&self) -> Option<SimTime> {
        self.clock.next_fire_time()
    }

    /// Fires everything due up to `until` and moves the clock there.
    /// Returns the events produced.
    pub fn advance(&mut self, until: SimTime) -> Vec<Event> {
        let start = self.log.len();
        while let Some((_, action)) = self.clock.pop_due(until) {
            self.fire(action);
        }
        self.clock.set_now(until);
        self.log.events()[start..].to_vec()
    }

    /// Runs until nothing is left to do, or the horizon is reached.
    pub fn run_to_quiescence(&mut self) -> Vec<Event> {
        let start = self.log.len();
        let limit = self.now() + QUIESCENCE_HORIZON;
        while let Some(t) = self.next_fire_time().filter(|t| *t <= limit) {
            self.advance(t);
        }
        self.log.events()[start..].to_vec()
    }

    /// Runs until `order_id` is delivered or failed, or nothing is left to do.
    pub fn run_until_settled(&mut self, order_id: &str) -> Result<OrderStatus, SimError> {
        loop {
            let status = self
                .world
                .orders
                .get(order_id)
                .ok_or_else(|| SimError::UnknownOrder(order_id.to_string()))?
                .status;
            if status.is_terminal() {
                return Ok(status);
            }
            match self.next_fire_time() {
                Some(t) => {
                    self.advance(t);
                }
                None => return Ok(status),
            }
        }
    }

    /// The human launch action: places an order for `buyer` now.
    pub fn place_order(
        &mut self,
        buyer: &EntityId,
        lines: Vec<OrderLine>,
    ) -> Result<String, SimError> {
        self.start_order(buyer, lines, Trigger::Manual)
    }

    /// Runs the reorder check for the policy owner and places a replenishment
    /// order for everything below its point.
    pub fn reorder_now(&mut self) -> Result<String, SimError> {
        let lines = self.reorder_lines().ok_or(SimError::NothingToReorder)?;
        let owner = self
            .scenario
            .reorder
            .as_ref()
            .map(|r| r.owner.clone())
            .ok_or(SimError::NothingToReorder)?;
        self.start_order(&owner, lines, Trigger::Reorder)
    }

    fn reorder_lines(&self) -> Option<Vec<OrderLine>> {
        let policy = self.scenario.reorder.as_ref()?;
        let ledger = self.world.ledgers.get(&policy.owner)?;
        let low = ledger.reorder_check();
        (!low.is_empty()).then(|| {
            low.into_iter()
                .map(|product| OrderLine {
                    product,
                    quantity_g: policy.order_g,
                })
                .collect()
        })
    }

    fn sellers_for(&self, buyer: &EntityId, process: ProcessKind) -> Vec<EntityId> {
        let role = match process {
            ProcessKind::Replenishment => Role::Supplier,
            ProcessKind::Wholesale => Role::Wholesaler,
        };
        let allowed = self.scenario.process(process).sellers.as_deref();
        self.scenario
            .network
            .connected(buyer, role)
            .into_iter()
            .filter(|s| allowed.is_none_or(|a| a.contains(s)))
            .collect()
    }

    fn start_order(
        &mut self,
        buyer: &EntityId,
        lines: Vec<OrderLine>,
        trigger: Trigger,
    ) -> Result<String, SimError> {
        let entity = self
            .scenario
            .entity(buyer)
            .ok_or_else(|| SimError::UnknownBuyer(buyer.clone()))?;
        let process = match entity.role {
            Role::Wholesaler => ProcessKind::Replenishment,
            Role::Retailer => ProcessKind::Wholesale,
            other => return Err(SimError::NotABuyer(buyer.clone(), other)),
        };
        if lines.is_empty() {
            return Err(SimError::InvalidOrder("at least one line required".into()));
        }
        for (i, l) in lines.iter().enumerate() {
            if !self.scenario.products.contains(&l.product) {
                return Err(SimError::InvalidOrder(format!("unknown product {:?}", l.product)));
            }
            if l.quantity_g == 0 {
                return Err(SimError::InvalidOrder(format!("line {i} has zero quantity")));
            }
            if lines[..i].iter().any(|o| o.product == l.product) {
                return Err(SimError::InvalidOrder(format!("{} listed twice", l.product)));
            }
        }
        let sellers = self.sellers_for(buyer, process);
        if sellers.is_empty() {
            return Err(SimError::InvalidOrder(format!("{buyer} has no connected seller")));
        }

        let order_id = format!("ORD-{:04}", self.world.orders.len() + 1);
        self.emit(EventBody::OrderPlaced(OrderPlaced {
            order_id: order_id.clone(),
            buyer: buyer.clone(),
            lines: lines.clone(),
            process,
            trigger,
        }));
        let now = self.now();
        let conv_id = self.next_conv_id();
        let task = Task {
            lines,
            shipment: None,
        };
        let deadline = now + self.scenario.negotiation.cfp_window;
        let opened = issue_cfp(&conv_id, buyer, task, sellers, deadline, now)
            .expect("sellers are distinct and the window is positive");
        self.open(&order_id, Stage::Supply, None, opened);
        Ok(order_id)
    }

    fn next_conv_id(&self) -> String {
        format!("CNV-{:04}", self.world.conversations.len() + 1)
    }

    fn emit(&mut self, body: EventBody) {
        let now = self.clock.now();
        let event = self.log.append(now, body);
        self.world
            .apply(event)
            .unwrap_or_else(|e| panic!("engine produced an event the world rejects: {e}"));
    }

    fn chat(&mut self, m: &ProtocolMessage) {
        self.emit(EventBody::ChatMessage(ChatMessage {
            conv_id: m.conv_id.clone(),
            performative: m.performative,
            sender: m.sender.clone(),
            receiver: m.receiver.clone(),
            body: m.body.clone(),
        }));
    }

    fn open(
        &mut self,
        order_id: &str,
        stage: Stage,
        parent: Option<String>,
        (conv, messages): (Conversation, Vec<ProtocolMessage>),
    ) {
        self.emit(EventBody::CfpIssued(CfpIssued {
            conv_id: conv.conv_id.clone(),
            order_id: order_id.to_string(),
            stage,
            initiator: conv.initiator.clone(),
            participants: conv.participants.clone(),
            task: conv.task.clone(),
            deadline: conv.deadline,
            parent,
        }));
        for m in &messages {
            self.chat(m);
        }
        let reply_at = self.now() + self.scenario.negotiation.response_delay;
        for p in &conv.participants {
            self.clock.schedule(
                reply_at,
                Action::Respond {
                    conv_id: conv.conv_id.clone(),
                    participant: p.clone(),
                },
            );
        }
        self.clock.schedule(
            conv.deadline,
            Action::Deadline {
                conv_id: conv.conv_id,
            },
        );
    }

    fn fire(&mut self, action: Action) {
        match action {
            Action::Scripted(i) => {
                let s = self.scenario.script[i].clone();
                // A scripted order the network cannot serve is skipped.
                let _ = self.start_order(&s.buyer, s.lines, Trigger::Script);
            }
            Action::Respond {
                conv_id,
                participant,
            } => self.respond(&conv_id, &participant),
            Action::Deadline { conv_id } => {
                let collecting = self
                    .world
                    .conversation(&conv_id)
                    .is_some_and(|r| r.conversation.ready_to_award(self.now()));
                if collecting {
                    self.close_round(&conv_id);
                }
            }
            Action::VehicleTick { shipment_id } => self.vehicle_tick(&shipment_id),
            Action::Sample {
                shipment_id,
                sensor,
            } => self.sample(&shipment_id, sensor),
            Action::Arrive { shipment_id } => self.arrive(&shipment_id),
        }
    }

    fn agent_state(&self, id: &EntityId) -> AgentState {
        let entity = self
            .scenario
            .entity(id)
            .expect("participants come from the network")
            .clone();
        let mut state = AgentState::new(entity, self.world.ledgers.get(id).cloned());
        state.pending_conversations = self
            .world
            .conversations
            .iter()
            .filter(|(_, r)| {
                !r.conversation.phase.is_terminal()
                    && (&r.conversation.initiator == id || r.conversation.responses.contains_key(id))
            })
            .map(|(k, _)| k.clone())
            .collect();
        state.behavior_params = json!(self.scenario.weights);
        state
    }

    fn respond(&mut self, conv_id: &str, participant: &EntityId) {
        let Some(rec) = self.world.conversation(conv_id) else {
            return;
        };
        let conv = &rec.conversation;
        let pending = matches!(conv.responses.get(participant), Some(Response::Pending));
        if !pending || conv.phase != Phase::Collecting {
            return;
        }
        let order_id = rec.order_id.clone();
        let stage = rec.stage;
        let process = self.world.orders[&order_id].process;
        let cfp = ProtocolMessage {
            conv_id: conv_id.to_string(),
            performative: Performative::Cfp,
            sender: conv.initiator.clone(),
            receiver: participant.clone(),
            body: serde_json::to_value(&conv.task).expect("task serializes"),
            sim_time: self.now(),
        };
        let state = self.agent_state(participant);
        let decision = match stage {
            Stage::Supply => agents::supplier_handle_cfp(&state, &cfp),
            Stage::Logistics => {
                let allowed = self.scenario.process(process).carriers.as_deref();
                let carriers = carriers_of(&self.scenario.network, participant, allowed);
                agents::logistics_handle_cfp(&state, &cfp, &carriers)
            }
            Stage::Carrier => agents::carrier_handle_cfp(&state, &cfp),
        };
        let body = match &decision {
            agents::Decision::Propose { bid, quote } => {
                EventBody::ProposalSubmitted(ProposalSubmitted {
                    conv_id: conv_id.to_string(),
                    order_id,
                    sender: participant.clone(),
                    bid: *bid,
                    quote: *quote,
                })
            }
            agents::Decision::Refuse(reason) => EventBody::ProposalRefused(ProposalRefused {
                conv_id: conv_id.to_string(),
                order_id,
                sender: participant.clone(),
                reason: reason.as_str().to_string(),
            }),
        };
        let message = decision.into_message(&cfp, self.now());
        self.emit(body);
        self.chat(&message);
        let resolved = self
            .world
            .conversation(conv_id)
            .is_some_and(|r| r.conversation.is_resolved());
        if resolved {
            self.close_round(conv_id);
        }
    }

    fn close_round(&mut self, conv_id: &str) {
        let rec = self.world.conversation(conv_id).expect("known conversation").clone();
        let mut conv = rec.conversation.clone();
        let outcome = conv
            .award(self.world.policy, self.now())
            .expect("round is ready to award");
        match outcome {
            AwardOutcome::Awarded {
                winner,
                amount,
                messages,
                expired,
            } => {
                self.emit(EventBody::ProposalAccepted(ProposalAccepted {
                    conv_id: conv_id.to_string(),
                    order_id: rec.order_id.clone(),
                    stage: rec.stage,
                    initiator: conv.initiator.clone(),
                    winner: winner.clone(),
                    amount,
                    expired,
                }));
                self.chat(&messages[0]);
                for m in &messages[1..] {
                    self.emit(EventBody::ProposalRejected(ProposalRejected {
                        conv_id: conv_id.to_string(),
                        order_id: rec.order_id.clone(),
                        receiver: m.receiver.clone(),
                    }));
                    self.chat(m);
                }
                match rec.stage {
                    Stage::Supply => self.arrange_delivery(&rec.order_id, conv_id),
                    Stage::Logistics => self.subcontract(&rec.order_id, conv_id, &winner, &conv.task),
                    Stage::Carrier => self.dispatch(&rec.order_id),
                }
            }
            AwardOutcome::NoBids { expired } => {
                let reason = format!("no proposals in {} round", stage_name(rec.stage));
                self.fail(&rec.order_id, Some(conv_id), stage_name(rec.stage), &reason, expired);
            }
        }
    }

    fn delivery_request<'a>(
        &self,
        route_km: f64,
        allowed_carriers: Option<&'a [EntityId]>,
    ) -> DeliveryRequest<'a> {
        let now = self.now();
        DeliveryRequest {
            conv_id: self.next_conv_id(),
            now,
            deadline: now + self.scenario.negotiation.cfp_window,
            route_km,
            allowed_carriers,
        }
    }

    fn arrange_delivery(&mut self, order_id: &str, supply_conv: &str) {
        let order = self.world.orders[order_id].clone();
        let seller = order.seller.clone().expect("awarded order has a seller");
        let route_km = self.scenario.route_km(&seller, &order.buyer);
        let allowed = self.scenario.process(order.process).carriers.clone();
        let req = self.delivery_request(route_km, allowed.as_deref());
        match agents::seller_arrange_delivery(&order, &self.scenario.network, &req) {
            Ok(opened) => self.open(order_id, Stage::Logistics, Some(supply_conv.to_string()), opened),
            Err(e) => self.fail_agent(order_id, "logistics", e),
        }
    }

    fn subcontract(&mut self, order_id: &str, logistics_conv: &str, logistics: &EntityId, task: &Task) {
        let process = self.world.orders[order_id].process;
        let route_km = task.shipment.as_ref().map_or(0.0, |s| s.route_km);
        let allowed = self.scenario.process(process).carriers.clone();
        let req = self.delivery_request(route_km, allowed.as_deref());
        match agents::logistics_subcontract(logistics, task, &self.scenario.network, &req) {
            Ok(opened) => self.open(order_id, Stage::Carrier, Some(logistics_conv.to_string()), opened),
            Err(e) => self.fail_agent(order_id, "carrier", e),
        }
    }

    fn fail_agent(&mut self, order_id: &str, stage: &str, e: AgentError) {
        self.fail(order_id, None, stage, &e.to_string(), vec![]);
    }

    /// Every awarded conversation of the order reports FAILURE to its
    /// initiator, innermost first, then the order fails.
    fn fail(
        &mut self,
        order_id: &str,
        conv_id: Option<&str>,
        stage: &str,
        reason: &str,
        expired: Vec<EntityId>,
    ) {
        for m in self.reports(order_id, Performative::Failure, json!({ "reason": reason })) {
            self.chat(&m);
        }
        self.emit(EventBody::ProcessFailed(ProcessFailed {
            order_id: order_id.to_string(),
            conv_id: conv_id.map(str::to_string),
            stage: stage.to_string(),
            reason: reason.to_string(),
            expired,
        }));
    }

    fn reports(
        &self,
        order_id: &str,
        performative: Performative,
        body: serde_json::Value,
    ) -> Vec<ProtocolMessage> {
        let mut out: Vec<ProtocolMessage> = self
            .world
            .conversations_of(order_id)
            .filter(|(_, r)| r.conversation.phase == Phase::Awarded)
            .map(|(id, r)| {
                ProtocolMessage::report(
                    id,
                    performative,
                    r.conversation.winner.as_ref().expect("awarded"),
                    &r.conversation.initiator,
                    body.clone(),
                    self.now(),
                )
            })
            .collect();
        out.reverse();
        out
    }

    fn winner_of(&self, order_id: &str, stage: Stage) -> Option<(EntityId, EntityId, f64)> {
        self.world
            .conversations_of(order_id)
            .filter(|(_, r)| r.stage == stage)
            .filter_map(|(_, r)| {
                let c = &r.conversation;
                let w = c.winner.clone()?;
                let bid = match c.responses.get(&w) {
                    Some(Response::Proposed { bid }) => *bid,
                    _ => return None,
                };
                Some((c.initiator.clone(), w, bid))
            })
            .last()
    }

    fn dispatch(&mut self, order_id: &str) {
        let order = self.world.orders[order_id].clone();
        let seller = order.seller.clone().expect("awarded order has a seller");
        let (_, logistics, _) = self.winner_of(order_id, Stage::Logistics).expect("logistics awarded");
        let (_, carrier, _) = self.winner_of(order_id, Stage::Carrier).expect("carrier awarded");

        let short = order.lines.iter().find(|l| {
            self.world
                .ledgers
                .get(&seller)
                .is_none_or(|led| led.on_hand(&l.product) < l.quantity_g)
        });
        if let Some(l) = short {
            let reason = format!("{seller} no longer has {} of {}", l.quantity_g, l.product);
            self.fail(order_id, None, "dispatch", &reason, vec![]);
            return;
        }
        let terms = self
            .scenario
            .entity(&carrier)
            .and_then(|e| e.carrier.clone())
            .expect("carriers have terms");
        let waypoints = self.scenario.route_between(&seller, &order.buyer);
        let route = match Route::new(waypoints, terms.quoted_speed_kmh * terms.speed_factor) {
            Ok(r) => r,
            Err(e) => {
                self.fail(order_id, None, "dispatch", &format!("no usable route: {e}"), vec![]);
                return;
            }
        };

        for l in &order.lines {
            let ledger = &self.world.ledgers[&seller];
            let (_, change) = ledger
                .apply_inventory_delta(&l.product, -(l.quantity_g as i64))
                .expect("stock checked above");
            self.emit(EventBody::InventoryUpdated(InventoryUpdated {
                owner: seller.clone(),
                product: l.product.clone(),
                delta_g: change.delta_g,
                on_hand_g: change.on_hand_g,
                reason: InventoryReason::Dispatch,
                order_id: Some(order_id.to_string()),
                reorder_point_g: None,
            }));
        }

        let n = self.world.shipments.len() as u64 + 1;
        let shipment_id = format!("SHP-{n:04}");
        self.emit(EventBody::ShipmentDispatched(ShipmentDispatched {
            shipment_id: shipment_id.clone(),
            order_id: order_id.to_string(),
            tracking_number: tracking_number(n),
            seller: seller.clone(),
            buyer: order.buyer.clone(),
            logistics,
            carrier,
            lines: order.lines.clone(),
            route: route.waypoints().to_vec(),
            route_km: route.length_km(),
            speed_kmh: route.speed_kmh(),
            quoted_eta: travel_time(route.length_km(), terms.quoted_speed_kmh),
        }));
        let arrival = self.now() + route.duration();
        self.routes.insert(shipment_id.clone(), route);
        self.clock.schedule(
            arrival,
            Action::Arrive {
                shipment_id: shipment_id.clone(),
            },
        );
        self.vehicle_tick(&shipment_id);
        for i in 0..self.scenario.sensor_profiles.len() {
            self.sample(&shipment_id, i);
        }

        let reorder_owner = self
            .scenario
            .reorder
            .as_ref()
            .filter(|r| r.enabled && r.owner == seller)
            .is_some();
        if reorder_owner && !self.world.open_replenishment_for(&seller) {
            if let Some(lines) = self.reorder_lines() {
                let _ = self.start_order(&seller, lines, Trigger::Reorder);
            }
        }
    }

    fn arrival_time(&self, shipment_id: &str) -> Option<SimTime> {
        let dispatched = self.world.shipments.get(shipment_id)?.dispatched_at;
        Some(dispatched + self.routes.get(shipment_id)?.duration())
    }

    fn en_route(&self, shipment_id: &str) -> bool {
        self.world
            .vehicles
            .get(shipment_id)
            .is_some_and(|v| v.status == VehicleStatus::EnRoute)
    }

    /// Queues `action` one `period` from now if that is still before arrival.
    fn schedule_before_arrival(&mut self, shipment_id: &str, period: SimTime, action: Action) {
        let Some(arrival) = self.arrival_time(shipment_id) else {
            return;
        };
        let next = self.now() + period;
        if period > SimTime::ZERO && next < arrival {
            self.clock.schedule(next, action);
        }
    }

    fn vehicle_tick(&mut self, shipment_id: &str) {
        if !self.en_route(shipment_id) {
            return;
        }
        let route = &self.routes[shipment_id];
        let elapsed = self.now() - self.world.shipments[shipment_id].dispatched_at;
        let (position, progress) = vehicle_position(route, elapsed);
        if progress < 1.0 {
            let tracking = self.world.vehicles[shipment_id].tracking_number.clone();
            self.emit(EventBody::VehicleMoved(VehicleMoved {
                shipment_id: shipment_id.to_string(),
                tracking_number: tracking,
                position,
                progress,
                status: VehicleStatus::EnRoute,
            }));
        }
        self.schedule_before_arrival(
            shipment_id,
            self.scenario.telemetry_period,
            Action::VehicleTick {
                shipment_id: shipment_id.to_string(),
            },
        );
    }

    fn sample(&mut self, shipment_id: &str, sensor: usize) {
        if !self.en_route(shipment_id) {
            return;
        }
        let profile = self.scenario.sensor_profiles[sensor].clone();
        let prev = self
            .world
            .last_readings
            .get(shipment_id)
            .and_then(|r| r.get(&profile.kind))
            .copied()
            .unwrap_or(profile.initial);
        let name = format!("sensor/{shipment_id}/{}", profile.kind.as_str());
        let seed = self.scenario.seed;
        let rng = self
            .streams
            .entry(name)
            .or_insert_with_key(|name| stream_rng(seed, name));
        let value = next_sensor_reading(&profile, prev, rng);
        self.emit(EventBody::SensorReading(SensorReadingEvent {
            shipment_id: shipment_id.to_string(),
            sensor: profile.kind,
            value,
        }));
        if let Some(v) = detect_violation(value, &profile) {
            self.emit(EventBody::AmbientAlert(AmbientAlert {
                shipment_id: shipment_id.to_string(),
                sensor: profile.kind,
                value,
                direction: v.direction,
                magnitude: v.magnitude,
            }));
        }
        self.schedule_before_arrival(
            shipment_id,
            profile.sample_period,
            Action::Sample {
                shipment_id: shipment_id.to_string(),
                sensor,
            },
        );
    }

    fn arrive(&mut self, shipment_id: &str) {
        let Some(route) = self.routes.remove(shipment_id) else {
            return;
        };
        let record = self.world.shipments[shipment_id].clone();
        let d = &record.dispatch;
        let order_id = d.order_id.clone();
        self.emit(EventBody::VehicleMoved(VehicleMoved {
            shipment_id: shipment_id.to_string(),
            tracking_number: d.tracking_number.clone(),
            position: *route.waypoints().last().expect("route has waypoints"),
            progress: 1.0,
            status: VehicleStatus::Arrived,
        }));
        let on_time = self.now() - record.dispatched_at <= d.quoted_eta;
        self.emit(EventBody::ShipmentDelivered(ShipmentDelivered {
            shipment_id: shipment_id.to_string(),
            order_id: order_id.clone(),
            on_time,
        }));
        for l in &d.lines {
            let ledger = &self.world.ledgers[&d.buyer];
            let (_, change) = ledger
                .apply_inventory_delta(&l.product, l.quantity_g as i64)
                .expect("receipts only add stock");
            self.emit(EventBody::InventoryUpdated(InventoryUpdated {
                owner: d.buyer.clone(),
                product: l.product.clone(),
                delta_g: change.delta_g,
                on_hand_g: change.on_hand_g,
                reason: InventoryReason::Receipt,
                order_id: Some(order_id.clone()),
                reorder_point_g: None,
            }));
        }
        let done = json!({ "shipment_id": shipment_id });
        let mut invoices = Vec::new();
        for stage in [Stage::Supply, Stage::Logistics, Stage::Carrier] {
            if let Some((payer, payee, amount)) = self.winner_of(&order_id, stage) {
                invoices.push(Invoice { payer, payee, amount });
            }
        }
        for m in self.reports(&order_id, Performative::InformDone, done) {
            self.chat(&m);
        }
        let shipment = &self.world.shipments[shipment_id];
        let a = DeliveryAssessment::from_counts(
            shipment_id,
            on_time,
            shipment.readings,
            shipment.violations,
            self.scenario.weights,
        );
        self.emit(EventBody::DeliveryAssessed(DeliveryAssessed {
            shipment_id: shipment_id.to_string(),
            order_id,
            carrier: d.carrier.clone(),
            on_time,
            readings: a.readings,
            violations: a.violations,
            violation_fraction: a.violation_fraction,
            score: a.score,
            no_telemetry: a.no_telemetry,
            invoices,
        }));
    }
}

fn stage_name(stage: Stage) -> &'static str {
    match stage {
        Stage::Supply => "supply",
        Stage::Logistics => "logistics",
        Stage::Carrier => "carrier",
    }
}
