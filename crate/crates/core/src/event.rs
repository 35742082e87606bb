//! The append-only event log. Every digital and physical flow in a run is an
//! [`Event`]; entity state is a fold over the log (see [`crate::world`]).

use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::contract_net::Performative;
use crate::model::{EntityId, GeoPoint, Grams, OrderLine, ProcessKind};
use crate::sim::route::VehicleStatus;
use crate::sim::sensor::{AlertDirection, SensorKind};

/// Simulation time, held as integer milliseconds and written as seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms)
    }

    pub fn from_secs(s: u64) -> Self {
        SimTime(s * 1000)
    }

    /// Rounds up to the next whole millisecond.
    pub fn from_secs_f64_ceil(s: f64) -> Self {
        SimTime((s.max(0.0) * 1000.0).ceil() as u64)
    }

    pub fn from_secs_f64(s: f64) -> Self {
        SimTime((s.max(0.0) * 1000.0).round() as u64)
    }

    pub fn millis(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}s", self.as_secs_f64())
    }
}

impl Serialize for SimTime {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_secs_f64())
    }
}

impl<'de> Deserialize<'de> for SimTime {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let secs = f64::deserialize(d)?;
        if !secs.is_finite() || secs < 0.0 {
            return Err(serde::de::Error::custom("sim time must be a non-negative number"));
        }
        Ok(SimTime::from_secs_f64(secs))
    }
}

/// Which tier of the negotiation a conversation belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    /// Buyer selects a seller.
    Supply,
    /// Seller selects a logistics company.
    Logistics,
    /// Logistics company subcontracts a 3PL carrier.
    Carrier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trigger {
    /// Human Launch action (API, CLI script).
    Manual,
    /// Automatic reorder-point trigger.
    Reorder,
    /// Timed order from the scenario script.
    Script,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShipmentRequest {
    pub from: EntityId,
    pub to: EntityId,
    pub route_km: f64,
    pub load_g: Grams,
}

/// What a CFP asks participants to do.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub lines: Vec<OrderLine>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shipment: Option<ShipmentRequest>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeliveryQuote {
    pub quoted_speed_kmh: f64,
    pub eta: SimTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Invoice {
    pub payer: EntityId,
    pub payee: EntityId,
    pub amount: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InventoryReason {
    /// Opening balance; the only external source of product.
    Initial,
    Dispatch,
    Receipt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderPlaced {
    pub order_id: String,
    pub buyer: EntityId,
    pub lines: Vec<OrderLine>,
    pub process: ProcessKind,
    pub trigger: Trigger,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfpIssued {
    pub conv_id: String,
    pub order_id: String,
    pub stage: Stage,
    pub initiator: EntityId,
    pub participants: Vec<EntityId>,
    pub task: Task,
    pub deadline: SimTime,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalSubmitted {
    pub conv_id: String,
    pub order_id: String,
    pub sender: EntityId,
    pub bid: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quote: Option<DeliveryQuote>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalRefused {
    pub conv_id: String,
    pub order_id: String,
    pub sender: EntityId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalAccepted {
    pub conv_id: String,
    pub order_id: String,
    pub stage: Stage,
    pub initiator: EntityId,
    pub winner: EntityId,
    /// Invoice amount agreed with the winner.
    pub amount: f64,
    #[serde(default)]
    pub expired: Vec<EntityId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalRejected {
    pub conv_id: String,
    pub order_id: String,
    pub receiver: EntityId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShipmentDispatched {
    pub shipment_id: String,
    pub order_id: String,
    pub tracking_number: String,
    pub seller: EntityId,
    pub buyer: EntityId,
    pub logistics: EntityId,
    pub carrier: EntityId,
    pub lines: Vec<OrderLine>,
    pub route: Vec<GeoPoint>,
    pub route_km: f64,
    /// Speed actually driven.
    pub speed_kmh: f64,
    /// Promised door-to-door duration.
    pub quoted_eta: SimTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleMoved {
    pub shipment_id: String,
    pub tracking_number: String,
    pub position: GeoPoint,
    pub progress: f64,
    pub status: VehicleStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorReadingEvent {
    pub shipment_id: String,
    pub sensor: SensorKind,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbientAlert {
    pub shipment_id: String,
    pub sensor: SensorKind,
    pub value: f64,
    pub direction: AlertDirection,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShipmentDelivered {
    pub shipment_id: String,
    pub order_id: String,
    pub on_time: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventoryUpdated {
    pub owner: EntityId,
    pub product: String,
    pub delta_g: i64,
    pub on_hand_g: Grams,
    pub reason: InventoryReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_id: Option<String>,
    /// Carried by opening-balance events so the log is self-describing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reorder_point_g: Option<Grams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryAssessed {
    pub shipment_id: String,
    pub order_id: String,
    pub carrier: EntityId,
    pub on_time: bool,
    pub readings: u64,
    pub violations: u64,
    pub violation_fraction: f64,
    pub score: f64,
    pub no_telemetry: bool,
    pub invoices: Vec<Invoice>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub conv_id: String,
    pub performative: Performative,
    pub sender: EntityId,
    pub receiver: EntityId,
    pub body: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessFailed {
    pub order_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conv_id: Option<String>,
    pub stage: String,
    pub reason: String,
    #[serde(default)]
    pub expired: Vec<EntityId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum EventBody {
    OrderPlaced(OrderPlaced),
    CfpIssued(CfpIssued),
    ProposalSubmitted(ProposalSubmitted),
    ProposalRefused(ProposalRefused),
    ProposalAccepted(ProposalAccepted),
    ProposalRejected(ProposalRejected),
    ShipmentDispatched(ShipmentDispatched),
    VehicleMoved(VehicleMoved),
    SensorReading(SensorReadingEvent),
    AmbientAlert(AmbientAlert),
    ShipmentDelivered(ShipmentDelivered),
    InventoryUpdated(InventoryUpdated),
    DeliveryAssessed(DeliveryAssessed),
    ChatMessage(ChatMessage),
    ProcessFailed(ProcessFailed),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    OrderPlaced,
    CfpIssued,
    ProposalSubmitted,
    ProposalRefused,
    ProposalAccepted,
    ProposalRejected,
    ShipmentDispatched,
    VehicleMoved,
    SensorReading,
    AmbientAlert,
    ShipmentDelivered,
    InventoryUpdated,
    DeliveryAssessed,
    ChatMessage,
    ProcessFailed,
}

impl EventBody {
    pub fn kind(&self) -> EventKind {
        match self {
            EventBody::OrderPlaced(_) => EventKind::OrderPlaced,
            EventBody::CfpIssued(_) => EventKind::CfpIssued,
            EventBody::ProposalSubmitted(_) => EventKind::ProposalSubmitted,
            EventBody::ProposalRefused(_) => EventKind::ProposalRefused,
            EventBody::ProposalAccepted(_) => EventKind::ProposalAccepted,
            EventBody::ProposalRejected(_) => EventKind::ProposalRejected,
            EventBody::ShipmentDispatched(_) => EventKind::ShipmentDispatched,
            EventBody::VehicleMoved(_) => EventKind::VehicleMoved,
            EventBody::SensorReading(_) => EventKind::SensorReading,
            EventBody::AmbientAlert(_) => EventKind::AmbientAlert,
            EventBody::ShipmentDelivered(_) => EventKind::ShipmentDelivered,
            EventBody::InventoryUpdated(_) => EventKind::InventoryUpdated,
            EventBody::DeliveryAssessed(_) => EventKind::DeliveryAssessed,
            EventBody::ChatMessage(_) => EventKind::ChatMessage,
            EventBody::ProcessFailed(_) => EventKind::ProcessFailed,
        }
    }

    /// The order this event belongs to, where it belongs to one directly.
    pub fn order_id(&self) -> Option<&str> {
        match self {
            EventBody::OrderPlaced(e) => Some(&e.order_id),
            EventBody::CfpIssued(e) => Some(&e.order_id),
            EventBody::ProposalSubmitted(e) => Some(&e.order_id),
            EventBody::ProposalRefused(e) => Some(&e.order_id),
            EventBody::ProposalAccepted(e) => Some(&e.order_id),
            EventBody::ProposalRejected(e) => Some(&e.order_id),
            EventBody::ShipmentDispatched(e) => Some(&e.order_id),
            EventBody::ShipmentDelivered(e) => Some(&e.order_id),
            EventBody::InventoryUpdated(e) => e.order_id.as_deref(),
            EventBody::DeliveryAssessed(e) => Some(&e.order_id),
            EventBody::ProcessFailed(e) => Some(&e.order_id),
            EventBody::VehicleMoved(_)
            | EventBody::SensorReading(_)
            | EventBody::AmbientAlert(_)
            | EventBody::ChatMessage(_) => None,
        }
    }

    /// Shipment id for telemetry events.
    pub fn shipment_id(&self) -> Option<&str> {
        match self {
            EventBody::ShipmentDispatched(e) => Some(&e.shipment_id),
            EventBody::VehicleMoved(e) => Some(&e.shipment_id),
            EventBody::SensorReading(e) => Some(&e.shipment_id),
            EventBody::AmbientAlert(e) => Some(&e.shipment_id),
            EventBody::ShipmentDelivered(e) => Some(&e.shipment_id),
            EventBody::DeliveryAssessed(e) => Some(&e.shipment_id),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub sim_time: SimTime,
    #[serde(flatten)]
    pub body: EventBody,
}

impl Event {
    pub fn kind(&self) -> EventKind {
        self.body.kind()
    }

    pub fn to_canonical_json(&self) -> String {
        canonical_json(self)
    }
}

/// Serializes with sorted object keys and no insignificant whitespace.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> String {
    // serde_json's Map is a BTreeMap unless `preserve_order` is enabled, so
    // going through Value sorts every object's keys.
    let v = serde_json::to_value(value).expect("domain types always serialize");
    serde_json::to_string(&v).expect("Value always serializes")
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("expected seq {expected}, found {found}")]
    Gap { expected: u64, found: u64 },
    #[error("sim time went backwards at seq {0}")]
    TimeReversal(u64),
}

/// Gapless append-only sequence of events starting at seq 1.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    events: Vec<Event>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_events(events: Vec<Event>) -> Result<Self, LogError> {
        let mut last_time = SimTime::ZERO;
        for (i, e) in events.iter().enumerate() {
            let expected = i as u64 + 1;
            if e.seq != expected {
                return Err(LogError::Gap {
                    expected,
                    found: e.seq,
                });
            }
            if e.sim_time < last_time {
                return Err(LogError::TimeReversal(e.seq));
            }
            last_time = e.sim_time;
        }
        Ok(EventLog { events })
    }

    pub fn append(&mut self, sim_time: SimTime, body: EventBody) -> &Event {
        let seq = self.events.len() as u64 + 1;
        self.events.push(Event {
            seq,
            sim_time,
            body,
        });
        self.events.last().expect("just pushed")
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn last_seq(&self) -> u64 {
        self.events.len() as u64
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Events with seq strictly greater than `seq`.
    pub fn since(&self, seq: u64) -> &[Event] {
        let start = (seq as usize).min(self.events.len());
        &self.events[start..]
    }

    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&e.to_canonical_json());
            out.push('\n');
        }
        out
    }

    pub fn from_ndjson(text: &str) -> Result<Self, LogError> {
        let mut events = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e: Event =
                serde_json::from_str(line).map_err(|source| LogError::Parse { line: i + 1, source })?;
            events.push(e);
        }
        Self::from_events(events)
    }
}
