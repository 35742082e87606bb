//! Domain types for the supply chain network: structural entities and their
//! connections, product catalogs, orders and inventory ledgers.
//!
//! Quantities are carried as integer grams so that conservation checks are
//! exact; kilograms only appear at the edges (scenario files, API requests).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::SimTime;

/// Mass in integer grams.
pub type Grams = u64;

pub const GRAMS_PER_KG: u64 = 1000;

/// Converts a kilogram figure to grams, rounding to the nearest gram.
/// Returns `None` for negative or non-finite input.
pub fn kg_to_grams(kg: f64) -> Option<Grams> {
    if !kg.is_finite() || kg < 0.0 {
        return None;
    }
    Some((kg * GRAMS_PER_KG as f64).round() as Grams)
}

pub fn grams_to_kg(g: Grams) -> f64 {
    g as f64 / GRAMS_PER_KG as f64
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub String);

impl EntityId {
    pub fn new(id: impl Into<String>) -> Self {
        EntityId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        EntityId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Supplier,
    Wholesaler,
    Retailer,
    Logistics,
    ThirdPartyLogistics,
}

impl Role {
    /// Roles that sell products from a catalog.
    pub fn sells(self) -> bool {
        matches!(self, Role::Supplier | Role::Wholesaler)
    }

    /// Roles that hold an inventory ledger.
    pub fn holds_stock(self) -> bool {
        matches!(self, Role::Supplier | Role::Wholesaler | Role::Retailer)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Supplier => "supplier",
            Role::Wholesaler => "wholesaler",
            Role::Retailer => "retailer",
            Role::Logistics => "logistics",
            Role::ThirdPartyLogistics => "third-party-logistics",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        GeoPoint { lat, lon }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductOffer {
    pub product: String,
    /// Currency units per kilogram.
    pub unit_price: f64,
    pub stock_g: Grams,
}

/// Pricing and fleet terms quoted by logistics companies and 3PL providers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarrierTerms {
    pub base_fee: f64,
    pub rate_per_km: f64,
    /// Speed quoted to the customer; the ETA is derived from it.
    pub quoted_speed_kmh: f64,
    /// Multiplier on the quoted speed actually achieved on the road.
    #[serde(default = "one")]
    pub speed_factor: f64,
    /// Largest load accepted; `None` means unlimited.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_load_kg: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl CarrierTerms {
    pub fn quote(&self, route_km: f64) -> f64 {
        self.base_fee + self.rate_per_km * route_km
    }

    pub fn accepts_load(&self, load_g: Grams) -> bool {
        self.max_load_kg
            .is_none_or(|kg| load_g as f64 <= kg * GRAMS_PER_KG as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralEntity {
    pub id: EntityId,
    pub role: Role,
    pub name: String,
    #[serde(default)]
    pub catalog: Vec<ProductOffer>,
    pub location: GeoPoint,
    /// Internal units (departments, warehouses) that internal connections link.
    #[serde(default)]
    pub units: Vec<String>,
    #[serde(default)]
    pub carrier: Option<CarrierTerms>,
}

impl StructuralEntity {
    pub fn offer(&self, product: &str) -> Option<&ProductOffer> {
        self.catalog.iter().find(|o| o.product == product)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConnectionKind {
    TightExternal,
    LooseExternal,
    Internal,
}

impl ConnectionKind {
    pub fn is_external(self) -> bool {
        !matches!(self, ConnectionKind::Internal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Lifecycle {
    AdHoc,
    Temporary,
    Established,
}

/// Typed edge of the network. External connections link entity ids; internal
/// connections link `"<entity>/<unit>"` endpoints inside one entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Connection {
    pub from: String,
    pub to: String,
    pub kind: ConnectionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lifecycle: Option<Lifecycle>,
}

impl Connection {
    pub fn external(from: &str, to: &str, kind: ConnectionKind, lifecycle: Lifecycle) -> Self {
        Connection {
            from: from.to_string(),
            to: to.to_string(),
            kind,
            lifecycle: Some(lifecycle),
        }
    }

    pub fn touches(&self, id: &str) -> bool {
        self.from == id || self.to == id
    }

    pub fn other_end(&self, id: &str) -> Option<&str> {
        if self.from == id {
            Some(&self.to)
        } else if self.to == id {
            Some(&self.from)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("duplicate entity id {0}")]
    DuplicateEntityId(String),
    #[error("connection references unknown endpoint {0}")]
    DanglingConnection(String),
    #[error("no reachable {role} ({context})")]
    MissingRole { role: Role, context: String },
    #[error("expected exactly one wholesaler, found {0}")]
    WholesalerCount(usize),
    #[error("invalid entity {id}: {reason}")]
    InvalidEntity { id: String, reason: String },
    #[error("invalid connection {from} -> {to}: {reason}")]
    InvalidConnection {
        from: String,
        to: String,
        reason: String,
    },
}

/// A network that passed [`validate_network`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Network {
    entities: BTreeMap<EntityId, StructuralEntity>,
    connections: Vec<Connection>,
}

impl Network {
    pub fn entity(&self, id: &EntityId) -> Option<&StructuralEntity> {
        self.entities.get(id)
    }

    pub fn entity_str(&self, id: &str) -> Option<&StructuralEntity> {
        self.entities.get(&EntityId::new(id))
    }

    pub fn entities(&self) -> impl Iterator<Item = &StructuralEntity> {
        self.entities.values()
    }

    pub fn connections(&self) -> &[Connection] {
        &self.connections
    }

    pub fn with_role(&self, role: Role) -> Vec<&StructuralEntity> {
        self.entities.values().filter(|e| e.role == role).collect()
    }

    pub fn wholesaler(&self) -> Option<&StructuralEntity> {
        self.entities.values().find(|e| e.role == Role::Wholesaler)
    }

    /// Entities of `role` joined to `id` by an external connection, in id order.
    pub fn connected(&self, id: &EntityId, role: Role) -> Vec<EntityId> {
        let set: BTreeSet<EntityId> = self
            .connections
            .iter()
            .filter(|c| c.kind.is_external())
            .filter_map(|c| c.other_end(id.as_str()))
            .map(EntityId::new)
            .filter(|other| self.entities.get(other).is_some_and(|e| e.role == role))
            .collect();
        set.into_iter().collect()
    }

    /// Builds a network without checking invariants. Intended for tests that
    /// need deliberately incomplete networks.
    pub fn unchecked(entities: Vec<StructuralEntity>, connections: Vec<Connection>) -> Self {
        Network {
            entities: entities.into_iter().map(|e| (e.id.clone(), e)).collect(),
            connections,
        }
    }
}

fn check_entity(e: &StructuralEntity) -> Result<(), NetworkError> {
    let invalid = |reason: &str| NetworkError::InvalidEntity {
        id: e.id.0.clone(),
        reason: reason.to_string(),
    };
    if e.id.0.is_empty() {
        return Err(invalid("empty id"));
    }
    if e.id.0.contains('/') {
        return Err(invalid("'/' is reserved for internal unit endpoints"));
    }
    if e.role.sells() != !e.catalog.is_empty() {
        return Err(invalid("catalog must be present exactly for selling roles"));
    }
    let mut seen = BTreeSet::new();
    for offer in &e.catalog {
        if !seen.insert(offer.product.as_str()) {
            return Err(invalid("duplicate catalog product"));
        }
        if !(offer.unit_price > 0.0 && offer.unit_price.is_finite()) {
            return Err(invalid("unit_price must be positive"));
        }
    }
    if !(e.location.lat.is_finite() && e.location.lon.is_finite())
        || e.location.lat.abs() > 90.0
        || e.location.lon.abs() > 180.0
    {
        return Err(invalid("location out of range"));
    }
    if matches!(e.role, Role::Logistics | Role::ThirdPartyLogistics) {
        match &e.carrier {
            None => return Err(invalid("carrier terms required for logistics roles")),
            Some(t) if !(t.quoted_speed_kmh > 0.0 && t.speed_factor > 0.0) => {
                return Err(invalid("carrier speeds must be positive"))
            }
            Some(t) if t.base_fee < 0.0 || t.rate_per_km < 0.0 => {
                return Err(invalid("carrier prices must be non-negative"))
            }
            _ => {}
        }
    }
    Ok(())
}

fn check_connection(
    c: &Connection,
    entities: &BTreeMap<EntityId, StructuralEntity>,
) -> Result<(), NetworkError> {
    let invalid = |reason: &str| NetworkError::InvalidConnection {
        from: c.from.clone(),
        to: c.to.clone(),
        reason: reason.to_string(),
    };
    if c.kind.is_external() {
        for end in [&c.from, &c.to] {
            if !entities.contains_key(&EntityId::new(end.as_str())) {
                return Err(NetworkError::DanglingConnection(end.clone()));
            }
        }
        if c.from == c.to {
            return Err(invalid("external connection must join distinct entities"));
        }
        return Ok(());
    }
    if c.lifecycle.is_some() {
        return Err(invalid("lifecycle applies to external connections only"));
    }
    let mut owners = Vec::with_capacity(2);
    for end in [&c.from, &c.to] {
        let (owner, unit) = end
            .split_once('/')
            .ok_or_else(|| invalid("internal endpoints must be <entity>/<unit>"))?;
        let entity = entities
            .get(&EntityId::new(owner))
            .ok_or_else(|| NetworkError::DanglingConnection(end.clone()))?;
        if !entity.units.iter().any(|u| u == unit) {
            return Err(NetworkError::DanglingConnection(end.clone()));
        }
        owners.push(owner);
    }
    if owners[0] != owners[1] {
        return Err(invalid("internal connection must stay inside one entity"));
    }
    if c.from == c.to {
        return Err(invalid("internal connection must join distinct units"));
    }
    Ok(())
}

/// Checks entity and connection invariants and that every role the
/// replenishment and wholesale processes need is reachable.
pub fn validate_network(
    entities: Vec<StructuralEntity>,
    connections: Vec<Connection>,
) -> Result<Network, NetworkError> {
    let mut map = BTreeMap::new();
    for e in entities {
        check_entity(&e)?;
        if map.contains_key(&e.id) {
            return Err(NetworkError::DuplicateEntityId(e.id.0));
        }
        map.insert(e.id.clone(), e);
    }
    for c in &connections {
        check_connection(c, &map)?;
    }
    let net = Network {
        entities: map,
        connections,
    };

    let wholesalers = net.with_role(Role::Wholesaler);
    if wholesalers.is_empty() {
        return Err(NetworkError::MissingRole {
            role: Role::Wholesaler,
            context: "network".into(),
        });
    }
    if wholesalers.len() > 1 {
        return Err(NetworkError::WholesalerCount(wholesalers.len()));
    }
    let wholesaler = wholesalers[0].id.clone();
    if net.with_role(Role::Supplier).is_empty() {
        return Err(NetworkError::MissingRole {
            role: Role::Supplier,
            context: "network".into(),
        });
    }
    if net.connected(&wholesaler, Role::Supplier).is_empty() {
        return Err(NetworkError::MissingRole {
            role: Role::Supplier,
            context: format!("connected to {wholesaler}"),
        });
    }
    // Every seller must be able to hand a shipment to a logistics company that
    // can subcontract at least one 3PL.
    let mut sellers = net.connected(&wholesaler, Role::Supplier);
    sellers.push(wholesaler.clone());
    for seller in &sellers {
        if seller == &wholesaler && net.connected(&wholesaler, Role::Retailer).is_empty() {
            continue;
        }
        let logistics = net.connected(seller, Role::Logistics);
        if logistics.is_empty() {
            return Err(NetworkError::MissingRole {
                role: Role::Logistics,
                context: format!("connected to {seller}"),
            });
        }
        if logistics
            .iter()
            .all(|l| net.connected(l, Role::ThirdPartyLogistics).is_empty())
        {
            return Err(NetworkError::MissingRole {
                role: Role::ThirdPartyLogistics,
                context: format!("behind the logistics companies of {seller}"),
            });
        }
    }
    Ok(net)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderStatus {
    Draft,
    Negotiating,
    Awarded,
    InTransit,
    Delivered,
    Failed,
}

impl OrderStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, OrderStatus::Delivered | OrderStatus::Failed)
    }

    /// The one forward step, or a failure from an in-flight state.
    pub fn can_transition_to(self, next: OrderStatus) -> bool {
        use OrderStatus::*;
        matches!(
            (self, next),
            (Draft, Negotiating)
                | (Negotiating, Awarded)
                | (Awarded, InTransit)
                | (InTransit, Delivered)
                | (Negotiating, Failed)
                | (Awarded, Failed)
                | (InTransit, Failed)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProcessKind {
    Replenishment,
    Wholesale,
}

impl ProcessKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProcessKind::Replenishment => "replenishment",
            ProcessKind::Wholesale => "wholesale",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderLine {
    pub product: String,
    pub quantity_g: Grams,
}

impl OrderLine {
    pub fn kg(product: &str, kg: u64) -> Self {
        OrderLine {
            product: product.to_string(),
            quantity_g: kg * GRAMS_PER_KG,
        }
    }
}

pub fn total_grams(lines: &[OrderLine]) -> Grams {
    lines.iter().map(|l| l.quantity_g).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Order {
    pub order_id: String,
    pub buyer: EntityId,
    pub seller: Option<EntityId>,
    pub lines: Vec<OrderLine>,
    pub status: OrderStatus,
    pub created_at: SimTime,
    pub process: ProcessKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("insufficient stock of {product} at {owner}: on hand {on_hand_g} g, delta {delta_g} g")]
    InsufficientStock {
        owner: EntityId,
        product: String,
        on_hand_g: Grams,
        delta_g: i64,
    },
    #[error("unknown product {0}")]
    UnknownProduct(String),
    #[error("order {order_id}: illegal transition {from:?} -> {to:?}")]
    IllegalTransition {
        order_id: String,
        from: OrderStatus,
        to: OrderStatus,
    },
    #[error("order line quantities must be positive")]
    EmptyLine,
}

impl Order {
    pub fn new(
        order_id: String,
        buyer: EntityId,
        lines: Vec<OrderLine>,
        process: ProcessKind,
        created_at: SimTime,
    ) -> Result<Self, ModelError> {
        if lines.is_empty() || lines.iter().any(|l| l.quantity_g == 0) {
            return Err(ModelError::EmptyLine);
        }
        Ok(Order {
            order_id,
            buyer,
            seller: None,
            lines,
            status: OrderStatus::Draft,
            created_at,
            process,
        })
    }

    pub fn transition(&mut self, next: OrderStatus) -> Result<(), ModelError> {
        if !self.status.can_transition_to(next) {
            return Err(ModelError::IllegalTransition {
                order_id: self.order_id.clone(),
                from: self.status,
                to: next,
            });
        }
        self.status = next;
        Ok(())
    }
}

/// Record of one applied inventory change; becomes an `InventoryUpdated` payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InventoryChange {
    pub owner: EntityId,
    pub product: String,
    pub delta_g: i64,
    pub on_hand_g: Grams,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InventoryLedger {
    pub owner: EntityId,
    pub balances: BTreeMap<String, Grams>,
    pub reorder_points: BTreeMap<String, Grams>,
}

impl InventoryLedger {
    pub fn new(owner: EntityId) -> Self {
        InventoryLedger {
            owner,
            balances: BTreeMap::new(),
            reorder_points: BTreeMap::new(),
        }
    }

    pub fn on_hand(&self, product: &str) -> Grams {
        self.balances.get(product).copied().unwrap_or(0)
    }

    pub fn total(&self) -> Grams {
        self.balances.values().sum()
    }

    /// Returns the updated ledger and the change record. On error the
    /// original ledger is untouched.
    pub fn apply_inventory_delta(
        &self,
        product: &str,
        delta_g: i64,
    ) -> Result<(InventoryLedger, InventoryChange), ModelError> {
        let on_hand = *self
            .balances
            .get(product)
            .ok_or_else(|| ModelError::UnknownProduct(product.to_string()))?;
        let next = on_hand as i128 + delta_g as i128;
        if next < 0 {
            return Err(ModelError::InsufficientStock {
                owner: self.owner.clone(),
                product: product.to_string(),
                on_hand_g: on_hand,
                delta_g,
            });
        }
        let next = next as Grams;
        let mut ledger = self.clone();
        ledger.balances.insert(product.to_string(), next);
        Ok((
            ledger,
            InventoryChange {
                owner: self.owner.clone(),
                product: product.to_string(),
                delta_g,
                on_hand_g: next,
            },
        ))
    }

    /// Products strictly below their reorder point, in lexicographic order.
    pub fn reorder_check(&self) -> Vec<String> {
        self.reorder_points
            .iter()
            .filter(|(product, point)| self.on_hand(product) < **point)
            .map(|(product, _)| product.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ledger(entries: &[(&str, u64, u64)]) -> InventoryLedger {
        let mut l = InventoryLedger::new("CMC".into());
        for (p, on_hand, point) in entries {
            l.balances.insert(p.to_string(), on_hand * GRAMS_PER_KG);
            l.reorder_points.insert(p.to_string(), point * GRAMS_PER_KG);
        }
        l
    }

    #[test]
    fn delta_addition_and_boundary() {
        let l = ledger(&[("beef", 100, 0)]);
        let (up, change) = l.apply_inventory_delta("beef", 50_000).unwrap();
        assert_eq!(up.on_hand("beef"), 150_000);
        assert_eq!(change.on_hand_g, 150_000);
        assert_eq!(change.delta_g, 50_000);

        let (zero, _) = l.apply_inventory_delta("beef", -100_000).unwrap();
        assert_eq!(zero.on_hand("beef"), 0);
    }

    #[test]
    fn delta_refuses_negative_balance() {
        let l = ledger(&[("beef", 50, 0)]);
        let err = l.apply_inventory_delta("beef", -60_000).unwrap_err();
        assert!(matches!(err, ModelError::InsufficientStock { .. }));
        assert_eq!(l.on_hand("beef"), 50_000);
        assert_eq!(
            l.apply_inventory_delta("pork", 1).unwrap_err(),
            ModelError::UnknownProduct("pork".into())
        );
    }

    // Oracle: compare each product with strict < and sort the names.
    fn reorder_oracle(entries: &[(&str, u64, u64)]) -> Vec<String> {
        let mut out: Vec<String> = entries
            .iter()
            .filter(|(_, on_hand, point)| on_hand < point)
            .map(|(p, _, _)| p.to_string())
            .collect();
        out.sort();
        out
    }

    #[test]
    fn reorder_check_examples() {
        let mixed = [("chicken", 30, 40), ("beef", 50, 40), ("lamb", 40, 40)];
        assert_eq!(reorder_oracle(&mixed), vec!["chicken"]);
        assert_eq!(ledger(&mixed).reorder_check(), vec!["chicken"]);

        let full = [("chicken", 40, 40), ("beef", 41, 40)];
        assert!(ledger(&full).reorder_check().is_empty());

        let empty = [("chicken", 0, 40), ("beef", 0, 40), ("lamb", 0, 40)];
        assert_eq!(reorder_oracle(&empty), vec!["beef", "chicken", "lamb"]);
        assert_eq!(ledger(&empty).reorder_check(), reorder_oracle(&empty));
    }

    #[test]
    fn order_status_machine() {
        use OrderStatus::*;
        let mut o = Order::new(
            "ORD-1".into(),
            "CMC".into(),
            vec![OrderLine::kg("beef", 5)],
            ProcessKind::Replenishment,
            SimTime::ZERO,
        )
        .unwrap();
        assert!(o.transition(Awarded).is_err());
        assert!(o.transition(Failed).is_err());
        for s in [Negotiating, Awarded, InTransit, Delivered] {
            o.transition(s).unwrap();
        }
        assert!(o.transition(Failed).is_err());
        assert!(Order::new(
            "x".into(),
            "CMC".into(),
            vec![OrderLine::kg("beef", 0)],
            ProcessKind::Wholesale,
            SimTime::ZERO
        )
        .is_err());
    }

    fn entity(id: &str, role: Role) -> StructuralEntity {
        let catalog = if role.sells() {
            vec![ProductOffer {
                product: "beef".into(),
                unit_price: 4.5,
                stock_g: 100_000,
            }]
        } else {
            vec![]
        };
        let carrier = matches!(role, Role::Logistics | Role::ThirdPartyLogistics).then(|| {
            CarrierTerms {
                base_fee: 10.0,
                rate_per_km: 1.0,
                quoted_speed_kmh: 50.0,
                speed_factor: 1.0,
                max_load_kg: None,
            }
        });
        StructuralEntity {
            id: id.into(),
            role,
            name: id.to_string(),
            catalog,
            location: GeoPoint::new(-33.8, 151.2),
            units: vec![],
            carrier,
        }
    }

    fn loose(a: &str, b: &str) -> Connection {
        Connection::external(a, b, ConnectionKind::LooseExternal, Lifecycle::Established)
    }

    fn case_study() -> (Vec<StructuralEntity>, Vec<Connection>) {
        let entities = vec![
            entity("CMC", Role::Wholesaler),
            entity("S1", Role::Supplier),
            entity("S2", Role::Supplier),
            entity("S3", Role::Supplier),
            entity("R1", Role::Retailer),
            entity("R2", Role::Retailer),
            entity("L1", Role::Logistics),
            entity("T1", Role::ThirdPartyLogistics),
            entity("T2", Role::ThirdPartyLogistics),
        ];
        let connections = vec![
            loose("CMC", "S1"),
            loose("CMC", "S2"),
            loose("CMC", "S3"),
            loose("CMC", "R1"),
            loose("CMC", "R2"),
            loose("S1", "L1"),
            loose("S2", "L1"),
            loose("S3", "L1"),
            loose("CMC", "L1"),
            loose("L1", "T1"),
            loose("L1", "T2"),
        ];
        (entities, connections)
    }

    #[test]
    fn case_study_network_is_valid() {
        let (e, c) = case_study();
        let net = validate_network(e, c).unwrap();
        assert_eq!(
            net.connected(&"CMC".into(), Role::Supplier),
            vec![EntityId::from("S1"), "S2".into(), "S3".into()]
        );
        assert_eq!(net.wholesaler().unwrap().id.as_str(), "CMC");
    }

    #[test]
    fn dangling_and_duplicate_and_missing() {
        let (e, mut c) = case_study();
        c.push(loose("CMC", "S9"));
        assert_eq!(
            validate_network(e, c).unwrap_err(),
            NetworkError::DanglingConnection("S9".into())
        );

        let (mut e, c) = case_study();
        e.push(entity("S1", Role::Supplier));
        assert_eq!(
            validate_network(e, c).unwrap_err(),
            NetworkError::DuplicateEntityId("S1".into())
        );

        let (e, c) = case_study();
        let e: Vec<_> = e.into_iter().filter(|x| x.role != Role::Supplier).collect();
        let c: Vec<_> = c.into_iter().filter(|x| !x.touches("S1") && !x.touches("S2") && !x.touches("S3")).collect();
        assert!(matches!(
            validate_network(e, c).unwrap_err(),
            NetworkError::MissingRole { role: Role::Supplier, .. }
        ));

        let (e, c) = case_study();
        let e: Vec<_> = e
            .into_iter()
            .filter(|x| x.role != Role::ThirdPartyLogistics)
            .collect();
        let c: Vec<_> = c.into_iter().filter(|x| !x.touches("T1") && !x.touches("T2")).collect();
        assert!(matches!(
            validate_network(e, c).unwrap_err(),
            NetworkError::MissingRole { role: Role::ThirdPartyLogistics, .. }
        ));
    }

    #[test]
    fn connection_invariants() {
        let (e, mut c) = case_study();
        c.push(loose("S1", "S1"));
        assert!(matches!(
            validate_network(e, c).unwrap_err(),
            NetworkError::InvalidConnection { .. }
        ));

        let (mut e, mut c) = case_study();
        e[0].units = vec!["procurement".into(), "warehouse".into()];
        e[1].units = vec!["sales".into()];
        c.push(Connection {
            from: "CMC/procurement".into(),
            to: "CMC/warehouse".into(),
            kind: ConnectionKind::Internal,
            lifecycle: None,
        });
        validate_network(e.clone(), c.clone()).unwrap();

        let mut across = c.clone();
        across.push(Connection {
            from: "CMC/procurement".into(),
            to: "S1/sales".into(),
            kind: ConnectionKind::Internal,
            lifecycle: None,
        });
        assert!(validate_network(e.clone(), across).is_err());

        let mut with_lifecycle = c;
        with_lifecycle.push(Connection {
            from: "CMC/warehouse".into(),
            to: "CMC/procurement".into(),
            kind: ConnectionKind::Internal,
            lifecycle: Some(Lifecycle::AdHoc),
        });
        assert!(validate_network(e, with_lifecycle).is_err());
    }

    #[test]
    fn catalog_iff_selling_role() {
        let (mut e, c) = case_study();
        e[4].catalog = e[0].catalog.clone(); // retailer with catalog
        assert!(matches!(
            validate_network(e, c).unwrap_err(),
            NetworkError::InvalidEntity { .. }
        ));
        let (mut e, c) = case_study();
        e[0].catalog[0].unit_price = 0.0;
        assert!(validate_network(e, c).is_err());
    }

    #[test]
    fn second_wholesaler_rejected() {
        let (mut e, c) = case_study();
        e.push(entity("CMC2", Role::Wholesaler));
        assert_eq!(
            validate_network(e, c).unwrap_err(),
            NetworkError::WholesalerCount(2)
        );
    }

    #[test]
    fn kg_conversion() {
        assert_eq!(kg_to_grams(50.0), Some(50_000));
        assert_eq!(kg_to_grams(0.0015), Some(2));
        assert_eq!(kg_to_grams(-1.0), None);
        assert_eq!(kg_to_grams(f64::NAN), None);
        assert_eq!(grams_to_kg(1500), 1.5);
    }
}
