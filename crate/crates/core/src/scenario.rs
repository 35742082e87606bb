//! Scenario documents: parsing, defaults and validation.
//!
//! A scenario file is JSON. Quantities are written in kilograms and converted
//! to grams here; everything downstream works in grams.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::AssessmentWeights;
use crate::event::SimTime;
use crate::model::{
    kg_to_grams, validate_network, CarrierTerms, Connection, EntityId, GeoPoint, Grams, Network,
    OrderLine, ProcessKind, ProductOffer, Role, StructuralEntity,
};
use crate::sim::route::{haversine_km, Route};
use crate::sim::sensor::{SensorKind, SensorProfile};

pub const DEFAULT_SCENARIO_JSON: &str = include_str!("../scenarios/default.json");

pub const DEFAULT_PRODUCTS: [&str; 3] = ["chicken", "beef", "lamb"];
pub const DEFAULT_ORDER_KG: f64 = 50.0;
pub const DEFAULT_TIME_SCALE: f64 = 60.0;

/// The five automated functions of a replenishment or wholesale run.
pub const FUNCTIONS: [&str; 5] = [
    "supplier-selection",
    "inventory-updating",
    "logistics-arrangement",
    "transportation-monitoring",
    "delivery-assessment",
];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{path}: {message}")]
    Validation { path: String, message: String },
}

impl ScenarioError {
    pub fn path(&self) -> Option<&str> {
        match self {
            ScenarioError::Validation { path, .. } => Some(path),
            ScenarioError::Parse(_) => None,
        }
    }
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        path: path.into(),
        message: message.into(),
    }
}

// ---- document shape -------------------------------------------------------

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    products: Option<Vec<String>>,
    #[serde(default)]
    default_order_kg: Option<f64>,
    #[serde(default)]
    entities: Option<Vec<EntityDoc>>,
    #[serde(default)]
    connections: Vec<Connection>,
    #[serde(default)]
    routes: Vec<RouteSpec>,
    #[serde(default)]
    sensor_profiles: Option<Vec<SensorProfileDoc>>,
    #[serde(default)]
    reorder: Option<ReorderDoc>,
    #[serde(default)]
    assessment_weights: Option<AssessmentWeights>,
    #[serde(default)]
    time_scale: Option<f64>,
    #[serde(default)]
    negotiation: Option<NegotiationDoc>,
    #[serde(default)]
    telemetry_period_s: Option<f64>,
    #[serde(default)]
    processes: BTreeMap<ProcessKind, ProcessDoc>,
    #[serde(default)]
    functions: Option<Vec<FunctionDecl>>,
    #[serde(default)]
    script: Vec<ScriptDoc>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntityDoc {
    id: EntityId,
    role: Role,
    #[serde(default)]
    name: Option<String>,
    location: GeoPoint,
    #[serde(default)]
    catalog: Vec<OfferDoc>,
    #[serde(default)]
    initial_stock_kg: BTreeMap<String, f64>,
    #[serde(default)]
    units: Vec<String>,
    #[serde(default)]
    carrier: Option<CarrierTerms>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct OfferDoc {
    product: String,
    unit_price: f64,
    stock_kg: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SensorProfileDoc {
    kind: SensorKind,
    target: f64,
    reversion: f64,
    noise: f64,
    safe_range: (f64, f64),
    #[serde(default)]
    sample_period_s: Option<f64>,
    #[serde(default)]
    initial: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReorderDoc {
    #[serde(default = "yes")]
    enabled: bool,
    #[serde(default)]
    owner: Option<EntityId>,
    points_kg: BTreeMap<String, f64>,
    #[serde(default)]
    order_kg: Option<f64>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct NegotiationDoc {
    #[serde(default)]
    cfp_window_s: Option<f64>,
    #[serde(default)]
    response_delay_s: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProcessDoc {
    #[serde(default)]
    automated: Option<bool>,
    #[serde(default)]
    major: Option<bool>,
    #[serde(default)]
    sellers: Option<Vec<EntityId>>,
    #[serde(default)]
    carriers: Option<Vec<EntityId>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptDoc {
    at_s: f64,
    buyer: EntityId,
    #[serde(default)]
    lines: Option<Vec<LineDoc>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineDoc {
    pub product: String,
    pub quantity_kg: f64,
}

// ---- validated scenario ---------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteSpec {
    pub from: EntityId,
    pub to: EntityId,
    pub waypoints: Vec<GeoPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReorderPolicy {
    pub enabled: bool,
    pub owner: EntityId,
    pub points: BTreeMap<String, Grams>,
    pub order_g: Grams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NegotiationConfig {
    pub cfp_window: SimTime,
    pub response_delay: SimTime,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProcessConfig {
    pub automated: bool,
    pub major: bool,
    pub sellers: Option<Vec<EntityId>>,
    pub carriers: Option<Vec<EntityId>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionDecl {
    pub name: String,
    pub automated: bool,
    #[serde(default)]
    pub self_deciding: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScriptedOrder {
    pub at: SimTime,
    pub buyer: EntityId,
    pub lines: Vec<OrderLine>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub products: Vec<String>,
    pub default_order_g: Grams,
    pub network: Network,
    pub initial_stock: BTreeMap<EntityId, BTreeMap<String, Grams>>,
    pub routes: Vec<RouteSpec>,
    pub sensor_profiles: Vec<SensorProfile>,
    pub reorder: Option<ReorderPolicy>,
    pub weights: AssessmentWeights,
    pub time_scale: f64,
    pub negotiation: NegotiationConfig,
    pub telemetry_period: SimTime,
    pub processes: BTreeMap<ProcessKind, ProcessConfig>,
    pub functions: Vec<FunctionDecl>,
    pub script: Vec<ScriptedOrder>,
}

/// Values that take precedence over the scenario file (flags, environment).
#[derive(Debug, Clone, Copy, Default)]
pub struct ScenarioOverrides {
    pub seed: Option<u64>,
    pub time_scale: Option<f64>,
}

pub fn load_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    load_scenario_with(text, ScenarioOverrides::default())
}

pub fn load_scenario_with(
    text: &str,
    overrides: ScenarioOverrides,
) -> Result<Scenario, ScenarioError> {
    let doc: ScenarioDoc = serde_json::from_str(text)?;
    build(doc, overrides)
}

impl Scenario {
    /// The shipped case-study scenario.
    pub fn default_case_study() -> Scenario {
        load_scenario(DEFAULT_SCENARIO_JSON).expect("bundled scenario is valid")
    }

    pub fn entity(&self, id: &EntityId) -> Option<&StructuralEntity> {
        self.network.entity(id)
    }

    pub fn wholesaler(&self) -> &StructuralEntity {
        self.network.wholesaler().expect("validated network has a wholesaler")
    }

    pub fn process(&self, kind: ProcessKind) -> &ProcessConfig {
        &self.processes[&kind]
    }

    /// Declared route between two entities (either direction), otherwise a
    /// straight line between their locations.
    pub fn route_between(&self, from: &EntityId, to: &EntityId) -> Vec<GeoPoint> {
        if let Some(r) = self.routes.iter().find(|r| &r.from == from && &r.to == to) {
            return r.waypoints.clone();
        }
        if let Some(r) = self.routes.iter().find(|r| &r.from == to && &r.to == from) {
            let mut w = r.waypoints.clone();
            w.reverse();
            return w;
        }
        let a = self.entity(from).map(|e| e.location);
        let b = self.entity(to).map(|e| e.location);
        a.into_iter().chain(b).collect()
    }

    pub fn route_km(&self, from: &EntityId, to: &EntityId) -> f64 {
        self.route_between(from, to)
            .windows(2)
            .map(|w| haversine_km(w[0], w[1]))
            .sum()
    }

    /// Order lines for `quantity_kg` of every product.
    pub fn default_lines(&self) -> Vec<OrderLine> {
        self.products
            .iter()
            .map(|p| OrderLine {
                product: p.clone(),
                quantity_g: self.default_order_g,
            })
            .collect()
    }

    /// Checks order lines from an external request against the product list.
    pub fn parse_lines(&self, lines: &[LineDoc], path: &str) -> Result<Vec<OrderLine>, ScenarioError> {
        if lines.is_empty() {
            return Err(invalid(path, "at least one line required"));
        }
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(lines.len());
        for (i, l) in lines.iter().enumerate() {
            let p = format!("{path}[{i}]");
            if !self.products.contains(&l.product) {
                return Err(invalid(format!("{p}.product"), format!("unknown product {:?}", l.product)));
            }
            if !seen.insert(l.product.as_str()) {
                return Err(invalid(format!("{p}.product"), "product listed twice"));
            }
            let g = kg_to_grams(l.quantity_kg)
                .filter(|g| *g > 0)
                .ok_or_else(|| invalid(format!("{p}.quantity_kg"), "quantity must be positive"))?;
            out.push(OrderLine {
                product: l.product.clone(),
                quantity_g: g,
            });
        }
        Ok(out)
    }
}

fn secs(path: &str, s: f64) -> Result<SimTime, ScenarioError> {
    if !(s.is_finite() && s >= 0.0) {
        return Err(invalid(path, "must be a non-negative number of seconds"));
    }
    Ok(SimTime::from_secs_f64(s))
}

fn positive_secs(path: &str, s: f64) -> Result<SimTime, ScenarioError> {
    let t = secs(path, s)?;
    if t == SimTime::ZERO {
        return Err(invalid(path, "must be positive"));
    }
    Ok(t)
}

fn grams(path: &str, kg: f64) -> Result<Grams, ScenarioError> {
    kg_to_grams(kg).ok_or_else(|| invalid(path, "must be a non-negative quantity"))
}

fn default_sensor_profiles() -> Vec<SensorProfile> {
    let period = SimTime::from_secs(5);
    vec![
        SensorProfile {
            kind: SensorKind::Temperature,
            target: 2.0,
            reversion: 0.3,
            noise: 0.5,
            safe_range: (0.0, 4.0),
            sample_period: period,
            initial: 2.0,
        },
        SensorProfile {
            kind: SensorKind::Humidity,
            target: 88.0,
            reversion: 0.2,
            noise: 2.0,
            safe_range: (80.0, 95.0),
            sample_period: period,
            initial: 88.0,
        },
        SensorProfile {
            kind: SensorKind::Illumination,
            target: 8.0,
            reversion: 0.5,
            noise: 3.0,
            safe_range: (0.0, 20.0),
            sample_period: period,
            initial: 8.0,
        },
    ]
}

fn build(doc: ScenarioDoc, ov: ScenarioOverrides) -> Result<Scenario, ScenarioError> {
    let seed = ov
        .seed
        .or(doc.seed)
        .ok_or_else(|| invalid("seed", "a seed is required"))?;

    let products = doc
        .products
        .unwrap_or_else(|| DEFAULT_PRODUCTS.iter().map(|p| p.to_string()).collect());
    if products.is_empty() {
        return Err(invalid("products", "at least one product required"));
    }
    let mut seen = BTreeSet::new();
    for (i, p) in products.iter().enumerate() {
        if p.is_empty() || !seen.insert(p.as_str()) {
            return Err(invalid(format!("products[{i}]"), "empty or duplicate product"));
        }
    }
    let default_order_g = grams("default_order_kg", doc.default_order_kg.unwrap_or(DEFAULT_ORDER_KG))?;
    if default_order_g == 0 {
        return Err(invalid("default_order_kg", "must be positive"));
    }

    let entity_docs = doc.entities.ok_or_else(|| invalid("entities", "section is required"))?;
    let mut entities = Vec::with_capacity(entity_docs.len());
    let mut initial_stock = BTreeMap::new();
    for (i, e) in entity_docs.into_iter().enumerate() {
        let path = format!("entities[{i}]");
        let mut catalog = Vec::with_capacity(e.catalog.len());
        let mut stock: BTreeMap<String, Grams> = BTreeMap::new();
        for (j, o) in e.catalog.iter().enumerate() {
            let p = format!("{path}.catalog[{j}]");
            if !products.contains(&o.product) {
                return Err(invalid(format!("{p}.product"), format!("unknown product {:?}", o.product)));
            }
            let g = grams(&format!("{p}.stock_kg"), o.stock_kg)?;
            catalog.push(ProductOffer {
                product: o.product.clone(),
                unit_price: o.unit_price,
                stock_g: g,
            });
            stock.insert(o.product.clone(), g);
        }
        for (product, kg) in &e.initial_stock_kg {
            if !products.contains(product) {
                return Err(invalid(
                    format!("{path}.initial_stock_kg.{product}"),
                    "unknown product",
                ));
            }
            if stock.contains_key(product) {
                return Err(invalid(
                    format!("{path}.initial_stock_kg.{product}"),
                    "already given by the catalog",
                ));
            }
            stock.insert(product.clone(), grams(&format!("{path}.initial_stock_kg.{product}"), *kg)?);
        }
        if e.role.holds_stock() {
            for p in &products {
                stock.entry(p.clone()).or_insert(0);
            }
            initial_stock.insert(e.id.clone(), stock);
        } else if !stock.is_empty() {
            return Err(invalid(path, format!("a {} holds no stock", e.role)));
        }
        entities.push(StructuralEntity {
            name: e.name.unwrap_or_else(|| e.id.0.clone()),
            id: e.id,
            role: e.role,
            catalog,
            location: e.location,
            units: e.units,
            carrier: e.carrier,
        });
    }
    let network = validate_network(entities, doc.connections)
        .map_err(|err| invalid("entities", err.to_string()))?;

    for (i, r) in doc.routes.iter().enumerate() {
        let path = format!("routes[{i}]");
        let from = network
            .entity(&r.from)
            .ok_or_else(|| invalid(format!("{path}.from"), "unknown entity"))?;
        let to = network
            .entity(&r.to)
            .ok_or_else(|| invalid(format!("{path}.to"), "unknown entity"))?;
        Route::new(r.waypoints.clone(), 1.0).map_err(|e| invalid(format!("{path}.waypoints"), e.to_string()))?;
        let near = |a: GeoPoint, b: GeoPoint| (a.lat - b.lat).abs() < 1e-9 && (a.lon - b.lon).abs() < 1e-9;
        if !near(r.waypoints[0], from.location) || !near(*r.waypoints.last().expect("≥2"), to.location) {
            return Err(invalid(
                format!("{path}.waypoints"),
                "route must start and end at the endpoint locations",
            ));
        }
    }

    let sensor_profiles = match doc.sensor_profiles {
        None => default_sensor_profiles(),
        Some(docs) => {
            let mut out = Vec::with_capacity(docs.len());
            let mut kinds = BTreeSet::new();
            for (i, s) in docs.into_iter().enumerate() {
                let path = format!("sensor_profiles[{i}]");
                if !kinds.insert(s.kind) {
                    return Err(invalid(format!("{path}.kind"), "duplicate sensor kind"));
                }
                let profile = SensorProfile {
                    kind: s.kind,
                    target: s.target,
                    reversion: s.reversion,
                    noise: s.noise,
                    safe_range: s.safe_range,
                    sample_period: positive_secs(
                        &format!("{path}.sample_period_s"),
                        s.sample_period_s.unwrap_or(5.0),
                    )?,
                    initial: s.initial.unwrap_or(s.target),
                };
                profile.validate().map_err(|e| invalid(path, e.to_string()))?;
                out.push(profile);
            }
            out
        }
    };

    let wholesaler = network.wholesaler().expect("validated").id.clone();
    let reorder = match doc.reorder {
        None => None,
        Some(r) => {
            let owner = r.owner.unwrap_or_else(|| wholesaler.clone());
            if !initial_stock.contains_key(&owner) {
                return Err(invalid("reorder.owner", "owner must hold stock"));
            }
            let mut points = BTreeMap::new();
            for (p, kg) in r.points_kg {
                if !products.contains(&p) {
                    return Err(invalid(format!("reorder.points_kg.{p}"), "unknown product"));
                }
                points.insert(p.clone(), grams(&format!("reorder.points_kg.{p}"), kg)?);
            }
            let order_g = match r.order_kg {
                Some(kg) => grams("reorder.order_kg", kg)?,
                None => default_order_g,
            };
            if order_g == 0 {
                return Err(invalid("reorder.order_kg", "must be positive"));
            }
            Some(ReorderPolicy {
                enabled: r.enabled,
                owner,
                points,
                order_g,
            })
        }
    };

    let weights = doc.assessment_weights.unwrap_or_default();
    weights
        .validate()
        .map_err(|e| invalid("assessment_weights", e.to_string()))?;

    let time_scale = ov.time_scale.or(doc.time_scale).unwrap_or(DEFAULT_TIME_SCALE);
    if !(time_scale > 0.0 && time_scale.is_finite()) {
        return Err(invalid("time_scale", "must be positive"));
    }

    let neg = doc.negotiation.unwrap_or(NegotiationDoc {
        cfp_window_s: None,
        response_delay_s: None,
    });
    let negotiation = NegotiationConfig {
        cfp_window: positive_secs("negotiation.cfp_window_s", neg.cfp_window_s.unwrap_or(600.0))?,
        response_delay: secs("negotiation.response_delay_s", neg.response_delay_s.unwrap_or(2.0))?,
    };
    let telemetry_period =
        positive_secs("telemetry_period_s", doc.telemetry_period_s.unwrap_or(5.0))?;

    let functions = doc.functions.unwrap_or_else(|| {
        FUNCTIONS
            .iter()
            .map(|f| FunctionDecl {
                name: f.to_string(),
                automated: true,
                self_deciding: false,
            })
            .collect()
    });
    for (i, f) in functions.iter().enumerate() {
        if f.self_deciding && !f.automated {
            return Err(invalid(
                format!("functions[{i}]"),
                "a self-deciding function must be automated",
            ));
        }
    }

    let mut processes = BTreeMap::new();
    for kind in [ProcessKind::Replenishment, ProcessKind::Wholesale] {
        let d = doc.processes.get(&kind);
        let path = format!("processes.{}", kind.as_str());
        let check = |ids: &Option<Vec<EntityId>>, roles: &[Role], field: &str| -> Result<(), ScenarioError> {
            for id in ids.iter().flatten() {
                match network.entity(id) {
                    Some(e) if roles.contains(&e.role) => {}
                    _ => return Err(invalid(format!("{path}.{field}"), format!("{id} cannot take this role"))),
                }
            }
            Ok(())
        };
        let sellers = d.and_then(|d| d.sellers.clone());
        let carriers = d.and_then(|d| d.carriers.clone());
        check(&sellers, &[Role::Supplier, Role::Wholesaler], "sellers")?;
        check(&carriers, &[Role::ThirdPartyLogistics], "carriers")?;
        processes.insert(
            kind,
            ProcessConfig {
                automated: d.and_then(|d| d.automated).unwrap_or(true),
                major: d.and_then(|d| d.major).unwrap_or(true),
                sellers,
                carriers,
            },
        );
    }

    let mut script = Vec::with_capacity(doc.script.len());
    let mut partial = Scenario {
        name: doc.name.unwrap_or_else(|| "unnamed".to_string()),
        seed,
        products,
        default_order_g,
        network,
        initial_stock,
        routes: doc.routes,
        sensor_profiles,
        reorder,
        weights,
        time_scale,
        negotiation,
        telemetry_period,
        processes,
        functions,
        script: Vec::new(),
    };
    for (i, s) in doc.script.into_iter().enumerate() {
        let path = format!("script[{i}]");
        let at = secs(&format!("{path}.at_s"), s.at_s)?;
        match partial.entity(&s.buyer).map(|e| e.role) {
            Some(Role::Wholesaler | Role::Retailer) => {}
            Some(_) => return Err(invalid(format!("{path}.buyer"), "buyer must be the wholesaler or a retailer")),
            None => return Err(invalid(format!("{path}.buyer"), format!("unknown entity {}", s.buyer))),
        }
        let lines = match &s.lines {
            Some(lines) => partial.parse_lines(lines, &format!("{path}.lines"))?,
            None => partial.default_lines(),
        };
        script.push(ScriptedOrder {
            at,
            buyer: s.buyer,
            lines,
        });
    }
    partial.script = script;
    Ok(partial)
}
