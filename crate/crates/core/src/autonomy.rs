//! Autonomy assessment: the intelligence/automation manifold, the
//! six-characteristics checklist and the seven-level SCAL rubric.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::grammar::order_follows_grammar;
use crate::event::{Event, EventBody, Stage, Trigger};
use crate::scenario::{Scenario, FUNCTIONS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AutonomyError {
    #[error("{0} must lie in [0, 1]")]
    OutOfRange(&'static str),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("the log contains no completed process")]
    EmptyLog,
}

fn unit(name: &'static str, v: f64) -> Result<f64, AutonomyError> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(AutonomyError::OutOfRange(name))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutonomyPoint {
    pub intelligence: f64,
    pub automation: f64,
}

impl AutonomyPoint {
    pub fn new(intelligence: f64, automation: f64) -> Result<Self, AutonomyError> {
        Ok(AutonomyPoint {
            intelligence: unit("intelligence", intelligence)?,
            automation: unit("automation", automation)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldConfig {
    pub tau_i: f64,
    pub tau_a: f64,
    pub delta: f64,
}

impl Default for ManifoldConfig {
    fn default() -> Self {
        ManifoldConfig {
            tau_i: 0.5,
            tau_a: 0.5,
            delta: 0.2,
        }
    }
}

impl ManifoldConfig {
    pub fn new(tau_i: f64, tau_a: f64, delta: f64) -> Result<Self, AutonomyError> {
        Ok(ManifoldConfig {
            tau_i: unit("tau_i", tau_i)?,
            tau_a: unit("tau_a", tau_a)?,
            delta: unit("delta", delta)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ManifoldRegion {
    IntelligenceSkewed,
    AutomationSkewed,
    Balanced,
    Ideal,
}

impl ManifoldRegion {
    pub fn as_str(self) -> &'static str {
        match self {
            ManifoldRegion::IntelligenceSkewed => "intelligence-skewed",
            ManifoldRegion::AutomationSkewed => "automation-skewed",
            ManifoldRegion::Balanced => "balanced",
            ManifoldRegion::Ideal => "ideal",
        }
    }
}

impl fmt::Display for ManifoldRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ideal wins over balanced; outside both, the larger coordinate names the skew.
pub fn classify_region(p: AutonomyPoint, cfg: ManifoldConfig) -> ManifoldRegion {
    if p.intelligence >= cfg.tau_i && p.automation >= cfg.tau_a {
        ManifoldRegion::Ideal
    } else if (p.intelligence - p.automation).abs() <= cfg.delta {
        ManifoldRegion::Balanced
    } else if p.intelligence > p.automation {
        ManifoldRegion::IntelligenceSkewed
    } else {
        ManifoldRegion::AutomationSkewed
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionCapability {
    pub name: String,
    pub automated: bool,
    pub self_deciding: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessCapability {
    pub name: String,
    pub member_functions: Vec<String>,
    pub streamlined: bool,
    pub major: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Characteristics {
    pub instrumented: bool,
    pub standardised: bool,
    pub interconnected: bool,
    pub integrated: bool,
    pub automated: bool,
    pub intelligent: bool,
}

impl Characteristics {
    pub const NAMES: [&'static str; 6] = [
        "instrumented",
        "standardised",
        "interconnected",
        "integrated",
        "automated",
        "intelligent",
    ];

    pub fn all() -> Self {
        Characteristics {
            instrumented: true,
            standardised: true,
            interconnected: true,
            integrated: true,
            automated: true,
            intelligent: true,
        }
    }

    pub fn flags(&self) -> [bool; 6] {
        [
            self.instrumented,
            self.standardised,
            self.interconnected,
            self.integrated,
            self.automated,
            self.intelligent,
        ]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapabilityProfile {
    pub functions: Vec<FunctionCapability>,
    pub processes: Vec<ProcessCapability>,
    pub all_conditions_autonomous: bool,
    pub handles_unanticipated: bool,
    pub self_learning: bool,
    pub characteristics: Characteristics,
}

impl CapabilityProfile {
    pub fn validate(&self) -> Result<(), AutonomyError> {
        let invalid = |m: String| Err(AutonomyError::InvalidProfile(m));
        let mut names = BTreeSet::new();
        for f in &self.functions {
            if !names.insert(f.name.as_str()) {
                return invalid(format!("function {} listed twice", f.name));
            }
            if f.self_deciding && !f.automated {
                return invalid(format!("{} is self-deciding but not automated", f.name));
            }
        }
        for p in &self.processes {
            let mut automated = 0;
            for m in &p.member_functions {
                match self.functions.iter().find(|f| &f.name == m) {
                    None => return invalid(format!("{} references unknown function {m}", p.name)),
                    Some(f) if f.automated => automated += 1,
                    Some(_) => {}
                }
            }
            if p.streamlined && automated < 2 {
                return invalid(format!(
                    "{} is streamlined but has {automated} automated functions",
                    p.name
                ));
            }
        }
        if self.handles_unanticipated && !self.all_conditions_autonomous {
            return invalid("handles unanticipated situations without conditional autonomy".into());
        }
        Ok(())
    }
}

pub const LEVEL_NAMES: [&str; 7] = [
    "No Automation",
    "Function Automation",
    "Process Automation",
    "Holistic Automation",
    "Limited Autonomy",
    "Conditional Autonomy",
    "Full Autonomy",
];

const HUMAN_INVOLVEMENT: [&str; 7] = [
    "humans manage and perform every operation",
    "humans connect automated functions and keep overall control",
    "humans supervise automated processes and intervene on request",
    "humans guide execution and keep tactical and strategic decisions",
    "humans decide complex situations and monitor automated processes",
    "humans stay alert for intervention requests in unexpected events",
    "human involvement is minimal and mostly strategic",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalLevel {
    pub level: u8,
    pub name: String,
    pub rationale: Vec<String>,
}

impl ScalLevel {
    /// Descriptive only; the level definitions carry no numbers.
    pub fn human_involvement(&self) -> &'static str {
        HUMAN_INVOLVEMENT[self.level as usize]
    }
}

impl fmt::Display for ScalLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{} {}", self.level, self.name)
    }
}

/// Evaluates the level clauses from L6 down and returns the first that holds.
pub fn assess_scal(profile: &CapabilityProfile) -> Result<ScalLevel, AutonomyError> {
    profile.validate()?;
    let automated = profile.functions.iter().filter(|f| f.automated).count();
    let deciding: Vec<&str> = profile
        .functions
        .iter()
        .filter(|f| f.self_deciding)
        .map(|f| f.name.as_str())
        .collect();
    let streamlined = profile.processes.iter().filter(|p| p.streamlined).count();
    let major: Vec<&ProcessCapability> = profile.processes.iter().filter(|p| p.major).collect();
    let major_streamlined = major.iter().filter(|p| p.streamlined).count();

    let clauses: [(bool, String); 6] = [
        (
            automated > 0,
            format!("certain functions within the supply chain have been automated ({automated} of {})", profile.functions.len()),
        ),
        (
            streamlined > 0,
            format!("a sequence of functions is executed in a predetermined order ({streamlined} streamlined processes)"),
        ),
        (
            !major.is_empty() && major_streamlined == major.len(),
            format!(
                "all major processes within the supply chain are automated ({major_streamlined} of {} major processes streamlined)",
                major.len()
            ),
        ),
        (
            !deciding.is_empty(),
            if deciding.is_empty() {
                "capability for self-decision-making (no self-deciding function)".to_string()
            } else {
                format!("capability for self-decision-making ({})", deciding.join(", "))
            },
        ),
        (
            profile.all_conditions_autonomous,
            "performs all functions autonomously without human intervention under certain conditions".to_string(),
        ),
        (
            profile.self_learning && profile.handles_unanticipated,
            "full self-learning and self-decision-making, even in unanticipated situations".to_string(),
        ),
    ];

    let mut rationale = Vec::new();
    for level in (1..=6u8).rev() {
        let (holds, text) = &clauses[level as usize - 1];
        if *holds {
            rationale.push(format!("L{level} satisfied: {text}"));
            return Ok(ScalLevel {
                level,
                name: LEVEL_NAMES[level as usize].to_string(),
                rationale,
            });
        }
        rationale.push(format!("L{level} not met: {text}"));
    }
    rationale.push("L0: operated entirely manually".to_string());
    Ok(ScalLevel {
        level: 0,
        name: LEVEL_NAMES[0].to_string(),
        rationale,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacteristicsReport {
    pub characteristics: Characteristics,
    pub missing: Vec<String>,
    pub violations: Vec<String>,
}

/// The first four characteristics form a chain where each depends on the
/// ones below it; automated and intelligent stand apart.
pub fn characteristics_check(profile: &CapabilityProfile) -> CharacteristicsReport {
    let c = profile.characteristics;
    let flags = c.flags();
    let names = Characteristics::NAMES;
    let missing = (0..6)
        .filter(|&i| !flags[i])
        .map(|i| names[i].to_string())
        .collect();
    let mut violations = Vec::new();
    for upper in 1..4 {
        if !flags[upper] {
            continue;
        }
        for lower in 0..upper {
            if !flags[lower] {
                violations.push(format!("{} requires {}", names[upper], names[lower]));
            }
        }
    }
    CharacteristicsReport {
        characteristics: c,
        missing,
        violations,
    }
}

fn function_for(body: &EventBody) -> Option<&'static str> {
    match body {
        EventBody::ProposalAccepted(p) => match p.stage {
            Stage::Supply => Some("supplier-selection"),
            Stage::Logistics => Some("logistics-arrangement"),
            Stage::Carrier => None,
        },
        EventBody::OrderPlaced(p) if p.trigger == Trigger::Reorder => Some("inventory-updating"),
        EventBody::ShipmentDelivered(_) => Some("inventory-updating"),
        EventBody::ShipmentDispatched(_) => Some("transportation-monitoring"),
        EventBody::DeliveryAssessed(_) => Some("delivery-assessment"),
        _ => None,
    }
}

fn delivered_orders(events: &[Event]) -> Vec<(String, crate::model::ProcessKind)> {
    let mut kinds = std::collections::BTreeMap::new();
    let mut out = Vec::new();
    for e in events {
        match &e.body {
            EventBody::OrderPlaced(p) => {
                kinds.insert(p.order_id.clone(), p.process);
            }
            EventBody::DeliveryAssessed(p) => {
                if let Some(k) = kinds.get(&p.order_id) {
                    out.push((p.order_id.clone(), *k));
                }
            }
            _ => {}
        }
    }
    out
}

/// Profile of the running system: declared automation from the scenario,
/// confirmed against the orders that actually completed in `events`.
pub fn profile_from_scenario(
    scenario: &Scenario,
    events: &[Event],
) -> Result<CapabilityProfile, AutonomyError> {
    let delivered = delivered_orders(events);
    if delivered.is_empty() {
        return Err(AutonomyError::EmptyLog);
    }
    let functions: Vec<FunctionCapability> = scenario
        .functions
        .iter()
        .map(|f| FunctionCapability {
            name: f.name.clone(),
            automated: f.automated,
            self_deciding: f.self_deciding,
        })
        .collect();
    let automated_members = functions.iter().filter(|f| f.automated).count();
    let processes: Vec<ProcessCapability> = scenario
        .processes
        .iter()
        .map(|(kind, cfg)| {
            let observed = delivered
                .iter()
                .any(|(id, k)| k == kind && order_follows_grammar(events, id));
            ProcessCapability {
                name: kind.as_str().to_string(),
                member_functions: FUNCTIONS.iter().map(|f| f.to_string()).collect(),
                streamlined: cfg.automated && observed && automated_members >= 2,
                major: cfg.major,
            }
        })
        .collect();
    let has = |pred: fn(&EventBody) -> bool| events.iter().any(|e| pred(&e.body));
    let characteristics = Characteristics {
        instrumented: has(|b| matches!(b, EventBody::SensorReading(_))),
        standardised: has(|b| matches!(b, EventBody::ChatMessage(_))),
        interconnected: has(|b| matches!(b, EventBody::CfpIssued(c) if c.stage != Stage::Supply)),
        integrated: processes.iter().any(|p| p.streamlined),
        automated: functions.iter().any(|f| f.automated),
        intelligent: functions.iter().any(|f| f.self_deciding),
    };
    Ok(CapabilityProfile {
        functions,
        processes,
        all_conditions_autonomous: false,
        handles_unanticipated: false,
        self_learning: false,
        characteristics,
    })
}

/// Execution counts behind the system's own position on the manifold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionCounts {
    /// Executions of functions the scenario declares automated.
    pub automated: u64,
    /// Of those, executions of self-deciding functions.
    pub self_deciding: u64,
    /// Orders launched by a human or a script.
    pub manual: u64,
}

impl DecisionCounts {
    pub fn point(&self) -> AutonomyPoint {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        AutonomyPoint {
            intelligence: ratio(self.self_deciding, self.automated),
            automation: ratio(self.automated, self.automated + self.manual),
        }
    }
}

pub fn decision_counts(scenario: &Scenario, events: &[Event]) -> DecisionCounts {
    let mut c = DecisionCounts::default();
    for e in events {
        if let EventBody::OrderPlaced(p) = &e.body {
            if p.trigger != Trigger::Reorder {
                c.manual += 1;
            }
        }
        let Some(name) = function_for(&e.body) else {
            continue;
        };
        if let Some(f) = scenario.functions.iter().find(|f| f.name == name) {
            if f.automated {
                c.automated += 1;
                if f.self_deciding {
                    c.self_deciding += 1;
                }
            }
        }
    }
    c
}

/// Intelligence is the share of automated executions that were
/// self-decided; automation is the share of all executions that needed no
/// human launch.
pub fn autonomy_point_from_log(
    scenario: &Scenario,
    events: &[Event],
) -> Result<AutonomyPoint, AutonomyError> {
    if delivered_orders(events).is_empty() {
        return Err(AutonomyError::EmptyLog);
    }
    Ok(decision_counts(scenario, events).point())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfAssessment {
    pub profile: CapabilityProfile,
    pub scal: ScalLevel,
    pub characteristics: CharacteristicsReport,
    pub point: AutonomyPoint,
    pub region: ManifoldRegion,
    pub counts: DecisionCounts,
}

pub fn self_assessment(
    scenario: &Scenario,
    events: &[Event],
    cfg: ManifoldConfig,
) -> Result<SelfAssessment, AutonomyError> {
    let profile = profile_from_scenario(scenario, events)?;
    let scal = assess_scal(&profile)?;
    let counts = decision_counts(scenario, events);
    let point = counts.point();
    Ok(SelfAssessment {
        characteristics: characteristics_check(&profile),
        region: classify_region(point, cfg),
        scal,
        profile,
        point,
        counts,
    })
}
