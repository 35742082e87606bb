mod common;

use ascsim_core::autonomy::{
    assess_scal, characteristics_check, classify_region, profile_from_scenario, self_assessment,
    AutonomyError, AutonomyPoint, CapabilityProfile, Characteristics, FunctionCapability,
    ManifoldConfig, ManifoldRegion, ProcessCapability, LEVEL_NAMES,
};
use ascsim_core::sweep::classify_grid;
use ascsim_core::{EventLog, Scenario, SimTime, Simulation};
use common::*;
use proptest::prelude::*;

fn oracle(i: f64, a: f64, cfg: ManifoldConfig) -> ManifoldRegion {
    if i >= cfg.tau_i && a >= cfg.tau_a {
        ManifoldRegion::Ideal
    } else if (i - a).abs() <= cfg.delta {
        ManifoldRegion::Balanced
    } else if i > a {
        ManifoldRegion::IntelligenceSkewed
    } else {
        ManifoldRegion::AutomationSkewed
    }
}

#[test]
fn hundred_by_hundred_grid_matches_rule_oracle() {
    let cfg = ManifoldConfig::default();
    let grid = classify_grid(100, cfg);
    assert_eq!(grid.len(), 10_000);
    for (p, region) in grid {
        assert_eq!(region, oracle(p.intelligence, p.automation, cfg), "{p:?}");
    }
    for i in 0..=100 {
        for a in 0..=100 {
            let (i, a) = (f64::from(i) / 100.0, f64::from(a) / 100.0);
            let p = AutonomyPoint::new(i, a).unwrap();
            assert_eq!(classify_region(p, cfg), oracle(i, a, cfg));
        }
    }
}

#[test]
fn manifold_examples() {
    let cfg = ManifoldConfig::default();
    let at = |i, a| classify_region(AutonomyPoint::new(i, a).unwrap(), cfg);
    assert_eq!(at(0.7, 0.6), ManifoldRegion::Ideal);
    assert_eq!(at(0.8, 0.2), ManifoldRegion::IntelligenceSkewed);
    assert_eq!(at(0.3, 0.3), ManifoldRegion::Balanced);
    assert_eq!(at(0.1, 0.9), ManifoldRegion::AutomationSkewed);
}

proptest! {
    #[test]
    fn common_scaling_preserves_skew_direction(i in 0.0f64..=1.0, a in 0.0f64..=1.0, f in 0.001f64..=1.0) {
        let max = i.max(a);
        prop_assume!(max > 0.0);
        let k = f / max;
        let p = AutonomyPoint::new(i * k, a * k).unwrap();
        prop_assert_eq!((i - a).partial_cmp(&0.0), (p.intelligence - p.automation).partial_cmp(&0.0));
    }
}

fn function(name: &str, automated: bool, self_deciding: bool) -> FunctionCapability {
    FunctionCapability {
        name: name.into(),
        automated,
        self_deciding,
    }
}

fn process(name: &str, members: &[&str], streamlined: bool, major: bool) -> ProcessCapability {
    ProcessCapability {
        name: name.into(),
        member_functions: members.iter().map(|m| m.to_string()).collect(),
        streamlined,
        major,
    }
}

fn manual_profile() -> CapabilityProfile {
    CapabilityProfile {
        functions: vec![function("ordering", false, false), function("invoicing", false, false)],
        ..Default::default()
    }
}

#[test]
fn anchor_profiles_return_their_levels() {
    let l0 = manual_profile();
    assert_eq!(assess_scal(&l0).unwrap().level, 0);

    let mut l1 = manual_profile();
    l1.functions[0].automated = true;
    l1.processes = vec![process("procurement", &["ordering", "invoicing"], false, true)];
    assert_eq!(assess_scal(&l1).unwrap().level, 1);

    let mut l4 = manual_profile();
    l4.functions = vec![function("ordering", true, true), function("invoicing", true, false)];
    l4.processes = vec![process("procurement", &["ordering", "invoicing"], true, true)];
    assert_eq!(assess_scal(&l4).unwrap().level, 4);

    let mut l6 = l4.clone();
    l6.all_conditions_autonomous = true;
    l6.handles_unanticipated = true;
    l6.self_learning = true;
    l6.characteristics = Characteristics::all();
    let level = assess_scal(&l6).unwrap();
    assert_eq!((level.level, level.name.as_str()), (6, "Full Autonomy"));
}

#[test]
fn level_names_follow_the_rubric() {
    assert_eq!(
        LEVEL_NAMES,
        [
            "No Automation",
            "Function Automation",
            "Process Automation",
            "Holistic Automation",
            "Limited Autonomy",
            "Conditional Autonomy",
            "Full Autonomy",
        ]
    );
}

#[test]
fn default_case_study_is_holistic_automation() {
    let sim = run_default();
    let profile = profile_from_scenario(sim.scenario(), sim.log().events()).unwrap();
    let streamlined_major = profile.processes.iter().filter(|p| p.major && p.streamlined).count();
    assert_eq!(streamlined_major, 2);
    let level = assess_scal(&profile).unwrap();
    assert_eq!(level.to_string(), "L3 Holistic Automation");
    assert!(level
        .rationale
        .iter()
        .any(|r| r.contains("all major processes within the supply chain are automated")));
}

#[test]
fn shipped_system_sits_in_the_automation_skewed_region() {
    let sim = run_default();
    let a = self_assessment(sim.scenario(), sim.log().events(), ManifoldConfig::default()).unwrap();
    assert!(a.point.automation > a.point.intelligence);
    assert_eq!(a.region, ManifoldRegion::AutomationSkewed);
}

#[test]
fn log_without_a_completed_process_is_empty() {
    let mut sim = Simulation::new(Scenario::default_case_study());
    sim.advance(SimTime::ZERO);
    let only_placed: Vec<_> = sim.log().events().to_vec();
    assert_eq!(
        profile_from_scenario(sim.scenario(), &only_placed),
        Err(AutonomyError::EmptyLog)
    );
    assert_eq!(
        profile_from_scenario(sim.scenario(), EventLog::new().events()),
        Err(AutonomyError::EmptyLog)
    );
}

#[test]
fn characteristics_layering() {
    let mut p = manual_profile();
    p.characteristics = Characteristics::all();
    assert!(characteristics_check(&p).violations.is_empty());

    p.characteristics.interconnected = false;
    let report = characteristics_check(&p);
    assert!(report.violations.iter().any(|v| v.contains("integrated")));

    p.characteristics = Characteristics {
        automated: true,
        ..Default::default()
    };
    let report = characteristics_check(&p);
    assert!(report.violations.iter().all(|v| !v.starts_with("automated")));
}

const NAMES: [&str; 5] = ["f0", "f1", "f2", "f3", "f4"];

prop_compose! {
    fn raw_profile()(
        funcs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..=5),
        procs in prop::collection::vec((prop::collection::vec(any::<bool>(), 5), any::<bool>(), any::<bool>()), 0..4),
        top in (any::<bool>(), any::<bool>(), any::<bool>()),
        chars in prop::array::uniform6(any::<bool>()),
    ) -> CapabilityProfile {
        let functions: Vec<_> = funcs
            .iter()
            .enumerate()
            .map(|(i, &(a, d))| function(NAMES[i], a, a && d))
            .collect();
        let processes = procs
            .iter()
            .enumerate()
            .map(|(i, (members, s, m))| {
                let members: Vec<&str> = functions
                    .iter()
                    .zip(members)
                    .filter(|(_, keep)| **keep)
                    .map(|(f, _)| f.name.as_str())
                    .collect();
                let automated = functions
                    .iter()
                    .filter(|f| f.automated && members.contains(&f.name.as_str()))
                    .count();
                process(&format!("p{i}"), &members, *s && automated >= 2, *m)
            })
            .collect();
        CapabilityProfile {
            functions,
            processes,
            all_conditions_autonomous: top.0,
            handles_unanticipated: top.0 && top.1,
            self_learning: top.2,
            characteristics: Characteristics {
                instrumented: chars[0],
                standardised: chars[1],
                interconnected: chars[2],
                integrated: chars[3],
                automated: chars[4],
                intelligent: chars[5],
            },
        }
    }
}

/// Every single-flag false-to-true change that keeps the profile valid.
fn upgrades(p: &CapabilityProfile) -> Vec<CapabilityProfile> {
    let mut out = Vec::new();
    for i in 0..p.functions.len() {
        let mut q = p.clone();
        if !q.functions[i].automated {
            q.functions[i].automated = true;
            out.push(q);
        }
        let mut q = p.clone();
        if !q.functions[i].self_deciding {
            q.functions[i].self_deciding = true;
            out.push(q);
        }
    }
    for i in 0..p.processes.len() {
        let mut q = p.clone();
        if !q.processes[i].streamlined {
            q.processes[i].streamlined = true;
            out.push(q);
        }
    }
    let top: [fn(&mut CapabilityProfile) -> &mut bool; 3] = [
        |q| &mut q.all_conditions_autonomous,
        |q| &mut q.handles_unanticipated,
        |q| &mut q.self_learning,
    ];
    for flag in top {
        let mut q = p.clone();
        if !*flag(&mut q) {
            *flag(&mut q) = true;
            out.push(q);
        }
    }
    for i in 0..6 {
        let mut q = p.clone();
        let c = &mut q.characteristics;
        let slot = [
            &mut c.instrumented,
            &mut c.standardised,
            &mut c.interconnected,
            &mut c.integrated,
            &mut c.automated,
            &mut c.intelligent,
        ];
        if !*slot[i] {
            *slot.into_iter().nth(i).unwrap() = true;
            out.push(q);
        }
    }
    out.retain(|q| q.validate().is_ok());
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn upgrades_never_lower_the_level(p in raw_profile()) {
        let level = assess_scal(&p).unwrap();
        prop_assert!(level.level <= 6);
        prop_assert_eq!(&level, &assess_scal(&p).unwrap());
        for q in upgrades(&p) {
            let up = assess_scal(&q).unwrap().level;
            prop_assert!(up >= level.level, "{} -> {} for {:?}", level.level, up, q);
        }
    }
}
