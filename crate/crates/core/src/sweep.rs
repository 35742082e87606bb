//! Batch workloads that are independent per item: multi-seed runs, manifold
//! grids and rubric scoring. With the `parallel` feature they fan out over
//! rayon; the [`sequential`] module always runs in order, and both produce
//! identical results.

use serde::{Deserialize, Serialize};

use crate::autonomy::{
    assess_scal, classify_region, AutonomyError, AutonomyPoint, CapabilityProfile,
    ManifoldConfig, ManifoldRegion, ScalLevel,
};
use crate::event::{EventBody, SimTime};
use crate::model::OrderStatus;
use crate::scenario::Scenario;
use crate::sim::engine::Simulation;
use crate::sim::stream_id;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub events: usize,
    pub delivered: usize,
    pub failed: usize,
    pub mean_score: Option<f64>,
    pub end_time: SimTime,
    /// FNV-1a of the canonical event log.
    pub log_digest: u64,
}

/// Runs `scenario` to quiescence under `seed`.
pub fn run_one(scenario: &Scenario, seed: u64) -> RunSummary {
    let mut s = scenario.clone();
    s.seed = seed;
    let mut sim = Simulation::new(s);
    sim.run_to_quiescence();
    let world = sim.world();
    let count = |st| world.orders.values().filter(|o| o.status == st).count();
    let scores: Vec<f64> = sim
        .log()
        .events()
        .iter()
        .filter_map(|e| match &e.body {
            EventBody::DeliveryAssessed(a) => Some(a.score),
            _ => None,
        })
        .collect();
    RunSummary {
        seed,
        events: sim.log().len(),
        delivered: count(OrderStatus::Delivered),
        failed: count(OrderStatus::Failed),
        mean_score: (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64),
        end_time: sim.log().events().last().map_or(SimTime::ZERO, |e| e.sim_time),
        log_digest: stream_id(&sim.log().to_ndjson()),
    }
}

/// Cell centres of an `n`×`n` grid over the unit square, row-major by
/// intelligence then automation.
pub fn grid_points(n: usize) -> Vec<AutonomyPoint> {
    let c = |k: usize| (k as f64 + 0.5) / n as f64;
    (0..n)
        .flat_map(|i| {
            (0..n).map(move |a| AutonomyPoint {
                intelligence: c(i),
                automation: c(a),
            })
        })
        .collect()
}

pub mod sequential {
    use super::*;

    pub fn run_seeds(scenario: &Scenario, seeds: &[u64]) -> Vec<RunSummary> {
        seeds.iter().map(|s| run_one(scenario, *s)).collect()
    }

    pub fn classify_points(points: &[AutonomyPoint], cfg: ManifoldConfig) -> Vec<ManifoldRegion> {
        points.iter().map(|p| classify_region(*p, cfg)).collect()
    }

    pub fn assess_batch(profiles: &[CapabilityProfile]) -> Vec<Result<ScalLevel, AutonomyError>> {
        profiles.iter().map(assess_scal).collect()
    }
}

#[cfg(feature = "parallel")]
mod imp {
    use super::*;
    use rayon::prelude::*;

    pub fn run_seeds(scenario: &Scenario, seeds: &[u64]) -> Vec<RunSummary> {
        seeds.par_iter().map(|s| run_one(scenario, *s)).collect()
    }

    pub fn classify_points(points: &[AutonomyPoint], cfg: ManifoldConfig) -> Vec<ManifoldRegion> {
        points.par_iter().map(|p| classify_region(*p, cfg)).collect()
    }

    pub fn assess_batch(profiles: &[CapabilityProfile]) -> Vec<Result<ScalLevel, AutonomyError>> {
        profiles.par_iter().map(assess_scal).collect()
    }
}

#[cfg(not(feature = "parallel"))]
use sequential as imp;

pub use imp::{assess_batch, classify_points, run_seeds};

pub fn classify_grid(n: usize, cfg: ManifoldConfig) -> Vec<(AutonomyPoint, ManifoldRegion)> {
    let points = grid_points(n);
    let regions = classify_points(&points, cfg);
    points.into_iter().zip(regions).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_covers_the_square() {
        let g = grid_points(4);
        assert_eq!(g.len(), 16);
        assert_eq!(g[0].intelligence, 0.125);
        assert_eq!(g[15].automation, 0.875);
    }

    #[test]
    fn both_paths_agree() {
        let pts = grid_points(20);
        let cfg = ManifoldConfig::default();
        assert_eq!(classify_points(&pts, cfg), sequential::classify_points(&pts, cfg));
        let s = Scenario::default_case_study();
        assert_eq!(run_seeds(&s, &[1, 2]), sequential::run_seeds(&s, &[1, 2]));
    }
}
