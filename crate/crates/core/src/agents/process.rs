//! The two business processes of the case study, run to completion.

use crate::event::Event;
use crate::model::{EntityId, OrderLine, OrderStatus, Role};
use crate::sim::engine::{SimError, Simulation};

#[derive(Debug, Clone, PartialEq)]
pub enum ReplenishmentTrigger {
    /// A human launches an order for these lines.
    Manual(Vec<OrderLine>),
    /// Order whatever is below its reorder point.
    ReorderCheck,
}

#[derive(Debug, Clone)]
pub struct ProcessOutcome {
    pub order_id: String,
    pub status: OrderStatus,
    /// Everything the simulation emitted while the process ran.
    pub events: Vec<Event>,
}

/// Wholesaler buys from suppliers. Returns once the order has been
/// delivered or has failed.
pub fn run_replenishment(
    sim: &mut Simulation,
    trigger: ReplenishmentTrigger,
) -> Result<ProcessOutcome, SimError> {
    let start = sim.log().len();
    let order_id = match trigger {
        ReplenishmentTrigger::Manual(lines) => {
            let buyer = sim.scenario().wholesaler().id.clone();
            sim.place_order(&buyer, lines)?
        }
        ReplenishmentTrigger::ReorderCheck => sim.reorder_now()?,
    };
    finish(sim, start, order_id)
}

/// A retailer buys from the wholesaler.
pub fn run_wholesale(
    sim: &mut Simulation,
    retailer: &EntityId,
    lines: Vec<OrderLine>,
) -> Result<ProcessOutcome, SimError> {
    match sim.scenario().entity(retailer).map(|e| e.role) {
        None => return Err(SimError::UnknownBuyer(retailer.clone())),
        Some(Role::Retailer) => {}
        Some(other) => return Err(SimError::NotABuyer(retailer.clone(), other)),
    }
    let start = sim.log().len();
    let order_id = sim.place_order(retailer, lines)?;
    finish(sim, start, order_id)
}

fn finish(sim: &mut Simulation, start: usize, order_id: String) -> Result<ProcessOutcome, SimError> {
    let status = sim.run_until_settled(&order_id)?;
    Ok(ProcessOutcome {
        order_id,
        status,
        events: sim.log().events()[start..].to_vec(),
    })
}
