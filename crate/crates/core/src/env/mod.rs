//! Discrete-time multi-echelon, multi-product inventory environment with a
//! three-component vector reward (profit, negated emissions, negated lead time).

mod config;
mod disruption;
mod dynamics;
mod reward;
pub mod invariants;

use std::io::Write;
use std::sync::Arc;

pub use config::{
    DemandParams, Network, NetworkConfig, NodeSpec, TransportMode, CONFIG_SCHEMA_VERSION,
};
pub use disruption::{Disruption, DisruptionKind};
pub use dynamics::{
    sample_demand, sample_lead_time, ActionSet, CellRecord, OpenOrder, Shipment, SimState,
    Transition,
};
pub use reward::{RewardVector, N_OBJECTIVES, OBJECTIVE_NAMES};

use crate::error::EnvError;
use crate::rng::SimRng;

/// An episodic environment driven by an external policy.
pub trait Environment {
    type Action;

    fn reset(&mut self, rng: &mut SimRng);
    fn observe_into(&self, out: &mut Vec<f64>);
    fn step(&mut self, action: &Self::Action, rng: &mut SimRng) -> Result<RewardVector, EnvError>;
    /// Index of the next period to simulate.
    fn period(&self) -> usize;
}

/// The inventory network bundled with its live state and scripted disruptions.
#[derive(Debug, Clone)]
pub struct InventoryEnv {
    net: Arc<Network>,
    state: SimState,
    disruptions: Vec<Disruption>,
}

impl InventoryEnv {
    pub fn new(net: Arc<Network>, rng: &mut SimRng) -> Self {
        let state = SimState::reset(&net, rng);
        Self {
            net,
            state,
            disruptions: Vec::new(),
        }
    }

    pub fn with_disruptions(mut self, disruptions: Vec<Disruption>) -> Self {
        self.disruptions = disruptions;
        self
    }

    pub fn network(&self) -> &Arc<Network> {
        &self.net
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn disruptions(&self) -> &[Disruption] {
        &self.disruptions
    }

    pub fn push_disruption(&mut self, d: Disruption) -> Result<(), EnvError> {
        d.validate()?;
        self.disruptions.push(d);
        Ok(())
    }

    /// Steps and returns the full transition record.
    pub fn step_record(
        &mut self,
        actions: &ActionSet,
        rng: &mut SimRng,
    ) -> Result<Transition, EnvError> {
        self.state.step(&self.net, actions, &self.disruptions, rng)
    }
}

impl Environment for InventoryEnv {
    type Action = ActionSet;

    fn reset(&mut self, rng: &mut SimRng) {
        self.state = SimState::reset(&self.net, rng);
    }

    fn observe_into(&self, out: &mut Vec<f64>) {
        self.state.observe_into(&self.net, out);
    }

    fn step(&mut self, action: &ActionSet, rng: &mut SimRng) -> Result<RewardVector, EnvError> {
        self.step_record(action, rng).map(|tr| tr.reward)
    }

    fn period(&self) -> usize {
        self.state.t
    }
}

const TRANSITION_CSV_HEADER: [&str; 19] = [
    "t",
    "node",
    "product",
    "order",
    "mode",
    "lead_time",
    "arrived",
    "demand",
    "shipped",
    "on_hand",
    "backlog",
    "overflow",
    "revenue",
    "reorder_cost",
    "transport_cost",
    "holding_cost",
    "backlog_cost",
    "emissions",
    "emission_tax",
];

/// Writes transitions as CSV, one row per period, node and product. The
/// period-level emission tax is repeated on every row of its period.
pub fn write_transitions_csv<W: Write>(
    transitions: &[Transition],
    writer: W,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRANSITION_CSV_HEADER)?;
    for tr in transitions {
        for c in &tr.cells {
            w.write_record(&[
                tr.t.to_string(),
                c.node.to_string(),
                c.product.to_string(),
                c.order.to_string(),
                c.mode.to_string(),
                c.lead_time.to_string(),
                c.arrived.to_string(),
                c.demand.to_string(),
                c.shipped.to_string(),
                c.on_hand.to_string(),
                c.backlog.to_string(),
                c.overflow.to_string(),
                c.revenue.to_string(),
                c.reorder_cost.to_string(),
                c.transport_cost.to_string(),
                c.holding_cost.to_string(),
                c.backlog_cost.to_string(),
                c.emissions.to_string(),
                tr.emission_tax.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
