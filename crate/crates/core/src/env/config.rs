//! Network configuration: topology, cost coefficients, transport modes and
//! stochastic rates.
//!
//! Nodes are indexed from 0. Node 0 is the root and orders from an unlimited
//! raw-material source; every other node names exactly one upstream node with
//! a smaller index, which makes the topology a tree rooted at node 0. Nodes
//! without downstream nodes are customer-facing (retail).

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::ConfigError;
use crate::grid::Grid;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    #[serde(default)]
    pub name: String,
    /// Upstream supplier index; `None` only for the root node.
    pub upstream: Option<usize>,
    /// Distance to the upstream supplier (or to the raw source for the root).
    pub distance: f64,
    /// Base emissions per item and distance unit, scaled by the mode multiplier.
    pub emission_rate: f64,
    /// Largest order the node may place for one product in one period.
    pub reorder_max: u32,
    /// Storage capacity per product.
    pub storage_max: u32,
    /// On-hand stock per product at reset; defaults to `reorder_max / 2`.
    #[serde(default)]
    pub initial_on_hand: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportMode {
    pub name: String,
    pub cost_multiplier: f64,
    pub emission_multiplier: f64,
    pub lead_time_multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandParams {
    /// Baseline Poisson rate per retail node and product.
    pub base_rate: f64,
    /// Seasonal amplitude in `[0, 1]`.
    #[serde(default)]
    pub amplitude: f64,
    /// Seasonal frequency in cycles per period.
    #[serde(default)]
    pub frequency: f64,
    /// Seasonal phase in radians.
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub seasonal: bool,
    /// Per-cell, per-period probability that demand spikes.
    #[serde(default)]
    pub spike_probability: f64,
    /// Rate multiplier applied during a spike.
    #[serde(default = "one")]
    pub spike_multiplier: f64,
    /// Observation scale for demand; defaults to `2 * base_rate * (1 + amplitude)`.
    #[serde(default)]
    pub normalizer: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub products: usize,
    /// Last period index of an episode; an episode covers periods `0..=horizon`.
    pub horizon: usize,
    /// Number of past order/demand periods included in observations.
    pub history_window: usize,
    pub discount: f64,
    pub nodes: Vec<NodeSpec>,
    pub price: Grid<f64>,
    pub reorder_cost: Grid<f64>,
    pub transport_cost: Grid<f64>,
    pub holding_cost: Grid<f64>,
    pub backlog_cost: Grid<f64>,
    pub transport_modes: Vec<TransportMode>,
    pub demand: DemandParams,
    /// Poisson rate of the shared lead-time draw.
    pub lead_time_rate: f64,
    /// Observation scale for backlog; defaults to the node's demand scale.
    #[serde(default)]
    pub backlog_normalizer: Option<f64>,
}

impl NetworkConfig {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_modes(&self) -> usize {
        self.transport_modes.len()
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization is infallible")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |msg: String| Err(ConfigError::Invalid(msg));

        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(ConfigError::SchemaVersion {
                found: self.schema_version,
                expected: CONFIG_SCHEMA_VERSION,
            });
        }
        if self.nodes.is_empty() {
            return invalid("network has no nodes".into());
        }
        if self.products == 0 {
            return invalid("network has no products".into());
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return invalid(format!("discount {} outside (0, 1]", self.discount));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            match (i, node.upstream) {
                (0, None) => {}
                (0, Some(_)) => return invalid("node 0 must be the root (no upstream)".into()),
                (_, None) => return invalid(format!("node {i} has no upstream supplier")),
                (_, Some(u)) if u >= i => {
                    return invalid(format!(
                        "node {i} lists upstream {u}; upstream must have a smaller index"
                    ))
                }
                _ => {}
            }
            if !(node.distance.is_finite() && node.distance >= 0.0) {
                return invalid(format!("node {i} distance must be finite and nonnegative"));
            }
            if !(node.emission_rate.is_finite() && node.emission_rate >= 0.0) {
                return invalid(format!("node {i} emission rate must be finite and nonnegative"));
            }
            if let Some(init) = node.initial_on_hand {
                if init > node.storage_max {
                    return invalid(format!("node {i} initial stock exceeds storage capacity"));
                }
            }
        }

        let shape = (self.nodes.len(), self.products);
        for (name, grid) in [
            ("price", &self.price),
            ("reorder_cost", &self.reorder_cost),
            ("transport_cost", &self.transport_cost),
            ("holding_cost", &self.holding_cost),
            ("backlog_cost", &self.backlog_cost),
        ] {
            if grid.shape() != shape {
                return invalid(format!(
                    "{name} has shape {:?}, expected {shape:?}",
                    grid.shape()
                ));
            }
            if grid.as_slice().iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return invalid(format!("{name} must be finite and nonnegative"));
            }
        }

        if self.transport_modes.is_empty() {
            return invalid("at least one transport mode is required".into());
        }
        for m in &self.transport_modes {
            let ok = [m.cost_multiplier, m.emission_multiplier, m.lead_time_multiplier]
                .iter()
                .all(|v| v.is_finite() && *v > 0.0);
            if !ok {
                return invalid(format!("transport mode '{}' needs positive multipliers", m.name));
            }
        }

        let d = &self.demand;
        if !(d.base_rate.is_finite() && d.base_rate >= 0.0) {
            return invalid("demand base rate must be nonnegative".into());
        }
        if !(0.0..=1.0).contains(&d.amplitude) {
            return invalid("demand amplitude must lie in [0, 1]".into());
        }
        if !d.frequency.is_finite() || !d.phase.is_finite() {
            return invalid("demand frequency and phase must be finite".into());
        }
        if !(0.0..=1.0).contains(&d.spike_probability) {
            return invalid("spike probability must lie in [0, 1]".into());
        }
        if !(d.spike_multiplier.is_finite() && d.spike_multiplier > 0.0) {
            return invalid("spike multiplier must be positive".into());
        }
        if matches!(d.normalizer, Some(v) if !(v.is_finite() && v > 0.0)) {
            return invalid("demand normalizer must be positive".into());
        }
        if matches!(self.backlog_normalizer, Some(v) if !(v.is_finite() && v > 0.0)) {
            return invalid("backlog normalizer must be positive".into());
        }
        if !(self.lead_time_rate.is_finite() && self.lead_time_rate >= 0.0) {
            return invalid("lead time rate must be nonnegative".into());
        }
        Ok(())
    }

    /// Poisson demand rate at period `t`, before spikes.
    pub fn demand_rate(&self, t: usize) -> f64 {
        let d = &self.demand;
        if d.seasonal {
            d.base_rate * (1.0 + d.amplitude * (2.0 * PI * d.frequency * t as f64 + d.phase).sin())
        } else {
            d.base_rate
        }
    }
}

/// A validated configuration with derived topology and observation scales.
#[derive(Debug, Clone)]
pub struct Network {
    cfg: NetworkConfig,
    downstream: Vec<Vec<usize>>,
    retail: Vec<bool>,
    demand_scale: Vec<f64>,
    backlog_scale: Vec<f64>,
}

impl Network {
    pub fn new(cfg: NetworkConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let n = cfg.nodes.len();
        let mut downstream = vec![Vec::new(); n];
        for (i, node) in cfg.nodes.iter().enumerate() {
            if let Some(u) = node.upstream {
                downstream[u].push(i);
            }
        }
        let retail: Vec<bool> = downstream.iter().map(Vec::is_empty).collect();

        let d = &cfg.demand;
        let customer_scale = d
            .normalizer
            .unwrap_or(2.0 * d.base_rate * (1.0 + d.amplitude));
        let demand_scale: Vec<f64> = (0..n)
            .map(|m| {
                let s = if retail[m] {
                    customer_scale
                } else {
                    downstream[m]
                        .iter()
                        .map(|&c| f64::from(cfg.nodes[c].reorder_max))
                        .sum()
                };
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        let backlog_scale = match cfg.backlog_normalizer {
            Some(v) => vec![v; n],
            None => demand_scale.clone(),
        };

        Ok(Self {
            cfg,
            downstream,
            retail,
            demand_scale,
            backlog_scale,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn n_nodes(&self) -> usize {
        self.cfg.nodes.len()
    }

    pub fn n_products(&self) -> usize {
        self.cfg.products
    }

    pub fn n_modes(&self) -> usize {
        self.cfg.transport_modes.len()
    }

    pub fn n_cells(&self) -> usize {
        self.n_nodes() * self.n_products()
    }

    pub fn horizon(&self) -> usize {
        self.cfg.horizon
    }

    pub fn downstream(&self, node: usize) -> &[usize] {
        &self.downstream[node]
    }

    pub fn is_retail(&self, node: usize) -> bool {
        self.retail[node]
    }

    pub fn retail_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_nodes()).filter(|&m| self.retail[m])
    }

    pub fn demand_scale(&self, node: usize) -> f64 {
        self.demand_scale[node]
    }

    pub fn backlog_scale(&self, node: usize) -> f64 {
        self.backlog_scale[node]
    }

    pub fn initial_on_hand(&self, node: usize) -> u32 {
        let spec = &self.cfg.nodes[node];
        spec.initial_on_hand
            .unwrap_or((spec.reorder_max / 2).min(spec.storage_max))
    }

    /// Observation length: `nodes * products * (3 + 2 * history_window)`.
    pub fn observation_len(&self) -> usize {
        self.n_cells() * (3 + 2 * self.cfg.history_window)
    }

    /// Copy of this network with a different episode horizon.
    pub fn with_horizon(&self, horizon: usize) -> Self {
        let mut out = self.clone();
        out.cfg.horizon = horizon;
        out
    }
}
