//! Period-by-period inventory dynamics.
//!
//! One call to [`SimState::step`] executes, in order:
//!
//! 1. deliver pipeline shipments due this period (`arrived`);
//! 2. collect demand: customer demand at retail nodes, downstream orders of
//!    this period at every other node;
//! 3. ship `min(on_hand + arrived, backlog + demand)`;
//! 4. update on-hand (clipped to storage capacity; overflow is lost) and backlog;
//! 5. place orders: node 0 buys from the unlimited source, other nodes' orders
//!    were queued at their upstream in step 2 and travel once shipped;
//! 6. compute the reward vector;
//! 7. apply active disruptions (emission tax, cost surge);
//! 8. push orders and demand into the histories and advance the clock.
//!
//! Each order draws one lead time when it is placed. Goods shipped against it
//! arrive that many periods after the shipment leaves the supplier.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use super::config::Network;
use super::disruption::{active_effects, emission_tax, Disruption};
use super::reward::RewardVector;
use crate::error::EnvError;
use crate::grid::Grid;
use crate::rng::SimRng;

/// Goods in transit to `node`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shipment {
    pub node: usize,
    pub product: usize,
    pub quantity: u64,
    pub arrival: usize,
}

/// An order not yet (fully) shipped by the upstream node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenOrder {
    pub from: usize,
    pub remaining: u64,
    pub lead_time: usize,
}

/// Orders and transport modes for every node and product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSet {
    pub orders: Grid<u32>,
    pub modes: Grid<usize>,
}

impl ActionSet {
    pub fn zeros(net: &Network) -> Self {
        Self {
            orders: Grid::filled(net.n_nodes(), net.n_products(), 0),
            modes: Grid::filled(net.n_nodes(), net.n_products(), 0),
        }
    }

    pub fn uniform(net: &Network, order: u32, mode: usize) -> Self {
        Self {
            orders: Grid::filled(net.n_nodes(), net.n_products(), order),
            modes: Grid::filled(net.n_nodes(), net.n_products(), mode),
        }
    }

    pub fn validate(&self, net: &Network) -> Result<(), EnvError> {
        let expected = (net.n_nodes(), net.n_products());
        for shape in [self.orders.shape(), self.modes.shape()] {
            if shape != expected {
                return Err(EnvError::ActionShape {
                    found: shape,
                    expected,
                });
            }
        }
        let n_modes = net.n_modes();
        for (m, p, &order) in self.orders.cells() {
            let max = net.config().nodes[m].reorder_max;
            if order > max {
                return Err(EnvError::OrderOutOfBounds {
                    node: m,
                    product: p,
                    order,
                    max,
                });
            }
            let mode = self.modes[(m, p)];
            if mode >= n_modes {
                return Err(EnvError::ModeOutOfBounds {
                    node: m,
                    product: p,
                    mode,
                    n_modes,
                });
            }
        }
        Ok(())
    }
}

/// Per node/product outcome of one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub node: usize,
    pub product: usize,
    pub order: u32,
    pub mode: usize,
    /// Sampled lead time of this period's order (0 when nothing was ordered).
    pub lead_time: usize,
    pub arrived: u64,
    pub demand: u64,
    pub shipped: u64,
    pub on_hand: u64,
    pub backlog: u64,
    /// Stock lost to the storage cap.
    pub overflow: u64,
    pub revenue: f64,
    pub reorder_cost: f64,
    pub transport_cost: f64,
    pub holding_cost: f64,
    pub backlog_cost: f64,
    pub emissions: f64,
}

/// Everything that happened in one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub t: usize,
    pub cells: Vec<CellRecord>,
    pub emission_tax: f64,
    pub disruption_active: bool,
    pub reward: RewardVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub t: usize,
    pub on_hand: Grid<u64>,
    pub backlog: Grid<u64>,
    pub pipeline: Vec<Shipment>,
    /// FIFO of open orders held by each supplier node, per product.
    pub open_orders: Grid<VecDeque<OpenOrder>>,
    /// Most recent first; always `history_window` entries.
    pub order_history: VecDeque<Grid<u64>>,
    pub demand_history: VecDeque<Grid<u64>>,
}

/// Poisson draw that treats a zero rate as the point mass at zero.
pub(crate) fn poisson(rate: f64, rng: &mut SimRng) -> u64 {
    if rate <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(rate).expect("positive finite rate");
    dist.sample(rng) as u64
}

/// Customer demand for period `t`, one row per node (rows of non-retail nodes
/// are zero). Cells are sampled independently in row-major order.
pub fn sample_demand(net: &Network, t: usize, rng: &mut SimRng) -> Grid<u64> {
    let cfg = net.config();
    let rate = cfg.demand_rate(t);
    let spikes = cfg.demand.spike_probability > 0.0;
    let mut out = Grid::filled(net.n_nodes(), net.n_products(), 0u64);
    for m in 0..net.n_nodes() {
        if !net.is_retail(m) {
            continue;
        }
        for p in 0..net.n_products() {
            let mut lambda = rate;
            if spikes && rng.random::<f64>() < cfg.demand.spike_probability {
                lambda *= cfg.demand.spike_multiplier;
            }
            out[(m, p)] = poisson(lambda, rng);
        }
    }
    out
}

/// Lead time for an order shipped with `mode`: `max(1, round(multiplier * X))`
/// with `X ~ Poisson(lead_time_rate)`.
pub fn sample_lead_time(net: &Network, mode: usize, rng: &mut SimRng) -> usize {
    let cfg = net.config();
    let draw = poisson(cfg.lead_time_rate, rng) as f64;
    let scaled = (cfg.transport_modes[mode].lead_time_multiplier * draw).round();
    (scaled as usize).max(1)
}

impl SimState {
    /// Initial state: configured on-hand stock, no backlog, empty pipeline and
    /// zero-padded histories. The initial state is deterministic, so `_rng` is
    /// not drawn from.
    pub fn reset(net: &Network, _rng: &mut SimRng) -> Self {
        let (m, p) = (net.n_nodes(), net.n_products());
        let zeros = Grid::filled(m, p, 0u64);
        let window = net.config().history_window;
        Self {
            t: 0,
            on_hand: Grid::from_fn(m, p, |node, _| u64::from(net.initial_on_hand(node))),
            backlog: zeros.clone(),
            pipeline: Vec::new(),
            open_orders: Grid::filled(m, p, VecDeque::new()),
            order_history: std::iter::repeat_n(zeros.clone(), window).collect(),
            demand_history: std::iter::repeat_n(zeros, window).collect(),
        }
    }

    /// Pipeline inventory `V`: quantity in transit to each node/product.
    pub fn pipeline_inventory(&self) -> Grid<u64> {
        let mut v = Grid::filled(self.on_hand.rows(), self.on_hand.cols(), 0u64);
        for s in &self.pipeline {
            v[(s.node, s.product)] += s.quantity;
        }
        v
    }

    /// Fills `out` with the normalized observation.
    ///
    /// Layout (each block flattened row-major, node-major then product):
    /// on-hand, pipeline, backlog, orders `t-1 ..= t-n`, demand `t-1 ..= t-n`.
    /// On-hand and pipeline are divided by storage capacity, orders by
    /// `reorder_max`, demand and backlog by the node's demand/backlog scale;
    /// everything is clamped to `[0, 1]`.
    pub fn observe_into(&self, net: &Network, out: &mut Vec<f64>) {
        out.clear();
        out.reserve(net.observation_len());
        let nodes = &net.config().nodes;
        let products = net.n_products();
        let push_block = |out: &mut Vec<f64>, g: &Grid<u64>, scale: &dyn Fn(usize) -> f64| {
            for m in 0..nodes.len() {
                let s = scale(m);
                for p in 0..products {
                    out.push((g[(m, p)] as f64 / s).clamp(0.0, 1.0));
                }
            }
        };
        let storage = |m: usize| f64::from(nodes[m].storage_max.max(1));
        let reorder = |m: usize| f64::from(nodes[m].reorder_max.max(1));
        let demand = |m: usize| net.demand_scale(m);
        let backlog = |m: usize| net.backlog_scale(m);

        push_block(out, &self.on_hand, &storage);
        push_block(out, &self.pipeline_inventory(), &storage);
        push_block(out, &self.backlog, &backlog);
        for g in &self.order_history {
            push_block(out, g, &reorder);
        }
        for g in &self.demand_history {
            push_block(out, g, &demand);
        }
    }

    pub fn observe(&self, net: &Network) -> Vec<f64> {
        let mut out = Vec::new();
        self.observe_into(net, &mut out);
        out
    }

    /// Advances one period. Rejects out-of-bounds actions and steps past the
    /// horizon without touching the state.
    pub fn step(
        &mut self,
        net: &Network,
        actions: &ActionSet,
        disruptions: &[Disruption],
        rng: &mut SimRng,
    ) -> Result<Transition, EnvError> {
        let cfg = net.config();
        if self.t > cfg.horizon {
            return Err(EnvError::EpisodeOver {
                t: self.t,
                horizon: cfg.horizon,
            });
        }
        actions.validate(net)?;
        for d in disruptions {
            d.validate()?;
        }
        let customer = sample_demand(net, self.t, rng);
        Ok(self.advance(net, actions, customer, disruptions, rng))
    }

    /// Like [`step`](Self::step) but with customer demand supplied by the
    /// caller instead of sampled. Rows of non-retail nodes are ignored.
    pub fn step_with_demand(
        &mut self,
        net: &Network,
        actions: &ActionSet,
        customer: Grid<u64>,
        disruptions: &[Disruption],
        rng: &mut SimRng,
    ) -> Result<Transition, EnvError> {
        let cfg = net.config();
        if self.t > cfg.horizon {
            return Err(EnvError::EpisodeOver {
                t: self.t,
                horizon: cfg.horizon,
            });
        }
        actions.validate(net)?;
        for d in disruptions {
            d.validate()?;
        }
        let expected = (net.n_nodes(), net.n_products());
        if customer.shape() != expected {
            return Err(EnvError::ActionShape {
                found: customer.shape(),
                expected,
            });
        }
        Ok(self.advance(net, actions, customer, disruptions, rng))
    }

    fn advance(
        &mut self,
        net: &Network,
        actions: &ActionSet,
        customer: Grid<u64>,
        disruptions: &[Disruption],
        rng: &mut SimRng,
    ) -> Transition {
        let cfg = net.config();
        let t = self.t;
        let (n_nodes, n_products) = (net.n_nodes(), net.n_products());

        // (1) deliveries
        let mut arrived = Grid::filled(n_nodes, n_products, 0u64);
        self.pipeline.retain(|s| {
            if s.arrival == t {
                arrived[(s.node, s.product)] += s.quantity;
                false
            } else {
                true
            }
        });

        // (2) one lead-time draw per placed order, in row-major order
        let mut lead = Grid::filled(n_nodes, n_products, 0usize);
        for (m, p, &order) in actions.orders.cells() {
            if order > 0 {
                lead[(m, p)] = sample_lead_time(net, actions.modes[(m, p)], rng);
            }
        }
        let mut demand = Grid::filled(n_nodes, n_products, 0u64);
        for m in 0..n_nodes {
            for p in 0..n_products {
                if net.is_retail(m) {
                    demand[(m, p)] = customer[(m, p)];
                    continue;
                }
                let queue = &mut self.open_orders[(m, p)];
                let mut total = 0;
                for &c in net.downstream(m) {
                    let q = u64::from(actions.orders[(c, p)]);
                    if q > 0 {
                        queue.push_back(OpenOrder {
                            from: c,
                            remaining: q,
                            lead_time: lead[(c, p)],
                        });
                        total += q;
                    }
                }
                demand[(m, p)] = total;
            }
        }

        // (3)-(4) shipping and balance updates
        let mut shipped = Grid::filled(n_nodes, n_products, 0u64);
        let mut overflow = Grid::filled(n_nodes, n_products, 0u64);
        for m in 0..n_nodes {
            let cap = u64::from(cfg.nodes[m].storage_max);
            for p in 0..n_products {
                let available = self.on_hand[(m, p)] + arrived[(m, p)];
                let owed = self.backlog[(m, p)] + demand[(m, p)];
                let s = available.min(owed);
                shipped[(m, p)] = s;
                if !net.is_retail(m) {
                    self.dispatch(m, p, s, t);
                }
                let left = available - s;
                self.on_hand[(m, p)] = left.min(cap);
                overflow[(m, p)] = left - self.on_hand[(m, p)];
                self.backlog[(m, p)] = owed - s;
            }
        }

        // (5) the root buys from the unlimited source
        for p in 0..n_products {
            let q = actions.orders[(0, p)];
            if q > 0 {
                self.pipeline.push(Shipment {
                    node: 0,
                    product: p,
                    quantity: u64::from(q),
                    arrival: t + lead[(0, p)],
                });
            }
        }

        // (6)-(7) reward with disruptions
        let fx = active_effects(disruptions, t);
        let mut cells = Vec::with_capacity(n_nodes * n_products);
        let (mut profit, mut emissions, mut lead_sum) = (0.0, 0.0, 0.0);
        for m in 0..n_nodes {
            let node = &cfg.nodes[m];
            for p in 0..n_products {
                let order = actions.orders[(m, p)];
                let mode = actions.modes[(m, p)];
                let tm = &cfg.transport_modes[mode];
                let o = f64::from(order);
                let revenue = cfg.price[(m, p)] * shipped[(m, p)] as f64;
                let reorder_cost = cfg.reorder_cost[(m, p)] * fx.cost_multiplier * o;
                let transport_cost = cfg.transport_cost[(m, p)]
                    * fx.cost_multiplier
                    * tm.cost_multiplier
                    * node.distance
                    * o;
                let holding_cost = cfg.holding_cost[(m, p)] * self.on_hand[(m, p)] as f64;
                let backlog_cost = cfg.backlog_cost[(m, p)] * self.backlog[(m, p)] as f64;
                let cell_emissions = node.emission_rate * tm.emission_multiplier * node.distance * o;

                profit += revenue - reorder_cost - transport_cost - holding_cost - backlog_cost;
                emissions += cell_emissions;
                lead_sum += lead[(m, p)] as f64;

                cells.push(CellRecord {
                    node: m,
                    product: p,
                    order,
                    mode,
                    lead_time: lead[(m, p)],
                    arrived: arrived[(m, p)],
                    demand: demand[(m, p)],
                    shipped: shipped[(m, p)],
                    on_hand: self.on_hand[(m, p)],
                    backlog: self.backlog[(m, p)],
                    overflow: overflow[(m, p)],
                    revenue,
                    reorder_cost,
                    transport_cost,
                    holding_cost,
                    backlog_cost,
                    emissions: cell_emissions,
                });
            }
        }
        let tax = if fx.taxes > 0 {
            emission_tax(disruptions, t, emissions)
        } else {
            0.0
        };
        profit -= tax;
        let reward = RewardVector::new(profit, -emissions, -lead_sum);

        // (8) histories and clock
        let orders_u64 = Grid::from_fn(n_nodes, n_products, |m, p| {
            u64::from(actions.orders[(m, p)])
        });
        if cfg.history_window > 0 {
            self.order_history.pop_back();
            self.order_history.push_front(orders_u64);
            self.demand_history.pop_back();
            self.demand_history.push_front(demand);
        }
        self.t += 1;

        Transition {
            t,
            cells,
            emission_tax: tax,
            disruption_active: fx.any,
            reward,
        }
    }

    /// Ships `quantity` of product `p` from supplier `m` against its open
    /// orders, oldest first.
    fn dispatch(&mut self, m: usize, p: usize, mut quantity: u64, t: usize) {
        let queue = &mut self.open_orders[(m, p)];
        while quantity > 0 {
            let Some(front) = queue.front_mut() else {
                break;
            };
            let q = front.remaining.min(quantity);
            self.pipeline.push(Shipment {
                node: front.from,
                product: p,
                quantity: q,
                arrival: t + front.lead_time,
            });
            front.remaining -= q;
            quantity -= q;
            if front.remaining == 0 {
                queue.pop_front();
            }
        }
        debug_assert_eq!(quantity, 0, "shipped more than was owed");
    }
}
