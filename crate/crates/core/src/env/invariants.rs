//! Transition checks that recompute the balance equations from the outside.
//!
//! These use only the state before and after a step plus the emitted
//! transition record, so they can audit any run (tests, replays, services).

use super::{Network, SimState, Transition};

/// Checks a single transition `before -> after` against every balance,
/// availability, capacity and pipeline invariant. Returns a description of the
/// first violation found.
pub fn check_transition(
    net: &Network,
    before: &SimState,
    after: &SimState,
    tr: &Transition,
) -> Result<(), String> {
    let cfg = net.config();
    let (n_nodes, n_products) = (net.n_nodes(), net.n_products());
    if after.t != before.t + 1 || tr.t != before.t {
        return Err(format!(
            "clock: before {} after {} record {}",
            before.t, after.t, tr.t
        ));
    }
    if tr.cells.len() != n_nodes * n_products {
        return Err("record does not cover every node/product".into());
    }

    let v_before = before.pipeline_inventory();
    let v_after = after.pipeline_inventory();

    for c in &tr.cells {
        let (m, p) = (c.node, c.product);
        let i0 = before.on_hand[(m, p)];
        let b0 = before.backlog[(m, p)];
        let cap = u64::from(cfg.nodes[m].storage_max);

        if c.shipped > i0 + c.arrived {
            return Err(format!("({m},{p}) shipped {} > available {}", c.shipped, i0 + c.arrived));
        }
        if c.shipped > b0 + c.demand {
            return Err(format!("({m},{p}) shipped {} > owed {}", c.shipped, b0 + c.demand));
        }
        // i_new - i_old = a - s before clipping
        if after.on_hand[(m, p)] + c.overflow + c.shipped != i0 + c.arrived {
            return Err(format!("({m},{p}) on-hand balance broken"));
        }
        if after.backlog[(m, p)] + c.shipped != b0 + c.demand {
            return Err(format!("({m},{p}) backlog balance broken"));
        }
        if after.on_hand[(m, p)] > cap {
            return Err(format!("({m},{p}) on-hand above capacity"));
        }
        if c.overflow > 0 && after.on_hand[(m, p)] != cap {
            return Err(format!("({m},{p}) overflow without a full store"));
        }
        if c.on_hand != after.on_hand[(m, p)] || c.backlog != after.backlog[(m, p)] {
            return Err(format!("({m},{p}) record disagrees with state"));
        }
        if u64::from(c.order) > u64::from(cfg.nodes[m].reorder_max) {
            return Err(format!("({m},{p}) order above reorder_max"));
        }
        if c.arrived > v_before[(m, p)] {
            return Err(format!("({m},{p}) delivered more than was in transit"));
        }
        if c.order == 0 && c.emissions != 0.0 {
            return Err(format!("({m},{p}) emissions without an order"));
        }
        if (c.order == 0) != (c.lead_time == 0) {
            return Err(format!("({m},{p}) lead time must accompany orders"));
        }
        if !net.is_retail(m) {
            let open: u64 = after.open_orders[(m, p)].iter().map(|o| o.remaining).sum();
            if open != after.backlog[(m, p)] {
                return Err(format!("({m},{p}) backlog {} != open orders {open}", after.backlog[(m, p)]));
            }
            let expected: u64 = net
                .downstream(m)
                .iter()
                .map(|&d| u64::from(tr.cells[d * n_products + p].order))
                .sum();
            if c.demand != expected {
                return Err(format!("({m},{p}) demand {} != downstream orders {expected}", c.demand));
            }
        }
    }

    // Pipeline accounting: V_after = V_before - arrived + inflow, with inflow
    // equal to the root's orders or the upstream shipments.
    for p in 0..n_products {
        let mut inflow = vec![0i128; n_nodes];
        for (m, slot) in inflow.iter_mut().enumerate() {
            let c = &tr.cells[m * n_products + p];
            *slot = i128::from(v_after[(m, p)]) - i128::from(v_before[(m, p)])
                + i128::from(c.arrived);
            if *slot < 0 {
                return Err(format!("({m},{p}) pipeline lost goods"));
            }
        }
        if inflow[0] != i128::from(tr.cells[p].order) {
            return Err(format!("root product {p}: inflow {} != order {}", inflow[0], tr.cells[p].order));
        }
        for u in 0..n_nodes {
            if net.is_retail(u) {
                continue;
            }
            let received: i128 = net.downstream(u).iter().map(|&d| inflow[d]).sum();
            let shipped = i128::from(tr.cells[u * n_products + p].shipped);
            if received != shipped {
                return Err(format!("node {u} product {p}: shipped {shipped} but downstream received {received}"));
            }
        }
    }

    for s in &after.pipeline {
        if s.arrival <= before.t || s.quantity == 0 {
            return Err(format!("pipeline entry {s:?} is stale or empty"));
        }
    }
    if after.order_history.len() != cfg.history_window
        || after.demand_history.len() != cfg.history_window
    {
        return Err("history length drifted".into());
    }
    let emissions: f64 = tr.cells.iter().map(|c| c.emissions).sum();
    if (tr.reward.emissions() - emissions).abs() > 1e-9 * emissions.abs().max(1.0) {
        return Err("emission reward disagrees with cell records".into());
    }
    let lead: usize = tr.cells.iter().map(|c| c.lead_time).sum();
    if tr.reward.lead_time() != lead as f64 {
        return Err("lead-time reward disagrees with cell records".into());
    }
    Ok(())
}
