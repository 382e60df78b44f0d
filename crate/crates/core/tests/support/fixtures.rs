//! Hand-built archives shared by integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use morse::env::{Network, NetworkConfig};
use morse::policy::{Architecture, Genome};
use morse::risk::{evaluate_mean, EvalSettings};
use morse::scenario::{build_configuration, ConfigId};
use morse::store::ParetoArchive;

pub const TRUCK: usize = 0;
pub const RAIL: usize = 1;

/// Every cell orders `fraction` of its limit by `mode`.
pub fn constant_policy(net: &Network, hidden: &[usize], fraction: f64, mode: usize) -> Genome {
    let arch = Architecture::for_network(net, hidden);
    let cells = net.n_cells();
    Genome::constant(&arch, &vec![fraction; cells], &vec![mode; cells]).unwrap()
}

/// Policy 0 keeps up with demand by truck; policy 1 under-orders by rail,
/// trading profit for far lower emissions. Fitness is the mean over a few
/// episodes of the configuration's own horizon.
pub fn two_policy_archive(cfg: NetworkConfig) -> ParetoArchive {
    let net = Arc::new(Network::new(cfg.clone()).unwrap());
    let hidden = [8];
    let profit_leaning = constant_policy(&net, &hidden, 0.225, TRUCK);
    let emission_leaning = constant_policy(&net, &hidden, 0.1, RAIL);
    let settings = EvalSettings::for_network(&net, 8);
    let members = [profit_leaning, emission_leaning]
        .into_iter()
        .map(|g| {
            let f = evaluate_mean(&net, &g, &settings, 77).unwrap();
            (g, f)
        })
        .collect();
    ParetoArchive::from_members(cfg, members).unwrap()
}

pub fn config(id: ConfigId) -> NetworkConfig {
    build_configuration(id)
}
