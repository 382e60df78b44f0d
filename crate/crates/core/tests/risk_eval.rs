mod support {
    pub mod fixtures;
}

use std::sync::Arc;

use morse::env::{Network, NetworkConfig};
use morse::policy::{Architecture, Genome};
use morse::risk::*;
use morse::rng::stream;
use morse::scenario::ConfigId;
use support::fixtures::{config, constant_policy, TRUCK};

fn net(id: ConfigId) -> Arc<Network> {
    Arc::new(Network::new(config(id)).unwrap())
}

fn random_policy(net: &Network, seed: u64) -> Genome {
    Genome::init(&Architecture::for_network(net, &[16]), &mut stream(seed, &[]))
}

#[test]
fn mean_fitness_matches_independent_summation() {
    let net = net(ConfigId::A);
    let g = random_policy(&net, 1);
    let settings = EvalSettings::for_network(&net, 7);
    let mean = evaluate_mean(&net, &g, &settings, 42).unwrap();
    let mut oracle = [0.0; 3];
    for i in 0..7 {
        let r = rollout(&net, &g, net.horizon(), net.config().discount, episode_seed(42, i)).unwrap();
        for j in 0..3 {
            oracle[j] += r[j];
        }
    }
    for j in 0..3 {
        assert_eq!(mean[j], oracle[j] / 7.0);
    }
}

#[test]
fn single_episode_mean_is_that_episode() {
    let net = net(ConfigId::B);
    let g = random_policy(&net, 2);
    let settings = EvalSettings::for_network(&net, 1);
    let er = run_episodes(&net, &g, &settings, 9).unwrap();
    assert_eq!(evaluate_mean(&net, &g, &settings, 9).unwrap(), er.returns[0].to_vec());
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let net = net(ConfigId::C);
    let g = random_policy(&net, 3);
    let settings = EvalSettings::for_network(&net, 12);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_episodes(&net, &g, &settings, 5).unwrap())
    };
    assert_eq!(run(1), run(4));
}

/// Zero demand and zero lead-time rate with a constant policy: every
/// episode follows the same path.
fn deterministic_config() -> NetworkConfig {
    let mut cfg = config(ConfigId::B);
    cfg.demand.base_rate = 0.0;
    cfg.lead_time_rate = 0.0;
    cfg
}

#[test]
fn deterministic_environment_gives_identical_rows() {
    let net = Arc::new(Network::new(deterministic_config()).unwrap());
    let g = constant_policy(&net, &[8], 0.25, TRUCK);
    let settings = EvalSettings::for_network(&net, 6);
    let er = run_episodes(&net, &g, &settings, 1).unwrap();
    assert!(er.returns.iter().all(|r| *r == er.returns[0]));
    let (cvar, est) = evaluate_cvar(&net, &g, &settings, 0.9, 1).unwrap();
    for j in 0..3 {
        // summing six copies and dividing is exact only up to rounding
        approx::assert_relative_eq!(er.mean()[j], er.returns[0][j], max_relative = 1e-12);
        approx::assert_relative_eq!(cvar[j], est.mean[j], max_relative = 1e-12);
        assert_eq!(cvar[j], er.returns[0][j]);
    }
}

#[test]
fn tail_of_ten_at_point_nine_is_the_minimum() {
    let net = net(ConfigId::A);
    let g = random_policy(&net, 4);
    let settings = EvalSettings::for_network(&net, 10);
    let er = run_episodes(&net, &g, &settings, 3).unwrap();
    let (cvar, est) = evaluate_cvar(&net, &g, &settings, 0.9, 3).unwrap();
    for j in 0..3 {
        let min = er.returns.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
        assert_eq!(cvar[j], min);
        assert!(est.cvar[j] <= est.var[j]);
        assert!(est.cvar[j] <= est.mean[j]);
    }
    assert_eq!(est.samples, 10);
}

#[test]
fn rollout_reports_shape_errors() {
    let net = net(ConfigId::A);
    let wrong = Genome::zeros(&Architecture::new(3, vec![4], 6, 3));
    assert!(matches!(
        rollout(&net, &wrong, 5, 1.0, 0),
        Err(morse::EvalError::Policy(_))
    ));
    let g = random_policy(&net, 5);
    let bad = EvalSettings { episodes: 0, ..EvalSettings::for_network(&net, 1) };
    assert!(run_episodes(&net, &g, &bad, 0).is_err());
    assert!(evaluate_cvar(&net, &g, &EvalSettings::for_network(&net, 2), 1.5, 0).is_err());
}

#[test]
fn horizon_override_changes_episode_length() {
    let net = Arc::new(Network::new(deterministic_config()).unwrap());
    let g = constant_policy(&net, &[8], 0.25, TRUCK);
    let short = rollout(&net, &g, 4, 1.0, 0).unwrap();
    let long = rollout(&net, &g, 9, 1.0, 0).unwrap();
    // 5 and 10 orders per cell, 6 cells, lead time at least 1 each
    assert!(short[2] <= -30.0 && long[2] <= -60.0);
    assert!(long[1] < short[1]);
}

#[test]
fn distribution_csv_has_one_row_per_episode() {
    let net = net(ConfigId::B);
    let g = random_policy(&net, 6);
    let er = run_episodes(&net, &g, &EvalSettings::for_network(&net, 2), 0).unwrap();
    let mut buf = Vec::new();
    er.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "episode,profit,neg_emissions,neg_lead_time");
    assert_eq!(rows.len(), 1 + 2);
    for (e, row) in rows[1..].iter().enumerate() {
        let fields: Vec<f64> = row.split(',').map(|f| f.parse().unwrap()).collect();
        assert_eq!(fields[0], e as f64);
        assert_eq!(fields[1..], er.returns[e][..]);
    }
}
