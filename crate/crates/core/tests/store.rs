use morse::moea::{evolve, run_nsga2, EvoParams, TrainingSetup};
use morse::risk::FitnessMode;
use morse::scenario::{build_configuration, ConfigId};
use morse::store::{Checkpoint, ParetoArchive};
use morse::StoreError;

fn tiny_params() -> EvoParams {
    EvoParams {
        population: 6,
        generations: 2,
        episodes: Some(2),
        horizon: Some(8),
        hidden: vec![6],
        ..Default::default()
    }
}

fn tmp(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("morse-store-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn evolve_is_byte_reproducible_and_round_trips() {
    let cfg = build_configuration(ConfigId::A);
    let (a, metrics) = evolve(&cfg, &tiny_params(), FitnessMode::Mean, 17).unwrap();
    let (b, _) = evolve(&cfg, &tiny_params(), FitnessMode::Mean, 17).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(metrics.len(), 3);
    assert_eq!(a.generations_run, 2);
    assert!(!a.is_empty());

    let dir = tmp("roundtrip");
    let path = dir.join("archive.json");
    a.save(&path).unwrap();
    let loaded = ParetoArchive::load(&path).unwrap();
    assert_eq!(loaded, a);
    for p in &a.policies {
        let g = loaded.genome(p.id).unwrap();
        assert!(g.params().iter().zip(&p.params).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    assert_eq!(std::fs::read_to_string(&path).unwrap(), a.to_json());
}

#[test]
fn archive_members_are_mutually_non_dominated_and_unique() {
    let cfg = build_configuration(ConfigId::B);
    let (a, _) = evolve(&cfg, &tiny_params(), FitnessMode::Mean, 3).unwrap();
    for x in &a.policies {
        for y in &a.policies {
            assert!(!morse::moea::dominates(&x.fitness, &y.fitness));
            if x.id != y.id {
                assert_ne!(x.fitness, y.fitness);
            }
        }
    }
    let ids: Vec<usize> = a.policies.iter().map(|p| p.id).collect();
    assert_eq!(ids, (0..a.len()).collect::<Vec<_>>());
}

#[test]
fn cvar_archive_records_alpha_and_risk() {
    let cfg = build_configuration(ConfigId::B);
    let params = EvoParams { generations: 0, episodes: Some(10), ..tiny_params() };
    let (a, _) = evolve(&cfg, &params, FitnessMode::Cvar { alpha: 0.9 }, 1).unwrap();
    assert!(a.has_risk());
    assert!(a.to_json().contains("\"alpha\": 0.9"));
    for p in &a.policies {
        let r = p.risk.as_ref().unwrap();
        assert_eq!(r.cvar, p.fitness);
        assert!(r.cvar.iter().zip(&r.var).all(|(c, v)| c <= v));
    }
}

#[test]
fn schema_and_lookup_errors() {
    let cfg = build_configuration(ConfigId::B);
    let params = EvoParams { generations: 0, ..tiny_params() };
    let (a, _) = evolve(&cfg, &params, FitnessMode::Mean, 1).unwrap();
    assert!(matches!(a.genome(999), Err(StoreError::Invalid(_))));

    let bumped = a.to_json().replacen("\"schema_version\": 1", "\"schema_version\": 99", 1);
    assert!(matches!(ParetoArchive::from_json(&bumped), Err(StoreError::SchemaVersion { found: 99, .. })));
    assert!(matches!(ParetoArchive::from_json("{"), Err(StoreError::Json { .. })));
    assert!(matches!(
        ParetoArchive::load(std::path::Path::new("/nonexistent/archive.json")),
        Err(StoreError::Io { .. })
    ));
}

#[test]
fn checkpoint_round_trip_resumes_identically() {
    let setup = TrainingSetup {
        config: build_configuration(ConfigId::A),
        params: EvoParams { generations: 3, ..tiny_params() },
        mode: FitnessMode::Mean,
    };
    let evaluator = setup.evaluator().unwrap();
    let arch = setup.architecture().unwrap();
    let dir = tmp("checkpoint");
    let path = dir.join("checkpoint.json");
    let full = run_nsga2(&evaluator, &arch, &setup.params, 5, None, |s| {
        if s.population.generation == 1 {
            Checkpoint::new(5, setup.mode, &setup.params, s).save(&path).unwrap();
        }
    })
    .unwrap();
    let ck = Checkpoint::load(&path).unwrap();
    assert_eq!(ck.state.population.generation, 1);
    let resumed = run_nsga2(&evaluator, &arch, &setup.params, 5, Some(ck.state), |_| {}).unwrap();
    assert_eq!(resumed, full);
    assert_eq!(
        ParetoArchive::from_state(&setup, 5, &resumed).to_json(),
        ParetoArchive::from_state(&setup, 5, &full).to_json()
    );
}
