//! `morse train`: evolve an archive, checkpointing after every generation.

use std::path::{Path, PathBuf};

use morse::env::NetworkConfig;
use morse::moea::{run_nsga2, write_metrics_csv, Convergence, EvoParams, EvolveState, TrainingSetup};
use morse::risk::FitnessMode;
use morse::scenario::{build_configuration, with_demand_spikes, ConfigId, DEFAULT_SPIKE_MULTIPLIER};
use morse::store::{write_atomic, Checkpoint, ParetoArchive};

use crate::args::TrainArgs;
use crate::error::CliError;
use crate::manifest::{inspect, read_bytes, sha256_hex, Existing, RunManifest};
use crate::output_root;

pub const ARCHIVE_FILE: &str = "archive.json";
pub const GENERATIONS_FILE: &str = "generations.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainStatus {
    Completed,
    Resumed,
    /// `--resume` on a run that had already finished.
    AlreadyComplete,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub dir: PathBuf,
    pub status: TrainStatus,
}

pub fn default_dir(seed: u64) -> PathBuf {
    output_root().join(format!("train-seed{seed}"))
}

pub fn train(args: &TrainArgs) -> Result<TrainOutcome, CliError> {
    let dir = args.output.out.clone().unwrap_or_else(|| default_dir(args.seed));
    let status = match (inspect(&dir)?, args.resume) {
        (Existing::Complete(m), true) => {
            m.verify(&dir)?;
            TrainStatus::AlreadyComplete
        }
        (Existing::Complete(_), false) => return Err(CliError::AlreadyComplete(dir)),
        (Existing::Incomplete(m), true) => {
            resume(&dir, m, args.quiet)?;
            TrainStatus::Resumed
        }
        (Existing::Incomplete(_), false) => return Err(CliError::Incomplete(dir)),
        (Existing::Empty, true) => {
            return Err(CliError::Usage(format!("nothing to resume in {}", dir.display())));
        }
        (Existing::Empty, false) => {
            fresh(&dir, args)?;
            TrainStatus::Completed
        }
    };
    Ok(TrainOutcome { dir, status })
}

fn load_config(args: &TrainArgs) -> Result<(NetworkConfig, String, Option<PathBuf>), CliError> {
    let (cfg, source, path) = match (&args.config, &args.preset) {
        (Some(path), _) => {
            let bytes = read_bytes(path)?;
            let text = String::from_utf8_lossy(&bytes);
            (NetworkConfig::from_json(&text)?, path.display().to_string(), Some(path.clone()))
        }
        (None, preset) => {
            let id: ConfigId = preset.as_deref().unwrap_or("A").parse()?;
            (build_configuration(id), format!("preset:{id}"), None)
        }
    };
    let cfg = match args.spike_probability {
        Some(p) => with_demand_spikes(cfg, p, args.spike_multiplier.unwrap_or(DEFAULT_SPIKE_MULTIPLIER)),
        None => cfg,
    };
    Ok((cfg, source, path))
}

fn fresh(dir: &Path, args: &TrainArgs) -> Result<(), CliError> {
    let (config, source, source_path) = load_config(args)?;
    let mode = match args.risk_alpha {
        Some(alpha) => FitnessMode::Cvar { alpha },
        None => FitnessMode::Mean,
    };
    let params = EvoParams {
        population: args.population,
        generations: args.generations,
        episodes: args.episodes,
        horizon: args.horizon,
        hidden: args.hidden.clone(),
        convergence: args.convergence_epsilon.map(|epsilon| Convergence {
            epsilon,
            window: args.convergence_window,
        }),
        ..EvoParams::default()
    };
    let setup = TrainingSetup { config, params, mode };
    // surface configuration and parameter errors before touching the disk
    setup.params.validate()?;
    setup.evaluator()?;

    let mut manifest = RunManifest::new("train", args.seed);
    manifest.evo_params = Some(setup.params.clone());
    manifest.fitness_mode = Some(mode);
    if let Some(p) = source_path {
        manifest.add_input(&p)?;
    }
    let config_bytes = format!("{}\n", setup.config.to_json_pretty());
    manifest.store_config(dir, source, CONFIG_FILE, config_bytes.as_bytes())?;
    manifest.save(dir)?;
    run(dir, manifest, &setup, args.seed, None, args.quiet)
}

fn resume(dir: &Path, manifest: RunManifest, quiet: bool) -> Result<(), CliError> {
    let stored = manifest
        .configs
        .first()
        .ok_or_else(|| CliError::Usage("manifest records no configuration".into()))?;
    let bytes = read_bytes(&dir.join(&stored.stored))?;
    if sha256_hex(&bytes) != stored.sha256 {
        return Err(CliError::HashMismatch(dir.join(&stored.stored)));
    }
    let config = NetworkConfig::from_json(&String::from_utf8_lossy(&bytes))?;
    let (params, mode) = match (&manifest.evo_params, manifest.fitness_mode) {
        (Some(p), Some(m)) => (p.clone(), m),
        _ => return Err(CliError::Usage("manifest lacks training settings".into())),
    };
    let seed = manifest.seed;
    let ck_path = dir.join(CHECKPOINT_FILE);
    let state = if ck_path.exists() {
        let ck = Checkpoint::load(&ck_path)?;
        if ck.seed != seed || ck.evo_params != params || ck.fitness_mode != mode {
            return Err(CliError::Usage("checkpoint does not belong to this run".into()));
        }
        Some(ck.state)
    } else {
        None
    };
    let setup = TrainingSetup { config, params, mode };
    run(dir, manifest, &setup, seed, state, quiet)
}

fn run(
    dir: &Path,
    mut manifest: RunManifest,
    setup: &TrainingSetup,
    seed: u64,
    resume: Option<EvolveState>,
    quiet: bool,
) -> Result<(), CliError> {
    let evaluator = setup.evaluator()?;
    let arch = setup.architecture()?;
    let ck_path = dir.join(CHECKPOINT_FILE);
    let mut save_error = None;
    let state = run_nsga2(&evaluator, &arch, &setup.params, seed, resume, |s| {
        if !quiet {
            if let Some(m) = s.metrics.last() {
                eprintln!(
                    "generation {:>4}  front {:>3}  hypervolume {:.6e}",
                    m.generation,
                    m.front_sizes.first().copied().unwrap_or(0),
                    m.hypervolume
                );
            }
        }
        if save_error.is_none() {
            save_error = Checkpoint::new(seed, setup.mode, &setup.params, s).save(&ck_path).err();
        }
    })?;
    if let Some(e) = save_error {
        return Err(e.into());
    }
    let archive = ParetoArchive::from_state(setup, seed, &state);
    archive.save(&dir.join(ARCHIVE_FILE))?;
    let mut csv = Vec::new();
    write_metrics_csv(&state.metrics, &mut csv).map_err(|e| CliError::Csv(e.to_string()))?;
    write_atomic(&dir.join(GENERATIONS_FILE), &csv)?;
    manifest.complete(
        dir,
        &[ARCHIVE_FILE.into(), GENERATIONS_FILE.into(), CHECKPOINT_FILE.into()],
    )?;
    if !quiet {
        eprintln!("{} policies written to {}", archive.len(), dir.join(ARCHIVE_FILE).display());
    }
    Ok(())
}
