//! `morse evaluate`: return distributions and risk estimates for archived
//! policies.

use std::path::PathBuf;
use std::sync::Arc;

use morse::risk::{run_episodes, EvalSettings, FitnessMode, RiskEstimate};
use morse::store::{write_atomic, ParetoArchive};
use serde::{Deserialize, Serialize};

use crate::args::EvaluateArgs;
use crate::error::CliError;
use crate::manifest::{require_fresh, RunManifest};
use crate::output_root;

pub const RISK_FILE: &str = "risk.json";
pub const RISK_SCHEMA_VERSION: u32 = 1;

pub fn returns_file(id: usize) -> String {
    format!("returns_policy{id}.csv")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRisk {
    pub id: usize,
    /// Fitness recorded in the archive at training time.
    pub fitness: Vec<f64>,
    pub returns_csv: String,
    pub risk: RiskEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub schema_version: u32,
    pub archive: String,
    pub archive_sha256: String,
    pub episodes: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Last simulated period of each episode.
    pub horizon: usize,
    pub policies: Vec<PolicyRisk>,
}

pub fn evaluate(args: &EvaluateArgs) -> Result<PathBuf, CliError> {
    let dir = args
        .output
        .out
        .clone()
        .unwrap_or_else(|| output_root().join(format!("evaluate-seed{}", args.seed)));
    require_fresh(&dir)?;
    FitnessMode::Cvar { alpha: args.risk_alpha }.validate()?;
    if args.episodes == 0 {
        return Err(CliError::Usage("--episodes must be at least 1".into()));
    }

    let mut manifest = RunManifest::new("evaluate", args.seed);
    let bytes = manifest.add_input(&args.archive)?;
    let archive = ParetoArchive::from_json(&String::from_utf8_lossy(&bytes))?;
    let ids: Vec<usize> = if args.policies.is_empty() {
        archive.policies.iter().map(|p| p.id).collect()
    } else {
        args.policies.clone()
    };
    if let Some(&missing) = ids.iter().find(|&&id| archive.policy(id).is_none()) {
        return Err(CliError::UnknownPolicy(missing));
    }
    let net = archive.network()?;
    let horizon = args.horizon.or(archive.evo_params.horizon).unwrap_or(net.horizon());
    let net = Arc::new(net.with_horizon(horizon));
    let settings = EvalSettings::for_network(&net, args.episodes);

    manifest.parameters = serde_json::json!({
        "policies": ids,
        "episodes": args.episodes,
        "alpha": args.risk_alpha,
        "horizon": horizon,
    });
    let config_bytes = format!("{}\n", archive.config.to_json_pretty());
    manifest.store_config(&dir, format!("archive:{}", args.archive.display()), "config.json", config_bytes.as_bytes())?;
    manifest.save(&dir)?;

    let mut outputs = Vec::new();
    let mut policies = Vec::new();
    for &id in &ids {
        let genome = archive.genome(id)?;
        let returns = run_episodes(&net, &genome, &settings, args.seed)?;
        let mut csv = Vec::new();
        returns.write_csv(&mut csv).map_err(|e| CliError::Csv(e.to_string()))?;
        let name = returns_file(id);
        write_atomic(&dir.join(&name), &csv)?;
        policies.push(PolicyRisk {
            id,
            fitness: archive.policy(id).expect("checked above").fitness.clone(),
            returns_csv: name.clone(),
            risk: RiskEstimate::from_returns(&returns, args.risk_alpha),
        });
        outputs.push(name);
    }
    let report = RiskReport {
        schema_version: RISK_SCHEMA_VERSION,
        archive: args.archive.display().to_string(),
        archive_sha256: manifest.inputs[0].sha256.clone(),
        episodes: args.episodes,
        alpha: args.risk_alpha,
        seed: args.seed,
        horizon,
        policies,
    };
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    write_atomic(&dir.join(RISK_FILE), text.as_bytes())?;
    outputs.push(RISK_FILE.into());
    manifest.complete(&dir, &outputs)?;
    Ok(dir)
}
