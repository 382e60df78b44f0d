//! `morse scenario`: both arms for every replication seed, two trace CSVs per
//! seed and a JSON report.

use std::path::PathBuf;

use morse::env::Disruption;
use morse::scenario::{
    build_configuration, run_replications, summarize, uniform_weights, ArmDelta, ConfigId, ScenarioReport,
    ScenarioSpec, SwitchTrigger,
};
use morse::store::{write_atomic, ParetoArchive};
use serde::{Deserialize, Serialize};

use crate::args::{DisruptionArg, ScenarioArgs};
use crate::error::CliError;
use crate::manifest::{require_fresh, RunManifest};
use crate::output_root;

pub const REPORT_FILE: &str = "report.json";
pub const REPORT_SCHEMA_VERSION: u32 = 1;

pub fn trace_files(seed: u64) -> (String, String) {
    (format!("switching_seed{seed}.csv"), format!("static_seed{seed}.csv"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub seed: u64,
    pub initial_policy: usize,
    pub switch_policy: usize,
    pub switching_csv: String,
    pub static_csv: String,
    pub summary: ScenarioReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRunReport {
    pub schema_version: u32,
    pub configuration: String,
    pub trigger_period: usize,
    pub horizon: usize,
    pub spec: ScenarioSpec,
    /// Switching minus static, averaged over replications.
    pub mean_delta: ArmDelta,
    pub replications: Vec<Replication>,
}

fn mean_delta(reps: &[Replication]) -> ArmDelta {
    let n = reps.len().max(1) as f64;
    let mut d = ArmDelta::default();
    for r in reps {
        let x = &r.summary.delta;
        d.profit_cum += x.profit_cum / n;
        d.emissions_cum += x.emissions_cum / n;
        d.lead_time_total += x.lead_time_total / n;
        d.post_trigger_profit += x.post_trigger_profit / n;
        d.post_trigger_emissions += x.post_trigger_emissions / n;
        d.post_trigger_lead_time += x.post_trigger_lead_time / n;
    }
    d
}

fn build_spec(args: &ScenarioArgs, id: ConfigId) -> ScenarioSpec {
    let start = args.disruption_start.unwrap_or(args.trigger);
    let duration = args
        .disruption_duration
        .unwrap_or_else(|| args.horizon.saturating_sub(start).max(1));
    let disruption = match args.disruption {
        DisruptionArg::EmissionTax => Some(Disruption::emission_tax(args.tax_rate, args.tax_threshold, start, duration)),
        DisruptionArg::CostSurge => Some(Disruption::cost_surge(args.cost_multiplier, start, duration)),
        DisruptionArg::None => None,
    };
    ScenarioSpec {
        configuration: id,
        disruption,
        initial_weights: if args.initial_weights.is_empty() {
            uniform_weights()
        } else {
            args.initial_weights.clone()
        },
        switch_weights: (!args.switch_weights.is_empty()).then(|| args.switch_weights.clone()),
        trigger: if args.on_disruption {
            SwitchTrigger::OnDisruption
        } else {
            SwitchTrigger::AtPeriod { period: args.trigger }
        },
        horizon: args.horizon,
        seeds: if args.seeds.is_empty() {
            (0..args.replications).collect()
        } else {
            args.seeds.clone()
        },
    }
}

pub fn scenario(args: &ScenarioArgs) -> Result<PathBuf, CliError> {
    let id: ConfigId = args.config.parse()?;
    let dir = args
        .output
        .out
        .clone()
        .unwrap_or_else(|| output_root().join(format!("scenario-{id}")));
    require_fresh(&dir)?;

    let mut manifest = RunManifest::new("scenario", 0);
    let bytes = manifest.add_input(&args.archive)?;
    let archive = ParetoArchive::from_json(&String::from_utf8_lossy(&bytes))?;
    let expected = build_configuration(id).name;
    let trained_on = &archive.config.name;
    if trained_on != &expected && !trained_on.starts_with(&format!("{expected}-")) {
        return Err(CliError::Usage(format!(
            "archive was trained on configuration {trained_on}, not {expected}"
        )));
    }
    let spec = build_spec(args, id);
    spec.validate()?;
    if spec.seeds.is_empty() {
        return Err(CliError::Usage("at least one replication seed is needed".into()));
    }
    let outcomes = run_replications(&spec, &archive)?;

    manifest.parameters = serde_json::to_value(&spec).expect("spec serializes");
    let config_bytes = format!("{}\n", archive.config.to_json_pretty());
    manifest.store_config(&dir, format!("archive:{}", args.archive.display()), "config.json", config_bytes.as_bytes())?;
    manifest.save(&dir)?;

    let trigger = spec.trigger_period();
    let mut outputs = Vec::new();
    let mut reps = Vec::new();
    for out in &outcomes {
        let (sw, st) = trace_files(out.seed);
        for (name, trace) in [(&sw, &out.switching), (&st, &out.static_arm)] {
            let mut csv = Vec::new();
            trace.write_csv(&mut csv).map_err(|e| CliError::Csv(e.to_string()))?;
            write_atomic(&dir.join(name), &csv)?;
            outputs.push(name.clone());
        }
        reps.push(Replication {
            seed: out.seed,
            initial_policy: out.initial_policy,
            switch_policy: out.switch_policy,
            switching_csv: sw,
            static_csv: st,
            summary: summarize(&out.switching, &out.static_arm, trigger),
        });
    }
    let report = ScenarioRunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        configuration: id.to_string(),
        trigger_period: trigger,
        horizon: spec.horizon,
        mean_delta: mean_delta(&reps),
        spec,
        replications: reps,
    };
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    write_atomic(&dir.join(REPORT_FILE), text.as_bytes())?;
    outputs.push(REPORT_FILE.into());
    manifest.complete(&dir, &outputs)?;
    Ok(dir)
}
