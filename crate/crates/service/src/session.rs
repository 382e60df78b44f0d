//! The synchronous heart of a live session: one simulation, one active
//! policy, and an append-only log of commands and simulated periods.
//!
//! Nothing here knows about threads or HTTP. The async layer owns a
//! `Session` behind a mutex and calls [`Session::apply`] and
//! [`Session::advance`]; every simulated period and every accepted command
//! goes through those two calls, so the log is totally ordered.

use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use morse::env::{Disruption, RewardVector, Transition};
use morse::scenario::{select_policy, uniform_weights, PeriodRecord, Simulation};
use morse::store::ParetoArchive;
use morse::ScenarioError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Version of every JSON message the service emits.
pub const EVENT_SCHEMA_VERSION: u32 = 1;

/// Number of periods simulated when a session does not ask for a horizon.
pub const DEFAULT_HORIZON: usize = 400;

const MAX_HORIZON: usize = 1_000_000;
const MAX_STEP: usize = 1_000_000;
const MAX_SPEED: f64 = 10_000.0;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("unknown policy id {0}")]
    UnknownPolicy(usize),
    #[error("malformed disruption: {0}")]
    Disruption(String),
    #[error("invalid command: {0}")]
    Command(String),
    #[error("episode finished after period {0}; send reset to start a new episode")]
    Finished(usize),
    #[error("invalid session options: {0}")]
    Options(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// Operator command. Applied at the next period boundary, i.e. before the
/// period whose index is the session's current `period`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Command {
    /// Simulate `n` more periods, then stop (unless running).
    Step { n: usize },
    /// Simulate continuously at up to `speed` periods per second.
    Run { speed: f64 },
    /// Stop running and drop any remaining step budget.
    Pause,
    SwitchPolicy { policy_id: usize },
    /// `start` is an absolute period of the current episode.
    Inject { disruption: Disruption },
    /// Start a new episode from the reset state, with the default policy.
    Reset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RunMode {
    Paused,
    Running { speed: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionOptions {
    #[serde(default)]
    pub seed: u64,
    /// Periods per episode.
    #[serde(default)]
    pub horizon: Option<usize>,
    /// Overrides the uniform-weight default policy.
    #[serde(default)]
    pub initial_policy: Option<usize>,
}

/// Cost breakdown of one period, summed over nodes and products.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PeriodCosts {
    pub revenue: f64,
    pub reorder: f64,
    pub transport: f64,
    pub holding: f64,
    pub backlog: f64,
    pub emission_tax: f64,
}

/// Inventory position after a period; rows are nodes, columns products.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub on_hand: Vec<Vec<u64>>,
    pub backlog: Vec<Vec<u64>>,
    pub in_transit: Vec<Vec<u64>>,
    pub on_hand_total: u64,
    pub backlog_total: u64,
    pub in_transit_total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodEvent {
    pub period: usize,
    pub policy_id: usize,
    pub reward: RewardVector,
    pub profit: f64,
    pub emissions: f64,
    pub lead_time: f64,
    pub profit_cum: f64,
    pub emissions_cum: f64,
    pub disruption_active: bool,
    pub costs: PeriodCosts,
    pub state: StateSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandRecord {
    /// First period simulated after the command took effect.
    pub effective_period: usize,
    /// Wall-clock receipt time, milliseconds since the Unix epoch.
    pub received_ms: u64,
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogEntry {
    Command(CommandRecord),
    Period(PeriodEvent),
}

/// One line of the session log. `seq` starts at 0 and has no gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedEntry {
    pub seq: u64,
    /// Incremented by every reset; periods restart at 0.
    pub episode: u64,
    #[serde(flatten)]
    pub entry: LogEntry,
}

impl LoggedEntry {
    pub fn period(&self) -> Option<&PeriodEvent> {
        match &self.entry {
            LogEntry::Period(p) => Some(p),
            LogEntry::Command(_) => None,
        }
    }

    pub fn command(&self) -> Option<&CommandRecord> {
        match &self.entry {
            LogEntry::Command(c) => Some(c),
            LogEntry::Period(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub seq: u64,
    pub episode: u64,
    pub effective_period: usize,
}

/// Point-in-time description of a session, without its log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub seed: u64,
    pub configuration: String,
    pub horizon: usize,
    pub episode: u64,
    /// Next period to be simulated.
    pub period: usize,
    pub finished: bool,
    pub active_policy: usize,
    pub default_policy: usize,
    pub mode: RunMode,
    pub pending_steps: usize,
    pub disruptions: Vec<Disruption>,
    pub profit_cum: f64,
    pub emissions_cum: f64,
    /// Sequence number the next log entry will get.
    pub next_seq: u64,
}

#[derive(Debug, Clone)]
pub struct Session {
    archive: Arc<ParetoArchive>,
    options: SessionOptions,
    horizon: usize,
    sim: Simulation,
    default_policy: usize,
    active_policy: usize,
    mode: RunMode,
    pending_steps: usize,
    episode: u64,
    profit_cum: f64,
    emissions_cum: f64,
    log: Vec<LoggedEntry>,
}

impl Session {
    pub fn new(archive: Arc<ParetoArchive>, options: SessionOptions) -> Result<Self, SessionError> {
        let horizon = options.horizon.unwrap_or(DEFAULT_HORIZON);
        if horizon == 0 || horizon > MAX_HORIZON {
            return Err(SessionError::Options(format!("horizon must lie in 1..={MAX_HORIZON}")));
        }
        let net = Arc::new(archive.network().map_err(ScenarioError::from)?.with_horizon(horizon - 1));
        let sim = Simulation::new(net, &archive, options.seed)?;
        let default_policy = match options.initial_policy {
            Some(id) if sim.has_policy(id) => id,
            Some(id) => return Err(SessionError::UnknownPolicy(id)),
            None => select_policy(&archive, &uniform_weights())?,
        };
        Ok(Self {
            archive,
            options,
            horizon,
            sim,
            default_policy,
            active_policy: default_policy,
            mode: RunMode::Paused,
            pending_steps: 0,
            episode: 0,
            profit_cum: 0.0,
            emissions_cum: 0.0,
            log: Vec::new(),
        })
    }

    pub fn archive(&self) -> &Arc<ParetoArchive> {
        &self.archive
    }

    pub fn options(&self) -> &SessionOptions {
        &self.options
    }

    pub fn mode(&self) -> RunMode {
        self.mode
    }

    pub fn period(&self) -> usize {
        self.sim.period()
    }

    pub fn finished(&self) -> bool {
        self.sim.finished()
    }

    pub fn active_policy(&self) -> usize {
        self.active_policy
    }

    pub fn log(&self) -> &[LoggedEntry] {
        &self.log
    }

    /// Entries with `seq >= since`.
    pub fn entries_since(&self, since: u64) -> &[LoggedEntry] {
        let start = usize::try_from(since).unwrap_or(usize::MAX).min(self.log.len());
        &self.log[start..]
    }

    pub fn view(&self) -> SessionView {
        SessionView {
            seed: self.options.seed,
            configuration: self.archive.config.name.clone(),
            horizon: self.horizon,
            episode: self.episode,
            period: self.sim.period(),
            finished: self.sim.finished(),
            active_policy: self.active_policy,
            default_policy: self.default_policy,
            mode: self.mode,
            pending_steps: self.pending_steps,
            disruptions: self.sim.disruptions().to_vec(),
            profit_cum: self.profit_cum,
            emissions_cum: self.emissions_cum,
            next_seq: self.log.len() as u64,
        }
    }

    /// Validates `command`, applies it at the current boundary and appends
    /// it to the log. Rejected commands leave the session untouched.
    pub fn apply(&mut self, command: Command) -> Result<(Ack, &LoggedEntry), SessionError> {
        self.check(&command)?;
        let effective_period = self.sim.period();
        let episode = self.episode;
        match &command {
            Command::Step { n } => self.pending_steps = self.pending_steps.saturating_add(*n),
            Command::Run { speed } => self.mode = RunMode::Running { speed: *speed },
            Command::Pause => {
                self.mode = RunMode::Paused;
                self.pending_steps = 0;
            }
            Command::SwitchPolicy { policy_id } => self.active_policy = *policy_id,
            Command::Inject { disruption } => self.sim.inject(disruption.clone())?,
            Command::Reset => {
                self.sim.reset();
                self.episode += 1;
                self.active_policy = self.default_policy;
                self.pending_steps = 0;
                self.profit_cum = 0.0;
                self.emissions_cum = 0.0;
            }
        }
        let record = CommandRecord {
            effective_period,
            received_ms: now_ms(),
            command,
        };
        let entry = self.push(episode, LogEntry::Command(record));
        let ack = Ack {
            seq: entry.seq,
            episode,
            effective_period,
        };
        Ok((ack, entry))
    }

    fn check(&self, command: &Command) -> Result<(), SessionError> {
        match command {
            Command::Step { n } => {
                if *n == 0 || *n > MAX_STEP {
                    return Err(SessionError::Command(format!("step count must lie in 1..={MAX_STEP}")));
                }
                self.check_not_finished()
            }
            Command::Run { speed } => {
                if !(speed.is_finite() && *speed > 0.0 && *speed <= MAX_SPEED) {
                    return Err(SessionError::Command(format!(
                        "speed must be a positive number of periods per second, at most {MAX_SPEED}"
                    )));
                }
                self.check_not_finished()
            }
            Command::SwitchPolicy { policy_id } if !self.sim.has_policy(*policy_id) => {
                Err(SessionError::UnknownPolicy(*policy_id))
            }
            Command::Inject { disruption } => disruption
                .validate()
                .map_err(|e| SessionError::Disruption(e.to_string())),
            _ => Ok(()),
        }
    }

    fn check_not_finished(&self) -> Result<(), SessionError> {
        if self.sim.finished() {
            Err(SessionError::Finished(self.sim.period() - 1))
        } else {
            Ok(())
        }
    }

    /// True when the runner has work: a step budget or running mode, and
    /// periods left in the episode.
    pub fn wants_step(&self) -> bool {
        !self.sim.finished() && (self.pending_steps > 0 || matches!(self.mode, RunMode::Running { .. }))
    }

    /// One runner tick: simulates a period if [`Self::wants_step`], and
    /// drops back to paused once the episode is over.
    pub fn advance(&mut self) -> Result<Option<&LoggedEntry>, SessionError> {
        if !self.wants_step() {
            self.settle();
            return Ok(None);
        }
        self.pending_steps = self.pending_steps.saturating_sub(1);
        self.simulate_period()?;
        self.settle();
        Ok(self.log.last())
    }

    fn settle(&mut self) {
        if self.sim.finished() {
            self.mode = RunMode::Paused;
            self.pending_steps = 0;
        }
    }

    /// Simulates the next period under the active policy, regardless of
    /// run mode, and logs it.
    pub fn simulate_period(&mut self) -> Result<&LoggedEntry, SessionError> {
        self.check_not_finished()?;
        let (rec, tr) = self.sim.step(self.active_policy)?;
        let event = period_event(&rec, &tr, self.sim.state());
        self.profit_cum = event.profit_cum;
        self.emissions_cum = event.emissions_cum;
        let episode = self.episode;
        Ok(self.push(episode, LogEntry::Period(event)))
    }

    fn push(&mut self, episode: u64, entry: LogEntry) -> &LoggedEntry {
        let seq = self.log.len() as u64;
        self.log.push(LoggedEntry { seq, episode, entry });
        self.log.last().expect("just pushed")
    }
}

fn period_event(rec: &PeriodRecord, tr: &Transition, state: &morse::env::SimState) -> PeriodEvent {
    let mut costs = PeriodCosts {
        emission_tax: tr.emission_tax,
        ..Default::default()
    };
    for c in &tr.cells {
        costs.revenue += c.revenue;
        costs.reorder += c.reorder_cost;
        costs.transport += c.transport_cost;
        costs.holding += c.holding_cost;
        costs.backlog += c.backlog_cost;
    }
    let rows = |g: &morse::grid::Grid<u64>| (0..g.rows()).map(|r| g.row(r).to_vec()).collect::<Vec<_>>();
    let total = |g: &morse::grid::Grid<u64>| g.as_slice().iter().sum::<u64>();
    let in_transit = state.pipeline_inventory();
    PeriodEvent {
        period: rec.period,
        policy_id: rec.policy_id,
        reward: tr.reward,
        profit: rec.profit,
        emissions: rec.emissions,
        lead_time: rec.lead_time,
        profit_cum: rec.profit_cum,
        emissions_cum: rec.emissions_cum,
        disruption_active: rec.disruption_active,
        costs,
        state: StateSummary {
            on_hand: rows(&state.on_hand),
            backlog: rows(&state.backlog),
            in_transit: rows(&in_transit),
            on_hand_total: total(&state.on_hand),
            backlog_total: total(&state.backlog),
            in_transit_total: total(&in_transit),
        },
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Re-runs a session log from scratch: commands are re-applied and every
/// logged period is simulated again. Returns the regenerated log, whose
/// entries match the input except for command receipt times.
pub fn replay(
    archive: Arc<ParetoArchive>,
    options: SessionOptions,
    log: &[LoggedEntry],
) -> Result<Vec<LoggedEntry>, SessionError> {
    let mut session = Session::new(archive, options)?;
    for entry in log {
        match &entry.entry {
            LogEntry::Command(c) => {
                session.apply(c.command.clone())?;
            }
            LogEntry::Period(_) => {
                session.simulate_period()?;
            }
        }
    }
    Ok(session.log)
}

/// Compares two logs ignoring command receipt times.
pub fn same_trajectory(a: &[LoggedEntry], b: &[LoggedEntry]) -> bool {
    let strip = |e: &LoggedEntry| {
        let mut e = e.clone();
        if let LogEntry::Command(c) = &mut e.entry {
            c.received_ms = 0;
        }
        e
    };
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| strip(x) == strip(y))
}
