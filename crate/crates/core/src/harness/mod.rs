//! Ensemble experiments: seeding, training loops, aggregation and result files.
//!
//! Member `m` of every agent draws agent randomness from stream `2m` and environment
//! randomness from stream `2m + 1` of a ChaCha8 generator keyed by the master seed, so all
//! agents of one experiment face the same percept and scenario sequences.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::audit::BoundReport;
use crate::deliberation::WalkRecord;
use crate::env::invasion::{GameKind, InvasionGame};
use crate::env::maintenance::{self, Compat, MaintenanceEnv, Scenario};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::history::{DynamicHypergraph, DEFAULT_KEYFRAME_EVERY};
use crate::table::ManyBodyTable;

pub mod agents;
pub mod config;
pub mod stats;

use agents::{InvasionAgent, MaintenanceAgent, Meps};
pub use config::{AgentSpec, EnvironmentSpec, ExperimentConfig, MepsSpec, QSpec};
use stats::{across_members, window_means};

const AGENT_ROLE: u64 = 0;
const ENV_ROLE: u64 = 1;

/// Static checks of every MEPS agent in `config`: table size against its analytic value or
/// bound, and the relevant h-values of each start configuration against their bound.
pub fn audit(config: &ExperimentConfig) -> Result<Vec<BoundReport>> {
    config.validate()?;
    let mut reports = Vec::new();
    for spec in &config.agents {
        let AgentSpec::Meps(m) = spec else { continue };
        let (table, starts) = match &config.environment {
            EnvironmentSpec::Distraction | EnvironmentSpec::Deceptive => {
                let kind = if config.environment == EnvironmentSpec::Distraction { GameKind::Distraction } else { GameKind::Deceptive };
                (agents::invasion_meps_table(kind, m)?, agents::percept_space(kind)?)
            }
            EnvironmentSpec::Maintenance { scenarios, .. } => {
                let cutoffs = m.cutoffs.ok_or_else(|| Error::Config(format!("agent {} has no cutoffs", m.name)))?;
                let table = maintenance::meps_table(&cutoffs, m.full_configuration, m.h_init)?;
                let set = match scenarios {
                    Some(p) => maintenance::scenarios_from_json(&std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
                    None => maintenance::shipped_scenarios(),
                };
                let starts = set
                    .iter()
                    .map(|s| maintenance::percept_config(table.clips(), &s.symptoms))
                    .collect::<Result<Vec<_>>>()?;
                reports.push(BoundReport::exact(
                    format!("{}: N_l", m.name),
                    crate::audit::nl_formula(&cutoffs, &maintenance::CategorySizes::MAINTENANCE)?,
                    table.count_parameters() as u128,
                ));
                (table, starts)
            }
        };
        let clip_count = table.clips().len() as u64;
        let bound = representable(crate::audit::param_bound(table.io_set(), clip_count))?;
        reports.push(BoundReport::upper(format!("{}: parameters", m.name), bound, table.count_parameters() as u128));
        let mut relevant = Vec::new();
        let mut worst: Option<BoundReport> = None;
        for start in starts.iter().filter(|s| s.len() >= 2) {
            table.relevant_indices(start, m.bias, &mut relevant)?;
            let bound = representable(crate::audit::relevant_count_bound(table.io_set(), clip_count, start.len() as u64))?;
            let report = BoundReport::upper(format!("{}: relevant h-values", m.name), bound, relevant.len() as u128);
            if worst.as_ref().map_or(true, |w| report.observed_value > w.observed_value || !report.satisfied) {
                worst = Some(report);
            }
        }
        reports.extend(worst);
        // One probe walk per start configuration on the untrained table.
        let maintenance = config.environment.is_maintenance();
        let mut probe = Meps::new(table, m, false)?;
        let mut rng = member_rng(config.seed, 0, AGENT_ROLE);
        for start in starts {
            if maintenance {
                probe.walk(start, &crate::deliberation::FinalLayerCoupling, config.walk_step_cap, &mut rng)?;
            } else {
                probe.walk(start, &crate::deliberation::ActionLayerCoupling, config.walk_step_cap, &mut rng)?;
            }
        }
        reports.push(BoundReport::upper(format!("{}: walk length", m.name), probe.check.bound, probe.check.longest as u128));
    }
    Ok(reports)
}

/// A bound too large to represent constrains nothing.
fn representable(bound: Result<u128>) -> Result<crate::audit::WalkBound> {
    match bound {
        Ok(b) => Ok(crate::audit::WalkBound::Finite(b)),
        Err(Error::Refused(_)) => Ok(crate::audit::WalkBound::Unbounded),
        Err(e) => Err(e),
    }
}

/// The generator of one ensemble member in one role.
pub fn member_rng(seed: u64, member: usize, role: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(member as u64 * 2 + role);
    rng
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// Worker threads; results do not depend on it.
    pub jobs: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { jobs: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRecord {
    pub scenario: usize,
    pub steps: u64,
    pub solved: bool,
    /// Mean shaped rewards over the episode's steps.
    pub hypothesis: f64,
    pub plausibility: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AgentSummary {
    pub name: String,
    pub parameters: u64,
    /// Longest walk of any member against the analytic bound; absent for Q agents.
    pub walk_bound: Option<BoundReport>,
    pub final_mean_reward: f64,
    /// Ensemble mean of all environment steps (maintenance only).
    pub total_steps: Option<f64>,
    /// Fraction of episodes solved (maintenance only).
    pub solved_fraction: Option<f64>,
}

/// One agent's result files, in memory.
#[derive(Debug, Clone)]
pub struct AgentOutput {
    pub summary: AgentSummary,
    /// File name to contents, written under `<out>/<agent name>/`.
    pub files: BTreeMap<String, Vec<u8>>,
    /// Per member: the reward per round (invasion) or the episodes (maintenance).
    pub rewards: Vec<Vec<f64>>,
    pub episodes: Vec<Vec<EpisodeRecord>>,
}

impl AgentOutput {
    /// Ensemble mean of the cumulative steps over the first `episodes` episodes.
    pub fn total_steps(&self, episodes: usize) -> Result<f64> {
        total_steps_of(&self.episodes, episodes)
    }

    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.get(name).and_then(|b| std::str::from_utf8(b).ok())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config_sha256: String,
    pub agents: Vec<AgentOutput>,
}

impl RunOutput {
    pub fn agent(&self, name: &str) -> Option<&AgentOutput> {
        self.agents.iter().find(|a| a.summary.name == name)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        for agent in &self.agents {
            let sub = dir.join(&agent.summary.name);
            std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
            for (name, bytes) in &agent.files {
                let path = sub.join(name);
                std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            }
        }
        Ok(())
    }
}

fn total_steps_of(members: &[Vec<EpisodeRecord>], episodes: usize) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::Contract("no maintenance episodes in this output".into()));
    }
    if members.iter().any(|m| m.len() < episodes) {
        return Err(Error::Contract(format!("fewer than {episodes} episodes recorded")));
    }
    let sum: u64 = members.iter().map(|m| m[..episodes].iter().map(|e| e.steps).sum::<u64>()).sum();
    Ok(sum as f64 / members.len() as f64)
}

/// [`AgentOutput::total_steps`] recomputed from an `episodes.csv` file.
pub fn total_steps(episodes_csv: &str, episodes: usize) -> Result<f64> {
    let mut per_member: BTreeMap<u64, (usize, u64)> = BTreeMap::new();
    for line in episodes_csv.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let parse = |k: usize| cols.get(k).and_then(|v| v.parse::<u64>().ok());
        let (Some(member), Some(episode), Some(steps)) = (parse(0), parse(1), parse(3)) else {
            return Err(Error::Data(format!("malformed episodes row {line:?}")));
        };
        let entry = per_member.entry(member).or_default();
        if (episode as usize) < episodes {
            entry.0 += 1;
            entry.1 += steps;
        }
    }
    if per_member.is_empty() || per_member.values().any(|&(n, _)| n < episodes) {
        return Err(Error::Contract(format!("fewer than {episodes} episodes recorded")));
    }
    Ok(per_member.values().map(|&(_, s)| s as f64).sum::<f64>() / per_member.len() as f64)
}

/// Side outputs of ensemble member 0.
#[derive(Default)]
struct Recorder {
    history: Option<DynamicHypergraph>,
    walks: Option<String>,
}

impl Recorder {
    fn new(config: &ExperimentConfig, member: usize, meps: Option<&mut Meps>) -> Result<Self> {
        let mut rec = Recorder::default();
        if member != 0 {
            return Ok(rec);
        }
        if config.record_walks {
            rec.walks = Some(String::new());
        }
        if let (true, Some(m)) = (config.record_history, meps) {
            m.table.track_changes();
            let mut history = DynamicHypergraph::new(DEFAULT_KEYFRAME_EVERY)?;
            history.snapshot(&m.table, 0)?;
            m.table.take_changes();
            rec.history = Some(history);
        }
        Ok(rec)
    }

    fn walk(&mut self, time: u64, walk: Option<&WalkRecord>, table: Option<&ManyBodyTable>) {
        if let (Some(out), Some(w), Some(table)) = (self.walks.as_mut(), walk, table) {
            let line = serde_json::json!({"t": time, "walk": w.explain(table.clips())});
            writeln!(out, "{line}").expect("writing to a string");
        }
    }

    fn after_update(&mut self, time: u64, meps: Option<&mut Meps>) -> Result<()> {
        if let (Some(history), Some(m)) = (self.history.as_mut(), meps) {
            let changed = m.table.take_changes().unwrap_or_default();
            history.snapshot_changed(&m.table, time, &changed)?;
        }
        Ok(())
    }
}

struct MemberResult<T> {
    series: Vec<T>,
    longest_walk: usize,
    history: Option<DynamicHypergraph>,
    walks: Option<String>,
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))
}

pub fn run(config: &ExperimentConfig, options: RunOptions) -> Result<RunOutput> {
    config.validate()?;
    let sha = config.sha256();
    let pool = pool(options.jobs)?;
    let agents = match &config.environment {
        EnvironmentSpec::Distraction => run_invasion(config, GameKind::Distraction, &sha, &pool)?,
        EnvironmentSpec::Deceptive => run_invasion(config, GameKind::Deceptive, &sha, &pool)?,
        EnvironmentSpec::Maintenance { step_cap, scenarios } => {
            let scenarios: Vec<Scenario> = match scenarios {
                Some(p) => maintenance::scenarios_from_json(&std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
                None => maintenance::shipped_scenarios(),
            };
            run_maintenance(config, scenarios.into(), *step_cap, &sha, &pool)?
        }
    };
    Ok(RunOutput { config_sha256: sha, agents })
}

fn header(sha: &str, columns: &str) -> String {
    format!("# config sha256 {sha}\n{columns}\n")
}

fn bound_report<T>(meps: Option<&Meps>, members: &[MemberResult<T>]) -> Option<BoundReport> {
    let m = meps?;
    let longest = members.iter().map(|result| result.longest_walk).max().unwrap_or(0);
    Some(BoundReport::upper(format!("{:?} walk length", m.bias), m.check.bound, longest as u128))
}

fn side_files<T>(files: &mut BTreeMap<String, Vec<u8>>, members: &mut [MemberResult<T>], table: Option<&ManyBodyTable>) -> Result<()> {
    let Some(first) = members.first_mut() else { return Ok(()) };
    if let Some(history) = first.history.take() {
        let mut buf = Vec::new();
        history.write_jsonl(&mut buf)?;
        files.insert("history.jsonl".into(), buf);
        if let Some(t) = table {
            files.insert("clips.json".into(), serde_json::to_vec(t.clips())?);
        }
    }
    if let Some(w) = first.walks.take() {
        files.insert("walks.jsonl".into(), w.into_bytes());
    }
    Ok(())
}

fn run_invasion(config: &ExperimentConfig, kind: GameKind, sha: &str, pool: &rayon::ThreadPool) -> Result<Vec<AgentOutput>> {
    let window = config.window();
    let mut outputs = Vec::new();
    for spec in &config.agents {
        let template = match spec {
            AgentSpec::Meps(m) => InvasionTemplate::Meps(agents::invasion_meps_table(kind, m)?, m),
            AgentSpec::QLearning(spec) => InvasionTemplate::QLearning(agents::invasion_q_table(kind, spec)?),
        };
        let build = || -> Result<InvasionAgent> {
            Ok(match &template {
                InvasionTemplate::Meps(t, m) => InvasionAgent::meps(t.clone(), m, config.assert_bounds)?,
                InvasionTemplate::QLearning(table) => InvasionAgent::QLearning { table: table.clone(), last: None },
            })
        };
        let mut members: Vec<MemberResult<f64>> = pool.install(|| {
            (0..config.ensemble)
                .into_par_iter()
                .map(|member| invasion_member(config, kind, build()?, member))
                .collect::<Result<Vec<_>>>()
        })?;
        let series: Vec<Vec<f64>> = members.iter().map(|m| window_means(&m.series, window)).collect();
        let rows = across_members(&series);
        let mut csv = header(sha, "window_end,mean_reward,std_reward");
        for (k, (mean, std)) in rows.iter().enumerate() {
            writeln!(csv, "{},{mean},{std}", (k + 1) * window).expect("string");
        }
        let (meps, parameters, table) = match &template {
            InvasionTemplate::Meps(t, m) => {
                (Some(build().ok().and_then(|a| if let InvasionAgent::Meps(x) = a { Some(x) } else { None }).ok_or_else(|| Error::Config(m.name.clone()))?), t.count_parameters() as u64, Some(t))
            }
            InvasionTemplate::QLearning(table) => (None, table.len() as u64, None),
        };
        let mut files = BTreeMap::new();
        files.insert("rewards.csv".into(), csv.into_bytes());
        side_files(&mut files, &mut members, table)?;
        let summary = AgentSummary {
            name: spec.name().to_owned(),
            parameters,
            walk_bound: bound_report(meps.as_ref(), &members),
            final_mean_reward: rows.last().map_or(0.0, |row| row.0),
            total_steps: None,
            solved_fraction: None,
        };
        files.insert("summary.json".into(), serde_json::to_vec_pretty(&summary)?);
        outputs.push(AgentOutput {
            summary,
            files,
            rewards: members.into_iter().map(|m| m.series).collect(),
            episodes: Vec::new(),
        });
    }
    Ok(outputs)
}

enum InvasionTemplate<'a> {
    Meps(ManyBodyTable, &'a MepsSpec),
    QLearning(crate::baselines::QTable),
}

fn invasion_member(config: &ExperimentConfig, kind: GameKind, mut agent: InvasionAgent, member: usize) -> Result<MemberResult<f64>> {
    let mut agent_rng = member_rng(config.seed, member, AGENT_ROLE);
    let mut env_rng = member_rng(config.seed, member, ENV_ROLE);
    let mut env = InvasionGame::new(kind);
    let mut rec = Recorder::new(config, member, agent.meps_state())?;
    let mut rewards = Vec::with_capacity(config.rounds);
    for round in 1..=config.rounds as u64 {
        env.reset(&mut env_rng);
        let percept = *env.percept();
        let acted = agent.act(kind, percept, config.walk_step_cap, &mut agent_rng)?;
        rec.walk(round, acted.walk.as_ref(), agent.meps_state().map(|m| &m.table));
        // A walk that never reached a door earns nothing and teaches nothing.
        let reward = match acted.action {
            Some(door) => {
                let reward = env.act(&door)?;
                agent.learn(reward);
                reward
            }
            None => 0.0,
        };
        rec.after_update(round, agent.meps_state())?;
        rewards.push(reward);
    }
    let longest_walk = agent.meps_state().map_or(0, |m| m.check.longest);
    Ok(MemberResult { series: rewards, longest_walk, history: rec.history, walks: rec.walks })
}

enum MaintenanceTemplate<'a> {
    Meps(ManyBodyTable, &'a MepsSpec),
    QLearning(crate::baselines::MultiLayerQAgent),
}

fn run_maintenance(
    config: &ExperimentConfig,
    scenarios: Arc<[Scenario]>,
    step_cap: u64,
    sha: &str,
    pool: &rayon::ThreadPool,
) -> Result<Vec<AgentOutput>> {
    let window = config.window();
    let compat = Arc::new(Compat::shipped());
    let mut outputs = Vec::new();
    for spec in &config.agents {
        let (template, cutoffs) = match spec {
            AgentSpec::Meps(m) => {
                let cutoffs = m.cutoffs.ok_or_else(|| Error::Config(format!("agent {} has no cutoffs", m.name)))?;
                (MaintenanceTemplate::Meps(maintenance::meps_table(&cutoffs, m.full_configuration, m.h_init)?, m), cutoffs)
            }
            AgentSpec::QLearning(spec) => (
                MaintenanceTemplate::QLearning(agents::maintenance_q_agent(spec)?),
                maintenance::BiasCutoffs::unrestricted(&maintenance::CategorySizes::MAINTENANCE),
            ),
        };
        let build = || -> Result<MaintenanceAgent> {
            Ok(match &template {
                MaintenanceTemplate::Meps(t, m) => MaintenanceAgent::meps(t.clone(), m, config.assert_bounds)?,
                MaintenanceTemplate::QLearning(agent) => MaintenanceAgent::multi_layer_q(agent.clone()),
            })
        };
        let a_max = spec.a_max();
        let mut members: Vec<MemberResult<EpisodeRecord>> = pool.install(|| {
            (0..config.ensemble)
                .into_par_iter()
                .map(|member| {
                    let env = MaintenanceEnv::new(scenarios.clone(), compat.clone(), cutoffs, a_max, step_cap)?;
                    maintenance_member(config, env, build()?, member)
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let episodes: Vec<Vec<EpisodeRecord>> = members.iter().map(|m| m.series.clone()).collect();
        let steps: Vec<Vec<f64>> = episodes.iter().map(|m| window_means(&m.iter().map(|e| e.steps as f64).collect::<Vec<_>>(), window)).collect();
        let steps = across_members(&steps);
        let mut files = BTreeMap::new();
        let mut final_mean = 0.0;
        for (file, pick) in [("hypothesis.csv", 0), ("plausibility.csv", 1)] {
            let series: Vec<Vec<f64>> = episodes
                .iter()
                .map(|m| window_means(&m.iter().map(|e| if pick == 0 { e.hypothesis } else { e.plausibility }).collect::<Vec<_>>(), window))
                .collect();
            let rows = across_members(&series);
            if pick == 0 {
                final_mean = rows.last().map_or(0.0, |row| row.0);
            }
            let mut csv = header(sha, "window_end,mean_reward,std_reward,mean_steps,std_steps");
            for (k, ((mean, std), (ms, ss))) in rows.iter().zip(&steps).enumerate() {
                writeln!(csv, "{},{mean},{std},{ms},{ss}", (k + 1) * window).expect("string");
            }
            files.insert(file.to_owned(), csv.into_bytes());
        }
        let mut raw = header(sha, "member,episode,scenario,steps,solved,hypothesis,plausibility");
        for (member, eps) in episodes.iter().enumerate() {
            for (k, e) in eps.iter().enumerate() {
                writeln!(raw, "{member},{k},{},{},{},{},{}", e.scenario, e.steps, e.solved, e.hypothesis, e.plausibility).expect("string");
            }
        }
        files.insert("episodes.csv".into(), raw.into_bytes());
        let (meps, parameters, table) = match &template {
            MaintenanceTemplate::Meps(t, _) => {
                let check = match build()? {
                    MaintenanceAgent::Meps(m) => Some(m),
                    MaintenanceAgent::QLearning { .. } => None,
                };
                (check, t.count_parameters() as u64, Some(t))
            }
            MaintenanceTemplate::QLearning(agent) => (None, agent.count_parameters() as u64, None),
        };
        side_files(&mut files, &mut members, table)?;
        let all = episodes.iter().map(Vec::len).min().unwrap_or(0);
        let solved = episodes.iter().flatten().filter(|e| e.solved).count() as f64;
        let summary = AgentSummary {
            name: spec.name().to_owned(),
            parameters,
            walk_bound: bound_report(meps.as_ref(), &members),
            final_mean_reward: final_mean,
            total_steps: Some(total_steps_of(&episodes, all)?),
            solved_fraction: Some(solved / episodes.iter().map(Vec::len).sum::<usize>().max(1) as f64),
        };
        files.insert("summary.json".into(), serde_json::to_vec_pretty(&summary)?);
        outputs.push(AgentOutput { summary, files, rewards: Vec::new(), episodes });
    }
    Ok(outputs)
}

fn maintenance_member(
    config: &ExperimentConfig,
    mut env: MaintenanceEnv,
    mut agent: MaintenanceAgent,
    member: usize,
) -> Result<MemberResult<EpisodeRecord>> {
    let mut agent_rng = member_rng(config.seed, member, AGENT_ROLE);
    let mut env_rng = member_rng(config.seed, member, ENV_ROLE);
    let mut rec = Recorder::new(config, member, agent.meps_state())?;
    let mut episodes = Vec::with_capacity(config.rounds);
    let mut time = 0u64;
    for _ in 0..config.rounds {
        env.reset(&mut env_rng);
        let symptoms = env.percept().to_vec();
        let (mut hyp, mut plaus) = (0.0, 0.0);
        let fb = loop {
            time += 1;
            let acted = agent.act(&symptoms, config.walk_step_cap, &mut agent_rng)?;
            rec.walk(time, acted.walk.as_ref(), agent.meps_state().map(|m| &m.table));
            let fb = match acted.action {
                Some(explanation) => {
                    let fb = env.act(&explanation)?;
                    agent.learn(&fb, &symptoms)?;
                    fb
                }
                None => env.idle(),
            };
            rec.after_update(time, agent.meps_state())?;
            hyp += fb.hypothesis;
            plaus += fb.plausibility;
            if fb.done {
                break fb;
            }
        };
        let n = fb.steps as f64;
        episodes.push(EpisodeRecord {
            scenario: env.scenario_index(),
            steps: fb.steps,
            solved: fb.solved,
            hypothesis: hyp / n,
            plausibility: plaus / n,
        });
    }
    let longest_walk = agent.meps_state().map_or(0, |m| m.check.longest);
    Ok(MemberResult { series: episodes, longest_walk, history: rec.history, walks: rec.walks })
}
