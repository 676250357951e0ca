//! Agents as the harness drives them: act on a percept, then learn from the feedback.

use std::collections::BTreeMap;

use rand::Rng;

use super::config::{MepsSpec, QSpec};
use crate::audit::{walk_length_bound, WalkBound};
use crate::baselines::{product_configs, MultiLayerQAgent, QChain, QTable};
use crate::clips::{ClipId, ClipTable, ExcitationConfig};
use crate::deliberation::{walk_from, ActionLayerCoupling, FinalLayerCoupling, Termination, WalkRecord};
use crate::env::invasion::GameKind;
use crate::env::maintenance::{self, Explanation, MaintenanceFeedback};
use crate::error::{Error, Result};
use crate::learning::{update_glow_at, update_h, update_split_at, LearningParams};
use crate::probability::ProbabilityRule;
use crate::table::{build_table, BiasKind, FeedForward, ManyBodyTable};

/// Tracks the longest walk and, when asked, refuses walks above the analytic bound.
#[derive(Debug, Clone, Copy)]
pub(crate) struct WalkCheck {
    pub bias: BiasKind,
    pub bound: WalkBound,
    pub enforce: bool,
    pub longest: usize,
}

impl WalkCheck {
    pub fn for_table(table: &ManyBodyTable, bias: BiasKind, enforce: bool) -> Result<Self> {
        let bound = if bias == BiasKind::MB1 {
            WalkBound::Unbounded
        } else {
            walk_length_bound(bias, &table.clips().layer_sizes(), table.io_set())?
        };
        Ok(WalkCheck { bias, bound, enforce, longest: 0 })
    }

    fn observe(&mut self, walk: &WalkRecord) -> Result<()> {
        self.longest = self.longest.max(walk.len());
        if self.enforce && !self.bound.admits(walk.len()) {
            return Err(Error::BoundViolation {
                bias: format!("{:?}", self.bias),
                length: walk.len(),
                bound: self.bound.finite().unwrap_or(u128::MAX),
            });
        }
        Ok(())
    }
}

/// A MEPS learner: its table, how it walks, and the traversed positions awaiting a reward.
#[derive(Debug, Clone)]
pub(crate) struct Meps {
    pub table: ManyBodyTable,
    pub bias: BiasKind,
    pub rule: ProbabilityRule,
    pub params: LearningParams,
    pub check: WalkCheck,
    traversed: Vec<usize>,
}

impl Meps {
    pub(crate) fn new(table: ManyBodyTable, spec: &MepsSpec, enforce: bool) -> Result<Self> {
        let check = WalkCheck::for_table(&table, spec.bias, enforce)?;
        Ok(Meps { table, bias: spec.bias, rule: spec.rule, params: spec.params(), check, traversed: Vec::new() })
    }

    pub(crate) fn walk<C, R>(&mut self, start: ExcitationConfig, coupling: &C, cap: usize, rng: &mut R) -> Result<(WalkRecord, Option<C::Action>)>
    where
        C: crate::deliberation::Coupling,
        R: Rng + ?Sized,
    {
        let out = walk_from(start, &self.table, self.bias, self.rule, coupling, cap, rng)?;
        self.check.observe(&out.record)?;
        self.traversed = if out.record.terminated_by == Termination::ActionCoupledOut { out.positions } else { Vec::new() };
        Ok((out.record, out.action))
    }
}

pub(crate) enum InvasionAgent {
    Meps(Meps),
    QLearning { table: QTable, last: Option<(usize, usize)> },
}

pub(crate) fn percept_space(kind: GameKind) -> Result<Vec<ExcitationConfig>> {
    let [a, b, c] = kind.ranges();
    let mut out = Vec::new();
    for v1 in a.0..=a.1 {
        for v2 in b.0..=b.1 {
            for v3 in c.0..=c.1 {
                out.push(kind.percept_config([v1, v2, v3])?);
            }
        }
    }
    Ok(out)
}

pub(crate) fn invasion_meps_table(kind: GameKind, spec: &MepsSpec) -> Result<ManyBodyTable> {
    let io = spec.io.as_deref().ok_or_else(|| Error::Config(format!("agent {} has no io", spec.name)))?;
    build_table(kind.clip_table(), io, &FeedForward::distinct_domain_categories(), spec.h_init)
}

pub(crate) fn invasion_q_table(kind: GameKind, spec: &QSpec) -> Result<QTable> {
    let doors = kind.clip_table().layer(2).iter().map(|&d| [d].into_iter().collect()).collect();
    QTable::new(percept_space(kind)?, doors, spec.alpha, spec.lambda, spec.q_init)
}

/// A step's outcome: the chosen action, if any, and the walk behind it.
pub(crate) struct Acted<A> {
    pub action: Option<A>,
    pub walk: Option<WalkRecord>,
}

impl InvasionAgent {
    pub fn meps(table: ManyBodyTable, spec: &MepsSpec, enforce: bool) -> Result<Self> {
        Ok(InvasionAgent::Meps(Meps::new(table, spec, enforce)?))
    }

    pub fn act<R: Rng + ?Sized>(&mut self, kind: GameKind, percept: [i64; 3], cap: usize, rng: &mut R) -> Result<Acted<u32>> {
        let start = kind.percept_config(percept)?;
        match self {
            InvasionAgent::Meps(m) => {
                let (record, action) = m.walk(start, &ActionLayerCoupling, cap, rng)?;
                let door = action.map(|a| kind.door_of(m.table.clips(), &a)).transpose()?;
                Ok(Acted { action: door, walk: Some(record) })
            }
            InvasionAgent::QLearning { table, last } => {
                let s = table.state(&start)?;
                let a = table.select(s, rng);
                *last = Some((s, a));
                Ok(Acted { action: Some(a as u32), walk: None })
            }
        }
    }

    pub fn learn(&mut self, reward: f64) {
        match self {
            InvasionAgent::Meps(m) => {
                update_glow_at(&mut m.table, &m.traversed, m.params.eta);
                update_h(&mut m.table, reward, m.params, m.rule);
            }
            InvasionAgent::QLearning { table, last } => {
                if let Some((s, a)) = last.take() {
                    table.update(s, a, reward, None);
                }
            }
        }
    }

    pub fn meps_state(&mut self) -> Option<&mut Meps> {
        match self {
            InvasionAgent::Meps(m) => Some(m),
            InvasionAgent::QLearning { .. } => None,
        }
    }
}

pub(crate) enum MaintenanceAgent {
    Meps(Meps),
    QLearning { agent: MultiLayerQAgent, clips: ClipTable, last: Option<QChain> },
}

fn kind_group(clips: &ClipTable, layer: u32, kind: &str) -> Vec<ClipId> {
    clips
        .layer(layer)
        .iter()
        .copied()
        .filter(|&c| clips.clip(c).category.as_ref().is_some_and(|k| k.kind == kind))
        .collect()
}

/// Percept→hypothesis and hypothesis→action tables over every configuration.
pub(crate) fn maintenance_q_agent(spec: &QSpec) -> Result<MultiLayerQAgent> {
    use maintenance::{CAUSE, COMPONENT, FIX, SYMPTOM};
    let clips = maintenance::clip_table();
    let percepts = product_configs(&[&kind_group(&clips, 1, SYMPTOM)]);
    let hidden = product_configs(&[&kind_group(&clips, 2, COMPONENT), &kind_group(&clips, 2, CAUSE)]);
    let action = product_configs(&[&kind_group(&clips, 3, COMPONENT), &kind_group(&clips, 3, FIX)]);
    MultiLayerQAgent::new(vec![
        QTable::new(percepts, hidden.clone(), spec.alpha, spec.lambda, spec.q_init)?,
        QTable::new(hidden, action, spec.alpha, spec.lambda, spec.q_init)?,
    ])
}

impl MaintenanceAgent {
    pub fn meps(table: ManyBodyTable, spec: &MepsSpec, enforce: bool) -> Result<Self> {
        Ok(MaintenanceAgent::Meps(Meps::new(table, spec, enforce)?))
    }

    pub fn multi_layer_q(agent: MultiLayerQAgent) -> Self {
        MaintenanceAgent::QLearning { agent, clips: maintenance::clip_table(), last: None }
    }

    pub fn act<R: Rng + ?Sized>(&mut self, symptoms: &[u32], cap: usize, rng: &mut R) -> Result<Acted<Explanation>> {
        match self {
            MaintenanceAgent::Meps(m) => {
                let start = maintenance::percept_config(m.table.clips(), symptoms)?;
                let (record, action) = m.walk(start, &FinalLayerCoupling, cap, rng)?;
                let explanation = match action {
                    Some(a) => {
                        let clips = m.table.clips();
                        let hidden = record
                            .configs
                            .iter()
                            .find(|c| !c.is_empty() && c.iter().all(|x| clips.layer_of(x) == Some(2)))
                            .ok_or_else(|| Error::Mapping("walk skipped the hypothesis layer".into()))?;
                        Some(Explanation { hidden: maintenance::hidden_of(clips, hidden)?, action: maintenance::action_of(clips, &a)? })
                    }
                    None => None,
                };
                Ok(Acted { action: explanation, walk: Some(record) })
            }
            MaintenanceAgent::QLearning { agent, clips, last } => {
                let percept = maintenance::percept_config(clips, symptoms)?;
                let chain = agent.step(&percept, rng)?;
                let explanation = Explanation {
                    hidden: maintenance::hidden_of(clips, agent.chosen(&chain, 0))?,
                    action: maintenance::action_of(clips, agent.chosen(&chain, 1))?,
                };
                *last = Some(chain);
                Ok(Acted { action: Some(explanation), walk: None })
            }
        }
    }

    /// Hypothesis reward to the percept→hypothesis edges, plausibility to hypothesis→action.
    pub fn learn(&mut self, fb: &MaintenanceFeedback, symptoms: &[u32]) -> Result<()> {
        match self {
            MaintenanceAgent::Meps(m) => {
                let rewards = BTreeMap::from([(1, fb.hypothesis), (2, fb.plausibility)]);
                update_split_at(&mut m.table, &rewards, &m.traversed, m.params, m.rule)
            }
            MaintenanceAgent::QLearning { agent, clips, last } => {
                let Some(chain) = last.take() else { return Ok(()) };
                let bootstraps = agent.tables().iter().any(|t| t.lambda() != 0.0);
                let next = if bootstraps && !fb.done {
                    Some(agent.first_argmax_chain(&maintenance::percept_config(clips, symptoms)?)?)
                } else {
                    None
                };
                agent.update(&chain, &[fb.hypothesis, fb.plausibility], next.as_ref())
            }
        }
    }

    pub fn meps_state(&mut self) -> Option<&mut Meps> {
        match self {
            MaintenanceAgent::Meps(m) => Some(m),
            MaintenanceAgent::QLearning { .. } => None,
        }
    }
}
