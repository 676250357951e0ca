//! Coupling in, random-walk steps, full walks and coupling out.

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::clips::{ClipId, ClipTable, ExcitationConfig, Hyperedge, Io};
use crate::error::{Error, Result};
use crate::probability::{sample_index, weights_into, ProbabilityRule};
use crate::table::{BiasKind, ManyBodyTable};

pub const DEFAULT_STEP_CAP: usize = 1000;

/// Maps observations onto percept clips and decides when and what to couple out.
pub trait Coupling {
    type Observation: ?Sized;
    type Action;

    /// The percept configuration of `obs`; empty or unknown observations are mapping errors.
    fn couple_in(&self, obs: &Self::Observation) -> Result<ExcitationConfig>;

    /// `Some(action)` once the walk should stop at `config`.
    fn couple_out(&self, clips: &ClipTable, config: &ExcitationConfig) -> Option<Self::Action>;
}

/// Observation = percept clip ids; couples out the whole configuration once every
/// excitation sits in the final layer.
#[derive(Debug, Clone, Copy, Default)]
pub struct FinalLayerCoupling;

impl Coupling for FinalLayerCoupling {
    type Observation = [ClipId];
    type Action = ExcitationConfig;

    fn couple_in(&self, obs: &[ClipId]) -> Result<ExcitationConfig> {
        if obs.is_empty() {
            return Err(Error::Mapping("empty observation".into()));
        }
        Ok(obs.iter().copied().collect())
    }

    fn couple_out(&self, clips: &ClipTable, config: &ExcitationConfig) -> Option<ExcitationConfig> {
        clips.all_in_final_layer(config).then(|| config.clone())
    }
}

/// Observation = percept clip ids; couples out the final-layer part of the configuration as
/// soon as it is nonempty. Passive excitations elsewhere do not delay the action.
#[derive(Debug, Clone, Copy, Default)]
pub struct ActionLayerCoupling;

impl Coupling for ActionLayerCoupling {
    type Observation = [ClipId];
    type Action = ExcitationConfig;

    fn couple_in(&self, obs: &[ClipId]) -> Result<ExcitationConfig> {
        FinalLayerCoupling.couple_in(obs)
    }

    fn couple_out(&self, clips: &ClipTable, config: &ExcitationConfig) -> Option<ExcitationConfig> {
        let last = clips.depth() as u32;
        let action = config.filter(|c| clips.layer_of(c) == Some(last));
        (!action.is_empty()).then_some(action)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Termination {
    ActionCoupledOut,
    StepCap,
    DeadEnd,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkEdge {
    pub io: Io,
    #[serde(flatten)]
    pub edge: Hyperedge,
}

/// One deliberation: `configs[k + 1]` is `configs[k]` after `edges[k]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkRecord {
    pub configs: Vec<ExcitationConfig>,
    pub edges: Vec<WalkEdge>,
    pub terminated_by: Termination,
}

impl WalkRecord {
    /// Number of steps taken.
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn last_config(&self) -> &ExcitationConfig {
        self.configs.last().expect("a walk starts from a percept")
    }

    /// Human-readable form with clip labels, one JSON object per walk.
    pub fn explain(&self, clips: &ClipTable) -> serde_json::Value {
        json!({
            "configs": self.configs.iter().map(|c| clips.labels(c)).collect::<Vec<_>>(),
            "edges": self.edges.iter().map(|e| json!({
                "io": e.io,
                "dom": clips.labels(&e.edge.domain),
                "cod": clips.labels(&e.edge.codomain),
            })).collect::<Vec<_>>(),
            "terminated_by": self.terminated_by,
        })
    }

    /// Checks `configs[k + 1] = apply_edge(configs[k], edges[k])` throughout.
    pub fn is_consistent(&self, bias: BiasKind) -> bool {
        self.configs.len() == self.edges.len() + 1
            && self.edges.iter().enumerate().all(|(k, e)| {
                apply_edge(&self.configs[k], &e.edge, bias).ok().as_ref() == Some(&self.configs[k + 1])
            })
    }
}

/// Clears prior excitations and returns the percept configuration of `obs`.
pub fn couple_in<C: Coupling>(obs: &C::Observation, coupling: &C) -> Result<ExcitationConfig> {
    let config = coupling.couple_in(obs)?;
    if config.is_empty() {
        return Err(Error::Mapping("observation maps to no percept clip".into()));
    }
    Ok(config)
}

/// The configuration after `edge` fires at `config`.
pub fn apply_edge(config: &ExcitationConfig, edge: &Hyperedge, bias: BiasKind) -> Result<ExcitationConfig> {
    if !edge.domain.is_subset(config) {
        return Err(Error::Contract(format!("domain {} is not inside {config}", edge.domain)));
    }
    Ok(match bias {
        BiasKind::DP => edge.codomain.clone(),
        BiasKind::MB1 | BiasKind::FF | BiasKind::SF => config.difference(&edge.domain).union(&edge.codomain),
    })
}

/// Scratch buffers reused across steps.
#[derive(Debug, Default)]
pub struct StepScratch {
    relevant: Vec<u32>,
    hs: Vec<f64>,
    weights: Vec<f64>,
}

/// Samples one relevant edge and applies it. Draws exactly one uniform from `rng`.
pub fn step<R: Rng + ?Sized>(
    config: &ExcitationConfig,
    table: &ManyBodyTable,
    bias: BiasKind,
    rule: ProbabilityRule,
    rng: &mut R,
) -> Result<(Hyperedge, ExcitationConfig)> {
    let (k, next) = step_with(config, table, bias, rule, rng, &mut StepScratch::default())?;
    Ok((table.edge(k), next))
}

/// As [`step`], returning the table position of the sampled edge.
pub fn step_with<R: Rng + ?Sized>(
    config: &ExcitationConfig,
    table: &ManyBodyTable,
    bias: BiasKind,
    rule: ProbabilityRule,
    rng: &mut R,
    scratch: &mut StepScratch,
) -> Result<(usize, ExcitationConfig)> {
    table.relevant_indices(config, bias, &mut scratch.relevant)?;
    if scratch.relevant.is_empty() {
        return Err(Error::DeadEnd(config.clone()));
    }
    scratch.hs.clear();
    scratch.hs.extend(scratch.relevant.iter().map(|&k| table.h_value(k as usize)));
    let total = weights_into(&scratch.hs, rule, &mut scratch.weights)?;
    let u: f64 = rng.gen();
    let k = scratch.relevant[sample_index(&scratch.weights, total, u)] as usize;
    let edge = Hyperedge { domain: table.domain(k).clone(), codomain: table.codomain(k).clone() };
    let next = apply_edge(config, &edge, bias)?;
    Ok((k, next))
}

/// A finished walk, the table positions of its edges and the coupled-out action.
#[derive(Debug, Clone)]
pub struct WalkOutcome<A> {
    pub record: WalkRecord,
    pub positions: Vec<usize>,
    pub action: Option<A>,
}

/// Couples in `obs` and steps until the coupling fires, `step_cap` steps were taken, or no
/// edge is relevant. Dead ends and the cap are recorded, not raised.
pub fn walk<C: Coupling, R: Rng + ?Sized>(
    obs: &C::Observation,
    table: &ManyBodyTable,
    bias: BiasKind,
    rule: ProbabilityRule,
    coupling: &C,
    step_cap: usize,
    rng: &mut R,
) -> Result<(WalkRecord, Option<C::Action>)> {
    let out = walk_from(couple_in(obs, coupling)?, table, bias, rule, coupling, step_cap, rng)?;
    Ok((out.record, out.action))
}

/// [`walk`] from an already coupled-in configuration.
pub fn walk_from<C: Coupling, R: Rng + ?Sized>(
    start: ExcitationConfig,
    table: &ManyBodyTable,
    bias: BiasKind,
    rule: ProbabilityRule,
    coupling: &C,
    step_cap: usize,
    rng: &mut R,
) -> Result<WalkOutcome<C::Action>> {
    if step_cap == 0 {
        return Err(Error::Config("step cap must be at least 1".into()));
    }
    let clips = table.clips();
    let mut scratch = StepScratch::default();
    let mut configs = vec![start];
    let mut edges = Vec::new();
    let mut positions = Vec::new();
    loop {
        let current = configs.last().expect("nonempty");
        if let Some(action) = coupling.couple_out(clips, current) {
            let record = WalkRecord { configs, edges, terminated_by: Termination::ActionCoupledOut };
            return Ok(WalkOutcome { record, positions, action: Some(action) });
        }
        if edges.len() == step_cap {
            let record = WalkRecord { configs, edges, terminated_by: Termination::StepCap };
            return Ok(WalkOutcome { record, positions, action: None });
        }
        match step_with(current, table, bias, rule, rng, &mut scratch) {
            Ok((k, next)) => {
                edges.push(WalkEdge { io: table.io(k), edge: table.edge(k) });
                positions.push(k);
                configs.push(next);
            }
            Err(Error::DeadEnd(_)) => {
                let record = WalkRecord { configs, edges, terminated_by: Termination::DeadEnd };
                return Ok(WalkOutcome { record, positions, action: None });
            }
            Err(e) => return Err(e),
        }
    }
}
