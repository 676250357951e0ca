//! Analytic parameter and walk-length bounds, and the adversarial walks that probe them.

use serde::{Deserialize, Serialize};

use crate::clips::{ClipId, ClipTable, ExcitationConfig, Hyperedge, Io};
use crate::deliberation::{apply_edge, Coupling, Termination, WalkEdge, WalkRecord};
use crate::env::maintenance::{BiasCutoffs, CategorySizes};
use crate::error::{Error, Result};
use crate::subsets::binomial;
use crate::table::{BiasKind, HRecord, ManyBodyTable};

/// Results above this are refused rather than reported.
const LIMIT: u128 = 1 << 63;

fn guard(v: Option<u128>, what: &str) -> Result<u128> {
    match v {
        Some(x) if x <= LIMIT => Ok(x),
        _ => Err(Error::Refused(format!("{what} exceeds 2^63"))),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound_name: String,
    /// `None` for a bound that does not exist (unbounded walks) or exceeds 2^63.
    pub analytic_value: Option<u128>,
    pub observed_value: u128,
    pub satisfied: bool,
}

impl BoundReport {
    pub fn upper(name: impl Into<String>, bound: WalkBound, observed: u128) -> Self {
        let analytic_value = bound.finite();
        BoundReport {
            bound_name: name.into(),
            analytic_value,
            observed_value: observed,
            satisfied: analytic_value.map_or(true, |b| observed <= b),
        }
    }

    pub fn lower(name: impl Into<String>, bound: u128, observed: u128) -> Self {
        BoundReport { bound_name: name.into(), analytic_value: Some(bound), observed_value: observed, satisfied: observed >= bound }
    }

    pub fn exact(name: impl Into<String>, expected: u128, observed: u128) -> Self {
        BoundReport { bound_name: name.into(), analytic_value: Some(expected), observed_value: observed, satisfied: observed == expected }
    }
}

fn io_extremes(io_set: &[Io]) -> Result<(u32, u32, u32)> {
    if io_set.is_empty() {
        return Err(Error::Config("IO set is empty".into()));
    }
    let max_i = io_set.iter().map(|io| io.inputs).max().unwrap_or(0);
    let max_o = io_set.iter().map(|io| io.outputs).max().unwrap_or(0);
    let max_io = io_set.iter().map(|io| io.inputs + io.outputs).max().unwrap_or(0);
    Ok((max_i, max_o, max_io))
}

/// `max I · max O · |V|^(max (i+o))`, an upper bound on the table size for `io_set`.
pub fn param_bound(io_set: &[Io], clip_count: u64) -> Result<u128> {
    let (max_i, max_o, max_io) = io_extremes(io_set)?;
    let pow = (clip_count as u128).checked_pow(max_io);
    guard(pow.and_then(|p| p.checked_mul(max_i as u128 * max_o as u128)), "parameter bound")
}

/// `((2^clip_count − 1)², 2^clip_count − 1)`: parameters and relevant h-values of the unrestricted agent.
pub fn unrestricted_costs(clip_count: u32) -> Result<(u128, u128)> {
    if clip_count == 0 {
        return Err(Error::Config("unrestricted costs need at least one clip".into()));
    }
    if clip_count > 40 {
        return Err(Error::Refused(format!("2^{clip_count} configurations overflow the supported range")));
    }
    let configs = (1u128 << clip_count) - 1;
    Ok((configs * configs, configs))
}

/// Upper bound on the relevant h-values at a configuration of `excitations ≥ 2` clips:
/// `min(2^|V|, 2|V|^maxO) · min(2^excitations, 2·excitations^maxI)`.
pub fn relevant_count_bound(io_set: &[Io], clip_count: u64, excitations: u64) -> Result<u128> {
    let (max_i, max_o, _) = io_extremes(io_set)?;
    let side = |size: u64, exponent: u32| -> Option<u128> {
        let all = if size < 127 { Some(1u128 << size) } else { None };
        let poly = (size as u128).checked_pow(exponent).and_then(|p| p.checked_mul(2));
        match (all, poly) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    };
    guard(side(clip_count, max_o).and_then(|a| side(excitations, max_i).and_then(|b| a.checked_mul(b))), "relevant-count bound")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WalkBound {
    Finite(u128),
    /// Walks of every length exist (cycles are possible).
    Unbounded,
}

impl WalkBound {
    pub fn finite(self) -> Option<u128> {
        match self {
            WalkBound::Finite(bound) => Some(bound),
            WalkBound::Unbounded => None,
        }
    }

    pub fn admits(self, length: usize) -> bool {
        self.finite().map_or(true, |bound| length as u128 <= bound)
    }
}

/// Longest possible walk on a layered table with the given layer sizes.
///
/// Feed-forward: `∏_{j<D}(|L_j|+1)`, tightened to `(D−1)·Σ|L_j|` when no transition creates
/// excitations. Shallow-first: `Σ_{j<D}|L_j|`. Discard-passive: `D−1`.
pub fn walk_length_bound(bias: BiasKind, layer_sizes: &[usize], io_set: &[Io]) -> Result<WalkBound> {
    if bias == BiasKind::MB1 {
        return Ok(WalkBound::Unbounded);
    }
    if layer_sizes.is_empty() || layer_sizes.contains(&0) {
        return Err(Error::Config(format!("invalid layer sizes {layer_sizes:?}")));
    }
    let depth = layer_sizes.len() as u128;
    let inner = &layer_sizes[..layer_sizes.len() - 1];
    let bound = match bias {
        BiasKind::DP => depth - 1,
        BiasKind::SF => inner.iter().map(|&s| s as u128).sum(),
        BiasKind::FF => {
            let product = inner.iter().try_fold(1u128, |acc, &s| acc.checked_mul(s as u128 + 1));
            let product = guard(product, "feed-forward walk bound")?;
            if io_set.iter().all(|io| io.outputs <= io.inputs) {
                let total: u128 = layer_sizes.iter().map(|&s| s as u128).sum();
                product.min((depth - 1) * total)
            } else {
                product
            }
        }
        BiasKind::MB1 => unreachable!(),
    };
    Ok(WalkBound::Finite(bound))
}

/// The exact N_l count of the maintenance agent for the given cutoffs and category sizes.
pub fn nl_formula(cutoffs: &BiasCutoffs, sizes: &CategorySizes) -> Result<u128> {
    cutoffs.check_against(sizes)?;
    let c = |n: usize, k: usize| binomial(n as u64, k as u64).expect("small binomial");
    let sum = |n: usize, top: usize| (1..=top).map(|k| c(n, k)).sum::<u128>();
    let hidden = sum(sizes.components, cutoffs.hidden[0]) * sum(sizes.causes, cutoffs.hidden[1]);
    let percept = sum(sizes.symptoms, cutoffs.symptoms);
    let action = sum(sizes.components, cutoffs.action[0]) * sum(sizes.fixes, cutoffs.action[1]);
    guard(hidden.checked_mul(percept + action), "N_l")
}

/// Deep-to-shallow removal walk with only `(1, o)` transitions: every step takes the lowest
/// excitation of the deepest non-final occupied layer and sends it to the first `o` clips of
/// the next layer. Clip ids follow [`ClipTable::with_layer_sizes`].
pub fn avalanche_walk(layer_sizes: &[usize], o: usize, start_excitations: usize) -> Result<WalkRecord> {
    let depth = layer_sizes.len();
    if depth < 2 || o < 2 {
        return Err(Error::Config("the avalanche needs at least two layers and o >= 2".into()));
    }
    if layer_sizes[1..].iter().any(|&s| s < o) {
        return Err(Error::Config(format!("every layer after the first needs at least {o} clips")));
    }
    if start_excitations < o || start_excitations > layer_sizes[0] {
        return Err(Error::Config(format!("start excitations must lie in {o}..={}", layer_sizes[0])));
    }
    let clips = ClipTable::with_layer_sizes(layer_sizes)?;
    let mut config: ExcitationConfig = clips.layer(1)[..start_excitations].iter().copied().collect();
    let mut configs = vec![config.clone()];
    let mut edges = Vec::new();
    while let Some(l) = (1..depth as u32).rev().find(|&l| config.iter().any(|c| clips.layer_of(c) == Some(l))) {
        let from = config.iter().find(|&c| clips.layer_of(c) == Some(l)).expect("occupied");
        let to: ExcitationConfig = clips.layer(l + 1)[..o].iter().copied().collect();
        let edge = Hyperedge::new([from].into_iter().collect(), to)?;
        config = apply_edge(&config, &edge, BiasKind::FF)?;
        configs.push(config.clone());
        edges.push(WalkEdge { io: edge.io(), edge });
    }
    Ok(WalkRecord { configs, edges, terminated_by: Termination::ActionCoupledOut })
}

/// Two clips passing one excitation back and forth, plus an exit clip.
///
/// Returns the table (strong `a↔b` edges, weak `a→exit`) and the exit clip.
pub fn cycle_fixture(cycle_h: f64, exit_h: f64) -> Result<(ManyBodyTable, ClipId)> {
    let clips = ClipTable::flat(&["a", "b", "exit"])?;
    let e = |d: u32, c: u32| Hyperedge::new([d].into(), [c].into());
    let records = vec![
        (e(0, 1)?, HRecord::fresh(cycle_h)),
        (e(1, 0)?, HRecord::fresh(cycle_h)),
        (e(0, 2)?, HRecord::fresh(exit_h)),
    ];
    Ok((ManyBodyTable::from_records(clips, &[Io::new(1, 1)], records)?, ClipId(2)))
}

/// Couples out once a given clip is excited.
#[derive(Debug, Clone, Copy)]
pub struct ExitCoupling(pub ClipId);

impl Coupling for ExitCoupling {
    type Observation = [ClipId];
    type Action = ();

    fn couple_in(&self, obs: &[ClipId]) -> Result<ExcitationConfig> {
        if obs.is_empty() {
            return Err(Error::Mapping("empty observation".into()));
        }
        Ok(obs.iter().copied().collect())
    }

    fn couple_out(&self, _: &ClipTable, config: &ExcitationConfig) -> Option<()> {
        config.contains(self.0).then_some(())
    }
}
