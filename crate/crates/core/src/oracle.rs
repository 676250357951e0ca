//! Exact-enumeration oracle: the standard (whole-configuration) ECM induced by a many-body
//! table, and a check that both assign the same step probabilities.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::clips::{ClipId, ClipTable, ExcitationConfig, Hyperedge, Io};
use crate::deliberation::apply_edge;
use crate::error::{Error, Result};
use crate::probability::{to_probabilities, ProbabilityRule};
use crate::table::{BiasKind, DomainMatch, HRecord, ManyBodyTable};

/// Largest configuration universe the oracle will enumerate.
pub const UNIVERSE_CAP: usize = 1 << 16;

/// Weighted edges between whole configurations; only pairs with at least one summand exist.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StandardEcm {
    pub edges: BTreeMap<(ExcitationConfig, ExcitationConfig), f64>,
}

impl StandardEcm {
    pub fn h_value(&self, from: &ExcitationConfig, to: &ExcitationConfig) -> Option<f64> {
        self.edges.get(&(from.clone(), to.clone())).copied()
    }

    /// Outgoing `(C_out, h)` of `from`, ascending by `C_out`.
    pub fn row<'a>(&'a self, from: &ExcitationConfig) -> Vec<(&'a ExcitationConfig, f64)> {
        self.edges.iter().filter(|((a, _), _)| a == from).map(|((_, b), &value)| (b, value)).collect()
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Sum in ascending order so grouped totals do not depend on discovery order.
fn sorted_sum(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs.into_iter().sum()
}

/// Every nonempty subset of the clips, refusing above [`UNIVERSE_CAP`].
pub fn config_universe(clips: &ClipTable) -> Result<Vec<ExcitationConfig>> {
    let n = clips.len();
    if n >= 63 || (1usize << n) - 1 > UNIVERSE_CAP {
        return Err(Error::Refused(format!("{n} clips give more than {UNIVERSE_CAP} configurations")));
    }
    Ok((1u64..1 << n)
        .map(|mask| (0..n as u32).filter(|b| mask >> b & 1 == 1).map(ClipId).collect())
        .collect())
}

pub fn induce_standard(table: &ManyBodyTable, bias: BiasKind, universe: &[ExcitationConfig]) -> Result<StandardEcm> {
    induce_standard_capped(table, bias, universe, UNIVERSE_CAP)
}

/// `h(C_in, C_out)` = sum of the h-values of all stored edges that are relevant at `C_in` and
/// lead to `C_out`, for every `C_in` in `universe`.
///
/// Walks the stored edges directly instead of the table's relevance index.
pub fn induce_standard_capped(
    table: &ManyBodyTable,
    bias: BiasKind,
    universe: &[ExcitationConfig],
    cap: usize,
) -> Result<StandardEcm> {
    if universe.len() > cap {
        return Err(Error::Refused(format!("universe of {} configurations exceeds the cap {cap}", universe.len())));
    }
    let clips = table.clips();
    if bias.needs_layers() {
        clips.require_layers("this inductive bias")?;
    }
    let mut out = BTreeMap::new();
    for c_in in universe {
        let shallow = clips.shallowest_layer(c_in);
        let mut summands: BTreeMap<ExcitationConfig, Vec<f64>> = BTreeMap::new();
        for k in 0..table.len() {
            let dom = table.domain(k);
            let admissible = match table.matching() {
                DomainMatch::Subset => dom.ids().iter().all(|c| c_in.ids().contains(c)),
                DomainMatch::Exact => dom == c_in,
            };
            if !admissible || (bias == BiasKind::SF && dom.ids().iter().any(|&c| clips.layer_of(c) != shallow)) {
                continue;
            }
            let c_out: ExcitationConfig = if bias == BiasKind::DP {
                table.codomain(k).clone()
            } else {
                let passive = c_in.ids().iter().filter(|c| !dom.ids().contains(c));
                passive.chain(table.codomain(k).ids()).copied().collect::<BTreeSet<_>>().into_iter().collect()
            };
            summands.entry(c_out).or_default().push(table.h_value(k));
        }
        for (c_out, hs) in summands {
            out.insert((c_in.clone(), c_out), sorted_sum(hs));
        }
    }
    Ok(StandardEcm { edges: out })
}

/// Probability of each next configuration under the many-body step, grouping edges that
/// lead to the same configuration.
pub fn exact_step_distribution(
    config: &ExcitationConfig,
    table: &ManyBodyTable,
    bias: BiasKind,
    rule: ProbabilityRule,
) -> Result<BTreeMap<ExcitationConfig, f64>> {
    let relevant = table.relevant_hvalues(config, bias)?;
    let hs: Vec<f64> = relevant.iter().map(|(_, value)| *value).collect();
    let ps = to_probabilities(&hs, rule)?;
    let mut grouped: BTreeMap<ExcitationConfig, Vec<f64>> = BTreeMap::new();
    for ((edge, _), p) in relevant.iter().zip(ps) {
        grouped.entry(apply_edge(config, edge, bias)?).or_default().push(p);
    }
    Ok(grouped.into_iter().map(|(c, ps)| (c, sorted_sum(ps))).collect())
}

/// Largest absolute difference between the many-body step distribution at `config` and the
/// standard-ECM distribution `h(config, ·) / Σ h(config, ·)` of the induced table.
pub fn check_equivalence(
    table: &ManyBodyTable,
    bias: BiasKind,
    rule: ProbabilityRule,
    config: &ExcitationConfig,
) -> Result<f64> {
    if let ProbabilityRule::Softmax { .. } = rule {
        return Err(Error::Refused("equivalence holds only under the standard probability rule".into()));
    }
    let many = exact_step_distribution(config, table, bias, rule)?;
    let induced = induce_standard(table, bias, std::slice::from_ref(config))?;
    let row = induced.row(config);
    let total = sorted_sum(row.iter().map(|(_, value)| *value).collect());
    let standard: BTreeMap<&ExcitationConfig, f64> = row.into_iter().map(|(c, value)| (c, value / total)).collect();
    let keys: BTreeSet<&ExcitationConfig> = many.keys().chain(standard.keys().copied()).collect();
    Ok(keys
        .into_iter()
        .map(|c| (many.get(c).copied().unwrap_or(0.0) - standard.get(c).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max))
}

/// A random table with at most six clips, IO ⊆ {1,2}², a random edge subset with positive
/// h-values, and a configuration with at least one relevant edge.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, bias: BiasKind) -> (ManyBodyTable, ExcitationConfig) {
    loop {
        let clips = if bias.needs_layers() {
            let depth = rng.gen_range(2..=3);
            let mut sizes = vec![1; depth];
            for _ in depth..rng.gen_range(depth.max(3)..=6) {
                let l = rng.gen_range(0..depth);
                sizes[l] += 1;
            }
            ClipTable::with_layer_sizes(&sizes).expect("valid sizes")
        } else {
            let n = rng.gen_range(2..=6);
            ClipTable::flat(&(0..n).map(|k| format!("v{k}")).collect::<Vec<_>>()).expect("valid labels")
        };
        let all_io = [Io::new(1, 1), Io::new(1, 2), Io::new(2, 1), Io::new(2, 2)];
        let io_set: Vec<Io> = all_io.iter().copied().filter(|_| rng.gen_bool(0.6)).collect();
        if io_set.is_empty() {
            continue;
        }
        let ids: Vec<ClipId> = clips.ids().collect();
        let mut records = Vec::new();
        for io in &io_set {
            for dom in crate::subsets::subsets(&ids, io.inputs as usize) {
                for cod in crate::subsets::subsets(&ids, io.outputs as usize) {
                    let layered_ok = !bias.needs_layers() || {
                        let l = |s: &[ClipId]| s.iter().map(|&c| clips.layer_of(c)).collect::<BTreeSet<_>>();
                        let (a, b) = (l(&dom), l(&cod));
                        a.len() == 1 && b.len() == 1 && b.first().unwrap().unwrap() == a.first().unwrap().unwrap() + 1
                    };
                    if dom != cod && layered_ok && rng.gen_bool(0.6) {
                        let edge = Hyperedge::new(ExcitationConfig::from_sorted(dom.clone()).unwrap(), ExcitationConfig::from_sorted(cod).unwrap()).unwrap();
                        let h_value = rng.gen_range(0.05..5.0);
                        records.push((edge, HRecord { h_value, h_init: h_value, glow: 0.0 }));
                    }
                }
            }
        }
        if records.is_empty() {
            continue;
        }
        let table = ManyBodyTable::from_records(clips, &io_set, records).expect("valid records");
        let mut shuffled = ids.clone();
        for _ in 0..50 {
            shuffled.shuffle(rng);
            let size = rng.gen_range(1..=ids.len());
            let config: ExcitationConfig = shuffled[..size].iter().copied().collect();
            if table.relevant_hvalues(&config, bias).is_ok() {
                return (table, config);
            }
        }
    }
}

/// Largest deviation per bias over `trials` random instances each.
pub fn run_trials<R: Rng + ?Sized>(rng: &mut R, trials: usize) -> Result<BTreeMap<String, f64>> {
    let rule = ProbabilityRule::Standard { h_min: 0.0 };
    let mut worst = BTreeMap::new();
    for bias in BiasKind::ALL {
        let mut max = 0.0f64;
        for _ in 0..trials {
            let (table, config) = random_instance(rng, bias);
            max = max.max(check_equivalence(&table, bias, rule, &config)?);
        }
        worst.insert(format!("{bias:?}"), max);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::deliberation::step;
    use crate::learning::{update_glow_at, update_h, LearningParams};
    use crate::table::{build_table, AllEdges, FeedForward};

    const STD: ProbabilityRule = ProbabilityRule::Standard { h_min: 0.0 };

    fn edge(d: &[u32], c: &[u32]) -> Hyperedge {
        Hyperedge::new(d.iter().map(|&k| ClipId(k)).collect(), c.iter().map(|&k| ClipId(k)).collect()).unwrap()
    }

    #[test]
    fn single_summand() {
        let clips = ClipTable::flat(&["c1", "c2"]).unwrap();
        let t = ManyBodyTable::from_records(clips, &[Io::new(1, 1)], vec![(edge(&[0], &[1]), HRecord::fresh(0.7))]).unwrap();
        let std = induce_standard(&t, BiasKind::MB1, &[[0].into()]).unwrap();
        assert_eq!(std.h_value(&[0].into(), &[1].into()), Some(0.7));
        assert_eq!(std.len(), 1);
        assert_eq!(check_equivalence(&t, BiasKind::MB1, STD, &[0].into()).unwrap(), 0.0);
    }

    #[test]
    fn passive_and_active_summands_add() {
        let clips = ClipTable::flat(&["c1", "c2", "c3"]).unwrap();
        let t = ManyBodyTable::from_records(
            clips,
            &[Io::new(1, 1), Io::new(2, 2)],
            vec![(edge(&[0], &[2]), HRecord::fresh(0.5)), (edge(&[0, 1], &[1, 2]), HRecord::fresh(1.25))],
        )
        .unwrap();
        let std = induce_standard(&t, BiasKind::MB1, &[[0, 1].into()]).unwrap();
        assert_eq!(std.h_value(&[0, 1].into(), &[1, 2].into()), Some(1.75));
        // No summand reaches {c3} alone.
        assert_eq!(std.h_value(&[0, 1].into(), &[2].into()), None);
    }

    #[test]
    fn example_distribution_groups_results() {
        let clips = ClipTable::layered(&[&["c1", "c2", "c3", "c4"], &["d1", "d2", "d3", "d4"]]).unwrap();
        let t = build_table(clips, &[Io::new(1, 1), Io::new(2, 2)], &FeedForward::new(), 1.0).unwrap();
        let dist = exact_step_distribution(&[0, 1, 2].into(), &t, BiasKind::FF, STD).unwrap();
        assert!((dist.values().sum::<f64>() - 1.0).abs() < 1e-12);
        // Every relevant edge has its own result here, so each carries 1/30.
        assert_eq!(dist.len(), 30);
        assert!(dist.values().all(|p| (p - 1.0 / 30.0).abs() < 1e-15));
    }

    #[test]
    fn distribution_matches_sampling() {
        let clips = ClipTable::flat(&["a", "b", "c"]).unwrap();
        let mut t = build_table(clips, &[Io::new(1, 1), Io::new(2, 1)], &AllEdges, 1.0).unwrap();
        for k in 0..t.len() {
            t.set_h_value(k, 0.5 + (k % 4) as f64);
        }
        let config: ExcitationConfig = [0, 1].into();
        let dist = exact_step_distribution(&config, &t, BiasKind::MB1, STD).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let mut counts: BTreeMap<ExcitationConfig, usize> = BTreeMap::new();
        for _ in 0..n {
            *counts.entry(step(&config, &t, BiasKind::MB1, STD, &mut rng).unwrap().1).or_default() += 1;
        }
        for (c, p) in &dist {
            let observed = counts.get(c).copied().unwrap_or(0) as f64 / n as f64;
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            assert!((observed - p).abs() <= 3.0 * sigma + 1e-12, "{c}: {observed} vs {p}");
        }
    }

    #[test]
    fn softmax_is_refused() {
        let clips = ClipTable::flat(&["a", "b"]).unwrap();
        let t = build_table(clips, &[Io::new(1, 1)], &AllEdges, 1.0).unwrap();
        let err = check_equivalence(&t, BiasKind::MB1, ProbabilityRule::Softmax { beta: 1.0 }, &[0].into());
        assert!(matches!(err, Err(Error::Refused(_))));
    }

    #[test]
    fn universe_cap_is_enforced() {
        let clips = ClipTable::flat(&["a", "b", "c"]).unwrap();
        let t = build_table(clips.clone(), &[Io::new(1, 1)], &AllEdges, 1.0).unwrap();
        let universe = config_universe(&clips).unwrap();
        assert_eq!(universe.len(), 7);
        assert!(matches!(induce_standard_capped(&t, BiasKind::MB1, &universe, 6), Err(Error::Refused(_))));
        let wide = ClipTable::flat(&(0..17).map(|k| format!("v{k}")).collect::<Vec<_>>()).unwrap();
        assert!(config_universe(&wide).is_err());
    }

    #[test]
    fn random_instances_are_equivalent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let worst = run_trials(&mut rng, 25).unwrap();
        assert!(worst.values().all(|&d| d <= 1e-12), "{worst:?}");
    }

    /// Two stored edges feed the same induced pair; rewarding one of them through a walk
    /// that never visits that pair still moves the pair's induced weight.
    #[test]
    fn learning_breaks_equivalence_of_updates() {
        let clips = ClipTable::flat(&["c1", "c2", "c3"]).unwrap();
        let mut t = ManyBodyTable::from_records(
            clips.clone(),
            &[Io::new(1, 1), Io::new(2, 2)],
            vec![(edge(&[0], &[2]), HRecord::fresh(1.0)), (edge(&[0, 1], &[1, 2]), HRecord::fresh(1.0))],
        )
        .unwrap();
        let universe = config_universe(&clips).unwrap();
        let before = induce_standard(&t, BiasKind::MB1, &universe).unwrap();
        // Traverse c1 -> c3 from the configuration {c1} only.
        let k = t.find(&edge(&[0], &[2])).unwrap();
        update_glow_at(&mut t, &[k], 1.0);
        update_h(&mut t, 1.0, LearningParams::new(0.0, 1.0).unwrap(), STD);
        let after = induce_standard(&t, BiasKind::MB1, &universe).unwrap();
        let untraversed = (ExcitationConfig::from([0, 1]), ExcitationConfig::from([1, 2]));
        assert_ne!(before.edges[&untraversed], after.edges[&untraversed]);
    }
}
