//! Glow and reward updates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::deliberation::WalkRecord;
use crate::error::{Error, Result};
use crate::probability::ProbabilityRule;
use crate::table::ManyBodyTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningParams {
    /// Forgetting rate toward `h_init`, in `[0, 1]`.
    pub gamma: f64,
    /// Glow damping, in `[0, 1]`.
    pub eta: f64,
}

impl LearningParams {
    pub fn new(gamma: f64, eta: f64) -> Result<Self> {
        let p = LearningParams { gamma, eta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("gamma", self.gamma), ("eta", self.eta)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// Table positions of a walk's edges; an edge missing from the table is an integrity error.
pub fn walk_positions(table: &ManyBodyTable, walk: &WalkRecord) -> Result<Vec<usize>> {
    walk.edges
        .iter()
        .map(|e| {
            table
                .find(&e.edge)
                .filter(|&k| table.io(k) == e.io)
                .ok_or_else(|| Error::Integrity(format!("walk edge {} is not in the table", e.edge)))
        })
        .collect()
}

/// Traversed edges glow 1; every other glow is multiplied by `1 - eta`.
pub fn update_glow(table: &mut ManyBodyTable, walk: &WalkRecord, eta: f64) -> Result<()> {
    let positions = walk_positions(table, walk)?;
    update_glow_at(table, &positions, eta);
    Ok(())
}

/// [`update_glow`] with the traversed edges given by table position.
pub fn update_glow_at(table: &mut ManyBodyTable, traversed: &[usize], eta: f64) {
    table.refresh_glow(traversed, eta);
}

/// `h ← h − γ(h − h_init) + R·glow` on every edge; the standard rule then floors at `h_min`.
pub fn update_h(table: &mut ManyBodyTable, reward: f64, params: LearningParams, rule: ProbabilityRule) {
    table.apply_rewards(|_, _| reward, params.gamma, rule.h_floor());
}

/// Glow update plus one reward per source layer: an edge out of layer `l` is credited with
/// `rewards[l]` (0 if absent). Layer-pair tables thereby never share glow or reward.
pub fn update_split(
    table: &mut ManyBodyTable,
    rewards: &BTreeMap<u32, f64>,
    walk: &WalkRecord,
    params: LearningParams,
    rule: ProbabilityRule,
) -> Result<()> {
    let positions = walk_positions(table, walk)?;
    update_split_at(table, rewards, &positions, params, rule)
}

/// [`update_split`] with the traversed edges given by table position.
pub fn update_split_at(
    table: &mut ManyBodyTable,
    rewards: &BTreeMap<u32, f64>,
    traversed: &[usize],
    params: LearningParams,
    rule: ProbabilityRule,
) -> Result<()> {
    table.clips().require_layers("a split update")?;
    table.refresh_glow(traversed, params.eta);
    table.apply_rewards(
        |t, k| t.source_layer(k).and_then(|l| rewards.get(&l)).copied().unwrap_or(0.0),
        params.gamma,
        rule.h_floor(),
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::clips::{ClipId, ClipTable, Hyperedge, Io};
    use crate::deliberation::{walk, FinalLayerCoupling};
    use crate::table::{build_table, BiasKind, FeedForward, HRecord};

    const SOFT: ProbabilityRule = ProbabilityRule::Softmax { beta: 1.0 };

    fn table() -> ManyBodyTable {
        let clips = ClipTable::with_layer_sizes(&[3, 3, 2]).unwrap();
        build_table(clips, &[Io::new(1, 1), Io::new(2, 1), Io::new(1, 2)], &FeedForward::new(), 1.0).unwrap()
    }

    fn sample_walk(t: &ManyBodyTable, seed: u64) -> WalkRecord {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        walk(&[ClipId(0), ClipId(1)][..], t, BiasKind::DP, SOFT, &FinalLayerCoupling, 100, &mut rng).unwrap().0
    }

    /// Eager reference: visits every stored edge with the textbook formulas.
    fn reference(records: &mut [HRecord], traversed: &[usize], reward: f64, p: LearningParams, floor: Option<f64>) {
        for (k, rec) in records.iter_mut().enumerate() {
            rec.glow = if traversed.contains(&k) { 1.0 } else { (1.0 - p.eta) * rec.glow };
            rec.h_value = rec.h_value - p.gamma * (rec.h_value - rec.h_init) + reward * rec.glow;
            if let Some(f) = floor {
                rec.h_value = rec.h_value.max(f);
            }
        }
    }

    fn records(t: &ManyBodyTable) -> Vec<HRecord> {
        (0..t.len()).map(|k| t.record(k)).collect()
    }

    #[test]
    fn full_damping_leaves_only_traversed_glow() {
        let mut t = table();
        let w1 = sample_walk(&t, 1);
        update_glow(&mut t, &w1, 1.0).unwrap();
        let w2 = sample_walk(&t, 2);
        update_glow(&mut t, &w2, 1.0).unwrap();
        let hot = walk_positions(&t, &w2).unwrap();
        for k in 0..t.len() {
            assert_eq!(t.record(k).glow, if hot.contains(&k) { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn zero_damping_keeps_glow_and_half_damping_halves() {
        let mut t = table();
        let w = sample_walk(&t, 5);
        let k = walk_positions(&t, &w).unwrap()[0];
        update_glow(&mut t, &w, 0.0).unwrap();
        update_glow_at(&mut t, &[], 0.0);
        assert_eq!(t.record(k).glow, 1.0);
        update_glow_at(&mut t, &[], 0.2);
        assert_eq!(t.record(k).glow, 0.8);
        update_glow_at(&mut t, &[], 0.5);
        assert_eq!(t.record(k).glow, 0.4);
    }

    #[test]
    fn reward_formula_examples() {
        let mut t = table();
        let w = sample_walk(&t, 9);
        let hot = walk_positions(&t, &w).unwrap();
        update_glow(&mut t, &w, 1.0).unwrap();
        update_h(&mut t, 1.0, LearningParams::new(0.0, 1.0).unwrap(), SOFT);
        assert_eq!(t.h_value(hot[0]), 2.0);

        let before = records(&t);
        update_h(&mut t, 0.0, LearningParams::new(0.0, 1.0).unwrap(), SOFT);
        assert_eq!(records(&t), before);

        t.set_h_value(hot[0], 5.0);
        update_glow_at(&mut t, &[], 1.0);
        update_h(&mut t, 123.0, LearningParams::new(1.0, 1.0).unwrap(), SOFT);
        assert_eq!(t.h_value(hot[0]), 1.0);
    }

    #[test]
    fn missing_edge_is_an_integrity_error() {
        let mut t = table();
        let mut w = sample_walk(&t, 3);
        // Both clips sit in layer 1, so no feed-forward table stores this edge.
        w.edges[0].edge = Hyperedge::new([0].into(), [1].into()).unwrap();
        assert!(matches!(update_glow(&mut t, &w, 1.0), Err(Error::Integrity(_))));
    }

    #[test]
    fn split_rewards_follow_source_layer() {
        let mut t = table();
        let w = sample_walk(&t, 4);
        assert_eq!(w.len(), 2);
        let hot = walk_positions(&t, &w).unwrap();
        let rewards = BTreeMap::from([(1, 3.0), (2, -0.5)]);
        let before = records(&t);
        update_split(&mut t, &rewards, &w, LearningParams::new(0.0, 1.0).unwrap(), SOFT).unwrap();
        for k in 0..t.len() {
            let expected = if k == hot[0] { 4.0 } else if k == hot[1] { 0.5 } else { before[k].h_value };
            assert_eq!(t.h_value(k), expected);
        }
    }

    proptest! {
        #[test]
        fn lazy_updates_match_eager_reference(
            seeds in proptest::collection::vec(0u64..1000, 1..12),
            rewards in proptest::collection::vec(-3.0f64..3.0, 12),
            gamma in prop_oneof![Just(0.0), 0.0f64..1.0],
            eta in prop_oneof![Just(1.0), 0.0f64..1.0],
            standard in any::<bool>(),
        ) {
            let p = LearningParams::new(gamma, eta).unwrap();
            let rule = if standard { ProbabilityRule::Standard { h_min: 0.25 } } else { SOFT };
            let mut t = table();
            let mut eager = records(&t);
            for (s, reward) in seeds.iter().zip(&rewards) {
                let w = sample_walk(&t, *s);
                let hot = walk_positions(&t, &w).unwrap();
                update_glow(&mut t, &w, eta).unwrap();
                update_h(&mut t, *reward, p, rule);
                reference(&mut eager, &hot, *reward, p, rule.h_floor());
            }
            for (k, rec) in eager.iter().enumerate() {
                prop_assert_eq!(t.record(k).h_value.to_bits(), rec.h_value.to_bits());
                prop_assert_eq!(t.record(k).glow.to_bits(), rec.glow.to_bits());
            }
            if let Some(floor) = rule.h_floor() {
                prop_assert!(t.h_values().iter().all(|&value| value >= floor));
            }
        }

        #[test]
        fn forgetting_without_reward_contracts_toward_init(gamma in 0.01f64..1.0, start in -20.0f64..20.0) {
            let mut t = table();
            t.set_h_value(0, start);
            let p = LearningParams::new(gamma, 1.0).unwrap();
            let mut gap = (start - 1.0).abs();
            for _ in 0..20 {
                update_h(&mut t, 0.0, p, SOFT);
                let next = (t.h_value(0) - 1.0).abs();
                prop_assert!(next <= gap);
                gap = next;
            }
        }

        #[test]
        fn updates_commute_with_serialization(seed in 0u64..500, reward in -5.0f64..5.0) {
            let mut t = table();
            let w = sample_walk(&t, seed);
            update_glow(&mut t, &w, 0.3).unwrap();
            update_h(&mut t, reward, LearningParams::new(0.1, 0.3).unwrap(), SOFT);
            let mut back = ManyBodyTable::from_json(t.clips_arc().clone(), &t.to_json().unwrap()).unwrap();
            update_glow(&mut t, &w, 0.3).unwrap();
            update_h(&mut t, reward, LearningParams::new(0.1, 0.3).unwrap(), SOFT);
            update_glow(&mut back, &w, 0.3).unwrap();
            update_h(&mut back, reward, LearningParams::new(0.1, 0.3).unwrap(), SOFT);
            prop_assert_eq!(back, t);
        }
    }
}
