//! Invasion games: a defender picks a door from a three-valued percept.

use rand::Rng;

use super::Environment;
use crate::clips::{ClipId, ClipSpec, ClipTable, ExcitationConfig};
use crate::error::{Error, Result};

pub const CORRECT_DISTRACTION: f64 = 1.0;
pub const CORRECT_DECEPTION: f64 = 2.0;
pub const WRONG: f64 = -10.0;
/// Wrong in the even case, or fooled by the announced door in the odd case.
pub const WRONG_DECEIVED: f64 = -11.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GameKind {
    /// Two doors; the correct one is the parity of the first two values, the third distracts.
    Distraction,
    /// Ten doors; the second value says whether the announced door is honest.
    Deceptive,
}

impl GameKind {
    /// Inclusive value range of each percept component.
    pub fn ranges(self) -> [(i64, i64); 3] {
        match self {
            GameKind::Distraction => [(0, 9), (0, 9), (0, 9)],
            GameKind::Deceptive => [(0, 9), (10, 13), (0, 9)],
        }
    }

    pub fn doors(self) -> u32 {
        match self {
            GameKind::Distraction => 2,
            GameKind::Deceptive => 10,
        }
    }

    pub fn reward(self, percept: [i64; 3], action: u32) -> Result<f64> {
        match self {
            GameKind::Distraction => distraction_reward(percept, action),
            GameKind::Deceptive => deception_reward(percept, action),
        }
    }

    /// Observables are layer 1 (kinds `obs1..obs3`), doors are layer 2 (kind `door`).
    pub fn clip_table(self) -> ClipTable {
        let mut specs = Vec::new();
        for (k, (lo, hi)) in self.ranges().into_iter().enumerate() {
            for v in lo..=hi {
                specs.push(ClipSpec::new(format!("obs{}={v}", k + 1)).layer(1).category(format!("obs{}", k + 1), v));
            }
        }
        for d in 0..self.doors() {
            specs.push(ClipSpec::new(format!("door{d}")).layer(2).category("door", d as i64));
        }
        ClipTable::new(specs).expect("static clip table")
    }

    pub fn percept_config(self, percept: [i64; 3]) -> Result<ExcitationConfig> {
        let mut offset = 0u32;
        let mut ids = Vec::with_capacity(3);
        for (v, (lo, hi)) in percept.into_iter().zip(self.ranges()) {
            if !(lo..=hi).contains(&v) {
                return Err(Error::Mapping(format!("percept value {v} outside {lo}..={hi}")));
            }
            ids.push(ClipId(offset + (v - lo) as u32));
            offset += (hi - lo + 1) as u32;
        }
        Ok(ids.into_iter().collect())
    }

    /// The door named by a final-layer configuration of exactly one door clip.
    pub fn door_of(self, clips: &ClipTable, action: &ExcitationConfig) -> Result<u32> {
        match action.ids() {
            [one] => match &clips.clip(*one).category {
                Some(c) if c.kind == "door" => Ok(c.value as u32),
                _ => Err(Error::Mapping(format!("clip {} is not a door", clips.label(*one)))),
            },
            _ => Err(Error::Mapping(format!("expected a single door, got {}", action.len()))),
        }
    }
}

fn check_action(action: u32, doors: u32) -> Result<()> {
    if action >= doors {
        return Err(Error::Mapping(format!("door {action} outside 0..{doors}")));
    }
    Ok(())
}

pub fn distraction_reward(percept: [i64; 3], action: u32) -> Result<f64> {
    check_action(action, 2)?;
    let correct = (percept[0] + percept[1]).rem_euclid(2) as u32;
    Ok(if action == correct { CORRECT_DISTRACTION } else { WRONG })
}

/// Even `v1+v2`: the announced door `v1` is honest. Odd: the attacker goes one door over, wrapping.
pub fn deception_reward(percept: [i64; 3], action: u32) -> Result<f64> {
    check_action(action, 10)?;
    let announced = percept[0].rem_euclid(10) as u32;
    let even = (percept[0] + percept[1]).rem_euclid(2) == 0;
    Ok(if even {
        if action == announced { CORRECT_DECEPTION } else { WRONG_DECEIVED }
    } else if action == (announced + 1) % 10 {
        CORRECT_DECEPTION
    } else if action == announced {
        WRONG_DECEIVED
    } else {
        WRONG
    })
}

/// One round per episode: a fresh uniform percept, one door, one reward.
#[derive(Debug, Clone)]
pub struct InvasionGame {
    kind: GameKind,
    percept: [i64; 3],
}

impl InvasionGame {
    pub fn new(kind: GameKind) -> Self {
        InvasionGame { kind, percept: [kind.ranges()[0].0, kind.ranges()[1].0, kind.ranges()[2].0] }
    }

    pub fn kind(&self) -> GameKind {
        self.kind
    }
}

impl Environment for InvasionGame {
    type Percept = [i64; 3];
    type Action = u32;
    type Feedback = f64;

    fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let ranges = self.kind.ranges();
        self.percept = [rng.gen_range(ranges[0].0..=ranges[0].1), rng.gen_range(ranges[1].0..=ranges[1].1), rng.gen_range(ranges[2].0..=ranges[2].1)];
    }

    fn percept(&self) -> &[i64; 3] {
        &self.percept
    }

    fn act(&mut self, action: &u32) -> Result<f64> {
        self.kind.reward(self.percept, *action)
    }
}
