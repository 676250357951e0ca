//! The three task environments behind one reset/observe/act contract.

use rand::Rng;

use crate::error::Result;

pub mod invasion;
pub mod maintenance;

/// Reset, observe, act. One `reset` starts an episode; `act` reports the feedback.
pub trait Environment {
    type Percept: ?Sized;
    type Action: ?Sized;
    type Feedback;

    fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R);
    fn percept(&self) -> &Self::Percept;
    fn act(&mut self, action: &Self::Action) -> Result<Self::Feedback>;
}

/// Step-count penalty: identity up to `a_max` steps, then `−¼ ln(b+1)` with `b = steps − a_max`,
/// never below −16.
pub fn shape_reward(reward: f64, steps: u64, a_max: u64) -> f64 {
    let over = steps.saturating_sub(a_max);
    let penalty = if over > 0 { 0.25 * ((over + 1) as f64).ln() } else { 0.0 };
    (reward - penalty).max(-16.0)
}
