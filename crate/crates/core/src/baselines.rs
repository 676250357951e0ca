//! Tabular Q-learning: one table for percept→action, or a chain of tables through hidden layers.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clips::{ClipId, ExcitationConfig};
use crate::error::{Error, Result};

/// Dense Q-values over declared state and action keys.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    states: Vec<ExcitationConfig>,
    state_index: HashMap<ExcitationConfig, usize>,
    actions: Vec<ExcitationConfig>,
    values: Vec<f64>,
    alpha: f64,
    lambda: f64,
}

fn index_of(keys: &[ExcitationConfig], what: &str) -> Result<HashMap<ExcitationConfig, usize>> {
    let map: HashMap<_, _> = keys.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
    if map.len() != keys.len() {
        return Err(Error::Config(format!("duplicate {what} key")));
    }
    Ok(map)
}

impl QTable {
    pub fn new(
        states: Vec<ExcitationConfig>,
        actions: Vec<ExcitationConfig>,
        alpha: f64,
        lambda: f64,
        q_init: f64,
    ) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("lambda", lambda)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0,1], got {v}")));
            }
        }
        if !q_init.is_finite() {
            return Err(Error::Config(format!("q_init must be finite, got {q_init}")));
        }
        if states.is_empty() || actions.is_empty() {
            return Err(Error::Config("a Q-table needs states and actions".into()));
        }
        let state_index = index_of(&states, "state")?;
        index_of(&actions, "action")?;
        let values = vec![q_init; states.len() * actions.len()];
        Ok(QTable { states, state_index, actions, values, alpha, lambda })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn states(&self) -> &[ExcitationConfig] {
        &self.states
    }

    pub fn actions(&self) -> &[ExcitationConfig] {
        &self.actions
    }

    pub fn state(&self, key: &ExcitationConfig) -> Result<usize> {
        self.state_index.get(key).copied().ok_or_else(|| Error::Mapping(format!("unknown state {key}")))
    }

    pub fn row(&self, state: usize) -> &[f64] {
        let n = self.actions.len();
        &self.values[state * n..(state + 1) * n]
    }

    pub fn q_value(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.actions.len() + action]
    }

    pub fn set_q_value(&mut self, state: usize, action: usize, value: f64) {
        let n = self.actions.len();
        self.values[state * n + action] = value;
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn max_q(&self, state: usize) -> f64 {
        self.row(state).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// An argmax of the row; ties are broken uniformly with one draw, a unique maximum draws nothing.
    pub fn select<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> usize {
        let row = self.row(state);
        let best = self.max_q(state);
        let ties = row.iter().filter(|&&value| value == best).count();
        let pick = if ties == 1 { 0 } else { rng.gen_range(0..ties) };
        row.iter().enumerate().filter(|(_, &value)| value == best).nth(pick).map(|(action, _)| action).expect("row is nonempty")
    }

    /// `Q ← (1−α)Q + α(R + λ·max Q(next, ·))`; without a next state the bootstrap term is 0.
    pub fn update(&mut self, state: usize, action: usize, reward: f64, next: Option<usize>) {
        let bootstrap = match next {
            Some(n) if self.lambda != 0.0 => self.lambda * self.max_q(n),
            _ => 0.0,
        };
        let old = self.q_value(state, action);
        self.set_q_value(state, action, (1.0 - self.alpha) * old + self.alpha * (reward + bootstrap));
    }

    pub fn to_doc(&self) -> QTableDoc {
        let mut edges = Vec::with_capacity(self.values.len());
        for (state, dom) in self.states.iter().enumerate() {
            for (action, cod) in self.actions.iter().enumerate() {
                edges.push(QEdgeDoc { dom: dom.clone(), cod: cod.clone(), q_value: self.q_value(state, action) });
            }
        }
        QTableDoc { alpha: self.alpha, lambda: self.lambda, edges }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTableDoc {
    pub alpha: f64,
    pub lambda: f64,
    pub edges: Vec<QEdgeDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QEdgeDoc {
    pub dom: ExcitationConfig,
    pub cod: ExcitationConfig,
    #[serde(rename = "q")]
    pub q_value: f64,
}

/// Every configuration taking a nonempty subset of each group, group by group.
pub fn product_configs(groups: &[&[ClipId]]) -> Vec<ExcitationConfig> {
    let mut out = vec![Vec::new()];
    for group in groups {
        let n = group.len();
        let mut next = Vec::with_capacity(out.len() * ((1usize << n) - 1));
        for prefix in &out {
            for mask in 1usize..1 << n {
                let mut c: Vec<ClipId> = prefix.clone();
                c.extend((0..n).filter(|b| mask >> b & 1 == 1).map(|b| group[b]));
                next.push(c);
            }
        }
        out = next;
    }
    out.into_iter().map(|ids| ids.into_iter().collect()).collect()
}

/// Indices chosen by one greedy pass: `keys[0]` is the percept's state in table 0 and
/// `keys[k+1]` the action chosen by table `k` (equal to its state index in table `k+1`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QChain {
    pub keys: Vec<usize>,
}

/// A chain of Q-tables whose action space feeds the next table's state space.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiLayerQAgent {
    tables: Vec<QTable>,
}

impl MultiLayerQAgent {
    pub fn new(tables: Vec<QTable>) -> Result<Self> {
        if tables.is_empty() {
            return Err(Error::Config("a multi-layer Q agent needs at least one table".into()));
        }
        for (k, w) in tables.windows(2).enumerate() {
            if w[0].actions != w[1].states {
                return Err(Error::Config(format!("actions of table {k} differ from the states of table {}", k + 1)));
            }
        }
        Ok(MultiLayerQAgent { tables })
    }

    pub fn tables(&self) -> &[QTable] {
        &self.tables
    }

    pub fn count_parameters(&self) -> usize {
        self.tables.iter().map(QTable::len).sum()
    }

    pub fn step<R: Rng + ?Sized>(&self, percept: &ExcitationConfig, rng: &mut R) -> Result<QChain> {
        let mut keys = vec![self.tables[0].state(percept)?];
        for t in &self.tables {
            keys.push(t.select(*keys.last().expect("nonempty"), rng));
        }
        Ok(QChain { keys })
    }

    /// The greedy chain taking the first maximum in every row; no randomness. Used to
    /// bootstrap from the next step without consuming draws.
    pub fn first_argmax_chain(&self, percept: &ExcitationConfig) -> Result<QChain> {
        let mut keys = vec![self.tables[0].state(percept)?];
        for t in &self.tables {
            let state = *keys.last().expect("nonempty");
            let best = t.max_q(state);
            keys.push(t.row(state).iter().position(|&value| value == best).expect("row is nonempty"));
        }
        Ok(QChain { keys })
    }

    pub fn action(&self, chain: &QChain) -> &ExcitationConfig {
        &self.tables.last().expect("nonempty").actions[*chain.keys.last().expect("nonempty")]
    }

    /// Config chosen by table `k`.
    pub fn chosen(&self, chain: &QChain, k: usize) -> &ExcitationConfig {
        &self.tables[k].actions[chain.keys[k + 1]]
    }

    /// Table `k` learns from `rewards[k]`; `next` is the chain of the following step, if any.
    pub fn update(&mut self, chain: &QChain, rewards: &[f64], next: Option<&QChain>) -> Result<()> {
        if rewards.len() != self.tables.len() || chain.keys.len() != self.tables.len() + 1 {
            return Err(Error::Contract(format!("{} rewards for {} tables", rewards.len(), self.tables.len())));
        }
        for (k, t) in self.tables.iter_mut().enumerate() {
            t.update(chain.keys[k], chain.keys[k + 1], rewards[k], next.map(|n| n.keys[k]));
        }
        Ok(())
    }
}
