//! Training history as a dynamic hypergraph: one weight function per recorded step.
//!
//! Leaf 0 stores every h-value. Every `keyframe_every`-th leaf after it stores the edges that
//! differ from leaf 0, so it can be rebuilt from leaf 0 alone; all other leaves store the edges
//! that differ from the previous leaf. Glow is not recorded.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clips::{ClipTable, ExcitationConfig, Hyperedge, Io};
use crate::error::{Error, Result};
use crate::table::ManyBodyTable;

pub const DEFAULT_KEYFRAME_EVERY: usize = 100;

#[derive(Debug, Clone, PartialEq)]
enum LeafData {
    Init(Vec<f64>),
    /// Differences from leaf 0.
    Keyframe(Vec<(u32, f64)>),
    /// Differences from the previous leaf.
    Delta(Vec<(u32, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
struct Leaf {
    time: u64,
    data: LeafData,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicHypergraph {
    keyframe_every: usize,
    edges: Vec<Hyperedge>,
    leaves: Vec<Leaf>,
    /// h-values of the latest leaf.
    current: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ChangeDoc {
    io: Io,
    dom: ExcitationConfig,
    cod: ExcitationConfig,
    #[serde(rename = "h")]
    h_value: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineDoc {
    #[serde(rename = "t")]
    time: u64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    full: bool,
    changed: Vec<ChangeDoc>,
}

impl DynamicHypergraph {
    pub fn new(keyframe_every: usize) -> Result<Self> {
        if keyframe_every == 0 {
            return Err(Error::Config("keyframe interval must be positive".into()));
        }
        Ok(DynamicHypergraph { keyframe_every, edges: Vec::new(), leaves: Vec::new(), current: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = u64> + '_ {
        self.leaves.iter().map(|l| l.time)
    }

    pub fn edges(&self) -> &[Hyperedge] {
        &self.edges
    }

    fn check_time(&self, time: u64) -> Result<()> {
        match self.leaves.last() {
            Some(last) if time <= last.time => Err(Error::Ordering(format!("leaf {time} does not follow leaf {}", last.time))),
            _ => Ok(()),
        }
    }

    /// Appends leaf `t` with every current h-value of `table`.
    pub fn snapshot(&mut self, table: &ManyBodyTable, time: u64) -> Result<()> {
        let all: Vec<u32> = (0..table.len() as u32).collect();
        self.snapshot_changed(table, time, &all)
    }

    /// Like [`Self::snapshot`], trusting that only edges listed in `candidates` may have changed
    /// since the previous leaf (e.g. from [`ManyBodyTable::take_changes`]).
    pub fn snapshot_changed(&mut self, table: &ManyBodyTable, time: u64, candidates: &[u32]) -> Result<()> {
        self.check_time(time)?;
        if self.leaves.is_empty() {
            self.edges = (0..table.len()).map(|k| table.edge(k)).collect();
            self.current = table.h_values().to_vec();
            self.leaves.push(Leaf { time, data: LeafData::Init(self.current.clone()) });
            return Ok(());
        }
        if table.len() != self.edges.len() {
            return Err(Error::Integrity(format!("table has {} edges, history {}", table.len(), self.edges.len())));
        }
        let mut delta = Vec::new();
        for &k in candidates {
            let value = table.h_value(k as usize);
            if value.to_bits() != self.current[k as usize].to_bits() {
                self.current[k as usize] = value;
                delta.push((k, value));
            }
        }
        self.push_leaf(time, delta);
        Ok(())
    }

    fn push_leaf(&mut self, time: u64, delta: Vec<(u32, f64)>) {
        let data = if self.leaves.len() % self.keyframe_every == 0 {
            let LeafData::Init(init) = &self.leaves[0].data else { unreachable!("leaf 0 is the initialization") };
            let diff = (0..init.len())
                .filter(|&k| init[k].to_bits() != self.current[k].to_bits())
                .map(|k| (k as u32, self.current[k]))
                .collect();
            LeafData::Keyframe(diff)
        } else {
            LeafData::Delta(delta)
        };
        self.leaves.push(Leaf { time, data });
    }

    /// All h-values of the leaf recorded at `t`.
    pub fn leaf(&self, time: u64) -> Result<Vec<f64>> {
        let n = self.leaves.binary_search_by_key(&time, |l| l.time).map_err(|_| Error::Data(format!("no leaf at time {time}")))?;
        let LeafData::Init(init) = &self.leaves[0].data else { unreachable!("leaf 0 is the initialization") };
        let mut values = init.clone();
        let base = n - n % self.keyframe_every;
        for leaf in &self.leaves[base.max(1)..=n] {
            match &leaf.data {
                LeafData::Keyframe(diff) | LeafData::Delta(diff) => diff.iter().for_each(|&(k, v)| values[k as usize] = v),
                LeafData::Init(_) => unreachable!("only leaf 0 is the initialization"),
            }
        }
        Ok(values)
    }

    /// Edges whose value differs from the previous leaf's at `t`.
    pub fn changed_at(&self, time: u64) -> Result<Vec<(u32, f64)>> {
        let n = self.leaves.binary_search_by_key(&time, |l| l.time).map_err(|_| Error::Data(format!("no leaf at time {time}")))?;
        if n == 0 {
            return Ok(self.leaf(time)?.into_iter().enumerate().map(|(k, value)| (k as u32, value)).collect());
        }
        match &self.leaves[n].data {
            LeafData::Delta(d) => Ok(d.clone()),
            _ => {
                let (before, now) = (self.leaf(self.leaves[n - 1].time)?, self.leaf(time)?);
                Ok((0..now.len()).filter(|&k| now[k].to_bits() != before[k].to_bits()).map(|k| (k as u32, now[k])).collect())
            }
        }
    }

    fn line(&self, leaf: &Leaf) -> LineDoc {
        let change = |&(k, value): &(u32, f64)| {
            let e = &self.edges[k as usize];
            ChangeDoc { io: e.io(), dom: e.domain.clone(), cod: e.codomain.clone(), h_value: value }
        };
        match &leaf.data {
            LeafData::Init(all) => LineDoc {
                time: leaf.time,
                full: true,
                changed: all.iter().enumerate().map(|(k, &value)| change(&(k as u32, value))).collect(),
            },
            LeafData::Keyframe(d) => LineDoc { time: leaf.time, full: true, changed: d.iter().map(change).collect() },
            LeafData::Delta(d) => LineDoc { time: leaf.time, full: false, changed: d.iter().map(change).collect() },
        }
    }

    /// One JSON object per leaf. Lines marked `"full"` after the first list every edge that
    /// differs from the first line.
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        if self.leaves.is_empty() {
            return Err(Error::Contract("cannot export an empty history".into()));
        }
        for leaf in &self.leaves {
            let line = serde_json::to_string(&self.line(leaf))?;
            writeln!(out, "{line}").map_err(|e| Error::io("<history>", e))?;
        }
        Ok(())
    }

    pub fn export(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_jsonl(&mut w).map_err(|e| relabel(e, path))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_jsonl(input: impl BufRead, keyframe_every: usize) -> Result<Self> {
        let mut store = DynamicHypergraph::new(keyframe_every)?;
        let mut index: HashMap<Hyperedge, u32> = HashMap::new();
        for (n, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<history>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let doc: LineDoc = serde_json::from_str(&line)?;
            store.check_time(doc.time)?;
            let lineno = n + 1;
            if store.leaves.is_empty() {
                if !doc.full {
                    return Err(Error::Data("the first history line must be the full initialization".into()));
                }
                for c in doc.changed {
                    let edge = Hyperedge { domain: c.dom, codomain: c.cod };
                    index.insert(edge.clone(), store.edges.len() as u32);
                    store.edges.push(edge);
                    store.current.push(c.h_value);
                }
                store.leaves.push(Leaf { time: doc.time, data: LeafData::Init(store.current.clone()) });
                continue;
            }
            let expect_full = store.leaves.len() % keyframe_every == 0;
            if doc.full != expect_full {
                return Err(Error::Data(format!("line {lineno}: keyframe flag does not match interval {keyframe_every}")));
            }
            let mut diff = Vec::with_capacity(doc.changed.len());
            for c in doc.changed {
                let edge = Hyperedge { domain: c.dom, codomain: c.cod };
                let k = *index.get(&edge).ok_or_else(|| Error::Data(format!("line {lineno}: unknown edge {edge}")))?;
                diff.push((k, c.h_value));
            }
            if doc.full {
                let LeafData::Init(init) = &store.leaves[0].data else { unreachable!() };
                store.current = init.clone();
            }
            diff.iter().for_each(|&(k, value)| store.current[k as usize] = value);
            let data = if doc.full { LeafData::Keyframe(diff) } else { LeafData::Delta(diff) };
            store.leaves.push(Leaf { time: doc.time, data });
        }
        if store.leaves.is_empty() {
            return Err(Error::Data("history is empty".into()));
        }
        Ok(store)
    }

    pub fn import(path: &Path, keyframe_every: usize) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        DynamicHypergraph::read_jsonl(BufReader::new(file), keyframe_every).map_err(|e| relabel(e, path))
    }

    /// Generic hypergraph interchange: nodes, and hyperedges carrying their `[t, h]` series
    /// (one point per leaf in which the edge changed).
    pub fn to_interchange(&self, clips: &ClipTable) -> Result<serde_json::Value> {
        let mut series: Vec<Vec<(u64, f64)>> = vec![Vec::new(); self.edges.len()];
        for leaf in &self.leaves {
            for (k, value) in self.changed_at(leaf.time)? {
                series[k as usize].push((leaf.time, value));
            }
        }
        let nodes: Vec<_> = clips
            .clips()
            .iter()
            .map(|c| serde_json::json!({"id": c.id, "label": c.label, "layer": c.layer}))
            .collect();
        let hyperedges: Vec<_> = self
            .edges
            .iter()
            .zip(series)
            .map(|(e, w)| serde_json::json!({"tail": e.domain, "head": e.codomain, "io": e.io(), "weights": w}))
            .collect();
        Ok(serde_json::json!({"directed": true, "nodes": nodes, "hyperedges": hyperedges}))
    }
}

fn relabel(e: Error, path: &Path) -> Error {
    match e {
        Error::Io { source, .. } => Error::io(path, source),
        Error::Data(msg) => Error::Data(format!("{}: {msg}", path.display())),
        other => other,
    }
}
