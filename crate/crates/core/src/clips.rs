//! Clips, excitation configurations and hyperedges.

use std::borrow::Borrow;
use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a clip in its [`ClipTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClipId(pub u32);

impl ClipId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ClipId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

/// Environment tag of a clip: `kind` groups clips (an observable, "symptom", "fix", ...)
/// and `value` is the encoded value within that group.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Category {
    pub kind: String,
    pub value: i64,
}

impl Category {
    pub fn new(kind: impl Into<String>, value: i64) -> Self {
        Category { kind: kind.into(), value }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clip {
    pub id: ClipId,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<Category>,
}

/// A clip before it has been assigned an id.
#[derive(Debug, Clone)]
pub struct ClipSpec {
    pub label: String,
    pub layer: Option<u32>,
    pub category: Option<Category>,
}

impl ClipSpec {
    pub fn new(label: impl Into<String>) -> Self {
        ClipSpec { label: label.into(), layer: None, category: None }
    }

    pub fn layer(mut self, layer: u32) -> Self {
        self.layer = Some(layer);
        self
    }

    pub fn category(mut self, kind: impl Into<String>, value: i64) -> Self {
        self.category = Some(Category::new(kind, value));
        self
    }
}

/// The vertex set of an ECM.
///
/// Either no clip has a layer or all do; layers are numbered `1..=depth` and none is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ClipTableDoc", into = "ClipTableDoc")]
pub struct ClipTable {
    clips: Vec<Clip>,
    by_label: HashMap<String, ClipId>,
    layers: Vec<Vec<ClipId>>,
}

#[derive(Serialize, Deserialize)]
struct ClipTableDoc {
    clips: Vec<Clip>,
}

impl TryFrom<ClipTableDoc> for ClipTable {
    type Error = Error;

    fn try_from(doc: ClipTableDoc) -> Result<Self> {
        for (k, c) in doc.clips.iter().enumerate() {
            if c.id.index() != k {
                return Err(Error::Data(format!("clip {k} carries id {}", c.id.0)));
            }
        }
        let specs = doc
            .clips
            .into_iter()
            .map(|c| ClipSpec { label: c.label, layer: c.layer, category: c.category })
            .collect();
        ClipTable::new(specs)
    }
}

impl From<ClipTable> for ClipTableDoc {
    fn from(t: ClipTable) -> Self {
        ClipTableDoc { clips: t.clips }
    }
}

impl ClipTable {
    pub fn new(specs: Vec<ClipSpec>) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Config("clip table is empty".into()));
        }
        let mut clips = Vec::with_capacity(specs.len());
        let mut by_label = HashMap::with_capacity(specs.len());
        for (k, spec) in specs.into_iter().enumerate() {
            let id = ClipId(k as u32);
            if by_label.insert(spec.label.clone(), id).is_some() {
                return Err(Error::Config(format!("duplicate clip label {:?}", spec.label)));
            }
            clips.push(Clip { id, label: spec.label, layer: spec.layer, category: spec.category });
        }

        let layered = clips.iter().filter(|c| c.layer.is_some()).count();
        let mut layers = Vec::new();
        if layered == clips.len() {
            let depth = clips.iter().filter_map(|c| c.layer).max().unwrap_or(0);
            layers = vec![Vec::new(); depth as usize];
            for c in &clips {
                let l = c.layer.unwrap_or(0);
                if l == 0 {
                    return Err(Error::Config(format!("clip {:?} has layer 0; layers start at 1", c.label)));
                }
                layers[l as usize - 1].push(c.id);
            }
            if let Some(empty) = layers.iter().position(Vec::is_empty) {
                return Err(Error::Config(format!("layer {} has no clips", empty + 1)));
            }
        } else if layered != 0 {
            return Err(Error::Config("either every clip has a layer or none does".into()));
        }
        Ok(ClipTable { clips, by_label, layers })
    }

    /// Unlayered table with the given labels.
    pub fn flat<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        ClipTable::new(labels.iter().map(|l| ClipSpec::new(l.as_ref())).collect())
    }

    /// Layered table; `layers[0]` becomes layer 1.
    pub fn layered<S: AsRef<str>>(layers: &[&[S]]) -> Result<Self> {
        let mut specs = Vec::new();
        for (l, labels) in layers.iter().enumerate() {
            specs.extend(labels.iter().map(|s| ClipSpec::new(s.as_ref()).layer(l as u32 + 1)));
        }
        ClipTable::new(specs)
    }

    /// Layered table with generated labels `L{layer}.{k}`.
    pub fn with_layer_sizes(sizes: &[usize]) -> Result<Self> {
        let mut specs = Vec::new();
        for (l, &n) in sizes.iter().enumerate() {
            specs.extend((0..n).map(|k| ClipSpec::new(format!("L{}.{}", l + 1, k)).layer(l as u32 + 1)));
        }
        ClipTable::new(specs)
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    pub fn clips(&self) -> &[Clip] {
        &self.clips
    }

    pub fn ids(&self) -> impl Iterator<Item = ClipId> + '_ {
        self.clips.iter().map(|c| c.id)
    }

    pub fn clip(&self, id: ClipId) -> &Clip {
        &self.clips[id.index()]
    }

    pub fn get(&self, id: ClipId) -> Option<&Clip> {
        self.clips.get(id.index())
    }

    pub fn label(&self, id: ClipId) -> &str {
        &self.clips[id.index()].label
    }

    pub fn id_of(&self, label: &str) -> Option<ClipId> {
        self.by_label.get(label).copied()
    }

    /// Clip ids for labels, failing on the first unknown label.
    pub fn config_of<S: AsRef<str>>(&self, labels: &[S]) -> Result<ExcitationConfig> {
        labels
            .iter()
            .map(|l| {
                self.id_of(l.as_ref())
                    .ok_or_else(|| Error::Mapping(format!("unknown clip label {:?}", l.as_ref())))
            })
            .collect()
    }

    pub fn is_layered(&self) -> bool {
        !self.layers.is_empty()
    }

    /// Number of layers, 0 when unlayered.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layer_of(&self, id: ClipId) -> Option<u32> {
        self.clips[id.index()].layer
    }

    /// Clips of layer `l` (1-based).
    pub fn layer(&self, l: u32) -> &[ClipId] {
        &self.layers[l as usize - 1]
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(Vec::len).collect()
    }

    pub(crate) fn require_layers(&self, what: &str) -> Result<()> {
        if self.is_layered() {
            Ok(())
        } else {
            Err(Error::Config(format!("{what} requires a layered clip table")))
        }
    }

    /// Shallowest layer holding an excitation of `config`.
    pub fn shallowest_layer(&self, config: &ExcitationConfig) -> Option<u32> {
        config.iter().filter_map(|c| self.layer_of(c)).min()
    }

    /// Whether every excitation sits in the deepest layer.
    pub fn all_in_final_layer(&self, config: &ExcitationConfig) -> bool {
        let depth = self.depth() as u32;
        depth > 0 && !config.is_empty() && config.iter().all(|c| self.layer_of(c) == Some(depth))
    }

    pub fn labels(&self, config: &ExcitationConfig) -> Vec<String> {
        config.iter().map(|c| self.label(c).to_owned()).collect()
    }
}

/// A set of excited clips, kept sorted ascending so equality is structural.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<ClipId>", into = "Vec<ClipId>")]
pub struct ExcitationConfig(Vec<ClipId>);

impl ExcitationConfig {
    pub fn empty() -> Self {
        ExcitationConfig(Vec::new())
    }

    /// Builds a configuration from already sorted, duplicate-free ids.
    pub fn from_sorted(ids: Vec<ClipId>) -> Result<Self> {
        if ids.windows(2).all(|w| w[0] < w[1]) {
            Ok(ExcitationConfig(ids))
        } else {
            Err(Error::Contract(format!("clip ids {ids:?} are not strictly ascending")))
        }
    }

    pub(crate) fn from_sorted_unchecked(ids: Vec<ClipId>) -> Self {
        debug_assert!(ids.windows(2).all(|w| w[0] < w[1]));
        ExcitationConfig(ids)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ids(&self) -> &[ClipId] {
        &self.0
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = ClipId> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, id: ClipId) -> bool {
        self.0.binary_search(&id).is_ok()
    }

    pub fn is_subset(&self, other: &ExcitationConfig) -> bool {
        is_sorted_subset(&self.0, &other.0)
    }

    pub fn union(&self, other: &ExcitationConfig) -> ExcitationConfig {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut a, mut b) = (self.0.iter().peekable(), other.0.iter().peekable());
        loop {
            match (a.peek(), b.peek()) {
                (Some(&&x), Some(&&y)) => {
                    if x < y {
                        out.push(x);
                        a.next();
                    } else if y < x {
                        out.push(y);
                        b.next();
                    } else {
                        out.push(x);
                        a.next();
                        b.next();
                    }
                }
                (Some(&&x), None) => {
                    out.push(x);
                    a.next();
                }
                (None, Some(&&y)) => {
                    out.push(y);
                    b.next();
                }
                (None, None) => break,
            }
        }
        ExcitationConfig(out)
    }

    pub fn difference(&self, other: &ExcitationConfig) -> ExcitationConfig {
        ExcitationConfig(self.0.iter().copied().filter(|c| !other.contains(*c)).collect())
    }

    pub fn filter(&self, mut keep: impl FnMut(ClipId) -> bool) -> ExcitationConfig {
        ExcitationConfig(self.0.iter().copied().filter(|&c| keep(c)).collect())
    }
}

pub(crate) fn is_sorted_subset(small: &[ClipId], big: &[ClipId]) -> bool {
    let mut it = big.iter();
    small.iter().all(|x| it.by_ref().any(|y| y == x))
}

impl FromIterator<ClipId> for ExcitationConfig {
    /// Sorts and collapses repeated ids: a clip holds at most one excitation.
    fn from_iter<I: IntoIterator<Item = ClipId>>(iter: I) -> Self {
        let mut ids: Vec<ClipId> = iter.into_iter().collect();
        ids.sort_unstable();
        ids.dedup();
        ExcitationConfig(ids)
    }
}

impl<const N: usize> From<[u32; N]> for ExcitationConfig {
    fn from(ids: [u32; N]) -> Self {
        ids.into_iter().map(ClipId).collect()
    }
}

impl TryFrom<Vec<ClipId>> for ExcitationConfig {
    type Error = Error;

    fn try_from(ids: Vec<ClipId>) -> Result<Self> {
        ExcitationConfig::from_sorted(ids)
    }
}

impl From<ExcitationConfig> for Vec<ClipId> {
    fn from(c: ExcitationConfig) -> Self {
        c.0
    }
}

impl Borrow<[ClipId]> for ExcitationConfig {
    fn borrow(&self) -> &[ClipId] {
        &self.0
    }
}

impl fmt::Display for ExcitationConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, c) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str("}")
    }
}

/// A directed hyperedge `domain -> codomain`; both sides nonempty and distinct.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Hyperedge {
    #[serde(rename = "dom")]
    pub domain: ExcitationConfig,
    #[serde(rename = "cod")]
    pub codomain: ExcitationConfig,
}

impl Hyperedge {
    pub fn new(domain: ExcitationConfig, codomain: ExcitationConfig) -> Result<Self> {
        if domain.is_empty() || codomain.is_empty() {
            return Err(Error::Contract("hyperedge sides must be nonempty".into()));
        }
        if domain == codomain {
            return Err(Error::Contract(format!("hyperedge {domain} -> {codomain} does nothing")));
        }
        Ok(Hyperedge { domain, codomain })
    }

    /// `(|domain|, |codomain|)`.
    pub fn io(&self) -> Io {
        Io::new(self.domain.len() as u32, self.codomain.len() as u32)
    }
}

impl fmt::Display for Hyperedge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.domain, self.codomain)
    }
}

/// Numbers of ingoing and outgoing excitations of an elementary transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[u32; 2]", into = "[u32; 2]")]
pub struct Io {
    pub inputs: u32,
    pub outputs: u32,
}

impl Io {
    pub const fn new(inputs: u32, outputs: u32) -> Self {
        Io { inputs, outputs }
    }
}

impl From<[u32; 2]> for Io {
    fn from([i, o]: [u32; 2]) -> Self {
        Io::new(i, o)
    }
}

impl From<Io> for [u32; 2] {
    fn from(io: Io) -> Self {
        [io.inputs, io.outputs]
    }
}

impl From<(u32, u32)> for Io {
    fn from((i, o): (u32, u32)) -> Self {
        Io::new(i, o)
    }
}

impl fmt::Display for Io {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.inputs, self.outputs)
    }
}
