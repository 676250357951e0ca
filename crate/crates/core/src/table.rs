//! The many-body h-value table: admissible hyperedges per `(i,o)` with their weights and glows.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::clips::{ClipId, ClipTable, ExcitationConfig, Hyperedge, Io};
use crate::error::{Error, Result};
use crate::subsets::for_each_subset;

/// Which excitations a deliberation step may pick up and what happens to the rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BiasKind {
    /// Any admissible domain inside the configuration; passive excitations stay.
    MB1,
    /// As `MB1` on a layered, feed-forward table.
    FF,
    /// Feed-forward, and the domain must lie in the shallowest occupied layer.
    SF,
    /// Feed-forward, and only the codomain survives a step.
    DP,
}

impl BiasKind {
    pub const ALL: [BiasKind; 4] = [BiasKind::MB1, BiasKind::FF, BiasKind::SF, BiasKind::DP];

    pub fn needs_layers(self) -> bool {
        self != BiasKind::MB1
    }
}

/// How a stored domain must relate to the current configuration to be relevant.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainMatch {
    /// Domain ⊆ configuration: the many-body reading.
    #[default]
    Subset,
    /// Domain = configuration: every step consumes the whole configuration.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HRecord {
    #[serde(rename = "h")]
    pub h_value: f64,
    pub h_init: f64,
    pub glow: f64,
}

impl HRecord {
    pub fn fresh(h_init: f64) -> Self {
        HRecord { h_value: h_init, h_init, glow: 0.0 }
    }
}

/// Decides which hyperedges of a given size enter the table.
///
/// `admits` must be a pure function of its arguments. `pools` narrows the search: every
/// admissible edge has its domain inside some pool's first set and its codomain inside the
/// paired second set. `admits_domain` is a prefilter; `admits(d, c)` implies `admits_domain(d)`.
pub trait EdgePredicate {
    fn admits(&self, clips: &ClipTable, domain: &[ClipId], codomain: &[ClipId]) -> bool;

    fn admits_domain(&self, _clips: &ClipTable, _domain: &[ClipId]) -> bool {
        true
    }

    fn pools(&self, clips: &ClipTable) -> Result<Vec<(Vec<ClipId>, Vec<ClipId>)>> {
        let all: Vec<ClipId> = clips.ids().collect();
        Ok(vec![(all.clone(), all)])
    }
}

/// Every hyperedge over the clip set.
#[derive(Debug, Clone, Copy, Default)]
pub struct AllEdges;

impl EdgePredicate for AllEdges {
    fn admits(&self, _: &ClipTable, _: &[ClipId], _: &[ClipId]) -> bool {
        true
    }
}

/// Any closure over `(domain, codomain)`, searched over the full clip set.
pub struct FnPredicate<F>(pub F);

impl<F> EdgePredicate for FnPredicate<F>
where
    F: Fn(&ClipTable, &[ClipId], &[ClipId]) -> bool,
{
    fn admits(&self, clips: &ClipTable, domain: &[ClipId], codomain: &[ClipId]) -> bool {
        (self.0)(clips, domain, codomain)
    }
}

fn single_layer(clips: &ClipTable, side: &[ClipId]) -> Option<u32> {
    let first = clips.layer_of(*side.first()?)?;
    side.iter().all(|&c| clips.layer_of(c) == Some(first)).then_some(first)
}

fn feed_forward_pools(clips: &ClipTable) -> Result<Vec<(Vec<ClipId>, Vec<ClipId>)>> {
    clips.require_layers("a feed-forward predicate")?;
    Ok((1..clips.depth() as u32).map(|l| (clips.layer(l).to_vec(), clips.layer(l + 1).to_vec())).collect())
}

/// Domain inside one layer, codomain inside the next.
#[derive(Debug, Clone, Copy, Default)]
pub struct FeedForward {
    distinct_domain_kinds: bool,
}

impl FeedForward {
    pub fn new() -> Self {
        FeedForward { distinct_domain_kinds: false }
    }

    /// Additionally, no two domain clips share a category kind (e.g. one value per observable).
    pub fn distinct_domain_categories() -> Self {
        FeedForward { distinct_domain_kinds: true }
    }
}

impl EdgePredicate for FeedForward {
    fn admits(&self, clips: &ClipTable, domain: &[ClipId], codomain: &[ClipId]) -> bool {
        match (single_layer(clips, domain), single_layer(clips, codomain)) {
            (Some(a), Some(b)) => b == a + 1 && self.admits_domain(clips, domain),
            _ => false,
        }
    }

    fn admits_domain(&self, clips: &ClipTable, domain: &[ClipId]) -> bool {
        if !self.distinct_domain_kinds {
            return true;
        }
        let kinds: BTreeSet<Option<&str>> =
            domain.iter().map(|&c| clips.clip(c).category.as_ref().map(|k| k.kind.as_str())).collect();
        kinds.len() == domain.len()
    }

    fn pools(&self, clips: &ClipTable) -> Result<Vec<(Vec<ClipId>, Vec<ClipId>)>> {
        feed_forward_pools(clips)
    }
}

/// Feed-forward edges whose sides hold, for every category kind present in their layer,
/// between 1 and a per-(layer, kind) cutoff clips of that kind.
#[derive(Debug, Clone)]
pub struct CategoryCutoffs {
    /// Group index of every clip.
    clip_group: Vec<usize>,
    /// `(layer, cutoff)` per group.
    groups: Vec<(u32, usize)>,
    /// Groups of each layer, 1-based layer index minus one.
    layer_groups: Vec<Vec<usize>>,
}

impl CategoryCutoffs {
    /// `cutoffs` lists `(layer, kind, cutoff)`; unlisted groups may use all their clips.
    /// Clips without a category form one group per layer.
    pub fn new(clips: &ClipTable, cutoffs: &[(u32, &str, usize)]) -> Result<Self> {
        clips.require_layers("category cutoffs")?;
        let mut index: BTreeMap<(u32, String), usize> = BTreeMap::new();
        let mut sizes: Vec<usize> = Vec::new();
        let mut groups: Vec<(u32, usize)> = Vec::new();
        let mut clip_group = Vec::with_capacity(clips.len());
        for clip in clips.clips() {
            let layer = clip.layer.unwrap_or(0);
            let kind = clip.category.as_ref().map(|c| c.kind.clone()).unwrap_or_default();
            let next = groups.len();
            let g = *index.entry((layer, kind)).or_insert(next);
            if g == next {
                groups.push((layer, 0));
                sizes.push(0);
            }
            sizes[g] += 1;
            clip_group.push(g);
        }
        for (g, size) in sizes.iter().enumerate() {
            groups[g].1 = *size;
        }
        for &(layer, kind, cutoff) in cutoffs {
            let g = *index
                .get(&(layer, kind.to_owned()))
                .ok_or_else(|| Error::Config(format!("no clips of kind {kind:?} in layer {layer}")))?;
            if cutoff == 0 || cutoff > sizes[g] {
                return Err(Error::Config(format!(
                    "cutoff {cutoff} for {kind:?} in layer {layer} must lie in 1..={}",
                    sizes[g]
                )));
            }
            groups[g].1 = cutoff;
        }
        let mut layer_groups = vec![Vec::new(); clips.depth()];
        for (g, &(layer, _)) in groups.iter().enumerate() {
            layer_groups[layer as usize - 1].push(g);
        }
        Ok(CategoryCutoffs { clip_group, groups, layer_groups })
    }

    fn side_ok(&self, clips: &ClipTable, side: &[ClipId]) -> Option<u32> {
        let layer = single_layer(clips, side)?;
        let groups = &self.layer_groups[layer as usize - 1];
        for &g in groups {
            let n = side.iter().filter(|c| self.clip_group[c.index()] == g).count();
            if n == 0 || n > self.groups[g].1 {
                return None;
            }
        }
        Some(layer)
    }

    /// Smallest and largest admissible side sizes in layer `l`.
    pub fn side_sizes(&self, l: u32) -> (u32, u32) {
        let groups = &self.layer_groups[l as usize - 1];
        (groups.len() as u32, groups.iter().map(|&g| self.groups[g].1 as u32).sum())
    }

    /// Every `(i,o)` between adjacent layers that the cutoffs allow.
    pub fn io_set(&self) -> Vec<Io> {
        let mut set = BTreeSet::new();
        for l in 1..self.layer_groups.len() as u32 {
            let (imin, imax) = self.side_sizes(l);
            let (omin, omax) = self.side_sizes(l + 1);
            for i in imin..=imax {
                for o in omin..=omax {
                    set.insert(Io::new(i, o));
                }
            }
        }
        set.into_iter().collect()
    }
}

impl EdgePredicate for CategoryCutoffs {
    fn admits(&self, clips: &ClipTable, domain: &[ClipId], codomain: &[ClipId]) -> bool {
        match (self.side_ok(clips, domain), self.side_ok(clips, codomain)) {
            (Some(a), Some(b)) => b == a + 1,
            _ => false,
        }
    }

    fn admits_domain(&self, clips: &ClipTable, domain: &[ClipId]) -> bool {
        self.side_ok(clips, domain).is_some()
    }

    fn pools(&self, clips: &ClipTable) -> Result<Vec<(Vec<ClipId>, Vec<ClipId>)>> {
        feed_forward_pools(clips)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct EdgeKey {
    io: u16,
    dom: u32,
    cod: u32,
}

/// Trainable many-body h-values.
///
/// Edges are stored sorted by `(i,o)`, then domain, then codomain; that order is the
/// enumeration order of every relevant-edge list.
#[derive(Debug, Clone)]
pub struct ManyBodyTable {
    clips: Arc<ClipTable>,
    io_set: Vec<Io>,
    input_sizes: Vec<usize>,
    matching: DomainMatch,
    configs: Vec<ExcitationConfig>,
    config_ids: HashMap<ExcitationConfig, u32>,
    /// Edge ranges per interned domain, ascending.
    domain_ranges: Vec<Vec<(u32, u32)>>,
    keys: Vec<EdgeKey>,
    h_value: Vec<f64>,
    h_init: Vec<f64>,
    glow: Vec<f64>,
    /// Exactly the edges with nonzero glow.
    glowing: Vec<u32>,
    changes: Option<Vec<u32>>,
}

impl PartialEq for ManyBodyTable {
    fn eq(&self, other: &Self) -> bool {
        self.clips == other.clips
            && self.io_set == other.io_set
            && self.matching == other.matching
            && self.len() == other.len()
            && (0..self.len()).all(|k| {
                self.domain(k) == other.domain(k)
                    && self.codomain(k) == other.codomain(k)
                    && self.record(k) == other.record(k)
            })
    }
}

fn validate_io_set(io_set: &[Io]) -> Result<Vec<Io>> {
    if io_set.is_empty() {
        return Err(Error::Config("IO set is empty".into()));
    }
    let set: BTreeSet<Io> = io_set.iter().copied().collect();
    if let Some(bad) = set.iter().find(|io| io.inputs == 0 || io.outputs == 0) {
        return Err(Error::Config(format!("IO pair {bad} must have positive entries")));
    }
    if set.len() > u16::MAX as usize {
        return Err(Error::Config("IO set too large".into()));
    }
    Ok(set.into_iter().collect())
}

struct Interner {
    configs: Vec<ExcitationConfig>,
    ids: HashMap<ExcitationConfig, u32>,
}

impl Interner {
    fn new() -> Self {
        Interner { configs: Vec::new(), ids: HashMap::new() }
    }

    fn intern(&mut self, ids: &[ClipId]) -> u32 {
        if let Some(&k) = self.ids.get(ids) {
            return k;
        }
        let k = self.configs.len() as u32;
        let c = ExcitationConfig::from_sorted_unchecked(ids.to_vec());
        self.configs.push(c.clone());
        self.ids.insert(c, k);
        k
    }
}

/// Builds the table of all hyperedges of each `(i,o)` in `io_set` that pass `predicate`,
/// every one with `h = h_init` and zero glow.
pub fn build_table(
    clips: impl Into<Arc<ClipTable>>,
    io_set: &[Io],
    predicate: &dyn EdgePredicate,
    h_init: f64,
) -> Result<ManyBodyTable> {
    let clips = clips.into();
    let io_set = validate_io_set(io_set)?;
    if !h_init.is_finite() {
        return Err(Error::Config(format!("h_init must be finite, got {h_init}")));
    }
    let pools = predicate.pools(&clips)?;
    let mut interner = Interner::new();
    let mut keys = Vec::new();
    for (k, io) in io_set.iter().enumerate() {
        let before = keys.len();
        for (dom_pool, cod_pool) in &pools {
            for_each_subset(dom_pool, io.inputs as usize, |d| {
                if !predicate.admits_domain(&clips, d) {
                    return;
                }
                let mut dom = None;
                for_each_subset(cod_pool, io.outputs as usize, |c| {
                    if d != c && predicate.admits(&clips, d, c) {
                        let dom = *dom.get_or_insert_with(|| interner.intern(d));
                        let cod = interner.intern(c);
                        keys.push(EdgeKey { io: k as u16, dom, cod });
                    }
                });
            });
        }
        if keys.len() == before {
            return Err(Error::Config(format!("no admissible hyperedge for IO pair {io}")));
        }
    }
    let n = keys.len();
    ManyBodyTable::assemble(clips, io_set, interner, keys, vec![HRecord::fresh(h_init); n], true)
}

impl ManyBodyTable {
    /// Table from explicit edges. Every edge's `(i,o)` must be in `io_set`.
    pub fn from_records(
        clips: impl Into<Arc<ClipTable>>,
        io_set: &[Io],
        records: Vec<(Hyperedge, HRecord)>,
    ) -> Result<Self> {
        let clips = clips.into();
        let io_set = validate_io_set(io_set)?;
        let mut interner = Interner::new();
        let mut keyed = Vec::with_capacity(records.len());
        for (edge, rec) in records {
            let io = edge.io();
            let Ok(k) = io_set.binary_search(&io) else {
                return Err(Error::Config(format!("edge {edge} has IO pair {io} outside the IO set")));
            };
            if let Some(c) = edge.domain.iter().chain(edge.codomain.iter()).find(|c| clips.get(*c).is_none()) {
                return Err(Error::Config(format!("edge {edge} names unknown clip {c}")));
            }
            if edge.domain.is_empty() || edge.codomain.is_empty() || edge.domain == edge.codomain {
                return Err(Error::Config(format!("edge {edge} is not a valid hyperedge")));
            }
            if !(rec.h_value.is_finite() && rec.h_init.is_finite() && (0.0..=1.0).contains(&rec.glow)) {
                return Err(Error::Config(format!("edge {edge} has an invalid record {rec:?}")));
            }
            let dom = interner.intern(edge.domain.ids());
            let cod = interner.intern(edge.codomain.ids());
            keyed.push((EdgeKey { io: k as u16, dom, cod }, rec));
        }
        let (keys, recs) = keyed.into_iter().unzip();
        ManyBodyTable::assemble(clips, io_set, interner, keys, recs, false)
    }

    fn assemble(
        clips: Arc<ClipTable>,
        io_set: Vec<Io>,
        interner: Interner,
        keys: Vec<EdgeKey>,
        records: Vec<HRecord>,
        trusted_unique: bool,
    ) -> Result<Self> {
        let configs = interner.configs;
        let mut order: Vec<u32> = (0..keys.len() as u32).collect();
        order.sort_unstable_by(|&a, &b| {
            let (ka, kb) = (keys[a as usize], keys[b as usize]);
            ka.io
                .cmp(&kb.io)
                .then_with(|| configs[ka.dom as usize].cmp(&configs[kb.dom as usize]))
                .then_with(|| configs[ka.cod as usize].cmp(&configs[kb.cod as usize]))
        });
        let sorted: Vec<EdgeKey> = order.iter().map(|&k| keys[k as usize]).collect();
        if !trusted_unique {
            if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::Config(format!(
                    "duplicate edge {} -> {}",
                    configs[w[0].dom as usize], configs[w[0].cod as usize]
                )));
            }
        }
        let records: Vec<HRecord> = order.iter().map(|&k| records[k as usize]).collect();

        let mut domain_ranges = vec![Vec::new(); configs.len()];
        let mut start = 0;
        for k in 1..=sorted.len() {
            if k == sorted.len() || (sorted[k].io, sorted[k].dom) != (sorted[start].io, sorted[start].dom) {
                domain_ranges[sorted[start].dom as usize].push((start as u32, k as u32));
                start = k;
            }
        }
        let input_sizes: BTreeSet<usize> = io_set.iter().map(|io| io.inputs as usize).collect();
        let glowing = (0..records.len() as u32).filter(|&k| records[k as usize].glow > 0.0).collect();
        Ok(ManyBodyTable {
            clips,
            io_set,
            input_sizes: input_sizes.into_iter().collect(),
            matching: DomainMatch::Subset,
            config_ids: configs.iter().cloned().enumerate().map(|(k, c)| (c, k as u32)).collect(),
            configs,
            domain_ranges,
            keys: sorted,
            h_value: records.iter().map(|rec| rec.h_value).collect(),
            h_init: records.iter().map(|rec| rec.h_init).collect(),
            glow: records.iter().map(|rec| rec.glow).collect(),
            glowing,
            changes: None,
        })
    }

    pub fn with_matching(mut self, matching: DomainMatch) -> Self {
        self.matching = matching;
        self
    }

    pub fn matching(&self) -> DomainMatch {
        self.matching
    }

    pub fn clips(&self) -> &ClipTable {
        &self.clips
    }

    pub fn clips_arc(&self) -> &Arc<ClipTable> {
        &self.clips
    }

    pub fn io_set(&self) -> &[Io] {
        &self.io_set
    }

    /// Number of stored edges.
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn io(&self, k: usize) -> Io {
        self.io_set[self.keys[k].io as usize]
    }

    pub fn domain(&self, k: usize) -> &ExcitationConfig {
        &self.configs[self.keys[k].dom as usize]
    }

    pub fn codomain(&self, k: usize) -> &ExcitationConfig {
        &self.configs[self.keys[k].cod as usize]
    }

    pub fn edge(&self, k: usize) -> Hyperedge {
        Hyperedge { domain: self.domain(k).clone(), codomain: self.codomain(k).clone() }
    }

    pub fn h_value(&self, k: usize) -> f64 {
        self.h_value[k]
    }

    pub fn h_values(&self) -> &[f64] {
        &self.h_value
    }

    pub fn record(&self, k: usize) -> HRecord {
        HRecord { h_value: self.h_value[k], h_init: self.h_init[k], glow: self.glow[k] }
    }

    /// Overwrites an h-value, e.g. to set up a fixture.
    pub fn set_h_value(&mut self, k: usize, value: f64) {
        self.h_value[k] = value;
        self.note_change(k as u32);
    }

    /// Position of `edge`, if stored.
    pub fn find(&self, edge: &Hyperedge) -> Option<usize> {
        let dom = *self.config_ids.get(edge.domain.ids())?;
        let cod = *self.config_ids.get(edge.codomain.ids())?;
        let io = self.io_set.binary_search(&edge.io()).ok()? as u16;
        let &(a, b) = self.domain_ranges[dom as usize].iter().find(|&&(a, _)| self.keys[a as usize].io == io)?;
        let slice = &self.keys[a as usize..b as usize];
        let target = &self.configs[cod as usize];
        let pos = slice.binary_search_by(|k| self.configs[k.cod as usize].cmp(target)).ok()?;
        Some(a as usize + pos)
    }

    /// Positions of all edges whose h-values are relevant at `config`, in table order.
    pub fn relevant_indices(&self, config: &ExcitationConfig, bias: BiasKind, out: &mut Vec<u32>) -> Result<()> {
        out.clear();
        if config.is_empty() {
            return Err(Error::Contract("relevant h-values of an empty configuration".into()));
        }
        if bias.needs_layers() {
            self.clips.require_layers("this inductive bias")?;
        }
        let restricted;
        let pool: &[ClipId] = if bias == BiasKind::SF {
            let shallow = self.clips.shallowest_layer(config);
            restricted = config.filter(|c| self.clips.layer_of(c) == shallow);
            restricted.ids()
        } else {
            config.ids()
        };
        let mut ranges: Vec<(u32, u32)> = Vec::new();
        match self.matching {
            DomainMatch::Exact => {
                if let Some(&d) = self.config_ids.get(pool) {
                    ranges.extend_from_slice(&self.domain_ranges[d as usize]);
                }
            }
            DomainMatch::Subset => {
                for &k in &self.input_sizes {
                    if k > pool.len() {
                        break;
                    }
                    for_each_subset(pool, k, |s| {
                        if let Some(&d) = self.config_ids.get(s) {
                            ranges.extend_from_slice(&self.domain_ranges[d as usize]);
                        }
                    });
                }
            }
        }
        ranges.sort_unstable();
        for (a, b) in ranges {
            out.extend(a..b);
        }
        Ok(())
    }

    /// The relevant `(edge, h)` list at `config`; an empty list is a dead end.
    pub fn relevant_hvalues(&self, config: &ExcitationConfig, bias: BiasKind) -> Result<Vec<(Hyperedge, f64)>> {
        let mut idx = Vec::new();
        self.relevant_indices(config, bias, &mut idx)?;
        if idx.is_empty() {
            return Err(Error::DeadEnd(config.clone()));
        }
        Ok(idx.iter().map(|&k| (self.edge(k as usize), self.h_value[k as usize])).collect())
    }

    pub fn count_parameters(&self) -> usize {
        self.len()
    }

    /// Layer of edge `k`'s domain, if the clips are layered.
    pub fn source_layer(&self, k: usize) -> Option<u32> {
        self.clips.layer_of(self.domain(k).ids()[0])
    }

    /// Starts recording which edges change, for history snapshots.
    pub fn track_changes(&mut self) {
        self.changes.get_or_insert_with(Vec::new);
    }

    /// Edges changed since the previous call, ascending; `None` if tracking is off.
    pub fn take_changes(&mut self) -> Option<Vec<u32>> {
        let changes = self.changes.as_mut()?;
        let mut out = std::mem::take(changes);
        out.sort_unstable();
        out.dedup();
        Some(out)
    }

    fn note_change(&mut self, k: u32) {
        if let Some(c) = self.changes.as_mut() {
            c.push(k);
        }
    }

    /// Damps every glow by `1 - eta`, then sets traversed glows to 1.
    pub(crate) fn refresh_glow(&mut self, traversed: &[usize], eta: f64) {
        let keep = 1.0 - eta;
        let glow = &mut self.glow;
        self.glowing.retain(|&k| {
            glow[k as usize] *= keep;
            glow[k as usize] > 0.0
        });
        for &k in traversed {
            if self.glow[k] == 0.0 {
                self.glowing.push(k as u32);
            }
            self.glow[k] = 1.0;
        }
    }

    /// `h ← h − γ(h − h_init) + R·glow` with a per-edge reward, then the optional floor.
    ///
    /// With `γ = 0` only glowing edges can change, so only those are visited.
    pub(crate) fn apply_rewards(&mut self, reward: impl Fn(&Self, usize) -> f64, gamma: f64, floor: Option<f64>) {
        let visit: Vec<u32> = if gamma == 0.0 { self.glowing.clone() } else { (0..self.len() as u32).collect() };
        for k in visit {
            let k = k as usize;
            let edge_reward = reward(self, k);
            let (current, initial, glow) = (self.h_value[k], self.h_init[k], self.glow[k]);
            let mut next = current - gamma * (current - initial) + edge_reward * glow;
            if let Some(f) = floor {
                next = next.max(f);
            }
            if next.to_bits() != current.to_bits() {
                self.h_value[k] = next;
                self.note_change(k as u32);
            }
        }
    }

    pub fn to_doc(&self) -> TableDoc {
        TableDoc {
            io: self.io_set.clone(),
            domains: (self.matching == DomainMatch::Exact).then_some(DomainMatch::Exact),
            edges: (0..self.len())
                .map(|k| EdgeDoc {
                    io: self.io(k),
                    dom: self.domain(k).clone(),
                    cod: self.codomain(k).clone(),
                    h_value: self.h_value[k],
                    h_init: self.h_init[k],
                    glow: self.glow[k],
                })
                .collect(),
        }
    }

    pub fn from_doc(clips: impl Into<Arc<ClipTable>>, doc: TableDoc) -> Result<Self> {
        let mut records = Vec::with_capacity(doc.edges.len());
        for e in doc.edges {
            let edge = Hyperedge { domain: e.dom, codomain: e.cod };
            if edge.io() != e.io {
                return Err(Error::Data(format!("edge {edge} is listed under IO pair {}", e.io)));
            }
            records.push((edge, HRecord { h_value: e.h_value, h_init: e.h_init, glow: e.glow }));
        }
        Ok(ManyBodyTable::from_records(clips, &doc.io, records)?.with_matching(doc.domains.unwrap_or_default()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_doc())?)
    }

    pub fn from_json(clips: impl Into<Arc<ClipTable>>, json: &str) -> Result<Self> {
        ManyBodyTable::from_doc(clips, serde_json::from_str(json)?)
    }
}

/// JSON form of a table; the clip table is stored separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableDoc {
    pub io: Vec<Io>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domains: Option<DomainMatch>,
    pub edges: Vec<EdgeDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDoc {
    pub io: Io,
    pub dom: ExcitationConfig,
    pub cod: ExcitationConfig,
    #[serde(rename = "h")]
    pub h_value: f64,
    pub h_init: f64,
    pub glow: f64,
}

pub fn count_parameters(table: &ManyBodyTable) -> usize {
    table.count_parameters()
}
