//! Computer maintenance: diagnose a scenario from its symptoms, then pick components and fixes.
//!
//! Layer 1 holds symptoms, layer 2 the hypothesis (components and causes), layer 3 the action
//! (components and fixes). Every clip's category value is its integer code.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{shape_reward, Environment};
use crate::clips::{ClipId, ClipSpec, ClipTable, ExcitationConfig};
use crate::error::{Error, Result};
use crate::table::{build_table, CategoryCutoffs, DomainMatch, ManyBodyTable};

pub const SYMPTOMS: [(u32, &str); 10] = [
    (1, "PC overheating"),
    (2, "files disappearing"),
    (3, "visible markings on components"),
    (4, "unexpected shutdowns"),
    (5, "slow performance"),
    (6, "old hardware"),
    (7, "strange noises"),
    (8, "software glitches"),
    (9, "blue screen"),
    (10, "no internet"),
];
pub const FIXES: [(u32, &str); 4] =
    [(11, "replace components"), (12, "install missing software"), (13, "cooldown computer"), (14, "run antivirus")];
pub const COMPONENTS: [(u32, &str); 5] = [(15, "CPU"), (16, "SSD"), (17, "MoBo"), (18, "PSU"), (19, "OS")];
pub const CAUSES: [(u32, &str); 5] =
    [(20, "physical damage"), (21, "software damage"), (22, "malware"), (23, "faulty"), (24, "not connected")];

/// Category kinds of the clip table.
pub const SYMPTOM: &str = "symptom";
pub const COMPONENT: &str = "component";
pub const CAUSE: &str = "cause";
pub const FIX: &str = "fix";

pub const MAX_PER_CATEGORY: usize = 3;
pub const SCENARIO_COUNT: usize = 44;

pub const MATCH_REWARD: f64 = 5.0;
pub const MISMATCH_REWARD: f64 = -10.0;
pub const SOLVED_BONUS: f64 = 15.0;
const ACTION_EXCESS_SCALE: f64 = 4.0;
const CONSISTENT: f64 = 1.0;
const CONSISTENT_SUBSET: f64 = 0.25;
const INCONSISTENT: f64 = -2.0;
const JUSTIFIED_FIX: f64 = 0.3;
const UNJUSTIFIED_FIXES: f64 = -4.0;

const SHIPPED_SCENARIOS: &str = include_str!("../../data/scenarios.json");
const SHIPPED_COMPAT: &str = include_str!("../../data/compat.json");
/// Seed that regenerates the shipped scenario file.
pub const SHIPPED_SCENARIO_SEED: u64 = 44;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategorySizes {
    pub symptoms: usize,
    pub components: usize,
    pub causes: usize,
    pub fixes: usize,
}

impl CategorySizes {
    pub const MAINTENANCE: CategorySizes =
        CategorySizes { symptoms: SYMPTOMS.len(), components: COMPONENTS.len(), causes: CAUSES.len(), fixes: FIXES.len() };
}

/// Per-category many-body cutoffs: symptoms, `[components, causes]` in the hypothesis layer,
/// `[components, fixes]` in the action layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasCutoffs {
    pub symptoms: usize,
    pub hidden: [usize; 2],
    pub action: [usize; 2],
}

impl BiasCutoffs {
    /// The smallest configuration able to express every shipped scenario.
    pub const INDUCTIVE: BiasCutoffs = BiasCutoffs { symptoms: 2, hidden: [3, 2], action: [3, 2] };

    pub fn unrestricted(sizes: &CategorySizes) -> Self {
        BiasCutoffs { symptoms: sizes.symptoms, hidden: [sizes.components, sizes.causes], action: [sizes.components, sizes.fixes] }
    }

    pub fn check_against(&self, sizes: &CategorySizes) -> Result<()> {
        let pairs = [
            ("symptoms", self.symptoms, sizes.symptoms),
            ("hidden components", self.hidden[0], sizes.components),
            ("hidden causes", self.hidden[1], sizes.causes),
            ("action components", self.action[0], sizes.components),
            ("action fixes", self.action[1], sizes.fixes),
        ];
        for (name, cutoff, size) in pairs {
            if cutoff == 0 || cutoff > size {
                return Err(Error::Config(format!("cutoff for {name} is {cutoff}, must lie in 1..={size}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub symptoms: Vec<u32>,
    pub components: Vec<u32>,
    pub causes: Vec<u32>,
    pub fixes: Vec<u32>,
}

fn in_codes(codes: &[(u32, &str)], v: u32) -> bool {
    codes.iter().any(|&(c, _)| c == v)
}

fn check_part(name: &str, part: &[u32], codes: &[(u32, &str)]) -> Result<()> {
    if part.is_empty() || part.len() > MAX_PER_CATEGORY {
        return Err(Error::Data(format!("{name} must hold 1..={MAX_PER_CATEGORY} codes, got {part:?}")));
    }
    if part.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Data(format!("{name} must be strictly ascending, got {part:?}")));
    }
    if let Some(bad) = part.iter().find(|&&v| !in_codes(codes, v)) {
        return Err(Error::Data(format!("{name} code {bad} is out of range")));
    }
    Ok(())
}

impl Scenario {
    /// The scenario of the worked example: a dropped machine with a damaged board and drive.
    pub fn dropped_computer() -> Self {
        Scenario { symptoms: vec![2, 3], components: vec![16, 17], causes: vec![20, 21], fixes: vec![11] }
    }

    pub fn validate(&self) -> Result<()> {
        check_part("symptoms", &self.symptoms, &SYMPTOMS)?;
        check_part("components", &self.components, &COMPONENTS)?;
        check_part("causes", &self.causes, &CAUSES)?;
        check_part("fixes", &self.fixes, &FIXES)
    }

    pub fn hidden(&self) -> HiddenChoice {
        HiddenChoice { components: self.components.clone(), causes: self.causes.clone() }
    }

    pub fn action(&self) -> ActionChoice {
        ActionChoice { components: self.components.clone(), fixes: self.fixes.clone() }
    }

    pub fn explanation(&self) -> Explanation {
        Explanation { hidden: self.hidden(), action: self.action() }
    }
}

/// Which causes justify each fix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Compat(pub BTreeMap<u32, Vec<u32>>);

impl Compat {
    pub fn shipped() -> Self {
        Compat::from_json(SHIPPED_COMPAT).expect("shipped compat table is valid")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let compat: Compat = serde_json::from_str(json)?;
        for (fix, causes) in &compat.0 {
            if !in_codes(&FIXES, *fix) || causes.iter().any(|&c| !in_codes(&CAUSES, c)) {
                return Err(Error::Data(format!("compat row {fix} -> {causes:?} uses unknown codes")));
            }
        }
        Ok(compat)
    }

    /// `None` for a fix without a row.
    pub fn justified(&self, fix: u32, causes: &[u32]) -> Option<bool> {
        self.0.get(&fix).map(|need| need.iter().any(|c| causes.contains(c)))
    }
}

pub fn shipped_scenarios() -> Vec<Scenario> {
    let s = scenarios_from_json(SHIPPED_SCENARIOS).expect("shipped scenarios are valid");
    assert_eq!(s.len(), SCENARIO_COUNT);
    s
}

pub fn shipped_scenarios_json() -> &'static str {
    SHIPPED_SCENARIOS
}

pub fn scenarios_from_json(json: &str) -> Result<Vec<Scenario>> {
    let scenarios: Vec<Scenario> = serde_json::from_str(json)?;
    if scenarios.is_empty() {
        return Err(Error::Data("scenario list is empty".into()));
    }
    for (k, s) in scenarios.iter().enumerate() {
        s.validate().map_err(|e| Error::Data(format!("scenario {k}: {e}")))?;
    }
    Ok(scenarios)
}

/// One scenario per line.
pub fn scenarios_to_json(scenarios: &[Scenario]) -> String {
    let lines: Vec<String> =
        scenarios.iter().map(|s| format!("  {}", serde_json::to_string(s).expect("plain data"))).collect();
    format!("[\n{}\n]\n", lines.join(",\n"))
}

fn nonempty_subsets(items: &[u32], max: usize) -> Vec<Vec<u32>> {
    (1u32..1 << items.len())
        .filter(|m| m.count_ones() as usize <= max)
        .map(|m| items.iter().enumerate().filter(|(i, _)| m >> i & 1 == 1).map(|(_, &v)| v).collect())
        .collect()
}

fn contains_all(big: &[u32], small: &[u32]) -> bool {
    small.iter().all(|v| big.contains(v))
}

/// Some part of the percept that a two-symptom agent can read (one or two symptoms) occurs
/// only in scenarios with the same explanation.
fn percept_identifiable(k: usize, scenarios: &[Scenario]) -> bool {
    let own = &scenarios[k];
    nonempty_subsets(&own.symptoms, 2).iter().any(|part| {
        scenarios.iter().all(|other| !contains_all(&other.symptoms, part) || other.explanation() == own.explanation())
    })
}

/// Some part of the hypothesis (at least one component and one cause) occurs only in scenarios
/// with the same action.
fn hypothesis_identifiable(k: usize, scenarios: &[Scenario]) -> bool {
    let own = &scenarios[k];
    let causes = nonempty_subsets(&own.causes, 2);
    nonempty_subsets(&own.components, MAX_PER_CATEGORY).iter().any(|comps| {
        causes.iter().any(|cs| {
            scenarios.iter().all(|other| {
                !(contains_all(&other.components, comps) && contains_all(&other.causes, cs)) || other.action() == own.action()
            })
        })
    })
}

/// Problems that make a scenario set unlearnable for the smallest inductive-bias agent, if any.
pub fn scenario_set_defects(scenarios: &[Scenario], compat: &Compat) -> Vec<String> {
    let mut defects = Vec::new();
    let mut seen = BTreeSet::new();
    for (k, s) in scenarios.iter().enumerate() {
        if !seen.insert(&s.symptoms) {
            defects.push(format!("scenario {k}: symptom set {:?} repeats", s.symptoms));
        }
        if !percept_identifiable(k, scenarios) {
            defects.push(format!("scenario {k}: every one- or two-symptom part is shared with another explanation"));
        }
        if !hypothesis_identifiable(k, scenarios) {
            defects.push(format!("scenario {k}: every part of its hypothesis is shared with another action"));
        }
        if s.causes.len() > 2 || s.fixes.len() > 2 {
            defects.push(format!("scenario {k}: more than two causes or fixes"));
        }
        for &f in &s.fixes {
            if compat.justified(f, &s.causes) != Some(true) {
                defects.push(format!("scenario {k}: fix {f} is not justified by causes {:?}", s.causes));
            }
        }
    }
    defects
}

fn pick<R: Rng>(rng: &mut R, codes: &[u32], max: usize) -> Vec<u32> {
    let n = rng.gen_range(1..=max.min(codes.len()));
    let mut v: Vec<u32> = sample(rng, codes.len(), n).into_iter().map(|i| codes[i]).collect();
    v.sort_unstable();
    v
}

/// The generator deliberately reuses an explanation at most this often.
pub const MAX_FAMILY: usize = 3;

/// Seeded scenario set starting with [`Scenario::dropped_computer`]. Candidates that would leave
/// [`scenario_set_defects`] nonempty are rejected.
pub fn generate_scenarios(seed: u64, count: usize, compat: &Compat) -> Result<Vec<Scenario>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let codes = |t: &[(u32, &str)]| t.iter().map(|&(c, _)| c).collect::<Vec<_>>();
    let (symptoms, components, causes) = (codes(&SYMPTOMS), codes(&COMPONENTS), codes(&CAUSES));
    let mut out = vec![Scenario::dropped_computer()];
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > 200_000 {
            return Err(Error::Data(format!("could not place {count} scenarios, stuck at {}", out.len())));
        }
        let symptoms = pick(&mut rng, &symptoms, MAX_PER_CATEGORY);
        // A third of the time, another presentation of an already placed problem.
        let template = &out[rng.gen_range(0..out.len())];
        let family = out.iter().filter(|s| s.explanation() == template.explanation()).count();
        let candidate = if family < MAX_FAMILY && rng.gen_bool(1.0 / 3.0) {
            Scenario { symptoms, ..template.clone() }
        } else {
            let s_causes = pick(&mut rng, &causes, 2);
            let fixable: Vec<u32> =
                compat.0.keys().copied().filter(|&f| compat.justified(f, &s_causes) == Some(true)).collect();
            if fixable.is_empty() {
                continue;
            }
            Scenario {
                symptoms,
                components: pick(&mut rng, &components, MAX_PER_CATEGORY),
                fixes: pick(&mut rng, &fixable, 2),
                causes: s_causes,
            }
        };
        out.push(candidate);
        if !scenario_set_defects(&out, compat).is_empty() {
            out.pop();
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HiddenChoice {
    pub components: Vec<u32>,
    pub causes: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ActionChoice {
    pub components: Vec<u32>,
    pub fixes: Vec<u32>,
}

/// A hypothesis and the action taken on it.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Explanation {
    pub hidden: HiddenChoice,
    pub action: ActionChoice,
}

fn excess(chosen: usize, wanted: usize) -> usize {
    chosen.saturating_sub(wanted)
}

/// `match_value − scale · excess / max_excess`, where `max_excess` is what the cutoffs allow.
fn match_term(parts: [(&[u32], &[u32], usize); 2], scale: f64) -> f64 {
    let exact = parts.iter().all(|(chosen, wanted, _)| chosen == wanted);
    let over: usize = parts.iter().map(|(c, w, _)| excess(c.len(), w.len())).sum();
    let room: usize = parts.iter().map(|(_, w, cutoff)| excess(*cutoff, w.len())).sum();
    let penalty = if room == 0 { 0.0 } else { (over as f64 / room as f64).min(1.0) };
    (if exact { MATCH_REWARD } else { MISMATCH_REWARD }) - scale * penalty
}

pub fn hypothesis_reward(hidden: &HiddenChoice, scenario: &Scenario, cutoffs: &BiasCutoffs) -> f64 {
    match_term(
        [
            (&hidden.components, &scenario.components, cutoffs.hidden[0]),
            (&hidden.causes, &scenario.causes, cutoffs.hidden[1]),
        ],
        1.0,
    )
}

pub fn plausibility_reward(
    hidden: &HiddenChoice,
    action: &ActionChoice,
    scenario: &Scenario,
    compat: &Compat,
    cutoffs: &BiasCutoffs,
) -> Result<f64> {
    let matched = match_term(
        [
            (&action.components, &scenario.components, cutoffs.action[0]),
            (&action.fixes, &scenario.fixes, cutoffs.action[1]),
        ],
        ACTION_EXCESS_SCALE,
    );
    let consistency = if hidden.components == action.components {
        CONSISTENT
    } else if action.components.iter().all(|c| hidden.components.contains(c)) {
        CONSISTENT_SUBSET
    } else {
        INCONSISTENT
    };
    let n_fix = scenario.fixes.len() as f64;
    let mut unjustified = 0usize;
    let mut causal = 0.0;
    for &f in &action.fixes {
        match compat.justified(f, &hidden.causes) {
            Some(true) => causal += JUSTIFIED_FIX / n_fix,
            Some(false) => unjustified += 1,
            None => return Err(Error::Data(format!("fix {f} has no compat row"))),
        }
    }
    if unjustified > 0 {
        causal += UNJUSTIFIED_FIXES / n_fix * unjustified as f64 / action.fixes.len() as f64;
    }
    Ok(matched + consistency + causal)
}

/// `(+15, +15, true)` when the whole explanation matches the scenario.
pub fn exact_match_bonus(explanation: &Explanation, scenario: &Scenario) -> (f64, f64, bool) {
    if *explanation == scenario.explanation() {
        (SOLVED_BONUS, SOLVED_BONUS, true)
    } else {
        (0.0, 0.0, false)
    }
}

pub fn clip_table() -> ClipTable {
    let mut specs = Vec::new();
    let mut add = |layer: u32, prefix: &str, kind: &str, codes: &[(u32, &str)]| {
        for &(code, name) in codes {
            specs.push(ClipSpec::new(format!("{prefix}{name}")).layer(layer).category(kind, code as i64));
        }
    };
    add(1, "", SYMPTOM, &SYMPTOMS);
    add(2, "suspect ", COMPONENT, &COMPONENTS);
    add(2, "cause ", CAUSE, &CAUSES);
    add(3, "act on ", COMPONENT, &COMPONENTS);
    add(3, "fix ", FIX, &FIXES);
    ClipTable::new(specs).expect("static clip table")
}

pub fn category_cutoffs(clips: &ClipTable, cutoffs: &BiasCutoffs) -> Result<CategoryCutoffs> {
    cutoffs.check_against(&CategorySizes::MAINTENANCE)?;
    CategoryCutoffs::new(
        clips,
        &[
            (1, SYMPTOM, cutoffs.symptoms),
            (2, COMPONENT, cutoffs.hidden[0]),
            (2, CAUSE, cutoffs.hidden[1]),
            (3, COMPONENT, cutoffs.action[0]),
            (3, FIX, cutoffs.action[1]),
        ],
    )
}

/// The agent's table. With `full_configuration`, each step reads the whole current
/// configuration (the unrestricted agent) instead of any admissible part of it.
pub fn meps_table(cutoffs: &BiasCutoffs, full_configuration: bool, h_init: f64) -> Result<ManyBodyTable> {
    let clips = clip_table();
    let predicate = category_cutoffs(&clips, cutoffs)?;
    let io = predicate.io_set();
    let table = build_table(clips, &io, &predicate, h_init)?;
    Ok(if full_configuration { table.with_matching(DomainMatch::Exact) } else { table })
}

pub fn percept_config(clips: &ClipTable, symptoms: &[u32]) -> Result<ExcitationConfig> {
    symptoms
        .iter()
        .map(|&s| {
            clips
                .layer(1)
                .iter()
                .copied()
                .find(|&c| clips.clip(c).category.as_ref().is_some_and(|k| k.value == s as i64))
                .ok_or_else(|| Error::Mapping(format!("unknown symptom {s}")))
        })
        .collect()
}

fn split(clips: &ClipTable, config: &ExcitationConfig, layer: u32, kinds: [&str; 2]) -> Result<[Vec<u32>; 2]> {
    let mut out = [Vec::new(), Vec::new()];
    for c in config.iter() {
        let clip = clips.clip(c);
        let cat = clip.category.as_ref().filter(|_| clip.layer == Some(layer));
        let slot = cat.and_then(|k| kinds.iter().position(|&w| w == k.kind));
        match (slot, cat) {
            (Some(s), Some(k)) => out[s].push(k.value as u32),
            _ => return Err(Error::Mapping(format!("clip {} is not a layer-{layer} clip", clip.label))),
        }
    }
    out.iter_mut().for_each(|v| v.sort_unstable());
    Ok(out)
}

pub fn hidden_of(clips: &ClipTable, config: &ExcitationConfig) -> Result<HiddenChoice> {
    let [components, causes] = split(clips, config, 2, [COMPONENT, CAUSE])?;
    Ok(HiddenChoice { components, causes })
}

pub fn action_of(clips: &ClipTable, config: &ExcitationConfig) -> Result<ActionChoice> {
    let [components, fixes] = split(clips, config, 3, [COMPONENT, FIX])?;
    Ok(ActionChoice { components, fixes })
}

/// Config of the hypothesis or action layer for the given codes.
pub fn layer_config(clips: &ClipTable, layer: u32, parts: [(&str, &[u32]); 2]) -> Result<ExcitationConfig> {
    let mut ids: Vec<ClipId> = Vec::new();
    for (kind, codes) in parts {
        for &code in codes {
            let id = clips.layer(layer).iter().copied().find(|&c| {
                clips.clip(c).category.as_ref().is_some_and(|k| k.kind == kind && k.value == code as i64)
            });
            ids.push(id.ok_or_else(|| Error::Mapping(format!("no {kind} {code} in layer {layer}")))?);
        }
    }
    Ok(ids.into_iter().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaintenanceFeedback {
    /// Shaped hypothesis reward, bonus included.
    pub hypothesis: f64,
    /// Shaped plausibility reward, bonus included.
    pub plausibility: f64,
    pub solved: bool,
    /// Solved or out of steps.
    pub done: bool,
    /// Steps taken in this episode so far, this one included.
    pub steps: u64,
}

#[derive(Debug, Clone)]
pub struct MaintenanceEnv {
    scenarios: Arc<[Scenario]>,
    compat: Arc<Compat>,
    cutoffs: BiasCutoffs,
    a_max: u64,
    step_cap: u64,
    current: usize,
    steps: u64,
}

impl MaintenanceEnv {
    pub fn new(
        scenarios: Arc<[Scenario]>,
        compat: Arc<Compat>,
        cutoffs: BiasCutoffs,
        a_max: u64,
        step_cap: u64,
    ) -> Result<Self> {
        if scenarios.is_empty() {
            return Err(Error::Config("no scenarios".into()));
        }
        if step_cap == 0 {
            return Err(Error::Config("step cap must be positive".into()));
        }
        cutoffs.check_against(&CategorySizes::MAINTENANCE)?;
        Ok(MaintenanceEnv { scenarios, compat, cutoffs, a_max, step_cap, current: 0, steps: 0 })
    }

    pub fn scenario_index(&self) -> usize {
        self.current
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenarios[self.current]
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// A step in which the agent produced no explanation: no reward, but it counts.
    pub fn idle(&mut self) -> MaintenanceFeedback {
        self.steps += 1;
        MaintenanceFeedback { hypothesis: 0.0, plausibility: 0.0, solved: false, done: self.steps >= self.step_cap, steps: self.steps }
    }
}

impl Environment for MaintenanceEnv {
    type Percept = [u32];
    type Action = Explanation;
    type Feedback = MaintenanceFeedback;

    fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.current = rng.gen_range(0..self.scenarios.len());
        self.steps = 0;
    }

    fn percept(&self) -> &[u32] {
        &self.scenarios[self.current].symptoms
    }

    fn act(&mut self, explanation: &Explanation) -> Result<MaintenanceFeedback> {
        self.steps += 1;
        let s = &self.scenarios[self.current];
        let hyp = hypothesis_reward(&explanation.hidden, s, &self.cutoffs);
        let plaus = plausibility_reward(&explanation.hidden, &explanation.action, s, &self.compat, &self.cutoffs)?;
        let (bh, bp, solved) = exact_match_bonus(explanation, s);
        Ok(MaintenanceFeedback {
            hypothesis: shape_reward(hyp + bh, self.steps, self.a_max),
            plausibility: shape_reward(plaus + bp, self.steps, self.a_max),
            solved,
            done: solved || self.steps >= self.step_cap,
            steps: self.steps,
        })
    }
}
