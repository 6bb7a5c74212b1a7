//! Generative annotator simulator with known per-item causes of variation.
//!
//! Each item is generated by one [`ItemCause`]:
//!
//! * `straightforward`: one true label; every annotation flips to a uniform
//!   other label with the round's error probability.
//! * `subjective`: the label is a function of the annotator's perspective
//!   group (`(base + group) mod K`), identical across rounds up to noise.
//! * `ambiguous`: every annotation is drawn uniformly, independently per round.
//! * `difficult`: each annotator holds a latent label that deviates from the
//!   truth with probability `difficult_error`; it is re-emitted each round with
//!   flip probability `error + difficult_flip`.
//! * `value_shift`: everyone emits `L1` in round 1 and `L2 != L1` afterwards.
//!
//! The per-round error probability is `base_error + drift * b`, where `b` is
//! the interval bucket (see [`DEFAULT_BUCKET_EDGES`]) of the time elapsed
//! since round 1. Every random draw comes from a substream keyed by
//! `(seed, purpose, item, annotator, round)`, so output does not depend on
//! evaluation order.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotationSet, LabelSchema};
use crate::association::ItemGroup;
use crate::error::{Error, Result};
use crate::quadrant::{Quadrant, QuadrantAssignment};
use crate::resample::substream;
use crate::stability::{bucket_index, DEFAULT_BUCKET_EDGES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemCause {
    Straightforward,
    Subjective,
    Ambiguous,
    Difficult,
    ValueShift,
}

impl ItemCause {
    pub const ALL: [ItemCause; 5] = [
        ItemCause::Straightforward,
        ItemCause::Subjective,
        ItemCause::Ambiguous,
        ItemCause::Difficult,
        ItemCause::ValueShift,
    ];

    /// The matrix cell this cause should land in.
    pub fn expected_quadrant(self) -> Quadrant {
        match self {
            ItemCause::Straightforward => Quadrant::Straightforward,
            ItemCause::Subjective => Quadrant::SubjectivePerspectives,
            ItemCause::Ambiguous | ItemCause::Difficult => Quadrant::AmbiguousDifficultOrPoor,
            ItemCause::ValueShift => Quadrant::SystematicErrorOrValueChange,
        }
    }

    /// Rationalisation group an expert would assign; value shifts have none.
    pub fn item_group(self) -> Option<ItemGroup> {
        match self {
            ItemCause::Straightforward => Some(ItemGroup::Straightforward),
            ItemCause::Subjective => Some(ItemGroup::Subjective),
            ItemCause::Ambiguous | ItemCause::Difficult => Some(ItemGroup::AmbiguousDifficult),
            ItemCause::ValueShift => None,
        }
    }
}

impl fmt::Display for ItemCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).map_err(|_| fmt::Error)?;
        f.write_str(v.as_str().unwrap_or_default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorProfile {
    pub annotator_id: String,
    pub perspective_group: usize,
    pub base_error: f64,
    pub drift_per_interval: f64,
}

const TWO_WEEKS: u64 = 14 * 86_400;

fn default_groups() -> usize {
    2
}
fn default_categories() -> Vec<String> {
    vec!["x".into(), "y".into()]
}
fn default_rounds() -> u32 {
    2
}
fn default_difficult_error() -> f64 {
    0.4
}
fn default_difficult_flip() -> f64 {
    0.25
}
fn default_task() -> String {
    "sim".into()
}
fn default_start() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_annotators: usize,
    #[serde(default = "default_groups")]
    pub n_groups: usize,
    pub items_per_cause: BTreeMap<ItemCause, usize>,
    #[serde(default = "default_categories")]
    pub categories: Vec<String>,
    #[serde(default = "default_rounds")]
    pub rounds: u32,
    /// Seconds between consecutive rounds (`rounds - 1` entries). Empty
    /// means two weeks between every round.
    #[serde(default)]
    pub interval_per_round: Vec<u64>,
    #[serde(default)]
    pub base_error: f64,
    #[serde(default)]
    pub drift: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_difficult_error")]
    pub difficult_error: f64,
    #[serde(default = "default_difficult_flip")]
    pub difficult_flip: f64,
    #[serde(default = "default_task")]
    pub task_id: String,
    #[serde(default = "default_start")]
    pub start: DateTime<Utc>,
}

impl SimConfig {
    /// Binary labels, two rounds two weeks apart, no noise.
    pub fn new(
        n_annotators: usize,
        items_per_cause: impl IntoIterator<Item = (ItemCause, usize)>,
    ) -> Self {
        Self {
            n_annotators,
            n_groups: default_groups(),
            items_per_cause: items_per_cause.into_iter().collect(),
            categories: default_categories(),
            rounds: default_rounds(),
            interval_per_round: Vec::new(),
            base_error: 0.0,
            drift: 0.0,
            seed: 0,
            difficult_error: default_difficult_error(),
            difficult_flip: default_difficult_flip(),
            task_id: default_task(),
            start: default_start(),
        }
    }

    pub fn single_cause(cause: ItemCause, n_annotators: usize, n_items: usize) -> Self {
        Self::new(n_annotators, [(cause, n_items)])
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: SimConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_error(mut self, base_error: f64) -> Self {
        self.base_error = base_error;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_annotators < 2 {
            return bad(format!(
                "n_annotators must be >= 2, got {}",
                self.n_annotators
            ));
        }
        if self.n_groups == 0 || self.n_groups > self.n_annotators {
            return bad(format!(
                "n_groups must lie in 1..=n_annotators, got {}",
                self.n_groups
            ));
        }
        if self.items_per_cause.values().sum::<usize>() == 0 {
            return bad("items_per_cause must total at least 1".into());
        }
        if !(2..=3).contains(&self.categories.len()) {
            return bad(format!(
                "categories must have 2 or 3 labels, got {}",
                self.categories.len()
            ));
        }
        if self.rounds < 2 {
            return bad(format!("rounds must be >= 2, got {}", self.rounds));
        }
        if !self.interval_per_round.is_empty()
            && self.interval_per_round.len() != self.rounds as usize - 1
        {
            return bad(format!(
                "interval_per_round needs {} entries, got {}",
                self.rounds - 1,
                self.interval_per_round.len()
            ));
        }
        if !(0.0..0.5).contains(&self.base_error) {
            return bad(format!(
                "base_error must lie in [0, 0.5), got {}",
                self.base_error
            ));
        }
        if !(self.drift >= 0.0 && self.drift.is_finite()) {
            return bad(format!("drift must be finite and >= 0, got {}", self.drift));
        }
        if !(0.0..=1.0).contains(&self.difficult_error) {
            return bad(format!(
                "difficult_error must lie in [0, 1], got {}",
                self.difficult_error
            ));
        }
        if !(0.0..1.0).contains(&self.difficult_flip) {
            return bad(format!(
                "difficult_flip must lie in [0, 1), got {}",
                self.difficult_flip
            ));
        }
        LabelSchema::nominal(self.task_id.clone(), &self.categories)?;
        Ok(())
    }

    fn gaps(&self) -> Vec<u64> {
        if self.interval_per_round.is_empty() {
            vec![TWO_WEEKS; self.rounds as usize - 1]
        } else {
            self.interval_per_round.clone()
        }
    }

    /// Seconds since round 1 at each round.
    pub fn elapsed(&self) -> Vec<u64> {
        let mut out = vec![0];
        for g in self.gaps() {
            out.push(out.last().unwrap() + g);
        }
        out
    }

    pub fn annotator_profiles(&self) -> Vec<AnnotatorProfile> {
        (0..self.n_annotators)
            .map(|j| AnnotatorProfile {
                annotator_id: annotator_id(j, self.n_annotators),
                perspective_group: j % self.n_groups,
                base_error: self.base_error,
                drift_per_interval: self.drift,
            })
            .collect()
    }
}

/// Ground-truth labels behind an item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TruthLabel {
    Fixed { label: String },
    PerGroup { labels: Vec<String> },
    Shift { before: String, after: String },
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimTruth {
    pub causes: BTreeMap<String, ItemCause>,
    pub labels: BTreeMap<String, TruthLabel>,
    pub annotators: Vec<AnnotatorProfile>,
}

fn width(n: usize) -> usize {
    n.max(1).to_string().len()
}

fn annotator_id(j: usize, n: usize) -> String {
    format!("a{:0w$}", j + 1, w = width(n))
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream key for one `(purpose, item, annotator, round)` draw.
fn key(purpose: u64, item: usize, annotator: usize, round: u32) -> u64 {
    [item as u64, annotator as u64, u64::from(round)]
        .iter()
        .fold(mix(purpose), |acc, &x| mix(acc ^ x))
}

const ITEM: u64 = 1;
const LATENT: u64 = 2;
const EMIT: u64 = 3;

fn other_label(rng: &mut impl Rng, label: usize, k: usize) -> usize {
    (label + 1 + rng.random_range(0..k - 1)) % k
}

fn maybe_flip(rng: &mut impl Rng, label: usize, p: f64, k: usize) -> usize {
    if p > 0.0 && rng.random::<f64>() < p {
        other_label(rng, label, k)
    } else {
        label
    }
}

/// Generates one multi-round dataset together with its ground truth.
pub fn simulate(config: &SimConfig) -> Result<(AnnotationSet, SimTruth)> {
    config.validate()?;
    let schema = LabelSchema::nominal(config.task_id.clone(), &config.categories)?;
    let k = schema.categories.len();
    let max_flip = (k - 1) as f64 / k as f64;
    let elapsed = config.elapsed();
    let round_error: Vec<f64> = elapsed
        .iter()
        .map(|&s| {
            let b = bucket_index(&DEFAULT_BUCKET_EDGES, s as f64) as f64;
            (config.base_error + config.drift * b).min(max_flip)
        })
        .collect();
    let stamps: Vec<DateTime<Utc>> = elapsed
        .iter()
        .map(|&s| config.start + Duration::seconds(s as i64))
        .collect();

    let causes: Vec<ItemCause> = config
        .items_per_cause
        .iter()
        .flat_map(|(&c, &n)| std::iter::repeat_n(c, n))
        .collect();
    let n_items = causes.len();
    let item_ids: Vec<String> = (0..n_items)
        .map(|i| format!("i{:0w$}", i + 1, w = width(n_items)))
        .collect();
    let profiles = config.annotator_profiles();
    let seed = config.seed;
    let cats = &schema.categories;

    // per item: truth plus (annotator, round, category) emissions
    type Emitted = (TruthLabel, Vec<(usize, u32, usize)>);
    let generated: Vec<Emitted> = causes
        .par_iter()
        .enumerate()
        .map(|(i, &cause)| {
            let mut item_rng = substream(seed, key(ITEM, i, 0, 0));
            let truth = item_rng.random_range(0..k);
            let shifted = other_label(&mut item_rng, truth, k);
            let truth_label = match cause {
                ItemCause::Straightforward | ItemCause::Difficult => TruthLabel::Fixed {
                    label: cats[truth].clone(),
                },
                ItemCause::Subjective => TruthLabel::PerGroup {
                    labels: (0..config.n_groups)
                        .map(|g| cats[(truth + g) % k].clone())
                        .collect(),
                },
                ItemCause::Ambiguous => TruthLabel::Uniform,
                ItemCause::ValueShift => TruthLabel::Shift {
                    before: cats[truth].clone(),
                    after: cats[shifted].clone(),
                },
            };
            let mut labels = Vec::with_capacity(profiles.len() * config.rounds as usize);
            for (j, profile) in profiles.iter().enumerate() {
                let latent = if cause == ItemCause::Difficult {
                    let mut rng = substream(seed, key(LATENT, i, j, 0));
                    maybe_flip(&mut rng, truth, config.difficult_error, k)
                } else {
                    truth
                };
                for r in 1..=config.rounds {
                    let p = round_error[r as usize - 1];
                    let mut rng = substream(seed, key(EMIT, i, j, r));
                    let label = match cause {
                        ItemCause::Straightforward => maybe_flip(&mut rng, truth, p, k),
                        ItemCause::Subjective => {
                            maybe_flip(&mut rng, (truth + profile.perspective_group) % k, p, k)
                        }
                        ItemCause::Ambiguous => rng.random_range(0..k),
                        ItemCause::Difficult => maybe_flip(
                            &mut rng,
                            latent,
                            (p + config.difficult_flip).min(max_flip),
                            k,
                        ),
                        ItemCause::ValueShift => {
                            maybe_flip(&mut rng, if r == 1 { truth } else { shifted }, p, k)
                        }
                    };
                    labels.push((j, r, label));
                }
            }
            (truth_label, labels)
        })
        .collect();

    let mut tuples = Vec::with_capacity(n_items * profiles.len() * config.rounds as usize);
    let mut truth = SimTruth {
        causes: BTreeMap::new(),
        labels: BTreeMap::new(),
        annotators: profiles.clone(),
    };
    for (i, (truth_label, labels)) in generated.into_iter().enumerate() {
        truth.causes.insert(item_ids[i].clone(), causes[i]);
        truth.labels.insert(item_ids[i].clone(), truth_label);
        for (j, r, c) in labels {
            tuples.push((
                item_ids[i].clone(),
                profiles[j].annotator_id.clone(),
                r,
                c,
                Some(stamps[r as usize - 1]),
            ));
        }
    }
    let set = AnnotationSet::assemble(schema, tuples)?;
    Ok((set, truth))
}

/// Share of subjects whose quadrant matches the one implied by their cause.
pub fn recovery_accuracy(
    assignments: &[QuadrantAssignment],
    truth: &BTreeMap<String, ItemCause>,
) -> Result<f64> {
    recovery_accuracy_with(assignments, truth, ItemCause::expected_quadrant)
}

pub fn recovery_accuracy_with(
    assignments: &[QuadrantAssignment],
    truth: &BTreeMap<String, ItemCause>,
    expected: impl Fn(ItemCause) -> Quadrant,
) -> Result<f64> {
    if assignments.is_empty() {
        return Err(Error::CoverageMismatch("no assignments".into()));
    }
    if assignments.len() != truth.len() {
        return Err(Error::CoverageMismatch(format!(
            "{} assignments vs {} truth subjects",
            assignments.len(),
            truth.len()
        )));
    }
    let mut hits = 0;
    for a in assignments {
        let cause = truth
            .get(&a.subject_id)
            .ok_or_else(|| Error::CoverageMismatch(format!("{} has no truth", a.subject_id)))?;
        if expected(*cause) == a.quadrant {
            hits += 1;
        }
    }
    Ok(hits as f64 / assignments.len() as f64)
}
