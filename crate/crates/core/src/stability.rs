//! Intra-annotator agreement across repeat rounds.
//!
//! Stability is measured on repeat pairs: one annotator's labels for the same
//! item from two rounds. An item is stable only when every annotator who
//! labelled it more than once gave the same label in all of their rounds.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotation::{pair_indices, AnnotationSet, PairIdx, Pairing, RepeatPair};
use crate::error::{Error, Result};
use crate::reliability::kappa_from_pairs;
use crate::resample::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Annotator,
    Item,
    Dataset,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityResult {
    pub scope: Scope,
    pub subject_id: Option<String>,
    pub exact_rate: f64,
    pub self_kappa: Option<f64>,
    pub n_pairs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StabilityClass {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemStabilityLabel {
    pub item_id: String,
    #[serde(rename = "stability")]
    pub label: StabilityClass,
    pub n_annotators_repeating: usize,
    /// Share of repeating annotators who were consistent on this item.
    pub consistency_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemStabilityReport {
    pub labels: Vec<ItemStabilityLabel>,
    /// Items nobody labelled in two or more rounds.
    pub excluded: Vec<String>,
}

impl ItemStabilityReport {
    pub fn get(&self, item_id: &str) -> Option<&ItemStabilityLabel> {
        self.labels.iter().find(|l| l.item_id == item_id)
    }
}

fn summarize(pairs: &[PairIdx], k: usize) -> (f64, Option<f64>) {
    let consistent = pairs.iter().filter(|p| p.first == p.second).count();
    let exact_rate = consistent as f64 / pairs.len() as f64;
    let labels: Vec<(usize, usize)> = pairs.iter().map(|p| (p.first, p.second)).collect();
    (exact_rate, kappa_from_pairs(&labels, k).ok())
}

/// Consistency of one annotator with themselves across rounds.
///
/// `self_kappa` treats the earlier and later labels of each pair as two
/// raters; it is absent when chance agreement is 1 without perfect agreement.
pub fn self_agreement(
    set: &AnnotationSet,
    annotator_id: &str,
    pairing: Pairing,
) -> Result<StabilityResult> {
    let ann = set.annotator_index(annotator_id).ok_or(Error::NoRepeats)?;
    let pairs: Vec<PairIdx> = pair_indices(set, pairing)
        .into_iter()
        .filter(|p| p.annotator == ann)
        .collect();
    if pairs.is_empty() {
        return Err(Error::NoRepeats);
    }
    let (exact_rate, self_kappa) = summarize(&pairs, set.n_categories());
    Ok(StabilityResult {
        scope: Scope::Annotator,
        subject_id: Some(set.annotator_ids()[ann].clone()),
        exact_rate,
        self_kappa,
        n_pairs: pairs.len(),
    })
}

/// Per-annotator stability for every annotator with at least one repeat pair.
pub fn annotator_stability(set: &AnnotationSet, pairing: Pairing) -> Result<Vec<StabilityResult>> {
    let mut by_annotator: BTreeMap<usize, Vec<PairIdx>> = BTreeMap::new();
    for p in pair_indices(set, pairing) {
        by_annotator.entry(p.annotator).or_default().push(p);
    }
    if by_annotator.is_empty() {
        return Err(Error::NoRepeats);
    }
    Ok(by_annotator
        .into_iter()
        .map(|(ann, pairs)| {
            let (exact_rate, self_kappa) = summarize(&pairs, set.n_categories());
            StabilityResult {
                scope: Scope::Annotator,
                subject_id: Some(set.annotator_ids()[ann].clone()),
                exact_rate,
                self_kappa,
                n_pairs: pairs.len(),
            }
        })
        .collect())
}

/// Binary stable/unstable label per item that has at least one repeat.
pub fn item_stability_labels(set: &AnnotationSet) -> Result<ItemStabilityReport> {
    // item -> (repeating annotators, consistent annotators)
    let mut counts: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for t in set.tracks().iter().filter(|t| t.rounds.len() >= 2) {
        let e = counts.entry(t.item).or_default();
        e.0 += 1;
        if t.is_consistent() {
            e.1 += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::NoRepeats);
    }
    let ids = set.item_ids();
    let labels = counts
        .iter()
        .map(|(&item, &(repeating, consistent))| ItemStabilityLabel {
            item_id: ids[item].clone(),
            label: if consistent == repeating {
                StabilityClass::Stable
            } else {
                StabilityClass::Unstable
            },
            n_annotators_repeating: repeating,
            consistency_rate: consistent as f64 / repeating as f64,
        })
        .collect();
    let excluded = (0..ids.len())
        .filter(|i| !counts.contains_key(i))
        .map(|i| ids[i].clone())
        .collect();
    Ok(ItemStabilityReport { labels, excluded })
}

/// Dataset stability with the default (consecutive) pairing.
pub fn dataset_stability(set: &AnnotationSet) -> Result<StabilityResult> {
    dataset_stability_with(set, Pairing::default())
}

/// Exact rate pooled over all repeat pairs; `self_kappa` is the mean of the
/// per-annotator values that are defined.
pub fn dataset_stability_with(set: &AnnotationSet, pairing: Pairing) -> Result<StabilityResult> {
    let pairs = pair_indices(set, pairing);
    if pairs.is_empty() {
        return Err(Error::NoRepeats);
    }
    let consistent = pairs.iter().filter(|p| p.first == p.second).count();
    let per_annotator = annotator_stability(set, pairing)?;
    let kappas: Vec<f64> = per_annotator.iter().filter_map(|r| r.self_kappa).collect();
    let self_kappa = if kappas.is_empty() {
        None
    } else {
        Some(kappas.iter().sum::<f64>() / kappas.len() as f64)
    };
    Ok(StabilityResult {
        scope: Scope::Dataset,
        subject_id: None,
        exact_rate: consistent as f64 / pairs.len() as f64,
        self_kappa,
        n_pairs: pairs.len(),
    })
}

/// Upper edges of the default interval buckets: 1 hour, 1 day, 1 week and
/// 30 days, giving five buckets from same-session to over a month.
pub const DEFAULT_BUCKET_EDGES: [f64; 4] = [3_600.0, 86_400.0, 604_800.0, 2_592_000.0];

/// Index of the bucket `[edges[i-1], edges[i])` holding `seconds`.
pub fn bucket_index(edges: &[f64], seconds: f64) -> usize {
    edges.partition_point(|&e| e <= seconds)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationOptions {
    pub replicates: usize,
    pub seed: u64,
}

impl Default for PermutationOptions {
    fn default() -> Self {
        Self {
            replicates: crate::resample::DEFAULT_REPLICATES,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalBucket {
    pub lower_seconds: f64,
    /// `None` for the open-ended last bucket.
    pub upper_seconds: Option<f64>,
    pub mean_exact_rate: Option<f64>,
    pub n_pairs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Trend {
    pub rho: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalProfile {
    pub buckets: Vec<IntervalBucket>,
    pub trend: Trend,
}

impl IntervalProfile {
    /// Bucket consistencies never rise as the interval grows.
    pub fn is_non_increasing(&self) -> bool {
        let means: Vec<f64> = self
            .buckets
            .iter()
            .filter_map(|b| b.mean_exact_rate)
            .collect();
        means.windows(2).all(|w| w[1] <= w[0])
    }
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties. A constant input
/// has no rank variation and yields 0.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

fn bucket_trend(
    bucket_of: &[usize],
    consistent: &[bool],
    n_buckets: usize,
) -> (Vec<(usize, usize)>, f64) {
    let mut tallies = vec![(0usize, 0usize); n_buckets];
    for (&b, &ok) in bucket_of.iter().zip(consistent) {
        tallies[b].0 += 1;
        if ok {
            tallies[b].1 += 1;
        }
    }
    let (idx, means): (Vec<f64>, Vec<f64>) = tallies
        .iter()
        .enumerate()
        .filter(|(_, t)| t.0 > 0)
        .map(|(i, t)| (i as f64, t.1 as f64 / t.0 as f64))
        .unzip();
    (tallies, spearman(&idx, &means))
}

/// Consistency per label-relabel interval bucket, with a Spearman trend
/// between bucket order and consistency. The p-value shuffles pair outcomes
/// across buckets while keeping bucket sizes fixed.
pub fn interval_profile(
    pairs: &[RepeatPair],
    edges: &[f64],
    opts: &PermutationOptions,
) -> Result<IntervalProfile> {
    if edges.iter().any(|e| !e.is_finite() || *e <= 0.0) || edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig(
            "bucket edges must be positive and strictly increasing".into(),
        ));
    }
    if opts.replicates == 0 {
        return Err(Error::InvalidConfig("replicates must be positive".into()));
    }
    let timed: Vec<(f64, bool)> = pairs
        .iter()
        .filter_map(|p| p.interval_seconds.map(|s| (s, p.is_consistent())))
        .collect();
    if timed.is_empty() {
        return Err(Error::NoIntervals);
    }
    let n_buckets = edges.len() + 1;
    let bucket_of: Vec<usize> = timed.iter().map(|&(s, _)| bucket_index(edges, s)).collect();
    let consistent: Vec<bool> = timed.iter().map(|&(_, ok)| ok).collect();
    let (tallies, rho) = bucket_trend(&bucket_of, &consistent, n_buckets);
    let non_empty = tallies.iter().filter(|t| t.0 > 0).count();
    if non_empty < 2 {
        return Err(Error::TooFewBuckets(non_empty));
    }
    let hits: usize = (0..opts.replicates as u64)
        .into_par_iter()
        .map(|i| {
            let mut shuffled = consistent.clone();
            shuffled.shuffle(&mut substream(opts.seed, i));
            let (_, r) = bucket_trend(&bucket_of, &shuffled, n_buckets);
            usize::from(r.abs() >= rho.abs() - 1e-12)
        })
        .sum();
    let buckets = tallies
        .iter()
        .enumerate()
        .map(|(i, &(n, ok))| IntervalBucket {
            lower_seconds: if i == 0 { 0.0 } else { edges[i - 1] },
            upper_seconds: edges.get(i).copied(),
            mean_exact_rate: (n > 0).then(|| ok as f64 / n as f64),
            n_pairs: n,
        })
        .collect();
    Ok(IntervalProfile {
        buckets,
        trend: Trend {
            rho,
            p: hits as f64 / opts.replicates as f64,
        },
    })
}
