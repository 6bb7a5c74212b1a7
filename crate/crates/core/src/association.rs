//! Association between label stability and why an item invites variation.
//!
//! Items are cross-classified as stable/unstable and, from expert
//! rationalisation labels, as subjective or ambiguous/difficult:
//!
//! |          | subjective | ambiguous/difficult |
//! |----------|------------|---------------------|
//! | stable   | a          | b                   |
//! | unstable | c          | d                   |
//!
//! The phi coefficient is `(bc - ad) / sqrt((a+b)(c+d)(a+c)(b+d))`. Note the
//! numerator is the negation of the more common `ad - bc`; the magnitude is
//! identical under either convention.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Read};
use std::path::Path;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotation::RoundSelector;
use crate::annotation::{validate_dataset, AnnotationSet, LabelSchema, RawRecord};
use crate::error::{Error, Result};
use crate::quadrant::{reliability_score, stability_score, QuadrantAssignment, StabilityMetric};
use crate::reliability::MetricName;
use crate::resample::{draw_indices, percentile_interval, substream, BootstrapOptions, Interval};
use crate::stability::{ItemStabilityLabel, StabilityClass};

/// Sign convention tag written into association reports.
pub const PHI_CONVENTION: &str = "paper(bc-ad)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rationale {
    Subjective,
    Ambiguous,
    Difficult,
}

impl Rationale {
    pub const ALL: [Rationale; 3] = [
        Rationale::Subjective,
        Rationale::Ambiguous,
        Rationale::Difficult,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Rationale::Subjective => "subjective",
            Rationale::Ambiguous => "ambiguous",
            Rationale::Difficult => "difficult",
        }
    }

    pub fn class(self) -> RationaleClass {
        match self {
            Rationale::Subjective => RationaleClass::Subjective,
            Rationale::Ambiguous | Rationale::Difficult => RationaleClass::AmbiguousDifficult,
        }
    }
}

/// Collapsed two-way rationalisation variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RationaleClass {
    Subjective,
    AmbiguousDifficult,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalisationRecord {
    pub item_id: String,
    pub rater_id: String,
    pub label: Rationale,
    /// Round index when the meta-annotation itself is repeated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round: Option<u32>,
}

impl RationalisationRecord {
    pub fn new(item_id: &str, rater_id: &str, label: Rationale) -> Self {
        Self {
            item_id: item_id.into(),
            rater_id: rater_id.into(),
            label,
            round: None,
        }
    }
}

pub fn read_rationalisations_csv<R: Read>(reader: R) -> Result<Vec<RationalisationRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    Ok(rdr
        .deserialize()
        .collect::<std::result::Result<Vec<_>, _>>()?)
}

pub fn read_rationalisations_jsonl<R: BufRead>(reader: R) -> Result<Vec<RationalisationRecord>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io("<rationalisation jsonl>", e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

pub fn load_rationalisations(path: impl AsRef<Path>) -> Result<Vec<RationalisationRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") | Some("ndjson") => {
            read_rationalisations_jsonl(std::io::BufReader::new(file))
        }
        _ => read_rationalisations_csv(file),
    }
}

/// Views rationalisation labels as an ordinary annotation set so the
/// meta-task's own stability can be measured. Missing rounds count as 1.
pub fn rationalisation_set(records: &[RationalisationRecord]) -> Result<AnnotationSet> {
    let schema = LabelSchema::nominal("rationalisation", Rationale::ALL.map(Rationale::as_str))?;
    validate_dataset(
        records.iter().map(|r| {
            RawRecord::new(
                "rationalisation",
                &r.item_id,
                &r.rater_id,
                i64::from(r.round.unwrap_or(1)),
                r.label.as_str(),
            )
        }),
        &schema,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolution {
    pub classes: BTreeMap<String, RationaleClass>,
    /// Items whose raters split evenly between the two classes.
    pub ties: Vec<String>,
}

/// Majority vote per item over the collapsed classes; exact ties are
/// excluded and listed. Only first-round labels vote.
pub fn resolve_rationalisation(records: &[RationalisationRecord]) -> Result<Resolution> {
    let mut votes: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.round.unwrap_or(1) == 1) {
        let v = votes.entry(r.item_id.as_str()).or_default();
        match r.label.class() {
            RationaleClass::Subjective => v.0 += 1,
            RationaleClass::AmbiguousDifficult => v.1 += 1,
        }
    }
    if votes.is_empty() {
        return Err(Error::Empty("rationalisation records"));
    }
    let mut classes = BTreeMap::new();
    let mut ties = Vec::new();
    for (item, (subjective, other)) in votes {
        match subjective.cmp(&other) {
            std::cmp::Ordering::Greater => {
                classes.insert(item.to_string(), RationaleClass::Subjective);
            }
            std::cmp::Ordering::Less => {
                classes.insert(item.to_string(), RationaleClass::AmbiguousDifficult);
            }
            std::cmp::Ordering::Equal => ties.push(item.to_string()),
        }
    }
    Ok(Resolution { classes, ties })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    /// stable and subjective
    pub a: u64,
    /// stable and ambiguous/difficult
    pub b: u64,
    /// unstable and subjective
    pub c: u64,
    /// unstable and ambiguous/difficult
    pub d: u64,
}

impl ContingencyTable {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        Self { a, b, c, d }
    }

    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    /// Row margins (stable, unstable) then column margins (subjective, ambiguous).
    pub fn margins(&self) -> [u64; 4] {
        [
            self.a + self.b,
            self.c + self.d,
            self.a + self.c,
            self.b + self.d,
        ]
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.a, self.c, self.b, self.d)
    }
}

impl fmt::Display for ContingencyTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(a={}, b={}, c={}, d={})",
            self.a, self.b, self.c, self.d
        )
    }
}

/// Counts items present in both inputs into the four cells.
pub fn build_contingency(
    stability: &[ItemStabilityLabel],
    resolution: &Resolution,
) -> Result<ContingencyTable> {
    let mut t = ContingencyTable::new(0, 0, 0, 0);
    for s in stability {
        let Some(class) = resolution.classes.get(&s.item_id) else {
            continue;
        };
        let cell = match (s.label, class) {
            (StabilityClass::Stable, RationaleClass::Subjective) => &mut t.a,
            (StabilityClass::Stable, RationaleClass::AmbiguousDifficult) => &mut t.b,
            (StabilityClass::Unstable, RationaleClass::Subjective) => &mut t.c,
            (StabilityClass::Unstable, RationaleClass::AmbiguousDifficult) => &mut t.d,
        };
        *cell += 1;
    }
    if t.total() == 0 {
        return Err(Error::Degenerate(
            "no item has both a stability label and a resolved rationalisation".into(),
        ));
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssociationResult {
    pub phi: f64,
    pub p_value: Option<f64>,
    pub table: ContingencyTable,
    #[serde(rename = "excluded_ties")]
    pub n_excluded_ties: usize,
    pub convention: &'static str,
}

fn phi_value(t: &ContingencyTable) -> Result<f64> {
    let margins = t.margins();
    if margins.contains(&0) {
        return Err(Error::ZeroMargin);
    }
    let (a, b, c, d) = (t.a as f64, t.b as f64, t.c as f64, t.d as f64);
    let denom = margins.iter().map(|&m| m as f64).product::<f64>().sqrt();
    Ok((b * c - a * d) / denom)
}

/// Phi coefficient with the `(bc - ad)` orientation.
pub fn phi(table: &ContingencyTable) -> Result<AssociationResult> {
    Ok(AssociationResult {
        phi: phi_value(table)?,
        p_value: None,
        table: *table,
        n_excluded_ties: 0,
        convention: PHI_CONVENTION,
    })
}

/// Two-sided permutation p-value: the share of random tables with the same
/// margins whose |phi| reaches the observed |phi|.
pub fn permutation_p(table: &ContingencyTable, replicates: usize, seed: u64) -> Result<f64> {
    let observed = phi_value(table)?.abs();
    if replicates == 0 {
        return Err(Error::InvalidConfig("replicates must be positive".into()));
    }
    let n = table.total() as usize;
    let [stable, _, subjective, _] = table.margins();
    let (stable, subjective) = (stable as usize, subjective as usize);
    let hits: usize = (0..replicates as u64)
        .into_par_iter()
        .map(|i| {
            // Items 0..subjective are the subjective column; draw the stable row.
            let rows = sample(&mut substream(seed, i), n, stable);
            let a = rows.iter().filter(|&r| r < subjective).count() as u64;
            let t = ContingencyTable::new(
                a,
                stable as u64 - a,
                subjective as u64 - a,
                (n - stable - subjective) as u64 + a,
            );
            let v = phi_value(&t).expect("margins are preserved").abs();
            usize::from(v >= observed - 1e-12)
        })
        .sum();
    Ok(hits as f64 / replicates as f64)
}

/// Full association analysis: table, phi and permutation p-value.
pub fn associate(
    stability: &[ItemStabilityLabel],
    resolution: &Resolution,
    replicates: usize,
    seed: u64,
) -> Result<AssociationResult> {
    let table = build_contingency(stability, resolution)?;
    let mut result = phi(&table)?;
    result.p_value = Some(permutation_p(&table, replicates, seed)?);
    result.n_excluded_ties = resolution.ties.len();
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub metric: String,
    pub value_a: f64,
    pub value_b: f64,
    /// `value_a - value_b`
    pub difference: f64,
    pub ci: (f64, f64),
    pub dropped_replicates: usize,
}

impl Comparison {
    pub fn ci_excludes_zero(&self) -> bool {
        self.ci.0 > 0.0 || self.ci.1 < 0.0
    }
}

fn compare_sets<F>(
    set_a: &AnnotationSet,
    set_b: &AnnotationSet,
    metric: String,
    opts: &BootstrapOptions,
    score: F,
) -> Result<Comparison>
where
    F: Fn(&AnnotationSet) -> Result<f64> + Sync,
{
    let value_a = score(set_a)?;
    let value_b = score(set_b)?;
    let (na, nb) = (set_a.item_ids().len(), set_b.item_ids().len());
    let Interval {
        low, high, dropped, ..
    } = percentile_interval(opts, |rng| {
        let ra = set_a.resample_items(&draw_indices(rng, na));
        let rb = set_b.resample_items(&draw_indices(rng, nb));
        Ok(score(&ra)? - score(&rb)?)
    })?;
    Ok(Comparison {
        metric,
        value_a,
        value_b,
        difference: value_a - value_b,
        ci: (low, high),
        dropped_replicates: dropped,
    })
}

/// Difference in dataset stability, with an item-resampling bootstrap
/// interval (items resampled within each set).
pub fn compare_stability(
    set_a: &AnnotationSet,
    set_b: &AnnotationSet,
    metric: StabilityMetric,
    opts: &BootstrapOptions,
) -> Result<Comparison> {
    let name = serde_json::to_value(metric)?
        .as_str()
        .unwrap_or_default()
        .to_string();
    compare_sets(set_a, set_b, name, opts, |s| stability_score(s, metric))
}

/// Difference in round-1 reliability, bootstrapped like [`compare_stability`].
pub fn compare_reliability(
    set_a: &AnnotationSet,
    set_b: &AnnotationSet,
    metric: MetricName,
    opts: &BootstrapOptions,
) -> Result<Comparison> {
    compare_sets(set_a, set_b, metric.to_string(), opts, |s| {
        reliability_score(s, metric, RoundSelector::Round(1))
    })
}

/// Item classes compared by the item-level hypotheses. Items that received
/// no rationalisation are treated as straightforward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemGroup {
    Straightforward,
    Subjective,
    AmbiguousDifficult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Reliability,
    Stability,
}

/// Groups classified items by their resolved rationalisation; tied items
/// are left out.
pub fn item_groups(
    assignments: &[QuadrantAssignment],
    resolution: &Resolution,
) -> BTreeMap<String, ItemGroup> {
    assignments
        .iter()
        .filter(|a| !resolution.ties.contains(&a.subject_id))
        .map(|a| {
            let group = match resolution.classes.get(&a.subject_id) {
                None => ItemGroup::Straightforward,
                Some(RationaleClass::Subjective) => ItemGroup::Subjective,
                Some(RationaleClass::AmbiguousDifficult) => ItemGroup::AmbiguousDifficult,
            };
            (a.subject_id.clone(), group)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupComparison {
    pub axis: Axis,
    pub group_a: ItemGroup,
    pub group_b: ItemGroup,
    pub n_a: usize,
    pub n_b: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    /// `mean_a - mean_b`
    pub difference: f64,
    pub ci: (f64, f64),
}

impl GroupComparison {
    /// `group_a` scores higher, with an interval excluding zero.
    pub fn a_higher(&self) -> bool {
        self.difference > 0.0 && self.ci.0 > 0.0
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Difference of mean item scores between two groups, with a bootstrap
/// interval from resampling items within each group.
pub fn compare_item_groups(
    assignments: &[QuadrantAssignment],
    groups: &BTreeMap<String, ItemGroup>,
    group_a: ItemGroup,
    group_b: ItemGroup,
    axis: Axis,
    opts: &BootstrapOptions,
) -> Result<GroupComparison> {
    let scores = |g: ItemGroup| -> Vec<f64> {
        assignments
            .iter()
            .filter(|a| groups.get(&a.subject_id) == Some(&g))
            .map(|a| match axis {
                Axis::Reliability => a.reliability_score,
                Axis::Stability => a.stability_score,
            })
            .collect()
    };
    let (xa, xb) = (scores(group_a), scores(group_b));
    if xa.is_empty() || xb.is_empty() {
        return Err(Error::Degenerate(format!(
            "empty item group ({group_a:?} vs {group_b:?})"
        )));
    }
    let interval = percentile_interval(opts, |rng| {
        let ma = mean(
            &draw_indices(rng, xa.len())
                .into_iter()
                .map(|i| xa[i])
                .collect::<Vec<_>>(),
        );
        let mb = mean(
            &draw_indices(rng, xb.len())
                .into_iter()
                .map(|i| xb[i])
                .collect::<Vec<_>>(),
        );
        Ok(ma - mb)
    })?;
    let (mean_a, mean_b) = (mean(&xa), mean(&xb));
    Ok(GroupComparison {
        axis,
        group_a,
        group_b,
        n_a: xa.len(),
        n_b: xb.len(),
        mean_a,
        mean_b,
        difference: mean_a - mean_b,
        ci: (interval.low, interval.high),
    })
}

/// One directional claim about item groups and how the data bear on it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub claim: String,
    pub comparison: Option<GroupComparison>,
    /// `None` when a group was empty.
    pub supported: Option<bool>,
}

/// The item-level orderings: subjective items below straightforward ones
/// on reliability but above ambiguous/difficult ones on stability, and
/// ambiguous/difficult items below both other groups on both axes.
pub fn item_hypotheses(
    assignments: &[QuadrantAssignment],
    groups: &BTreeMap<String, ItemGroup>,
    opts: &BootstrapOptions,
) -> Result<Vec<HypothesisCheck>> {
    use Axis::*;
    use ItemGroup::*;
    let claims = [
        (
            Straightforward,
            Subjective,
            Reliability,
            "subjective items have lower reliability than straightforward items",
        ),
        (
            Subjective,
            AmbiguousDifficult,
            Stability,
            "subjective items have higher stability than ambiguous/difficult items",
        ),
        (
            Straightforward,
            AmbiguousDifficult,
            Reliability,
            "ambiguous/difficult items have lower reliability than straightforward items",
        ),
        (
            Subjective,
            AmbiguousDifficult,
            Reliability,
            "ambiguous/difficult items have lower reliability than subjective items",
        ),
        (
            Straightforward,
            AmbiguousDifficult,
            Stability,
            "ambiguous/difficult items have lower stability than straightforward items",
        ),
    ];
    claims
        .iter()
        .enumerate()
        .map(|(k, &(hi, lo, axis, claim))| {
            let opts = BootstrapOptions {
                seed: opts.seed.wrapping_add(k as u64),
                ..*opts
            };
            match compare_item_groups(assignments, groups, hi, lo, axis, &opts) {
                Ok(c) => Ok(HypothesisCheck {
                    claim: claim.to_string(),
                    supported: Some(c.a_higher()),
                    comparison: Some(c),
                }),
                Err(Error::Degenerate(_)) => Ok(HypothesisCheck {
                    claim: claim.to_string(),
                    comparison: None,
                    supported: None,
                }),
                Err(e) => Err(e),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(item: &str, rater: &str, label: Rationale) -> RationalisationRecord {
        RationalisationRecord::new(item, rater, label)
    }

    #[test]
    fn majority_and_ties() {
        use Rationale::*;
        let r = resolve_rationalisation(&[
            rec("i1", "e1", Ambiguous),
            rec("i1", "e2", Difficult),
            rec("i1", "e3", Difficult),
            rec("i2", "e1", Subjective),
            rec("i2", "e2", Subjective),
            rec("i3", "e1", Subjective),
            rec("i3", "e2", Ambiguous),
        ])
        .unwrap();
        assert_eq!(r.classes["i1"], RationaleClass::AmbiguousDifficult);
        assert_eq!(r.classes["i2"], RationaleClass::Subjective);
        assert_eq!(r.ties, vec!["i3".to_string()]);
        assert!(matches!(resolve_rationalisation(&[]), Err(Error::Empty(_))));
    }

    fn label(item: &str, stable: bool) -> ItemStabilityLabel {
        ItemStabilityLabel {
            item_id: item.into(),
            label: if stable {
                StabilityClass::Stable
            } else {
                StabilityClass::Unstable
            },
            n_annotators_repeating: 1,
            consistency_rate: if stable { 1.0 } else { 0.0 },
        }
    }

    #[test]
    fn contingency_counts_intersection() {
        let mut stab = Vec::new();
        let mut classes = BTreeMap::new();
        for i in 0..10 {
            stab.push(label(&format!("s{i}"), true));
            classes.insert(format!("s{i}"), RationaleClass::Subjective);
            stab.push(label(&format!("u{i}"), false));
            classes.insert(format!("u{i}"), RationaleClass::AmbiguousDifficult);
        }
        stab.push(label("only-stability", true));
        let res = Resolution {
            classes,
            ties: vec![],
        };
        assert_eq!(
            build_contingency(&stab, &res).unwrap(),
            ContingencyTable::new(10, 0, 0, 10)
        );
        let empty = Resolution {
            classes: BTreeMap::new(),
            ties: vec![],
        };
        assert!(build_contingency(&stab, &empty).is_err());
    }

    #[test]
    fn phi_fixtures() {
        assert_eq!(phi(&ContingencyTable::new(10, 0, 0, 10)).unwrap().phi, -1.0);
        assert_eq!(phi(&ContingencyTable::new(0, 10, 10, 0)).unwrap().phi, 1.0);
        assert_eq!(phi(&ContingencyTable::new(5, 5, 5, 5)).unwrap().phi, 0.0);
        assert!(matches!(
            phi(&ContingencyTable::new(5, 5, 0, 0)),
            Err(Error::ZeroMargin)
        ));
    }

    #[test]
    fn permutation_fixtures() {
        let strong = ContingencyTable::new(10, 0, 0, 10);
        let p = permutation_p(&strong, 10_000, 3).unwrap();
        assert!(p < 0.01, "{p}");
        assert_eq!(p, permutation_p(&strong, 10_000, 3).unwrap());
        let null = ContingencyTable::new(5, 5, 5, 5);
        assert_eq!(permutation_p(&null, 500, 3).unwrap(), 1.0);
    }
}
