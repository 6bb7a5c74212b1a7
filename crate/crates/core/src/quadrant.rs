//! The reliability-stability matrix: crossing high/low inter-annotator
//! agreement with high/low intra-annotator agreement.
//!
//! |                  | high stability               | low stability                     |
//! |------------------|------------------------------|-----------------------------------|
//! | high reliability | straightforward, good quality | systematic errors / value changes |
//! | low reliability  | variable perspectives         | ambiguous or difficult / poor     |
//!
//! A score equal to its cut counts as high.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotationSet, RoundSelector};
use crate::error::{Error, Result};
use crate::reliability::{MetricName, MetricSpec};
use crate::stability::{dataset_stability, item_stability_labels};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Quadrant {
    Straightforward,
    SystematicErrorOrValueChange,
    SubjectivePerspectives,
    AmbiguousDifficultOrPoor,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [
        Quadrant::Straightforward,
        Quadrant::SystematicErrorOrValueChange,
        Quadrant::SubjectivePerspectives,
        Quadrant::AmbiguousDifficultOrPoor,
    ];

    pub fn from_levels(high_reliability: bool, high_stability: bool) -> Self {
        match (high_reliability, high_stability) {
            (true, true) => Quadrant::Straightforward,
            (true, false) => Quadrant::SystematicErrorOrValueChange,
            (false, true) => Quadrant::SubjectivePerspectives,
            (false, false) => Quadrant::AmbiguousDifficultOrPoor,
        }
    }

    pub fn high_reliability(self) -> bool {
        matches!(
            self,
            Quadrant::Straightforward | Quadrant::SystematicErrorOrValueChange
        )
    }

    pub fn high_stability(self) -> bool {
        matches!(
            self,
            Quadrant::Straightforward | Quadrant::SubjectivePerspectives
        )
    }

    /// Both readings of the matrix cell.
    pub fn reading(self) -> &'static str {
        match self {
            Quadrant::Straightforward => "Straightforward / Good quality",
            Quadrant::SystematicErrorOrValueChange => "Systematic errors / Value changes",
            Quadrant::SubjectivePerspectives => "Variable perspectives (high subjectivity)",
            Quadrant::AmbiguousDifficultOrPoor => "Ambiguous or difficult / Poor quality",
        }
    }
}

impl fmt::Display for Quadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum StabilityMetric {
    ExactRate,
    #[default]
    SelfKappa,
}

impl StabilityMetric {
    pub fn is_chance_corrected(self) -> bool {
        self == StabilityMetric::SelfKappa
    }
}

/// Conventional cut for chance-corrected coefficients.
pub const CHANCE_CORRECTED_CUT: f64 = 0.6;
/// Conventional cut for raw agreement rates.
pub const RAW_RATE_CUT: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadrantThresholds {
    pub reliability_cut: f64,
    pub stability_cut: f64,
    pub reliability_metric: MetricName,
    pub stability_metric: StabilityMetric,
}

impl Default for QuadrantThresholds {
    fn default() -> Self {
        Self::for_metrics(MetricName::KrippendorffAlpha, StabilityMetric::SelfKappa)
    }
}

impl QuadrantThresholds {
    /// Default cuts for the chosen metrics: 0.6 for chance-corrected
    /// coefficients, 0.8 for raw rates.
    pub fn for_metrics(reliability_metric: MetricName, stability_metric: StabilityMetric) -> Self {
        let reliability_cut = if reliability_metric == MetricName::PercentAgreement {
            RAW_RATE_CUT
        } else {
            CHANCE_CORRECTED_CUT
        };
        let stability_cut = if stability_metric.is_chance_corrected() {
            CHANCE_CORRECTED_CUT
        } else {
            RAW_RATE_CUT
        };
        Self {
            reliability_cut,
            stability_cut,
            reliability_metric,
            stability_metric,
        }
    }

    pub fn with_cuts(mut self, reliability_cut: f64, stability_cut: f64) -> Self {
        self.reliability_cut = reliability_cut;
        self.stability_cut = stability_cut;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, cut) in [
            ("reliability_cut", self.reliability_cut),
            ("stability_cut", self.stability_cut),
        ] {
            if !(cut > 0.0 && cut < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must lie strictly in (0, 1), got {cut}"
                )));
            }
        }
        if self.reliability_metric == MetricName::CohensKappa {
            return Err(Error::InvalidConfig(
                "Cohen's kappa is pairwise; choose a multi-annotator reliability metric".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuadrantScope {
    Dataset,
    Item,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadrantAssignment {
    pub scope: QuadrantScope,
    pub subject_id: String,
    #[serde(rename = "reliability")]
    pub reliability_score: f64,
    #[serde(rename = "stability")]
    pub stability_score: f64,
    pub quadrant: Quadrant,
}

pub fn classify(
    reliability_score: f64,
    stability_score: f64,
    thresholds: &QuadrantThresholds,
) -> Result<Quadrant> {
    for score in [reliability_score, stability_score] {
        if !score.is_finite() {
            return Err(Error::NonFinite(score));
        }
    }
    Ok(Quadrant::from_levels(
        reliability_score >= thresholds.reliability_cut,
        stability_score >= thresholds.stability_cut,
    ))
}

fn metric_spec(name: MetricName) -> Result<MetricSpec> {
    Ok(match name {
        MetricName::PercentAgreement => MetricSpec::PercentAgreement,
        MetricName::FleissKappa => MetricSpec::FleissKappa,
        MetricName::KrippendorffAlpha => MetricSpec::KrippendorffAlpha { distance: None },
        MetricName::Icc => MetricSpec::Icc {
            model: Default::default(),
        },
        MetricName::CohensKappa => {
            return Err(Error::InvalidConfig(
                "Cohen's kappa needs an annotator pair".into(),
            ))
        }
    })
}

/// Dataset-level reliability on the given round with a named metric.
pub fn reliability_score(
    set: &AnnotationSet,
    metric: MetricName,
    round: RoundSelector,
) -> Result<f64> {
    Ok(metric_spec(metric)?.compute(set, round)?.value)
}

/// Dataset-level stability across rounds with the chosen metric.
pub fn stability_score(set: &AnnotationSet, metric: StabilityMetric) -> Result<f64> {
    let result = dataset_stability(set)?;
    match metric {
        StabilityMetric::ExactRate => Ok(result.exact_rate),
        StabilityMetric::SelfKappa => result
            .self_kappa
            .ok_or_else(|| Error::Degenerate("self-kappa undefined for every annotator".into())),
    }
}

/// Scores the whole set (reliability on round 1) and places it in the matrix.
pub fn classify_dataset(
    set: &AnnotationSet,
    thresholds: &QuadrantThresholds,
) -> Result<QuadrantAssignment> {
    thresholds.validate()?;
    let reliability =
        reliability_score(set, thresholds.reliability_metric, RoundSelector::Round(1))?;
    let stability = stability_score(set, thresholds.stability_metric)?;
    Ok(QuadrantAssignment {
        scope: QuadrantScope::Dataset,
        subject_id: set.schema().task_id.clone(),
        reliability_score: reliability,
        stability_score: stability,
        quadrant: classify(reliability, stability, thresholds)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemQuadrantReport {
    pub assignments: Vec<QuadrantAssignment>,
    /// Items lacking two round-1 labels or any repeat pair.
    pub excluded: Vec<String>,
}

/// Per-item placement. Chance correction is undefined for a single item, so
/// reliability is the share of agreeing round-1 annotator pairs and
/// stability the share of repeating annotators who were consistent.
pub fn classify_items(
    set: &AnnotationSet,
    thresholds: &QuadrantThresholds,
) -> Result<ItemQuadrantReport> {
    thresholds.validate()?;
    let k = set.n_categories();
    let ids = set.item_ids();
    let mut reliability: BTreeMap<&str, f64> = BTreeMap::new();
    for unit in set.units(RoundSelector::Round(1)) {
        let m = unit.labels.len();
        if m < 2 {
            continue;
        }
        let mut tally = vec![0usize; k];
        for &(_, c) in &unit.labels {
            tally[c] += 1;
        }
        let agreeing: usize = tally.iter().map(|&t| t * t.saturating_sub(1) / 2).sum();
        reliability.insert(&ids[unit.item], agreeing as f64 / (m * (m - 1) / 2) as f64);
    }
    let stability: BTreeMap<String, f64> = match item_stability_labels(set) {
        Ok(report) => report
            .labels
            .into_iter()
            .map(|l| (l.item_id, l.consistency_rate))
            .collect(),
        Err(Error::NoRepeats) => BTreeMap::new(),
        Err(e) => return Err(e),
    };
    let mut assignments = Vec::new();
    let mut excluded = Vec::new();
    for id in ids {
        match (reliability.get(id.as_str()), stability.get(id)) {
            (Some(&r), Some(&s)) => assignments.push(QuadrantAssignment {
                scope: QuadrantScope::Item,
                subject_id: id.clone(),
                reliability_score: r,
                stability_score: s,
                quadrant: classify(r, s, thresholds)?,
            }),
            _ => excluded.push(id.clone()),
        }
    }
    if assignments.is_empty() {
        return Err(Error::NoQualifyingItems);
    }
    Ok(ItemQuadrantReport {
        assignments,
        excluded,
    })
}
