//! Inter-annotator agreement within a round: percent agreement, Cohen's and
//! Fleiss' kappa, Krippendorff's alpha, and the intraclass correlation.
//!
//! Missing cells are handled per metric: pairwise measures use co-labelled
//! items, alpha uses the coincidence construction, and Fleiss' kappa and ICC
//! require equal rater counts and report the units they excluded.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::annotation::{
    coincidence_counts, AnnotationSet, CoincidenceMatrix, RoundSelector, ScaleKind, Unit,
};
use crate::error::{Error, Result};
use crate::resample::{draw_indices, percentile_interval, BootstrapOptions, Interval};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum MetricName {
    PercentAgreement,
    CohensKappa,
    FleissKappa,
    KrippendorffAlpha,
    Icc,
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricName::PercentAgreement => "percent_agreement",
            MetricName::CohensKappa => "cohens_kappa",
            MetricName::FleissKappa => "fleiss_kappa",
            MetricName::KrippendorffAlpha => "krippendorff_alpha",
            MetricName::Icc => "icc",
        })
    }
}

/// Squared-difference function for Krippendorff's alpha.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
#[value(rename_all = "snake_case")]
pub enum Distance {
    Nominal,
    Ordinal,
    Interval,
}

impl From<ScaleKind> for Distance {
    fn from(kind: ScaleKind) -> Self {
        match kind {
            ScaleKind::Nominal => Distance::Nominal,
            ScaleKind::Ordinal => Distance::Ordinal,
            ScaleKind::Interval => Distance::Interval,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum IccModel {
    /// ICC(1,1)
    #[default]
    OnewayRandom,
    /// ICC(2,1)
    TwowayRandomSingle,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementResult {
    pub metric: MetricName,
    pub value: f64,
    pub n_items: usize,
    pub n_annotators: usize,
    pub round: RoundSelector,
    pub ci: Option<(f64, f64)>,
    /// Units left out of the computation (e.g. single-label items).
    pub exclusions: Vec<String>,
}

impl AgreementResult {
    pub fn with_interval(mut self, interval: &Interval) -> Self {
        self.ci = Some((interval.low, interval.high));
        self
    }
}

fn unit_name(set: &AnnotationSet, unit: &Unit, selector: RoundSelector) -> String {
    let item = &set.item_ids()[unit.item];
    match selector {
        RoundSelector::Round(_) => item.clone(),
        RoundSelector::All => format!("{item}@{}", unit.round),
    }
}

fn distinct_annotators<'a>(units: impl IntoIterator<Item = &'a Unit>) -> usize {
    units
        .into_iter()
        .flat_map(|u| u.labels.iter().map(|&(a, _)| a))
        .collect::<BTreeSet<_>>()
        .len()
}

fn tally(unit: &Unit, k: usize) -> Vec<usize> {
    let mut t = vec![0usize; k];
    for &(_, c) in &unit.labels {
        t[c] += 1;
    }
    t
}

/// Mean over units of the share of agreeing unordered annotator pairs.
pub fn percent_agreement(set: &AnnotationSet, round: RoundSelector) -> Result<AgreementResult> {
    let k = set.n_categories();
    let units = set.units(round);
    let (used, excluded): (Vec<&Unit>, Vec<&Unit>) =
        units.iter().partition(|u| u.labels.len() >= 2);
    if used.is_empty() {
        return Err(Error::Degenerate("no item has two or more labels".into()));
    }
    let total: f64 = used
        .iter()
        .map(|u| {
            let m = u.labels.len();
            let agreeing: usize = tally(u, k)
                .iter()
                .map(|&t| t * t.saturating_sub(1) / 2)
                .sum();
            agreeing as f64 / (m * (m - 1) / 2) as f64
        })
        .sum();
    Ok(AgreementResult {
        metric: MetricName::PercentAgreement,
        value: total / used.len() as f64,
        n_items: used.len(),
        n_annotators: distinct_annotators(used.iter().copied()),
        round,
        ci: None,
        exclusions: excluded.iter().map(|u| unit_name(set, u, round)).collect(),
    })
}

/// `(P_o - P_e) / (1 - P_e)` from paired category indices.
pub(crate) fn kappa_from_pairs(pairs: &[(usize, usize)], k: usize) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Degenerate("no paired labels".into()));
    }
    let n = pairs.len() as f64;
    let mut ma = vec![0usize; k];
    let mut mb = vec![0usize; k];
    let mut agree = 0usize;
    for &(a, b) in pairs {
        ma[a] += 1;
        mb[b] += 1;
        if a == b {
            agree += 1;
        }
    }
    let po = agree as f64 / n;
    let pe: f64 = ma
        .iter()
        .zip(&mb)
        .map(|(&x, &y)| (x as f64 / n) * (y as f64 / n))
        .sum();
    if pe >= 1.0 {
        return if agree == pairs.len() {
            Ok(1.0)
        } else {
            Err(Error::ChanceDegenerate { observed: po })
        };
    }
    Ok((po - pe) / (1.0 - pe))
}

/// Cohen's kappa between two annotators over their co-labelled units.
pub fn cohens_kappa(
    set: &AnnotationSet,
    annotator_a: &str,
    annotator_b: &str,
    round: RoundSelector,
) -> Result<AgreementResult> {
    let no_overlap = || Error::NoOverlap {
        a: annotator_a.to_string(),
        b: annotator_b.to_string(),
    };
    let ia = set.annotator_index(annotator_a).ok_or_else(no_overlap)?;
    let ib = set.annotator_index(annotator_b).ok_or_else(no_overlap)?;
    let mut pairs = Vec::new();
    let mut exclusions = Vec::new();
    for unit in set.units(round) {
        let la = unit.labels.iter().find(|&&(a, _)| a == ia).map(|&(_, c)| c);
        let lb = unit.labels.iter().find(|&&(a, _)| a == ib).map(|&(_, c)| c);
        match (la, lb) {
            (Some(x), Some(y)) => pairs.push((x, y)),
            (Some(_), None) | (None, Some(_)) => exclusions.push(unit_name(set, &unit, round)),
            (None, None) => {}
        }
    }
    if pairs.is_empty() {
        return Err(no_overlap());
    }
    let value = kappa_from_pairs(&pairs, set.n_categories())?;
    Ok(AgreementResult {
        metric: MetricName::CohensKappa,
        value,
        n_items: pairs.len(),
        n_annotators: 2,
        round,
        ci: None,
        exclusions,
    })
}

/// The rater count Fleiss' kappa is computed at: the most frequent count
/// among units with two or more labels (larger count on ties). When several
/// counts occur and none is shared by two units there is no defensible
/// choice, and `None` is returned.
fn fleiss_rater_count(units: &[Unit]) -> Option<usize> {
    let mut freq: BTreeMap<usize, usize> = BTreeMap::new();
    for u in units.iter().filter(|u| u.labels.len() >= 2) {
        *freq.entry(u.labels.len()).or_default() += 1;
    }
    let (&n, &f) = freq.iter().max_by_key(|&(&n, &f)| (f, n))?;
    if f == 1 && freq.len() > 1 {
        return None;
    }
    Some(n)
}

/// Fleiss' kappa over units sharing one rater count.
pub fn fleiss_kappa(set: &AnnotationSet, round: RoundSelector) -> Result<AgreementResult> {
    let k = set.n_categories();
    let units = set.units(round);
    let n = fleiss_rater_count(&units)
        .ok_or_else(|| Error::Degenerate("no two items share a rater count".into()))?;
    let (used, excluded): (Vec<&Unit>, Vec<&Unit>) =
        units.iter().partition(|u| u.labels.len() == n);
    let nf = n as f64;
    let mut p_sum = 0.0;
    let mut col = vec![0usize; k];
    for u in &used {
        let t = tally(u, k);
        let sq: usize = t.iter().map(|&x| x * x).sum();
        p_sum += (sq - n) as f64 / (nf * (nf - 1.0));
        for (c, x) in t.into_iter().enumerate() {
            col[c] += x;
        }
    }
    let n_units = used.len() as f64;
    let p_bar = p_sum / n_units;
    let p_e: f64 = col
        .iter()
        .map(|&x| (x as f64 / (n_units * nf)).powi(2))
        .sum();
    let value = if p_e >= 1.0 {
        if col.iter().filter(|&&x| x > 0).count() == 1 {
            1.0
        } else {
            return Err(Error::ChanceDegenerate { observed: p_bar });
        }
    } else {
        (p_bar - p_e) / (1.0 - p_e)
    };
    Ok(AgreementResult {
        metric: MetricName::FleissKappa,
        value,
        n_items: used.len(),
        n_annotators: distinct_annotators(used.iter().copied()),
        round,
        ci: None,
        exclusions: excluded.iter().map(|u| unit_name(set, u, round)).collect(),
    })
}

/// Squared distances between categories for the given metric.
///
/// The ordinal metric uses the coincidence marginals `n_g`:
/// `(sum_{g=c..k} n_g - (n_c + n_k) / 2)^2`.
pub fn distance_matrix(
    set: &AnnotationSet,
    distance: Distance,
    marginals: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let k = set.n_categories();
    let mut d = vec![vec![0.0; k]; k];
    match distance {
        Distance::Nominal => {
            for (c, row) in d.iter_mut().enumerate() {
                for (j, cell) in row.iter_mut().enumerate() {
                    *cell = if c == j { 0.0 } else { 1.0 };
                }
            }
        }
        Distance::Ordinal => {
            for c in 0..k {
                for j in 0..k {
                    if c == j {
                        continue;
                    }
                    let (lo, hi) = (c.min(j), c.max(j));
                    let span: f64 = marginals[lo..=hi].iter().sum();
                    d[c][j] = (span - (marginals[c] + marginals[j]) / 2.0).powi(2);
                }
            }
        }
        Distance::Interval => {
            let values = set.schema().values().ok_or_else(|| {
                Error::InvalidSchema("interval distance requires numeric_values".into())
            })?;
            for c in 0..k {
                for j in 0..k {
                    d[c][j] = (values[c] - values[j]).powi(2);
                }
            }
        }
    }
    Ok(d)
}

/// Observed and expected disagreement of a coincidence matrix.
pub fn disagreements(m: &CoincidenceMatrix, delta: &[Vec<f64>]) -> (f64, f64) {
    let n = m.n_values as f64;
    let marg = m.marginals();
    let k = m.categories.len();
    let mut d_o = 0.0;
    let mut d_e = 0.0;
    for c in 0..k {
        for j in 0..k {
            d_o += m.counts[c][j] * delta[c][j];
            d_e += marg[c] * marg[j] * delta[c][j];
        }
    }
    (d_o / n, d_e / (n * (n - 1.0)))
}

/// Krippendorff's alpha, `1 - D_o / D_e`. `distance` defaults to the
/// schema's scale kind.
pub fn krippendorff_alpha(
    set: &AnnotationSet,
    round: RoundSelector,
    distance: Option<Distance>,
) -> Result<AgreementResult> {
    let distance = distance.unwrap_or_else(|| set.schema().scale_kind.into());
    let m = coincidence_counts(set, round)?;
    let delta = distance_matrix(set, distance, &m.marginals())?;
    let (d_o, d_e) = disagreements(&m, &delta);
    let value = if d_e == 0.0 {
        if d_o == 0.0 {
            1.0
        } else {
            return Err(Error::ZeroExpected { observed: d_o });
        }
    } else {
        1.0 - d_o / d_e
    };
    let units = set.units(round);
    let (used, excluded): (Vec<&Unit>, Vec<&Unit>) =
        units.iter().partition(|u| u.labels.len() >= 2);
    Ok(AgreementResult {
        metric: MetricName::KrippendorffAlpha,
        value,
        n_items: used.len(),
        n_annotators: distinct_annotators(used.iter().copied()),
        round,
        ci: None,
        exclusions: excluded.iter().map(|u| unit_name(set, u, round)).collect(),
    })
}

/// Intraclass correlation on the complete item x annotator grid.
pub fn icc(set: &AnnotationSet, round: RoundSelector, model: IccModel) -> Result<AgreementResult> {
    let schema = set.schema();
    if schema.scale_kind != ScaleKind::Interval {
        return Err(Error::NotInterval(schema.scale_kind.to_string()));
    }
    let values = schema
        .values()
        .ok_or_else(|| Error::InvalidSchema("interval scale requires numeric_values".into()))?;
    let units = set.units(round);
    let raters: Vec<usize> = units
        .iter()
        .flat_map(|u| u.labels.iter().map(|&(a, _)| a))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let k = raters.len();
    let (rows, excluded): (Vec<&Unit>, Vec<&Unit>) =
        units.iter().partition(|u| u.labels.len() == k);
    if rows.len() < 2 || k < 2 {
        return Err(Error::Degenerate(format!(
            "ICC needs at least 2 complete rows and 2 raters, got {} rows and {k} raters",
            rows.len()
        )));
    }
    // Unit labels are sorted by annotator, and every complete row holds all raters.
    let grid: Vec<Vec<f64>> = rows
        .iter()
        .map(|u| u.labels.iter().map(|&(_, c)| values[c]).collect())
        .collect();
    let n = grid.len();
    let (nf, kf) = (n as f64, k as f64);
    let grand = grid.iter().flatten().sum::<f64>() / (nf * kf);
    let row_means: Vec<f64> = grid.iter().map(|r| r.iter().sum::<f64>() / kf).collect();
    let col_means: Vec<f64> = (0..k)
        .map(|j| grid.iter().map(|r| r[j]).sum::<f64>() / nf)
        .collect();
    let ss_rows: f64 = kf * row_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ms_rows = ss_rows / (nf - 1.0);
    let value = match model {
        IccModel::OnewayRandom => {
            let ss_within: f64 = grid
                .iter()
                .zip(&row_means)
                .map(|(r, m)| r.iter().map(|x| (x - m).powi(2)).sum::<f64>())
                .sum();
            let ms_within = ss_within / (nf * (kf - 1.0));
            if ms_rows == 0.0 && ms_within == 0.0 {
                return Err(Error::InsufficientVariance);
            }
            (ms_rows - ms_within) / (ms_rows + (kf - 1.0) * ms_within)
        }
        IccModel::TwowayRandomSingle => {
            let ss_cols: f64 = nf * col_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
            let ms_cols = ss_cols / (kf - 1.0);
            let ss_err: f64 = grid
                .iter()
                .enumerate()
                .flat_map(|(i, r)| {
                    let row_means = &row_means;
                    let col_means = &col_means;
                    r.iter()
                        .enumerate()
                        .map(move |(j, x)| (x - row_means[i] - col_means[j] + grand).powi(2))
                })
                .sum();
            let ms_err = ss_err / ((nf - 1.0) * (kf - 1.0));
            if ms_rows == 0.0 && ms_err == 0.0 {
                return Err(Error::InsufficientVariance);
            }
            let denom = ms_rows + (kf - 1.0) * ms_err + kf * (ms_cols - ms_err) / nf;
            if denom == 0.0 {
                return Err(Error::InsufficientVariance);
            }
            (ms_rows - ms_err) / denom
        }
    };
    Ok(AgreementResult {
        metric: MetricName::Icc,
        value,
        n_items: n,
        n_annotators: k,
        round,
        ci: None,
        exclusions: excluded.iter().map(|u| unit_name(set, u, round)).collect(),
    })
}

/// A reliability metric together with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", rename_all = "snake_case")]
pub enum MetricSpec {
    PercentAgreement,
    CohensKappa {
        annotator_a: String,
        annotator_b: String,
    },
    FleissKappa,
    KrippendorffAlpha {
        #[serde(default)]
        distance: Option<Distance>,
    },
    Icc {
        #[serde(default)]
        model: IccModel,
    },
}

impl MetricSpec {
    pub fn name(&self) -> MetricName {
        match self {
            MetricSpec::PercentAgreement => MetricName::PercentAgreement,
            MetricSpec::CohensKappa { .. } => MetricName::CohensKappa,
            MetricSpec::FleissKappa => MetricName::FleissKappa,
            MetricSpec::KrippendorffAlpha { .. } => MetricName::KrippendorffAlpha,
            MetricSpec::Icc { .. } => MetricName::Icc,
        }
    }

    /// Whether the metric corrects for chance agreement.
    pub fn is_chance_corrected(&self) -> bool {
        !matches!(self, MetricSpec::PercentAgreement)
    }

    pub fn compute(&self, set: &AnnotationSet, round: RoundSelector) -> Result<AgreementResult> {
        match self {
            MetricSpec::PercentAgreement => percent_agreement(set, round),
            MetricSpec::CohensKappa {
                annotator_a,
                annotator_b,
            } => cohens_kappa(set, annotator_a, annotator_b, round),
            MetricSpec::FleissKappa => fleiss_kappa(set, round),
            MetricSpec::KrippendorffAlpha { distance } => krippendorff_alpha(set, round, *distance),
            MetricSpec::Icc { model } => icc(set, round, *model),
        }
    }
}

impl Default for MetricSpec {
    fn default() -> Self {
        MetricSpec::KrippendorffAlpha { distance: None }
    }
}

/// Percentile bootstrap interval from item-level resampling with replacement.
pub fn bootstrap_ci(
    metric: &MetricSpec,
    set: &AnnotationSet,
    round: RoundSelector,
    opts: &BootstrapOptions,
) -> Result<Interval> {
    metric.compute(set, round)?;
    let n = set.item_ids().len();
    percentile_interval(opts, |rng| {
        let picks = draw_indices(rng, n);
        metric
            .compute(&set.resample_items(&picks), round)
            .map(|r| r.value)
    })
}

/// Computes `metric` and attaches its bootstrap interval.
pub fn with_bootstrap(
    metric: &MetricSpec,
    set: &AnnotationSet,
    round: RoundSelector,
    opts: &BootstrapOptions,
) -> Result<AgreementResult> {
    let result = metric.compute(set, round)?;
    let interval = bootstrap_ci(metric, set, round, opts)?;
    Ok(result.with_interval(&interval))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{validate_dataset, LabelSchema, RawRecord};

    const R1: RoundSelector = RoundSelector::Round(1);

    /// Builds a round-1 set from per-annotator label rows.
    fn grid(rows: &[(&str, &[&str])], categories: &[&str]) -> AnnotationSet {
        let schema = LabelSchema::nominal("t", categories).unwrap();
        let records = rows.iter().flat_map(|(ann, labels)| {
            labels
                .iter()
                .enumerate()
                .filter(|(_, l)| !l.is_empty())
                .map(move |(i, l)| RawRecord::new("t", &format!("i{i}"), ann, 1, l))
        });
        validate_dataset(records, &schema).unwrap()
    }

    fn close(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn percent_agreement_fixtures() {
        let s = grid(
            &[("a", &["x", "x", "y", "y"]), ("b", &["x", "x", "y", "x"])],
            &["x", "y"],
        );
        close(percent_agreement(&s, R1).unwrap().value, 0.75);
        let s = grid(&[("a", &["x"]), ("b", &["x"]), ("c", &["y"])], &["x", "y"]);
        close(percent_agreement(&s, R1).unwrap().value, 1.0 / 3.0);
        let s = grid(&[("a", &["x", "y"]), ("b", &["x", "y"])], &["x", "y"]);
        assert_eq!(percent_agreement(&s, R1).unwrap().value, 1.0);
    }

    #[test]
    fn cohen_fixtures() {
        let s = grid(
            &[("A", &["x", "x", "y", "y"]), ("B", &["x", "x", "y", "x"])],
            &["x", "y"],
        );
        close(cohens_kappa(&s, "A", "B", R1).unwrap().value, 0.5);
        let s = grid(
            &[("A", &["x", "x", "y", "y"]), ("B", &["y", "y", "x", "x"])],
            &["x", "y"],
        );
        close(cohens_kappa(&s, "A", "B", R1).unwrap().value, -1.0);
        let s = grid(
            &[("A", &["x", "y", "y"]), ("B", &["x", "y", "y"])],
            &["x", "y"],
        );
        assert_eq!(cohens_kappa(&s, "A", "B", R1).unwrap().value, 1.0);
    }

    #[test]
    fn cohen_no_overlap_and_degenerate() {
        let s = grid(&[("A", &["x", ""]), ("B", &["", "y"])], &["x", "y"]);
        assert!(matches!(
            cohens_kappa(&s, "A", "B", R1),
            Err(Error::NoOverlap { .. })
        ));
        let s = grid(&[("A", &["x", "x"]), ("B", &["x", "x"])], &["x", "y"]);
        assert_eq!(cohens_kappa(&s, "A", "B", R1).unwrap().value, 1.0);
    }

    #[test]
    fn fleiss_fixture() {
        let s = grid(
            &[("a", &["x", "y"]), ("b", &["x", "y"]), ("c", &["y", "y"])],
            &["x", "y"],
        );
        let r = fleiss_kappa(&s, R1).unwrap();
        close(r.value, 0.25);
        assert_eq!(r.n_items, 2);
    }

    #[test]
    fn fleiss_unequal_counts_only_is_degenerate() {
        let s = grid(
            &[("a", &["x", "y"]), ("b", &["x", "y"]), ("c", &["", "y"])],
            &["x", "y"],
        );
        assert!(matches!(fleiss_kappa(&s, R1), Err(Error::Degenerate(_))));
    }

    #[test]
    fn fleiss_excludes_minority_counts() {
        let s = grid(
            &[
                ("a", &["x", "y", "x"]),
                ("b", &["x", "y", "y"]),
                ("c", &["", "y", "x"]),
            ],
            &["x", "y"],
        );
        let r = fleiss_kappa(&s, R1).unwrap();
        assert_eq!(r.n_items, 2);
        assert_eq!(r.exclusions, vec!["i0".to_string()]);
    }

    #[test]
    fn alpha_fixture() {
        let s = grid(
            &[("A", &["a", "a", "b", "b"]), ("B", &["a", "a", "b", "a"])],
            &["a", "b"],
        );
        let m = coincidence_counts(&s, R1).unwrap();
        let (d_o, d_e) = disagreements(
            &m,
            &distance_matrix(&s, Distance::Nominal, &m.marginals()).unwrap(),
        );
        close(d_o, 2.0 / 8.0);
        close(d_e, 30.0 / 56.0);
        close(krippendorff_alpha(&s, R1, None).unwrap().value, 8.0 / 15.0);
    }

    #[test]
    fn alpha_excludes_single_label_items() {
        let base = grid(
            &[("A", &["a", "a", "b", "b"]), ("B", &["a", "a", "b", "a"])],
            &["a", "b"],
        );
        let extra = grid(
            &[
                ("A", &["a", "a", "b", "b", "b"]),
                ("B", &["a", "a", "b", "a", ""]),
            ],
            &["a", "b"],
        );
        let r = krippendorff_alpha(&extra, R1, None).unwrap();
        assert_eq!(r.value, krippendorff_alpha(&base, R1, None).unwrap().value);
        assert_eq!(r.exclusions, vec!["i4".to_string()]);
    }

    #[test]
    fn alpha_perfect_and_constant() {
        let s = grid(
            &[("A", &["a", "b", "c"]), ("B", &["a", "b", "c"])],
            &["a", "b", "c"],
        );
        assert_eq!(krippendorff_alpha(&s, R1, None).unwrap().value, 1.0);
        let s = grid(&[("A", &["a", "a"]), ("B", &["a", "a"])], &["a", "b"]);
        assert_eq!(krippendorff_alpha(&s, R1, None).unwrap().value, 1.0);
    }

    #[test]
    fn ordinal_alpha_penalizes_distant_disagreement_more() {
        let cats = ["lo", "mid", "hi"];
        let schema = LabelSchema::new("t", cats, ScaleKind::Ordinal, None).unwrap();
        let build = |b_last: &str| {
            let a = ["lo", "mid", "hi", "lo", "mid", "hi"];
            let b = ["lo", "mid", "hi", "lo", "mid", b_last];
            let recs = a.iter().zip(b.iter()).enumerate().flat_map(|(i, (x, y))| {
                vec![
                    RawRecord::new("t", &format!("i{i}"), "A", 1, x),
                    RawRecord::new("t", &format!("i{i}"), "B", 1, y),
                ]
            });
            validate_dataset(recs, &schema).unwrap()
        };
        let near = krippendorff_alpha(&build("mid"), R1, None).unwrap().value;
        let far = krippendorff_alpha(&build("lo"), R1, None).unwrap().value;
        assert!(near > far, "{near} {far}");
        let nominal_near = krippendorff_alpha(&build("mid"), R1, Some(Distance::Nominal))
            .unwrap()
            .value;
        let nominal_far = krippendorff_alpha(&build("lo"), R1, Some(Distance::Nominal))
            .unwrap()
            .value;
        close(nominal_near, nominal_far);
    }

    fn interval_set(rows: &[[f64; 2]]) -> AnnotationSet {
        let schema =
            LabelSchema::interval("t", (1..=5).map(|v| (v.to_string(), v as f64))).unwrap();
        let recs = rows.iter().enumerate().flat_map(|(i, r)| {
            r.iter().enumerate().map(move |(j, v)| {
                RawRecord::new(
                    "t",
                    &format!("i{i}"),
                    &format!("r{j}"),
                    1,
                    &(*v as i64).to_string(),
                )
            })
        });
        validate_dataset(recs, &schema).unwrap()
    }

    #[test]
    fn icc_fixtures() {
        let s = interval_set(&[[1.0, 2.0], [3.0, 4.0]]);
        close(
            icc(&s, R1, IccModel::OnewayRandom).unwrap().value,
            3.5 / 4.5,
        );
        let s = interval_set(&[[1.0, 1.0], [3.0, 3.0], [5.0, 5.0]]);
        assert_eq!(icc(&s, R1, IccModel::OnewayRandom).unwrap().value, 1.0);
        assert_eq!(
            icc(&s, R1, IccModel::TwowayRandomSingle).unwrap().value,
            1.0
        );
        let s = interval_set(&[[2.0, 2.0], [2.0, 2.0]]);
        assert!(matches!(
            icc(&s, R1, IccModel::OnewayRandom),
            Err(Error::InsufficientVariance)
        ));
        let nominal = grid(&[("A", &["x", "y"]), ("B", &["x", "y"])], &["x", "y"]);
        assert!(matches!(
            icc(&nominal, R1, IccModel::OnewayRandom),
            Err(Error::NotInterval(_))
        ));
    }

    #[test]
    fn icc_twoway_matches_hand_anova() {
        let s = interval_set(&[[1.0, 2.0], [3.0, 4.0], [2.0, 5.0]]);
        // grand 17/6; row means 1.5,3.5,3.5; col means 2, 11/3
        let grand = 17.0 / 6.0;
        let msr = 2.0 * ((1.5f64 - grand).powi(2) + 2.0 * (3.5f64 - grand).powi(2)) / 2.0;
        let msc = 3.0 * ((2.0f64 - grand).powi(2) + (11.0f64 / 3.0 - grand).powi(2)) / 1.0;
        let sst: f64 = [1.0f64, 2.0, 3.0, 4.0, 2.0, 5.0]
            .iter()
            .map(|x| (x - grand).powi(2))
            .sum();
        let mse = (sst - 2.0 * msr - msc) / 2.0;
        let expected = (msr - mse) / (msr + mse + 2.0 * (msc - mse) / 3.0);
        close(
            icc(&s, R1, IccModel::TwowayRandomSingle).unwrap().value,
            expected,
        );
    }

    #[test]
    fn bootstrap_perfect_is_zero_width_and_deterministic() {
        let s = grid(
            &[
                ("a", &["x", "y", "x", "y", "x"]),
                ("b", &["x", "y", "x", "y", "x"]),
            ],
            &["x", "y"],
        );
        let opts = BootstrapOptions {
            replicates: 200,
            confidence: 0.95,
            seed: 11,
        };
        let spec = MetricSpec::PercentAgreement;
        let iv = bootstrap_ci(&spec, &s, R1, &opts).unwrap();
        assert_eq!((iv.low, iv.high), (1.0, 1.0));
        let noisy = grid(
            &[
                ("a", &["x", "y", "x", "y", "x", "y"]),
                ("b", &["x", "y", "y", "y", "x", "x"]),
            ],
            &["x", "y"],
        );
        let spec = MetricSpec::default();
        let a = bootstrap_ci(&spec, &noisy, R1, &opts).unwrap();
        let b = bootstrap_ci(&spec, &noisy, R1, &opts).unwrap();
        assert_eq!(a, b);
        assert!(a.low < a.high);
    }

    #[test]
    fn metric_spec_json() {
        let spec: MetricSpec = serde_json::from_str(r#"{"metric":"krippendorff_alpha"}"#).unwrap();
        assert_eq!(spec, MetricSpec::KrippendorffAlpha { distance: None });
        let spec: MetricSpec =
            serde_json::from_str(r#"{"metric":"icc","model":"twoway_random_single"}"#).unwrap();
        assert_eq!(spec.name(), MetricName::Icc);
    }
}
