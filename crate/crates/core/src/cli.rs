//! Command-line front end. Every flag mirrors a key of [`RunConfig`]; a
//! `--config` JSON file supplies the rest and flags win on conflict.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::annotation::{build_repeat_pairs, AnnotationSet, LabelSchema, Pairing, RoundSelector};
use crate::association::{
    associate, compare_reliability, compare_stability, item_groups, item_hypotheses,
    load_rationalisations, rationalisation_set, resolve_rationalisation, Rationale,
    RationalisationRecord,
};
use crate::error::{Error, ErrorKind, Result};
use crate::quadrant::{
    classify_dataset, classify_items, QuadrantThresholds, StabilityMetric, RAW_RATE_CUT,
};
use crate::reliability::{with_bootstrap, Distance, IccModel, MetricName, MetricSpec};
use crate::report::{self, digest_file, render_svg_quadrant, InputDigest, Report};
use crate::resample::{BootstrapOptions, DEFAULT_CONFIDENCE, DEFAULT_REPLICATES};
use crate::simulator::{recovery_accuracy, simulate, SimConfig};
use crate::stability::{
    annotator_stability, dataset_stability_with, interval_profile, item_stability_labels,
    PermutationOptions, DEFAULT_BUCKET_EDGES,
};

pub const DEFAULT_PERMUTATION_REPLICATES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
#[value(rename_all = "snake_case")]
pub enum Format {
    Json,
    Markdown,
    Svg,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from(".")
}
fn default_formats() -> Vec<Format> {
    vec![Format::Json, Format::Markdown, Format::Svg]
}
fn default_replicates() -> usize {
    DEFAULT_REPLICATES
}
fn default_permutation_replicates() -> usize {
    DEFAULT_PERMUTATION_REPLICATES
}
fn default_confidence() -> f64 {
    DEFAULT_CONFIDENCE
}
fn default_item_cut() -> f64 {
    RAW_RATE_CUT
}
fn default_metric() -> MetricName {
    MetricName::KrippendorffAlpha
}

/// Everything a run needs, as one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub annotations: Option<PathBuf>,
    #[serde(default)]
    pub schema: Option<PathBuf>,
    #[serde(default)]
    pub rationalisations: Option<PathBuf>,
    /// Second dataset for `compare`.
    #[serde(default)]
    pub annotations_b: Option<PathBuf>,
    /// Schema of the second dataset; defaults to `schema`.
    #[serde(default)]
    pub schema_b: Option<PathBuf>,
    /// Simulator configuration for `simulate`.
    #[serde(default)]
    pub simulation: Option<PathBuf>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    /// Metrics for `reliability`; empty means every applicable one.
    #[serde(default)]
    pub metrics: Vec<MetricName>,
    #[serde(default = "default_metric")]
    pub reliability_metric: MetricName,
    #[serde(default)]
    pub stability_metric: StabilityMetric,
    /// Dataset-level cuts; unset means the default for the chosen metric.
    #[serde(default)]
    pub reliability_cut: Option<f64>,
    #[serde(default)]
    pub stability_cut: Option<f64>,
    #[serde(default = "default_item_cut")]
    pub item_reliability_cut: f64,
    #[serde(default = "default_item_cut")]
    pub item_stability_cut: f64,
    #[serde(default)]
    pub round: RoundSelector,
    #[serde(default)]
    pub pairing: Pairing,
    #[serde(default)]
    pub distance: Option<Distance>,
    #[serde(default)]
    pub icc_model: IccModel,
    #[serde(default)]
    pub annotator_a: Option<String>,
    #[serde(default)]
    pub annotator_b: Option<String>,
    /// Bootstrap replicates; 0 disables intervals.
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_permutation_replicates")]
    pub permutation_replicates: usize,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub bucket_edges: Option<Vec<f64>>,
    /// `simulate`: also classify the generated data and score recovery.
    #[serde(default)]
    pub recovery: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("every field has a default")
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn thresholds(&self) -> Result<QuadrantThresholds> {
        let mut t = QuadrantThresholds::for_metrics(self.reliability_metric, self.stability_metric);
        if let Some(c) = self.reliability_cut {
            t.reliability_cut = c;
        }
        if let Some(c) = self.stability_cut {
            t.stability_cut = c;
        }
        t.validate()?;
        Ok(t)
    }

    pub fn item_thresholds(&self) -> Result<QuadrantThresholds> {
        let t = QuadrantThresholds::for_metrics(
            MetricName::PercentAgreement,
            StabilityMetric::ExactRate,
        )
        .with_cuts(self.item_reliability_cut, self.item_stability_cut);
        t.validate()?;
        Ok(t)
    }

    fn seed_for(&self, what: &str) -> Result<u64> {
        self.seed.ok_or_else(|| {
            Error::InvalidConfig(format!(
                "{what} resamples; set a seed (or disable resampling with 0 replicates)"
            ))
        })
    }

    /// Bootstrap settings, or `None` when intervals are disabled.
    pub fn bootstrap(&self) -> Result<Option<BootstrapOptions>> {
        if self.replicates == 0 {
            return Ok(None);
        }
        Ok(Some(BootstrapOptions {
            replicates: self.replicates,
            confidence: self.confidence,
            seed: self.seed_for("bootstrap")?,
        }))
    }

    pub fn permutation(&self) -> Result<Option<PermutationOptions>> {
        if self.permutation_replicates == 0 {
            return Ok(None);
        }
        Ok(Some(PermutationOptions {
            replicates: self.permutation_replicates,
            seed: self.seed_for("permutation test")?,
        }))
    }

    fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    fn require<'a>(&self, path: &'a Option<PathBuf>, key: &str) -> Result<&'a PathBuf> {
        path.as_ref()
            .ok_or_else(|| Error::InvalidConfig(format!("missing input: set `{key}`")))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "relstab",
    version,
    about = "Annotation reliability and stability analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Ingest annotations and check every dataset invariant
    Validate,
    /// Inter-annotator agreement metrics with bootstrap intervals
    Reliability,
    /// Intra-annotator consistency, item labels and interval profile
    Stability,
    /// Dataset and item quadrants plus the SVG scatter
    Matrix,
    /// Stability-by-rationale contingency table and phi
    Phi,
    /// Bootstrap differences between two datasets
    Compare,
    /// Generate a synthetic dataset with known causes
    Simulate,
    /// Merge earlier outputs in the output directory into one bundle
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Reliability => "reliability",
            Command::Stability => "stability",
            Command::Matrix => "matrix",
            Command::Phi => "phi",
            Command::Compare => "compare",
            Command::Simulate => "simulate",
            Command::Report => "report",
        }
    }
}

/// Flag overrides; each one corresponds to the [`RunConfig`] key of the
/// same name.
#[derive(Debug, Default, Clone, Args)]
pub struct Flags {
    /// JSON run configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub annotations: Option<PathBuf>,
    #[arg(long, global = true)]
    pub schema: Option<PathBuf>,
    #[arg(long, global = true)]
    pub rationalisations: Option<PathBuf>,
    #[arg(long, global = true)]
    pub annotations_b: Option<PathBuf>,
    #[arg(long, global = true)]
    pub schema_b: Option<PathBuf>,
    #[arg(long, global = true)]
    pub simulation: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub formats: Option<Vec<Format>>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub metrics: Option<Vec<MetricName>>,
    #[arg(long, global = true)]
    pub reliability_metric: Option<MetricName>,
    #[arg(long, global = true)]
    pub stability_metric: Option<StabilityMetric>,
    #[arg(long, global = true)]
    pub reliability_cut: Option<f64>,
    #[arg(long, global = true)]
    pub stability_cut: Option<f64>,
    #[arg(long, global = true)]
    pub item_reliability_cut: Option<f64>,
    #[arg(long, global = true)]
    pub item_stability_cut: Option<f64>,
    #[arg(long, global = true)]
    pub round: Option<RoundSelector>,
    #[arg(long, global = true)]
    pub pairing: Option<Pairing>,
    #[arg(long, global = true)]
    pub distance: Option<Distance>,
    #[arg(long, global = true)]
    pub icc_model: Option<IccModel>,
    #[arg(long, global = true)]
    pub annotator_a: Option<String>,
    #[arg(long, global = true)]
    pub annotator_b: Option<String>,
    #[arg(long, global = true)]
    pub replicates: Option<usize>,
    #[arg(long, global = true)]
    pub permutation_replicates: Option<usize>,
    #[arg(long, global = true)]
    pub confidence: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub bucket_edges: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub recovery: bool,
}

impl Flags {
    /// Loads `--config` (if any) and applies the flags on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    c.$field = v.clone().into();
                }
            )*};
        }
        set!(
            annotations,
            schema,
            rationalisations,
            annotations_b,
            schema_b,
            simulation,
            annotator_a,
            annotator_b,
            reliability_cut,
            stability_cut,
            distance,
            seed,
            bucket_edges
        );
        macro_rules! replace {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    c.$field = v.clone();
                }
            )*};
        }
        replace!(
            out_dir,
            formats,
            metrics,
            reliability_metric,
            stability_metric,
            item_reliability_cut,
            item_stability_cut,
            round,
            pairing,
            icc_model,
            replicates,
            permutation_replicates,
            confidence
        );
        c.recovery |= self.recovery;
        Ok(c)
    }
}

/// What a subcommand produced, before it is written out.
pub struct Outcome {
    pub report: Value,
    /// Extra files (name, contents) for the output directory.
    pub files: Vec<(String, String)>,
}

fn load_set(path: &Path, schema: &Path) -> Result<(AnnotationSet, Vec<InputDigest>)> {
    let schema_doc = LabelSchema::load(schema)?;
    let set = AnnotationSet::load(path, &schema_doc)?;
    Ok((set, vec![digest_file(path)?, digest_file(schema)?]))
}

fn primary_set(config: &RunConfig) -> Result<(AnnotationSet, Vec<InputDigest>)> {
    load_set(
        config.require(&config.annotations, "annotations")?,
        config.require(&config.schema, "schema")?,
    )
}

fn skipped(what: impl Serialize, e: &Error) -> Value {
    json!({"subject": what, "code": e.code(), "message": e.to_string()})
}

fn envelope(
    command: Command,
    config: &RunConfig,
    inputs: Vec<InputDigest>,
    seed: Option<u64>,
    result: Value,
) -> Result<Value> {
    let mut r = Report::new(command.name(), result)?;
    r.inputs = inputs;
    r.config = serde_json::to_value(config)?;
    r.seed = seed;
    Ok(r.to_value())
}

fn cmd_validate(config: &RunConfig) -> Result<Outcome> {
    let (set, inputs) = primary_set(config)?;
    let schema = set.schema();
    let result = json!({
        "valid": true,
        "task_id": schema.task_id,
        "scale_kind": schema.scale_kind,
        "categories": schema.categories,
        "n_records": set.len(),
        "n_items": set.item_ids().len(),
        "n_annotators": set.annotator_ids().len(),
        "rounds": set.rounds(),
    });
    Ok(Outcome {
        report: envelope(Command::Validate, config, inputs, None, result)?,
        files: vec![],
    })
}

fn metric_specs(config: &RunConfig, set: &AnnotationSet) -> Vec<MetricSpec> {
    let pair = match (&config.annotator_a, &config.annotator_b) {
        (Some(a), Some(b)) => Some((a.clone(), b.clone())),
        _ if set.annotator_ids().len() == 2 => Some((
            set.annotator_ids()[0].clone(),
            set.annotator_ids()[1].clone(),
        )),
        _ => None,
    };
    let interval = set.schema().values().is_some();
    let names = if config.metrics.is_empty() {
        let mut v = vec![MetricName::PercentAgreement];
        if pair.is_some() {
            v.push(MetricName::CohensKappa);
        }
        v.extend([MetricName::FleissKappa, MetricName::KrippendorffAlpha]);
        if interval {
            v.push(MetricName::Icc);
        }
        v
    } else {
        config.metrics.clone()
    };
    names
        .into_iter()
        .map(|name| match name {
            MetricName::PercentAgreement => MetricSpec::PercentAgreement,
            MetricName::CohensKappa => {
                let (a, b) = pair.clone().unwrap_or_default();
                MetricSpec::CohensKappa {
                    annotator_a: a,
                    annotator_b: b,
                }
            }
            MetricName::FleissKappa => MetricSpec::FleissKappa,
            MetricName::KrippendorffAlpha => MetricSpec::KrippendorffAlpha {
                distance: config.distance,
            },
            MetricName::Icc => MetricSpec::Icc {
                model: config.icc_model,
            },
        })
        .collect()
}

fn cmd_reliability(config: &RunConfig) -> Result<Outcome> {
    let (set, inputs) = primary_set(config)?;
    let boot = config.bootstrap()?;
    let mut results = Vec::new();
    let mut skips = Vec::new();
    let mut first_error = None;
    for spec in metric_specs(config, &set) {
        let outcome = match &boot {
            Some(opts) => with_bootstrap(&spec, &set, config.round, opts).or_else(|e| match e {
                Error::TooManyDegenerate { .. } => spec.compute(&set, config.round),
                other => Err(other),
            }),
            None => spec.compute(&set, config.round),
        };
        match outcome {
            Ok(r) => results.push(r),
            Err(e) if e.is_degenerate() || matches!(e, Error::NotInterval(_)) => {
                skips.push(skipped(spec.name(), &e));
                first_error.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    if results.is_empty() {
        return Err(first_error.unwrap_or(Error::Empty("reliability metrics")));
    }
    let result = json!({"metrics": results, "skipped": skips});
    Ok(Outcome {
        report: envelope(
            Command::Reliability,
            config,
            inputs,
            boot.map(|b| b.seed),
            result,
        )?,
        files: vec![],
    })
}

fn cmd_stability(config: &RunConfig) -> Result<Outcome> {
    let (set, inputs) = primary_set(config)?;
    let dataset = dataset_stability_with(&set, config.pairing)?;
    let annotators = annotator_stability(&set, config.pairing)?;
    let items = item_stability_labels(&set)?;
    let perm = config.permutation()?;
    let edges = config
        .bucket_edges
        .clone()
        .unwrap_or_else(|| DEFAULT_BUCKET_EDGES.to_vec());
    let profile = build_repeat_pairs(&set, config.pairing).and_then(|pairs| {
        interval_profile(
            &pairs,
            &edges,
            &perm.unwrap_or(PermutationOptions {
                replicates: 1,
                seed: 0,
            }),
        )
    });
    let (profile, skip) = match profile {
        Ok(mut p) => {
            if perm.is_none() {
                p.trend.p = f64::NAN;
            }
            (serde_json::to_value(p)?, vec![])
        }
        Err(e) if e.is_degenerate() => (Value::Null, vec![skipped("interval_profile", &e)]),
        Err(e) => return Err(e),
    };
    let result = json!({
        "dataset": dataset,
        "annotators": annotators,
        "items": items.labels,
        "excluded_items": items.excluded,
        "interval_profile": profile,
        "skipped": skip,
    });
    Ok(Outcome {
        report: envelope(
            Command::Stability,
            config,
            inputs,
            perm.map(|p| p.seed),
            result,
        )?,
        files: vec![],
    })
}

fn cmd_matrix(config: &RunConfig) -> Result<Outcome> {
    let (set, inputs) = primary_set(config)?;
    let thresholds = config.thresholds()?;
    let item_thresholds = config.item_thresholds()?;
    let dataset = classify_dataset(&set, &thresholds)?;
    let items = classify_items(&set, &item_thresholds)?;
    let mut files = Vec::new();
    if config.wants(Format::Svg) {
        files.push((
            "matrix.svg".to_string(),
            render_svg_quadrant(std::slice::from_ref(&dataset), &thresholds)?,
        ));
        if !items.assignments.is_empty() {
            files.push((
                "matrix_items.svg".to_string(),
                render_svg_quadrant(&items.assignments, &item_thresholds)?,
            ));
        }
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for a in &items.assignments {
        *counts.entry(a.quadrant.to_string()).or_default() += 1;
    }
    let mut dataset_value = serde_json::to_value(&dataset)?;
    dataset_value["thresholds"] = serde_json::to_value(thresholds)?;
    let result = json!({
        "dataset": dataset_value,
        "item_thresholds": item_thresholds,
        "item_quadrant_counts": counts,
        "items": items.assignments,
        "excluded_items": items.excluded,
    });
    Ok(Outcome {
        report: envelope(Command::Matrix, config, inputs, None, result)?,
        files,
    })
}

fn cmd_phi(config: &RunConfig) -> Result<Outcome> {
    let (set, mut inputs) = primary_set(config)?;
    let rat_path = config.require(&config.rationalisations, "rationalisations")?;
    let records = load_rationalisations(rat_path)?;
    inputs.push(digest_file(rat_path)?);
    let resolution = resolve_rationalisation(&records)?;
    let labels = item_stability_labels(&set)?;
    let seed = config.seed_for("phi permutation test")?;
    let replicates = config.permutation_replicates.max(1);
    let association = associate(&labels.labels, &resolution, replicates, seed)?;
    let mut result = serde_json::to_value(&association)?;
    result["n_items_resolved"] = json!(resolution.classes.len());
    result["ties"] = json!(resolution.ties);
    result["rationale_agreement"] = match rationalisation_set(&records)
        .and_then(|r| MetricSpec::default().compute(&r, RoundSelector::Round(1)))
    {
        Ok(r) => json!(r.value),
        Err(_) => Value::Null,
    };
    if let Some(opts) = config.bootstrap()? {
        let items = classify_items(&set, &config.item_thresholds()?)?;
        let groups = item_groups(&items.assignments, &resolution);
        result["item_hypotheses"] =
            serde_json::to_value(item_hypotheses(&items.assignments, &groups, &opts)?)?;
    }
    Ok(Outcome {
        report: envelope(Command::Phi, config, inputs, Some(seed), result)?,
        files: vec![],
    })
}

fn cmd_compare(config: &RunConfig) -> Result<Outcome> {
    let (set_a, mut inputs) = primary_set(config)?;
    let schema_b = config
        .schema_b
        .as_ref()
        .or(config.schema.as_ref())
        .ok_or_else(|| Error::InvalidConfig("missing input: set `schema_b` or `schema`".into()))?;
    let (set_b, inputs_b) = load_set(
        config.require(&config.annotations_b, "annotations_b")?,
        schema_b,
    )?;
    inputs.extend(inputs_b);
    let opts = config
        .bootstrap()?
        .ok_or_else(|| Error::InvalidConfig("compare needs bootstrap replicates > 0".into()))?;
    let mut result = serde_json::Map::new();
    let mut skips = Vec::new();
    match compare_reliability(&set_a, &set_b, config.reliability_metric, &opts) {
        Ok(c) => {
            result.insert("reliability".into(), serde_json::to_value(c)?);
        }
        Err(e) if e.is_degenerate() => skips.push(skipped("reliability", &e)),
        Err(e) => return Err(e),
    }
    let opts_b = BootstrapOptions {
        seed: opts.seed.wrapping_add(1),
        ..opts
    };
    match compare_stability(&set_a, &set_b, config.stability_metric, &opts_b) {
        Ok(c) => {
            result.insert("stability".into(), serde_json::to_value(c)?);
        }
        Err(e) if e.is_degenerate() => skips.push(skipped("stability", &e)),
        Err(e) => return Err(e),
    }
    if result.is_empty() {
        return Err(Error::Degenerate(
            "neither reliability nor stability could be compared".into(),
        ));
    }
    result.insert("skipped".into(), Value::Array(skips));
    Ok(Outcome {
        report: envelope(
            Command::Compare,
            config,
            inputs,
            Some(opts.seed),
            Value::Object(result),
        )?,
        files: vec![],
    })
}

fn cmd_simulate(config: &RunConfig) -> Result<Outcome> {
    let sim_path = config.require(&config.simulation, "simulation")?;
    let text = std::fs::read_to_string(sim_path).map_err(|e| Error::io(sim_path, e))?;
    let mut sim = SimConfig::from_json_str(&text)?;
    if let Some(seed) = config.seed {
        sim.seed = seed;
    }
    let (set, truth) = simulate(&sim)?;
    let mut files = vec![
        ("annotations.csv".to_string(), set.to_csv_string()?),
        (
            "schema.json".to_string(),
            report::to_json_string(&serde_json::to_value(set.schema())?),
        ),
        (
            "truth.json".to_string(),
            report::to_json_string(&serde_json::to_value(&truth.causes)?),
        ),
    ];
    let rationalisations: Vec<RationalisationRecord> = truth
        .causes
        .iter()
        .filter_map(|(item, cause)| {
            let label = match cause {
                crate::simulator::ItemCause::Subjective => Rationale::Subjective,
                crate::simulator::ItemCause::Ambiguous => Rationale::Ambiguous,
                crate::simulator::ItemCause::Difficult => Rationale::Difficult,
                _ => return None,
            };
            Some(RationalisationRecord::new(item, "expert", label))
        })
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rationalisations {
        w.serialize(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidRecord(e.to_string()))?;
    files.push((
        "rationalisations.csv".to_string(),
        String::from_utf8_lossy(&bytes).into_owned(),
    ));

    let mut per_cause: BTreeMap<String, usize> = BTreeMap::new();
    for c in truth.causes.values() {
        *per_cause.entry(c.to_string()).or_default() += 1;
    }
    let mut result = json!({
        "n_records": set.len(),
        "n_items": set.item_ids().len(),
        "n_annotators": set.annotator_ids().len(),
        "items_per_cause": per_cause,
        "simulation": sim,
        "annotators": truth.annotators,
    });
    if config.recovery {
        let items = classify_items(&set, &config.item_thresholds()?)?;
        let covered: BTreeMap<String, _> = truth
            .causes
            .iter()
            .filter(|(id, _)| items.assignments.iter().any(|a| &a.subject_id == *id))
            .map(|(k, v)| (k.clone(), *v))
            .collect();
        result["recovery"] = json!({
            "dataset_quadrant": classify_dataset(&set, &config.thresholds()?)?.quadrant,
            "item_accuracy": recovery_accuracy(&items.assignments, &covered)?,
            "excluded_items": items.excluded,
        });
    }
    Ok(Outcome {
        report: envelope(
            Command::Simulate,
            config,
            vec![digest_file(sim_path)?],
            Some(sim.seed),
            result,
        )?,
        files,
    })
}

fn cmd_report(config: &RunConfig) -> Result<Outcome> {
    let (sections, inputs) = report::collect_reports(&config.out_dir)?;
    if sections.is_empty() {
        return Err(Error::Empty("reports in the output directory"));
    }
    Ok(Outcome {
        report: report::merge_reports(sections, inputs),
        files: vec![],
    })
}

/// Runs one subcommand and returns its outputs without touching disk.
pub fn execute(command: Command, config: &RunConfig) -> Result<Outcome> {
    match command {
        Command::Validate => cmd_validate(config),
        Command::Reliability => cmd_reliability(config),
        Command::Stability => cmd_stability(config),
        Command::Matrix => cmd_matrix(config),
        Command::Phi => cmd_phi(config),
        Command::Compare => cmd_compare(config),
        Command::Simulate => cmd_simulate(config),
        Command::Report => cmd_report(config),
    }
}

/// Runs a subcommand and writes `<command>.json` / `<command>.md` plus any
/// extra files into the output directory.
pub fn run(command: Command, config: &RunConfig) -> Result<Outcome> {
    let outcome = execute(command, config)?;
    let dir = &config.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, body: &str| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(|e| Error::io(&p, e))
    };
    let stem = command.name();
    if config.wants(Format::Json) || command == Command::Report {
        write(
            &format!("{stem}.json"),
            &report::to_json_string(&outcome.report),
        )?;
    }
    if config.wants(Format::Markdown) {
        write(
            &format!("{stem}.md"),
            &report::render_markdown(&outcome.report),
        )?;
    }
    for (name, body) in &outcome.files {
        write(name, body)?;
    }
    Ok(outcome)
}

pub fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Io => 3,
        ErrorKind::Validation => 4,
        ErrorKind::Degenerate => 5,
        ErrorKind::Config => 6,
    }
}

/// Machine-readable form of an error, as printed on stderr.
pub fn error_object(e: &Error) -> Value {
    json!({"error": {"code": e.code(), "kind": e.kind(), "message": e.to_string()}})
}

/// Parses arguments, runs, and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match cli
        .flags
        .resolve()
        .and_then(|config| run(cli.command, &config))
    {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("{}", error_object(&e));
            exit_code(e.kind())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.json");
        std::fs::write(
            &p,
            r#"{"seed": 1, "replicates": 50, "stability_metric": "exact_rate"}"#,
        )
        .unwrap();
        let flags = Flags {
            config: Some(p),
            seed: Some(9),
            ..Flags::default()
        };
        let c = flags.resolve().unwrap();
        assert_eq!(c.seed, Some(9));
        assert_eq!(c.replicates, 50);
        assert_eq!(c.stability_metric, StabilityMetric::ExactRate);
        assert_eq!(c.thresholds().unwrap().stability_cut, RAW_RATE_CUT);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let e = RunConfig::from_json_str(r#"{"sed": 1}"#).unwrap_err();
        assert_eq!(e.kind(), ErrorKind::Config);
    }

    #[test]
    fn resampling_needs_a_seed() {
        let c = RunConfig::default();
        assert!(matches!(c.bootstrap(), Err(Error::InvalidConfig(_))));
        let c = RunConfig {
            replicates: 0,
            ..RunConfig::default()
        };
        assert_eq!(c.bootstrap().unwrap(), None);
    }
}
