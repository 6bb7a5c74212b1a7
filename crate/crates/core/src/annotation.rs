//! Validated data model for round-tagged annotations.
//!
//! An [`AnnotationSet`] holds at most one label per `(item, annotator, round)`
//! cell. Rounds are explicit 1-based session indices; timestamps are optional
//! metadata used only to measure label-relabel intervals. Labels are compared
//! after NFC normalization and whitespace trimming.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// NFC-normalizes and trims a label or identifier.
pub fn normalize_label(raw: &str) -> String {
    raw.trim().nfc().collect::<String>().trim().to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
#[value(rename_all = "snake_case")]
pub enum ScaleKind {
    Nominal,
    Ordinal,
    Interval,
}

impl fmt::Display for ScaleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScaleKind::Nominal => "nominal",
            ScaleKind::Ordinal => "ordinal",
            ScaleKind::Interval => "interval",
        })
    }
}

/// The label space of one task. For ordinal scales the order of
/// `categories` is the rank order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSchema {
    pub task_id: String,
    pub categories: Vec<String>,
    pub scale_kind: ScaleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub numeric_values: Option<BTreeMap<String, f64>>,
}

impl LabelSchema {
    pub fn new(
        task_id: impl Into<String>,
        categories: impl IntoIterator<Item = impl AsRef<str>>,
        scale_kind: ScaleKind,
        numeric_values: Option<BTreeMap<String, f64>>,
    ) -> Result<Self> {
        Self {
            task_id: task_id.into(),
            categories: categories
                .into_iter()
                .map(|c| c.as_ref().to_string())
                .collect(),
            scale_kind,
            numeric_values,
        }
        .normalized()
    }

    pub fn nominal(
        task_id: impl Into<String>,
        categories: impl IntoIterator<Item = impl AsRef<str>>,
    ) -> Result<Self> {
        Self::new(task_id, categories, ScaleKind::Nominal, None)
    }

    /// Interval schema whose categories carry the given numeric values.
    pub fn interval(
        task_id: impl Into<String>,
        values: impl IntoIterator<Item = (impl AsRef<str>, f64)>,
    ) -> Result<Self> {
        let pairs: Vec<(String, f64)> = values
            .into_iter()
            .map(|(c, v)| (c.as_ref().to_string(), v))
            .collect();
        let categories: Vec<String> = pairs.iter().map(|(c, _)| c.clone()).collect();
        Self::new(
            task_id,
            categories,
            ScaleKind::Interval,
            Some(pairs.into_iter().collect()),
        )
    }

    /// Normalizes labels and checks every schema invariant.
    pub fn normalized(mut self) -> Result<Self> {
        self.task_id = normalize_label(&self.task_id);
        if self.task_id.is_empty() {
            return Err(Error::InvalidSchema("empty task_id".into()));
        }
        self.categories = self.categories.iter().map(|c| normalize_label(c)).collect();
        if self.categories.len() < 2 {
            return Err(Error::InvalidSchema(format!(
                "need at least 2 categories, got {}",
                self.categories.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for c in &self.categories {
            if c.is_empty() {
                return Err(Error::InvalidSchema("empty category name".into()));
            }
            if !seen.insert(c.as_str()) {
                return Err(Error::InvalidSchema(format!("duplicate category {c:?}")));
            }
        }
        match (self.scale_kind, self.numeric_values.take()) {
            (ScaleKind::Interval, None) => {
                return Err(Error::InvalidSchema(
                    "interval scale requires numeric_values".into(),
                ))
            }
            (ScaleKind::Interval, Some(values)) => {
                let values: BTreeMap<String, f64> = values
                    .into_iter()
                    .map(|(k, v)| (normalize_label(&k), v))
                    .collect();
                for c in &self.categories {
                    match values.get(c) {
                        Some(v) if v.is_finite() => {}
                        Some(v) => {
                            return Err(Error::InvalidSchema(format!(
                                "non-finite value {v} for category {c:?}"
                            )))
                        }
                        None => {
                            return Err(Error::InvalidSchema(format!(
                                "numeric_values missing category {c:?}"
                            )))
                        }
                    }
                }
                if let Some(extra) = values.keys().find(|k| !seen.contains(k.as_str())) {
                    return Err(Error::InvalidSchema(format!(
                        "numeric_values names unknown category {extra:?}"
                    )));
                }
                self.numeric_values = Some(values);
            }
            (_, Some(_)) => {
                return Err(Error::InvalidSchema(
                    "numeric_values is only allowed for interval scales".into(),
                ))
            }
            (_, None) => {}
        }
        Ok(self)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str::<LabelSchema>(text)?.normalized()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn category_index(&self, label: &str) -> Option<usize> {
        let label = normalize_label(label);
        self.categories.iter().position(|c| *c == label)
    }

    /// Numeric value of each category, in category order.
    pub fn values(&self) -> Option<Vec<f64>> {
        let map = self.numeric_values.as_ref()?;
        self.categories
            .iter()
            .map(|c| map.get(c).copied())
            .collect()
    }
}

/// A record as read from the long format, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub task_id: String,
    pub item_id: String,
    pub annotator_id: String,
    pub round: i64,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

impl RawRecord {
    pub fn new(task_id: &str, item_id: &str, annotator_id: &str, round: i64, label: &str) -> Self {
        Self {
            task_id: task_id.into(),
            item_id: item_id.into(),
            annotator_id: annotator_id.into(),
            round,
            label: label.into(),
            timestamp: None,
        }
    }

    pub fn at(mut self, timestamp: &str) -> Self {
        self.timestamp = Some(timestamp.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationRecord {
    pub task_id: String,
    pub item_id: String,
    pub annotator_id: String,
    pub round: u32,
    pub label: String,
    pub timestamp: Option<DateTime<Utc>>,
}

impl AnnotationRecord {
    pub fn to_raw(&self) -> RawRecord {
        RawRecord {
            task_id: self.task_id.clone(),
            item_id: self.item_id.clone(),
            annotator_id: self.annotator_id.clone(),
            round: i64::from(self.round),
            label: self.label.clone(),
            timestamp: self
                .timestamp
                .map(|t| t.to_rfc3339_opts(SecondsFormat::AutoSi, true)),
        }
    }
}

/// Which rounds a metric reads. With [`RoundSelector::All`] every
/// `(item, round)` pair is its own unit of analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RoundSelector {
    Round(u32),
    All,
}

impl Default for RoundSelector {
    fn default() -> Self {
        RoundSelector::Round(1)
    }
}

impl RoundSelector {
    pub fn includes(self, round: u32) -> bool {
        match self {
            RoundSelector::Round(r) => r == round,
            RoundSelector::All => true,
        }
    }
}

impl fmt::Display for RoundSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RoundSelector::Round(r) => write!(f, "{r}"),
            RoundSelector::All => f.write_str("all"),
        }
    }
}

impl FromStr for RoundSelector {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(RoundSelector::All);
        }
        match s.parse::<u32>() {
            Ok(r) if r >= 1 => Ok(RoundSelector::Round(r)),
            _ => Err(format!(
                "round selector must be a positive integer or \"all\", got {s:?}"
            )),
        }
    }
}

impl Serialize for RoundSelector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RoundSelector::Round(r) => serializer.serialize_u32(*r),
            RoundSelector::All => serializer.serialize_str("all"),
        }
    }
}

impl<'de> Deserialize<'de> for RoundSelector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(u32),
            Text(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Num(0) => Err(serde::de::Error::custom("round must be >= 1")),
            Repr::Num(r) => Ok(RoundSelector::Round(r)),
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Cell {
    pub item: usize,
    pub annotator: usize,
    pub round: u32,
    pub category: usize,
    pub timestamp: Option<DateTime<Utc>>,
}

/// Labels of one unit of analysis: an item within one round.
#[derive(Debug, Clone)]
pub(crate) struct Unit {
    pub item: usize,
    pub round: u32,
    /// `(annotator, category)` sorted by annotator.
    pub labels: Vec<(usize, usize)>,
}

/// One annotator's labels for one item across all of their rounds.
#[derive(Debug, Clone)]
pub(crate) struct Track {
    pub item: usize,
    pub annotator: usize,
    /// `(round, category, timestamp)` sorted by round.
    pub rounds: Vec<(u32, usize, Option<DateTime<Utc>>)>,
}

impl Track {
    pub fn is_consistent(&self) -> bool {
        self.rounds.windows(2).all(|w| w[0].1 == w[1].1)
    }
}

/// Immutable, validated collection of round-tagged labels.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSet {
    schema: LabelSchema,
    item_ids: Vec<String>,
    annotator_ids: Vec<String>,
    /// Sorted by `(item, annotator, round)`; unique on that key.
    cells: Vec<Cell>,
}

/// Validates raw records against `schema` and builds the indexed set.
pub fn validate_dataset(
    records: impl IntoIterator<Item = RawRecord>,
    schema: &LabelSchema,
) -> Result<AnnotationSet> {
    let schema = schema.clone().normalized()?;
    let mut parsed = Vec::new();
    for raw in records {
        let task_id = normalize_label(&raw.task_id);
        if task_id != schema.task_id {
            return Err(Error::SchemaMismatch {
                expected: schema.task_id.clone(),
                found: task_id,
            });
        }
        let item_id = normalize_label(&raw.item_id);
        let annotator_id = normalize_label(&raw.annotator_id);
        if item_id.is_empty() || annotator_id.is_empty() {
            return Err(Error::InvalidRecord("empty item_id or annotator_id".into()));
        }
        let round = u32::try_from(raw.round)
            .ok()
            .filter(|r| *r >= 1)
            .ok_or_else(|| {
                Error::InvalidRecord(format!(
                    "round must be a positive integer, got {} (item {item_id:?})",
                    raw.round
                ))
            })?;
        let category = schema
            .category_index(&raw.label)
            .ok_or_else(|| Error::UnknownLabel {
                label: raw.label.clone(),
                item: item_id.clone(),
            })?;
        let timestamp = match raw.timestamp.as_deref().map(str::trim) {
            None | Some("") => None,
            Some(text) => Some(
                DateTime::parse_from_rfc3339(text)
                    .map_err(|e| Error::InvalidRecord(format!("timestamp {text:?}: {e}")))?
                    .with_timezone(&Utc),
            ),
        };
        parsed.push((item_id, annotator_id, round, category, timestamp));
    }
    AnnotationSet::assemble(schema, parsed)
}

/// `(item, annotator, round, category, timestamp)`
pub(crate) type ParsedCell = (String, String, u32, usize, Option<DateTime<Utc>>);

impl AnnotationSet {
    /// Builds a set from already-validated `(item, annotator, round,
    /// category, timestamp)` tuples.
    pub(crate) fn assemble(schema: LabelSchema, parsed: Vec<ParsedCell>) -> Result<Self> {
        let item_ids: Vec<String> = parsed
            .iter()
            .map(|p| p.0.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let annotator_ids: Vec<String> = parsed
            .iter()
            .map(|p| p.1.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let item_pos: HashMap<&str, usize> = item_ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let ann_pos: HashMap<&str, usize> = annotator_ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let mut cells: Vec<Cell> = parsed
            .iter()
            .map(|(item, ann, round, category, timestamp)| Cell {
                item: item_pos[item.as_str()],
                annotator: ann_pos[ann.as_str()],
                round: *round,
                category: *category,
                timestamp: *timestamp,
            })
            .collect();
        cells.sort_by_key(|c| (c.item, c.annotator, c.round));
        if let Some(w) = cells.windows(2).find(|w| {
            (w[0].item, w[0].annotator, w[0].round) == (w[1].item, w[1].annotator, w[1].round)
        }) {
            return Err(Error::DuplicateCell {
                item: item_ids[w[0].item].clone(),
                annotator: annotator_ids[w[0].annotator].clone(),
                round: w[0].round,
            });
        }
        // A later round must not carry an earlier timestamp than a prior round
        // of the same (item, annotator) cell.
        for w in cells.windows(2) {
            if w[0].item == w[1].item && w[0].annotator == w[1].annotator {
                if let (Some(t0), Some(t1)) = (w[0].timestamp, w[1].timestamp) {
                    if t1 < t0 {
                        return Err(Error::InvalidRecord(format!(
                            "item {:?}, annotator {:?}: round {} timestamp precedes round {}",
                            item_ids[w[0].item],
                            annotator_ids[w[0].annotator],
                            w[1].round,
                            w[0].round
                        )));
                    }
                }
            }
        }
        Ok(Self {
            schema,
            item_ids,
            annotator_ids,
            cells,
        })
    }

    pub fn schema(&self) -> &LabelSchema {
        &self.schema
    }

    /// Number of records.
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn annotator_ids(&self) -> &[String] {
        &self.annotator_ids
    }

    pub fn rounds(&self) -> BTreeSet<u32> {
        self.cells.iter().map(|c| c.round).collect()
    }

    pub fn label(&self, item_id: &str, annotator_id: &str, round: u32) -> Option<&str> {
        let item = self.item_ids.iter().position(|s| s == item_id)?;
        let annotator = self.annotator_ids.iter().position(|s| s == annotator_id)?;
        let idx = self
            .cells
            .binary_search_by_key(&(item, annotator, round), |c| {
                (c.item, c.annotator, c.round)
            })
            .ok()?;
        Some(&self.schema.categories[self.cells[idx].category])
    }

    /// Records in canonical `(item, annotator, round)` order.
    pub fn records(&self) -> Vec<AnnotationRecord> {
        self.cells
            .iter()
            .map(|c| AnnotationRecord {
                task_id: self.schema.task_id.clone(),
                item_id: self.item_ids[c.item].clone(),
                annotator_id: self.annotator_ids[c.annotator].clone(),
                round: c.round,
                label: self.schema.categories[c.category].clone(),
                timestamp: c.timestamp,
            })
            .collect()
    }

    pub(crate) fn annotator_index(&self, annotator_id: &str) -> Option<usize> {
        let id = normalize_label(annotator_id);
        self.annotator_ids.iter().position(|s| *s == id)
    }

    pub(crate) fn n_categories(&self) -> usize {
        self.schema.categories.len()
    }

    /// Units of analysis for the selected rounds, in `(item, round)` order.
    pub(crate) fn units(&self, selector: RoundSelector) -> Vec<Unit> {
        let mut grouped: BTreeMap<(usize, u32), Vec<(usize, usize)>> = BTreeMap::new();
        for c in self.cells.iter().filter(|c| selector.includes(c.round)) {
            grouped
                .entry((c.item, c.round))
                .or_default()
                .push((c.annotator, c.category));
        }
        grouped
            .into_iter()
            .map(|((item, round), labels)| Unit {
                item,
                round,
                labels,
            })
            .collect()
    }

    /// Every `(item, annotator)` cell with its rounds, in canonical order.
    pub(crate) fn tracks(&self) -> Vec<Track> {
        let mut out: Vec<Track> = Vec::new();
        for c in &self.cells {
            match out.last_mut() {
                Some(t) if t.item == c.item && t.annotator == c.annotator => {
                    t.rounds.push((c.round, c.category, c.timestamp))
                }
                _ => out.push(Track {
                    item: c.item,
                    annotator: c.annotator,
                    rounds: vec![(c.round, c.category, c.timestamp)],
                }),
            }
        }
        out
    }

    /// Builds a new set from items drawn (with repetition) by index. The
    /// k-th draw becomes a distinct item so duplicates count as separate units.
    pub(crate) fn resample_items(&self, picks: &[usize]) -> AnnotationSet {
        let mut by_item: Vec<std::ops::Range<usize>> = vec![0..0; self.item_ids.len()];
        let mut start = 0;
        while start < self.cells.len() {
            let item = self.cells[start].item;
            let mut end = start;
            while end < self.cells.len() && self.cells[end].item == item {
                end += 1;
            }
            by_item[item] = start..end;
            start = end;
        }
        let mut cells = Vec::with_capacity(self.cells.len());
        let mut item_ids = Vec::with_capacity(picks.len());
        for (k, &orig) in picks.iter().enumerate() {
            item_ids.push(format!("{}#{k}", self.item_ids[orig]));
            cells.extend(
                self.cells[by_item[orig].clone()]
                    .iter()
                    .map(|c| Cell { item: k, ..*c }),
            );
        }
        AnnotationSet {
            schema: self.schema.clone(),
            item_ids,
            annotator_ids: self.annotator_ids.clone(),
            cells,
        }
    }

    /// Restricts the set to the listed items.
    pub fn select_items<S: AsRef<str>>(&self, item_ids: &[S]) -> AnnotationSet {
        let wanted: BTreeSet<&str> = item_ids.iter().map(|s| s.as_ref()).collect();
        let picks: Vec<usize> = (0..self.item_ids.len())
            .filter(|&i| wanted.contains(self.item_ids[i].as_str()))
            .collect();
        let mut out = self.resample_items(&picks);
        for (k, &orig) in picks.iter().enumerate() {
            out.item_ids[k] = self.item_ids[orig].clone();
        }
        out
    }

    // ----- long-format I/O -----

    pub fn read_csv<R: Read>(reader: R, schema: &LabelSchema) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let records = rdr
            .deserialize::<RawRecord>()
            .collect::<std::result::Result<Vec<_>, _>>()?;
        validate_dataset(records, schema)
    }

    pub fn read_jsonl<R: BufRead>(reader: R, schema: &LabelSchema) -> Result<Self> {
        let mut records = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(format!("<jsonl line {}>", lineno + 1), e))?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str::<RawRecord>(&line)?);
        }
        validate_dataset(records, schema)
    }

    /// Reads CSV, or JSON lines when the extension is `.jsonl`/`.ndjson`.
    pub fn load(path: impl AsRef<Path>, schema: &LabelSchema) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") => {
                Self::read_jsonl(std::io::BufReader::new(file), schema)
            }
            _ => Self::read_csv(file, schema),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record([
            "task_id",
            "item_id",
            "annotator_id",
            "round",
            "label",
            "timestamp",
        ])?;
        for rec in self.records() {
            let raw = rec.to_raw();
            wtr.write_record([
                raw.task_id.as_str(),
                raw.item_id.as_str(),
                raw.annotator_id.as_str(),
                &raw.round.to_string(),
                raw.label.as_str(),
                raw.timestamp.as_deref().unwrap_or(""),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> Result<()> {
        for rec in self.records() {
            serde_json::to_writer(&mut writer, &rec.to_raw())?;
            writer
                .write_all(b"\n")
                .map_err(|e| Error::io("<jsonl writer>", e))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Pairing {
    #[default]
    Consecutive,
    FirstLast,
    AllPairs,
}

/// One annotator's two labels for one item from two rounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepeatPair {
    pub item_id: String,
    pub annotator_id: String,
    pub first_round: u32,
    pub second_round: u32,
    pub first_label: String,
    pub second_label: String,
    pub interval_seconds: Option<f64>,
}

impl RepeatPair {
    pub fn is_consistent(&self) -> bool {
        self.first_label == self.second_label
    }
}

/// Index-level repeat pair used by the stability computations.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PairIdx {
    pub annotator: usize,
    pub first: usize,
    pub second: usize,
}

pub(crate) fn round_pairs(n: usize, pairing: Pairing) -> Vec<(usize, usize)> {
    if n < 2 {
        return Vec::new();
    }
    match pairing {
        Pairing::Consecutive => (0..n - 1).map(|i| (i, i + 1)).collect(),
        Pairing::FirstLast => vec![(0, n - 1)],
        Pairing::AllPairs => (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect(),
    }
}

pub(crate) fn pair_indices(set: &AnnotationSet, pairing: Pairing) -> Vec<PairIdx> {
    let mut out = Vec::new();
    for t in set.tracks() {
        for (i, j) in round_pairs(t.rounds.len(), pairing) {
            out.push(PairIdx {
                annotator: t.annotator,
                first: t.rounds[i].1,
                second: t.rounds[j].1,
            });
        }
    }
    out
}

/// One repeat pair per `(item, annotator)` and qualifying round pair.
pub fn build_repeat_pairs(set: &AnnotationSet, pairing: Pairing) -> Result<Vec<RepeatPair>> {
    let cats = &set.schema.categories;
    let mut out = Vec::new();
    for t in set.tracks() {
        for (i, j) in round_pairs(t.rounds.len(), pairing) {
            let (r1, c1, t1) = t.rounds[i];
            let (r2, c2, t2) = t.rounds[j];
            let interval_seconds = match (t1, t2) {
                (Some(a), Some(b)) => {
                    let d = b - a;
                    Some(d.num_milliseconds() as f64 / 1000.0)
                }
                _ => None,
            };
            out.push(RepeatPair {
                item_id: set.item_ids[t.item].clone(),
                annotator_id: set.annotator_ids[t.annotator].clone(),
                first_round: r1,
                second_round: r2,
                first_label: cats[c1].clone(),
                second_label: cats[c2].clone(),
                interval_seconds,
            });
        }
    }
    if out.is_empty() {
        return Err(Error::NoRepeats);
    }
    Ok(out)
}

/// Krippendorff coincidence matrix over the selected rounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoincidenceMatrix {
    pub categories: Vec<String>,
    /// `counts[c][k]`, symmetric.
    pub counts: Vec<Vec<f64>>,
    /// Units with at least two labels.
    pub n_units: usize,
    /// Pairable values: labels inside contributing units.
    pub n_values: usize,
}

impl CoincidenceMatrix {
    pub fn total(&self) -> f64 {
        self.counts.iter().flatten().sum()
    }

    pub fn marginals(&self) -> Vec<f64> {
        self.counts.iter().map(|row| row.iter().sum()).collect()
    }
}

/// Each ordered pair of labels within a unit of `m >= 2` labels adds
/// `1 / (m - 1)`; units with a single label are skipped.
pub fn coincidence_counts(
    set: &AnnotationSet,
    selector: RoundSelector,
) -> Result<CoincidenceMatrix> {
    let k = set.n_categories();
    let mut counts = vec![vec![0.0; k]; k];
    let mut n_units = 0;
    let mut n_values = 0;
    let mut tally = vec![0usize; k];
    for unit in set.units(selector) {
        let m = unit.labels.len();
        if m < 2 {
            continue;
        }
        n_units += 1;
        n_values += m;
        tally.iter_mut().for_each(|t| *t = 0);
        for &(_, c) in &unit.labels {
            tally[c] += 1;
        }
        let w = 1.0 / (m as f64 - 1.0);
        for c in 0..k {
            if tally[c] == 0 {
                continue;
            }
            for j in 0..k {
                let pairs = if c == j {
                    tally[c] * (tally[c] - 1)
                } else {
                    tally[c] * tally[j]
                };
                if pairs > 0 {
                    counts[c][j] += pairs as f64 * w;
                }
            }
        }
    }
    if n_units == 0 {
        return Err(Error::Degenerate("no unit has two or more labels".into()));
    }
    Ok(CoincidenceMatrix {
        categories: set.schema.categories.clone(),
        counts,
        n_units,
        n_values,
    })
}
