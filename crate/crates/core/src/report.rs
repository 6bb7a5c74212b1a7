//! Report envelopes and renderers: JSON (the source of truth), markdown
//! (a projection of the JSON), and the SVG quadrant scatter.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::quadrant::{Quadrant, QuadrantAssignment, QuadrantThresholds};

pub const TOOL: &str = "relstab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// JSON Schema every report (and merged bundle) validates against.
pub const REPORT_SCHEMA: &str = include_str!("../schemas/report.schema.json");
/// Significant digits kept for every float in a report.
pub const SIGNIFICANT_DIGITS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

pub fn digest_file(path: impl AsRef<Path>) -> Result<InputDigest> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let hash = Sha256::digest(&bytes);
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: hash.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        }),
    })
}

pub fn round_significant(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits - 1, x).parse().unwrap_or(x)
}

/// Rounds every float in `value` to [`SIGNIFICANT_DIGITS`].
pub fn round_floats(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                *value = json!(round_significant(x, SIGNIFICANT_DIGITS));
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// A report as written to disk.
#[derive(Debug, Clone)]
pub struct Report {
    pub command: String,
    pub inputs: Vec<InputDigest>,
    pub config: Value,
    pub seed: Option<u64>,
    pub result: Value,
}

impl Report {
    pub fn new(command: &str, result: impl Serialize) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            inputs: Vec::new(),
            config: Value::Null,
            seed: None,
            result: serde_json::to_value(result)?,
        })
    }

    pub fn to_value(&self) -> Value {
        let mut v = json!({
            "tool": TOOL,
            "version": VERSION,
            "command": self.command,
            "provenance": {
                "inputs": self.inputs,
                "config": self.config,
                "seed": self.seed,
            },
            "result": self.result,
        });
        round_floats(&mut v);
        v
    }

    pub fn to_json_string(&self) -> String {
        to_json_string(&self.to_value())
    }

    pub fn to_markdown(&self) -> String {
        render_markdown(&self.to_value())
    }
}

pub fn to_json_string(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json values serialize");
    s.push('\n');
    s
}

/// Bundles several report envelopes into one; `inputs` are the digests of
/// the files they were read from.
pub fn merge_reports(sections: Vec<Value>, inputs: Vec<InputDigest>) -> Value {
    let mut v = json!({
        "tool": TOOL,
        "version": VERSION,
        "command": "report",
        "provenance": {
            "inputs": inputs,
            "config": null,
            "seed": null,
        },
        "result": { "sections": sections },
    });
    round_floats(&mut v);
    v
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Null => "null".to_string(),
        Value::String(s) => s.replace('|', "\\|"),
        Value::Array(items) if items.iter().all(|i| !i.is_object() && !i.is_array()) => {
            items.iter().map(scalar).collect::<Vec<_>>().join(", ")
        }
        other => other.to_string().replace('|', "\\|"),
    }
}

fn is_flat(v: &Value) -> bool {
    match v {
        Value::Object(_) => false,
        Value::Array(items) => items.iter().all(|i| !i.is_object() && !i.is_array()),
        _ => true,
    }
}

fn render_table(out: &mut String, rows: &[Value]) {
    let mut columns: Vec<String> = Vec::new();
    for row in rows {
        if let Value::Object(map) = row {
            for k in map.keys() {
                if !columns.contains(k) {
                    columns.push(k.clone());
                }
            }
        }
    }
    let _ = writeln!(out, "| {} |", columns.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(columns.len()));
    for row in rows {
        let cells: Vec<String> = columns
            .iter()
            .map(|c| {
                row.get(c)
                    .map(|v| {
                        if is_flat(v) {
                            scalar(v)
                        } else {
                            v.to_string().replace('|', "\\|")
                        }
                    })
                    .unwrap_or_default()
            })
            .collect();
        let _ = writeln!(out, "| {} |", cells.join(" | "));
    }
    out.push('\n');
}

fn render_section(out: &mut String, title: &str, value: &Value, depth: usize) {
    let heading = "#".repeat(depth.min(6));
    match value {
        Value::Object(map) => {
            let _ = writeln!(out, "{heading} {title}\n");
            let (flat, nested): (Vec<_>, Vec<_>) = map.iter().partition(|(_, v)| is_flat(v));
            if !flat.is_empty() {
                let _ = writeln!(out, "| key | value |\n|---|---|");
                for (k, v) in flat {
                    let _ = writeln!(out, "| {k} | {} |", scalar(v));
                }
                out.push('\n');
            }
            for (k, v) in nested {
                render_section(out, k, v, depth + 1);
            }
        }
        Value::Array(items) if items.iter().all(Value::is_object) && !items.is_empty() => {
            let _ = writeln!(out, "{heading} {title}\n");
            let nested_envelopes = items
                .iter()
                .all(|i| i.get("tool").is_some() && i.get("result").is_some());
            if nested_envelopes {
                for item in items {
                    let name = item
                        .get("command")
                        .and_then(Value::as_str)
                        .unwrap_or("section");
                    render_section(out, name, item, depth + 1);
                }
            } else {
                render_table(out, items);
            }
        }
        other => {
            let _ = writeln!(
                out,
                "{heading} {title}\n\n{}\n",
                other.to_string().replace('|', "\\|")
            );
        }
    }
}

/// Markdown view of a report value. Numbers are printed exactly as they
/// appear in the JSON.
pub fn render_markdown(report: &Value) -> String {
    let command = report
        .get("command")
        .and_then(Value::as_str)
        .unwrap_or("report");
    let mut out = String::new();
    let _ = writeln!(out, "# {TOOL} {command}\n");
    if let Some(prov) = report.get("provenance") {
        render_section(&mut out, "provenance", prov, 2);
    }
    if let Some(result) = report.get("result") {
        render_section(&mut out, "result", result, 2);
    }
    out
}

const SVG_SIZE: f64 = 640.0;
const SVG_MARGIN: f64 = 90.0;

fn quadrant_colour(q: Quadrant) -> &'static str {
    match q {
        Quadrant::Straightforward => "#2b8a3e",
        Quadrant::SystematicErrorOrValueChange => "#e67700",
        Quadrant::SubjectivePerspectives => "#1c7ed6",
        Quadrant::AmbiguousDifficultOrPoor => "#c92a2a",
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Pixel position of a `(stability, reliability)` pair on the scatter.
/// Stability grows to the left and reliability upwards, so the
/// high/high cell is top-left.
pub struct SvgAxes {
    lo: f64,
}

impl SvgAxes {
    fn for_scores<'a>(scores: impl IntoIterator<Item = &'a f64>) -> Self {
        let negative = scores.into_iter().any(|&s| s < 0.0);
        Self {
            lo: if negative { -1.0 } else { 0.0 },
        }
    }

    fn frac(&self, s: f64) -> f64 {
        ((s - self.lo) / (1.0 - self.lo)).clamp(0.0, 1.0)
    }

    pub fn x(&self, stability: f64) -> f64 {
        SVG_MARGIN + (1.0 - self.frac(stability)) * (SVG_SIZE - 2.0 * SVG_MARGIN)
    }

    pub fn y(&self, reliability: f64) -> f64 {
        SVG_MARGIN + (1.0 - self.frac(reliability)) * (SVG_SIZE - 2.0 * SVG_MARGIN)
    }
}

pub fn render_svg_quadrant(
    assignments: &[QuadrantAssignment],
    thresholds: &QuadrantThresholds,
) -> Result<String> {
    if assignments.is_empty() {
        return Err(Error::Empty("quadrant assignments"));
    }
    let axes = SvgAxes::for_scores(
        assignments
            .iter()
            .flat_map(|a| [&a.reliability_score, &a.stability_score]),
    );
    let (left, right) = (SVG_MARGIN, SVG_SIZE - SVG_MARGIN);
    let (top, bottom) = (SVG_MARGIN, SVG_SIZE - SVG_MARGIN);
    let xc = axes.x(thresholds.stability_cut);
    let yc = axes.y(thresholds.reliability_cut);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_SIZE}" height="{SVG_SIZE}" viewBox="0 0 {SVG_SIZE} {SVG_SIZE}" font-family="sans-serif">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="white" stroke="black"/>"#,
        right - left,
        bottom - top
    );
    let _ = writeln!(
        s,
        r#"<line class="cut stability" x1="{xc:.2}" y1="{top}" x2="{xc:.2}" y2="{bottom}" stroke="gray" stroke-dasharray="4 4"/>"#
    );
    let _ = writeln!(
        s,
        r#"<line class="cut reliability" x1="{left}" y1="{yc:.2}" x2="{right}" y2="{yc:.2}" stroke="gray" stroke-dasharray="4 4"/>"#
    );
    let cells = [
        (
            Quadrant::Straightforward,
            (left + xc) / 2.0,
            (top + yc) / 2.0,
        ),
        (
            Quadrant::SystematicErrorOrValueChange,
            (xc + right) / 2.0,
            (top + yc) / 2.0,
        ),
        (
            Quadrant::SubjectivePerspectives,
            (left + xc) / 2.0,
            (yc + bottom) / 2.0,
        ),
        (
            Quadrant::AmbiguousDifficultOrPoor,
            (xc + right) / 2.0,
            (yc + bottom) / 2.0,
        ),
    ];
    for (q, x, y) in cells {
        let _ = writeln!(
            s,
            r#"<text class="quadrant-label" x="{x:.2}" y="{y:.2}" text-anchor="middle" font-size="11" fill="{}" opacity="0.6">{}</text>"#,
            quadrant_colour(q),
            xml_escape(q.reading())
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">Stability ({:?}): high ← → low</text>"#,
        SVG_SIZE / 2.0,
        SVG_SIZE - SVG_MARGIN / 3.0,
        thresholds.stability_metric
    );
    let _ = writeln!(
        s,
        r#"<text x="{0}" y="{1}" text-anchor="middle" font-size="13" transform="rotate(-90 {0} {1})">Reliability ({2}): low ← → high</text>"#,
        SVG_MARGIN / 3.0,
        SVG_SIZE / 2.0,
        thresholds.reliability_metric
    );
    for a in assignments {
        let _ = writeln!(
            s,
            r#"<circle class="marker" cx="{:.2}" cy="{:.2}" r="5" fill="{}" fill-opacity="0.7"><title>{} ({:.3}, {:.3}) {}</title></circle>"#,
            axes.x(a.stability_score),
            axes.y(a.reliability_score),
            quadrant_colour(a.quadrant),
            xml_escape(&a.subject_id),
            a.reliability_score,
            a.stability_score,
            a.quadrant
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Writes `report.json` style files: `<stem>.json` and `<stem>.md`.
pub fn write_report(dir: &Path, stem: &str, value: &Value) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json_path = dir.join(format!("{stem}.json"));
    std::fs::write(&json_path, to_json_string(value)).map_err(|e| Error::io(&json_path, e))?;
    let md_path = dir.join(format!("{stem}.md"));
    std::fs::write(&md_path, render_markdown(value)).map_err(|e| Error::io(&md_path, e))?;
    Ok(())
}

/// Loads every envelope (other than a merged bundle) in `dir`, sorted by
/// file name, with the digest of each source file.
pub fn collect_reports(dir: &Path) -> Result<(Vec<Value>, Vec<InputDigest>)> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("json"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    let mut digests = Vec::new();
    for p in paths {
        let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let Ok(v) = serde_json::from_str::<Value>(&text) else {
            continue;
        };
        let is_section = v.get("tool").and_then(Value::as_str) == Some(TOOL)
            && v.get("command")
                .and_then(Value::as_str)
                .is_some_and(|c| c != "report");
        if is_section {
            out.push(v);
            digests.push(digest_file(&p)?);
        }
    }
    Ok((out, digests))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrant::QuadrantScope;

    fn at(id: &str, r: f64, s: f64, q: Quadrant) -> QuadrantAssignment {
        QuadrantAssignment {
            scope: QuadrantScope::Item,
            subject_id: id.into(),
            reliability_score: r,
            stability_score: s,
            quadrant: q,
        }
    }

    fn markers(svg: &str) -> Vec<(f64, f64)> {
        svg.lines()
            .filter(|l| l.starts_with("<circle"))
            .map(|l| {
                let attr = |name: &str| -> f64 {
                    let start = l.find(&format!("{name}=\"")).unwrap() + name.len() + 2;
                    l[start..].split('"').next().unwrap().parse().unwrap()
                };
                (attr("cx"), attr("cy"))
            })
            .collect()
    }

    #[test]
    fn high_high_marker_is_top_left() {
        let t = QuadrantThresholds::default();
        let svg = render_svg_quadrant(&[at("d", 0.9, 0.9, Quadrant::Straightforward)], &t).unwrap();
        let axes = SvgAxes::for_scores(&[0.9]);
        let (x, y) = markers(&svg)[0];
        assert!(x < axes.x(t.stability_cut) && y < axes.y(t.reliability_cut));
    }

    #[test]
    fn one_marker_per_cell() {
        let t = QuadrantThresholds::default();
        let pts = [
            at("a", 0.9, 0.9, Quadrant::Straightforward),
            at("b", 0.9, 0.1, Quadrant::SystematicErrorOrValueChange),
            at("c", 0.1, 0.9, Quadrant::SubjectivePerspectives),
            at("d", 0.1, 0.1, Quadrant::AmbiguousDifficultOrPoor),
        ];
        let svg = render_svg_quadrant(&pts, &t).unwrap();
        let axes = SvgAxes::for_scores(&[0.1]);
        let (xc, yc) = (axes.x(0.6), axes.y(0.6));
        let cells: std::collections::BTreeSet<(bool, bool)> = markers(&svg)
            .into_iter()
            .map(|(x, y)| (x < xc, y < yc))
            .collect();
        assert_eq!(cells.len(), 4);
        assert!(matches!(render_svg_quadrant(&[], &t), Err(Error::Empty(_))));
    }

    #[test]
    fn rounding_keeps_ten_digits() {
        assert_eq!(round_significant(8.0 / 15.0, 10), 0.5333333333);
        assert_eq!(round_significant(-1.0, 10), -1.0);
        let mut v = json!({"x": [1.0 / 3.0, 2], "y": {"z": 2.0 / 3.0}});
        round_floats(&mut v);
        assert_eq!(
            v.to_string(),
            r#"{"x":[0.3333333333,2],"y":{"z":0.6666666667}}"#
        );
    }

    #[test]
    fn markdown_numbers_come_from_json() {
        let r = Report::new(
            "phi",
            json!({"phi": -1.0, "table": {"a": 10, "b": 0, "c": 0, "d": 10}}),
        )
        .unwrap();
        let md = r.to_markdown();
        assert!(md.contains("| phi | -1.0 |"), "{md}");
        assert!(md.contains("| a | 10 |"));
    }
}
