// Place a dataset and its items in the reliability-stability matrix and
// draw the item scatter.

use relstab::quadrant::StabilityMetric;
use relstab::reliability::MetricName;
use relstab::report::render_svg_quadrant;
use relstab::{
    classify_dataset, classify_items, simulate, ItemCause, QuadrantThresholds, SimConfig,
};

fn main() -> relstab::Result<()> {
    let cfg = SimConfig::new(20, ItemCause::ALL.map(|c| (c, 10)))
        .with_error(0.02)
        .with_seed(5);
    let (set, truth) = simulate(&cfg)?;

    let dataset = classify_dataset(&set, &QuadrantThresholds::default())?;
    println!(
        "dataset: alpha {:.3}, self kappa {:.3} -> {}",
        dataset.reliability_score, dataset.stability_score, dataset.quadrant
    );

    let item_cuts =
        QuadrantThresholds::for_metrics(MetricName::PercentAgreement, StabilityMetric::ExactRate);
    let items = classify_items(&set, &item_cuts)?;
    for a in items.assignments.iter().step_by(10) {
        println!(
            "  {} ({}): {:.2} / {:.2} -> {}",
            a.subject_id,
            truth.causes[&a.subject_id],
            a.reliability_score,
            a.stability_score,
            a.quadrant
        );
    }

    let svg = render_svg_quadrant(&items.assignments, &item_cuts)?;
    let path = std::env::temp_dir().join("relstab-items.svg");
    std::fs::write(&path, svg).map_err(|e| relstab::Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    println!("scatter written to {}", path.display());
    Ok(())
}
