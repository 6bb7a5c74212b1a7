// Compare item groups on reliability and stability with bootstrap intervals.

use relstab::association::{item_groups, item_hypotheses, read_rationalisations_csv};
use relstab::quadrant::StabilityMetric;
use relstab::reliability::MetricName;
use relstab::{
    classify_items, resolve_rationalisation, simulate, BootstrapOptions, ItemCause,
    QuadrantThresholds, SimConfig,
};

fn main() -> relstab::Result<()> {
    let cfg = SimConfig::new(
        16,
        [
            (ItemCause::Straightforward, 30),
            (ItemCause::Subjective, 30),
            (ItemCause::Ambiguous, 15),
            (ItemCause::Difficult, 15),
        ],
    )
    .with_error(0.02)
    .with_seed(4);
    let (set, truth) = simulate(&cfg)?;

    let mut csv = String::from("item_id,rater_id,label\n");
    for (item, cause) in truth
        .causes
        .iter()
        .filter(|(_, c)| **c != ItemCause::Straightforward)
    {
        csv.push_str(&format!("{item},expert,{cause}\n"));
    }
    let resolution = resolve_rationalisation(&read_rationalisations_csv(csv.as_bytes())?)?;

    let cuts =
        QuadrantThresholds::for_metrics(MetricName::PercentAgreement, StabilityMetric::ExactRate);
    let items = classify_items(&set, &cuts)?;
    let groups = item_groups(&items.assignments, &resolution);
    for check in item_hypotheses(&items.assignments, &groups, &BootstrapOptions::with_seed(1))? {
        let c = check.comparison.expect("every group is populated");
        println!(
            "{:<78} diff {:+.3} CI [{:+.3}, {:+.3}] supported={:?}",
            check.claim, c.difference, c.ci.0, c.ci.1, check.supported
        );
    }
    Ok(())
}
