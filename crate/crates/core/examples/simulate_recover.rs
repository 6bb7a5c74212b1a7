// Generate single-cause datasets and check the matrix recovers each cause.

use relstab::{classify_dataset, simulate, ItemCause, QuadrantThresholds, SimConfig};

fn main() -> relstab::Result<()> {
    let thresholds = QuadrantThresholds::default();
    for cause in ItemCause::ALL {
        let hits = (0..20)
            .filter(|&seed| {
                let cfg = SimConfig::single_cause(cause, 40, 100)
                    .with_error(0.02)
                    .with_seed(seed);
                let (set, _) = simulate(&cfg).expect("valid config");
                classify_dataset(&set, &thresholds)
                    .expect("scores exist")
                    .quadrant
                    == cause.expected_quadrant()
            })
            .count();
        println!("{cause:>15}: {hits}/20 -> {}", cause.expected_quadrant());
    }

    let json = r#"{"n_annotators": 4, "items_per_cause": {"value_shift": 2}, "categories": ["a", "b", "c"]}"#;
    let (set, truth) = simulate(&SimConfig::from_json_str(json)?)?;
    println!("{}", set.to_csv_string()?);
    println!("{}", serde_json::to_string_pretty(&truth.labels)?);
    Ok(())
}
