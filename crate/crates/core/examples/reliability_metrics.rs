// Inter-annotator agreement on a small two-annotator study.

use relstab::reliability::{with_bootstrap, Distance, IccModel};
use relstab::{
    cohens_kappa, fleiss_kappa, icc, krippendorff_alpha, percent_agreement, validate_dataset,
    BootstrapOptions, LabelSchema, MetricSpec, RawRecord, RoundSelector,
};

fn main() -> relstab::Result<()> {
    let r1 = RoundSelector::Round(1);
    let a = ["x", "x", "y", "y"];
    let b = ["x", "x", "y", "x"];
    let schema = LabelSchema::nominal("demo", ["x", "y"])?;
    let records = a.iter().zip(b).enumerate().flat_map(|(i, (la, lb))| {
        let item = format!("i{i}");
        [
            RawRecord::new("demo", &item, "A", 1, la),
            RawRecord::new("demo", &item, "B", 1, lb),
        ]
    });
    let set = validate_dataset(records, &schema)?;

    println!(
        "percent agreement  {:.4}",
        percent_agreement(&set, r1)?.value
    );
    println!(
        "Cohen's kappa      {:.4}",
        cohens_kappa(&set, "A", "B", r1)?.value
    );
    println!("Fleiss' kappa      {:.4}", fleiss_kappa(&set, r1)?.value);
    println!(
        "alpha (nominal)    {:.4}",
        krippendorff_alpha(&set, r1, Some(Distance::Nominal))?.value
    );

    let interval = LabelSchema::interval("scores", (1..=4).map(|v| (v.to_string(), v as f64)))?;
    let grid = [["1", "2"], ["3", "4"]];
    let records = grid.iter().enumerate().flat_map(|(i, row)| {
        row.iter()
            .enumerate()
            .map(move |(j, l)| RawRecord::new("scores", &format!("i{i}"), &format!("r{j}"), 1, l))
    });
    let scores = validate_dataset(records, &interval)?;
    println!(
        "ICC(1,1)           {:.4}",
        icc(&scores, r1, IccModel::OnewayRandom)?.value
    );
    println!(
        "ICC(2,1)           {:.4}",
        icc(&scores, r1, IccModel::TwowayRandomSingle)?.value
    );

    let sim = relstab::SimConfig::new(
        8,
        [
            (relstab::ItemCause::Straightforward, 40),
            (relstab::ItemCause::Ambiguous, 10),
        ],
    )
    .with_error(0.05)
    .with_seed(1);
    let (big, _) = relstab::simulate(&sim)?;
    let r = with_bootstrap(
        &MetricSpec::default(),
        &big,
        r1,
        &BootstrapOptions::with_seed(7),
    )?;
    let (lo, hi) = r.ci.expect("bootstrap attaches an interval");
    println!(
        "simulated alpha    {:.4}  95% CI [{lo:.4}, {hi:.4}]",
        r.value
    );
    Ok(())
}
