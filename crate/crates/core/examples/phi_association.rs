// Relate item stability to expert rationalisations.

use relstab::association::{associate, read_rationalisations_csv};
use relstab::{item_stability_labels, resolve_rationalisation, simulate, ItemCause, SimConfig};

fn main() -> relstab::Result<()> {
    let cfg = SimConfig::new(
        6,
        [
            (ItemCause::Subjective, 15),
            (ItemCause::Ambiguous, 10),
            (ItemCause::Difficult, 5),
        ],
    )
    .with_error(0.02)
    .with_seed(2);
    let (set, truth) = simulate(&cfg)?;

    // two experts agree on the cause; a third only weighs in on a few items
    let mut csv = String::from("item_id,rater_id,label\n");
    for (item, cause) in &truth.causes {
        for rater in ["e1", "e2"] {
            csv.push_str(&format!("{item},{rater},{cause}\n"));
        }
    }
    csv.push_str("i01,e3,ambiguous\n");
    let records = read_rationalisations_csv(csv.as_bytes())?;
    let resolution = resolve_rationalisation(&records)?;

    let stability = item_stability_labels(&set)?;
    let result = associate(&stability.labels, &resolution, 10_000, 9)?;
    println!("table {}", result.table);
    println!(
        "phi {:.4} ({}), permutation p {:.4}",
        result.phi,
        result.convention,
        result.p_value.unwrap_or(f64::NAN)
    );
    Ok(())
}
