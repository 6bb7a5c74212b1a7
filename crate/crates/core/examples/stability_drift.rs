// Intra-annotator consistency across four rounds at growing intervals.

use relstab::annotation::Pairing;
use relstab::stability::{annotator_stability, PermutationOptions, DEFAULT_BUCKET_EDGES};
use relstab::{
    build_repeat_pairs, dataset_stability, interval_profile, simulate, ItemCause, SimConfig,
};

fn main() -> relstab::Result<()> {
    let mut cfg = SimConfig::single_cause(ItemCause::Straightforward, 12, 80).with_seed(3);
    cfg.rounds = 4;
    // ten minutes, two days, three weeks
    cfg.interval_per_round = vec![600, 172_800, 1_814_400];
    cfg.drift = 0.05;
    let (set, _) = simulate(&cfg)?;

    let ds = dataset_stability(&set)?;
    println!(
        "dataset exact rate {:.3}, self kappa {:?}",
        ds.exact_rate, ds.self_kappa
    );
    for a in annotator_stability(&set, Pairing::Consecutive)?
        .iter()
        .take(3)
    {
        println!(
            "  {:?}: {:.3} over {} pairs",
            a.subject_id, a.exact_rate, a.n_pairs
        );
    }

    let pairs = build_repeat_pairs(&set, Pairing::Consecutive)?;
    let profile = interval_profile(
        &pairs,
        &DEFAULT_BUCKET_EDGES,
        &PermutationOptions {
            replicates: 2000,
            seed: 1,
        },
    )?;
    for b in &profile.buckets {
        let upper = b.upper_seconds.map_or("inf".to_string(), |u| u.to_string());
        match b.mean_exact_rate {
            Some(m) => println!(
                "  [{}, {upper}) s: {m:.3} ({} pairs)",
                b.lower_seconds, b.n_pairs
            ),
            None => println!("  [{}, {upper}) s: empty", b.lower_seconds),
        }
    }
    println!(
        "trend rho {:.3}, p {:.4}",
        profile.trend.rho, profile.trend.p
    );
    Ok(())
}
