//! Effect of each clustering limit on the same dataset.

use parclust::synth::{generate_synthetic, BlobSpec};
use parclust::{engine, ConstraintSet, RunConfig};

fn main() -> parclust::Result<()> {
    let blobs = generate_synthetic(&BlobSpec { n: 600, d: 2, clusters: 4, spread: 2.0, seed: 7 })?;
    let cases = [
        ("none", ConstraintSet::none()),
        ("kl1 = 4 (stop below 4 clusters)", ConstraintSet { kl1: Some(4), ..ConstraintSet::none() }),
        ("kl2 = 50 (frozen above 50 points)", ConstraintSet { kl2: Some(50), ..ConstraintSet::none() }),
        ("kl3 = 120 (merged size cap)", ConstraintSet { kl3: Some(120), ..ConstraintSet::none() }),
        ("dmax = 1.5", ConstraintSet { dmax: Some(1.5), ..ConstraintSet::none() }),
        ("kl4 = 5 (small clusters first)", ConstraintSet { kl4: Some(5), ..ConstraintSet::none() }),
    ];
    for (label, constraints) in cases {
        let config = RunConfig { constraints, pairs_per_batch: 64, ..RunConfig::default() };
        let r = engine::run(&blobs.dataset, &config)?;
        let largest = r.merges.iter().map(|e| e.new_size).max().unwrap_or(1);
        println!(
            "{label:<36} clusters {:>4}  largest {:>4}  rounds {:>3}  skips stale/kl2/kl3 {}/{}/{}  stop {}",
            r.clusters,
            largest,
            r.rounds,
            r.skips.stale,
            r.skips.kl2,
            r.skips.kl3,
            r.stop.name()
        );
    }
    Ok(())
}
