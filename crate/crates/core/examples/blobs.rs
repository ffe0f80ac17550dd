//! Generate labelled Gaussian blobs and recover them.

use parclust::synth::{generate_synthetic, same_partition, BlobSpec};
use parclust::{engine, ConstraintSet, RunConfig};

fn main() -> parclust::Result<()> {
    let spec = BlobSpec { n: 5_000, d: 3, clusters: 5, spread: 0.5, seed: 8 };
    let blobs = generate_synthetic(&spec)?;
    println!("closest centers {:.1} apart, spread {}", blobs.min_center_gap(), spec.spread);

    // The run stops once fewer than kl1 clusters remain, so kl1 = 6 leaves five.
    let constraints = ConstraintSet { kl1: Some(spec.clusters + 1), ..ConstraintSet::none() };
    let config = RunConfig { constraints, pairs_per_batch: 1024, ..RunConfig::default() };
    let r = engine::run(&blobs.dataset, &config)?;
    println!(
        "{} clusters after {} rounds; matches generator labels: {}",
        r.clusters,
        r.rounds,
        same_partition(&r.assignments, &blobs.labels)
    );
    Ok(())
}
