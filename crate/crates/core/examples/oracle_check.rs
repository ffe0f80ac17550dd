//! Cross-check the engine against the brute-force reference.

use parclust::oracle::{oracle_batched, oracle_single_linkage};
use parclust::synth::generate_uniform;
use parclust::{engine, ConstraintSet, MetricKind, RunConfig};

fn main() -> parclust::Result<()> {
    let data = generate_uniform(500, 4, 3)?;
    let constraints = ConstraintSet { kl2: Some(40), kl3: Some(60), dmax: Some(0.4), ..ConstraintSet::none() };
    let config = RunConfig { constraints, metric: MetricKind::Manhattan, pairs_per_batch: 16, ..RunConfig::default() };
    let engine = engine::run(&data, &config)?;
    let oracle = oracle_single_linkage(&data, &constraints, config.metric)?;
    println!(
        "engine {} merges in {} rounds, oracle {} merges; assignments equal: {}",
        engine.merges.len(),
        engine.rounds,
        oracle.merges.len(),
        engine.assignments == oracle.assignments
    );

    let prioritized = ConstraintSet { kl4: Some(3), ..constraints };
    let config = RunConfig { constraints: prioritized, ..config };
    let engine = engine::run(&data, &config)?;
    let oracle = oracle_batched(&data, &prioritized, config.metric, config.pairs_per_batch)?;
    let key = |e: &parclust::MergeEvent| (e.root_a.min(e.root_b), e.root_a.max(e.root_b), e.dist.to_bits(), e.round);
    let same_sequence = engine.merges.iter().map(key).eq(oracle.merge_log().iter().map(key));
    println!("with kl4: same merges in the same rounds and order: {same_sequence}");
    Ok(())
}
