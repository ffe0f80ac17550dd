//! Cluster a handful of points and walk the dendrogram.

use parclust::{engine, Dataset, RunConfig};

fn main() -> parclust::Result<()> {
    let data = Dataset::from_rows(&[
        [0.0, 0.0],
        [0.0, 1.0],
        [1.0, 0.0],
        [10.0, 10.0],
        [10.0, 11.5],
        [30.0, 0.0],
    ])?;
    let result = engine::run(&data, &RunConfig::default())?;

    println!("stop: {}, rounds: {}", result.stop.name(), result.rounds);
    for e in result.merges.iter() {
        println!(
            "step {:>2}  {} + {}  at {:.3}  -> size {}",
            e.step, e.root_a, e.root_b, e.dist, e.new_size
        );
    }
    for k in 1..=3 {
        let cut = result.merges.cut(data.len(), k).expect("log covers every level");
        println!("{k} clusters: {cut:?}");
    }
    Ok(())
}
