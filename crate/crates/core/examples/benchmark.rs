//! Small timing matrix: worker counts by dataset size.

use parclust::bench::{run_bench, BenchConfig};

fn main() -> parclust::Result<()> {
    let config = BenchConfig { sizes: vec![4_000, 8_000], workers: vec![1, 2, 4], trials: 3, ..BenchConfig::default() };
    let report = run_bench(&config)?;
    print!("{report}");
    println!("all layouts produced identical merges: {}", report.deterministic());
    Ok(())
}
