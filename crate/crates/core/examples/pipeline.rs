//! Manager/worker layouts, utilization reporting and cross-layout determinism.

use parclust::scheduler::report_utilization;
use parclust::synth::generate_uniform;
use parclust::{engine, PipelineConfig, RunConfig};

fn main() -> parclust::Result<()> {
    let data = generate_uniform(8_000, 8, 1)?;
    let layouts = [
        PipelineConfig::with_workers(1, 1),
        PipelineConfig::with_workers(2, 2),
        PipelineConfig { buffers_per_worker: 1, output_buffers: 1, ..PipelineConfig::with_workers(4, 1) },
    ];
    let mut reference = None;
    for pipeline in layouts {
        let config = RunConfig { pipeline, pairs_per_batch: 512, ..RunConfig::default() };
        let r = engine::run(&data, &config)?;
        println!(
            "managers {} x workers {}: {:.2}s, {} pipeline passes, peak live buffers {} (bound {})",
            pipeline.managers,
            pipeline.workers_per_manager,
            r.wall_secs,
            r.scans,
            r.utilization.peak_live_buffers,
            pipeline.buffer_bound()
        );
        print!("{}", report_utilization(&r.utilization));
        let same = reference.get_or_insert_with(|| r.merges.clone()) == &r.merges;
        println!("identical merge log: {same}\n");
    }
    Ok(())
}
