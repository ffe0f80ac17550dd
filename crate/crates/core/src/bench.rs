//! Timing matrix over worker counts and dataset sizes.

use std::fmt;

use serde::Serialize;

use crate::engine::{run, RunConfig};
use crate::error::{Error, Result};
use crate::scheduler::PipelineConfig;
use crate::synth::generate_uniform;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    /// Total worker counts; the first entry is the speedup baseline.
    pub workers: Vec<usize>,
    pub trials: usize,
    pub dim: usize,
    pub seed: u64,
    pub base: RunConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![10_000],
            workers: vec![1, 2, 4],
            trials: 3,
            dim: 8,
            seed: 1,
            base: RunConfig { pairs_per_batch: 1024, ..RunConfig::default() },
        }
    }
}

/// Splits `total` workers over up to four managers.
pub fn pipeline_for(total: usize, template: &PipelineConfig) -> PipelineConfig {
    let managers = total.clamp(1, 4);
    let mut p = PipelineConfig {
        managers,
        workers_per_manager: total.max(1).div_ceil(managers),
        ..*template
    };
    p.input_buffers = p.input_buffers.max(managers);
    p
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub workers: usize,
    pub managers: usize,
    pub trials: Vec<f64>,
    pub min_secs: f64,
    pub median_secs: f64,
    /// Median of the baseline row divided by this row's median.
    pub speedup: f64,
    pub utilization_percent: f64,
    /// Merges and assignments equal those of the baseline row.
    pub matches_baseline: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn deterministic(&self) -> bool {
        self.rows.iter().all(|r| r.matches_baseline)
    }

    pub fn row(&self, n: usize, workers: usize) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.n == n && r.workers == workers)
    }
}

fn median(sorted: &[f64]) -> f64 {
    let m = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[m]
    } else {
        (sorted[m - 1] + sorted[m]) / 2.0
    }
}

pub fn run_bench(config: &BenchConfig) -> Result<BenchReport> {
    if config.trials == 0 || config.workers.is_empty() || config.sizes.is_empty() {
        return Err(Error::InvalidConfig("bench needs sizes, workers and at least one trial".into()));
    }
    let mut rows = Vec::new();
    for &n in &config.sizes {
        let dataset = generate_uniform(n, config.dim, config.seed)?;
        let mut baseline: Option<(f64, crate::engine::RunResult)> = None;
        for &workers in &config.workers {
            let run_config = RunConfig {
                pipeline: pipeline_for(workers, &config.base.pipeline),
                ..config.base
            };
            let mut times = Vec::with_capacity(config.trials);
            let mut util = 0.0;
            let mut matches = true;
            let mut last = None;
            for _ in 0..config.trials {
                let result = run(&dataset, &run_config)?;
                times.push(result.wall_secs);
                util += result.utilization.aggregate_utilization();
                if let Some((_, base)) = &baseline {
                    matches &= base.merges == result.merges && base.assignments == result.assignments;
                }
                last = Some(result);
            }
            let mut sorted = times.clone();
            sorted.sort_by(f64::total_cmp);
            let med = median(&sorted);
            if baseline.is_none() {
                baseline = last.map(|r| (med, r));
            }
            let base_med = baseline.as_ref().map_or(med, |(m, _)| *m);
            rows.push(BenchRow {
                n,
                workers,
                managers: run_config.pipeline.managers,
                trials: times,
                min_secs: sorted[0],
                median_secs: med,
                speedup: base_med / med,
                utilization_percent: util / config.trials as f64,
                matches_baseline: matches,
            });
        }
    }
    Ok(BenchReport { rows })
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>9} {:>7} {:>8} {:>10} {:>10} {:>8} {:>8} {:>9}",
            "n", "workers", "managers", "min_s", "median_s", "speedup", "util%", "identical"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>9} {:>7} {:>8} {:>10.3} {:>10.3} {:>8.2} {:>8.1} {:>9}",
                r.n, r.workers, r.managers, r.min_secs, r.median_secs, r.speedup, r.utilization_percent,
                if r.matches_baseline { "yes" } else { "NO" }
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_speedup_is_one_and_outputs_match() {
        let config = BenchConfig {
            sizes: vec![600],
            workers: vec![1, 2, 4],
            trials: 2,
            base: RunConfig { pairs_per_batch: 32, blocks: Some(5), ..RunConfig::default() },
            ..BenchConfig::default()
        };
        let report = run_bench(&config).unwrap();
        assert_eq!(report.rows.len(), 3);
        assert_eq!(report.row(600, 1).unwrap().speedup, 1.0);
        assert!(report.deterministic());
        assert!(report.to_string().contains("speedup"));
    }

    #[test]
    fn worker_split() {
        let t = PipelineConfig::default();
        assert_eq!(pipeline_for(1, &t).total_workers(), 1);
        assert_eq!(pipeline_for(4, &t).managers, 4);
        assert_eq!(pipeline_for(8, &t).total_workers(), 8);
        assert_eq!(pipeline_for(2, &t).managers, 2);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[1.0, 2.0, 9.0]), 2.0);
        assert_eq!(median(&[1.0, 2.0, 4.0, 9.0]), 3.0);
    }
}
