//! `key = value` settings files and their merge with command-line flags.
//!
//! Resolution order for every key: flag, then file, then built-in default.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::engine::RunConfig;
use crate::error::{Error, Result};
use crate::metric::MetricKind;
use crate::scheduler::PipelineConfig;

/// Keys accepted in a settings file, matching the long flag names.
pub const KEYS: &[&str] = &[
    "input",
    "id-column",
    "out-dir",
    "seed",
    "metric",
    "pairs-per-batch",
    "blocks",
    "prefetch-pairs",
    "managers",
    "workers-per-manager",
    "input-buffers",
    "output-buffers",
    "buffers-per-worker",
    "kl1",
    "kl2",
    "kl3",
    "kl4",
    "dmax",
];

/// A partial configuration. Unset fields fall through to the next layer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub input: Option<PathBuf>,
    pub id_column: Option<String>,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub metric: Option<MetricKind>,
    pub pairs_per_batch: Option<usize>,
    pub blocks: Option<usize>,
    pub prefetch_pairs: Option<usize>,
    pub managers: Option<usize>,
    pub workers_per_manager: Option<usize>,
    pub input_buffers: Option<usize>,
    pub output_buffers: Option<usize>,
    pub buffers_per_worker: Option<usize>,
    pub kl1: Option<usize>,
    pub kl2: Option<usize>,
    pub kl3: Option<usize>,
    pub kl4: Option<usize>,
    pub dmax: Option<f64>,
}

fn parsed<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value.parse().map_err(|_| format!("invalid value '{value}' for {key}"))
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self> {
        let mut settings = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Settings {
                line,
                message: format!("expected key = value, found '{content}'"),
            })?;
            settings
                .set(key.trim(), value.trim())
                .map_err(|message| Error::Settings { line, message })?;
        }
        Ok(settings)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Sets one key from its textual value. `blocks = auto` clears the block count.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "input" => self.input = Some(PathBuf::from(value)),
            "id-column" => self.id_column = Some(value.to_string()),
            "out-dir" => self.out_dir = Some(PathBuf::from(value)),
            "seed" => self.seed = Some(parsed(key, value)?),
            "metric" => self.metric = Some(value.parse::<MetricKind>().map_err(|e| e.to_string())?),
            "pairs-per-batch" => self.pairs_per_batch = Some(parsed(key, value)?),
            "blocks" if value == "auto" => self.blocks = None,
            "blocks" => self.blocks = Some(parsed(key, value)?),
            "prefetch-pairs" => self.prefetch_pairs = Some(parsed(key, value)?),
            "managers" => self.managers = Some(parsed(key, value)?),
            "workers-per-manager" => self.workers_per_manager = Some(parsed(key, value)?),
            "input-buffers" => self.input_buffers = Some(parsed(key, value)?),
            "output-buffers" => self.output_buffers = Some(parsed(key, value)?),
            "buffers-per-worker" => self.buffers_per_worker = Some(parsed(key, value)?),
            "kl1" => self.kl1 = Some(parsed(key, value)?),
            "kl2" => self.kl2 = Some(parsed(key, value)?),
            "kl3" => self.kl3 = Some(parsed(key, value)?),
            "kl4" => self.kl4 = Some(parsed(key, value)?),
            "dmax" => self.dmax = Some(parsed(key, value)?),
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Fields set in `top` replace those in `self`.
    pub fn overlay(self, top: &Settings) -> Settings {
        macro_rules! pick {
            ($($f:ident),*) => { Settings { $($f: top.$f.clone().or(self.$f)),* } };
        }
        pick!(
            input, id_column, out_dir, seed, metric, pairs_per_batch, blocks, prefetch_pairs,
            managers, workers_per_manager, input_buffers, output_buffers, buffers_per_worker,
            kl1, kl2, kl3, kl4, dmax
        )
    }

    /// Fills unset fields with defaults and validates the result.
    pub fn run_config(&self) -> Result<RunConfig> {
        let base = RunConfig::default();
        let pipe = PipelineConfig::default();
        let managers = self.managers.unwrap_or(pipe.managers);
        let pipeline = PipelineConfig {
            managers,
            workers_per_manager: self.workers_per_manager.unwrap_or(pipe.workers_per_manager),
            input_buffers: self.input_buffers.unwrap_or(pipe.input_buffers.max(managers)),
            output_buffers: self.output_buffers.unwrap_or(pipe.output_buffers),
            buffers_per_worker: self.buffers_per_worker.unwrap_or(pipe.buffers_per_worker),
        };
        let mut config = RunConfig {
            pairs_per_batch: self.pairs_per_batch.unwrap_or(base.pairs_per_batch),
            metric: self.metric.unwrap_or(base.metric),
            blocks: self.blocks,
            prefetch_pairs: self.prefetch_pairs,
            pipeline,
            ..base
        };
        config.constraints.kl1 = self.kl1;
        config.constraints.kl2 = self.kl2;
        config.constraints.kl3 = self.kl3;
        config.constraints.kl4 = self.kl4;
        config.constraints.dmax = self.dmax;
        config.validate()?;
        Ok(config)
    }
}
