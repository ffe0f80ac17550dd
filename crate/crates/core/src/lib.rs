//! Constrained single-linkage (nearest-neighbour) clustering for large point
//! sets.
//!
//! Each round the engine selects the `P` globally closest eligible point
//! pairs, orders them, and merges them through a union-find forest. Pair
//! selection is exhaustive: the point range is cut into blocks, every block
//! pair is scanned by a worker that keeps its own top-`P`, and the buffers are
//! reduced up a two-level manager hierarchy connected by bounded buffer pools.
//!
//! ```no_run
//! use parclust::{engine, Dataset, RunConfig};
//!
//! let data = Dataset::from_rows(&[[0.0, 0.0], [0.1, 0.0], [5.0, 5.0]])?;
//! let result = engine::run(&data, &RunConfig::default())?;
//! println!("{} merges, stop: {}", result.merges.len(), result.stop.name());
//! # Ok::<(), parclust::Error>(())
//! ```

pub mod bench;
pub mod engine;
pub mod error;
pub mod io;
pub mod metric;
pub mod model;
pub mod oracle;
pub mod pairgen;
pub mod scheduler;
pub mod settings;
pub mod synth;

pub use engine::{run, RunConfig, RunResult, StopReason};
pub use error::{Error, Result};
pub use metric::MetricKind;
pub use model::{CandidatePair, ClusterForest, ConstraintSet, Dataset, MergeEvent, MergeLog};
pub use pairgen::{BlockPlan, EligibilitySnapshot, TopPBuffer};
pub use scheduler::{PipelineConfig, UtilizationStats};
pub use settings::Settings;
pub use synth::{generate_synthetic, BlobSpec, Synthetic};
