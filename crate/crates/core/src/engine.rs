//! The clustering round loop.
//!
//! Each round selects the `P` globally smallest eligible pairs, orders them
//! (small clusters first when `kl4` is set) and merges them one by one,
//! re-checking cluster identity and size limits against the live forest.
//! Rounds repeat until fewer than `kl1` clusters remain, a single cluster is
//! left, or no eligible pair exists.
//!
//! Selection goes through a reservoir: one pipeline pass collects the `Q >= P`
//! smallest eligible pairs, and later rounds draw from it until it can no
//! longer prove that it holds the round's top `P`. A pair that is ineligible
//! once stays ineligible (cluster sizes only grow, distances are fixed), so
//! every eligible pair at or below the reservoir's last key is still in the
//! reservoir and each drawn batch equals a fresh exhaustive selection.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::MetricKind;
use crate::model::{CandidatePair, ClusterForest, ClusterView, ConstraintSet, Dataset, MergeEvent, MergeLog};
use crate::pairgen::{auto_blocks, plan_blocks, BlockPlan, EligibilitySnapshot};
use crate::scheduler::{run_round, PipelineConfig, UtilizationStats};

pub const DEFAULT_PAIRS_PER_BATCH: usize = 256;

/// Reservoir size used when none is configured: at least this many pairs,
/// and never fewer than `P`.
pub const DEFAULT_PREFETCH_PAIRS: usize = 262_144;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub constraints: ConstraintSet,
    pub pairs_per_batch: usize,
    pub metric: MetricKind,
    /// Block count; `None` picks about 4096 points per block.
    pub blocks: Option<usize>,
    pub pipeline: PipelineConfig,
    /// Pairs fetched per pipeline pass; `None` uses [`DEFAULT_PREFETCH_PAIRS`].
    /// Setting it equal to `pairs_per_batch` rescans every round.
    pub prefetch_pairs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            constraints: ConstraintSet::none(),
            pairs_per_batch: DEFAULT_PAIRS_PER_BATCH,
            metric: MetricKind::Euclidean,
            blocks: None,
            pipeline: PipelineConfig::default(),
            prefetch_pairs: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.constraints.validate()?;
        self.pipeline.validate()?;
        if self.pairs_per_batch == 0 {
            return Err(Error::InvalidConfig("pairs-per-batch must be at least 1".into()));
        }
        if self.blocks == Some(0) {
            return Err(Error::InvalidConfig("blocks must be at least 1".into()));
        }
        if self.prefetch_pairs == Some(0) {
            return Err(Error::InvalidConfig("prefetch-pairs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn plan(&self, n: usize) -> Result<BlockPlan> {
        plan_blocks(n, self.blocks.unwrap_or_else(|| auto_blocks(n)))
    }

    pub fn reservoir_size(&self) -> usize {
        self.prefetch_pairs.unwrap_or(DEFAULT_PREFETCH_PAIRS).max(self.pairs_per_batch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Kl1Reached,
    NoEligiblePairs,
    SingleCluster,
}

impl StopReason {
    pub fn name(&self) -> &'static str {
        match self {
            StopReason::Kl1Reached => "kl1-reached",
            StopReason::NoEligiblePairs => "no-eligible-pairs",
            StopReason::SingleCluster => "single-cluster",
        }
    }
}

/// Why selected pairs were not merged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipCounts {
    /// Both points already in one cluster.
    pub stale: usize,
    pub kl2: usize,
    pub kl3: usize,
}

impl SkipCounts {
    fn add(&mut self, other: SkipCounts) {
        self.stale += other.stale;
        self.kl2 += other.kl2;
        self.kl3 += other.kl3;
    }

    pub fn total(&self) -> usize {
        self.stale + self.kl2 + self.kl3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundStats {
    pub round: usize,
    pub pairs_selected: usize,
    pub priority_pairs: usize,
    pub merges: usize,
    pub skips: SkipCounts,
    /// Pipeline passes needed to assemble this round's batch.
    pub scans: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub merges: MergeLog,
    /// Point -> surviving root (the smallest index in its cluster).
    pub assignments: Vec<usize>,
    pub rounds: usize,
    pub stop: StopReason,
    pub clusters: usize,
    pub skips: SkipCounts,
    pub scans: usize,
    pub wall_secs: f64,
    pub round_stats: Vec<RoundStats>,
    pub utilization: UtilizationStats,
}

/// Stable partition of a sorted batch: pairs touching a cluster smaller than
/// `kl4` (by the round-start sizes in `view`) first, then the rest.
pub fn order_batch<V: ClusterView + ?Sized>(
    batch: &[CandidatePair],
    view: &V,
    kl4: Option<usize>,
) -> Vec<CandidatePair> {
    let Some(kl4) = kl4 else {
        return batch.to_vec();
    };
    let is_priority = |p: &CandidatePair| {
        let sa = view.root_size(view.root(p.a));
        let sb = view.root_size(view.root(p.b));
        sa.min(sb) < kl4
    };
    let (mut first, rest): (Vec<_>, Vec<_>) = batch.iter().partition(|p| is_priority(p));
    first.extend(rest);
    first
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchOutcome {
    pub events: Vec<MergeEvent>,
    pub skips: SkipCounts,
    /// Set when a union dropped the cluster count below `kl1`.
    pub stop: bool,
}

/// Merges an ordered batch into the forest.
///
/// Every pair is re-checked against the live forest: already joined pairs
/// and pairs whose clusters now break kl2/kl3 are skipped. Distances need no
/// re-check. Processing ceases as soon as the count drops below `kl1`.
pub fn process_batch(
    forest: &mut ClusterForest,
    ordered: &[CandidatePair],
    constraints: &ConstraintSet,
    metric: MetricKind,
    round: usize,
    first_step: usize,
) -> BatchOutcome {
    let mut out = BatchOutcome::default();
    for pair in ordered {
        let ra = forest.find_unchecked(pair.a);
        let rb = forest.find_unchecked(pair.b);
        if ra == rb {
            out.skips.stale += 1;
            continue;
        }
        let (sa, sb) = (forest.size_of_root(ra), forest.size_of_root(rb));
        if constraints.kl2.is_some_and(|k| sa > k || sb > k) {
            out.skips.kl2 += 1;
            continue;
        }
        if constraints.kl3.is_some_and(|k| sa + sb > k) {
            out.skips.kl3 += 1;
            continue;
        }
        let (root, new_size) = forest.union(ra, rb).expect("roots differ");
        out.events.push(MergeEvent {
            step: first_step + out.events.len(),
            round,
            root_a: root,
            root_b: ra.max(rb),
            dist: metric.to_reported(pair.dist),
            new_size,
        });
        if constraints.kl1.is_some_and(|k| forest.count() < k) {
            out.stop = true;
            break;
        }
    }
    out
}

/// Eligible-pair reservoir filled by pipeline passes.
struct Reservoir {
    capacity: usize,
    pairs: Vec<CandidatePair>,
    cursor: usize,
    /// The last pass found fewer than `capacity` eligible pairs, so every
    /// eligible pair is in `pairs`.
    complete: bool,
}

impl Reservoir {
    fn new(capacity: usize) -> Self {
        Self { capacity, pairs: Vec::new(), cursor: 0, complete: false }
    }

    /// The `p` smallest pairs eligible against the current forest.
    fn next_batch(
        &mut self,
        p: usize,
        forest: &mut ClusterForest,
        dataset: &Dataset,
        config: &RunConfig,
        plan: &BlockPlan,
        threshold: Option<f64>,
        utilization: &mut UtilizationStats,
    ) -> Result<(Vec<CandidatePair>, usize)> {
        let constraints = config.constraints;
        let mut scans = 0;
        loop {
            let mut batch = Vec::with_capacity(p);
            while batch.len() < p && self.cursor < self.pairs.len() {
                let pair = self.pairs[self.cursor];
                self.cursor += 1;
                let ra = forest.find_unchecked(pair.a);
                let rb = forest.find_unchecked(pair.b);
                if ra != rb
                    && threshold.map_or(true, |t| pair.dist <= t)
                    && constraints.sizes_allow(forest.size_of_root(ra), forest.size_of_root(rb))
                {
                    batch.push(pair);
                }
            }
            if batch.len() == p || self.complete {
                return Ok((batch, scans));
            }
            let snapshot = EligibilitySnapshot::new(forest, constraints, config.metric)?;
            let (buffer, stats) = run_round(dataset, &snapshot, plan, self.capacity, &config.pipeline)?;
            utilization.absorb(stats);
            scans += 1;
            self.complete = !buffer.is_full();
            self.pairs = buffer.into_pairs();
            self.cursor = 0;
        }
    }
}

/// Runs the full clustering.
pub fn run(dataset: &Dataset, config: &RunConfig) -> Result<RunResult> {
    config.validate()?;
    let started = Instant::now();
    let n = dataset.len();
    let plan = config.plan(n)?;
    let constraints = config.constraints;
    let threshold = constraints.dmax.map(|d| config.metric.effective_threshold(d)).transpose()?;
    let p = config.pairs_per_batch;

    let mut forest = ClusterForest::new(n)?;
    let mut log = MergeLog::default();
    let mut reservoir = Reservoir::new(config.reservoir_size());
    let mut utilization = UtilizationStats::default();
    let mut round_stats = Vec::new();
    let mut skips = SkipCounts::default();
    let mut scans = 0;

    let stop = loop {
        if constraints.kl1.is_some_and(|k| forest.count() < k) {
            break StopReason::Kl1Reached;
        }
        if forest.count() == 1 {
            break StopReason::SingleCluster;
        }
        let (batch, round_scans) = reservoir.next_batch(
            p,
            &mut forest,
            dataset,
            config,
            &plan,
            threshold,
            &mut utilization,
        )?;
        scans += round_scans;
        if batch.is_empty() {
            break StopReason::NoEligiblePairs;
        }
        let round = round_stats.len() + 1;
        let ordered = order_batch(&batch, &forest, constraints.kl4);
        let priority = match constraints.kl4 {
            Some(k) => batch
                .iter()
                .filter(|q| forest.root_size(forest.root(q.a)).min(forest.root_size(forest.root(q.b))) < k)
                .count(),
            None => 0,
        };
        let outcome = process_batch(
            &mut forest,
            &ordered,
            &constraints,
            config.metric,
            round,
            log.len() + 1,
        );
        debug_assert!(!outcome.events.is_empty(), "a nonempty batch always merges");
        skips.add(outcome.skips);
        round_stats.push(RoundStats {
            round,
            pairs_selected: batch.len(),
            priority_pairs: priority,
            merges: outcome.events.len(),
            skips: outcome.skips,
            scans: round_scans,
        });
        log.events.extend(outcome.events);
        if outcome.stop {
            break StopReason::Kl1Reached;
        }
    };

    Ok(RunResult {
        merges: log,
        assignments: forest.assignments(),
        rounds: round_stats.len(),
        stop,
        clusters: forest.count(),
        skips,
        scans,
        wall_secs: started.elapsed().as_secs_f64(),
        round_stats,
        utilization,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn serial() -> PipelineConfig {
        PipelineConfig { managers: 1, workers_per_manager: 1, input_buffers: 2, output_buffers: 2, buffers_per_worker: 1 }
    }

    fn config(p: usize, constraints: ConstraintSet) -> RunConfig {
        RunConfig { constraints, pairs_per_batch: p, pipeline: serial(), ..Default::default() }
    }

    fn random_dataset(seed: u64, n: usize, d: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Dataset::new(n, d, (0..n * d).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap()
    }

    /// Pair key list for a point set, used to build hand-made batches.
    fn pair(ds: &Dataset, a: usize, b: usize) -> CandidatePair {
        CandidatePair::new(a, b, MetricKind::Euclidean.internal(ds.point(a), ds.point(b)))
    }

    #[test]
    fn order_batch_without_kl4_is_identity() {
        let forest = ClusterForest::new(4).unwrap();
        let batch = vec![CandidatePair::new(0, 1, 1.0), CandidatePair::new(2, 3, 2.0)];
        assert_eq!(order_batch(&batch, &forest, None), batch);
        assert_eq!(order_batch(&batch, &forest, Some(2)), batch);
    }

    #[test]
    fn order_batch_partitions_by_small_clusters() {
        // Clusters: {0}, {1}, {2..6} (size 5), {7..11} (size 5).
        let mut forest = ClusterForest::new(12).unwrap();
        for i in 3..7 {
            forest.union(2, i).unwrap();
        }
        for i in 8..12 {
            forest.union(7, i).unwrap();
        }
        let batch = vec![
            CandidatePair::new(2, 7, 0.5),
            CandidatePair::new(0, 3, 1.0),
            CandidatePair::new(4, 9, 1.5),
            CandidatePair::new(0, 1, 2.0),
            CandidatePair::new(1, 8, 3.0),
        ];
        // Direct statement of the rule: min size < 2 first, ascending within each group.
        let sizes = |i: usize| if i < 2 { 1 } else { 5 };
        let mut expected: Vec<_> = batch.iter().copied().filter(|p| sizes(p.a).min(sizes(p.b)) < 2).collect();
        expected.extend(batch.iter().copied().filter(|p| sizes(p.a).min(sizes(p.b)) >= 2));
        let got = order_batch(&batch, &forest, Some(2));
        assert_eq!(got, expected);
        let keys: Vec<_> = got.iter().map(|p| (p.a, p.b)).collect();
        assert_eq!(keys, vec![(0, 3), (0, 1), (1, 8), (2, 7), (4, 9)]);
    }

    #[test]
    fn two_points_merge_once() {
        let ds = Dataset::from_rows(&[[0.0, 0.0], [3.0, 4.0]]).unwrap();
        let result = run(&ds, &config(1, ConstraintSet::none())).unwrap();
        assert_eq!(result.merges.len(), 1);
        assert_eq!(result.merges.events[0].dist, 5.0);
        assert_eq!(result.stop, StopReason::SingleCluster);
        assert_eq!(result.assignments, vec![0, 0]);
    }

    #[test]
    fn transitive_absorption_skips_stale_pair() {
        let ds = Dataset::from_rows(&[[0.0], [1.0], [2.5]]).unwrap();
        let mut forest = ClusterForest::new(3).unwrap();
        let batch = [pair(&ds, 0, 1), pair(&ds, 1, 2), pair(&ds, 0, 2)];
        let out = process_batch(&mut forest, &batch, &ConstraintSet::none(), MetricKind::Euclidean, 1, 1);
        assert_eq!(out.events.len(), 2);
        assert_eq!((out.events[0].root_a, out.events[0].root_b), (0, 1));
        assert_eq!((out.events[1].root_a, out.events[1].root_b), (0, 2));
        assert_eq!(out.events[1].new_size, 3);
        assert_eq!(out.skips.stale, 1);
        assert_eq!(forest.count(), 1);
    }

    #[test]
    fn kl2_rechecked_against_live_sizes() {
        // Seven points on a line; gaps chosen so the order of pair keys is
        // (0,1) (1,2) (2,3) (4,5) (5,6) (3,4) ...
        let xs = [0.0, 1.0, 2.1, 3.3, 7.0, 8.5, 10.1];
        let rows: Vec<[f64; 1]> = xs.iter().map(|&x| [x]).collect();
        let ds = Dataset::from_rows(&rows).unwrap();
        let c = ConstraintSet { kl2: Some(3), ..Default::default() };
        let batch: Vec<_> = [(0, 1), (1, 2), (2, 3), (4, 5), (5, 6), (3, 4)]
            .iter()
            .map(|&(a, b)| pair(&ds, a, b))
            .collect();
        // Every pair is eligible against singletons.
        let mut forest = ClusterForest::new(7).unwrap();
        let out = process_batch(&mut forest, &batch, &c, MetricKind::Euclidean, 1, 1);
        // Hand trace:
        //   (0,1) -> {0,1} size 2
        //   (1,2) -> {0,1,2} size 3 (sizes 2 and 1, both <= 3)
        //   (2,3) -> {0..3} size 4 (sizes 3 and 1, both <= 3; overflow allowed)
        //   (4,5) -> {4,5} size 2
        //   (5,6) -> {4,5,6} size 3
        //   (3,4) -> skipped: cluster of 3 already has 4 > 3 points
        let merged: Vec<_> = out.events.iter().map(|e| (e.root_a, e.root_b, e.new_size)).collect();
        assert_eq!(merged, vec![(0, 1, 2), (0, 2, 3), (0, 3, 4), (4, 5, 2), (4, 6, 3)]);
        assert_eq!(out.skips.kl2, 1);
        assert_eq!(forest.count(), 2);
    }

    #[test]
    fn kl1_stops_processing_mid_batch() {
        let ds = random_dataset(1, 10, 2);
        let c = ConstraintSet { kl1: Some(8), ..Default::default() };
        let result = run(&ds, &config(64, c)).unwrap();
        assert_eq!(result.clusters, 7);
        assert_eq!(result.merges.len(), 3);
        assert_eq!(result.stop, StopReason::Kl1Reached);
    }

    #[test]
    fn kl1_above_n_does_no_work() {
        let ds = random_dataset(2, 10, 2);
        let c = ConstraintSet { kl1: Some(11), ..Default::default() };
        let result = run(&ds, &config(8, c)).unwrap();
        assert_eq!(result.rounds, 0);
        assert!(result.merges.is_empty());
        assert_eq!(result.stop, StopReason::Kl1Reached);
        assert_eq!(result.assignments, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn zero_dmax_merges_nothing() {
        let ds = random_dataset(3, 25, 3);
        let c = ConstraintSet { dmax: Some(0.0), ..Default::default() };
        let result = run(&ds, &config(8, c)).unwrap();
        assert!(result.merges.is_empty());
        assert_eq!(result.stop, StopReason::NoEligiblePairs);
    }

    #[test]
    fn single_point_dataset() {
        let ds = Dataset::from_rows(&[[1.0, 2.0]]).unwrap();
        let result = run(&ds, &config(4, ConstraintSet::none())).unwrap();
        assert_eq!(result.stop, StopReason::SingleCluster);
        assert_eq!(result.rounds, 0);
    }

    #[test]
    fn reservoir_matches_rescanning_every_round() {
        let ds = random_dataset(4, 150, 3);
        let constraints = [
            ConstraintSet::none(),
            ConstraintSet { kl2: Some(6), kl3: Some(9), ..Default::default() },
            ConstraintSet { kl4: Some(3), dmax: Some(0.2), ..Default::default() },
        ];
        for c in constraints {
            for p in [1, 5, 32] {
                let rescan = RunConfig { prefetch_pairs: Some(p), blocks: Some(4), ..config(p, c) };
                let reservoir = RunConfig { prefetch_pairs: Some(200), blocks: Some(3), ..config(p, c) };
                let a = run(&ds, &rescan).unwrap();
                let b = run(&ds, &reservoir).unwrap();
                assert_eq!(a.merges, b.merges, "{c:?} P={p}");
                assert_eq!(a.assignments, b.assignments);
                assert_eq!(a.rounds, b.rounds);
                assert!(b.scans <= a.scans);
            }
        }
    }

    #[test]
    fn every_round_merges_and_steps_increase() {
        let ds = random_dataset(5, 120, 4);
        let c = ConstraintSet { kl3: Some(20), kl4: Some(4), ..Default::default() };
        let result = run(&ds, &config(16, c)).unwrap();
        assert!(result.round_stats.iter().all(|r| r.merges >= 1));
        for (i, e) in result.merges.iter().enumerate() {
            assert_eq!(e.step, i + 1);
        }
        assert_eq!(result.merges.replay(120, result.merges.len()).unwrap(), result.assignments);
        assert_eq!(result.stop, StopReason::NoEligiblePairs);
    }

    #[test]
    fn invalid_config_is_rejected_before_work() {
        let ds = random_dataset(6, 5, 2);
        assert!(run(&ds, &config(0, ConstraintSet::none())).is_err());
        let c = ConstraintSet { kl2: Some(4), kl3: Some(3), ..Default::default() };
        assert!(matches!(run(&ds, &config(4, c)), Err(Error::InvalidConstraint(_))));
    }
}
