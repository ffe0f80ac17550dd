//! Brute-force reference implementations.
//!
//! Nothing here goes through block plans, the pipeline or the engine: every
//! pair is materialised, sorted and walked directly. Only the shared model
//! types and the metric are reused.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::MetricKind;
use crate::model::{CandidatePair, ClusterForest, ClusterView, ConstraintSet, Dataset, MergeEvent, MergeLog};
use crate::pairgen::{EligibilitySnapshot, TopPBuffer};

/// Largest dataset the oracle accepts.
pub const ORACLE_LIMIT: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleMerge {
    pub a: usize,
    pub b: usize,
    /// Reported distance.
    pub dist: f64,
    pub root_a: usize,
    pub root_b: usize,
    pub size_a: usize,
    pub size_b: usize,
    pub new_size: usize,
    /// 1-based batch ordinal; always 1 for the unbatched oracle.
    pub round: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub merges: Vec<OracleMerge>,
    pub assignments: Vec<usize>,
}

impl OracleResult {
    /// The merges in the engine's log format.
    pub fn merge_log(&self) -> MergeLog {
        let events = self
            .merges
            .iter()
            .enumerate()
            .map(|(i, m)| MergeEvent {
                step: i + 1,
                round: m.round,
                root_a: m.root_a.min(m.root_b),
                root_b: m.root_a.max(m.root_b),
                dist: m.dist,
                new_size: m.new_size,
            })
            .collect();
        MergeLog { events }
    }
}

fn guard(dataset: &Dataset) -> Result<()> {
    if dataset.len() > ORACLE_LIMIT {
        return Err(Error::OracleTooLarge { n: dataset.len(), limit: ORACLE_LIMIT });
    }
    Ok(())
}

fn key_order(x: &CandidatePair, y: &CandidatePair) -> std::cmp::Ordering {
    x.dist
        .partial_cmp(&y.dist)
        .expect("finite distances")
        .then_with(|| x.a.cmp(&y.a))
        .then_with(|| x.b.cmp(&y.b))
}

/// Every point pair with its internal distance, ascending by key.
fn all_pairs_sorted(dataset: &Dataset, metric: MetricKind) -> Vec<CandidatePair> {
    let n = dataset.len();
    let mut pairs = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for a in 0..n {
        for b in a + 1..n {
            let dist = metric.internal(dataset.point(a), dataset.point(b));
            pairs.push(CandidatePair { a, b, dist });
        }
    }
    pairs.sort_by(key_order);
    pairs
}

struct Walker {
    forest: ClusterForest,
    constraints: ConstraintSet,
    threshold: Option<f64>,
    metric: MetricKind,
    merges: Vec<OracleMerge>,
}

enum Step {
    Merged,
    Skipped,
    Stop,
}

impl Walker {
    fn new(n: usize, constraints: ConstraintSet, metric: MetricKind) -> Result<Self> {
        constraints.validate()?;
        let threshold = match constraints.dmax {
            Some(d) => Some(metric.effective_threshold(d)?),
            None => None,
        };
        Ok(Self { forest: ClusterForest::new(n)?, constraints, threshold, metric, merges: Vec::new() })
    }

    fn below_kl1(&self) -> bool {
        matches!(self.constraints.kl1, Some(k) if self.forest.count() < k)
    }

    fn allowed(&mut self, pair: &CandidatePair) -> bool {
        let ra = self.forest.find(pair.a).expect("in range");
        let rb = self.forest.find(pair.b).expect("in range");
        if ra == rb {
            return false;
        }
        if let Some(t) = self.threshold {
            if pair.dist > t {
                return false;
            }
        }
        let sa = self.forest.root_size(ra);
        let sb = self.forest.root_size(rb);
        if let Some(kl2) = self.constraints.kl2 {
            if sa > kl2 || sb > kl2 {
                return false;
            }
        }
        if let Some(kl3) = self.constraints.kl3 {
            if sa + sb > kl3 {
                return false;
            }
        }
        true
    }

    fn step(&mut self, pair: &CandidatePair, round: usize) -> Step {
        if !self.allowed(pair) {
            return Step::Skipped;
        }
        let ra = self.forest.find(pair.a).expect("in range");
        let rb = self.forest.find(pair.b).expect("in range");
        let (size_a, size_b) = (self.forest.root_size(ra), self.forest.root_size(rb));
        let (_, new_size) = self.forest.union(ra, rb).expect("distinct roots");
        self.merges.push(OracleMerge {
            a: pair.a,
            b: pair.b,
            dist: self.metric.to_reported(pair.dist),
            root_a: ra,
            root_b: rb,
            size_a,
            size_b,
            new_size,
            round,
        });
        if self.below_kl1() {
            Step::Stop
        } else {
            Step::Merged
        }
    }

    fn finish(self) -> OracleResult {
        let n = self.forest.len();
        let mut forest = self.forest;
        let assignments = (0..n).map(|i| forest.find(i).expect("in range")).collect();
        OracleResult { merges: self.merges, assignments }
    }
}

/// Single linkage by definition: every pair in ascending key order, with
/// cluster identity and kl2/kl3/dmax checked against the live partition and a
/// stop as soon as fewer than kl1 clusters remain. `kl4` only reorders pairs
/// within a batch and has no effect on this unbatched walk.
pub fn oracle_single_linkage(
    dataset: &Dataset,
    constraints: &ConstraintSet,
    metric: MetricKind,
) -> Result<OracleResult> {
    guard(dataset)?;
    let mut walker = Walker::new(dataset.len(), *constraints, metric)?;
    if walker.below_kl1() {
        return Ok(walker.finish());
    }
    for pair in &all_pairs_sorted(dataset, metric) {
        if walker.forest.count() == 1 {
            break;
        }
        if let Step::Stop = walker.step(pair, 1) {
            break;
        }
    }
    Ok(walker.finish())
}

/// Batched variant: each batch is the first `p` pairs still allowed by the
/// live partition; with `kl4` set, pairs touching a cluster smaller than
/// `kl4` (sizes at batch start) move ahead of the rest, keeping key order
/// within both groups.
pub fn oracle_batched(
    dataset: &Dataset,
    constraints: &ConstraintSet,
    metric: MetricKind,
    p: usize,
) -> Result<OracleResult> {
    guard(dataset)?;
    if p == 0 {
        return Err(Error::InvalidConfig("batch size must be at least 1".into()));
    }
    let mut walker = Walker::new(dataset.len(), *constraints, metric)?;
    let mut remaining = all_pairs_sorted(dataset, metric);
    let mut start = 0;
    let mut round = 0;
    while !walker.below_kl1() && walker.forest.count() > 1 {
        let mut batch = Vec::new();
        while start < remaining.len() && batch.len() < p {
            let pair = remaining[start];
            start += 1;
            if walker.allowed(&pair) {
                batch.push(pair);
            }
        }
        if batch.is_empty() {
            break;
        }
        round += 1;
        if let Some(kl4) = constraints.kl4 {
            let small: Vec<bool> = batch
                .iter()
                .map(|q| {
                    let sa = walker.forest.cluster_size(q.a).expect("in range");
                    let sb = walker.forest.cluster_size(q.b).expect("in range");
                    sa < kl4 || sb < kl4
                })
                .collect();
            let mut order: Vec<usize> = (0..batch.len()).collect();
            order.sort_by_key(|&i| (!small[i], i));
            batch = order.into_iter().map(|i| batch[i]).collect();
        }
        let mut stop = false;
        for pair in &batch {
            if let Step::Stop = walker.step(pair, round) {
                stop = true;
                break;
            }
        }
        if stop {
            break;
        }
    }
    remaining.clear();
    Ok(walker.finish())
}

/// Enumerate, filter against the snapshot, sort, truncate.
pub fn oracle_top_p(
    dataset: &Dataset,
    snapshot: &EligibilitySnapshot,
    p: usize,
) -> Result<TopPBuffer> {
    guard(dataset)?;
    let metric = snapshot.metric();
    let c = snapshot.constraints();
    let mut eligible: Vec<CandidatePair> = all_pairs_sorted(dataset, metric)
        .into_iter()
        .filter(|q| {
            let (ra, rb) = (snapshot.root(q.a), snapshot.root(q.b));
            let (sa, sb) = (snapshot.root_size(ra), snapshot.root_size(rb));
            ra != rb
                && snapshot.threshold().map_or(true, |t| q.dist <= t)
                && c.kl2.map_or(true, |k| sa <= k && sb <= k)
                && c.kl3.map_or(true, |k| sa + sb <= k)
        })
        .collect();
    eligible.truncate(p);
    Ok(TopPBuffer::from_pairs(p, eligible))
}
