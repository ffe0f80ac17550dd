//! Candidate pair generation.
//!
//! The point range is cut into `B` contiguous blocks. Every block pair
//! `(i, j)` with `i <= j` is one task; together the tasks cover every point
//! pair exactly once. A task scans its pairs and keeps the `P` smallest
//! eligible ones in a [`TopPBuffer`]; buffers from different tasks are
//! combined with [`reduce_topp`], which is associative and commutative
//! because [`PairKey`](crate::model::PairKey) is a total order.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::MetricKind;
use crate::model::{CandidatePair, ClusterForest, ClusterView, ConstraintSet, Dataset};

/// Target block length used when no block count is configured.
pub const DEFAULT_BLOCK_POINTS: usize = 4096;

/// One unit of scan work: all pairs between block `left` and block `right`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockTask {
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPlan {
    n: usize,
    ranges: Vec<Range<usize>>,
    tasks: Vec<BlockTask>,
}

/// Splits `n` points into `blocks` contiguous ranges (clamped to `n`) and
/// lists every block pair `(i, j)` with `i <= j`.
pub fn plan_blocks(n: usize, blocks: usize) -> Result<BlockPlan> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if blocks == 0 {
        return Err(Error::InvalidConfig("block count must be at least 1".into()));
    }
    let b = blocks.min(n);
    let (base, extra) = (n / b, n % b);
    let mut ranges = Vec::with_capacity(b);
    let mut start = 0;
    for i in 0..b {
        let len = base + usize::from(i < extra);
        ranges.push(start..start + len);
        start += len;
    }
    let mut tasks = Vec::with_capacity(b * (b + 1) / 2);
    for left in 0..b {
        for right in left..b {
            tasks.push(BlockTask { left, right });
        }
    }
    Ok(BlockPlan { n, ranges, tasks })
}

/// Block count giving roughly [`DEFAULT_BLOCK_POINTS`] points per block.
pub fn auto_blocks(n: usize) -> usize {
    n.div_ceil(DEFAULT_BLOCK_POINTS).max(1)
}

impl BlockPlan {
    pub fn auto(n: usize) -> Result<Self> {
        plan_blocks(n, auto_blocks(n))
    }

    pub fn points(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> usize {
        self.ranges.len()
    }

    pub fn range(&self, block: usize) -> Range<usize> {
        self.ranges[block].clone()
    }

    pub fn tasks(&self) -> &[BlockTask] {
        &self.tasks
    }

    /// Number of point pairs covered by `task`.
    pub fn pair_count(&self, task: BlockTask) -> usize {
        let l = self.ranges[task.left].len();
        if task.left == task.right {
            l * l.saturating_sub(1) / 2
        } else {
            l * self.ranges[task.right].len()
        }
    }
}

/// The `capacity` smallest pairs offered so far, ascending by key.
#[derive(Debug, Clone, PartialEq)]
pub struct TopPBuffer {
    capacity: usize,
    pairs: Vec<CandidatePair>,
}

impl TopPBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, pairs: Vec::new() }
    }

    /// Sorts and truncates an arbitrary pair list.
    pub fn from_pairs(capacity: usize, mut pairs: Vec<CandidatePair>) -> Self {
        pairs.sort_unstable_by(|x, y| x.cmp_key(y));
        pairs.truncate(capacity);
        Self { capacity, pairs }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.pairs.len() >= self.capacity
    }

    pub fn pairs(&self) -> &[CandidatePair] {
        &self.pairs
    }

    pub fn into_pairs(self) -> Vec<CandidatePair> {
        self.pairs
    }

    pub fn last(&self) -> Option<&CandidatePair> {
        self.pairs.last()
    }
}

/// Sorted merge of two buffers, truncated to the `p` smallest keys.
pub fn reduce_topp(lhs: TopPBuffer, rhs: TopPBuffer, p: usize) -> TopPBuffer {
    if rhs.pairs.is_empty() {
        let mut out = lhs;
        out.pairs.truncate(p);
        out.capacity = p;
        return out;
    }
    if lhs.pairs.is_empty() {
        let mut out = rhs;
        out.pairs.truncate(p);
        out.capacity = p;
        return out;
    }
    let total = (lhs.pairs.len() + rhs.pairs.len()).min(p);
    let mut merged = Vec::with_capacity(total);
    let (mut x, mut y) = (lhs.pairs.into_iter().peekable(), rhs.pairs.into_iter().peekable());
    while merged.len() < total {
        let take_left = match (x.peek(), y.peek()) {
            (Some(l), Some(r)) => l.cmp_key(r).is_lt(),
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };
        let next = if take_left { x.next() } else { y.next() };
        merged.extend(next);
    }
    TopPBuffer { capacity: p, pairs: merged }
}

/// Frozen per-round view of cluster membership plus the active constraints,
/// shared read-only by all scan tasks of a round.
#[derive(Debug, Clone)]
pub struct EligibilitySnapshot {
    roots: Vec<usize>,
    sizes: Vec<usize>,
    constraints: ConstraintSet,
    metric: MetricKind,
    threshold: Option<f64>,
}

impl EligibilitySnapshot {
    pub fn new(
        forest: &ClusterForest,
        constraints: ConstraintSet,
        metric: MetricKind,
    ) -> Result<Self> {
        constraints.validate()?;
        let threshold = constraints.dmax.map(|d| metric.effective_threshold(d)).transpose()?;
        let n = forest.len();
        let roots = forest.assignments();
        let mut sizes = vec![0; n];
        for &r in &roots {
            sizes[r] += 1;
        }
        Ok(Self { roots, sizes, constraints, metric, threshold })
    }

    /// Snapshot of all-singleton clusters.
    pub fn singletons(n: usize, constraints: ConstraintSet, metric: MetricKind) -> Result<Self> {
        Self::new(&ClusterForest::new(n)?, constraints, metric)
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }

    pub fn metric(&self) -> MetricKind {
        self.metric
    }

    /// Internal distance threshold derived from `dmax`, if set.
    pub fn threshold(&self) -> Option<f64> {
        self.threshold
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn pair_eligible(&self, a: usize, b: usize, dist: f64) -> bool {
        pair_eligible(self, &self.constraints, self.threshold, a, b, dist)
    }

    /// Whether `point` may take part in any merge (kl2 not already exceeded).
    #[inline]
    fn point_active(&self, point: usize) -> bool {
        self.constraints.kl2.map_or(true, |kl2| self.sizes[self.roots[point]] <= kl2)
    }

    fn uniform_root(&self, range: Range<usize>) -> Option<usize> {
        let slice = &self.roots[range];
        let first = *slice.first()?;
        slice.iter().all(|&r| r == first).then_some(first)
    }
}

impl ClusterView for EligibilitySnapshot {
    #[inline]
    fn root(&self, i: usize) -> usize {
        self.roots[i]
    }

    #[inline]
    fn root_size(&self, root: usize) -> usize {
        self.sizes[root]
    }
}

/// A pair may be selected when its points sit in different clusters, it is
/// within the distance threshold, and the kl2/kl3 size rules allow the join.
#[inline]
pub fn pair_eligible<V: ClusterView + ?Sized>(
    view: &V,
    constraints: &ConstraintSet,
    threshold: Option<f64>,
    a: usize,
    b: usize,
    dist: f64,
) -> bool {
    let (ra, rb) = (view.root(a), view.root(b));
    if ra == rb {
        return false;
    }
    if threshold.is_some_and(|t| dist > t) {
        return false;
    }
    constraints.sizes_allow(view.root_size(ra), view.root_size(rb))
}

/// Bounded selection of the smallest keys: candidates accumulate up to
/// twice the capacity, then a partial selection drops the upper half.
struct Selector {
    capacity: usize,
    pairs: Vec<CandidatePair>,
    worst: Option<CandidatePair>,
}

impl Selector {
    fn new(capacity: usize) -> Self {
        Self { capacity, pairs: Vec::new(), worst: None }
    }

    /// Distances above this can never enter the buffer.
    #[inline]
    fn cutoff(&self) -> f64 {
        self.worst.map_or(f64::INFINITY, |w| w.dist)
    }

    #[inline]
    fn offer(&mut self, pair: CandidatePair) {
        if let Some(w) = &self.worst {
            if !pair.cmp_key(w).is_lt() {
                return;
            }
        }
        self.pairs.push(pair);
        if self.pairs.len() >= 2 * self.capacity {
            self.compact();
        }
    }

    fn compact(&mut self) {
        let keep = self.capacity;
        self.pairs.select_nth_unstable_by(keep - 1, |x, y| x.cmp_key(y));
        self.pairs.truncate(keep);
        self.worst = Some(self.pairs[keep - 1]);
    }

    fn finish(self) -> TopPBuffer {
        TopPBuffer::from_pairs(self.capacity, self.pairs)
    }
}

/// Scans every pair of `task` and returns the `p` smallest eligible ones.
///
/// Pair storage stays within `2p` entries. Rows whose point shares the root
/// of an entire opposite block are skipped, which removes most work once
/// clusters grow large.
pub fn scan_block_pair(
    dataset: &Dataset,
    snapshot: &EligibilitySnapshot,
    plan: &BlockPlan,
    task: BlockTask,
    p: usize,
) -> TopPBuffer {
    assert!(p >= 1, "pairs-per-batch must be at least 1");
    let mut scan = RowScanner::new(dataset, snapshot, p);
    let left = plan.range(task.left);
    if task.left == task.right {
        if snapshot.uniform_root(left.clone()).is_some() {
            return TopPBuffer::new(p);
        }
        for a in left.clone() {
            scan.row(a, a + 1..left.end);
        }
    } else {
        let right = plan.range(task.right);
        let uniform_left = snapshot.uniform_root(left.clone());
        let uniform_right = snapshot.uniform_root(right.clone());
        if uniform_left.is_some() && uniform_left == uniform_right {
            return TopPBuffer::new(p);
        }
        // Iterate rows over the block whose points can be skipped wholesale.
        let (rows, cols, skip_root) = match (uniform_left, uniform_right) {
            (_, Some(r)) => (left, right, Some(r)),
            (Some(r), None) => (right, left, Some(r)),
            (None, None) => (left, right, None),
        };
        for a in rows {
            if skip_root == Some(snapshot.roots[a]) {
                continue;
            }
            scan.row(a, cols.clone());
        }
    }
    scan.finish()
}

struct RowScanner<'a> {
    dataset: &'a Dataset,
    snapshot: &'a EligibilitySnapshot,
    selector: Selector,
    limit: f64,
    acc: Vec<f64>,
}

impl<'a> RowScanner<'a> {
    fn new(dataset: &'a Dataset, snapshot: &'a EligibilitySnapshot, p: usize) -> Self {
        Self {
            dataset,
            snapshot,
            selector: Selector::new(p),
            limit: snapshot.threshold.unwrap_or(f64::INFINITY),
            acc: Vec::new(),
        }
    }

    /// Offers all pairs between point `a` and the points in `cols`.
    fn row(&mut self, a: usize, cols: Range<usize>) {
        if cols.is_empty() || !self.snapshot.point_active(a) {
            return;
        }
        let snap = self.snapshot;
        let metric = snap.metric;
        let x = self.dataset.point(a);
        self.acc.clear();
        self.acc.resize(cols.len(), 0.0);
        for (k, &xk) in x.iter().enumerate() {
            metric.accumulate(&mut self.acc, xk, &self.dataset.column(k)[cols.clone()]);
        }
        let root_a = snap.roots[a];
        let size_a = snap.sizes[root_a];
        let constraints = snap.constraints;
        let mut cutoff = self.limit.min(self.selector.cutoff());
        for (offset, &dist) in self.acc.iter().enumerate() {
            if dist > cutoff {
                continue;
            }
            let b = cols.start + offset;
            let root_b = snap.roots[b];
            if root_b == root_a || !constraints.sizes_allow(size_a, snap.sizes[root_b]) {
                continue;
            }
            self.selector.offer(CandidatePair::new(a, b, dist));
            cutoff = self.limit.min(self.selector.cutoff());
        }
    }

    fn finish(self) -> TopPBuffer {
        self.selector.finish()
    }
}

/// Serial reference route: scans every task of `plan` and reduces the results.
pub fn global_top_p(
    dataset: &Dataset,
    snapshot: &EligibilitySnapshot,
    plan: &BlockPlan,
    p: usize,
) -> TopPBuffer {
    plan.tasks()
        .iter()
        .map(|&task| scan_block_pair(dataset, snapshot, plan, task, p))
        .fold(TopPBuffer::new(p), |acc, buf| reduce_topp(acc, buf, p))
}
