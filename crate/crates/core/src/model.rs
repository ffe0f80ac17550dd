//! Shared domain types: the point matrix, candidate pairs and their total
//! order, the union-find cluster forest, constraint settings and merge events.

use std::borrow::Cow;
use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Immutable n x d feature matrix.
///
/// Values are kept twice: row-major for per-point access and feature-major
/// (one contiguous column per feature) for the vectorised block scans.
#[derive(Debug, Clone)]
pub struct Dataset {
    n: usize,
    d: usize,
    rows: Vec<f64>,
    columns: Vec<f64>,
    ids: Option<Vec<String>>,
    lookup: HashMap<String, usize>,
}

impl Dataset {
    /// Builds a dataset from row-major values. Point ids default to row order.
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if d == 0 {
            return Err(Error::NoFeatures);
        }
        if values.len() != n * d {
            return Err(Error::ShapeMismatch { n, d, len: values.len() });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                point: pos / d,
                feature: pos % d,
                value: values[pos],
            });
        }
        let mut columns = vec![0.0; n * d];
        for (i, row) in values.chunks_exact(d).enumerate() {
            for (k, &v) in row.iter().enumerate() {
                columns[k * n + i] = v;
            }
        }
        Ok(Self { n, d, rows: values, columns, ids: None, lookup: HashMap::new() })
    }

    /// Builds a dataset from a slice of equally sized rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(n * d);
        for row in rows {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::DimensionMismatch { left: d, right: row.len() });
            }
            values.extend_from_slice(row);
        }
        Self::new(n, d, values)
    }

    /// Attaches explicit point identifiers.
    pub fn with_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n {
            return Err(Error::IdCountMismatch { n: self.n, got: ids.len() });
        }
        let mut lookup = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if lookup.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateIdValue(id.clone()));
            }
        }
        self.ids = Some(ids);
        self.lookup = lookup;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.rows[i * self.d..(i + 1) * self.d]
    }

    /// Row-major value matrix.
    pub fn values(&self) -> &[f64] {
        &self.rows
    }

    /// Feature `k` for all points, in point order.
    pub fn column(&self, k: usize) -> &[f64] {
        &self.columns[k * self.n..(k + 1) * self.n]
    }

    pub fn id(&self, i: usize) -> Cow<'_, str> {
        match &self.ids {
            Some(ids) => Cow::Borrowed(ids[i].as_str()),
            None => Cow::Owned(i.to_string()),
        }
    }

    pub fn has_explicit_ids(&self) -> bool {
        self.ids.is_some()
    }

    /// Maps a point identifier back to its row index.
    pub fn index_of(&self, id: &str) -> Option<usize> {
        match &self.ids {
            Some(_) => self.lookup.get(id).copied(),
            None => id.parse::<usize>().ok().filter(|&i| i < self.n),
        }
    }
}

/// Two point indices with `a < b` and their internal distance value.
///
/// For euclidean runs the stored distance is squared; see
/// [`MetricKind::to_reported`](crate::metric::MetricKind::to_reported).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub a: usize,
    pub b: usize,
    pub dist: f64,
}

impl CandidatePair {
    /// Orients the pair canonically.
    pub fn new(i: usize, j: usize, dist: f64) -> Self {
        debug_assert!(i != j);
        if i < j {
            Self { a: i, b: j, dist }
        } else {
            Self { a: j, b: i, dist }
        }
    }

    pub fn key(&self) -> PairKey {
        PairKey { dist: self.dist, a: self.a, b: self.b }
    }

    /// Lexicographic `(dist, a, b)` comparison.
    #[inline]
    pub fn cmp_key(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.a.cmp(&other.a))
            .then(self.b.cmp(&other.b))
    }
}

/// Total order over candidate pairs: distance, then first index, then second.
#[derive(Debug, Clone, Copy)]
pub struct PairKey {
    pub dist: f64,
    pub a: usize,
    pub b: usize,
}

impl PartialEq for PairKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for PairKey {}

impl PartialOrd for PairKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PairKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.a.cmp(&other.a))
            .then(self.b.cmp(&other.b))
    }
}

/// Read access to a partition of points into clusters.
pub trait ClusterView {
    fn root(&self, i: usize) -> usize;
    /// Size of the cluster rooted at `root`.
    fn root_size(&self, root: usize) -> usize;
}

/// Union-find forest over point indices.
///
/// The root of a cluster is always its smallest member index, so labels do
/// not depend on the order in which unions were applied.
#[derive(Debug, Clone)]
pub struct ClusterForest {
    parent: Vec<usize>,
    size: Vec<usize>,
    count: usize,
}

impl ClusterForest {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        Ok(Self { parent: (0..n).collect(), size: vec![1; n], count: n })
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Number of live clusters.
    pub fn count(&self) -> usize {
        self.count
    }

    fn check(&self, i: usize) -> Result<()> {
        if i < self.parent.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index: i, n: self.parent.len() })
        }
    }

    /// Root of `i`, halving the path on the way.
    pub fn find(&mut self, i: usize) -> Result<usize> {
        self.check(i)?;
        Ok(self.find_unchecked(i))
    }

    #[inline]
    pub(crate) fn find_unchecked(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            let grandparent = self.parent[self.parent[i]];
            self.parent[i] = grandparent;
            i = grandparent;
        }
        i
    }

    /// Root of `i` without path compression.
    #[inline]
    pub fn root_of(&self, mut i: usize) -> usize {
        while self.parent[i] != i {
            i = self.parent[i];
        }
        i
    }

    /// Size of the cluster containing `i`.
    pub fn cluster_size(&mut self, i: usize) -> Result<usize> {
        let r = self.find(i)?;
        Ok(self.size[r])
    }

    /// Joins the clusters of `i` and `j`; the smaller root survives.
    /// Returns the surviving root and the new cluster size.
    pub fn union(&mut self, i: usize, j: usize) -> Result<(usize, usize)> {
        self.check(i)?;
        self.check(j)?;
        let ri = self.find_unchecked(i);
        let rj = self.find_unchecked(j);
        if ri == rj {
            return Err(Error::SameCluster(i, j));
        }
        let (keep, absorb) = if ri < rj { (ri, rj) } else { (rj, ri) };
        self.parent[absorb] = keep;
        self.size[keep] += self.size[absorb];
        self.count -= 1;
        Ok((keep, self.size[keep]))
    }

    /// Point -> root label for every point.
    pub fn assignments(&self) -> Vec<usize> {
        // Parents always carry a smaller index than their children, so one
        // ascending pass resolves every root.
        let mut roots = Vec::with_capacity(self.parent.len());
        for (i, &p) in self.parent.iter().enumerate() {
            let r = if p == i { i } else { roots[p] };
            roots.push(r);
        }
        roots
    }

    pub(crate) fn size_of_root(&self, root: usize) -> usize {
        self.size[root]
    }
}

impl ClusterView for ClusterForest {
    #[inline]
    fn root(&self, i: usize) -> usize {
        self.root_of(i)
    }

    #[inline]
    fn root_size(&self, root: usize) -> usize {
        self.size[root]
    }
}

/// Optional merge constraints.
///
/// * `kl1` - stop once fewer than `kl1` clusters remain.
/// * `kl2` - never join a cluster that already has more than `kl2` points.
/// * `kl3` - never join two clusters whose combined size exceeds `kl3`.
/// * `kl4` - within a batch, pairs touching a cluster smaller than `kl4` go first.
/// * `dmax` - never join across a distance greater than `dmax`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub kl1: Option<usize>,
    pub kl2: Option<usize>,
    pub kl3: Option<usize>,
    pub kl4: Option<usize>,
    pub dmax: Option<f64>,
}

impl ConstraintSet {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if let (Some(kl2), Some(kl3)) = (self.kl2, self.kl3) {
            if kl3 <= kl2 {
                return Err(Error::InvalidConstraint(format!(
                    "kl3 ({kl3}) must be greater than kl2 ({kl2})"
                )));
            }
        }
        if let Some(dmax) = self.dmax {
            if !(dmax >= 0.0) || !dmax.is_finite() {
                return Err(Error::InvalidConstraint(format!(
                    "dmax must be a finite nonnegative number, got {dmax}"
                )));
            }
        }
        Ok(())
    }

    /// True when the kl2/kl3 size rules allow joining clusters of these sizes.
    #[inline]
    pub fn sizes_allow(&self, size_a: usize, size_b: usize) -> bool {
        if let Some(kl2) = self.kl2 {
            if size_a > kl2 || size_b > kl2 {
                return false;
            }
        }
        if let Some(kl3) = self.kl3 {
            if size_a + size_b > kl3 {
                return false;
            }
        }
        true
    }

    pub fn is_unconstrained(&self) -> bool {
        *self == Self::default()
    }
}

/// One union performed by the engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeEvent {
    /// 1-based merge ordinal.
    pub step: usize,
    /// 1-based round ordinal.
    pub round: usize,
    pub root_a: usize,
    pub root_b: usize,
    /// Merge distance in metric units (square root applied for euclidean).
    pub dist: f64,
    pub new_size: usize,
}

/// Ordered merge history. Replaying it from singletons reproduces the
/// partition at any cut.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MergeLog {
    pub events: Vec<MergeEvent>,
}

impl MergeLog {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MergeEvent> {
        self.events.iter()
    }

    /// Point -> root labels after applying the first `steps` merges.
    pub fn replay(&self, n: usize, steps: usize) -> Result<Vec<usize>> {
        let mut forest = ClusterForest::new(n)?;
        for event in self.events.iter().take(steps) {
            forest.union(event.root_a, event.root_b)?;
        }
        Ok(forest.assignments())
    }

    /// Partition with `k` clusters, if the log reaches that level.
    pub fn cut(&self, n: usize, k: usize) -> Option<Vec<usize>> {
        let steps = n.checked_sub(k)?;
        if k == 0 || steps > self.events.len() {
            return None;
        }
        self.replay(n, steps).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Naive partition: explicit label per point, relabel on union.
    struct LabelArray {
        label: Vec<usize>,
    }

    impl LabelArray {
        fn new(n: usize) -> Self {
            Self { label: (0..n).collect() }
        }

        fn union(&mut self, i: usize, j: usize) {
            let (li, lj) = (self.label[i], self.label[j]);
            let keep = li.min(lj);
            for l in &mut self.label {
                if *l == li || *l == lj {
                    *l = keep;
                }
            }
        }

        fn size(&self, i: usize) -> usize {
            self.label.iter().filter(|&&l| l == self.label[i]).count()
        }
    }

    #[test]
    fn fresh_forest() {
        let mut f = ClusterForest::new(5).unwrap();
        assert_eq!(f.count(), 5);
        assert_eq!(f.find(3).unwrap(), 3);
        assert_eq!(f.cluster_size(3).unwrap(), 1);
        assert_eq!(ClusterForest::new(1).unwrap().count(), 1);
        assert!(matches!(ClusterForest::new(0), Err(Error::EmptyDataset)));
    }

    #[test]
    fn fresh_forest_matches_label_array() {
        let f = ClusterForest::new(100).unwrap();
        let oracle = LabelArray::new(100);
        assert_eq!(f.assignments(), oracle.label);
    }

    #[test]
    fn find_rejects_out_of_range() {
        let mut f = ClusterForest::new(3).unwrap();
        assert!(matches!(f.find(3), Err(Error::IndexOutOfRange { index: 3, n: 3 })));
        assert!(f.union(0, 9).is_err());
    }

    #[test]
    fn union_keeps_smaller_root() {
        let mut f = ClusterForest::new(6).unwrap();
        assert_eq!(f.union(4, 2).unwrap(), (2, 2));
        assert_eq!(f.count(), 5);
        assert_eq!(f.find(4).unwrap(), 2);

        let mut g = ClusterForest::new(3).unwrap();
        g.union(0, 1).unwrap();
        assert_eq!(g.union(1, 2).unwrap(), (0, 3));
        assert_eq!(g.find(0).unwrap(), g.find(1).unwrap());
    }

    #[test]
    fn union_of_same_cluster_is_rejected() {
        let mut f = ClusterForest::new(3).unwrap();
        f.union(0, 1).unwrap();
        assert!(matches!(f.union(1, 0), Err(Error::SameCluster(1, 0))));
        assert_eq!(f.count(), 2);
    }

    #[test]
    fn random_unions_match_label_array() {
        let n = 200;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut f = ClusterForest::new(n).unwrap();
        let mut oracle = LabelArray::new(n);
        let mut last_size = vec![1usize; n];
        for _ in 0..1000 {
            let i = rng.gen_range(0..n);
            let j = rng.gen_range(0..n);
            if oracle.label[i] == oracle.label[j] {
                assert!(f.union(i, j).is_err());
                continue;
            }
            let (root, size) = f.union(i, j).unwrap();
            oracle.union(i, j);
            assert_eq!(root, oracle.label[i]);
            assert_eq!(size, oracle.size(i));
            for p in 0..n {
                assert_eq!(f.find(p).unwrap(), oracle.label[p]);
                let s = f.cluster_size(p).unwrap();
                assert!(s >= last_size[p]);
                last_size[p] = s;
            }
            let roots: Vec<usize> = (0..n).filter(|&p| f.root_of(p) == p).collect();
            assert_eq!(roots.len(), f.count());
            assert_eq!(roots.iter().map(|&r| f.root_size(r)).sum::<usize>(), n);
        }
    }

    #[test]
    fn labels_do_not_depend_on_union_order() {
        let edges = [(5, 3), (1, 4), (3, 1), (7, 6), (0, 7)];
        let mut forward = ClusterForest::new(8).unwrap();
        let mut backward = ClusterForest::new(8).unwrap();
        for &(i, j) in &edges {
            forward.union(i, j).unwrap();
        }
        for &(i, j) in edges.iter().rev() {
            backward.union(j, i).unwrap();
        }
        assert_eq!(forward.assignments(), backward.assignments());
        assert_eq!(forward.assignments(), vec![0, 1, 2, 1, 1, 1, 0, 0]);
    }

    #[test]
    fn dataset_validation() {
        assert!(matches!(Dataset::new(0, 2, vec![]), Err(Error::EmptyDataset)));
        assert!(matches!(Dataset::new(1, 0, vec![]), Err(Error::NoFeatures)));
        assert!(matches!(
            Dataset::new(2, 1, vec![0.0, f64::NAN]),
            Err(Error::NonFiniteValue { point: 1, feature: 0, .. })
        ));
        let ds = Dataset::from_rows(&[[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]]).unwrap();
        assert_eq!(ds.point(1), &[2.0, 3.0]);
        assert_eq!(ds.column(1), &[1.0, 3.0, 5.0]);
        assert_eq!(ds.id(2), "2");
        assert_eq!(ds.index_of("2"), Some(2));
        let ids = vec!["a".to_string(), "b".into(), "a".into()];
        assert!(matches!(ds.clone().with_ids(ids), Err(Error::DuplicateIdValue(_))));
        let ds = ds.with_ids(vec!["x".into(), "y".into(), "z".into()]).unwrap();
        assert_eq!(ds.index_of("z"), Some(2));
        assert_eq!(ds.id(0), "x");
    }

    #[test]
    fn pair_key_is_lexicographic() {
        let p = CandidatePair::new(3, 1, 2.0);
        assert_eq!((p.a, p.b), (1, 3));
        let q = CandidatePair::new(0, 4, 2.0);
        let r = CandidatePair::new(0, 2, 1.5);
        let mut v = vec![p, q, r];
        v.sort_by(|x, y| x.cmp_key(y));
        assert_eq!(v, vec![r, q, p]);
        assert!(p.key() > q.key());
    }

    #[test]
    fn constraint_validation() {
        let bad = ConstraintSet { kl2: Some(5), kl3: Some(5), ..Default::default() };
        assert!(bad.validate().is_err());
        let neg = ConstraintSet { dmax: Some(-1.0), ..Default::default() };
        assert!(neg.validate().is_err());
        let ok = ConstraintSet { kl2: Some(5), kl3: Some(6), dmax: Some(0.0), ..Default::default() };
        assert!(ok.validate().is_ok());
        let kl3 = ConstraintSet { kl3: Some(9), ..Default::default() };
        assert!(!kl3.sizes_allow(5, 5));
        let kl3 = ConstraintSet { kl3: Some(10), ..Default::default() };
        assert!(kl3.sizes_allow(5, 5));
    }

    #[test]
    fn merge_log_replay_and_cut() {
        let log = MergeLog {
            events: vec![
                MergeEvent { step: 1, round: 1, root_a: 0, root_b: 2, dist: 1.0, new_size: 2 },
                MergeEvent { step: 2, round: 1, root_a: 1, root_b: 3, dist: 2.0, new_size: 2 },
                MergeEvent { step: 3, round: 2, root_a: 0, root_b: 1, dist: 3.0, new_size: 4 },
            ],
        };
        assert_eq!(log.cut(4, 4).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(log.cut(4, 2).unwrap(), vec![0, 1, 0, 1]);
        assert_eq!(log.cut(4, 1).unwrap(), vec![0, 0, 0, 0]);
        assert!(log.cut(4, 0).is_none());
        assert!(log.cut(4, 5).is_none());
    }
}
