//! Seeded Gaussian blob datasets with ground-truth labels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::Dataset;

/// Side length of the cube the blob centers are drawn from.
pub const CENTER_BOX: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobSpec {
    pub n: usize,
    pub d: usize,
    pub clusters: usize,
    /// Standard deviation of every coordinate around its center.
    pub spread: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub dataset: Dataset,
    /// Blob index of each point.
    pub labels: Vec<usize>,
    /// Row-major `clusters x d` centers.
    pub centers: Vec<f64>,
}

impl Synthetic {
    /// Smallest Euclidean distance between two centers (infinite for one blob).
    pub fn min_center_gap(&self) -> f64 {
        let d = self.dataset.dim();
        let k = self.centers.len() / d;
        let c = |i: usize| &self.centers[i * d..(i + 1) * d];
        let mut gap = f64::INFINITY;
        for i in 0..k {
            for j in i + 1..k {
                let s: f64 = c(i).iter().zip(c(j)).map(|(x, y)| (x - y) * (x - y)).sum();
                gap = gap.min(s.sqrt());
            }
        }
        gap
    }
}

/// Draws `clusters` centers uniformly in `[0, CENTER_BOX)^d`, then assigns
/// point `i` to blob `i % clusters` and scatters it with N(0, spread²) noise.
pub fn generate_synthetic(spec: &BlobSpec) -> Result<Synthetic> {
    let BlobSpec { n, d, clusters, spread, seed } = *spec;
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if d == 0 {
        return Err(Error::NoFeatures);
    }
    if clusters == 0 {
        return Err(Error::InvalidConfig("clusters must be at least 1".into()));
    }
    let noise = Normal::new(0.0, spread)
        .map_err(|_| Error::InvalidConfig(format!("spread must be finite and >= 0, got {spread}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<f64> = (0..clusters * d).map(|_| rng.gen_range(0.0..CENTER_BOX)).collect();
    let labels: Vec<usize> = (0..n).map(|i| i % clusters).collect();
    let mut values = Vec::with_capacity(n * d);
    for &label in &labels {
        for k in 0..d {
            values.push(centers[label * d + k] + noise.sample(&mut rng));
        }
    }
    Ok(Synthetic { dataset: Dataset::new(n, d, values)?, labels, centers })
}

/// Uniform points in the unit cube, for scaling runs without structure.
pub fn generate_uniform(n: usize, d: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Dataset::new(n, d, (0..n * d).map(|_| rng.gen::<f64>()).collect())
}

/// True when two labelings induce the same partition.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    use std::collections::HashMap;
    if a.len() != b.len() {
        return false;
    }
    let mut forward = HashMap::new();
    let mut backward = HashMap::new();
    a.iter().zip(b).all(|(&x, &y)| {
        *forward.entry(x).or_insert(y) == y && *backward.entry(y).or_insert(x) == x
    })
}
