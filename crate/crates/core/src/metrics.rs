//! Fidelity and diversity metrics over sample sets.
//!
//! All metrics work on raw sample vectors. The diversity score clusters the
//! set with seeded k-means (10 restarts, k-means++ init) and reports the
//! ratio of mean pairwise inter-centroid distance to mean point-to-centroid
//! distance, so it is invariant under rigid rotation and uniform rescaling of
//! the whole set.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::math;
use crate::rng::CounterRng;
use crate::vector::DataVector;

/// Restarts kept by the k-means inner loop.
const KMEANS_RESTARTS: usize = 10;
const KMEANS_MAX_ITERS: usize = 100;
/// Default stream for the seeded clustering.
const DS_SEED: u64 = 0x6469_7665_7273_6974; // "diversit"

/// A collection of equal-length samples with an optional ground truth.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub samples: Vec<DataVector>,
    pub reference: Option<DataVector>,
}

impl SampleSet {
    pub fn new(samples: Vec<DataVector>, reference: Option<DataVector>) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::NotEnoughSamples { got: 0, need: 1 });
        };
        let d = first.dim();
        for s in &samples {
            check_dim("SampleSet::new", d, s.dim())?;
        }
        if let Some(r) = &reference {
            check_dim("SampleSet::new reference", d, r.dim())?;
        }
        Ok(SampleSet { samples, reference })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].dim()
    }
}

/// Peak signal-to-noise ratio `10 log10(range² / MSE)` in dB. Returns
/// positive infinity when the inputs are identical.
pub fn psnr(x: &DataVector, reference: &DataVector, range: f64) -> Result<f64> {
    check_dim("psnr", reference.dim(), x.dim())?;
    if !(range > 0.0) {
        return Err(Error::InvalidArgument {
            context: "psnr",
            detail: String::from("range must be positive"),
        });
    }
    let d = x.dim() as f64;
    let mse: f64 = x
        .as_slice()
        .iter()
        .zip(reference.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / d;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * math::log10(range * range / mse))
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

struct Clustering {
    centroids: Vec<Vec<f64>>,
    assignment: Vec<usize>,
    inertia: f64,
}

fn kmeans_once(points: &[&[f64]], k: usize, rng: &mut CounterRng) -> Clustering {
    let n = points.len();
    let d = points[0].len();

    // k-means++ seeding.
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[(rng.next_u64() % n as u64) as usize].to_vec());
    let mut dist2: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = dist2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.next_f64() * total;
            let mut chosen = n - 1;
            for (i, w) in dist2.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            (rng.next_u64() % n as u64) as usize
        };
        centroids.push(points[next].to_vec());
        for (i, p) in points.iter().enumerate() {
            let dd = squared_distance(p, centroids.last().unwrap());
            if dd < dist2[i] {
                dist2[i] = dd;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for _ in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let dd = squared_distance(p, centroid);
                if dd < best_d {
                    best_d = dd;
                    best = c;
                }
            }
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
        }
        let mut counts = vec![0usize; k];
        let mut sums = vec![vec![0.0; d]; k];
        for (i, p) in points.iter().enumerate() {
            counts[assignment[i]] += 1;
            for (s, v) in sums[assignment[i]].iter_mut().zip(*p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Reseed an empty cluster at the point farthest from its centroid.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = squared_distance(points[a], &centroids[assignment[a]]);
                        let db = squared_distance(points[b], &centroids[assignment[b]]);
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                centroids[c] = points[far].to_vec();
                assignment[far] = c;
                changed = true;
            } else {
                for (j, s) in sums[c].iter().enumerate() {
                    centroids[c][j] = s / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let inertia: f64 = points
        .iter()
        .enumerate()
        .map(|(i, p)| squared_distance(p, &centroids[assignment[i]]))
        .sum();
    Clustering {
        centroids,
        assignment,
        inertia,
    }
}

/// Diversity score with the default clustering seed.
pub fn diversity_score(set: &SampleSet, k: usize) -> Result<f64> {
    diversity_score_seeded(set, k, DS_SEED)
}

/// Mean pairwise inter-centroid distance divided by mean within-cluster
/// point-to-centroid distance, from the best of 10 seeded k-means restarts.
pub fn diversity_score_seeded(set: &SampleSet, k: usize, seed: u64) -> Result<f64> {
    let n = set.len();
    if k < 2 {
        return Err(Error::InvalidArgument {
            context: "diversity_score",
            detail: String::from("need at least two clusters"),
        });
    }
    if n < k + 1 {
        return Err(Error::NotEnoughSamples { got: n, need: k + 1 });
    }
    let points: Vec<&[f64]> = set.samples.iter().map(|s| s.as_slice()).collect();
    let first = points[0];
    if points.iter().all(|p| *p == first) {
        return Err(Error::DegenerateSampleSet);
    }

    let mut rng = CounterRng::new(seed, 0);
    let mut best: Option<Clustering> = None;
    for _ in 0..KMEANS_RESTARTS {
        let run = kmeans_once(&points, k, &mut rng);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let best = best.unwrap();

    let mut inter = 0.0;
    let mut pairs = 0usize;
    for i in 0..k {
        for j in i + 1..k {
            inter += math::sqrt(squared_distance(&best.centroids[i], &best.centroids[j]));
            pairs += 1;
        }
    }
    inter /= pairs as f64;
    let intra: f64 = points
        .iter()
        .enumerate()
        .map(|(i, p)| math::sqrt(squared_distance(p, &best.centroids[best.assignment[i]])))
        .sum::<f64>()
        / n as f64;
    if intra <= 0.0 {
        return Err(Error::DegenerateSampleSet);
    }
    Ok(inter / intra)
}

/// Mean cosine similarity over all unordered sample pairs, in [-1, 1].
pub fn avg_pairwise_cosine(set: &SampleSet) -> Result<f64> {
    let n = set.len();
    if n < 2 {
        return Err(Error::NotEnoughSamples { got: n, need: 2 });
    }
    let norms: Vec<f64> = set.samples.iter().map(|s| math::norm(s.as_slice())).collect();
    if norms.iter().any(|v| *v == 0.0) {
        return Err(Error::InvalidArgument {
            context: "avg_pairwise_cosine",
            detail: String::from("sample with zero norm"),
        });
    }
    let mut acc = 0.0;
    let mut pairs = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            acc += math::dot(set.samples[i].as_slice(), set.samples[j].as_slice())
                / (norms[i] * norms[j]);
            pairs += 1;
        }
    }
    Ok((acc / pairs as f64).clamp(-1.0, 1.0))
}
