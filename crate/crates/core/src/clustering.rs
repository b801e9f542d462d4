//! Unsupervised clustering on the unit sphere — Lloyd's K-means with
//! k-means++ seeding and restarts, Ward agglomerative clustering — plus
//! nearest-centroid prediction for unseen instances.
//!
//! On unit vectors, `‖u − v‖² = 2(1 − cos θ)`, so Euclidean argmin and
//! angular argmin agree; K-means runs in plain Euclidean geometry and the
//! resulting centroids are re-normalized member means.

use crate::error::{Error, Result};
use crate::net::AutoencoderModel;
use crate::stream::substream;
use crate::trainer::extract_sphere_embedding;
use ndarray::{Array2, ArrayView1};
use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::Path;

/// Hard cap on agglomerative input size; the condensed distance matrix is
/// O(N²) memory.
pub const WARD_CAP: usize = 5000;

const MAX_LLOYD_ITERS: usize = 300;

/// A fitted flat clustering: unit-norm centroids (re-normalized means of the
/// member sphere points) and the training assignments.
///
/// Serialization keeps only what prediction needs (k and the centroids);
/// training assignments travel separately as CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    centroids: Vec<Vec<f64>>,
    #[serde(skip)]
    pub assignments: Vec<usize>,
}

impl ClusterModel {
    /// Builds the model from data and an assignment vector, computing
    /// normalized mean centroids. Every cluster must be nonempty and no
    /// cluster mean may vanish.
    pub fn from_assignments(z: &Array2<f64>, assignments: &[usize], k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::TooFewClusters { k });
        }
        if assignments.len() != z.nrows() {
            return Err(Error::LengthMismatch { left: assignments.len(), right: z.nrows() });
        }
        let d = z.ncols();
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (row, &a) in assignments.iter().enumerate() {
            if a >= k {
                return Err(Error::IndexOutOfBounds { index: a, len: k });
            }
            for j in 0..d {
                sums[a][j] += z[[row, j]];
            }
            counts[a] += 1;
        }
        for (c, &count) in counts.iter().enumerate() {
            if count == 0 {
                return Err(Error::EmptyCluster { cluster: c });
            }
        }
        let mut centroids = Vec::with_capacity(k);
        for (c, sum) in sums.iter().enumerate() {
            let mean: Vec<f64> = sum.iter().map(|v| v / counts[c] as f64).collect();
            let norm = mean.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm <= f64::EPSILON {
                return Err(Error::DegenerateVector);
            }
            centroids.push(mean.iter().map(|v| v / norm).collect());
        }
        Ok(Self { k, centroids, assignments: assignments.to_vec() })
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    pub fn dim(&self) -> usize {
        self.centroids.first().map(Vec::len).unwrap_or(0)
    }

    /// Assigns each sphere point to the centroid of minimal angle (maximal
    /// dot product); ties break toward the lowest cluster index.
    pub fn assign(&self, z: &Array2<f64>) -> Result<Vec<usize>> {
        if z.ncols() != self.dim() {
            return Err(Error::ShapeMismatch {
                context: format!("points have dim {}, centroids dim {}", z.ncols(), self.dim()),
            });
        }
        let mut out = Vec::with_capacity(z.nrows());
        for (row, p) in z.rows().into_iter().enumerate() {
            let norm: f64 = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm <= f64::EPSILON {
                return Err(Error::DegenerateLatent { row });
            }
            let mut best = 0usize;
            let mut best_dot = f64::NEG_INFINITY;
            for (c, centroid) in self.centroids.iter().enumerate() {
                let dot: f64 = centroid.iter().zip(p.iter()).map(|(a, b)| a * b).sum();
                if dot > best_dot {
                    best_dot = dot;
                    best = c;
                }
            }
            out.push(best);
        }
        Ok(out)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let model: Self = serde_json::from_str(&text)?;
        if model.k < 2 || model.centroids.len() != model.k {
            return Err(Error::BadFormat {
                what: format!("cluster model claims k={} but holds {} centroids", model.k, model.centroids.len()),
            });
        }
        Ok(model)
    }

    /// Writes `index,cluster` rows for the training assignments.
    pub fn save_assignments_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "index,cluster")?;
        for (i, a) in self.assignments.iter().enumerate() {
            writeln!(f, "{i},{a}")?;
        }
        f.flush()?;
        Ok(())
    }
}

fn sq_dist(a: ArrayView1<f64>, b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn count_distinct_rows(z: &Array2<f64>) -> usize {
    let mut rows: Vec<Vec<u64>> = z
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v.to_bits()).collect())
        .collect();
    rows.sort_unstable();
    rows.dedup();
    rows.len()
}

struct LloydRun {
    assignments: Vec<usize>,
    inertia: f64,
    // Consumed by the monotonicity test; the library itself only needs the
    // final inertia.
    #[cfg_attr(not(test), allow(dead_code))]
    inertia_trace: Vec<f64>,
}

/// One Lloyd run from a k-means++ initialization.
fn lloyd_once(z: &Array2<f64>, k: usize, rng: &mut impl Rng) -> LloydRun {
    let n = z.nrows();
    let d = z.ncols();

    // k-means++ seeding: first center uniform, then D²-weighted draws.
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let first = rng.random_range(0..n);
    centers.push(z.row(first).to_vec());
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(z.row(i), &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            WeightedIndex::new(&d2).expect("nonnegative weights").sample(rng)
        } else {
            // All remaining points coincide with chosen centers; the caller
            // guarantees at least k distinct rows, so this picks a duplicate
            // only in pathological float cases — fall back to the first
            // not-yet-chosen row.
            (0..n).find(|&i| !centers.iter().any(|c| sq_dist(z.row(i), c) == 0.0)).unwrap_or(0)
        };
        let new_center = z.row(idx).to_vec();
        for i in 0..n {
            d2[i] = d2[i].min(sq_dist(z.row(i), &new_center));
        }
        centers.push(new_center);
    }

    let mut assignments = vec![0usize; n];
    let mut inertia_trace = Vec::new();
    let mut inertia = f64::INFINITY;
    for _ in 0..MAX_LLOYD_ITERS {
        // Assignment step.
        let mut changed = false;
        let mut new_inertia = 0.0;
        for i in 0..n {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let dist = sq_dist(z.row(i), center);
                if dist < best_d {
                    best_d = dist;
                    best = c;
                }
            }
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
            new_inertia += best_d;
        }

        // Empty-cluster repair: reseed from the point farthest from its
        // current center, one cluster at a time.
        let mut counts = vec![0usize; k];
        for &a in &assignments {
            counts[a] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let (far, _) = (0..n)
                .map(|i| (i, sq_dist(z.row(i), &centers[assignments[i]])))
                .filter(|&(i, _)| counts[assignments[i]] > 1)
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("some cluster has >1 point when another is empty");
            counts[assignments[far]] -= 1;
            assignments[far] = c;
            counts[c] = 1;
            changed = true;
        }

        inertia_trace.push(new_inertia);
        inertia = new_inertia;
        if !changed {
            break;
        }

        // Update step: means of members.
        let mut sums = vec![vec![0.0; d]; k];
        let mut cnt = vec![0usize; k];
        for i in 0..n {
            let a = assignments[i];
            cnt[a] += 1;
            for j in 0..d {
                sums[a][j] += z[[i, j]];
            }
        }
        for c in 0..k {
            if cnt[c] > 0 {
                for j in 0..d {
                    centers[c][j] = sums[c][j] / cnt[c] as f64;
                }
            }
        }
    }
    LloydRun { assignments, inertia, inertia_trace }
}

/// Best-of-`restarts` K-means. Restarts draw independent seed substreams and
/// run in parallel; the winner is the lowest inertia, ties broken by restart
/// index, so the result is deterministic regardless of thread scheduling.
pub fn kmeans(z: &Array2<f64>, k: usize, restarts: usize, seed: u64) -> Result<ClusterModel> {
    let (run, _) = kmeans_traced(z, k, restarts, seed)?;
    ClusterModel::from_assignments(z, &run.assignments, k)
}

/// K-means exposing the winning run's per-iteration inertia trace (used by
/// the monotonicity property test).
fn kmeans_traced(z: &Array2<f64>, k: usize, restarts: usize, seed: u64) -> Result<(LloydRun, usize)> {
    if k < 2 {
        return Err(Error::TooFewClusters { k });
    }
    if restarts < 1 {
        return Err(Error::InvalidParameter { what: "restarts must be >= 1".into() });
    }
    if z.nrows() < k {
        return Err(Error::TooFewDistinctPoints { distinct: z.nrows(), k });
    }
    let distinct = count_distinct_rows(z);
    if distinct < k {
        return Err(Error::TooFewDistinctPoints { distinct, k });
    }
    let best = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, &format!("kmeans/restart{r}"));
            (lloyd_once(z, k, &mut rng), r)
        })
        .min_by(|a, b| a.0.inertia.total_cmp(&b.0.inertia).then(a.1.cmp(&b.1)))
        .expect("at least one restart");
    Ok(best)
}

/// Ward-linkage agglomerative clustering cut at `k`, plus the full merge
/// sequence: element `t` is the linkage distance of the merge that reduced
/// the partition from `n − t` to `n − t − 1` clusters.
pub fn agglomerative_ward(z: &Array2<f64>, k: usize) -> Result<(ClusterModel, Vec<f64>)> {
    let n = z.nrows();
    if k < 2 {
        return Err(Error::TooFewClusters { k });
    }
    if n > WARD_CAP {
        return Err(Error::WardCapExceeded { n, cap: WARD_CAP });
    }
    if n < k {
        return Err(Error::TooFewDistinctPoints { distinct: n, k });
    }

    // Condensed upper-triangle distances, row-major (i < j).
    let mut condensed = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            condensed.push(sq_dist(z.row(i), &z.row(j).to_vec()).sqrt());
        }
    }
    let dendrogram = kodama::linkage(&mut condensed, n, kodama::Method::Ward);
    let merge_distances: Vec<f64> = dendrogram.steps().iter().map(|s| s.dissimilarity).collect();

    // Cut: apply the first n - k merges with a union-find; the cluster formed
    // at step t carries label n + t.
    let mut parent: Vec<usize> = (0..2 * n - 1).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (t, step) in dendrogram.steps().iter().take(n - k).enumerate() {
        let a = find(&mut parent, step.cluster1);
        let b = find(&mut parent, step.cluster2);
        parent[a] = n + t;
        parent[b] = n + t;
    }

    // Relabel components 0..k-1 in order of first appearance by row index.
    let mut label_of_root: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    let mut assignments = Vec::with_capacity(n);
    for i in 0..n {
        let root = find(&mut parent, i);
        let next = label_of_root.len();
        let label = *label_of_root.entry(root).or_insert(next);
        assignments.push(label);
    }
    debug_assert_eq!(label_of_root.len(), k);

    let model = ClusterModel::from_assignments(z, &assignments, k)?;
    Ok((model, merge_distances))
}

/// Encodes unseen instances, normalizes, and assigns each to the centroid of
/// minimal angle.
pub fn predict(model: &ClusterModel, encoder: &AutoencoderModel, x_new: &Array2<f64>) -> Result<Vec<usize>> {
    let z = extract_sphere_embedding(encoder, x_new)?;
    model.assign(&z)
}

/// Loads assignments written by [`ClusterModel::save_assignments_csv`].
pub fn load_assignments_csv(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 {
            continue; // header
        }
        let mut parts = line.split(',');
        let idx: usize = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Parse { line: lineno + 1, msg: "bad index".into() })?;
        let cluster: usize = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Parse { line: lineno + 1, msg: "bad cluster".into() })?;
        if idx != out.len() {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: format!("expected index {}, got {idx}", out.len()),
            });
        }
        out.push(cluster);
    }
    if out.is_empty() {
        return Err(Error::EmptyInput { what: "assignments file" });
    }
    Ok(out)
}

/// Mean within-cluster squared distance to the (unnormalized) member mean —
/// the quantity K-means minimizes; exposed for diagnostics.
pub fn inertia(z: &Array2<f64>, assignments: &[usize], k: usize) -> Result<f64> {
    if assignments.len() != z.nrows() {
        return Err(Error::LengthMismatch { left: assignments.len(), right: z.nrows() });
    }
    let d = z.ncols();
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (i, &a) in assignments.iter().enumerate() {
        if a >= k {
            return Err(Error::IndexOutOfBounds { index: a, len: k });
        }
        counts[a] += 1;
        for j in 0..d {
            sums[a][j] += z[[i, j]];
        }
    }
    let means: Vec<Vec<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s.iter().map(|v| if c > 0 { v / c as f64 } else { 0.0 }).collect())
        .collect();
    Ok(assignments
        .iter()
        .enumerate()
        .map(|(i, &a)| sq_dist(z.row(i), &means[a]))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::sample_balanced;
    use crate::data::{gen_gaussian_mixture, ClusterSizes};
    use crate::eval::accuracy;
    use crate::geometry::regular_simplex_matrix;
    use crate::trainer::{train, TrainConfig};
    use ndarray::{concatenate, Axis};
    use rand_distr::{Distribution, StandardNormal};

    fn copies_of_simplex(k: usize, d: usize, copies: usize) -> (Array2<f64>, Vec<usize>) {
        let v = regular_simplex_matrix(k, d).unwrap();
        let mut z = Array2::zeros((k * copies, d));
        let mut labels = Vec::new();
        for c in 0..k {
            for i in 0..copies {
                for j in 0..d {
                    z[[c * copies + i, j]] = v[[c, j]];
                }
            }
            labels.extend(std::iter::repeat(c).take(copies));
        }
        (z, labels)
    }

    /// Unit vectors inside an angular cap around `axis`, radius < pi/4.
    fn cap_points(axis: &[f64], n: usize, rng: &mut impl Rng) -> Array2<f64> {
        let d = axis.len();
        let mut out = Array2::zeros((n, d));
        for i in 0..n {
            loop {
                let noise: Vec<f64> = (0..d).map(|_| {
                    let g: f64 = StandardNormal.sample(rng);
                    0.2 * g
                }).collect();
                let v: Vec<f64> = axis.iter().zip(&noise).map(|(a, e)| a + e).collect();
                let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                let u: Vec<f64> = v.iter().map(|x| x / norm).collect();
                let cos: f64 = u.iter().zip(axis.iter()).map(|(a, b)| a * b).sum();
                if cos.acos() < std::f64::consts::FRAC_PI_4 * 0.9 {
                    for j in 0..d {
                        out[[i, j]] = u[j];
                    }
                    break;
                }
            }
        }
        out
    }

    #[test]
    fn kmeans_recovers_duplicated_simplex_exactly() {
        let (z, labels) = copies_of_simplex(4, 4, 10);
        let model = kmeans(&z, 4, 5, 0).unwrap();
        let acc = accuracy(&model.assignments, &labels).unwrap();
        assert_eq!(acc, 1.0);
        // Centroids must be the simplex vertices themselves (normalized means
        // of identical points), in some order.
        for centroid in model.centroids() {
            let norm: f64 = centroid.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn kmeans_rejects_bad_inputs() {
        let (z, _) = copies_of_simplex(3, 3, 2);
        assert!(matches!(kmeans(&z, 1, 5, 0), Err(Error::TooFewClusters { k: 1 })));
        let two = Array2::from_shape_vec((2, 3), vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        assert!(matches!(kmeans(&two, 3, 5, 0), Err(Error::TooFewDistinctPoints { .. })));
        // 6 rows but only 3 distinct values.
        assert!(matches!(kmeans(&z, 4, 5, 0), Err(Error::TooFewDistinctPoints { distinct: 3, k: 4 })));
    }

    #[test]
    fn kmeans_separates_antipodal_caps() {
        let mut rng = substream(42, "clustering-tests/caps");
        let plus = cap_points(&[1.0, 0.0, 0.0], 100, &mut rng);
        let minus = cap_points(&[-1.0, 0.0, 0.0], 100, &mut rng);
        let z = concatenate![Axis(0), plus, minus];
        let model = kmeans(&z, 2, 10, 7).unwrap();
        let truth: Vec<usize> = (0..200).map(|i| usize::from(i >= 100)).collect();
        assert_eq!(accuracy(&model.assignments, &truth).unwrap(), 1.0);
    }

    #[test]
    fn kmeans_inertia_never_increases_within_a_run() {
        let ds = gen_gaussian_mixture(3, &ClusterSizes::PerCluster(40), 5, 3.0, 1.5, 9).unwrap();
        for seed in 0..5 {
            let (run, _) = kmeans_traced(&ds.x, 3, 1, seed).unwrap();
            for w in run.inertia_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "inertia rose: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn kmeans_best_of_restarts_beats_singles() {
        let ds = gen_gaussian_mixture(4, &ClusterSizes::PerCluster(25), 4, 4.0, 1.2, 21).unwrap();
        let (best, _) = kmeans_traced(&ds.x, 4, 20, 3).unwrap();
        for r in 0..20 {
            let mut rng = substream(3, &format!("kmeans/restart{r}"));
            let single = lloyd_once(&ds.x, 4, &mut rng);
            assert!(best.inertia <= single.inertia + 1e-9);
        }
    }

    #[test]
    fn raw_kmeans_on_separated_mixture_hits_ceiling() {
        // Sanity ceiling: on heavily separated raw features, plain K-means
        // alone should already be nearly perfect.
        let ds = gen_gaussian_mixture(4, &ClusterSizes::PerCluster(50), 6, 10.0, 1.0, 33).unwrap();
        let model = kmeans(&ds.x, 4, 20, 1).unwrap();
        let acc = accuracy(&model.assignments, ds.labels.as_ref().unwrap()).unwrap();
        assert!(acc >= 0.99, "raw kmeans accuracy {acc}");
    }

    #[test]
    fn ward_recovers_separated_blobs() {
        let (simplex, labels) = copies_of_simplex(3, 3, 30);
        let mut rng = substream(5, "clustering-tests/ward-blobs");
        let mut z = simplex.clone();
        for v in z.iter_mut() {
            let g: f64 = StandardNormal.sample(&mut rng);
            *v += 0.02 * g;
        }
        let (model, merges) = agglomerative_ward(&z, 3).unwrap();
        assert_eq!(accuracy(&model.assignments, &labels).unwrap(), 1.0);
        assert_eq!(merges.len(), z.nrows() - 1);
    }

    #[test]
    fn ward_with_n_equals_k_leaves_singletons() {
        let (z, _) = copies_of_simplex(4, 4, 1);
        let (model, merges) = agglomerative_ward(&z, 4).unwrap();
        let mut sorted = model.assignments.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3]);
        assert_eq!(merges.len(), 3);
    }

    #[test]
    fn ward_merge_distances_are_nondecreasing() {
        for seed in 0..20 {
            let mut rng = substream(seed, "clustering-tests/ward-mono");
            let mut z = Array2::zeros((30, 4));
            for v in z.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            let (_, merges) = agglomerative_ward(&z, 2).unwrap();
            for w in merges.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "merge heights inverted: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn ward_rejects_oversized_input() {
        let z = Array2::zeros((WARD_CAP + 1, 2));
        assert!(matches!(
            agglomerative_ward(&z, 2),
            Err(Error::WardCapExceeded { n, cap: WARD_CAP }) if n == WARD_CAP + 1
        ));
    }

    #[test]
    fn euclidean_and_angular_argmin_agree_on_unit_vectors() {
        let mut rng = substream(0, "clustering-tests/metric");
        for _ in 0..200 {
            let sample_unit = |rng: &mut rand_chacha::ChaCha8Rng| {
                let v: Vec<f64> = (0..5).map(|_| StandardNormal.sample(rng)).collect();
                let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter().map(|x| x / n).collect::<Vec<f64>>()
            };
            let u = sample_unit(&mut rng);
            let v = sample_unit(&mut rng);
            let cos: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
            let sq: f64 = u.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum();
            assert!((sq - 2.0 * (1.0 - cos)).abs() < 1e-12);
        }
    }

    #[test]
    fn assign_breaks_ties_toward_lowest_index_and_is_equivariant() {
        let (z, _) = copies_of_simplex(3, 3, 2);
        let model = ClusterModel::from_assignments(&z, &[0, 0, 1, 1, 2, 2], 3).unwrap();
        // A point equidistant from centroids 1 and 2 (their normalized sum
        // direction is orthogonal to the difference) must go to cluster 1.
        let c1 = model.centroids()[1].clone();
        let c2 = model.centroids()[2].clone();
        let mid: Vec<f64> = c1.iter().zip(&c2).map(|(a, b)| a + b).collect();
        let n: f64 = mid.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut probe = Array2::zeros((1, 3));
        for j in 0..3 {
            probe[[0, j]] = mid[j] / n;
        }
        let a = model.assign(&probe).unwrap();
        assert_eq!(a, vec![1]);

        // Point exactly on a centroid goes to that cluster.
        let mut on = Array2::zeros((1, 3));
        for j in 0..3 {
            on[[0, j]] = model.centroids()[2][j];
        }
        assert_eq!(model.assign(&on).unwrap(), vec![2]);

        // Permutation equivariance.
        let perm = [4, 0, 5, 2, 1, 3];
        let z_perm = z.select(Axis(0), &perm);
        let base = model.assign(&z).unwrap();
        let permuted = model.assign(&z_perm).unwrap();
        for (slot, &src) in perm.iter().enumerate() {
            assert_eq!(permuted[slot], base[src]);
        }
    }

    #[test]
    fn model_json_round_trip_preserves_prediction() {
        let (z, _) = copies_of_simplex(3, 4, 3);
        let model = kmeans(&z, 3, 5, 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save_json(&path).unwrap();
        let loaded = ClusterModel::load_json(&path).unwrap();
        assert_eq!(loaded.k, 3);
        assert!(loaded.assignments.is_empty(), "assignments stay out of the JSON model");
        assert_eq!(loaded.assign(&z).unwrap(), model.assign(&z).unwrap());

        let ap = dir.path().join("assign.csv");
        model.save_assignments_csv(&ap).unwrap();
        assert_eq!(load_assignments_csv(&ap).unwrap(), model.assignments);
    }

    #[test]
    fn held_out_prediction_matches_training_accuracy() {
        // End-to-end generalization: train on 80%, predict the held-out 20%.
        let ds = gen_gaussian_mixture(4, &ClusterSizes::PerCluster(50), 3, 10.0, 0.5, 77).unwrap();
        let ds = ds.split(0.2, 8).unwrap();
        let split = ds.split.clone().unwrap();
        let x_train = ds.rows(&split.train_idx);
        let labels = ds.labels.as_ref().unwrap();
        let y_train: Vec<usize> = split.train_idx.iter().map(|&i| labels[i]).collect();
        let y_test: Vec<usize> = split.test_idx.iter().map(|&i| labels[i]).collect();

        let cs = sample_balanced(&y_train, 2000, 5).unwrap();
        let cfg = TrainConfig { embed_dim: 8, ..TrainConfig::desk() };
        let (net, _) = train(&x_train, &cs, &cfg).unwrap();
        let z_train = extract_sphere_embedding(&net, &x_train).unwrap();
        let model = kmeans(&z_train, 4, 10, 2).unwrap();
        let acc_train = accuracy(&model.assignments, &y_train).unwrap();

        let x_test = ds.rows(&split.test_idx);
        let pred = predict(&model, &net, &x_test).unwrap();
        let acc_test = accuracy(&pred, &y_test).unwrap();
        assert!(
            (acc_train - acc_test).abs() <= 0.03 + 1e-12,
            "train acc {acc_train} vs test acc {acc_test}"
        );
    }
}
