//! Cluster-count inference.
//!
//! The main route reads K off the geometry of the trained embedding: project
//! the endpoints of cannot-link constraints onto their top-d principal
//! subspaces for every d, track the tail-averaged smallest inter-point angle
//! δ̄_d as d grows, and find where the curve stops rising. Exact simplex
//! configurations make δ̄_d flat from d = K−1 onward (and provably above π/3
//! there), so the plateau onset d* yields K̂ = d* + 1.
//!
//! Two conventional alternatives are included for comparison: best mean
//! silhouette over a K range, and the longest normalized Ward merge lifetime.

use crate::clustering::{agglomerative_ward, kmeans};
use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::stream::{derive_seed, substream};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::ops::RangeInclusive;
use std::path::Path;

/// Norm below which a projected endpoint is treated as having no direction
/// and its pairs are skipped at that dimension.
const PROJECTION_GUARD: f64 = 1e-12;

/// Tail-averaged smallest angles between projected cannot-link endpoints,
/// one value per projection dimension d = 1..=D.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaCurve {
    /// δ̄_d for d = 1..=D; `values[d-1]` is the value at dimension d.
    pub values: Vec<f64>,
    /// Tail fraction that was averaged.
    pub rho: f64,
    /// Number of cannot-link constraints the curve was computed from.
    pub n_neg: usize,
    /// Dimensions (1-based) where every projected pair degenerated to zero
    /// norm; their δ̄_d is recorded as 0.
    pub zero_dims: Vec<usize>,
}

impl DeltaCurve {
    /// Plot-ready `d,delta_bar` rows.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "d,delta_bar")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(f, "{},{}", i + 1, v)?;
        }
        f.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferMethod {
    PcaPlateau,
    Silhouette,
    Lifetime,
}

/// What the estimate was based on: the angle curve for the PCA route, or
/// per-candidate `(k, score)` pairs for the two score-maximizing routes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Diagnostics {
    Curve(DeltaCurve),
    Scores(Vec<(usize, f64)>),
}

/// An inferred cluster count with its supporting evidence. For the PCA
/// route `k_hat = d_star + 1` always holds; the score-based routes fill
/// `d_star` with `k_hat - 1` for uniformity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KEstimate {
    pub k_hat: usize,
    pub d_star: usize,
    pub method: InferMethod,
    pub diagnostics: Diagnostics,
}

impl KEstimate {
    pub fn save_json(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }
}

/// Mean-centered PCA scores with components ordered by descending singular
/// value: row i of the result holds point i's coordinates in the principal
/// basis, so the projection onto the top-d subspace is the first d columns.
///
/// The result has `min(M, D)` columns; projections for larger d coincide
/// with the full-rank one (the remaining axes carry no variance).
pub fn pca_project_all(points: &Array2<f64>) -> Result<Array2<f64>> {
    let m = points.nrows();
    let d = points.ncols();
    if m < 2 {
        return Err(Error::InvalidParameter {
            what: format!("PCA needs at least 2 points, got {m}"),
        });
    }
    let mean: Vec<f64> = (0..d)
        .map(|j| points.column(j).iter().sum::<f64>() / m as f64)
        .collect();
    let mut centered = nalgebra::DMatrix::<f64>::zeros(m, d);
    for i in 0..m {
        for j in 0..d {
            centered[(i, j)] = points[[i, j]] - mean[j];
        }
    }
    let svd = nalgebra::linalg::SVD::new(centered.clone(), false, true);
    let sigma = &svd.singular_values;
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let r = sigma.len();

    let max_sigma = sigma.iter().cloned().fold(0.0_f64, f64::max);
    if max_sigma <= 1e-12 {
        return Err(Error::RankZero);
    }
    // Defensive ordering: sort axes by descending singular value.
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));

    let mut scores = Array2::zeros((m, r));
    for (col, &axis) in order.iter().enumerate() {
        for i in 0..m {
            let mut dot = 0.0;
            for j in 0..d {
                dot += centered[(i, j)] * v_t[(axis, j)];
            }
            scores[[i, col]] = dot;
        }
    }
    Ok(scores)
}

fn tail_mean(sorted_ascending: &[f64], t: usize) -> f64 {
    let take = t.min(sorted_ascending.len());
    sorted_ascending[..take].iter().sum::<f64>() / take as f64
}

/// Computes δ̄_d for every d = 1..=D from the cannot-link constraints of
/// `cs` over the sphere embedding `z`.
///
/// PCA runs on the deduplicated endpoint embeddings; at each d, angles
/// between projected endpoints are sorted ascending and the ⌈ρ·|C⁻|⌉
/// smallest are averaged. Pairs where either projection has (numerically)
/// zero norm are skipped; if a dimension loses every pair this way its value
/// is 0 and the dimension is listed in `zero_dims`.
pub fn delta_curve(z: &Array2<f64>, cs: &ConstraintSet, rho: f64) -> Result<DeltaCurve> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidParameter { what: format!("rho must be in (0, 1], got {rho}") });
    }
    if cs.n_instances() != z.nrows() {
        return Err(Error::ShapeMismatch {
            context: format!("embedding has {} rows, constraint set indexes {}", z.nrows(), cs.n_instances()),
        });
    }
    let negatives: Vec<(usize, usize)> = cs.negatives().map(|c| (c.a, c.b)).collect();
    if negatives.is_empty() {
        return Err(Error::EmptyInput { what: "cannot-link constraints" });
    }
    let n_neg = negatives.len();

    // Unique endpoints, ascending, so the PCA input is independent of
    // constraint order.
    let mut endpoints: Vec<usize> = negatives.iter().flat_map(|&(a, b)| [a, b]).collect();
    endpoints.sort_unstable();
    endpoints.dedup();
    let slot = |gid: usize| endpoints.binary_search(&gid).expect("endpoint gathered");
    let z_neg = z.select(ndarray::Axis(0), &endpoints);

    let scores = pca_project_all(&z_neg)?;
    let r = scores.ncols();
    let dim = z.ncols();
    let t = (rho * n_neg as f64).ceil() as usize;
    let t = t.max(1);

    let mut values = Vec::with_capacity(dim);
    let mut zero_dims = Vec::new();
    for d in 1..=dim {
        let dd = d.min(r);
        let mut angles = Vec::with_capacity(n_neg);
        for &(a, b) in &negatives {
            let ra = scores.row(slot(a));
            let rb = scores.row(slot(b));
            let ua = &ra.as_slice().unwrap()[..dd];
            let ub = &rb.as_slice().unwrap()[..dd];
            let na = ua.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nb = ub.iter().map(|v| v * v).sum::<f64>().sqrt();
            if na <= PROJECTION_GUARD || nb <= PROJECTION_GUARD {
                continue;
            }
            let cos = (ua.iter().zip(ub).map(|(x, y)| x * y).sum::<f64>() / (na * nb)).clamp(-1.0, 1.0);
            angles.push(cos.acos());
        }
        if angles.is_empty() {
            zero_dims.push(d);
            values.push(0.0);
        } else {
            angles.sort_by(f64::total_cmp);
            values.push(tail_mean(&angles, t));
        }
    }
    Ok(DeltaCurve { values, rho, n_neg, zero_dims })
}

/// Finds the plateau onset: the smallest d with δ̄_d above `floor` whose
/// following rises (up to two of them) each stay within `rel_rise_tol`
/// relative to the current value. A candidate needs at least one subsequent
/// point to confirm flatness, so the last dimension never qualifies alone.
pub fn plateau_onset(curve: &DeltaCurve, rel_rise_tol: f64, floor: f64) -> Result<KEstimate> {
    let v = &curve.values;
    if v.len() < 2 {
        return Err(Error::InvalidParameter {
            what: format!("plateau detection needs a curve of length >= 2, got {}", v.len()),
        });
    }
    if !(rel_rise_tol > 0.0) {
        return Err(Error::InvalidParameter { what: "rel_rise_tol must be > 0".into() });
    }
    for i in 0..v.len() - 1 {
        if v[i] <= floor {
            continue;
        }
        let flat = (i..v.len() - 1)
            .take(2)
            .all(|j| v[j + 1] - v[j] <= rel_rise_tol * v[j]);
        if flat {
            let d_star = i + 1;
            return Ok(KEstimate {
                k_hat: d_star + 1,
                d_star,
                method: InferMethod::PcaPlateau,
                diagnostics: Diagnostics::Curve(curve.clone()),
            });
        }
    }
    Err(Error::NoPlateau { curve: v.clone() })
}

/// Default plateau parameters: floor π/3 (the provable lower bound of the
/// plateau value) and 5% relative rise tolerance.
pub const PLATEAU_FLOOR: f64 = std::f64::consts::FRAC_PI_3;
pub const PLATEAU_RISE_TOL: f64 = 0.05;

/// End-to-end PCA route: δ̄ curve at tail ratio `rho`, then plateau onset
/// with the default floor and tolerance.
pub fn infer_k_pca(z: &Array2<f64>, cs: &ConstraintSet, rho: f64) -> Result<KEstimate> {
    let curve = delta_curve(z, cs, rho)?;
    plateau_onset(&curve, PLATEAU_RISE_TOL, PLATEAU_FLOOR)
}

fn validate_k_range(k_range: &RangeInclusive<usize>, n: usize) -> Result<()> {
    let (lo, hi) = (*k_range.start(), *k_range.end());
    if lo < 2 || lo > hi {
        return Err(Error::InvalidParameter {
            what: format!("k range must satisfy 2 <= lo <= hi, got {lo}..={hi}"),
        });
    }
    if hi > n.saturating_sub(1) {
        return Err(Error::InvalidParameter {
            what: format!("k range end {hi} exceeds n - 1 = {}", n.saturating_sub(1)),
        });
    }
    Ok(())
}

/// Mean silhouette of `points` under `assignments` (Euclidean distances).
/// Points alone in their cluster contribute 0, the usual convention.
fn mean_silhouette(points: &Array2<f64>, assignments: &[usize], k: usize) -> f64 {
    let n = points.nrows();
    let dist = |i: usize, j: usize| -> f64 {
        points
            .row(i)
            .iter()
            .zip(points.row(j).iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    let mut counts = vec![0usize; k];
    for &a in assignments {
        counts[a] += 1;
    }
    let mut total = 0.0;
    for i in 0..n {
        let a = assignments[i];
        if counts[a] <= 1 {
            continue; // silhouette 0
        }
        let mut sums = vec![0.0; k];
        for j in 0..n {
            if j != i {
                sums[assignments[j]] += dist(i, j);
            }
        }
        let intra = sums[a] / (counts[a] - 1) as f64;
        let inter = (0..k)
            .filter(|&c| c != a && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        if inter.is_finite() {
            let denom = intra.max(inter);
            if denom > 0.0 {
                total += (inter - intra) / denom;
            }
        }
    }
    total / n as f64
}

/// Picks K by the best mean silhouette over K-means runs across `k_range`.
/// Silhouettes are computed over at most `subsample` points for O(n²)
/// control; ties go to the smaller k.
pub fn infer_k_silhouette(
    z: &Array2<f64>,
    k_range: RangeInclusive<usize>,
    restarts: usize,
    subsample: usize,
    seed: u64,
) -> Result<KEstimate> {
    let n = z.nrows();
    validate_k_range(&k_range, n)?;
    if subsample < 2 {
        return Err(Error::InvalidParameter { what: "subsample must be >= 2".into() });
    }
    let sub_idx: Vec<usize> = if n > subsample {
        let mut rng = substream(seed, "silhouette/subsample");
        let mut idx = rand::seq::index::sample(&mut rng, n, subsample).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..n).collect()
    };
    let z_sub = z.select(ndarray::Axis(0), &sub_idx);

    let mut scores = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for k in k_range {
        let model = kmeans(z, k, restarts, derive_seed(seed, &format!("silhouette/k{k}")))?;
        let sub_assign: Vec<usize> = sub_idx.iter().map(|&i| model.assignments[i]).collect();
        let s = mean_silhouette(&z_sub, &sub_assign, k);
        scores.push((k, s));
        if best.map_or(true, |(_, bs)| s > bs) {
            best = Some((k, s));
        }
    }
    let (k_hat, _) = best.expect("k range validated nonempty");
    Ok(KEstimate {
        k_hat,
        d_star: k_hat - 1,
        method: InferMethod::Silhouette,
        diagnostics: Diagnostics::Scores(scores),
    })
}

/// Picks K by the longest Ward merge "lifetime": the span of linkage
/// distance over which a K'-cluster partition persists, normalized by the
/// final (2-cluster) merge distance. Ties go to the smaller k.
pub fn infer_k_lifetime(z: &Array2<f64>, k_range: RangeInclusive<usize>) -> Result<KEstimate> {
    let n = z.nrows();
    validate_k_range(&k_range, n)?;
    let (_, merges) = agglomerative_ward(z, 2)?;
    // merges[t] reduces n - t clusters to n - t - 1, so the partition with
    // K' clusters lives between merges[n - K' - 1] (which creates it) and
    // merges[n - K'] (which destroys it).
    let d2 = merges[n - 2];
    if d2 <= 0.0 {
        return Err(Error::InvalidParameter {
            what: "all merge distances are zero; the points are identical".into(),
        });
    }
    let mut scores = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for k in k_range {
        let lifetime = (merges[n - k] - merges[n - k - 1]) / d2;
        scores.push((k, lifetime));
        if best.map_or(true, |(_, bs)| lifetime > bs) {
            best = Some((k, lifetime));
        }
    }
    let (k_hat, _) = best.expect("k range validated nonempty");
    Ok(KEstimate {
        k_hat,
        d_star: k_hat - 1,
        method: InferMethod::Lifetime,
        diagnostics: Diagnostics::Scores(scores),
    })
}
