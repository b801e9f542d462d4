//! Angular and simplex geometry on the unit sphere.
//!
//! This module is the analytic core of the toolkit: angles between embedding
//! vectors, the feasibility analysis for the negative-zone factor `omega`,
//! perturbation bounds that translate residual loss into angular slack,
//! regular-simplex constructions used as convergence oracles, and the
//! closed-form cosine between mean-centered cluster centroids.
//!
//! Everything here is a pure function of its inputs; all angles are radians.

use crate::error::{Error, Result};
use ndarray::Array2;

/// Tolerance used when validating that a vector is unit norm.
pub const UNIT_NORM_TOL: f64 = 1e-9;

/// A vector of unit Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector {
    coords: Vec<f64>,
}

impl UnitVector {
    /// Wraps coordinates that are already unit norm (within [`UNIT_NORM_TOL`]).
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::EmptyInput { what: "unit vector coordinates" });
        }
        let norm = norm(&coords);
        if norm == 0.0 {
            return Err(Error::DegenerateVector);
        }
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::InvalidParameter {
                what: format!("expected unit norm, got {norm}"),
            });
        }
        Ok(Self { coords })
    }

    /// Normalizes an arbitrary nonzero vector onto the sphere.
    pub fn from_direction(coords: &[f64]) -> Result<Self> {
        let normalized = normalize(coords)?;
        Ok(Self { coords: normalized })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// Euclidean norm of a slice.
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Returns `v / ||v||`, or an error when the norm is zero.
pub fn normalize(v: &[f64]) -> Result<Vec<f64>> {
    let n = norm(v);
    if n == 0.0 {
        return Err(Error::DegenerateVector);
    }
    Ok(v.iter().map(|x| x / n).collect())
}

/// Row-normalizes a matrix onto the unit sphere; errors on any zero-norm row.
pub fn normalize_rows(x: &Array2<f64>) -> Result<Array2<f64>> {
    let mut out = x.clone();
    for (row, mut r) in out.rows_mut().into_iter().enumerate() {
        let n = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n == 0.0 {
            return Err(Error::DegenerateLatent { row });
        }
        r.mapv_inplace(|v| v / n);
    }
    Ok(out)
}

/// Clamps a cosine into `[-1, 1]` so floating-point overshoot never reaches
/// `acos` as NaN fuel.
pub(crate) fn clamp_cos(c: f64) -> f64 {
    c.clamp(-1.0, 1.0)
}

/// Angle between two nonzero vectors, in `[0, pi]`.
pub fn angle_between(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch { left: u.len(), right: v.len() });
    }
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::DegenerateVector);
    }
    Ok(clamp_cos(dot / (nu.sqrt() * nv.sqrt())).acos())
}

/// Feasibility of the negative-zone factor for `k` clusters in dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmegaStatus {
    /// No factor admits an equidistant arrangement of `k` clusters in `d` dims.
    Infeasible,
    /// Exactly one factor works: the simplex is the only equidistant layout.
    Unique,
    /// Any factor at or above the minimum works.
    Range,
}

/// Outcome of [`valid_omega`]: which negative-zone factors admit an
/// equidistant (all cross-cluster angles equal) arrangement of `k` cluster
/// directions in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaBound {
    pub k: usize,
    pub d: usize,
    pub status: OmegaStatus,
    /// Smallest admissible factor, absent when infeasible.
    pub omega_min: Option<f64>,
    /// Largest attainable common cross-cluster angle, absent when infeasible.
    pub theta_max: Option<f64>,
}

/// Analyzes which negative-zone factors are valid for `k` clusters embedded
/// in `R^d`.
///
/// An equidistant arrangement of `k` unit directions with common angle
/// `theta` has Gram matrix `(1 - cos theta) I + cos theta J`, which fits in
/// `d` dimensions only if `d >= k - 1`; the extreme angle
/// `arccos(-1/(k-1))` (the regular simplex) is the largest achievable, and at
/// `d = k - 1` it is the *only* achievable one. The factor pairs with the
/// angle via `omega = pi / theta`.
pub fn valid_omega(k: usize, d: usize) -> Result<OmegaBound> {
    if k < 2 {
        return Err(Error::TooFewClusters { k });
    }
    if d < 1 {
        return Err(Error::InvalidParameter { what: "dimension must be >= 1".into() });
    }
    if d < k - 1 {
        return Ok(OmegaBound { k, d, status: OmegaStatus::Infeasible, omega_min: None, theta_max: None });
    }
    let theta_max = (-1.0 / (k as f64 - 1.0)).acos();
    let omega_min = std::f64::consts::PI / theta_max;
    let status = if d == k - 1 { OmegaStatus::Unique } else { OmegaStatus::Range };
    Ok(OmegaBound { k, d, status, omega_min: Some(omega_min), theta_max: Some(theta_max) })
}

/// Smallest admissible negative-zone factor for `k` clusters,
/// `pi / arccos(-1/(k-1))`. Lives in `[1, 2)`, increases with `k`, and tends
/// to 2, which is why a fixed factor of 2 is safe whenever the embedding
/// dimension is generous.
pub fn minimal_admissible_omega(k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::TooFewClusters { k });
    }
    Ok(std::f64::consts::PI / (-1.0 / (k as f64 - 1.0)).acos())
}

/// Angular slack bounds implied by a residual mean pairwise loss `epsilon`
/// over `n_constraints` constraints.
///
/// Returns `(delta_plus, delta_minus)`:
/// * every must-link pair's angle is at most `delta_plus`;
/// * every cannot-link pair's shortfall below the negative-zone boundary
///   `pi/omega` is at most `delta_minus`.
///
/// Both come from the same inversion of the per-pair loss: a pair can only
/// absorb `n * epsilon` of loss, which caps its cosine at
/// `2 exp(-n epsilon) - 1`; the cannot-link shortfall is the identical arccos
/// shrunk by the factor `omega` (the boundary angle scales by `1/omega`).
/// For small `n * epsilon` both behave like `2 sqrt(n epsilon)` (divided by
/// `omega` for the second), and both are zero at `epsilon = 0` and monotone
/// nondecreasing in `epsilon`.
pub fn deviation_bounds(n_constraints: usize, epsilon: f64, omega: f64) -> (f64, f64) {
    debug_assert!(epsilon >= 0.0, "epsilon must be nonnegative");
    debug_assert!(n_constraints >= 1, "need at least one constraint");
    debug_assert!(omega > 0.0, "omega must be positive");
    let budget = n_constraints as f64 * epsilon;
    let delta_plus = clamp_cos(2.0 * (-budget).exp() - 1.0).acos();
    (delta_plus, delta_plus / omega)
}

/// `k` unit vectors in `R^d` with every pairwise inner product exactly
/// `-1/(k-1)`: the regular simplex, zero-padded beyond its natural
/// `k-1` dimensions.
///
/// Built column by column: coordinate `i` of vertex `i` is fixed by unit
/// norm, then coordinate `i` of every later vertex is fixed by the target
/// inner product with vertex `i`. This is deterministic and exact to
/// floating-point roundoff, so the vertices double as analytic oracles in
/// convergence tests.
pub fn regular_simplex_vertices(k: usize, d: usize) -> Result<Vec<UnitVector>> {
    let m = regular_simplex_matrix(k, d)?;
    m.rows()
        .into_iter()
        .map(|r| UnitVector::new(r.to_vec()))
        .collect()
}

/// Matrix form of [`regular_simplex_vertices`]: rows are the `k` vertices.
pub fn regular_simplex_matrix(k: usize, d: usize) -> Result<Array2<f64>> {
    if k < 2 {
        return Err(Error::TooFewClusters { k });
    }
    if d < k - 1 {
        return Err(Error::SimplexInfeasible { k, d, min_dim: k - 1 });
    }
    let target = -1.0 / (k as f64 - 1.0);
    let mut v = Array2::<f64>::zeros((k, d));
    for i in 0..k - 1 {
        let norm2: f64 = (0..i).map(|j| v[[i, j]] * v[[i, j]]).sum();
        let vii = (1.0 - norm2).sqrt();
        v[[i, i]] = vii;
        for l in i + 1..k {
            let dot: f64 = (0..i).map(|j| v[[i, j]] * v[[l, j]]).sum();
            v[[l, i]] = (target - dot) / vii;
        }
    }
    Ok(v)
}

/// Relative cluster sizes: strictly positive frequencies summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterFrequencies {
    p: Vec<f64>,
}

impl ClusterFrequencies {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.len() < 2 {
            return Err(Error::InvalidFrequencies {
                reason: format!("need at least two clusters, got {}", p.len()),
            });
        }
        if let Some(bad) = p.iter().find(|&&x| !(x > 0.0)) {
            return Err(Error::InvalidFrequencies {
                reason: format!("frequencies must be strictly positive, found {bad}"),
            });
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidFrequencies {
                reason: format!("frequencies must sum to 1, got {sum}"),
            });
        }
        Ok(Self { p })
    }

    /// Equal frequencies over `k` clusters.
    pub fn uniform(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidFrequencies {
                reason: format!("need at least two clusters, got {k}"),
            });
        }
        // Divide the roundoff evenly: p = 1/k exactly, then the sum check
        // tolerates the accumulated error.
        Self::new(vec![1.0 / k as f64; k])
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    /// Sum of squared frequencies.
    pub fn sum_sq(&self) -> f64 {
        self.p.iter().map(|x| x * x).sum()
    }
}

/// Cosine of the angle between the mean-centered centroids of clusters `k`
/// and `k2` when the clusters sit at regular-simplex vertices with
/// frequencies `p`.
///
/// With `s = sum_i p_i^2`, the closed form is
/// `(s - p_k - p_k2) / sqrt((1 - 2 p_k + s)(1 - 2 p_k2 + s))`.
/// Uniform frequencies give `-1/(K-1)`; for two clusters the value is `-1`
/// regardless of `p` (centered centroids are collinear and opposite).
pub fn centered_centroid_cosine(p: &ClusterFrequencies, k: usize, k2: usize) -> Result<f64> {
    if k == k2 {
        return Err(Error::SameCluster { index: k });
    }
    let n = p.len();
    for idx in [k, k2] {
        if idx >= n {
            return Err(Error::IndexOutOfBounds { index: idx, len: n });
        }
    }
    let s = p.sum_sq();
    let pk = p.as_slice()[k];
    let pk2 = p.as_slice()[k2];
    let num = s - pk - pk2;
    let den = ((1.0 - 2.0 * pk + s) * (1.0 - 2.0 * pk2 + s)).sqrt();
    Ok(clamp_cos(num / den))
}
