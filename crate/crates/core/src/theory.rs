//! Executable oracle suite for the geometric claims the toolkit relies on.
//!
//! Each check recomputes a claim two independent ways — closed form against
//! brute-force measurement, construction against definition — and passes only
//! when they agree at tight tolerance. The suite runs without any training,
//! so it doubles as a fast self-test (`verify-theory` on the command line).
//!
//! A named fault can be injected to verify that the harness actually detects
//! deviations (a negative control): the chosen check's computed quantity is
//! perturbed by 1e-3, which must flip it to failing.

use crate::error::{Error, Result};
use crate::geometry::{
    angle_between, centered_centroid_cosine, deviation_bounds, minimal_admissible_omega,
    regular_simplex_matrix, valid_omega, ClusterFrequencies, OmegaStatus,
};
use crate::kinfer::pca_project_all;
use crate::stream::substream;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Outcome of one named check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Human-readable summary: what was measured and the worst deviation.
    pub detail: String,
}

/// All check names, in execution order.
pub const CHECK_NAMES: [&str; 7] = [
    "regular_simplex_gram",
    "valid_omega_cases",
    "minimal_admissible_omega",
    "centered_centroid_cosine_agreement",
    "uniform_frequency_angle",
    "deviation_bound_shape",
    "pca_angle_invariance",
];

/// Runs the full suite. `seed` feeds the randomized agreement checks.
pub fn run_all(seed: u64) -> Vec<CheckResult> {
    run_all_with_fault(seed, None).expect("no fault name to reject")
}

/// Runs the full suite, optionally injecting a fault into the named check.
/// Unknown names are rejected so a typo cannot silently test nothing.
pub fn run_all_with_fault(seed: u64, fault: Option<&str>) -> Result<Vec<CheckResult>> {
    if let Some(name) = fault {
        if !CHECK_NAMES.contains(&name) {
            return Err(Error::InvalidParameter {
                what: format!("unknown check '{name}'; valid names: {}", CHECK_NAMES.join(", ")),
            });
        }
    }
    let bias = |name: &str| if fault == Some(name) { 1e-3 } else { 0.0 };
    Ok(vec![
        check_regular_simplex_gram(bias("regular_simplex_gram")),
        check_valid_omega_cases(bias("valid_omega_cases")),
        check_minimal_admissible_omega(bias("minimal_admissible_omega")),
        check_centered_centroid_cosine(seed, bias("centered_centroid_cosine_agreement")),
        check_uniform_frequency_angle(bias("uniform_frequency_angle")),
        check_deviation_bound_shape(bias("deviation_bound_shape")),
        check_pca_angle_invariance(bias("pca_angle_invariance")),
    ])
}

fn result(name: &'static str, worst: f64, tol: f64, what: &str) -> CheckResult {
    CheckResult {
        name,
        passed: worst <= tol,
        detail: format!("{what}: worst deviation {worst:.3e} (tolerance {tol:.0e})"),
    }
}

/// K unit vectors from the simplex constructor must reproduce the target
/// Gram matrix (ones on the diagonal, −1/(K−1) off it) to 1e-9, across
/// K = 2..10 and dimensions K−1 .. K+5.
fn check_regular_simplex_gram(bias: f64) -> CheckResult {
    let mut worst = 0.0_f64;
    for k in 2..=10usize {
        for d in [k - 1, k, k + 2, k + 5] {
            let v = regular_simplex_matrix(k, d).expect("feasible dimensions");
            let target = -1.0 / (k as f64 - 1.0);
            for i in 0..k {
                for j in 0..k {
                    let dot: f64 = (0..d).map(|c| v[[i, c]] * v[[j, c]]).sum();
                    let want = if i == j { 1.0 } else { target };
                    worst = worst.max((dot - want).abs());
                }
            }
        }
    }
    result("regular_simplex_gram", worst + bias, 1e-9, "Gram entries, K=2..10, D=K-1..K+5")
}

/// Feasibility regimes of the negative-zone factor: none below D = K−1, a
/// unique value exactly at D = K−1, a half-open range from the same minimum
/// for D ≥ K. The minimum must equal π/arccos(−1/(K−1)) wherever defined.
fn check_valid_omega_cases(bias: f64) -> CheckResult {
    let mut worst = 0.0_f64;
    let mut regime_errors = 0usize;
    for k in 2..=10usize {
        for d in k.saturating_sub(2).max(1)..=k + 5 {
            let bound = valid_omega(k, d).expect("valid inputs");
            let expect_min = std::f64::consts::PI / (-1.0 / (k as f64 - 1.0)).acos();
            match bound.status {
                OmegaStatus::Infeasible => {
                    if d >= k - 1 {
                        regime_errors += 1;
                    }
                    if bound.omega_min.is_some() {
                        regime_errors += 1;
                    }
                }
                OmegaStatus::Unique => {
                    if d != k - 1 {
                        regime_errors += 1;
                    }
                    worst = worst.max((bound.omega_min.unwrap() - expect_min).abs());
                }
                OmegaStatus::Range => {
                    if d < k {
                        regime_errors += 1;
                    }
                    worst = worst.max((bound.omega_min.unwrap() - expect_min).abs());
                    let theta = bound.theta_max.unwrap();
                    worst = worst.max((theta - (-1.0 / (k as f64 - 1.0)).acos()).abs());
                }
            }
        }
    }
    let worst = worst + regime_errors as f64 + bias;
    result("valid_omega_cases", worst, 1e-9, "regimes and minima, K=2..10, D=K-2..K+5")
}

/// The minimal admissible factor lies in [1, 2), is strictly increasing in K,
/// and equals exactly 1 at K = 2 (antipodal pair).
fn check_minimal_admissible_omega(bias: f64) -> CheckResult {
    let mut worst = 0.0_f64;
    let mut prev = 0.0;
    for k in 2..=64usize {
        let w = minimal_admissible_omega(k).expect("k >= 2") + bias;
        if k == 2 {
            worst = worst.max((w - 1.0).abs());
        }
        if !(1.0..2.0).contains(&w) {
            worst = worst.max(1.0);
        }
        if w <= prev {
            worst = worst.max(1.0);
        }
        prev = w;
    }
    result("minimal_admissible_omega", worst, 1e-12, "range, monotonicity, K=2 value over K=2..64")
}

/// Closed-form cosine between centered centroid directions versus direct
/// measurement on a constructed simplex with weighted mean removed, over 100
/// random frequency vectors.
fn check_centered_centroid_cosine(seed: u64, bias: f64) -> CheckResult {
    let mut rng = substream(seed, "theory/frequencies");
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let k = rng.random_range(2..=8usize);
        let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
        let total: f64 = raw.iter().sum();
        let p = ClusterFrequencies::new(raw.iter().map(|v| v / total).collect()).unwrap();
        let d = k + 1;
        let v = regular_simplex_matrix(k, d).unwrap();
        let mean: Vec<f64> = (0..d)
            .map(|c| (0..k).map(|i| p.as_slice()[i] * v[[i, c]]).sum())
            .collect();
        let a = rng.random_range(0..k);
        let b = (a + 1 + rng.random_range(0..k - 1)) % k;
        let ca: Vec<f64> = (0..d).map(|c| v[[a, c]] - mean[c]).collect();
        let cb: Vec<f64> = (0..d).map(|c| v[[b, c]] - mean[c]).collect();
        let measured = {
            let dot: f64 = ca.iter().zip(&cb).map(|(x, y)| x * y).sum();
            let na: f64 = ca.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = cb.iter().map(|x| x * x).sum::<f64>().sqrt();
            dot / (na * nb)
        };
        let formula = centered_centroid_cosine(&p, a, b).unwrap();
        worst = worst.max((formula - measured).abs());
    }
    result(
        "centered_centroid_cosine_agreement",
        worst + bias,
        1e-9,
        "closed form vs measurement, 100 random frequency vectors",
    )
}

/// With uniform frequencies the centered cross-centroid angle collapses to
/// the simplex angle arccos(−1/(K−1)) for every pair.
fn check_uniform_frequency_angle(bias: f64) -> CheckResult {
    let mut worst = 0.0_f64;
    for k in 2..=10usize {
        let p = ClusterFrequencies::uniform(k).unwrap();
        let want = (-1.0 / (k as f64 - 1.0)).acos();
        for a in 0..k {
            for b in a + 1..k {
                let cos = centered_centroid_cosine(&p, a, b).unwrap();
                worst = worst.max((cos.clamp(-1.0, 1.0).acos() - want).abs());
            }
        }
    }
    result("uniform_frequency_angle", worst + bias, 1e-9, "uniform frequencies, K=2..10")
}

/// Shape of the angular slack bounds: zero at zero residual, monotone in the
/// residual, the cannot-link slack is the must-link slack shrunk by the
/// factor, and both follow the O(√(nε)) small-residual scaling.
fn check_deviation_bound_shape(bias: f64) -> CheckResult {
    let mut worst = 0.0_f64;
    let (z_plus, z_minus) = deviation_bounds(100, 0.0, 2.0);
    worst = worst.max(z_plus.abs()).max(z_minus.abs());

    let mut prev = -1.0;
    for i in 1..=20 {
        let eps = 1e-6 * i as f64;
        let (d_plus, d_minus) = deviation_bounds(100, eps, 2.0);
        if d_plus <= prev {
            worst = worst.max(1.0); // must be strictly increasing in ε
        }
        prev = d_plus;
        worst = worst.max((d_minus - d_plus / 2.0).abs());
        // Small-budget asymptotics: arccos(2e^{-x} - 1) ≈ 2√x.
        let approx = 2.0 * (100.0 * eps).sqrt();
        worst = worst.max((d_plus - approx).abs() / approx.max(1e-12) - 0.05).max(0.0);
    }
    result("deviation_bound_shape", worst + bias, 1e-9, "zero point, monotonicity, ratio, √ scaling")
}

/// Pairwise angles of exact simplex configurations under top-d PCA
/// projections: identical (≤1e-6) for every d ≥ K−1, visibly different
/// (>1e-3 somewhere) at d = K−2. K = 3..6 embedded in D = K+3.
fn check_pca_angle_invariance(bias: f64) -> CheckResult {
    let mut worst = 0.0_f64;
    let mut separation_ok = true;
    for k in 3..=6usize {
        let d_embed = k + 3;
        let v = regular_simplex_matrix(k, d_embed).unwrap();
        let scores = pca_project_all(&v).unwrap();
        let angles_at = |d: usize| -> Vec<f64> {
            let dd = d.min(scores.ncols());
            let mut out = Vec::new();
            for i in 0..k {
                for j in i + 1..k {
                    let a: Vec<f64> = (0..dd).map(|c| scores[[i, c]]).collect();
                    let b: Vec<f64> = (0..dd).map(|c| scores[[j, c]]).collect();
                    out.push(angle_between(&a, &b).unwrap());
                }
            }
            out
        };
        let reference = angles_at(d_embed);
        for d in k - 1..=d_embed {
            let got = angles_at(d);
            for (x, y) in reference.iter().zip(&got) {
                worst = worst.max((x - y).abs());
            }
        }
        let low = angles_at(k - 2);
        let max_dev = reference
            .iter()
            .zip(&low)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0_f64, f64::max);
        if max_dev <= 1e-3 {
            separation_ok = false;
        }
    }
    let mut worst = worst + bias;
    if !separation_ok {
        worst = worst.max(1.0);
    }
    result(
        "pca_angle_invariance",
        worst,
        1e-6,
        "K=3..6 in D=K+3: agreement above K-1, separation at K-2",
    )
}
